"""Light-cone pairings, two-sector Fock operators and Gaussian random fields."""

from .kinematics import Bivector, MetricConstants, SpacetimeRegion, causal_separation, contract_wave_bivector, minkowski_dot
from .testfns import TestFunction, bump, packet, reality_defect
from .pairing import LightConeQuadrature, gram_matrix, pair, pair_negative_via_conjugates, commutator_functional

__version__ = "0.1.0"
