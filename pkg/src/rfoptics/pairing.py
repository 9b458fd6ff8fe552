"""Light-cone pairings of test functions.

The positive-sheet pairing is

    (g, f) = -hbar \\int conj(v_g(k)) . v_f(k)  d^3k / ((2 pi)^3 2 |k|),   k^0 = +|k|

with ``v_f = k^lam f~_{lam nu}`` and ``.`` the Minkowski product; the
negative sheet uses ``k^0 = -|k|``.  The integral is done in spherical
coordinates: Gauss-Legendre in ``u = w / (s + w)`` radially, Gauss-Legendre
in ``cos(theta)`` and the periodic trapezoid rule in ``phi``.  Node sets
are symmetric under ``kvec -> -kvec``.  All node counts grow together
until successive values agree to ``tolerance`` relative to the
Cauchy-Schwarz scale ``sqrt((f, f)(g, g))``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from .kinematics import ETA, MetricConstants
from .testfns import TestFunction

__all__ = [
    "QuadratureError",
    "CutoffError",
    "HermiticityError",
    "LightConeQuadrature",
    "PairingResult",
    "GramMatrix",
    "pair",
    "pair_negative_via_conjugates",
    "commutator_functional",
    "commutator_matrix",
    "gram_matrix",
    "pairing_matrix",
    "cross_pairings",
]

_ETA_DIAG = np.diag(ETA)


class QuadratureError(RuntimeError):
    """Refinement did not converge within the allowed rounds or node budget."""


class CutoffError(ValueError):
    pass


class HermiticityError(RuntimeError):
    pass


@dataclass(frozen=True)
class LightConeQuadrature:
    """Node layout and refinement policy for mass-shell integrals.

    ``cutoff=None`` means "the largest bandwidth among the inputs".  When
    ``radial_scale`` is ``None`` the compactification scale equals the
    cutoff.
    """

    radial_nodes: int = 24
    polar_nodes: int = 16
    azimuthal_nodes: int = 16
    cutoff: float | None = None
    tolerance: float = 1e-8
    sheet: str = "positive"
    radial_scale: float | None = None
    growth: float = 1.5
    max_rounds: int = 10
    max_nodes: int = 40_000_000
    block_size: int = 16384
    threads: int = 1

    def __post_init__(self):
        if min(self.radial_nodes, self.polar_nodes, self.azimuthal_nodes) < 4:
            raise ValueError("node counts must be >= 4")
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.sheet not in ("positive", "negative"):
            raise ValueError(f"sheet must be 'positive' or 'negative', got {self.sheet!r}")
        if self.cutoff is not None and self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.growth <= 1:
            raise ValueError("growth must exceed 1")
        if self.azimuthal_nodes % 2:
            object.__setattr__(self, "azimuthal_nodes", self.azimuthal_nodes + 1)

    def with_sheet(self, sheet):
        return replace(self, sheet=sheet)

    def refined(self, rounds=1):
        g = self.growth**rounds
        az = int(math.ceil(self.azimuthal_nodes * g))
        return replace(
            self,
            radial_nodes=int(math.ceil(self.radial_nodes * g)),
            polar_nodes=int(math.ceil(self.polar_nodes * g)),
            azimuthal_nodes=az + az % 2,
        )

    @property
    def node_count(self):
        return self.radial_nodes * self.polar_nodes * self.azimuthal_nodes

    def resolve_cutoff(self, functions):
        band = max((f.bandwidth for f in functions), default=0.0)
        if self.cutoff is None:
            return band if band > 0 else 1.0
        if self.cutoff < band * (1 - 1e-12):
            raise CutoffError(f"cutoff {self.cutoff} below input bandwidth {band}")
        return float(self.cutoff)

    def nodes(self, cutoff):
        """Return ``(k, weights)``: on-shell wave vectors ``(N, 4)`` and measure weights."""
        s = float(self.radial_scale) if self.radial_scale else cutoff
        u_max = cutoff / (s + cutoff)
        x, wx = leggauss(self.radial_nodes)
        u = 0.5 * u_max * (x + 1.0)
        wu = 0.5 * u_max * wx
        omega = s * u / (1.0 - u)
        w_omega = wu * s / (1.0 - u) ** 2

        mu, wmu = leggauss(self.polar_nodes)
        n_phi = self.azimuthal_nodes
        phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        w_phi = 2 * np.pi / n_phi

        om, mm, pp = np.meshgrid(omega, mu, phi, indexing="ij")
        st = np.sqrt(1.0 - mm**2)
        sign = 1.0 if self.sheet == "positive" else -1.0
        k = np.stack([sign * om, om * st * np.cos(pp), om * st * np.sin(pp), om * mm], axis=-1).reshape(-1, 4)
        # d^3k / ((2pi)^3 2 w) = w dw dOmega / (2 (2pi)^3)
        radial = omega * w_omega / (2.0 * (2 * np.pi) ** 3)
        w = (radial[:, None, None] * wmu[None, :, None] * w_phi * np.ones_like(pp)).reshape(-1)
        return k, w


def _integrate_blocks(rows, cols, k, w, block, threads):
    """sum_nodes w conj(v_row) . v_col, reduced in fixed block order."""
    n = len(k)
    starts = list(range(0, n, block))

    def one(start):
        kb = k[start : start + block]
        wb = w[start : start + block]
        vr = np.stack([f.wave_vectors(kb) for f in rows])  # (nr, B, 4)
        vc = vr if cols is rows else np.stack([f.wave_vectors(kb) for f in cols])
        left = np.conj(vr) * (wb[:, None] * _ETA_DIAG)
        return left.reshape(len(rows), -1) @ vc.reshape(len(cols), -1).T

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, starts))
    else:
        parts = [one(s) for s in starts]
    total = np.zeros((len(rows), len(cols)), dtype=complex)
    for p in parts:
        total += p
    return total


@dataclass
class _Integration:
    matrix: np.ndarray
    errors: np.ndarray
    quadrature: LightConeQuadrature
    cutoff: float
    nodes_used: int
    rounds: int


def pairing_matrix(functions, quad: LightConeQuadrature, constants: MetricConstants = MetricConstants()):
    """All pairings ``M[i, j] = (f_i, f_j)`` on ``quad.sheet`` with refinement.

    Returns an object with ``matrix``, element-wise ``errors`` (last
    refinement delta), the converged ``quadrature`` and ``nodes_used``.
    """
    functions = list(functions)
    cutoff = quad.resolve_cutoff(functions)
    hbar = constants.hbar
    current = quad
    prev = None
    total_nodes = 0
    for r in range(quad.max_rounds + 1):
        if current.node_count > quad.max_nodes:
            break
        k, w = current.nodes(cutoff)
        m = -hbar * _integrate_blocks(functions, functions, k, w, quad.block_size, quad.threads)
        total_nodes = current.node_count
        if prev is not None:
            delta = np.abs(m - prev)
            diag = np.abs(np.real(np.diag(m)))
            scale = np.sqrt(np.outer(diag, diag))
            ref = np.where(scale > 0, scale, np.max(diag, initial=0.0))
            if np.all(delta <= quad.tolerance * ref) or not np.any(ref):
                return _Integration(m, delta, current, cutoff, total_nodes, r)
        prev = m
        current = current.refined()
    raise QuadratureError(
        f"pairing did not converge to {quad.tolerance:g} within {quad.max_rounds} rounds "
        f"/ {quad.max_nodes} nodes (last {total_nodes} nodes)"
    )


def cross_pairings(rows, cols, quad: LightConeQuadrature, cutoff, constants: MetricConstants = MetricConstants()):
    """``(row_i, col_j)`` on the fixed node set of ``quad`` (no refinement)."""
    k, w = quad.nodes(cutoff)
    return -constants.hbar * _integrate_blocks(list(rows), list(cols), k, w, quad.block_size, quad.threads)


@dataclass(frozen=True)
class PairingResult:
    value: complex
    error_estimate: float
    nodes_used: int


def pair(g: TestFunction, f: TestFunction, quad: LightConeQuadrature, constants: MetricConstants = MetricConstants()):
    """``(g, f)`` on the sheet selected by ``quad`` (antilinear in ``g``)."""
    res = pairing_matrix([g, f], quad, constants)
    return PairingResult(complex(res.matrix[0, 1]), float(res.errors[0, 1]), res.nodes_used)


def pair_negative_via_conjugates(g, f, quad: LightConeQuadrature, constants: MetricConstants = MetricConstants()):
    """``(g, f)_-`` computed as ``(f*, g*)`` on the positive sheet."""
    return pair(f.conjugate(), g.conjugate(), quad.with_sheet("positive"), constants)


def commutator_functional(f, g, quad: LightConeQuadrature, constants: MetricConstants = MetricConstants()):
    """``(g*, f) - (f*, g)`` from positive-sheet pairings: the c-number ``[phi_f, phi_g]``."""
    q = quad.with_sheet("positive")
    res = pairing_matrix([f, g, f.conjugate(), g.conjugate()], q, constants)
    m = res.matrix
    return complex(m[3, 0] - m[2, 1])


def commutator_matrix(functions, quad: LightConeQuadrature, constants: MetricConstants = MetricConstants(),
                      real=False):
    """``C[i, j] = (f_j*, f_i) - (f_i*, f_j)`` for every pair in ``functions``.

    With ``real=True`` the inputs are taken to equal their conjugates, so a
    single positive-sheet matrix ``M`` suffices: ``C = M.T - M``.
    """
    functions = list(functions)
    q = quad.with_sheet("positive")
    if real:
        res = pairing_matrix(functions, q, constants)
        m = res.matrix
        return m.T - m, res
    n = len(functions)
    res = pairing_matrix(functions + [f.conjugate() for f in functions], q, constants)
    m = res.matrix
    cross = m[n:, :n]  # cross[j, i] = (f_j*, f_i)
    return cross.T - cross, res


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    sector: str
    bank: tuple
    errors: np.ndarray
    hermiticity_defect: float
    quadrature: LightConeQuadrature
    cutoff: float
    nodes_used: int

    @property
    def size(self):
        return self.entries.shape[0]

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.entries)

    def psd_margin(self):
        """Smallest eigenvalue divided by the largest (>= -1e-10 means PSD)."""
        ev = self.eigenvalues()
        top = max(float(ev[-1]), 0.0)
        return float(ev[0] / top) if top > 0 else 0.0

    def is_psd(self, slack=1e-10):
        return self.psd_margin() >= -slack

    def to_csv(self, path=None):
        """Row-major CSV, each cell written as the pair ``re,im``."""
        lines = []
        for row in self.entries:
            lines.append(",".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self):
        return {
            "sector": self.sector,
            "bank": list(self.bank),
            "entries": {"re": self.entries.real.tolist(), "im": self.entries.imag.tolist()},
            "error_estimates": self.errors.tolist(),
            "hermiticity_defect": self.hermiticity_defect,
            "nodes_used": self.nodes_used,
            "cutoff": self.cutoff,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def gram_matrix(bank, sector, quad: LightConeQuadrature, constants: MetricConstants = MetricConstants(),
                defect_bound=1e-8):
    """Hermitian Gram matrix ``G[i, j] = (f_i, f_j)`` on the given sheet."""
    bank = list(bank)
    if not bank:
        raise ValueError("bank must be nonempty")
    res = pairing_matrix(bank, quad.with_sheet(sector), constants)
    g = res.matrix
    scale = np.max(np.abs(g), initial=0.0)
    defect = float(np.max(np.abs(g - g.conj().T)) / scale) if scale > 0 else 0.0
    if defect > defect_bound:
        raise HermiticityError(f"Gram Hermiticity defect {defect:.3g} exceeds {defect_bound:g}")
    g = 0.5 * (g + g.conj().T)
    names = tuple(f.name or f"f{i}" for i, f in enumerate(bank))
    return GramMatrix(g, sector, names, res.errors, defect, res.quadrature, res.cutoff, res.nodes_used)
