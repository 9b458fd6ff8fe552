"""Truncated Fock realization: ladder operators and the three observables.

Run with ``python demos/02_fock_observables.py``.
"""

# %%
import math

import numpy as np

from rfoptics import fock as fk
from rfoptics import LightConeQuadrature, gram_matrix, packet

quad = LightConeQuadrature()


def unit(f):
    return (f * (1 / math.sqrt(gram_matrix([f], "positive", quad).entries[0, 0].real))).named(f.name)


f = unit(packet((1, 0, 0, 0, 1, 0), name="f"))
g = unit(packet((0.2, 1, 0, 0, 0.3, 1), center=(0.3, 0.5, -0.2, 0.1), name="g"))

ba = fk.build_mode_basis([f, g], "a", quad)
bb = fk.build_mode_basis([f, g], "b", quad)
space = fk.FockSpace(ba.modes, bb.modes, 6)
print(f"{ba.modes} + {bb.modes} modes, cutoff {space.cutoff}, dimension {space.dimension}")

# %% [markdown]
# Ladder operators.  Annihilators commute bit-exactly; the mixed
# commutator reproduces the pairing below the top excitation level.

# %%
a_f = fk.ladder_operator(ba, f, "annihilate", "a", space)
a_g = fk.ladder_operator(ba, g, "annihilate", "a", space)
ad_g = fk.ladder_operator(ba, g, "create", "a", space)
print("[a_f, a_g] exactly zero:", fk.commutator(a_f, a_g).is_exactly_zero())
gf = ba.pair(g, f)
resid = (fk.commutator(a_f, ad_g) - fk._identity(space) * gf).restricted_norm()
print(f"(g, f) = {gf:.6f};  ||[a_f, a_g^+] - (g, f)|| on safe subspace = {resid:.1e}")

# %% [markdown]
# The field phi does not commute with itself at different test functions,
# the doubled field chi does, and xi interpolates with weight
# alpha^2 - beta^2.

# %%
def obs(kind, fn, alpha=1.0, beta=0.0):
    return fk.observable(fk.ObservableSpec(kind, fn, alpha, beta), ba, bb, space)


cp = fk.commutator(obs("phi", f), obs("phi", g)).restricted_norm()
cc = fk.commutator(obs("chi", f), obs("chi", g)).restricted_norm()
print(f"||[phi_f, phi_g]|| = {cp:.4f}   ||[chi_f, chi_g]|| = {cc:.1e}")
for alpha, beta in [(1.0, 0.0), (1.0, 0.5), (1.0, 1.0), (0.5, 1.0)]:
    cx = fk.commutator(obs("xi", f, alpha, beta), obs("xi", g, alpha, beta)).restricted_norm()
    print(f"alpha={alpha:.1f} beta={beta:.1f}:  ||[xi_f, xi_g]|| = {cx:.4f}   |alpha^2 - beta^2| * {cp:.4f} = "
          f"{abs(alpha**2 - beta**2) * cp:.4f}")

# %% [markdown]
# Vacuum characteristic function of xi against the Gaussian closed form.

# %%
big = fk.FockSpace(1, 1, 24)
b1a, b1b = fk.build_mode_basis([f], "a", quad), fk.build_mode_basis([f], "b", quad)
xi = fk.observable(fk.ObservableSpec("xi", f, 0.8, 0.6), b1a, b1b, big)
lam = np.linspace(0, 3, 7)
num = fk.characteristic_function(big.vacuum(), xi, lam)
ana = fk.characteristic_function(big.vacuum(), xi, lam, method="analytic-gaussian")
for l, n, a in zip(lam, num, ana):
    print(f"lambda={l:.1f}  numeric={n.real:.10f}  gaussian={a.real:.10f}")
