"""Light-cone pairings, Gram matrices and the commutator across separations.

Run with ``python demos/01_pairing_and_causality.py``.
"""

# %%
import numpy as np

from rfoptics import LightConeQuadrature, bump, causal_separation, gram_matrix, packet, pair
from rfoptics.pairing import commutator_matrix

quad = LightConeQuadrature()
REAL = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

# %% [markdown]
# A real packet pairs with itself to a positive number on both light-cone
# sheets, and the two sheets agree because conjugation leaves it fixed.

# %%
f = packet(REAL, name="f")
pos = pair(f, f, quad)
neg = pair(f, f, quad.with_sheet("negative"))
print(f"(f, f)   = {pos.value.real:.12f}  (error estimate {pos.error_estimate:.1e}, {pos.nodes_used} nodes)")
print(f"(f, f)_- = {neg.value.real:.12f}")

# %% [markdown]
# A positive-frequency packet lives on one sheet only.

# %%
h = packet((0, 1, 0, 1, 0, 0), carrier=(6, 0, 0, 6), name="h")
print(f"(h, h) = {pair(h, h, quad).value.real:.6e}   (h, h)_- = {pair(h, h, quad.with_sheet('negative')).value.real:.1e}")

# %% [markdown]
# Gram matrix of a small bank; the smallest eigenvalue stays nonnegative.

# %%
bank = [f, packet(REAL, center=(0.5, 0.3, 0, 0), name="f2"), packet((0, 1, 0, 0, 0, 1), name="f3")]
g = gram_matrix(bank, "positive", quad)
np.set_printoptions(precision=5, suppress=True)
print(g.entries.real)
print("eigenvalues:", g.eigenvalues())

# %% [markdown]
# The commutator functional of two compact bumps.  It vanishes once the
# supports are spacelike separated.  A pure time shift leaves the supports
# causally connected, yet the commutator also vanishes there: a massless
# field propagates sharply on the light cone.  A shift just inside the
# cone picks up a visible value.

# %%
b0 = bump(REAL, radii=(0.8, 1, 1, 1), order=8, bandwidth=50.0, name="b0")
shifts = [(0, 0, 0, 0), (0, 0, 0, 1), (0, 0, 0, 2.5), (0, 0, 0, 4), (4, 0, 0, 0), (2.9, 0, 0, 2.755)]
partners = [b0.translate(s) for s in shifts]
c, res = commutator_matrix([b0] + partners, quad, real=True)
norm = res.matrix[0, 0].real
print(f"{'shift':>24} {'class':>14} {'|C| / (f, f)':>14}")
for j, s in enumerate(shifts, start=1):
    cls = causal_separation(b0.effective_region(), partners[j - 1].effective_region())
    print(f"{str(s):>24} {cls:>14} {abs(c[j, 0]) / norm:14.3e}")
