"""Thermal broadening, the classical random field and its sampler.

Run with ``python demos/03_fluctuations_and_sampling.py``.
"""

# %%
import math

import numpy as np

from rfoptics import fock as fk
from rfoptics import randomfield as rf
from rfoptics import LightConeQuadrature, gram_matrix, packet

quad = LightConeQuadrature()


def unit(f):
    return (f * (1 / math.sqrt(gram_matrix([f], "positive", quad).entries[0, 0].real))).named(f.name)


f = unit(packet((1, 0, 0, 0, 1, 0), name="f"))
ba, bb = fk.build_mode_basis([f], "a", quad), fk.build_mode_basis([f], "b", quad)

# %% [markdown]
# Gibbs weights exp(-mu Xi_a - nu Xi_b) widen the vacuum Gaussian.  The
# fitted variance multiplier follows coth(mu / 2), the occupation law of
# exp(-mu N); coth(mu) is shown for comparison.

# %%
space = fk.FockSpace(1, 1, fk.gibbs_cutoff(0.5, 0.5, 2))
phi = fk.observable(fk.ObservableSpec("phi", f), ba, bb, space)
print(f"{'mu':>5} {'fitted':>12} {'coth(mu/2)':>12} {'coth(mu)':>12}")
for mu in (0.5, 1.0, 2.0, 4.0):
    rho = fk.gibbs_weight(fk.GibbsSpec(mu, mu), space)
    val = fk.characteristic_function(rho, phi, [0.5], warn=False)[0].real
    fitted = -2 * math.log(val) / 0.25
    print(f"{mu:5.1f} {fitted:12.8f} {1 / math.tanh(mu / 2):12.8f} {1 / math.tanh(mu):12.8f}")

# %% [markdown]
# The commuting observables chi behave as a classical Gaussian field.
# Draw from it and compare the empirical covariance with the model.

# %%
g = unit(packet((0.2, 1, 0, 0, 0.3, 1), center=(0.3, 0.5, -0.2, 0.1), name="g"))
model = rf.covariance([f, g], "vacuum", quad)
batch = rf.sample_batch(model, 100_000, seed=2024)
np.set_printoptions(precision=5, suppress=True)
print("model:\n", model.matrix)
print("empirical:\n", batch.empirical_covariance)
print("max |z| =", batch.summary(model)["max_z"])

# %% [markdown]
# For a single-quantum state the chi characteristic function equals the
# phi one smoothed by the negative-sheet Gaussian, even where phi's
# distribution is non-classical (its characteristic function turns
# negative, which no smoothing by a positive Gaussian can undo for phi).

# %%
h = unit(packet((0, 1, 0, 1, 0, 0), center=(0, 0.5, 0, 0), carrier=(6, 0, 0, 6), name="h"))
r = unit((h + h.conjugate()).named("r"))  # real, and overlaps h
ba2 = fk.build_mode_basis([r, h], "a", quad)
bb2 = fk.build_mode_basis([r], "b", quad)
sp2 = fk.FockSpace(ba2.modes, bb2.modes, 30)
psi = fk.state_prepare("single_quantum", ba2, sp2, h)
rep = rf.convolution_check(psi, r, np.linspace(0, 3, 7), ba2, bb2, sp2)
for l, a, b in zip(rep["lambdas"], rep["phi_chi"]["re"], rep["phi_phi_smoothed"]["re"]):
    print(f"lambda={l:.1f}  chi={a:+.10f}  phi*smooth={b:+.10f}")
print("max difference:", rep["max_difference"])
