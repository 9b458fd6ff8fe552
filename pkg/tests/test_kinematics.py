import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfoptics.kinematics import (
    Bivector,
    MetricConstants,
    SpacetimeRegion,
    causal_separation,
    contract_wave_bivector,
    minkowski_dot,
)

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
finite = st.floats(-10, 10, allow_nan=False)


def loop_dot(u, v):
    return sum(ETA[m, n] * u[m] * v[n] for m in range(4) for n in range(4))


def loop_contract(k, F):
    """Component loop: v^nu = eta^{nu mu} k^lam F_{lam mu} with k^lam contravariant."""
    T = F.as_tensor()
    low = [sum(k[l] * T[l, m] for l in range(4)) for m in range(4)]
    return np.array([sum(ETA[n, m] * low[m] for m in range(4)) for n in range(4)])


def brute_separation(a, b, n=5):
    """Sample both boxes densely (edges included) and look for a causal pair."""
    grids = []
    for r in (a, b):
        axes = [np.linspace(c - w, c + w, n) for c, w in zip(r.center, r.half_widths)]
        grids.append(np.array(list(itertools.product(*axes))))
    pa, pb = grids
    d = pb[None, :, :] - pa[:, None, :]
    s = d[..., 0] ** 2 - np.sum(d[..., 1:] ** 2, axis=-1)
    return "spacelike" if np.max(s) < 0 else "non-spacelike"


def test_dot_examples():
    assert minkowski_dot([1, 0, 0, 0], [1, 0, 0, 0]) == 1
    assert minkowski_dot([1, 1, 0, 0], [1, 1, 0, 0]) == 0
    u, v = [2, 1, -1, 3], [0, 4, 2, 1]
    assert minkowski_dot(u, v) == -5 == loop_dot(u, v)


@given(st.lists(finite, min_size=4, max_size=4), st.lists(finite, min_size=4, max_size=4))
def test_dot_matches_loop(u, v):
    assert minkowski_dot(u, v) == pytest.approx(loop_dot(u, v), abs=1e-9)


def test_contract_zero_bivector():
    assert np.all(contract_wave_bivector([3.0, 1.0, -2.0, 0.5], Bivector.zero()) == 0)


def test_contract_single_component():
    F = Bivector([1, 0, 0], [0, 0, 0])
    k = np.array([1.0, 1.0, 0.0, 0.0])
    v = contract_wave_bivector(k, F)
    # k^1 F_{10} = -1 lowered at index 0, k^0 F_{01} = 1 at index 1, raised with eta
    np.testing.assert_allclose(v, [-1, -1, 0, 0])
    np.testing.assert_allclose(v, loop_contract(k, F))


def test_tensor_round_trip(rng):
    F = Bivector(rng.normal(size=3) + 1j * rng.normal(size=3), rng.normal(size=3))
    T = F.as_tensor()
    np.testing.assert_array_equal(T, -T.T)
    assert Bivector.from_tensor(T).allclose(F)
    # magnetic convention: F_12 = -B_3
    assert T[1, 2] == -F.space_space[2]


cplx = st.builds(complex, finite, finite)


@settings(max_examples=200)
@given(st.lists(finite, min_size=3, max_size=3), st.lists(cplx, min_size=6, max_size=6))
def test_null_wave_vectors_are_spacelike(kvec, comps):
    kvec = np.array(kvec)
    k = np.concatenate([[np.linalg.norm(kvec)], kvec])
    F = Bivector(comps[:3], comps[3:])
    v = contract_wave_bivector(k, F)
    np.testing.assert_allclose(v, loop_contract(k, F), atol=1e-9)
    scale = (1 + np.sum(k**2)) * (1 + F.norm() ** 2)
    assert abs(minkowski_dot(k, v)) <= 1e-12 * scale
    assert minkowski_dot(v.conj(), v).real <= 1e-12 * scale


def test_contract_broadcasts(rng):
    k = rng.normal(size=(5, 7, 4))
    F = Bivector(rng.normal(size=3), rng.normal(size=3))
    v = contract_wave_bivector(k, F)
    assert v.shape == (5, 7, 4)
    np.testing.assert_allclose(v[2, 3], loop_contract(k[2, 3], F))


def test_causal_examples():
    a = SpacetimeRegion((0, 0, 0, 0), (0.5, 0.5, 0.5, 0.5))
    assert causal_separation(a, a.translated((0, 2.01, 0, 0))) == "spacelike"
    assert causal_separation(a, a.translated((0, 1.99, 0, 0))) == "non-spacelike"
    thin = SpacetimeRegion((0, 0, 0, 0), (1e-3, 0.5, 0.5, 0.5))
    assert causal_separation(thin, thin.translated((0, 0, 0, 1.01))) == "spacelike"
    assert causal_separation(a, a) == "non-spacelike"
    assert causal_separation(a, a.translated((3, 1, 0, 0))) == "non-spacelike"


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(0.1, 1), min_size=8, max_size=8))
def test_causal_matches_corner_oracle(delta, widths):
    a = SpacetimeRegion((0, 0, 0, 0), widths[:4])
    b = SpacetimeRegion(delta, widths[4:])
    got = causal_separation(a, b)
    # dense sampling can only miss causal pairs, so a non-spacelike verdict must be exact
    if brute_separation(a, b) == "non-spacelike":
        assert got == "non-spacelike"
    assert causal_separation(b, a) == got


def test_metric_constants_validation():
    assert MetricConstants().signature == (1, -1, -1, -1)
    with pytest.raises(ValueError):
        MetricConstants(0.0)
