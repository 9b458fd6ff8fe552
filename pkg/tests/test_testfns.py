import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfoptics.testfns import (
    BandwidthError,
    GridBump,
    bump,
    conjugate,
    fourier_transform,
    packet,
    probe_points,
    reality_defect,
    translate,
)

POL = (1.0, 0.5j, 0.0, 0.2, 0.0, -1.0)
REAL = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)


def signed(k):
    k = np.asarray(k, float)
    return np.concatenate([k[..., :1], -k[..., 1:]], axis=-1)


def trapezoid_transform(f, k, h=0.4, half=7.0):
    """Brute 4D sum of f(x) exp(i q.x) h^4 on a cube around the packet center."""
    c = f.effective_region().center
    axes = [np.arange(-half, half + h / 2, h) + c[m] for m in range(4)]
    q = signed(k)
    total = np.zeros(6, complex)
    for t in axes[0]:
        xs = np.stack(np.meshgrid([t], *axes[1:], indexing="ij"), axis=-1).reshape(-1, 4)
        vals = f(xs).as_array()
        total += (np.exp(1j * xs @ q)[:, None] * vals).sum(axis=0)
    return total * h**4


@pytest.mark.parametrize("k", [(1.2, 0.8, -0.3, 0.5), (0.0, 0.0, 0.0, 0.0), (2.0, 1.0, 1.0, -1.0)])
def test_packet_transform_matches_brute_sum(k):
    f = packet(POL, center=(0.2, -0.1, 0.3, 0.0), sigma=0.9, tau=1.1, carrier=(1.0, 0.5, 0.0, 0.5))
    exact = f.fourier_transform(np.array(k)).as_array()
    oracle = trapezoid_transform(f, k)
    assert np.max(np.abs(exact - oracle)) <= 1e-6 * np.max(np.abs(exact)) + 1e-12


def test_packet_peak_and_widths():
    carrier = np.array([2.0, 1.0, 0.0, 0.0])
    f = packet(REAL, sigma=0.5, tau=2.0, carrier=carrier)
    peak = np.abs(f.fourier_transform(carrier).as_array()).max()
    assert peak == pytest.approx(np.sqrt(2 * np.pi) ** 4 * 2.0 * 0.5**3)
    # one inverse width along time shrinks by exp(-1/2)
    off = np.abs(f.fourier_transform(carrier + [1 / 2.0, 0, 0, 0]).as_array()).max()
    assert off / peak == pytest.approx(np.exp(-0.5))
    off = np.abs(f.fourier_transform(carrier + [0, 0, 1 / 0.5, 0]).as_array()).max()
    assert off / peak == pytest.approx(np.exp(-0.5))


def test_zero_amplitude():
    f = packet(POL, amplitude=0.0)
    k = np.random.default_rng(0).normal(size=(20, 4))
    assert np.all(f.fourier_transform(k).as_array() == 0)


def test_bump_transform_is_lattice_sum():
    f = bump(POL, center=(0.1, 0, 0, 0.2), radii=(0.6, 0.5, 0.5, 0.5), order=4, bandwidth=6.0, carrier=(1, 0, 0, 1))
    term = f.terms[0]
    s = term.samples()
    grids = np.meshgrid(*[term.lattice(m) for m in range(4)], indexing="ij")
    x = np.stack(grids, axis=-1)
    vol = np.prod(term.spacing)
    for k in [(0.3, 1.0, -2.0, 0.5), (4.0, 0.0, 3.0, -1.0)]:
        direct = vol * np.sum(s * np.exp(1j * x @ signed(k)))
        got = f.fourier_transform(np.array(k)).as_array()
        np.testing.assert_allclose(got, direct * term.polarization.as_array(), rtol=1e-11, atol=1e-14)


def test_bump_fft_path_agrees():
    f = bump(REAL, radii=(0.8, 1, 1, 1), order=8, bandwidth=20.0)
    term = f.terms[0]
    q = np.linspace(-25, 25, 301)
    for mu in range(4):
        a = term.axis_transform(mu, q, "direct")
        b = term.axis_transform(mu, q, "fft")
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_bump_beyond_nyquist_raises():
    f = bump(REAL, order=4, bandwidth=5.0)
    nyq = f.terms[0].nyquist.max()
    with pytest.raises(BandwidthError):
        f.fourier_transform(np.array([1.01 * nyq, 0, 0, 0]))


def test_bump_lattice_too_coarse():
    with pytest.raises(ValueError):
        GridBump(REAL, (0, 0, 0, 0), spacing=(0.5,) * 4, counts=(5,) * 4, declared_bandwidth=10.0)


def test_bump_is_compact():
    f = bump(REAL, radii=(0.5, 1, 1, 1), order=6, bandwidth=8.0)
    assert f.support.half_widths == (0.5, 1.0, 1.0, 1.0)
    outside = np.array([[0.51, 0, 0, 0], [0, 0, 1.2, 0]])
    assert np.all(f(outside).as_array() == 0)


@pytest.mark.parametrize("make", [
    lambda: packet(POL, center=(0.3, 0.1, 0, -0.2), carrier=(2, 1, 0, 0.5)),
    lambda: bump(POL, center=(0.25, 0, 0.5, 0), radii=(0.5, 0.5, 0.5, 0.5), order=4, bandwidth=6.0),
])
def test_shift_theorem(make):
    f = make()
    delta = np.array([0.7, -0.4, 1.1, 0.25])
    k = np.random.default_rng(3).uniform(-4, 4, size=(50, 4))
    phase = np.exp(1j * signed(k) @ delta)
    got = translate(f, delta).fourier_transform(k).as_array()
    want = phase[:, None] * f.fourier_transform(k).as_array()
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12 * np.abs(want).max())


def test_translate_identity_and_inverse():
    f = packet(POL, center=(0.1, 0.2, 0.3, 0.4))
    assert f.translate((0, 0, 0, 0)).key() == f.key()
    d = (0.1, 1 / 3, -2.7, 1e-9)
    assert f.translate(d).translate(tuple(-x for x in d)).key() == f.key()


def test_grid_translation_by_one_site_shifts_samples():
    f = bump(REAL, radii=(0.6, 0.6, 0.6, 0.6), order=4, bandwidth=6.0)
    term = f.terms[0]
    h = term.spacing[2]
    grids = np.meshgrid(*[term.lattice(m) for m in range(4)], indexing="ij")
    x = np.stack(grids, axis=-1)
    before = f(x).as_array()[..., 0]
    after = f.translate((0, 0, h, 0))(x).as_array()[..., 0]
    # edge samples vanish, so the roll does not wrap anything nonzero
    assert np.all(before[:, :, -1] == 0)
    np.testing.assert_allclose(after, np.roll(before, 1, axis=2), atol=1e-15)


def test_conjugate_of_real_and_involution():
    f = packet(REAL, center=(0.1, 0, 0, 0))
    assert conjugate(f).key() == f.key()
    g = packet(POL, carrier=(1, 2, 0, 0), amplitude=0.3 + 0.4j)
    assert conjugate(conjugate(g)).key() == g.key()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_conjugate_transform_compatibility(carrier, k):
    f = packet(POL, center=(0.2, 0.1, 0, 0), carrier=carrier, amplitude=1 - 2j)
    k = np.array(k)
    got = fourier_transform(conjugate(f), k).as_array()
    want = fourier_transform(f, -k).as_array().conj()
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-14)


def test_positive_packet_conjugate_is_negative_frequency():
    h = packet(POL, carrier=(6, 0, 0, 6))
    rng = np.random.default_rng(5)
    kvec = rng.normal(size=(2000, 3)) * 4
    w = np.linalg.norm(kvec, axis=1, keepdims=True)
    pos = np.concatenate([w, kvec], axis=1)
    neg = np.concatenate([-w, kvec], axis=1)
    hc = conjugate(h)
    peak = np.abs(h.fourier_transform(np.array([6.0, 0, 0, 6.0])).as_array()).max()
    assert np.abs(hc.fourier_transform(pos).as_array()).max() < 1e-12 * peak
    assert np.abs(hc.fourier_transform(neg).as_array()).max() > 1e-3 * peak


def test_linearity():
    f = packet(POL, center=(0.2, 0, 0, 0), carrier=(1, 0, 1, 0))
    g = bump(REAL, radii=(0.5, 0.5, 0.5, 0.5), order=4, bandwidth=6.0)
    a, b = 0.3 - 1.2j, 2.0
    k = np.random.default_rng(1).uniform(-3, 3, size=(40, 4))
    lhs = (a * f + b * g).fourier_transform(k).as_array()
    rhs = a * f.fourier_transform(k).as_array() + b * g.fourier_transform(k).as_array()
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())


def test_reality_defect():
    g = packet(REAL, center=(0.1, 0.2, 0, 0))
    assert reality_defect(g) == 0.0
    x = probe_points(g.effective_region())
    norm = np.max(np.linalg.norm(g(x).as_array(), axis=-1))
    assert reality_defect(1j * g) == pytest.approx(2 * norm, rel=1e-14)
    hh = packet((0, 1, 0, 0, 0, 1), center=(0.1, 0.2, 0, 0))
    d = [reality_defect(g + (1j * eps) * hh) for eps in (1e-3, 2e-3, 4e-3)]
    assert d[1] / d[0] == pytest.approx(2, rel=1e-10)
    assert d[2] / d[0] == pytest.approx(4, rel=1e-10)


def test_probe_points_are_deterministic():
    g = packet(REAL)
    np.testing.assert_array_equal(probe_points(g.effective_region()), probe_points(g.effective_region()))
