"""Bivector-valued test functions and their Fourier transforms.

Every term is separable: a constant polarization bivector times a product
of one-dimensional profiles, one per spacetime axis.  Two families exist:

* :class:`GaussianPacket` -- Gaussian envelope with a plane-wave carrier;
  transform in closed form.
* :class:`GridBump` -- polynomial bump ``(1 - u^2)^order`` sampled on a
  uniform lattice with exact compact support; transform is the discrete
  transform of the samples.

Fourier convention::

    f~(k) = \\int f(x) exp(+i (k^0 x^0 - kvec . xvec)) d^4x

so positive frequency means ``k^0 > 0``.  Writing ``q = (k^0, -k^1, -k^2,
-k^3)`` the kernel factorizes as ``prod_mu exp(i q_mu x^mu)``.  The carrier
``(w0, kvec0)`` multiplies the envelope by ``exp(-i (w0 t - kvec0 . x))``
(measured from the term's center), which moves the spectral peak to
``k = (w0, kvec0)``.

Term centers are kept as exact rationals so that translations compose
without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.stats import qmc

from .kinematics import Bivector, SpacetimeRegion, contract_wave_bivector

__all__ = [
    "BandwidthError",
    "GaussianPacket",
    "GridBump",
    "TestFunction",
    "packet",
    "bump",
    "bump_envelope",
    "fourier_transform",
    "conjugate",
    "reality_defect",
    "translate",
    "probe_points",
]

# Gaussian spectra fall below 1e-17 of their peak this many inverse widths away.
_GAUSS_BAND_WIDTHS = 9.0
# k R beyond which the (1 - u^2)^p transform envelope stays below 1e-8 of its
# peak, measured per order; orders in between use the next lower entry.
_BUMP_ENVELOPE = {4: 160.0, 6: 76.0, 8: 54.0, 12: 42.0, 16: 37.0}


def bump_envelope(order):
    """``k R`` at which a ``(1 - u^2)^order`` spectrum has decayed to ~1e-8."""
    if order < 4:
        raise ValueError("bump order must be >= 4 for a usable spectral envelope")
    return _BUMP_ENVELOPE[max(p for p in _BUMP_ENVELOPE if p <= order)]


class BandwidthError(ValueError):
    """A grid term was queried beyond its Nyquist frequency."""


def _signed(k):
    k = np.asarray(k, dtype=float)
    return np.concatenate([k[..., :1], -k[..., 1:]], axis=-1)


def _as_center(center):
    if isinstance(center, tuple) and len(center) == 4 and all(isinstance(c, Fraction) for c in center):
        return center
    vals = np.asarray(center, dtype=float).reshape(4)
    return tuple(Fraction(float(v)) for v in vals)


def _polarization(p):
    if isinstance(p, Bivector):
        return p
    arr = np.asarray(p, dtype=complex).reshape(6)
    return Bivector(arr[:3], arr[3:])


@dataclass(frozen=True, eq=False)
class _Term:
    polarization: Bivector
    center: tuple
    carrier: tuple = (0.0, 0.0, 0.0, 0.0)
    amplitude: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "polarization", _polarization(self.polarization))
        object.__setattr__(self, "center", _as_center(self.center))
        object.__setattr__(self, "carrier", tuple(float(c) for c in np.asarray(self.carrier, float).reshape(4)))
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    @property
    def center_array(self):
        return np.array([float(c) for c in self.center])

    @property
    def signed_carrier(self):
        c = np.array(self.carrier)
        return np.concatenate([c[:1], -c[1:]])

    def spectrum(self, k):
        """Scalar factor ``s(k)`` with ``f~(k) = s(k) * polarization``."""
        q = _signed(k)
        c = self.center_array
        out = np.full(q.shape[:-1], self.amplitude, dtype=complex)
        out *= np.exp(1j * (q @ c))
        for mu in range(4):
            out *= self._axis_values(mu, q[..., mu])
        return out

    def _axis_values(self, mu, q):
        return self._axis_transform(mu, q)

    def envelope(self, x):
        y = np.asarray(x, dtype=float) - self.center_array
        s = self.signed_carrier
        out = np.full(y.shape[:-1], self.amplitude, dtype=complex)
        out *= np.exp(-1j * (y @ s))
        for mu in range(4):
            out *= self._axis_profile(mu, y[..., mu])
        return out

    def conjugate(self):
        return replace(
            self,
            polarization=self.polarization.conj(),
            carrier=tuple(-c for c in self.carrier),
            amplitude=self.amplitude.conjugate(),
        )

    def translate(self, delta):
        d = np.asarray(delta, dtype=float).reshape(4)
        return replace(self, center=tuple(c + Fraction(float(x)) for c, x in zip(self.center, d)))

    def scaled(self, alpha):
        return replace(self, amplitude=self.amplitude * complex(alpha))

    def key(self):
        return (type(self).__name__, self.center, self.carrier, self.amplitude,
                tuple(self.polarization.as_array().tolist())) + self._shape_key()


@dataclass(frozen=True, eq=False)
class GaussianPacket(_Term):
    """Polarized Gaussian wave packet.

    Envelope ``exp(-t^2 / 2 tau^2 - |x|^2 / 2 sigma^2)`` about ``center``.
    """

    sigma: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not (self.sigma > 0 and self.tau > 0):
            raise ValueError("packet widths must be positive")

    @property
    def widths(self):
        return np.array([self.tau, self.sigma, self.sigma, self.sigma])

    @property
    def bandwidth(self):
        c = np.abs(np.array(self.carrier))
        return float(max(c[0], np.linalg.norm(c[1:])) + _GAUSS_BAND_WIDTHS / min(self.sigma, self.tau))

    def effective_region(self):
        return SpacetimeRegion(self.center_array, 3.0 * self.widths)

    def _axis_transform(self, mu, q):
        w = self.widths[mu]
        d = q - self.signed_carrier[mu]
        return math.sqrt(2 * math.pi) * w * np.exp(-0.5 * (w * d) ** 2)

    def _axis_profile(self, mu, y):
        w = self.widths[mu]
        return np.exp(-0.5 * (y / w) ** 2)

    def _shape_key(self):
        return (self.sigma, self.tau)


@dataclass(frozen=True, eq=False)
class GridBump(_Term):
    """Compactly supported bump sampled on a uniform 4D lattice.

    The lattice is centered on ``center`` with ``counts[mu]`` sites and
    spacing ``spacing[mu]`` along each axis.  Samples are
    ``(1 - u^2)^order`` with ``u = y / radii[mu]`` inside the support box
    and exactly zero outside it; the carrier phase is folded into the
    samples.  Samples are stored per axis; :meth:`samples` materializes
    the full 4D array for small lattices.
    """

    radii: tuple = (1.0, 1.0, 1.0, 1.0)
    order: int = 16
    spacing: tuple = (0.1, 0.1, 0.1, 0.1)
    counts: tuple = (21, 21, 21, 21)
    declared_bandwidth: float = 1.0
    nyquist_margin: float = 2.0

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))
        if min(self.radii) <= 0 or min(self.spacing) <= 0 or min(self.counts) < 2:
            raise ValueError("bump radii, spacing and counts must be positive")
        if self.nyquist_margin < 1:
            raise ValueError("nyquist_margin must be >= 1")
        nyq = math.pi / max(self.spacing)
        if nyq < self.nyquist_margin * self.declared_bandwidth * (1 - 1e-12):
            raise ValueError(
                f"lattice spacing {max(self.spacing)} too coarse for bandwidth "
                f"{self.declared_bandwidth} at margin {self.nyquist_margin}"
            )

    @property
    def bandwidth(self):
        return float(self.declared_bandwidth)

    @property
    def nyquist(self):
        return np.pi / np.array(self.spacing)

    @property
    def support(self):
        return SpacetimeRegion(self.center_array, self.radii)

    def effective_region(self):
        return self.support

    def lattice_offsets(self, mu):
        n, h = self.counts[mu], self.spacing[mu]
        return (np.arange(n) - (n - 1) / 2.0) * h

    def lattice(self, mu):
        return self.lattice_offsets(mu) + float(self.center[mu])

    def _axis_profile(self, mu, y):
        u = np.asarray(y, dtype=float) / self.radii[mu]
        inside = np.abs(u) < 1.0
        return np.where(inside, np.clip(1.0 - u * u, 0.0, None) ** self.order, 0.0)

    @cached_property
    def _axis_samples(self):
        s = self.signed_carrier
        out = []
        for mu in range(4):
            y = self.lattice_offsets(mu)
            out.append(self._axis_profile(mu, y) * np.exp(-1j * s[mu] * y))
        return tuple(out)

    def axis_samples(self, mu):
        """Samples along one axis with the carrier phase included."""
        return self._axis_samples[mu].copy()

    def samples(self):
        """Full lattice of scalar samples (amplitude included), shape ``counts``."""
        if np.prod(self.counts) > 5_000_000:
            raise MemoryError("lattice too large to materialize")
        a, b, c, d = self._axis_samples
        return self.amplitude * np.einsum("i,j,k,l->ijkl", a, b, c, d)

    def _check_band(self, mu, q):
        if np.any(np.abs(q) > self.nyquist[mu] * (1 + 1e-12)):
            raise BandwidthError(
                f"axis {mu}: |k| up to {np.max(np.abs(q)):.4g} exceeds Nyquist {self.nyquist[mu]:.4g}"
            )

    def _axis_transform(self, mu, q, method="direct"):
        q = np.asarray(q, dtype=float)
        self._check_band(mu, q)
        s = self._axis_samples[mu]
        h = self.spacing[mu]
        y0 = self.lattice_offsets(mu)[0]
        if method == "direct":
            # Horner evaluation of sum_j s_j z^j on the unit circle.
            z = np.exp(1j * q * h)
            return h * np.exp(1j * q * y0) * P.polyval(z, s)
        if method == "fft":
            return h * np.exp(1j * q * y0) * _dirichlet_interpolate(s, q * h)
        raise ValueError(f"unknown method {method!r}")

    def _axis_values(self, mu, q):
        # spherical node sets repeat wavenumbers along each axis many times
        if q.size < 4096:
            return self._axis_transform(mu, q)
        uniq, inverse = np.unique(q, return_inverse=True)
        if uniq.size > 0.7 * q.size:
            return self._axis_transform(mu, q)
        return self._axis_transform(mu, uniq)[inverse.reshape(q.shape)]

    def axis_transform(self, mu, q, method="direct"):
        """Discrete transform of one axis' samples at signed wavenumbers ``q``.

        ``method="fft"`` zero-pads the samples by a factor of two, takes an
        FFT and evaluates the periodic-sinc (Dirichlet) interpolant between
        the FFT bins; it agrees with ``"direct"`` to rounding.
        """
        return self._axis_transform(mu, q, method)

    def _shape_key(self):
        return (self.radii, self.order, self.spacing, self.counts)


def _dirichlet_interpolate(samples, theta, pad=2):
    n = len(samples)
    m = pad * n
    bins = np.fft.ifft(np.concatenate([samples, np.zeros(m - n)])) * m  # sum_j s_j e^{+i 2pi mj/M}
    theta = np.asarray(theta, dtype=float)
    alpha = theta[..., None] - 2 * np.pi * np.arange(m) / m
    # sum_{j<M} e^{i alpha j} = e^{i alpha (M-1)/2} sin(M alpha/2) / sin(alpha/2)
    half = 0.5 * alpha
    num = np.sin(m * half)
    den = np.sin(half)
    small = np.abs(den) < 1e-14
    ratio = np.where(small, m * np.cos(m * half) / np.where(small, np.cos(half), 1.0), num / np.where(small, 1.0, den))
    kern = np.exp(1j * half * (m - 1)) * ratio
    return kern @ bins / m


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Finite sum of packet and grid terms.

    Instances are immutable; the arithmetic operators return new objects.
    """

    __test__ = False  # not a pytest class

    terms: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def __call__(self, x):
        """Field values at points ``x`` of shape ``(..., 4)``."""
        x = np.asarray(x, dtype=float)
        total = Bivector.zero(x.shape[:-1])
        for t in self.terms:
            total = total + t.polarization * t.envelope(x)
        return total

    def fourier_transform(self, k):
        k = np.asarray(k, dtype=float)
        total = Bivector.zero(k.shape[:-1])
        for t in self.terms:
            total = total + t.polarization * t.spectrum(k)
        return total

    def wave_vectors(self, k):
        """``k^lam f~_{lam nu}(k)`` with the index raised, shape ``(..., 4)``."""
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape[:-1] + (4,), dtype=complex)
        for t in self.terms:
            # the contraction is linear in k: v = k @ M with M built from the basis vectors
            m = contract_wave_bivector(np.eye(4), t.polarization)
            out += t.spectrum(k)[..., None] * (k @ m)
        return out

    @property
    def bandwidth(self):
        return max((t.bandwidth for t in self.terms), default=0.0)

    @property
    def support(self):
        """Bounding box of the support if every term is compact, else ``None``."""
        if not self.terms or not all(isinstance(t, GridBump) for t in self.terms):
            return None
        return _bounding_box([t.support for t in self.terms])

    def effective_region(self):
        if not self.terms:
            return SpacetimeRegion(np.zeros(4), np.ones(4))
        return _bounding_box([t.effective_region() for t in self.terms])

    def conjugate(self):
        name = f"{self.name}*" if self.name else ""
        return TestFunction(tuple(t.conjugate() for t in self.terms), name)

    def translate(self, delta):
        return TestFunction(tuple(t.translate(delta) for t in self.terms), self.name)

    def named(self, name):
        return TestFunction(self.terms, name)

    def __add__(self, other):
        return TestFunction(self.terms + other.terms)

    def __mul__(self, alpha):
        return TestFunction(tuple(t.scaled(alpha) for t in self.terms), self.name)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def key(self):
        """Hashable structural identity (term order matters)."""
        return tuple(t.key() for t in self.terms)

    def __repr__(self):
        label = self.name or "anonymous"
        kinds = ",".join(type(t).__name__ for t in self.terms)
        return f"TestFunction({label}: {kinds})"


def _bounding_box(regions):
    lo = np.min([np.array(r.center) - np.array(r.half_widths) for r in regions], axis=0)
    hi = np.max([np.array(r.center) + np.array(r.half_widths) for r in regions], axis=0)
    return SpacetimeRegion((lo + hi) / 2, (hi - lo) / 2)


def packet(polarization, center=(0, 0, 0, 0), sigma=1.0, tau=1.0, carrier=(0, 0, 0, 0), amplitude=1.0, name=""):
    """Single-packet test function."""
    term = GaussianPacket(polarization, center, carrier, amplitude, sigma=sigma, tau=tau)
    return TestFunction((term,), name)


def bump(
    polarization,
    center=(0, 0, 0, 0),
    radii=(1.0, 1.0, 1.0, 1.0),
    carrier=(0, 0, 0, 0),
    amplitude=1.0,
    order=16,
    bandwidth=None,
    nyquist_margin=2.0,
    name="",
):
    """Grid bump test function with a lattice chosen from the bandwidth.

    If ``bandwidth`` is omitted it is set where the spectrum envelope of
    the given order has dropped to about ``1e-8`` of its peak along the
    narrowest axis, shifted by the carrier.  The spacing then satisfies ``pi / h >= nyquist_margin *
    bandwidth`` on every axis.
    """
    radii = tuple(float(r) for r in np.asarray(radii, dtype=float).reshape(4))
    carrier = np.asarray(carrier, dtype=float).reshape(4)
    if bandwidth is None:
        shift = max(abs(carrier[0]), float(np.linalg.norm(carrier[1:])))
        bandwidth = shift + bump_envelope(order) / min(radii)
    h_max = math.pi / (nyquist_margin * bandwidth)
    counts, spacing = [], []
    for r in radii:
        n = 2 * math.ceil(r / h_max) + 1
        counts.append(n)
        spacing.append(2 * r / (n - 1))
    term = GridBump(
        polarization,
        center,
        carrier,
        amplitude,
        radii=radii,
        order=order,
        spacing=tuple(spacing),
        counts=tuple(counts),
        declared_bandwidth=float(bandwidth),
        nyquist_margin=float(nyquist_margin),
    )
    return TestFunction((term,), name)


def fourier_transform(f: TestFunction, k):
    return f.fourier_transform(k)


def conjugate(f: TestFunction) -> TestFunction:
    return f.conjugate()


def translate(f: TestFunction, delta) -> TestFunction:
    return f.translate(delta)


def probe_points(region: SpacetimeRegion, n=128):
    """Deterministic Halton points filling ``region``."""
    sampler = qmc.Halton(d=4, scramble=False)
    u = sampler.random(n + 1)[1:]  # skip the origin corner
    c = np.array(region.center)
    w = np.array(region.half_widths)
    return c + (2 * u - 1) * w


def reality_defect(f: TestFunction, n_probes=128) -> float:
    """Max over a fixed probe set of ``|f(x) - conj f(x)|`` (6-component norm)."""
    x = probe_points(f.effective_region(), n_probes)
    vals = f(x).as_array()
    return float(np.max(np.sqrt(np.sum(np.abs(vals - vals.conj()) ** 2, axis=-1)), initial=0.0))
