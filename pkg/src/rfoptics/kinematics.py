"""Minkowski geometry in 3+1 dimensions.

Four-vectors are plain ``numpy`` arrays whose last axis has length 4 and
holds contravariant components ``(x^0, x^1, x^2, x^3)``.  The metric is
``diag(+1, -1, -1, -1)``.

A :class:`Bivector` stores an antisymmetric rank-2 tensor with lower
indices as two complex 3-vectors,

    F_{0i} = time_space[i]
    F_{ij} = -eps_{ijk} space_space[k]

i.e. the usual electric/magnetic split.  Both arrays may carry leading
batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
ETA.setflags(write=False)

_LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI_CIVITA[_i, _j, _k] = 1.0
    _LEVI_CIVITA[_j, _i, _k] = -1.0
_LEVI_CIVITA.setflags(write=False)


@dataclass(frozen=True)
class MetricConstants:
    """Fixed signature plus the scale ``hbar`` applied by the pairing layer."""

    hbar: float = 1.0
    signature: tuple = field(default=(1, -1, -1, -1), init=False)

    def __post_init__(self):
        if not (np.isfinite(self.hbar) and self.hbar > 0):
            raise ValueError(f"hbar must be a positive finite number, got {self.hbar!r}")


def four_vector(t, x=0.0, y=0.0, z=0.0):
    return np.array([t, x, y, z], dtype=float)


def minkowski_dot(u, v):
    """Return ``u^0 v^0 - u.v`` along the last axis (no conjugation)."""
    u = np.asarray(u)
    v = np.asarray(v)
    return u[..., 0] * v[..., 0] - np.sum(u[..., 1:] * v[..., 1:], axis=-1)


@dataclass(frozen=True, eq=False)
class Bivector:
    time_space: np.ndarray
    space_space: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.time_space, dtype=complex)
        b = np.asarray(self.space_space, dtype=complex)
        if e.shape[-1:] != (3,) or b.shape != e.shape:
            raise ValueError("bivector components must be matching (..., 3) arrays")
        object.__setattr__(self, "time_space", e)
        object.__setattr__(self, "space_space", b)

    @classmethod
    def zero(cls, shape=()):
        z = np.zeros(tuple(shape) + (3,), dtype=complex)
        return cls(z, z.copy())

    @classmethod
    def from_tensor(cls, F):
        """Build from a lower-index ``(..., 4, 4)`` tensor (antisymmetric part only)."""
        F = np.asarray(F, dtype=complex)
        A = 0.5 * (F - np.swapaxes(F, -1, -2))
        e = A[..., 0, 1:]
        b = -0.5 * np.einsum("ijk,...ij->...k", _LEVI_CIVITA, A[..., 1:, 1:])
        return cls(e, b)

    def as_tensor(self):
        e, b = self.time_space, self.space_space
        F = np.zeros(e.shape[:-1] + (4, 4), dtype=complex)
        F[..., 0, 1:] = e
        F[..., 1:, 0] = -e
        F[..., 1:, 1:] = -np.einsum("ijk,...k->...ij", _LEVI_CIVITA, b)
        return F

    def as_array(self):
        return np.concatenate([self.time_space, self.space_space], axis=-1)

    def conj(self):
        return Bivector(self.time_space.conj(), self.space_space.conj())

    def __add__(self, other):
        return Bivector(self.time_space + other.time_space, self.space_space + other.space_space)

    def __mul__(self, scalar):
        scalar = np.asarray(scalar)[..., None]
        return Bivector(self.time_space * scalar, self.space_space * scalar)

    __rmul__ = __mul__

    def norm(self):
        return np.sqrt(np.sum(np.abs(self.as_array()) ** 2, axis=-1))

    def allclose(self, other, rtol=1e-12, atol=0.0):
        return np.allclose(self.as_array(), other.as_array(), rtol=rtol, atol=atol)


def contract_wave_bivector(k, F):
    """Contract a wave vector with a bivector: ``v^nu = eta^{nu mu} k^lam F_{lam mu}``.

    ``k`` has shape ``(..., 4)``; ``F`` is a :class:`Bivector` whose batch
    shape broadcasts against ``k``.  The result is a complex ``(..., 4)``
    array of contravariant components.  ``minkowski_dot(k, v)`` vanishes
    identically by antisymmetry.
    """
    k = np.asarray(k, dtype=float)
    e, b = F.time_space, F.space_space
    k0 = k[..., :1]
    kvec = k[..., 1:]
    v_low0 = -np.sum(kvec * e, axis=-1, keepdims=True)
    kx, ky, kz = kvec[..., 0:1], kvec[..., 1:2], kvec[..., 2:3]
    bx, by, bz = b[..., 0:1], b[..., 1:2], b[..., 2:3]
    cross = np.concatenate([ky * bz - kz * by, kz * bx - kx * bz, kx * by - ky * bx], axis=-1)
    v_low = k0 * e + cross
    return np.concatenate([v_low0, -v_low], axis=-1)


@dataclass(frozen=True)
class SpacetimeRegion:
    """Closed axis-aligned box ``|x^mu - center^mu| <= half_widths^mu``."""

    center: tuple
    half_widths: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in np.asarray(self.center, dtype=float).reshape(4))
        w = tuple(float(x) for x in np.asarray(self.half_widths, dtype=float).reshape(4))
        if not all(np.isfinite(c)) or not all(x > 0 and np.isfinite(x) for x in w):
            raise ValueError("region needs finite center and positive half widths")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_widths", w)

    def corners(self):
        c = np.array(self.center)
        w = np.array(self.half_widths)
        return np.array([c + w * np.array(s) for s in product((-1.0, 1.0), repeat=4)])

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(np.abs(x - np.array(self.center)) <= np.array(self.half_widths), axis=-1)

    def translated(self, delta):
        return SpacetimeRegion(np.array(self.center) + np.asarray(delta, dtype=float), self.half_widths)


def causal_separation(a: SpacetimeRegion, b: SpacetimeRegion) -> str:
    """Classify two boxes as ``"spacelike"`` or ``"non-spacelike"``.

    The difference set of two boxes is again a box, so the largest value
    of ``dt^2 - |dx|^2`` over all point pairs is attained with ``|dt|`` at
    its extreme and each ``|dx_i|`` at its smallest value.  The boxes are
    spacelike separated iff that maximum is strictly negative.
    """
    dc = np.array(b.center) - np.array(a.center)
    w = np.array(a.half_widths) + np.array(b.half_widths)
    dt_max = abs(dc[0]) + w[0]
    dx_min = np.maximum(np.abs(dc[1:]) - w[1:], 0.0)
    return "spacelike" if dt_max**2 < float(np.sum(dx_min**2)) else "non-spacelike"
