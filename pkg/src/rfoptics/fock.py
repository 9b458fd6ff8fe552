"""Truncated two-sector Fock representation.

Positive-frequency quanta (``a`` sector) and negative-frequency quanta
(``b`` sector) each get a finite set of orthonormal modes obtained from a
Gram matrix of test functions.  The Fock space keeps every occupation
pattern with total excitation ``<= cutoff``.

Operators carry *safe-level* bookkeeping: ``safe_level`` is the largest
total excitation on which the truncated matrix acts exactly as the
untruncated operator would.  Every algebraic identity is checked only on
that subspace.

Convention: ``a_f = sum_alpha c_alpha(f) a_alpha`` with
``c_alpha(f) = (e_alpha, f)``, so ``[a_f, a_g^+] = (g, f)``.
"""

from __future__ import annotations

import math
import warnings
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .kinematics import MetricConstants
from .pairing import CutoffError, GramMatrix, LightConeQuadrature, gram_matrix
from .testfns import TestFunction, reality_defect

__all__ = [
    "DegenerateBankError",
    "SpanError",
    "ObservabilityError",
    "PreparationError",
    "TailWeightWarning",
    "TruncationWarning",
    "ModeBasis",
    "FockSpace",
    "OperatorMatrix",
    "ObservableSpec",
    "StateVector",
    "DensityOperator",
    "GibbsSpec",
    "build_mode_basis",
    "ladder_operator",
    "observable",
    "number_operator",
    "commutator",
    "state_prepare",
    "gibbs_weight",
    "gibbs_cutoff",
    "characteristic_function",
    "jacobi_check",
    "expm_krylov",
    "thermal_multiplier",
    "operator_norm",
]

DENSE_LIMIT = 2000
VECTOR_CACHE_BYTES = 256 * 2**20
_ETA_DIAG = np.array([1.0, -1.0, -1.0, -1.0])
_EIGH_CACHE = weakref.WeakKeyDictionary()
PURE_DENSE_LIMIT = 500


class DegenerateBankError(ValueError):
    """Every Gram eigenvalue fell below the floor."""


class SpanError(ValueError):
    """A test function is not represented by the mode basis."""


class ObservabilityError(ValueError):
    """Observable requested for a test function that is not real."""


class PreparationError(ValueError):
    pass


class TailWeightWarning(UserWarning):
    pass


class TruncationWarning(UserWarning):
    pass


def thermal_multiplier(mu):
    """Variance multiplier ``1 + 2 nbar = coth(mu / 2)`` of ``exp(-mu N)``."""
    return 1.0 / math.tanh(0.5 * mu)


# ----------------------------------------------------------------------------
# mode bases


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """Orthonormal modes spanning a bank of test functions in one sector.

    ``coefficients[i, alpha] = (e_alpha, f_i)``; ``transform[i, alpha]``
    expresses the modes as ``e_alpha = sum_i transform[i, alpha] f_i``.
    """

    bank: tuple
    gram: GramMatrix
    coefficients: np.ndarray
    transform: np.ndarray
    eigenvalues: np.ndarray
    eigen_floor: float
    constants: MetricConstants = MetricConstants()
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def sheet(self):
        return self.gram.sector

    @property
    def sector(self):
        return "a" if self.sheet == "positive" else "b"

    @property
    def modes(self):
        return self.coefficients.shape[1]

    @property
    def scale(self):
        return float(self.eigenvalues[-1])

    def _nodes_for(self, f):
        if f.bandwidth > self.gram.cutoff * (1 + 1e-12):
            raise CutoffError(f"{f!r} has bandwidth {f.bandwidth} beyond the basis cutoff {self.gram.cutoff}")
        return self.gram.quadrature

    def _nodes(self, sheet):
        key = ("nodes", sheet)
        if key not in self._cache:
            self._cache[key] = self.gram.quadrature.with_sheet(sheet).nodes(self.gram.cutoff)
        return self._cache[key]

    def _vectors(self, f, sheet):
        """Wave vectors of ``f`` on the converged nodes, cached when affordable."""
        self._nodes_for(f)
        k, _ = self._nodes(sheet)
        key = ("vec", sheet, f.key())
        if key in self._cache:
            return self._cache[key]
        v = f.wave_vectors(k)
        if len(k) * 4 * 16 <= VECTOR_CACHE_BYTES:
            self._cache[key] = v
        return v

    def _pairings(self, rows, f, sheet):
        _, w = self._nodes(sheet)
        vf = self._vectors(f, sheet) * (w[:, None] * _ETA_DIAG)
        out = np.array([np.sum(np.conj(self._vectors(g, sheet)) * vf) for g in rows])
        return -self.constants.hbar * out

    def pair(self, g, f, sheet=None):
        """``(g, f)`` on this basis' converged node set (optionally the other sheet)."""
        return complex(self._pairings([g], f, sheet or self.sheet)[0])

    def expand(self, f: TestFunction):
        """Return ``(coefficients, relative_residual)`` of ``f`` in this basis."""
        for i, member in enumerate(self.bank):
            if member is f:
                return self.coefficients[i].copy(), 0.0
        key = ("expand", f.key())
        if key in self._cache:
            c, res = self._cache[key]
            return c.copy(), res
        p = self._pairings(list(self.bank) + [f], f, self.sheet)
        c = self.transform.conj().T @ p[:-1]
        norm2 = float(np.real(p[-1]))
        residual = norm2 - float(np.sum(np.abs(c) ** 2))
        rel = abs(residual) / max(abs(norm2), self.scale)
        self._cache[key] = (c, rel)
        return c.copy(), rel

    def reconstruction_error(self):
        """``max |C^H C - G| / max |G|`` over the bank."""
        c = self.coefficients
        approx = c.conj() @ c.T
        g = self.gram.entries
        return float(np.max(np.abs(approx - g)) / np.max(np.abs(g)))


def build_mode_basis(bank, sector, quad: LightConeQuadrature | None = None, eigen_floor=1e-10,
                     constants: MetricConstants = MetricConstants(), gram: GramMatrix | None = None):
    """Orthonormalize a bank with respect to the pairing on ``sector``.

    ``sector`` is ``"a"``/``"positive"`` or ``"b"``/``"negative"``.  A
    precomputed Gram matrix may be supplied instead of a quadrature.
    """
    sheet = {"a": "positive", "b": "negative"}.get(sector, sector)
    bank = tuple(bank)
    if gram is None:
        if quad is None:
            quad = LightConeQuadrature()
        gram = gram_matrix(bank, sheet, quad, constants)
    elif gram.sector != sheet:
        raise ValueError(f"Gram matrix is for the {gram.sector} sheet, not {sheet}")
    lam, u = np.linalg.eigh(gram.entries)
    top = lam[-1]
    if not top > 0:
        raise DegenerateBankError("Gram matrix has no positive eigenvalue")
    keep = lam > eigen_floor * top
    if not np.any(keep):
        raise DegenerateBankError("all Gram eigenvalues below the floor")
    lam_k = lam[keep]
    u_k = u[:, keep]
    coeffs = u_k.conj() * np.sqrt(lam_k)
    transform = u_k / np.sqrt(lam_k)
    return ModeBasis(bank, gram, coeffs, transform, lam_k, eigen_floor, constants)


# ----------------------------------------------------------------------------
# Fock space


def _occupations(modes, cutoff):
    """All occupation tuples with sum <= cutoff, in lexicographic order."""
    if modes == 0:
        return [()]
    out = []
    for n0 in range(cutoff + 1):
        for rest in _occupations(modes - 1, cutoff - n0):
            out.append((n0,) + rest)
    return out


@dataclass(frozen=True, eq=False)
class FockSpace:
    a_modes: int
    b_modes: int
    cutoff: int

    def __post_init__(self):
        if self.a_modes < 0 or self.b_modes < 0 or self.cutoff < 0:
            raise ValueError("mode counts and cutoff must be non-negative")
        states = np.array(_occupations(self.a_modes + self.b_modes, self.cutoff), dtype=np.int64)
        states = states.reshape(len(states), self.a_modes + self.b_modes)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "index", {tuple(s): i for i, s in enumerate(states.tolist())})
        object.__setattr__(self, "_ops", {})

    @property
    def modes(self):
        return self.a_modes + self.b_modes

    @property
    def dimension(self):
        return len(self.states)

    @property
    def levels(self):
        return self.states.sum(axis=1)

    @property
    def a_levels(self):
        return self.states[:, : self.a_modes].sum(axis=1)

    @property
    def b_levels(self):
        return self.states[:, self.a_modes :].sum(axis=1)

    def expected_dimension(self):
        return math.comb(self.cutoff + self.modes, self.modes)

    def mode_annihilator(self, j):
        """Sparse matrix of the annihilator of global mode ``j``."""
        key = ("a", j)
        if key not in self._ops:
            occ = self.states[:, j]
            cols = np.nonzero(occ > 0)[0]
            lowered = self.states[cols].copy()
            lowered[:, j] -= 1
            rows = np.array([self.index[tuple(s)] for s in lowered.tolist()], dtype=np.int64)
            vals = np.sqrt(occ[cols].astype(float))
            m = sp.csr_matrix((vals, (rows, cols)), shape=(self.dimension, self.dimension), dtype=complex)
            self._ops[key] = m
        return self._ops[key]

    def mode_commutator(self, j):
        """``[a_j, a_j^+]`` as truncated matrix products (identity below the top level)."""
        key = ("c", j)
        if key not in self._ops:
            a = self.mode_annihilator(j)
            ad = a.conj().T.tocsr()
            c = (a @ ad - ad @ a).tocsr()
            c.eliminate_zeros()
            self._ops[key] = c
        return self._ops[key]

    def vacuum(self):
        v = np.zeros(self.dimension, dtype=complex)
        v[self.index[(0,) * self.modes]] = 1.0
        return StateVector(v, self)

    def safe_indices(self, level):
        return np.nonzero(self.levels <= level)[0]


# ----------------------------------------------------------------------------
# operators


def operator_norm(m):
    """Spectral norm of a (sparse or dense) matrix."""
    if sp.issparse(m):
        if m.nnz == 0:
            return 0.0
        if max(m.shape) <= 800:
            return float(np.linalg.norm(m.toarray(), 2))
        gram = (m.conj().T @ m).tocsc()
        val = spla.eigsh(gram, k=1, which="LA", return_eigenvectors=False, tol=1e-10, ncv=min(gram.shape[0], 40))
        return float(math.sqrt(max(val[0], 0.0)))
    m = np.asarray(m)
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Sparse operator on a :class:`FockSpace` with truncation bookkeeping.

    ``up``/``down`` bound how far one application can raise/lower the
    total excitation; ``degree`` is the polynomial degree in ladder
    factors.
    """

    matrix: sp.csr_matrix
    space: FockSpace
    up: int
    down: int
    degree: int
    safe_level: int
    footprint: str
    meta: dict = field(default_factory=dict)
    # coefficients over (a_0 .. a_{M-1}, a_0^+ .. a_{M-1}^+) when the operator
    # is a linear combination of single ladder factors, else None
    linear: np.ndarray | None = None

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def _check(self, other):
        if not isinstance(other, OperatorMatrix):
            raise TypeError("expected an OperatorMatrix")
        if other.space is not self.space or other.dimension != self.dimension:
            raise ValueError("operators live on different Fock spaces")

    @staticmethod
    def _merge_footprint(x, y):
        if x == y or y == "none":
            return x
        if x == "none":
            return y
        return "mixed"

    def __add__(self, other):
        self._check(other)
        return OperatorMatrix(
            (self.matrix + other.matrix).tocsr(),
            self.space,
            max(self.up, other.up),
            max(self.down, other.down),
            max(self.degree, other.degree),
            min(self.safe_level, other.safe_level),
            self._merge_footprint(self.footprint, other.footprint),
            linear=_add_linear(self.linear, other.linear),
        )

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, scalar):
        scalar = complex(scalar)
        lin = None if self.linear is None else self.linear * scalar
        return OperatorMatrix((self.matrix * scalar).tocsr(), self.space, self.up, self.down,
                              self.degree, self.safe_level, self.footprint, dict(self.meta), lin)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __matmul__(self, other):
        self._check(other)
        n = self.space.cutoff
        safe = min(other.safe_level, self.safe_level - max(other.up, 0))
        return OperatorMatrix(
            (self.matrix @ other.matrix).tocsr(),
            self.space,
            self.up + other.up,
            self.down + other.down,
            self.degree + other.degree,
            max(min(safe, n), -1),
            self._merge_footprint(self.footprint, other.footprint),
        )

    def adjoint(self):
        n = self.space.cutoff
        if self.degree <= 1:
            safe = n - max(self.down, 0)
        else:
            safe = n - self.degree
        lin = None
        if self.linear is not None:
            m = self.space.modes
            lin = np.concatenate([self.linear[m:], self.linear[:m]]).conj()
        return OperatorMatrix(self.matrix.conj().T.tocsr(), self.space, self.down, self.up, self.degree,
                              max(safe, -1), self.footprint, dict(self.meta), lin)

    @property
    def H(self):
        return self.adjoint()

    def apply(self, vector):
        v = vector.coefficients if isinstance(vector, StateVector) else np.asarray(vector)
        return self.matrix @ v

    def dense(self):
        return self.matrix.toarray()

    def restricted(self, level=None):
        """Columns acting on total excitation ``<= level`` (default: the safe level)."""
        level = self.safe_level if level is None else level
        return self.matrix[:, self.space.safe_indices(level)]

    def restricted_norm(self, level=None):
        level = self.safe_level if level is None else level
        if level < 0:
            raise ValueError("operator has no safe subspace at this cutoff")
        return operator_norm(self.restricted(level))

    def norm(self):
        return operator_norm(self.matrix)

    def hermiticity_defect(self):
        diff = self.matrix - self.matrix.conj().T
        scale = abs(self.matrix).max() if self.matrix.nnz else 0.0
        return float(abs(diff).max() / scale) if (diff.nnz and scale) else 0.0

    def is_exactly_zero(self):
        m = self.matrix.copy()
        m.eliminate_zeros()
        return m.nnz == 0

    def to_triplets(self, path=None):
        """Sparse export, one ``row,col,re,im`` line per stored entry."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = ["row,col,re,im"]
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            lines.append(f"{r},{c},{v.real:.17g},{v.imag:.17g}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _add_linear(x, y):
    if x is None or y is None:
        return None
    return x + y


def _identity(space):
    return OperatorMatrix(sp.identity(space.dimension, dtype=complex, format="csr"), space, 0, 0, 0,
                          space.cutoff, "none")


def _zero(space, footprint="none"):
    return OperatorMatrix(sp.csr_matrix((space.dimension, space.dimension), dtype=complex), space, 0, 0, 0,
                          space.cutoff, footprint, linear=np.zeros(2 * space.modes, dtype=complex))


def ladder_operator(basis: ModeBasis, f: TestFunction, kind, sector, space: FockSpace, residual_tol=1e-8):
    """``a_f``, ``a_f^+``, ``b_f`` or ``b_f^+`` as a sparse matrix."""
    if kind not in ("annihilate", "create"):
        raise ValueError(f"kind must be 'annihilate' or 'create', got {kind!r}")
    if sector not in ("a", "b"):
        raise ValueError(f"sector must be 'a' or 'b', got {sector!r}")
    if basis.sector != sector:
        raise ValueError(f"basis belongs to sector {basis.sector!r}")
    n_modes = space.a_modes if sector == "a" else space.b_modes
    if basis.modes != n_modes:
        raise ValueError(f"basis has {basis.modes} modes but the space has {n_modes} in sector {sector}")
    c, residual = basis.expand(f)
    if residual > residual_tol:
        raise SpanError(f"{f!r}: relative span residual {residual:.3g} exceeds {residual_tol:g}")
    offset = 0 if sector == "a" else space.a_modes
    m = sp.csr_matrix((space.dimension, space.dimension), dtype=complex)
    lin = np.zeros(2 * space.modes, dtype=complex)
    for alpha, coef in enumerate(c):
        if coef != 0:
            m = m + coef * space.mode_annihilator(offset + alpha)
            lin[offset + alpha] = coef
    op = OperatorMatrix(m.tocsr(), space, -1, 1, 1, space.cutoff, f"{sector}-only", linear=lin)
    if kind == "create":
        op = op.adjoint()
    return op


@dataclass(frozen=True, eq=False)
class ObservableSpec:
    kind: str
    test_function: TestFunction
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if self.kind == "phi":
            object.__setattr__(self, "alpha", 1.0)
            object.__setattr__(self, "beta", 0.0)
        elif self.kind == "chi":
            object.__setattr__(self, "alpha", 1.0)
            object.__setattr__(self, "beta", 1.0)
        elif self.kind != "xi":
            raise ValueError(f"unknown observable kind {self.kind!r}")


def observable(spec: ObservableSpec, basis_a: ModeBasis | None, basis_b: ModeBasis | None, space: FockSpace,
               reality_tol=1e-10, hermitian_tol=1e-12):
    """``alpha (a_f + a^+_{f*}) + beta (b_f + b^+_{f*})``."""
    f = spec.test_function
    defect = reality_defect(f)
    if defect > reality_tol:
        raise ObservabilityError(f"{f!r} has reality defect {defect:.3g} > {reality_tol:g}")
    fs = f.conjugate()
    total = _zero(space)
    meta = {"kind": spec.kind, "alpha": spec.alpha, "beta": spec.beta}
    if spec.alpha != 0:
        if basis_a is None:
            raise ValueError("a-sector basis required")
        part = ladder_operator(basis_a, f, "annihilate", "a", space) + ladder_operator(basis_a, fs, "create", "a", space)
        total = total + part * spec.alpha
        meta["pairing_a"] = basis_a.pair(fs, f)
    if spec.beta != 0:
        if basis_b is None:
            raise ValueError("b-sector basis required")
        part = ladder_operator(basis_b, f, "annihilate", "b", space) + ladder_operator(basis_b, fs, "create", "b", space)
        total = total + part * spec.beta
        meta["pairing_b"] = basis_b.pair(fs, f)
    defect = total.hermiticity_defect()
    if defect > hermitian_tol:
        raise ObservabilityError(f"observable not Hermitian: defect {defect:.3g}")
    return OperatorMatrix(total.matrix, space, total.up, total.down, total.degree, total.safe_level,
                          total.footprint, meta, total.linear)


def number_operator(sector, space: FockSpace):
    """Total mode number of one sector (diagonal, exact at every level)."""
    if sector == "a":
        diag = space.a_levels
    elif sector == "b":
        diag = space.b_levels
    else:
        raise ValueError(f"sector must be 'a' or 'b', got {sector!r}")
    m = sp.diags(diag.astype(complex), format="csr")
    return OperatorMatrix(m, space, 0, 0, 0, space.cutoff, f"{sector}-only")


def commutator(a: OperatorMatrix, b: OperatorMatrix, expand_linear=True):
    """``AB - BA`` with the safe level of the less safe ordering.

    When both operators are linear in single ladder factors the result is
    assembled bilinearly from the primitive mode commutators
    ``[a_j, a_j^+]`` (all other primitive pairs commute exactly), so
    vanishing commutators come out bit-zero instead of at rounding level.
    ``expand_linear=False`` forces the plain matrix products.
    """
    a._check(b)
    if expand_linear and a.linear is not None and b.linear is not None:
        return _linear_commutator(a, b)
    ab = a @ b
    ba = b @ a
    out = ab - ba
    safe = min(ab.safe_level, ba.safe_level)
    return OperatorMatrix(out.matrix, out.space, out.up, out.down, out.degree, safe, out.footprint)


def _linear_commutator(a, b):
    space = a.space
    m = space.modes
    x, y = a.linear, b.linear
    weights = x[:m] * y[m:] - x[m:] * y[:m]
    out = sp.csr_matrix((space.dimension, space.dimension), dtype=complex)
    for j in np.nonzero(weights)[0]:
        out = out + weights[j] * space.mode_commutator(j)
    out = out.tocsr()
    out.eliminate_zeros()
    fp = OperatorMatrix._merge_footprint(a.footprint, b.footprint)
    return OperatorMatrix(out, space, 0, 0, 0, space.cutoff - 1, fp)


# ----------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class StateVector:
    coefficients: np.ndarray
    space: FockSpace

    @property
    def norm(self):
        return float(np.linalg.norm(self.coefficients))

    def expectation(self, op: OperatorMatrix):
        v = self.coefficients
        return complex(np.vdot(v, op.matrix @ v))

    def normalized(self):
        return StateVector(self.coefficients / self.norm, self.space)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Density matrix; diagonal ones are stored by their diagonal only."""

    space: FockSpace
    diagonal: np.ndarray | None = None
    vector: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def trace(self):
        if self.diagonal is not None:
            return float(np.sum(self.diagonal))
        return float(np.vdot(self.vector, self.vector).real)

    def matrix(self):
        if self.diagonal is not None:
            return sp.diags(self.diagonal.astype(complex), format="csr")
        return sp.csr_matrix(np.outer(self.vector, self.vector.conj()))

    def expectation(self, op: OperatorMatrix):
        if self.diagonal is not None:
            return complex(np.sum(self.diagonal * op.matrix.diagonal()))
        return complex(np.vdot(self.vector, op.matrix @ self.vector))


def _negative_content(basis, f):
    return abs(basis.pair(f, f, sheet="negative"))


def state_prepare(kind, basis_a: ModeBasis | None, space: FockSpace, f: TestFunction | None = None,
                  basis_b: ModeBasis | None = None, creator="a", norm_tol=1e-8, frequency_tol=1e-8):
    """Prepare ``vacuum``, ``single_quantum`` or ``projector_density``.

    ``creator="a+b"`` builds the state with ``a_f^+ + b_f^+`` in place of
    ``a_f^+``.
    """
    vac = space.vacuum()
    if kind == "vacuum":
        return vac
    if kind not in ("single_quantum", "projector_density"):
        raise ValueError(f"unknown state kind {kind!r}")
    if f is None or basis_a is None:
        raise PreparationError("single-quantum states need a test function and an a-sector basis")
    norm2 = basis_a.pair(f, f).real
    if abs(norm2 - 1.0) > norm_tol:
        raise PreparationError(f"(f, f) = {norm2:.12g}, expected 1 within {norm_tol:g}")
    neg = _negative_content(basis_a, f)
    if neg > frequency_tol:
        raise PreparationError(f"f is not positive frequency: (f, f)_- = {neg:.3g}")
    create = ladder_operator(basis_a, f, "create", "a", space)
    if creator == "a+b":
        if basis_b is None:
            raise PreparationError("creator 'a+b' needs a b-sector basis")
        create = create + ladder_operator(basis_b, f, "create", "b", space)
    elif creator != "a":
        raise ValueError(f"creator must be 'a' or 'a+b', got {creator!r}")
    psi = StateVector(create.apply(vac), space)
    if kind == "single_quantum":
        return psi
    return DensityOperator(space, vector=psi.coefficients, meta={"kind": "projector"})


@dataclass(frozen=True)
class GibbsSpec:
    mu: float
    nu: float

    def __post_init__(self):
        if not (self.mu > 0 and self.nu > 0):
            raise ValueError("Gibbs weights need mu, nu > 0")


def _level_degeneracy(level, modes):
    return math.comb(level + modes - 1, modes - 1) if modes > 0 else int(level == 0)


def gibbs_cutoff(mu, nu, modes, bound=1e-8, n_max=400):
    """Smallest cutoff with ``exp(-min(mu, nu) N) * degeneracy(N) < bound``."""
    m = min(mu, nu)
    for n in range(1, n_max + 1):
        if math.exp(-m * n) * _level_degeneracy(n, modes) < bound:
            return n
    raise ValueError("no cutoff within n_max meets the tail bound")


def gibbs_weight(spec: GibbsSpec, space: FockSpace, warn_threshold=1e-6):
    """Normalized ``exp(-mu Xi_a - nu Xi_b)`` on the truncated space."""
    w = np.exp(-spec.mu * space.a_levels - spec.nu * space.b_levels)
    z = float(np.sum(w))
    m = min(spec.mu, spec.nu)
    tail = 0.0
    n = space.cutoff + 1
    while True:
        term = _level_degeneracy(n, space.modes) * math.exp(-m * n)
        tail += term
        if term < 1e-18 * max(tail, 1e-300) or n > space.cutoff + 10_000:
            break
        n += 1
    rel = tail / z
    if rel > warn_threshold:
        warnings.warn(f"discarded Gibbs weight {rel:.3g} exceeds {warn_threshold:g}", TailWeightWarning, stacklevel=2)
    return DensityOperator(space, diagonal=w / z, meta={"mu": spec.mu, "nu": spec.nu, "tail_bound": rel})


# ----------------------------------------------------------------------------
# characteristic functions


def expm_krylov(op, vector, t, tol=1e-13, m_max=160):
    """``exp(i t A) v`` for Hermitian sparse ``A`` by Lanczos propagation.

    Full reorthogonalization; long times are split into substeps until the
    Krylov error estimate falls below ``tol``.
    """
    a = op.matrix if isinstance(op, OperatorMatrix) else op
    v = np.asarray(vector, dtype=complex)
    beta0 = np.linalg.norm(v)
    if beta0 == 0 or t == 0:
        return v.copy()
    steps = 1
    while True:
        ok = True
        w = v.copy()
        for _ in range(steps):
            w, err = _lanczos_step(a, w, t / steps, tol, m_max)
            if err > tol * np.linalg.norm(w):
                ok = False
                break
        if ok:
            return w
        steps *= 2
        if steps > 4096:
            raise RuntimeError("Krylov propagation failed to converge")


def _lanczos_step(a, v, t, tol, m_max):
    n = v.shape[0]
    m_max = min(m_max, n)
    beta0 = np.linalg.norm(v)
    basis = np.zeros((n, m_max + 1), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    basis[:, 0] = v / beta0
    for j in range(m_max):
        w = a @ basis[:, j]
        alpha[j] = np.vdot(basis[:, j], w).real
        w = w - alpha[j] * basis[:, j] - (beta[j - 1] * basis[:, j - 1] if j else 0)
        w -= basis[:, : j + 1] @ (basis[:, : j + 1].conj().T @ w)
        beta[j] = np.linalg.norm(w)
        m = j + 1
        tri = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
        evals, evecs = np.linalg.eigh(tri)
        small = evecs @ (np.exp(1j * t * evals) * evecs[0].conj())
        err = beta0 * beta[j] * abs(small[-1])
        if beta[j] < 1e-14 * max(1.0, abs(alpha[j])) or err < tol * beta0 or m == m_max:
            return beta0 * (basis[:, :m] @ small), (0.0 if beta[j] < 1e-14 else err)
        basis[:, j + 1] = w / beta[j]
    raise AssertionError("unreachable")


def _gauss_hermite_bound(lam, variance, n):
    """``n! (lam^2 V)^n / (2n)!``: n-node Gauss-Hermite error for ``exp(i lam x)``."""
    if n <= 0:
        return float("inf")
    x = lam * lam * variance
    if x == 0:
        return 0.0
    return math.exp(math.lgamma(n + 1) + n * math.log(x) - math.lgamma(2 * n + 1))


def _analytic_variance(state, op):
    meta = op.meta
    if "kind" not in meta:
        raise ValueError("analytic route needs an operator built by observable()")
    pa = meta.get("pairing_a", 0.0).real if meta.get("alpha", 0) else 0.0
    pb = meta.get("pairing_b", 0.0).real if meta.get("beta", 0) else 0.0
    ma = mb = 1.0
    if isinstance(state, DensityOperator) and state.diagonal is not None and "mu" in state.meta:
        ma = thermal_multiplier(state.meta["mu"])
        mb = thermal_multiplier(state.meta["nu"])
    elif isinstance(state, StateVector):
        vac = state.space.vacuum().coefficients
        if not np.allclose(state.coefficients, vac, atol=1e-14):
            raise ValueError("analytic Gaussian route applies to the vacuum and Gibbs states only")
    else:
        raise ValueError("analytic Gaussian route applies to the vacuum and Gibbs states only")
    return meta["alpha"] ** 2 * ma * pa + meta["beta"] ** 2 * mb * pb


def characteristic_function(state, op: OperatorMatrix, lambdas, method="matrix-exponential", engine="auto",
                            warn=True):
    """Expectation of ``exp(i lam O)`` for each ``lam``.

    ``method="matrix-exponential"`` evaluates the exponential numerically.
    ``engine`` selects how: ``"expm"`` (dense scaling-and-squaring per
    ``lam``), ``"eigh"`` (one dense Hermitian eigendecomposition reused for
    every ``lam``), ``"krylov"`` (Lanczos propagation, sparse) or
    ``"auto"`` (``krylov`` for pure states above dimension 500 and for
    any state above 2000, ``eigh`` otherwise).
    ``method="analytic-gaussian"`` returns ``exp(-lam^2 V / 2)`` with ``V``
    assembled from pairings (vacuum and Gibbs states only).
    """
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if not np.all(np.isfinite(lambdas)):
        raise ValueError("lambdas must be finite")
    defect = op.hermiticity_defect()
    if defect > 1e-10:
        raise ValueError(f"operator not Hermitian (defect {defect:.3g})")
    if method == "analytic-gaussian":
        v = _analytic_variance(state, op)
        return np.exp(-0.5 * lambdas**2 * v).astype(complex)
    if method != "matrix-exponential":
        raise ValueError(f"unknown method {method!r}")
    if engine == "auto":
        pure = isinstance(state, StateVector) or getattr(state, "vector", None) is not None
        limit = PURE_DENSE_LIMIT if pure else DENSE_LIMIT
        engine = "eigh" if op.dimension <= limit else "krylov"
    if engine not in ("expm", "eigh", "krylov"):
        raise ValueError(f"unknown engine {engine!r}")
    out = np.ones(len(lambdas), dtype=complex)
    todo = [i for i, lam in enumerate(lambdas) if lam != 0]
    if engine == "eigh" and todo:
        if op not in _EIGH_CACHE:
            _EIGH_CACHE[op] = np.linalg.eigh(op.dense())
        evals, evecs = _EIGH_CACHE[op]
        if isinstance(state, StateVector) or state.vector is not None:
            v = state.coefficients if isinstance(state, StateVector) else state.vector
            w = np.abs(evecs.conj().T @ v) ** 2
        else:
            w = (np.abs(evecs) ** 2).T @ state.diagonal
        for i in todo:
            out[i] = np.sum(w * np.exp(1j * lambdas[i] * evals))
    elif engine == "expm":
        dense = op.dense()
        for i in todo:
            u = sla.expm(1j * lambdas[i] * dense)
            if isinstance(state, StateVector):
                v = state.coefficients
                out[i] = np.vdot(v, u @ v)
            elif state.diagonal is not None:
                out[i] = np.sum(state.diagonal * np.diag(u))
            else:
                out[i] = np.vdot(state.vector, u @ state.vector)
    else:
        for i in todo:
            out[i] = _krylov_expectation(state, op, lambdas[i])
    if warn:
        _truncation_check(state, op, lambdas, out)
    return out


def _krylov_expectation(state, op, lam):
    if isinstance(state, StateVector):
        v = state.coefficients
        return np.vdot(v, expm_krylov(op, v, lam))
    if state.vector is not None:
        return np.vdot(state.vector, expm_krylov(op, state.vector, lam))
    total = 0.0j
    weights = state.diagonal
    cut = 1e-17 * weights.max()
    for idx in np.nonzero(weights > cut)[0]:
        e = np.zeros(op.dimension, dtype=complex)
        e[idx] = 1.0
        total += weights[idx] * expm_krylov(op, e, lam)[idx]
    return total


def _truncation_check(state, op, lambdas, values):
    try:
        v = _analytic_variance(state, op)
    except ValueError:
        return
    analytic = np.exp(-0.5 * lambdas**2 * v)
    space = op.space
    tail = state.meta.get("tail_bound", 0.0) if isinstance(state, DensityOperator) else 0.0
    for lam, num, ana in zip(lambdas, values, analytic):
        bound = _gauss_hermite_bound(lam, max(v, 1e-300), space.cutoff + 1) + 2 * tail
        if abs(num - ana) > max(bound, 1e-10):
            warnings.warn(
                f"characteristic function at lambda={lam:g}: |numeric - analytic| = {abs(num - ana):.3g} "
                f"exceeds modeled truncation bound {bound:.3g}",
                TruncationWarning,
                stacklevel=3,
            )


# ----------------------------------------------------------------------------
# Jacobi identity


def jacobi_check(operators, triples, tol=1e-10):
    """Safe-subspace norm of the Jacobi sum for each ``(A, B, C)`` triple.

    ``operators`` maps names to :class:`OperatorMatrix`; ``triples`` lists
    name triples.  Returns a report dict with one entry per triple.
    """
    rows = []
    for names in triples:
        a, b, c = (operators[n] for n in names)
        terms = [commutator(a, commutator(b, c)), commutator(b, commutator(c, a)), commutator(c, commutator(a, b))]
        total = terms[0] + terms[1] + terms[2]
        level = min(t.safe_level for t in terms)
        residual = total.restricted_norm(level) if level >= 0 else float("nan")
        scale = a.norm() * b.norm() * c.norm()
        rows.append({
            "triple": list(names),
            "residual": residual,
            "scale": scale,
            "safe_level": level,
            "passed": bool(level >= 0 and residual <= tol * max(scale, 1e-300)),
        })
    return {"tolerance": tol, "triples": rows, "passed": all(r["passed"] for r in rows)}
