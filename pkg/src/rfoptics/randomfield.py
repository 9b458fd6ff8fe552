"""Classical Gaussian random field equivalent to the commuting observables chi_f.

For real test functions the two-point values are

    <chi_f chi_g> = (g*, f) + (g*, f)_-

in the vacuum.  A Gibbs weight ``exp(-mu Xi_a - nu Xi_b)`` occupies each
sector with ``nbar = 1 / (exp(mu) - 1)`` quanta per mode, giving

    (nbar_a + 1)(g, f) + nbar_a (f, g) + (same with the negative sheet).

The sampler draws from the centered normal law with that covariance using
a counter-based generator, one independent stream per fixed-size chunk,
so results do not depend on how chunks are spread across threads.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kinematics import MetricConstants
from .pairing import LightConeQuadrature, gram_matrix
from .testfns import reality_defect

__all__ = [
    "NonRealBankError",
    "FactorizationError",
    "CovarianceModel",
    "SampleBatch",
    "covariance",
    "sample_batch",
    "jackknife_covariance_errors",
    "convolution_check",
    "GENERATOR",
]

GENERATOR = "numpy.random.Philox"
CHUNK = 8192


class NonRealBankError(ValueError):
    pass


class FactorizationError(ValueError):
    pass


def _occupation(mu, law):
    if law == "thermal":
        return 1.0 / math.expm1(mu)
    if law == "paper":
        # chosen so that 2 nbar + 1 = coth(mu)
        return 0.5 * (1.0 / math.tanh(mu) - 1.0)
    raise ValueError(f"law must be 'thermal' or 'paper', got {law!r}")


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    bank: tuple
    matrix: np.ndarray
    source: dict
    positive: np.ndarray | None = None
    negative: np.ndarray | None = None

    @property
    def size(self):
        return self.matrix.shape[0]

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    def to_dict(self):
        return {"bank": list(self.bank), "source": self.source, "matrix": self.matrix.tolist()}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _check_psd(m, slack):
    ev = np.linalg.eigvalsh(m)
    top = max(ev[-1], 0.0)
    if ev[0] < -slack * top:
        raise FactorizationError(f"covariance not PSD: min eigenvalue {ev[0]:.3g} vs max {top:.3g}")
    return ev


def covariance(bank, source="vacuum", quad: LightConeQuadrature | None = None, mu=None, nu=None,
               law="thermal", constants: MetricConstants = MetricConstants(), reality_tol=1e-10,
               imag_tol=1e-10, psd_slack=1e-10):
    """Two-point matrix ``C[i, j] = <chi_{f_i} chi_{f_j}>`` for a real bank.

    ``source`` is ``"vacuum"`` or ``"gibbs"`` (with ``mu``, ``nu``).
    ``law="thermal"`` uses the exact occupation of the Gibbs weight;
    ``law="paper"`` rescales each sector by ``coth(mu)`` instead of
    ``coth(mu / 2)``.
    """
    bank = list(bank)
    for f in bank:
        d = reality_defect(f)
        if d > reality_tol:
            raise NonRealBankError(f"{f!r} has reality defect {d:.3g}")
    quad = quad or LightConeQuadrature()
    gp = gram_matrix(bank, "positive", quad, constants).entries
    gn = gram_matrix(bank, "negative", quad, constants).entries
    if source == "vacuum":
        na = nb = 0.0
        info = {"kind": "vacuum"}
    elif source == "gibbs":
        if mu is None or nu is None or not (mu > 0 and nu > 0):
            raise ValueError("gibbs source needs mu, nu > 0")
        na, nb = _occupation(mu, law), _occupation(nu, law)
        info = {"kind": "gibbs", "mu": mu, "nu": nu, "law": law}
    else:
        raise ValueError(f"unknown source {source!r}")
    c = (na + 1) * gp.T + na * gp + (nb + 1) * gn.T + nb * gn
    scale = max(np.max(np.abs(c)), 1e-300)
    resid = float(np.max(np.abs(c.imag)) / scale)
    if resid > imag_tol:
        raise NonRealBankError(f"imaginary residue {resid:.3g} in covariance")
    m = c.real
    m = 0.5 * (m + m.T)
    _check_psd(m, psd_slack)
    info["imag_residue"] = resid
    names = tuple(f.name or f"f{i}" for i, f in enumerate(bank))
    return CovarianceModel(names, m, info, gp, gn)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    seed: int
    count: int
    draws: np.ndarray
    empirical_mean: np.ndarray
    empirical_covariance: np.ndarray
    standard_errors: np.ndarray
    generator: dict = field(default_factory=dict)

    def to_csv(self, path=None):
        """One draw per row."""
        n = self.draws.shape[1]
        lines = [",".join(f"x{i}" for i in range(n))]
        lines += [",".join(f"{v:.17g}" for v in row) for row in self.draws]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def summary(self, model: CovarianceModel | None = None):
        out = {
            "seed": self.seed,
            "count": self.count,
            "generator": self.generator,
            "empirical_mean": self.empirical_mean.tolist(),
            "empirical_covariance": self.empirical_covariance.tolist(),
            "standard_errors": self.standard_errors.tolist(),
        }
        if model is not None:
            z = np.abs(self.empirical_covariance - model.matrix) / np.where(
                self.standard_errors > 0, self.standard_errors, np.inf)
            out["max_z"] = float(np.max(z))
        return out


def _factor(matrix, slack=1e-10):
    lam, u = np.linalg.eigh(matrix)
    top = max(lam[-1], 0.0)
    if lam[0] < -slack * top:
        raise FactorizationError(f"indefinite covariance: min eigenvalue {lam[0]:.3g}")
    lam = np.clip(lam, 0.0, None)
    return u * np.sqrt(lam)


def _chunk_draws(factor, seed, chunk, rows):
    bitgen = np.random.Philox(seed).jumped(chunk)
    z = np.random.Generator(bitgen).standard_normal((rows, factor.shape[1]))
    return z @ factor.T


def jackknife_covariance_errors(draws, blocks=100):
    """Delete-one-block jackknife standard errors of the sample covariance."""
    n, d = draws.shape
    blocks = max(2, min(blocks, n))
    edges = np.linspace(0, n, blocks + 1).astype(int)
    s1 = np.empty((blocks, d))
    s2 = np.empty((blocks, d, d))
    cnt = np.diff(edges)
    for b in range(blocks):
        x = draws[edges[b] : edges[b + 1]]
        s1[b] = x.sum(axis=0)
        s2[b] = x.T @ x
    t1, t2 = s1.sum(axis=0), s2.sum(axis=0)
    est = np.empty((blocks, d, d))
    for b in range(blocks):
        m = n - cnt[b]
        mean = (t1 - s1[b]) / m
        est[b] = ((t2 - s2[b]) - m * np.outer(mean, mean)) / (m - 1)
    avg = est.mean(axis=0)
    return np.sqrt((blocks - 1) / blocks * np.sum((est - avg) ** 2, axis=0))


def sample_batch(model: CovarianceModel, count, seed, threads=1, chunk=CHUNK, blocks=100):
    """``count`` draws from ``N(0, model.matrix)``.

    Draws ``[c * chunk, (c + 1) * chunk)`` come from ``Philox(seed)``
    jumped ``c`` times, so the batch is a function of ``(seed, count,
    model)`` only.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    factor = _factor(model.matrix)
    starts = list(range(0, count, chunk))

    def one(i):
        s = starts[i]
        return _chunk_draws(factor, seed, i, min(chunk, count - s))

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, range(len(starts))))
    else:
        parts = [one(i) for i in range(len(starts))]
    draws = np.concatenate(parts, axis=0) if parts else np.zeros((0, model.size))
    mean = draws.mean(axis=0)
    cov = np.cov(draws, rowvar=False, ddof=1).reshape(model.size, model.size)
    se = jackknife_covariance_errors(draws, blocks)
    gen = {"name": GENERATOR, "numpy": np.__version__, "chunk": chunk, "stream": "Philox(seed).jumped(chunk_index)"}
    return SampleBatch(seed, count, draws, mean, cov, se, gen)


def convolution_check(state, f, lambdas, basis_a, basis_b, space):
    """Compare ``Phi_chi`` with ``Phi_phi * exp(-lam^2 (f*, f)_- / 2)``.

    ``state`` must be an a-sector state times the b vacuum.  Returns a
    report with both curves, the maximal difference and the smoothing
    variance ``(f*, f)_-``.
    """
    from .fock import DensityOperator, ObservableSpec, StateVector, characteristic_function, observable

    if isinstance(state, StateVector):
        weights = np.abs(state.coefficients) ** 2
    elif isinstance(state, DensityOperator):
        weights = state.diagonal if state.diagonal is not None else np.abs(state.vector) ** 2
    else:
        raise TypeError("state must be a StateVector or DensityOperator")
    if np.any(weights[space.b_levels > 0] > 1e-24):
        raise ValueError("state has b-sector excitations; the product identity does not apply")
    lambdas = np.asarray(lambdas, dtype=float)
    chi = observable(ObservableSpec("chi", f), basis_a, basis_b, space)
    phi = observable(ObservableSpec("phi", f), basis_a, basis_b, space)
    smoothing = basis_b.pair(f.conjugate(), f).real
    left = characteristic_function(state, chi, lambdas, warn=False)
    right = characteristic_function(state, phi, lambdas, warn=False) * np.exp(-0.5 * lambdas**2 * smoothing)
    diff = np.abs(left - right)
    return {
        "lambdas": lambdas.tolist(),
        "phi_chi": {"re": left.real.tolist(), "im": left.imag.tolist()},
        "phi_phi_smoothed": {"re": right.real.tolist(), "im": right.imag.tolist()},
        "max_difference": float(np.max(diff)) if len(diff) else 0.0,
        "smoothing_variance": smoothing,
    }
