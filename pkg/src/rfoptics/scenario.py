"""Scenario files: parsing, validation and task execution.

A scenario is a YAML document::

    schema: 1
    name: demo
    hbar: 1.0
    seed: 7
    quadrature: {radial_nodes: 24, polar_nodes: 16, azimuthal_nodes: 16, tolerance: 1.0e-8}
    fock: {cutoff: 12, eigen_floor: 1.0e-10}
    bank:
      - {name: f, kind: packet, polarization: [1, 0, 0, 0, 1, 0], normalize: true}
      - {name: b0, kind: bump, polarization: [1, 0, 0, 0, 1, 0], radii: [0.8, 1, 1, 1], order: 8}
    tasks:
      - {type: gram, bank: [f], sector: positive}

Every task yields a result dict (``passed`` is ``None`` for report-only
tasks) and optionally tidy CSV rows written to ``<task-id>.csv``.
"""

from __future__ import annotations

import csv
import math
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import scipy
import yaml

from . import __version__
from . import fock as fk
from . import randomfield as rf
from .kinematics import MetricConstants, causal_separation
from .pairing import LightConeQuadrature, commutator_matrix, gram_matrix
from .testfns import bump, packet

SCHEMA_VERSION = 1
TASK_TYPES = ("gram", "causality-scan", "commutators", "charfn", "gibbs-sweep", "fluctuation-regimes", "sample",
              "convolution", "acceptance")


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending field and line."""


class AssertionFailure(RuntimeError):
    pass


# ----------------------------------------------------------------------------
# parsing


def _line_index(text):
    """Map key paths to 1-based line numbers using the YAML node tree."""
    index = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return index

    def walk(node, path):
        index[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, path + (str(k.value),))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    if root is not None:
        walk(root, ())
    return index


def _fmt(path):
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else p)
    return out or "<root>"


@dataclass
class Scenario:
    name: str
    hbar: float
    seed: int
    quadrature: dict
    fock: dict
    bank: dict
    tasks: list
    source: str = "<memory>"
    raw: dict = field(default_factory=dict)

    def quad(self, threads=1):
        return LightConeQuadrature(threads=threads, **self.quadrature)

    @property
    def constants(self):
        return MetricConstants(self.hbar)


_QUAD_KEYS = {"radial_nodes", "polar_nodes", "azimuthal_nodes", "cutoff", "tolerance", "radial_scale", "growth",
              "max_rounds", "max_nodes", "block_size"}
_FUNCTION_KEYS = {
    "packet": {"name", "kind", "polarization", "center", "sigma", "tau", "carrier", "amplitude", "normalize"},
    "bump": {"name", "kind", "polarization", "center", "radii", "carrier", "amplitude", "order", "bandwidth",
             "nyquist_margin", "normalize"},
}


def load_scenario(path):
    with open(path) as fh:
        text = fh.read()
    return parse_scenario(text, source=str(path))


def parse_scenario(text, source="<memory>"):
    lines = _line_index(text)

    def fail(path, msg):
        line = lines.get(tuple(path))
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: {_fmt(path)}: {msg}")

    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML parse error: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        fail([], "scenario must be a mapping")
    if doc.get("schema") != SCHEMA_VERSION:
        fail(["schema"], f"expected schema {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    unknown = set(doc) - {"schema", "name", "hbar", "seed", "quadrature", "fock", "bank", "tasks"}
    if unknown:
        fail([sorted(unknown)[0]], "unknown top-level key")
    name = str(doc.get("name", "scenario"))
    hbar = doc.get("hbar", 1.0)
    if not isinstance(hbar, (int, float)) or not hbar > 0:
        fail(["hbar"], "must be a positive number")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        fail(["seed"], "must be an unsigned 64-bit integer")
    quad = doc.get("quadrature", {}) or {}
    if not isinstance(quad, dict):
        fail(["quadrature"], "must be a mapping")
    for k in quad:
        if k not in _QUAD_KEYS:
            fail(["quadrature", k], "unknown quadrature setting")
    try:
        LightConeQuadrature(**quad)
    except (TypeError, ValueError) as exc:
        fail(["quadrature"], str(exc))
    fock_cfg = doc.get("fock", {}) or {}
    if not isinstance(fock_cfg, dict):
        fail(["fock"], "must be a mapping")
    cutoff = fock_cfg.get("cutoff", 12)
    if not isinstance(cutoff, int) or not 1 <= cutoff <= 200:
        fail(["fock", "cutoff"], "must be an integer in [1, 200]")
    floor = fock_cfg.get("eigen_floor", 1e-10)
    if not isinstance(floor, (int, float)) or not 0 < floor < 1:
        fail(["fock", "eigen_floor"], "must lie in (0, 1)")

    bank = {}
    entries = doc.get("bank", []) or []
    if not isinstance(entries, list):
        fail(["bank"], "must be a list")
    for i, spec in enumerate(entries):
        path = ["bank", i]
        if not isinstance(spec, dict):
            fail(path, "bank entries must be mappings")
        kind = spec.get("kind")
        if kind not in _FUNCTION_KEYS:
            fail(path + ["kind"], "must be 'packet' or 'bump'")
        for k in spec:
            if k not in _FUNCTION_KEYS[kind]:
                fail(path + [k], f"unknown {kind} field")
        fname = spec.get("name")
        if not isinstance(fname, str) or not fname:
            fail(path + ["name"], "bank entries need a name")
        if fname in bank:
            fail(path + ["name"], f"duplicate bank member {fname!r}")
        pol = spec.get("polarization")
        if not isinstance(pol, list) or len(pol) != 6:
            fail(path + ["polarization"], "must list 6 components")
        try:
            _build_function(spec)
        except (TypeError, ValueError) as exc:
            fail(path, str(exc))
        bank[fname] = spec

    tasks = doc.get("tasks", []) or []
    if not isinstance(tasks, list):
        fail(["tasks"], "must be a list")
    for i, task in enumerate(tasks):
        path = ["tasks", i]
        if not isinstance(task, dict):
            fail(path, "tasks must be mappings")
        ttype = task.get("type")
        if ttype not in TASK_TYPES:
            fail(path + ["type"], f"unknown task type {ttype!r}")
        for key in ("bank", "a_bank", "b_bank"):
            names = task.get(key)
            if names is None:
                continue
            if not isinstance(names, list) or not names:
                fail(path + [key], "must be a nonempty list of bank members")
            for j, n in enumerate(names):
                if n not in bank:
                    fail(path + [key, j], f"undefined bank member {n!r}")
        for key in ("function", "quantum", "partner"):
            n = task.get(key)
            if n is not None and n not in bank:
                fail(path + [key], f"undefined bank member {n!r}")
    return Scenario(name, float(hbar), int(seed), dict(quad), dict(fock_cfg, cutoff=cutoff, eigen_floor=floor),
                    bank, tasks, source, doc)


def _build_function(spec):
    kw = dict(spec)
    kind = kw.pop("kind")
    kw.pop("normalize", None)
    name = kw.pop("name", "")
    # complex entries may be written as strings such as "0.5+1j"
    kw["polarization"] = [complex(c) for c in kw["polarization"]]
    if "amplitude" in kw:
        kw["amplitude"] = complex(kw["amplitude"])
    if kind == "packet":
        return packet(kw.pop("polarization"), name=name, **kw)
    return bump(kw.pop("polarization"), name=name, **kw)


# ----------------------------------------------------------------------------
# execution


class _Context:
    def __init__(self, scenario, threads, seed):
        self.scenario = scenario
        self.threads = threads
        self.seed = scenario.seed if seed is None else seed
        self.quad = scenario.quad(threads)
        self.constants = scenario.constants
        self._functions = {}

    def function(self, name):
        if name not in self._functions:
            spec = self.scenario.bank[name]
            f = _build_function(spec)
            if spec.get("normalize"):
                n = gram_matrix([f], "positive", self.quad, self.constants).entries[0, 0].real
                f = (f * (1.0 / math.sqrt(n))).named(name)
            self._functions[name] = f
        return self._functions[name]

    def functions(self, names):
        return [self.function(n) for n in names]


def _lambda_grid(task, default=(0.0, 3.0, 13)):
    spec = task.get("lambdas")
    if spec is None:
        return np.linspace(*default[:2], int(default[2]))
    if isinstance(spec, dict):
        return np.linspace(float(spec.get("start", 0.0)), float(spec.get("stop", 3.0)), int(spec.get("num", 13)))
    return np.asarray(spec, dtype=float)


def _task_gram(ctx, task):
    bank = ctx.functions(task["bank"])
    sector = task.get("sector", "positive")
    g = gram_matrix(bank, sector, ctx.quad, ctx.constants)
    margin = g.psd_margin()
    rows = [{"row": i, "col": j, "re": z.real, "im": z.imag} for i, r in enumerate(g.entries) for j, z in enumerate(r)]
    return {"sector": sector, "bank": list(task["bank"]), "matrix": g.entries, "hermiticity_defect": g.hermiticity_defect, "psd_margin": margin,
            "nodes_used": g.nodes_used, "passed": margin >= -1e-10, "tolerance": 1e-10}, rows


def _task_causality_scan(ctx, task):
    f = ctx.function(task["function"])
    seps = task.get("separations") or [[0, 0, 0, d] for d in (0, 1, 2, 3, 4, 5, 6)]
    partners = [f.translate(s) for s in seps]
    c, res = commutator_matrix([f] + partners, ctx.quad, ctx.constants, real=task.get("real", True))
    norm = res.matrix[0, 0].real
    rows = []
    ok = True
    for j, s in enumerate(seps, start=1):
        cls = causal_separation(f.effective_region(), partners[j - 1].effective_region())
        rel = abs(c[j, 0]) / norm
        if cls == "spacelike" and rel > 1e-6:
            ok = False
        rows.append({"dt": s[0], "dx": s[1], "dy": s[2], "dz": s[3], "causal_class": cls, "abs_C": abs(c[j, 0]),
                     "relative": rel})
    return {"norm": norm, "passed": ok, "tolerance": 1e-6, "nodes_used": res.nodes_used}, rows


def _bases(ctx, task):
    a_names = task.get("a_bank") or task.get("bank")
    b_names = task.get("b_bank") or a_names
    floor = ctx.scenario.fock["eigen_floor"]
    ba = fk.build_mode_basis(ctx.functions(a_names), "a", ctx.quad, floor, ctx.constants)
    bb = fk.build_mode_basis(ctx.functions(b_names), "b", ctx.quad, floor, ctx.constants)
    return ba, bb


def _task_commutators(ctx, task):
    ba, bb = _bases(ctx, task)
    space = fk.FockSpace(ba.modes, bb.modes, int(task.get("cutoff", ctx.scenario.fock["cutoff"])))
    names = task.get("a_bank") or task.get("bank")
    funcs = ctx.functions(names)
    ident = fk._identity(space)
    rows = []
    worst = 0.0
    for i, f in enumerate(funcs):
        for j, g in enumerate(funcs):
            a_f = fk.ladder_operator(ba, f, "annihilate", "a", space)
            ad_g = fk.ladder_operator(ba, g, "create", "a", space)
            gf = ba.pair(g, f)
            resid = (fk.commutator(a_f, ad_g) - ident * gf).restricted_norm()
            rel = resid / max(abs(gf), 1e-300)
            zero = fk.commutator(a_f, fk.ladder_operator(ba, g, "annihilate", "a", space)).is_exactly_zero()
            worst = max(worst, rel)
            rows.append({"f": f.name, "g": g.name, "pairing_re": gf.real, "pairing_im": gf.imag,
                         "ccr_relative_residual": rel, "aa_exactly_zero": zero})
    ok = worst <= 1e-8 and all(r["aa_exactly_zero"] for r in rows)
    return {"dimension": space.dimension, "passed": ok, "tolerance": 1e-8, "max_relative_residual": worst}, rows


def _task_charfn(ctx, task):
    f = ctx.function(task["function"])
    obs = task.get("observable", "phi")
    alpha, beta = float(task.get("alpha", 1.0)), float(task.get("beta", 0.0 if obs == "phi" else 1.0))
    floor = ctx.scenario.fock["eigen_floor"]
    ba = fk.build_mode_basis([f], "a", ctx.quad, floor, ctx.constants)
    bb = fk.build_mode_basis([f], "b", ctx.quad, floor, ctx.constants) if obs != "phi" else None
    state_kind = task.get("state", "vacuum")
    b_modes = 0 if bb is None else bb.modes
    if state_kind == "gibbs":
        mu, nu = float(task["mu"]), float(task["nu"])
        cutoff = int(task.get("cutoff", fk.gibbs_cutoff(mu, nu, ba.modes + b_modes)))
    else:
        cutoff = int(task.get("cutoff", 24))
    space = fk.FockSpace(ba.modes, b_modes, cutoff)
    op = fk.observable(fk.ObservableSpec(obs, f, alpha, beta), ba, bb, space)
    state = space.vacuum() if state_kind == "vacuum" else fk.gibbs_weight(fk.GibbsSpec(mu, nu), space)
    lam = _lambda_grid(task)
    num = fk.characteristic_function(state, op, lam, warn=False)
    ana = fk.characteristic_function(state, op, lam, method="analytic-gaussian")
    diff = float(np.max(np.abs(num - ana)))
    tol = float(task.get("tolerance", 1e-6))
    rows = [{"lambda": l, "numeric_re": n.real, "numeric_im": n.imag, "analytic": a.real}
            for l, n, a in zip(lam, num, ana)]
    return {"state": state_kind, "cutoff": cutoff, "max_difference": diff, "passed": diff <= tol,
            "tolerance": tol}, rows


def _task_gibbs_sweep(ctx, task):
    f = ctx.function(task["function"])
    alpha, beta = float(task.get("alpha", 1 / math.sqrt(2))), float(task.get("beta", 1 / math.sqrt(2)))
    mus = [float(x) for x in task.get("mus", [0.5, 1.0, 2.0])]
    nus = [float(x) for x in task.get("nus", mus)]
    law = task.get("assert_law", "thermal")
    if law not in ("thermal", "paper"):
        raise ConfigError(f"gibbs-sweep.assert_law must be 'thermal' or 'paper', got {law!r}")
    lam = float(task.get("lambda", 0.5))
    floor = ctx.scenario.fock["eigen_floor"]
    ba = fk.build_mode_basis([f], "a", ctx.quad, floor, ctx.constants)
    bb = fk.build_mode_basis([f], "b", ctx.quad, floor, ctx.constants)
    cutoff = fk.gibbs_cutoff(min(mus), min(nus), ba.modes + bb.modes)
    space = fk.FockSpace(ba.modes, bb.modes, cutoff)
    xi = fk.observable(fk.ObservableSpec("xi", f, alpha, beta), ba, bb, space)
    ff, ffn = ba.pair(f.conjugate(), f).real, bb.pair(f.conjugate(), f).real
    rows = []
    worst = 0.0
    tol = float(task.get("tolerance", 1e-3))
    for mu in mus:
        for nu in nus:
            rho = fk.gibbs_weight(fk.GibbsSpec(mu, nu), space)
            phi = fk.characteristic_function(rho, xi, [lam], warn=False)[0].real
            fitted = -2 * math.log(phi) / (lam**2 * ff)
            paper = alpha**2 / math.tanh(mu) + beta**2 / math.tanh(nu)
            thermal = (alpha**2 * fk.thermal_multiplier(mu) * ff + beta**2 * fk.thermal_multiplier(nu) * ffn) / ff
            target = thermal if law == "thermal" else paper
            rel = abs(fitted - target) / target
            worst = max(worst, rel)
            rows.append({"mu": mu, "nu": nu, "fitted": fitted, "coth_mu_law": paper, "coth_half_mu_law": thermal,
                         "relative_to_asserted": rel, "tail_bound": rho.meta["tail_bound"]})
    monotone = all(
        next(r["fitted"] for r in rows if r["mu"] == mus[i] and r["nu"] == nu)
        > next(r["fitted"] for r in rows if r["mu"] == mus[i + 1] and r["nu"] == nu)
        for nu in nus for i in range(len(mus) - 1))
    return {"cutoff": cutoff, "asserted_law": law, "max_relative": worst, "monotone_in_mu": monotone,
            "passed": worst <= tol and monotone, "tolerance": tol}, rows


def _task_fluctuation_regimes(ctx, task):
    f, g = ctx.functions(task["bank"][:2])
    ba, bb = _bases(ctx, task)
    space = fk.FockSpace(ba.modes, bb.modes, int(task.get("cutoff", 6)))
    values = [float(v) for v in task.get("values", [0.0, 0.5, 1.0, math.sqrt(2)])]
    cphi = fk.commutator(fk.observable(fk.ObservableSpec("phi", f), ba, bb, space),
                         fk.observable(fk.ObservableSpec("phi", g), ba, bb, space))
    vac = space.vacuum()
    ff = ba.pair(f.conjugate(), f).real
    rows = []
    worst = 0.0
    for alpha in values:
        for beta in values:
            xf = fk.observable(fk.ObservableSpec("xi", f, alpha, beta), ba, bb, space)
            xg = fk.observable(fk.ObservableSpec("xi", g, alpha, beta), ba, bb, space)
            cx = fk.commutator(xf, xg)
            scale = max(1.0, alpha**2 + beta**2) * max(xf.norm() * xg.norm(), 1e-300)
            resid = (cx - cphi * (alpha**2 - beta**2)).restricted_norm(min(cx.safe_level, cphi.safe_level)) / scale
            worst = max(worst, resid)
            regime = "compensated" if alpha == beta else ("quantum-like" if alpha > beta else "inverted")
            rows.append({"alpha": alpha, "beta": beta, "regime": regime,
                         "commutator_norm": cx.restricted_norm(), "scaling_residual": resid,
                         "vacuum_variance": vac.expectation(xf @ xf).real,
                         "predicted_variance": (alpha**2 + beta**2) * ff})
    return {"passed": worst <= 1e-8, "tolerance": 1e-8, "max_residual": worst}, rows


def _task_sample(ctx, task):
    bank = ctx.functions(task["bank"])
    source = task.get("source", "vacuum")
    model = rf.covariance(bank, source, ctx.quad, task.get("mu"), task.get("nu"), task.get("law", "thermal"),
                          ctx.constants)
    count = int(task.get("count", 100_000))
    batch = rf.sample_batch(model, count, ctx.seed, threads=ctx.threads)
    z = np.abs(batch.empirical_covariance - model.matrix) / batch.standard_errors
    rows = [{"row": i, "col": j, "model": model.matrix[i, j], "empirical": batch.empirical_covariance[i, j],
             "standard_error": batch.standard_errors[i, j], "z": z[i, j]}
            for i in range(model.size) for j in range(model.size)]
    return {"seed": ctx.seed, "count": count, "generator": batch.generator, "max_z": float(np.max(z)),
            "passed": float(np.max(z)) <= 4.0, "tolerance": 4.0}, rows


def _task_convolution(ctx, task):
    f = ctx.function(task["function"])
    a_funcs = [f]
    h = None
    if task.get("quantum"):
        h = ctx.function(task["quantum"])
        a_funcs.append(h)
    floor = ctx.scenario.fock["eigen_floor"]
    ba = fk.build_mode_basis(a_funcs, "a", ctx.quad, floor, ctx.constants)
    bb = fk.build_mode_basis([f], "b", ctx.quad, floor, ctx.constants)
    space = fk.FockSpace(ba.modes, bb.modes, int(task.get("cutoff", 30)))
    state = space.vacuum() if h is None else fk.state_prepare("single_quantum", ba, space, h)
    lam = _lambda_grid(task)
    rep = rf.convolution_check(state, f, lam, ba, bb, space)
    rows = [{"lambda": l, "phi_chi": a, "phi_phi_smoothed": b}
            for l, a, b in zip(rep["lambdas"], rep["phi_chi"]["re"], rep["phi_phi_smoothed"]["re"])]
    tol = float(task.get("tolerance", 1e-8))
    return {"max_difference": rep["max_difference"], "smoothing_variance": rep["smoothing_variance"],
            "passed": rep["max_difference"] <= tol, "tolerance": tol}, rows


def _task_acceptance(ctx, task):
    from .acceptance import run_criteria

    results = run_criteria(task.get("only"), fast=bool(task.get("fast", False)), threads=ctx.threads)
    rows = [{"number": r.number, "tag": r.tag, "passed": r.passed, "measured": r.measured,
             "tolerance": r.tolerance} for r in results]
    return {"criteria": [r.to_dict() for r in results], "passed": all(r.passed for r in results)}, rows


_RUNNERS = {
    "gram": _task_gram,
    "causality-scan": _task_causality_scan,
    "commutators": _task_commutators,
    "charfn": _task_charfn,
    "gibbs-sweep": _task_gibbs_sweep,
    "fluctuation-regimes": _task_fluctuation_regimes,
    "sample": _task_sample,
    "convolution": _task_convolution,
    "acceptance": _task_acceptance,
}


def conventions(hbar=1.0):
    return {
        "metric_signature": "+---",
        "fourier_transform": "f~(k) = int f(x) exp(+i (k0 x0 - kvec . xvec)) d^4x",
        "positive_frequency": "k0 > 0",
        "measure": "d^3k / ((2 pi)^3 2 |k|)",
        "hbar": hbar,
        "ladder": "a_f = sum_alpha (e_alpha, f) a_alpha; [a_f, a_g^+] = (g, f)",
    }


def versions():
    return {"rfoptics": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "generator": rf.GENERATOR}


def run_scenario(scenario: Scenario, out_dir=None, threads=1, seed=None):
    """Execute every task; returns the report dict (also written when ``out_dir`` is set)."""
    ctx = _Context(scenario, threads, seed)
    tasks = []
    timing = {}
    for i, task in enumerate(scenario.tasks):
        tid = task.get("id", f"{i:02d}-{task['type']}")
        t0 = time.perf_counter()
        result, rows = _RUNNERS[task["type"]](ctx, task)
        timing[tid] = round(time.perf_counter() - t0, 3)
        entry = {"id": tid, "type": task["type"], **result}
        if out_dir is not None and rows:
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, f"{tid}.csv")
            write_rows(path, rows)
            entry["csv"] = os.path.basename(path)
        tasks.append(entry)
    passed = all(t.get("passed") is not False for t in tasks)
    report = {
        "scenario": scenario.name,
        "source": scenario.source,
        "conventions": conventions(scenario.hbar),
        "seed": ctx.seed,
        "versions": versions(),
        "tasks": tasks,
        "passed": passed,
        "timing": timing,
    }
    return report


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})


def _cell(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (np.floating,)):
        return f"{float(v):.17g}"
    return v
