"""Command-line front end.

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 configuration
or usage error, 3 numerical non-convergence.  ``RFOPTICS_THREADS`` sets
the default worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import resources

import numpy as np
import yaml

from .acceptance import _plain, run_criteria
from .pairing import CutoffError, HermiticityError, QuadratureError
from .scenario import ConfigError, conventions, load_scenario, parse_scenario, run_scenario, versions, write_rows

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _default_threads():
    raw = os.environ.get("RFOPTICS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"RFOPTICS_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("RFOPTICS_THREADS must be >= 1")
    return n


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def bundled_scenario(name="paper-identities"):
    return resources.files("rfoptics").joinpath("scenarios", f"{name}.yaml")


def _common(p):
    p.add_argument("--out", default=None, help="output directory for report.json and CSV files")
    p.add_argument("--seed", type=_u64, default=None, help="unsigned 64-bit seed")
    p.add_argument("--threads", type=_positive_int, default=None, help="worker threads (default $RFOPTICS_THREADS or 1)")


def build_parser():
    parser = _Parser(prog="rfoptics", description="Light-cone pairings, Fock operators and random-field checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario", help="scenario YAML file, or the name of a bundled scenario")
    _common(p)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--fast", action="store_true", help="skip optional artifacts (separation scan)")
    p.add_argument("--only", action="append", default=None, metavar="TAG", help="criterion tag or number (repeatable)")
    _common(p)

    p = sub.add_parser("gram", help="Gram matrix of a bank")
    p.add_argument("--scenario", default=None, help="scenario supplying the bank (default: bundled)")
    p.add_argument("--bank", nargs="+", default=None, help="bank member names (default: all)")
    p.add_argument("--sector", choices=["positive", "negative"], default="positive")
    _common(p)

    p = sub.add_parser("charfn", help="characteristic function of an observable")
    p.add_argument("--scenario", default=None)
    p.add_argument("--function", default=None, help="bank member (default: first)")
    p.add_argument("--observable", choices=["phi", "chi", "xi"], default="phi")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--state", choices=["vacuum", "gibbs"], default="vacuum")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--lambdas", type=float, nargs=3, default=[0.0, 3.0, 13], metavar=("START", "STOP", "NUM"))
    _common(p)

    p = sub.add_parser("sample", help="Gaussian random-field draws")
    p.add_argument("--scenario", default=None)
    p.add_argument("--bank", nargs="+", default=None, help="real bank members (default: all real ones)")
    p.add_argument("--count", type=_positive_int, default=100_000)
    p.add_argument("--source", choices=["vacuum", "gibbs"], default="vacuum")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    _common(p)
    return parser


def _resolve_scenario(arg):
    if arg is None:
        arg = "paper-identities"
    if os.path.exists(arg):
        return load_scenario(arg)
    res = bundled_scenario(arg)
    if res.is_file():
        return parse_scenario(res.read_text(), source=f"bundled:{arg}")
    raise ConfigError(f"{arg}: no such scenario file or bundled scenario")


def _write_report(report, out):
    text = json.dumps(_plain(report), indent=2, sort_keys=False)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "report.json"), "w") as fh:
            fh.write(text + "\n")
    return text


def _print_table(tasks):
    for t in tasks:
        status = {True: "PASS", False: "FAIL", None: "----"}[t.get("passed")]
        print(f"[{status}] {t['id']}")


def cmd_run(args, threads):
    scenario = _resolve_scenario(args.scenario)
    report = run_scenario(scenario, args.out, threads, args.seed)
    _write_report(report, args.out)
    _print_table(report["tasks"])
    return EXIT_OK if report["passed"] else EXIT_ASSERT


def cmd_verify(args, threads):
    t0 = time.perf_counter()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    results = run_criteria(args.only, fast=args.fast, threads=threads, out_dir=args.out, echo=print)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed in {time.perf_counter() - t0:.1f}s")
    report = {"scenario": "acceptance", "conventions": conventions(), "versions": versions(),
              "fast": args.fast, "criteria": [r.to_dict() for r in results],
              "passed": n_pass == len(results)}
    if args.out:
        _write_report(report, args.out)
        write_rows(os.path.join(args.out, "verify.csv"),
                   [{"number": r.number, "tag": r.tag, "passed": r.passed, "measured": r.measured,
                     "tolerance": r.tolerance, "runtime_s": round(r.runtime, 3)} for r in results])
    return EXIT_OK if report["passed"] else EXIT_ASSERT


def _single_task(args, threads, task):
    base = _resolve_scenario(args.scenario)
    # re-validate so task references get the same diagnostics as a file
    scenario = parse_scenario(yaml.safe_dump(dict(base.raw, tasks=[task])), source=base.source)
    report = run_scenario(scenario, args.out, threads, args.seed)
    _write_report(report, args.out)
    t = report["tasks"][0]
    print(json.dumps(_plain({k: v for k, v in t.items() if k not in ("criteria",)}), indent=2))
    return EXIT_OK if t.get("passed") is not False else EXIT_ASSERT


def cmd_gram(args, threads):
    scenario = _resolve_scenario(args.scenario)
    bank = args.bank or list(scenario.bank)
    return _single_task(args, threads, {"type": "gram", "id": "gram", "bank": bank, "sector": args.sector})


def cmd_charfn(args, threads):
    scenario = _resolve_scenario(args.scenario)
    fname = args.function or next(iter(scenario.bank), None)
    if fname is None:
        raise ConfigError("scenario bank is empty")
    beta = args.beta if args.beta is not None else (0.0 if args.observable == "phi" else 1.0)
    start, stop, num = args.lambdas
    task = {"type": "charfn", "id": "charfn", "function": fname, "observable": args.observable,
            "alpha": args.alpha, "beta": beta, "state": args.state,
            "lambdas": {"start": start, "stop": stop, "num": int(num)}}
    if args.state == "gibbs":
        task.update(mu=args.mu, nu=args.nu)
    return _single_task(args, threads, task)


def cmd_sample(args, threads):
    scenario = _resolve_scenario(args.scenario)
    bank = args.bank or [n for n, s in scenario.bank.items()
                         if not any(complex(c).imag for c in s["polarization"]) and not any(s.get("carrier", [0] * 4))]
    task = {"type": "sample", "id": "sample", "bank": bank, "count": args.count, "source": args.source}
    if args.source == "gibbs":
        task.update(mu=args.mu, nu=args.nu)
    return _single_task(args, threads, task)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = args.threads or _default_threads()
        handler = {"run": cmd_run, "verify": cmd_verify, "gram": cmd_gram, "charfn": cmd_charfn,
                   "sample": cmd_sample}[args.command]
        return handler(args, threads)
    except (ConfigError, KeyError, CutoffError) as exc:
        print(f"rfoptics: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, HermiticityError) as exc:
        print(f"rfoptics: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"rfoptics: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
