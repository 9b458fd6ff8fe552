import json
import textwrap

import pytest

from rfoptics.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, bundled_scenario, main

BANK = """\
schema: 1
name: small
seed: 9
bank:
  - {name: f, kind: packet, polarization: [1, 0, 0, 0, 1, 0], normalize: true}
  - {name: g, kind: packet, polarization: [0, 1, 0, 0, 0, 1], center: [0.3, 0.4, -0.2, 0.1], normalize: true}
"""


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def test_empty_task_list(tmp_path):
    path = write(tmp_path, "schema: 1\nname: empty\ntasks: []\n")
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["tasks"] == [] and report["passed"] is True
    assert report["conventions"]["metric_signature"] == "+---"
    assert "numpy" in report["versions"]


def test_undefined_member_reports_line(tmp_path, capsys):
    path = write(tmp_path, BANK + "tasks:\n  - {type: gram, bank: [f, nope]}\n")
    assert main(["run", path]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert f"{path}:8: tasks[0].bank[1]: undefined bank member 'nope'" in err


@pytest.mark.parametrize("text,needle", [
    ("schema: 2\n", "schema"),
    ("schema: 1\nbogus: 1\n", "bogus"),
    ("schema: 1\ntasks:\n  - {type: wat}\n", "tasks[0].type"),
    ("schema: 1\nfock: {cutoff: 0}\n", "fock.cutoff"),
    ("schema: 1\nbank:\n  - {name: f, kind: packet, polarization: [1, 0]}\n", "bank[0].polarization"),
    ("schema: 1\nquadrature: {radial_nodes: 2}\n", "quadrature"),
    ("schema: [1\n", "YAML"),
])
def test_validation_errors(tmp_path, capsys, text, needle):
    assert main(["run", write(tmp_path, text)]) == EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--bogus"])
    assert exc.value.code == EXIT_CONFIG
    assert "usage:" in capsys.readouterr().err


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RFOPTICS_THREADS", "many")
    assert main(["run", write(tmp_path, "schema: 1\n")]) == EXIT_CONFIG


def test_non_convergence_exit(tmp_path):
    text = BANK.replace("seed: 9\n", "seed: 9\nquadrature: {max_rounds: 1, tolerance: 1.0e-15}\n")
    assert main(["run", write(tmp_path, text + "tasks:\n  - {type: gram, bank: [f, g]}\n")]) == EXIT_NUMERIC


def test_assertion_failure_exit(tmp_path):
    # the Gibbs weight follows the coth(mu / 2) law, so asserting coth(mu) fails
    text = BANK + "tasks:\n  - {type: gibbs-sweep, function: f, mus: [1.0, 2.0], assert_law: paper}\n"
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, text), "--out", str(out)]) == EXIT_ASSERT
    report = json.loads((out / "report.json").read_text())
    assert report["tasks"][0]["passed"] is False
    assert (out / "00-gibbs-sweep.csv").exists()


def test_reports_are_deterministic(tmp_path):
    text = BANK + textwrap.dedent("""\
        tasks:
          - {id: gram, type: gram, bank: [f, g]}
          - {id: ccr, type: commutators, bank: [f, g], cutoff: 3}
          - {id: draws, type: sample, bank: [f, g], count: 20000}
    """)
    path = write(tmp_path, text)
    reports = []
    for i, threads in enumerate(("1", "3")):
        out = tmp_path / f"o{i}"
        assert main(["run", path, "--out", str(out), "--threads", threads]) == EXIT_OK
        r = json.loads((out / "report.json").read_text())
        r.pop("timing")
        reports.append(r)
        assert (out / "gram.csv").exists() and (out / "draws.csv").exists()
    assert reports[0] == reports[1]


def test_seed_override(tmp_path):
    text = BANK + "tasks:\n  - {id: draws, type: sample, bank: [f], count: 1000}\n"
    path = write(tmp_path, text)
    main(["run", path, "--out", str(tmp_path / "a"), "--seed", "123"])
    r = json.loads((tmp_path / "a" / "report.json").read_text())
    assert r["seed"] == 123
    with pytest.raises(SystemExit):
        main(["run", path, "--seed", str(2**64)])


def test_subcommands(tmp_path, capsys):
    scen = write(tmp_path, BANK)
    assert main(["gram", "--scenario", scen, "--out", str(tmp_path / "g")]) == EXIT_OK
    assert (tmp_path / "g" / "gram.csv").exists()
    assert main(["charfn", "--scenario", scen, "--observable", "xi", "--alpha", "0.8", "--beta", "0.6"]) == EXIT_OK
    assert main(["sample", "--scenario", scen, "--count", "5000", "--seed", "4"]) == EXIT_OK
    assert main(["gram", "--scenario", scen, "--bank", "f", "zzz"]) == EXIT_CONFIG


def test_verify_only(capsys, tmp_path):
    assert main(["verify", "--only", "eq4", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "eq4" in out and "1/1 criteria passed" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert [c["tag"] for c in report["criteria"]] == ["eq4"]
    assert main(["verify", "--only", "nothing"]) == EXIT_CONFIG


def test_bundled_scenario_passes(tmp_path):
    assert bundled_scenario().is_file()
    assert main(["run", "paper-identities", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert {t["type"] for t in report["tasks"]} >= {"gram", "commutators", "fluctuation-regimes", "gibbs-sweep"}
