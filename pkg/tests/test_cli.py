import json
import subprocess
import sys
import time

import pytest

from trialballoon import cli, verify
from trialballoon.cutoffs import c_star
from trialballoon.extensions import NoisySignalSpec, utility_noisy
from trialballoon.gaussian import PriorSpec
from trialballoon.payoffs import one_shot_rules, payoff_report
from trialballoon.proposal import Weights
from trialballoon.verify import CheckResult

MINIMAL = """
rules = ["NoDiscovery", "DiscoverP1", "DiscoverP2", "DiscoverBoth"]
[prior]
means = [-1.0, 0.5]
sds = [1.0, 1.0]
rho = 0.5
[weights]
w = [0.5, 0.5]
"""

BASE_POINT = """
[prior]
mu = 0.5
c = 0.4
sds = [0.05, 0.2]
rho = 0.25
[weights]
w1 = 0.6666666666666666
"""


def scenario(tmp_path, text, name="s.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_utility_minimal(tmp_path, capsys):
    assert cli.main(["utility", scenario(tmp_path, MINIMAL)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in out[:4]] == ["NoDiscovery", "DiscoverP1", "DiscoverP2", "DiscoverBoth"]
    assert out[4].startswith("best: ")


def test_utility_json_matches_library(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["utility", scenario(tmp_path, BASE_POINT), "--json", str(out)]) == 0
    got = json.loads(out.read_text())
    prior = PriorSpec.disfavored(0.5, 0.4, 0.05, 0.2, 0.25)
    report = payoff_report(prior, Weights((0.6666666666666666, 1 - 0.6666666666666666)), one_shot_rules())
    assert got["per_rule"] == {r.label: v for r, v in report.per_rule.items()}
    assert got["best_rule"] == report.best_rule.label


@pytest.mark.parametrize("text, needle", [
    (MINIMAL.replace("rho = 0.5", "rho = 1.5"), "rho must lie in (0,1)"),
    (MINIMAL.replace("sds = [1.0, 1.0]", "sds = [1.0, -1.0]"), "prior.sds"),
    (MINIMAL.replace("w = [0.5, 0.5]", "w = [0.5, 0.6]"), "weights"),
    (MINIMAL.replace('"DiscoverP2"', '"DiscoverP7"'), "DiscoverP7"),
    (MINIMAL.replace("[prior]", "[prio]"), "[prior]"),
    ("this is = = not toml", "scenario"),
])
def test_invalid_input_exit_code(tmp_path, capsys, text, needle):
    assert cli.main(["utility", scenario(tmp_path, text)]) == 2
    assert needle in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path, capsys):
    assert cli.main(["utility", str(tmp_path / "nope.toml")]) == 3
    assert "error" in capsys.readouterr().err


def test_unwritable_output_is_io_error(tmp_path):
    sc = scenario(tmp_path, BASE_POINT + "[grid]\nmu = [0.5]\nc = [0.4]\n")
    assert cli.main(["region-map", sc, "--csv", str(tmp_path / "no" / "dir" / "m.csv"),
                     "--json", str(tmp_path / "m.json")]) == 3


def test_verify_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(verify, "run_suite", lambda name, seed: [CheckResult("x", False, "bad", "none")])
    assert cli.main(["verify", "cutoffs"]) == 1
    assert "[FAIL] x" in capsys.readouterr().out


def test_verify_cutoffs_suite(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert cli.main(["verify", "cutoffs", "--json", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and all(line.startswith("[PASS]") for line in lines)
    payload = json.loads(out.read_text())
    assert payload["suite"] == "cutoffs" and all(r["passed"] for r in payload["results"])


def test_unknown_suite_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "nope"])
    assert exc.value.code == 2


def test_single_cell_region_map(tmp_path):
    sc = scenario(tmp_path, BASE_POINT + "[grid]\nmu = [0.5]\nc = [0.4]\n")
    csv_path, json_path = tmp_path / "m.csv", tmp_path / "m.json"
    assert cli.main(["region-map", sc, "--csv", str(csv_path), "--json", str(json_path), "--emit-gnuplot"]) == 0
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "mu,c,label,margin" and len(rows) == 2
    assert (tmp_path / "m.gp").read_text().count("'m.csv'") == 1
    assert json.loads(json_path.read_text())["grid"]["n_mu"] == 1


def test_region_map_is_byte_identical(tmp_path):
    sc = scenario(tmp_path, BASE_POINT + "[grid]\nn_mu = 8\nn_c = 9\n")
    outs = []
    for k in range(2):
        c, j = tmp_path / f"m{k}.csv", tmp_path / f"m{k}.json"
        assert cli.main(["region-map", sc, "--csv", str(c), "--json", str(j)]) == 0
        outs.append((c.read_bytes(), j.read_bytes()))
    assert outs[0] == outs[1]


def test_limit_style_boundary(tmp_path):
    text = """
rules = ["NoDiscovery", "DiscoverP1"]
[prior]
mu = 1.0
c = 0.0
sds = [0.3, 0.2]
rho = 0.25
[weights]
w1 = 0.7
[grid]
mu = [5.0, 10.0, 15.0]
c = [%s]
""" % ", ".join(str(k / 200) for k in range(200))
    sc = scenario(tmp_path, text)
    j = tmp_path / "m.json"
    assert cli.main(["region-map", sc, "--csv", str(tmp_path / "m.csv"), "--json", str(j)]) == 0
    rows = json.loads(j.read_text())["boundaries"]
    target = c_star(0.3, 0.2, 0.25)
    gaps = [abs(r["changes"][0]["c"] - target) for r in rows]
    assert gaps[-1] < 0.01
    assert gaps[-1] <= gaps[0]


def test_bad_threads(tmp_path, capsys):
    sc = scenario(tmp_path, BASE_POINT + "[grid]\nmu = [0.5]\nc = [0.4]\n")
    assert cli.main(["region-map", sc, "--threads", "0"]) == 2


def test_small_sweep_is_fast(tmp_path, capsys):
    out = tmp_path / "v.csv"
    t0 = time.perf_counter()
    assert cli.main(["sweep", "--points", "2", "--output", str(out)]) == 0
    assert time.perf_counter() - t0 < 1.0
    assert out.read_text() == "rho,w1,mean_ratio,sign_changes\n"


def test_full_sweep_warns(tmp_path, monkeypatch, capsys):
    from trialballoon import regions

    seen = {}

    def fake(rhos, w1s, ratios, n_sigma, mu2):
        seen["n"] = n_sigma
        return regions.ScanResult()

    monkeypatch.setattr(regions, "single_crossing_scan", fake)
    assert cli.main(["sweep", "--full", "--output", str(tmp_path / "v.csv")]) == 0
    assert seen["n"] == 1000
    assert "warning" in capsys.readouterr().err


def test_sequential_command(tmp_path):
    text = BASE_POINT.replace("mu = 0.5\nc = 0.4", "means = [-0.5, 0.2]")
    out = tmp_path / "s.json"
    assert cli.main(["sequential", scenario(tmp_path, text), "--json", str(out)]) == 0
    got = json.loads(out.read_text())
    assert got["first_move"] == "DiscoverP1"
    assert got["value"] == pytest.approx(0.3619288489573836, abs=1e-12)


def test_noisy_command(tmp_path):
    text = MINIMAL + "[noisy]\nproject = 1\ntaus = [0.1, 1.0]\n"
    out = tmp_path / "n.json"
    assert cli.main(["noisy", scenario(tmp_path, text), "--json", str(out)]) == 0
    got = json.loads(out.read_text())
    assert [r["tau"] for r in got["noisy"]] == [0.1, 1.0]
    prior = PriorSpec((-1.0, 0.5), (1.0, 1.0), 0.5)
    for row in got["noisy"]:
        assert row["utility"] == utility_noisy(prior, Weights.two(0.5), NoisySignalSpec(0, row["tau"]))
    assert cli.main(["noisy", scenario(tmp_path, MINIMAL)]) == 2


def test_console_entry_point(tmp_path):
    sc = scenario(tmp_path, MINIMAL)
    runs = [subprocess.run([sys.executable, "-m", "trialballoon.cli", "utility", sc],
                           capture_output=True, text=True) for _ in range(2)]
    assert runs[0].returncode == 0
    assert runs[0].stdout == runs[1].stdout
    bad = subprocess.run([sys.executable, "-m", "trialballoon.cli", "utility",
                          scenario(tmp_path, MINIMAL.replace("rho = 0.5", "rho = 1.5"), "bad.toml")],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and "rho must lie in (0,1)" in bad.stderr
