"""Command-line front end.

Scenario files are TOML::

    seed = 7
    rules = ["NoDiscovery", "DiscoverP1", "DiscoverP2", "DiscoverBoth"]

    [prior]
    means = [-1.0, 0.5]     # or: mu = 0.5, c = 0.4
    sds = [1.0, 1.0]
    rho = 0.5

    [weights]
    w = [0.5, 0.5]          # or: w1 = 0.5

    [grid]                  # region-map
    n_mu = 200
    n_c = 200
    mu_max = 1.0

    [sweep]                 # sweep
    points = 20
    w1 = [0.5]

    [noisy]                 # noisy
    project = 1
    taus = [0.01, 0.1, 1.0]

    [output]
    csv = "map.csv"
    json = "summary.json"

Exit codes: 0 success, 1 verification failure, 2 invalid input, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .errors import AccuracyError, DomainError, PremiseError, UnsupportedError
from .extensions import NoisySignalSpec, sequential_value, utility_noisy
from .gaussian import PriorSpec
from .payoffs import DiscoveryRule, one_shot_rules, payoff_report, utility_discover_one, utility_no_discovery
from .proposal import Weights
from . import regions, verify

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3


class InputError(Exception):
    pass


def _num(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InputError(f"{what} must be a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise InputError(f"{what} must be finite")
    return x


def _nums(xs, what: str) -> list:
    if not isinstance(xs, list) or not xs:
        raise InputError(f"{what} must be a nonempty list of numbers")
    return [_num(x, what) for x in xs]


def load_scenario(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"scenario {path}: {exc}") from None


def build_prior(sc: dict) -> PriorSpec:
    p = sc.get("prior")
    if not isinstance(p, dict):
        raise InputError("scenario needs a [prior] table")
    if "rho" not in p:
        raise InputError("prior.rho is required")
    rho = _num(p["rho"], "prior.rho")
    if not 0.0 < rho < 1.0:
        raise InputError("rho must lie in (0,1)")
    sds = _nums(p.get("sds"), "prior.sds")
    if any(s <= 0 for s in sds):
        raise InputError("prior.sds must all be positive")
    if "means" in p:
        means = _nums(p["means"], "prior.means")
    elif "mu" in p and "c" in p:
        mu, c = _num(p["mu"], "prior.mu"), _num(p["c"], "prior.c")
        means = [-mu, c * mu]
    else:
        raise InputError("prior needs means, or mu and c")
    if len(means) != len(sds) or len(means) < 2:
        raise InputError("prior.means and prior.sds must have the same length (at least 2)")
    return PriorSpec(tuple(means), tuple(sds), rho)


def build_weights(sc: dict, n: int) -> Weights:
    w = sc.get("weights", {})
    if not isinstance(w, dict):
        raise InputError("[weights] must be a table")
    if "w" in w:
        vals = _nums(w["w"], "weights.w")
    elif "w1" in w:
        if n != 2:
            raise InputError("weights.w1 only applies to two projects")
        w1 = _num(w["w1"], "weights.w1")
        vals = [w1, 1.0 - w1]
    else:
        vals = [1.0 / n] * n
    if len(vals) != n:
        raise InputError(f"weights must have {n} entries")
    return Weights(tuple(vals))


def build_rules(sc: dict, n: int) -> list:
    names = sc.get("rules")
    if names is None:
        return one_shot_rules(n) if n == 2 else [DiscoveryRule.none()] + [DiscoveryRule.one(k) for k in range(n)]
    if not isinstance(names, list) or not names:
        raise InputError("rules must be a nonempty list of rule names")
    rules = [DiscoveryRule.parse(str(x)) for x in names]
    for r in rules:
        if r.index is not None and r.index >= n:
            raise InputError(f"rule {r.label} refers to a project that does not exist")
    return rules


def region_params(sc: dict) -> regions.RegionParams:
    prior = build_prior(sc)
    if prior.n != 2:
        raise InputError("region maps need two projects")
    w = build_weights(sc, 2)
    return regions.RegionParams(prior.sds[0], prior.sds[1], prior.rho, w[0])


def _fmt(x: float) -> str:
    return f"{x:.15g}"


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _emit_json(payload: dict, path: Optional[str]) -> None:
    payload = dict(payload, version=__version__)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path:
        _write(path, text)
    else:
        sys.stdout.write(text)


# -- subcommands -------------------------------------------------------


def cmd_utility(args) -> int:
    sc = load_scenario(args.scenario)
    prior = build_prior(sc)
    w = build_weights(sc, prior.n)
    rules = build_rules(sc, prior.n)
    report = payoff_report(prior, w, rules)
    if args.json:
        _emit_json(report.as_dict(), args.json)
    for r, v in report.per_rule.items():
        print(f"{r.label:<24} {_fmt(v)}")
    print(f"best: {report.best_rule.label}")
    for (a, b), m in report.margins.items():
        print(f"margin {a.label} - {b.label}: {_fmt(m)}")
    return EXIT_OK


def cmd_region_map(args) -> int:
    sc = load_scenario(args.scenario)
    params = region_params(sc)
    grid = sc.get("grid", {})
    if "mu" in grid or "c" in grid:
        mus = _nums(grid.get("mu"), "grid.mu")
        cs = _nums(grid.get("c"), "grid.c")
    else:
        n_mu = int(grid.get("n_mu", 200))
        n_c = int(grid.get("n_c", 200))
        mus, cs = regions.default_grid(n_mu, n_c, _num(grid.get("mu_max", 1.0), "grid.mu_max"))
    if any(m <= 0 for m in mus) or any(not 0 <= c < 1 for c in cs):
        raise InputError("grid needs mu > 0 and c in [0, 1)")
    rules = build_rules(sc, 2) if "rules" in sc else list(regions.SINGLE_RULES)
    out = sc.get("output", {})
    csv_path = args.csv or out.get("csv", "region_map.csv")
    json_path = args.json or out.get("json", "region_map.json")
    rmap = regions.region_map(params, mus, cs, rules, threads=args.threads)
    _write(csv_path, rmap.to_csv())
    summary = dict(rmap.summary(), version=__version__)
    _write(json_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if args.emit_gnuplot:
        _write(str(Path(csv_path).with_suffix(".gp")), regions.gnuplot_script(Path(csv_path).name, params))
    counts = summary["components"]
    print(f"wrote {csv_path} and {json_path}; components: "
          + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_suite(args.suite, seed=args.seed)
    for r in results:
        print(r.line())
    if args.json:
        _emit_json({"suite": args.suite, "seed": args.seed, "results": [r.as_dict() for r in results]}, args.json)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    sw = sc.get("sweep", {})
    points = 1000 if args.full else int(sw.get("points", args.points))
    if points < 2:
        raise InputError("sweep.points must be at least 2")
    if args.full:
        print("warning: the full 1000-point sweep evaluates about 1e12 payoffs and will run for a very long time",
              file=sys.stderr)
    rhos = _nums(sw["rho"], "sweep.rho") if "rho" in sw else list(np.linspace(0.05, 0.95, points))
    w1s = _nums(sw["w1"], "sweep.w1") if "w1" in sw else [0.5]
    ratios = (_nums(sw["mean_ratio"], "sweep.mean_ratio") if "mean_ratio" in sw
              else list(np.linspace(1.1, 5.0, points)))
    mu2 = _num(sw.get("mu2", -1.0), "sweep.mu2")
    res = regions.single_crossing_scan(rhos, w1s, ratios, n_sigma=points, mu2=mu2)
    path = args.output or sc.get("output", {}).get("csv", "violations.csv")
    _write(path, regions.violations_csv(res))
    print(f"{len(res.crossings)} crossings, {len(res.violations)} violations, "
          f"{len(res.bracket_failures)} outside the bracket; wrote {path}")
    return EXIT_OK


def cmd_sequential(args) -> int:
    sc = load_scenario(args.scenario)
    prior = build_prior(sc)
    w = build_weights(sc, prior.n)
    value, policy = sequential_value(prior, w)
    payload = {
        "value": value,
        "first_move": policy.first.label,
        "first_move_values": {r.label: v for r, v in sorted(policy.first_move_values.items(),
                                                             key=lambda kv: kv[0].sort_key())},
        "continue_intervals": [[_fmt(a), _fmt(b)] for a, b in policy.continue_intervals],
    }
    _emit_json(payload, args.json)
    return EXIT_OK


def cmd_noisy(args) -> int:
    sc = load_scenario(args.scenario)
    prior = build_prior(sc)
    w = build_weights(sc, prior.n)
    nz = sc.get("noisy", {})
    project = int(args.project if args.project is not None else nz.get("project", 1)) - 1
    if not 0 <= project < prior.n:
        raise InputError("noisy.project is out of range (projects are numbered from 1)")
    if args.tau is not None:
        taus = [args.tau]
    elif "taus" in nz:
        taus = _nums(nz["taus"], "noisy.taus")
    elif "tau" in nz:
        taus = [_num(nz["tau"], "noisy.tau")]
    else:
        raise InputError("give tau with --tau or noisy.tau / noisy.taus")
    rows = [{"tau": t, "utility": utility_noisy(prior, w, NoisySignalSpec(project, t))} for t in taus]
    payload = {
        "project": project + 1,
        "exact_discovery": utility_discover_one(prior, w, project),
        "no_discovery": utility_no_discovery(prior, w),
        "noisy": rows,
    }
    _emit_json(payload, args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trialballoon", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("utility", help="expected utility of each rule")
    p.add_argument("scenario")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=cmd_utility)

    p = sub.add_parser("region-map", help="classify the optimal rule over a (mu, c) grid")
    p.add_argument("scenario")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker processes (default from ${regions.THREADS_ENV}, else 1)")
    p.add_argument("--emit-gnuplot", action="store_true", help="also write a gnuplot script next to the CSV")
    p.set_defaults(func=cmd_region_map)

    p = sub.add_parser("verify", help="run acceptance checks")
    p.add_argument("suite", choices=sorted(verify.SUITES) + ["all"])
    p.add_argument("--seed", type=int, default=verify.DEFAULT_SEED)
    p.add_argument("--json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="single-crossing sweep in sigma1")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--full", action="store_true", help="1000 points per axis (very slow)")
    p.add_argument("--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sequential", help="two-stage sequential discovery")
    p.add_argument("scenario")
    p.add_argument("--json")
    p.set_defaults(func=cmd_sequential)

    p = sub.add_parser("noisy", help="utility of discovering a noisy signal")
    p.add_argument("scenario")
    p.add_argument("--project", type=int, help="project number, from 1")
    p.add_argument("--tau", type=float)
    p.add_argument("--json")
    p.set_defaults(func=cmd_noisy)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, DomainError, PremiseError, UnsupportedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AccuracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
