"""Command-line interface: ``rsstilt {sample,weights,bootstrap,test,simulate}``.

Settings resolve as built-in defaults, then an optional JSON file given by
``--config``, then explicit flags. The fully resolved settings are written at
the top of every output as ``# key=value`` lines.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors; a
runtime error message starts with the error class name (for example
``TargetOutOfRange``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .core import Design, DistributionSpec, UrssSample
from .csvio import fmt, metadata_lines, read_population, read_urss, table_csv, urss_csv
from .errors import RssTiltError
from .montecarlo import (
    RESULT_COLUMNS,
    StudyConfig,
    paper_grid,
    qq_pvalues,
    results_csv,
    run_study,
)
from .resampling import bootstrap
from .sampling import (
    MisrankMatrix,
    RngSeed,
    draw_finite_population_rss,
    draw_urss,
    draw_urss_imperfect,
    draw_urss_matrix,
)
from .stattests import (
    baklizi_test,
    et_bootstrap_test,
    liu_el_test,
    parametric_bootstrap_test,
    pt_test,
    wt_test,
)
from .tilting import ear_weights, eat_weights, row_et_weights

SEED_ENV = "RSS_TILT_SEED"

DEFAULT_PARAMS = {"normal": "0,1", "exponential": "1", "logistic": "1,1"}


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


DEFAULTS: dict[str, dict[str, object]] = {
    "sample": {
        "dist": "normal", "params": None, "design": "D1", "seed": None, "stream": 0,
        "sigma_eps": 0.0, "misrank": None, "population": None, "output": None,
    },
    "weights": {"input": None, "method": "eat", "target": None, "rank": None, "output": None},
    "bootstrap": {
        "input": None, "method": "eat", "B": 500, "seed": None, "stream": 0,
        "mu0": None, "family": "normal", "output": None,
    },
    "test": {
        "input": None, "mu0": None, "method": "pt", "B": 500, "seed": None, "stream": 0,
        "family": "normal", "alternative": "greater", "output": None,
    },
    "simulate": {
        "dist": "normal", "params": None, "design": "D1", "mu0": None, "delta": 0.0,
        "sigma_eps": 0.0, "methods": "PT,WT,EAT,EAR,PB", "B": 500, "replications": 2000,
        "alpha": 0.05, "seed": None, "stream": 0, "alternative": "less", "mode": None,
        "threads": None, "paper_tables": False, "qq": None, "output": None,
    },
}

REQUIRED = {"weights": ("input",), "bootstrap": ("input",), "test": ("input", "mu0")}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsstilt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file of settings (flags take precedence)")
        p.add_argument("--output", "-o", help="output file (default: stdout)")

    def seeded(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, help=f"RNG seed (default: ${SEED_ENV} or 0)")
        p.add_argument("--stream", type=int, help="RNG stream id (default 0)")

    def population(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dist", choices=sorted(DEFAULT_PARAMS), help="parent family")
        p.add_argument("--params", help="comma-separated parameters, e.g. 0,1")
        p.add_argument("--design", help="counts like 8,3,3,2,4 or a name D1..D6")
        p.add_argument("--sigma-eps", dest="sigma_eps", type=float,
                       help="judgment-ranking error sd (0 = perfect)")

    p = sub.add_parser("sample", help="draw a ranked set sample")
    common(p)
    seeded(p)
    population(p)
    p.add_argument("--misrank", help="CSV file holding a k x k doubly stochastic matrix")
    p.add_argument("--population", help="finite population CSV with header y,concomitant")

    p = sub.add_parser("weights", help="exponential tilting weights")
    common(p)
    p.add_argument("--input", "-i", help="rank,value CSV")
    p.add_argument("--method", choices=["eat", "ear", "row"])
    p.add_argument("--target", type=float, help="constrained mean (default: sample mean)")
    p.add_argument("--rank", type=int, help="1-based rank for --method row")

    p = sub.add_parser("bootstrap", help="draw bootstrap resamples")
    common(p)
    seeded(p)
    p.add_argument("--input", "-i", help="rank,value CSV")
    p.add_argument("--method", choices=["eat", "ear", "pb"])
    p.add_argument("--B", type=int, help="number of resamples")
    p.add_argument("--mu0", type=float, help="tilting target (default: sample mean)")
    p.add_argument("--family", choices=sorted(DEFAULT_PARAMS), help="parametric family (pb)")

    p = sub.add_parser("test", help="test H0: mu = mu0")
    common(p)
    seeded(p)
    p.add_argument("--input", "-i", help="rank,value CSV")
    p.add_argument("--mu0", type=float, help="null mean")
    p.add_argument("--method", choices=["pt", "wt", "eat", "ear", "pb", "baklizi", "liu"])
    p.add_argument("--B", type=int, help="bootstrap resamples")
    p.add_argument("--family", choices=sorted(DEFAULT_PARAMS), help="parametric family (pb)")
    p.add_argument("--alternative", choices=["greater", "less", "two-sided"])

    p = sub.add_parser("simulate", help="Monte Carlo size/power study")
    common(p)
    seeded(p)
    population(p)
    p.add_argument("--mu0", type=float, help="null mean (default: parent mean)")
    p.add_argument("--delta", type=float, help="location shift of the population")
    p.add_argument("--methods", help="comma list of PT,WT,EAT,EAR,PB,Baklizi,Liu,IEAT,IEAR")
    p.add_argument("--B", type=int, help="bootstrap resamples")
    p.add_argument("--replications", "-R", type=int, help="Monte Carlo replications")
    p.add_argument("--alpha", type=float, help="nominal level")
    p.add_argument("--alternative", choices=["greater", "less"], help="tail for size studies")
    p.add_argument("--mode", choices=["size", "power"], help="default: size iff delta = 0")
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    p.add_argument("--paper-tables", dest="paper_tables", action="store_true", default=None,
                   help="run the full grid of size, power and imperfect-ranking tables")
    p.add_argument("--qq", metavar="METHOD", help="emit sorted null p-values of METHOD instead")
    return parser


def resolve(parser: argparse.ArgumentParser, args: argparse.Namespace) -> dict[str, object]:
    cmd = args.command
    settings = dict(DEFAULTS[cmd])
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"--config: cannot read {args.config}: {exc}")
        if isinstance(loaded.get(cmd), dict):
            loaded = loaded[cmd]
        unknown = sorted(set(loaded) - set(settings))
        if unknown:
            parser.error(f"--config: unknown settings for {cmd}: {', '.join(unknown)}")
        settings.update(loaded)
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if "seed" in settings and settings["seed"] is None:
        settings["seed"] = _default_seed()
    for key in REQUIRED.get(cmd, ()):
        if settings.get(key) is None:
            parser.error(f"the following arguments are required: --{key}")
    return settings


def _dist(settings) -> DistributionSpec:
    family = str(settings["dist"])
    params = settings["params"] or DEFAULT_PARAMS[family]
    try:
        values = tuple(float(x) for x in str(params).split(","))
        return DistributionSpec(family, values)
    except ValueError as exc:
        raise UsageError(f"--params: {exc}") from None


def _design(settings) -> Design:
    try:
        return Design.parse(str(settings["design"]))
    except RssTiltError as exc:
        raise UsageError(f"--design: {exc}") from None


def _seed(settings) -> RngSeed:
    return RngSeed(int(settings["seed"]), int(settings["stream"]))


def _header(cmd: str, settings) -> dict[str, object]:
    meta: dict[str, object] = {"command": cmd}
    meta.update({k: ("" if v is None else v) for k, v in sorted(settings.items())})
    return meta


def cmd_sample(settings) -> str:
    design, seed = _design(settings), _seed(settings)
    if settings["population"]:
        sample = draw_finite_population_rss(read_population(settings["population"]), design, seed)
    elif settings["misrank"]:
        matrix = np.loadtxt(settings["misrank"], delimiter=",", comments="#", ndmin=2)
        sample = draw_urss_matrix(_dist(settings), design, MisrankMatrix(matrix), seed)
    elif float(settings["sigma_eps"]) > 0:
        sample = draw_urss_imperfect(_dist(settings), design, float(settings["sigma_eps"]), seed)
    else:
        sample = draw_urss(_dist(settings), design, seed)
    return urss_csv(sample, _header("sample", settings))


def cmd_weights(settings) -> str:
    sample = read_urss(settings["input"])
    method, target = settings["method"], settings["target"]
    target = None if target is None else float(target)
    if method == "eat":
        w = eat_weights(sample, target)
        rows = [
            (r + 1, j + 1, v, w.weights[sample.design.offsets[r] + j])
            for r, row in enumerate(sample.rows)
            for j, v in enumerate(row)
        ]
    elif method == "ear":
        w = ear_weights(sample, target)
        rows = [(r + 1, "", m, p) for r, (m, p) in enumerate(zip(w.values, w.weights))]
    else:
        if settings["rank"] is None:
            raise UsageError("--rank is required for --method row")
        r = int(settings["rank"]) - 1
        if not 0 <= r < sample.k:
            raise UsageError(f"--rank must be in 1..{sample.k}")
        w = row_et_weights(sample, r, target)
        rows = [(r + 1, j + 1, v, p) for j, (v, p) in enumerate(zip(w.values, w.weights))]
    body = table_csv(("rank", "index", "value", "weight"), rows, _header("weights", settings))
    return body + metadata_lines({"lambda": float(w.lam), "tilted_mean": w.tilted_mean})


def cmd_bootstrap(settings) -> str:
    sample = read_urss(settings["input"])
    mu0 = settings["mu0"]
    batch = bootstrap(
        sample, str(settings["method"]), int(settings["B"]), _seed(settings),
        target=None if mu0 is None else float(mu0), family=str(settings["family"]),
    )
    ranks = sample.design.ranks + 1
    rows = (
        (int(rank), value, b)
        for b in range(batch.B)
        for rank, value in zip(ranks, batch.values[b])
    )
    return table_csv(("rank", "value", "resample_id"), rows, _header("bootstrap", settings))


def cmd_test(settings) -> str:
    sample = read_urss(settings["input"])
    mu0 = float(settings["mu0"])
    method, alt = str(settings["method"]), str(settings["alternative"])
    B, seed = int(settings["B"]), _seed(settings)
    if method in ("eat", "ear", "pb") and alt == "two-sided":
        raise UsageError("--alternative two-sided is only available for pt and wt")
    if method == "pt":
        out = pt_test(sample, mu0, alt)
    elif method == "wt":
        out = wt_test(sample, mu0, alt)
    elif method in ("eat", "ear"):
        out = et_bootstrap_test(sample, mu0, method, B, seed, alt)
    elif method == "pb":
        out = parametric_bootstrap_test(sample, mu0, str(settings["family"]), B, seed, alt)
    elif method == "baklizi":
        out = baklizi_test(sample, mu0)
    else:
        out = liu_el_test(sample, mu0)
    row = (
        out.method, out.statistic, out.df, out.p_value,
        out.B if out.B is not None else "",
        seed.seed if out.B is not None else "",
    )
    return table_csv(("method", "statistic", "df", "p_value", "B", "seed"), [row], _header("test", settings))


def cmd_simulate(settings) -> str:
    seed = _seed(settings)
    threads = settings["threads"]
    threads = None if threads is None else int(threads)
    header = metadata_lines(_header("simulate", settings))
    if settings["paper_tables"]:
        results = []
        for _, cfg in paper_grid(seed, int(settings["B"]), int(settings["replications"])):
            results.append(run_study(cfg, None, threads))
        return header + results_csv(results)
    dist = _dist(settings)
    mu0 = dist.mean if settings["mu0"] is None else float(settings["mu0"])
    try:
        cfg = StudyConfig(
            design=_design(settings), dist=dist, mu0=mu0, delta=float(settings["delta"]),
            sigma_eps=float(settings["sigma_eps"]),
            methods=tuple(m for m in str(settings["methods"]).split(",") if m.strip()),
            B=int(settings["B"]), replications=int(settings["replications"]),
            alpha=float(settings["alpha"]), seed=seed, alternative=str(settings["alternative"]),
        )
    except ValueError as exc:
        if isinstance(exc, RssTiltError):
            raise
        raise UsageError(str(exc)) from None
    if settings["qq"]:
        positions, p = qq_pvalues(cfg, str(settings["qq"]), threads)
        return header + table_csv(("position", "p_value"), zip(positions, p))
    result = run_study(cfg, settings["mode"], threads)
    return header + results_csv([result])


COMMANDS: dict[str, Callable[[dict], str]] = {
    "sample": cmd_sample,
    "weights": cmd_weights,
    "bootstrap": cmd_bootstrap,
    "test": cmd_test,
    "simulate": cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        settings = resolve(parser, args)
        text = COMMANDS[args.command](settings)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rsstilt: error: {exc}", file=sys.stderr)
        return 2
    except (RssTiltError, OSError, ValueError) as exc:
        print(f"rsstilt: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if settings["output"]:
        Path(str(settings["output"])).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
