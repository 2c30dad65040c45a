"""Command-line front end.

Exit status: 0 on success, 2 on invalid input (including missing input
files), 1 on runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np

from nrayleigh.analytic import QuadratureConfig
from nrayleigh.estimate import Source, ThresholdGrid, aggregate_trials, empirical_stats
from nrayleigh.scenario import (
    PRESET_SNR_DB,
    TRIAL_STREAM,
    ResultTable,
    Scenario,
    apply_overrides,
    emit_csv,
    preset_figure,
    run_scenario,
    scenario_from_dict,
    scenario_to_dict,
    stats_to_rows,
)
from nrayleigh.simulate import derive_seed, gen_hop_paths, multiply_paths, read_path, write_path


def _common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--trials", type=int, help="number of Monte-Carlo trials")
    p.add_argument("--out", help="output file (default: stdout) or directory for 'simulate'")
    if scenario:
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", help="JSON scenario document")
        src.add_argument("--preset", choices=sorted(PRESET_SNR_DB), help="built-in figure preset")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scenario field, e.g. sim.sample_rate=12800")
        p.add_argument("--rel-tol", type=float, default=1e-6, help="quadrature relative tolerance")
        p.add_argument("--workers", type=int, default=1, help="threads for Monte-Carlo trials")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nrayleigh", description="LCR and AFD of cascaded Rayleigh fading channels"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a full scenario and write CSV")
    _common(p)

    p = sub.add_parser("analytic", help="closed forms and quadrature only")
    _common(p)
    p.add_argument("--outputs", default="approx,exact", help="comma-separated analytic sources")

    p = sub.add_parser("preset", help="run a figure preset")
    p.add_argument("name", choices=sorted(PRESET_SNR_DB))
    _common(p, scenario=False)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-config", action="store_true", help="print the preset as JSON and exit")

    p = sub.add_parser("simulate", help="generate cascade sample paths into a directory")
    _common(p)

    p = sub.add_parser("estimate", help="empirical statistics from sample-path files")
    p.add_argument("paths", nargs="+", help=".nray files, pooled as independent trials")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--normalization", type=float, default=1.0, help="threshold reference amplitude")
    p.add_argument("--f-norm", type=float, default=1.0, help="Doppler used to normalize LCR/AFD")
    p.add_argument("--grid-db", type=float, nargs=3, metavar=("START", "STOP", "NUM"),
                   default=(-20.0, 10.0, 31))
    p.add_argument("--label", default="empirical", help="value of the source column")
    return parser


def _load_scenario(args) -> Scenario:
    if getattr(args, "name", None):
        doc = scenario_to_dict(preset_figure(args.name))
    elif getattr(args, "preset", None):
        doc = scenario_to_dict(preset_figure(args.preset))
    elif getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
    else:
        raise ValueError("give --config FILE or --preset NAME")
    doc = apply_overrides(doc, args.overrides)
    if args.seed is not None:
        doc.setdefault("sim", {})["seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    return scenario_from_dict(doc)


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_table(table: ResultTable, out) -> None:
    with _output(out) as fh:
        emit_csv(table, fh)


def cmd_run(args) -> None:
    sc = _load_scenario(args)
    _write_table(run_scenario(sc, QuadratureConfig(rel_tol=args.rel_tol), args.workers), args.out)


def cmd_analytic(args) -> None:
    sc = _load_scenario(args)
    outputs = tuple(Source(o.strip()) for o in args.outputs.split(",") if o.strip())
    if Source.EMPIRICAL in outputs:
        raise ValueError("'analytic' accepts only exact and approx outputs")
    sc = replace(sc, outputs=outputs)
    _write_table(run_scenario(sc, QuadratureConfig(rel_tol=args.rel_tol)), args.out)


def cmd_preset(args) -> None:
    if args.dump_config:
        doc = apply_overrides(scenario_to_dict(preset_figure(args.name)), args.overrides)
        print(json.dumps(doc, indent=2))
        return
    cmd_run(args)


def cmd_simulate(args) -> None:
    sc = _load_scenario(args)
    if args.out is None:
        raise ValueError("'simulate' needs --out DIRECTORY")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    n_hops = max(sc.cuts)
    for t in range(sc.trials):
        seed = derive_seed(sc.sim.seed, TRIAL_STREAM, t)
        paths = gen_hop_paths(sc.hops[:n_hops], replace(sc.sim, seed=seed))
        for cut in sc.cuts:
            write_path(multiply_paths(paths[:cut]), outdir / f"trial{t:03d}_N{cut}.nray")


def cmd_estimate(args) -> None:
    start, stop, num = args.grid_db
    grid = ThresholdGrid.from_db(np.linspace(start, stop, int(num)), args.normalization)
    stats = aggregate_trials([empirical_stats(read_path(p), grid) for p in args.paths])
    _write_table(ResultTable(stats_to_rows(stats, args.label, args.f_norm)), args.out)


COMMANDS = {
    "run": cmd_run,
    "analytic": cmd_analytic,
    "preset": cmd_preset,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
