"""Command-line entry point ``dgne``.

Subcommands: ``generate``, ``certify``, ``solve``, ``rates``, ``plot`` and
``compare-forms``. All of them accept ``--config``, ``--seed``, ``--out``,
``--full`` and ``--stepsizes``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from dgne.errors import DGNEError
from dgne.experiment import (
    ExperimentConfig,
    build_instance,
    certify,
    compare_forms_config,
    fit_rate,
    instance_summary,
    run_experiment,
)
from dgne.game import save_game
from dgne.plotting import emit_svg_plot
from dgne.solver import read_trajectory_csv


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--full", action="store_true",
                   help="full-size market (N=50, m=n_i=5, 5000 rounds)")
    p.add_argument("--stepsizes", action="append",
                   help="'certified' or 'alpha,beta,gamma'; repeat to overlay in plot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgne", description="Decentralized GNE seeking on Nash-Cournot market instances.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the game, topology and constants")
    _common(p)

    p = sub.add_parser("certify", help="print the stepsize certificate as JSON")
    _common(p)

    p = sub.add_parser("solve", help="run oracle + iteration, write CSV and report")
    _common(p)

    p = sub.add_parser("rates", help="fit geometric rates to trajectory CSVs")
    _common(p)
    p.add_argument("--csv", type=Path, nargs="+", help="existing CSVs (default: run solve)")
    p.add_argument("--tail", type=float, default=None, help="tail fraction for the fit")

    p = sub.add_parser("plot", help="log-scale SVG of trajectory columns")
    _common(p)
    p.add_argument("--csv", type=Path, nargs="+", help="existing CSVs (default: run solve)")
    p.add_argument("--columns", nargs="+", default=["dist_to_star"])
    p.add_argument("--labels", nargs="+")
    p.add_argument("--name", default="convergence.svg")

    p = sub.add_parser("compare-forms", help="max deviation between the two solver forms")
    _common(p)
    p.add_argument("--iters", type=int, default=200)
    return parser


def load_config(args, stepsizes: str | None = None) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config).to_dict() if args.config else {}
    if args.full:
        base.update(N=50, m=5, max_iters=5000)
    if args.seed is not None:
        base["seed"] = args.seed
    if args.out is not None:
        base["out_dir"] = str(args.out)
    if stepsizes is None and args.stepsizes:
        stepsizes = args.stepsizes[0]
    if stepsizes is not None:
        base["stepsizes"] = stepsizes
    return ExperimentConfig.from_dict(base)


def _print(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _settings(args) -> list[str | None]:
    return args.stepsizes if args.stepsizes else [None]


def _slug(s: str | None) -> str:
    return "run" if s is None else "run_" + s.replace(",", "_")


def cmd_generate(args) -> int:
    cfg = load_config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inst = build_instance(cfg)
    save_game(inst.game, out / "game.json")
    inst.topology.save(out / "topology.json")
    summary = instance_summary(inst)
    summary["config_hash"] = cfg.config_hash()
    (out / "instance.json").write_text(json.dumps(summary, indent=2) + "\n")
    cfg.save(out / "config.json")
    _print(summary)
    return 0


def cmd_certify(args) -> int:
    cfg = load_config(args)
    report = certify(cfg)
    report["config_hash"] = cfg.config_hash()
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "certify.json").write_text(json.dumps(report, indent=2) + "\n")
    _print(report)
    return 0


def cmd_solve(args) -> int:
    results = []
    for setting in _settings(args):
        cfg = load_config(args, setting)
        name = "trajectory" if len(_settings(args)) == 1 else _slug(setting)
        res = run_experiment(cfg, csv_name=f"{name}.csv", report_name=f"{name}.json")
        results.append({"csv": str(res.csv_path), "report": str(res.report_path),
                        "iterations": res.report["iterations"],
                        "final": res.report["final"], "certified": res.report["certified"],
                        "rate_fit": res.report["rate_fit"]})
    _print(results[0] if len(results) == 1 else results)
    return 0


def _csvs_or_solve(args) -> list[Path]:
    if args.csv:
        return list(args.csv)
    paths = []
    settings = _settings(args)
    for setting in settings:
        cfg = load_config(args, setting)
        name = "trajectory" if len(settings) == 1 else _slug(setting)
        paths.append(run_experiment(cfg, csv_name=f"{name}.csv",
                                    report_name=f"{name}.json").csv_path)
    return paths


def cmd_rates(args) -> int:
    tail = args.tail
    if tail is None:
        tail = load_config(args).tail_fraction if args.config else 0.5
    out = []
    for path in _csvs_or_solve(args):
        fit = fit_rate(read_trajectory_csv(path)["dist_to_star"], tail)
        out.append({"csv": str(path), **fit.to_dict()})
    _print(out)
    return 0


def cmd_plot(args) -> int:
    paths = _csvs_or_solve(args)
    labels = args.labels
    if labels is None and not args.csv and args.stepsizes and len(args.columns) == 1:
        labels = list(args.stepsizes)
    out_dir = args.out if args.out is not None else Path(load_config(args).out_dir)
    svg = emit_svg_plot(paths, args.columns, Path(out_dir) / args.name, labels=labels)
    _print({"svg": str(svg), "series": len(paths) * len(args.columns)})
    return 0


def cmd_compare_forms(args) -> int:
    _print(compare_forms_config(load_config(args), iters=args.iters))
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "certify": cmd_certify,
    "solve": cmd_solve,
    "rates": cmd_rates,
    "plot": cmd_plot,
    "compare-forms": cmd_compare_forms,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DGNEError, ValueError, OSError) as exc:
        print(f"dgne {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
