"""Command-line entry point: ``pinnforge {train,search,preexp,analyze}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure
(divergence, or every trial of a search step diverging).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analysis
from .autodiff import MlpArchitecture, init_network
from .exceptions import AllDiverged, ConfigError, InsufficientData
from .io import provenance, read_csv, read_json, write_csv, write_json
from .sampling import get_preset, sample_points, test_grid
from .search import LoggedTrial, SearchSpace, auto_pinn, random_search
from .trainer import TrainConfig, TrialResult, train
from .config import ExperimentConfig, load_config, parse_list, parse_structures

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

TRIAL_FIELDS = ["step", "width", "depth", "activation", "changing_point", "seed", "best_loss",
                "error_at_best_loss", "best_error", "diverged", "wall_time"]

log = logging.getLogger("pinnforge")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="experiment file (INI sections: experiment, train, search, preexp)")
    p.add_argument("--problem")
    p.add_argument("--sampling")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="output directory")
    p.add_argument("--parallelism", type=int, help="concurrent trials (env PINNFORGE_THREADS)")
    p.add_argument("--n-test", dest="n_test", type=int, help="test grid points per axis")
    p.add_argument("--epochs", dest="train.epochs", metavar="EPOCHS", type=int)
    p.add_argument("--lr", dest="train.learning_rate", metavar="LEARNING_RATE", type=float)
    p.add_argument("--log-every", dest="train.log_every", metavar="LOG_EVERY", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pinnforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one architecture")
    _common(p)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--act", required=True, choices=["tanh", "sigmoid", "relu", "swish"])
    p.add_argument("--cp", type=float, required=True, help="changing point: fraction of epochs run with Adam")
    p.add_argument("--out", help="result file (default: <output>/train_<...>.json)")

    p = sub.add_parser("search", help="Auto-PINN or random architecture search")
    _common(p)
    p.add_argument("--method", dest="search.method", metavar="METHOD", choices=["autopinn", "random"])
    p.add_argument("--budget", dest="search.budget", metavar="BUDGET", type=int, help="random-search trial budget")
    p.add_argument("--k", dest="search.k_candidates", metavar="K_CANDIDATES", type=int, help="number of candidates")
    p.add_argument("--verify-repeats", dest="search.verify_repeats", metavar="VERIFY_REPEATS", type=int)

    p = sub.add_parser("preexp", help="pre-experiment studies: heatmap, sweep, correlation")
    _common(p)
    p.add_argument("--study", dest="preexp.study", metavar="STUDY")
    p.add_argument("--structures", dest="preexp.structures", metavar="STRUCTURES", help="e.g. '32x4,64x5'")
    p.add_argument("--cps", dest="preexp.changing_points", metavar="CHANGING_POINTS", help="e.g. '0.1,0.3,0.5'")
    p.add_argument("--activations", dest="preexp.activations", metavar="ACTIVATIONS")
    p.add_argument("--seeds", dest="preexp.seeds", metavar="SEEDS", type=int)
    p.add_argument("--widths", dest="preexp.widths", metavar="WIDTHS")
    p.add_argument("--depths", dest="preexp.depths", metavar="DEPTHS")
    p.add_argument("--act", dest="preexp.activation", metavar="ACTIVATION")
    p.add_argument("--cp", dest="preexp.changing_point", metavar="CHANGING_POINT", type=float)
    p.add_argument("--trials", dest="preexp.trials", metavar="TRIALS", help="trial CSV for the correlation study")

    p = sub.add_parser("analyze", help="best/worst median error across search reports")
    p.add_argument("reports", nargs="+", help="search report JSON files")
    p.add_argument("--output", default="runs")
    p.add_argument("-v", "--verbose", action="store_true")
    for sp in sub.choices.values():
        sp.set_defaults(command_parser=sp)
    return parser


def _resolve(args, parser, need_problem: bool = True) -> ExperimentConfig:
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    except ConfigError as exc:
        parser.error(str(exc))
    keys = ("problem", "sampling", "seed", "output", "parallelism", "n_test")
    flags = {k: v for k, v in vars(args).items() if k in keys or "." in k}
    cfg = cfg.override(**flags)
    if need_problem:
        _require_problem(cfg, parser)
    return cfg


def _require_problem(cfg: ExperimentConfig, parser):
    if not cfg.problem or not cfg.sampling:
        parser.error("--problem and --sampling are required (flag or config file)")


def _preset(cfg: ExperimentConfig, parser):
    try:
        return get_preset(cfg.problem, cfg.sampling, seed=cfg.seed)
    except ValueError as exc:
        parser.error(str(exc))


def _train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(epochs=cfg.train.epochs, learning_rate=cfg.train.learning_rate,
                       log_every=cfg.train.log_every, seed=cfg.seed)


def cmd_train(args, parser) -> int:
    cfg = _resolve(args, parser)
    problem, spec = _preset(cfg, parser)
    try:
        arch = MlpArchitecture(args.width, args.depth, args.act, args.cp)
    except ValueError as exc:
        parser.error(str(exc))
    if arch.width not in problem.widths or not 3 <= arch.depth <= 10:
        log.warning("%s lies outside the %s search space", arch, problem.id.value)
    tcfg = _train_config(cfg)
    n_adam, n_lbfgs = tcfg.split(arch.changing_point)
    log.info("training %s on %s: %d Adam steps + %d L-BFGS iterations", arch, spec.name, n_adam, n_lbfgs)
    result = train(init_network(arch, cfg.seed), sample_points(problem, spec), problem, tcfg,
                   test_grid(problem, cfg.n_test))
    out = Path(args.out) if args.out else Path(cfg.output) / (
        f"train_{problem.id.value}_{spec.name.split('/')[1]}_{arch.width}x{arch.depth}"
        f"_{arch.activation.value}_cp{arch.changing_point:g}_s{cfg.seed}.json")
    record = {"problem": problem.id.value, "sampling": spec.name, **result.to_dict(timing=False)}
    write_json(out, record)
    print(f"best_loss={result.best_loss:.6e} error_at_best_loss={result.error_at_best_loss:.6e} "
          f"best_error={result.best_error:.6e}")
    print(f"wrote {out}")
    if result.diverged:
        print("training diverged", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def write_trial_log(path, report, comment: str):
    return write_csv(path, TRIAL_FIELDS, [t.row(timing=True) for t in report.trial_log], comment)


def _top_table(report) -> str:
    lines = [f"{'rank':>4} {'width':>5} {'depth':>5} {'activation':>10} {'cp':>4} {'median_error':>13}"]
    for i, v in enumerate(report.verification, 1):
        a = v["arch"]
        lines.append(f"{i:>4} {a.width:>5} {a.depth:>5} {a.activation.value:>10} "
                     f"{a.changing_point:>4g} {v['median_best_error']:>13.4e}")
    return "\n".join(lines)


def cmd_search(args, parser) -> int:
    cfg = _resolve(args, parser)
    problem, spec = _preset(cfg, parser)
    tcfg = _train_config(cfg)
    scfg = cfg.search_config()
    space = SearchSpace.for_problem(problem)
    try:
        if cfg.search.method == "autopinn":
            report = auto_pinn(problem, spec, space, scfg, train_cfg=tcfg, n_test=cfg.n_test)
        elif cfg.search.method == "random":
            report = random_search(problem, spec, space, budget=cfg.search.budget, seed=cfg.seed, cfg=scfg,
                                   train_cfg=tcfg, n_test=cfg.n_test)
        else:
            parser.error(f"unknown search method {cfg.search.method!r}")
    except AllDiverged as exc:
        print(f"search failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    stem = Path(cfg.output) / f"search_{cfg.search.method}_{problem.id.value}_{spec.name.split('/')[1]}_s{cfg.seed}"
    write_json(f"{stem}.json", report.to_dict())
    write_trial_log(f"{stem}_trials.csv", report, provenance(problem.id.value, spec.name, cfg.seed))
    print(f"total_trials={report.total_trials} (search) + {report.step_counts.get('step4', 0)} (verification)")
    print(_top_table(report))
    print(f"wrote {stem}.json")
    return EXIT_OK


def _results_from_csv(path) -> list[TrialResult]:
    _, rows = read_csv(path)
    out = []
    for row in rows:
        out.append(TrialResult(
            arch=MlpArchitecture(row["width"], row["depth"], row["activation"], row["changing_point"]),
            best_loss=float(row["best_loss"]), error_at_best_loss=float(row["error_at_best_loss"]),
            best_error=float(row["best_error"]), final_loss=float(row["best_loss"]), loss_curve=[],
            seed=int(row["seed"]), diverged=bool(row["diverged"]),
        ))
    return out


def cmd_preexp(args, parser) -> int:
    cfg = _resolve(args, parser, need_problem=False)
    pre = cfg.preexp
    out = Path(cfg.output)
    comment = provenance(cfg.problem, cfg.sampling, cfg.seed)
    if pre.study == "correlation":
        if not pre.trials:
            parser.error("the correlation study needs --trials <trial CSV>")
        try:
            trials = _results_from_csv(pre.trials)
            fit = analysis.loss_error_regression(trials)
            control = analysis.permutation_control(trials, seed=cfg.seed)
        except (OSError, KeyError) as exc:
            parser.error(f"cannot read trials: {exc}")
        except InsufficientData as exc:
            print(f"correlation failed: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        summary = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared, "n": fit.n,
                   "permutation_r_squared": control.r_squared, "trials": str(pre.trials)}
        write_json(out / "correlation.json", summary)
        print(json.dumps(summary, indent=2))
        return EXIT_OK
    if pre.study not in ("heatmap", "sweep"):
        parser.error(f"unknown study {pre.study!r}; expected heatmap, sweep or correlation")
    _require_problem(cfg, parser)

    problem, spec = _preset(cfg, parser)
    tcfg = _train_config(cfg)
    common = dict(seeds=pre.seeds, train_cfg=tcfg, master_seed=cfg.seed, parallelism=cfg.parallelism,
                  n_test=cfg.n_test)
    try:
        if pre.study == "heatmap":
            hm = analysis.heatmap_grid(problem, spec, structures=parse_structures(pre.structures),
                                       changing_points=parse_list(pre.changing_points, float),
                                       activations=parse_list(pre.activations), **common)
            paths = hm.write(out, problem.id.value, spec.name, cfg.seed)
            rows = [LoggedTrial("heatmap", r).row(timing=True) for r in hm.trials]
            paths += (write_csv(out / "heatmap_trials.csv", TRIAL_FIELDS, rows, comment),)
        else:
            rows = analysis.structure_error_sweep(problem, spec, pre.activation, pre.changing_point,
                                                  parse_list(pre.widths, int), parse_list(pre.depths, int), **common)
            paths = (write_csv(out / "sweep.csv", analysis.SWEEP_FIELDS, rows, comment),)
    except (ValueError, ConfigError) as exc:
        parser.error(str(exc))
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_analyze(args, parser) -> int:
    try:
        reports = [read_json(p) for p in args.reports]
        summary = analysis.comparison_summary(reports)
    except (OSError, ValueError, KeyError) as exc:
        parser.error(f"cannot summarize reports: {exc}")
    fields = ["method", "problem", "sampling", "best_median_error", "worst_median_error", "n_candidates"]
    seeds = sorted({str(r.get("master_seed")) for r in reports})
    comment = provenance("+".join(sorted({str(r["problem"]) for r in summary})),
                         "+".join(sorted({str(r["sampling"]) for r in summary})), "+".join(seeds))
    path = write_csv(Path(args.output) / "comparison.csv", fields, summary, comment)
    for row in summary:
        print(f"{row['method']:>9} {row['problem']:>12} {row['sampling']:>22} "
              f"best={row['best_median_error']:.4e} worst={row['worst_median_error']:.4e}")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "search": cmd_search, "preexp": cmd_preexp, "analyze": cmd_analyze}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args, args.command_parser)


if __name__ == "__main__":
    sys.exit(main())
