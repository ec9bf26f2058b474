"""Command-line interface: ``paramskill <subcommand> ...``.

Exit status is 0 on success, 1 with a ``paramskill <stage>: <message>`` line
on stderr when a stage fails, and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import manifold, pipeline
from .armsim import Task
from .dmp import default_theta
from .pipeline import ExperimentConfig, ExperimentError, ExperimentReport
from .power import ExplorationConfig, learn_policy
from .skill import TrainingSet, load_skill, predict, save_skill, train_skill


def _config(args) -> ExperimentConfig:
    cfg = pipeline.load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    return cfg


def _write_rows(out, header, rows) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    finally:
        if out:
            fh.close()


def _read_angles(args) -> list[float]:
    angles = list(args.angle or [])
    if getattr(args, "tasks", None):
        with open(args.tasks, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        col = rows[0].index("angle")
        angles += [float(r[col]) for r in rows[1:]]
    if not angles:
        raise ValueError("give --angle or --tasks")
    return angles


def cmd_sample_tasks(args) -> None:
    cfg = _config(args)
    lo = cfg.angle_lo if args.lo is None else args.lo
    hi = cfg.angle_hi if args.hi is None else args.hi
    tasks = pipeline.sample_tasks(pipeline.TaskDistribution(lo, hi, cfg.master_seed), args.n, cfg.arm)
    _write_rows(args.out, ["index", "angle", "x", "y"],
                [(i, t.angle, float(t.surface_point[0]), float(t.surface_point[1]))
                 for i, t in enumerate(tasks)])


def cmd_learn_policy(args) -> None:
    cfg = _config(args)
    expl = cfg.exploration
    if args.max_updates is not None:
        expl = ExplorationConfig.from_dict({**expl.to_dict(), "max_updates": args.max_updates})
    init = default_theta()
    if args.init:
        _, thetas = pipeline.load_policies(args.init)
        init = thetas[0]
    task = Task.from_angle(args.angle, cfg.arm)
    res = learn_policy(task, init, expl, cfg.sim(), seed=cfg.master_seed)
    if args.out:
        pipeline.save_policies(args.out, [task.angle], res.final_theta[None, :])
    print(json.dumps({"angle": task.angle, "converged": res.converged,
                      "updates_used": res.updates_used, "rollouts_used": res.rollouts_used,
                      "best_distance": res.best_distance}))
    if not res.converged:
        raise ExperimentError("learn_policy", f"did not reach {expl.success_threshold} m "
                                              f"within {expl.max_updates} updates")


def cmd_analyze_manifold(args) -> None:
    angles, thetas = pipeline.load_policies(args.policies)
    charts = manifold.detect_charts(thetas, k=min(args.k, len(angles) - 1),
                                    min_chart_size=args.min_chart_size,
                                    adaptive=not args.no_adaptive)
    dims = manifold.chart_dimensions(thetas, charts, max_dim=args.max_dim)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifold.save_assignment(out / "charts.csv", charts)
    summary = {"num_charts": charts.num_charts, "k_used": charts.k_used,
               "chart_sizes": [int(s) for s in charts.chart_sizes],
               "fallback": charts.fallback,
               "angle_ranges": [[float(angles[charts.members(c)].min()),
                                 float(angles[charts.members(c)].max())]
                                for c in range(1, charts.num_charts + 1)],
               "dimensions": dims}
    (out / "manifold.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(json.dumps({k: summary[k] for k in ("num_charts", "k_used", "chart_sizes",
                                              "angle_ranges")}))


def cmd_train_skill(args) -> None:
    cfg = _config(args)
    angles, thetas = pipeline.load_policies(args.policies)
    if args.charts:
        labels = manifold.load_assignment(args.charts)
        skill = train_skill(TrainingSet(angles, thetas, labels), cfg.space(), cfg.gamma, cfg.ridge,
                            metadata={"config_hash": cfg.config_hash()})
    else:
        skill, _ = pipeline.fit_skill(angles, thetas, cfg)
    save_skill(skill, args.out)
    print(json.dumps({"num_charts": skill.num_charts, "boundaries": skill.boundary_angles(),
                      "classifier_accuracy": skill.classifier.training_accuracy}))


def cmd_predict(args) -> None:
    skill = load_skill(args.skill)
    angles = _read_angles(args)
    thetas = np.array([predict(skill, a) for a in angles])
    if args.out:
        pipeline.save_policies(args.out, angles, thetas)
    else:
        _write_rows(None, pipeline.POLICY_COLUMNS, [[a, *th] for a, th in zip(angles, thetas)])


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    skill = load_skill(args.skill)
    sim = cfg.sim()
    rows = []
    for j, a in enumerate(_read_angles(args)):
        task = Task.from_angle(a, cfg.arm)
        theta = predict(skill, a)
        row = [a, int(skill.chart_of(a)[0]), sim.throw(theta, task).distance_to_target]
        if args.fine_tune:
            ft = learn_policy(task, theta, cfg.exploration, sim,
                              seed=pipeline.stream_seed(cfg.master_seed, "fine_tune", 0, j))
            row += [ft.updates_used, int(ft.converged)]
        rows.append(row)
    header = ["angle", "chart", "zero_shot_distance"]
    if args.fine_tune:
        header += ["fine_tune_updates", "fine_tune_converged"]
    _write_rows(args.out, header, rows)


def cmd_run_experiment(args) -> None:
    cfg = _config(args)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.dump_config:
        pipeline.save_config(cfg, args.dump_config)
        return
    report = pipeline.run_experiment(cfg, overwrite=args.overwrite)
    print(json.dumps({"output_dir": cfg.output_dir, "config_hash": report.config_hash,
                      "num_charts": report.charts["num_charts"],
                      "boundaries": report.charts["boundaries"],
                      "sweep": [{k: s[k] for k in ("size", "mean_relative_error",
                                                   "mean_zero_shot_distance",
                                                   "mean_fine_tune_updates")}
                                for s in report.sweep]}))


def cmd_emit_figures(args) -> None:
    report = ExperimentReport.load(args.report)
    for p in pipeline.emit_figures(report, args.out_dir, images=not args.no_images):
        print(p)


COMMANDS = {
    "sample-tasks": (cmd_sample_tasks, "sample_tasks"),
    "learn-policy": (cmd_learn_policy, "learn_policy"),
    "analyze-manifold": (cmd_analyze_manifold, "analyze_manifold"),
    "train-skill": (cmd_train_skill, "train_skill"),
    "predict": (cmd_predict, "predict"),
    "evaluate": (cmd_evaluate, "evaluate"),
    "run-experiment": (cmd_run_experiment, "run_experiment"),
    "emit-figures": (cmd_emit_figures, "emit_figures"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="paramskill", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="experiment config (JSON)")
        return sp

    sp = add("sample-tasks", "draw target angles uniformly")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--lo", type=float)
    sp.add_argument("--hi", type=float)
    sp.add_argument("--out")

    sp = add("learn-policy", "learn one throw with policy search")
    sp.add_argument("--angle", type=float, required=True)
    sp.add_argument("--init", help="policy table whose first row is the initial policy")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--max-updates", type=int)
    sp.add_argument("--out")

    sp = add("analyze-manifold", "charts and residual variance of a policy table")
    sp.add_argument("--policies", required=True)
    sp.add_argument("--k", type=int, default=7)
    sp.add_argument("--min-chart-size", type=int, default=3)
    sp.add_argument("--no-adaptive", action="store_true")
    sp.add_argument("--max-dim", type=int, default=6)
    sp.add_argument("--out-dir", required=True)

    sp = add("train-skill", "fit classifier and regressors to a policy table")
    sp.add_argument("--policies", required=True)
    sp.add_argument("--charts", help="chart assignment CSV (detected if omitted)")
    sp.add_argument("--out", required=True)

    sp = add("predict", "predict policies for target angles")
    sp.add_argument("--skill", required=True)
    sp.add_argument("--angle", type=float, nargs="*")
    sp.add_argument("--tasks", help="CSV with an angle column")
    sp.add_argument("--out")

    sp = add("evaluate", "zero-shot (and optionally fine-tuned) performance of a skill")
    sp.add_argument("--skill", required=True)
    sp.add_argument("--angle", type=float, nargs="*")
    sp.add_argument("--tasks")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--fine-tune", action="store_true")
    sp.add_argument("--out")

    sp = add("run-experiment", "full protocol with the |K| sweep")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--output-dir")
    sp.add_argument("--overwrite", action="store_true",
                    help="replace results of a different config in the output directory")
    sp.add_argument("--dump-config", metavar="PATH",
                    help="write the effective config and exit")

    sp = sub.add_parser("emit-figures", help="CSV and PNG figure data from a report")
    sp.add_argument("--report", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--no-images", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func, stage = COMMANDS[args.command]
    try:
        func(args)
    except ExperimentError as exc:
        print(f"paramskill {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, ArithmeticError, KeyError) as exc:
        print(f"paramskill {stage}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
