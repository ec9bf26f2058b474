"""Experiment orchestration: sample tasks, learn example policies, find charts,
train the skill and evaluate it on held-out tasks.

Everything is a deterministic function of :class:`ExperimentConfig`. Seeds fan
out from ``master_seed`` through ``SeedSequence([master_seed, stream, *ids])``
with the stream numbers in :data:`SEED_STREAMS`.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .armsim import ArmConfig, PidGains, Task
from .dmp import NUM_BASES, POLICY_DIM, DmpConstants, default_theta
from .manifold import ChartAssignment, chart_dimensions, detect_charts, isomap
from .power import ExplorationConfig, LearnResult, SimContext, learn_policy
from .skill import (DEFAULT_GAMMA, DEFAULT_RIDGE, SkillModel, TaskSpace, TrainingSet,
                    parameter_error, predict, train_skill)

log = logging.getLogger(__name__)

SEED_STREAMS = {
    "training_tasks": 0,
    "eval_tasks": 1,
    "training_learn": 2,
    "reference_learn": 3,
    "fine_tune": 4,
}
POLICY_COLUMNS = ["angle", "lambda", "goal"] + [f"w{i}" for i in range(1, NUM_BASES + 1)]


class ExperimentError(RuntimeError):
    """A pipeline stage failed; the message starts with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def stream_seed(master_seed: int, stream: str, *ids: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), SEED_STREAMS[stream], *map(int, ids)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# ---- task distribution -------------------------------------------------------

@dataclass(frozen=True)
class TaskDistribution:
    angle_lo: float = 0.2
    angle_hi: float = 2.94
    seed: int = 0
    kind: str = "uniform-angle"

    def __post_init__(self):
        if self.angle_hi < self.angle_lo:
            raise ValueError("angle range must satisfy lo <= hi")
        if not (0.0 <= self.angle_lo and self.angle_hi <= np.pi):
            raise ValueError("task angles must lie in [0, pi]")
        if self.kind != "uniform-angle":
            raise ValueError(f"unknown task distribution {self.kind!r}")


def sample_tasks(dist: TaskDistribution, n: int, cfg: ArmConfig | None = None) -> list[Task]:
    """``n`` i.i.d. uniform angles; a degenerate range returns that angle n times."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(dist.seed)
    angles = rng.uniform(dist.angle_lo, dist.angle_hi, n) if dist.angle_hi > dist.angle_lo \
        else np.full(n, dist.angle_lo)
    return [Task.from_angle(a, cfg) for a in angles]


# ---- configuration -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    num_training_tasks: int = 60
    sweep_sizes: tuple = (3, 6, 9, 10, 12, 15, 20, 24)
    num_eval_tasks: int = 15
    warm_start: bool = True
    cold_retry: bool = True
    retry_after_updates: int = 20
    angle_lo: float = 0.2
    angle_hi: float = 2.94
    arm: ArmConfig = field(default_factory=ArmConfig)
    gains: PidGains = field(default_factory=PidGains)
    dmp: DmpConstants = field(default_factory=DmpConstants)
    exploration: ExplorationConfig = field(default_factory=ExplorationConfig)
    manifold_k: int = 7
    min_chart_size: int = 3
    adaptive_k: bool = True
    embedding_max_dim: int = 6
    gamma: float = DEFAULT_GAMMA
    ridge: float = DEFAULT_RIDGE
    max_fail_fraction: float = 0.5
    master_seed: int = 0
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.sweep_sizes = tuple(int(k) for k in self.sweep_sizes)
        if self.num_training_tasks < 1 or self.num_eval_tasks < 0:
            raise ValueError("num_training_tasks >= 1 and num_eval_tasks >= 0 required")
        if any(k < 1 or k > self.num_training_tasks for k in self.sweep_sizes):
            raise ValueError("every sweep size must lie in [1, num_training_tasks]")
        if not self.angle_hi > self.angle_lo:
            raise ValueError("angle_lo < angle_hi required")
        if self.retry_after_updates < 0:
            raise ValueError("retry_after_updates must be >= 0")

    def to_dict(self) -> dict:
        return {
            "num_training_tasks": self.num_training_tasks,
            "sweep_sizes": list(self.sweep_sizes),
            "num_eval_tasks": self.num_eval_tasks,
            "warm_start": self.warm_start,
            "cold_retry": self.cold_retry,
            "retry_after_updates": self.retry_after_updates,
            "angle_lo": self.angle_lo,
            "angle_hi": self.angle_hi,
            "arm": self.arm.to_dict(),
            "gains": self.gains.to_dict(),
            "dmp": self.dmp.to_dict(),
            "exploration": self.exploration.to_dict(),
            "manifold_k": self.manifold_k,
            "min_chart_size": self.min_chart_size,
            "adaptive_k": self.adaptive_k,
            "embedding_max_dim": self.embedding_max_dim,
            "gamma": self.gamma,
            "ridge": self.ridge,
            "max_fail_fraction": self.max_fail_fraction,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "arm" in d:
            d["arm"] = ArmConfig.from_dict(d["arm"])
        if "gains" in d:
            d["gains"] = PidGains(**d["gains"])
        if "dmp" in d:
            d["dmp"] = DmpConstants.from_dict(d["dmp"])
        if "exploration" in d:
            d["exploration"] = ExplorationConfig.from_dict(d["exploration"])
        return cls(**d)

    def config_hash(self) -> str:
        """Hash of every field that affects results (the output directory does not)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def sim(self) -> SimContext:
        return SimContext(self.arm, self.gains, self.dmp)

    def space(self) -> TaskSpace:
        return TaskSpace(self.angle_lo, self.angle_hi)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---- run log -----------------------------------------------------------------

class RunLog:
    """Append-only JSON Lines log; ``None`` path keeps records in memory only."""

    def __init__(self, path=None):
        self.path = path
        self.records: list[dict] = []
        if path is not None:
            Path(path).write_text("")

    def write(self, **rec) -> None:
        self.records.append(rec)
        if self.path is not None:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _progress_records(result: LearnResult) -> list[dict]:
    return [{k: float(v) if isinstance(v, float) else v for k, v in p.items()}
            for p in result.progress]


# ---- training set ------------------------------------------------------------

@dataclass
class TaskRecord:
    index: int
    angle: float
    theta: np.ndarray
    converged: bool
    updates_used: int
    rollouts_used: int
    best_distance: float
    init_from: int | None
    cold_retry: bool


def _nearest_solved(angle: float, solved: list[TaskRecord], side: int = 0) -> TaskRecord | None:
    """Nearest solved task by angle; ``side`` -1/+1 restricts to smaller/larger angles."""
    best = None
    for rec in solved:
        if side and np.sign(rec.angle - angle) != side:
            continue
        # strict comparison keeps the earlier task on ties
        if best is None or abs(rec.angle - angle) < abs(best.angle - angle):
            best = rec
    return best


def _init_candidates(angle: float, solved: list[TaskRecord], cfg: ExperimentConfig) -> list:
    """Initial policies to try in order: nearest solved task, then the nearest on the
    opposite side of ``angle``, then the default policy (``None``)."""
    out = []
    if cfg.warm_start:
        first = _nearest_solved(angle, solved)
        if first is not None:
            out.append(first)
            if cfg.cold_retry:
                side = -int(np.sign(first.angle - angle)) or 1
                other = _nearest_solved(angle, solved, side)
                if other is not None and not np.array_equal(other.theta, first.theta):
                    out.append(other)
    if not out or cfg.cold_retry:
        out.append(None)
    return out


def build_training_set(tasks: list[Task], cfg: ExperimentConfig,
                       runlog: RunLog | None = None) -> list[TaskRecord]:
    """Learn every task in order, warm-starting from the nearest solved task by angle.

    When the warm start fails to converge within ``cfg.retry_after_updates``
    updates and ``cfg.cold_retry`` is set, the task is retried from the
    nearest solved task on the other side of its angle and finally from the
    default policy, which gets the full update budget. Updates of every attempt are
    charged to the task. Tasks that still fail are kept with
    ``converged=False`` and skipped by the skill.
    """
    if not tasks:
        raise ExperimentError("build_training_set", "no tasks given")
    sim = cfg.sim()
    out: list[TaskRecord] = []
    solved: list[TaskRecord] = []
    for i, task in enumerate(tasks):
        updates = rollouts = 0
        src = None
        cands = _init_candidates(task.angle, solved, cfg)
        for attempt, cand in enumerate(cands):
            init = default_theta() if cand is None else cand.theta
            expl = cfg.exploration
            if attempt < len(cands) - 1:
                # a fallback remains: give up on this start early
                expl = replace(expl, max_updates=min(expl.max_updates, cfg.retry_after_updates))
            res = learn_policy(task, init, expl, sim,
                               seed=stream_seed(cfg.master_seed, "training_learn", i, attempt))
            updates += res.updates_used
            rollouts += res.rollouts_used
            src = cand
            if runlog:
                runlog.write(stage="training", task=i, attempt=attempt, angle=task.angle,
                             init_from=None if cand is None else cand.index,
                             converged=res.converged, updates=res.updates_used,
                             rollouts=res.rollouts_used, best_distance=res.best_distance,
                             progress=_progress_records(res))
            if res.converged:
                break
        rec = TaskRecord(i, task.angle, res.final_theta, res.converged, updates, rollouts,
                         res.best_distance, None if src is None else src.index, attempt > 0)
        out.append(rec)
        if res.converged:
            solved.append(rec)
        else:
            log.info("task %d (angle %.4f) excluded: best distance %.3f m after %d updates",
                     i, task.angle, res.best_distance, updates)
    failed = sum(not r.converged for r in out)
    if failed > cfg.max_fail_fraction * len(out):
        raise ExperimentError("build_training_set",
                              f"{failed} of {len(out)} tasks failed to reach "
                              f"{cfg.exploration.success_threshold} m; check exploration "
                              f"variances and max_updates")
    return out


def training_arrays(records: list[TaskRecord]) -> tuple[np.ndarray, np.ndarray]:
    ok = [r for r in records if r.converged]
    angles = np.array([r.angle for r in ok])
    thetas = np.array([r.theta for r in ok]).reshape(len(ok), POLICY_DIM)
    return angles, thetas


def analyze_policies(thetas: np.ndarray, cfg: ExperimentConfig) -> ChartAssignment:
    m = thetas.shape[0]
    if m < 2:
        return ChartAssignment(1, np.ones(m, dtype=int), np.array([m]), 0, fallback=True)
    return detect_charts(thetas, k=min(cfg.manifold_k, m - 1), min_chart_size=cfg.min_chart_size,
                         adaptive=cfg.adaptive_k)


def fit_skill(angles, thetas, cfg: ExperimentConfig, charts: ChartAssignment | None = None,
              ) -> tuple[SkillModel, ChartAssignment]:
    charts = charts or analyze_policies(thetas, cfg)
    skill = train_skill(TrainingSet(angles, thetas, charts.chart_of), cfg.space(),
                        cfg.gamma, cfg.ridge,
                        metadata={"config_hash": cfg.config_hash(), "k_used": charts.k_used})
    return skill, charts


# ---- experiment --------------------------------------------------------------

@dataclass
class ExperimentReport:
    config_hash: str
    config: dict
    training: list = field(default_factory=list)
    charts: dict = field(default_factory=dict)
    eval_tasks: list = field(default_factory=list)
    sweep: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ExperimentReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _f(v) -> list:
    return [float(x) for x in np.asarray(v, dtype=float).ravel()]


def _chart_summary(angles, thetas, cfg: ExperimentConfig) -> dict:
    if thetas.shape[0] < 2:
        return {"num_charts": 1, "chart_of": [1] * thetas.shape[0], "boundaries": [],
                "k_used": 0, "classifier_accuracy": 1.0, "dimensions": [], "embedding": []}
    skill, charts = fit_skill(angles, thetas, cfg)
    dims = chart_dimensions(thetas, charts, max_dim=cfg.embedding_max_dim)
    emb = []
    for c in range(1, charts.num_charts + 1):
        idx = charts.members(c)
        if idx.size < 3:
            continue
        k = next((d.get("k") for d in dims if d["chart"] == c), charts.k_used)
        coords = isomap(thetas[idx], k, 2).coordinates
        for j, i in enumerate(idx):
            emb.append({"index": int(i), "chart": c, "angle": float(angles[i]),
                        "x": float(coords[j, 0]),
                        "y": float(coords[j, 1]) if coords.shape[1] > 1 else 0.0})
    return {"num_charts": charts.num_charts, "chart_of": [int(c) for c in charts.chart_of],
            "boundaries": skill.boundary_angles(), "k_used": charts.k_used,
            "classifier_accuracy": skill.classifier.training_accuracy,
            "dimensions": dims, "embedding": emb}


def _prepare_output(cfg: ExperimentConfig, overwrite: bool) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    existing = out / "config.json"
    if existing.exists() and not overwrite:
        try:
            old = load_config(existing).config_hash()
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise ExperimentError("run_experiment", f"unreadable config in {out}: {exc}") from None
        if old != cfg.config_hash():
            raise ExperimentError("run_experiment",
                                  f"{out} holds results for config {old}, not "
                                  f"{cfg.config_hash()}; refusing to overwrite")
    save_config(cfg, existing)
    return out


def run_experiment(cfg: ExperimentConfig, write: bool = True,
                   overwrite: bool = False) -> ExperimentReport:
    """Full protocol: training pool, charts, sweep over |K|, held-out evaluation.

    Each |K| uses the first |K| tasks of the sequential warm-started pool, so
    the sweep costs one training run. The report is free of wall-clock data;
    timings go to ``timing.json`` next to it.
    """
    t0 = time.perf_counter()
    out = _prepare_output(cfg, overwrite) if write else None
    runlog = RunLog(out / "runlog.jsonl" if out else None)
    h = cfg.config_hash()
    runlog.write(stage="config", config_hash=h, config=cfg.to_dict())
    sim = cfg.sim()
    timings = {}

    def stage(name):
        timings[name] = time.perf_counter()

    stage("sample")
    train_tasks = sample_tasks(TaskDistribution(cfg.angle_lo, cfg.angle_hi,
                                                stream_seed(cfg.master_seed, "training_tasks")),
                               cfg.num_training_tasks, cfg.arm)
    eval_tasks = []
    if cfg.num_eval_tasks:
        train_angles = {t.angle for t in train_tasks}
        cand = sample_tasks(TaskDistribution(cfg.angle_lo, cfg.angle_hi,
                                             stream_seed(cfg.master_seed, "eval_tasks")),
                            cfg.num_eval_tasks + 8, cfg.arm)
        eval_tasks = [t for t in cand if t.angle not in train_angles][:cfg.num_eval_tasks]

    stage("training")
    try:
        records = build_training_set(train_tasks, cfg, runlog)
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError("build_training_set", repr(exc)) from exc

    stage("manifold")
    try:
        angles, thetas = training_arrays(records)
        charts = _chart_summary(angles, thetas, cfg)
    except Exception as exc:
        raise ExperimentError("analyze_manifold", repr(exc)) from exc
    runlog.write(stage="charts", **{k: v for k, v in charts.items() if k != "embedding"})

    stage("references")
    refs = []
    for j, task in enumerate(eval_tasks):
        res = learn_policy(task, default_theta(), cfg.exploration, sim,
                           seed=stream_seed(cfg.master_seed, "reference_learn", j))
        refs.append(res)
        runlog.write(stage="reference", eval_task=j, angle=task.angle, converged=res.converged,
                     updates=res.updates_used, rollouts=res.rollouts_used,
                     best_distance=res.best_distance, progress=_progress_records(res))

    stage("sweep")
    sweep, evaluations = [], []
    for size in cfg.sweep_sizes:
        try:
            a_k, th_k = training_arrays(records[:size])
            if a_k.size == 0:
                raise ValueError(f"no solved tasks among the first {size}")
            skill, ch = fit_skill(a_k, th_k, cfg)
        except Exception as exc:
            raise ExperimentError("train_skill", f"|K|={size}: {exc!r}") from exc
        scale = np.max(np.abs(th_k), axis=0)
        rows = []
        for j, task in enumerate(eval_tasks):
            theta_hat = predict(skill, task.angle)
            zero = sim.throw(theta_hat, task)
            ft = learn_policy(task, theta_hat, cfg.exploration, sim,
                              seed=stream_seed(cfg.master_seed, "fine_tune", size, j))
            err = parameter_error(theta_hat, refs[j].final_theta, scale)
            row = {"size": size, "eval_task": j, "angle": task.angle,
                   "chart": int(skill.chart_of(task.angle)[0]),
                   "reference_converged": refs[j].converged,
                   "relative_error": err["relative_error"], "rmse": err["rmse"],
                   "zero_shot_distance": zero.distance_to_target,
                   "fine_tune_updates": ft.updates_used, "fine_tune_rollouts": ft.rollouts_used,
                   "fine_tune_converged": ft.converged,
                   "cold_updates": refs[j].updates_used}
            rows.append(row)
            runlog.write(stage="evaluate", progress=_progress_records(ft), **row)
        evaluations.extend(rows)
        sweep.append(_aggregate(size, a_k.size, ch.num_charts, skill.boundary_angles(), rows))

    totals = {
        "training_updates": int(sum(r.updates_used for r in records)),
        "training_rollouts": int(sum(r.rollouts_used for r in records)),
        "training_failed": int(sum(not r.converged for r in records)),
        "training_retried": int(sum(r.cold_retry for r in records)),
        "reference_updates": int(sum(r.updates_used for r in refs)),
        "reference_rollouts": int(sum(r.rollouts_used for r in refs)),
        "reference_failed": int(sum(not r.converged for r in refs)),
        "fine_tune_rollouts": int(sum(r["fine_tune_rollouts"] for r in evaluations)),
        "cold_start_mean_updates": float(np.mean([r.updates_used for r in refs])) if refs else None,
    }
    report = ExperimentReport(
        config_hash=h, config=cfg.to_dict(),
        training=[{"index": r.index, "angle": r.angle, "converged": r.converged,
                   "updates": r.updates_used, "rollouts": r.rollouts_used,
                   "best_distance": r.best_distance, "init_from": r.init_from,
                   "cold_retry": r.cold_retry, "theta": _f(r.theta)} for r in records],
        charts=charts,
        eval_tasks=[t.angle for t in eval_tasks],
        sweep=sweep, evaluations=evaluations, totals=totals)
    stage("end")
    if out is not None:
        report.save(out / "report.json")
        emit_figures(report, out, config_hash=h)
        names = list(timings)
        tdict = {names[i]: timings[names[i + 1]] - timings[names[i]] for i in range(len(names) - 1)}
        tdict["total_seconds"] = time.perf_counter() - t0
        with open(out / "timing.json", "w") as fh:
            json.dump(tdict, fh, indent=1)
    runlog.write(stage="done", config_hash=h, totals=totals)
    return report


def _mean(rows, key, where=None):
    vals = [r[key] for r in rows if where is None or r[where]]
    return float(np.mean(vals)) if vals else None


def _aggregate(size, n_solved, n_charts, boundaries, rows) -> dict:
    return {
        "size": size,
        "solved": int(n_solved),
        "num_charts": int(n_charts),
        "boundaries": boundaries,
        "mean_relative_error": _mean(rows, "relative_error", "reference_converged"),
        "mean_rmse": _mean(rows, "rmse", "reference_converged"),
        "mean_zero_shot_distance": _mean(rows, "zero_shot_distance"),
        "mean_fine_tune_updates": _mean(rows, "fine_tune_updates"),
        "mean_cold_updates": _mean(rows, "cold_updates"),
    }


# ---- figures -----------------------------------------------------------------

FIGURE_COLUMNS = {
    "fig2_parameters_vs_angle.csv": ["index", "angle", "chart"] + POLICY_COLUMNS[1:],
    "fig3_embedding.csv": ["index", "chart", "angle", "x", "y"],
    "fig5_parameter_error.csv": ["size", "mean_relative_error", "mean_rmse", "num_eval"],
    "fig6_zero_shot_distance.csv": ["size", "mean_zero_shot_distance", "num_eval"],
    "fig7_fine_tune_updates.csv": ["size", "mean_fine_tune_updates", "mean_cold_updates",
                                   "num_eval"],
}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, columns, rows, config_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def emit_figures(report: ExperimentReport | dict, output_dir, config_hash: str | None = None,
                 images: bool = True) -> list[Path]:
    """One CSV per figure analogue plus PNG renderings.

    Every CSV starts with a ``# config_hash=...`` comment line followed by the
    header row. CSVs are the contract; images are a convenience.
    """
    rep = report if isinstance(report, ExperimentReport) else ExperimentReport.from_dict(report)
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExperimentError("emit_figures", f"cannot create {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ExperimentError("emit_figures", f"{out} is not writable")
    h = config_hash or rep.config_hash
    chart_of = rep.charts.get("chart_of", [])
    solved = [t for t in rep.training if t["converged"]]
    fig2 = []
    for pos, t in enumerate(solved):
        row = {"index": t["index"], "angle": t["angle"],
               "chart": chart_of[pos] if pos < len(chart_of) else None}
        row.update(dict(zip(POLICY_COLUMNS[1:], t["theta"])))
        fig2.append(row)
    counts = {}
    for r in rep.evaluations:
        counts[r["size"]] = counts.get(r["size"], 0) + 1
    # a sweep point without held-out evaluations has nothing to plot
    sweep = [dict(s, num_eval=counts[s["size"]]) for s in rep.sweep if s["size"] in counts]
    tables = {
        "fig2_parameters_vs_angle.csv": fig2,
        "fig3_embedding.csv": rep.charts.get("embedding", []),
        "fig5_parameter_error.csv": sweep,
        "fig6_zero_shot_distance.csv": sweep,
        "fig7_fine_tune_updates.csv": sweep,
    }
    written = []
    for name, rows in tables.items():
        p = out / name
        _write_csv(p, FIGURE_COLUMNS[name], rows, h)
        written.append(p)
    if images:
        written.extend(_render_images(tables, out))
    return written


def _render_images(tables: dict, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    fig2 = tables["fig2_parameters_vs_angle.csv"]
    if fig2:
        fig, axes = plt.subplots(2, 2, figsize=(8, 6))
        for ax, col in zip(axes.ravel(), ["lambda", "goal", "w1", "w18"]):
            ax.scatter([r["angle"] for r in fig2], [r[col] for r in fig2],
                       c=[r["chart"] or 0 for r in fig2], cmap="coolwarm", s=12)
            ax.set_xlabel("target angle (rad)")
            ax.set_ylabel(col)
        fig.tight_layout()
        paths.append(out / "fig2_parameters_vs_angle.png")
        fig.savefig(paths[-1], dpi=100)
        plt.close(fig)
    emb = tables["fig3_embedding.csv"]
    if emb:
        fig, ax = plt.subplots(figsize=(5, 4))
        sc = ax.scatter([r["x"] for r in emb], [r["y"] for r in emb],
                        c=[r["angle"] for r in emb], cmap="viridis", s=14)
        fig.colorbar(sc, label="target angle (rad)")
        ax.set_xlabel("embedding 1")
        ax.set_ylabel("embedding 2")
        fig.tight_layout()
        paths.append(out / "fig3_embedding.png")
        fig.savefig(paths[-1], dpi=100)
        plt.close(fig)
    sweep = tables["fig5_parameter_error.csv"]
    specs = [("fig5_parameter_error.png", "mean_relative_error", "relative parameter error"),
             ("fig6_zero_shot_distance.png", "mean_zero_shot_distance", "distance to target (m)"),
             ("fig7_fine_tune_updates.png", "mean_fine_tune_updates", "policy updates")]
    for name, key, label in specs:
        pts = [(r["size"], r[key]) for r in sweep if r.get(key) is not None]
        if not pts:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-")
        if key == "mean_fine_tune_updates":
            cold = [r["mean_cold_updates"] for r in sweep if r.get("mean_cold_updates") is not None]
            if cold:
                ax.axhline(cold[0], ls="--", color="gray", label="from scratch")
                ax.legend()
        ax.set_xlabel("training tasks |K|")
        ax.set_ylabel(label)
        fig.tight_layout()
        paths.append(out / name)
        fig.savefig(paths[-1], dpi=100)
        plt.close(fig)
    return paths


# ---- policy table I/O ----------------------------------------------------------

def save_policies(path, angles, thetas) -> None:
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POLICY_COLUMNS)
        for a, th in zip(np.atleast_1d(angles), thetas):
            w.writerow([repr(float(a))] + [repr(float(v)) for v in th])


def load_policies(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0] != POLICY_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(POLICY_COLUMNS[:4])},...")
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(POLICY_COLUMNS))
    return data[:, 0], data[:, 1:]
