"""Parameterized skill: chart classifier plus per-chart kernel regressors.

The task feature is the target angle normalized to [0, 1] over the task
space. A linear classifier picks the chart; inside a chart every policy
dimension has its own Gaussian-kernel ridge regressor.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dmp import LAMBDA_INDEX, POLICY_DIM

log = logging.getLogger(__name__)

FORMAT_NAME = "paramskill-skill"
FORMAT_VERSION = 1
DEFAULT_GAMMA = 5.0
DEFAULT_RIDGE = 1e-6
MAX_RIDGE = 1e-2


class SkillFileError(ValueError):
    """A skill file is corrupt, truncated, inconsistent or of another version."""


@dataclass(frozen=True)
class TaskSpace:
    angle_lo: float = 0.2
    angle_hi: float = 2.94

    def __post_init__(self):
        if not self.angle_hi > self.angle_lo:
            raise ValueError("task space needs angle_lo < angle_hi")

    def normalize(self, angle):
        return (np.asarray(angle, dtype=float) - self.angle_lo) / (self.angle_hi - self.angle_lo)

    def denormalize(self, u):
        return self.angle_lo + np.asarray(u, dtype=float) * (self.angle_hi - self.angle_lo)

    def to_dict(self) -> dict:
        return {"feature": "angle", "angle_lo": self.angle_lo, "angle_hi": self.angle_hi}


@dataclass
class TrainingSet:
    angles: np.ndarray
    policies: np.ndarray
    chart_labels: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float).ravel()
        self.policies = np.atleast_2d(np.asarray(self.policies, dtype=float))
        self.chart_labels = np.asarray(self.chart_labels, dtype=int).ravel()
        n = self.angles.size
        if self.policies.shape[0] != n or self.chart_labels.size != n:
            raise ValueError("angles, policies and chart_labels must have one entry per task")

    @property
    def num_charts(self) -> int:
        return int(self.chart_labels.max()) if self.chart_labels.size else 0


@dataclass
class ChartClassifier:
    """Linear scores ``weights @ [u, 1]`` per chart; highest score wins."""

    weights: np.ndarray
    training_accuracy: float = 1.0

    @property
    def num_charts(self) -> int:
        return self.weights.shape[0]

    def scores(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        feats = np.column_stack((u, np.ones_like(u)))
        return feats @ self.weights.T

    def predict(self, u) -> np.ndarray:
        # argmax returns the first maximum, i.e. the lowest chart on a tie
        return np.argmax(self.scores(u), axis=1) + 1

    def boundaries(self) -> list[float]:
        """Normalized feature values where adjacent-chart scores are equal (2-chart case)."""
        if self.num_charts != 2:
            return []
        dw = self.weights[0] - self.weights[1]
        if dw[0] == 0.0:
            return []
        return [float(-dw[1] / dw[0])]


def train_classifier(features, labels, epochs: int = 1000) -> ChartClassifier:
    """Averaged multiclass perceptron on (feature, bias).

    Examples are visited in index order, so the fit is deterministic. The
    returned weights are the running average over every visit, which settles
    near the middle of a separating gap; if the average classifies worse than
    the last iterate, the iterate is used instead.
    """
    u = np.asarray(features, dtype=float).ravel()
    y = np.asarray(labels, dtype=int).ravel()
    if u.size == 0 or u.size != y.size:
        raise ValueError("need one label per feature and at least one example")
    n_charts = int(y.max())
    if y.min() < 1 or set(np.unique(y)) != set(range(1, n_charts + 1)):
        raise ValueError("labels must be dense chart indices 1..D with every chart present")
    if n_charts == 1:
        return ChartClassifier(np.zeros((1, 2)), 1.0)
    # centre the feature so the bias and slope learn at comparable rates
    mid = 0.5 * (u.min() + u.max())
    x = np.column_stack((u - mid, np.ones_like(u)))
    w = np.zeros((n_charts, 2))
    total = np.zeros_like(w)
    for _ in range(epochs):
        for i in range(u.size):
            pred = int(np.argmax(w @ x[i]))
            if pred != y[i] - 1:
                w[y[i] - 1] += x[i]
                w[pred] -= x[i]
            total += w

    def accuracy(wt):
        return float(np.mean(np.argmax(x @ wt.T, axis=1) + 1 == y))

    best = total / (epochs * u.size)
    if accuracy(best) < accuracy(w):
        best = w
    # undo the centring: s = a (u - mid) + b = a u + (b - a mid)
    out = best.copy()
    out[:, 1] = best[:, 1] - best[:, 0] * mid
    clf = ChartClassifier(out)
    clf.training_accuracy = float(np.mean(clf.predict(u) == y))
    if clf.training_accuracy < 1.0:
        log.warning("chart classes not linearly separable; training accuracy %.3f",
                    clf.training_accuracy)
    return clf


def gaussian_kernel(a, b, gamma: float) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return np.exp(-gamma * (a[:, None] - b[None, :]) ** 2)


@dataclass
class ChartRegressors:
    """Kernel ridge models of one chart, one column of coefficients per policy dimension."""

    support: np.ndarray
    coefficients: np.ndarray
    offsets: np.ndarray
    ridge: float

    def __post_init__(self):
        # fixed memory layout keeps matmul summation order identical after reload
        self.support = np.ascontiguousarray(self.support, dtype=float)
        self.coefficients = np.ascontiguousarray(self.coefficients, dtype=float)
        self.offsets = np.ascontiguousarray(self.offsets, dtype=float)

    def predict(self, u, gamma: float) -> np.ndarray:
        k = gaussian_kernel(np.atleast_1d(u), self.support, gamma)
        return k @ self.coefficients + self.offsets


@dataclass
class RegressorGrid:
    charts: list
    gamma: float = DEFAULT_GAMMA

    @property
    def num_charts(self) -> int:
        return len(self.charts)


def fit_kernel_ridge(u, targets, gamma: float = DEFAULT_GAMMA,
                     ridge: float = DEFAULT_RIDGE) -> ChartRegressors:
    """Fit (K + ridge I) a = y - mean(y) per target column.

    The per-dimension mean is carried as an offset so constants are
    reproduced everywhere. A failed Cholesky factorization raises the ridge
    by decades up to 1e-2.
    """
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != u.size or u.size == 0:
        raise ValueError("one target row per support point required")
    offsets = y.mean(axis=0)
    k = gaussian_kernel(u, u, gamma)
    lam = ridge
    while True:
        try:
            factor = cho_factor(k + lam * np.eye(u.size), lower=True, check_finite=True)
            coef = cho_solve(factor, y - offsets)
            if np.all(np.isfinite(coef)):
                break
        except LinAlgError:
            pass
        if lam >= MAX_RIDGE:
            raise LinAlgError("kernel system singular even at the largest ridge")
        lam = lam * 10.0 if lam > 0 else 1e-12
        log.warning("singular kernel system; ridge raised to %g", lam)
    return ChartRegressors(u.copy(), coef, offsets, lam)


def train_regressors(training: TrainingSet, space: TaskSpace, gamma: float = DEFAULT_GAMMA,
                     ridge: float = DEFAULT_RIDGE, min_chart_size: int = 1) -> RegressorGrid:
    """One set of per-dimension regressors per chart, each fit only on that chart's tasks."""
    u = space.normalize(training.angles)
    charts = []
    for c in range(1, training.num_charts + 1):
        idx = np.flatnonzero(training.chart_labels == c)
        if idx.size < min_chart_size:
            raise ValueError(f"chart {c} has {idx.size} examples, fewer than {min_chart_size}")
        charts.append(fit_kernel_ridge(u[idx], training.policies[idx], gamma, ridge))
    return RegressorGrid(charts, gamma)


@dataclass
class SkillModel:
    classifier: ChartClassifier
    grid: RegressorGrid
    space: TaskSpace = field(default_factory=TaskSpace)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.classifier.num_charts != self.grid.num_charts:
            raise ValueError("classifier and regressor grid disagree on the number of charts")
        for ch in self.grid.charts:
            if ch.coefficients.shape[1] != POLICY_DIM:
                raise ValueError(f"every chart must regress {POLICY_DIM} policy dimensions")

    @property
    def num_charts(self) -> int:
        return self.grid.num_charts

    def chart_of(self, angle) -> np.ndarray:
        return self.classifier.predict(self.space.normalize(angle))

    def boundary_angles(self) -> list[float]:
        return [float(self.space.denormalize(b)) for b in self.classifier.boundaries()]


def train_skill(training: TrainingSet, space: TaskSpace | None = None,
                gamma: float = DEFAULT_GAMMA, ridge: float = DEFAULT_RIDGE,
                metadata: dict | None = None) -> SkillModel:
    space = space or TaskSpace()
    clf = train_classifier(space.normalize(training.angles), training.chart_labels)
    grid = train_regressors(training, space, gamma, ridge)
    meta = {"training_size": int(training.angles.size)}
    meta.update(metadata or {})
    return SkillModel(clf, grid, space, meta)


def predict(skill: SkillModel, angle: float) -> np.ndarray:
    """Policy vector for the target at ``angle``; the release phase is clamped to [0, 1]."""
    u = skill.space.normalize(float(angle))
    chart = int(skill.classifier.predict(u)[0])
    theta = skill.grid.charts[chart - 1].predict(u, skill.grid.gamma)[0].copy()
    theta[LAMBDA_INDEX] = min(max(theta[LAMBDA_INDEX], 0.0), 1.0)
    return theta


def parameter_error(predicted, reference, scale) -> dict:
    """Mean scale-normalized absolute error and raw RMSE between policy vectors.

    ``scale`` is the per-dimension max |theta_j| over the training set;
    dimensions with zero scale are skipped in the normalized mean.
    """
    p = np.asarray(predicted, dtype=float)
    r = np.asarray(reference, dtype=float)
    s = np.asarray(scale, dtype=float)
    ok = s > 0
    rel = float(np.mean(np.abs(p - r)[..., ok] / s[ok])) if np.any(ok) else 0.0
    return {"relative_error": rel, "rmse": float(np.sqrt(np.mean((p - r) ** 2)))}


# ---- persistence: JSON Lines, one section per line --------------------------

def _f(x) -> list:
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


def save_skill(skill: SkillModel, path) -> None:
    """Write the skill as JSON Lines.

    Lines, in order: header, task_space, classifier, one ``chart`` record per
    chart, end. Floats go through ``repr`` so the round trip is exact.
    """
    lines = [
        {"section": "header", "format": FORMAT_NAME, "version": FORMAT_VERSION,
         "num_charts": skill.num_charts, "policy_dim": POLICY_DIM,
         "gamma": skill.grid.gamma, "metadata": skill.metadata},
        {"section": "task_space", **skill.space.to_dict()},
        {"section": "classifier", "weights": [_f(w) for w in skill.classifier.weights],
         "training_accuracy": skill.classifier.training_accuracy},
    ]
    for i, ch in enumerate(skill.grid.charts, start=1):
        lines.append({"section": "chart", "chart": i, "ridge": ch.ridge,
                      "support": _f(ch.support), "offsets": _f(ch.offsets),
                      "coefficients": [_f(row) for row in ch.coefficients]})
    lines.append({"section": "end", "num_lines": len(lines) + 1})
    with open(path, "w") as fh:
        for rec in lines:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_skill(path) -> SkillModel:
    with open(path) as fh:
        raw = fh.read().splitlines()
    records = []
    for n, line in enumerate(raw, start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SkillFileError(f"line {n} is not valid JSON ({exc.msg})") from None
    sections = [r.get("section") for r in records]
    for name in ("header", "task_space", "classifier"):
        if name not in sections:
            raise SkillFileError(f"skill file is missing the '{name}' section")
    head = records[sections.index("header")]
    if head.get("format") != FORMAT_NAME:
        raise SkillFileError(f"not a skill file (format={head.get('format')!r})")
    if head.get("version") != FORMAT_VERSION:
        raise SkillFileError(f"unsupported skill file version {head.get('version')!r}, "
                             f"expected {FORMAT_VERSION}")
    d = int(head["num_charts"])
    charts = [r for r in records if r.get("section") == "chart"]
    if "end" not in sections:
        missing = f"chart {len(charts) + 1}" if len(charts) < d else "end"
        raise SkillFileError(f"skill file is truncated: missing the '{missing}' section")
    if len(charts) != d:
        raise SkillFileError(f"header declares {d} charts but the file holds {len(charts)}")
    ts = records[sections.index("task_space")]
    cl = records[sections.index("classifier")]
    weights = np.array(cl["weights"], dtype=float).reshape(-1, 2)
    if weights.shape[0] != d:
        raise SkillFileError(f"classifier has {weights.shape[0]} charts, header declares {d}")
    regs = []
    for i, rec in enumerate(sorted(charts, key=lambda r: r["chart"]), start=1):
        if rec["chart"] != i:
            raise SkillFileError(f"chart records are not numbered 1..{d}")
        coef = np.array(rec["coefficients"], dtype=float)
        support = np.array(rec["support"], dtype=float)
        if coef.shape != (support.size, int(head["policy_dim"])):
            raise SkillFileError(f"chart {i} coefficient table has shape {coef.shape}")
        regs.append(ChartRegressors(support, coef, np.array(rec["offsets"], dtype=float),
                                    float(rec["ridge"])))
    try:
        return SkillModel(ChartClassifier(weights, float(cl.get("training_accuracy", math.nan))),
                          RegressorGrid(regs, float(head["gamma"])),
                          TaskSpace(float(ts["angle_lo"]), float(ts["angle_hi"])),
                          dict(head.get("metadata", {})))
    except ValueError as exc:
        raise SkillFileError(f"inconsistent skill file: {exc}") from None
