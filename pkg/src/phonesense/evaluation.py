"""Participant-level leave-one-out evaluation and metrics.

Every fold holds out one participant's two samples; z-score parameters, the
reducer, and the model are fitted on the remaining participants only, and
each fitted artifact records the fold it was fitted on so leakage can be
audited after the fact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import ModelSpec, predict_score, train_model
from .dimreduce import ReductionSpec, fit_reducer, reduce_apply
from .errors import (
    EmptyInput,
    LengthMismatch,
    SingleClass,
    SingleClassFold,
    UnbalancedParticipant,
)
from .features import fuse_matrix, zscore_apply, zscore_fit
from .preprocess import WindowSample
from .session import SIGNAL_SETS

KL_BINS = 20
KL_EPS = 1e-10
SAMPLES_PER_PARTICIPANT = 2


@dataclass(frozen=True)
class PipelineConfig:
    """One cell of the experiment grid."""

    signal_set: str = "all"
    smoothing_s: int = 0
    reduction: ReductionSpec = field(default_factory=ReductionSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    seed: int = 0

    def channels(self) -> tuple[str, ...]:
        return SIGNAL_SETS[self.signal_set]

    def fingerprint(self) -> dict:
        return {
            "signal_set": self.signal_set,
            "smoothing_s": self.smoothing_s,
            "reduction": self.reduction.label(),
            "model": self.model.label(),
            "seed": self.seed,
        }

    def cell_id(self) -> str:
        f = self.fingerprint()
        return f"{f['signal_set']}_w{f['smoothing_s']}_{f['reduction']}_{f['model']}"


@dataclass
class FoldPlan:
    folds: list  # (test_participant_id, tuple of train participant_ids)

    @classmethod
    def for_participants(cls, participant_ids) -> "FoldPlan":
        pids = sorted(set(participant_ids))
        return cls([(p, tuple(q for q in pids if q != p)) for p in pids])


@dataclass
class EvaluationReport:
    config: dict
    records: list  # {participant_id, label, score, correct}
    accuracy: float
    roc_points: list  # (fpr, tpr, threshold)
    auc: float
    score_densities: dict  # bin_edges, phone, nophone
    kl: dict  # forward, reverse, symmetric
    fold_audit: list

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "config": self.config,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "kl": self.kl,
            "n_samples": len(self.records),
            "records": self.records,
            "roc_points": [[float(a), float(b), float(c)] for a, b, c in self.roc_points],
            "score_densities": self.score_densities,
            "fold_audit": self.fold_audit,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(
            config=d["config"],
            records=d["records"],
            accuracy=float(d["accuracy"]),
            roc_points=[tuple(p) for p in d["roc_points"]],
            auc=float(d["auc"]),
            score_densities=d["score_densities"],
            kl=d["kl"],
            fold_audit=d["fold_audit"],
        )

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _derived_seed(seed: int, fold_idx: int) -> int:
    return int(np.random.SeedSequence([seed, fold_idx]).generate_state(1, np.uint64)[0])


def run_loo(samples: list[WindowSample], config: PipelineConfig) -> EvaluationReport:
    """Participant-level leave-one-out over the extracted window samples."""
    by_pid = {}
    for s in samples:
        by_pid.setdefault(s.participant_id, []).append(s)
    for pid, group in by_pid.items():
        if len(group) != SAMPLES_PER_PARTICIPANT:
            raise UnbalancedParticipant(
                f"participant {pid} has {len(group)} samples, expected {SAMPLES_PER_PARTICIPANT}"
            )

    ordered = sorted(samples, key=lambda s: (s.participant_id, s.anchor_s))
    X, y, pids = fuse_matrix(ordered, config.channels())
    pid_arr = np.array(pids)
    plan = FoldPlan.for_participants(pids)

    records = []
    fold_audit = []
    for fold_idx, (test_pid, _train_pids) in enumerate(plan.folds):
        test_mask = pid_arr == test_pid
        train_mask = ~test_mask
        y_train = y[train_mask]
        if len(np.unique(y_train)) < 2:
            raise SingleClassFold(f"training fold for {test_pid} has a single class")

        z = zscore_fit(X[train_mask], fitted_on=test_pid)
        x_tr = zscore_apply(z, X[train_mask])
        x_te = zscore_apply(z, X[test_mask])
        reducer = fit_reducer(config.reduction, x_tr, y_train, fitted_on=test_pid)
        x_tr = reduce_apply(reducer, x_tr)
        x_te = reduce_apply(reducer, x_te)

        fold_model_spec = ModelSpec(
            kind=config.model.kind,
            n_trees=config.model.n_trees,
            kernel=config.model.kernel,
            C=config.model.C,
            gamma=config.model.gamma,
            seed=_derived_seed(config.seed, fold_idx),
        )
        model = train_model(x_tr, y_train, fold_model_spec, fitted_on=test_pid)
        scores = predict_score(model, x_te)

        test_idx = np.nonzero(test_mask)[0]
        for i, score in zip(test_idx, scores):
            label = int(y[i])
            records.append(
                {
                    "participant_id": pids[i],
                    "label": label,
                    "score": float(score),
                    "correct": bool((score >= 0.5) == bool(label)),
                }
            )
        fold_audit.append(
            {
                "fold": fold_idx,
                "test_participant": test_pid,
                "train_size": int(train_mask.sum()),
                "test_in_train": bool(test_pid in pid_arr[train_mask]),
                "zscore_fitted_on": z.fitted_on,
                "reducer_fitted_on": reducer.fitted_on,
                "model_fitted_on": model.fitted_on,
            }
        )

    labels = np.array([r["label"] for r in records])
    scores = np.array([r["score"] for r in records])
    accuracy = float(np.mean([r["correct"] for r in records]))
    roc_points, auc = roc_auc(labels, scores)
    kl_f, kl_r, kl_s = kl_divergence(scores[labels == 1], scores[labels == 0])
    densities = score_densities(scores[labels == 1], scores[labels == 0])

    return EvaluationReport(
        config=config.fingerprint(),
        records=records,
        accuracy=accuracy,
        roc_points=roc_points,
        auc=auc,
        score_densities=densities,
        kl={"forward": kl_f, "reverse": kl_r, "symmetric": kl_s},
        fold_audit=fold_audit,
    )


def mcnemar(correct_a, correct_b):
    """Continuity-corrected McNemar test on paired correctness vectors.

    Returns (chi2, p) with chi2 = (|b-c|-1)^2/(b+c) over the discordant-pair
    counts, and p the chi-square(1) survival probability.
    """
    a = np.asarray(correct_a, dtype=bool)
    b = np.asarray(correct_b, dtype=bool)
    if a.shape != b.shape:
        raise LengthMismatch(f"correctness vectors differ in length: {a.shape} vs {b.shape}")
    n_b = int(np.sum(a & ~b))
    n_c = int(np.sum(~a & b))
    if n_b + n_c == 0:
        return 0.0, 1.0
    chi2 = (abs(n_b - n_c) - 1.0) ** 2 / (n_b + n_c)
    return float(chi2), chi2_sf_1dof(chi2)


def chi2_sf_1dof(x: float) -> float:
    """Survival function of chi-square with 1 dof: 2*(1 - Phi(sqrt(x))).

    Phi comes from the C library erfc, which is accurate to double precision
    (far beyond the 1e-7 needed for 4-decimal p-values).
    """
    if x <= 0:
        return 1.0
    return float(math.erfc(math.sqrt(x / 2.0)))


def score_densities(scores_pos, scores_neg, bins: int = KL_BINS) -> dict:
    """Per-class histograms of scores over equal-width bins on [0, 1]."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    h_pos, _ = np.histogram(np.clip(scores_pos, 0, 1), bins=edges)
    h_neg, _ = np.histogram(np.clip(scores_neg, 0, 1), bins=edges)
    return {
        "bin_edges": edges.tolist(),
        "phone": (h_pos / max(h_pos.sum(), 1)).tolist(),
        "nophone": (h_neg / max(h_neg.sum(), 1)).tolist(),
    }


def kl_divergence(scores_pos, scores_neg):
    """KL divergence between the two score densities on 20 fixed bins.

    Each histogram gets eps added to every bin before normalizing, so
    disjoint supports stay finite. Returns (forward, reverse, symmetric).
    """
    scores_pos = np.asarray(scores_pos, dtype=float)
    scores_neg = np.asarray(scores_neg, dtype=float)
    if len(scores_pos) == 0 or len(scores_neg) == 0:
        raise EmptyInput("both score sets must be non-empty")
    edges = np.linspace(0.0, 1.0, KL_BINS + 1)
    p, _ = np.histogram(np.clip(scores_pos, 0, 1), bins=edges)
    q, _ = np.histogram(np.clip(scores_neg, 0, 1), bins=edges)
    p = p.astype(float) + KL_EPS
    q = q.astype(float) + KL_EPS
    p /= p.sum()
    q /= q.sum()
    forward = float(np.sum(p * np.log(p / q)))
    reverse = float(np.sum(q * np.log(q / p)))
    return forward, reverse, 0.5 * (forward + reverse)


def roc_auc(labels, scores):
    """ROC points (fpr, tpr, threshold) and trapezoidal AUC.

    Thresholds are the distinct score values in descending order; equal
    scores collapse into a single step. A (0, 0, +inf) sentinel is prepended.
    """
    labels = np.asarray(labels, dtype=int)
    scores = np.asarray(scores, dtype=float)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    tps = np.cumsum(l == 1)
    fps = np.cumsum(l == 0)
    last_of_group = np.nonzero(np.concatenate((np.diff(s) != 0, [True])))[0]

    points = [(0.0, 0.0, math.inf)]
    for i in last_of_group:
        points.append((fps[i] / n_neg, tps[i] / n_pos, float(s[i])))
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    auc = float(np.trapezoid(tpr, fpr))
    return points, auc


def write_predictions_csv(report: EvaluationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("participant_id,label,score,correct\n")
        for r in report.records:
            fh.write(f"{r['participant_id']},{r['label']},{repr(r['score'])},{int(r['correct'])}\n")


def write_roc_csv(report: EvaluationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("threshold,fpr,tpr\n")
        for fpr, tpr, thr in report.roc_points:
            fh.write(f"{repr(float(thr))},{repr(float(fpr))},{repr(float(tpr))}\n")


def write_densities_csv(report: EvaluationReport, path) -> None:
    d = report.score_densities
    edges = d["bin_edges"]
    with open(path, "w", newline="") as fh:
        fh.write("bin_lo,bin_hi,p_phone,p_nophone\n")
        for i in range(len(edges) - 1):
            fh.write(
                f"{repr(float(edges[i]))},{repr(float(edges[i + 1]))},"
                f"{repr(float(d['phone'][i]))},{repr(float(d['nophone'][i]))}\n"
            )
