"""Supervised top-k feature selection (ANOVA F) and PCA at a variance target.

Both reducers are fitted on training folds only; the fitted objects record
which fold they were fitted on so the evaluation harness can audit leakage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, KOutOfRange, SingleClass

# Candidate k values swept by grid experiments (clipped to D per signal set).
KBEST_GRID = (10, 20, 40, 80, 120, 250)

_TINY = 1e-24


@dataclass(frozen=True)
class ReductionSpec:
    kind: str = "none"  # none | kbest | pca
    k: int = 250
    variance_target: float = 0.95

    def __post_init__(self):
        if self.kind not in ("none", "kbest", "pca"):
            raise ValueError(f"unknown reduction kind {self.kind!r}")
        if self.kind == "kbest" and self.k < 1:
            raise KOutOfRange(f"k must be >= 1, got {self.k}")
        if self.kind == "pca" and not (0 < self.variance_target <= 1):
            raise ValueError(f"variance_target must be in (0, 1], got {self.variance_target}")

    @classmethod
    def parse(cls, text: str) -> "ReductionSpec":
        """Parse 'none', 'kbest:<k>', or 'pca:<target>'."""
        if text == "none":
            return cls("none")
        if text.startswith("kbest"):
            k = int(text.split(":", 1)[1]) if ":" in text else 250
            return cls("kbest", k=k)
        if text.startswith("pca"):
            target = float(text.split(":", 1)[1]) if ":" in text else 0.95
            return cls("pca", variance_target=target)
        raise ValueError(f"cannot parse reduction spec {text!r}")

    def label(self) -> str:
        if self.kind == "kbest":
            return f"kbest{self.k}"
        if self.kind == "pca":
            return f"pca{self.variance_target:g}"
        return "none"


@dataclass
class FittedReducer:
    kind: str
    n_features_in: int
    selected_indices: np.ndarray | None = None
    components: np.ndarray | None = None  # rows are components
    column_means: np.ndarray | None = None
    explained_variance_ratios: np.ndarray | None = None
    fitted_on: str = ""

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "n_features_in": self.n_features_in, "fitted_on": self.fitted_on}
        if self.selected_indices is not None:
            out["selected_indices"] = [int(i) for i in self.selected_indices]
        if self.components is not None:
            out["components"] = self.components.tolist()
            out["column_means"] = self.column_means.tolist()
            out["explained_variance_ratios"] = self.explained_variance_ratios.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FittedReducer":
        return cls(
            kind=d["kind"],
            n_features_in=int(d["n_features_in"]),
            selected_indices=(
                np.array(d["selected_indices"], dtype=int) if "selected_indices" in d else None
            ),
            components=np.array(d["components"]) if "components" in d else None,
            column_means=np.array(d["column_means"]) if "column_means" in d else None,
            explained_variance_ratios=(
                np.array(d["explained_variance_ratios"])
                if "explained_variance_ratios" in d
                else None
            ),
            fitted_on=d.get("fitted_on", ""),
        )


def anova_f_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One-way ANOVA F statistic per column for a binary split.

    Columns with zero total variance score 0; perfectly separating columns
    with zero within-class variance score +inf.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    mask1 = y == 1
    n1, n0 = int(mask1.sum()), int((~mask1).sum())
    if n1 == 0 or n0 == 0:
        raise SingleClass("both classes required to score features")
    n = n0 + n1
    grand = X.mean(axis=0)
    m0 = X[~mask1].mean(axis=0)
    m1 = X[mask1].mean(axis=0)
    ssb = n0 * (m0 - grand) ** 2 + n1 * (m1 - grand) ** 2
    sst = ((X - grand) ** 2).sum(axis=0)
    ssw = np.maximum(sst - ssb, 0.0)
    df_w = n - 2

    scores = np.zeros(X.shape[1])
    dead = sst < _TINY
    perfect = (~dead) & (ssw < _TINY)
    normal = (~dead) & (~perfect)
    scores[perfect] = np.inf
    scores[normal] = ssb[normal] / (ssw[normal] / df_w)
    return scores


def kbest_fit(X: np.ndarray, y: np.ndarray, k: int, fitted_on: str = "") -> FittedReducer:
    """Keep the k columns with the highest F scores (ties -> lower index)."""
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    if not 1 <= k <= d:
        raise KOutOfRange(f"k={k} outside [1, {d}]")
    scores = anova_f_scores(X, y)
    order = np.lexsort((np.arange(d), -scores))  # score desc, index asc on ties
    selected = np.sort(order[:k])
    return FittedReducer("kbest", d, selected_indices=selected, fitted_on=fitted_on)


def pca_fit(X: np.ndarray, variance_target: float = 0.95, fitted_on: str = "") -> FittedReducer:
    """PCA keeping the smallest leading component set reaching the variance target.

    Columns are centered by training means; covariance uses divide-by-(n-1).
    Each component's largest-magnitude coordinate is made positive so fitted
    reducers are reproducible.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    if n < 2:
        raise DegenerateInput(f"PCA needs at least 2 rows, got {n}")
    means = X.mean(axis=0)
    Xc = X - means
    total_var = float((Xc**2).sum()) / (n - 1)
    if total_var < 1e-18:
        raise DegenerateInput("all rows identical; PCA undefined")

    cov = (Xc.T @ Xc) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T  # rows

    ratios = eigvals / eigvals.sum()
    n_keep = int(np.searchsorted(np.cumsum(ratios), variance_target - 1e-12) + 1)
    n_keep = min(n_keep, d)
    components = components[:n_keep].copy()
    ratios = ratios[:n_keep].copy()

    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    return FittedReducer(
        "pca",
        d,
        components=components,
        column_means=means,
        explained_variance_ratios=ratios,
        fitted_on=fitted_on,
    )


def fit_reducer(spec: ReductionSpec, X: np.ndarray, y: np.ndarray, fitted_on: str = "") -> FittedReducer:
    if spec.kind == "none":
        return FittedReducer("none", X.shape[1], fitted_on=fitted_on)
    if spec.kind == "kbest":
        return kbest_fit(X, y, min(spec.k, X.shape[1]), fitted_on=fitted_on)
    return pca_fit(X, spec.variance_target, fitted_on=fitted_on)


def reduce_apply(reducer: FittedReducer, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != reducer.n_features_in:
        raise DimensionMismatch(
            f"reducer expects {reducer.n_features_in} features, got {X.shape[-1]}"
        )
    if reducer.kind == "none":
        return X
    if reducer.kind == "kbest":
        return X[..., reducer.selected_indices]
    return (X - reducer.column_means) @ reducer.components.T
