"""Binary classifiers with probability scores.

Random forest: bootstrap-bagged trees, Gini splits over ceil(sqrt(D)) random
candidate features per node, grown until pure or fewer than 2 samples. Score
is the fraction of trees voting class 1.

SVM: soft-margin dual solved by sequential minimal optimization (pairwise
analytic updates over KKT-violating points), linear or Gaussian kernel, with
a Platt sigmoid fitted on the training decision values for probabilities.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingleClass

SMO_TOL = 1e-3
ALPHA_EPS = 1e-8


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "rf"  # rf | svm
    n_trees: int = 250
    kernel: str = "linear"  # linear | rbf (svm only)
    C: float = 1.0
    gamma: str = "scale"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("rf", "svm"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "svm" and self.kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.C <= 0:
            raise ValueError("C must be > 0")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "ModelSpec":
        """Parse 'rf', 'rf:<n_trees>', 'svm_linear', or 'svm_rbf'."""
        if text.startswith("rf"):
            n = int(text.split(":", 1)[1]) if ":" in text else 250
            return cls("rf", n_trees=n, seed=seed)
        if text == "svm_linear":
            return cls("svm", kernel="linear", seed=seed)
        if text == "svm_rbf":
            return cls("svm", kernel="rbf", seed=seed)
        raise ValueError(f"cannot parse model spec {text!r}")

    def label(self) -> str:
        if self.kind == "rf":
            return f"rf{self.n_trees}"
        return f"svm_{self.kernel}"


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------

# Tree nodes are flat lists: internal nodes (feature, threshold, left, right),
# leaves (-1, n_class0, n_class1). Samples with x[feature] < threshold go left.


def _best_split(Xn: np.ndarray, yn: np.ndarray):
    """Best Gini split over the given candidate columns, or None.

    Ties break toward the lower feature index, then the lower threshold.
    """
    n, m = Xn.shape
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    pos = np.cumsum(yn[order], axis=0)
    total_pos = pos[-1, 0]

    left_n = np.arange(1, n, dtype=float)[:, None]
    left_pos = pos[:-1].astype(float)
    right_n = n - left_n
    right_pos = total_pos - left_pos
    pl = left_pos / left_n
    pr = right_pos / right_n
    # weighted Gini up to a constant factor; argmin is what matters
    cost = left_n * pl * (1.0 - pl) + right_n * pr * (1.0 - pr)
    cost = np.where(xs[1:] > xs[:-1], cost, np.inf)

    flat = int(np.argmin(cost.T))  # feature-major scan for tie-breaking
    f, at = divmod(flat, n - 1)
    if not np.isfinite(cost[at, f]):
        return None
    lo, hi = xs[at, f], xs[at + 1, f]
    thr = 0.5 * (lo + hi)
    if thr <= lo:  # adjacent floats can round the midpoint down
        thr = hi
    return f, float(thr)


def _grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, max_features: int):
    n, d = X.shape
    boot = rng.integers(0, n, size=n)
    Xb, yb = X[boot], y[boot]
    nodes = []

    def build(idx):
        node_id = len(nodes)
        nodes.append(None)
        ys = yb[idx]
        n1 = int(ys.sum())
        n0 = len(ys) - n1
        if n0 == 0 or n1 == 0 or len(idx) < 2:
            nodes[node_id] = (-1, n0, n1)
            return node_id
        feats = np.sort(rng.choice(d, size=min(max_features, d), replace=False))
        split = _best_split(Xb[np.ix_(idx, feats)], ys)
        if split is None:
            nodes[node_id] = (-1, n0, n1)
            return node_id
        f_local, thr = split
        f = int(feats[f_local])
        mask = Xb[idx, f] < thr
        left = build(idx[mask])
        right = build(idx[~mask])
        nodes[node_id] = (f, thr, left, right)
        return node_id

    build(np.arange(n))
    return nodes


def _tree_votes(nodes, X: np.ndarray) -> np.ndarray:
    votes = np.empty(len(X), dtype=float)
    for i, row in enumerate(X):
        node = nodes[0]
        while node[0] != -1:
            node = nodes[node[2]] if row[node[0]] < node[1] else nodes[node[3]]
        votes[i] = 1.0 if node[2] > node[1] else 0.0
    return votes


@dataclass
class ForestModel:
    spec: ModelSpec
    n_features: int
    trees: list = field(default_factory=list)
    fitted_on: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": "rf",
            "n_trees": self.spec.n_trees,
            "seed": self.spec.seed,
            "n_features": self.n_features,
            "fitted_on": self.fitted_on,
            "trees": [[list(node) for node in tree] for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        spec = ModelSpec("rf", n_trees=int(d["n_trees"]), seed=int(d["seed"]))
        trees = [[tuple(node) for node in tree] for tree in d["trees"]]
        return cls(spec, int(d["n_features"]), trees, d.get("fitted_on", ""))


def rf_train(X: np.ndarray, y: np.ndarray, spec: ModelSpec, fitted_on: str = "") -> ForestModel:
    """Train spec.n_trees trees on independent bootstrap substreams of the seed."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    n, d = X.shape
    if n < 2:
        raise SingleClass(f"need at least 2 training rows, got {n}")
    if len(np.unique(y)) < 2:
        raise SingleClass("training labels contain a single class")
    max_features = int(math.ceil(math.sqrt(d)))
    streams = np.random.SeedSequence(spec.seed).spawn(spec.n_trees)
    trees = [
        _grow_tree(X, y, np.random.default_rng(stream), max_features) for stream in streams
    ]
    return ForestModel(spec, d, trees, fitted_on)


# ---------------------------------------------------------------------------
# SVM via SMO
# ---------------------------------------------------------------------------


def _kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _scale_gamma(X: np.ndarray) -> float:
    d = X.shape[1]
    mean_var = float(np.var(X, axis=0).mean())
    if mean_var < 1e-12:
        return 1.0 / d
    return 1.0 / (d * mean_var)


@dataclass
class SvmModel:
    spec: ModelSpec
    n_features: int
    support_vectors: np.ndarray
    sv_coef: np.ndarray  # alpha_i * y_i for the support vectors
    bias: float
    gamma_value: float
    platt_a: float
    platt_b: float
    converged: bool = True
    objective_trace: list = field(default_factory=list)
    fitted_on: str = ""

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        K = _kernel_matrix(X, self.support_vectors, self.spec.kernel, self.gamma_value)
        return K @ self.sv_coef + self.bias

    def to_dict(self) -> dict:
        return {
            "kind": "svm",
            "kernel": self.spec.kernel,
            "C": self.spec.C,
            "seed": self.spec.seed,
            "n_features": self.n_features,
            "support_vectors": self.support_vectors.tolist(),
            "sv_coef": self.sv_coef.tolist(),
            "bias": self.bias,
            "gamma_value": self.gamma_value,
            "platt_a": self.platt_a,
            "platt_b": self.platt_b,
            "converged": self.converged,
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        spec = ModelSpec("svm", kernel=d["kernel"], C=float(d["C"]), seed=int(d["seed"]))
        return cls(
            spec,
            int(d["n_features"]),
            np.array(d["support_vectors"]),
            np.array(d["sv_coef"]),
            float(d["bias"]),
            float(d["gamma_value"]),
            float(d["platt_a"]),
            float(d["platt_b"]),
            bool(d.get("converged", True)),
            fitted_on=d.get("fitted_on", ""),
        )


def _platt_fit(decisions: np.ndarray, y01: np.ndarray, max_iter: int = 100):
    """Newton fit of P(y=1|f) = 1 / (1 + exp(A f + B)) with smoothed targets."""
    f = np.asarray(decisions, dtype=float)
    n_pos = int(np.sum(y01 == 1))
    n_neg = len(y01) - n_pos
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(y01 == 1, hi, lo)

    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    sigma = 1e-12
    min_step = 1e-10

    def nll(av, bv):
        z = av * f + bv
        # stable -sum(t log p + (1-t) log(1-p)) for p = sigmoid(-z)
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                     (t - 1.0) * z + np.log1p(np.exp(z)))))

    fval = nll(a, b)
    for _ in range(max_iter):
        z = a * f + b
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
        w = p * (1.0 - p)
        d1 = t - p  # dF/dz for p = sigmoid(-z)
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        h11 = float(np.sum(f * f * w)) + sigma
        h22 = float(np.sum(w)) + sigma
        h21 = float(np.sum(f * w))
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(h11 * g2 - h21 * g1) / det
        gd = g1 * da + g2 * db

        step = 1.0
        while step >= min_step:
            new_a, new_b = a + step * da, b + step * db
            new_f = nll(new_a, new_b)
            if new_f < fval + 1e-4 * step * gd:
                a, b, fval = new_a, new_b, new_f
                break
            step /= 2.0
        else:
            break
    return a, b


def svm_train(X: np.ndarray, y01: np.ndarray, spec: ModelSpec, fitted_on: str = "") -> SvmModel:
    """Solve the soft-margin dual by SMO, then calibrate with a Platt sigmoid.

    If the pass cap is hit before the KKT conditions hold at tolerance, a
    warning is emitted and the best iterate is returned (converged=False).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y01 = np.asarray(y01, dtype=int)
    n, d = X.shape
    if len(np.unique(y01)) < 2:
        raise SingleClass("training labels contain a single class")
    y = np.where(y01 == 1, 1.0, -1.0)
    C = spec.C
    gamma_value = _scale_gamma(X) if spec.kernel == "rbf" else 0.0
    K = _kernel_matrix(X, X, spec.kernel, gamma_value)

    alpha = np.zeros(n)
    bias = 0.0
    err = -y.copy()  # f(x_i) - y_i with f = 0
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x50]))

    def take_step(i1: int, i2: int) -> bool:
        nonlocal bias, err
        if i1 == i2:
            return False
        a1, a2 = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = err[i1], err[i2]
        s = y1 * y2
        if s > 0:
            lo_b, hi_b = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        else:
            lo_b, hi_b = max(0.0, a2 - a1), min(C, C + a2 - a1)
        if hi_b - lo_b < 1e-12:
            return False
        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 1e-12:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, lo_b), hi_b)
        else:
            # flat direction: evaluate the dual objective at both clip ends
            f1 = y1 * e1 - a1 * k11 - s * a2 * k12
            f2 = y2 * e2 - s * a1 * k12 - a2 * k22
            l1 = a1 + s * (a2 - lo_b)
            h1 = a1 + s * (a2 - hi_b)
            obj_lo = l1 * f1 + lo_b * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo_b * lo_b * k22 + s * lo_b * l1 * k12
            obj_hi = h1 * f1 + hi_b * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi_b * hi_b * k22 + s * hi_b * h1 * k12
            if obj_lo < obj_hi - ALPHA_EPS:
                a2_new = lo_b
            elif obj_lo > obj_hi + ALPHA_EPS:
                a2_new = hi_b
            else:
                return False
        if abs(a2_new - a2) < ALPHA_EPS * (a2_new + a2 + ALPHA_EPS):
            return False
        a1_new = a1 + s * (a2 - a2_new)

        d1, d2 = y1 * (a1_new - a1), y2 * (a2_new - a2)
        b1 = bias - e1 - d1 * k11 - d2 * k12
        b2 = bias - e2 - d1 * k12 - d2 * k22
        if 0.0 < a1_new < C:
            new_bias = b1
        elif 0.0 < a2_new < C:
            new_bias = b2
        else:
            new_bias = 0.5 * (b1 + b2)

        err += d1 * K[i1] + d2 * K[i2] + (new_bias - bias)
        alpha[i1], alpha[i2] = a1_new, a2_new
        bias = new_bias
        return True

    def examine(i2: int) -> int:
        y2, a2, e2 = y[i2], alpha[i2], err[i2]
        r2 = e2 * y2
        if not ((r2 < -SMO_TOL and a2 < C) or (r2 > SMO_TOL and a2 > 0)):
            return 0
        non_bound = np.nonzero((alpha > ALPHA_EPS) & (alpha < C - ALPHA_EPS))[0]
        if len(non_bound) > 1:
            i1 = int(non_bound[np.argmax(np.abs(err[non_bound] - e2))])
            if take_step(i1, i2):
                return 1
        for i1 in rng.permutation(non_bound):
            if take_step(int(i1), i2):
                return 1
        for i1 in rng.permutation(n):
            if take_step(int(i1), i2):
                return 1
        return 0

    def dual_objective() -> float:
        ay = alpha * y
        return float(alpha.sum() - 0.5 * ay @ K @ ay)

    max_passes = 10 * n
    objective_trace = []
    examine_all = True
    converged = False
    for _ in range(max_passes):
        changed = 0
        targets = (
            range(n)
            if examine_all
            else np.nonzero((alpha > ALPHA_EPS) & (alpha < C - ALPHA_EPS))[0]
        )
        for i2 in targets:
            changed += examine(int(i2))
        objective_trace.append(dual_objective())
        if examine_all:
            if changed == 0:
                converged = True
                break
            examine_all = False
        elif changed == 0:
            examine_all = True
    if not converged:
        warnings.warn(
            f"SMO hit the pass cap ({max_passes}) before converging; returning best iterate",
            RuntimeWarning,
        )

    decisions = K @ (alpha * y) + bias
    platt_a, platt_b = _platt_fit(decisions, y01)

    keep = alpha > ALPHA_EPS
    model = SvmModel(
        spec,
        d,
        support_vectors=X[keep].copy(),
        sv_coef=(alpha * y)[keep].copy(),
        bias=float(bias),
        gamma_value=gamma_value,
        platt_a=float(platt_a),
        platt_b=float(platt_b),
        converged=converged,
        objective_trace=objective_trace,
        fitted_on=fitted_on,
    )
    model.train_alpha = alpha  # kept for KKT inspection
    model.train_decisions = decisions
    return model


# ---------------------------------------------------------------------------
# Shared scoring interface
# ---------------------------------------------------------------------------


def train_model(X: np.ndarray, y: np.ndarray, spec: ModelSpec, fitted_on: str = ""):
    if spec.kind == "rf":
        return rf_train(X, y, spec, fitted_on)
    return svm_train(X, y, spec, fitted_on)


def predict_score(model, X: np.ndarray) -> np.ndarray:
    """Probability of class 1 per row; hard label is score >= 0.5."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(model, ForestModel):
        if X.shape[1] != model.n_features:
            raise DimensionMismatch(f"expected {model.n_features} features, got {X.shape[1]}")
        votes = np.zeros(len(X))
        for tree in model.trees:
            votes += _tree_votes(tree, X)
        return votes / len(model.trees)
    f = model.decision_values(X)
    z = model.platt_a * f + model.platt_b
    return np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))


def model_to_dict(model) -> dict:
    return model.to_dict()


def model_from_dict(d: dict):
    if d["kind"] == "rf":
        return ForestModel.from_dict(d)
    return SvmModel.from_dict(d)
