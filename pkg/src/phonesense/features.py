"""Global statistical features per 20 s segment, early fusion, z-score scaling.

Each segment yields 33 features built from the signal x, its first difference
v (velocity), second difference a (acceleration), and third difference j
(jerk). At 1 Hz the per-sample differences are per-second rates. Divisions
whose denominator is smaller than 1e-12 in magnitude return 0 so constant
segments stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrainingSet, TooShort, UnknownChannel, WrongLength
from .preprocess import WindowSample

N_FEATURES = 33
GUARD = 1e-12

FEATURE_NAMES = (
    "sum_pos_velocity",          # 1  sum of v where v > 0
    "sum_neg_velocity",          # 2  sum of v where v < 0 (signed)
    "loc_max_1",                 # 3  normalized position of the largest local maximum
    "loc_max_2",                 # 4  ... second largest
    "loc_max_3",                 # 5  ... third largest
    "mean_v_over_absmax_v",      # 6
    "mean_v_over_max_v",         # 7
    "rms_v_over_absmax_v",       # 8
    "mean_x",                    # 9
    "std_x",                     # 10
    "rms_a_over_absmax_a",       # 11
    "median_x",                  # 12
    "std_v",                     # 13
    "std_a",                     # 14
    "mean_abs_jerk",             # 15
    "mean_jerk",                 # 16
    "max_abs_jerk",              # 17
    "max_jerk",                  # 18
    "rms_jerk",                  # 19
    "loc_max_abs_jerk",          # 20
    "loc_max_jerk",              # 21
    "n_velocity_sign_changes",   # 22
    "pos_neg_velocity_ratio",    # 23 magnitude-weighted
    "pos_neg_velocity_count_ratio",  # 24
    "range_x",                   # 25
    "mean_v_over_range_x",       # 26
    "n_local_maxima",            # 27
    "mean_abs_accel",            # 28
    "max_x",                     # 29
    "min_x",                     # 30
    "skewness_x",                # 31
    "excess_kurtosis_x",         # 32
    "gender",                    # 33
)


@dataclass
class GlobalFeatureVector:
    channel: str
    values: np.ndarray  # the 33 features

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (N_FEATURES,):
            raise WrongLength(f"expected {N_FEATURES} feature values, got {self.values.shape}")


@dataclass
class FusedVector:
    participant_id: str
    label: int
    values: np.ndarray
    signal_set: tuple[str, ...]


@dataclass
class ZScoreParams:
    means: np.ndarray
    stds: np.ndarray
    fitted_on: str = ""


def _ratio(num: float, den: float) -> float:
    return num / den if abs(den) >= GUARD else 0.0


def _rms(z: np.ndarray) -> float:
    return float(np.sqrt(np.mean(z * z))) if len(z) else 0.0


def derivatives(x: np.ndarray):
    """First, second, and third per-sample differences of x."""
    x = np.asarray(x, dtype=float)
    if len(x) < 4:
        raise TooShort(f"need at least 4 samples for jerk, got {len(x)}")
    v = np.diff(x)
    a = np.diff(v)
    j = np.diff(a)
    return v, a, j


def _local_maxima(x: np.ndarray):
    """Indices of strict interior local maxima."""
    interior = (x[1:-1] > x[:-2]) & (x[1:-1] > x[2:])
    return np.nonzero(interior)[0] + 1


def compute_features(segment: np.ndarray, gender: int, expected_len: int = 20) -> np.ndarray:
    """Compute the 33 global features of one segment.

    Position features are indices normalized by (len-1) of the sequence they
    index into. When fewer than three interior local maxima exist, the first
    location falls back to the global argmax and the other slots are 0.
    """
    x = np.asarray(segment, dtype=float)
    if x.shape != (expected_len,):
        raise WrongLength(f"expected segment of length {expected_len}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise WrongLength("segment contains non-finite values")

    v, a, j = derivatives(x)
    n = len(x)
    g = np.zeros(N_FEATURES)

    g[0] = v[v > 0].sum()
    g[1] = v[v < 0].sum()

    maxima = _local_maxima(x)
    if len(maxima) >= 3:
        # largest three by value, earliest first on ties
        order = sorted(maxima, key=lambda i: (-x[i], i))
        g[2], g[3], g[4] = (i / (n - 1) for i in order[:3])
    else:
        g[2] = int(np.argmax(x)) / (n - 1)

    abs_v_max = float(np.max(np.abs(v)))
    mean_v = float(np.mean(v))
    g[5] = _ratio(mean_v, abs_v_max)
    g[6] = _ratio(mean_v, float(np.max(v)))
    g[7] = _ratio(_rms(v), abs_v_max)

    g[8] = float(np.mean(x))
    g[9] = float(np.std(x))

    g[10] = _ratio(_rms(a), float(np.max(np.abs(a))))
    g[11] = float(np.median(x))
    g[12] = float(np.std(v))
    g[13] = float(np.std(a))

    g[14] = float(np.mean(np.abs(j)))
    g[15] = float(np.mean(j))
    g[16] = float(np.max(np.abs(j)))
    g[17] = float(np.max(j))
    g[18] = _rms(j)
    g[19] = int(np.argmax(np.abs(j))) / (len(j) - 1)
    g[20] = int(np.argmax(j)) / (len(j) - 1)

    nz = v[v != 0]
    g[21] = int(np.sum(nz[1:] * nz[:-1] < 0)) if len(nz) > 1 else 0

    g[22] = _ratio(v[v > 0].sum(), float(-v[v < 0].sum()))
    g[23] = _ratio(float(np.sum(v > 0)), float(np.sum(v < 0)))

    rng_x = float(np.max(x) - np.min(x))
    g[24] = rng_x
    g[25] = _ratio(mean_v, rng_x)
    g[26] = float(len(maxima))
    g[27] = float(np.mean(np.abs(a)))
    g[28] = float(np.max(x))
    g[29] = float(np.min(x))

    xc = x - np.mean(x)
    m2 = float(np.mean(xc**2))
    m3 = float(np.mean(xc**3))
    m4 = float(np.mean(xc**4))
    g[30] = _ratio(m3, m2**1.5)
    g[31] = _ratio(m4, m2 * m2) - 3.0 if m2 * m2 >= GUARD else 0.0
    g[32] = float(gender)

    return g


def fused_dim(n_signals: int) -> int:
    # 32 non-gender features x 2 segments per channel, gender appended once
    return 64 * n_signals + 1


def fuse(sample: WindowSample, signal_set: tuple[str, ...]) -> FusedVector:
    """Early concatenation of per-channel segment features plus the gender bit.

    Layout: for each channel in the given order, segment_a's 32 signal
    features then segment_b's, with gender as the single final element.
    """
    if not signal_set:
        raise UnknownChannel("signal_set must not be empty")
    parts = []
    for ch in signal_set:
        if ch not in sample.segment_a:
            raise UnknownChannel(f"channel {ch!r} not present in sample")
        parts.append(compute_features(sample.segment_a[ch], sample.gender)[:32])
        parts.append(compute_features(sample.segment_b[ch], sample.gender)[:32])
    parts.append([float(sample.gender)])
    values = np.concatenate(parts)
    assert len(values) == fused_dim(len(signal_set))
    return FusedVector(sample.participant_id, sample.label, values, tuple(signal_set))


def fuse_matrix(samples: list[WindowSample], signal_set: tuple[str, ...]):
    """Fuse every sample; returns (X, y, participant_ids)."""
    vectors = [fuse(s, signal_set) for s in samples]
    X = np.array([v.values for v in vectors])
    y = np.array([v.label for v in vectors], dtype=int)
    pids = [v.participant_id for v in vectors]
    return X, y, pids


def zscore_fit(train: np.ndarray, fitted_on: str = "") -> ZScoreParams:
    """Column means/stds (population) of the training matrix."""
    train = np.atleast_2d(np.asarray(train, dtype=float))
    if train.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit z-score on an empty training set")
    return ZScoreParams(train.mean(axis=0), train.std(axis=0), fitted_on)


def zscore_apply(params: ZScoreParams, X: np.ndarray) -> np.ndarray:
    """(x - mean) / std per column; near-constant columns map to exactly 0."""
    X = np.asarray(X, dtype=float)
    dead = params.stds < GUARD
    z = (X - params.means) / np.where(dead, 1.0, params.stds)
    if z.ndim == 1:
        z[dead] = 0.0
    else:
        z[:, dead] = 0.0
    return z


def write_feature_csv(samples: list[WindowSample], signal_set: tuple[str, ...], path) -> None:
    """Export the fused feature matrix: participant_id,label,f1..fD."""
    X, y, pids = fuse_matrix(samples, signal_set)
    with open(path, "w", newline="") as fh:
        cols = ",".join(f"f{i + 1}" for i in range(X.shape[1]))
        fh.write(f"participant_id,label,{cols}\n")
        for pid, label, row in zip(pids, y, X):
            vals = ",".join(repr(float(v)) for v in row)
            fh.write(f"{pid},{label},{vals}\n")


def read_feature_csv(path):
    """Read a feature CSV back; returns (X, y, participant_ids)."""
    pids, labels, rows = [], [], []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["participant_id", "label"]:
            raise WrongLength(f"unexpected feature CSV header: {header[:2]}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) < 3:
                continue
            pids.append(parts[0])
            labels.append(int(parts[1]))
            rows.append([float(p) for p in parts[2:]])
    return np.array(rows), np.array(labels, dtype=int), pids
