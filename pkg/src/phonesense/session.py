"""On-disk session format, loading/validation, 1 Hz resampling, anchor selection.

A session directory looks like::

    <session>/
        participant.json        {"id": "ph03", "gender": 1, "group": "phone"}
        events.csv              start_s,end_s,kind,activity
        signals/
            attention.csv       t_s,value   (value empty = missing sample)
            ...                 one file per channel, 11 total

All timestamps are session-relative seconds. After loading, every channel is
resampled to 1 Hz so downstream windows have exactly one sample per second.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ExcessiveDataLoss,
    InvalidMetadata,
    MalformedRow,
    MissingChannel,
    NotEnoughEvents,
    UnsortedInput,
)

# Canonical channel order: EEG-derived indices, EEG bands, heart rate, head pose.
CHANNELS = (
    "attention",
    "meditation",
    "alpha",
    "beta",
    "gamma",
    "delta",
    "theta",
    "heart_rate",
    "roll",
    "yaw",
    "pitch",
)

EEG_CHANNELS = ("attention", "meditation", "alpha", "beta", "gamma", "delta", "theta")
HEAD_POSE_CHANNELS = ("roll", "yaw", "pitch")

# Named channel subsets accepted by the CLI and experiment configs.
SIGNAL_SETS = {
    **{name: (name,) for name in CHANNELS},
    "eeg_hr": EEG_CHANNELS + ("heart_rate",),
    "head_pose": HEAD_POSE_CHANNELS,
    "all": CHANNELS,
}

DEFAULT_MAX_MISSING_FRACTION = 0.20
DEFAULT_GAP_FILL_S = 3.0


@dataclass
class SignalSeries:
    """One channel's uniformly sampled values for one session."""

    channel: str
    values: np.ndarray
    missing_mask: np.ndarray
    rate_hz: float = 1.0
    t0_s: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        if self.values.shape != self.missing_mask.shape:
            raise ValueError("values and missing_mask must have equal length")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")

    def __len__(self):
        return len(self.values)


@dataclass
class EventSpan:
    start_s: float
    end_s: float
    kind: str  # "phone" or "activity"
    activity_label: str = ""

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise InvalidMetadata(
                f"event span must have end_s > start_s, got [{self.start_s}, {self.end_s}]"
            )
        if self.kind not in ("phone", "activity"):
            raise InvalidMetadata(f"unknown event kind {self.kind!r}")

    @property
    def span_s(self) -> float:
        return self.end_s - self.start_s


@dataclass
class Session:
    participant_id: str
    gender: int
    group: str  # "phone" or "nophone"
    channels: dict[str, SignalSeries]
    events: list[EventSpan]
    duration_s: float

    def phone_events(self) -> list[EventSpan]:
        return sorted((e for e in self.events if e.kind == "phone"), key=lambda e: e.start_s)

    def activities(self) -> list[EventSpan]:
        return sorted((e for e in self.events if e.kind == "activity"), key=lambda e: e.start_s)


@dataclass
class WindowPolicy:
    """How anchors are chosen for sessions without phone events."""

    match_activities: tuple[str, ...] = ("video2", "reading_code")
    seed: int = 0
    segment_s: int = 20  # each of the two window halves


def resample_1hz(t_s, values, channel: str = "", gap_fill_s: float = DEFAULT_GAP_FILL_S) -> SignalSeries:
    """Resample timestamped samples to one value per whole second.

    Each output second t is the mean of raw samples with timestamps in [t, t+1).
    Seconds with no raw sample are linearly interpolated from the nearest filled
    seconds when the empty run is at most ``gap_fill_s`` seconds long and has a
    filled neighbor on both sides; otherwise they are marked missing.
    """
    t_s = np.asarray(t_s, dtype=float)
    values = np.asarray(values, dtype=float)
    if t_s.ndim != 1 or t_s.shape != values.shape:
        raise ValueError("t_s and values must be 1-D and equally long")
    if len(t_s) > 1 and np.any(np.diff(t_s) < 0):
        raise UnsortedInput(f"timestamps for channel {channel!r} are not sorted")
    if len(t_s) == 0:
        return SignalSeries(channel, np.empty(0), np.empty(0, dtype=bool))
    if np.any(t_s < 0):
        raise InvalidMetadata(f"negative timestamp in channel {channel!r}")

    n_sec = int(np.floor(t_s[-1])) + 1
    sec = np.floor(t_s).astype(int)
    ok = np.isfinite(values)
    sums = np.bincount(sec[ok], weights=values[ok], minlength=n_sec)
    counts = np.bincount(sec[ok], minlength=n_sec)
    filled = counts > 0
    out = np.zeros(n_sec)
    out[filled] = sums[filled] / counts[filled]

    missing = ~filled
    if missing.any():
        _fill_short_gaps(out, missing, max_gap=int(gap_fill_s))
    return SignalSeries(channel, out, missing)


def _fill_short_gaps(values: np.ndarray, missing: np.ndarray, max_gap: int) -> None:
    """Interpolate interior runs of missing seconds no longer than max_gap, in place."""
    n = len(values)
    i = 0
    while i < n:
        if not missing[i]:
            i += 1
            continue
        j = i
        while j < n and missing[j]:
            j += 1
        # run is [i, j); interior and short enough -> interpolate
        if i > 0 and j < n and (j - i) <= max_gap:
            lo, hi = values[i - 1], values[j]
            for k in range(i, j):
                frac = (k - (i - 1)) / (j - (i - 1))
                values[k] = lo + frac * (hi - lo)
            missing[i:j] = False
        i = j


def _read_signal_csv(path: Path):
    t, v = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t_s", "value"]:
            raise MalformedRow(path, 1, f"expected header 't_s,value', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise MalformedRow(path, line_no, f"expected 2 fields, got {len(row)}")
            try:
                t.append(float(row[0]))
            except ValueError:
                raise MalformedRow(path, line_no, f"bad timestamp {row[0]!r}") from None
            cell = row[1].strip()
            if cell == "":
                v.append(np.nan)
            else:
                try:
                    v.append(float(cell))
                except ValueError:
                    raise MalformedRow(path, line_no, f"bad value {cell!r}") from None
    if not t:
        raise MalformedRow(path, 2, "signal file has no data rows")
    return np.array(t), np.array(v)


def _read_events_csv(path: Path) -> list[EventSpan]:
    events = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["start_s", "end_s", "kind", "activity"]:
            raise MalformedRow(path, 1, f"expected header 'start_s,end_s,kind,activity', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRow(path, line_no, f"expected 4 fields, got {len(row)}")
            try:
                start, end = float(row[0]), float(row[1])
            except ValueError:
                raise MalformedRow(path, line_no, "bad start_s/end_s") from None
            events.append(EventSpan(start, end, row[2].strip(), row[3].strip()))
    return events


def _read_participant_json(path: Path):
    try:
        with open(path) as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidMetadata(f"cannot read {path}: {exc}") from None
    if not isinstance(meta.get("id"), str) or not meta["id"]:
        raise InvalidMetadata("participant.json: 'id' must be a non-empty string")
    if meta.get("gender") not in (0, 1):
        raise InvalidMetadata("participant.json: 'gender' must be 0 or 1")
    if meta.get("group") not in ("phone", "nophone"):
        raise InvalidMetadata("participant.json: 'group' must be 'phone' or 'nophone'")
    return meta["id"], int(meta["gender"]), meta["group"]


def load_session(
    dir_path,
    max_missing_fraction: float = DEFAULT_MAX_MISSING_FRACTION,
    gap_fill_s: float = DEFAULT_GAP_FILL_S,
) -> Session:
    """Load and validate one session directory, resampling every channel to 1 Hz.

    Raises MissingChannel, MalformedRow, ExcessiveDataLoss, or InvalidMetadata
    when the directory violates the session format.
    """
    dir_path = Path(dir_path)
    pid, gender, group = _read_participant_json(dir_path / "participant.json")
    events = _read_events_csv(dir_path / "events.csv")

    series = {}
    for channel in CHANNELS:
        path = dir_path / "signals" / f"{channel}.csv"
        if not path.exists():
            raise MissingChannel(channel)
        t, v = _read_signal_csv(path)
        series[channel] = resample_1hz(t, v, channel=channel, gap_fill_s=gap_fill_s)

    # Devices may stop at slightly different times; a session only spans the
    # seconds every channel covers.
    duration = min(len(s) for s in series.values())
    if duration == 0:
        raise InvalidMetadata(f"session {pid}: no usable samples")
    for channel, s in series.items():
        series[channel] = SignalSeries(channel, s.values[:duration], s.missing_mask[:duration])
        frac = series[channel].missing_mask.mean()
        if frac > max_missing_fraction:
            raise ExcessiveDataLoss(
                f"channel {channel}: {frac:.1%} missing exceeds {max_missing_fraction:.0%}"
            )

    for e in events:
        if e.start_s < 0 or e.end_s > duration:
            raise InvalidMetadata(
                f"event [{e.start_s}, {e.end_s}] outside session span [0, {duration}]"
            )
    phone_events = sorted((e for e in events if e.kind == "phone"), key=lambda e: e.start_s)
    for prev, cur in zip(phone_events, phone_events[1:]):
        if cur.start_s < prev.end_s:
            raise InvalidMetadata("phone events may not overlap")
    if group == "phone" and len(phone_events) < 2:
        raise InvalidMetadata(f"phone-group session {pid} has {len(phone_events)} phone events, needs 2")

    return Session(pid, gender, group, series, events, float(duration))


def write_session(session: Session, dir_path) -> None:
    """Write a session back out in the on-disk format.

    For series already at 1 Hz this inverts load_session byte-for-byte on the
    channel CSVs (integer seconds, repr() floats, empty cell for missing).
    """
    dir_path = Path(dir_path)
    (dir_path / "signals").mkdir(parents=True, exist_ok=True)

    meta = {"id": session.participant_id, "gender": session.gender, "group": session.group}
    with open(dir_path / "participant.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")

    with open(dir_path / "events.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_s", "end_s", "kind", "activity"])
        for e in sorted(session.events, key=lambda e: (e.start_s, e.kind)):
            writer.writerow([_fmt(e.start_s), _fmt(e.end_s), e.kind, e.activity_label])

    for channel in CHANNELS:
        s = session.channels[channel]
        with open(dir_path / "signals" / f"{channel}.csv", "w", newline="") as fh:
            fh.write("t_s,value\n")
            for i in range(len(s)):
                cell = "" if s.missing_mask[i] else repr(float(s.values[i]))
                fh.write(f"{i},{cell}\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def _anchor_rng(seed: int, participant_id: str) -> np.random.Generator:
    # crc32 keeps the per-participant stream stable across processes,
    # unlike the salted builtin hash().
    return np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(participant_id.encode())])
    )


def select_event_anchors(session: Session, cfg: WindowPolicy) -> list[float]:
    """Pick the two window anchor times for a session.

    Phone sessions anchor at the start of their first two phone events. For
    no-phone sessions, one anchor is drawn (seeded by participant) inside each
    of the first two activities whose label matches cfg.match_activities, at
    least segment_s away from both activity edges.
    """
    seg = cfg.segment_s
    if session.group == "phone":
        usable = [
            e.start_s
            for e in session.phone_events()
            if e.start_s - seg >= 0 and e.start_s + seg <= session.duration_s
        ]
        if len(usable) < 2:
            raise NotEnoughEvents(
                f"{session.participant_id}: {len(usable)} usable phone events, need 2"
            )
        return usable[:2]

    candidates = [
        a
        for a in session.activities()
        if a.activity_label in cfg.match_activities
        and a.span_s >= 2 * seg
        and a.start_s >= 0
        and a.end_s <= session.duration_s
    ]
    if len(candidates) < 2:
        raise NotEnoughEvents(
            f"{session.participant_id}: {len(candidates)} activities usable for anchors, need 2"
        )
    rng = _anchor_rng(cfg.seed, session.participant_id)
    anchors = []
    for act in candidates[:2]:
        span = int(act.span_s)
        offset = int(rng.integers(seg, span - seg + 1))
        anchors.append(act.start_s + offset)
    return anchors
