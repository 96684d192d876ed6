"""Trailing-average smoothing and extraction of the two-segment 40 s windows."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingDataInWindow, OutOfBounds
from .session import CHANNELS, Session, SignalSeries, WindowPolicy, select_event_anchors

log = logging.getLogger(__name__)

# Smoothing window lengths the experiments compare (0 = no smoothing).
SMOOTHING_GRID = (0, 5, 10, 15, 20, 25, 30)

SEGMENT_S = 20  # each window half


@dataclass(frozen=True)
class SmoothingSpec:
    window_s: int = 0
    allow_custom: bool = False

    def __post_init__(self):
        if not self.allow_custom and self.window_s not in SMOOTHING_GRID:
            raise ValueError(f"window_s must be one of {SMOOTHING_GRID}, got {self.window_s}")
        if self.window_s < 0:
            raise ValueError("window_s must be >= 0")


@dataclass
class WindowSample:
    """One 40 s two-segment window with its label and provenance."""

    participant_id: str
    gender: int
    label: int  # 1 = phone usage
    segment_a: dict[str, np.ndarray]  # channel -> 20 samples before the anchor
    segment_b: dict[str, np.ndarray]  # channel -> 20 samples from the anchor on
    anchor_s: float
    smoothing: SmoothingSpec = field(default_factory=SmoothingSpec)


def smooth(series: SignalSeries, spec: SmoothingSpec) -> SignalSeries:
    """Trailing moving average: out[t] = mean(in[max(0, t-N+1) .. t]).

    Partial windows at the stream start average the available prefix. An
    output sample is missing whenever any input sample in its trailing
    window is missing. window_s = 0 returns the series unchanged.
    """
    n_win = spec.window_s
    if n_win == 0:
        return series
    x = series.values
    miss = series.missing_mask
    n = len(x)
    if n == 0:
        return series

    safe = np.where(miss, 0.0, x)
    csum = np.concatenate(([0.0], np.cumsum(safe)))
    cbad = np.concatenate(([0], np.cumsum(miss.astype(int))))
    t = np.arange(n)
    lo = np.maximum(0, t - n_win + 1)
    width = t + 1 - lo
    out = (csum[t + 1] - csum[lo]) / width
    out_miss = (cbad[t + 1] - cbad[lo]) > 0
    out[out_miss] = 0.0
    return SignalSeries(series.channel, out, out_miss, series.rate_hz, series.t0_s)


def smooth_session(session: Session, spec: SmoothingSpec) -> dict[str, SignalSeries]:
    return {ch: smooth(s, spec) for ch, s in session.channels.items()}


def extract_window(
    session: Session,
    anchor_s: float,
    spec: SmoothingSpec,
    smoothed: dict[str, SignalSeries] | None = None,
) -> WindowSample:
    """Slice the two 20 s segments around an anchor from every channel.

    segment_a covers [anchor-20, anchor), segment_b covers [anchor, anchor+20).
    Smoothing is applied to the whole session series before slicing, so
    context preceding the first segment participates in the trailing means.
    """
    a = int(np.floor(anchor_s))
    if a - SEGMENT_S < 0 or a + SEGMENT_S > session.duration_s:
        raise OutOfBounds(
            f"anchor {anchor_s} too close to session edge (duration {session.duration_s})"
        )
    if smoothed is None:
        smoothed = smooth_session(session, spec)

    seg_a, seg_b = {}, {}
    for ch in CHANNELS:
        s = smoothed[ch]
        window_miss = s.missing_mask[a - SEGMENT_S : a + SEGMENT_S]
        if window_miss.any():
            raise MissingDataInWindow(
                f"{session.participant_id}: channel {ch} missing data in window at {anchor_s}"
            )
        seg_a[ch] = s.values[a - SEGMENT_S : a].copy()
        seg_b[ch] = s.values[a : a + SEGMENT_S].copy()

    return WindowSample(
        participant_id=session.participant_id,
        gender=session.gender,
        label=1 if session.group == "phone" else 0,
        segment_a=seg_a,
        segment_b=seg_b,
        anchor_s=float(anchor_s),
        smoothing=spec,
    )


def build_dataset(
    sessions: list[Session],
    spec: SmoothingSpec,
    policy: WindowPolicy,
) -> list[WindowSample]:
    """Extract the two window samples from every session.

    Windows containing missing samples are rejected (logged), not imputed.
    """
    samples = []
    for session in sorted(sessions, key=lambda s: s.participant_id):
        smoothed = smooth_session(session, spec)
        anchors = select_event_anchors(session, policy)
        for anchor in anchors:
            try:
                samples.append(extract_window(session, anchor, spec, smoothed=smoothed))
            except MissingDataInWindow as exc:
                log.warning("rejected window: %s", exc)
    return samples


def dump_windows_csv(samples: list[WindowSample], path) -> None:
    """Debug export: one row per channel-segment."""
    with open(path, "w", newline="") as fh:
        cols = ",".join(f"s{i}" for i in range(SEGMENT_S))
        fh.write(f"participant_id,label,anchor_s,channel,segment,{cols}\n")
        for w in samples:
            for ch in CHANNELS:
                for name, seg in (("a", w.segment_a[ch]), ("b", w.segment_b[ch])):
                    vals = ",".join(repr(float(v)) for v in seg)
                    fh.write(f"{w.participant_id},{w.label},{w.anchor_s},{ch},{name},{vals}\n")
