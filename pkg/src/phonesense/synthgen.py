"""Seeded generator of labeled synthetic multimodal sessions.

Baselines are mean-reverting AR(1) noise per channel with a per-participant
baseline offset. Phone sessions carry two phone events during which channel
effects are injected: pitch drops (looking down at the phone), yaw shifts,
heart rate ramps up, beta/gamma band power rises, and attention falls. Head
pose reacts immediately; the physiological responses ramp in with a lag and
are scaled by per-participant response multipliers, so head pose carries the
strongest single-modality signal and fusing everything helps with the
participants whose postural response is weak.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IoFailure
from .session import CHANNELS, EventSpan, Session, SignalSeries, write_session

DURATION_S = 1800

# channel -> (baseline mean, AR(1) noise std, AR(1) phi, participant spread)
CHANNEL_BASELINES = {
    "attention": (55.0, 9.0, 0.85, 7.0),
    "meditation": (50.0, 8.0, 0.85, 7.0),
    "alpha": (60.0, 3.5, 0.85, 3.0),
    "beta": (55.0, 3.5, 0.85, 3.0),
    "gamma": (50.0, 3.5, 0.85, 3.0),
    "delta": (65.0, 3.5, 0.85, 3.0),
    "theta": (62.0, 3.5, 0.85, 3.0),
    "heart_rate": (72.0, 2.5, 0.90, 5.0),
    "roll": (0.0, 1.5, 0.80, 1.5),
    "yaw": (0.0, 2.5, 0.80, 2.0),
    "pitch": (-5.0, 2.0, 0.80, 2.5),
}

# Fixed activity timeline shared by every generated session. The second video
# and the code-reading block host the phone events and the no-phone anchors.
ACTIVITY_TIMELINE = (
    (0, 240, "video1"),
    (240, 300, "assignment"),
    (300, 720, "video2"),
    (720, 900, "assignment"),
    (900, 1320, "reading_code"),
    (1320, 1800, "video3"),
)

# Phone event durations (seconds) and their probabilities; roughly a quarter
# are shorter than one 20 s segment so windows include post-usage seconds.
EVENT_DURATIONS = np.array([10, 14, 18, 25, 30, 40, 55])
EVENT_DURATION_P = np.array([0.08, 0.10, 0.10, 0.20, 0.22, 0.20, 0.10])

# Per-participant response multiplier ranges (low, high) by preset.
RESPONSE_RANGES = {
    "strong": {"head_pose": (0.10, 1.10), "physio": (0.10, 0.90)},
    "weak": {"head_pose": (0.05, 0.60), "physio": (0.05, 0.50)},
    "null": {"head_pose": (0.0, 0.0), "physio": (0.0, 0.0)},
}

# Lag (seconds) before each physiological response reaches full strength.
HR_RAMP_S = 15
EEG_ONSET_S = 5
ATTENTION_ONSET_S = 8


@dataclass
class GeneratorPreset:
    name: str
    pitch_shift_deg: float
    yaw_shift_deg: float
    hr_ramp_bpm: float
    eeg_shift_db: float
    attention_drop: float
    noise_std: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if not self.noise_std:
            self.noise_std = {ch: CHANNEL_BASELINES[ch][1] for ch in CHANNELS}

    def effect_sizes(self) -> dict:
        return {
            "pitch": abs(self.pitch_shift_deg),
            "yaw": abs(self.yaw_shift_deg),
            "heart_rate": abs(self.hr_ramp_bpm),
            "beta": abs(self.eeg_shift_db),
            "gamma": abs(self.eeg_shift_db),
            "attention": abs(self.attention_drop),
        }


def get_preset(name: str, seed: int = 0) -> GeneratorPreset:
    if name == "strong":
        return GeneratorPreset("strong", -10.0, 8.0, 9.0, 12.0, -30.0, seed=seed)
    if name == "weak":
        return GeneratorPreset("weak", -4.0, 3.0, 3.0, 4.0, -10.0, seed=seed)
    if name == "null":
        return GeneratorPreset("null", 0.0, 0.0, 0.0, 0.0, 0.0, seed=seed)
    raise ValueError(f"unknown preset {name!r}")


def participant_response(preset: GeneratorPreset, participant_index: int, group: str):
    """Deterministic per-participant response multipliers (head_pose, physio)."""
    rng = _rng_for(preset, participant_index, group, stream=2)
    lo_hp, hi_hp = RESPONSE_RANGES[preset.name]["head_pose"]
    lo_ph, hi_ph = RESPONSE_RANGES[preset.name]["physio"]
    hp = float(rng.uniform(lo_hp, hi_hp))
    ph = float(rng.uniform(lo_ph, hi_ph))
    return hp, ph


def _rng_for(preset: GeneratorPreset, participant_index: int, group: str, stream: int):
    group_code = 0 if group == "phone" else 1
    ss = np.random.SeedSequence(
        [preset.seed, zlib.crc32(preset.name.encode()), group_code, participant_index, stream]
    )
    return np.random.default_rng(ss)


def _ar1(rng: np.random.Generator, mu: float, sigma: float, phi: float, n: int) -> np.ndarray:
    """Stationary AR(1) around mu with marginal std sigma."""
    innovations = rng.standard_normal(n) * sigma * np.sqrt(1.0 - phi * phi)
    x = np.empty(n)
    x[0] = mu + rng.standard_normal() * sigma
    for t in range(1, n):
        x[t] = mu + phi * (x[t - 1] - mu) + innovations[t]
    return x


def _event_windows(rng: np.random.Generator):
    """Two phone events, one inside video2 and one inside reading_code."""
    start1 = int(rng.integers(340, 646))
    start2 = int(rng.integers(940, 1246))
    durations = rng.choice(EVENT_DURATIONS, size=2, p=EVENT_DURATION_P)
    return [
        (start1, start1 + int(durations[0])),
        (start2, start2 + int(durations[1])),
    ]


def _onset_profile(n: int, ramp_s: int) -> np.ndarray:
    """0..1 ramp over the first ramp_s seconds of an event, then hold."""
    if ramp_s <= 0:
        return np.ones(n)
    t = np.arange(1, n + 1, dtype=float)
    return np.minimum(t / ramp_s, 1.0)


def generate_session(preset: GeneratorPreset, participant_index: int, group: str) -> Session:
    """Generate one ~30 min session; deterministic per (preset, index, group)."""
    if group not in ("phone", "nophone"):
        raise ValueError(f"group must be 'phone' or 'nophone', got {group!r}")
    rng_base = _rng_for(preset, participant_index, group, stream=0)
    rng_events = _rng_for(preset, participant_index, group, stream=1)

    pid = f"{'ph' if group == 'phone' else 'np'}{participant_index:02d}"
    gender = participant_index % 2

    events = [EventSpan(float(a), float(b), "activity", label) for a, b, label in ACTIVITY_TIMELINE]
    phone_windows = []
    if group == "phone":
        phone_windows = _event_windows(rng_events)
        for start, end in phone_windows:
            events.append(EventSpan(float(start), float(end), "phone", ""))

    hp_mult, physio_mult = participant_response(preset, participant_index, group)

    channels = {}
    for ch in CHANNELS:
        mu, _, phi, spread = CHANNEL_BASELINES[ch]
        sigma = preset.noise_std[ch]
        mu_p = mu + rng_base.standard_normal() * spread
        x = _ar1(rng_base, mu_p, sigma, phi, DURATION_S)

        for start, end in phone_windows:
            span = np.arange(start, min(end, DURATION_S))
            n = len(span)
            if n == 0:
                continue
            if ch == "pitch":
                x[span] += preset.pitch_shift_deg * hp_mult
            elif ch == "yaw":
                x[span] += preset.yaw_shift_deg * hp_mult
            elif ch == "heart_rate":
                x[span] += preset.hr_ramp_bpm * physio_mult * _onset_profile(n, HR_RAMP_S)
            elif ch in ("beta", "gamma"):
                x[span] += preset.eeg_shift_db * physio_mult * _onset_profile(n, EEG_ONSET_S)
            elif ch == "attention":
                x[span] += preset.attention_drop * physio_mult * _onset_profile(n, ATTENTION_ONSET_S)

        channels[ch] = SignalSeries(ch, x, np.zeros(DURATION_S, dtype=bool))

    return Session(pid, gender, group, channels, events, float(DURATION_S))


def generate_dataset(preset: GeneratorPreset, n_phone: int, n_nophone: int, out_dir) -> dict:
    """Write n_phone + n_nophone session directories plus manifest.json."""
    if n_phone < 1 or n_nophone < 1:
        raise ValueError("need at least one session per group")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for group, count in (("phone", n_phone), ("nophone", n_nophone)):
            for i in range(count):
                session = generate_session(preset, i, group)
                session_dir = out_dir / session.participant_id
                write_session(session, session_dir)
                paths.append(session.participant_id)
        manifest = {
            "format_version": 1,
            "preset": preset.name,
            "seed": preset.seed,
            "n_phone": n_phone,
            "n_nophone": n_nophone,
            "sessions": sorted(paths),
            "expected_window_samples": 2 * (n_phone + n_nophone),
        }
        with open(out_dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write dataset under {out_dir}: {exc}") from None
    return manifest
