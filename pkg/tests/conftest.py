import json

import numpy as np
import pytest

from phonesense.session import CHANNELS, EventSpan, Session, SignalSeries
from phonesense.preprocess import SmoothingSpec, WindowSample, build_dataset
from phonesense.session import WindowPolicy, load_session
from phonesense.synthgen import generate_dataset, get_preset


def write_fixture_session(
    root,
    pid="p01",
    gender=0,
    group="phone",
    n_sec=1800,
    events=None,
    value_fn=None,
    skip_channels=(),
    missing=None,
):
    """Write a hand-rolled session directory (independent of write_session)."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "signals").mkdir(exist_ok=True)
    (root / "participant.json").write_text(
        json.dumps({"id": pid, "gender": gender, "group": group})
    )
    if events is None:
        if n_sec >= 1200:
            events = [
                (0.0, 300.0, "activity", "video1"),
                (300.0, 900.0, "activity", "video2"),
                (900.0, float(n_sec), "activity", "reading_code"),
            ]
            if group == "phone":
                events += [(400.0, 430.0, "phone", ""), (1000.0, 1015.0, "phone", "")]
        else:
            events = [(0.0, float(n_sec), "activity", "video2")]
            if group == "phone":
                q = n_sec // 4
                events += [
                    (float(q), float(q + 5), "phone", ""),
                    (float(2 * q), float(2 * q + 5), "phone", ""),
                ]
    lines = ["start_s,end_s,kind,activity"]
    lines += [f"{s},{e},{k},{a}" for s, e, k, a in events]
    (root / "events.csv").write_text("\n".join(lines) + "\n")

    missing = missing or {}
    for ch_i, ch in enumerate(CHANNELS):
        if ch in skip_channels:
            continue
        rows = ["t_s,value"]
        gap = missing.get(ch, set())
        for t in range(n_sec):
            if t in gap:
                rows.append(f"{t},")
            else:
                v = value_fn(ch_i, t) if value_fn else float(ch_i * 100 + (t % 7))
                rows.append(f"{t},{v}")
        (root / "signals" / f"{ch}.csv").write_text("\n".join(rows) + "\n")
    return root


def toy_session(pid="p01", group="phone", n_sec=400, gender=0, events=None, channel_values=None):
    """Build an in-memory session with simple deterministic channel data."""
    if events is None:
        events = [EventSpan(0.0, float(n_sec), "activity", "video2")]
        if group == "phone":
            events += [EventSpan(100.0, 130.0, "phone"), EventSpan(250.0, 262.0, "phone")]
    channels = {}
    for i, ch in enumerate(CHANNELS):
        if channel_values and ch in channel_values:
            values = np.asarray(channel_values[ch], dtype=float)
        else:
            values = np.arange(n_sec, dtype=float) * 0.01 + i
        channels[ch] = SignalSeries(ch, values, np.zeros(len(values), dtype=bool))
    return Session(pid, gender, group, channels, events, float(n_sec))


def fake_samples(n_participants, seed=0, effect=0.0):
    """WindowSamples with random segments, half the participants labeled 1.

    effect > 0 shifts segment_b of positive-label samples, making the task
    learnable without running the full generator.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for p in range(n_participants):
        label = p % 2
        pid = f"s{p:02d}"
        for k in range(2):
            seg_a = {ch: rng.standard_normal(20) for ch in CHANNELS}
            seg_b = {
                ch: rng.standard_normal(20) + effect * label for ch in CHANNELS
            }
            samples.append(
                WindowSample(
                    participant_id=pid,
                    gender=p % 2,
                    label=label,
                    segment_a=seg_a,
                    segment_b=seg_b,
                    anchor_s=float(100 + 200 * k),
                    smoothing=SmoothingSpec(0),
                )
            )
    return samples


@pytest.fixture(scope="session")
def strong_dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("strong_data")
    generate_dataset(get_preset("strong", seed=42), 33, 33, out)
    return out


@pytest.fixture(scope="session")
def null_dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("null_data")
    generate_dataset(get_preset("null", seed=42), 33, 33, out)
    return out


@pytest.fixture(scope="session")
def strong_sessions(strong_dataset_dir):
    from phonesense.cli import load_sessions

    return load_sessions(strong_dataset_dir)


@pytest.fixture(scope="session")
def strong_samples(strong_sessions):
    return build_dataset(strong_sessions, SmoothingSpec(0), WindowPolicy(seed=42))
