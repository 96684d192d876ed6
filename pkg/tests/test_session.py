import numpy as np
import pytest

from phonesense.errors import (
    ExcessiveDataLoss,
    InvalidMetadata,
    MalformedRow,
    MissingChannel,
    NotEnoughEvents,
    UnsortedInput,
)
from phonesense.session import (
    CHANNELS,
    EventSpan,
    WindowPolicy,
    load_session,
    resample_1hz,
    select_event_anchors,
    write_session,
)
from phonesense.synthgen import generate_session, get_preset

from conftest import toy_session, write_fixture_session


class TestResample:
    def test_high_rate_constant(self):
        t = np.arange(0, 10, 1 / 30)
        s = resample_1hz(t, np.full(len(t), 5.0))
        assert len(s) == 10
        assert np.allclose(s.values, 5.0)
        assert not s.missing_mask.any()

    def test_1hz_identity(self):
        v = np.array([3.0, 1.0, 4.0, 1.5])
        s = resample_1hz(np.arange(4.0), v)
        assert np.array_equal(s.values, v)

    def test_short_gap_interpolated(self):
        s = resample_1hz([0.0, 2.0], [0.0, 2.0])
        assert np.allclose(s.values, [0.0, 1.0, 2.0])
        assert not s.missing_mask.any()

    def test_long_gap_marked_missing(self):
        s = resample_1hz([0.0, 5.0], [1.0, 1.0], gap_fill_s=3.0)
        assert s.missing_mask[1:5].all()
        assert not s.missing_mask[0] and not s.missing_mask[5]

    def test_leading_gap_not_interpolated(self):
        s = resample_1hz([2.0, 3.0], [1.0, 1.0])
        assert s.missing_mask[0] and s.missing_mask[1]

    def test_per_second_mean(self):
        s = resample_1hz([0.0, 0.5, 1.0], [1.0, 3.0, 10.0])
        assert np.allclose(s.values, [2.0, 10.0])

    def test_unsorted_raises(self):
        with pytest.raises(UnsortedInput):
            resample_1hz([1.0, 0.0], [1.0, 2.0])

    def test_nan_values_count_as_missing(self):
        s = resample_1hz([0.0, 1.0, 2.0], [1.0, np.nan, 3.0])
        assert np.allclose(s.values, [1.0, 2.0, 3.0])  # gap of 1 s interpolated


class TestLoadSession:
    def test_well_formed(self, tmp_path):
        write_fixture_session(tmp_path / "s", n_sec=1800)
        session = load_session(tmp_path / "s")
        assert session.duration_s == 1800
        assert set(session.channels) == set(CHANNELS)
        assert all(len(s) == 1800 for s in session.channels.values())
        assert session.participant_id == "p01"

    def test_missing_channel(self, tmp_path):
        write_fixture_session(tmp_path / "s", n_sec=100, group="nophone", skip_channels=("theta",))
        with pytest.raises(MissingChannel, match="theta"):
            load_session(tmp_path / "s")

    def test_excessive_data_loss(self, tmp_path):
        gap = set(range(0, 100, 4))  # 25 % missing, spread so gaps stay short
        # interpolation only fills interior gaps <= 3 s; isolated single-second
        # gaps get filled, so stack a solid block instead
        gap = set(range(10, 36))  # 26 % of 100 s
        write_fixture_session(
            tmp_path / "s", n_sec=100, group="nophone", missing={"alpha": gap}
        )
        with pytest.raises(ExcessiveDataLoss, match="alpha"):
            load_session(tmp_path / "s")

    def test_malformed_row_reports_line(self, tmp_path):
        root = write_fixture_session(tmp_path / "s", n_sec=50, group="nophone")
        path = root / "signals" / "beta.csv"
        lines = path.read_text().splitlines()
        lines[11] = "ten,notanumber"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(MalformedRow) as exc:
            load_session(root)
        assert exc.value.line_no == 12

    def test_invalid_metadata(self, tmp_path):
        root = write_fixture_session(tmp_path / "s", n_sec=50, group="nophone")
        (root / "participant.json").write_text('{"id": "x", "gender": 3, "group": "phone"}')
        with pytest.raises(InvalidMetadata):
            load_session(root)

    def test_phone_group_needs_two_events(self, tmp_path):
        root = write_fixture_session(
            tmp_path / "s",
            n_sec=200,
            group="phone",
            events=[(0.0, 200.0, "activity", "video2"), (50.0, 60.0, "phone", "")],
        )
        with pytest.raises(InvalidMetadata):
            load_session(root)

    def test_event_outside_span(self, tmp_path):
        root = write_fixture_session(
            tmp_path / "s",
            n_sec=100,
            group="nophone",
            events=[(0.0, 500.0, "activity", "video2")],
        )
        with pytest.raises(InvalidMetadata):
            load_session(root)

    def test_roundtrip_channel_csvs_byte_identical(self, tmp_path):
        session = generate_session(get_preset("strong", seed=7), 0, "phone")
        first = tmp_path / "first"
        write_session(session, first)
        loaded = load_session(first)
        second = tmp_path / "second"
        write_session(loaded, second)
        for ch in CHANNELS:
            a = (first / "signals" / f"{ch}.csv").read_bytes()
            b = (second / "signals" / f"{ch}.csv").read_bytes()
            assert a == b, ch


class TestAnchors:
    def test_phone_anchors_are_event_starts(self):
        session = toy_session(group="phone", n_sec=1200)
        session.events = [
            EventSpan(0.0, 1200.0, "activity", "video2"),
            EventSpan(300.0, 330.0, "phone"),
            EventSpan(900.0, 920.0, "phone"),
        ]
        anchors = select_event_anchors(session, WindowPolicy(seed=0))
        assert anchors == [300.0, 900.0]

    def test_phone_single_event_raises(self):
        session = toy_session(group="phone", n_sec=400)
        session.events = [EventSpan(100.0, 130.0, "phone")]
        with pytest.raises(NotEnoughEvents):
            select_event_anchors(session, WindowPolicy(seed=0))

    def test_nophone_anchor_bounds(self):
        session = toy_session(group="nophone", n_sec=600)
        session.events = [
            EventSpan(100.0, 220.0, "activity", "video2"),
            EventSpan(300.0, 420.0, "activity", "reading_code"),
        ]
        anchors = select_event_anchors(session, WindowPolicy(seed=42))
        assert len(anchors) == 2
        assert 120.0 <= anchors[0] <= 200.0
        assert 320.0 <= anchors[1] <= 400.0

    def test_nophone_too_short_activity(self):
        session = toy_session(group="nophone", n_sec=400)
        session.events = [EventSpan(100.0, 130.0, "activity", "video2")]
        with pytest.raises(NotEnoughEvents):
            select_event_anchors(session, WindowPolicy(seed=0))

    def test_nophone_seed_determinism(self):
        session = toy_session(group="nophone", n_sec=600)
        session.events = [
            EventSpan(100.0, 220.0, "activity", "video2"),
            EventSpan(300.0, 420.0, "activity", "reading_code"),
        ]
        a = select_event_anchors(session, WindowPolicy(seed=42))
        b = select_event_anchors(session, WindowPolicy(seed=42))
        c = select_event_anchors(session, WindowPolicy(seed=43))
        assert a == b
        assert a != c

    def test_always_exactly_two_anchors(self):
        for group in ("phone", "nophone"):
            for idx in range(4):
                session = generate_session(get_preset("strong", seed=3), idx, group)
                anchors = select_event_anchors(session, WindowPolicy(seed=3))
                assert len(anchors) == 2
                if group == "phone":
                    starts = [e.start_s for e in session.phone_events()]
                    assert anchors == starts[:2]
