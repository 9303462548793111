import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbyte import cmc
from cbyte.core import AffineTransform, BBox, Detection, GrayFrame
from cbyte.synth import SynthConfig, synth_sequence
from cbyte.tracker import FrameOrderError, Tracker, TrackerConfig, TrackStatus

FLAT = np.full((120, 160), 0.5)
NO_CMC = TrackerConfig(enable_cmc=False)


def frame(i):
    return GrayFrame(FLAT, i)


def det(x, y, score=0.9, w=20, h=30):
    return Detection(BBox(x, y, w, h), score)


def run(tracker, per_frame):
    return [tracker.step(frame(i), d) for i, d in enumerate(per_frame)]


@pytest.fixture(scope="module")
def small_seq():
    cfg = SynthConfig(
        frames=40, width=320, height=240, num_objects=4, object_size=32, layout_margin=32,
        pan_x=1.0, det_noise_px=1.0, det_dropout=0.05, low_score_fraction=0.1, seed=2,
    )
    return synth_sequence(cfg)


def run_seq(seq, config):
    t = Tracker(config)
    by_frame = seq.detections_by_frame()
    for f in seq.frames():
        t.step(f, [r.to_detection() for r in by_frame[f.frame_index]])
    return t


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [dict(max_lost_age=0), dict(min_hits_to_confirm=0), dict(tau_low=0.7), dict(primary_max_cost=1.5)]
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            TrackerConfig(**kw)


class TestBirth:
    def test_two_births_unconfirmed(self):
        t = Tracker(NO_CMC)
        out = t.step(frame(0), [det(10, 10), det(100, 60)])
        assert out == []
        assert [tr.id for tr in t.tracks] == [1, 2]
        assert all(tr.status is TrackStatus.TENTATIVE for tr in t.tracks)

    def test_two_births_immediate(self):
        t = Tracker(dataclasses.replace(NO_CMC, min_hits_to_confirm=1))
        out = t.step(frame(0), [det(10, 10), det(100, 60)])
        assert [s.id for s in out] == [1, 2]

    def test_confirmed_on_second_hit(self):
        t = Tracker(NO_CMC)
        t.step(frame(0), [det(10, 10)])
        out = t.step(frame(1), [det(11, 10)])
        assert [s.id for s in out] == [1]
        assert out[0].score == 0.9

    def test_unconfirmed_miss_removed(self):
        t = Tracker(NO_CMC)
        t.step(frame(0), [det(10, 10)])
        t.step(frame(1), [])
        assert t.tracks == []
        t.step(frame(2), [det(10, 10)])
        assert [tr.id for tr in t.tracks] == [2]

    def test_low_score_does_not_spawn(self):
        t = Tracker(NO_CMC)
        t.step(frame(0), [det(10, 10, score=0.4)])
        assert t.tracks == []

    def test_zero_area_detection_ignored(self):
        t = Tracker(NO_CMC)
        t.step(frame(0), [Detection(BBox(5, 5, 0, 10), 0.9)])
        assert t.tracks == []


def test_static_object_single_id():
    t = Tracker(NO_CMC)
    run(t, [[det(50, 40)] for _ in range(50)])
    hist = t.flush()
    assert {s.id for s in hist} == {1}
    assert len(hist) == 49


def test_occlusion_resumes_same_id():
    t = Tracker(NO_CMC)
    per_frame = []
    for i in range(30):
        per_frame.append([] if 15 <= i < 20 else [det(10 + 2 * i, 40)])
    outs = run(t, per_frame)
    assert all(outs[i] == [] for i in range(15, 20))
    assert {s.id for s in t.flush()} == {1}
    assert outs[20][0].id == 1


def test_lost_then_removed_after_max_age():
    cfg = dataclasses.replace(NO_CMC, max_lost_age=3)
    t = Tracker(cfg)
    run(t, [[det(50, 40)], [det(50, 40)]])
    for i in range(2, 5):
        t.step(frame(i), [])
        (tr,) = t.tracks
        assert tr.status is TrackStatus.LOST and tr.frames_since_update == i - 1
    t.step(frame(5), [])
    assert t.tracks == []
    assert len(t.flush()) == 1  # the removed track's record stays in the history


def test_frame_order():
    t = Tracker(NO_CMC)
    t.step(frame(3), [])
    with pytest.raises(FrameOrderError):
        t.step(frame(3), [])
    with pytest.raises(FrameOrderError):
        t.step(frame(1), [])


class TestFlush:
    def test_empty(self):
        assert Tracker(NO_CMC).flush() == []

    def test_one_track_n_records(self):
        t = Tracker(dataclasses.replace(NO_CMC, min_hits_to_confirm=1))
        run(t, [[det(30 + i, 40)] for i in range(12)])
        hist = t.flush()
        assert len(hist) == 12 and {s.id for s in hist} == {1}
        assert [s.frame_index for s in hist] == list(range(12))


class TestSecondaryAssociation:
    def test_low_score_extends_tracked_track(self):
        t = Tracker(NO_CMC)
        run(t, [[det(50, 40)], [det(50, 40)]])
        out = t.step(frame(2), [det(51, 40, score=0.3)])
        assert [s.id for s in out] == [1] and out[0].score == 0.3

    def test_low_score_does_not_revive_lost_track(self):
        t = Tracker(NO_CMC)
        run(t, [[det(50, 40)], [det(50, 40)], []])
        out = t.step(frame(3), [det(50, 40, score=0.3)])
        assert out == [] and t.tracks[0].status is TrackStatus.LOST

    def test_high_score_revives_lost_track(self):
        t = Tracker(NO_CMC)
        run(t, [[det(50, 40)], [det(50, 40)], []])
        out = t.step(frame(3), [det(50, 40)])
        assert [s.id for s in out] == [1]

    def test_secondary_gate_stricter(self):
        t = Tracker(NO_CMC)
        run(t, [[det(50, 40)], [det(50, 40)]])
        # IoU with the prediction is 0.25: passes the primary gate, fails the secondary one
        out = t.step(frame(2), [det(62, 40, score=0.3)])
        assert out == []


def test_one_detection_one_track():
    t = Tracker(NO_CMC)
    run(t, [[det(50, 40), det(53, 40)], [det(50, 40), det(53, 40)]])
    assert len(t.tracks) == 2
    t.step(frame(2), [det(51, 40)])
    statuses = sorted(tr.status.value for tr in t.tracks)
    assert statuses == ["lost", "tracked"]


@settings(max_examples=40)
@given(st.integers(0, 2**31))
def test_sub_threshold_detections_are_inert(seed):
    rng = np.random.default_rng(seed)
    base, noisy = [], []
    for i in range(15):
        real = [det(20 + 3 * i + rng.normal(), 30 + 40 * k, score=rng.uniform(0.1, 1)) for k in range(2) if rng.random() > 0.2]
        junk = [det(*rng.uniform(0, 140, 2), score=rng.uniform(0, 0.0999)) for _ in range(rng.integers(0, 4))]
        mixed = list(real)
        for d in junk:  # interleave without reordering the real detections
            mixed.insert(int(rng.integers(0, len(mixed) + 1)), d)
        base.append(real)
        noisy.append(mixed)
    a, b = Tracker(NO_CMC), Tracker(NO_CMC)
    run(a, base)
    run(b, noisy)
    assert a.flush() == b.flush()
    assert [(x.id, x.state.mean.tolist()) for x in a.tracks] == [(x.id, x.state.mean.tolist()) for x in b.tracks]


def test_ids_increase_with_creation(small_seq):
    hist = run_seq(small_seq, TrackerConfig()).flush()
    first_seen = list(dict.fromkeys(s.id for s in hist))
    assert first_seen == sorted(first_seen)
    per_frame = {}
    for s in hist:
        per_frame.setdefault(s.frame_index, []).append(s.id)
    assert all(len(ids) == len(set(ids)) for ids in per_frame.values())


def test_deterministic(small_seq):
    assert run_seq(small_seq, TrackerConfig()).flush() == run_seq(small_seq, TrackerConfig()).flush()


def test_identity_motion_matches_disabled(small_seq, monkeypatch):
    monkeypatch.setattr(cmc.MotionEstimator, "step", lambda self, frame: AffineTransform.identity())
    with_cmc = run_seq(small_seq, TrackerConfig())
    without = run_seq(small_seq, NO_CMC)
    assert with_cmc.flush() == without.flush()


def test_timings_recorded(small_seq):
    t = run_seq(small_seq, TrackerConfig())
    assert set(t.last_timings) == {"predict", "cmc", "associate", "bookkeeping", "step"}
    assert all(v >= 0 for v in t.last_timings.values())
    assert t.last_keypoint_count == 210


def test_camera_motion_is_compensated():
    # a stationary object seen by a camera that jumps 40 px: only the compensated tracker keeps its id
    cfg = SynthConfig(frames=12, width=320, height=240, num_objects=1, object_size=24, object_speed=0.0,
                      layout_margin=100, jump_every=6, jump_dx=40, jump_rotation_deg=0.0, seed=1)
    seq = synth_sequence(cfg)
    with_cmc = {s.id for s in run_seq(seq, TrackerConfig()).flush()}
    without = {s.id for s in run_seq(seq, NO_CMC).flush()}
    assert with_cmc == {1}
    assert len(without) == 2
