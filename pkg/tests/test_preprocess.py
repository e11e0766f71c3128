import math

import numpy as np
import pytest

from palsy import landmarks as lm
from palsy.dataset_io import Cohort, Diagnosis, FaceBox, RawSample, symmetric_template
from palsy.errors import CoincidentEyeCenters
from palsy.preprocess import (
    CANVAS,
    ProcessedSample,
    clamp_to_face_box,
    crop_to_face_box,
    eye_centers,
    load_processed,
    normalize,
    process_sample,
    resize_to_canonical,
    rotate_to_level_eyes,
    run_pipeline,
    save_processed,
)


def sample_with(pts, box=FaceBox(0, 0, 900, 900), sid="t", label=Diagnosis.HEALTHY):
    return RawSample(id=sid, landmarks=pts, face_box=box, label=label)


def canonical_template_sample(**kw):
    return sample_with(symmetric_template() * CANVAS, **kw)


class TestCrop:
    def test_zero_origin_box_is_identity(self):
        pts = symmetric_template() * 900.0
        pts[0] = (450.0, 450.0)
        s = crop_to_face_box(sample_with(pts))
        assert tuple(s.landmarks[0]) == (450.0, 450.0)

    def test_corner_maps_to_origin(self):
        pts = symmetric_template() * 800.0 + (100.0, 50.0)
        pts[0] = (100.0, 50.0)
        s = crop_to_face_box(sample_with(pts, FaceBox(100, 50, 1000, 950)))
        assert tuple(s.landmarks[0]) == (0.0, 0.0)
        assert (s.face_box.x1, s.face_box.y1, s.face_box.x2, s.face_box.y2) == (0, 0, 900, 900)

    def test_interior_point_translates(self):
        pts = symmetric_template() * 800.0 + (100.0, 50.0)
        pts[0] = (550.0, 500.0)
        s = crop_to_face_box(sample_with(pts, FaceBox(100, 50, 1000, 950)))
        assert tuple(s.landmarks[0]) == (450.0, 450.0)


class TestResize:
    def test_already_canonical_is_identity(self):
        s0 = canonical_template_sample()
        s = resize_to_canonical(s0)
        assert np.array_equal(s.landmarks, s0.landmarks)

    def test_anisotropic_scaling(self):
        pts = symmetric_template() * (450.0, 900.0)
        pts[0] = (225.0, 450.0)
        s = resize_to_canonical(sample_with(pts, FaceBox(0, 0, 450, 900)))
        assert tuple(s.landmarks[0]) == (450.0, 450.0)

    def test_corner_maps_to_corner(self):
        pts = symmetric_template() * (300.0, 600.0)
        pts[0] = (300.0, 600.0)
        s = resize_to_canonical(sample_with(pts, FaceBox(0, 0, 300, 600)))
        assert tuple(s.landmarks[0]) == (900.0, 900.0)


class TestRotate:
    def test_level_eyes_unchanged(self):
        pts = symmetric_template() * CANVAS
        pts[lm.idx(lm.LEFT_EYE)] = (300.0, 400.0)
        pts[lm.idx(lm.RIGHT_EYE)] = (600.0, 400.0)
        s, angle = rotate_to_level_eyes(sample_with(pts))
        assert angle == 0.0
        assert np.allclose(s.landmarks, pts, atol=1e-12)

    def test_diagonal_eyes_rotate_by_quarter_pi(self):
        pts = symmetric_template() * CANVAS
        pts[lm.idx(lm.LEFT_EYE)] = (300.0, 300.0)
        pts[lm.idx(lm.RIGHT_EYE)] = (600.0, 600.0)
        s, angle = rotate_to_level_eyes(sample_with(pts))
        assert angle == pytest.approx(-math.pi / 4, abs=1e-12)
        left, right = eye_centers(s.landmarks)
        assert abs(left[1] - right[1]) < 1e-9
        # hand-applied rotation of the left eye centre about (450, 450)
        c, sn = math.cos(-math.pi / 4), math.sin(-math.pi / 4)
        rel = np.array([300.0 - 450.0, 300.0 - 450.0])
        expected = np.array([rel[0] * c - rel[1] * sn + 450.0, rel[0] * sn + rel[1] * c + 450.0])
        assert np.allclose(left, expected, atol=1e-9)

    def test_second_rotation_is_noop(self, rng):
        pts = symmetric_template() * CANVAS
        pts = pts + rng.normal(0, 5.0, pts.shape)
        s, _ = rotate_to_level_eyes(sample_with(pts))
        _, angle2 = rotate_to_level_eyes(s)
        assert abs(angle2) < 1e-9

    def test_rotation_preserves_pairwise_distances(self, rng):
        pts = symmetric_template() * CANVAS + rng.normal(0, 20.0, (68, 2))
        s, _ = rotate_to_level_eyes(sample_with(pts))
        before = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        after = np.linalg.norm(s.landmarks[:, None] - s.landmarks[None, :], axis=-1)
        assert np.abs(before - after).max() < 1e-9

    def test_coincident_eye_centers_error(self):
        pts = symmetric_template() * CANVAS
        pts[lm.idx(lm.LEFT_EYE)] = (400.0, 400.0)
        pts[lm.idx(lm.RIGHT_EYE)] = (400.0, 400.0)
        with pytest.raises(CoincidentEyeCenters):
            rotate_to_level_eyes(sample_with(pts))


class TestClamp:
    def test_single_axis(self):
        pts = symmetric_template() * CANVAS
        pts[0] = (-5.0, 450.0)
        s, moved = clamp_to_face_box(sample_with(pts))
        assert tuple(s.landmarks[0]) == (0.0, 450.0)
        assert moved == 1

    def test_noop_when_inside(self):
        s0 = canonical_template_sample()
        s, moved = clamp_to_face_box(s0)
        assert moved == 0
        assert np.array_equal(s.landmarks, s0.landmarks)

    def test_both_axes(self):
        pts = symmetric_template() * CANVAS
        pts[0] = (950.0, -10.0)
        s, _ = clamp_to_face_box(sample_with(pts))
        assert tuple(s.landmarks[0]) == (900.0, 0.0)

    def test_idempotent(self, rng):
        pts = rng.uniform(-200, 1100, (68, 2))
        once, moved = clamp_to_face_box(sample_with(pts))
        twice, moved2 = clamp_to_face_box(once)
        assert moved2 == 0
        assert np.array_equal(once.landmarks, twice.landmarks)


class TestNormalize:
    def test_corners_and_midpoint(self):
        pts = symmetric_template() * CANVAS
        pts[0] = (0.0, 0.0)
        pts[1] = (900.0, 900.0)
        pts[2] = (450.0, 450.0)
        pts[3] = (225.0, 675.0)
        p = normalize(sample_with(pts))
        assert tuple(p.landmarks[0]) == (0.0, 0.0)
        assert tuple(p.landmarks[1]) == (1.0, 1.0)
        assert tuple(p.landmarks[2]) == (0.5, 0.5)
        assert tuple(p.landmarks[3]) == (0.25, 0.75)

    def test_range_enforced(self):
        with pytest.raises(ValueError):
            ProcessedSample(id="x", landmarks=np.full((68, 2), 1.5), label=Diagnosis.HEALTHY)


class TestPipeline:
    def test_clean_cohort_has_no_exclusions(self, cohort):
        out, report = run_pipeline(cohort, exclusion_threshold=0)
        assert report.excluded == []
        assert len(out) == len(cohort)

    def test_threshold_semantics(self):
        pts = symmetric_template() * CANVAS
        bad = lm.idx(tuple(range(1, 31)))  # 30 landmarks pushed out
        pts[bad, 1] = 950.0
        ok = canonical_template_sample(sid="good")
        bad_sample = sample_with(pts, sid="bad", label=Diagnosis.PERIPHERAL)
        cohort = Cohort((ok, bad_sample))
        out, report = run_pipeline(cohort, exclusion_threshold=20)
        assert report.excluded_ids == ["bad"]
        assert [s.id for s in out] == ["good"]
        # a looser threshold keeps the sample, clamping all strays
        out2, report2 = run_pipeline(cohort, exclusion_threshold=40)
        assert report2.excluded == []
        assert out2[1].clamp_count == 30

    def test_eye_level_property(self, cohort):
        out, _ = run_pipeline(cohort)
        for p in out:
            left = p.landmarks[lm.idx(lm.LEFT_EYE), 1].mean()
            right = p.landmarks[lm.idx(lm.RIGHT_EYE), 1].mean()
            assert abs(left - right) < 1e-9

    def test_output_in_unit_square(self, cohort):
        out, _ = run_pipeline(cohort)
        for p in out:
            assert p.landmarks.min() >= 0.0 and p.landmarks.max() <= 1.0

    def test_pipeline_applied_twice_is_identity(self, cohort):
        out, _ = run_pipeline(cohort)
        for p in out[:10]:
            again = sample_with(p.landmarks * CANVAS, sid=p.id, label=p.label)
            p2, _ = process_sample(again)
            assert np.abs(p2.landmarks - p.landmarks).max() < 1e-9

    def test_batch_never_aborts(self):
        pts = symmetric_template() * CANVAS
        pts[lm.idx(lm.LEFT_EYE)] = (400.0, 400.0)
        pts[lm.idx(lm.RIGHT_EYE)] = (400.0, 400.0)
        broken = sample_with(pts, sid="broken")
        cohort = Cohort((canonical_template_sample(sid="fine"), broken))
        out, report = run_pipeline(cohort)
        assert [s.id for s in out] == ["fine"]
        assert report.excluded_ids == ["broken"]
        assert "eye centres" in report.excluded[0][1]


class TestProcessedFiles:
    def test_round_trip(self, tmp_path, cohort):
        out, _ = run_pipeline(cohort)
        path = tmp_path / "processed.csv"
        save_processed(out, path)
        loaded = load_processed(path)
        assert len(loaded) == len(out)
        for a, b in zip(out, loaded):
            assert a.id == b.id and a.label is b.label
            assert np.allclose(a.landmarks, b.landmarks, atol=1e-9)
            assert a.rotation_applied == b.rotation_applied
            assert a.clamp_count == b.clamp_count
