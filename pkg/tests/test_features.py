import numpy as np
import pytest

from palsy import landmarks as lm
from palsy.dataset_io import (
    Cohort,
    Diagnosis,
    FaceBox,
    RawSample,
    generate_synthetic_cohort,
    symmetric_template,
)
from palsy.errors import EmptyInput
from palsy.features import (
    SENTINEL,
    FeatureMatrix,
    View,
    compute_metrics,
    default_catalog,
    evaluate_metric,
    load_feature_matrix,
    metric_m4_slope,
    ols_slope,
    save_feature_matrix,
    to_landmarks_view,
    to_metrics_view,
    to_no_chin_view,
)
from palsy.preprocess import ProcessedSample, run_pipeline


def processed_from(pts, sid="t", label=Diagnosis.HEALTHY):
    return ProcessedSample(id=sid, landmarks=pts, label=label)


class TestViews:
    def test_landmarks_shape_and_layout(self, processed):
        fm = to_landmarks_view(processed)
        assert fm.rows.shape == (len(processed), 136)
        assert fm.feature_names[:4] == ("x1", "y1", "x2", "y2")
        assert fm.rows[0, 0] == processed[0].landmarks[0, 0]
        assert fm.rows[0, 1] == processed[0].landmarks[0, 1]

    def test_single_sample_matrix(self):
        fm = to_landmarks_view([processed_from(symmetric_template())])
        assert fm.rows.shape == (1, 136)

    def test_layout_contract_specific_landmark(self):
        pts = symmetric_template().copy()
        pts[0] = (0.25, 0.75)
        fm = to_landmarks_view([processed_from(pts)])
        assert fm.rows[0, 0] == 0.25
        assert fm.rows[0, 1] == 0.75

    def test_no_chin_shape_and_first_feature(self, processed):
        fm = to_no_chin_view(processed)
        assert fm.rows.shape == (len(processed), 102)
        assert fm.feature_names[0] == "x18"
        assert fm.rows[0, 0] == processed[0].landmarks[17, 0]

    def test_no_chin_is_projection_of_landmarks(self, processed):
        full = to_landmarks_view(processed)
        nochin = to_no_chin_view(processed)
        assert np.array_equal(nochin.rows, full.rows[:, 34:])

    def test_metrics_shape(self, metrics_view, processed):
        assert metrics_view.rows.shape == (len(processed), 52)
        assert np.isfinite(metrics_view.rows).all()

    def test_empty_input(self):
        for fn in (to_landmarks_view, to_no_chin_view, to_metrics_view):
            with pytest.raises(EmptyInput):
                fn([])

    def test_subset_keeps_alignment(self, landmarks_view):
        sub = landmarks_view.subset([3, 1])
        assert sub.sample_ids == (landmarks_view.sample_ids[3], landmarks_view.sample_ids[1])
        assert np.array_equal(sub.rows[0], landmarks_view.rows[3])


class TestCatalog:
    def test_52_metrics_named_m1_to_m4_first(self):
        cat = default_catalog()
        assert len(cat) == 52
        names = cat.names()
        assert names[0].startswith("M1")
        assert names[1].startswith("M2")
        assert names[2].startswith("M3")
        assert names[3].startswith("M4")
        assert len(set(names)) == 52

    def test_kinds_are_known(self):
        for m in default_catalog().metrics:
            assert m.kind in ("DISTANCE_RATIO", "HEIGHT_DIFF_RATIO", "SLOPE", "AREA_RATIO")

    def test_symmetric_face_gives_exact_unit_and_zero_values(self):
        pts = symmetric_template()
        for m in default_catalog().metrics:
            if not m.paired:
                continue
            v = evaluate_metric(m, pts)
            if m.kind in ("DISTANCE_RATIO", "AREA_RATIO"):
                assert v == 1.0, m.name
            else:
                assert v == 0.0, m.name

    def test_mirror_property(self, rng):
        cat = default_catalog()
        for _ in range(20):
            face = symmetric_template() + rng.normal(0, 0.01, (68, 2))
            face = np.clip(face, 0.0, 1.0)
            direct = compute_metrics(face)
            flipped = compute_metrics(lm.mirror_sample(face))
            for m, a, b in zip(cat.metrics, direct, flipped):
                if not m.paired:
                    continue
                if m.kind in ("DISTANCE_RATIO", "AREA_RATIO"):
                    assert np.isclose(b, 1.0 / a, rtol=1e-9), m.name
                else:
                    assert np.isclose(b, -a, rtol=1e-9, atol=1e-12), m.name

    def test_m1_hand_computed(self):
        pts = symmetric_template().copy()
        pts[lm.idx(lm.LEFT_EYE)] = (0.3, 0.4)
        pts[lm.idx((49,))] = (0.3, 0.7)  # left distance 0.30
        pts[lm.idx(lm.RIGHT_EYE)] = (0.7, 0.4)
        pts[lm.idx((55,))] = (0.7, 0.6)  # right distance 0.20
        m1 = evaluate_metric(default_catalog().metrics[0], pts)
        assert m1 == pytest.approx(1.5, rel=1e-12)

    def test_m3_is_corner_height_difference(self):
        pts = symmetric_template().copy()
        pts[lm.idx((49,))] = (0.36, 0.70)
        pts[lm.idx((55,))] = (0.64, 0.66)
        m3 = evaluate_metric(default_catalog().metrics[2], pts)
        assert m3 == pytest.approx(0.04, rel=1e-12)

    def test_degenerate_denominator_yields_sentinel(self):
        pts = symmetric_template().copy()
        pts[lm.idx(lm.RIGHT_EYE)] = pts[lm.idx((55,))]  # right eye collapses onto the mouth corner
        m1 = evaluate_metric(default_catalog().metrics[0], pts)
        assert m1 == SENTINEL

    def test_translation_invariance_through_pipeline(self, rng):
        base = generate_synthetic_cohort(2, 2, 2, seed=21)
        shift = np.array([37.5, -12.25])
        moved = Cohort(
            tuple(
                RawSample(
                    id=s.id,
                    landmarks=s.landmarks + shift,
                    face_box=FaceBox(
                        s.face_box.x1 + shift[0],
                        s.face_box.y1 + shift[1],
                        s.face_box.x2 + shift[0],
                        s.face_box.y2 + shift[1],
                    ),
                    label=s.label,
                    source=s.source,
                )
                for s in base
            )
        )
        a, _ = run_pipeline(base)
        b, _ = run_pipeline(moved)
        ma = to_metrics_view(a)
        mb = to_metrics_view(b)
        assert np.allclose(ma.rows, mb.rows, atol=1e-9)


class TestSlope:
    def test_horizontal_line(self):
        assert ols_slope(np.array([0.1, 0.2, 0.3]), np.array([0.4, 0.4, 0.4])) == pytest.approx(0.0, abs=1e-12)

    def test_exact_diagonal(self):
        xs = np.array([0.1, 0.2, 0.3])
        assert ols_slope(xs, xs) == pytest.approx(1.0, rel=1e-12)

    def test_hand_computed_ols(self):
        xs = np.array([0.1, 0.2, 0.3])
        ys = np.array([0.10, 0.14, 0.24])
        assert ols_slope(xs, ys) == pytest.approx(0.7, rel=1e-9)

    def test_vertical_line_sentinel(self):
        xs = np.array([0.2, 0.2, 0.2])
        ys = np.array([0.1, 0.2, 0.3])
        assert abs(ols_slope(xs, ys)) == SENTINEL

    def test_m4_uses_landmarks_18_19_20(self):
        pts = symmetric_template().copy()
        pts[lm.idx((18, 19, 20))] = [(0.1, 0.10), (0.2, 0.14), (0.3, 0.24)]
        assert metric_m4_slope(processed_from(pts)) == pytest.approx(0.7, rel=1e-9)


class TestFeatureFiles:
    @pytest.mark.parametrize("view_fixture", ["landmarks_view", "nochin_view", "metrics_view"])
    def test_round_trip(self, tmp_path, view_fixture, request):
        fm = request.getfixturevalue(view_fixture)
        path = tmp_path / "f.csv"
        save_feature_matrix(fm, path)
        loaded = load_feature_matrix(path)
        assert loaded.view is fm.view
        assert loaded.feature_names == fm.feature_names
        assert loaded.sample_ids == fm.sample_ids
        assert np.array_equal(loaded.labels, fm.labels)
        assert np.array_equal(loaded.rows, fm.rows)

    def test_matrix_validation(self):
        with pytest.raises(ValueError):
            FeatureMatrix(
                view=View.METRICS,
                rows=np.zeros((2, 10)),
                labels=np.zeros(2, dtype=np.int64),
                feature_names=tuple(f"f{i}" for i in range(10)),
                sample_ids=("a", "b"),
            )
