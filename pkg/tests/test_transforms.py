import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtraj.core import PredictionSet, Scene, Trajectory, make_test_case
from mtraj.ot import ground_distance, wasserstein
from mtraj.transforms import (
    MIRROR_H,
    MIRROR_V,
    DegenerateScene,
    MetamorphicRelation,
    MrKind,
    inverse_transform_output,
    parse_mr_list,
    rescale,
    transform_input,
    transform_output,
)

from conftest import dyadic_prediction_set, random_case, random_prediction_set


class TestParsing:
    def test_spec_round_trip(self):
        for text in ("mirror-h", "mirror-v", "rescale:0.2"):
            assert MetamorphicRelation.parse(text).spec == text

    def test_parse_list(self):
        mrs = parse_mr_list("mirror-v, rescale:0.2,rescale:0.3")
        assert [m.spec for m in mrs] == ["mirror-v", "rescale:0.2", "rescale:0.3"]

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            MetamorphicRelation.parse("rotate:90")
        with pytest.raises(ValueError):
            MetamorphicRelation.parse("rescale:zero")

    def test_rescale_param_positive(self):
        with pytest.raises(ValueError):
            MetamorphicRelation(MrKind.RESCALE, -0.25)


def case_on_grid(width=100, height=100, pts=((10.0, 20.0), (11.0, 21.0))):
    scene = Scene.from_grid(
        np.arange(width * height, dtype=np.uint64).reshape(height, width) % 6,
        num_classes=6,
    )
    return make_test_case(scene, Trajectory(pts), horizon=12, id="case")


class TestTransformInput:
    def test_mirror_v_point_formula(self):
        tc = case_on_grid()
        out = transform_input(MIRROR_V, tc)
        assert out.observed.points[0] == (89.0, 20.0)

    def test_mirror_v_reverses_columns(self):
        tc = case_on_grid(width=4, height=1, pts=((0.0, 0.0), (1.0, 0.0)))
        out = transform_input(MIRROR_V, tc)
        assert out.scene.grid.tolist() == tc.scene.grid[:, ::-1].tolist()

    def test_mirror_h_reverses_rows(self):
        tc = case_on_grid(width=2, height=3, pts=((0.0, 0.0), (1.0, 1.0)))
        out = transform_input(MIRROR_H, tc)
        assert out.scene.grid.tolist() == tc.scene.grid[::-1, :].tolist()
        assert out.observed.points[0] == (0.0, 2.0)

    def test_rescale_scales_points_and_grid(self):
        tc = case_on_grid(pts=((10.0, 20.0), (11.0, 21.0)))
        out = transform_input(rescale(0.2), tc)
        assert out.observed.points[0] == (8.0, 16.0)
        assert (out.scene.width, out.scene.height) == (80, 80)
        assert out.scene.rescale_factor == 0.2

    def test_mirror_involution_bit_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            tc = random_case(rng)  # dyadic coordinates
            for mr in (MIRROR_V, MIRROR_H):
                assert transform_input(mr, transform_input(mr, tc)) == tc

    def test_ground_truth_transforms_identically(self):
        rng = np.random.default_rng(1)
        tc = random_case(rng, with_gt=True)
        out = transform_input(MIRROR_V, tc)
        expected = (tc.scene.width - 1) - tc.ground_truth.xy[:, 0]
        np.testing.assert_array_equal(out.ground_truth.xy[:, 0], expected)
        np.testing.assert_array_equal(out.ground_truth.xy[:, 1], tc.ground_truth.xy[:, 1])

    def test_degenerate_scene(self):
        tc = case_on_grid(width=10, height=10, pts=((0.5, 0.5), (1.0, 1.0)))
        with pytest.raises(DegenerateScene):
            transform_input(rescale(0.001), tc)

    def test_id_preserved(self):
        tc = case_on_grid()
        assert transform_input(MIRROR_V, tc).id == tc.id


class TestTransformOutput:
    def test_mirror_h_example(self):
        scene = Scene.from_grid(np.zeros((50, 10), dtype=np.uint8), num_classes=6)
        preds = PredictionSet((Trajectory(((0.0, 0.0), (1.0, 2.0))),))
        out = transform_output(MIRROR_H, preds, scene)
        assert out.trajectories[0].points == ((0.0, 49.0), (1.0, 47.0))

    def test_rescale_example(self):
        scene = Scene.from_grid(np.zeros((10, 10), dtype=np.uint8), num_classes=6)
        preds = PredictionSet((Trajectory(((10.0, 10.0),)),))
        out = transform_output(rescale(0.2), preds, scene)
        assert out.trajectories[0].points == ((8.0, 8.0),)

    def test_mirror_involution_on_outputs(self):
        rng = np.random.default_rng(2)
        scene = Scene.from_grid(np.zeros((30, 40), dtype=np.uint8), num_classes=6)
        preds = random_prediction_set(rng)
        for mr in (MIRROR_V, MIRROR_H):
            twice = transform_output(mr, transform_output(mr, preds, scene), scene)
            np.testing.assert_allclose(twice.stacked, preds.stacked, atol=1e-12)

    def test_rescale_inverse_example(self):
        scene = Scene.from_grid(np.zeros((20, 20), dtype=np.uint8), num_classes=6)
        preds = PredictionSet((Trajectory(((8.0, 16.0),)),))
        out = inverse_transform_output(rescale(0.2), preds, scene)
        assert out.trajectories[0].points == ((10.0, 20.0),)

    def test_mirror_inverse_equals_forward(self):
        rng = np.random.default_rng(3)
        scene = Scene.from_grid(np.zeros((30, 40), dtype=np.uint8), num_classes=6)
        preds = random_prediction_set(rng)
        for mr in (MIRROR_V, MIRROR_H):
            fwd = transform_output(mr, preds, scene)
            inv = inverse_transform_output(mr, preds, scene)
            np.testing.assert_array_equal(fwd.stacked, inv.stacked)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["mirror-h", "mirror-v", "rescale:0.2", "rescale:0.3", "rescale:1.7"]))
@settings(max_examples=60, deadline=None)
def test_inverse_composes_to_identity(seed, mr_text):
    rng = np.random.default_rng(seed)
    scene = Scene.from_grid(np.zeros((37, 53), dtype=np.uint8), num_classes=6)
    preds = random_prediction_set(rng, k=3, horizon=4, scale=15.0)
    mr = MetamorphicRelation.parse(mr_text)
    back = inverse_transform_output(mr, transform_output(mr, preds, scene), scene)
    np.testing.assert_allclose(back.stacked, preds.stacked, atol=1e-12, rtol=0)


class TestMetricCompatibility:
    def test_mirror_is_ground_distance_isometry(self):
        rng = np.random.default_rng(4)
        scene = Scene.from_grid(np.zeros((64, 64), dtype=np.uint8), num_classes=6)
        a = dyadic_prediction_set(rng, k=1, horizon=8).trajectories[0]
        b = dyadic_prediction_set(rng, k=1, horizon=8).trajectories[0]
        sets = (PredictionSet((a,)), PredictionSet((b,)))
        for mr in (MIRROR_V, MIRROR_H):
            ma = transform_output(mr, sets[0], scene).trajectories[0]
            mb = transform_output(mr, sets[1], scene).trajectories[0]
            assert ground_distance(ma, mb) == ground_distance(a, b)

    def test_rescale_scales_wasserstein_linearly(self):
        rng = np.random.default_rng(5)
        scene = Scene.from_grid(np.zeros((64, 64), dtype=np.uint8), num_classes=6)
        a = random_prediction_set(rng, k=4, horizon=6)
        b = random_prediction_set(rng, k=4, horizon=6)
        base = wasserstein(a, b)
        mr = rescale(0.2)
        s = 0.2 / scene.rescale_factor
        scaled = wasserstein(
            transform_output(mr, a, scene), transform_output(mr, b, scene)
        )
        assert scaled == pytest.approx(s * base, abs=1e-12)
