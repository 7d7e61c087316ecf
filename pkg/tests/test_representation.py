import math

import numpy as np
import pytest

from drag_lab.representation import (
    Trajectory,
    build_representation_sequences,
    insert_entity_embedding,
    rasterize_gaussian,
)


class TestRasterizeGaussian:
    def test_center_value_is_one(self):
        heat = rasterize_gaussian((10, 6), radius=4.0, height=16, width=20)
        assert heat[6, 10] == pytest.approx(1.0, abs=1e-12)

    def test_value_at_radius(self):
        # sigma = r/3, so at distance r the value is exp(-r^2 / (2 r^2 / 9)) = exp(-4.5)
        heat = rasterize_gaussian((10, 10), radius=5.0, height=32, width=32)
        assert heat[10, 15] == pytest.approx(math.exp(-4.5), abs=1e-9)
        assert heat[15, 10] == pytest.approx(math.exp(-4.5), abs=1e-9)

    def test_out_of_frame_center_clamped(self):
        clamped = rasterize_gaussian((-5, 10), radius=3.0, height=32, width=32)
        at_edge = rasterize_gaussian((0, 10), radius=3.0, height=32, width=32)
        np.testing.assert_array_equal(clamped, at_edge)

    def test_nonpositive_radius_rejected(self):
        with pytest.raises(ValueError):
            rasterize_gaussian((4, 4), radius=0.0, height=8, width=8)
        with pytest.raises(ValueError):
            rasterize_gaussian((4, 4), radius=-1.0, height=8, width=8)

    def test_radially_monotone_and_symmetric(self, rng):
        for _ in range(25):
            cx, cy = rng.integers(0, 21, size=2)
            radius = rng.uniform(1.0, 8.0)
            heat = rasterize_gaussian((cx, cy), radius, height=21, width=21)
            ys, xs = np.mgrid[0:21, 0:21]
            d2 = (xs - cx) ** 2 + (ys - cy) ** 2
            order = np.argsort(d2.ravel())
            values = heat.ravel()[order]
            assert np.all(np.diff(values) <= 1e-15)
            # reflection about an integer center maps grid points to grid points
            span = min(cx, 20 - cx)
            np.testing.assert_allclose(
                heat[:, cx - span:cx + span + 1],
                heat[:, cx - span:cx + span + 1][:, ::-1], atol=1e-15)


class TestInsertEmbedding:
    def test_center_pixel_equals_embedding(self):
        canvas = np.zeros((8, 8, 3), dtype=np.float32)
        emb = np.array([1.0, -2.0, 3.5], dtype=np.float32)
        out = insert_entity_embedding(canvas, emb, (4, 3), radius=2.0)
        np.testing.assert_array_equal(out[3, 4], emb)

    def test_outside_disk_unchanged(self):
        canvas = np.full((9, 9, 2), 7.0, dtype=np.float32)
        emb = np.zeros(2, dtype=np.float32)
        out = insert_entity_embedding(canvas, emb, (4, 4), radius=2.0)
        assert np.all(out[4, 7] == 7.0)  # distance 3 = radius + 1
        assert np.all(out[4, 6] == 0.0)  # distance 2 = radius, inclusive

    def test_overlap_resolved_by_insertion_order(self):
        canvas = np.zeros((8, 12, 1), dtype=np.float32)
        e1 = np.array([1.0], dtype=np.float32)
        e2 = np.array([2.0], dtype=np.float32)
        out = insert_entity_embedding(canvas, e1, (4, 4), radius=3.0)
        out = insert_entity_embedding(out, e2, (6, 4), radius=3.0)
        assert out[4, 5, 0] == 2.0  # inside both disks -> later entity wins
        assert out[4, 2, 0] == 1.0  # only in the first disk

    def test_channel_mismatch_rejected(self):
        canvas = np.zeros((4, 4, 3), dtype=np.float32)
        with pytest.raises(ValueError):
            insert_entity_embedding(canvas, np.zeros(2), (1, 1), radius=1.0)

    def test_input_canvas_not_mutated(self):
        canvas = np.zeros((6, 6, 1), dtype=np.float32)
        insert_entity_embedding(canvas, np.ones(1), (3, 3), radius=2.0)
        assert np.all(canvas == 0.0)


class TestBuildSequences:
    def test_static_entity_all_frames_identical(self):
        traj = Trajectory("a", np.tile([5.0, 5.0], (6, 1)))
        emb = np.arange(4, dtype=np.float32)
        ent, gauss = build_representation_sequences(
            [(emb, traj, 2.0)], length=6, height=16, width=16, channels=4)
        for i in range(1, 6):
            np.testing.assert_array_equal(ent[i], ent[0])
            np.testing.assert_array_equal(gauss[i], gauss[0])

    def test_zero_entities_all_zero(self):
        ent, gauss = build_representation_sequences([], 4, 8, 8, 3)
        assert ent.shape == (4, 8, 8, 3) and not ent.any()
        assert gauss.shape == (4, 8, 8) and not gauss.any()

    def test_disjoint_entities_support_is_additive(self):
        t1 = Trajectory("a", np.tile([4.0, 4.0], (3, 1)))
        t2 = Trajectory("b", np.tile([20.0, 20.0], (3, 1)))
        e1 = np.ones(2, dtype=np.float32)
        e2 = np.full(2, 2.0, dtype=np.float32)
        both, _ = build_representation_sequences(
            [(e1, t1, 3.0), (e2, t2, 3.0)], 3, 28, 28, 2)
        only1, _ = build_representation_sequences([(e1, t1, 3.0)], 3, 28, 28, 2)
        only2, _ = build_representation_sequences([(e2, t2, 3.0)], 3, 28, 28, 2)
        for i in range(3):
            count = lambda m: int(np.count_nonzero(np.any(m != 0, axis=-1)))
            assert count(both[i]) == count(only1[i]) + count(only2[i])

    def test_support_is_union_of_disks(self, rng):
        length, height, width = 4, 24, 24
        entities = []
        expected = np.zeros((length, height, width), dtype=bool)
        for k in range(3):
            pts = rng.uniform(2, 21, size=(length, 2))
            radius = float(rng.uniform(1.5, 4.0))
            emb = rng.standard_normal(2).astype(np.float32) + 3.0
            entities.append((emb, Trajectory(str(k), pts), radius))
            ys, xs = np.mgrid[0:height, 0:width]
            for i in range(length):
                d2 = (xs - pts[i, 0]) ** 2 + (ys - pts[i, 1]) ** 2
                expected[i] |= d2 <= radius * radius
        ent, _ = build_representation_sequences(entities, length, height, width, 2)
        support = np.any(ent != 0, axis=-1)
        np.testing.assert_array_equal(support, expected)

    def test_gaussians_combine_by_max(self):
        t1 = Trajectory("a", np.tile([8.0, 8.0], (2, 1)))
        t2 = Trajectory("b", np.tile([12.0, 8.0], (2, 1)))
        emb = np.ones(1, dtype=np.float32)
        _, both = build_representation_sequences(
            [(emb, t1, 3.0), (emb, t2, 3.0)], 2, 20, 20, 1)
        _, g1 = build_representation_sequences([(emb, t1, 3.0)], 2, 20, 20, 1)
        _, g2 = build_representation_sequences([(emb, t2, 3.0)], 2, 20, 20, 1)
        np.testing.assert_array_equal(both, np.maximum(g1, g2))

    def test_length_mismatch_rejected(self):
        traj = Trajectory("a", np.tile([5.0, 5.0], (4, 1)))
        with pytest.raises(ValueError):
            build_representation_sequences(
                [(np.ones(2, dtype=np.float32), traj, 2.0)], 6, 8, 8, 2)
