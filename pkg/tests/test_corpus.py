import numpy as np
import pytest

from drag_lab.corpus import (
    FORMAT_VERSION,
    clip_to_corpus,
    generate_corpus,
    make_training_sample,
    read_clip,
    read_corpus,
    write_clip,
    write_corpus,
)
from drag_lab.errors import CorpusFormatError, UnsupportedVersionError
from drag_lab.representation import compute_incircle
from drag_lab.synthetic import generate_clip, random_scene


@pytest.fixture
def small_corpus():
    return generate_corpus(n_clips=2, seed=3, length=4, height=32, width=32)


def test_round_trip(tmp_path, small_corpus):
    write_corpus(small_corpus, tmp_path)
    restored = read_corpus(tmp_path)
    assert [c.clip_id for c in restored] == [c.clip_id for c in small_corpus]
    for a, b in zip(small_corpus, restored):
        np.testing.assert_array_equal(a.frames, b.frames)
        assert a.annotation.frames == b.annotation.frames
        for ea, eb in zip(a.annotation.entities, b.annotation.entities):
            assert ea.entity_id == eb.entity_id
            np.testing.assert_array_equal(ea.mask, eb.mask)
            np.testing.assert_array_equal(ea.trajectory, eb.trajectory)
            np.testing.assert_array_equal(ea.frame_masks, eb.frame_masks)


def test_truncated_file_rejected(tmp_path, small_corpus):
    write_corpus(small_corpus, tmp_path)
    path = tmp_path / f"{small_corpus[0].clip_id}.drgl"
    data = path.read_bytes()
    path.write_bytes(data[:len(data) // 2])
    with pytest.raises(CorpusFormatError) as err:
        read_clip(path)
    assert err.value.offset is not None


def test_bad_magic_rejected(tmp_path, small_corpus):
    write_corpus(small_corpus, tmp_path)
    path = tmp_path / f"{small_corpus[0].clip_id}.drgl"
    data = bytearray(path.read_bytes())
    data[:4] = b"NOPE"
    path.write_bytes(bytes(data))
    with pytest.raises(CorpusFormatError, match="magic"):
        read_clip(path)


def test_version_mismatch_rejected(tmp_path, small_corpus):
    write_corpus(small_corpus, tmp_path)
    path = tmp_path / f"{small_corpus[0].clip_id}.drgl"
    data = bytearray(path.read_bytes())
    data[4:8] = (FORMAT_VERSION + 1).to_bytes(4, "little")
    path.write_bytes(bytes(data))
    with pytest.raises(UnsupportedVersionError):
        read_clip(path)


def test_empty_directory_rejected(tmp_path):
    with pytest.raises(CorpusFormatError):
        read_corpus(tmp_path)


def test_write_is_atomic_no_temp_left(tmp_path, small_corpus):
    write_corpus(small_corpus, tmp_path)
    leftovers = [p for p in tmp_path.iterdir() if p.name.startswith(".")]
    assert leftovers == []


class TestMakeTrainingSample:
    def make_inputs(self, seed=11, length=6):
        clip = generate_clip(random_scene(seed, length=length, height=32, width=32,
                                          n_shapes=2))
        embeddings = np.random.default_rng(0).standard_normal(
            (2, 8)).astype(np.float32)
        return clip, embeddings

    def test_static_entity_frames_identical(self):
        from drag_lab.synthetic import LinearMotion, SceneSpec, ShapeSpec

        shape = ShapeSpec("disk", (0.9, 0.1, 0.1), 8.0, (16.0, 16.0),
                          LinearMotion((0.0, 0.0)))
        clip = generate_clip(SceneSpec(6, 32, 32, (shape,)))
        emb = np.ones((1, 4), dtype=np.float32)
        sample = make_training_sample(clip.frames, clip.first_frame_masks,
                                      clip.trajectories, emb, clip.masks)
        for i in range(1, 6):
            np.testing.assert_array_equal(sample.entity_rep[i], sample.entity_rep[0])

    def test_trajectory_anchored_to_incircle_center(self):
        clip, embeddings = self.make_inputs()
        offset_trajs = clip.trajectories + np.array([1.25, -0.5])
        sample = make_training_sample(clip.frames, clip.first_frame_masks,
                                      offset_trajs, embeddings, clip.masks)
        for k in range(2):
            circle = compute_incircle(clip.first_frame_masks[k])
            np.testing.assert_allclose(sample.gt_trajectories[k, 0], circle.center)
            # translation preserves the per-frame deltas
            np.testing.assert_allclose(np.diff(sample.gt_trajectories[k], axis=0),
                                       np.diff(offset_trajs[k], axis=0))

    def test_loss_mask_is_union_of_frame_regions(self):
        clip, embeddings = self.make_inputs()
        sample = make_training_sample(clip.frames, clip.first_frame_masks,
                                      clip.trajectories, embeddings, clip.masks)
        np.testing.assert_array_equal(sample.loss_mask, clip.masks.any(axis=0))

    def test_corpus_clip_reconstructs_training_sample(self, tmp_path):
        clip, embeddings = self.make_inputs()
        corpus_clip = clip_to_corpus(clip, "clip_00000")
        write_clip(tmp_path / "clip_00000.drgl", corpus_clip)
        restored = read_clip(tmp_path / "clip_00000.drgl")
        masks = np.stack([e.mask for e in restored.annotation.entities])
        trajs = np.stack([e.trajectory for e in restored.annotation.entities])
        frame_masks = np.stack([e.frame_masks for e in restored.annotation.entities])
        a = make_training_sample(clip.frames, clip.first_frame_masks,
                                 clip.trajectories, embeddings, clip.masks)
        b = make_training_sample(restored.frames, masks, trajs, embeddings,
                                 frame_masks)
        np.testing.assert_array_equal(a.entity_rep, b.entity_rep)
        np.testing.assert_array_equal(a.gaussian_rep, b.gaussian_rep)
        np.testing.assert_array_equal(a.loss_mask, b.loss_mask)
