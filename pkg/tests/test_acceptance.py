"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
The two long-running criteria (single-clip overfit, ablation grid) train real
models on CPU; expected wall time is ~5 min and ~45 min respectively.
"""

import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
import torch

from drag_lab.config import Config, DataConfig, ScheduleConfig, TrainConfig
from drag_lab.corpus import generate_corpus
from drag_lab.denoiser import DenoiserConfig, VideoDenoiser
from drag_lab.evaluation import evaluate, objmc, track_centroid
from drag_lab.guidance import GuidanceEncoder
from drag_lab.model import build_model
from drag_lab.representation import compute_incircle, rasterize_gaussian
from drag_lab.sampling import GenerationRequest, sample_video
from drag_lab.schedule import forward_noise, make_schedule
from drag_lab.synthetic import generate_clip, random_scene
from drag_lab.training import (
    init_trainer,
    load_model,
    masked_mse_loss,
    run_training,
    train_step,
)

PINNED = json.loads((Path(__file__).parent / "data" / "pinned.json").read_text())


@contextmanager
def criterion(number, description):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"\n[criterion {number:2d}] FAIL — {description} "
              f"({time.monotonic() - start:.1f}s)")
        raise
    print(f"\n[criterion {number:2d}] PASS — {description} "
          f"({time.monotonic() - start:.1f}s)")


# --------------------------------------------------------------------------
# 1. Incircle oracle equivalence
# --------------------------------------------------------------------------

def exhaustive_4x4_oracle():
    """Vectorized brute force over all 65,536 4x4 masks, integer distances."""
    cells = np.array([(r, c) for r in range(4) for c in range(4)])
    pair_d2 = ((cells[:, None, :] - cells[None, :, :]) ** 2).sum(-1)
    border = np.minimum.reduce([cells[:, 0] + 1, cells[:, 1] + 1,
                                4 - cells[:, 0], 4 - cells[:, 1]])
    border2 = border ** 2
    codes = np.arange(1, 1 << 16, dtype=np.uint32)
    masks = ((codes[:, None] >> np.arange(16)) & 1).astype(bool)
    results = np.zeros((len(codes), 3), dtype=np.int64)  # row, col, radius^2
    big = 1 << 20
    for lo in range(0, len(codes), 4096):
        chunk = masks[lo:lo + 4096]
        to_bg = np.where(~chunk[:, None, :], pair_d2[None], big).min(axis=2)
        d2 = np.minimum(to_bg, border2[None])
        d2 = np.where(chunk, d2, -1)
        arg = d2.argmax(axis=1)  # first max in row-major order = tie-break
        rows, cols = np.divmod(arg, 4)
        results[lo:lo + 4096, 0] = rows
        results[lo:lo + 4096, 1] = cols
        results[lo:lo + 4096, 2] = d2[np.arange(len(chunk)), arg]
    return codes, masks, results


def test_criterion_01_incircle_oracle_equivalence(rng):
    with criterion(1, "incircle matches brute force on all 4x4 masks and "
                      "200 random 32x32 masks"):
        start = time.monotonic()
        codes, masks, expected = exhaustive_4x4_oracle()
        for i in range(len(codes)):
            circle = compute_incircle(masks[i].reshape(4, 4))
            row, col, rad2 = expected[i]
            assert circle.center == (float(col), float(row)), codes[i]
            assert abs(circle.radius - math.sqrt(rad2)) < 1e-9, codes[i]
        from tests.test_incircle import incircle_oracle, random_mask

        for _ in range(200):
            grid = random_mask(rng, 32, 32)
            circle = compute_incircle(grid)
            center, radius = incircle_oracle(grid)
            assert circle.center == center
            assert abs(circle.radius - radius) < 1e-9
        assert time.monotonic() - start < 60.0, "runtime budget exceeded"


# --------------------------------------------------------------------------
# 2. Gaussian representation
# --------------------------------------------------------------------------

def test_criterion_02_gaussian_representation(rng):
    with criterion(2, "gaussian center value 1.0, exp(-4.5) at distance r, "
                      "radial monotonicity over 1000 draws"):
        heat = rasterize_gaussian((16, 16), radius=6.0, height=33, width=33)
        assert heat[16, 16] == pytest.approx(1.0, abs=1e-12)
        assert heat[16, 22] == pytest.approx(math.exp(-4.5), abs=1e-9)
        for _ in range(1000):
            h, w = 24, 24
            cx, cy = rng.uniform(-4, 27, size=2)
            radius = rng.uniform(1.0, 10.0)
            heat = rasterize_gaussian((cx, cy), radius, h, w)
            ccx = min(max(cx, 0.0), w - 1.0)
            ccy = min(max(cy, 0.0), h - 1.0)
            ys, xs = np.mgrid[0:h, 0:w]
            d2 = (xs - ccx) ** 2 + (ys - ccy) ** 2
            order = np.argsort(d2.ravel(), kind="stable")
            values = heat.ravel()[order]
            assert np.all(np.diff(values) <= 1e-15)


# --------------------------------------------------------------------------
# 3. Masked-loss gradient support
# --------------------------------------------------------------------------

def test_criterion_03_masked_loss_gradient_support(rng):
    with criterion(3, "central differences: <1e-6 at 50 out-of-mask pixels, "
                      "1e-3 relative in-mask"):
        gen = torch.Generator().manual_seed(42)
        eps = torch.randn(1, 3, 4, 8, 8, generator=gen, dtype=torch.float64)
        eps_hat = torch.randn(1, 3, 4, 8, 8, generator=gen, dtype=torch.float64)
        mask = (torch.rand(1, 4, 8, 8, generator=gen) < 0.4).double()
        eps_hat.requires_grad_(True)
        masked_mse_loss(eps, eps_hat, mask).backward()
        autograd = eps_hat.grad.clone()
        eps_hat = eps_hat.detach()

        def fd_at(idx, h=1e-6):
            with torch.no_grad():
                eps_hat[idx] += h
                up = masked_mse_loss(eps, eps_hat, mask).item()
                eps_hat[idx] -= 2 * h
                down = masked_mse_loss(eps, eps_hat, mask).item()
                eps_hat[idx] += h
            return (up - down) / (2 * h)

        outside = np.argwhere(mask.numpy()[0] == 0)
        picks = outside[rng.choice(len(outside), size=50, replace=False)]
        for frame, row, col in picks:
            idx = (0, int(rng.integers(3)), int(frame), int(row), int(col))
            assert abs(fd_at(idx)) < 1e-6
        inside = np.argwhere(mask.numpy()[0] == 1)
        picks = inside[rng.choice(len(inside), size=25, replace=False)]
        for frame, row, col in picks:
            idx = (0, int(rng.integers(3)), int(frame), int(row), int(col))
            fd = fd_at(idx)
            ad = autograd[idx].item()
            assert fd == pytest.approx(ad, rel=1e-3, abs=1e-9)


# --------------------------------------------------------------------------
# 4. Guidance encoder shape contract
# --------------------------------------------------------------------------

def test_criterion_04_guidance_encoder_resolution():
    with criterion(4, "encoder output is exactly 1/8 of 32x32 and 64x64 inputs"):
        torch.manual_seed(0)
        for channels in (1, 16):
            encoder = GuidanceEncoder(channels, 32)
            for size in (32, 64):
                out = encoder(torch.randn(1, channels, 2, size, size))
                assert out.shape[-2:] == (size // 8, size // 8)


# --------------------------------------------------------------------------
# 5. Forward-noising statistics
# --------------------------------------------------------------------------

def test_criterion_05_forward_noising_statistics():
    with criterion(5, "empirical mean/variance within 3 SE of closed form at "
                      "t in {1, T/2, T}"):
        schedule = make_schedule(1000)
        n = 10_000
        sigma0 = 0.7
        mu0 = 0.3
        for t in (1, 500, 1000):
            gen = torch.Generator().manual_seed(1000 + t)
            x0 = torch.randn((n,), generator=gen) * sigma0 + mu0
            noise = torch.randn((n,), generator=gen)
            x_t = forward_noise(x0, torch.full((n,), t), noise, schedule)
            ab = schedule.alpha_bar_at(t)
            want_mean = math.sqrt(ab) * mu0
            want_var = ab * sigma0**2 + (1 - ab)
            se_mean = math.sqrt(want_var / n)
            se_var = want_var * math.sqrt(2.0 / (n - 1))
            assert abs(x_t.mean().item() - want_mean) < 3 * se_mean, t
            assert abs(x_t.var(unbiased=True).item() - want_var) < 3 * se_var, t


# --------------------------------------------------------------------------
# 6. Zero-guidance equivalence
# --------------------------------------------------------------------------

def test_criterion_06_zero_guidance_equivalence():
    with criterion(6, "zero-initialized injections: conditioned output "
                      "bit-identical to unconditioned"):
        for site in ("encoder", "decoder"):
            config = Config(
                data=DataConfig(length=4, height=32, width=32),
                model=DenoiserConfig(base_channels=16,
                                     channel_multipliers=(1, 2, 2),
                                     time_embed_dim=32, feature_channels=8,
                                     norm_groups=4, injection_site=site))
            model = build_model(config, seed=3)
            gen = torch.Generator().manual_seed(7)
            x_t = torch.randn(1, 3, 4, 32, 32, generator=gen)
            ff = torch.rand(1, 3, 32, 32, generator=gen)
            ent = torch.randn(1, 8, 4, 32, 32, generator=gen)
            gauss = torch.rand(1, 1, 4, 32, 32, generator=gen)
            with torch.no_grad():
                conditioned = model.predict_noise(x_t, 2, ff, ent, gauss)
                unconditioned = model.denoiser(x_t, 2, ff)
            assert torch.equal(conditioned, unconditioned), site


# --------------------------------------------------------------------------
# 7. Tracker fidelity
# --------------------------------------------------------------------------

def test_criterion_07_tracker_fidelity():
    with criterion(7, "centroid tracker within 1 px of analytic trajectories "
                      "on 50 oracle clips"):
        worst = 0.0
        for seed in range(50):
            clip = generate_clip(random_scene(5000 + seed, length=8, height=48,
                                              width=48, n_shapes=2))
            for k in range(clip.masks.shape[0]):
                tracked = track_centroid(clip.frames, clip.masks[k, 0])
                err = float(np.linalg.norm(tracked - clip.trajectories[k],
                                           axis=1).max())
                worst = max(worst, err)
        assert worst <= 1.0, f"worst tracker error {worst:.3f} px"


# --------------------------------------------------------------------------
# 8. ObjMC unit contract
# --------------------------------------------------------------------------

def test_criterion_08_objmc_unit_contract():
    with criterion(8, "identical trajectories -> 0; constant (3,4) offset -> 5"):
        traj = np.random.default_rng(8).uniform(0, 64, (14, 2))
        assert objmc({"e": traj}, {"e": traj.copy()}).mean_objmc == 0.0
        shifted = objmc({"e": traj + np.array([3.0, 4.0])}, {"e": traj})
        assert shifted.mean_objmc == 5.0


# --------------------------------------------------------------------------
# 9. Overfit smoke test
# --------------------------------------------------------------------------

def overfit_config(steps, seed=0):
    return Config(data=DataConfig(length=8, height=32, width=32),
                  schedule=ScheduleConfig(T=200),
                  train=TrainConfig(steps=steps, batch_size=2,
                                    learning_rate=1e-3, seed=seed,
                                    checkpoint_every=0))


def test_criterion_09_overfit_smoke(tmp_path):
    pins = PINNED["overfit"]
    with criterion(9, f"single-clip overfit: loss <10% of initial and ObjMC "
                      f"< {pins['objmc_threshold']} px"):
        start = time.monotonic()
        steps = pins["steps"]
        assert steps <= 2000
        corpus = generate_corpus(1, seed=11, length=8, height=32, width=32,
                                 n_shapes=2)
        state = init_trainer(overfit_config(steps), corpus)
        losses = [train_step(state) for _ in range(steps)]
        initial = float(np.mean(losses[:10]))
        final = float(np.mean(losses[-200:]))
        print(f"\n  overfit loss: initial {initial:.4f} -> final {final:.4f} "
              f"(ratio {final / initial:.4f})")
        assert final < 0.1 * initial

        clip = corpus[0]
        request = GenerationRequest(first_frame=clip.frames[0],
                                    entities=clip.annotation.entities, seed=1)
        result = sample_video(request, (state.config, state.model))
        predicted = {e.entity_id: track_centroid(result.frames, e.mask)
                     for e in clip.annotation.entities}
        reference = {e.entity_id: e.trajectory
                     for e in clip.annotation.entities}
        report = objmc(predicted, reference)
        print(f"  overfit ObjMC: {report.mean_objmc:.3f} px "
              f"(pinned threshold {pins['objmc_threshold']})")
        assert report.mean_objmc < pins["objmc_threshold"]
        elapsed = time.monotonic() - start
        assert elapsed < 900, f"runtime {elapsed:.0f}s exceeds 15 min target"


# --------------------------------------------------------------------------
# 10. Directional ablation
# --------------------------------------------------------------------------

ABLATION_CELLS = {
    "entity+gaussian": {"use_entity": True, "use_gaussian": True},
    "entity": {"use_entity": True, "use_gaussian": False},
    "gaussian": {"use_entity": False, "use_gaussian": True},
    "neither": {"use_entity": False, "use_gaussian": False},
}


def ablation_config(flags, seed):
    pins = PINNED["ablation"]
    return Config(data=DataConfig(length=8, height=32, width=32),
                  schedule=ScheduleConfig(T=200),
                  train=TrainConfig(steps=pins["train_steps"], batch_size=2,
                                    learning_rate=1e-3, seed=seed,
                                    checkpoint_every=0, **flags))


def test_criterion_10_directional_ablation(tmp_path):
    pins = PINNED["ablation"]
    with criterion(10, "ablation grid medians: entity+gaussian <= entity-only "
                       "and <= neither"):
        start = time.monotonic()
        train_corpus = generate_corpus(pins["train_clips"], seed=300, length=8,
                                       height=32, width=32, n_shapes=2)
        eval_corpus = generate_corpus(20, seed=800, length=8, height=32,
                                      width=32, n_shapes=2)
        medians = {}
        for name, flags in ABLATION_CELLS.items():
            scores = []
            for seed in range(3):
                result = run_training(ablation_config(flags, seed), train_corpus,
                                      tmp_path / f"{name}_{seed}")
                summary = evaluate(result.checkpoint_path, eval_corpus,
                                   steps=pins["eval_steps"], seed=seed)
                scores.append(summary["mean_objmc"])
                print(f"\n  cell {name} seed {seed}: ObjMC "
                      f"{summary['mean_objmc']:.3f} px "
                      f"({(time.monotonic() - start) / 60:.1f} min elapsed)")
            medians[name] = float(np.median(scores))
        print("\n  ablation medians (px):")
        for name, value in medians.items():
            print(f"    {name:16s} {value:7.3f}   (pinned "
                  f"{pins['medians'][name]:.3f})")
        assert medians["entity+gaussian"] <= medians["entity"]
        assert medians["entity+gaussian"] <= medians["neither"]
        elapsed = time.monotonic() - start
        print(f"  grid runtime: {elapsed / 60:.1f} min")
        assert elapsed < 7200, "runtime exceeds 2h target"


# --------------------------------------------------------------------------
# 11. Determinism / resume
# --------------------------------------------------------------------------

def test_criterion_11_determinism_and_resume(tmp_path):
    with criterion(11, "fixed-seed loss curves bit-exact; resume matches "
                       "uninterrupted run"):
        from tests.test_training import tiny_config

        corpus = generate_corpus(2, seed=5, length=4, height=32, width=32,
                                 n_shapes=1)
        a = run_training(tiny_config(steps=6), corpus, tmp_path / "a")
        b = run_training(tiny_config(steps=6), corpus, tmp_path / "b")
        assert a.losses == b.losses
        half = run_training(tiny_config(steps=3, checkpoint_every=3), corpus,
                            tmp_path / "half")
        resumed = run_training(tiny_config(steps=6), corpus, tmp_path / "res",
                               resume_from=half.checkpoint_path)
        assert resumed.losses == a.losses
        _, model_a = load_model(a.checkpoint_path)
        _, model_r = load_model(resumed.checkpoint_path)
        for key, value in model_a.state_dict().items():
            assert torch.equal(value, model_r.state_dict()[key]), key
