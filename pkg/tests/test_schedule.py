import numpy as np
import pytest
import torch

from drag_lab.schedule import forward_noise, make_schedule


def test_linear_endpoints():
    sched = make_schedule(1000)
    assert sched.betas[0] == pytest.approx(1e-4)
    assert sched.betas[-1] == pytest.approx(2e-2)
    assert sched.num_steps == 1000


def test_alpha_bar_strictly_decreasing():
    sched = make_schedule(500)
    assert np.all(np.diff(sched.alpha_bar) < 0)
    assert sched.alpha_bar_at(0) == 1.0
    assert sched.alpha_bar_at(1) == pytest.approx(1.0 - 1e-4)


def test_zero_steps_rejected():
    with pytest.raises(ValueError):
        make_schedule(0)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        make_schedule(10, kind="cosine")


def test_t_equals_one_stays_close_to_x0():
    sched = make_schedule(1000)
    gen = torch.Generator().manual_seed(0)
    x0 = torch.rand((2, 3, 4, 8, 8), generator=gen) * 2 - 1  # unit range
    noise = torch.rand(x0.shape, generator=gen) * 2 - 1      # unit noise
    x1 = forward_noise(x0, 1, noise, sched)
    assert (x1 - x0).abs().max().item() < 0.02


def test_zero_x0_gives_scaled_noise_exactly():
    sched = make_schedule(100)
    noise = torch.randn((1, 3, 2, 4, 4), generator=torch.Generator().manual_seed(1))
    t = 40
    x_t = forward_noise(torch.zeros_like(noise), t, noise, sched)
    coeff = float(np.sqrt(1.0 - sched.alpha_bar_at(t)))
    torch.testing.assert_close(x_t, coeff * noise)


def test_linearity_in_inputs():
    sched = make_schedule(100)
    gen = torch.Generator().manual_seed(2)
    a = torch.randn((8,), generator=gen)
    b = torch.randn((8,), generator=gen)
    t = 60
    lhs = forward_noise(2 * a, t, 3 * b, sched)
    rhs = (2 * np.sqrt(sched.alpha_bar_at(t)) * a
           + 3 * np.sqrt(1 - sched.alpha_bar_at(t)) * b)
    torch.testing.assert_close(lhs, rhs.float())


def test_out_of_range_t_rejected():
    sched = make_schedule(10)
    x = torch.zeros(4)
    for bad in (0, 11, -3):
        with pytest.raises(ValueError):
            forward_noise(x, bad, x, sched)
    with pytest.raises(ValueError):
        forward_noise(x, x, x, sched)  # wrong t tensor shape


def test_shape_mismatch_rejected():
    sched = make_schedule(10)
    with pytest.raises(ValueError):
        forward_noise(torch.zeros(4), 1, torch.zeros(5), sched)


@pytest.mark.parametrize("t_frac", [0.0, 0.5, 1.0])
def test_monte_carlo_moments(t_frac):
    sched = make_schedule(200)
    t = max(1, int(round(t_frac * sched.num_steps)))
    n = 10_000
    gen = torch.Generator().manual_seed(77)
    sigma0 = 0.5
    x0 = torch.randn((n,), generator=gen) * sigma0
    noise = torch.randn((n,), generator=gen)
    x_t = forward_noise(x0, torch.full((n,), t), noise, sched)
    ab = sched.alpha_bar_at(t)
    want_var = ab * sigma0**2 + (1 - ab)
    se_mean = np.sqrt(want_var / n)
    se_var = want_var * np.sqrt(2.0 / (n - 1))
    assert abs(x_t.mean().item() - 0.0) < 3 * se_mean
    assert abs(x_t.var(unbiased=True).item() - want_var) < 3 * se_var


def test_batched_t_matches_scalar_t():
    sched = make_schedule(50)
    gen = torch.Generator().manual_seed(3)
    x0 = torch.randn((3, 2, 4), generator=gen)
    noise = torch.randn_like(x0)
    batched = forward_noise(x0, torch.tensor([5, 20, 50]), noise, sched)
    for i, t in enumerate([5, 20, 50]):
        torch.testing.assert_close(batched[i], forward_noise(x0[i:i + 1], t,
                                                             noise[i:i + 1], sched)[0])
