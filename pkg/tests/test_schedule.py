import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from distill_lab.errors import UnsupportedScheduleError
from distill_lab.schedule import cosine_alpha_bar, forward_diffuse, make_schedule


def test_cosine_invariants():
    s = make_schedule(1000, "cosine")
    assert torch.all(s.alpha[1:] <= s.alpha[:-1])
    assert torch.all(s.sigma[1:] >= s.sigma[:-1])
    assert torch.all((s.alpha**2 + s.sigma**2 - 1.0).abs() < 1e-12)
    assert torch.all(s.alpha[1:] < s.alpha[:-1])  # strictly decreasing


def test_linear_boundary():
    s = make_schedule(2, "linear")
    assert float(s.alpha[0]) >= 1 - 1e-3
    assert float(s.sigma[0]) <= 1e-1


def test_cosine_midpoint_matches_direct_formula():
    # independent evaluation of the closed form at t=500, T=1000
    T, t = 1000, 500
    s = make_schedule(T, "cosine")
    want = math.sqrt(cosine_alpha_bar(t / T))
    assert abs(float(s.alpha[t]) - want) < 1e-12


def test_bad_args():
    with pytest.raises(ValueError):
        make_schedule(1, "cosine")
    with pytest.raises(UnsupportedScheduleError):
        make_schedule(100, "quadratic")


@given(st.sampled_from(["linear", "cosine"]), st.integers(min_value=2, max_value=400))
@settings(max_examples=20, deadline=None)
def test_schedule_invariants_property(kind, T):
    s = make_schedule(T, kind)
    assert torch.all((s.alpha**2 + s.sigma**2 - 1.0).abs() < 1e-12)
    assert torch.all(s.alpha[1:] <= s.alpha[:-1] + 1e-15)
    assert torch.all(s.alpha > 0)
    assert float(s.alpha[0]) >= 1 - 1e-3


def test_forward_diffuse_near_identity_at_t0():
    s = make_schedule(100, "linear")
    x0 = torch.randn(32, generator=torch.Generator().manual_seed(0))
    eps = torch.randn(32, generator=torch.Generator().manual_seed(1))
    x_t = forward_diffuse(x0, 0, eps, s)
    assert torch.all((x_t - x0).abs() <= float(s.sigma[0]) * (eps.abs() + x0.abs()) + 1e-6)


def test_forward_diffuse_zero_noise():
    s = make_schedule(50, "cosine")
    x0 = torch.randn(4, 7, generator=torch.Generator().manual_seed(2))
    for t in [0, 10, 49]:
        x_t = forward_diffuse(x0, t, torch.zeros_like(x0), s)
        a = float(s.alpha[t])
        assert torch.allclose(x_t, a * x0)


def test_forward_diffuse_variance_monte_carlo():
    s = make_schedule(200, "cosine")
    g = torch.Generator().manual_seed(3)
    x0 = torch.full((10_000,), 0.7)
    for t in [20, 100, 180]:
        eps = torch.randn(10_000, generator=g)
        x_t = forward_diffuse(x0, t, eps, s)
        want = float(s.sigma[t]) ** 2
        got = float(x_t.var())
        assert abs(got - want) / want < 0.05


def test_forward_diffuse_shape_mismatch():
    s = make_schedule(10, "linear")
    with pytest.raises(ValueError):
        forward_diffuse(torch.zeros(3), 1, torch.zeros(4), s)
