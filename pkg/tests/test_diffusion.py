import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faceforge.diffusion import (
    GuidanceConfig,
    add_noise,
    build_schedule,
    cfg_combine,
    ddpm_sample,
    ddpm_step,
    pnm_sample,
    sample_timestep_grid,
)
from faceforge.errors import ParameterError

from .helpers import brute_force_cumprod, optimal_gaussian_denoiser


@pytest.fixture(scope="module")
def sched():
    return build_schedule()


class TestBuildSchedule:
    def test_default_terminal_alpha_bar(self, sched):
        assert sched.num_steps == 1000
        assert sched.alphas_cumprod[-1] < 0.01

    def test_two_step_product(self):
        s = build_schedule(T=2, beta_start=0.5, beta_end=0.5)
        assert np.allclose(s.alphas_cumprod, [0.5, 0.25])

    def test_matches_extended_precision_cumprod(self, sched):
        ref = brute_force_cumprod(sched.betas)
        assert np.max(np.abs(sched.alphas_cumprod - ref.astype(np.float64))) < 1e-12

    def test_invariants(self, sched):
        assert np.all(sched.betas > 0) and np.all(sched.betas < 1)
        assert np.all(np.diff(sched.betas) >= 0)
        assert np.all(np.diff(sched.alphas_cumprod) < 0)
        assert sched.alphas_cumprod[0] > 0.99

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(T=1),
            dict(beta_start=0.0),
            dict(beta_start=0.5, beta_end=0.1),
            dict(beta_end=1.0),
        ],
    )
    def test_invalid_ranges(self, kwargs):
        with pytest.raises(ParameterError):
            build_schedule(**kwargs)


class TestAddNoise:
    def test_zero_signal(self, sched):
        eps = np.random.default_rng(0).normal(size=(5, 5))
        out = add_noise(np.zeros((5, 5)), eps, 700, sched)
        assert np.array_equal(out, np.sqrt(1 - sched.alpha_bar(700)) * eps)

    def test_noiseless(self, sched):
        x0 = np.random.default_rng(1).normal(size=(4, 3))
        out = add_noise(x0, np.zeros((4, 3)), 10, sched)
        assert np.array_equal(out, np.sqrt(sched.alpha_bar(10)) * x0)

    def test_terminal_variance(self, sched):
        rng = np.random.default_rng(2)
        x0 = rng.normal(size=100_000)
        eps = rng.normal(size=100_000)
        out = add_noise(x0, eps, sched.num_steps, sched)
        assert abs(np.var(out) - 1.0) < 0.05

    @pytest.mark.parametrize("t", [1, 500, 1000])
    def test_forward_moments(self, sched, t):
        rng = np.random.default_rng(3)
        n = 100_000
        x0 = np.full(n, 0.7)
        out = add_noise(x0, rng.normal(size=n), t, sched)
        abar = sched.alpha_bar(t)
        se_mean = np.sqrt((1 - abar) / n)
        assert abs(np.mean(out) - np.sqrt(abar) * 0.7) < 3 * se_mean
        # var of sample variance ~ 2 sigma^4 / (n-1)
        se_var = np.sqrt(2.0 / (n - 1)) * (1 - abar)
        assert abs(np.var(out) - (1 - abar)) < 3 * se_var

    def test_shape_mismatch(self, sched):
        with pytest.raises(ParameterError):
            add_noise(np.zeros(3), np.zeros(4), 1, sched)


class TestCfgCombine:
    def test_worked_example(self):
        a = np.array([2.0])
        b = np.array([1.0])
        assert cfg_combine(a, b, 6.0)[0] == 7.0

    def test_identity_w1(self):
        a, b = np.random.default_rng(0).normal(size=(2, 8))
        assert cfg_combine(a, b, 1.0) is a

    def test_identity_w0(self):
        a, b = np.random.default_rng(0).normal(size=(2, 8))
        assert cfg_combine(a, b, 0.0) is b

    def test_shape_mismatch(self):
        with pytest.raises(ParameterError):
            cfg_combine(np.zeros(2), np.zeros(3), 2.0)

    @given(
        st.floats(-10, 10),
        st.floats(-10, 10),
        st.floats(-10, 10),
        st.floats(-5, 5),
        st.floats(0.1, 10),
    )
    @settings(max_examples=50)
    def test_linearity(self, a, b, c, w, scale):
        ea = np.array([a, c])
        eb = np.array([b, a])
        lhs = cfg_combine(scale * ea, scale * eb, w)
        rhs = scale * cfg_combine(ea, eb, w)
        assert np.all(np.abs(lhs - rhs) <= 1e-12 * max(1.0, np.abs(rhs).max()))


class TestDdpmStep:
    def test_final_step_reconstruction(self, sched):
        rng = np.random.default_rng(4)
        x0 = rng.normal(size=16)
        eps = rng.normal(size=16)
        x1 = add_noise(x0, eps, 1, sched)
        out = ddpm_step(x1, eps, 1, sched, np.zeros(16))
        assert np.allclose(out, x0, atol=1e-12)

    def test_shape_preserved(self, sched):
        x = np.zeros((2, 3, 4))
        out = ddpm_step(x, x, 500, sched, x)
        assert out.shape == x.shape

    def test_t_out_of_range(self, sched):
        x = np.zeros(3)
        with pytest.raises(ParameterError):
            ddpm_step(x, x, 0, sched, x)
        with pytest.raises(ParameterError):
            ddpm_step(x, x, 1001, sched, x)

    def test_nonzero_noise_at_final_step_rejected(self, sched):
        x = np.zeros(3)
        with pytest.raises(ParameterError):
            ddpm_step(x, x, 1, sched, np.ones(3))


MU, SIGMA2 = 0.3, 0.25


class TestGaussianOracle:
    """Both samplers driven by the closed-form optimal denoiser must recover
    the target Gaussian N(0.3, 0.25)."""

    def test_ddpm_chain_moments(self, sched):
        rng = np.random.default_rng(5)
        n = 10_000
        denoiser = optimal_gaussian_denoiser(MU, SIGMA2, sched)
        x_T = rng.normal(size=n)
        noise = [rng.normal(size=n) for _ in range(sched.num_steps - 1)]
        noise.append(np.zeros(n))
        out = ddpm_sample(denoiser, x_T, None, sched, noise)
        assert abs(np.mean(out) - MU) < 3 * np.sqrt(SIGMA2 / n) + 0.005
        assert abs(np.var(out) - SIGMA2) / SIGMA2 < 0.05

    def test_pnm_moments(self, sched):
        rng = np.random.default_rng(6)
        n = 10_000
        denoiser = optimal_gaussian_denoiser(MU, SIGMA2, sched)
        out = pnm_sample(
            denoiser,
            rng.normal(size=n),
            None,
            GuidanceConfig(scale=1.0, sampler_steps=100),
            sched,
        )
        assert abs(np.mean(out) - MU) < 0.02
        assert abs(np.var(out) - SIGMA2) / SIGMA2 < 0.05

    def test_pnm_vs_deterministic_ddpm_cross_check(self, sched):
        # Both deterministic samplers are monotone linear maps of x_T here, so
        # after standardizing each output set they must agree per sample.
        rng = np.random.default_rng(7)
        n = 2_000
        denoiser = optimal_gaussian_denoiser(MU, SIGMA2, sched)
        x_T = rng.normal(size=n)
        zeros = [np.zeros(n)] * sched.num_steps
        out_ddpm = ddpm_sample(denoiser, x_T.copy(), None, sched, zeros)
        out_pnm = pnm_sample(
            denoiser,
            x_T.copy(),
            None,
            GuidanceConfig(scale=1.0, sampler_steps=1000),
            sched,
        )
        za = (out_ddpm - out_ddpm.mean()) / out_ddpm.std()
        zb = (out_pnm - out_pnm.mean()) / out_pnm.std()
        assert np.max(np.abs(za - zb)) < 1e-2


class TestPnmSampler:
    def test_minimum_steps(self, sched):
        denoiser = optimal_gaussian_denoiser(MU, SIGMA2, sched)
        with pytest.raises(ParameterError):
            pnm_sample(
                denoiser,
                np.zeros(4),
                None,
                GuidanceConfig(scale=1.0, sampler_steps=4),
                sched,
            )

    def test_cfg_calls_and_shape(self, sched):
        calls = {"cond": 0, "null": 0}

        def denoiser(x, t, cond):
            calls["cond" if cond is not None else "null"] += 1
            return np.zeros_like(x)

        out = pnm_sample(
            denoiser,
            np.ones((3, 2)),
            "条件",
            GuidanceConfig(scale=6.0, sampler_steps=10),
            sched,
        )
        assert out.shape == (3, 2)
        assert calls["cond"] == calls["null"] > 0
        # 3 warmup steps with 4 evals each, then 7 multistep evals
        assert calls["cond"] == 3 * 4 + 7

    def test_determinism(self, sched):
        denoiser = optimal_gaussian_denoiser(MU, SIGMA2, sched)
        x_T = np.random.default_rng(8).normal(size=32)
        g = GuidanceConfig(scale=1.0, sampler_steps=25)
        a = pnm_sample(denoiser, x_T.copy(), None, g, sched)
        b = pnm_sample(denoiser, x_T.copy(), None, g, sched)
        assert np.array_equal(a, b)


def test_timestep_grid_monotone():
    grid = sample_timestep_grid(1000, 100)
    assert grid[0] == 1000 and grid[-1] == 1
    assert np.all(np.diff(grid) < 0)
    with pytest.raises(ParameterError):
        sample_timestep_grid(1000, 0)
