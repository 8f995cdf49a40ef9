"""Tests for the full deconvolution pipeline."""

import numpy as np
import pytest

from lapdeconv._expalg import ExpPoly
from lapdeconv.deconv import (
    DeconvolutionResult,
    EstimatorConfig,
    _convolve_terms,
    _estimate_all,
    deconvolve,
    risk_mse,
)
from lapdeconv.resolvent import decompose
from lapdeconv.sim import builtin_f, builtin_g, forward_convolve, standard_normals
from lapdeconv.smoother import EstimationError, NoisySample

T = 10.0


def noiseless(gname, fname, n, lam):
    g = builtin_g(gname)
    f = builtin_f(fname)
    times = np.arange(1, n + 1) * (T / n)
    q = forward_convolve(g, f, times)
    data = NoisySample(times, q, T, 0.0)
    return deconvolve(data, g, EstimatorConfig(fixed_bandwidths=lam)), f


def noisy_sample(gname, fname, n, sigma, seed):
    g = builtin_g(gname)
    f = builtin_f(fname)
    times = np.arange(1, n + 1) * (T / n)
    y = forward_convolve(g, f, times) + sigma * standard_normals(seed, 0, n)
    return NoisySample(times, y, T, sigma), g, f


class TestEstimatorConfig:
    def test_fixed_bandwidth_default_none(self):
        assert EstimatorConfig().fixed_bandwidth(0) is None

    def test_scalar_applies_everywhere(self):
        cfg = EstimatorConfig(fixed_bandwidths=0.5)
        assert cfg.fixed_bandwidth(0) == 0.5
        assert cfg.fixed_bandwidth(4) == 0.5

    def test_mapping_is_partial(self):
        cfg = EstimatorConfig(fixed_bandwidths={1: 0.3})
        assert cfg.fixed_bandwidth(1) == 0.3
        assert cfg.fixed_bandwidth(0) is None

    def test_sequence_indexed_by_order(self):
        cfg = EstimatorConfig(fixed_bandwidths=[0.5, 0.4])
        assert cfg.fixed_bandwidth(0) == 0.5
        assert cfg.fixed_bandwidth(1) == 0.4
        assert cfg.fixed_bandwidth(2) is None


class TestConvolutionTerm:
    @pytest.mark.parametrize("name", ["g3", "g4", "g5"])
    def test_product_rule_matches_exact_convolution(self, name):
        # the integrand oscillates at the grid scale for g4/g5; the moment
        # rule must track the exact closed-form convolution to near the
        # piecewise-linear interpolation error of the smooth factor
        g = builtin_g(name)
        d = decompose(g)
        gex = ExpPoly.from_rational(g.num.real_coeffs(), g.den.real_coeffs())
        fex = ExpPoly([(-1.0, np.array([0.0, 0.0, 1.0]))])
        q = gex.convolve(fex)
        phi1_r = ExpPoly.phi1_from_decomposition(d).derivatives(d.r)
        grid = np.linspace(0.0, T, 1024)
        exact = q.convolve(phi1_r).eval_real(grid)
        approx = _convolve_terms(q.eval_real(grid)[:, None], phi1_r, grid)[:, 0]
        scale = np.max(np.abs(exact))
        assert np.max(np.abs(approx - exact)) < 1e-5 * scale

    def test_zero_column_gives_zero(self):
        g = builtin_g("g3")
        d = decompose(g)
        phi1_r = ExpPoly.phi1_from_decomposition(d).derivatives(d.r)
        grid = np.linspace(0.0, T, 256)
        out = _convolve_terms(np.zeros((256, 2)), phi1_r, grid)
        np.testing.assert_array_equal(out, 0.0)

    def test_value_at_origin_is_zero(self):
        g = builtin_g("g4")
        d = decompose(g)
        phi1_r = ExpPoly.phi1_from_decomposition(d).derivatives(d.r)
        grid = np.linspace(0.0, T, 512)
        col = np.cos(grid)[:, None]
        out = _convolve_terms(col, phi1_r, grid)
        assert out[0, 0] == 0.0


class TestNoiselessRoundTrip:
    def test_first_order_kernel(self):
        res, f = noiseless("g2", "f1", 2000, 0.35)
        m = (res.grid >= 1.0) & (res.grid <= 9.0)
        truth = f(res.grid[m])
        rel = np.sqrt(np.mean((res.f_hat[m] - truth) ** 2) / np.mean(truth**2))
        assert rel < 1e-4

    def test_kernel_with_convolution_term(self):
        res, f = noiseless("g3", "f1", 2000, 0.35)
        m = (res.grid >= 1.0) & (res.grid <= 9.0)
        truth = f(res.grid[m])
        rel = np.sqrt(np.mean((res.f_hat[m] - truth) ** 2) / np.mean(truth**2))
        assert rel < 1e-4
        assert np.any(res.terms["integral"] != 0.0)

    def test_terms_recombine_to_estimate(self):
        res, _ = noiseless("g3", "f1", 500, 0.4)
        d = res.decomposition
        rebuilt = (res.terms["derivative"] - res.terms["linear"]
                   - res.terms["integral"]) / d.B_r
        np.testing.assert_allclose(res.f_hat, rebuilt, rtol=1e-12, atol=1e-12)

    def test_no_pole_kernel_has_zero_integral_term(self):
        res, _ = noiseless("g2", "f1", 500, 0.4)
        np.testing.assert_array_equal(res.terms["integral"], 0.0)


class TestAdaptiveDeconvolve:
    def test_benchmark_scale_risk(self):
        data, g, f = noisy_sample("g2", "f1", 100, 0.01, 123)
        res = deconvolve(data, g)
        assert risk_mse(res, f) < 5e-3

    def test_bandwidths_recorded_per_order(self):
        data, g, _ = noisy_sample("g2", "f1", 100, 0.01, 5)
        res = deconvolve(data, g)
        assert res.bandwidths.shape == (g.r + 1,)
        assert np.all(res.bandwidths > 0)

    def test_requires_kernel_order_above_r(self):
        data, _, _ = noisy_sample("g2", "f1", 100, 0.01, 5)
        g1 = builtin_g("g1")
        with pytest.raises(ValueError):
            deconvolve(data, g1, EstimatorConfig(L=4))

    def test_fixed_bandwidth_validation(self):
        data, g, _ = noisy_sample("g2", "f1", 100, 0.01, 5)
        with pytest.raises(ValueError):
            deconvolve(data, g, EstimatorConfig(fixed_bandwidths=6.0))
        with pytest.raises(EstimationError):
            deconvolve(data, g, EstimatorConfig(fixed_bandwidths=0.01))

    def test_deterministic(self):
        data, g, _ = noisy_sample("g2", "f1", 100, 0.01, 9)
        a = deconvolve(data, g).f_hat
        b = deconvolve(data, g).f_hat
        np.testing.assert_array_equal(a, b)


class TestBatchConsistency:
    def test_columns_match_single_runs(self):
        n = 100
        times = np.arange(1, n + 1) * (T / n)
        g = builtin_g("g2")
        f = builtin_f("f1")
        q = forward_convolve(g, f, times)
        V = np.column_stack(
            [q + 0.01 * standard_normals(77, run, n) for run in range(3)]
        )
        _, F, _, lam, _ = _estimate_all(times, T, V, 0.01, g, EstimatorConfig())
        for c in range(3):
            res = deconvolve(NoisySample(times, V[:, c], T, 0.01), g)
            np.testing.assert_allclose(F[:, c], res.f_hat, rtol=1e-12, atol=1e-12)
            np.testing.assert_array_equal(lam[:, c], res.bandwidths)

    def test_thread_count_does_not_change_results(self):
        n = 100
        times = np.arange(1, n + 1) * (T / n)
        g = builtin_g("g3")
        f = builtin_f("f2")
        q = forward_convolve(g, f, times)
        V = np.column_stack(
            [q + 0.1 * standard_normals(31, run, n) for run in range(2)]
        )
        out1 = _estimate_all(times, T, V, 0.1, g, EstimatorConfig(threads=1))
        out4 = _estimate_all(times, T, V, 0.1, g, EstimatorConfig(threads=4))
        np.testing.assert_array_equal(out1[1], out4[1])
        np.testing.assert_array_equal(out1[3], out4[3])


class TestRiskMse:
    def _result(self, grid, f_hat):
        z = np.zeros_like(grid)
        return DeconvolutionResult(
            grid=grid, f_hat=f_hat, bandwidths=np.array([0.5]),
            terms={"derivative": f_hat.copy(), "linear": z, "integral": z},
            config=EstimatorConfig(), g=builtin_g("g2"),
            decomposition=decompose(builtin_g("g2")),
        )

    def test_trim_masks_boundaries(self):
        grid = np.linspace(0.0, 10.0, 11)
        f_hat = np.zeros(11)
        f_hat[0] = 100.0  # outside the trimmed zone, must not count
        f_hat[5] = 1.0
        res = self._result(grid, f_hat)
        assert risk_mse(res, lambda t: np.zeros_like(t)) == pytest.approx(1.0 / 9.0)

    def test_trim_zero_keeps_everything(self):
        grid = np.linspace(0.0, 10.0, 11)
        res = self._result(grid, np.ones(11))
        assert risk_mse(res, lambda t: np.zeros_like(t), trim=0.0) == 1.0

    def test_trim_domain(self):
        grid = np.linspace(0.0, 10.0, 11)
        res = self._result(grid, np.zeros(11))
        with pytest.raises(ValueError):
            risk_mse(res, lambda t: t, trim=0.5)
        with pytest.raises(ValueError):
            risk_mse(res, lambda t: t, trim=-0.1)


class TestResultValidation:
    def test_rejects_non_finite(self):
        grid = np.linspace(0.0, 10.0, 5)
        bad = np.array([0.0, np.inf, 0.0, 0.0, 0.0])
        z = np.zeros(5)
        with pytest.raises(EstimationError):
            DeconvolutionResult(
                grid=grid, f_hat=bad, bandwidths=np.array([0.5]),
                terms={"derivative": z, "linear": z, "integral": z},
                config=EstimatorConfig(), g=builtin_g("g2"),
                decomposition=decompose(builtin_g("g2")),
            )
