import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import alpha_oracle
from rareq.demo import (
    PROPOSAL_BOX,
    DemoConfig,
    computer_code_H,
    run_demo,
    sample_inputs_fx,
    solve_alpha,
)
from rareq.distributions import TruncNormParams, sample_box_uniform
from rareq.diagnostics import std_centroid
from rareq.quantizer import SampleBatch, assign_cell
from rareq.weights import box_uniform_density, compute_density_ratio, truncnorm_product_density

P = TruncNormParams(0.0, 0.25, -1.0, 1.0)
ALPHA = 0.6434167333938894  # mpmath bisection, p_zero = 0.99


@pytest.fixture(scope="module")
def report():
    return run_demo(DemoConfig(seed=0))


class TestSolveAlpha:
    def test_default(self):
        assert solve_alpha(0.99, P) == pytest.approx(ALPHA, abs=1e-12)

    @pytest.mark.parametrize("p_zero, params", [(0.5, P), (0.5, TruncNormParams(0, 1, -10, 10)),
                                                (0.2, TruncNormParams(1, 2, -3, 4))])
    def test_against_bisection(self, p_zero, params):
        want = alpha_oracle(p_zero, params.mu, params.sigma, params.a, params.b)
        assert solve_alpha(p_zero, params) == pytest.approx(want, abs=1e-10)

    def test_standard_quartile(self):
        assert solve_alpha(0.5, TruncNormParams(0, 1, -10, 10)) == pytest.approx(0.6744897501960817, abs=1e-10)

    def test_small_p_zero(self):
        assert solve_alpha(1e-9, P) < 1e-8

    def test_invalid(self):
        for p_zero in (0.0, 1.0, 1.5):
            with pytest.raises(ValueError):
                solve_alpha(p_zero, P)

    def test_no_bracket(self):
        # mu above the interval leaves an empty search range [0, b - mu]
        with pytest.raises(ValueError):
            solve_alpha(0.5, TruncNormParams(5, 1, 0, 1))


class TestComputerCode:
    def test_examples(self):
        np.testing.assert_array_equal(computer_code_H((0, 0.7), 0.6434), [0, 0])
        np.testing.assert_allclose(computer_code_H((0.9, -0.5), 0.6434), [0.2566, 0.5], rtol=1e-12)
        np.testing.assert_allclose(computer_code_H((-0.7, -0.3), 0.6434), [0.0566, 0.3], rtol=1e-12)

    def test_boundary_maps_to_origin(self):
        np.testing.assert_array_equal(computer_code_H((ALPHA, 0.4), ALPHA), [0, 0])
        np.testing.assert_array_equal(computer_code_H((-ALPHA, 0.4), ALPHA), [0, 0])
        assert computer_code_H((np.nextafter(ALPHA, 1), 0.4), ALPHA)[1] == 0.4

    def test_dimension(self):
        with pytest.raises(ValueError):
            computer_code_H((0.1, 0.2, 0.3), ALPHA)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_zero_iff_inside_band_and_range(self, x1, x2):
        y = computer_code_H((x1, x2), ALPHA)
        if abs(x1) <= ALPHA:
            assert np.all(y == 0)
        else:
            assert y[0] > 0
        assert 0 <= y[0] <= 1 - ALPHA
        assert 0 <= y[1] <= 1


class TestRunDemo:
    def test_rare_points_in_plain_fit(self, report):
        nonzero = np.any(report.mc.fit_batch.points != 0, axis=1).sum()
        assert 1 <= nonzero <= 25

    def test_is_fraction_nonzero(self, report):
        frac = np.any(report.is_.fit_batch.points != 0, axis=1).mean()
        assert abs(frac - (1 - report.alpha)) < 0.05

    def test_outputs_in_range(self, report):
        for path in (report.mc, report.is_):
            y = path.fit_batch.points
            assert np.all((y[:, 0] >= 0) & (y[:, 0] <= 1 - report.alpha))
            assert np.all((y[:, 1] >= 0) & (y[:, 1] <= 1))

    def test_zero_cell_present(self, report):
        for path in (report.mc, report.is_):
            j = assign_cell((0.0, 0.0), path.result.codebook)
            assert np.linalg.norm(path.result.codebook[j]) < 0.05
            assert path.masses[j] >= 0.98

    def test_deterministic(self, report):
        again = run_demo(DemoConfig(seed=0))
        np.testing.assert_array_equal(again.is_.result.codebook, report.is_.result.codebook)
        np.testing.assert_array_equal(again.mc.std_report.std_table(), report.mc.std_report.std_table())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DemoConfig(p_zero=1.0)
        with pytest.raises(ValueError):
            DemoConfig(n_fit=0)


def test_coordinate_swap_symmetry():
    cfg = DemoConfig()
    fx = truncnorm_product_density(cfg.marginals)
    g = box_uniform_density(PROPOSAL_BOX)
    x = sample_box_uniform(100_000, PROPOSAL_BOX, np.random.default_rng(9))
    masses = []
    for inputs in (x, x[:, ::-1]):
        w = compute_density_ratio(fx, g, inputs)
        y = computer_code_H(inputs, ALPHA)
        masses.append(np.sum(w[np.all(y == 0, axis=1)]) / len(x))
    # both estimate 0.99; IS standard error at n = 1e5 is about 0.0064
    assert abs(masses[0] - masses[1]) < 4 * 0.0064 * np.sqrt(2)
    for m in masses:
        assert abs(m - 0.99) < 4 * 0.0064


def test_fx_sampler_hits_zero_at_p_zero():
    x = sample_inputs_fx(100_000, DemoConfig(), np.random.default_rng(3))
    frac = np.all(computer_code_H(x, ALPHA) == 0, axis=1).mean()
    assert 0.985 <= frac <= 0.995


def test_is_zero_mass_unbiased_across_seeds():
    fx = truncnorm_product_density(DemoConfig().marginals)
    g = box_uniform_density(PROPOSAL_BOX)
    est = []
    for seed in range(40):
        x = sample_box_uniform(100_000, PROPOSAL_BOX, np.random.default_rng(seed))
        w = compute_density_ratio(fx, g, x)
        est.append(np.sum(w[np.all(computer_code_H(x, ALPHA) == 0, axis=1)]) / len(x))
    est = np.array(est)
    # single-run sd is about 0.0066; the mean of 40 runs is far tighter
    assert abs(est.mean() - 0.99) < 4 * est.std(ddof=1) / np.sqrt(len(est))


def test_variance_reduction_on_shared_codebook(report):
    fx = truncnorm_product_density(report.config.marginals)
    g = box_uniform_density(PROPOSAL_BOX)
    x_mc = sample_inputs_fx(100_000, report.config, np.random.default_rng(1))
    x_is = sample_box_uniform(100_000, PROPOSAL_BOX, np.random.default_rng(2))
    mc = SampleBatch.unit(computer_code_H(x_mc, report.alpha))
    is_ = SampleBatch(computer_code_H(x_is, report.alpha), compute_density_ratio(fx, g, x_is))
    cb = report.is_.result.codebook
    s_mc = std_centroid(mc, [cb], nv=1000).std_table()
    s_is = std_centroid(is_, [cb], nv=1000).std_table()
    assert np.all(s_is[1:] <= 0.5 * s_mc[1:])
