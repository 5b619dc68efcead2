import math

import numpy as np
import pytest

from core_model import AnchorSet, HyperParams, RandomStream
from double_loop import (
    DoubleLoopConfig, estimator_diagnostics, hypergradient_estimate, pilot_variance_bound,
    run_double_loop, stationarity_norm, theorem35_eta, theorem35_params, worstcase_samples,
)
from errors import ConfigError, DivergenceError
from langevin import LsiEstimate, SamplerConfig, run_chains
from losses import ShallowNetLoss
from oracles import default_lsi, make_grid, true_hypergradient_quadrature
from settings import STREAM_DOUBLE_LOOP, STREAM_DOUBLE_LOOP_CHAIN, STREAM_STATIONARITY

FAST_CHAIN = dict(inner_tau=0.1, inner_steps=60)


def test_theorem35_params_by_hand():
    p = theorem35_params(0.5, 1.0, 1.0, 1.0)
    assert p.T_out == 2304
    assert p.eta == pytest.approx(1.0 / 48.0)
    assert p.delta == pytest.approx(0.25)
    # halving the target multiplies the iteration count by 16
    assert theorem35_params(0.25, 1.0, 1.0, 1.0).T_out == 36864
    assert theorem35_eta(100, 4.0) == pytest.approx(0.05)
    with pytest.raises(ConfigError):
        theorem35_params(0.0, 1.0, 1.0)


@pytest.mark.parametrize("kwargs", [dict(eta=-0.1), dict(T_out=0), dict(delta=0.0), dict(varrho=-1.0),
                                    dict(inner_tau=0.1)])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        DoubleLoopConfig(**kwargs)


def test_hypergradient_estimate_is_the_theta_gradient(linear_1d):
    np.testing.assert_allclose(hypergradient_estimate(np.array([0.3]), np.array([1.7]), linear_1d), [1.7])


def test_first_outer_step_uses_the_tagged_chain(benchmark_anchors, benchmark_hp, linear_1d):
    config = DoubleLoopConfig(eta=0.1, T_out=1, seed=5, theta0=np.array([0.4]), **FAST_CHAIN)
    theta, trace = run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    stream = RandomStream(5)
    i = int(stream.integers((STREAM_DOUBLE_LOOP, 0), benchmark_anchors.n))
    chain = SamplerConfig(tau=0.1, T=60, anchor=benchmark_anchors.points[i], anchor_index=i)
    z = run_chains(chain, np.array([0.4]), benchmark_hp, linear_1d, stream, tags=(STREAM_DOUBLE_LOOP_CHAIN, i, 0))[0]
    np.testing.assert_allclose(theta.theta, 0.4 - 0.1 * z, rtol=1e-14)
    assert int(trace.column("anchor_index")[0]) == i
    assert trace.total_langevin_steps == 60
    assert trace.total_grad_evals == 61


def test_zero_step_size_keeps_theta_and_records_every_iteration(benchmark_anchors, benchmark_hp, linear_1d):
    config = DoubleLoopConfig(eta=0.0, T_out=25, theta0=np.array([0.6]), **FAST_CHAIN)
    theta, trace = run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    np.testing.assert_array_equal(theta.theta, [0.6])
    assert len(trace) == 25
    np.testing.assert_array_equal(trace.column("k"), np.arange(25))
    assert 0 <= trace.selected_index < 25
    assert trace.total_langevin_steps == 25 * 60


def test_runs_are_reproducible_and_output_is_the_selected_iterate(benchmark_anchors, benchmark_hp, linear_1d):
    config = DoubleLoopConfig(eta=0.05, T_out=200, seed=11, **FAST_CHAIN)
    a_theta, a = run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    b_theta, b = run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    assert a_theta == b_theta
    np.testing.assert_array_equal(a.table, b.table)
    np.testing.assert_array_equal(a.thetas[a.selected_index], a_theta.theta)
    np.testing.assert_array_equal(a.thetas[-1], a.theta_last)
    anchors_drawn = [int(RandomStream(11).integers((STREAM_DOUBLE_LOOP, k), 4)) for k in range(200)]
    np.testing.assert_array_equal(a.column("anchor_index"), anchors_drawn)


def test_huge_step_size_diverges(benchmark_anchors, benchmark_hp, linear_1d):
    config = DoubleLoopConfig(eta=1e308, T_out=5, **FAST_CHAIN)
    with pytest.raises(DivergenceError) as info:
        run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    assert info.value.step is not None


def test_stationarity_target_sets_the_run_length(benchmark_anchors, benchmark_hp, linear_1d):
    config = DoubleLoopConfig(varrho=4.0, T_out=None, seed=0)
    _, trace = run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    lsi = default_lsi(linear_1d, benchmark_anchors, benchmark_hp)
    V = pilot_variance_bound(np.zeros(1), benchmark_anchors, benchmark_hp, linear_1d, lsi, 2.0, RandomStream(0))
    params = theorem35_params(4.0, V, 1.0, 1.0)
    assert trace.meta["T_out"] == params.T_out == len(trace)
    assert trace.meta["eta"] == pytest.approx(params.eta)
    assert trace.meta["delta"] == pytest.approx(2.0)


def test_stationarity_target_with_capped_iterations(benchmark_anchors, benchmark_hp, linear_1d):
    config = DoubleLoopConfig(varrho=4.0, T_out=3, seed=0)
    _, trace = run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    lsi = default_lsi(linear_1d, benchmark_anchors, benchmark_hp)
    V = pilot_variance_bound(np.zeros(1), benchmark_anchors, benchmark_hp, linear_1d, lsi, 2.0, RandomStream(0))
    assert len(trace) == 3
    assert trace.meta["eta"] == pytest.approx(theorem35_eta(3, V))


def test_worstcase_samples_shapes(benchmark_anchors, benchmark_hp, linear_1d, stream):
    draws = worstcase_samples(np.array([0.6]), benchmark_anchors, benchmark_hp, linear_1d,
                              LsiEstimate(10.0), 0.1, [3, 0, 1, 2], stream, STREAM_STATIONARITY,
                              tau=0.1, steps=10)
    assert [z.shape for z in draws] == [(3, 1), (0, 1), (1, 1), (2, 1)]


def test_worstcase_samples_do_not_depend_on_workers(benchmark_anchors, benchmark_hp, linear_1d, stream):
    args = (np.array([0.6]), benchmark_anchors, benchmark_hp, linear_1d, LsiEstimate(10.0), 0.1,
            [50] * 4, stream, STREAM_STATIONARITY)
    serial = worstcase_samples(*args, tau=0.1, steps=20, workers=1)
    threaded = worstcase_samples(*args, tau=0.1, steps=20, workers=3)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a, b)


def test_stationarity_norm_vanishes_at_the_minimizer(benchmark_anchors, benchmark_hp, linear_1d, stream):
    kwargs = dict(chain_tau=0.1, chain_steps=60)
    at_min = stationarity_norm(np.array([-1.0]), benchmark_anchors, benchmark_hp, linear_1d, 2000, 0.05,
                               stream, **kwargs)
    away = stationarity_norm(np.array([1.0]), benchmark_anchors, benchmark_hp, linear_1d, 2000, 0.05,
                             stream, **kwargs)
    assert at_min <= 0.03
    assert away == pytest.approx(1.0, abs=0.03)
    with pytest.raises(ConfigError):
        stationarity_norm(np.zeros(1), benchmark_anchors, benchmark_hp, linear_1d, 0, 0.05, stream)


def test_estimator_diagnostics_with_short_chains(benchmark_anchors, benchmark_hp, linear_1d, stream):
    diag = estimator_diagnostics(np.array([0.6]), benchmark_anchors, benchmark_hp, linear_1d, 0.1,
                                 LsiEstimate(10.0), 2000, stream, np.array([0.8]), chain_tau=0.1, chain_steps=60)
    assert diag.bias_ok
    assert diag.variance_ok
    assert diag.sigma2 == pytest.approx(0.15, rel=0.15)


@pytest.mark.slow
@pytest.mark.parametrize("delta", [0.2, 0.1, 0.05])
def test_estimator_bias_and_variance_stay_under_their_ceilings(benchmark_anchors, benchmark_hp, linear_1d, delta):
    diag = estimator_diagnostics(np.array([0.6]), benchmark_anchors, benchmark_hp, linear_1d, delta,
                                 LsiEstimate(10.0), 2000, RandomStream(1), np.array([0.8]))
    assert diag.bias <= diag.bias_ceiling
    assert diag.variance <= diag.variance_ceiling


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_benchmark_convergence(benchmark_anchors, benchmark_hp, linear_1d, seed):
    config = DoubleLoopConfig(eta=0.01, T_out=20_000, seed=seed, theta0=np.zeros(1), **FAST_CHAIN)
    _, trace = run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    thetas = trace.thetas[:, 0]
    assert abs(trace.theta_last[0] + 1.0) <= 0.15
    assert abs(thetas[len(thetas) // 2:].mean() + 1.0) <= 0.05
    grid = make_grid(1)
    norms = [abs(true_hypergradient_quadrature(thetas[k:k + 1], benchmark_anchors, benchmark_hp, linear_1d,
                                               grid)[0])
             for k in (0, 100, 400)]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    residual = stationarity_norm(trace.theta_last, benchmark_anchors, benchmark_hp, linear_1d, 2000, 0.05,
                                 RandomStream(seed), chain_tau=0.1, chain_steps=60)
    assert residual <= 0.15
    assert math.isfinite(residual)


def test_quadratic_loss_has_a_vanishing_hypergradient(benchmark_anchors, benchmark_hp, stream):
    from losses import QuadraticLoss
    quad = QuadraticLoss(0.5, benchmark_hp.lam, 1)
    np.testing.assert_array_equal(hypergradient_estimate(np.ones(1), np.array([1.3]), quad), [0.0])
    assert stationarity_norm(np.ones(1), benchmark_anchors, benchmark_hp, quad, 10, 0.05, stream,
                             chain_tau=0.1, chain_steps=5) == 0.0


def test_stationarity_norm_at_zero_is_the_anchor_mean(benchmark_anchors, benchmark_hp, linear_1d, stream):
    value = stationarity_norm(np.zeros(1), benchmark_anchors, benchmark_hp, linear_1d, 1000, 0.01, stream,
                              chain_tau=0.1, chain_steps=60)
    assert value == pytest.approx(0.5, abs=0.05)


def test_theorem35_accuracy_example():
    assert theorem35_params(0.1, 1.0, 1.0).delta == pytest.approx(0.05)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_stationarity_trends_down(benchmark_anchors, benchmark_hp, linear_1d, seed):
    config = DoubleLoopConfig(eta=0.002, T_out=10_000, seed=seed, theta0=np.zeros(1), **FAST_CHAIN)
    _, trace = run_double_loop(config, benchmark_anchors, benchmark_hp, linear_1d)
    thetas = trace.thetas[:, 0]
    window = len(thetas) // 10
    grid = make_grid(1)

    def median_norm(segment):
        return np.median([abs(true_hypergradient_quadrature(np.array([t]), benchmark_anchors, benchmark_hp,
                                                            linear_1d, grid)[0])
                          for t in segment[::10]])

    assert median_norm(thetas[-window:]) < median_norm(thetas[:window])


def test_theorem_chains_for_a_shallow_net_need_a_supplied_lsi_constant():
    anchors = AnchorSet(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1, -1]))
    hp = HyperParams(2.0, 0.1)
    net = ShallowNetLoss(anchors.labels, 2, hidden_width=2)
    with pytest.raises(ConfigError, match="lsi_alpha"):
        run_double_loop(DoubleLoopConfig(T_out=1), anchors, hp, net)
    _, trace = run_double_loop(DoubleLoopConfig(T_out=3, inner_tau=0.1, inner_steps=5), anchors, hp, net)
    assert len(trace) == 3
