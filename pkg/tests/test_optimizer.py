"""Generation-loop tests: variants, termination, determinism."""

from dataclasses import replace

import numpy as np
import pytest

from dxnesici.benchmarks import BenchmarkProblem, make_problem
from dxnesici.engine import initial_state
from dxnesici.integer_domain import build_domain
from dxnesici.optimizer import (
    OptimizerConfig,
    TerminationReason,
    run,
    step,
)


def continuous_problem(fn, n, name="custom"):
    return BenchmarkProblem(
        name=name, n=n, n_co=n, n_int=0, domain=build_domain([]),
        objective=fn, optimum=np.zeros(n),
    )


def vectorized(f_row):
    def fn(x):
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.array([f_row(row) for row in x2])
        return float(v[0]) if np.asarray(x).ndim == 1 else v

    return fn


SPHERE = vectorized(lambda r: float((r * r).sum()))


def fresh_rng(seed=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


# -- step ----------------------------------------------------------------------


def test_step_consumes_lambda_evaluations():
    p = make_problem("sphere-onemax", 8)
    cfg = OptimizerConfig(lam=6, seed=1)
    state = initial_state(p.initial_mean(fresh_rng(1)), 1.0)
    _, rec, x_bar, f_vals = step(state, p, cfg, fresh_rng(2))
    assert len(f_vals) == 6 and x_bar.shape == (6, 8)
    assert rec.evaluations == 6


def test_step_increments_generation():
    p = make_problem("sphere-onemax", 8)
    cfg = OptimizerConfig(lam=4, seed=1)
    state = initial_state(p.initial_mean(fresh_rng(1)), 1.0)
    out, _, _, _ = step(state, p, cfg, fresh_rng(2))
    assert out.g == state.g + 1


def test_step_constant_objective_stays_finite():
    p = continuous_problem(vectorized(lambda r: 1.0), 6)
    cfg = OptimizerConfig(variant="dxnesici", lam=8, seed=3)
    state = initial_state(np.ones(6), 1.0)
    rng = fresh_rng(3)
    for _ in range(100):
        state, _, _, _ = step(state, p, cfg, rng)
    assert np.isfinite(state.sigma) and state.sigma > 0
    assert np.all(np.isfinite(state.B)) and np.all(np.isfinite(state.m))


def test_variants_identical_without_integer_dims():
    p = continuous_problem(SPHERE, 6)
    results = {}
    for variant in ("dxnesici", "dxnesic-leap", "dxnesic"):
        cfg = OptimizerConfig(variant=variant, lam=8, seed=7, max_evals=800)
        results[variant] = run(p, cfg)
    ms = [r.best_f for r in results.values()]
    assert ms[0] == ms[1] == ms[2]
    xs = [r.best_x_bar for r in results.values()]
    np.testing.assert_array_equal(xs[0], xs[1])
    np.testing.assert_array_equal(xs[0], xs[2])


def test_variant_nesting_bit_exact():
    # dxnesic-leap == dxnesici with the bias forced off;
    # dxnesic == dxnesic-leap with the leap skipped. One step, same draws.
    p = make_problem("nint-tablet", 8)
    m0 = p.initial_mean(fresh_rng(0))
    outs = {}
    for variant in ("dxnesici", "dxnesic-leap", "dxnesic"):
        cfg = OptimizerConfig(variant=variant, lam=6, seed=5)
        state = initial_state(m0.copy(), 0.02)  # small sigma: leaps can fire
        outs[variant] = step(state, p, cfg, fresh_rng(5))[0]
    ici, leap, plain = outs["dxnesici"], outs["dxnesic-leap"], outs["dxnesic"]
    # shared machinery identical
    assert ici.sigma == leap.sigma == plain.sigma
    np.testing.assert_array_equal(ici.B, leap.B)
    np.testing.assert_array_equal(leap.B, plain.B)
    np.testing.assert_array_equal(ici.p_sigma, leap.p_sigma)
    # with eta_m forced to ones, dxnesici reproduces dxnesic-leap exactly
    if np.all(ici.eta_m == 1.0):
        np.testing.assert_array_equal(ici.m, leap.m)
    # continuous means always agree
    np.testing.assert_array_equal(leap.m[: p.n_co], plain.m[: p.n_co])


def test_non_finite_objective_aborts():
    p = continuous_problem(vectorized(lambda r: float("nan")), 4)
    cfg = OptimizerConfig(lam=4, seed=2)
    result = run(p, cfg)
    assert result.terminated_as is TerminationReason.NON_FINITE_OBJECTIVE
    assert result.evaluations_used == 0


# -- run ------------------------------------------------------------------------


def test_run_success_first_generation():
    p = make_problem("sphere-onemax", 4)
    cfg = OptimizerConfig(
        lam=8, seed=11, m0=np.array([0.0, 0.0, 0.9, 0.9]), sigma0=1e-7
    )
    result = run(p, cfg)
    assert result.success
    assert result.evaluations_used == 8
    assert result.best_f < 1e-10


def test_run_eval_budget_stops_unreachable_target():
    p = continuous_problem(SPHERE, 6)
    cfg = OptimizerConfig(lam=4, seed=1, target_f=0.0, max_evals=400)
    result = run(p, cfg)
    assert result.terminated_as is TerminationReason.EVAL_BUDGET
    assert result.evaluations_used >= 400
    assert result.evaluations_used % 4 == 0


def test_run_constant_objective_never_succeeds():
    # at N=2 the shape random-walk may trip the covariance guards before
    # the budget; either way the run must fail, never succeed
    p = continuous_problem(vectorized(lambda r: 1.0), 2)
    result = run(p, OptimizerConfig(lam=4, seed=1))
    assert result.terminated_as is not TerminationReason.SUCCESS
    assert result.best_f == 1.0


def test_run_degenerate_covariance_detection():
    p = continuous_problem(SPHERE, 4)
    cfg = OptimizerConfig(lam=8, seed=4, min_eigenvalue=1e-2, target_f=0.0)
    result = run(p, cfg)
    assert result.terminated_as is TerminationReason.DEGENERATE_COVARIANCE


def test_run_ill_conditioned_detection():
    p = continuous_problem(
        vectorized(lambda r: float(r[0] ** 2 + (100 * r[1]) ** 2)), 2
    )
    cfg = OptimizerConfig(lam=8, seed=4, max_condition=10.0, target_f=0.0)
    result = run(p, cfg)
    assert result.terminated_as is TerminationReason.ILL_CONDITIONED


def test_evaluation_accounting_multiple_of_lambda():
    p = make_problem("sphere-onemax", 6)
    for lam in (4, 10):
        result = run(p, OptimizerConfig(lam=lam, seed=9, max_evals=500))
        assert result.evaluations_used % lam == 0
        assert result.evaluations_used == result.generations * lam


def test_best_so_far_monotone():
    p = make_problem("nint-tablet", 8)
    cfg = OptimizerConfig(lam=6, seed=13, max_evals=1200, trace=True)
    result = run(p, cfg)
    best = [rec.best_f_so_far for rec in result.trace]
    assert all(b2 <= b1 + 1e-300 for b1, b2 in zip(best, best[1:]))
    assert result.best_f == pytest.approx(best[-1])


def test_run_deterministic_bit_exact():
    p = make_problem("reversed-ellipsoid-int", 8)
    cfg = OptimizerConfig(lam=6, seed=123, max_evals=3000, trace=True)
    r1, r2 = run(p, cfg), run(p, cfg)
    assert r1.terminated_as == r2.terminated_as
    assert r1.evaluations_used == r2.evaluations_used
    assert r1.best_f == r2.best_f
    np.testing.assert_array_equal(r1.best_x_bar, r2.best_x_bar)
    assert len(r1.trace) == len(r2.trace)
    for a, b in zip(r1.trace, r2.trace):
        assert a.sigma == b.sigma and a.p_norm == b.p_norm
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.scales, b.scales)
        assert a.leaps == b.leaps


def test_trace_records_shape():
    p = make_problem("sphere-onemax", 6)
    cfg = OptimizerConfig(lam=4, seed=3, max_evals=200, trace=True)
    result = run(p, cfg)
    assert result.trace, "trace enabled but empty"
    rec = result.trace[0]
    assert rec.mean.shape == (6,) and rec.scales.shape == (6,)
    assert rec.evaluations == 4
    assert result.trace[-1].evaluations == result.evaluations_used


def test_trace_disabled_by_default():
    p = make_problem("sphere-onemax", 6)
    result = run(p, OptimizerConfig(lam=4, seed=3, max_evals=100))
    assert result.trace == []


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(variant="nope")
    with pytest.raises(ValueError):
        OptimizerConfig(lam=5)
    with pytest.raises(ValueError):
        OptimizerConfig(sigma0=0.0)
    p = make_problem("sphere-onemax", 6)
    with pytest.raises(ValueError):
        run(p, OptimizerConfig(m0=np.zeros(3)))


def test_det_b_stays_one_over_many_generations():
    p = make_problem("nint-tablet", 8)
    cfg = OptimizerConfig(lam=6, seed=21, max_evals=6000, target_f=0.0)
    rng = fresh_rng(21)
    state = initial_state(p.initial_mean(rng), 1.0)
    for _ in range(400):
        state, _, _, _ = step(state, p, cfg, rng)
        assert np.linalg.det(state.B) == pytest.approx(1.0, rel=1e-6)


def test_step_matches_composed_public_operations():
    # the fused movement-generation path must reproduce
    # update_distribution followed by emphasize_expansion
    from dxnesici.engine import (
        cached_params,
        calculate_learning_rates,
        calculate_weights,
        emphasize_expansion,
        natural_gradients,
        sample_population,
        update_distribution,
        update_evolution_path,
    )
    from dxnesici.mi_control import leap_and_correct

    p = make_problem("nint-tablet", 10)
    cfg = OptimizerConfig(variant="dxnesic-leap", lam=8, seed=31)
    params = cached_params(10, 8, None, "adaptive")
    m0 = p.initial_mean(fresh_rng(31))
    state = initial_state(m0, 1.0)
    seen_movement = False
    rng_a, rng_b = fresh_rng(32), fresh_rng(32)
    for _ in range(60):
        reference, _, _, _ = step(state, p, cfg, rng_a)
        z, x = sample_population(state, params, rng_b)
        f = p.evaluate_batch(p.domain.encode(x, p.n_co))
        z_sorted = np.ascontiguousarray(z[np.argsort(f, kind="stable")])
        p_next = update_evolution_path(
            state.p_sigma, z_sorted, params.w_rank, params.c_sigma, params.mu_eff
        )
        p_norm = float(np.linalg.norm(p_next))
        w = calculate_weights(params, p_norm, z_sorted)
        eta_sigma, eta_b = calculate_learning_rates(params, p_norm)
        grads = natural_gradients(z_sorted, w)
        composed = update_distribution(state, grads, eta_sigma, eta_b, np.ones(10))
        if p_norm >= params.chi_n:
            seen_movement = True
            sigma_next, b_next = emphasize_expansion(
                state.B, composed.sigma, composed.B
            )
            composed = replace(composed, sigma=sigma_next, B=b_next)
        composed, _ = leap_and_correct(state.m, composed, params.alpha, p.domain)
        # the composed route solves against B and so carries a few extra ulps
        np.testing.assert_allclose(reference.B, composed.B, rtol=0, atol=1e-10)
        np.testing.assert_allclose(reference.m, composed.m, rtol=0, atol=1e-10)
        assert reference.sigma == pytest.approx(composed.sigma, rel=1e-10)
        state = reference
    assert seen_movement, "test never exercised the movement-phase path"


def test_rank_invariance_under_constant_shift():
    # adding a constant to the objective leaves the sampled trajectory identical
    base = make_problem("nint-tablet", 8)
    shifted = BenchmarkProblem(
        name="shifted", n=8, n_co=4, n_int=4, domain=base.domain,
        objective=lambda x: base.objective(x) + 42.0, optimum=base.optimum,
    )
    cfg = OptimizerConfig(lam=6, seed=17, max_evals=900, target_f=-1.0, trace=True)
    r1, r2 = run(base, cfg), run(shifted, cfg)
    assert r1.evaluations_used == r2.evaluations_used
    for a, b in zip(r1.trace, r2.trace):
        assert a.sigma == b.sigma
        np.testing.assert_array_equal(a.mean, b.mean)
