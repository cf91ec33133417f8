import numpy as np
import pytest

import negative_controls as nc
from mvchaos import verify as v
from mvchaos.model import example61, linear_mean_field, mean_square
from mvchaos.rng import BrownianDriver
from mvchaos.integrator import Normal, SchemeConfig, integrate, sample_initial

N = 20_000


def test_example61_appendix_checks_pass():
    m = example61()
    for R in (1, 5, 10):
        rep = v.check_local_monotonicity(m, R, N)
        assert rep.verdict == v.PASS, rep.table_row()
        assert rep.estimated_constants["L_of_R_needed"] <= rep.estimated_constants["L_of_R_declared"]
    assert v.check_coercivity(m, N).verdict == v.PASS
    assert v.lyapunov_check(m, N).verdict == v.PASS
    assert all(r.verdict == v.PASS for r in v.check_growth(m, N))


def test_example61_drift_is_not_lipschitz_at_the_origin():
    # x^(1/3) has unbounded slope at 0, so the polynomial Lipschitz bound fails for a nonzero mean
    m = example61()
    from mvchaos.measure import EmpiricalMeasure

    x = np.array([[[1e-12]]])
    xbar = np.array([[[0.0]]])
    mu = np.array([[[2.0]]])
    lhs, rhs, _ = v.drift_lipschitz_sides(m, x, xbar, mu, mu)
    assert lhs[0] > rhs[0]


def test_linear_model_passes_everything_it_declares():
    m = linear_mean_field()
    reports = v.run_audit(m, assumptions=("2.1", "2.2", "2.3", "2.4", "2.6"), n_samples=N)
    assert all(r.verdict == v.PASS for r in reports), [r.table_row() for r in reports]


def test_mean_square_passes_declared_bounds():
    reports = v.run_audit(mean_square(), assumptions=("2.1", "2.2", "2.3", "2.4"), n_samples=N)
    assert all(r.verdict == v.PASS for r in reports), [r.table_row() for r in reports]


def test_undeclared_constants_give_inconclusive():
    assert v.lyapunov_check(mean_square(), 100).verdict == v.INCONCLUSIVE
    assert v.check_coercivity(mean_square(), 100, dissipative=True).verdict == v.INCONCLUSIVE
    assert v.check_dissipative_monotonicity(linear_mean_field(), 5.0, 100).verdict == v.INCONCLUSIVE


@pytest.mark.parametrize("make,run", [
    (nc.monotonicity_small_L, lambda m: [v.check_local_monotonicity(m, 5.0, N)]),
    (nc.cubic_drift_declared_linear, lambda m: v.check_polynomial_lipschitz(m, N)[:1]),
    (nc.cubic_diffusion_declared_linear, lambda m: v.check_polynomial_lipschitz(m, N)[1:2]),
    (nc.steep_measure_diffusion, lambda m: v.check_polynomial_lipschitz(m, N)[2:]),
    (nc.coercivity_too_tight, lambda m: [v.check_coercivity(m, N)]),
    (nc.drift_growth_too_low, lambda m: v.check_growth(m, N)[:1]),
    (nc.diffusion_growth_too_low, lambda m: v.check_growth(m, N)[1:]),
    (nc.lyapunov_rates_too_small, lambda m: [v.lyapunov_check(m, N)]),
    (nc.lyapunov_degree_too_low, lambda m: [v.lyapunov_check(m, N)]),
    (nc.example61_declared_dissipative, lambda m: [v.check_coercivity(m, N, dissipative=True)]),
    (nc.linear_with_bad_dissipative_monotonicity, lambda m: [v.check_dissipative_monotonicity(m, 5.0, N)]),
])
def test_negative_controls_fail(make, run):
    for rep in run(make()):
        assert rep.verdict == v.FAIL, rep.table_row()


def test_recorded_violations_replay_exactly():
    m = nc.monotonicity_small_L()
    rep = v.check_local_monotonicity(m, 5.0, 5000)
    assert 0 < len(rep.violations) <= v.MAX_RECORDED
    for viol in rep.violations[:5]:
        lhs, rhs = v.replay(m, rep, viol)
        assert lhs == pytest.approx(viol.lhs, rel=1e-12) and rhs == pytest.approx(viol.rhs, rel=1e-12)
        assert lhs > rhs


def test_checks_are_deterministic_given_seed():
    m = nc.coercivity_too_tight()
    a, b = v.check_coercivity(m, 5000, seed=3), v.check_coercivity(m, 5000, seed=3)
    assert a.n_violations == b.n_violations and a.violations[0].lhs == b.violations[0].lhs
    assert v.check_coercivity(m, 5000, seed=4).violations[0].lhs != a.violations[0].lhs


def test_phi_maximum_is_four_ninths():
    assert v.phi_extremum() == pytest.approx(4 / 9, abs=1e-12)
    assert v.phi(1 / 3, -1 / 3) == pytest.approx(4 / 9)
    values = [v.phi_grid_max(r)[0] for r in range(4)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] <= 4 / 9 + 1e-12


def test_exponent_bookkeeping_for_example61():
    g = example61().growth
    assert v.theorem_exponent_requirement(g) == 12
    assert v.largest_feasible_p(example61(), n_samples=5000) == 3


def test_dissipative_side_conditions_report_thresholds():
    side = v.dissipative_side_conditions(nc.linear_with_bad_dissipative_monotonicity(), 2.0)
    assert side["threshold"] == pytest.approx(2 * (3.25 - 0.5))
    assert side["lambda"] == float("inf") and side["lambda_ok"] is False


def test_decay_bound_and_estimate():
    m = linear_mean_field()
    assert v.lemma_decay_bound(m, 2) == pytest.approx(-2.75)
    slope = v.estimate_decay_rate(m, 2, 2000, 2.0, dt=1e-2, n_obs=11)
    assert slope < v.lemma_decay_bound(m, 2)
    with pytest.raises(ValueError):
        v.estimate_decay_rate(mean_square(), 2, 10, 1.0)


def test_integrability_monitor_stays_bounded_for_example61():
    m = example61()
    drv = BrownianDriver(0)
    ens = sample_initial(Normal(), 2000, drv)
    traj = integrate(ens, m, SchemeConfig(dt=1e-3), drv, 1.0, observe=[0.25 * k for k in range(5)])
    series = v.monitor_exponential_integrability(traj, m.lyapunov.f, m.lyapunov.alpha)
    assert not series.flagged.any()
    assert np.all(np.isfinite(series.log_mean))
