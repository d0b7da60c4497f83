import math

import numpy as np
import pytest

from actionforge.action import ActionDomainError
from actionforge.potential import (
    ExpressionPotential,
    ForcedPendulum,
    ForcedPotential,
    Forcing,
    LinearOscillator,
    Pendulum,
    SoftWell,
)
from actionforge.solvers import (
    NonFiniteActionError,
    SolveConfig,
    SolveResult,
    TraceEntry,
    check_saddle_geometry,
    minimize_direct,
    minimizing_sequence_diagnostic,
    random_trajectory,
    saddle_search,
    sign_property,
)
from actionforge.trajectory import FourierTrajectory, Lattice, reduce_mean_to_cell
from actionforge.verify import ode_residual

TWO_PI = 2.0 * math.pi
EPS = np.finfo(float).eps


def forced_pendulum(eps=0.3, T=1.0):
    return ForcedPendulum(1.0, Forcing.scalar(T, cos=[eps]))


# configuration --------------------------------------------------------------------------------


def test_config_validation():
    for bad in ({"grad_tol": 0.0}, {"max_iter": 0}, {"memory": 0}, {"backtrack": 1.0}, {"descent_step": -1.0}):
        with pytest.raises(ValueError):
            SolveConfig(**bad)


def test_random_trajectory_in_cell_and_decaying():
    p = forced_pendulum()
    u = random_trajectory(p, 8, 3, Lattice((TWO_PI,)))
    assert 0 <= u.mean[0] < TWO_PI
    np.testing.assert_array_equal(u.to_vector(), random_trajectory(p, 8, 3, Lattice((TWO_PI,))).to_vector())


# direct minimization ------------------------------------------------------------------------------


def test_unforced_pendulum_minimizer():
    p = ForcedPendulum(1.0, period_T=1.0)
    for seed in range(5):
        r = minimize_direct(None, p, cfg=SolveConfig(M=8, seed=seed))
        assert r.converged and r.status == "converged"
        assert r.grad_norm <= 1e-10
        assert r.f_value == pytest.approx(-1.0, abs=1e-12)
        assert r.trajectory.mean[0] == pytest.approx(math.pi, abs=1e-9)
        assert r.trajectory.harmonic_energy() <= 1e-20


def test_forced_pendulum_residual():
    p = forced_pendulum()
    r = minimize_direct(None, p, cfg=SolveConfig(M=16))
    assert r.converged
    rep = ode_residual(r.trajectory, p)
    assert rep.residual_sup <= 1e-8
    assert r.nonconstant


def test_start_at_minimizer_is_fixed_point():
    p = forced_pendulum()
    r = minimize_direct(None, p, cfg=SolveConfig(M=16))
    again = minimize_direct(r.trajectory, p, cfg=SolveConfig(M=16))
    assert again.iterations <= 1
    np.testing.assert_allclose(again.trajectory.to_vector(), r.trajectory.to_vector(), atol=1e-10)


def test_descent_property():
    rng = np.random.default_rng(5)
    for seed in range(10):
        T = rng.uniform(0.5, 3.0)
        p = ForcedPendulum(rng.uniform(0.5, 2), Forcing.scalar(T, cos=[rng.normal()], sin=[rng.normal()]))
        r = minimize_direct(None, p, cfg=SolveConfig(M=12, seed=seed))
        for prev, cur in zip(r.trace, r.trace[1:]):
            if cur.flat:
                assert cur.f <= prev.f + 64 * EPS * (1 + abs(prev.f))
                assert cur.grad_norm < prev.grad_norm
            else:
                assert cur.f <= prev.f


def test_means_stay_in_cell():
    p = forced_pendulum()
    u0 = random_trajectory(p, 8, 0).shifted([50.0])
    r = minimize_direct(u0, p, cfg=SolveConfig(M=8))
    assert all(0 <= e.mean[0] < TWO_PI for e in r.trace[1:])


def test_argmin_invariance_under_lattice_shift():
    p = forced_pendulum()
    lat = Lattice((TWO_PI,))
    for seed in range(5):
        u0 = random_trajectory(p, 16, seed, lat)
        a = minimize_direct(u0, p, cfg=SolveConfig(M=16))
        b = minimize_direct(u0.shifted([TWO_PI]), p, cfg=SolveConfig(M=16))
        ua = reduce_mean_to_cell(a.trajectory, lat).to_vector()
        ub = reduce_mean_to_cell(b.trajectory, lat).to_vector()
        assert np.max(np.abs(ua - ub)) <= 1e-8


def test_lattice_warning_for_nonzero_mean_forcing():
    p = ForcedPotential(Pendulum(1.0, 1.0), Forcing.scalar(1.0, cos=[0.3], mean=0.1))
    with pytest.warns(RuntimeWarning):
        minimize_direct(None, p, lattice=Lattice((TWO_PI,)), cfg=SolveConfig(M=4, max_iter=3))


def test_max_iter_returns_best_iterate():
    p = forced_pendulum()
    r = minimize_direct(None, p, cfg=SolveConfig(M=16, max_iter=1))
    assert not r.converged and r.status == "max_iter"
    assert r.f_value == min(e.f for e in r.trace)


def test_non_finite_action_aborts_with_iterate():
    p = ExpressionPotential("log(x1)", 1.0)
    u0 = FourierTrajectory(1.0, [0.5], [[1.0]], [[0.0]])
    with pytest.raises(ActionDomainError):
        minimize_direct(u0, p, cfg=SolveConfig(M=1))
    q = ExpressionPotential("exp(x1^2)", 1.0)
    with pytest.raises(NonFiniteActionError) as e:
        minimize_direct(FourierTrajectory.constant([30.0], 1.0, 2), q, cfg=SolveConfig(M=2))
    assert e.value.iterate.mean[0] == 30.0


# saddle search ------------------------------------------------------------------------------------


def test_linear_oscillator_saddle():
    p = LinearOscillator(1.0, 2.0, 0.3, math.pi)
    r = saddle_search(p, SolveConfig(M=8))
    assert r.converged and r.nonconstant
    expected = np.zeros((8, 1))
    expected[0, 0] = -0.1
    np.testing.assert_allclose(r.trajectory.cos, expected, atol=1e-10)
    np.testing.assert_allclose(r.trajectory.sin, 0.0, atol=1e-10)
    assert abs(r.trajectory.mean[0]) <= 1e-10


def test_soft_well_saddle_is_constant():
    r = saddle_search(SoftWell(0.1, 1.0), SolveConfig(M=8))
    assert r.converged
    assert not r.nonconstant and r.extra["constant_solution"]
    assert abs(r.f_value) <= 1e-12
    assert np.max(np.abs(r.trajectory.to_vector())) <= 1e-8


def test_unforced_oscillator_saddle_at_origin():
    r = saddle_search(LinearOscillator(1.0, 2.0, 0.0, math.pi), SolveConfig(M=6, seed=4))
    assert r.converged
    assert abs(r.f_value) <= 1e-15
    assert np.max(np.abs(r.trajectory.to_vector())) <= 1e-9


def test_saddle_divergence_is_reported():
    p = ExpressionPotential("x1^4", 1.0)
    r = saddle_search(p, SolveConfig(M=2, descent_step=1e3, ascent_step=1e3, divergence_norm=1e3),
                      u0=FourierTrajectory(1.0, [0.0], [[20.0], [0.0]], [[0.0], [0.0]]))
    assert r.status == "diverged" and not r.converged
    assert "geometry" in r.message


def test_saddle_stalls_without_linking():
    # F = -x^2/2 + forcing: constants form a minimum of the action, ascent cannot make progress
    p = ExpressionPotential("-0.5*x1^2 + x1*cos(2*pi*t)", 1.0)
    r = saddle_search(p, SolveConfig(M=4))
    assert r.status == "stalled" and not r.converged


# geometry ------------------------------------------------------------------------------------------


def test_soft_well_geometry():
    rep = check_saddle_geometry(SoftWell(0.1, 1.0), 5.0, SolveConfig(M=8), b=0.1)
    assert rep.holds
    assert rep.sup_sphere == pytest.approx(-0.1 * (1 - math.exp(-25)), rel=1e-12)
    assert rep.sup_sphere < 0 <= rep.inf_zero_mean
    assert rep.threshold_ok
    assert rep.threshold == pytest.approx(math.sqrt(20) * math.pi)


def test_degenerate_geometry_for_zero_potential():
    rep = check_saddle_geometry(ExpressionPotential("0*x1", 1.0), 5.0)
    assert rep.sup_sphere == 0.0 and rep.inf_zero_mean == 0.0
    assert not rep.holds


def test_threshold_flag_fails_for_long_period():
    rep = check_saddle_geometry(SoftWell(0.1, 20.0), 5.0, b=0.1)
    assert rep.threshold_ok is False


# diagnostics -----------------------------------------------------------------------------------------


def test_diagnostic_on_pendulum_run():
    p = forced_pendulum()
    r = minimize_direct(None, p, cfg=SolveConfig(M=16))
    # |F| <= 1 + 0.3|x| <= 0.1 x^2 + 1.225
    d = minimizing_sequence_diagnostic(r, C1=0.1, C2=1.225, lattice=Lattice((TWO_PI,)))
    assert d["passed"]
    assert d["bounded"]["checked"] and d["in_cell"]["checked"] and d["cps_trend"]["checked"]


def test_diagnostic_trace_of_length_one():
    u = FourierTrajectory.constant([math.pi], 1.0, 2)
    r = SolveResult(u, -1.0, 0.0, 0, True, [0.0], [TraceEntry(0, -1.0, 0.0, 0.0, 0.0, (math.pi,))],
                    "minimize_direct", "converged")
    assert minimizing_sequence_diagnostic(r, 0.1, 1.0, Lattice((TWO_PI,)))["passed"]


def test_diagnostic_flags_exploding_trace():
    u = FourierTrajectory.constant([0.0], 1.0, 2)
    trace = [TraceEntry(i, 1.0, 10.0**i, 10.0**i * (1 + 10.0**i), 10.0**i, (0.0,)) for i in range(30)]
    r = SolveResult(u, 1.0, 1e29, 29, False, [e.cps for e in trace], trace, "minimize_direct", "max_iter")
    d = minimizing_sequence_diagnostic(r, 0.1, 1.0)
    assert not d["bounded"]["passed"]
    assert not d["cps_trend"]["passed"]
    assert not d["passed"]


def test_diagnostic_rejects_large_C1():
    r = minimize_direct(None, forced_pendulum(), cfg=SolveConfig(M=4))
    with pytest.raises(ValueError):
        minimizing_sequence_diagnostic(r, C1=50.0, C2=1.0)


def test_sign_property_not_applicable_for_linear_oscillator():
    p = LinearOscillator(1.0, 2.0, 0.3, math.pi)
    r = saddle_search(p, SolveConfig(M=8))
    assert r.f_value < 0
    sp = sign_property(r, p, 0.1)
    # F <= b|x|^2 fails for w0^2/2 = 0.5 > b, so the statement does not apply
    assert not sp["applicable"] and sp["holds"] is None
    assert sp["integral_nonnegative"] and not sp["F6"]
