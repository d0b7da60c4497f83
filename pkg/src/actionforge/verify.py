"""Independent checks on computed orbits.

* ODE residual of u'' = -grad F(t, u) on a dense grid.
* A shooting oracle: fixed-step RK4 over one period plus Newton iteration on
  the initial state, sharing nothing with the spectral code path.
* Refinement (M -> 2M) and a randomized property suite for the
  Poincare-Wirtinger and periodic Sobolev inequalities, DFT round trips,
  gradient consistency and lattice translation invariance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .action import ActionFunctional
from .potential import ForcedPendulum, Forcing, PotentialModel
from .solvers import SolveConfig, SolveResult, minimize_direct, saddle_search
from .trajectory import FourierTrajectory, Lattice, from_samples

__all__ = [
    "ShootingResult",
    "SuiteReport",
    "VerificationReport",
    "ode_residual",
    "oracle_gap",
    "property_suite",
    "refinement_delta",
    "rk4_orbit",
    "shooting_oracle",
    "verify_solution",
]


@dataclass
class VerificationReport:
    residual_sup: float
    residual_l2: float
    periodicity_defect: float = 0.0
    nonconstancy: float = 0.0
    refinement_delta: float | None = None
    oracle_gap: float | None = None
    dense_K: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("refinement_delta", "oracle_gap"):
            if d[key] is None:
                d[key] = "not run"
        return d


def ode_residual(u: FourierTrajectory, p: PotentialModel, dense_K: int | None = None) -> VerificationReport:
    """Sup and L2 norms of u'' + grad F(t, u) sampled at dense_K nodes."""
    K = dense_K or max(1024, 8 * u.M)
    t = u.nodes(K)
    r = u.evaluate(t, 2) + p.gradient(t, u.evaluate(t, 0))
    pointwise = np.linalg.norm(r, axis=1)
    _, tilde = u.decompose()
    return VerificationReport(
        residual_sup=float(pointwise.max()),
        residual_l2=float(math.sqrt(np.sum(pointwise**2) * u.period_T / K)),
        periodicity_defect=float(np.linalg.norm(u.evaluate(u.period_T) - u.evaluate(0.0))),
        nonconstancy=float(math.sqrt(tilde.l2_squared())),
        dense_K=K,
    )


# shooting oracle -------------------------------------------------------------


def _rhs(p, t, y, N):
    x = y[..., :N]
    v = y[..., N:]
    return np.concatenate([v, -p.gradient(np.full(y.shape[:-1], t), x)], axis=-1)


def _flow(p, y0, T, steps, keep=False):
    """RK4 over [0, T]; y0 has shape (B, 2N).  Returns the end states (and the path)."""
    N = y0.shape[-1] // 2
    h = T / steps
    y = np.array(y0, dtype=float)
    path = [y.copy()] if keep else None
    for n in range(steps):
        t = n * h
        k1 = _rhs(p, t, y, N)
        k2 = _rhs(p, t + 0.5 * h, y + 0.5 * h * k1, N)
        k3 = _rhs(p, t + 0.5 * h, y + 0.5 * h * k2, N)
        k4 = _rhs(p, t + h, y + h * k3, N)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if keep:
            path.append(y.copy())
    return y, (np.array(path) if keep else None)


def rk4_orbit(p: PotentialModel, y0, steps: int = 10_000):
    """Times and states (steps + 1, 2N) of the RK4 solution over one period."""
    y0 = np.asarray(y0, dtype=float)[None, :]
    _, path = _flow(p, y0, p.period_T, steps, keep=True)
    return np.linspace(0.0, p.period_T, steps + 1), path[:, 0, :]


@dataclass
class ShootingResult:
    converged: bool
    initial_state: np.ndarray
    times: np.ndarray
    states: np.ndarray
    defect: float
    newton_iterations: int
    halving_gap: float
    message: str = ""

    def positions(self) -> np.ndarray:
        return self.states[:, : self.states.shape[1] // 2]


def shooting_oracle(p: PotentialModel, T: float | None = None, ic_guess=None, N: int | None = None,
                    steps: int = 10_000, tol: float = 1e-10, max_newton: int = 50,
                    fd_step: float = 1e-7) -> ShootingResult:
    """Periodic orbit by Newton iteration on (u(0), u'(0)) of the RK4 flow map.

    The Jacobian of y0 -> phi_T(y0) - y0 comes from forward differences; all
    2N + 1 trajectories of a Newton step are integrated as one batch.  After
    convergence the orbit is re-integrated with half the step size and the
    largest difference is reported as ``halving_gap``.
    """
    N = N or p.dim_N
    T = T or p.period_T
    if abs(T - p.period_T) > 1e-12 * p.period_T:
        raise ValueError("oracle period must match the potential period")
    if steps < 10_000:
        raise ValueError("the oracle needs at least 1e4 steps per period")
    y = np.zeros(2 * N) if ic_guess is None else np.asarray(ic_guess, dtype=float).copy()
    eye = np.eye(2 * N)
    defect = math.inf
    converged = False
    message = ""
    it = 0
    for it in range(1, max_newton + 1):
        batch = np.vstack([y, y + fd_step * eye])
        end, _ = _flow(p, batch, T, steps)
        G0 = end[0] - y
        defect = float(np.linalg.norm(G0))
        if not np.isfinite(defect):
            message = "flow blew up"
            break
        if defect <= tol:
            converged = True
            break
        J = ((end[1:] - batch[1:]) - G0).T / fd_step
        try:
            dy = np.linalg.solve(J, -G0)
        except np.linalg.LinAlgError:
            message = "singular shooting Jacobian"
            break
        y = y + dy
    else:
        message = f"no convergence after {max_newton} Newton steps"
    times, states = rk4_orbit(p, y, steps)
    _, fine = rk4_orbit(p, y, 2 * steps)
    halving_gap = float(np.max(np.abs(fine[::2] - states)))
    return ShootingResult(converged, y, times, states, defect, it, halving_gap, message)


def oracle_gap(u: FourierTrajectory, oracle: ShootingResult, lattice: Lattice | None = None) -> float:
    """Sup-norm distance between ``u`` and the oracle orbit, modulo lattice shifts of the mean."""
    x = oracle.positions()
    ref = u.evaluate(oracle.times, 0)
    shift = np.zeros(u.dim_N)
    if lattice is not None:
        diff = np.mean(x[:-1], axis=0) - u.mean
        for i, per in lattice.directions():
            shift[i] = per * round(diff[i] / per)
    return float(np.max(np.linalg.norm(x - shift - ref, axis=1)))


def refinement_delta(result: SolveResult, p: PotentialModel, cfg: SolveConfig | None = None) -> float:
    """|f_M - f_2M| where the 2M solve starts from the M solution."""
    cfg = cfg or SolveConfig()
    u = result.trajectory
    fine_cfg = SolveConfig(**{**cfg.to_dict(), "M": 2 * u.M, "K": None})
    start = u.resized(2 * u.M)
    if result.method == "saddle_search":
        fine = saddle_search(p, fine_cfg, u0=start)
    else:
        fine = minimize_direct(start, p, cfg=fine_cfg)
    return abs(fine.f_value - result.f_value)


def verify_solution(result: SolveResult, p: PotentialModel, dense_K: int | None = None) -> VerificationReport:
    return ode_residual(result.trajectory, p, dense_K)


# property suite ----------------------------------------------------------------


@dataclass
class SuiteCheck:
    name: str
    passed: bool = True
    trials: int = 0
    worst: float = -math.inf
    tolerance: float = 0.0
    failures: list = field(default_factory=list)

    def record(self, margin: float, replay=None):
        """``margin`` is the tolerance-adjusted violation (<= 0 passes)."""
        self.trials += 1
        self.worst = max(self.worst, float(margin))
        if margin > 0:
            self.passed = False
            if replay is not None and len(self.failures) < 5:
                self.failures.append(replay)


@dataclass
class SuiteReport:
    trials: int
    seed: int
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "checks": {k: asdict(v) for k, v in self.checks.items()},
        }


def _random_zero_mean(rng, T, N, M):
    k = np.arange(1, M + 1)
    decay = rng.uniform(0.0, 2.0)
    scale = 1.0 / k**decay
    cos = rng.standard_normal((M, N)) * scale[:, None]
    sin = rng.standard_normal((M, N)) * scale[:, None]
    return FourierTrajectory(T, np.zeros(N), cos, sin)


def property_suite(trials: int = 1000, seed: int = 0, potential: PotentialModel | None = None) -> SuiteReport:
    """Randomized inequality and consistency checks; trial i uses seed + i.

    ``potential`` (default: a forced pendulum, recreated per trial with that
    trial's period) drives the gradient and translation checks.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    checks = {name: SuiteCheck(name, tolerance=tol) for name, tol in [
        ("poincare_wirtinger", 1e-12),
        ("sobolev", 1e-9),
        ("first_harmonic_equality", 1e-12),
        ("dft_round_trip", 1e-12),
        ("gradient_fd", 1e-6),
        ("translation_invariance", 1e-9),
    ]}
    for i in range(trials):
        rng = np.random.default_rng(seed + i)
        T = float(rng.uniform(0.5, 10.0))
        N = int(rng.integers(1, 4))
        M = int(rng.integers(1, 9))
        u = _random_zero_mean(rng, T, N, M)
        replay = {"trial": i, "trajectory": u.to_dict()}
        w1 = 2.0 * math.pi / T

        dot2 = 2.0 * u.kinetic_energy()
        l2 = u.l2_squared()
        checks["poincare_wirtinger"].record(-(dot2 - w1**2 * l2) / dot2 - 1e-12, replay)

        sup = u.sup_norm()
        sob = math.sqrt(T / 12.0) * math.sqrt(dot2)
        checks["sobolev"].record(sup / sob - 1.0 - 1e-9, replay)

        a, b = rng.standard_normal(N), rng.standard_normal(N)
        h = FourierTrajectory(T, np.zeros(N), np.vstack([a, np.zeros((M - 1, N))]),
                              np.vstack([b, np.zeros((M - 1, N))]))
        hd, hl = 2.0 * h.kinetic_energy(), h.l2_squared()
        checks["first_harmonic_equality"].record(abs(hd - w1**2 * hl) / hd - 1e-12, replay)

        K = 2 * M + 1 + int(rng.integers(0, 8))
        back = from_samples(u.sample(K), T, M)
        err = max(np.max(np.abs(back.cos - u.cos)), np.max(np.abs(back.sin - u.sin)), np.max(np.abs(back.mean)))
        checks["dft_round_trip"].record(err - 1e-12, replay)

        if potential is None:
            p = _suite_pendulum(rng, T, N)
            v = u.shifted(rng.uniform(-3.0, 3.0, N))
        else:
            p = potential
            v = _random_zero_mean(rng, p.period_T, p.dim_N, M).shifted(rng.uniform(-3.0, 3.0, p.dim_N))
        A = ActionFunctional(p, M)
        x = v.to_vector()
        _, g = A.value_and_grad(x)
        direction = rng.standard_normal(x.size)
        direction /= np.linalg.norm(direction)
        hstep = 1e-6
        fd = (A.value(x + hstep * direction) - A.value(x - hstep * direction)) / (2 * hstep)
        exact = float(g @ direction)
        checks["gradient_fd"].record(abs(fd - exact) / max(abs(exact), np.linalg.norm(g), 1e-3) - 1e-6, replay)
        if p.lattice is not None and p.lattice.has_period:
            i0, per = next(p.lattice.directions())
            moved = x.copy()
            moved[i0] += per
            f0, f1 = A.value(x), A.value(moved)
            checks["translation_invariance"].record(abs(f1 - f0) / (1.0 + abs(f0)) - 1e-9, replay)
    return SuiteReport(trials, seed, checks)


def _suite_pendulum(rng, T, N):
    cos = rng.standard_normal((2, N)) * 0.3
    sin = rng.standard_normal((2, N)) * 0.3
    return ForcedPendulum(float(rng.uniform(0.5, 2.0)), Forcing(T, cos, sin, np.zeros(N)))
