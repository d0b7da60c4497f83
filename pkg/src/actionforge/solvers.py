"""Critical points of the discrete action: direct minimization and saddle search.

``minimize_direct`` descends the action with a preconditioned limited-memory
quasi-Newton method and folds the mean back into the fundamental lattice cell
after each accepted step; the action is blind to lattice translations when
the time integral of F is lattice periodic.

``saddle_search`` runs a two-timescale descent-ascent: ascent along the
constants (R^N) and descent along the zero-mean harmonics.  The minimax value
of the saddle point theorem is not computed by deforming paths; the critical
value found is reported together with ``check_saddle_geometry`` as evidence.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .action import ActionFunctional
from .potential import PotentialModel, SampleGrid, check_F5_F6, check_lattice_integral, time_integral, time_threshold
from .trajectory import FourierTrajectory, Lattice

__all__ = [
    "GeometryReport",
    "NonFiniteActionError",
    "SolveConfig",
    "SolveResult",
    "TraceEntry",
    "check_saddle_geometry",
    "minimize_direct",
    "minimizing_sequence_diagnostic",
    "random_trajectory",
    "saddle_search",
    "sign_property",
]

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
NONCONSTANT_ENERGY = 1e-8


class NonFiniteActionError(FloatingPointError):
    """The action became non-finite; ``iterate`` holds the offending trajectory."""

    def __init__(self, message: str, iterate: FourierTrajectory):
        super().__init__(message)
        self.iterate = iterate


@dataclass
class SolveConfig:
    M: int = 16
    K: int | None = None
    max_iter: int = 2000
    grad_tol: float = 1e-10
    memory: int = 10
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    descent_step: float = 1.0
    ascent_step: float | None = None
    seed: int = 0
    divergence_norm: float = 1e6
    geometry_samples: int = 256
    geometry_energy: float = 10.0

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.M < 0:
            raise ValueError("M must be >= 0")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if not self.descent_step > 0:
            raise ValueError("descent_step must be > 0")
        if self.ascent_step is not None and not self.ascent_step > 0:
            raise ValueError("ascent_step must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TraceEntry:
    iteration: int
    f: float
    grad_norm: float
    cps: float
    velocity_norm: float
    mean: tuple
    flat: bool = False


@dataclass
class SolveResult:
    trajectory: FourierTrajectory
    f_value: float
    grad_norm: float
    iterations: int
    converged: bool
    cps_series: list
    trace: list
    method: str
    status: str
    message: str = ""
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def harmonic_energy(self) -> float:
        return self.trajectory.harmonic_energy()

    @property
    def nonconstant(self) -> bool:
        return self.harmonic_energy > NONCONSTANT_ENERGY

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "message": self.message,
            "converged": bool(self.converged),
            "f_value": float(self.f_value),
            "grad_norm": float(self.grad_norm),
            "iterations": int(self.iterations),
            "nonconstant": bool(self.nonconstant),
            "harmonic_energy": float(self.harmonic_energy),
            "trajectory": self.trajectory.to_dict(),
            "cps_series": [float(c) for c in self.cps_series],
            "config": self.config,
            **self.extra,
        }

    def trace_csv(self) -> str:
        lines = ["iter,f,grad_norm,cps"]
        for e in self.trace:
            lines.append(f"{e.iteration},{e.f!r},{e.grad_norm!r},{e.cps!r}")
        return "\n".join(lines) + "\n"


def random_trajectory(p: PotentialModel, M: int, seed: int, lattice: Lattice | None = None) -> FourierTrajectory:
    """Mean uniform in the cell (or [-1, 1]^N), harmonics Gaussian with scale 0.1 / k^2."""
    rng = np.random.default_rng(seed)
    N = p.dim_N
    lo = np.full(N, -1.0)
    hi = np.full(N, 1.0)
    if lattice is not None:
        for i, period in lattice.directions():
            lo[i], hi[i] = 0.0, period
    mean = rng.uniform(lo, hi)
    scale = 0.1 / np.arange(1, M + 1) ** 2
    cos = rng.standard_normal((M, N)) * scale[:, None]
    sin = rng.standard_normal((M, N)) * scale[:, None]
    return FourierTrajectory(p.period_T, mean, cos, sin)


def _preconditioner(A: ActionFunctional) -> np.ndarray:
    d = np.ones(A.size)
    harm = 1.0 / (1.0 + 0.5 * A.T * A.w**2)
    d[A.N :] = np.repeat(harm, 2 * A.N)
    return d


def _equiv_norm(A: ActionFunctional, x) -> float:
    return math.sqrt(2.0 * A.kinetic(x)) + A.T * float(np.linalg.norm(x[: A.N]))


def _entry(A, it, f, g, x, flat=False) -> TraceEntry:
    gn = float(np.linalg.norm(g))
    return TraceEntry(it, float(f), gn, (1.0 + _equiv_norm(A, x)) * gn, math.sqrt(2.0 * A.kinetic(x)),
                      tuple(float(v) for v in x[: A.N]), flat)


def _two_loop(g, pairs, D):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    gamma = 1.0
    if pairs:
        s, y, _ = pairs[-1]
        gamma = (s @ y) / (y @ (D * y))
    r = gamma * D * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ r)
        r += s * (a - b)
    return r


def minimize_direct(u0: FourierTrajectory | None, p: PotentialModel, lattice: Lattice | None = None,
                    cfg: SolveConfig | None = None) -> SolveResult:
    """Minimize the action from ``u0`` (random start from ``cfg.seed`` if None).

    Steps are accepted on the Armijo condition.  Once the predicted decrease
    drops below the rounding level of f, a unit step is accepted instead when
    it lowers the gradient norm and raises f by no more than that level; such
    steps are marked ``flat`` in the trace.
    """
    cfg = cfg or SolveConfig()
    lattice = lattice if lattice is not None else p.lattice
    if u0 is None:
        u0 = random_trajectory(p, cfg.M, cfg.seed, lattice)
    if lattice is not None and lattice.has_period:
        probe = SampleGrid.default(p, nx=9).x
        rep = check_lattice_integral(p, lattice, probe)
        if not rep.passed:
            warnings.warn(f"potential fails the lattice integral condition (discrepancy {rep.magnitude:.3g}); "
                          "mean reduction may change the action", RuntimeWarning, stacklevel=2)
    A = ActionFunctional(p, u0.M, cfg.K)
    D = _preconditioner(A)
    x = u0.to_vector()

    def fg(v):
        f, g = A.value_and_grad(v)
        return f, g

    f, g = fg(x)
    if not np.isfinite(f):
        raise NonFiniteActionError("action is not finite at the initial point", u0)
    gnorm = float(np.linalg.norm(g))
    trace = [_entry(A, 0, f, g, x)]
    best = (f, x.copy(), g.copy())
    pairs = deque(maxlen=cfg.memory)
    status = "max_iter"
    converged = False
    it = 0
    while True:
        if gnorm <= cfg.grad_tol:
            status, converged = "converged", True
            break
        if it >= cfg.max_iter:
            break
        d = -_two_loop(g, list(pairs), D)
        gd = float(g @ d)
        if not gd < 0:
            pairs.clear()
            d = -D * g
            gd = float(g @ d)
        flat_tol = 64.0 * _EPS * (1.0 + abs(f))
        flat_regime = abs(gd) <= flat_tol
        alpha = 1.0
        accepted = False
        flat = False
        any_finite = False
        for _ in range(cfg.max_backtracks):
            x_try = x + alpha * d
            f_try, g_try = fg(x_try)
            if np.isfinite(f_try):
                any_finite = True
                if f_try <= f + cfg.armijo_c * alpha * gd:
                    accepted = True
                    break
                if flat_regime and np.linalg.norm(g_try) < gnorm and f_try <= f + flat_tol:
                    accepted = flat = True
                    break
            alpha *= cfg.backtrack
        if not accepted:
            if not any_finite:
                raise NonFiniteActionError("action is non-finite along the search direction", A.trajectory(x))
            status = "line_search_failed"
            break
        it += 1
        s = x_try - x
        y = g_try - g
        sy = float(s @ y)
        if sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x = x_try
        if lattice is not None:
            x[: A.N] = lattice.reduce(x[: A.N])
        f, g = f_try, g_try
        gnorm = float(np.linalg.norm(g))
        trace.append(_entry(A, it, f, g, x, flat))
        if f <= best[0]:
            best = (f, x.copy(), g.copy())
        log.debug("iter %d f=%.16g |g|=%.3e alpha=%g%s", it, f, gnorm, alpha, " flat" if flat else "")

    if not converged:
        f, x, g = best
        gnorm = float(np.linalg.norm(g))
    message = {
        "converged": f"gradient norm {gnorm:.3e} <= {cfg.grad_tol:g}",
        "max_iter": f"stopped after {cfg.max_iter} iterations, returning best iterate",
        "line_search_failed": "no acceptable step along the search direction",
    }[status]
    return SolveResult(
        trajectory=A.trajectory(x),
        f_value=float(f),
        grad_norm=gnorm,
        iterations=it,
        converged=converged,
        cps_series=[e.cps for e in trace],
        trace=trace,
        method="minimize_direct",
        status=status,
        message=message,
        config=cfg.to_dict(),
    )


def saddle_search(p: PotentialModel, cfg: SolveConfig | None = None, R: float | None = None,
                  u0: FourierTrajectory | None = None) -> SolveResult:
    """Descent-ascent toward a critical point linking R^N and the zero-mean subspace.

    The mean block moves uphill with ``ascent_step`` (default half of
    ``descent_step``), scaled by 1/T; harmonic k moves downhill scaled by
    1 / (1 + T w_k^2 / 2).  A step that increases the gradient norm is
    rejected and the step size of the block whose gradient grew is halved;
    accepted steps let both recover toward the configured values.  ``R`` is
    only recorded.
    """
    cfg = cfg or SolveConfig()
    if u0 is None:
        u0 = random_trajectory(p, cfg.M, cfg.seed)
    A = ActionFunctional(p, u0.M, cfg.K)
    N = A.N
    P = _preconditioner(A)
    P[:N] = 1.0 / A.T
    eta_d0 = cfg.descent_step
    eta_a0 = cfg.ascent_step if cfg.ascent_step is not None else 0.5 * eta_d0
    eta_d, eta_a = eta_d0, eta_a0
    x = u0.to_vector()
    f, g = A.value_and_grad(x)
    if not np.isfinite(f):
        raise NonFiniteActionError("action is not finite at the initial point", u0)
    gnorm = float(np.linalg.norm(g))
    trace = [_entry(A, 0, f, g, x)]
    status = "max_iter"
    converged = False
    it = 0
    accepted_steps = 0
    while True:
        if gnorm <= cfg.grad_tol:
            status, converged = "converged", True
            break
        if it >= cfg.max_iter:
            break
        it += 1
        step = -eta_d * P * g
        step[:N] = eta_a * P[:N] * g[:N]
        x_try = x + step
        if not np.all(np.isfinite(x_try)) or np.linalg.norm(x_try) > cfg.divergence_norm:
            status = "diverged"
            break
        f_try, g_try = A.value_and_grad(x_try)
        if not np.isfinite(f_try):
            status = "diverged"
            break
        gn_try = float(np.linalg.norm(g_try))
        if gn_try > gnorm:
            # shrink the block whose gradient grew; both if neither alone did
            up_a = np.linalg.norm(g_try[:N]) > np.linalg.norm(g[:N])
            up_d = np.linalg.norm(g_try[N:]) > np.linalg.norm(g[N:])
            if up_a or not up_d:
                eta_a *= 0.5
            if up_d or not up_a:
                eta_d *= 0.5
            if eta_d < 1e-14 * eta_d0 or eta_a < 1e-14 * eta_a0:
                status = "stalled"
                break
            continue
        x, f, g, gnorm = x_try, f_try, g_try, gn_try
        accepted_steps += 1
        eta_d = min(eta_d0, eta_d * 1.25)
        eta_a = min(eta_a0, eta_a * 1.25)
        trace.append(_entry(A, it, f, g, x))

    u = A.trajectory(x)
    message = {
        "converged": f"gradient norm {gnorm:.3e} <= {cfg.grad_tol:g}",
        "max_iter": f"stopped after {cfg.max_iter} iterations",
        "diverged": (f"iterate norm exceeded {cfg.divergence_norm:g}; the linking geometry "
                     "(sup over the sphere < inf over zero-mean curves) may be violated"),
        "stalled": "step sizes collapsed without reducing the gradient norm",
    }[status]
    result = SolveResult(
        trajectory=u,
        f_value=float(f),
        grad_norm=gnorm,
        iterations=it,
        converged=converged,
        cps_series=[e.cps for e in trace],
        trace=trace,
        method="saddle_search",
        status=status,
        message=message,
        config=cfg.to_dict(),
        extra={"R": R, "accepted_steps": accepted_steps},
    )
    result.extra["constant_solution"] = not result.nonconstant
    return result


@dataclass
class GeometryReport:
    sup_sphere: float
    inf_zero_mean: float
    holds: bool
    R: float
    sphere_samples: int
    zero_mean_samples: int
    sphere_witness: list
    threshold_ok: bool | None = None
    threshold: float | None = None
    b: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


def _sphere(N: int, R: float, rng) -> np.ndarray:
    if N == 1:
        pts = np.array([[-1.0], [1.0]])
    elif N == 2:
        th = np.linspace(0.0, 2 * np.pi, 360, endpoint=False)
        pts = np.stack([np.cos(th), np.sin(th)], axis=-1)
    elif N == 3:
        n = 2000
        i = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * i / n)
        th = np.pi * (1 + 5**0.5) * i
        pts = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=-1)
    else:
        v = rng.standard_normal((2000, N))
        pts = v / np.linalg.norm(v, axis=1, keepdims=True)
    return R * pts


def check_saddle_geometry(p: PotentialModel, R: float, cfg: SolveConfig | None = None,
                          b: float | None = None) -> GeometryReport:
    """Sampled test of sup_{|c| = R} f(c) < inf over zero-mean curves of f.

    Constants c on the sphere give f(c) = -int F(t, c) dt.  Zero-mean curves
    are drawn with kinetic energy up to ``cfg.geometry_energy`` (the zero
    curve included).  When ``b`` is given, also flags T < sqrt(2 / b) pi.
    """
    if not R > 0:
        raise ValueError("R must be > 0")
    cfg = cfg or SolveConfig()
    rng = np.random.default_rng(cfg.seed)
    N = p.dim_N
    pts = _sphere(N, R, rng)
    f_sphere = -time_integral(p, pts, max(64, 4 * (cfg.M + 1)))
    j = int(np.argmax(f_sphere))
    sup = float(f_sphere[j])

    M = max(cfg.M, 1)
    A = ActionFunctional(p, M, cfg.K)
    k = np.arange(1, M + 1)
    values = [A.value(np.zeros(A.size))]
    for _ in range(cfg.geometry_samples):
        coeff = rng.standard_normal((M, 2, N)) / k[:, None, None] ** 2
        vec = np.concatenate([np.zeros(N), coeff.ravel()])
        kin = A.kinetic(vec)
        energy = rng.uniform(0.0, cfg.geometry_energy)
        if kin > 0:
            vec *= math.sqrt(energy / kin)
        values.append(A.value(vec))
    inf = float(np.min(values))
    rep = GeometryReport(sup, inf, bool(sup < inf), float(R), len(pts), len(values), pts[j].tolist())
    if b is not None:
        rep.b = float(b)
        rep.threshold = time_threshold(b)
        rep.threshold_ok = bool(p.period_T < rep.threshold)
    return rep


def minimizing_sequence_diagnostic(result: SolveResult, C1: float | None = None, C2: float | None = None,
                                   lattice: Lattice | None = None, window: int = 10,
                                   slack: float = 0.5) -> dict:
    """Check boundedness, cell confinement and the (1 + |u|) |f'(u)| trend along a trace.

    (i) with growth constants C1, C2 (|F| <= C1 |x|^2 + C2 and
        C1 < (1/2)(2 pi / T)^2) every iterate obeys
        ||u'||^2 <= (f + C1 T |mean|^2 + C2 T) / (1/2 - C1 (T / 2 pi)^2);
        the check uses the largest f and mean seen along the trace.
    (ii) means after the first accepted step lie in [0, T_i) for lattice
        coordinates.
    (iii) the log10 of the cps series, averaged over a sliding window, never
        rises by more than ``slack`` decades and ends below where it started.
    """
    trace = result.trace
    if not trace:
        raise ValueError("empty trace")
    T = result.trajectory.period_T
    out = {"length": len(trace)}

    if C1 is None or C2 is None:
        out["bounded"] = {"checked": False, "passed": True}
    else:
        denom = 0.5 - C1 * (T / (2 * math.pi)) ** 2
        if not denom > 0:
            raise ValueError("C1 must be below (1/2)(2 pi / T)^2")
        f_max = max(e.f for e in trace)
        if lattice is not None and lattice.has_period:
            periodic = dict(lattice.directions())
            free = max(sum(v * v for i, v in enumerate(e.mean) if i not in periodic) for e in trace)
            mean_sq = free + sum(per**2 for per in periodic.values())
        else:
            mean_sq = max(float(np.sum(np.square(e.mean))) for e in trace)
        bound = math.sqrt(max(0.0, (f_max + C1 * T * mean_sq + C2 * T) / denom))
        worst = max(e.velocity_norm for e in trace)
        out["bounded"] = {"checked": True, "passed": bool(worst <= bound * (1 + 1e-12)),
                          "bound": bound, "max_velocity_norm": worst}

    if lattice is None or not lattice.has_period:
        out["in_cell"] = {"checked": False, "passed": True}
    else:
        bad = [e.iteration for e in trace[1:]
               if any(not (0.0 <= e.mean[i] < per) for i, per in lattice.directions())]
        out["in_cell"] = {"checked": True, "passed": not bad, "violations": bad[:10]}

    cps = np.array([e.cps for e in trace], dtype=float)
    if cps.size <= 1:
        out["cps_trend"] = {"checked": False, "passed": True}
    else:
        logc = np.log10(np.maximum(cps, 1e-300))
        w = min(window, logc.size)
        smooth = np.convolve(logc, np.ones(w) / w, mode="valid")
        rises = np.diff(smooth)
        max_rise = float(rises.max()) if rises.size else 0.0
        ok = max_rise <= slack and (smooth[-1] < smooth[0] or smooth.size == 1 and logc[-1] <= logc[0])
        out["cps_trend"] = {"checked": True, "passed": bool(ok), "max_rise_decades": max_rise,
                            "start": float(smooth[0]), "end": float(smooth[-1])}
    out["passed"] = all(out[k]["passed"] for k in ("bounded", "in_cell", "cps_trend"))
    return out


def sign_property(result: SolveResult, p: PotentialModel, b: float, x_grid=None) -> dict:
    """Sign of the critical value at a non-constant saddle result.

    Applicable when the search converged to a non-constant curve, the time
    integral of F is >= 0 at all sampled constants, F <= b |x|^2 on the grid
    and T < sqrt(2 / b) pi.  Then the value is expected to be positive.
    """
    grid = SampleGrid.default(p) if x_grid is None else SampleGrid(SampleGrid.default(p).t, np.asarray(x_grid))
    integral_ok = bool(np.all(time_integral(p, grid.x) >= -1e-12))
    f6 = check_F5_F6(p, 1.0, 1.0, b, grid)
    applicable = (result.converged and result.nonconstant and integral_ok and f6["F6"].passed
                  and f6["T_threshold"].passed)
    return {
        "applicable": bool(applicable),
        "holds": bool(result.f_value > 0) if applicable else None,
        "integral_nonnegative": integral_ok,
        "F6": bool(f6["F6"].passed),
        "threshold": bool(f6["T_threshold"].passed),
    }
