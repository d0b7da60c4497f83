"""Potentials F(t, x) with gradients, builtin models and sampled hypothesis audits.

All potentials are vectorized: ``value(t, x)`` accepts ``t`` of shape (...)
and ``x`` of shape (..., N) (broadcast together) and returns shape (...);
``gradient`` returns shape (..., N).

The checkers certify nothing beyond the sampled domain they report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as _expr
from .trajectory import Lattice

__all__ = [
    "ExpressionPotential",
    "ForcedPendulum",
    "ForcedPotential",
    "Forcing",
    "FunctionPotential",
    "HypothesisReport",
    "LinearOscillator",
    "Pendulum",
    "PotentialModel",
    "SampleGrid",
    "SoftWell",
    "check_A",
    "check_F1",
    "check_F3",
    "check_F4",
    "check_F5_F6",
    "check_lattice_integral",
    "threshold_report",
    "time_integral",
    "time_threshold",
]


class PotentialModel:
    """Base class: F(t, x), its x-gradient, time period T and optional lattice."""

    name = "potential"

    def __init__(self, period_T: float, dim_N: int = 1, lattice: Lattice | None = None):
        if not period_T > 0:
            raise ValueError("T must be > 0")
        if dim_N < 1:
            raise ValueError("N must be >= 1")
        if lattice is not None and lattice.dim != dim_N:
            raise ValueError(f"lattice has {lattice.dim} periods but N={dim_N}")
        self.period_T = float(period_T)
        self.dim_N = int(dim_N)
        self.lattice = lattice

    def value(self, t, x):
        raise NotImplementedError

    def gradient(self, t, x):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(T={self.period_T}, N={self.dim_N})"


class FunctionPotential(PotentialModel):
    """Wraps user-supplied vectorized callables."""

    name = "function"

    def __init__(self, value: Callable, gradient: Callable, period_T: float, dim_N: int = 1,
                 lattice: Lattice | None = None):
        super().__init__(period_T, dim_N, lattice)
        self._value = value
        self._gradient = gradient

    def value(self, t, x):
        return np.asarray(self._value(t, x), dtype=float)

    def gradient(self, t, x):
        return np.asarray(self._gradient(t, x), dtype=float)


@dataclass(frozen=True)
class Forcing:
    """Vector forcing e(t) = mean + sum_k [c_k cos(w_k t) + s_k sin(w_k t)], w_k = 2 pi k / T.

    ``cos``/``sin`` have shape (K, N).
    """

    period_T: float
    cos: np.ndarray
    sin: np.ndarray
    mean: np.ndarray = field(default=None)

    def __post_init__(self):
        cos = np.asarray(self.cos, dtype=float)
        sin = np.asarray(self.sin, dtype=float)
        if self.mean is not None:
            mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
            N = mean.size
        else:
            N = next((a.shape[-1] for a in (cos, sin) if a.ndim == 2), 1)
            mean = np.zeros(N)
        cos = cos.reshape(-1, N)
        sin = sin.reshape(-1, N)
        n = max(cos.shape[0], sin.shape[0])
        object.__setattr__(self, "cos", _pad_rows(cos, n))
        object.__setattr__(self, "sin", _pad_rows(sin, n))
        object.__setattr__(self, "mean", mean)

    @classmethod
    def zero(cls, period_T: float, dim_N: int = 1) -> "Forcing":
        return cls(period_T, np.zeros((0, dim_N)), np.zeros((0, dim_N)), np.zeros(dim_N))

    @classmethod
    def scalar(cls, period_T: float, cos=(), sin=(), mean: float = 0.0) -> "Forcing":
        """One-dimensional forcing from coefficient lists (harmonic 1 first)."""
        return cls(period_T, cos, sin, [mean])

    def scaled(self, factor: float) -> "Forcing":
        return Forcing(self.period_T, factor * self.cos, factor * self.sin, factor * self.mean)

    @property
    def dim_N(self) -> int:
        return self.mean.shape[0]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.cos.shape[0] + 1)
        phase = t[..., None] * (2.0 * np.pi / self.period_T) * k
        return self.mean + np.cos(phase) @ self.cos + np.sin(phase) @ self.sin

    def sup_bound(self) -> float:
        """Upper bound on max_t |e(t)| from the coefficient sizes."""
        amp = np.linalg.norm(self.cos, axis=1) + np.linalg.norm(self.sin, axis=1)
        return float(np.linalg.norm(self.mean) + amp.sum())


def _pad_rows(a, n):
    if a.shape[0] >= n:
        return a
    return np.vstack([a, np.zeros((n - a.shape[0], a.shape[1]))])


class ForcedPotential(PotentialModel):
    """F(t, x) = F0(t, x) - e(t) . x, absorbing an external forcing into the potential."""

    name = "forced"

    def __init__(self, base: PotentialModel, forcing: Forcing, lattice: Lattice | None = None):
        super().__init__(base.period_T, base.dim_N, lattice if lattice is not None else base.lattice)
        if forcing.dim_N != base.dim_N:
            raise ValueError("forcing dimension does not match potential")
        self.base = base
        self.forcing = forcing

    def value(self, t, x):
        x = np.asarray(x, dtype=float)
        return self.base.value(t, x) - np.sum(self.forcing(t) * x, axis=-1)

    def gradient(self, t, x):
        x = np.asarray(x, dtype=float)
        return self.base.gradient(t, x) - self.forcing(t) + np.zeros_like(x)


class Pendulum(PotentialModel):
    """Unforced F(x) = -a sum_i cos x_i."""

    name = "pendulum"

    def __init__(self, a: float, period_T: float, dim_N: int = 1):
        super().__init__(period_T, dim_N, Lattice.uniform(2.0 * np.pi, dim_N))
        self.a = float(a)

    def value(self, t, x):
        x = np.asarray(x, dtype=float)
        return -self.a * np.sum(np.cos(x), axis=-1) + 0.0 * np.asarray(t, float)

    def gradient(self, t, x):
        x = np.asarray(x, dtype=float)
        return self.a * np.sin(x) + 0.0 * np.asarray(t, float)[..., None]


class ForcedPendulum(ForcedPotential):
    """F(t, x) = -a cos x - e(t) x, so that u'' = -a sin u + e(t).

    The forcing must have zero time average; this is what makes the time
    integral of F invariant under x -> x + 2 pi.
    """

    name = "pendulum"

    def __init__(self, a: float, forcing: Forcing | None = None, period_T: float | None = None,
                 dim_N: int | None = None):
        if forcing is None:
            if period_T is None:
                raise ValueError("need a forcing or a period")
            forcing = Forcing.zero(period_T, dim_N or 1)
        if not a > 0:
            raise ValueError("pendulum amplitude a must be > 0")
        if np.any(forcing.mean != 0.0):
            raise ValueError("pendulum forcing must have zero time average")
        super().__init__(Pendulum(a, forcing.period_T, forcing.dim_N), forcing)
        self.a = float(a)


class SoftWell(PotentialModel):
    """F(x) = delta * (1 - exp(-|x|^2)); bounded, F -> delta at infinity."""

    name = "soft_well"

    def __init__(self, delta: float, period_T: float, dim_N: int = 1):
        super().__init__(period_T, dim_N)
        self.delta = float(delta)

    def value(self, t, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return self.delta * -np.expm1(-r2) + 0.0 * np.asarray(t, float)

    def gradient(self, t, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return 2.0 * self.delta * x * np.exp(-r2)[..., None] + 0.0 * np.asarray(t, float)[..., None]


class LinearOscillator(PotentialModel):
    """F(t, x) = (w0^2 / 2) |x|^2 - eps cos(w t) sum_i x_i.

    Periodic solutions are u_i(t) = eps / (w0^2 - w^2) cos(w t) when w is a
    harmonic of 2 pi / T.
    """

    name = "linear_oscillator"

    def __init__(self, omega0: float, omega: float, eps: float, period_T: float, dim_N: int = 1):
        super().__init__(period_T, dim_N)
        self.omega0 = float(omega0)
        self.omega = float(omega)
        self.eps = float(eps)

    def amplitude(self) -> float:
        return self.eps / (self.omega0**2 - self.omega**2)

    def value(self, t, x):
        x = np.asarray(x, dtype=float)
        drive = self.eps * np.cos(self.omega * np.asarray(t, float))
        return 0.5 * self.omega0**2 * np.sum(x * x, axis=-1) - drive * np.sum(x, axis=-1)

    def gradient(self, t, x):
        x = np.asarray(x, dtype=float)
        drive = self.eps * np.cos(self.omega * np.asarray(t, float))
        return self.omega0**2 * x - drive[..., None]


class ExpressionPotential(PotentialModel):
    """Potential given by a formula in t, x1..xN; the gradient is symbolic."""

    name = "expr"

    def __init__(self, formula: str, period_T: float, dim_N: int = 1, lattice: Lattice | None = None):
        super().__init__(period_T, dim_N, lattice)
        self.formula = formula
        self.ast = _expr.parse(formula, dim_N)
        self.grad_ast = _expr.gradient(self.ast, dim_N)

    def value(self, t, x):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(t.shape, x.shape[:-1])
        return np.broadcast_to(_expr.evaluate(self.ast, t, x), shape).astype(float)

    def gradient(self, t, x):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(t.shape, x.shape[:-1])
        parts = [np.broadcast_to(_expr.evaluate(g, t, x), shape) for g in self.grad_ast]
        return np.stack(parts, axis=-1).astype(float)


# numerical helpers ---------------------------------------------------------


def time_integral(p: PotentialModel, x, K: int = 64) -> np.ndarray:
    """Integral over [0, T] of F(t, x) by the periodic trapezoid rule, for each x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.arange(K) * (p.period_T / K)
    vals = p.value(t[:, None], x[None, :, :])
    return vals.sum(axis=0) * (p.period_T / K)


def time_threshold(b: float) -> float:
    """Largest admissible period sqrt(2 / b) * pi for the saddle geometry."""
    if not b > 0:
        raise ValueError("b must be > 0")
    return math.sqrt(2.0 / b) * math.pi


# hypothesis reports --------------------------------------------------------


@dataclass
class HypothesisReport:
    """Outcome of one sampled hypothesis audit.

    ``worst_violation`` is the largest tolerance-adjusted excess over the
    grid, so it is <= 0 exactly when the check passed.  ``magnitude`` is the
    raw quantity the check bounds (e.g. the largest discrepancy).
    """

    condition: str
    passed: bool
    worst_violation: float
    witness: tuple | None
    samples_used: int
    code: str = "ok"
    magnitude: float = 0.0
    domain: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        witness = None
        if self.witness is not None:
            t, x = self.witness
            witness = {"t": float(t), "x": [float(v) for v in np.atleast_1d(x)]}
        return {
            "condition": self.condition,
            "passed": bool(self.passed),
            "code": self.code,
            "worst_violation": float(self.worst_violation),
            "magnitude": float(self.magnitude),
            "witness": witness,
            "samples_used": int(self.samples_used),
            "domain": self.domain,
            "details": self.details,
        }


@dataclass
class SampleGrid:
    """Product grid: times ``t`` (Kt,) and positions ``x`` (P, N)."""

    t: np.ndarray
    x: np.ndarray
    x_lo: float = -10.0
    x_hi: float = 10.0

    @classmethod
    def default(cls, p: PotentialModel, nt: int = 64, nx: int = 41, x_lo: float = -10.0,
                x_hi: float = 10.0) -> "SampleGrid":
        t = np.arange(nt) * (p.period_T / nt)
        axis = np.linspace(x_lo, x_hi, nx)
        mesh = np.meshgrid(*([axis] * p.dim_N), indexing="ij")
        x = np.stack([m.ravel() for m in mesh], axis=-1)
        return cls(t, x, x_lo, x_hi)

    @property
    def size(self) -> int:
        return self.t.size * self.x.shape[0]

    def describe(self) -> str:
        return (f"t: {self.t.size} nodes in [0, T); x: {self.x.shape[0]} points "
                f"in [{self.x_lo:g}, {self.x_hi:g}]^N")

    def witness(self, flat_index: int):
        it, ix = np.unravel_index(flat_index, (self.t.size, self.x.shape[0]))
        return float(self.t[it]), self.x[ix].copy()


def _report(condition, excess, grid, magnitude=0.0, code=None, details=None, witness_override=None):
    """Build a report from an excess array on the (t, x) product grid."""
    excess = np.asarray(excess, dtype=float)
    flat = excess.ravel()
    if flat.size == 0:
        raise ValueError("empty grid")
    nonfinite = ~np.isfinite(flat)
    if np.any(nonfinite):
        idx = int(np.argmax(nonfinite))
        return HypothesisReport(condition, False, math.inf, grid.witness(idx), flat.size, code or "non_finite",
                                math.inf, grid.describe(), details or {})
    idx = int(np.argmax(flat))
    worst = float(flat[idx])
    passed = worst <= 0.0
    if code is None:
        code = "ok" if passed else "pointwise"
    witness = witness_override if witness_override is not None else grid.witness(idx)
    return HypothesisReport(condition, passed, worst, witness, flat.size, code, float(magnitude),
                            grid.describe(), details or {})


def _eval_grid(p, grid, fn="value", t_shift=0.0):
    t = grid.t + t_shift
    if fn == "value":
        return p.value(t[:, None], grid.x[None, :, :])
    return p.gradient(t[:, None], grid.x[None, :, :])


def check_F1(p: PotentialModel, grid: SampleGrid | None = None, rtol: float = 1e-9) -> HypothesisReport:
    """Time periodicity F(t + T, x) = F(t, x) on the grid."""
    grid = grid or SampleGrid.default(p)
    F = _eval_grid(p, grid)
    Fs = _eval_grid(p, grid, t_shift=p.period_T)
    diff = np.abs(Fs - F)
    excess = diff - rtol * (1.0 + np.abs(F))
    return _report("F1", excess, grid, magnitude=float(np.nanmax(diff)))


def check_lattice_integral(p: PotentialModel, lattice: Lattice | None = None, x_grid=None, K: int = 64,
                           rtol: float = 1e-8) -> HypothesisReport:
    """Compare time integrals of F at x and x + T_i e_i for every lattice direction."""
    lattice = lattice if lattice is not None else p.lattice
    if lattice is None or not lattice.has_period:
        raise ValueError("lattice check needs at least one period")
    if x_grid is None:
        x_grid = SampleGrid.default(p).x
    x_grid = np.atleast_2d(np.asarray(x_grid, dtype=float))
    base = time_integral(p, x_grid, K)
    excess = []
    disc = []
    for i, period in lattice.directions():
        shifted = x_grid.copy()
        shifted[:, i] += period
        moved = time_integral(p, shifted, K)
        d = np.abs(moved - base)
        disc.append(d)
        excess.append(d - rtol * (1.0 + np.maximum(np.abs(base), np.abs(moved))))
    excess = np.stack(excess)  # (directions, P)
    disc = np.stack(disc)
    flat = excess.ravel()
    idx = int(np.argmax(flat))
    di, ix = np.unravel_index(idx, excess.shape)
    worst = float(flat[idx])
    dirs = [i for i, _ in lattice.directions()]
    return HypothesisReport(
        "lattice_integral",
        bool(worst <= 0.0),
        worst,
        (0.0, x_grid[ix].copy()),
        int(x_grid.shape[0] * len(dirs) * 2 * K),
        "ok" if worst <= 0.0 else "pointwise",
        float(disc.max()),
        f"x: {x_grid.shape[0]} points; quadrature K={K}",
        {"direction": int(dirs[di]), "periods": lattice.to_json()},
    )


def check_F3(p: PotentialModel, C1: float, C2: float, grid: SampleGrid | None = None,
             rtol: float = 1e-9) -> HypothesisReport:
    """Quadratic growth bound |F| <= C1 |x|^2 + C2 and the threshold C1 < (1/2)(2 pi / T)^2."""
    if not (C1 > 0 and C2 > 0):
        raise ValueError("C1 and C2 must be > 0")
    grid = grid or SampleGrid.default(p)
    F = _eval_grid(p, grid)
    bound = C1 * np.sum(grid.x**2, axis=-1)[None, :] + C2
    excess = np.abs(F) - bound - rtol * (1.0 + bound)
    limit = 0.5 * (2.0 * math.pi / p.period_T) ** 2
    rep = _report("F3", excess, grid, magnitude=float(np.max(np.abs(F) - bound)),
                  details={"C1": C1, "C2": C2, "C1_limit": limit})
    if not C1 < limit:
        rep.passed = False
        rep.code = "threshold"
        rep.worst_violation = max(rep.worst_violation, C1 - limit, np.nextafter(0.0, 1.0))
    return rep


def check_F4(p: PotentialModel, mu1: float, mu2: float, grid: SampleGrid | None = None,
             rtol: float = 1e-9) -> HypothesisReport:
    """grad F(t,x) . x <= mu1 F(t,x) + mu2 on the grid; requires mu1 < 2."""
    if not mu1 < 2:
        raise ValueError(f"mu1 must be < 2, got {mu1}")
    grid = grid or SampleGrid.default(p)
    F = _eval_grid(p, grid)
    G = _eval_grid(p, grid, "gradient")
    lhs = np.sum(G * grid.x[None, :, :], axis=-1)
    rhs = mu1 * F + mu2
    gap = lhs - rhs
    excess = gap - rtol * (1.0 + np.abs(rhs))
    return _report("F4", excess, grid, magnitude=float(np.max(gap)), details={"mu1": mu1, "mu2": mu2})


def check_F5_F6(p: PotentialModel, delta: float, R: float, b: float, grid: SampleGrid | None = None,
                rtol: float = 1e-9, n_annulus: int = 33) -> dict:
    """Audit F > delta on the annulus R <= |x| <= 2R and F <= b |x|^2 on the grid.

    The annulus stands in for the limit |x| -> infinity and a value within
    the relative tolerance of delta counts as meeting it.  Returns reports
    under keys "F5", "F6" and "T_threshold".
    """
    if not (delta > 0 and R > 0 and b > 0):
        raise ValueError("delta, R and b must be > 0")
    grid = grid or SampleGrid.default(p)
    # annulus points: radial shells times directions
    radii = np.linspace(R, 2.0 * R, n_annulus)
    dirs = _sphere_directions(p.dim_N, 64)
    ax = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, p.dim_N)
    ann = SampleGrid(grid.t, ax, R, 2 * R)
    F_ann = _eval_grid(p, ann)
    excess5 = delta - F_ann - rtol * (1.0 + delta)
    f5 = _report("F5", excess5, ann, magnitude=float(np.min(F_ann)), details={"delta": delta, "R": R})
    f5.domain = f"annulus {R:g} <= |x| <= {2 * R:g}; t: {grid.t.size} nodes"

    F = _eval_grid(p, grid)
    bound = b * np.sum(grid.x**2, axis=-1)[None, :]
    excess6 = F - bound - rtol * (1.0 + np.abs(bound))
    f6 = _report("F6", excess6, grid, magnitude=float(np.max(F - bound)), details={"b": b})

    thr = threshold_report(p.period_T, b)
    return {"F5": f5, "F6": f6, "T_threshold": thr}


def threshold_report(T: float, b: float) -> HypothesisReport:
    """Arithmetic flag T < sqrt(2 / b) pi."""
    limit = time_threshold(b)
    ok = T < limit
    worst = T - limit if (ok or T > limit) else np.nextafter(0.0, 1.0)
    return HypothesisReport("T_threshold", ok, float(worst), None, 1, "ok" if ok else "threshold", limit,
                            "arithmetic", {"T": T, "limit": limit, "b": b})


def _sphere_directions(N: int, count: int) -> np.ndarray:
    if N == 1:
        return np.array([[-1.0], [1.0]])
    if N == 2:
        th = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if N == 3:
        # Fibonacci lattice on the sphere
        i = np.arange(count) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / count)
        th = np.pi * (1.0 + 5**0.5) * i
        return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=-1)
    rng = np.random.default_rng(0)
    v = rng.standard_normal((count, N))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_A(p: PotentialModel, grid: SampleGrid | None = None, slabs=None) -> HypothesisReport:
    """Finiteness and per-slab bounds of F and grad F on |x| <= r.

    This is a sampled proxy for the growth condition: it reports max |F| and
    max |grad F| on each slab and fails only on non-finite values (or a
    domain error of an expression potential).
    """
    grid = grid or SampleGrid.default(p)
    try:
        F = _eval_grid(p, grid)
        G = np.linalg.norm(_eval_grid(p, grid, "gradient"), axis=-1)
    except _expr.ExprDomainError as err:
        witness = None
        if err.index is not None and len(err.index) == 2:
            witness = (float(grid.t[err.index[0]]), grid.x[err.index[1]].copy())
        return HypothesisReport("A", False, math.inf, witness, grid.size, "domain_error", math.inf,
                                grid.describe(), {"error": str(err)})
    bad = ~(np.isfinite(F) & np.isfinite(G))
    if np.any(bad):
        return _report("A", np.where(bad, np.inf, -1.0), grid)
    radius = np.linalg.norm(grid.x, axis=-1)
    if slabs is None:
        rmax = float(radius.max())
        slabs = [rmax * q for q in (0.25, 0.5, 0.75, 1.0)]
    table = []
    for r in slabs:
        inside = radius <= r + 1e-12
        table.append({"r": float(r),
                      "max_F": float(np.abs(F[:, inside]).max()) if inside.any() else 0.0,
                      "max_grad": float(G[:, inside].max()) if inside.any() else 0.0})
    return HypothesisReport("A", True, -1.0, None, grid.size, "ok", table[-1]["max_F"], grid.describe(),
                            {"slabs": table})
