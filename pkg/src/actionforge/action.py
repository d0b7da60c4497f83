"""Discrete action functional f(u) = int_0^T [ |u'|^2 / 2 - F(t, u) ] dt and its gradient.

The kinetic term is taken in closed form from the Fourier coefficients; the
potential term uses the periodic trapezoid rule on K equispaced nodes.  The
gradient is the exact derivative of that discrete functional with respect to
the coefficient vector [mean | a_1 | b_1 | ... | a_M | b_M].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import ExprDomainError
from .potential import PotentialModel
from .trajectory import FourierTrajectory

__all__ = [
    "ActionDomainError",
    "ActionFunctional",
    "ActionReport",
    "action_gradient",
    "action_value",
    "default_K",
]


def default_K(M: int) -> int:
    return max(64, 4 * (M + 1))


class ActionDomainError(ValueError):
    """The potential could not be evaluated at a quadrature node."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


@dataclass
class ActionReport:
    value: float
    kinetic: float
    potential_integral: float
    nodes_K: int
    gradient: np.ndarray | None = None
    grad_norm: float | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "kinetic": self.kinetic,
            "potential_integral": self.potential_integral,
            "gradient": None if self.gradient is None else self.gradient.tolist(),
            "grad_norm": self.grad_norm,
            "nodes_K": self.nodes_K,
            "layout": "mean(N) | a_1(N) | b_1(N) | ... | a_M(N) | b_M(N)",
        }


class ActionFunctional:
    """Action of ``p`` restricted to trajectories with M harmonics, on K nodes."""

    def __init__(self, p: PotentialModel, M: int, K: int | None = None):
        K = default_K(M) if K is None else int(K)
        if K < 2 * M + 1:
            raise ValueError(f"K={K} nodes cannot resolve M={M} harmonics (need K >= {2 * M + 1})")
        self.p = p
        self.T = p.period_T
        self.N = p.dim_N
        self.M = int(M)
        self.K = K
        self.t = np.arange(K) * (self.T / K)
        self.w = 2.0 * np.pi * np.arange(1, M + 1) / self.T
        phase = np.outer(self.t, self.w)
        self.C = np.cos(phase)
        self.S = np.sin(phase)
        self.weight = self.T / K

    @property
    def size(self) -> int:
        return self.N * (2 * self.M + 1)

    def split(self, vec):
        vec = np.asarray(vec, dtype=float)
        mean = vec[: self.N]
        blocks = vec[self.N :].reshape(self.M, 2, self.N)
        return mean, blocks[:, 0, :], blocks[:, 1, :]

    def positions(self, vec) -> np.ndarray:
        mean, a, b = self.split(vec)
        return mean + self.C @ a + self.S @ b

    def kinetic(self, vec) -> float:
        _, a, b = self.split(vec)
        amp = np.sum(a * a, axis=1) + np.sum(b * b, axis=1)
        return float(0.25 * self.T * np.sum(self.w**2 * amp))

    def _potential(self, fn, u):
        try:
            return fn(self.t, u)
        except ExprDomainError as err:
            j = err.index[0] if err.index else None
            t = None if j is None else float(self.t[j])
            where = "" if t is None else f" at node t={t!r}"
            raise ActionDomainError(f"potential undefined{where}: {err}", t) from err

    def value_parts(self, vec):
        """(f, kinetic, potential integral)."""
        u = self.positions(vec)
        F = self._potential(self.p.value, u)
        pot = float(np.sum(F) * self.weight)
        kin = self.kinetic(vec)
        return kin - pot, kin, pot

    def value(self, vec) -> float:
        return self.value_parts(vec)[0]

    def value_and_grad(self, vec):
        vec = np.asarray(vec, dtype=float)
        mean, a, b = self.split(vec)
        u = mean + self.C @ a + self.S @ b
        F = self._potential(self.p.value, u)
        G = self._potential(self.p.gradient, u)
        kin = self.kinetic(vec)
        w2 = 0.5 * self.T * self.w[:, None] ** 2
        grad = np.empty_like(vec)
        # overflow shows up as a non-finite f; callers decide what to do with it
        with np.errstate(over="ignore", invalid="ignore"):
            f = kin - float(np.sum(F) * self.weight)
            grad[: self.N] = -self.weight * np.sum(G, axis=0)
            blocks = grad[self.N :].reshape(self.M, 2, self.N)
            blocks[:, 0, :] = w2 * a - self.weight * (self.C.T @ G)
            blocks[:, 1, :] = w2 * b - self.weight * (self.S.T @ G)
        return f, grad

    def report(self, vec, gradient: bool = True) -> ActionReport:
        f, kin, pot = self.value_parts(vec)
        if not gradient:
            return ActionReport(f, kin, pot, self.K)
        _, g = self.value_and_grad(vec)
        return ActionReport(f, kin, pot, self.K, g, float(np.linalg.norm(g)))

    def trajectory(self, vec) -> FourierTrajectory:
        return FourierTrajectory.from_vector(vec, self.T, self.N)


def _functional(u: FourierTrajectory, p: PotentialModel, K: int | None) -> ActionFunctional:
    if u.dim_N != p.dim_N:
        raise ValueError(f"trajectory has N={u.dim_N} but potential has N={p.dim_N}")
    if abs(u.period_T - p.period_T) > 1e-12 * p.period_T:
        raise ValueError("trajectory and potential periods differ")
    return ActionFunctional(p, u.M, K)


def action_value(u: FourierTrajectory, p: PotentialModel, K: int | None = None) -> ActionReport:
    """Value, kinetic part and potential integral of the action at ``u``."""
    return _functional(u, p, K).report(u.to_vector(), gradient=False)


def action_gradient(u: FourierTrajectory, p: PotentialModel, K: int | None = None) -> ActionReport:
    """Full report including the coefficient-space gradient."""
    return _functional(u, p, K).report(u.to_vector(), gradient=True)
