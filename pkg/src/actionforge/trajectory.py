"""Truncated Fourier representation of T-periodic curves in R^N.

A trajectory is stored as

    u(t) = mean + sum_{k=1}^{M} [a_k cos(w_k t) + b_k sin(w_k t)],   w_k = 2 pi k / T

with real coefficient vectors.  Keeping the mean separate from the harmonics
makes the split into constants and zero-mean curves a plain slice of the data.

Coefficient vectors used by the optimizers follow the layout

    [mean (N) | a_1 (N) | b_1 (N) | ... | a_M (N) | b_M (N)]
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "AliasingError",
    "FourierTrajectory",
    "Lattice",
    "Norms",
    "default_nodes",
    "from_samples",
    "reduce_mean_to_cell",
]


class AliasingError(ValueError):
    """Raised when too few samples are given to resolve the requested harmonics."""


def default_nodes(M: int) -> int:
    """Default quadrature node count for M harmonics."""
    return 4 * (M + 1)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Lattice:
    """Spatial periods (T_1, ..., T_N); ``None`` marks a non-periodic coordinate."""

    periods: tuple

    def __post_init__(self):
        periods = tuple(None if p is None else float(p) for p in self.periods)
        for p in periods:
            if p is not None and not (p > 0 and math.isfinite(p)):
                raise ValueError(f"lattice periods must be positive, got {p}")
        object.__setattr__(self, "periods", periods)

    @classmethod
    def uniform(cls, period: float, dim: int) -> "Lattice":
        return cls((period,) * dim)

    @property
    def dim(self) -> int:
        return len(self.periods)

    @property
    def has_period(self) -> bool:
        return any(p is not None for p in self.periods)

    def directions(self):
        """Yield (i, T_i) for every coordinate carrying a period."""
        for i, p in enumerate(self.periods):
            if p is not None:
                yield i, p

    def reduce(self, vector) -> np.ndarray:
        """Translate ``vector`` into the half-open cell prod [0, T_i)."""
        out = np.array(vector, dtype=float, copy=True)
        for i, p in self.directions():
            r = out[i] - p * math.floor(out[i] / p)
            if r >= p:
                r -= p
            if r < 0.0:
                # only reachable through rounding of tiny negatives
                r = 0.0
            out[i] = r
        return out

    def to_json(self) -> list:
        return list(self.periods)


class Norms(NamedTuple):
    h1_equiv: float
    sup: float
    l2: float


@dataclass(frozen=True)
class FourierTrajectory:
    """A T-periodic curve in R^N given by its mean and M cosine/sine harmonics.

    ``cos`` and ``sin`` have shape (M, N); row k-1 holds the coefficients of
    harmonic k.  Instances are immutable.
    """

    period_T: float
    mean: np.ndarray
    cos: np.ndarray
    sin: np.ndarray

    def __post_init__(self):
        T = float(self.period_T)
        if not (T > 0 and math.isfinite(T)):
            raise ValueError("T must be > 0")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        N = mean.shape[0]
        cos = np.asarray(self.cos, dtype=float).reshape(-1, N)
        sin = np.asarray(self.sin, dtype=float).reshape(-1, N)
        if cos.shape != sin.shape:
            raise ValueError("cos and sin blocks must have the same shape")
        for block in (mean, cos, sin):
            if not np.all(np.isfinite(block)):
                raise ValueError("trajectory coefficients must be finite")
        object.__setattr__(self, "period_T", T)
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cos", _frozen(cos))
        object.__setattr__(self, "sin", _frozen(sin))

    # construction helpers

    @classmethod
    def constant(cls, value, T: float, M: int = 0) -> "FourierTrajectory":
        mean = np.atleast_1d(np.asarray(value, dtype=float))
        zeros = np.zeros((M, mean.shape[0]))
        return cls(T, mean, zeros, zeros)

    @classmethod
    def zeros(cls, T: float, N: int, M: int) -> "FourierTrajectory":
        return cls.constant(np.zeros(N), T, M)

    @classmethod
    def from_vector(cls, vec, T: float, N: int) -> "FourierTrajectory":
        vec = np.asarray(vec, dtype=float)
        if (vec.size - N) % (2 * N):
            raise ValueError(f"coefficient vector of length {vec.size} does not fit N={N}")
        M = (vec.size - N) // (2 * N)
        blocks = vec[N:].reshape(M, 2, N)
        return cls(T, vec[:N], blocks[:, 0, :], blocks[:, 1, :])

    def to_vector(self) -> np.ndarray:
        blocks = np.stack([self.cos, self.sin], axis=1)
        return np.concatenate([self.mean, blocks.ravel()])

    # shape

    @property
    def dim_N(self) -> int:
        return self.mean.shape[0]

    @property
    def M(self) -> int:
        return self.cos.shape[0]

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(1, self.M + 1) / self.period_T

    def resized(self, M: int) -> "FourierTrajectory":
        """Truncate or zero-pad to M harmonics."""
        cos = np.zeros((M, self.dim_N))
        sin = np.zeros((M, self.dim_N))
        m = min(M, self.M)
        cos[:m] = self.cos[:m]
        sin[:m] = self.sin[:m]
        return FourierTrajectory(self.period_T, self.mean, cos, sin)

    def shifted(self, offset) -> "FourierTrajectory":
        return FourierTrajectory(self.period_T, self.mean + np.asarray(offset, float), self.cos, self.sin)

    # evaluation

    def evaluate(self, t, order: int = 0) -> np.ndarray:
        """Value (order 0), velocity (1) or acceleration (2) at time(s) ``t``.

        Scalar ``t`` gives shape (N,); an array of shape (K,) gives (K, N).
        """
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        t_arr = np.asarray(t, dtype=float)
        tt = np.atleast_1d(t_arr)
        w = self.frequencies
        phase = np.outer(tt, w)
        c, s = np.cos(phase), np.sin(phase)
        if order == 0:
            out = self.mean + c @ self.cos + s @ self.sin
        elif order == 1:
            out = (-s * w) @ self.cos + (c * w) @ self.sin
        else:
            out = (-c * w**2) @ self.cos + (-s * w**2) @ self.sin
        return out[0] if t_arr.ndim == 0 else out

    def __call__(self, t) -> np.ndarray:
        return self.evaluate(t, 0)

    def nodes(self, K: int) -> np.ndarray:
        return np.arange(K) * (self.period_T / K)

    def sample(self, K: int) -> np.ndarray:
        """Values at the equispaced nodes t_j = j T / K, shape (K, N)."""
        if K < 2 * self.M + 1:
            raise AliasingError(f"{K} nodes cannot resolve {self.M} harmonics (need K >= {2 * self.M + 1})")
        return self.evaluate(self.nodes(K), 0)

    # structure

    def decompose(self):
        """Split into (mean vector, zero-mean trajectory)."""
        tilde = FourierTrajectory(self.period_T, np.zeros(self.dim_N), self.cos, self.sin)
        return self.mean.copy(), tilde

    def harmonic_energy(self) -> float:
        """Sum of squared harmonic coefficients."""
        return float(np.sum(self.cos**2) + np.sum(self.sin**2))

    def kinetic_energy(self) -> float:
        """Closed form of (1/2) * integral of |u'|^2 over one period."""
        w2 = self.frequencies**2
        amp = np.sum(self.cos**2, axis=1) + np.sum(self.sin**2, axis=1)
        return float(0.25 * self.period_T * np.sum(w2 * amp))

    def velocity_l2(self) -> float:
        return math.sqrt(2.0 * self.kinetic_energy())

    def l2_squared(self) -> float:
        T = self.period_T
        return float(T * np.sum(self.mean**2) + 0.5 * T * self.harmonic_energy())

    def sup_norm(self, nodes: int | None = None) -> float:
        """max_t |u(t)| by dense sampling (approximate, from below)."""
        K = nodes or max(512, 16 * self.M)
        return float(np.max(np.linalg.norm(self.sample(K), axis=1)))

    def norms(self) -> Norms:
        """(equivalent H1 norm, sampled sup norm, L2 norm).

        The equivalent H1 norm is ||u'||_{L2} + |integral of u|.
        """
        h1 = self.velocity_l2() + self.period_T * float(np.linalg.norm(self.mean))
        return Norms(h1, self.sup_norm(), math.sqrt(self.l2_squared()))

    # serialization

    def to_dict(self) -> dict:
        return {
            "T": self.period_T,
            "N": self.dim_N,
            "M": self.M,
            "mean": self.mean.tolist(),
            "cos": self.cos.tolist(),
            "sin": self.sin.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "FourierTrajectory":
        N = int(d["N"])
        M = int(d["M"])
        cos = np.asarray(d["cos"], dtype=float).reshape(M, N)
        sin = np.asarray(d["sin"], dtype=float).reshape(M, N)
        return cls(float(d["T"]), np.asarray(d["mean"], float).reshape(N), cos, sin)

    @classmethod
    def from_json(cls, text: str) -> "FourierTrajectory":
        return cls.from_dict(json.loads(text))

    def to_csv(self, K: int | None = None) -> str:
        """Sampled export with columns t, u_1..u_N, du_1..du_N."""
        K = K or max(512, 16 * self.M)
        t = self.nodes(K)
        u = self.evaluate(t, 0)
        du = self.evaluate(t, 1)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        N = self.dim_N
        w.writerow(["t"] + [f"u_{i + 1}" for i in range(N)] + [f"du_{i + 1}" for i in range(N)])
        for j in range(K):
            w.writerow([repr(float(t[j]))] + [repr(float(v)) for v in u[j]] + [repr(float(v)) for v in du[j]])
        return buf.getvalue()


def from_samples(values, T: float, M: int) -> FourierTrajectory:
    """Least-aliasing trigonometric fit of equispaced samples.

    ``values`` has shape (K,) or (K, N), taken at t_j = j T / K.  Requires
    K >= 2M + 1; then band-limited data with at most M harmonics is recovered
    exactly.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    K = v.shape[0]
    if K < 2 * M + 1:
        raise AliasingError(f"{K} samples cannot resolve {M} harmonics (need K >= {2 * M + 1})")
    spec = np.fft.rfft(v, axis=0) / K
    mean = spec[0].real
    cos = 2.0 * spec[1 : M + 1].real
    sin = -2.0 * spec[1 : M + 1].imag
    return FourierTrajectory(T, mean, cos, sin)


def reduce_mean_to_cell(u: FourierTrajectory, lattice: Lattice | Sequence | None) -> FourierTrajectory:
    """Translate the mean by lattice vectors into the cell [0, T_1) x ... ."""
    if lattice is None:
        return u
    if not isinstance(lattice, Lattice):
        lattice = Lattice(tuple(lattice))
    return FourierTrajectory(u.period_T, lattice.reduce(u.mean), u.cos, u.sin)
