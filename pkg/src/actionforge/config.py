"""Problem configuration files: strict JSON schema, validation and object builders."""

from __future__ import annotations

import copy
import json
from importlib import resources

import jsonschema
import numpy as np

from .potential import (
    ExpressionPotential,
    ForcedPendulum,
    ForcedPotential,
    Forcing,
    LinearOscillator,
    Pendulum,
    PotentialModel,
    SoftWell,
)
from .solvers import SolveConfig
from .trajectory import Lattice

__all__ = ["ConfigError", "build_potential", "load_config", "schema", "solve_config", "validate_config"]


class ConfigError(ValueError):
    pass


def schema() -> dict:
    text = resources.files("actionforge").joinpath("config.schema.json").read_text()
    return json.loads(text)


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _message(err) -> str:
    where = _path(err)
    if err.validator == "exclusiveMinimum":
        return f"{where} must be > {err.validator_value}"
    if err.validator == "minimum":
        return f"{where} must be >= {err.validator_value}"
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        prefix = "" if where == "<root>" else where + "."
        return "unknown key " + ", ".join(prefix + k for k in extra)
    if err.validator == "required":
        return f"{where}: {err.message}"
    return f"{where}: {err.message}"


def _specific(err):
    """For a failed oneOf over typed objects, report the error of the branch matching "type"."""
    if err.validator != "oneOf" or not err.context:
        return err
    branches = {}
    for sub in err.context:
        branches.setdefault(sub.relative_schema_path[0], []).append(sub)
    if isinstance(err.instance, dict) and "type" in err.instance:
        for subs in branches.values():
            if not any(list(e.relative_schema_path)[-3:] == ["properties", "type", "const"] for e in subs):
                return _specific(sorted(subs, key=lambda e: len(e.absolute_path))[-1])
        err.message = f"unknown type {err.instance['type']!r}"
        err.validator = "type"
    return err


def validate_config(cfg: dict) -> dict:
    """Validate against the schema plus cross-field rules; return the config."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError(_message(_specific(errors[0])))
    disc = cfg.get("discretization", {})
    M = disc.get("M", 16)
    K = disc.get("K")
    if K is not None and K < 2 * M + 1:
        raise ConfigError(f"discretization.K must be >= 2M+1 = {2 * M + 1}")
    N = cfg.get("N", 1)
    lattice = cfg.get("lattice", cfg["potential"].get("lattice"))
    if lattice is not None and len(lattice) != N:
        raise ConfigError(f"lattice must have N={N} entries")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return validate_config(cfg)


def _lattice(values) -> Lattice | None:
    if values is None:
        return None
    return Lattice(tuple(values))


def _forcing(spec: dict | None, T: float, N: int) -> Forcing:
    if not spec:
        return Forcing.zero(T, N)
    cos = np.asarray(spec.get("cos", []), dtype=float)
    sin = np.asarray(spec.get("sin", []), dtype=float)
    mean = np.broadcast_to(np.asarray(spec.get("mean", 0.0), dtype=float), (N,))
    return Forcing(T, cos.reshape(-1, N), sin.reshape(-1, N), mean)


def build_potential(cfg: dict) -> PotentialModel:
    """Instantiate the potential described by a validated config."""
    spec = cfg["potential"]
    T = float(cfg["T"])
    N = int(cfg.get("N", 1))
    kind = spec["type"]
    override = _lattice(cfg.get("lattice"))
    try:
        if kind == "pendulum":
            forcing = _forcing(spec.get("forcing"), T, N)
            if np.any(forcing.mean != 0):
                # not a pendulum in the strict sense: keep the form, drop the zero-mean guarantee
                p = ForcedPotential(Pendulum(spec["a"], T, N), forcing)
            else:
                p = ForcedPendulum(spec["a"], forcing)
        elif kind == "expr":
            p = ExpressionPotential(spec["formula"], T, N, _lattice(spec.get("lattice")))
        elif kind == "soft_well":
            p = SoftWell(spec["delta"], T, N)
        elif kind == "linear_oscillator":
            p = LinearOscillator(spec["omega0"], spec["omega"], spec["eps"], T, N)
        else:  # pragma: no cover - schema rejects it
            raise ConfigError(f"potential.type: unknown type {kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"potential: {exc}") from exc
    if override is not None:
        p.lattice = override
    return p


def solve_config(cfg: dict, seed: int | None = None) -> SolveConfig:
    disc = cfg.get("discretization", {})
    solver = dict(cfg.get("solver", {}))
    if seed is not None:
        solver["seed"] = seed
    try:
        return SolveConfig(M=disc.get("M", 16), K=disc.get("K"), **solver)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def set_path(cfg: dict, dotted: str, value) -> dict:
    """Copy of ``cfg`` with the entry at a dotted path (list indices allowed) replaced."""
    out = copy.deepcopy(cfg)
    keys = dotted.split(".")
    node = out
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node.setdefault(k, {})
    last = keys[-1]
    if isinstance(node, list):
        idx = int(last)
        while len(node) <= idx:
            node.append(0.0)
        node[idx] = value
    else:
        node[last] = value
    return out
