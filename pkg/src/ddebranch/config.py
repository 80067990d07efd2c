"""Run configuration: a single TOML file drives the whole pipeline."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError
from .models import ModelDefinition, builtin, builtin_names, parse_model

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

__all__ = ["RunConfig", "load_config", "model_from_block"]


@dataclass
class RunConfig:
    model_block: Dict
    n_modes: int = 128
    newton_tol: float = 1e-10
    p_max: float = 200.0
    amplitude_window: Tuple[float, float] = (0.1, 2.0)
    seed: str = "hopf"
    seed_amplitude: Optional[float] = None
    equilibrium: Optional[float] = None
    initial_step: float = 0.05
    max_step: float = 0.25
    m_copies: List[int] = field(default_factory=lambda: [1, -1])
    floquet_basis: int = 64
    fill_mu_c: int = 12  # number of orbits annotated with mu_c (0 disables)
    orbit_at_delay: Optional[float] = None
    t_per_period: int = 128
    n_curves: int = 20
    population_coords: bool = False
    output_dir: str = "out"
    workers: int = 1
    raw: Dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.newton_tol <= 0 or self.p_max <= 0:
            raise ConfigError("tolerances must be positive")
        lo, hi = self.amplitude_window
        if not lo < hi:
            raise ConfigError(f"amplitude window [{lo}, {hi}] is empty")
        if self.n_modes < 8 or self.n_modes % 2:
            raise ConfigError("n_modes must be an even integer >= 8")
        if self.floquet_basis < 16:
            raise ConfigError("floquet basis must be >= 16")
        if self.t_per_period < 64:
            raise ConfigError("t_per_period must be >= 64")
        if self.initial_step <= 0 or self.max_step <= 0:
            raise ConfigError("continuation steps must be positive")
        return self

    def build_model(self) -> ModelDefinition:
        return model_from_block(self.model_block)

    def digest(self) -> str:
        blob = json.dumps(
            {k: v for k, v in self.__dict__.items() if k != "raw"},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def model_from_block(block: Dict) -> ModelDefinition:
    kind = block.get("kind")
    if kind is None:
        raise ConfigError("model block needs a 'kind'")
    domain = block.get("domain")
    if domain is not None:
        try:
            (u0, u1), (v0, v1) = domain
            domain = ((float(u0), float(u1)), (float(v0), float(v1)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model domain {domain!r}") from exc
        if not (domain[0][0] < domain[0][1] and domain[1][0] < domain[1][1]):
            raise ConfigError("model domain rectangle is empty")
    if kind == "expr":
        source = block.get("f")
        if not source:
            raise ConfigError("expression models need the field f = \"<text>\"")
        params = {str(k): float(v) for k, v in (block.get("params") or {}).items()}
        kwargs = {"params": params, "name": block.get("name", "expr")}
        if domain is not None:
            kwargs["domain"] = domain
        return parse_model(source, **kwargs)
    if kind in builtin_names():
        kwargs = {}
        if kind == "enharmonic":
            kwargs["omega"] = str(block.get("omega", "1"))
        if domain is not None:
            kwargs["domain"] = domain
        return builtin(kind, **kwargs)
    raise ConfigError(f"unknown model kind {kind!r} (builtins: {', '.join(builtin_names())})")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")

    model_block = data.get("model")
    if not isinstance(model_block, dict):
        raise ConfigError("config needs a [model] block")
    solver = data.get("solver", {})
    cont = data.get("continuation", {})
    floq = data.get("floquet", {})
    chart = data.get("chart", {})
    output = data.get("output", {})

    def pick(table, key, default, cast):
        value = table.get(key, default)
        try:
            return cast(value) if value is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc

    window = cont.get("amplitude_window", [0.1, 2.0])
    if not (isinstance(window, (list, tuple)) and len(window) == 2):
        raise ConfigError("continuation.amplitude_window must be [lo, hi]")

    cfg = RunConfig(
        model_block=model_block,
        n_modes=pick(solver, "n_modes", 128, int),
        newton_tol=pick(solver, "newton_tol", 1e-10, float),
        p_max=pick(solver, "p_max", 200.0, float),
        amplitude_window=(float(window[0]), float(window[1])),
        seed=str(cont.get("seed", "hopf")),
        seed_amplitude=pick(cont, "seed_amplitude", None, float),
        equilibrium=pick(cont, "equilibrium", None, float),
        initial_step=pick(cont, "initial_step", 0.05, float),
        max_step=pick(cont, "max_step", 0.25, float),
        m_copies=[int(m) for m in cont.get("m_copies", [1, -1])],
        floquet_basis=pick(floq, "basis", 64, int),
        fill_mu_c=pick(floq, "fill_mu_c", 12, int),
        orbit_at_delay=pick(floq, "orbit_at_delay", None, float),
        t_per_period=pick(chart, "t_per_period", 128, int),
        n_curves=pick(chart, "curves", 20, int),
        population_coords=bool(chart.get("population_coords", False)),
        output_dir=str(output.get("directory", "out")),
        raw=data,
    )
    return cfg.validate()
