"""Run configuration: TOML with dotted section names, validated before any allocation.

Example::

    seed = 0
    grid.n = [16, 16, 16]
    grid.lengths = [1.0, 1.0, 1.0]      # or grid.h
    metric.g = [1.0, 1.0, 1.0]
    model.variant = "kerr"
    model.chi1 = 0.0
    model.chi3 = 0.01
    integrator.kind = "midpoint"         # midpoint | splitting | single_complex
    integrator.steps = 100
    integrator.tol = 1e-10
    init.kind = "plane_wave"
    init.k = [1, 0, 0]
    init.axis = 1
    output.dir = "out"
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .constitutive import VARIANTS, ModelSpec, check_dispersive
from .grid_complex import GridSpec
from .initial import InitialCondition
from .metric_ops import MaterialMetric
from .snapshot import SnapshotError, read_state_header

INTEGRATORS = ("midpoint", "splitting", "single_complex")

_ALLOWED = {
    "seed": None,
    "grid": {"n", "h", "lengths"},
    "metric": {"g"},
    "model": {"variant", "chi1", "chi3", "alpha", "beta", "eps0", "eps2", "c", "fourpi"},
    "integrator": {"kind", "dt", "cfl", "steps", "tol", "max_iter"},
    "init": {"kind", "k", "amplitude", "axis", "b_scale", "center", "width", "path", "noise"},
    "output": {"dir", "prefix", "diagnostics_every", "snapshot_every"},
    "dispersion": {"modes", "periods", "steps", "max_rel_error"},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class IntegratorConfig:
    kind: str = "midpoint"
    dt: float | None = None
    cfl: float = 0.5
    steps: int = 0
    tol: float = 1e-10
    max_iter: int = 50


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "output"
    prefix: str = "run"
    diagnostics_every: int = 1
    snapshot_every: int = 0


@dataclass(frozen=True)
class DispersionConfig:
    modes: tuple[int, ...] = (1, 2, 3)
    periods: float = 20.0
    steps: int | None = None
    max_rel_error: float | None = None


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    metric: MaterialMetric
    model: ModelSpec
    integrator: IntegratorConfig
    init: InitialCondition
    output: OutputConfig
    dispersion: DispersionConfig = field(default_factory=DispersionConfig)
    seed: int = 0
    noise: float = 0.0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "grid": {"n": list(self.grid.n), "h": list(self.grid.h)},
            "metric": {"g": list(self.metric.diag)},
            "model": asdict(self.model),
            "integrator": asdict(self.integrator),
            "init": {**asdict(self.init), "noise": self.noise},
            "output": asdict(self.output),
            "dispersion": asdict(self.dispersion),
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _triple(value, name: str, cast=float) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{name}: expected a list of three numbers")
    try:
        return tuple(cast(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _number(section: dict, key: str, name: str, default, cast=float):
    if key not in section:
        return default
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    v = cast(v)
    if cast is float and not math.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    if cast is int and v != section[key]:
        raise ConfigError(f"{name}: expected an integer")
    return v


def _check_keys(raw: dict) -> None:
    for top, value in raw.items():
        if top not in _ALLOWED:
            raise ConfigError(f"{top}: unknown configuration section")
        allowed = _ALLOWED[top]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"{top}: expected a section")
        for key in value:
            if key not in allowed:
                raise ConfigError(f"{top}.{key}: unknown configuration key")


def _grid(raw: dict, init_kind: str, init_path) -> GridSpec:
    sec = raw.get("grid", {})
    snap = None
    if init_kind == "from_snapshot" and init_path:
        try:
            snap = read_state_header(init_path)
        except (SnapshotError, OSError) as exc:
            raise ConfigError(f"init.path: {exc}") from None
    if "n" not in sec:
        if snap is None:
            raise ConfigError("grid.n: required")
        return GridSpec(snap["n"], snap["h"])
    n = _triple(sec["n"], "grid.n", int)
    if min(n) < 2:
        raise ConfigError(f"grid.n: n_i >= 2 required, got {list(n)}")
    if "h" in sec and "lengths" in sec:
        raise ConfigError("grid.h: give either grid.h or grid.lengths, not both")
    if "h" in sec:
        h = _triple(sec["h"], "grid.h")
    elif "lengths" in sec:
        L = _triple(sec["lengths"], "grid.lengths")
        if min(L) <= 0.0:
            raise ConfigError("grid.lengths: L_i > 0 required")
        h = tuple(Li / ni for Li, ni in zip(L, n))
    elif snap is not None:
        h = snap["h"]
    else:
        h = tuple(1.0 / ni for ni in n)
    if not all(math.isfinite(v) and v > 0.0 for v in h):
        raise ConfigError(f"grid.h: h_i > 0 required, got {list(h)}")
    grid = GridSpec(n, h)
    if snap is not None and (tuple(snap["n"]) != grid.n or tuple(snap["h"]) != grid.h):
        raise ConfigError(f"init.path: snapshot grid n={snap['n']} h={snap['h']} does not match grid")
    return grid


def _model(raw: dict) -> ModelSpec:
    sec = raw.get("model", {})
    variant = sec.get("variant", "vacuum")
    if variant not in VARIANTS:
        raise ConfigError(f"model.variant: unknown model {variant!r}; expected one of {VARIANTS}")
    units = {k: _number(sec, k, f"model.{k}", d) for k, d in (("c", 1.0), ("fourpi", 4.0 * math.pi))}
    if units["c"] <= 0.0:
        raise ConfigError("model.c: must be > 0")
    if units["fourpi"] <= 0.0:
        raise ConfigError("model.fourpi: must be > 0")
    if variant != "nonlocal_dispersive":
        for k in ("eps0", "eps2"):
            if k in sec:
                raise ConfigError(f"model.{k}: only meaningful for nonlocal_dispersive")
    try:
        if variant == "vacuum":
            return ModelSpec.vacuum(**units)
        if variant == "kerr":
            return ModelSpec.kerr(_number(sec, "chi1", "model.chi1", 0.0),
                                  _number(sec, "chi3", "model.chi3", 0.0), **units)
        if variant == "magnetoelectric":
            return ModelSpec.magnetoelectric(_number(sec, "alpha", "model.alpha", 0.0), **units)
        if "eps0" in sec or "eps2" in sec:
            if "alpha" in sec or "beta" in sec:
                raise ConfigError("model.eps0: give either (alpha, beta) or (eps0, eps2)")
            eps0 = _number(sec, "eps0", "model.eps0", 1.0)
            eps2 = _number(sec, "eps2", "model.eps2", 0.0)
            return ModelSpec.nonlocal_dispersive((eps0 - 1.0) / units["fourpi"], eps2 / units["fourpi"], **units)
        return ModelSpec.nonlocal_dispersive(_number(sec, "alpha", "model.alpha", 0.0),
                                             _number(sec, "beta", "model.beta", 0.0), **units)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None


def _integrator(raw: dict) -> IntegratorConfig:
    sec = raw.get("integrator", {})
    kind = sec.get("kind", "midpoint")
    if kind not in INTEGRATORS:
        raise ConfigError(f"integrator.kind: unknown integrator {kind!r}; expected one of {INTEGRATORS}")
    dt = _number(sec, "dt", "integrator.dt", None)
    if dt is not None and dt <= 0.0:
        raise ConfigError("integrator.dt: must be > 0")
    cfl = _number(sec, "cfl", "integrator.cfl", 0.5)
    if cfl <= 0.0:
        raise ConfigError("integrator.cfl: must be > 0")
    steps = _number(sec, "steps", "integrator.steps", 0, int)
    if steps < 0:
        raise ConfigError("integrator.steps: must be >= 0")
    tol = _number(sec, "tol", "integrator.tol", 1e-10)
    if tol <= 0.0:
        raise ConfigError("integrator.tol: must be > 0")
    max_iter = _number(sec, "max_iter", "integrator.max_iter", 50, int)
    if max_iter < 1:
        raise ConfigError("integrator.max_iter: must be >= 1")
    return IntegratorConfig(kind, dt, cfl, steps, tol, max_iter)


def _init(raw: dict, base: Path) -> tuple[InitialCondition, float]:
    sec = dict(raw.get("init", {}))
    noise = _number(sec, "noise", "init.noise", 0.0)
    if noise < 0.0:
        raise ConfigError("init.noise: must be >= 0")
    sec.pop("noise", None)
    kw = {}
    if "kind" in sec:
        kw["kind"] = sec["kind"]
    if "k" in sec:
        kw["k"] = _triple(sec["k"], "init.k", int)
    if "center" in sec:
        kw["center"] = _triple(sec["center"], "init.center")
    for key, cast in (("amplitude", float), ("b_scale", float), ("width", float), ("axis", int)):
        if key in sec:
            kw[key] = _number(sec, key, f"init.{key}", None, cast)
    if "path" in sec:
        p = Path(str(sec["path"]))
        kw["path"] = str(p if p.is_absolute() else base / p)
    try:
        return InitialCondition(**kw), noise
    except ValueError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith("init.") else f"init: {msg}") from None


def _output(raw: dict) -> OutputConfig:
    sec = raw.get("output", {})
    every = _number(sec, "diagnostics_every", "output.diagnostics_every", 1, int)
    if every < 1:
        raise ConfigError("output.diagnostics_every: must be >= 1")
    snap = _number(sec, "snapshot_every", "output.snapshot_every", 0, int)
    if snap < 0:
        raise ConfigError("output.snapshot_every: must be >= 0")
    prefix = str(sec.get("prefix", "run"))
    if not prefix or "/" in prefix:
        raise ConfigError("output.prefix: must be a plain file name stem")
    return OutputConfig(str(sec.get("dir", "output")), prefix, every, snap)


def _dispersion(raw: dict) -> DispersionConfig:
    sec = raw.get("dispersion", {})
    modes = sec.get("modes", [1, 2, 3])
    if not isinstance(modes, list) or not modes or not all(isinstance(m, int) and m >= 1 for m in modes):
        raise ConfigError("dispersion.modes: expected a non-empty list of integers >= 1")
    periods = _number(sec, "periods", "dispersion.periods", 20.0)
    if periods < 1.0:
        raise ConfigError("dispersion.periods: must be >= 1")
    steps = _number(sec, "steps", "dispersion.steps", None, int)
    if steps is not None and steps < 8:
        raise ConfigError("dispersion.steps: must be >= 8")
    mre = _number(sec, "max_rel_error", "dispersion.max_rel_error", None)
    if mre is not None and mre <= 0.0:
        raise ConfigError("dispersion.max_rel_error: must be > 0")
    return DispersionConfig(tuple(modes), periods, steps, mre)


def parse_config(raw: dict, base: Path | str = ".") -> RunConfig:
    """Validate a parsed TOML mapping into a :class:`RunConfig`."""
    _check_keys(raw)
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: expected a non-negative integer")
    init, noise = _init(raw, Path(base))
    grid = _grid(raw, init.kind, init.path)
    try:
        metric = MaterialMetric(_triple(raw.get("metric", {}).get("g", [1.0, 1.0, 1.0]), "metric.g"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"metric.g: {exc}") from None
    model = _model(raw)
    try:
        check_dispersive(model, grid, metric)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None
    integ = _integrator(raw)
    if integ.kind != "midpoint" and not model.is_linear:
        raise ConfigError(f"integrator.kind: {integ.kind!r} needs a linear model, got {model.variant!r}")
    return RunConfig(grid, metric, model, integ, init, _output(raw), _dispersion(raw), seed, noise)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: {path}: {exc}") from None
    return parse_config(raw, path.parent)
