"""Initial conditions; every constructor returns an exactly solenoidal state."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SimState
from .grid_complex import DeRhamComplex, GridSpec, de_rham_map
from .snapshot import read_state

INIT_KINDS = ("plane_wave", "gaussian_pulse", "from_snapshot")


@dataclass(frozen=True)
class InitialCondition:
    """Tagged initial condition.

    plane_wave: ``D = amplitude cos(k.x) e_axis`` with ``k_i = 2 pi m_i / L_i`` and
    ``k_axis = 0``; ``b = d`` of ``A = e_axis amplitude sin(k.x) / |k|`` scaled by
    ``b_scale`` (1 gives a wave travelling along +k in vacuum, 0 a standing wave).

    gaussian_pulse: ``d~ = 0`` and ``b = d`` of
    ``A = e_axis amplitude exp(-r^2 / (2 width^2))`` with periodic minimum-image r.
    """

    kind: str = "plane_wave"
    k: tuple[int, int, int] = (1, 0, 0)
    amplitude: float = 1.0
    axis: int = 1
    b_scale: float = 1.0
    center: tuple[float, float, float] | None = None
    width: float = 0.1
    path: str | None = None

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"init.kind: unknown initial condition {self.kind!r}")
        if self.axis not in (0, 1, 2):
            raise ValueError("init.axis: must be 0, 1 or 2")
        if not math.isfinite(self.amplitude):
            raise ValueError("init.amplitude: must be finite")
        if self.kind == "plane_wave":
            k = tuple(int(v) for v in self.k)
            if len(k) != 3:
                raise ValueError("init.k: needs three mode numbers")
            if not any(k):
                raise ValueError("init.k: at least one mode number must be nonzero")
            if k[self.axis] != 0:
                raise ValueError("init.k: polarization axis must be orthogonal to k (k[axis] = 0)")
            object.__setattr__(self, "k", k)
        if self.kind == "gaussian_pulse" and not (self.width > 0.0):
            raise ValueError("init.width: must be > 0")
        if self.kind == "from_snapshot" and not self.path:
            raise ValueError("init.path: required for from_snapshot")


def _axis_vector(axis: int, values, zeros):
    out = [zeros, zeros, zeros]
    out[axis] = values
    return tuple(out)


def plane_wave(grid: GridSpec, cx: DeRhamComplex, ic: InitialCondition) -> SimState:
    L = grid.lengths
    kv = [2.0 * math.pi * m / Li for m, Li in zip(ic.k, L)]
    kn = math.sqrt(sum(v * v for v in kv))

    def phase(x, y, z):
        return kv[0] * x + kv[1] * y + kv[2] * z

    def D(x, y, z):
        return _axis_vector(ic.axis, ic.amplitude * np.cos(phase(x, y, z)), 0.0 * x)

    def A(x, y, z):
        return _axis_vector(ic.axis, ic.b_scale * ic.amplitude * np.sin(phase(x, y, z)) / kn, 0.0 * x)

    dtilde = de_rham_map(grid, D, ("dual", 2)).values
    b = cx.d[1] @ de_rham_map(grid, A, ("primal", 1)).values
    return SimState.from_arrays(grid, dtilde, b)


def gaussian_pulse(grid: GridSpec, cx: DeRhamComplex, ic: InitialCondition) -> SimState:
    L = np.array(grid.lengths)
    center = 0.5 * L if ic.center is None else np.asarray(ic.center, dtype=float)

    def A(x, y, z):
        r2 = 0.0 * x
        for xi, ci, Li in zip((x, y, z), center, L):
            dx = xi - ci
            dx = dx - Li * np.round(dx / Li)
            r2 = r2 + dx * dx
        return _axis_vector(ic.axis, ic.amplitude * np.exp(-r2 / (2.0 * ic.width ** 2)), 0.0 * x)

    b = cx.d[1] @ de_rham_map(grid, A, ("primal", 1)).values
    return SimState.from_arrays(grid, np.zeros(grid.count("dual", 2)), b)


def build_initial_state(grid: GridSpec, cx: DeRhamComplex, ic: InitialCondition) -> SimState:
    if ic.kind == "plane_wave":
        return plane_wave(grid, cx, ic)
    if ic.kind == "gaussian_pulse":
        return gaussian_pulse(grid, cx, ic)
    s = read_state(ic.path)
    if s.grid != grid:
        raise ValueError(f"init.path: snapshot grid {s.grid} does not match {grid}")
    return s
