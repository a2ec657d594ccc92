"""Temperature-dependent material properties.

Thermal conductivity k(T) and heat capacity Cp(T) are piecewise-linear
tables over strictly increasing temperatures, with constant (clamped)
extrapolation outside the tabulated range.  Clamping avoids negative
properties when the nonlinear solver overshoots.  Density and emissivity
are constants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

# CODATA 2018 value, W/(m^2 K^4)
STEFAN_BOLTZMANN = 5.670374419e-8


def _as_table(pairs, name: str) -> np.ndarray:
    table = np.asarray(pairs, dtype=np.float64)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
        raise ConfigurationError(f"{name} table must be an (n>=2, 2) array of (T, value) pairs")
    if np.any(np.diff(table[:, 0]) <= 0.0):
        raise ConfigurationError(f"{name} table temperatures must be strictly increasing")
    if np.any(table[:, 1] <= 0.0):
        raise ConfigurationError(f"{name} table values must be strictly positive")
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class MaterialTable:
    """Isotropic material with piecewise-linear k(T) and Cp(T).

    k_table, cp_table: (n, 2) arrays of (T [K], value) rows, T strictly
    increasing.  rho in kg/m^3, emissivity dimensionless in [0, 1].
    """

    k_table: np.ndarray
    cp_table: np.ndarray
    rho: float
    emissivity: float
    sigma: float = STEFAN_BOLTZMANN
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "k_table", _as_table(self.k_table, "k"))
        object.__setattr__(self, "cp_table", _as_table(self.cp_table, "cp"))
        if self.rho <= 0.0:
            raise ConfigurationError("density must be positive")
        if not 0.0 <= self.emissivity <= 1.0:
            raise ConfigurationError("emissivity must lie in [0, 1]")

    @classmethod
    def from_json(cls, path) -> "MaterialTable":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        return cls(
            k_table=raw["k"],
            cp_table=raw["cp"],
            rho=raw["rho"],
            emissivity=raw["emissivity"],
            name=raw.get("name", "custom"),
        )

    def to_json(self, path) -> None:
        payload = {
            "name": self.name,
            "k": self.k_table.tolist(),
            "cp": self.cp_table.tolist(),
            "rho": self.rho,
            "emissivity": self.emissivity,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")


def _check_temperature(T) -> np.ndarray:
    T = np.asarray(T, dtype=np.float64)
    if np.any(T <= 0.0):
        raise DomainError("temperature must be strictly positive (kelvin)")
    return T


def _interp(table: np.ndarray, T: np.ndarray) -> np.ndarray:
    # np.interp clamps to endpoint values outside the table range.
    return np.interp(T, table[:, 0], table[:, 1])


def eval_k(table: MaterialTable, T):
    """Thermal conductivity at temperature T (scalar or array), W/(m K)."""
    Ta = _check_temperature(T)
    out = _interp(table.k_table, Ta)
    return float(out) if np.isscalar(T) else out


def eval_cp(table: MaterialTable, T):
    """Heat capacity at temperature T (scalar or array), J/(kg K)."""
    Ta = _check_temperature(T)
    out = _interp(table.cp_table, Ta)
    return float(out) if np.isscalar(T) else out


def _segment_slope(table: np.ndarray, T: np.ndarray) -> np.ndarray:
    Ts, vals = table[:, 0], table[:, 1]
    slopes = np.diff(vals) / np.diff(Ts)
    # Active segment: breakpoints take the right-hand slope; outside the
    # table the clamped value is constant, so the slope is zero.
    idx = np.searchsorted(Ts, T, side="right") - 1
    inside = (T >= Ts[0]) & (T < Ts[-1])
    idx = np.clip(idx, 0, len(slopes) - 1)
    return np.where(inside, slopes[idx], 0.0)


def eval_dk_dT(table: MaterialTable, T):
    """Slope dk/dT of the active linear segment, W/(m K^2).

    Zero outside the table range (clamped extrapolation); at an interior
    breakpoint the right-hand segment's slope is returned.
    """
    Ta = _check_temperature(T)
    out = _segment_slope(table.k_table, Ta)
    return float(out) if np.isscalar(T) else out


def default_material() -> MaterialTable:
    """A plausible high-temperature aerospace alloy.

    Five linear segments each for k and Cp, rising smoothly over
    273.15-1273.15 K.  Treated strictly as an input table, never as
    ground truth for any physical claim.
    """
    T = [273.15, 473.15, 673.15, 873.15, 1073.15, 1273.15]
    k = [7.0, 9.5, 12.5, 15.5, 18.7, 22.0]
    cp = [450.0, 505.0, 560.0, 612.0, 658.0, 700.0]
    return MaterialTable(
        k_table=list(zip(T, k)),
        cp_table=list(zip(T, cp)),
        rho=4500.0,
        emissivity=0.8,
        name="default",
    )


def constant_material(k: float, cp: float, rho: float, emissivity: float = 0.0) -> MaterialTable:
    """Constant-property material, handy for analytical verification."""
    return MaterialTable(
        k_table=[(1.0, k), (5000.0, k)],
        cp_table=[(1.0, cp), (5000.0, cp)],
        rho=rho,
        emissivity=emissivity,
        name="constant",
    )
