"""YAML run configuration.

Every section is optional; missing keys fall back to ``DEFAULTS``. A fully
commented example lives in ``configs/example.yaml`` at the repository root
and is printed by ``polyfrag show-config``.
"""
from __future__ import annotations

import copy
from pathlib import Path

import numpy as np
import yaml

from .errors import DomainError, ParseError
from .grid import SizeGrid, make_grid, uniform_grid
from .model import FragmentationKernel, ModelParams

__all__ = ["DEFAULTS", "EXAMPLE_CONFIG", "load_config", "merge", "build_params",
           "build_kernel", "build_grid"]

DEFAULTS = {
    "model": {"tau0": 1.0, "nu": 0.0, "beta0": 1.0, "gamma": 1.0, "mu0": 0.0,
              "lambda": 1.0, "delta": 1.0},
    "kernel": {"family": "uniform"},
    "grid": {"spacing": "geometric", "x_min": 1e-4, "x_max": 50.0, "n": 1024},
    "eigen": {"tol": 1e-10, "max_iter": 500, "method": "inverse"},
    "scale_check": {"beta0": [0.25, 1.0, 4.0], "v_tau0": [0.25, 1.0, 4.0],
                    "tolerance": 1e-2, "l1_tolerance": 2e-2},
    "simulate": {
        "mode": "frozen",
        "t_end": 20.0,
        "dt": None,
        "cfl": 0.9,
        "stride": 10,
        "V0": None,
        "grid": {"spacing": "geometric", "x_min": 0.02, "x_max": 12.0, "n": 256},
        "initial": {"profile": "exponential", "amplitude": 1.0, "scale": 1.0},
        "window": [10.0, 20.0],
        "compare_eigen": True,
        "tolerance": 0.02,
        "snapshots": False,
    },
    "fit": {
        "data": None,
        "variant": "both",
        "nu_bounds": [-3.0, 0.95],
        "mu0_bounds": [0.0, 1.0],
        "allow_nu_above_one": False,
        "upper_nu_bounds": [1.05, 4.0],
        "n_nu": 400,
        "n_mu": 100,
        "n_starts": 5,
        "curve": {"r_min": 0.01, "r_max": 0.2, "n": 200},
    },
}

EXAMPLE_CONFIG = """\
# polyfrag run configuration (YAML). Every key is optional.

model:              # rates tau0*x**nu (polymerization), beta0*x**gamma (fragmentation)
  tau0: 1.0
  nu: 0.0           # may be negative; needs gamma + 1 - nu > 0
  beta0: 1.0
  gamma: 1.0        # >= 0
  mu0: 0.0          # polymer death rate, 1/day
  lambda: 1.0       # monomer production
  delta: 1.0        # monomer degradation; steady monomer level is lambda/delta

kernel:             # self-similar fragment distribution on [0, 1]
  family: uniform   # uniform | power_pair | tabulated
  # p: 2.0          # power_pair: density ~ z**p (1-z)**p
  # z: [0, 0.5, 1]  # tabulated: nodes and piecewise-linear density
  # density: [0, 2, 0]

grid:               # eigen grid (eigen, scale-check)
  spacing: geometric  # geometric | uniform
  x_min: 1.0e-4
  x_max: 50.0
  n: 1024

eigen:
  tol: 1.0e-10
  max_iter: 500
  method: inverse   # inverse | power | dense

scale_check:        # direct solve vs rescaled normalized solve
  beta0: [0.25, 1.0, 4.0]
  v_tau0: [0.25, 1.0, 4.0]   # products V*tau0
  tolerance: 1.0e-2          # relative eigenvalue error
  l1_tolerance: 2.0e-2       # eigenfunction L1 distance

simulate:
  mode: frozen      # frozen (V held at lambda/delta) | full
  t_end: 20.0
  dt: null          # null: largest stable step times `cfl`
  cfl: 0.9
  stride: 10        # output every `stride` steps
  V0: null          # initial monomer level; null means lambda/delta
  grid: {spacing: geometric, x_min: 0.02, x_max: 12.0, n: 256}
  initial: {profile: exponential, amplitude: 1.0, scale: 1.0}
                    # profiles: exponential(scale) | gaussian(center, width)
                    #           | eigenfunction | zero
  window: [10.0, 20.0]   # log-slope fit window for the growth rate
  compare_eigen: true    # shape distance and growth-rate check vs eigenpair
  tolerance: 0.02        # allowed relative growth-rate mismatch
  snapshots: false       # write full density tables per sample

fit:
  data: null        # path to CSV (name,r_per_day,G_molar); null = bundled table
  variant: both     # mu0-zero | mu0-free | both
  nu_bounds: [-3.0, 0.95]
  mu0_bounds: [0.0, 1.0]
  allow_nu_above_one: false
  upper_nu_bounds: [1.05, 4.0]
  n_nu: 400
  n_mu: 100
  n_starts: 5
  curve: {r_min: 0.01, r_max: 0.2, n: 200}
"""


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Defaults merged with the YAML file at ``path`` (if any).

    Raises ``OSError`` for unreadable files and ``ParseError`` for bad YAML.
    """
    if path is None:
        return copy.deepcopy(DEFAULTS)
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ParseError(f"{path}: unknown section(s) {sorted(unknown)}")
    return merge(DEFAULTS, data)


def build_params(cfg: dict) -> ModelParams:
    return ModelParams.from_mapping(cfg["model"])


def build_kernel(cfg: dict) -> FragmentationKernel:
    return FragmentationKernel.from_mapping(cfg["kernel"])


def build_grid(section: dict) -> SizeGrid:
    spacing = section.get("spacing", "geometric")
    if spacing == "nodes":
        return SizeGrid.from_nodes(np.asarray(section["nodes"], dtype=float))
    args = float(section["x_min"]), float(section["x_max"]), int(section["n"])
    if spacing == "geometric":
        return make_grid(*args)
    if spacing == "uniform":
        return uniform_grid(*args)
    raise DomainError(f"unknown grid spacing {spacing!r}")
