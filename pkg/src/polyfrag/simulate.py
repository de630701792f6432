"""Explicit time integration of the monomer-polymer system.

The polymer density is advanced with the same upwind transport and
fragmentation quadrature as the eigen-operator; the monomer pool either
follows its own balance equation or is frozen at ``lambda / delta``.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .eigen import EigenSolution, assemble_operator
from .errors import CFLError, DomainError, NegativeDensityError
from .grid import SizeGrid
from .model import FragmentationKernel, ModelParams, steady_monomer, validate_params

__all__ = [
    "SimMode",
    "SimConfig",
    "SimState",
    "Trajectory",
    "initial_profile",
    "simulate",
    "empirical_growth_rate",
    "shape_convergence",
    "protein_balance_drift",
    "write_trajectory",
    "write_snapshots",
]

logger = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-12


class SimMode(enum.Enum):
    FULL_NONLINEAR = "full"
    FROZEN_V = "frozen"


def initial_profile(grid: SizeGrid, name: str = "exponential", amplitude: float = 1.0,
                    scale: float = 1.0, center: float = 1.0, width: float = 0.5,
                    reference: EigenSolution | None = None) -> np.ndarray:
    """Named starting densities: ``exponential``, ``gaussian``, ``eigenfunction`` or ``zero``."""
    x = grid.nodes
    if name == "exponential":
        return amplitude * np.exp(-x / scale)
    if name == "gaussian":
        return amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)
    if name == "eigenfunction":
        if reference is None:
            raise DomainError("the eigenfunction profile needs a reference solution")
        return amplitude * np.interp(x, reference.nodes, reference.density, left=0.0, right=0.0)
    if name == "zero":
        return np.zeros_like(x)
    raise DomainError(f"unknown initial profile {name!r}")


@dataclass(frozen=True, eq=False)
class SimConfig:
    params: ModelParams
    grid: SizeGrid
    u0: np.ndarray
    t_end: float
    dt: float
    kernel: FragmentationKernel = field(default_factory=FragmentationKernel.uniform)
    V0: float | None = None
    mode: SimMode = SimMode.FULL_NONLINEAR
    stride: int = 1

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape != self.grid.nodes.shape:
            raise DomainError("initial density must match the grid")
        if np.any(u0 < 0):
            raise DomainError("initial density must be nonnegative")
        object.__setattr__(self, "u0", u0)
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.t_end >= self.dt:
            raise DomainError("t_end must be at least dt")
        if int(self.stride) != self.stride or self.stride < 1:
            raise DomainError("output stride must be a positive integer")

    @property
    def initial_V(self) -> float:
        return steady_monomer(self.params) if self.V0 is None else float(self.V0)

    def cfl_number(self) -> float:
        """``dt * max(V tau(x)) / min cell width`` with V at its largest possible level."""
        p = self.params
        v_bound = self.initial_V
        if self.mode is SimMode.FULL_NONLINEAR:
            v_bound = max(v_bound, steady_monomer(p))
        speed = v_bound * p.tau0 * self.grid.nodes ** p.nu
        return self.dt * float(np.max(speed)) / float(np.min(self.grid.spacing))


@dataclass(frozen=True, eq=False)
class SimState:
    time: float
    V: float
    u: np.ndarray
    P: float
    M: float


@dataclass(eq=False)
class Trajectory:
    grid: SizeGrid
    states: list
    config: SimConfig | None = None

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def V(self) -> np.ndarray:
        return np.array([s.V for s in self.states])

    @property
    def P(self) -> np.ndarray:
        return np.array([s.P for s in self.states])

    @property
    def M(self) -> np.ndarray:
        return np.array([s.M for s in self.states])

    def max_monomer_deviation(self, v_bar: float) -> float:
        """``max |V(t) - v_bar| / v_bar`` over the samples."""
        return float(np.max(np.abs(self.V - v_bar)) / v_bar)


def _state(grid, t, V, u):
    return SimState(float(t), float(V), u.copy(), grid.integrate(u), grid.integrate(grid.nodes * u))


def simulate(config: SimConfig) -> Trajectory:
    """Forward-Euler run of ``config``; samples every ``stride`` steps and at the end.

    Monomers are consumed at the rate at which the discrete transport term
    adds mass to the polymers, so total protein ``V + M`` changes only
    through production, degradation and death.
    """
    p = config.params
    report = validate_params(p)
    if not report.passed:
        raise DomainError("invalid parameters: " + ", ".join(report.failures))
    cfl = config.cfl_number()
    if cfl > 1.0 + 1e-12:
        raise CFLError(f"CFL number {cfl:.4g} exceeds 1; reduce dt below {config.dt / cfl:.4g}")

    grid = config.grid
    op = assemble_operator(grid, config.kernel, p.gamma, p.nu)
    mass_weights = grid.weights * grid.nodes
    v_bar = steady_monomer(p)
    frozen = config.mode is SimMode.FROZEN_V
    V = v_bar if frozen else config.initial_V
    u = config.u0.copy()

    n_steps = int(np.ceil(config.t_end / config.dt - 1e-9))
    t = 0.0
    states = [_state(grid, t, V, u)]
    for step in range(1, n_steps + 1):
        h = min(config.dt, config.t_end - t) if step == n_steps else config.dt
        transport = op.advection(u)
        du = V * p.tau0 * transport + p.beta0 * op.fragmentation(u) - p.mu0 * u
        if not frozen:
            uptake = float(np.dot(mass_weights, transport))
            V = V + h * (p.lam - p.delta * V - V * p.tau0 * uptake)
        u = u + h * du
        t = config.dt * step if step < n_steps else config.t_end
        low = float(np.min(u))
        if low < -NEGATIVE_TOL * max(1.0, float(np.max(u))) or V < -NEGATIVE_TOL:
            raise NegativeDensityError(
                f"negative state at t={t:.6g}: min u={low:.3g}, V={V:.3g}"
            )
        u = np.where(u > 0, u, 0.0)
        V = max(V, 0.0)
        if step % config.stride == 0 or step == n_steps:
            states.append(_state(grid, t, V, u))
    return Trajectory(grid, states, config)


def empirical_growth_rate(trajectory: Trajectory, window: Sequence[float]) -> float:
    """Least-squares slope of ``log P(t)`` for samples inside ``window``."""
    t0, t1 = window
    times = trajectory.times
    if not (times[0] <= t0 < t1 <= times[-1] + 1e-12):
        raise DomainError(f"window {window} lies outside the trajectory span")
    mask = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
    if mask.sum() < 2:
        raise DomainError("fewer than two samples inside the window")
    P = trajectory.P[mask]
    if np.any(P <= 0):
        raise DomainError("polymer number must be positive inside the fit window")
    slope, _ = np.polyfit(times[mask], np.log(P), 1)
    return float(slope)


def shape_convergence(trajectory: Trajectory, reference: EigenSolution):
    """L1 distance between ``u(., t) / P(t)`` and the reference profile.

    Returns ``(times, distances)``; samples with ``P = 0`` get ``nan``.
    """
    grid = trajectory.grid
    ref = np.interp(grid.nodes, reference.nodes, reference.density, left=0.0, right=0.0)
    total = grid.integrate(ref)
    if not total > 0:
        raise DomainError("reference density is zero on the trajectory grid")
    ref = ref / total
    out = np.full(len(trajectory), np.nan)
    for i, s in enumerate(trajectory):
        if s.P > 0:
            out[i] = grid.integrate(np.abs(s.u / s.P - ref))
    return trajectory.times, out


def protein_balance_drift(trajectory: Trajectory, params: ModelParams) -> np.ndarray:
    """``(V + M)(t) - (V + M)(0) - int_0^t (lambda - delta V - mu0 M) ds``.

    The integral uses the trapezoidal rule over the samples; with stride 1
    the remainder is the first-order time-stepping error.
    """
    t, V, M = trajectory.times, trajectory.V, trajectory.M
    source = params.lam - params.delta * V - params.mu0 * M
    integral = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (source[1:] + source[:-1]))])
    return (V + M) - (V[0] + M[0]) - integral


def write_trajectory(trajectory: Trajectory, path, shape: np.ndarray | None = None,
                     delimiter: str = "\t") -> None:
    """Columns t, V, P, M and optionally the shape distance."""
    cols = ["t", "V", "P", "M"] + (["shape_distance"] if shape is not None else [])
    lines = [delimiter.join(cols)]
    for i, s in enumerate(trajectory):
        row = [s.time, s.V, s.P, s.M] + ([shape[i]] if shape is not None else [])
        lines.append(delimiter.join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_snapshots(trajectory: Trajectory, directory, delimiter: str = "\t") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    nodes = trajectory.grid.nodes.tolist()
    for i, s in enumerate(trajectory):
        path = directory / f"snapshot_{i:05d}.tsv"
        lines = [f"# t: {s.time!r}", delimiter.join(["x", "density"])]
        lines.extend(f"{x!r}{delimiter}{u!r}" for x, u in zip(nodes, s.u.tolist()))
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths
