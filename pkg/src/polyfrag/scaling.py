"""Self-similar rescaling of the normalized eigenpair.

For power-law rates the eigenproblem is homogeneous: with
``alpha = beta0 / (V tau0)`` and ``k = 1 / (1 + gamma - nu)`` the eigenfunction
for arbitrary intensities is ``alpha**k * U1(alpha**k * x)`` and

    r     = (V tau0)**(gamma k) * beta0**((1 - nu) k) * r1 - mu0
    x_bar = (V tau0 / beta0)**k * x1_bar
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .eigen import EigenSolution
from .errors import DomainError
from .grid import SizeGrid
from .model import ModelParams, validate_params

__all__ = [
    "ScalingExponents",
    "AffineStabilityMap",
    "scaling_exponents",
    "scale_eigenvalue",
    "scale_eigenfunction",
    "mean_size_scaled",
    "stability_from_mean_size",
    "stability_from_params",
    "interpolate_density",
    "l1_distance",
]


@dataclass(frozen=True)
class ScalingExponents:
    k: float
    alpha: float
    exponent_r_vtau: float
    exponent_r_beta: float


def _require_valid(params: ModelParams):
    report = validate_params(params)
    if not report.checks["gamma+1-nu>0"]:
        raise DomainError(report.messages["gamma+1-nu>0"])
    if not report.passed:
        raise DomainError("invalid parameters: " + ", ".join(report.failures))


def scaling_exponents(params: ModelParams, V: float) -> ScalingExponents:
    _require_valid(params)
    if not V > 0:
        raise DomainError("monomer level V must be positive")
    s = params.growth_exponent_sum
    return ScalingExponents(
        k=1.0 / s,
        alpha=params.beta0 / (V * params.tau0),
        exponent_r_vtau=params.gamma / s,
        exponent_r_beta=(1.0 - params.nu) / s,
    )


def scale_eigenvalue(base_r1: float, params: ModelParams, V: float) -> float:
    """Growth rate for ``params`` at monomer level ``V`` from the normalized ``r1``."""
    e = scaling_exponents(params, V)
    vtau = V * params.tau0
    return vtau ** e.exponent_r_vtau * params.beta0 ** e.exponent_r_beta * base_r1 - params.mu0


def mean_size_scaled(x1_bar: float, params: ModelParams, V: float) -> float:
    e = scaling_exponents(params, V)
    return (V * params.tau0 / params.beta0) ** e.k * x1_bar


def scale_eigenfunction(base: EigenSolution, params: ModelParams, V: float) -> EigenSolution:
    """Map a normalized eigenpair onto the parameters ``params`` at level ``V``.

    Nodes are divided by ``alpha**k`` and values multiplied by it, so the
    unit integral is kept exactly.
    """
    if (base.gamma, base.nu) != (params.gamma, params.nu):
        raise DomainError(
            f"exponent mismatch: base has (gamma, nu)=({base.gamma}, {base.nu}), "
            f"params have ({params.gamma}, {params.nu})"
        )
    if not (base.beta0 == 1.0 and base.v_tau0 == 1.0 and base.mu0 == 0.0):
        raise DomainError("base solution must solve the normalized problem")
    e = scaling_exponents(params, V)
    factor = e.alpha ** e.k
    r = scale_eigenvalue(base.eigenvalue, params, V)
    if factor == 1.0:
        grid, density = base.grid, base.density
    else:
        grid = base.grid.scaled(1.0 / factor)
        density = base.density * factor
    return replace(
        base,
        grid=grid,
        eigenvalue=r,
        density=density,
        mean_size=base.mean_size / factor,
        residual=base.residual * V * params.tau0 * e.alpha ** e.exponent_r_beta,
        beta0=params.beta0,
        v_tau0=V * params.tau0,
        mu0=params.mu0,
        method=f"scaled({base.method})",
    )


@dataclass(frozen=True)
class AffineStabilityMap:
    """``G = a * x_bar + b``. Only the composite amplitude is identifiable from data."""

    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("slope a must be positive")


def stability_from_mean_size(smap: AffineStabilityMap, x_bar):
    x_bar = np.asarray(x_bar, dtype=float)
    if np.any(~(x_bar > 0)):
        raise DomainError("mean size must be positive")
    out = smap.a * x_bar + smap.b
    return float(out) if out.ndim == 0 else out


def stability_from_params(
    smap: AffineStabilityMap, x1_bar: float, params: ModelParams, V: float
) -> float:
    """Stability predicted by the mean-size scaling composed with the affine map."""
    return stability_from_mean_size(smap, mean_size_scaled(x1_bar, params, V))


def interpolate_density(sol: EigenSolution, grid: SizeGrid) -> np.ndarray:
    """Piecewise-linear interpolation of ``sol.density``; zero outside its grid."""
    return np.interp(grid.nodes, sol.nodes, sol.density, left=0.0, right=0.0)


def l1_distance(a: EigenSolution, b: EigenSolution) -> float:
    """L1 distance between two densities, both interpolated onto the union of their nodes."""
    grid = SizeGrid.from_nodes(np.union1d(a.nodes, b.nodes))
    diff = interpolate_density(a, grid) - interpolate_density(b, grid)
    return grid.integrate(np.abs(diff))
