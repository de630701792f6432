"""Principal eigenpair of the discretized growth-fragmentation operator.

The operator acting on a density ``u`` sampled on a :class:`SizeGrid` is

    L u = -v_tau0 d/dx(x**nu u) - beta0 x**gamma u
          + 2 beta0 int_x^inf y**gamma kappa0(x/y) u(y) dy/y - mu0 u

With ``beta0 = v_tau0 = 1`` and ``mu0 = 0`` this is the normalized problem
whose eigenpair ``(r1, U1)`` fixes every other parameter set by rescaling.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainError
from .grid import SizeGrid, make_grid
from .model import FragmentationKernel

__all__ = [
    "DiscreteOperator",
    "EigenSolution",
    "assemble_operator",
    "principal_eigenpair",
    "dense_eigenpair",
    "mean_size",
    "make_grid",
    "solve_normalized",
    "write_solution",
    "read_solution",
    "DEFAULT_GRID",
]

logger = logging.getLogger(__name__)

DEFAULT_GRID = {"x_min": 1e-4, "x_max": 50.0, "n": 1024}


def _gain_matrix(grid: SizeGrid, kernel: FragmentationKernel, gamma: float) -> np.ndarray:
    """Quadrature of ``2 int_x^inf y**gamma kappa0(x/y) u(y) dy/y`` as a matrix.

    Each column is rescaled so the fragments of a parent of size ``y`` carry
    exactly its mass under the grid weights; fragmentation then conserves
    the discrete first moment to round-off.
    """
    x = grid.nodes
    w = grid.weights
    n = x.size
    rows, cols = np.triu_indices(n)
    # trapezoid weights of [x_i, x_N]: full weights except the left end
    omega = w[cols].copy()
    diag = rows == cols
    half_left = np.append(0.5 * np.diff(x), 0.0)
    omega[diag] = half_left[rows[diag]]
    vals = 2.0 * omega * x[cols] ** (gamma - 1.0) * kernel(x[rows] / x[cols])
    gain = np.zeros((n, n))
    gain[rows, cols] = vals

    target = w * x ** (1.0 + gamma)
    current = (w * x) @ gain
    ok = current > 0
    gain[:, ok] *= target[ok] / current[ok]
    # parents too close to x_min to resolve any fragment: put the mass on node 0
    for j in np.flatnonzero(~ok):
        gain[0, j] = target[j] / (w[0] * x[0])
    return gain


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Upwind advection, local loss and quadrature gain on a size grid.

    ``gamma``, ``nu`` and ``kernel`` are kept for provenance; ``beta0``,
    ``v_tau0`` and ``mu0`` scale the three parts.
    """

    grid: SizeGrid
    gamma: float
    nu: float
    kernel: FragmentationKernel
    adv_diag: np.ndarray
    adv_sub: np.ndarray
    loss_rate: np.ndarray
    gain: np.ndarray
    beta0: float = 1.0
    v_tau0: float = 1.0
    mu0: float = 0.0

    @property
    def is_normalized(self) -> bool:
        return self.beta0 == 1.0 and self.v_tau0 == 1.0 and self.mu0 == 0.0

    def advection(self, u: np.ndarray) -> np.ndarray:
        """Upwind ``-d/dx(x**nu u)`` with zero inflow at ``x_min``."""
        out = self.adv_diag * u
        out[1:] += self.adv_sub * u[:-1]
        return out

    def gain_term(self, u: np.ndarray) -> np.ndarray:
        return self.gain @ u

    def loss_term(self, u: np.ndarray) -> np.ndarray:
        return self.loss_rate * u

    def fragmentation(self, u: np.ndarray) -> np.ndarray:
        return self.gain @ u - self.loss_rate * u

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.v_tau0 * self.advection(u) + self.beta0 * self.fragmentation(u)
        if self.mu0:
            out -= self.mu0 * u
        return out

    __call__ = apply

    @property
    def matrix(self) -> np.ndarray:
        m = self.beta0 * self.gain
        idx = np.arange(self.grid.n)
        m[idx, idx] += self.v_tau0 * self.adv_diag - self.beta0 * self.loss_rate - self.mu0
        m[idx[1:], idx[:-1]] += self.v_tau0 * self.adv_sub
        return m

    @property
    def positivity_shift(self) -> float:
        """Smallest shift making every diagonal entry of ``L + shift`` nonnegative."""
        return float(np.max(
            self.v_tau0 * -self.adv_diag + self.beta0 * self.loss_rate + self.mu0
        ))

    def mass_balance_residual(self, u) -> float:
        """``|sum w x (gain - loss)| / sum w x**(1+gamma) u`` for ``u >= 0``."""
        x, w = self.grid.nodes, self.grid.weights
        u = np.asarray(u, dtype=float)
        net = np.dot(w * x, self.fragmentation(u))
        return abs(float(net)) / float(np.dot(w, x ** (1.0 + self.gamma) * u))

    def with_coefficients(self, beta0=1.0, v_tau0=1.0, mu0=0.0) -> "DiscreteOperator":
        return DiscreteOperator(
            self.grid, self.gamma, self.nu, self.kernel, self.adv_diag,
            self.adv_sub, self.loss_rate, self.gain, float(beta0), float(v_tau0), float(mu0),
        )


def assemble_operator(
    grid: SizeGrid,
    kernel: FragmentationKernel,
    gamma: float,
    nu: float,
    *,
    beta0: float = 1.0,
    v_tau0: float = 1.0,
    mu0: float = 0.0,
) -> DiscreteOperator:
    """Discretize the eigen-operator on ``grid``.

    The defaults give the normalized operator; pass ``beta0``, ``v_tau0``
    (the product ``V * tau0``) and ``mu0`` to assemble it for arbitrary
    intensities.
    """
    if not gamma + 1.0 - nu > 0:
        raise DomainError(
            f"well-posedness requires gamma + 1 - nu > 0; got gamma={gamma}, nu={nu}"
        )
    x = grid.nodes
    dx = grid.spacing
    speed = x ** nu
    adv_diag = -speed / dx
    adv_sub = speed[:-1] / dx[1:]
    loss = x ** gamma
    gain = _gain_matrix(grid, kernel, gamma)
    for arr in (adv_diag, adv_sub, loss, gain):
        arr.flags.writeable = False
    return DiscreteOperator(
        grid, float(gamma), float(nu), kernel, adv_diag, adv_sub, loss, gain,
        float(beta0), float(v_tau0), float(mu0),
    )


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Principal eigenpair tabulated on a grid.

    ``density`` integrates to one under the grid weights; ``residual`` is
    ``||L U - r U||_1 / ||U||_1``.
    """

    grid: SizeGrid
    eigenvalue: float
    density: np.ndarray
    mean_size: float
    residual: float
    gamma: float
    nu: float
    kernel: FragmentationKernel
    beta0: float = 1.0
    v_tau0: float = 1.0
    mu0: float = 0.0
    iterations: int = 0
    method: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def summary(self) -> dict:
        out = {
            "eigenvalue": self.eigenvalue,
            "mean_size": self.mean_size,
            "residual": self.residual,
            "iterations": self.iterations,
            "method": self.method,
            "gamma": self.gamma,
            "nu": self.nu,
            "beta0": self.beta0,
            "v_tau0": self.v_tau0,
            "mu0": self.mu0,
            "kernel": self.kernel.to_dict(),
        }
        out.update({f"grid_{k}": v for k, v in self.grid.metadata().items()})
        return out


def mean_size(grid: SizeGrid, density, rtol: float = 1e-6) -> float:
    """First moment of a unit-mass density."""
    density = np.asarray(density, dtype=float)
    if np.any(density < 0):
        raise DomainError("density must be nonnegative")
    total = grid.integrate(density)
    if abs(total - 1.0) > rtol:
        raise DomainError(f"density must integrate to 1, got {total:.6g}")
    return grid.integrate(grid.nodes * density)


def _weighted_l1(grid, v):
    return float(np.dot(grid.weights, np.abs(v)))


def _finish(op, v, r, iterations, method, tol=None) -> EigenSolution:
    grid = op.grid
    v = np.where(v > 0, v, 0.0)
    v = v / grid.integrate(v)
    residual = _weighted_l1(grid, op.apply(v) - r * v) / _weighted_l1(grid, v)
    return EigenSolution(
        grid=grid,
        eigenvalue=float(r),
        density=v,
        mean_size=mean_size(grid, v),
        residual=float(residual),
        gamma=op.gamma,
        nu=op.nu,
        kernel=op.kernel,
        beta0=op.beta0,
        v_tau0=op.v_tau0,
        mu0=op.mu0,
        iterations=iterations,
        method=method,
    )


def _abscissa_upper_bound(op: DiscreteOperator, matrix: np.ndarray) -> float:
    # Collatz-Wielandt bound on the transpose with mass weights w*x > 0
    m = op.grid.weights * op.grid.nodes
    return float(np.max((m @ matrix) / m))


def principal_eigenpair(
    op: DiscreteOperator,
    tol: float = 1e-10,
    max_iter: int = 500,
    method: str = "inverse",
) -> EigenSolution:
    """Dominant eigenpair of ``op`` by positivity-preserving iteration.

    ``method="inverse"`` iterates the resolvent ``(sigma - L)**-1``, which
    maps positive vectors to positive vectors whenever ``sigma`` exceeds
    the dominant eigenvalue; the shift starts at a Collatz-Wielandt upper
    bound and is pulled toward the current estimate, backing off whenever an
    iterate loses positivity. ``method="power"`` is plain power iteration on
    ``L + shift`` with the diagonal shift of ``positivity_shift``; it is
    exact in spirit but needs on the order of ``shift / spectral gap``
    iterations, so it only suits coarse grids.

    Iteration stops once successive eigenvalue estimates differ by less
    than ``tol`` relatively and the residual is at most ``10 * tol``.
    """
    if not (0 < tol <= 1e-2):
        raise DomainError("tol must lie in (0, 1e-2]")
    if method == "inverse":
        return _inverse_iteration(op, tol, max_iter)
    if method == "power":
        return _power_iteration(op, tol, max_iter)
    if method == "dense":
        return dense_eigenpair(op)
    raise DomainError(f"unknown eigensolver method {method!r}")


def _converged(op, v, r, r_prev, tol):
    if r_prev is None or abs(r - r_prev) >= tol * max(abs(r), 1e-300):
        return False, None
    vn = v / op.grid.integrate(v)
    res = _weighted_l1(op.grid, op.apply(vn) - r * vn)
    return res <= 10 * tol, res


def _inverse_iteration(op, tol, max_iter):
    grid = op.grid
    w = grid.weights
    matrix = op.matrix
    eye = np.eye(grid.n)
    v = np.ones(grid.n)
    v /= grid.integrate(v)

    sigma_safe = _abscissa_upper_bound(op, matrix) + 1.0
    sigma = sigma_safe
    r = r_prev = None
    min_gap = 1e-8
    lu = None
    lu_sigma = None
    for it in range(1, max_iter + 1):
        if lu_sigma != sigma:
            lu = scipy.linalg.lu_factor(sigma * eye - matrix, check_finite=False)
            lu_sigma = sigma
        y = scipy.linalg.lu_solve(lu, v, check_finite=False)
        top = np.max(np.abs(y))
        if not np.isfinite(top) or np.min(y) < -1e-9 * top:
            # sigma fell below the dominant eigenvalue: retreat toward the safe shift
            if sigma == sigma_safe:
                raise ConvergenceError(
                    "resolvent lost positivity at a certified shift",
                    eigenvalue=r, density=v,
                )
            sigma = 0.5 * (sigma + sigma_safe)
            min_gap *= 10.0
            continue
        sigma_safe = sigma
        y = np.where(y > 0, y, 0.0)
        r = sigma - np.dot(w, v) / np.dot(w, y)
        v = y / np.dot(w, y)
        done, res = _converged(op, v, r, r_prev, tol)
        logger.debug("inverse iteration %d: sigma=%.6g r=%.12g", it, sigma, r)
        if done:
            return _finish(op, v, r, it, "inverse")
        r_prev = r
        gap = sigma - r
        sigma = r + max(gap / 8.0, min_gap * max(1.0, abs(r)))
    vn = v / grid.integrate(v)
    res = _weighted_l1(grid, op.apply(vn) - r * vn)
    raise ConvergenceError(
        f"inverse iteration did not converge in {max_iter} iterations",
        eigenvalue=r, density=vn, residual=res,
    )


def _power_iteration(op, tol, max_iter):
    grid = op.grid
    w = grid.weights
    matrix = op.matrix
    shift = op.positivity_shift
    shifted = matrix + shift * np.eye(grid.n)
    v = np.ones(grid.n)
    v /= grid.integrate(v)
    r_prev = None
    r = None
    for it in range(1, max_iter + 1):
        y = shifted @ v
        r = np.dot(w, y) / np.dot(w, v) - shift
        v = y / np.dot(w, y)
        done, _ = _converged(op, v, r, r_prev, tol)
        if done:
            return _finish(op, v, r, it, "power")
        r_prev = r
    vn = v / grid.integrate(v)
    res = _weighted_l1(grid, op.apply(vn) - r * vn)
    raise ConvergenceError(
        f"shifted power iteration did not converge in {max_iter} iterations",
        eigenvalue=r, density=vn, residual=res,
    )


def dense_eigenpair(op: DiscreteOperator) -> EigenSolution:
    """Cross-check with a dense nonsymmetric eigensolver."""
    vals, vecs = np.linalg.eig(op.matrix)
    k = int(np.argmax(vals.real))
    v = np.abs(vecs[:, k].real)
    return _finish(op, v, float(vals[k].real), 0, "dense")


def solve_normalized(
    gamma: float,
    nu: float,
    kernel: FragmentationKernel | None = None,
    grid: SizeGrid | None = None,
    tol: float = 1e-10,
) -> EigenSolution:
    """Shortcut for ``(r1, U1)`` on the default geometric grid."""
    kernel = kernel or FragmentationKernel.uniform()
    grid = grid or make_grid(**DEFAULT_GRID)
    return principal_eigenpair(assemble_operator(grid, kernel, gamma, nu), tol=tol)


def write_solution(sol: EigenSolution, path, delimiter: str = "\t") -> None:
    """Header block of ``# key: value`` lines, then a (node, density) table."""
    lines = [f"# {k}: {json.dumps(v)}" for k, v in sol.summary().items()]
    lines.append(delimiter.join(["x", "density"]))
    lines.extend(f"{x!r}{delimiter}{u!r}" for x, u in zip(sol.nodes.tolist(), sol.density.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution(path, delimiter: str = "\t") -> EigenSolution:
    header = {}
    xs, us = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = json.loads(value)
        elif line and not line.startswith("x"):
            a, b = line.split(delimiter)
            xs.append(float(a))
            us.append(float(b))
    grid = SizeGrid.from_nodes(xs)
    return EigenSolution(
        grid=grid,
        eigenvalue=header["eigenvalue"],
        density=np.array(us),
        mean_size=header["mean_size"],
        residual=header["residual"],
        gamma=header["gamma"],
        nu=header["nu"],
        kernel=FragmentationKernel.from_mapping(header["kernel"]),
        beta0=header.get("beta0", 1.0),
        v_tau0=header.get("v_tau0", 1.0),
        mu0=header.get("mu0", 0.0),
        iterations=header.get("iterations", 0),
        method=header.get("method", ""),
    )
