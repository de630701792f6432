"""Fit of denaturation stability against growth rate across prion strains.

With only the fragmentation intensity varying between strains, stability
and growth rate are tied by

    G = A * (r + mu0)**(1 / (nu - 1)) + b

For fixed ``(nu, mu0)`` this is linear in ``(A, b)``, so the fit searches
over ``nu`` (and ``mu0``) only and solves for ``(A, b)`` exactly.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import DomainError, FitError, ParseError

__all__ = [
    "StrainRecord",
    "FitVariant",
    "FitResult",
    "PUBLISHED_FITS",
    "load_strains",
    "predict_G",
    "solve_amplitude",
    "sse",
    "r_squared",
    "fit",
    "curve",
    "published_sse",
]

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("name", "r_per_day", "G_molar")


@dataclass(frozen=True)
class StrainRecord:
    name: str
    r: float
    G: float


class FitVariant(enum.Enum):
    MU0_ZERO = "mu0-zero"
    MU0_FREE = "mu0-free"

    @property
    def n_params(self) -> int:
        return 3 if self is FitVariant.MU0_ZERO else 4


# Best-fit values reported for the bundled strain table
PUBLISHED_FITS = {
    FitVariant.MU0_ZERO: {"nu": -0.482, "mu0": 0.0, "A": 0.083, "b": 1.54, "r_squared": 0.70},
    FitVariant.MU0_FREE: {"nu": 0.316, "mu0": 0.023, "A": 0.01, "b": 1.69, "r_squared": 0.72},
}


def _parse_rows(reader: csv.DictReader) -> list[StrainRecord]:
    if reader.fieldnames is None:
        raise ParseError("strain table is empty")
    header = [h.strip() for h in reader.fieldnames]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise ParseError(f"strain table is missing column(s): {', '.join(missing)}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
        name = row["name"]
        try:
            r = float(row["r_per_day"])
            G = float(row["G_molar"])
        except ValueError:
            raise ParseError(f"row {lineno} ({name!r}): r and G must be numbers") from None
        if not r > 0:
            raise ParseError(f"row {lineno} ({name!r}): growth rate must be positive, got {r}")
        if not G > 0:
            raise ParseError(f"row {lineno} ({name!r}): stability must be positive, got {G}")
        records.append(StrainRecord(name, r, G))
    if not records:
        raise ParseError("strain table has no data rows")
    return records


def load_strains(source=None) -> list[StrainRecord]:
    """Read ``name, r_per_day, G_molar`` rows; the bundled 8-strain table by default.

    ``source`` may be a path or an open text stream.
    """
    if source is None:
        text = resources.files("polyfrag.data").joinpath("strains.csv").read_text()
        return _parse_rows(csv.DictReader(io.StringIO(text)))
    if hasattr(source, "read"):
        return _parse_rows(csv.DictReader(source))
    with open(Path(source), newline="") as fh:
        return _parse_rows(csv.DictReader(fh))


def _exponent(nu: float) -> float:
    if nu == 1.0:
        raise DomainError("nu = 1 makes the exponent 1/(nu - 1) singular")
    return 1.0 / (nu - 1.0)


def predict_G(r, nu: float, mu0: float, A: float, b: float):
    """``A * (r + mu0)**(1/(nu - 1)) + b``."""
    e = _exponent(nu)
    shifted = np.asarray(r, dtype=float) + mu0
    if np.any(shifted <= 0):
        raise DomainError("r + mu0 must be positive")
    if A < 0:
        raise DomainError("amplitude A must be nonnegative")
    out = A * shifted ** e + b
    return float(out) if out.ndim == 0 else out


def sse(records: Sequence[StrainRecord], nu, mu0, A, b) -> float:
    r = np.array([s.r for s in records])
    G = np.array([s.G for s in records])
    return float(np.sum((predict_G(r, nu, mu0, A, b) - G) ** 2))


def r_squared(records: Sequence[StrainRecord], predictions) -> float:
    """Coefficient of determination ``1 - SSE / SST``."""
    G = np.array([s.G for s in records])
    pred = np.asarray(predictions, dtype=float)
    if G.size < 2:
        raise DomainError("need at least two records")
    if pred.shape != G.shape:
        raise DomainError("one prediction per record is required")
    sst = float(np.sum((G - G.mean()) ** 2))
    if sst == 0:
        raise DomainError("R^2 is undefined for a constant stability column")
    return 1.0 - float(np.sum((G - pred) ** 2)) / sst


def solve_amplitude(r: np.ndarray, G: np.ndarray, nu: float, mu0: float):
    """Least-squares ``(A, b, sse)`` for fixed ``(nu, mu0)`` subject to ``A >= 0``."""
    f = (r + mu0) ** _exponent(nu)
    scale = float(np.max(np.abs(f)))
    if not np.isfinite(scale) or scale == 0:
        return 0.0, float(G.mean()), float(np.sum((G - G.mean()) ** 2))
    g = f / scale
    gc = g - g.mean()
    denom = float(gc @ gc)
    a = float(gc @ (G - G.mean())) / denom if denom > 0 else 0.0
    if a <= 0:
        a = 0.0
    b = float(G.mean() - a * g.mean())
    resid = a * g + b - G
    return a / scale, b, float(resid @ resid)


@dataclass
class FitResult:
    variant: FitVariant
    nu: float
    mu0: float
    A: float
    b: float
    sse: float
    r_squared: float
    records: list = field(repr=False, default_factory=list)
    n_starts: int = 0
    converged: bool = True
    diagnostics: list = field(repr=False, default_factory=list)

    def predict(self, r):
        return predict_G(r, self.nu, self.mu0, self.A, self.b)

    def residuals(self) -> list[dict]:
        return [
            {"name": s.name, "r": s.r, "G": s.G, "G_hat": self.predict(s.r),
             "residual": s.G - self.predict(s.r)}
            for s in self.records
        ]

    def as_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "nu": self.nu,
            "mu0": self.mu0,
            "A": self.A,
            "b": self.b,
            "sse": self.sse,
            "r_squared": self.r_squared,
            "n_starts": self.n_starts,
            "converged": self.converged,
            "residuals": self.residuals(),
        }


def curve(result: FitResult, r_min: float = 0.01, r_max: float = 0.2, n: int = 200):
    """Sampled fitted curve ``(r, G_hat)``."""
    r = np.linspace(r_min, r_max, n)
    return r, result.predict(r)


def _arrays(records):
    return np.array([s.r for s in records]), np.array([s.G for s in records])


def _nu_intervals(nu_bounds, allow_nu_above_one, upper_branch):
    intervals = [tuple(nu_bounds)]
    if allow_nu_above_one:
        intervals.append(tuple(upper_branch))
    for lo, hi in intervals:
        if lo >= hi or lo <= 1.0 <= hi:
            raise DomainError(f"nu interval ({lo}, {hi}) is empty or contains the singular value 1")
    return intervals


def _pick(candidates):
    """Lowest sse; near-ties go to the smallest |nu|, then the smallest mu0."""
    best = min(c["sse"] for c in candidates)
    tied = [c for c in candidates if c["sse"] <= best * (1 + 1e-9) + 1e-15]
    return min(tied, key=lambda c: (abs(c["nu"]), c["mu0"]))


def _local_minima_1d(values, k):
    idx = [i for i in range(len(values))
           if (i == 0 or values[i] <= values[i - 1]) and (i == len(values) - 1 or values[i] <= values[i + 1])]
    idx.sort(key=lambda i: values[i])
    return idx[:k]


def _fit_mu0_zero(r, G, intervals, n_nu, n_starts):
    starts = []
    for lo, hi in intervals:
        nus = np.linspace(lo, hi, n_nu)
        prof = np.array([solve_amplitude(r, G, nu, 0.0)[2] for nu in nus])
        for i in _local_minima_1d(prof, n_starts):
            a, bnd = nus[max(i - 1, 0)], nus[min(i + 1, n_nu - 1)]
            starts.append((float(nus[i]), float(prof[i]), (float(a), float(bnd))))
    results = []
    for nu0, sse0, (a, bnd) in starts:
        res = minimize_scalar(lambda nu: solve_amplitude(r, G, nu, 0.0)[2],
                              bounds=(a, bnd), method="bounded",
                              options={"xatol": 1e-12, "maxiter": 500})
        nu = float(res.x) if res.fun <= sse0 else nu0
        A, b, s = solve_amplitude(r, G, nu, 0.0)
        results.append({"start": (nu0,), "nu": nu, "mu0": 0.0, "A": A, "b": b, "sse": s,
                        "success": bool(res.success)})
    return results


def _fit_mu0_free(r, G, intervals, mu0_bounds, n_nu, n_mu, n_starts):
    mus = np.linspace(mu0_bounds[0], mu0_bounds[1], n_mu)
    results = []
    for lo, hi in intervals:
        nus = np.linspace(lo, hi, n_nu)
        table = np.array([[solve_amplitude(r, G, nu, mu)[2] for mu in mus] for nu in nus])
        order = np.argsort(table, axis=None, kind="stable")
        chosen = []
        for flat in order:
            i, j = np.unravel_index(flat, table.shape)
            # one start per neighbourhood of the coarse grid
            if all(abs(i - ci) > 2 or abs(j - cj) > 2 for ci, cj in chosen):
                chosen.append((i, j))
            if len(chosen) == n_starts:
                break
        bounds = [(lo, hi), tuple(mu0_bounds)]
        for i, j in chosen:
            x0 = np.array([nus[i], mus[j]])
            res = minimize(lambda p: solve_amplitude(r, G, p[0], p[1])[2], x0,
                           method="Nelder-Mead", bounds=bounds,
                           options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000,
                                    "maxfev": 40000})
            nu, mu = (float(res.x[0]), float(res.x[1])) if res.fun <= table[i, j] else (x0[0], x0[1])
            A, b, s = solve_amplitude(r, G, nu, mu)
            results.append({"start": (float(x0[0]), float(x0[1])), "nu": nu, "mu0": mu,
                            "A": A, "b": b, "sse": s, "success": bool(res.success)})
    return results


def fit(
    records: Sequence[StrainRecord],
    variant: FitVariant | str = FitVariant.MU0_ZERO,
    *,
    nu_bounds: tuple[float, float] = (-3.0, 0.95),
    mu0_bounds: tuple[float, float] = (0.0, 1.0),
    allow_nu_above_one: bool = False,
    upper_nu_bounds: tuple[float, float] = (1.05, 4.0),
    n_nu: int = 400,
    n_mu: int = 100,
    n_starts: int = 5,
) -> FitResult:
    """Multi-start least-squares fit of the stability model.

    A coarse grid over ``nu`` (and ``mu0`` for the free variant) with the
    exact inner solve for ``(A, b)`` seeds bounded derivative-free
    refinements; the best refined point wins.
    """
    variant = FitVariant(variant)
    records = list(records)
    if len(records) < variant.n_params + 1:
        raise DomainError(
            f"{variant.value} fit needs at least {variant.n_params + 1} records, got {len(records)}"
        )
    r, G = _arrays(records)
    if np.ptp(r) == 0:
        raise FitError("degenerate design: every record has the same growth rate")
    if mu0_bounds[0] < 0:
        raise DomainError("mu0 must be nonnegative")
    intervals = _nu_intervals(nu_bounds, allow_nu_above_one, upper_nu_bounds)

    if variant is FitVariant.MU0_ZERO:
        results = _fit_mu0_zero(r, G, intervals, n_nu, n_starts)
    else:
        results = _fit_mu0_free(r, G, intervals, mu0_bounds, n_nu, n_mu, n_starts)
    ok = [c for c in results if np.isfinite(c["sse"])]
    if not ok:
        raise FitError("every fit start failed", diagnostics=results)
    best = _pick(ok)
    pred = predict_G(r, best["nu"], best["mu0"], best["A"], best["b"])
    logger.info("%s fit: nu=%.4g mu0=%.4g sse=%.6g", variant.value, best["nu"], best["mu0"], best["sse"])
    return FitResult(
        variant=variant,
        nu=best["nu"],
        mu0=best["mu0"],
        A=best["A"],
        b=best["b"],
        sse=best["sse"],
        r_squared=r_squared(records, pred),
        records=records,
        n_starts=len(results),
        converged=any(c["success"] for c in ok),
        diagnostics=results,
    )


def published_sse(records: Iterable[StrainRecord], variant: FitVariant) -> float:
    p = PUBLISHED_FITS[variant]
    return sse(list(records), p["nu"], p["mu0"], p["A"], p["b"])
