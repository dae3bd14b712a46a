"""Rosenblatt-Parzen and regression-enhanced convolution density estimators.

Both use the standard Gaussian kernel with bandwidth ``h`` (its standard
deviation). Sums are delegated to a Gauss transform backend with Gauss
bandwidth ``sqrt(2) * h`` and prefactor ``1 / (sqrt(2 pi) h ...)``, so
callers only ever deal with the kernel bandwidth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridError, ParameterError
from .gausstransform import Backend, GaussTransformProblem, gauss_transform
from .regression import predict

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

RP = "rosenblatt_parzen"
MR = "convolution_mr"


@dataclass(frozen=True)
class Grid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        object.__setattr__(self, "points", pts)
        if pts.size < 2:
            raise GridError(f"grid needs at least 2 points, got {pts.size}")
        steps = np.diff(pts)
        if not np.all(steps > 0):
            raise GridError("grid points must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-12 * max(abs(steps[0]), np.max(np.abs(pts))):
            raise GridError("grid spacing is not uniform")

    @classmethod
    def uniform(cls, lo, hi, size):
        return cls(np.linspace(lo, hi, int(size)))

    @classmethod
    def around(cls, sample, size, h):
        """``size`` points spanning the 0.1%..99.9% quantiles of ``sample`` padded by ``3h``."""
        lo, hi = np.quantile(np.asarray(sample, dtype=float), [0.001, 0.999])
        return cls.uniform(lo - 3.0 * h, hi + 3.0 * h, size)

    @property
    def spacing(self):
        return float(self.points[1] - self.points[0])

    def __len__(self):
        return self.points.size

    def same_as(self, other):
        return self.points.shape == other.points.shape and np.array_equal(self.points, other.points)


@dataclass(frozen=True)
class DensityEstimate:
    grid: Grid
    values: np.ndarray
    bandwidth: float
    estimator: str
    backend: Backend
    n_complete: int
    n_auxiliary: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def integral(self):
        return float(self.values.sum() * self.grid.spacing)

    def metadata(self):
        d = {
            "estimator": self.estimator,
            "bandwidth": self.bandwidth,
            "backend": self.backend.to_dict(),
            "N": self.n_complete,
            "M": self.n_auxiliary,
            "V": len(self.grid),
        }
        d.update(self.meta)
        return d

    def write(self, csv_path, seed=None):
        """Write ``y,f_hat`` rows to ``csv_path`` and metadata to a ``.json`` sidecar."""
        csv_path = Path(csv_path)
        lines = ["y,f_hat"]
        lines += [f"{y!r},{f!r}" for y, f in zip(self.grid.points.tolist(), self.values.tolist())]
        csv_path.write_text("\n".join(lines) + "\n")
        meta = self.metadata()
        meta["seed"] = seed
        sidecar = csv_path.with_suffix(".json")
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return csv_path, sidecar


def read_density_csv(path):
    """Inverse of :meth:`DensityEstimate.write` for the CSV part: ``(y, f_hat)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def _as_grid(grid):
    return grid if isinstance(grid, Grid) else Grid(grid)


def _check_h(h):
    if not (h > 0 and math.isfinite(h)):
        raise ParameterError(f"bandwidth must be a positive finite number, got {h}")


def estimate_rp(data, grid, h, backend=Backend("naive")):
    """Rosenblatt-Parzen estimate ``(1/(hN)) sum_i K((y - Y_i)/h)`` on ``grid``."""
    _check_h(h)
    grid = _as_grid(grid)
    data = np.asarray(data, dtype=float).ravel()
    if data.size < 1:
        raise ParameterError("need at least one observation")
    problem = GaussTransformProblem(data, np.ones(data.size), grid.points, _SQRT2 * h, backend.eps)
    g = gauss_transform(problem, backend)
    # approximate backends can round to tiny negatives; the true sum cannot be
    values = np.maximum(g, 0.0) / (_SQRT_2PI * h * data.size)
    return DensityEstimate(grid, values, float(h), RP, backend, data.size, 0)


def artificial_targets(grid_points, residuals):
    """Stacked targets ``z[v*N + j] = y_v - e_j`` (row-major over the grid)."""
    return (np.asarray(grid_points)[:, None] - np.asarray(residuals)[None, :]).ravel()


def estimate_conv(fit, complete, aux, grid, h, backend=Backend("fgt")):
    """Regression-enhanced convolution estimate on ``grid``.

    ``f(y) = 1/(h N L) sum_{i<=L} sum_{j<=N} K((y - x_i'a - e_j) / h)`` where
    the ``L = N + M`` predictions come from the complete and auxiliary designs
    and ``e_j`` are the OLS residuals.

    The naive and fgt backends stack the ``V*N`` targets ``y_v - e_j`` and
    evaluate one Gauss transform over the ``L`` predictions, summing each
    block of ``N`` results. The fft backend instead bins the ``L*N``
    pseudo-observations ``x_i'a + e_j`` directly.
    """
    _check_h(h)
    grid = _as_grid(grid)
    n = complete.design.shape[0]
    if aux is not None and aux.design.shape[0] and aux.design.shape[1] != complete.design.shape[1]:
        raise ParameterError(
            f"auxiliary design has {aux.design.shape[1]} columns, complete has {complete.design.shape[1]}"
        )
    designs = [complete.design]
    if aux is not None and aux.design.shape[0]:
        designs.append(aux.design)
    sources = predict(fit, np.vstack(designs))
    l_total = sources.size
    residuals = np.asarray(fit.residuals)
    m = l_total - n

    if backend.kind == "fft":
        pseudo = (sources[:, None] + residuals[None, :]).ravel()
        problem = GaussTransformProblem(pseudo, np.ones(pseudo.size), grid.points, _SQRT2 * h, backend.eps)
        g = gauss_transform(problem, backend)
        values = np.maximum(g, 0.0) / (_SQRT_2PI * h * n * l_total)
    else:
        targets = artificial_targets(grid.points, residuals)
        problem = GaussTransformProblem(sources, np.ones(l_total), targets, _SQRT2 * h, backend.eps)
        g = gauss_transform(problem, backend)
        values = np.maximum(g.reshape(len(grid), n).sum(axis=1), 0.0) / (_SQRT_2PI * h * n * l_total)
    return DensityEstimate(grid, values, float(h), MR, backend, n, m)


def pseudo_sample(fit, complete, aux=None):
    """All ``L*N`` values ``x_i'a + e_j`` whose plain KDE is the convolution estimate."""
    designs = [complete.design] + ([aux.design] if aux is not None and aux.design.shape[0] else [])
    sources = predict(fit, np.vstack(designs))
    return (sources[:, None] + np.asarray(fit.residuals)[None, :]).ravel()
