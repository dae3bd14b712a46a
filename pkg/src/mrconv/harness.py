"""Monte Carlo evaluation of the density estimators.

Random streams are keyed so every quantity is reproducible on its own:

* reference sample: ``(seed, REFERENCE)``
* complete sample of replication ``r`` at size ``N``: ``(seed, COMPLETE, N, r)``
* auxiliary rows come in blocks of ``N`` rows keyed ``(seed, AUXILIARY, N, r, b)``;
  the auxiliary sample for ratio ``tau`` is the first ``tau`` blocks.

Because the complete sample does not depend on ``tau``, all ``tau`` cells of
a replication share it (common random numbers), which keeps MISE curves in
``tau`` smooth without biasing any single cell.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bandwidth import SHEATHER_JONES, bandwidth_conv, bandwidth_rp
from .datagen import (
    AuxiliarySample,
    draw_auxiliary,
    draw_complete,
    generate_scenario,
    make_rng,
    seed_sequence,
)
from .errors import CellError, GridError, InsufficientDataError, MrconvError, ParameterError
from .estimators import MR, RP, Grid, estimate_conv, estimate_rp
from .gausstransform import Backend
from .regression import fit_ols

log = logging.getLogger(__name__)

REFERENCE, COMPLETE, AUXILIARY, TIMING, PHI = 1, 2, 3, 4, 5

DEFAULT_SOURCE_SIZE = 10**6
DEFAULT_GRID_SIZE = 128
STUDY_TAUS = (0, 2, 4, 8, 16, 32, 64, 128, 256, 512)
BENCH_M_VALUES = (0, 100, 200, 400, 800, 1600, 3200, 6400, 12800)


@dataclass(frozen=True)
class ReferenceDensity:
    grid: Grid
    values: np.ndarray
    bandwidth: float
    source_size: int
    scenario: object
    seed: int


@dataclass(frozen=True)
class MiseCell:
    estimator: str
    n_complete: int
    tau: int
    mise: float
    replications: int
    std_error: float

    @property
    def m(self):
        return self.tau * self.n_complete


@dataclass(frozen=True)
class TimingRow:
    backend: str
    m: int
    seconds: float


@dataclass(frozen=True)
class Slopes:
    slope_in_n: float | None
    slope_in_m: float | None


def reference_density(scenario, seed, grid_size=DEFAULT_GRID_SIZE, source_size=DEFAULT_SOURCE_SIZE):
    """Large-sample Rosenblatt-Parzen estimate used as the truth."""
    scenario.validate()
    y = draw_complete(scenario, int(source_size), make_rng(seed, REFERENCE)).responses
    h = bandwidth_rp(y, SHEATHER_JONES)
    grid = Grid.around(y, grid_size, h)
    est = estimate_rp(y, grid, h, Backend("naive"))
    return ReferenceDensity(grid, est.values, h, int(source_size), scenario, seed)


def ise(estimate, reference):
    """Riemann approximation ``dy * sum_{v>=2} (f_hat(y_v) - f(y_v))^2``."""
    if not estimate.grid.same_as(reference.grid):
        raise GridError("estimate and reference are on different grids")
    diff = np.asarray(estimate.values)[1:] - np.asarray(reference.values)[1:]
    return float(reference.grid.spacing * np.dot(diff, diff))


def _check_taus(tau_values):
    taus = []
    for t in tau_values:
        if t < 0 or int(t) != t:
            raise ParameterError(f"tau must be a nonnegative integer, got {t}")
        taus.append(int(t))
    return sorted(set(taus))


def _replication(args):
    """ISE of both estimators for one complete sample and every tau."""
    scenario, n, r, taus, seed, reference, backend, bandwidth_source = args
    complete = draw_complete(scenario, n, make_rng(seed, COMPLETE, n, r))
    fit = fit_ols(complete)
    h_y = bandwidth_rp(complete.responses, SHEATHER_JONES)
    rp = estimate_rp(complete.responses, reference.grid, h_y, backend)
    ise_rp = ise(rp, reference)

    h_base = h_y if bandwidth_source == "response" else bandwidth_rp(fit.residuals, SHEATHER_JONES)
    blocks = [
        draw_auxiliary(scenario, n, make_rng(seed, AUXILIARY, n, r, b)).design
        for b in range(max(taus))
    ]
    ise_mr = []
    for tau in taus:
        aux = AuxiliarySample(
            np.vstack(blocks[:tau]) if tau else np.empty((0, complete.design.shape[1]))
        )
        h = bandwidth_conv(h_base, n * (1 + tau))
        est = estimate_conv(fit, complete, aux, reference.grid, h, backend)
        ise_mr.append(ise(est, reference))
    return ise_rp, ise_mr


def _summarize(values):
    values = np.asarray(values)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def mise_study(
    scenario,
    n_values,
    tau_values,
    replications,
    seed,
    *,
    reference=None,
    backend=None,
    bandwidth_source="response",
    grid_size=DEFAULT_GRID_SIZE,
    source_size=DEFAULT_SOURCE_SIZE,
    workers=1,
):
    """MISE of both estimators over an ``(N, tau)`` grid.

    Returns one :class:`MiseCell` per estimator and cell, ordered by
    ``(N, tau)`` with the Rosenblatt-Parzen cell first. The convolution
    bandwidth is the Sheather-Jones bandwidth of the residuals (or of the
    responses, with ``bandwidth_source="response"``) times ``L**(-1/5)``.
    """
    if replications < 2:
        raise ParameterError("need at least 2 replications")
    if bandwidth_source not in ("residuals", "response"):
        raise ParameterError(f"bandwidth_source must be 'residuals' or 'response', got {bandwidth_source!r}")
    scenario.validate()
    taus = _check_taus(tau_values)
    backend = backend or Backend("fgt")
    if reference is None:
        reference = reference_density(scenario, seed, grid_size, source_size)

    cells = []
    for n in sorted(set(int(n) for n in n_values)):
        if n < scenario.n_covariates + 2:
            raise ParameterError(f"N={n} is below J+2")
        jobs = [(scenario, n, r, taus, seed, reference, backend, bandwidth_source) for r in range(replications)]
        try:
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_replication, jobs))
            else:
                results = [_replication(job) for job in jobs]
        except MrconvError as exc:
            raise CellError(n, taus, exc) from exc
        ise_rp = [res[0] for res in results]
        ise_mr = np.array([res[1] for res in results])
        rp_mise, rp_se = _summarize(ise_rp)
        for k, tau in enumerate(taus):
            cells.append(MiseCell(RP, n, tau, rp_mise, replications, rp_se))
            mise, se = _summarize(ise_mr[:, k])
            cells.append(MiseCell(MR, n, tau, mise, replications, se))
        log.info("N=%d done (%d replications)", n, replications)
    return cells


def _ls_slope(x, y):
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def _mr_cells(cells):
    return [c for c in cells if c.estimator == MR]


def slope_in_n(cells, tau=0):
    """Least-squares slope of log MISE against log N at fixed ``tau``."""
    pts = sorted((c.n_complete, c.mise) for c in _mr_cells(cells) if c.tau == tau and c.mise > 0)
    if len(pts) < 3:
        raise InsufficientDataError(f"need >= 3 cells at tau={tau}, got {len(pts)}")
    n, mise = zip(*pts)
    return _ls_slope(n, mise)


def slope_in_m(cells, n_complete=None, plateau=None, saturation_factor=1.5):
    """Slope of ``log(MISE - plateau)`` against ``log M`` at fixed N.

    ``plateau`` defaults to the MISE of the largest-tau cell, which is then
    left out of the fit. Only pre-saturation cells enter the fit: those with
    ``MISE >= saturation_factor * plateau`` (and ``M > 0``).
    """
    mr = _mr_cells(cells)
    if n_complete is None:
        if not mr:
            raise InsufficientDataError("no convolution-estimator cells")
        n_complete = min(c.n_complete for c in mr)
    row = sorted((c for c in mr if c.n_complete == n_complete), key=lambda c: c.tau)
    if plateau is None:
        if not row:
            raise InsufficientDataError(f"no cells at N={n_complete}")
        plateau = row[-1].mise
        row = row[:-1]
    usable = [
        (c.m, c.mise - plateau)
        for c in row
        if c.m > 0 and c.mise - plateau > 0 and c.mise >= saturation_factor * plateau
    ]
    if len(usable) < 3:
        raise InsufficientDataError(
            f"need >= 3 pre-saturation cells at N={n_complete}, got {len(usable)}"
        )
    m, excess = zip(*usable)
    return _ls_slope(m, excess)


def convergence_slopes(cells, tau=0, n_complete=None, plateau=None, saturation_factor=1.5):
    """``Slopes(slope_in_n, slope_in_m)``; an axis without enough cells gives None.

    Raises :class:`InsufficientDataError` only when neither slope can be fitted.
    """
    out = []
    errors = []
    for fn, kw in (
        (slope_in_n, dict(tau=tau)),
        (slope_in_m, dict(n_complete=n_complete, plateau=plateau, saturation_factor=saturation_factor)),
    ):
        try:
            out.append(fn(cells, **kw))
        except InsufficientDataError as exc:
            out.append(None)
            errors.append(str(exc))
    if out[0] is None and out[1] is None:
        raise InsufficientDataError("; ".join(errors))
    return Slopes(*out)


def _as_backend(b):
    return b if isinstance(b, Backend) else Backend(b)


def timing_bench(n, v, m_values, backends, seed, scenario=None, repeats=5):
    """Median wall time of one convolution estimate per ``(backend, M)``.

    Each measurement is preceded by an untimed warm-up call. Rows are sorted
    by ``(backend, M)``.
    """
    from .datagen import preset

    if repeats < 1:
        raise ParameterError("repeats must be >= 1")
    scenario = scenario or preset("skewed")
    backends = [_as_backend(b) for b in backends]
    rows = []
    for m in sorted(set(int(m) for m in m_values)):
        complete, aux = generate_scenario(scenario, n, m, seed_sequence(seed, TIMING, m))
        fit = fit_ols(complete)
        h_rp = bandwidth_rp(fit.residuals, SHEATHER_JONES)
        h = bandwidth_conv(h_rp, n + m)
        grid = Grid.around(complete.responses, v, bandwidth_rp(complete.responses, SHEATHER_JONES))
        for backend in backends:
            estimate_conv(fit, complete, aux, grid, h, backend)
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                estimate_conv(fit, complete, aux, grid, h, backend)
                times.append(time.perf_counter() - t0)
            rows.append(TimingRow(backend.kind, m, float(np.median(times))))
    rows.sort(key=lambda r: (r.backend, r.m))
    return rows


def phi_inverse_moments(scenario, n_values, replications, seed):
    """Monte Carlo mean of ``((X'X/N)^{-1} X_1)_p^2`` for each N and coordinate p.

    Returns an array of shape ``(len(n_values), J+1)``.
    """
    out = []
    for n in n_values:
        acc = np.zeros(scenario.n_covariates + 1)
        for r in range(replications):
            x = draw_complete(scenario, int(n), make_rng(seed, PHI, int(n), r)).design
            v = np.linalg.solve(x.T @ x / n, x[0])
            acc += v * v
        out.append(acc / replications)
    return np.array(out)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def mise_table_csv(cells):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["estimator", "N", "tau", "mise", "stderr", "replications"])
    for c in cells:
        w.writerow([c.estimator, c.n_complete, c.tau, repr(c.mise), repr(c.std_error), c.replications])
    return buf.getvalue()


def timing_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["backend", "M", "seconds"])
    for r in rows:
        w.writerow([r.backend, r.m, repr(r.seconds)])
    return buf.getvalue()
