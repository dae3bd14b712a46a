"""One-dimensional discrete Gauss transform.

    G(y_v) = sum_i q_i * exp(-((y_v - x_i) / h) ** 2)

Three evaluators share one problem type:

* :func:`gt_exact` -- direct O(T L) summation, the reference for the others.
* :func:`gt_fft` -- linear binning onto a uniform grid, FFT convolution with
  the sampled Gaussian and linear interpolation back to the targets.
  Accuracy is controlled by the bin count but not certified.
* :func:`gt_ifgt` -- improved fast Gauss transform: farthest-point
  clustering of the sources, truncated Taylor series about each center and a
  cutoff radius beyond which a cluster is skipped. The absolute error per
  target is guaranteed to be at most ``accuracy * sum(|q|)``.

Note the ``h`` here is the *Gauss* bandwidth of the ``exp(-(d/h)^2)``
convention; a Gaussian kernel with standard deviation ``s`` corresponds to
``h = sqrt(2) * s``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ParameterError

MAX_ORDER = 200
# clusters are refined automatically while the required order exceeds this
SOFT_ORDER = 40
MAX_DEFAULT_CLUSTERS = 1024
# pairs x order evaluated per block in the IFGT and elements per block in the direct sum
_BLOCK = 1 << 21


@dataclass(frozen=True)
class GaussTransformProblem:
    sources: np.ndarray
    weights: np.ndarray
    targets: np.ndarray
    gauss_bandwidth: float
    accuracy: float = 1e-6

    def __post_init__(self):
        for name in ("sources", "weights", "targets"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=float).ravel())
        self.validate()

    def validate(self):
        if self.sources.shape != self.weights.shape:
            raise ParameterError(
                f"{self.sources.size} sources but {self.weights.size} weights"
            )
        if not self.gauss_bandwidth > 0:
            raise ParameterError(f"gauss_bandwidth must be > 0, got {self.gauss_bandwidth}")
        if not 0 < self.accuracy < 1:
            raise ParameterError(f"accuracy must lie in (0, 1), got {self.accuracy}")

    @property
    def weight_mass(self):
        return float(np.abs(self.weights).sum())


@dataclass(frozen=True)
class Backend:
    """Which Gauss transform evaluator to use.

    ``kind`` is ``"naive"``, ``"fft"`` or ``"fgt"``. ``bins`` applies to the
    FFT evaluator; ``eps``, ``clusters`` and ``order`` to the IFGT.
    """

    kind: str = "fgt"
    bins: int = 4096
    eps: float = 1e-6
    clusters: int | None = None
    order: int | None = None

    def __post_init__(self):
        kind = {"exact": "naive", "ifgt": "fgt"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in ("naive", "fft", "fgt"):
            raise ParameterError(f"unknown backend {self.kind!r}; choose naive, fft or fgt")
        if kind == "fft" and not _is_pow2(self.bins, 256):
            raise ParameterError(f"bins must be a power of two >= 256, got {self.bins}")
        if not 0 < self.eps < 1:
            raise ParameterError(f"eps must lie in (0, 1), got {self.eps}")
        if self.clusters is not None and self.clusters < 1:
            raise ParameterError("clusters must be >= 1")
        if self.order is not None and not 1 <= self.order <= MAX_ORDER:
            raise ParameterError(f"order must lie in [1, {MAX_ORDER}]")

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "fft":
            d["bins"] = self.bins
        if self.kind == "fgt":
            d.update(eps=self.eps, clusters=self.clusters, order=self.order)
        return d


def _is_pow2(n, minimum):
    return isinstance(n, (int, np.integer)) and n >= minimum and (n & (n - 1)) == 0


def gauss_transform(problem, backend):
    if backend.kind == "naive":
        return gt_exact(problem)
    if backend.kind == "fft":
        return gt_fft(problem, backend.bins)
    return gt_ifgt(problem, clusters=backend.clusters, order=backend.order)


# ---------------------------------------------------------------------------
# Direct evaluation
# ---------------------------------------------------------------------------


def gt_exact(problem):
    x, q, y = problem.sources, problem.weights, problem.targets
    h = problem.gauss_bandwidth
    out = np.zeros(y.size)
    if x.size == 0 or y.size == 0:
        return out
    step = max(1, _BLOCK // x.size)
    for s in range(0, y.size, step):
        d = (y[s : s + step, None] - x[None, :]) / h
        out[s : s + step] = np.exp(-d * d) @ q
    return out


# ---------------------------------------------------------------------------
# FFT on a binned grid
# ---------------------------------------------------------------------------


def gt_fft(problem, bins=4096):
    if not _is_pow2(bins, 256):
        raise ParameterError(f"bins must be a power of two >= 256, got {bins}")
    x, q, y = problem.sources, problem.weights, problem.targets
    h = problem.gauss_bandwidth
    out = np.zeros(y.size)
    if x.size == 0 or y.size == 0:
        return out
    # a degenerate source range still gets an 8h wide grid
    lo = x.min() - 4.0 * h
    hi = x.max() + 4.0 * h
    delta = (hi - lo) / (bins - 1)

    pos = (x - lo) / delta
    idx = np.minimum(pos.astype(np.int64), bins - 2)
    frac = pos - idx
    counts = np.bincount(idx, weights=q * (1.0 - frac), minlength=bins)
    counts += np.bincount(idx + 1, weights=q * frac, minlength=bins)

    offsets = np.arange(-(bins - 1), bins) * (delta / h)
    kernel = np.exp(-offsets * offsets)
    nfft = 4 * bins
    conv = np.fft.irfft(np.fft.rfft(counts, nfft) * np.fft.rfft(kernel, nfft), nfft)
    values = conv[bins - 1 : 2 * bins - 1]

    grid = lo + delta * np.arange(bins)
    return np.interp(y, grid, values, left=0.0, right=0.0)


# ---------------------------------------------------------------------------
# Improved fast Gauss transform
# ---------------------------------------------------------------------------


def truncation_bound(ra, rb, p):
    """Bound on ``exp(-a^2-b^2) |sum_{n>=p} (2ab)^n / n!|`` for ``|a|<=ra, |b|<=rb``.

    The worst case sits on ``|a| = ra`` with
    ``|b| = min(rb, (ra + sqrt(ra^2 + 2p)) / 2)``.
    """
    if ra == 0.0 or rb == 0.0:
        return 0.0
    b = min(rb, 0.5 * (ra + math.sqrt(ra * ra + 2.0 * p)))
    log_bound = -((ra - b) ** 2) + p * math.log(2.0 * ra * b) - math.lgamma(p + 1.0)
    return math.exp(log_bound) if log_bound < 700 else math.inf


def truncation_order(ra, rb, eps, max_order=MAX_ORDER):
    """Smallest order whose truncation bound is ``<= eps``, or None."""
    for p in range(1, max_order + 1):
        if truncation_bound(ra, rb, p) <= eps:
            return p
    return None


def farthest_point_centers(xs, k):
    """Gonzalez farthest-point clustering of sorted 1-D points.

    Returns ``(center_indices, radius)`` where the indices point into ``xs``
    in increasing order and ``radius`` is the largest distance from any point
    to its nearest center. The first center is the smallest point, so the
    result does not depend on the input order.
    """
    n = xs.size
    chosen = [0]
    heap = []

    def push(a, b):
        # candidates lie strictly between centers a and b (b=None: right end)
        if b is None:
            if a < n - 1:
                heapq.heappush(heap, (-(xs[n - 1] - xs[a]), a, n, n - 1))
            return
        if b - a < 2:
            return
        seg = xs[a + 1 : b]
        mid = 0.5 * (xs[a] + xs[b])
        j = a + 1 + int(np.searchsorted(seg, mid))
        best, best_d = None, -1.0
        for c in (j - 1, j):
            if a < c < b:
                d = min(xs[c] - xs[a], xs[b] - xs[c])
                if d > best_d:
                    best, best_d = c, d
        if best_d > 0:
            heapq.heappush(heap, (-best_d, a, b, best))

    push(0, None)
    while len(chosen) < k and heap:
        _, a, b, c = heapq.heappop(heap)
        chosen.append(c)
        push(a, c)
        push(c, None if b == n else b)
    radius = -heap[0][0] if heap else 0.0
    return np.sort(np.asarray(chosen)), float(radius)


def _cluster_setup(xs, k):
    centers_idx, radius = farthest_point_centers(xs, k)
    centers = xs[centers_idx]
    # nearest-center assignment of sorted points gives contiguous segments
    bounds = 0.5 * (centers[1:] + centers[:-1])
    starts = np.concatenate(([0], np.searchsorted(xs, bounds, side="right")))
    return centers, starts, radius


def gt_ifgt(problem, clusters=None, order=None):
    x, q, y = problem.sources, problem.weights, problem.targets
    h = problem.gauss_bandwidth
    eps = problem.accuracy
    out = np.zeros(y.size)
    if x.size == 0 or y.size == 0:
        return out

    perm = np.argsort(x, kind="stable")
    xs, qs = x[perm], q[perm]
    n_distinct = int(np.count_nonzero(np.diff(xs))) + 1
    cutoff = math.sqrt(math.log(1.0 / eps))
    # half the budget for truncation leaves room for rounding
    trunc_eps = 0.5 * eps

    if clusters is not None:
        k = min(int(clusters), n_distinct)
        centers, starts, radius = _cluster_setup(xs, k)
        ra = radius / h
        p = order if order is not None else truncation_order(ra, ra + cutoff, trunc_eps)
        if p is None or truncation_bound(ra, ra + cutoff, p) > trunc_eps:
            raise AccuracyError(
                f"accuracy {eps:g} needs order > {MAX_ORDER} with {k} clusters; "
                "use a larger accuracy or more clusters"
            )
    else:
        k = min(math.ceil(math.sqrt(x.size)), MAX_DEFAULT_CLUSTERS, n_distinct)
        while True:
            centers, starts, radius = _cluster_setup(xs, k)
            ra = radius / h
            p = truncation_order(ra, ra + cutoff, trunc_eps)
            if order is not None and (p is None or order >= p):
                p = order
            if p is not None and (p <= SOFT_ORDER or k >= n_distinct):
                break
            if k >= n_distinct:
                break
            k = min(2 * k, n_distinct)
        if p is None or truncation_bound(ra, ra + cutoff, p) > trunc_eps:
            raise AccuracyError(
                f"accuracy {eps:g} unattainable with order <= {MAX_ORDER}; use a larger accuracy"
            )

    coeffs = _taylor_coefficients(xs, qs, centers, starts, h, p)
    _evaluate(y, centers, coeffs, h, (ra + cutoff) * h, out)
    return out


def _taylor_coefficients(xs, qs, centers, starts, h, p):
    """``C[k, n] = sum_{i in k} q_i exp(-a_i^2) (2 a_i)^n / n!``, ``a_i = (x_i - c_k)/h``."""
    sizes = np.diff(np.append(starts, xs.size))
    a = (xs - np.repeat(centers, sizes)) / h
    term = qs * np.exp(-a * a)
    coeffs = np.empty((centers.size, p))
    for n in range(p):
        coeffs[:, n] = np.add.reduceat(term, starts)
        term = term * (2.0 * a / (n + 1))
    return coeffs


def _evaluate(y, centers, coeffs, h, rcut, out):
    p = coeffs.shape[1]
    lo = np.searchsorted(centers, y - rcut, side="left")
    hi = np.searchsorted(centers, y + rcut, side="right")
    counts = hi - lo
    # targets are processed in blocks so the pair arrays stay bounded
    cum = np.cumsum(counts)
    max_pairs = max(1, _BLOCK // p)
    t0 = 0
    while t0 < y.size:
        base = cum[t0 - 1] if t0 else 0
        t1 = int(np.searchsorted(cum, base + max_pairs, side="right"))
        t1 = max(t1, t0 + 1)
        c = counts[t0:t1]
        npairs = int(c.sum())
        if npairs:
            tid = np.repeat(np.arange(t0, t1), c)
            first = np.cumsum(c) - c
            kid = lo[tid] + (np.arange(npairs) - np.repeat(first, c))
            b = (y[tid] - centers[kid]) / h
            cg = coeffs[kid]
            acc = cg[:, p - 1].copy()
            for n in range(p - 2, -1, -1):
                acc *= b
                acc += cg[:, n]
            acc *= np.exp(-b * b)
            out[t0:t1] = np.bincount(tid - t0, weights=acc, minlength=t1 - t0)
        t0 = t1
