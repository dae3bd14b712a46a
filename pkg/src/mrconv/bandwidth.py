"""Bandwidth selection for Gaussian kernel density estimates.

Rosenblatt-Parzen bandwidths come from Silverman's rule of thumb or the
Sheather-Jones solve-the-equation plug-in. The convolution estimator reuses
such a bandwidth and shrinks it by ``L ** (-1/5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DegenerateDataError, ParameterError

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# samples up to this size use exact pairwise differences in the SJ functionals
EXACT_PAIRS_MAX = 1000
SJ_BINS = 1000


@dataclass(frozen=True)
class BandwidthRule:
    """How to pick a Rosenblatt-Parzen bandwidth.

    ``kind`` is one of ``"sj"``, ``"silverman"`` or ``"fixed"``; ``value``
    is only used by ``"fixed"``.
    """

    kind: str = "sj"
    value: float | None = None

    def __post_init__(self):
        aliases = {"sheatherjones": "sj", "sheather_jones": "sj", "sheather-jones": "sj"}
        kind = aliases.get(self.kind.lower(), self.kind.lower())
        object.__setattr__(self, "kind", kind)
        if kind not in ("sj", "silverman", "fixed"):
            raise ParameterError(f"unknown bandwidth rule {self.kind!r}")
        if kind == "fixed" and not (self.value is not None and self.value > 0):
            raise ParameterError("fixed bandwidth rule needs a value > 0")

    @classmethod
    def fixed(cls, h):
        return cls("fixed", float(h))

    def to_dict(self):
        return {"rule": self.kind, "fixed_value": self.value}


SHEATHER_JONES = BandwidthRule("sj")
SILVERMAN = BandwidthRule("silverman")


def _spread(x):
    """``min(sd, IQR / 1.349)``, falling back to sd when the IQR collapses."""
    sd = np.std(x, ddof=1)
    if not sd > 0:
        raise DegenerateDataError("data have zero spread; bandwidth undefined")
    q75, q25 = np.percentile(x, [75, 25])
    iqr = (q75 - q25) / 1.349
    return min(sd, iqr) if iqr > 0 else sd


def silverman(x):
    x = np.asarray(x, dtype=float)
    sd = np.std(x, ddof=1)
    if not sd > 0:
        raise DegenerateDataError("data have zero spread; bandwidth undefined")
    q75, q25 = np.percentile(x, [75, 25])
    iqr = (q75 - q25) / 1.34
    a = min(sd, iqr) if iqr > 0 else sd
    return 0.9 * a * x.size ** (-0.2)


class _PairStats:
    """Pairwise differences of a sample, exact or binned.

    ``lags`` are distances between distinct pairs and ``counts`` their
    multiplicities, so functionals are ``sum(counts * g(lags))``.
    """

    def __init__(self, x):
        x = np.sort(np.asarray(x, dtype=float))
        n = x.size
        self.n = n
        if n <= EXACT_PAIRS_MAX:
            i, j = np.triu_indices(n, k=1)
            self.lags = x[j] - x[i]
            self.counts = None
        else:
            # pad the range evenly on both sides so reflection maps bins onto bins
            span = x[-1] - x[0]
            width = span * 1.01 / SJ_BINS
            lo = x[0] - 0.005 * span
            idx = np.clip(((x - lo) / width).astype(np.int64), 0, SJ_BINS - 1)
            y = np.bincount(idx, minlength=SJ_BINS).astype(float)
            corr = np.rint(np.correlate(y, y, mode="full")[SJ_BINS - 1 :])
            corr[0] = np.sum(y * (y - 1.0)) / 2.0
            self.lags = np.arange(SJ_BINS) * width
            self.counts = corr
        self.sq_lags = self.lags * self.lags

    def _sum(self, values):
        return values.sum() if self.counts is None else np.dot(self.counts, values)

    def phi4(self, a):
        """Estimate of the integrated squared second derivative at pilot ``a``."""
        d = self.sq_lags * (1.0 / (a * a))
        poly = d - 6.0
        poly *= d
        poly += 3.0
        np.multiply(d, -0.5, out=d)
        np.exp(d, out=d)
        s = self._sum(d * poly)
        s = 2.0 * s + 3.0 * self.n
        return s / (self.n * (self.n - 1) * a**5 * _SQRT_2PI)

    def phi6(self, b):
        d = (self.lags / b) ** 2
        s = self._sum(np.exp(-0.5 * d) * (d * d * d - 15.0 * d * d + 45.0 * d - 15.0))
        s = 2.0 * s - 15.0 * self.n
        return s / (self.n * (self.n - 1) * b**7 * _SQRT_2PI)


def sheather_jones(x):
    """Sheather-Jones solve-the-equation bandwidth for a Gaussian kernel.

    The root of ``h = (R(K) / (n * S(alpha2 * h**(5/7))))**(1/5)`` is
    bracketed in ``[h_silverman / 100, 100 * h_silverman]``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    scale = _spread(x)
    pairs = _PairStats(x)

    a = 1.24 * scale * n ** (-1.0 / 7.0)
    b = 1.23 * scale * n ** (-1.0 / 9.0)
    td = -pairs.phi6(b)
    if not (math.isfinite(td) and td > 0):
        raise DegenerateDataError("sample too sparse for the Sheather-Jones pilot estimate")
    alpha2 = 1.357 * (pairs.phi4(a) / td) ** (1.0 / 7.0)
    c1 = 1.0 / (2.0 * math.sqrt(math.pi) * n)

    def equation(h):
        sd = pairs.phi4(alpha2 * h ** (5.0 / 7.0))
        if sd <= 0:
            # functional estimate breaks down for tiny pilots: treat as undersmoothed
            return -h
        return (c1 / sd) ** 0.2 - h

    h0 = silverman(x)
    lo, hi = h0 / 100.0, h0 * 100.0
    flo, fhi = equation(lo), equation(hi)
    if not (flo > 0 > fhi):
        raise DegenerateDataError(
            f"Sheather-Jones equation has no sign change on [{lo:.3g}, {hi:.3g}]"
        )
    return optimize.brentq(equation, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def bandwidth_rp(data, rule=SHEATHER_JONES):
    """Rosenblatt-Parzen bandwidth for ``data`` under ``rule``."""
    if isinstance(rule, str):
        rule = BandwidthRule(rule)
    if rule.kind == "fixed":
        return float(rule.value)
    data = np.asarray(data, dtype=float).ravel()
    if data.size < 3:
        raise ParameterError(f"need at least 3 observations, got {data.size}")
    if rule.kind == "silverman":
        return float(silverman(data))
    return float(sheather_jones(data))


def bandwidth_conv(h_rp, l_total):
    """Convolution estimator bandwidth ``h_rp * L**(-1/5)``."""
    if not h_rp > 0:
        raise ParameterError(f"h_rp must be > 0, got {h_rp}")
    if l_total < 1:
        raise ParameterError(f"l_total must be >= 1, got {l_total}")
    return h_rp * l_total ** -0.2
