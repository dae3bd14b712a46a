"""Seeded synthetic data for the regression density experiments.

Distributions are small frozen dataclasses that know how to draw, and (for the
copula) how to evaluate their CDF and quantile function. A :class:`ScenarioSpec`
ties covariate marginals, an optional latent correlation matrix, an error law
and the regression coefficients together.

Randomness always flows through ``numpy.random.SeedSequence`` so that any
replication stream can be rebuilt from ``(master_seed, key...)`` alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special, stats

from .errors import MatrixError, ParameterError

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def seed_sequence(seed, *key):
    """Child ``SeedSequence`` for ``key`` under the master ``seed``.

    Keys are tuples of non-negative ints; distinct keys give independent
    streams and the same key always gives the same stream.
    """
    if isinstance(seed, np.random.SeedSequence):
        base_key = tuple(seed.spawn_key)
        return np.random.SeedSequence(seed.entropy, spawn_key=base_key + tuple(key))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def make_rng(seed, *key):
    if isinstance(seed, np.random.Generator):
        if key:
            raise ParameterError("cannot derive keyed streams from a Generator")
        return seed
    return np.random.default_rng(seed_sequence(seed, *key))


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Normal:
    """Normal law parameterized by mean and *variance*."""

    mean: float
    variance: float

    kind = "normal"

    def validate(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise ParameterError("normal parameters must be finite")
        if self.variance < 0:
            raise ParameterError(f"normal variance must be >= 0, got {self.variance}")

    @property
    def sd(self):
        return math.sqrt(self.variance)

    def sample(self, n, rng):
        z = rng.standard_normal(n)
        return self.mean + self.sd * z

    def expectation(self):
        return self.mean

    def var(self):
        return self.variance

    def cdf(self, x):
        return stats.norm.cdf(x, loc=self.mean, scale=self.sd)

    def ppf(self, u):
        return self.mean + self.sd * special.ndtri(u)

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    kind = "beta"

    def validate(self):
        if not (self.a > 0 and self.b > 0):
            raise ParameterError(f"beta shapes must be > 0, got ({self.a}, {self.b})")

    def sample(self, n, rng):
        return rng.beta(self.a, self.b, size=n)

    def expectation(self):
        return self.a / (self.a + self.b)

    def var(self):
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1))

    def cdf(self, x):
        return stats.beta.cdf(x, self.a, self.b)

    def ppf(self, u):
        return special.betaincinv(self.a, self.b, u)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class StudentT:
    dof: float

    kind = "student_t"

    def validate(self):
        # finite variance is needed for the regression moment conditions
        if not self.dof > 2:
            raise ParameterError(f"student-t dof must be > 2, got {self.dof}")

    def sample(self, n, rng):
        return rng.standard_t(self.dof, size=n)

    def expectation(self):
        return 0.0

    def var(self):
        return self.dof / (self.dof - 2)

    def cdf(self, x):
        return stats.t.cdf(x, self.dof)

    def ppf(self, u):
        return special.stdtrit(self.dof, u)

    def to_dict(self):
        return {"kind": self.kind, "dof": self.dof}


@dataclass(frozen=True)
class SkewNormal:
    """Azzalini skew normal with location, scale and shape."""

    loc: float
    scale: float
    shape: float

    kind = "skew_normal"

    @classmethod
    def mean_zero(cls, scale, shape):
        """Skew normal whose location is chosen so the mean is zero."""
        delta = shape / math.sqrt(1.0 + shape * shape)
        return cls(-scale * delta * math.sqrt(2.0 / math.pi), scale, shape)

    @property
    def delta(self):
        return self.shape / math.sqrt(1.0 + self.shape * self.shape)

    def validate(self):
        if not self.scale > 0:
            raise ParameterError(f"skew normal scale must be > 0, got {self.scale}")
        if not (math.isfinite(self.loc) and math.isfinite(self.shape)):
            raise ParameterError("skew normal parameters must be finite")

    def sample(self, n, rng):
        u0 = rng.standard_normal(n)
        u1 = rng.standard_normal(n)
        d = self.delta
        z = d * np.abs(u0) + math.sqrt(1.0 - d * d) * u1
        return self.loc + self.scale * z

    def expectation(self):
        return self.loc + self.scale * self.delta * math.sqrt(2.0 / math.pi)

    def var(self):
        return self.scale**2 * (1.0 - 2.0 * self.delta**2 / math.pi)

    def cdf(self, x):
        return stats.skewnorm.cdf(x, self.shape, loc=self.loc, scale=self.scale)

    def ppf(self, u):
        return stats.skewnorm.ppf(u, self.shape, loc=self.loc, scale=self.scale)

    def to_dict(self):
        return {"kind": self.kind, "loc": self.loc, "scale": self.scale, "shape": self.shape}


@dataclass(frozen=True)
class GaussianMixture:
    weights: tuple
    means: tuple
    sds: tuple

    kind = "mixture"

    def __post_init__(self):
        for name in ("weights", "means", "sds"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    def validate(self):
        if not (len(self.weights) == len(self.means) == len(self.sds) >= 1):
            raise ParameterError("mixture weights, means and sds must have equal length")
        if any(w < 0 for w in self.weights):
            raise ParameterError("mixture weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ParameterError(f"mixture weights sum to {sum(self.weights)!r}, not 1")
        if any(not s > 0 for s in self.sds):
            raise ParameterError("mixture sds must be > 0")

    def sample(self, n, rng):
        comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        z = rng.standard_normal(n)
        return np.asarray(self.means)[comp] + np.asarray(self.sds)[comp] * z

    def expectation(self):
        return float(np.dot(self.weights, self.means))

    def var(self):
        w, m, s = (np.asarray(v) for v in (self.weights, self.means, self.sds))
        mu = np.dot(w, m)
        return float(np.dot(w, s * s + m * m) - mu * mu)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for w, m, s in zip(self.weights, self.means, self.sds):
            out += w * special.ndtr((x - m) / s)
        return out

    def ppf(self, u):
        # vectorized bisection; the mixture CDF has no closed-form inverse
        u = np.asarray(u, dtype=float)
        lo = np.full_like(u, min(m - 40 * s for m, s in zip(self.means, self.sds)))
        hi = np.full_like(u, max(m + 40 * s for m, s in zip(self.means, self.sds)))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-13 * np.maximum(1.0, np.abs(mid))):
                break
        return 0.5 * (lo + hi)

    def to_dict(self):
        return {
            "kind": self.kind,
            "weights": list(self.weights),
            "means": list(self.means),
            "sds": list(self.sds),
        }


DistributionSpec = Union[Normal, Beta, StudentT, SkewNormal, GaussianMixture]

_KINDS = {
    "normal": Normal,
    "beta": Beta,
    "student_t": StudentT,
    "skew_normal": SkewNormal,
    "mixture": GaussianMixture,
}


def distribution_from_dict(d, normal_param="variance"):
    """Build a distribution from its JSON form.

    Normal laws accept either a ``variance`` or an ``sd`` key. A bare
    ``scale`` key is read according to ``normal_param`` ("variance" or "sd").
    """
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _KINDS:
        raise ParameterError(f"unknown distribution kind {kind!r}")
    if kind == "normal":
        mean = float(d.get("mean", 0.0))
        if "variance" in d:
            dist = Normal(mean, float(d["variance"]))
        elif "sd" in d:
            dist = Normal(mean, float(d["sd"]) ** 2)
        elif "scale" in d:
            dist = normal_from(mean, float(d["scale"]), normal_param)
        else:
            raise ParameterError("normal needs 'variance' or 'sd'")
    else:
        try:
            dist = _KINDS[kind](**d)
        except TypeError as exc:
            raise ParameterError(f"bad parameters for {kind}: {exc}") from None
    dist.validate()
    return dist


def normal_from(mean, second, normal_param="variance"):
    """Normal law from ``(mean, second)`` where ``second`` is a variance or sd."""
    if normal_param == "variance":
        return Normal(mean, second)
    if normal_param == "sd":
        return Normal(mean, second * second)
    raise ParameterError(f"normal_param must be 'variance' or 'sd', got {normal_param!r}")


def sample_distribution(spec, n, seed):
    """Draw ``n`` i.i.d. values from ``spec``; deterministic in ``seed``."""
    spec.validate()
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return spec.sample(int(n), make_rng(seed))


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompleteSample:
    responses: np.ndarray
    design: np.ndarray

    @property
    def n(self):
        return self.design.shape[0]

    @property
    def n_params(self):
        return self.design.shape[1]


@dataclass(frozen=True)
class AuxiliarySample:
    design: np.ndarray

    @property
    def m(self):
        return self.design.shape[0]


def check_correlation(corr):
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise MatrixError(f"correlation matrix must be square, got shape {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12, rtol=0):
        raise MatrixError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12, rtol=0):
        raise MatrixError("correlation matrix must have unit diagonal")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        raise MatrixError("correlation matrix is not positive definite") from None


@dataclass(frozen=True)
class ScenarioSpec:
    """Linear data generating process ``Y = [1, X] @ coefficients + error``."""

    coefficients: tuple
    covariate_specs: tuple
    error_spec: DistributionSpec
    correlation: tuple | None = None
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "covariate_specs", tuple(self.covariate_specs))
        if self.correlation is not None:
            rows = tuple(tuple(float(v) for v in row) for row in np.atleast_2d(self.correlation))
            object.__setattr__(self, "correlation", rows)

    @property
    def correlation_matrix(self):
        return None if self.correlation is None else np.array(self.correlation)

    @property
    def n_covariates(self):
        return len(self.covariate_specs)

    def validate(self):
        j = self.n_covariates
        if len(self.coefficients) != j + 1:
            raise ParameterError(
                f"need {j + 1} coefficients for {j} covariates, got {len(self.coefficients)}"
            )
        if self.coefficients[0] == 0:
            raise ParameterError("intercept coefficient must be nonzero")
        for spec in self.covariate_specs:
            spec.validate()
        self.error_spec.validate()
        if self.correlation is not None:
            corr = self.correlation_matrix
            if corr.shape != (j, j):
                raise MatrixError(f"correlation matrix shape {corr.shape} does not match {j} covariates")
            check_correlation(corr)

    def mean_response(self):
        ex = [s.expectation() for s in self.covariate_specs]
        return self.coefficients[0] + float(np.dot(self.coefficients[1:], ex)) + self.error_spec.expectation()

    def to_dict(self):
        return {
            "name": self.name,
            "coefficients": list(self.coefficients),
            "covariates": [s.to_dict() for s in self.covariate_specs],
            "correlation": None if self.correlation is None else [list(r) for r in self.correlation],
            "error": self.error_spec.to_dict(),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d, normal_param="variance"):
        try:
            spec = cls(
                coefficients=d["coefficients"],
                covariate_specs=[distribution_from_dict(c, normal_param) for c in d["covariates"]],
                error_spec=distribution_from_dict(d["error"], normal_param),
                correlation=d.get("correlation"),
                name=d.get("name", "custom"),
            )
        except KeyError as exc:
            raise ParameterError(f"scenario is missing key {exc}") from None
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, text, normal_param="variance"):
        return cls.from_dict(json.loads(text), normal_param)


def draw_covariates(spec, n, rng):
    """``n x J`` covariate matrix (no intercept column)."""
    j = spec.n_covariates
    if n == 0:
        return np.empty((0, j))
    if spec.correlation is None:
        cols = [s.sample(n, rng) for s in spec.covariate_specs]
        return np.column_stack(cols) if cols else np.empty((n, 0))
    # Gaussian copula: correlate in latent normal space, map through marginal quantiles
    chol = check_correlation(spec.correlation_matrix)
    z = rng.standard_normal((n, j)) @ chol.T
    u = np.clip(special.ndtr(z), 1e-16, 1.0 - 1e-16)
    return np.column_stack([s.ppf(u[:, k]) for k, s in enumerate(spec.covariate_specs)])


def with_intercept(x):
    return np.column_stack([np.ones(x.shape[0]), x])


def draw_complete(spec, n, rng):
    design = with_intercept(draw_covariates(spec, n, rng))
    errors = spec.error_spec.sample(n, rng) if n else np.empty(0)
    return CompleteSample(design @ np.asarray(spec.coefficients) + errors, design)


def draw_auxiliary(spec, m, rng):
    return AuxiliarySample(with_intercept(draw_covariates(spec, m, rng)))


def generate_scenario(spec, n_complete, n_auxiliary, seed):
    """Complete and auxiliary samples for ``spec``.

    The two samples come from independent child streams of ``seed``, so
    changing ``n_auxiliary`` never perturbs the complete sample.
    """
    spec.validate()
    if n_complete < spec.n_covariates + 2:
        raise ParameterError(
            f"n_complete must be >= J+2 = {spec.n_covariates + 2}, got {n_complete}"
        )
    if n_auxiliary < 0:
        raise ParameterError("n_auxiliary must be >= 0")
    complete = draw_complete(spec, int(n_complete), make_rng(seed, 0))
    aux = draw_auxiliary(spec, int(n_auxiliary), make_rng(seed, 1))
    return complete, aux


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

PRESETS = ("skewed", "multimodal", "correlated")


def preset(name, normal_param="sd"):
    """One of the three named simulation scenarios.

    ``normal_param`` selects how the second parameter of the normal laws in
    the scenario definitions is read ("variance" or "sd").
    """
    if name == "skewed":
        spec = ScenarioSpec(
            coefficients=(1.0, 3.0, 3.0),
            covariate_specs=(Beta(5.0, 1.0), normal_from(7.0, 0.05, normal_param)),
            error_spec=normal_from(0.0, 0.1, normal_param),
            name=name,
        )
    elif name == "multimodal":
        spec = ScenarioSpec(
            coefficients=(4.0, 1.5),
            covariate_specs=(
                GaussianMixture((0.2, 0.2, 0.4, 0.2), (-4.0, 4.0, 14.0, 21.0), (3.0, 2.0, 2.0, 2.0)),
            ),
            error_spec=normal_from(0.0, 4.0, normal_param),
            name=name,
        )
    elif name == "correlated":
        spec = ScenarioSpec(
            coefficients=(1.0, 1.0, 2.0, 0.5),
            covariate_specs=(Beta(2.0, 5.0), normal_from(6.0, 4.0, normal_param), StudentT(6.0)),
            error_spec=SkewNormal.mean_zero(1.0, 3.0),
            correlation=np.array([[1.0, 0.2, 0.5], [0.2, 1.0, 0.3], [0.5, 0.3, 1.0]]),
            name=name,
        )
    else:
        raise ParameterError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    spec.validate()
    return spec
