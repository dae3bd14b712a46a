"""Ordinary least squares for the linear regression model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ParameterError, SingularDesignError

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class RegressionFit:
    """Result of :func:`fit_ols`.

    Attributes
    ----------
    coefficients : ndarray, shape (J+1,)
    residuals : ndarray, shape (N,)
        ``Y - X @ coefficients``.
    phi_n : ndarray, shape (J+1, J+1)
        Scaled Gram matrix ``X.T @ X / N``.
    fitted : ndarray, shape (N,)
    condition_number : float
        2-norm condition number of the design matrix.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    phi_n: np.ndarray
    fitted: np.ndarray
    condition_number: float

    @property
    def n_params(self):
        return self.coefficients.shape[0]


def fit_ols(sample):
    """Least squares fit of ``sample.responses`` on ``sample.design``.

    Solved through a thin QR factorization of the design. Raises
    :class:`SingularDesignError` when the design condition number exceeds
    ``1e12`` rather than falling back to a pseudo-inverse.
    """
    x = np.asarray(sample.design, dtype=float)
    y = np.asarray(sample.responses, dtype=float)
    n, k = x.shape
    if y.shape != (n,):
        raise ParameterError(f"responses have shape {y.shape}, expected ({n},)")
    if n < k + 1:
        raise ParameterError(f"need at least J+2 = {k + 1} observations, got {n}")

    q, r = np.linalg.qr(x, mode="reduced")
    sv = np.linalg.svd(r, compute_uv=False)
    cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
    if not cond <= MAX_CONDITION:
        raise SingularDesignError(cond)

    coef = linalg.solve_triangular(r, q.T @ y)
    fitted = x @ coef
    return RegressionFit(
        coefficients=coef,
        residuals=y - fitted,
        phi_n=(x.T @ x) / n,
        fitted=fitted,
        condition_number=float(cond),
    )


def predict(fit, design):
    """Linear predictor ``design @ fit.coefficients``."""
    design = np.asarray(design, dtype=float)
    if design.ndim == 1:
        design = design[None, :]
    if design.shape[1] != fit.n_params:
        raise ParameterError(
            f"design has {design.shape[1]} columns, fit has {fit.n_params} coefficients"
        )
    return design @ fit.coefficients


def standard_errors(fit, design):
    """Classical OLS standard errors ``sqrt(diag(s^2 (X'X)^-1))``."""
    n, k = design.shape
    s2 = fit.residuals @ fit.residuals / (n - k)
    cov = s2 * np.linalg.inv(design.T @ design)
    return np.sqrt(np.diag(cov))
