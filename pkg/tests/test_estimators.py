import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mrconv.bandwidth import bandwidth_rp
from mrconv.datagen import AuxiliarySample, CompleteSample, generate_scenario, preset
from mrconv.errors import GridError, ParameterError
from mrconv.estimators import (
    Grid,
    artificial_targets,
    estimate_conv,
    estimate_rp,
    pseudo_sample,
    read_density_csv,
)
from mrconv.gausstransform import Backend
from mrconv.regression import fit_ols

NAIVE = Backend("naive")
FGT8 = Backend("fgt", eps=1e-8)


def conv_double_loop(fit, complete, aux, grid_points, h):
    """Plain double sum over predictions and residuals."""
    design = np.vstack([complete.design, aux.design])
    pred = design @ fit.coefficients
    res = fit.residuals
    n, l_total = res.size, pred.size
    out = np.empty(len(grid_points))
    for v, y in enumerate(grid_points):
        u = (y - pred[:, None] - res[None, :]) / h
        out[v] = np.exp(-0.5 * u * u).sum() / math.sqrt(2 * math.pi) / (h * n * l_total)
    return out


def _scenario(name="skewed", n=100, m=400, seed=0):
    complete, aux = generate_scenario(preset(name), n, m, seed)
    return complete, aux, fit_ols(complete)


# --- Grid ------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(GridError):
        Grid([0.0])
    with pytest.raises(GridError):
        Grid([0.0, 1.0, 0.5])
    with pytest.raises(GridError):
        Grid([0.0, 1.0, 3.0])
    g = Grid.uniform(-1, 1, 5)
    assert g.spacing == pytest.approx(0.5)
    assert len(g) == 5


def test_grid_around_covers_padded_quantiles():
    x = np.random.default_rng(0).normal(size=1000)
    g = Grid.around(x, 128, 0.2)
    lo, hi = np.quantile(x, [0.001, 0.999])
    assert g.points[0] == pytest.approx(lo - 0.6)
    assert g.points[-1] == pytest.approx(hi + 0.6)


# --- Rosenblatt-Parzen -------------------------------------------------------


def test_rp_single_datum_at_origin():
    est = estimate_rp([0.0], Grid([0.0, 1.0]), 1.0)
    assert est.values[0] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert est.values[0] == pytest.approx(0.3989, abs=1e-4)


def test_rp_normal_sup_norm():
    x = np.random.default_rng(1).standard_normal(10**4)
    grid = Grid.uniform(-3, 3, 121)
    est = estimate_rp(x, grid, bandwidth_rp(x, "sj"), FGT8)
    assert np.max(np.abs(est.values - stats.norm.pdf(grid.points))) < 0.02


def test_rp_naive_vs_fgt():
    x = np.random.default_rng(2).gamma(2.0, size=3000)
    grid = Grid.uniform(-1, 12, 200)
    a = estimate_rp(x, grid, 0.3, NAIVE)
    b = estimate_rp(x, grid, 0.3, FGT8)
    assert np.max(np.abs(a.values - b.values)) <= 1e-7


def test_rp_matches_scipy_gaussian_kde():
    x = np.random.default_rng(3).normal(size=500)
    grid = Grid.uniform(-4, 4, 50)
    h = 0.35
    kde = stats.gaussian_kde(x, bw_method=h / np.std(x, ddof=1))
    np.testing.assert_allclose(estimate_rp(x, grid, h).values, kde(grid.points), rtol=1e-10)


@pytest.mark.parametrize("h", [0.0, -1.0, float("nan")])
def test_bad_bandwidth(h):
    with pytest.raises(ParameterError):
        estimate_rp([0.0, 1.0], Grid([0.0, 1.0]), h)
    complete, aux, fit = _scenario(n=20, m=0)
    with pytest.raises(ParameterError):
        estimate_conv(fit, complete, aux, Grid([0.0, 1.0]), h)


# --- convolution estimator -------------------------------------------------


def test_artificial_targets_layout():
    z = artificial_targets([10.0, 20.0, 30.0], [1.0, 2.0])
    np.testing.assert_array_equal(z, [9.0, 8.0, 19.0, 18.0, 29.0, 28.0])


@pytest.mark.parametrize("backend", [NAIVE, FGT8])
def test_conv_matches_double_loop(backend):
    complete, aux, fit = _scenario(n=100, m=400, seed=4)
    grid = Grid.around(complete.responses, 50, 0.2)
    h = 0.05
    est = estimate_conv(fit, complete, aux, grid, h, backend)
    assert np.max(np.abs(est.values - conv_double_loop(fit, complete, aux, grid.points, h))) <= 1e-7
    assert est.n_complete == 100 and est.n_auxiliary == 400


def test_conv_fft_close_to_exact():
    complete, aux, fit = _scenario(n=100, m=400, seed=4)
    grid = Grid.around(complete.responses, 50, 0.2)
    a = estimate_conv(fit, complete, aux, grid, 0.05, NAIVE)
    b = estimate_conv(fit, complete, aux, grid, 0.05, Backend("fft", bins=4096))
    assert np.max(np.abs(a.values - b.values)) < 1e-3 * np.max(a.values)


def test_conv_m0_equals_rp_on_pseudo_sample():
    complete, aux, fit = _scenario(n=80, m=0, seed=5)
    grid = Grid.around(complete.responses, 60, 0.2)
    h = 0.07
    conv = estimate_conv(fit, complete, aux, grid, h, NAIVE)
    rp = estimate_rp(pseudo_sample(fit, complete, aux), grid, h, NAIVE)
    assert np.max(np.abs(conv.values - rp.values)) <= 1e-9


def test_zero_residual_toy():
    complete = CompleteSample(np.array([1.0, 3.0]), np.array([[1.0, 0.0], [1.0, 1.0]]))
    # fit_ols requires N >= J+2, so build the exact fit by hand
    from mrconv.regression import RegressionFit

    x = complete.design
    fit = RegressionFit(np.array([1.0, 2.0]), np.zeros(2), x.T @ x / 2, np.array([1.0, 3.0]), 1.0)
    grid = Grid.uniform(-1, 5, 61)
    h = 0.4
    est = estimate_conv(fit, complete, AuxiliarySample(np.empty((0, 2))), grid, h, NAIVE)
    y = grid.points
    expected = 0.5 * (stats.norm.pdf(y, 1, h) + stats.norm.pdf(y, 3, h))
    np.testing.assert_allclose(est.values, expected, rtol=1e-12)


def test_conv_aux_column_mismatch():
    complete, _, fit = _scenario(n=20, m=0)
    with pytest.raises(ParameterError):
        estimate_conv(fit, complete, AuxiliarySample(np.ones((5, 2))), Grid([0.0, 1.0]), 0.1)


def test_duplicated_auxiliary_rows_reweight():
    complete, _, fit = _scenario(n=40, m=0, seed=6)
    aux = AuxiliarySample(complete.design[:15])
    grid = Grid.around(complete.responses, 40, 0.2)
    h = 0.06
    est = estimate_conv(fit, complete, aux, grid, h, NAIVE)
    stacked = np.vstack([complete.design, complete.design[:15]]) @ fit.coefficients
    pseudo = (stacked[:, None] + fit.residuals[None, :]).ravel()
    rp = estimate_rp(pseudo, grid, h, NAIVE)
    assert np.max(np.abs(est.values - rp.values)) <= 1e-9


def test_sub_grid_consistency():
    complete, aux, fit = _scenario(n=60, m=240, seed=7)
    grid = Grid.around(complete.responses, 64, 0.2)
    sub = Grid(grid.points[10:40:3])
    full = estimate_conv(fit, complete, aux, grid, 0.05, FGT8)
    part = estimate_conv(fit, complete, aux, sub, 0.05, FGT8)
    assert np.max(np.abs(full.values[10:40:3] - part.values)) <= 1e-7


@pytest.mark.parametrize("name", ["skewed", "multimodal", "correlated"])
def test_nonnegative_and_near_normalized(name):
    complete, aux, fit = _scenario(name, n=100, m=800, seed=8)
    h_rp = bandwidth_rp(complete.responses, "sj")
    grid = Grid.around(complete.responses, 128, h_rp)
    for est in (
        estimate_rp(complete.responses, grid, h_rp, FGT8),
        estimate_conv(fit, complete, aux, grid, h_rp * 900 ** -0.2, FGT8),
    ):
        assert np.all(est.values >= 0)
        assert est.integral() <= 1.05
        assert est.integral() > 0.9


def test_write_and_read(tmp_path):
    complete, aux, fit = _scenario(n=30, m=60, seed=9)
    grid = Grid.around(complete.responses, 16, 0.2)
    est = estimate_conv(fit, complete, aux, grid, 0.08, FGT8)
    csv_path, sidecar = est.write(tmp_path / "d.csv", seed=9)
    y, f = read_density_csv(csv_path)
    np.testing.assert_array_equal(y, grid.points)
    np.testing.assert_array_equal(f, est.values)
    meta = json.loads(sidecar.read_text())
    assert meta["N"] == 30 and meta["M"] == 60 and meta["seed"] == 9
    assert meta["bandwidth"] == 0.08
    assert meta["backend"]["kind"] == "fgt"


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10**6),
    n=st.integers(5, 60),
    m=st.integers(0, 120),
    h=st.floats(0.005, 2.0),
)
def test_conv_property_fgt_vs_double_loop(seed, n, m, h):
    complete, aux, fit = _scenario("correlated", n=n, m=m, seed=seed)
    grid = Grid.around(complete.responses, 20, h)
    est = estimate_conv(fit, complete, aux, grid, h, FGT8)
    # certified transform error eps*N*L per grid point, divided by sqrt(2 pi) h N L
    bound = 1e-8 / (math.sqrt(2 * math.pi) * h)
    assert np.max(np.abs(est.values - conv_double_loop(fit, complete, aux, grid.points, h))) <= bound
