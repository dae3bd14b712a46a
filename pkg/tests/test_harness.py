import numpy as np
import pytest

from mrconv.datagen import Beta, Normal, ScenarioSpec, preset
from mrconv.errors import CellError, GridError, InsufficientDataError, ParameterError, SingularDesignError
from mrconv.estimators import MR, RP, DensityEstimate, Grid
from mrconv.gausstransform import Backend
from mrconv.harness import (
    MiseCell,
    ReferenceDensity,
    convergence_slopes,
    ise,
    mise_study,
    mise_table_csv,
    phi_inverse_moments,
    reference_density,
    slope_in_m,
    slope_in_n,
    timing_bench,
    timing_csv,
)


def _estimate(grid, values):
    return DensityEstimate(grid, np.asarray(values, dtype=float), 0.1, RP, Backend("naive"), 10)


def _reference(grid, values):
    return ReferenceDensity(grid, np.asarray(values, dtype=float), 0.1, 10, None, 0)


@pytest.fixture(scope="module")
def skewed_reference():
    return reference_density(preset("skewed"), 2024, source_size=200_000)


# --- ISE -------------------------------------------------------------------


def test_ise_identical_is_zero():
    g = Grid.uniform(0, 1, 11)
    v = np.linspace(0, 2, 11)
    assert ise(_estimate(g, v), _reference(g, v)) == 0.0


def test_ise_constant_offset():
    g = Grid.uniform(0, 3, 31)
    v = np.ones(31)
    assert ise(_estimate(g, v + 0.2), _reference(g, v)) == pytest.approx(g.spacing * 30 * 0.04)


def test_ise_hand_case():
    g = Grid([0.0, 0.5, 1.0])
    # the first point is excluded, so its difference does not matter
    assert ise(_estimate(g, [9.0, 0.1, 0.2]), _reference(g, [0.0, 0.0, 0.0])) == pytest.approx(0.025)


def test_ise_grid_mismatch():
    with pytest.raises(GridError):
        ise(_estimate(Grid.uniform(0, 1, 5), np.zeros(5)), _reference(Grid.uniform(0, 2, 5), np.zeros(5)))


# --- slopes ----------------------------------------------------------------


def _cells(values):
    return [MiseCell(MR, n, tau, mise, 10, 0.0) for n, tau, mise in values]


def test_slope_in_n_exact_power_law():
    cells = _cells([(n, 0, 3.7 / n) for n in (50, 100, 200, 400, 800)])
    assert slope_in_n(cells, 0) == pytest.approx(-1.0, abs=1e-9)


def test_slope_in_m_constructed_power_law():
    n, a, b = 50, 2.0, 1e-3
    cells = _cells([(n, t, a * (n * t) ** -0.8 + b) for t in (2, 4, 8, 16, 32, 64, 128, 256)])
    assert slope_in_m(cells, n, plateau=b) == pytest.approx(-0.8, abs=0.05)


def test_slope_in_m_default_plateau_uses_largest_tau():
    n, b = 50, 1e-3
    taus = (2, 4, 8, 16, 32, 64, 128, 256, 512, 4096)
    cells = _cells([(n, t, 2.0 * (n * t) ** -0.8 + b) for t in taus])
    assert -1.0 <= slope_in_m(cells, n) <= -0.6


def test_slope_insufficient_data():
    cells = _cells([(50, 0, 0.1), (100, 0, 0.05)])
    with pytest.raises(InsufficientDataError):
        slope_in_n(cells, 0)
    flat = _cells([(50, t, 0.01) for t in (2, 4, 8, 16)])
    with pytest.raises(InsufficientDataError):
        slope_in_m(flat, 50)


def test_convergence_slopes_partial():
    cells = _cells([(n, 0, 1.0 / n) for n in (50, 100, 200, 400)])
    s = convergence_slopes(cells)
    assert s.slope_in_n == pytest.approx(-1.0)
    assert s.slope_in_m is None
    with pytest.raises(InsufficientDataError):
        convergence_slopes(_cells([(50, 0, 0.1)]))


# --- reference and MISE study ----------------------------------------------


def test_reference_is_reproducible():
    a = reference_density(preset("multimodal"), 3, source_size=20_000)
    b = reference_density(preset("multimodal"), 3, source_size=20_000)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.grid.points, b.grid.points)
    assert len(a.grid) == 128


def test_reference_integrates_to_one(skewed_reference):
    assert skewed_reference.values.sum() * skewed_reference.grid.spacing == pytest.approx(1.0, abs=0.01)


def test_mise_study_layout_and_determinism(skewed_reference):
    kw = dict(reference=skewed_reference)
    cells = mise_study(preset("skewed"), [30, 60], [0, 2, 4], 3, 11, **kw)
    assert len(cells) == 12
    assert [(c.estimator, c.n_complete, c.tau) for c in cells[:2]] == [(RP, 30, 0), (MR, 30, 0)]
    assert all(c.mise > 0 and c.replications == 3 for c in cells)
    again = mise_study(preset("skewed"), [30, 60], [0, 2, 4], 3, 11, **kw)
    assert mise_table_csv(cells) == mise_table_csv(again)
    header = mise_table_csv(cells).splitlines()[0]
    assert header == "estimator,N,tau,mise,stderr,replications"


def test_mise_tau0_comparable_to_rp(skewed_reference):
    cells = mise_study(preset("skewed"), [100], [0], 40, 5, reference=skewed_reference)
    rp, mr = cells[0].mise, cells[1].mise
    assert 0.5 < mr / rp < 2.0


def test_mise_nonincreasing_in_tau(skewed_reference):
    taus = [0, 2, 4, 8, 16, 32, 64, 128]
    cells = mise_study(preset("skewed"), [200], taus, 30, 6, reference=skewed_reference)
    mr = [c for c in cells if c.estimator == MR]
    for prev, cur in zip(mr, mr[1:]):
        assert cur.mise <= prev.mise + 2 * np.hypot(prev.std_error, cur.std_error)


def test_rp_mise_decreases_with_n(skewed_reference):
    cells = mise_study(preset("skewed"), [50, 100, 200, 400], [0], 30, 7, reference=skewed_reference)
    rp = [c.mise for c in cells if c.estimator == RP]
    assert all(b < a for a, b in zip(rp, rp[1:]))


def test_doubling_replications_is_consistent(skewed_reference):
    a = mise_study(preset("skewed"), [100], [0, 8], 30, 8, reference=skewed_reference)
    b = mise_study(preset("skewed"), [100], [0, 8], 60, 8, reference=skewed_reference)
    for ca, cb in zip(a, b):
        assert abs(ca.mise - cb.mise) < 3 * np.hypot(ca.std_error, cb.std_error)


def test_mise_study_validation(skewed_reference):
    with pytest.raises(ParameterError):
        mise_study(preset("skewed"), [50], [0], 1, 0, reference=skewed_reference)
    with pytest.raises(ParameterError):
        mise_study(preset("skewed"), [50], [1.5], 2, 0, reference=skewed_reference)


def test_singular_design_reported_with_cell_context():
    # a constant covariate duplicates the intercept column
    spec = ScenarioSpec((1.0, 2.0, 1.0), (Beta(2.0, 2.0), Normal(3.0, 0.0)), Normal(0.0, 0.01))
    with pytest.raises(CellError) as info:
        mise_study(spec, [40], [0, 2], 2, 0, source_size=5000)
    assert info.value.n_complete == 40
    assert isinstance(info.value.cause, SingularDesignError)


def test_workers_give_identical_results(skewed_reference):
    a = mise_study(preset("skewed"), [40], [0, 4], 4, 9, reference=skewed_reference)
    b = mise_study(preset("skewed"), [40], [0, 4], 4, 9, reference=skewed_reference, workers=2)
    assert mise_table_csv(a) == mise_table_csv(b)


# --- timing and moments ----------------------------------------------------


def test_timing_rows_sorted_with_m0():
    rows = timing_bench(30, 10, [200, 0, 100], ["fgt", "naive", "fft"], 1, repeats=1)
    assert [(r.backend, r.m) for r in rows] == [
        (b, m) for b in ("fft", "fgt", "naive") for m in (0, 100, 200)
    ]
    assert all(r.seconds > 0 for r in rows)
    assert timing_csv(rows).splitlines()[0] == "backend,M,seconds"


def test_phi_inverse_moments_shape():
    out = phi_inverse_moments(preset("skewed"), [100, 200], 5, 0)
    assert out.shape == (2, 3)
    assert np.all(out > 0)
