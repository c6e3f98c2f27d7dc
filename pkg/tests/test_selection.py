"""
Tests for log-likelihood, information criteria, the component sweep and PFA curves
"""
import math

import numpy as np
import pytest

from config import config
from core.distributions import rayleigh_sample
from core.errors import DataError, NonFiniteLikelihood
from core.mixture_em import component_log_densities, sample_mixture
from core.selection import (
    aic, bic, build_report, empirical_pfa, infer_sample_count, loglik, model_pfa_curve, param_count, render_table,
    sweep, threshold_grid,
)
from seafloor.models import EmConfig, RayleighParams, RKMixture

FAST = EmConfig(tol=1e-6, max_iter=60)

# Model selection results for two 600x600 tiles: M -> (LL, AIC, BIC)
TILE_1 = {2: (-4321, 8652, 8688), 3: (-4157, 8331, 8389), 4: (-4137, 8297, 8377), 5: (-4137, 8301, 8404)}
TILE_2 = {2: (-885, 1780, 1810), 3: (-847, 1711, 1759), 4: (-839, 1700, 1766), 5: (-840, 1709, 1793)}
TILE_2_N = int(round(math.exp(8.0)))


# ----------------------------------------------------------------------
# log-likelihood and criteria
# ----------------------------------------------------------------------

def test_loglik_single_sample():
    theta = RKMixture.rayleigh_only(1.0)
    single = loglik(np.array([1.0]), theta)
    assert single == pytest.approx(math.log(2.0) - 1.0, rel=1e-14)
    assert loglik(np.array([1.0, 1.0]), theta) == 2.0 * single


def test_loglik_matches_extended_precision_product(three_component):
    data, _ = sample_mixture(three_component, 100, seed=31)
    densities = np.exp(component_log_densities(data, three_component)).astype(np.longdouble)
    oracle = float(np.log(np.prod(densities.sum(axis=1))))
    assert loglik(data, three_component) == pytest.approx(oracle, abs=1e-9)


def test_loglik_zero_density_raises(two_component):
    with pytest.raises(NonFiniteLikelihood):
        loglik(np.array([0.0, 1.0]), two_component)


def test_loglik_needs_samples(two_component):
    with pytest.raises(DataError):
        loglik(np.array([]), two_component)


@pytest.mark.parametrize("M,expected", [(1, 1), (2, 5), (3, 8), (4, 11), (5, 14)])
def test_param_count_default(M, expected):
    assert param_count(M) == expected


def test_param_count_free_weight_convention():
    assert param_count(1, "3M-2") == 1
    assert param_count(2, "3M-2") == 4
    assert param_count(4, "3M-2") == 10


@pytest.mark.parametrize("M,convention", [(0, "3M-1"), (2, "2M")])
def test_param_count_rejects(M, convention):
    with pytest.raises(DataError):
        param_count(M, convention)


def test_criteria_examples():
    assert aic(-4321, 5) == 8652
    assert aic(-885, 5) == 1780
    assert aic(0.0, 1) == 2.0
    assert bic(-4321, 5, 10_000) == pytest.approx(8688.05, abs=0.01)
    assert bic(-885, 5, 10_000) == pytest.approx(1816.05, abs=0.01)
    assert bic(0.0, 1, math.exp(2.0)) == pytest.approx(2.0, rel=1e-14)


def test_bic_needs_two_samples():
    with pytest.raises(DataError):
        bic(-1.0, 1, 1)


def test_criterion_invariants():
    for n in (100, 10_000, 123_456):
        for k in (1, 5, 14):
            ll = -1234.5
            assert bic(ll, k, n) - aic(ll, k) == pytest.approx((math.log(n) - 2.0) * k, rel=1e-12)
            assert aic(ll, k + 1) > aic(ll, k)
            assert bic(ll, k + 1, n) > bic(ll, k, n)
    assert (math.log(10_000) / 2.0) == pytest.approx(4.605, abs=1e-3)


def test_infer_sample_count():
    assert infer_sample_count(1780, 1810, 5) == pytest.approx(math.exp(8.0), rel=1e-12)
    assert infer_sample_count(8652, 8688, 5) == pytest.approx(9897.13, rel=1e-5)


# ----------------------------------------------------------------------
# reference table regression
# ----------------------------------------------------------------------

@pytest.mark.parametrize("table,n", [(TILE_1, 10_000), (TILE_2, TILE_2_N)])
def test_reference_table_reproduced(table, n):
    report = build_report({M: row[0] for M, row in table.items()}, n)
    for M, (_, expected_aic, expected_bic) in table.items():
        row = report.row(M)
        assert row.k == 3 * M - 1
        assert abs(row.aic - expected_aic) <= 3
        assert abs(row.bic - expected_bic) <= 3


def test_reference_table_selections():
    tile1 = build_report({M: row[0] for M, row in TILE_1.items()}, 10_000)
    tile2 = build_report({M: row[0] for M, row in TILE_2.items()}, TILE_2_N)
    assert (tile1.selected_by_aic, tile1.selected_by_bic) == (4, 4)
    assert (tile2.selected_by_aic, tile2.selected_by_bic) == (4, 3)
    assert tile1.selected_by_ll == 4


def test_tile_two_bic_at_nominal_sample_count_is_off_by_six():
    report = build_report({M: row[0] for M, row in TILE_2.items()}, 10_000)
    assert report.row(2).bic - TILE_2[2][2] == pytest.approx(6.05, abs=0.01)
    assert report.selected_by_bic == 3


def test_ties_go_to_the_smaller_model():
    report = build_report({2: -100.0, 3: -97.0}, 1000)
    assert report.row(2).aic == report.row(3).aic
    assert report.selected_by_aic == 2
    assert build_report({3: -50.0, 2: -50.0}, 1000).selected_by_ll == 2


def test_report_records_convention():
    report = build_report({2: -100.0}, 500, convention="3M-2")
    assert report.k_convention == "3M-2"
    assert report.row(2).k == 4


def test_render_table():
    tile1 = build_report({M: row[0] for M, row in TILE_1.items()}, 10_000)
    tile2 = build_report({M: row[0] for M, row in TILE_2.items()}, TILE_2_N)
    text = render_table([tile1, tile2])
    lines = text.splitlines()
    assert lines[0].split()[:4] == ["Model", "Tile", "1", "LL"]
    assert [line.split()[0] for line in lines[2:]] == ["R-K1", "R-K2", "R-K3", "R-K4"]
    assert lines[2].split()[1:] == ["-4321", "8652", "8688", "-885", "1780", "1810"]


# ----------------------------------------------------------------------
# sweep
# ----------------------------------------------------------------------

def test_sweep_marks_failed_rows():
    data = rayleigh_sample(RayleighParams(1.0), 60, seed=2)
    report = sweep(data, (1, 3), FAST)
    assert [r.M for r in report.rows] == [1, 2, 3]
    failed = report.row(3)
    assert not failed.ok
    assert failed.error.startswith("InsufficientData")
    assert report.row(1).ok and report.row(2).ok
    assert report.selected_by_aic in (1, 2)
    assert "failed" in render_table([report])


def test_sweep_sample_floor_uses_its_convention():
    data = rayleigh_sample(RayleighParams(1.0), 75, seed=4)
    assert not sweep(data, (3, 3), FAST, convention="3M-1").row(3).ok
    row = sweep(data, (3, 3), FAST, convention="3M-2").row(3)
    assert row.ok
    assert row.k == 7


def test_sweep_rejects_bad_range():
    data = rayleigh_sample(RayleighParams(1.0), 100, seed=2)
    with pytest.raises(DataError):
        sweep(data, (3, 2))
    with pytest.raises(DataError):
        sweep(data, (0, 2))


def test_sweep_is_deterministic_and_order_independent(two_component):
    data, _ = sample_mixture(two_component, 1500, seed=3)
    serial = sweep(data, (1, 2), FAST, jobs=1)
    parallel = sweep(data, (1, 2), FAST, jobs=2)
    assert [r.loglik for r in serial.rows] == [r.loglik for r in parallel.rows]
    assert serial.selected_by_bic == parallel.selected_by_bic


def test_sweep_row_loglik_matches_recompute(two_component):
    data, _ = sample_mixture(two_component, 1500, seed=19)
    report = sweep(data, (2, 2), FAST)
    row = report.row(2)
    assert row.loglik == pytest.approx(loglik(data, row.fit.theta), rel=1e-9)
    assert report.n_samples == 1500


@pytest.mark.slow
def test_sweep_prefers_true_order_by_aic():
    truth = RKMixture.from_arrays([0.5, 0.3, 0.2], 1.0, [30.0, 1000.0], [5.0, 1.0])
    picks = []
    for seed in range(10):
        data, _ = sample_mixture(truth, 10_000, seed=seed)
        picks.append(sweep(data, (2, 5), EmConfig(), jobs=config.JOBS).selected_by_aic)
    assert picks.count(3) >= 6


# ----------------------------------------------------------------------
# PFA curves
# ----------------------------------------------------------------------

def test_empirical_pfa_counts():
    curve = empirical_pfa(np.array([1.0, 2.0, 3.0, 4.0]), [0.5, 2.0, 2.5, 4.0])
    np.testing.assert_array_equal(curve.empirical, [1.0, 0.75, 0.5, 0.0])


def test_empirical_pfa_matches_rayleigh():
    data = rayleigh_sample(RayleighParams(1.0), 100_000, seed=41)
    curve = empirical_pfa(data, [0.5, 1.0, 1.5])
    np.testing.assert_allclose(curve.empirical, np.exp(-np.array([0.25, 1.0, 2.25])), atol=0.005)


def test_empirical_pfa_lattice_and_monotone():
    data = rayleigh_sample(RayleighParams(1.0), 777, seed=42)
    curve = empirical_pfa(data, threshold_grid("0:5:0.01"))
    assert np.all(np.diff(curve.empirical) <= 0)
    scaled = curve.empirical * 777
    np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-9)


def test_empirical_pfa_rejects_descending_grid():
    with pytest.raises(DataError):
        empirical_pfa(np.ones(3), [2.0, 1.0])


def test_model_pfa_columns(two_component):
    data, _ = sample_mixture(two_component, 1000, seed=43)
    base = empirical_pfa(data, threshold_grid("0:15:0.05"))
    curve = model_pfa_curve(base, {2: two_component, 1: RKMixture.rayleigh_only(1.0)})
    assert curve.columns() == ["threshold", "empirical_pfa", "model_pfa_M1", "model_pfa_M2"]
    rows = curve.rows()
    assert len(rows) == 301
    assert rows[0][1:] == pytest.approx([1.0, 1.0, 1.0], abs=1e-15)
    assert np.all(np.diff(curve.model[2]) <= 0)


def test_threshold_grid():
    grid = threshold_grid("0:15:0.05")
    assert grid.size == 301
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(15.0, abs=1e-12)
    assert threshold_grid("1:1:0.5").tolist() == [1.0]


def test_threshold_grid_never_passes_stop():
    assert threshold_grid("0:1:0.6").tolist() == [0.0, 0.6]
    assert threshold_grid("0:1:0.3").tolist() == pytest.approx([0.0, 0.3, 0.6, 0.9])
    assert threshold_grid("0:15:0.05")[-1] <= 15.0
    for spec in ("0:2.5:0.7", "0.1:0.35:0.1", "0:10:3"):
        grid = threshold_grid(spec)
        stop, step = float(spec.split(":")[1]), float(spec.split(":")[2])
        assert grid[-1] <= stop
        assert grid[-1] + step > stop


@pytest.mark.parametrize("spec", ["0:15", "a:b:c", "0:15:0", "5:1:0.1", "-1:1:0.5"])
def test_threshold_grid_malformed(spec):
    with pytest.raises(DataError):
        threshold_grid(spec)
