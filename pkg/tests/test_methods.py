"""Method dispatch, error metrics, and the ensemble comparison helpers."""
import numpy as np
import pytest

from csmooth.admm import AdmmConfig, css_recover
from csmooth.benchmark import EnsembleSpec, compare_methods, mean_mre, win_fraction
from csmooth.domain import CovariateMatrix, SpatialField, make_domain
from csmooth.errors import ConfigError, NoEvaluableCells, ShapeMismatch
from csmooth.fem import assemble, triangulate
from csmooth.methods import (
    ALL_METHODS,
    CSS,
    CSS_FEATURES,
    PE,
    PE_SSR1,
    PE_SSR2,
    MethodSpec,
    run_method,
    run_method_full,
)
from csmooth.metrics import relative_errors
from csmooth.partition import aggregate, build_partition, patched_estimate, sample_stations
from csmooth.smoother import SsrSolver, ssr_fit


@pytest.fixture(scope="module")
def problem():
    dom = make_domain(8, 8, cell_area=0.25)
    gen = np.random.default_rng(77)
    truth = SpatialField(dom, gen.uniform(0.5, 3.0, dom.n), nonnegative=True)
    stations = sample_stations(truth, 6, seed=3)
    part = build_partition(dom, stations)
    vols = aggregate(part, truth)
    w = np.column_stack([np.ones(dom.n), gen.uniform(size=dom.n)])
    cov = CovariateMatrix(dom, w, names=("one", "x"))
    fem = assemble(triangulate(dom))
    return dom, truth, part, vols, cov, fem


def test_method_registry():
    assert ALL_METHODS == ("pe", "pe-ssr1", "pe-ssr2", "css", "css-features")


def test_method_spec_validation():
    with pytest.raises(ConfigError):
        MethodSpec("nope")
    with pytest.raises(ConfigError):
        MethodSpec(PE, lam=0.0)
    spec = MethodSpec(CSS, lam=2.0)
    assert spec.admm_config().lam == 2.0
    custom = AdmmConfig(lam=5.0, rho=3.0)
    assert MethodSpec(CSS, lam=2.0, admm=custom).admm_config() is custom


def test_pe_is_the_patched_estimate(problem):
    dom, truth, part, vols, cov, fem = problem
    est, res = run_method_full(MethodSpec(PE), dom, part, vols, fem=fem)
    assert res is None
    np.testing.assert_array_equal(est.values, patched_estimate(part, vols).values)


def test_pe_ssr1_fits_station_cell_densities(problem):
    dom, truth, part, vols, cov, fem = problem
    est, res = run_method_full(MethodSpec(PE_SSR1, lam=1.0), dom, part, vols, fem=fem)
    assert res is None
    density = vols.values / (part.patch_sizes * dom.cell_area)
    manual = SsrSolver(fem, 1.0, subset=part.stations.cells).solve(density)
    np.testing.assert_array_equal(est.values, manual.fitted)


def test_pe_ssr2_smooths_the_patched_estimate(problem):
    dom, truth, part, vols, cov, fem = problem
    est, res = run_method_full(MethodSpec(PE_SSR2, lam=1.0), dom, part, vols, fem=fem)
    assert res is None
    manual = ssr_fit(fem, patched_estimate(part, vols).values, 1.0)
    np.testing.assert_array_equal(est.values, manual.fitted)


def test_css_matches_direct_recovery(problem):
    dom, truth, part, vols, cov, fem = problem
    spec = MethodSpec(CSS, lam=1.0)
    est, res = run_method_full(spec, dom, part, vols, fem=fem)
    direct = css_recover(dom, part, vols, None, spec.admm_config(), fem)
    np.testing.assert_array_equal(est.values, direct.estimate.values)
    assert res is not None
    assert res.iterations == direct.iterations


def test_css_features_standardizes_covariates(problem):
    dom, truth, part, vols, cov, fem = problem
    spec = MethodSpec(CSS_FEATURES, lam=1.0)
    est, res = run_method_full(spec, dom, part, vols, covariates=cov, fem=fem)
    direct = css_recover(
        dom, part, vols, cov.standardized(), spec.admm_config(), fem
    )
    np.testing.assert_array_equal(est.values, direct.estimate.values)
    assert res is not None and res.beta.shape == (2,)


def test_css_features_requires_covariates(problem):
    dom, truth, part, vols, cov, fem = problem
    with pytest.raises(ConfigError):
        run_method_full(MethodSpec(CSS_FEATURES), dom, part, vols, fem=fem)


def test_run_method_returns_field_only(problem):
    dom, truth, part, vols, cov, fem = problem
    est = run_method(MethodSpec(PE), dom, part, vols, fem=fem)
    assert isinstance(est, SpatialField)


def test_relative_errors_excludes_below_floor():
    dom = make_domain(1, 4)
    truth = SpatialField(dom, np.array([2.0, 0.0, 4.0, 1e-12]))
    est = SpatialField(dom, np.array([1.0, 5.0, 5.0, 2.0]))
    rep = relative_errors(est, truth, method="pe", seed=7)
    assert rep.excluded == 2
    np.testing.assert_allclose(rep.errors, [0.5, 0.25])
    assert rep.mre == pytest.approx(0.375)
    np.testing.assert_allclose(rep.cdf_errors, [0.25, 0.5])
    np.testing.assert_allclose(rep.cdf_values, [0.5, 1.0])
    assert rep.cdf(0.3) == 0.5
    assert rep.cdf(0.5) == 1.0
    assert rep.cdf(0.1) == 0.0
    assert rep.method == "pe" and rep.seed == 7


def test_relative_errors_needs_an_evaluable_cell():
    dom = make_domain(1, 2)
    truth = SpatialField(dom, np.zeros(2))
    est = SpatialField(dom, np.ones(2))
    with pytest.raises(NoEvaluableCells):
        relative_errors(est, truth)


def test_relative_errors_checks_domain():
    t = SpatialField(make_domain(2, 2), np.ones(4))
    e = SpatialField(make_domain(4, 1), np.ones(4))
    with pytest.raises(ShapeMismatch):
        relative_errors(e, t)


def test_compare_methods_parallel_matches_serial():
    spec = EnsembleSpec(n_rows=8, n_cols=8, n_stations=5)
    serial = compare_methods(spec, seeds=range(3), methods=(PE, PE_SSR2), jobs=1)
    parallel = compare_methods(spec, seeds=range(3), methods=(PE, PE_SSR2), jobs=2)
    assert [o.seed for o in serial] == [0, 1, 2] == [o.seed for o in parallel]
    for a, b in zip(serial, parallel):
        for m in (PE, PE_SSR2):
            np.testing.assert_array_equal(a.reports[m].errors, b.reports[m].errors)


def test_ensemble_summaries():
    spec = EnsembleSpec(n_rows=8, n_cols=8, n_stations=5)
    outs = compare_methods(spec, seeds=range(4), methods=(PE, PE_SSR2), jobs=1)
    mres = np.array([o.mre(PE_SSR2) for o in outs])
    assert mean_mre(outs, PE_SSR2) == pytest.approx(float(mres.mean()))
    wins = win_fraction(outs, PE_SSR2, PE)
    direct = np.mean([o.mre(PE_SSR2) < o.mre(PE) for o in outs])
    assert wins == pytest.approx(float(direct))
    # a method never beats itself under the strict comparison
    assert win_fraction(outs, PE, PE) == 0.0
