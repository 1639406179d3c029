import math

import numpy as np
import pytest

from pvalmix.em import EMConfig, run_em
from pvalmix.errors import DataError
from pvalmix.model import MixtureParams, ObservationSet
from pvalmix.simulate import SimConfig, simulate_observations
from pvalmix.trend import (
    StratumEstimate, estimate_by_stratum, fit_mixed_model, fit_random_intercept, reml_objective,
)


def panel(seed, slope=0.005, sd_u=0.02, sd_e=0.02, journals=5, years=11):
    rng = np.random.default_rng(seed)
    x = np.tile(np.arange(2000, 2000 + years, dtype=float), journals)
    g = np.repeat([f"J{j}" for j in range(journals)], years)
    u = np.repeat(rng.normal(0, sd_u, journals), years)
    y = 0.15 + slope * (x - 2000) + u + rng.normal(0, sd_e, len(x))
    return y, x, g


def ols(y, x):
    X = np.column_stack([np.ones_like(x), x])
    return np.linalg.lstsq(X, y, rcond=None)[0]


def dense_reml(lam, y, x, g):
    """REML log-likelihood profiled over sigma^2, from the full covariance matrix."""
    n = len(y)
    X = np.column_stack([np.ones(n), x])
    Z = (g[:, None] == np.unique(g)[None, :]).astype(float)
    H = np.eye(n) + lam * Z @ Z.T
    Hi = np.linalg.inv(H)
    A = X.T @ Hi @ X
    beta = np.linalg.solve(A, X.T @ Hi @ y)
    r = y - X @ beta
    dof = n - 2
    s2 = r @ Hi @ r / dof
    return -0.5 * (dof * (1 + math.log(2 * math.pi * s2)) + np.linalg.slogdet(H)[1]
                   + np.linalg.slogdet(A)[1])


def test_reml_objective_matches_dense_oracle():
    y, x, g = panel(1)
    xc = x - x.mean()
    for lam in (1e-6, 0.3, 1.0, 50.0):
        assert reml_objective(lam, y, x, g) == pytest.approx(dense_reml(lam, y, xc, g), rel=1e-10)


def test_sigma_u_zero_matches_ols():
    y, x, g = panel(2, sd_u=0.0)
    fit = fit_random_intercept(y, x, g)
    b0, b1 = ols(y, x)
    assert fit.slope == pytest.approx(b1, abs=1e-6)
    assert fit.intercept == pytest.approx(b0, abs=1e-6)


def test_single_group_is_ols():
    rng = np.random.default_rng(3)
    x = np.arange(12, dtype=float)
    y = 0.2 + 0.01 * x + rng.normal(0, 0.02, 12)
    fit = fit_random_intercept(y, x, ["only"] * 12)
    b0, b1 = ols(y, x)
    assert fit.slope == pytest.approx(b1, abs=1e-6)
    assert fit.intercept == pytest.approx(b0, abs=1e-6)
    resid = y - b0 - b1 * x
    assert fit.var_resid == pytest.approx(resid @ resid / 10, rel=1e-6)


def test_reml_beats_grid():
    for seed in range(5):
        y, x, g = panel(seed)
        fit = fit_random_intercept(y, x, g)
        grid = max(reml_objective(lam, y, x, g) for lam in np.geomspace(1e-8, 1e8, 100))
        assert fit.reml >= grid - 1e-6
        assert fit.reml == pytest.approx(reml_objective(fit.lam, y, x, g), abs=1e-12)


def test_centering_invariance():
    y, x, g = panel(4)
    a = fit_random_intercept(y, x, g)
    b = fit_random_intercept(y, x - 2000.0, g)
    assert abs(a.slope - b.slope) < 1e-10
    assert b.intercept == pytest.approx(a.intercept + 2000.0 * a.slope, abs=1e-8)


def test_fit_invariants():
    y, x, g = panel(5)
    fit = fit_random_intercept(y, x, g)
    assert 0.0 <= fit.slope_pvalue <= 1.0
    assert fit.var_random >= 0 and fit.var_resid > 0 and fit.slope_se >= 0
    assert fit.n_obs == 55 and fit.n_groups == 5


def test_wald_pvalue_monotone():
    y, x, g = panel(6, slope=0.0)
    fits = [fit_random_intercept(y + s * (x - 2000), x, g) for s in np.linspace(-0.01, 0.01, 21)]
    fits.sort(key=lambda f: abs(f.slope) / f.slope_se)
    pvals = [f.slope_pvalue for f in fits]
    assert all(b <= a for a, b in zip(pvals, pvals[1:]))
    assert pvals[0] > pvals[-1]


def test_errors():
    with pytest.raises(DataError):
        fit_random_intercept([0.1, 0.2, 0.3], [1.0, 1.0, 1.0], ["a", "b", "c"])
    with pytest.raises(DataError):
        fit_random_intercept([0.1, 0.2], [1.0, 2.0], ["a", "b"])


def test_submissions_predictor():
    est = [StratumEstimate(j, y, 0.1 + 0.001 * i, None, 100) for i, (j, y) in
           enumerate([("A", 2000), ("A", 2001), ("B", 2000), ("B", 2001)])]
    with pytest.raises(DataError, match=r"\(B, 2001\)"):
        fit_mixed_model(est, "submissions", {("A", 2000): 10, ("A", 2001): 20, ("B", 2000): 30})
    subs = {("A", 2000): 10, ("A", 2001): 20, ("B", 2000): 30, ("B", 2001): 45}
    fit = fit_mixed_model(est, "submissions", subs)
    assert fit.predictor == "submissions"
    with pytest.raises(ValueError):
        fit_mixed_model(est, "month")


def _obs(n, pi0, seed):
    return simulate_observations(SimConfig(n, MixtureParams.make(pi0, 0.5, 25), seed=seed))[0]


def test_single_stratum_equals_global_fit():
    obs = _obs(600, 0.2, 1)
    [est], skipped = estimate_by_stratum({("J", 2001): obs})
    assert skipped == []
    assert est.pi0_hat == run_em(obs).params.pi0
    assert est.n_obs == 600 and est.sd is None


def test_undersized_strata_skipped():
    groups = {("J", 2001): _obs(600, 0.2, 1), ("K", 2001): _obs(5, 0.2, 2)}
    est, skipped = estimate_by_stratum(groups)
    assert [(e.journal, e.year) for e in est] == [("J", 2001)]
    assert skipped[0][0] == ("K", 2001) and "5" in skipped[0][1]
    with pytest.raises(DataError):
        estimate_by_stratum({("K", 2001): _obs(5, 0.2, 2)})


def test_strata_separate():
    groups = {("J", 2000): _obs(5000, 0.10, 21), ("J", 2001): _obs(5000, 0.30, 22)}
    est, _ = estimate_by_stratum(groups)
    print("stratum estimates:", [round(e.pi0_hat, 4) for e in est])
    assert est[1].pi0_hat - est[0].pi0_hat >= 0.10


def test_stratum_bootstrap_deterministic():
    groups = {("J", 2000): _obs(300, 0.3, 3), ("K", 2000): _obs(300, 0.3, 4)}
    cfg = EMConfig(max_iters=200)
    a, _ = estimate_by_stratum(groups, cfg, bootstrap=4, seed=9)
    b, _ = estimate_by_stratum(groups, cfg, bootstrap=4, seed=9, n_jobs=2)
    assert a == b
    # distinct strata draw from distinct streams
    assert a[0].sd != a[1].sd
