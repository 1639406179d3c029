"""Per-stratum pi0 estimates and random-intercept trend fits.

The trend model is ``y = b0 + b1 * x + u_journal + e`` with
``u ~ N(0, s_u^2)`` and ``e ~ N(0, s^2)``. For a fixed variance ratio
``lam = s_u^2 / s^2`` the fixed effects have a closed GLS form, so REML
reduces to a one-dimensional search over ``log(lam)``.
"""

import logging
import math
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .em import EMConfig, bootstrap_sd, run_em
from .errors import DataError, NumericalFailure
from .model import ObservationSet

log = logging.getLogger(__name__)

MIN_STRATUM_SIZE = 30
LOG_LAM_RANGE = (math.log(1e-8), math.log(1e8))
GOLDEN_TOL = 1e-10
COARSE_GRID = 65
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class StratumEstimate:
    journal: Optional[str]
    year: Optional[int]
    pi0_hat: float
    sd: Optional[float]
    n_obs: int
    converged: bool = True


@dataclass(frozen=True)
class TrendFit:
    intercept: float
    slope: float
    slope_se: float
    slope_pvalue: float
    var_random: float
    var_resid: float
    lam: float
    reml: float
    n_obs: int
    n_groups: int
    predictor: str = "year"


def estimate_by_stratum(groups, config=None, min_size=MIN_STRATUM_SIZE, bootstrap=0, seed=0,
                        n_jobs=1):
    """One EM fit per stratum.

    ``groups`` maps ``(journal, year)`` keys to observation lists (or
    ObservationSets). Returns ``(estimates, skipped)`` where ``skipped`` lists
    ``(key, reason)`` for strata that were too small or could not be fitted.
    """
    config = config or EMConfig()
    estimates, skipped = [], []
    for index, key in enumerate(sorted(groups, key=_key_order)):
        obs = groups[key]
        data = obs if isinstance(obs, ObservationSet) else ObservationSet.from_observations(
            obs, config.init.alpha)
        journal, year = key
        if data.n < min_size:
            skipped.append((key, f"only {data.n} observations (minimum {min_size})"))
            log.info("skipping stratum %s: %d observations", key, data.n)
            continue
        try:
            fit = run_em(data, config)
            sd = None
            if bootstrap:
                sd = bootstrap_sd(data, bootstrap, seed, config, n_jobs=n_jobs,
                                  key=_stream_key(key), point=fit).sd
        except (DataError, NumericalFailure) as exc:
            skipped.append((key, str(exc)))
            continue
        estimates.append(StratumEstimate(journal, year, fit.params.pi0, sd, data.n, fit.converged))
    if not estimates:
        raise DataError("no stratum has enough observations to fit")
    return estimates, skipped


def _key_order(key):
    journal, year = key
    return ("" if journal is None else journal, -1 if year is None else year)


def _stream_key(key):
    journal, year = key
    return (zlib.crc32(str(journal).encode("utf-8")), -1 if year is None else int(year) + 1)


class _Design:
    """Sufficient pieces of the random-intercept GLS problem."""

    def __init__(self, y, x, groups):
        self.y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        self.n = len(self.y)
        if len(x) != self.n or len(groups) != self.n:
            raise ValueError("y, x and groups must have equal length")
        if self.n < 3:
            raise DataError(f"need at least 3 points for a trend fit, got {self.n}")
        if np.ptp(x) == 0.0:
            raise DataError("singular design: every predictor value is equal")
        # center for conditioning; the intercept is mapped back afterwards
        self.x_center = float(x.mean())
        self.X = np.column_stack([np.ones(self.n), x - self.x_center])
        labels, self.g = np.unique(np.asarray(groups, dtype=object).astype(str), return_inverse=True)
        self.n_groups = len(labels)
        self.sizes = np.bincount(self.g).astype(float)
        self.Xg = np.vstack([np.bincount(self.g, weights=self.X[:, k]) for k in range(2)]).T
        self.yg = np.bincount(self.g, weights=self.y)
        self.XtX = self.X.T @ self.X
        self.Xty = self.X.T @ self.y
        self.p = 2

    def solve(self, lam):
        c = lam / (1.0 + lam * self.sizes)
        A = self.XtX - (self.Xg * c[:, None]).T @ self.Xg
        rhs = self.Xty - (self.Xg * c[:, None]).T @ self.yg
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise NumericalFailure(f"GLS normal matrix is not positive definite at lambda={lam:g}")
        beta = np.linalg.solve(A, rhs)
        r = self.y - self.X @ beta
        rg = np.bincount(self.g, weights=r, minlength=self.n_groups)
        quad = float(r @ r - (c * rg * rg).sum())
        logdet_h = float(np.log1p(lam * self.sizes).sum())
        logdet_a = 2.0 * float(np.log(np.diag(L)).sum())
        return beta, quad, logdet_h, logdet_a, A

    def reml(self, lam):
        _, quad, logdet_h, logdet_a, _ = self.solve(lam)
        dof = self.n - self.p
        if quad <= 0.0:
            raise NumericalFailure("residual sum of squares vanished; the fit is exact")
        sigma2 = quad / dof
        return -0.5 * (dof * (1.0 + math.log(2.0 * math.pi * sigma2)) + logdet_h + logdet_a)


def reml_objective(lam, y, x, groups):
    """Profiled REML log-likelihood at variance ratio ``lam``."""
    return _Design(y, x, groups).reml(lam)


def _golden_max(f, lo, hi, tol):
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, f(t)


def fit_random_intercept(y, x, groups, predictor="year"):
    design = _Design(y, x, groups)

    def obj(t):
        return design.reml(math.exp(t))

    lo, hi = LOG_LAM_RANGE
    if design.n_groups == 1:
        # the random intercept is confounded with the fixed one; REML is flat in lam
        t, best = lo, obj(lo)
    else:
        # coarse scan brackets the global maximum, golden section refines it
        grid = np.linspace(lo, hi, COARSE_GRID)
        values = [obj(t) for t in grid]
        i = int(np.argmax(values))
        t, best = _golden_max(obj, grid[max(i - 1, 0)], grid[min(i + 1, COARSE_GRID - 1)],
                              GOLDEN_TOL)
        if values[i] > best:
            t, best = grid[i], values[i]

    lam = math.exp(t)
    beta, quad, _, _, A = design.solve(lam)
    sigma2 = quad / (design.n - design.p)
    cov = sigma2 * np.linalg.inv(A)
    slope = float(beta[1])
    slope_se = math.sqrt(float(cov[1, 1]))
    z = slope / slope_se
    return TrendFit(
        intercept=float(beta[0] - beta[1] * design.x_center),
        slope=slope,
        slope_se=slope_se,
        slope_pvalue=math.erfc(abs(z) / math.sqrt(2.0)),
        var_random=lam * sigma2,
        var_resid=sigma2,
        lam=lam,
        reml=best,
        n_obs=design.n,
        n_groups=design.n_groups,
        predictor=predictor,
    )


def fit_mixed_model(estimates, predictor="year", submissions=None):
    """Trend of per-stratum pi0 estimates against year or submission count.

    ``submissions`` maps ``(journal, year)`` to a count and is required for
    ``predictor="submissions"``. Missing pairs raise a DataError naming them.
    """
    if predictor not in ("year", "submissions"):
        raise ValueError(f"predictor must be 'year' or 'submissions', got {predictor!r}")
    rows = list(estimates)
    if any(e.journal is None or e.year is None for e in rows):
        raise DataError("trend fits need estimates stratified by both journal and year")
    if predictor == "year":
        x = [float(e.year) for e in rows]
    else:
        submissions = submissions or {}
        missing = sorted({(e.journal, e.year) for e in rows} - set(submissions))
        if missing:
            listed = ", ".join(f"({j}, {y})" for j, y in missing)
            raise DataError(f"no submission counts for: {listed}")
        x = [float(submissions[(e.journal, e.year)]) for e in rows]
    y = [e.pi0_hat for e in rows]
    groups = [e.journal for e in rows]
    return fit_random_intercept(y, x, groups, predictor)
