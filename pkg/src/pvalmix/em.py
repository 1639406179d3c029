"""EM fit of the uniform / truncated-Beta mixture, plus bootstrap s.d. of pi0.

The M-step is generalized: pi0 is updated in closed form, the Beta shape by a
Nelder-Mead search over (log a, log b) started at the current shape, and the
search never returns a worse point than its start. Each iteration therefore
cannot lower the observed-data log-likelihood.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, NumericalFailure, TooFewObservations, UninformativeData
from .model import DEFAULT_ALPHA, Censored, Exact, MixtureParams, ObservationSet, uniform_distance
from .numerics import SHAPE_MAX, SHAPE_MIN, BetaShape, kernels
from .seeding import stream

MIN_OBSERVATIONS = 10
SIMPLEX_STEP = 0.1  # initial simplex edge, in log-shape units
IDENTIFIABILITY_BAND = 0.05


@dataclass(frozen=True)
class EMConfig:
    max_iters: int = 10000
    loglik_tol: float = 1e-8
    m_step_tol: float = 1e-6
    max_fev: int = 500
    init: MixtureParams = field(default_factory=lambda: MixtureParams.make(0.5, 1.0, 10.0))

    def __post_init__(self):
        if self.max_iters < 1 or self.max_fev < 3:
            raise ValueError("max_iters must be >= 1 and max_fev >= 3")
        if not (self.loglik_tol > 0 and self.m_step_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class EMResult:
    params: MixtureParams
    loglik_trace: list
    iterations: int
    converged: bool

    @property
    def loglik(self):
        return self.loglik_trace[-1]

    @property
    def unidentifiable(self):
        # near a = b = 1 both components are uniform and pi0 is not identified
        s = self.params.shape
        return abs(s.a - 1.0) < IDENTIFIABILITY_BAND and abs(s.b - 1.0) < IDENTIFIABILITY_BAND

    @property
    def alt_uniform_tv(self):
        """Total-variation distance of the fitted alternative from uniform."""
        return uniform_distance(self.params.shape, self.params.alpha)


@dataclass
class BootstrapResult:
    point: float
    sd: float
    resample_estimates: list
    B: int
    seed: int
    skipped: int = 0


def _as_set(observations, alpha=DEFAULT_ALPHA):
    if isinstance(observations, ObservationSet):
        return observations
    return ObservationSet.from_observations(observations, alpha)


def _posterior(data, params):
    """Log-likelihood at ``params`` and posterior null weights.

    Weights come back as (per exact value, per interval term); interval terms
    are the unique censoring bounds followed by the rounding bins.
    """
    null_pdf, alt_pdf, null_mass, alt_mass = data.component_terms(params)
    pi0 = params.pi0
    num_e = pi0 * null_pdf
    den_e = num_e + (1.0 - pi0) * alt_pdf
    num_i = pi0 * null_mass
    den_i = num_i + (1.0 - pi0) * alt_mass
    with np.errstate(divide="ignore", invalid="ignore"):
        w_e = np.where(den_e > 0, num_e / den_e, pi0)
        w_i = np.where(den_i > 0, num_i / den_i, pi0)
        keep = data.counts > 0
        ll = np.log(den_e).sum() + (data.counts[keep] * np.log(den_i[keep])).sum()
    return float(ll), np.clip(w_e, 0.0, 1.0), np.clip(w_i, 0.0, 1.0)


def _fit_shape(data, alt_e, alt_i, shape, config):
    """Maximize the weighted alternative-component objective over the shape."""
    s0 = float(alt_e.sum())
    if s0 + float(alt_i.sum()) <= 1e-12 * max(data.n, 1):
        return shape
    s1 = float(alt_e @ data.log_exact)
    s2 = float(alt_e @ data.log1m_exact)
    shape = shape.clamped()
    la, lb, _, _ = kernels.fit_shape(
        math.log(shape.a), math.log(shape.b), data.alpha, s0, s1, s2,
        data.lo, data.hi, np.ascontiguousarray(alt_i, dtype=float),
        config.m_step_tol, config.max_fev, SIMPLEX_STEP,
        math.log(SHAPE_MIN), math.log(SHAPE_MAX))
    new = BetaShape(math.exp(la), math.exp(lb)).clamped()
    if new == shape:
        return shape
    # generalized-EM safeguard: keep the incoming shape unless the search improved on it
    before = kernels.shape_objective(math.log(shape.a), math.log(shape.b), data.alpha,
                                     s0, s1, s2, data.lo, data.hi, alt_i)
    after = kernels.shape_objective(math.log(new.a), math.log(new.b), data.alpha,
                                    s0, s1, s2, data.lo, data.hi, alt_i)
    return new if after >= before else shape


def _m_step(data, w_e, w_i, params, config):
    n = data.n
    pi0 = (float(w_e.sum()) + float(data.counts @ w_i)) / n
    pi0 = min(max(pi0, 0.0), 1.0)
    alt_i = data.counts * (1.0 - w_i)
    shape = _fit_shape(data, 1.0 - w_e, alt_i, params.shape, config)
    return MixtureParams(pi0, shape, data.alpha)


def e_step(observations, params):
    """Posterior probability that each observation came from the null component."""
    observations = list(observations)
    data = ObservationSet.from_observations(observations, params.alpha)
    _, w_e, w_i = _posterior(data, params)
    n_cens = len(data.cens_bounds)
    cens_index = {c: j for j, c in enumerate(data.cens_bounds.tolist())}
    out, i_exact = [], 0
    for obs in observations:
        if isinstance(obs, Exact):
            out.append(float(w_e[i_exact]))
            i_exact += 1
        elif isinstance(obs, Censored):
            out.append(float(w_i[cens_index[obs.bound]]))
        else:
            out.append(float(w_i[n_cens + obs.bin]))
    return out


def m_step(observations, weights, start=None, config=None):
    """One generalized M-step from per-observation null weights.

    ``start`` supplies the warm-start shape (and alpha); defaults to the
    configured initial values.
    """
    config = config or EMConfig()
    start = start or config.init
    observations = list(observations)
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(observations) or len(observations) == 0:
        raise ValueError("weights must align with a nonempty observation list")
    if np.any((weights < 0) | (weights > 1)):
        raise ValueError("weights must lie in [0, 1]")
    data = ObservationSet.from_observations(observations, start.alpha)
    n_cens = len(data.cens_bounds)
    cens_index = {c: j for j, c in enumerate(data.cens_bounds.tolist())}
    alt_e = np.empty(len(data.exact))
    alt_i = np.zeros(len(data.counts))
    i_exact = 0
    for obs, w in zip(observations, weights):
        if isinstance(obs, Exact):
            alt_e[i_exact] = 1.0 - w
            i_exact += 1
        elif isinstance(obs, Censored):
            alt_i[cens_index[obs.bound]] += 1.0 - w
        else:
            alt_i[n_cens + obs.bin] += 1.0 - w
    shape = _fit_shape(data, alt_e, alt_i, start.shape, config)
    return MixtureParams(float(np.mean(weights)), shape, start.alpha)


def check_fittable(data):
    if data.n < MIN_OBSERVATIONS:
        raise TooFewObservations(f"need at least {MIN_OBSERVATIONS} observations, got {data.n}")
    if data.n_informative == 0:
        raise UninformativeData(
            f"all {data.n} observations are censored at the threshold {data.alpha}; "
            "they carry no information about pi0")
    if data.n_informative < MIN_OBSERVATIONS:
        raise TooFewObservations(
            f"need at least {MIN_OBSERVATIONS} informative observations, got {data.n_informative}")


def run_em(observations, config=None, alpha=DEFAULT_ALPHA):
    config = config or EMConfig()
    data = _as_set(observations, alpha)
    check_fittable(data)
    init = config.init
    params = MixtureParams(init.pi0, init.shape.clamped(), data.alpha)

    ll, w_e, w_i = _posterior(data, params)
    if not math.isfinite(ll):
        raise NumericalFailure(f"non-finite log-likelihood at the initial parameters: {ll}")
    trace = []
    converged = False
    for _ in range(config.max_iters):
        params = _m_step(data, w_e, w_i, params, config)
        ll_new, w_e, w_i = _posterior(data, params)
        trace.append(ll_new)
        if not math.isfinite(ll_new):
            raise NumericalFailure(f"non-finite log-likelihood after {len(trace)} iterations", trace)
        if abs(ll_new - ll) < config.loglik_tol:
            converged = True
            break
        ll = ll_new
    return EMResult(params, trace, len(trace), converged)


def _resample_set(data, kind, where, rng):
    n = len(kind)
    idx = rng.integers(0, n, size=n)
    k, w = kind[idx], where[idx]
    exact = np.sort(data.exact[w[k == 0]])
    counts = np.bincount(w[k == 1], minlength=len(data.counts)).astype(float)
    n_cens = len(data.cens_bounds)
    return ObservationSet(exact, data.cens_bounds, counts[:n_cens], counts[n_cens:], data.alpha)


def _bootstrap_one(args):
    data, kind, where, seed, key, i, config = args
    sample = _resample_set(data, kind, where, stream(seed, "bootstrap", *key, i))
    try:
        return run_em(sample, config).params.pi0
    except (DataError, NumericalFailure):
        return None


def bootstrap_sd(observations, B=100, seed=0, config=None, n_jobs=1, key=(), point=None):
    """Nonparametric bootstrap standard deviation of the pi0 estimate.

    Resample ``i`` draws from ``stream(seed, "bootstrap", *key, i)``, so the
    result does not depend on ``n_jobs``. Each refit starts from the full-data
    estimate (pass ``point`` to reuse an existing fit).
    """
    if B < 2:
        raise ValueError(f"need at least 2 bootstrap resamples, got {B}")
    config = config or EMConfig()
    data = _as_set(observations, config.init.alpha)
    full = point if point is not None else run_em(data, config)
    refit = replace(config, init=full.params)

    # flat view: entry j is an exact value or one unit of an interval term's count
    n_exact = len(data.exact)
    interval_ids = np.repeat(np.arange(len(data.counts)), data.counts.astype(int))
    kind = np.concatenate([np.zeros(n_exact, dtype=int), np.ones(len(interval_ids), dtype=int)])
    where = np.concatenate([np.arange(n_exact), interval_ids])

    jobs = [(data, kind, where, seed, tuple(key), i, refit) for i in range(B)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            estimates = list(pool.map(_bootstrap_one, jobs, chunksize=max(1, B // (4 * n_jobs))))
    else:
        estimates = [_bootstrap_one(job) for job in jobs]

    kept = [e for e in estimates if e is not None]
    skipped = B - len(kept)
    if skipped > 0.1 * B or len(kept) < 2:
        raise NumericalFailure(f"{skipped} of {B} bootstrap refits failed")
    sd = float(np.std(kept, ddof=1))
    return BootstrapResult(full.params.pi0, sd, kept, B, seed, skipped)
