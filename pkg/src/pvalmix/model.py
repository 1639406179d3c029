"""Uniform / truncated-Beta mixture for significant P-values.

A reported P-value is one of three kinds of observation:

* ``Exact(p)`` -- the value itself, ``0 < p <= alpha``;
* ``Censored(bound)`` -- only ``p <= bound`` is known ("P < 0.01");
* ``Rounded(bin)`` -- a printed round value, i.e. ``p`` fell somewhere in the
  interval that rounds to 0, 0.01, ..., 0.05.

Each contributes the mixture density, CDF or interval mass respectively.
"""

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import numerics
from .errors import DomainError
from .numerics import BetaShape, kernels

DEFAULT_ALPHA = 0.05
ROUND_STEP = 0.01


@dataclass(frozen=True)
class MixtureParams:
    pi0: float
    shape: BetaShape
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0.0 <= self.pi0 <= 1.0:
            raise ValueError(f"pi0 must lie in [0, 1], got {self.pi0!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @classmethod
    def make(cls, pi0, a, b, alpha=DEFAULT_ALPHA):
        return cls(pi0, BetaShape(a, b), alpha)


@dataclass(frozen=True)
class Exact:
    p: float


@dataclass(frozen=True)
class Censored:
    bound: float
    strict: bool = True  # "<" vs "<="; provenance only, the likelihood ignores it


@dataclass(frozen=True)
class Rounded:
    bin: int


Observation = Union[Exact, Censored, Rounded]


@dataclass(frozen=True)
class RoundingBins:
    """Intervals of [0, alpha] whose values print as 0, 0.01, 0.02, ...

    For alpha = 0.05 these are [0, .005), [.005, .015), ..., [.045, .05].
    """

    alpha: float = DEFAULT_ALPHA
    values: tuple = field(init=False)
    edges: tuple = field(init=False)

    def __post_init__(self):
        k_max = int(math.floor(self.alpha / ROUND_STEP + 1e-9))
        values = tuple(round(k * ROUND_STEP, 2) for k in range(k_max + 1))
        inner = tuple(round((k + 0.5) * ROUND_STEP, 3) for k in range(k_max))
        inner = tuple(e for e in inner if e < self.alpha)
        object.__setattr__(self, "values", values[: len(inner) + 1])
        object.__setattr__(self, "edges", (0.0,) + inner + (self.alpha,))

    def __len__(self):
        return len(self.values)

    def interval(self, k):
        if not 0 <= k < len(self.values):
            raise DomainError(f"rounding bin must be in 0..{len(self.values) - 1}, got {k!r}")
        return self.edges[k], self.edges[k + 1]

    def bin_of(self, p):
        """Bin index of an exact value in [0, alpha]."""
        if not 0.0 <= p <= self.alpha:
            raise DomainError(f"value {p!r} outside [0, {self.alpha}]")
        k = int(np.searchsorted(self.edges, p, side="right")) - 1
        return min(k, len(self.values) - 1)

    def bin_of_value(self, v):
        """Bin whose printed value is ``v``, or None."""
        for k, rv in enumerate(self.values):
            if abs(v - rv) < 1e-12:
                return k
        return None


def rounding_bins(alpha=DEFAULT_ALPHA):
    return _bins_cache.setdefault(alpha, RoundingBins(alpha))


_bins_cache = {}


def validate_observation(obs, alpha=DEFAULT_ALPHA):
    if isinstance(obs, Exact):
        if not 0.0 < obs.p <= alpha:
            raise DomainError(f"exact P-value must lie in (0, {alpha}], got {obs.p!r}")
    elif isinstance(obs, Censored):
        if not 0.0 < obs.bound <= alpha:
            raise DomainError(f"censoring bound must lie in (0, {alpha}], got {obs.bound!r}")
    elif isinstance(obs, Rounded):
        rounding_bins(alpha).interval(obs.bin)
    else:
        raise TypeError(f"not an observation: {obs!r}")


def mixture_pdf(p, params):
    if not 0.0 < p <= params.alpha:
        raise DomainError(f"mixture density needs p in (0, {params.alpha}], got {p!r}")
    null = params.pi0 * numerics.trunc_uniform_pdf(p, params.alpha)
    if params.pi0 == 1.0:
        return null
    return null + (1.0 - params.pi0) * numerics.trunc_beta_pdf(p, params.shape, params.alpha)


def mixture_cdf(c, params):
    if not 0.0 <= c <= params.alpha:
        raise DomainError(f"mixture CDF needs c in [0, {params.alpha}], got {c!r}")
    if c == params.alpha:
        return 1.0
    return (params.pi0 * numerics.trunc_uniform_cdf(c, params.alpha)
            + (1.0 - params.pi0) * numerics.trunc_beta_cdf(c, params.shape, params.alpha))


def bin_probability(k, params):
    lo, hi = rounding_bins(params.alpha).interval(k)
    return (params.pi0 * (hi - lo) / params.alpha
            + (1.0 - params.pi0) * numerics.trunc_beta_interval(lo, hi, params.shape, params.alpha))


def log_likelihood(observations, params):
    """Observed-data log-likelihood.

    Finite whenever ``pi0 > 0``: the uniform component puts positive mass on
    every exact value, bound and bin.
    """
    return ObservationSet.from_observations(observations, params.alpha).log_likelihood(params)


class ObservationSet:
    """Observations packed for vectorized likelihood work.

    Exact values stay as an array; censored bounds collapse to unique values
    with counts; rounded reports collapse to per-bin counts.
    """

    def __init__(self, exact, cens_bounds, cens_counts, bin_counts, alpha=DEFAULT_ALPHA):
        self.alpha = alpha
        self.bins = rounding_bins(alpha)
        self.exact = np.asarray(exact, dtype=float)
        self.cens_bounds = np.asarray(cens_bounds, dtype=float)
        self.cens_counts = np.asarray(cens_counts, dtype=float)
        self.bin_counts = np.asarray(bin_counts, dtype=float)
        self.log_exact = np.log(self.exact)
        self.log1m_exact = np.log1p(-self.exact)
        edges = np.asarray(self.bins.edges)
        # interval terms: censored [0, c] first, then the rounding bins
        self.lo = np.concatenate([np.zeros(len(self.cens_bounds)), edges[:-1]])
        self.hi = np.concatenate([self.cens_bounds, edges[1:]])
        self.counts = np.concatenate([self.cens_counts, self.bin_counts])
        self.null_mass = (self.hi - self.lo) / alpha

    @classmethod
    def from_observations(cls, observations, alpha=DEFAULT_ALPHA):
        bins = rounding_bins(alpha)
        exact, cens, bin_counts = [], {}, [0] * len(bins)
        for obs in observations:
            validate_observation(obs, alpha)
            if isinstance(obs, Exact):
                exact.append(obs.p)
            elif isinstance(obs, Censored):
                cens[obs.bound] = cens.get(obs.bound, 0) + 1
            else:
                bin_counts[obs.bin] += 1
        bounds = sorted(cens)
        return cls(exact, bounds, [cens[c] for c in bounds], bin_counts, alpha)

    @property
    def n(self):
        return int(len(self.exact) + self.counts.sum())

    @property
    def n_informative(self):
        """Observations whose likelihood depends on the parameters."""
        return self.n - int(self.cens_counts[self.cens_bounds >= self.alpha].sum())

    def component_terms(self, params):
        """Null and alternative densities (exact) and masses (interval terms)."""
        a, b, alpha = params.shape.a, params.shape.b, self.alpha
        log_norm = kernels.log_beta(a, b) + kernels.incbeta(a, b, alpha)[0]
        alt_exact = np.exp((a - 1.0) * self.log_exact + (b - 1.0) * self.log1m_exact - log_norm)
        log_mass = np.array([kernels.log_interval_mass(a, b, lo, hi)
                             for lo, hi in zip(self.lo, self.hi)])
        alt_mass = np.exp(log_mass - kernels.incbeta(a, b, alpha)[0])
        return 1.0 / alpha, alt_exact, self.null_mass, alt_mass

    def log_likelihood(self, params):
        null_pdf, alt_pdf, null_mass, alt_mass = self.component_terms(params)
        pi0 = params.pi0
        with np.errstate(divide="ignore"):
            exact_ll = np.log(pi0 * null_pdf + (1.0 - pi0) * alt_pdf).sum()
            mix_mass = pi0 * null_mass + (1.0 - pi0) * alt_mass
            keep = self.counts > 0
            interval_ll = (self.counts[keep] * np.log(mix_mass[keep])).sum()
        return float(exact_ll + interval_ll)

    def expand(self):
        """Back to a flat observation list (exact, then censored, then rounded)."""
        out = [Exact(float(p)) for p in self.exact]
        for c, m in zip(self.cens_bounds, self.cens_counts):
            out.extend([Censored(float(c))] * int(m))
        for k, m in enumerate(self.bin_counts):
            out.extend([Rounded(k)] * int(m))
        return out


def uniform_distance(shape, alpha=DEFAULT_ALPHA, points=512):
    """Total-variation distance between the truncated Beta and U(0, alpha].

    Near zero the two components cannot be told apart and pi0 is not
    identified, whatever the exact shape values are.
    """
    grid = np.concatenate([[0.0], alpha * np.geomspace(1e-9, 1.0, points)])
    log_norm = kernels.incbeta(shape.a, shape.b, alpha)[0]
    cdf = np.array([math.exp(kernels.incbeta(shape.a, shape.b, x)[0] - log_norm) for x in grid])
    cdf[-1] = 1.0
    return 0.5 * float(np.abs(np.diff(cdf) - np.diff(grid) / alpha).sum())
