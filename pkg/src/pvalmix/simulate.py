"""Synthetic reported P-values drawn from the mixture, and the textbook
false-positive fraction among significant results."""

from dataclasses import dataclass

import numpy as np

from .model import Censored, Exact, MixtureParams, Rounded, rounding_bins
from .numerics import kernels
from .seeding import stream

CENSOR_BOUNDS = (0.001, 0.01, 0.05)
# "threshold": report the smallest bound >= p, so the bound depends on p.
# "independent": draw the bound independently of p and censor only if p <= bound,
# which is the non-informative censoring the likelihood assumes.
CENSOR_MODES = ("threshold", "independent")
MIN_ACCEPTANCE = 0.01


@dataclass(frozen=True)
class SimConfig:
    n: int
    true_params: MixtureParams
    censor_frac: float = 0.0
    round_frac: float = 0.0
    seed: int = 0
    censor_mode: str = "threshold"

    def __post_init__(self):
        if self.censor_mode not in CENSOR_MODES:
            raise ValueError(f"censor_mode must be one of {CENSOR_MODES}, got {self.censor_mode!r}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        for name in ("censor_frac", "round_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.censor_frac + self.round_frac > 1.0 + 1e-12:
            raise ValueError("censor_frac + round_frac must not exceed 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if any(c > self.true_params.alpha for c in CENSOR_BOUNDS[:-1]) or \
                CENSOR_BOUNDS[-1] < self.true_params.alpha:
            raise ValueError(f"censoring bounds {CENSOR_BOUNDS} do not cover alpha")


@dataclass(frozen=True)
class TheoreticalInputs:
    prior_true: float
    alpha_level: float = 0.05
    power: float = 0.8

    def __post_init__(self):
        for name in ("prior_true", "alpha_level", "power"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def _invert_trunc_beta(u, a, b, alpha, log_mass):
    """Bisection for x in (0, alpha] with I_x(a, b) = u * I_alpha(a, b)."""
    target = np.log(u) + log_mass
    lo = np.zeros_like(u)
    hi = np.full_like(u, alpha)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = np.array([kernels.incbeta(a, b, m)[0] for m in mid]) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi


def sample_trunc_beta(rng, n, shape, alpha=0.05):
    """Draw ``n`` values from Beta(a, b) conditioned on being at most alpha.

    Rejection from the untruncated Beta; inverse-CDF bisection instead when
    less than 1% of Beta draws would be accepted.
    """
    a, b = shape.a, shape.b
    log_mass, accept, _ = kernels.incbeta(a, b, alpha)
    if n == 0:
        return np.empty(0)
    if accept < MIN_ACCEPTANCE:
        return _invert_trunc_beta(1.0 - rng.random(n), a, b, alpha, log_mass)
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        draws = rng.beta(a, b, size=int(need / accept * 1.1) + 16)
        draws = draws[(draws <= alpha) & (draws > 0.0)][:need]
        out[filled:filled + len(draws)] = draws
        filled += len(draws)
    return out


def simulate_observations(config):
    """Simulate reported P-values.

    Returns ``(observations, is_null, p)``: the observation list, the hidden
    component labels (True = null) and the latent exact values.
    """
    params = config.true_params
    alpha = params.alpha
    rng = stream(config.seed, "simulate")
    n = config.n

    is_null = rng.random(n) < params.pi0
    p = np.empty(n)
    # (0, alpha], never exactly 0
    p[is_null] = alpha * (1.0 - rng.random(int(is_null.sum())))
    p[~is_null] = sample_trunc_beta(rng, int((~is_null).sum()), params.shape, alpha)

    coarsen = rng.random(n)
    pick = rng.integers(0, len(CENSOR_BOUNDS), size=n)
    bins = rounding_bins(alpha)
    bounds = np.asarray(CENSOR_BOUNDS)
    independent = config.censor_mode == "independent"
    observations = []
    for pi, u, j in zip(p.tolist(), coarsen.tolist(), pick.tolist()):
        if u < config.round_frac:
            observations.append(Rounded(bins.bin_of(pi)))
        elif u < config.round_frac + config.censor_frac:
            if independent:
                bound = min(float(bounds[j]), alpha)
                observations.append(Censored(bound) if pi <= bound else Exact(pi))
            else:
                bound = float(bounds[np.searchsorted(bounds, pi, side="left")])
                observations.append(Censored(min(bound, alpha)))
        else:
            observations.append(Exact(pi))
    return observations, is_null, p


def theoretical_swfdr(inputs):
    """Fraction of significant results that are false positives.

    ``(1 - prior) * alpha / ((1 - prior) * alpha + prior * power)``
    """
    false_hits = (1.0 - inputs.prior_true) * inputs.alpha_level
    true_hits = inputs.prior_true * inputs.power
    if false_hits + true_hits <= 0.0:
        raise ValueError("no hypothesis is ever called significant with these inputs")
    return false_hits / (false_hits + true_hits)
