"""Beta, truncated-Beta and truncated-uniform primitives on (0, alpha].

The incomplete Beta and the M-step search live in a compiled kernel when one
is available; set ``PVALMIX_PURE=1`` to force the pure-Python version.
"""

import math
import os
from dataclasses import dataclass

from .errors import DomainError

if os.environ.get("PVALMIX_PURE") == "1":
    from . import _kernels_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels
        BACKEND = "python"

SHAPE_MIN = 1e-4
SHAPE_MAX = 1e4


@dataclass(frozen=True)
class BetaShape:
    a: float
    b: float

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"Beta shape {name} must be positive and finite, got {v!r}")

    def clamped(self):
        """Copy with both shapes pulled into [SHAPE_MIN, SHAPE_MAX]."""
        return BetaShape(min(max(self.a, SHAPE_MIN), SHAPE_MAX), min(max(self.b, SHAPE_MIN), SHAPE_MAX))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"truncation threshold must lie in (0, 1), got {alpha!r}")


def log_beta(a, b):
    return kernels.log_beta(a, b)


def beta_log_pdf(p, shape):
    if not 0.0 < p < 1.0:
        raise DomainError(f"Beta density needs p in (0, 1), got {p!r}")
    a, b = shape.a, shape.b
    return (a - 1.0) * math.log(p) + (b - 1.0) * math.log1p(-p) - kernels.log_beta(a, b)


def beta_cdf(p, shape):
    """Regularized incomplete Beta I_p(a, b)."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Beta CDF needs p in [0, 1], got {p!r}")
    return kernels.betainc(shape.a, shape.b, p)


def log_beta_cdf(p, shape):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Beta CDF needs p in [0, 1], got {p!r}")
    return kernels.incbeta(shape.a, shape.b, p)[0]


def trunc_beta_log_pdf(p, shape, alpha=0.05):
    _check_alpha(alpha)
    if not 0.0 < p <= alpha:
        raise DomainError(f"truncated Beta density needs p in (0, {alpha}], got {p!r}")
    return beta_log_pdf(p, shape) - kernels.incbeta(shape.a, shape.b, alpha)[0]


def trunc_beta_pdf(p, shape, alpha=0.05):
    return math.exp(trunc_beta_log_pdf(p, shape, alpha))


def trunc_beta_cdf(c, shape, alpha=0.05):
    _check_alpha(alpha)
    if not 0.0 <= c <= alpha:
        raise DomainError(f"truncated Beta CDF needs c in [0, {alpha}], got {c!r}")
    if c == alpha:
        return 1.0
    if c == 0.0:
        return 0.0
    return math.exp(kernels.log_interval_mass(shape.a, shape.b, 0.0, c)
                    - kernels.incbeta(shape.a, shape.b, alpha)[0])


def trunc_beta_interval(lo, hi, shape, alpha=0.05):
    """Truncated-Beta mass of [lo, hi] within [0, alpha]."""
    _check_alpha(alpha)
    if not 0.0 <= lo <= hi <= alpha:
        raise DomainError(f"need 0 <= lo <= hi <= {alpha}, got [{lo!r}, {hi!r}]")
    if lo == hi:
        return 0.0
    return math.exp(kernels.log_interval_mass(shape.a, shape.b, lo, hi)
                    - kernels.incbeta(shape.a, shape.b, alpha)[0])


def trunc_uniform_pdf(p, alpha=0.05):
    _check_alpha(alpha)
    if not 0.0 < p <= alpha:
        raise DomainError(f"truncated uniform density needs p in (0, {alpha}], got {p!r}")
    return 1.0 / alpha


def trunc_uniform_cdf(p, alpha=0.05):
    _check_alpha(alpha)
    if not 0.0 <= p <= alpha:
        raise DomainError(f"truncated uniform CDF needs p in [0, {alpha}], got {p!r}")
    return p / alpha
