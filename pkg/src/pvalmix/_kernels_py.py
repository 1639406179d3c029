"""Pure-Python fallback for the compiled kernels in ``_kernels.pyx``.

Same functions, same arithmetic order; used when the extension is missing or
``PVALMIX_PURE=1`` is set.
"""

from math import exp, fabs, inf, isnan, lgamma, log, log1p

CF_TOL = 1e-14
CF_MAX_TERMS = 300
TINY = 1e-300


def log_beta(a, b):
    return lgamma(a) + lgamma(b) - lgamma(a + b)


def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if fabs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_TERMS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < CF_TOL:
            break
    return h


def incbeta(a, b, x):
    """Return ``(log I, I, 1 - I)`` for the regularized incomplete Beta."""
    if x <= 0.0:
        return -inf, 0.0, 1.0
    if x >= 1.0:
        return 0.0, 1.0, 0.0
    log_front = a * log(x) + b * log1p(-x) - log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        log_i = log_front + log(_betacf(a, b, x)) - log(a)
        i = exp(log_i)
        return log_i, i, 1.0 - i
    j = exp(log_front + log(_betacf(b, a, 1.0 - x)) - log(b))
    return log1p(-j), 1.0 - j, j


def betainc(a, b, x):
    return incbeta(a, b, x)[1]


def log_interval_mass(a, b, lo, hi):
    li_hi, i_hi, j_hi = incbeta(a, b, hi)
    if lo <= 0.0:
        return li_hi
    li_lo, _, j_lo = incbeta(a, b, lo)
    if i_hi < 0.5:
        d = li_lo - li_hi
        if d >= 0.0:
            return -inf
        return li_hi + log1p(-exp(d))
    d = j_lo - j_hi
    if d <= 0.0:
        return -inf
    return log(d)


def shape_objective(la, lb, alpha, s0, s1, s2, lo, hi, w):
    a = exp(la)
    b = exp(lb)
    li_alpha = incbeta(a, b, alpha)[0]
    total = 0.0
    if s0 > 0.0:
        total = (a - 1.0) * s1 + (b - 1.0) * s2 - s0 * (log_beta(a, b) + li_alpha)
    for k in range(len(lo)):
        if w[k] > 0.0:
            total += w[k] * (log_interval_mass(a, b, lo[k], hi[k]) - li_alpha)
    if isnan(total):
        return -inf
    return total


def _clip(v, lmin, lmax):
    return lmin if v < lmin else (lmax if v > lmax else v)


def fit_shape(la0, lb0, alpha, s0, s1, s2, lo, hi, w, tol, maxfev, step, lmin, lmax):
    lo, hi, w = [float(v) for v in lo], [float(v) for v in hi], [float(v) for v in w]

    def f(x):
        return -shape_objective(x[0], x[1], alpha, s0, s1, s2, lo, hi, w)

    xs = [[la0, lb0], [la0 + step, lb0], [la0, lb0 + step]]
    xs = [[_clip(v, lmin, lmax) for v in x] for x in xs]
    fs = [f(x) for x in xs]
    nfev = 3

    while nfev < maxfev:
        order = sorted(range(3), key=lambda i: fs[i])
        xs = [xs[i] for i in order]
        fs = [fs[i] for i in order]

        spread = fabs(fs[2] - fs[0])
        diam = max(fabs(xs[i][j] - xs[0][j]) for i in (1, 2) for j in (0, 1))
        if diam <= tol and spread <= tol * (1.0 + fabs(fs[0])):
            break

        xbar = [0.5 * (xs[0][j] + xs[1][j]) for j in (0, 1)]
        xr = [_clip(2.0 * xbar[j] - xs[2][j], lmin, lmax) for j in (0, 1)]
        fr = f(xr)
        nfev += 1
        shrink = False

        if fr < fs[0]:
            xe = [_clip(3.0 * xbar[j] - 2.0 * xs[2][j], lmin, lmax) for j in (0, 1)]
            fe = f(xe)
            nfev += 1
            if fe < fr:
                xs[2], fs[2] = xe, fe
            else:
                xs[2], fs[2] = xr, fr
        elif fr < fs[1]:
            xs[2], fs[2] = xr, fr
        else:
            if fr < fs[2]:
                xc = [_clip(1.5 * xbar[j] - 0.5 * xs[2][j], lmin, lmax) for j in (0, 1)]
                fc = f(xc)
                nfev += 1
                if fc <= fr:
                    xs[2], fs[2] = xc, fc
                else:
                    shrink = True
            else:
                xc = [0.5 * xbar[j] + 0.5 * xs[2][j] for j in (0, 1)]
                fc = f(xc)
                nfev += 1
                if fc < fs[2]:
                    xs[2], fs[2] = xc, fc
                else:
                    shrink = True
            if shrink:
                for i in (1, 2):
                    xs[i] = [xs[0][j] + 0.5 * (xs[i][j] - xs[0][j]) for j in (0, 1)]
                    fs[i] = f(xs[i])
                    nfev += 1

    k = min(range(3), key=lambda i: fs[i])
    return xs[k][0], xs[k][1], -fs[k], nfev
