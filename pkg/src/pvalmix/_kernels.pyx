# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: regularized incomplete Beta and the M-step shape search.

Mirrors ``_kernels_py`` function for function; ``numerics`` picks one at import.
"""

from libc.math cimport exp, log, log1p, lgamma, fabs, INFINITY, NAN, isnan

cdef double CF_TOL = 1e-14
cdef int CF_MAX_TERMS = 300
cdef double TINY = 1e-300


cdef double _log_beta(double a, double b) nogil:
    return lgamma(a) + lgamma(b) - lgamma(a + b)


cdef double _betacf(double a, double b, double x) nogil:
    # modified Lentz evaluation of the incomplete Beta continued fraction
    cdef double qab = a + b, qap = a + 1.0, qam = a - 1.0
    cdef double c = 1.0, d = 1.0 - qab * x / qap, h, aa, delta
    cdef int m, m2
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


cdef void _incbeta(double a, double b, double x,
                   double* log_i, double* i_out, double* j_out) nogil:
    """I_x(a, b) as log I, I and J = 1 - I, each computed without cancellation."""
    cdef double log_front, j
    if x <= 0.0:
        log_i[0] = -INFINITY
        i_out[0] = 0.0
        j_out[0] = 1.0
        return
    if x >= 1.0:
        log_i[0] = 0.0
        i_out[0] = 1.0
        j_out[0] = 0.0
        return
    log_front = a * log(x) + b * log1p(-x) - _log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        log_i[0] = log_front + log(_betacf(a, b, x)) - log(a)
        i_out[0] = exp(log_i[0])
        j_out[0] = 1.0 - i_out[0]
    else:
        j = exp(log_front + log(_betacf(b, a, 1.0 - x)) - log(b))
        j_out[0] = j
        i_out[0] = 1.0 - j
        log_i[0] = log1p(-j)


cdef double _log_interval_mass(double a, double b, double lo, double hi) nogil:
    """log(I_hi - I_lo), differencing on whichever tail keeps precision."""
    cdef double li_hi, i_hi, j_hi, li_lo, i_lo, j_lo, d
    _incbeta(a, b, hi, &li_hi, &i_hi, &j_hi)
    if lo <= 0.0:
        return li_hi
    _incbeta(a, b, lo, &li_lo, &i_lo, &j_lo)
    if i_hi < 0.5:
        d = li_lo - li_hi
        if d >= 0.0:
            return -INFINITY
        return li_hi + log1p(-exp(d))
    d = j_lo - j_hi
    if d <= 0.0:
        return -INFINITY
    return log(d)


cdef double _objective(double la, double lb, double alpha,
                       double s0, double s1, double s2,
                       const double[:] lo, const double[:] hi, const double[:] w) nogil:
    cdef double a = exp(la), b = exp(lb)
    cdef double li_alpha, i_alpha, j_alpha, total, wsum = 0.0
    cdef Py_ssize_t k
    _incbeta(a, b, alpha, &li_alpha, &i_alpha, &j_alpha)
    total = 0.0
    if s0 > 0.0:
        total = (a - 1.0) * s1 + (b - 1.0) * s2 - s0 * (_log_beta(a, b) + li_alpha)
    for k in range(lo.shape[0]):
        if w[k] > 0.0:
            total += w[k] * (_log_interval_mass(a, b, lo[k], hi[k]) - li_alpha)
    if isnan(total):
        return -INFINITY
    return total


def log_beta(double a, double b):
    return _log_beta(a, b)


def incbeta(double a, double b, double x):
    """Return ``(log I, I, 1 - I)`` for the regularized incomplete Beta."""
    cdef double li, i, j
    _incbeta(a, b, x, &li, &i, &j)
    return li, i, j


def betainc(double a, double b, double x):
    cdef double li, i, j
    _incbeta(a, b, x, &li, &i, &j)
    return i


def log_interval_mass(double a, double b, double lo, double hi):
    return _log_interval_mass(a, b, lo, hi)


def shape_objective(double la, double lb, double alpha,
                    double s0, double s1, double s2,
                    const double[:] lo, const double[:] hi, const double[:] w):
    return _objective(la, lb, alpha, s0, s1, s2, lo, hi, w)


def fit_shape(double la0, double lb0, double alpha,
              double s0, double s1, double s2,
              const double[:] lo, const double[:] hi, const double[:] w,
              double tol, int maxfev, double step, double lmin, double lmax):
    """Nelder-Mead maximization of the shape objective over (log a, log b).

    Returns ``(log a, log b, objective, evaluations)``. The start point is a
    simplex vertex, so the returned objective never falls below its value.
    """
    cdef double xs[3][2]
    cdef double fs[3]
    cdef double xr[2], xe[2], xc[2], xbar[2]
    cdef double fr, fe, fc, tmp, spread, diam
    cdef int nfev = 0, i, j, k, order[3]
    cdef bint shrink

    with nogil:
        xs[0][0] = la0
        xs[0][1] = lb0
        xs[1][0] = la0 + step
        xs[1][1] = lb0
        xs[2][0] = la0
        xs[2][1] = lb0 + step
        for i in range(3):
            for j in range(2):
                if xs[i][j] < lmin:
                    xs[i][j] = lmin
                elif xs[i][j] > lmax:
                    xs[i][j] = lmax
            fs[i] = -_objective(xs[i][0], xs[i][1], alpha, s0, s1, s2, lo, hi, w)
            nfev += 1

        while nfev < maxfev:
            # order vertices best-first; stable on ties so the start point wins
            order[0] = 0
            order[1] = 1
            order[2] = 2
            for i in range(1, 3):
                k = order[i]
                j = i - 1
                while j >= 0 and fs[order[j]] > fs[k]:
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = k
            _reorder(xs, fs, order)

            spread = fabs(fs[2] - fs[0])
            diam = 0.0
            for i in range(1, 3):
                for j in range(2):
                    tmp = fabs(xs[i][j] - xs[0][j])
                    if tmp > diam:
                        diam = tmp
            if diam <= tol and spread <= tol * (1.0 + fabs(fs[0])):
                break

            for j in range(2):
                xbar[j] = 0.5 * (xs[0][j] + xs[1][j])
                xr[j] = _clip(2.0 * xbar[j] - xs[2][j], lmin, lmax)
            fr = -_objective(xr[0], xr[1], alpha, s0, s1, s2, lo, hi, w)
            nfev += 1
            shrink = False

            if fr < fs[0]:
                for j in range(2):
                    xe[j] = _clip(3.0 * xbar[j] - 2.0 * xs[2][j], lmin, lmax)
                fe = -_objective(xe[0], xe[1], alpha, s0, s1, s2, lo, hi, w)
                nfev += 1
                if fe < fr:
                    xs[2][0] = xe[0]
                    xs[2][1] = xe[1]
                    fs[2] = fe
                else:
                    xs[2][0] = xr[0]
                    xs[2][1] = xr[1]
                    fs[2] = fr
            elif fr < fs[1]:
                xs[2][0] = xr[0]
                xs[2][1] = xr[1]
                fs[2] = fr
            else:
                if fr < fs[2]:
                    for j in range(2):
                        xc[j] = _clip(1.5 * xbar[j] - 0.5 * xs[2][j], lmin, lmax)
                    fc = -_objective(xc[0], xc[1], alpha, s0, s1, s2, lo, hi, w)
                    nfev += 1
                    if fc <= fr:
                        xs[2][0] = xc[0]
                        xs[2][1] = xc[1]
                        fs[2] = fc
                    else:
                        shrink = True
                else:
                    for j in range(2):
                        xc[j] = 0.5 * xbar[j] + 0.5 * xs[2][j]
                    fc = -_objective(xc[0], xc[1], alpha, s0, s1, s2, lo, hi, w)
                    nfev += 1
                    if fc < fs[2]:
                        xs[2][0] = xc[0]
                        xs[2][1] = xc[1]
                        fs[2] = fc
                    else:
                        shrink = True
                if shrink:
                    for i in range(1, 3):
                        for j in range(2):
                            xs[i][j] = xs[0][j] + 0.5 * (xs[i][j] - xs[0][j])
                        fs[i] = -_objective(xs[i][0], xs[i][1], alpha, s0, s1, s2, lo, hi, w)
                        nfev += 1

        k = 0
        for i in range(1, 3):
            if fs[i] < fs[k]:
                k = i
    return xs[k][0], xs[k][1], -fs[k], nfev


cdef inline double _clip(double v, double lmin, double lmax) nogil:
    if v < lmin:
        return lmin
    if v > lmax:
        return lmax
    return v


cdef inline void _reorder(double xs[3][2], double fs[3], int order[3]) nogil:
    cdef double x2[3][2]
    cdef double f2[3]
    cdef int i
    for i in range(3):
        x2[i][0] = xs[order[i]][0]
        x2[i][1] = xs[order[i]][1]
        f2[i] = fs[order[i]]
    for i in range(3):
        xs[i][0] = x2[i][0]
        xs[i][1] = x2[i][1]
        fs[i] = f2[i]
