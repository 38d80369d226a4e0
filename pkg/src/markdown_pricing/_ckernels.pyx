# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-round loops.  Must stay numerically identical to _pykernels."""

cdef double PRICE_TOL = 1e-9


cdef inline double _realize(double mean, double z, int kind, double sigma) noexcept nogil:
    cdef double d
    if kind == 1:
        d = mean + sigma * z
        if d < 0.0:
            d = 0.0
        if d > 1.0:
            d = 1.0
        return d
    if kind == 2:
        return 1.0 if z < mean else 0.0
    return mean


def mle_greedy_linear(double a_true, double a_lo, double a_hi, double p_lo, double p_hi,
                      double scale, int kind, double sigma, const double[:] innov,
                      double[:] prices_out, double[:] demands_out):
    cdef Py_ssize_t n = innov.shape[0]
    cdef Py_ssize_t t
    cdef double s_pp = 0.0
    cdef double s_py = 0.0
    cdef double p = p_hi
    cdef double prev = p_hi
    cdef double a_hat, mean, d
    cdef long increases = 0
    with nogil:
        for t in range(n):
            if t > 0:
                if s_pp > 0.0:
                    a_hat = s_py / s_pp
                    if a_hat < a_lo:
                        a_hat = a_lo
                    if a_hat > a_hi:
                        a_hat = a_hi
                    p = 1.0 / (2.0 * a_hat)
                    if p < p_lo:
                        p = p_lo
                    if p > p_hi:
                        p = p_hi
                else:
                    p = p_hi
                # an estimate that moved only by rounding keeps the previous price
                if p - prev <= PRICE_TOL and prev - p <= PRICE_TOL:
                    p = prev
                if p > prev:
                    increases += 1
            mean = (1.0 - a_true * p) / scale
            d = _realize(mean, innov[t], kind, sigma)
            prices_out[t] = p
            demands_out[t] = d
            s_pp += p * p
            s_py += p * (1.0 - scale * d)
            prev = p
    return increases
