"""Pure-Python versions of the compiled loops (same arithmetic, same order)."""

PRICE_TOL = 1e-9


def _realize(mean, z, kind, sigma):
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


def mle_greedy_linear(a_true, a_lo, a_hi, p_lo, p_hi, scale, kind, sigma, innov, prices_out, demands_out):
    n = len(innov)
    z = innov.tolist()
    prices = [0.0] * n
    demands = [0.0] * n
    s_pp = 0.0
    s_py = 0.0
    p = p_hi
    prev = p_hi
    increases = 0
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
        d = _realize(mean, z[t], kind, sigma)
        prices[t] = p
        demands[t] = d
        s_pp += p * p
        s_py += p * (1.0 - scale * d)
        prev = p
    prices_out[:] = prices
    demands_out[:] = demands
    return increases
