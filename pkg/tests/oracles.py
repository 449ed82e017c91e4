"""Reference computations written without any package code.

Every root here is found by plain bisection on a formula restated from
scratch, so agreement with the package is a check between two routes.
"""

from __future__ import annotations

import math


def bisect(f, lo, hi, iters=400):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def utility(w, phi, k):
    return 1.0 - (1.0 + w / phi) ** (-k)


def utility_inverse(u, phi, k):
    return bisect(lambda w: utility(w, phi, k) - u, 0.0, 1e9)


def max_premium(W, alpha, lam, phi, k):
    """Expected wealth minus certainty equivalent, the CE found by bisection."""
    eu = (1 - alpha) * utility(W, phi, k) + alpha * utility((1 - lam) * W, phi, k)
    ce = bisect(lambda w: utility(w, phi, k) - eu, 0.0, W)
    return (1 - alpha) * W + alpha * (1 - lam) * W - ce


def euler_consumption(X, r, beta_m, alpha, lam, phi, k):
    """Consumption solving the two-period Euler condition, by bisection."""
    up = lambda c: (k / phi) * (1 + c / phi) ** (-k - 1)  # noqa: E731

    def residual(c):
        nxt = (1 + r) * (X - c)
        return up(c) - beta_m * (1 + r) * ((1 - alpha) * up(nxt) + alpha * up((1 - lam) * nxt))

    if residual(X) >= 0:
        return X
    if residual(0.0) <= 0:
        return 0.0  # saving is worth more at every split
    return bisect(residual, 0.0, X)


def euler_residual(c, X, r, beta_m, alpha, lam, phi, k):
    up = lambda x: (k / phi) * (1 + x / phi) ** (-k - 1)  # noqa: E731
    nxt = (1 + r) * (X - c)
    return up(c) - beta_m * (1 + r) * ((1 - alpha) * up(nxt) + alpha * up((1 - lam) * nxt))


def normal_quantile(p, mu, sigma):
    cdf = lambda x: 0.5 * (1 + math.erf((x - mu) / (sigma * math.sqrt(2))))  # noqa: E731
    return bisect(lambda x: cdf(x) - p, mu - 40 * sigma, mu + 40 * sigma)


def gini_pairs(w):
    n = len(w)
    mean = sum(w) / n
    if mean == 0:
        return 0.0
    return sum(abs(a - b) for a in w for b in w) / (2 * n * n * mean)


def value_iteration(P, R, delta, sweeps=5000):
    """Optimal q-values of a finite MDP given as nested lists."""
    n_s, n_a = len(R), len(R[0])
    q = [[0.0] * n_a for _ in range(n_s)]
    for _ in range(sweeps):
        v = [max(row) for row in q]
        q = [[R[s][a] + delta * sum(P[s][a][t] * v[t] for t in range(n_s)) for a in range(n_a)]
             for s in range(n_s)]
    return q
