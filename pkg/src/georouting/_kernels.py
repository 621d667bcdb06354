"""Compiled scalar kernels behind the KL indexes.

Simulations evaluate these millions of times, so they run under numba.  All
functions are plain float arithmetic; callers validate inputs.
"""

import math

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)

OMEGA_QTOL = 1e-10
LAMBDA_RTOL = 1e-10
LAMBDA_MAX_ITER = 200


@_jit
def kl_bern(u, v):
    """Bernoulli KL with the 0 log 0 = 0 convention; inf when unbounded."""
    out = 0.0
    if u > 0.0:
        if v <= 0.0:
            return math.inf
        out += u * math.log(u / v)
    if u < 1.0:
        if v >= 1.0:
            return math.inf
        out += (1.0 - u) * math.log((1.0 - u) / (1.0 - v))
    if out < 0.0:
        return 0.0
    return out


@_jit
def schedule(n, weight):
    """ln n + weight * ln ln n, with the ln ln term dropped for n < 3."""
    if n <= 1:
        return 0.0
    ln = math.log(n)
    if n < 3:
        return ln
    return ln + weight * math.log(ln)


@_jit
def klucb_upper(mean, count, level, tol):
    """Largest q in [mean, 1] with count * KL(mean, q) <= level (bisection)."""
    if level <= 0.0 or mean >= 1.0:
        return mean
    if count * kl_bern(mean, 1.0) <= level:
        return 1.0
    lo = mean
    hi = 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if count * kl_bern(mean, mid) <= level:
            lo = mid
        else:
            hi = mid
    return lo


@_jit
def omega_all(s, t, level, out):
    """Edge index 1 / q_hi for every link; -1 marks unexplored links.

    Returns the number of unexplored links.
    """
    missing = 0
    for i in range(s.size):
        if t[i] == 0:
            out[i] = -1.0
            missing += 1
            continue
        mean = s[i] / t[i]
        q = klucb_upper(mean, float(t[i]), level, OMEGA_QTOL)
        out[i] = math.inf if q <= 0.0 else 1.0 / q
    return missing


@_jit
def cucb_all(s, t, log_n, clamp, out):
    missing = 0
    for i in range(s.size):
        if t[i] == 0:
            out[i] = -1.0
            missing += 1
            continue
        q = s[i] / t[i] + math.sqrt(1.5 * log_n / t[i])
        if clamp and q > 1.0:
            q = 1.0
        out[i] = 1.0 / q
    return missing


@_jit
def g_pair(lam, mean, count):
    """Minimiser u of 1/u + lam * count * KL(mean, u) on (mean, 1), and 1 - u.

    Near u = 1 the complement is computed directly, so the constraint stays
    accurate even when u itself rounds to 1.
    """
    x = count * lam
    a = mean * x
    root = math.sqrt((1.0 - a) ** 2 + 4.0 * x)
    if a <= 1.0:
        # rationalised positive root, free of cancellation for small lam
        s = (1.0 - a) + root
        return 2.0 / s, 4.0 * x * (1.0 - mean) / ((root + 1.0 + a) * s)
    u = (a - 1.0 + root) / (2.0 * x)
    return u, 1.0 - u


@_jit
def g_opt(lam, mean, count):
    u, w = g_pair(lam, mean, count)
    return u


@_jit
def kl_bern_comp(mean, u, w):
    """KL(mean, u) given w = 1 - u, for 0 <= mean < 1 and u in (0, 1)."""
    out = (1.0 - mean) * math.log((1.0 - mean) / w)
    if mean > 0.0:
        out += mean * math.log(mean / u)
    if out < 0.0:
        return 0.0
    return out


@_jit
def constraint_value(lam, means, counts):
    total = 0.0
    for k in range(means.size):
        u, w = g_pair(lam, means[k], counts[k])
        total += counts[k] * kl_bern_comp(means[k], u, w)
    return total


@_jit
def solve_lambda(means, counts, level):
    """Root of sum_k counts[k] KL(means[k], g(lam)) = level.

    The left side decreases from +inf (lam -> 0) to 0 (lam -> inf).  After
    bracketing, Illinois regula falsi on log(lam) until the bracket is
    relatively narrower than LAMBDA_RTOL.  Returns (lam, iterations);
    iterations == -1 signals that the cap was hit.
    """
    lo = 1.0
    hi = 1.0
    it = 0
    # the step factor squares each time, so any scale is reached quickly
    step = 0.5
    f_lo = constraint_value(lo, means, counts) - level
    while f_lo < 0.0:
        hi = lo
        lo *= step
        step *= step
        f_lo = constraint_value(lo, means, counts) - level
        it += 1
        if it > LAMBDA_MAX_ITER:
            return lo, -1
    step = 2.0
    f_hi = constraint_value(hi, means, counts) - level
    while f_hi > 0.0:
        lo = hi
        hi *= step
        step *= step
        f_hi = constraint_value(hi, means, counts) - level
        it += 1
        if it > LAMBDA_MAX_ITER:
            return hi, -1
    if f_lo == 0.0:
        return lo, it
    if f_hi == 0.0:
        return hi, it
    a = math.log(lo)
    b = math.log(hi)
    fa = f_lo
    fb = f_hi
    side = 0
    while b - a > LAMBDA_RTOL:
        x = (a * fb - b * fa) / (fb - fa)
        if not (a < x < b):
            x = 0.5 * (a + b)
        fx = constraint_value(math.exp(x), means, counts) - level
        it += 1
        if it > LAMBDA_MAX_ITER:
            return math.exp(x), -1
        if fx == 0.0:
            return math.exp(x), it
        if fx > 0.0:
            a = x
            fa = fx
            if side == 1:
                fb *= 0.5
            side = 1
        else:
            b = x
            fb = fx
            if side == -1:
                fa *= 0.5
            side = -1
        if abs(fx) < 1e-13 * level:
            return math.exp(x), it
    return math.exp(0.5 * (a + b)), it


@_jit
def index_b_kernel(means, counts, level):
    """Path index b for the links given by (means, counts).

    Returns (value, lam, iterations); iterations == -1 means no
    convergence.  lam is inf when the optimum sits at u = mean.
    """
    fixed = 0.0
    m = 0
    for k in range(means.size):
        if means[k] >= 1.0:
            fixed += 1.0
        else:
            m += 1
    if m == 0:
        return fixed, math.inf, 0
    if level <= 0.0:
        total = fixed
        for k in range(means.size):
            if means[k] < 1.0:
                total += math.inf if means[k] <= 0.0 else 1.0 / means[k]
        return total, math.inf, 0
    active_means = means[means < 1.0]
    active_counts = counts[means < 1.0]
    lam, it = solve_lambda(active_means, active_counts, level)
    total = fixed
    for k in range(active_means.size):
        u, w = g_pair(lam, active_means[k], active_counts[k])
        total += 1.0 / u
    return total, lam, it


@_jit
def _logaddexp(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@_jit
def log_geometric_sum_pmf(theta, k_max):
    """log P(sum of independent geometrics = k) for k = 0 .. k_max.

    Recursion P(S_j = k) = th_j P(S_{j-1} = k-1) + (1 - th_j) P(S_j = k-1),
    carried out in log space so that far tails do not underflow.
    """
    prev = np.full(k_max + 1, -math.inf)
    prev[0] = 0.0
    cur = np.empty(k_max + 1)
    for j in range(theta.size):
        lt = math.log(theta[j])
        lf = math.log1p(-theta[j]) if theta[j] < 1.0 else -math.inf
        cur[0] = -math.inf
        for k in range(1, k_max + 1):
            cur[k] = _logaddexp(lt + prev[k - 1], lf + cur[k - 1])
        prev, cur = cur, prev
    return prev


@_jit
def select_b(order, ptr, idx, s, t, c, level, prune):
    """Index of the path with the smallest b, scanning paths in ``order``.

    Path k owns links ``idx[ptr[k]:ptr[k+1]]``.  With ``prune`` the scan
    stops once the lower bound ``c`` exceeds the best b so far.  Ties go
    to the smallest path index.  Returns -1 if a multiplier search failed.
    """
    best = math.inf
    best_k = -1
    for r in range(order.size):
        k = order[r]
        if prune and c[k] > best:
            break
        m = ptr[k + 1] - ptr[k]
        means = np.empty(m)
        counts = np.empty(m)
        for j in range(m):
            i = idx[ptr[k] + j]
            counts[j] = t[i]
            means[j] = s[i] / t[i]
        value, lam, it = index_b_kernel(means, counts, level)
        if it < 0:
            return -1
        if value < best or (value == best and k < best_k):
            best = value
            best_k = k
    return best_k
