"""KL divergences and the end-to-end delay distribution of a path.

The delay of a packet on a path is a sum of independent geometric variables,
one per link.  Its pmf is computed either from the partial-fraction closed
form (pairwise distinct success probabilities) or by exact recursive
convolution, which is stable for any parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from . import _kernels
from .exceptions import DomainError
from .validation import check_probability_vector

DEFAULT_TAIL_EPS = 1e-10
# Pairwise gap above which the closed form is trusted.  Its weights grow
# like 1/gap**(h-1), so near-equal parameters go to the convolution.
DEFAULT_DISTINCT_TOL = 1e-3


def kl_bernoulli(u, v):
    """KL(Bernoulli(u) || Bernoulli(v)), with 0 log 0 = 0.

    Accepts scalars or arrays.  Raises DomainError where the divergence is
    infinite (``v`` at 0 or 1 while ``u`` differs from it).
    """
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    if np.any((u_arr < 0) | (u_arr > 1)) or np.any((v_arr < 0) | (v_arr > 1)):
        raise DomainError("arguments must lie in [0, 1]")
    out = special.rel_entr(u_arr, v_arr) + special.rel_entr(1.0 - u_arr, 1.0 - v_arr)
    if np.any(np.isinf(out)):
        raise DomainError("infinite divergence: v at the boundary of [0, 1]")
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def klg(u, v):
    """KL divergence between geometric laws with success probabilities u, v.

    Equals ``kl_bernoulli(u, v) / u``.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0):
        raise DomainError("klg needs u > 0")
    return kl_bernoulli(u, v) / u_arr if u_arr.ndim else kl_bernoulli(u, v) / float(u)


def klg_series(u, v, tail_eps=1e-14):
    """KLG by direct summation over the geometric support (reference only).

    Stops once a bound on the neglected part of the sum, not just on the
    neglected probability, falls below ``tail_eps``.
    """
    if not (0 < u <= 1 and 0 < v <= 1):
        raise DomainError("klg_series needs u, v in (0, 1]")
    if u == 1.0:
        return -math.log(v)
    if v == 1.0:
        return math.inf
    a = math.log(u / v)
    r = math.log1p(-u) - math.log1p(-v)
    total = 0.0
    k = 1
    while True:
        total += u * (1 - u) ** (k - 1) * (a + (k - 1) * r)
        # sum_{j > k} u (1-u)^(j-1) |a + (j-1) r| <= (1-u)^k (|a| + (k + 1/u) |r|)
        if (1 - u) ** k * (abs(a) + (k + 1.0 / u) * abs(r)) < tail_eps:
            return total
        k += 1


@dataclass(frozen=True, eq=False)
class DelayPmf:
    """Truncated pmf of a path delay.

    ``probs[j]`` is the probability of ``k0 + j`` slots and ``log_probs[j]``
    its logarithm (kept separately because far tails underflow);
    ``tail_bound`` is an upper bound on the probability of more than
    ``k_max`` slots.
    """

    k0: int
    probs: np.ndarray
    tail_bound: float
    theta: tuple
    log_probs: np.ndarray = None

    def __post_init__(self):
        if self.log_probs is None:
            with np.errstate(divide="ignore"):
                lp = np.log(np.clip(self.probs, 0.0, None))
            lp.setflags(write=False)
            object.__setattr__(self, "log_probs", lp)

    @property
    def k_max(self):
        return self.k0 + self.probs.size - 1

    @property
    def support(self):
        return np.arange(self.k0, self.k_max + 1)

    def __call__(self, k):
        j = k - self.k0
        if 0 <= j < self.probs.size:
            return float(self.probs[j])
        return 0.0


class Truncated(NamedTuple):
    value: float
    error: float


def delay_tail_bound(theta_sub, k):
    """Upper bound on P(path delay > k).

    Each geometric delay is stochastically below a geometric with the
    smallest success probability on the path, so the sum is below a negative
    binomial: P(D > k) <= P(Binomial(k, theta_min) < h).
    """
    theta_sub = np.asarray(theta_sub, dtype=float)
    h = theta_sub.size
    tmin = float(theta_sub.min())
    if k < h:
        return 1.0
    if tmin >= 1.0:
        return 0.0
    return float(stats.binom.cdf(h - 1, k, tmin))


def _tail_mean_excess(h, tmin, k):
    """Upper bound on E[(D - h) 1{D > k}] from the same domination."""
    if tmin >= 1.0 or k < h:
        return 0.0 if tmin >= 1.0 else h / tmin
    # E[X 1{X > k}] = (h / p) P(NB_{h+1} > k + 1) for X ~ NB_h (trials)
    upper = (h / tmin) * stats.binom.cdf(h, k + 1, tmin)
    return max(0.0, upper - h * stats.binom.cdf(h - 1, k, tmin))


def choose_k_max(theta_sub, tail_eps=DEFAULT_TAIL_EPS):
    """Smallest k with delay_tail_bound(theta_sub, k) <= tail_eps."""
    h = len(theta_sub)
    if delay_tail_bound(theta_sub, h) <= tail_eps:
        return h
    hi = h + 1
    while delay_tail_bound(theta_sub, hi) > tail_eps:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if delay_tail_bound(theta_sub, mid) > tail_eps:
            lo = mid
        else:
            hi = mid
    return hi


def path_delay_pmf(theta_sub, k_max=None, *, tail_eps=DEFAULT_TAIL_EPS,
                   method="auto", distinct_tol=DEFAULT_DISTINCT_TOL):
    """Distribution of the end-to-end delay of a path with link parameters
    ``theta_sub``.

    Parameters
    ----------
    theta_sub : array-like
        Success probabilities of the links on the path, each in (0, 1].
    k_max : int, optional
        Last delay value kept.  Chosen so that the tail bound is below
        ``tail_eps`` when omitted.
    method : {"auto", "closed", "convolution"}
        "auto" uses the closed form when every pairwise gap exceeds
        ``distinct_tol`` and the convolution otherwise, or when the closed
        form underflows in the far tail.
    """
    theta_sub = check_probability_vector(theta_sub, name="theta_sub")
    h = theta_sub.size
    if k_max is None:
        k_max = choose_k_max(theta_sub, tail_eps)
    if k_max < h:
        raise ValueError(f"k_max={k_max} is below the minimum delay h={h}")
    auto = method == "auto"
    if auto:
        method = "closed" if _min_gap(theta_sub) > distinct_tol else "convolution"
    log_probs = None
    if method == "closed":
        probs = _closed_form(theta_sub, h, k_max)
        if auto and not np.all(probs > 0):
            # far tail underflowed or lost its sign to cancellation
            method = "convolution"
    if method == "convolution":
        log_probs = _kernels.log_geometric_sum_pmf(theta_sub.astype(float), int(k_max))[h:]
        log_probs.setflags(write=False)
        probs = np.exp(log_probs)
    elif method != "closed":
        raise ValueError(f"unknown method {method!r}")
    probs.setflags(write=False)
    return DelayPmf(h, probs, delay_tail_bound(theta_sub, k_max), tuple(theta_sub.tolist()), log_probs)


def _min_gap(theta_sub):
    if theta_sub.size < 2:
        return math.inf
    srt = np.sort(theta_sub)
    return float(np.min(np.diff(srt)))


def _closed_form(theta_sub, h, k_max):
    if np.any(np.diff(np.sort(theta_sub)) == 0):
        raise DomainError("closed form needs pairwise distinct parameters")
    k = np.arange(h, k_max + 1)
    probs = np.zeros(k.size)
    for i, ti in enumerate(theta_sub):
        others = np.delete(theta_sub, i)
        weight = np.prod(others / (others - ti))
        # (1 - ti) ** (k - 1) with 0 ** 0 = 1 handled by numpy power
        probs += weight * ti * np.power(1.0 - ti, k - 1)
    return probs


def path_kl_information(p_pmf, q_pmf):
    """Truncated ``sum_k p(k) log(p(k) / q(k))`` with a bound on the rest.

    Both pmfs must start at the same hop count.  The sum runs over the common
    truncated range; terms with ``p(k) == 0`` are skipped.
    """
    if p_pmf.k0 != q_pmf.k0:
        raise ValueError("support mismatch: pmfs start at different hop counts")
    n = min(p_pmf.probs.size, q_pmf.probs.size)
    p = p_pmf.probs[:n]
    log_p = p_pmf.log_probs[:n]
    log_q = q_pmf.log_probs[:n]
    pos = np.isfinite(log_p)
    if np.any(np.isneginf(log_q[pos])):
        raise DomainError("q vanishes where p has mass")
    value = float(np.sum(p[pos] * (log_p[pos] - log_q[pos])))
    k_cut = p_pmf.k0 + n - 1
    return Truncated(value, _kl_tail_error(p_pmf.theta, q_pmf.theta, k_cut))


def _kl_tail_error(theta_p, theta_q, k_cut):
    # For k >= h both pmfs are at least prod(theta) * (1 - theta_min)**(k - h)
    # (all links but the slowest succeed at once), and at most 1, hence
    # |log p/q| <= A + B (k - h).  Sum that against p's tail.
    h = len(theta_p)
    tp, tq = np.asarray(theta_p), np.asarray(theta_q)
    if tp.min() >= 1.0:
        return 0.0
    if tq.min() >= 1.0:
        return math.inf
    a = max(-np.log(tp).sum(), -np.log(tq).sum())
    b = max(-math.log1p(-tp.min()), -math.log1p(-tq.min()))
    tail = delay_tail_bound(tp, k_cut)
    return float(a * tail + b * _tail_mean_excess(h, float(tp.min()), k_cut))
