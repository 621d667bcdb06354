"""Optimistic delay indexes for links and paths.

* ``index_b``: path index, smallest expected delay compatible with a joint
  KL confidence region (line search over a Lagrange multiplier).
* ``index_c``: path index, explicit lower bound on ``index_b``.
* ``index_omega``: link index, KL-UCB upper confidence bound on the success
  probability turned into a delay.
* ``index_cucb``: link index of the CUCB baseline.

Smaller is better for every index: each is an optimistic (low) estimate of
an expected delay.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .exceptions import NoConvergence, UnexploredLink


def f1(n, H):
    """Exploration level of the path indexes: ln n + 4 H ln ln n."""
    return K.schedule(int(n), 4.0 * H)


def f2(n):
    """Exploration level of the link index: ln n + 3 ln ln n."""
    return K.schedule(int(n), 3.0)


def _path_counts(path, stats, need_successes):
    links = np.fromiter(path.links, dtype=np.int64)
    s = stats.s[links]
    t = stats.attempts[links]
    if np.any(t == 0) or (need_successes and np.any(s == 0)):
        bad = links[(t == 0) | (s == 0)] if need_successes else links[t == 0]
        raise UnexploredLink(f"links {bad.tolist()} have no observations")
    return s, t


def index_c(path, stats, n, H):
    """Explicit path index::

        sum_i 1/theta_hat_i - sqrt(f1(n)/2 * sum_i 1/(s_i theta_hat_i**3))

    Needs ``s_i >= 1`` on every link of the path.  Can be negative.
    """
    s, t = _path_counts(path, stats, need_successes=True)
    theta = s / t
    return float(np.sum(1.0 / theta) - math.sqrt(f1(n, H) / 2.0 * np.sum(1.0 / (s * theta**3))))


def index_c_matrix(masks, stats, n, H):
    """``index_c`` for every row of a (n_paths, n_links) 0/1 matrix."""
    s = stats.s.astype(float)
    t = stats.attempts.astype(float)
    if np.any(masks @ (s == 0)):
        raise UnexploredLink("some path has a link without successes")
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(t > 0, s / t, 1.0)
        inv = np.where(s > 0, 1.0 / theta, 0.0)
        curv = np.where(s > 0, 1.0 / (s * theta**3), 0.0)
    return masks @ inv - np.sqrt(f1(n, H) / 2.0 * (masks @ curv))


class BIndex(NamedTuple):
    value: float
    multiplier: float
    u: np.ndarray  # optimal per-link success probabilities, path order
    slack: np.ndarray  # 1 - u, accurate where u rounds to 1


def index_b(path, stats, n, H, *, full=False):
    """Path index: ``inf sum_i 1/u_i`` subject to
    ``sum_i t_i KL(theta_hat_i, u_i) <= f1(n)`` over the links of the path.

    The stationarity condition gives each optimal ``u_i`` in closed form for
    a given multiplier; the multiplier is found by a bracketed root search.
    Links with ``theta_hat_i == 1`` keep ``u_i = 1``.

    Parameters
    ----------
    full : bool
        Return a :class:`BIndex` with the multiplier and the optimal ``u``.
    """
    s, t = _path_counts(path, stats, need_successes=False)
    means = s / t
    counts = t.astype(float)
    level = f1(n, H)
    value, lam, it = K.index_b_kernel(means, counts, level)
    if it < 0:
        raise NoConvergence(f"multiplier search did not converge (level={level})")
    if not full:
        return value
    u = np.ones_like(means)
    slack = np.zeros_like(means)
    active = np.flatnonzero(means < 1.0)
    if math.isinf(lam):
        u[active] = means[active]
        slack[active] = 1.0 - means[active]
    else:
        for k in active:
            u[k], slack[k] = K.g_pair(lam, means[k], counts[k])
    return BIndex(value, lam, u, slack)


def index_omega(link, stats, n):
    """Link index ``1/q`` with ``q`` the largest value in ``[theta_hat, 1]``
    such that ``t * KL(theta_hat, q) <= f2(n)``.

    ``stats`` may be packet-resolution (:class:`LinkStats`) or
    slot-resolution (:class:`SlotStats`); ``n`` is the packet number.
    """
    t = int(stats.attempts[link])
    if t == 0:
        raise UnexploredLink(f"link {link} has no observations")
    q = K.klucb_upper(stats.s[link] / t, float(t), f2(n), K.OMEGA_QTOL)
    return math.inf if q <= 0 else 1.0 / q


def omega_vector(stats, n, out=None):
    """``index_omega`` for all links at once (unexplored links raise)."""
    out = np.empty(stats.n_links) if out is None else out
    if K.omega_all(stats.s, stats.attempts, f2(n), out):
        raise UnexploredLink(f"links {np.flatnonzero(out < 0).tolist()} have no observations")
    return out


def index_cucb(link, stats, n, *, clamp=True):
    """CUCB link cost ``1 / (theta_hat + sqrt(1.5 ln n / t))``.

    With ``clamp`` the optimistic probability is capped at 1, so the cost
    never drops below one slot.
    """
    t = int(stats.attempts[link])
    if t == 0:
        raise UnexploredLink(f"link {link} has no observations")
    q = stats.s[link] / t + math.sqrt(1.5 * math.log(n) / t)
    if clamp:
        q = min(q, 1.0)
    return 1.0 / q


def cucb_vector(stats, n, *, clamp=True, out=None):
    out = np.empty(stats.n_links) if out is None else out
    if K.cucb_all(stats.s, stats.attempts, math.log(n), clamp, out):
        raise UnexploredLink(f"links {np.flatnonzero(out < 0).tolist()} have no observations")
    return out
