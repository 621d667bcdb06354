"""Per-link success counters and empirical success probabilities."""

from __future__ import annotations

import csv

import numpy as np

from .env import SemiBanditFeedback


class LinkStats:
    """Packet-resolution counters.

    ``s[i]`` counts packets that crossed link ``i`` and ``t[i]`` the
    transmission attempts they needed.  The estimate ``theta_hat`` is
    ``s / t`` where ``t > 0`` and 0 elsewhere; it is derived from the
    integer counters on every access.
    """

    def __init__(self, n_links):
        self.s = np.zeros(n_links, dtype=np.int64)
        self.t = np.zeros(n_links, dtype=np.int64)

    @property
    def n_links(self):
        return self.s.size

    @property
    def attempts(self):
        return self.t

    @property
    def theta_hat(self):
        return _ratio(self.s, self.t)

    def update_semibandit(self, feedback):
        if not isinstance(feedback, SemiBanditFeedback):
            raise TypeError("LinkStats needs per-link (semi-bandit) feedback")
        for i, d in feedback.delays.items():
            if d < 1:
                raise ValueError(f"link delay must be >= 1, got {d}")
            self.s[i] += 1
            self.t[i] += d
        return self

    def merge(self, other):
        """Counters of two disjoint observation streams added together."""
        out = self.copy()
        out.s += other.s
        out.t += other.t
        return out

    def copy(self):
        out = type(self)(self.n_links)
        out.s[:] = self.s
        out.t[:] = self.t
        return out

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and np.array_equal(self.s, other.s)
            and np.array_equal(self.t, other.t)
        )

    def __repr__(self):
        return f"LinkStats(s={self.s.tolist()}, t={self.t.tolist()})"


class SlotStats:
    """Slot-resolution counters for hop-by-hop routing.

    ``t_prime[i]`` counts every attempt made on link ``i`` so far and
    ``s[i]`` the successful ones.
    """

    def __init__(self, n_links):
        self.s = np.zeros(n_links, dtype=np.int64)
        self.t_prime = np.zeros(n_links, dtype=np.int64)

    @property
    def n_links(self):
        return self.s.size

    @property
    def attempts(self):
        return self.t_prime

    @property
    def theta_tilde(self):
        return _ratio(self.s, self.t_prime)

    # index code reads .theta_hat; slot estimates play the same role there
    theta_hat = theta_tilde

    def update_slot(self, link, success):
        self.t_prime[link] += 1
        if success:
            self.s[link] += 1
        return self

    def copy(self):
        out = type(self)(self.n_links)
        out.s[:] = self.s
        out.t_prime[:] = self.t_prime
        return out

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and np.array_equal(self.s, other.s)
            and np.array_equal(self.t_prime, other.t_prime)
        )

    def __repr__(self):
        return f"SlotStats(s={self.s.tolist()}, t_prime={self.t_prime.tolist()})"


def _ratio(s, t):
    out = np.zeros(s.shape, dtype=float)
    np.divide(s, t, out=out, where=t > 0)
    return out


class SnapshotWriter:
    """Debug helper: one CSV row of counters per round."""

    def __init__(self, fh):
        self._writer = csv.writer(fh)
        self._header_done = False

    def write(self, n, stats):
        if not self._header_done:
            k = stats.n_links
            self._writer.writerow(
                ["n"] + [f"s_{i}" for i in range(k)] + [f"t_{i}" for i in range(k)]
            )
            self._header_done = True
        self._writer.writerow([n, *stats.s.tolist(), *stats.attempts.tolist()])
