"""Packet-level FEC block planning for an idealized erasure code.

A block of ``n`` packets carries ``s`` source and ``m = n - s`` parity
packets; any ``s`` received packets recover the sources. Losses are i.i.d.
with probability ``p`` per packet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "FecPlan",
    "fec_success_prob",
    "fec_failure_prob",
    "max_source_packets",
    "make_plan",
]


def _check_domain(n: int, s: int, p: float) -> None:
    if n < 0:
        raise ValueError(f"block size must be >= 0, got {n}")
    if not 0 <= s <= n:
        raise ValueError(f"source packets must lie in [0, {n}], got {s}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"loss probability must lie in [0, 1], got {p}")


@lru_cache(maxsize=65536)
def _scaled_terms(n: int, p: float) -> tuple[tuple[float, ...], float]:
    """Binomial pmf of the received-packet count, rescaled by its max term.

    Returns ``(w, total)`` with ``w[k]`` proportional to
    ``C(n, k) p^(n-k) (1-p)^k`` and ``total = fsum(w)``.
    """
    if p == 0.0:
        w = [0.0] * (n + 1)
        w[n] = 1.0
        return tuple(w), 1.0
    if p == 1.0:
        w = [0.0] * (n + 1)
        w[0] = 1.0
        return tuple(w), 1.0
    lp, lq = math.log(p), math.log1p(-p)
    logs = [math.log(math.comb(n, k)) + (n - k) * lp + k * lq for k in range(n + 1)]
    top = max(logs)
    w = tuple(math.exp(t - top) for t in logs)
    return w, math.fsum(w)


def fec_failure_prob(n: int, s: int, p: float) -> float:
    """Probability that fewer than ``s`` of ``n`` packets arrive."""
    _check_domain(n, s, p)
    if s == 0:
        return 0.0
    w, total = _scaled_terms(n, float(p))
    lower = math.fsum(w[:s])
    return min(1.0, max(0.0, lower / total))


def fec_success_prob(n: int, s: int, p: float) -> float:
    """Probability that at least ``s`` of ``n`` packets arrive.

    Evaluated in the log domain with compensated summation, so it stays
    accurate for blocks of several hundred packets.
    """
    _check_domain(n, s, p)
    if s == 0:
        return 1.0
    w, total = _scaled_terms(n, float(p))
    upper = math.fsum(w[s:])
    return min(1.0, max(0.0, upper / total))


@lru_cache(maxsize=262144)
def max_source_packets(n: int, p: float, tau: float) -> int:
    """Largest ``s`` in ``[0, n]`` whose decoding failure rate is ``<= tau``.

    The failure rate is non-decreasing in ``s``, so a binary search gives the
    same answer as scanning every candidate.
    """
    _check_domain(n, 0, p)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    lo, hi = 0, n  # failure(lo) <= tau always holds
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _within(n, mid, p, tau):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _within(n: int, s: int, p: float, tau: float) -> bool:
    f = fec_failure_prob(n, s, p)
    if abs(f - tau) > 1e-9 * max(tau, 1e-300):
        return f <= tau
    # too close to call in floating point: settle it exactly, reading p and
    # tau as the decimals they print as
    pr, tr = Fraction(repr(float(p))), Fraction(repr(float(tau)))
    q = 1 - pr
    exact = sum(math.comb(n, k) * pr ** (n - k) * q ** k for k in range(s))
    return exact <= tr


@dataclass(frozen=True)
class FecPlan:
    n: int
    s: int
    predicted_failure: float

    @property
    def m(self) -> int:
        return self.n - self.s

    @property
    def fec_rate(self) -> float | None:
        # undefined for an empty block
        return self.s / self.n if self.n else None


def make_plan(n: int, p: float, tau: float) -> FecPlan:
    s = max_source_packets(n, p, tau)
    return FecPlan(n=n, s=s, predicted_failure=fec_failure_prob(n, s, p))
