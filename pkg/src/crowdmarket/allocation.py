"""Greedy cost-ascending allocation of one divisible job under fraction caps.

The allocation problem per job is a fractional knapsack: minimize total cost
subject to the fractions summing to one and each worker staying below its cap
(deadline and failure-probability constraints folded into a single per-worker
bound).  Sorting by bid and filling caps greedily is optimal; the omniscient
oracle runs the same procedure on caps computed from the true means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import BidProfile, WorkerProfile

__all__ = [
    "InfeasibleJob",
    "Allocation",
    "true_cap",
    "sw_greedy",
    "oracle_allocate",
    "delta_separation",
]


class InfeasibleJob(RuntimeError):
    """The caps cannot cover a whole job (their sum is below one)."""

    def __init__(self, total_cap: float) -> None:
        super().__init__(f"caps sum to {total_cap:.6g} < 1; job cannot be fully allocated")
        self.total_cap = total_cap


@dataclass(frozen=True)
class Allocation:
    """Fractions per worker (original indexing) plus the bid-order bookkeeping.

    ``k_bar`` is the original index of the last worker, in ascending-bid
    order, that received a positive fraction; ``bid_order`` is the sorting
    permutation (ties broken by ascending worker id).
    """

    fractions: np.ndarray
    k_bar: int
    bid_order: np.ndarray

    @property
    def k_pos(self) -> int:
        """Position of ``k_bar`` within ``bid_order``."""
        return int(np.nonzero(self.bid_order == self.k_bar)[0][0])

    @property
    def active_set(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.nonzero(self.fractions > 0)[0])


def true_cap(rho: float, beta: float, D: float, epsilon: float) -> float:
    """Per-worker fraction bound from the true means:
    ``min(1, min(D, beta * ln(1/(1-epsilon))) / rho)``."""
    return min(1.0, min(D, beta * -math.log1p(-epsilon)) / rho)


def _as_bid_array(bids) -> np.ndarray:
    if isinstance(bids, BidProfile):
        return bids.values
    return np.asarray(bids, dtype=float)


def sw_greedy(bids, caps) -> Allocation:
    """Fill the job greedily in ascending-bid order, each worker up to its cap.

    The last active worker takes the exact remainder, so the fractions sum to
    one exactly.  Ties in bids are broken by ascending worker id.  Raises
    :class:`InfeasibleJob` when the caps sum to less than one.
    """
    b = _as_bid_array(bids)
    c = np.asarray(caps, dtype=float)
    if b.shape != c.shape:
        raise ValueError(f"bids and caps disagree in length: {b.shape} vs {c.shape}")
    if np.any(c < 0) or np.any(c > 1):
        raise ValueError("caps must lie in [0, 1]")

    order = np.argsort(b, kind="stable")
    c_sorted = c[order]
    cums = np.cumsum(c_sorted)
    if cums[-1] < 1.0:
        raise InfeasibleJob(float(cums[-1]))

    k_pos = int(np.searchsorted(cums, 1.0, side="left"))
    x_sorted = np.zeros_like(c_sorted)
    x_sorted[:k_pos] = c_sorted[:k_pos]
    x_sorted[k_pos] = max(0.0, 1.0 - math.fsum(x_sorted[:k_pos]))
    # One-ulp fix-up so the fractions sum to exactly one under exact summation.
    for _ in range(4):
        gap = 1.0 - math.fsum(x_sorted[: k_pos + 1])
        if gap == 0.0:
            break
        x_sorted[k_pos] = max(0.0, x_sorted[k_pos] + gap)
    if x_sorted[k_pos] > c_sorted[k_pos]:
        x_sorted[k_pos] = c_sorted[k_pos]

    positive = np.nonzero(x_sorted > 0)[0]
    last_pos = int(positive[-1])
    fractions = np.zeros_like(x_sorted)
    fractions[order] = x_sorted
    return Allocation(fractions=fractions, k_bar=int(order[last_pos]), bid_order=order)


def oracle_allocate(
    costs,
    profiles: list[WorkerProfile],
    D: float,
    epsilon: float,
) -> Allocation:
    """Greedy allocation against the caps implied by the true worker means."""
    caps = [true_cap(w.mjct, w.mttf, D, epsilon) for w in profiles]
    return sw_greedy(costs, caps)


def delta_separation(oracle_alloc: Allocation, caps) -> float:
    """Slack left on the most expensive active worker of the given allocation."""
    c = np.asarray(caps, dtype=float)
    k = oracle_alloc.k_bar
    return max(0.0, float(c[k] - oracle_alloc.fractions[k]))
