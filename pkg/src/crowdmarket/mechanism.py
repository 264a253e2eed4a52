"""Externality-based payments and incentive verification.

A worker's payment prices the displacement it causes: in its absence, its
fraction would spill over to the boundary worker's remaining slack and then to
the workers bidding above the boundary, in bid order.  Each displaced unit is
paid at the bid of the worker who would have absorbed it; any part of the
fraction that nobody could absorb is paid at the cost ceiling.  Workers above
the boundary receive nothing and pay nothing.

``deviation_sweep`` re-runs allocation and payments for a grid of unilateral
bid deviations and reports the best achievable utility gain; utilities are
piecewise constant in the own bid between bid crossings, so a grid containing
all crossings plus segment midpoints is exhaustive.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .allocation import Allocation, sw_greedy

__all__ = [
    "PaymentRecord",
    "FrozenInstance",
    "externality",
    "payment",
    "utility",
    "job_payments",
    "random_frozen_instance",
    "deviation_grid",
    "deviation_sweep",
    "payment_rows_to_csv",
]


@dataclass(frozen=True)
class PaymentRecord:
    """Payments, utilities and the full externality table for one job.

    ``externality[i, j]`` is the extra fraction worker ``j`` would absorb if
    worker ``i`` were absent (original worker indexing, zero outside the
    active/boundary band).  Utilities are evaluated at the supplied true
    costs and are computed term-by-term so that truthful utilities are
    non-negative exactly, not merely up to rounding.
    """

    job_index: int
    externality: np.ndarray
    payments: np.ndarray
    utilities: np.ndarray


def _externality_rows_sorted(
    x_s: np.ndarray, caps_s: np.ndarray, k_pos: int
) -> np.ndarray:
    """Spill rows in bid-order coordinates.

    Row ``p`` (an active position, p <= k_pos) fills the tail slots
    ``k_pos..n-1``: first the boundary worker's slack, then the caps of the
    workers after it, in bid order, until the displaced fraction is used up.
    The boundary worker's own row skips its own slack slot.
    """
    n = x_s.shape[0]
    tail = n - k_pos
    avail = np.empty(tail)
    avail[0] = caps_s[k_pos] - x_s[k_pos]
    avail[1:] = caps_s[k_pos + 1 :]
    cum_prev = np.concatenate(([0.0], np.cumsum(avail)[:-1]))
    rows = np.clip(x_s[: k_pos + 1, None] - cum_prev[None, :], 0.0, avail[None, :])

    row_k = np.zeros(tail)
    if tail > 1:
        avail_k = avail[1:]
        cum_prev_k = np.concatenate(([0.0], np.cumsum(avail_k)[:-1]))
        row_k[1:] = np.clip(x_s[k_pos] - cum_prev_k, 0.0, avail_k)
    rows[k_pos] = row_k
    return rows


def job_payments(
    alloc: Allocation,
    caps,
    bids,
    c_bar: float,
    true_costs=None,
    job_index: int = 0,
) -> PaymentRecord:
    """Compute payments and utilities for every worker in one job."""
    caps = np.asarray(caps, dtype=float)
    b = bids.values if hasattr(bids, "values") else np.asarray(bids, dtype=float)
    costs = b if true_costs is None else np.asarray(true_costs, dtype=float)

    order = alloc.bid_order
    k_pos = alloc.k_pos
    n = b.shape[0]
    x_s = alloc.fractions[order]
    rows = _externality_rows_sorted(x_s, caps[order], k_pos)

    b_tail = b[order][k_pos:]
    c_active = costs[order][: k_pos + 1]
    spill = rows.sum(axis=1)
    residual = np.maximum(0.0, x_s[: k_pos + 1] - spill)
    pay_active = rows @ b_tail + residual * c_bar
    util_active = (rows * (b_tail[None, :] - c_active[:, None])).sum(axis=1)
    util_active += residual * (c_bar - c_active)

    payments = np.zeros(n)
    utilities = np.zeros(n)
    payments[order[: k_pos + 1]] = pay_active
    utilities[order[: k_pos + 1]] = util_active
    ext = np.zeros((n, n))
    ext[np.ix_(order[: k_pos + 1], order[k_pos:])] = rows
    return PaymentRecord(
        job_index=job_index, externality=ext, payments=payments, utilities=utilities
    )


def externality(i: int, j: int, alloc: Allocation, caps, bids) -> float:
    """Extra fraction worker ``j`` would absorb if worker ``i`` were absent.

    ``i`` and ``j`` are original worker indices; the case split follows the
    bid-order positions relative to the boundary worker.  Zero whenever ``j``
    sits strictly below the boundary, ``i`` strictly above it, or ``i == j``.
    """
    caps = np.asarray(caps, dtype=float)
    order = list(alloc.bid_order)
    pos = {w: q for q, w in enumerate(order)}
    k_pos = alloc.k_pos
    if pos[i] > k_pos or pos[j] < k_pos or i == j:
        return 0.0
    x = alloc.fractions
    prefix = 0.0
    for q in range(k_pos, len(order)):
        w = order[q]
        if w == i:
            val = 0.0
        elif q == k_pos:
            val = max(0.0, min(caps[w] - x[w], x[i]))
        else:
            val = max(0.0, min(caps[w], x[i] - prefix))
        if w == j:
            return float(val)
        prefix += val
    return 0.0


def payment(i: int, alloc: Allocation, caps, bids, c_bar: float) -> float:
    """Payment to worker ``i``: externality units at the absorbers' bids plus
    the unabsorbable residual at the cost ceiling; zero above the boundary."""
    b = bids.values if hasattr(bids, "values") else np.asarray(bids, dtype=float)
    order = list(alloc.bid_order)
    pos = {w: q for q, w in enumerate(order)}
    k_pos = alloc.k_pos
    if pos[i] > k_pos:
        return 0.0
    total = 0.0
    spill = 0.0
    for q in range(k_pos, len(order)):
        w = order[q]
        val = externality(i, w, alloc, caps, b)
        total += val * b[w]
        spill += val
    total += max(0.0, alloc.fractions[i] - spill) * c_bar
    return float(total)


def utility(i: int, true_cost: float, alloc: Allocation, payments) -> float:
    """Realized utility of worker ``i``: payment minus incurred cost."""
    p = np.asarray(payments, dtype=float)
    return float(p[i] - true_cost * alloc.fractions[i])


@dataclass(frozen=True)
class FrozenInstance:
    """One-job snapshot: caps are frozen learning state, costs are private."""

    costs: np.ndarray
    caps: np.ndarray
    cost_bounds: tuple[float, float]
    bids: np.ndarray = field(default=None)  # defaults to truthful

    def __post_init__(self) -> None:
        object.__setattr__(self, "costs", np.asarray(self.costs, dtype=float))
        object.__setattr__(self, "caps", np.asarray(self.caps, dtype=float))
        if self.bids is None:
            object.__setattr__(self, "bids", self.costs.copy())
        else:
            object.__setattr__(self, "bids", np.asarray(self.bids, dtype=float))


def random_frozen_instance(
    rng: np.random.Generator,
    n_max: int = 8,
    cost_bounds: tuple[float, float] = (1.0, 10.0),
) -> FrozenInstance:
    """Random feasible one-job instance for incentive fuzzing.

    Caps are rescaled so their sum lands comfortably above one (and each stays
    within [0, 1]); costs are uniform over the cost range and bids default to
    truthful.
    """
    lo, hi = cost_bounds
    while True:
        n = int(rng.integers(2, n_max + 1))
        raw = rng.uniform(0.05, 0.95, size=n)
        target = rng.uniform(1.05, 2.5)
        caps = np.minimum(1.0, raw / raw.sum() * target)
        if caps.sum() >= 1.0:
            break
    costs = rng.uniform(lo, hi, size=n)
    return FrozenInstance(costs=costs, caps=caps, cost_bounds=cost_bounds)


def deviation_grid(instance: FrozenInstance, i: int, points: int = 50) -> np.ndarray:
    """Candidate deviating bids: a uniform grid over the cost range, the other
    workers' bids (crossing points), and the midpoints between consecutive
    candidates.  Utility is piecewise constant between crossings, so this grid
    certifies the maximum exactly."""
    lo, hi = instance.cost_bounds
    others = np.delete(instance.bids, i)
    knots = np.concatenate([np.linspace(lo, hi, points), others, [instance.costs[i]]])
    knots = np.unique(np.clip(knots, lo, hi))
    mids = 0.5 * (knots[:-1] + knots[1:])
    return np.unique(np.concatenate([knots, mids]))


def _utility_at_bid(instance: FrozenInstance, i: int, bid: float) -> float:
    bids = instance.bids.copy()
    bids[i] = bid
    alloc = sw_greedy(bids, instance.caps)
    rec = job_payments(
        alloc, instance.caps, bids, instance.cost_bounds[1], true_costs=instance.costs
    )
    return float(rec.utilities[i])


def deviation_sweep(instance: FrozenInstance, i: int, grid=None) -> float:
    """Best utility gain worker ``i`` can achieve by unilateral misreporting.

    The learning state (caps) stays frozen, other workers bid truthfully, and
    the return value is ``max_b u_i(b) - u_i(c_i)``; a non-positive result
    certifies that no profitable deviation exists on the grid.
    """
    if grid is None:
        grid = deviation_grid(instance, i)
    truthful = _utility_at_bid(instance, i, float(instance.costs[i]))
    best = max(_utility_at_bid(instance, i, float(b)) for b in grid)
    return best - truthful


def payment_rows_to_csv(rows, path: str | Path) -> None:
    """Write payment rows as CSV; each row is (t, worker, fraction, payment, utility)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "worker", "fraction", "payment", "utility"])
        for t, worker, fraction, pay, util in rows:
            writer.writerow([t, worker, repr(float(fraction)), repr(float(pay)), repr(float(util))])
