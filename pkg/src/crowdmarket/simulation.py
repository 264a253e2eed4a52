"""Online simulation loop: learn, allocate, observe, pay, account.

Each job refreshes every worker's confidence indices, allocates greedily
against the pessimistic caps, samples completion times and failure windows for
the active workers, feeds the observations back into the estimators, and
records payments and welfare.  A known-means mode pins the caps to the true
parameters, which reproduces the omniscient baseline (allocation and payment
alike) and serves as the zero-regret reference.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .allocation import Allocation, InfeasibleJob, sw_greedy, true_cap
from .estimator import EstimatorConfig, WorkerStats
from .market import (
    JobOutcome,
    MarketConfig,
    PopulationRecipe,
    WorkerProfile,
    outcome_streams,
    sample_outcome,
    sample_population,
    validate_config,
)
from .mechanism import PaymentRecord, job_payments

__all__ = [
    "JobRecord",
    "SimulationTrace",
    "Simulator",
    "run",
    "regret",
    "optimal_set_match",
    "trace_to_csv",
    "trace_summary",
    "summary_to_json",
    "trace_payments_to_csv",
]

MODES = ("learning", "known-means")


@dataclass(frozen=True)
class JobRecord:
    """Everything observed in one job step."""

    outcome: JobOutcome
    allocation: Allocation | None
    payments: PaymentRecord | None
    matches_oracle: bool


@dataclass
class SimulationTrace:
    """Per-job series plus cumulative accounting for one simulation run."""

    cfg: MarketConfig
    est: EstimatorConfig
    mode: str
    workers: list[WorkerProfile]
    oracle_fractions: np.ndarray
    oracle_cost: float
    oracle_active: frozenset[int]
    infeasible: np.ndarray
    cost: np.ndarray
    payment: np.ndarray
    active_size: np.ndarray
    match: np.ndarray
    utility_min: np.ndarray
    fraction_table: np.ndarray | None = None
    payment_table: np.ndarray | None = None
    utility_table: np.ndarray | None = None
    completion_table: np.ndarray | None = None
    window_table: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.cost.shape[0])

    @property
    def completed(self) -> int:
        return int((~self.infeasible).sum())

    @property
    def job_index(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    @property
    def neg_welfare_cum(self) -> np.ndarray:
        return np.where(self.infeasible, 0.0, self.cost).cumsum()

    @property
    def payment_cum(self) -> np.ndarray:
        return np.where(self.infeasible, 0.0, self.payment).cumsum()

    @property
    def oracle_cost_cum(self) -> np.ndarray:
        return np.where(self.infeasible, 0.0, self.oracle_cost).cumsum()

    @property
    def regret_cum(self) -> np.ndarray:
        return self.neg_welfare_cum - self.oracle_cost_cum

    @property
    def regret_avg(self) -> np.ndarray:
        return self.regret_cum / self.job_index


class Simulator:
    """Owns the learning state and RNG streams of one run."""

    def __init__(
        self,
        cfg: MarketConfig,
        recipe: PopulationRecipe,
        est_cfg: EstimatorConfig | None = None,
        mode: str = "learning",
        record_tables: bool = True,
    ) -> None:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.cfg = validate_config(cfg)
        self.est = (est_cfg or EstimatorConfig.defaults(cfg)).validate(cfg)
        self.mode = mode
        self.record_tables = record_tables

        self.workers = sample_population(cfg, recipe)
        self.costs = np.array([w.cost for w in self.workers])
        self.true_caps = np.array(
            [true_cap(w.mjct, w.mttf, cfg.D, cfg.epsilon) for w in self.workers]
        )
        # Oracle feasibility is a precondition of the whole run.
        self.oracle = sw_greedy(self.costs, self.true_caps)
        self.oracle_cost = float(self.costs @ self.oracle.fractions)
        self.oracle_active = self.oracle.active_set

        self.stats = [
            WorkerStats.initial(self.est, cfg.rho_bounds, cfg.beta_bounds)
            for _ in range(cfg.n)
        ]
        self.streams = outcome_streams(cfg)
        self._rows: list[tuple] = []
        self._tables: list[tuple] = []

    def current_caps(self, t: int) -> np.ndarray:
        """Caps used for job ``t``; refreshes indices in learning mode."""
        if self.mode == "known-means":
            return self.true_caps
        caps = np.empty(self.cfg.n)
        for i, s in enumerate(self.stats):
            s.refresh_indices(t, self.est)
            caps[i] = s.pessimistic_cap(self.cfg.D, self.cfg.epsilon)
        return caps

    def step(self, t: int) -> JobRecord:
        """Run job ``t`` (1-based) and append it to the trace."""
        cfg = self.cfg
        caps = self.current_caps(t)
        try:
            alloc = sw_greedy(self.costs, caps)
        except InfeasibleJob:
            outcome = JobOutcome(
                job_index=t,
                allocation=np.zeros(cfg.n),
                completion_times={},
                failed_in_window={},
                infeasible=True,
            )
            self._append_row(t, None, None, outcome)
            return JobRecord(outcome, None, None, matches_oracle=False)

        rec = job_payments(
            alloc, caps, self.costs, cfg.cost_bounds[1], true_costs=self.costs, job_index=t
        )

        completion: dict[int, float] = {}
        windows: dict[int, bool | None] = {}
        for i in np.nonzero(alloc.fractions > 0)[0]:
            i = int(i)
            frac = float(alloc.fractions[i])
            tau, flag = sample_outcome(
                self.workers[i],
                frac,
                self.streams[i],
                sigma_log=cfg.sigma_log,
                delta=cfg.delta,
            )
            completion[i] = tau
            windows[i] = flag
            if self.mode == "learning":
                self.stats[i].record_jct_sample(tau, frac)
                if flag is not None:
                    self.stats[i].record_window(flag)

        outcome = JobOutcome(
            job_index=t,
            allocation=alloc.fractions.copy(),
            completion_times=completion,
            failed_in_window=windows,
        )
        self._append_row(t, alloc, rec, outcome)
        return JobRecord(outcome, alloc, rec, matches_oracle=bool(self._rows[-1][6]))

    def _append_row(
        self,
        t: int,
        alloc: Allocation | None,
        rec: PaymentRecord | None,
        outcome: JobOutcome,
    ) -> None:
        if alloc is None:
            row = (True, math.nan, math.nan, 0, math.nan, False)
            tables = None
        else:
            cost_t = float(self.costs @ alloc.fractions)
            pay_t = float(rec.payments.sum())
            active = alloc.active_set
            row = (
                False,
                cost_t,
                pay_t,
                len(active),
                float(rec.utilities.min()),
                active == self.oracle_active,
            )
            tables = (alloc.fractions, rec.payments, rec.utilities, outcome)
        self._rows.append((t,) + row)
        if self.record_tables:
            self._tables.append(tables)

    def trace(self) -> SimulationTrace:
        m = len(self._rows)
        infeasible = np.array([r[1] for r in self._rows], dtype=bool)
        cost = np.array([r[2] for r in self._rows])
        payment = np.array([r[3] for r in self._rows])
        active_size = np.array([r[4] for r in self._rows], dtype=int)
        utility_min = np.array([r[5] for r in self._rows])
        match = np.array([r[6] for r in self._rows], dtype=bool)

        tables: dict[str, np.ndarray | None] = {
            "fraction_table": None,
            "payment_table": None,
            "utility_table": None,
            "completion_table": None,
            "window_table": None,
        }
        if self.record_tables:
            n = self.cfg.n
            frac = np.zeros((m, n))
            pay = np.zeros((m, n))
            util = np.zeros((m, n))
            comp = np.full((m, n), math.nan)
            wind = np.zeros((m, n), dtype=np.int8)  # -1 unobserved, 0 clean, 1 failed
            for ti, entry in enumerate(self._tables):
                if entry is None:
                    continue
                fractions, payments, utilities, outcome = entry
                frac[ti] = fractions
                pay[ti] = payments
                util[ti] = utilities
                for wid, tau in outcome.completion_times.items():
                    comp[ti, wid] = tau
                for wid, flag in outcome.failed_in_window.items():
                    wind[ti, wid] = -1 if flag is None else int(flag)
            tables = {
                "fraction_table": frac,
                "payment_table": pay,
                "utility_table": util,
                "completion_table": comp,
                "window_table": wind,
            }

        return SimulationTrace(
            cfg=self.cfg,
            est=self.est,
            mode=self.mode,
            workers=self.workers,
            oracle_fractions=self.oracle.fractions.copy(),
            oracle_cost=self.oracle_cost,
            oracle_active=self.oracle_active,
            infeasible=infeasible,
            cost=cost,
            payment=payment,
            active_size=active_size,
            match=match,
            utility_min=utility_min,
            **tables,
        )


def run(
    cfg: MarketConfig,
    recipe: PopulationRecipe,
    est_cfg: EstimatorConfig | None = None,
    mode: str = "learning",
    record_tables: bool = True,
) -> SimulationTrace:
    """Execute all ``cfg.T`` jobs and return the trace."""
    sim = Simulator(cfg, recipe, est_cfg=est_cfg, mode=mode, record_tables=record_tables)
    for t in range(1, cfg.T + 1):
        sim.step(t)
    return sim.trace()


def regret(trace: SimulationTrace, oracle_alloc: Allocation | None = None):
    """Total regret and the running-average series against the oracle.

    Regret is oriented as incurred cost minus oracle cost, so it is
    non-negative whenever the oracle is optimal for the instance.
    """
    costs = np.array([w.cost for w in trace.workers])
    oracle_cost = (
        trace.oracle_cost if oracle_alloc is None else float(costs @ oracle_alloc.fractions)
    )
    per_job = np.where(trace.infeasible, 0.0, trace.cost - oracle_cost)
    cum = per_job.cumsum()
    avg = cum / trace.job_index if len(trace) else np.array([])
    total = float(cum[-1]) if len(trace) else 0.0
    return total, avg


def optimal_set_match(trace: SimulationTrace, oracle_alloc: Allocation | None = None):
    """Per-job set-match flags and the first job index after which they stay true.

    Returns ``(flags, t_lock)`` with ``t_lock`` 1-based, or ``None`` when the
    final job still mismatches.
    """
    if oracle_alloc is None:
        flags = trace.match.copy()
    else:
        if trace.fraction_table is None:
            raise ValueError("recomputing match flags requires record_tables=True")
        target = oracle_alloc.active_set
        flags = np.array(
            [
                (not trace.infeasible[ti])
                and frozenset(np.nonzero(trace.fraction_table[ti] > 0)[0]) == target
                for ti in range(len(trace))
            ],
            dtype=bool,
        )
    if len(flags) == 0 or not flags[-1]:
        return flags, None
    false_idx = np.nonzero(~flags)[0]
    t_lock = 1 if false_idx.size == 0 else int(false_idx[-1]) + 2
    return flags, t_lock


def trace_to_csv(trace: SimulationTrace, path: str | Path) -> None:
    """Write the per-job series with stable full-precision formatting."""
    path = Path(path)
    neg_w = trace.neg_welfare_cum
    pay = trace.payment_cum
    oracle = trace.oracle_cost_cum
    ravg = trace.regret_avg
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            [
                "t",
                "neg_social_welfare_cum",
                "payment_cum",
                "oracle_cost_cum",
                "active_set_size",
                "optimal_set_match",
                "regret_avg",
            ]
        )
        for ti in range(len(trace)):
            writer.writerow(
                [
                    ti + 1,
                    repr(float(neg_w[ti])),
                    repr(float(pay[ti])),
                    repr(float(oracle[ti])),
                    int(trace.active_size[ti]),
                    int(trace.match[ti]),
                    repr(float(ravg[ti])),
                ]
            )


def trace_payments_to_csv(trace: SimulationTrace, path: str | Path) -> None:
    """Per-worker payment rows (t, worker, fraction, payment, utility)."""
    if trace.fraction_table is None:
        raise ValueError("payment export requires record_tables=True")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "worker", "fraction", "payment", "utility"])
        for ti in range(len(trace)):
            if trace.infeasible[ti]:
                continue
            active = np.nonzero(trace.fraction_table[ti] > 0)[0]
            for wid in active:
                writer.writerow(
                    [
                        ti + 1,
                        int(wid),
                        repr(float(trace.fraction_table[ti, wid])),
                        repr(float(trace.payment_table[ti, wid])),
                        repr(float(trace.utility_table[ti, wid])),
                    ]
                )


def trace_summary(trace: SimulationTrace) -> dict:
    """Final statistics plus a config echo, JSON-serializable."""
    total, avg = regret(trace)
    _, t_lock = optimal_set_match(trace)
    m = len(trace)
    return {
        "config": asdict(trace.cfg),
        "estimator": asdict(trace.est),
        "mode": trace.mode,
        "jobs_attempted": m,
        "jobs_completed": trace.completed,
        "jobs_infeasible": int(trace.infeasible.sum()),
        "oracle_cost_per_job": trace.oracle_cost,
        "oracle_active_size": len(trace.oracle_active),
        "neg_social_welfare_total": float(trace.neg_welfare_cum[-1]) if m else 0.0,
        "payment_total": float(trace.payment_cum[-1]) if m else 0.0,
        "regret_total": total,
        "regret_avg_final": float(avg[-1]) if m else 0.0,
        "min_utility": float(np.nanmin(trace.utility_min)) if trace.completed else 0.0,
        "first_stable_match": t_lock,
        "final_active_size": int(trace.active_size[-1]) if m else 0,
    }


def summary_to_json(summary: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
