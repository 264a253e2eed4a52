"""Market model: configuration, worker populations, and stochastic job outcomes.

A market instance is described by a :class:`MarketConfig` (global bounds and
design parameters) plus a :class:`PopulationRecipe` (how the ``n`` workers are
partitioned into groups and which parameter ranges each group draws from).
Worker job-completion times are log-normal with a known mean and configurable
log-scale shape; times to failure are exponential.

Both objects can be read from a plain-text ``key = value`` config file, see
:func:`load_config` for the schema.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "InvalidConfig",
    "InvalidRecipe",
    "MarketConfig",
    "WorkerProfile",
    "BidProfile",
    "JobOutcome",
    "PopulationGroup",
    "PopulationRecipe",
    "validate_config",
    "sample_population",
    "sample_outcome",
    "population_streams",
    "outcome_streams",
    "load_config",
    "population_to_csv",
]


class InvalidConfig(ValueError):
    """A market or estimator configuration violates one of its invariants."""


class InvalidRecipe(ValueError):
    """A population recipe is inconsistent with its market configuration."""


Bounds = tuple[float, float]


@dataclass(frozen=True)
class MarketConfig:
    """Global parameters of one market instance.

    ``delta`` is the length of the failure-observation window opened at the
    start of each allocated task; it must sit strictly below the smallest
    possible mean time to failure.
    """

    n: int
    T: int
    D: float
    epsilon: float
    delta: float
    cost_bounds: Bounds
    rho_bounds: Bounds
    beta_bounds: Bounds
    sigma_log: float = 0.25
    seed: int = 0


@dataclass(frozen=True)
class WorkerProfile:
    """Ground truth of one simulated worker: cost, mean JCT, mean TTF."""

    id: int
    cost: float
    mjct: float
    mttf: float


@dataclass(frozen=True)
class BidProfile:
    """Announced costs, one per worker, in worker-id order."""

    bids: tuple[float, ...]

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.bids, dtype=float)

    def validate(self, cfg: MarketConfig) -> "BidProfile":
        if len(self.bids) != cfg.n:
            raise InvalidConfig(f"bid profile has {len(self.bids)} entries, expected n={cfg.n}")
        lo, hi = cfg.cost_bounds
        for b in self.bids:
            if not lo <= b <= hi:
                raise InvalidConfig(f"bid {b} outside cost bounds [{lo}, {hi}]")
        return self


@dataclass(frozen=True)
class JobOutcome:
    """Realized allocation and per-worker performance for one job.

    ``completion_times`` and ``failed_in_window`` are keyed by worker id and
    cover allocated workers only.  A ``None`` failure flag means the worker's
    realized working duration fell short of the observation window, so the
    window was not observed.
    """

    job_index: int
    allocation: np.ndarray
    completion_times: dict[int, float]
    failed_in_window: dict[int, bool | None]
    infeasible: bool = False


@dataclass(frozen=True)
class PopulationGroup:
    """One homogeneous slice of the population; ranges may be degenerate."""

    count: int
    cost_range: Bounds
    rho_range: Bounds
    beta_range: Bounds


@dataclass(frozen=True)
class PopulationRecipe:
    groups: tuple[PopulationGroup, ...]

    @property
    def total(self) -> int:
        return sum(g.count for g in self.groups)


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise InvalidConfig(message)


def validate_config(cfg: MarketConfig) -> MarketConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise InvalidConfig."""
    c_lo, c_hi = cfg.cost_bounds
    r_lo, r_hi = cfg.rho_bounds
    b_lo, b_hi = cfg.beta_bounds
    _check(cfg.n >= 1, f"worker count must be >= 1, got {cfg.n}")
    _check(cfg.T >= 0, f"job count must be >= 0, got {cfg.T}")
    _check(0 < c_lo <= c_hi, f"cost bounds must satisfy 0 < lo <= hi, got [{c_lo}, {c_hi}]")
    _check(0 < r_lo <= r_hi, f"rho bounds must satisfy 0 < lo <= hi, got [{r_lo}, {r_hi}]")
    _check(0 < b_lo <= b_hi, f"beta bounds must satisfy 0 < lo <= hi, got [{b_lo}, {b_hi}]")
    _check(0 < cfg.epsilon < 1, f"epsilon must lie strictly in (0, 1), got {cfg.epsilon}")
    _check(cfg.D > 0, f"deadline must be positive, got {cfg.D}")
    _check(
        0 < cfg.delta < b_lo,
        f"observation window delta must satisfy 0 < delta < beta lower bound, "
        f"got delta={cfg.delta}, beta_lo={b_lo}",
    )
    _check(cfg.sigma_log >= 0, f"sigma_log must be >= 0, got {cfg.sigma_log}")
    return cfg


def _validate_recipe(cfg: MarketConfig, recipe: PopulationRecipe) -> None:
    if recipe.total != cfg.n:
        raise InvalidRecipe(f"recipe covers {recipe.total} workers, config says n={cfg.n}")
    for gi, g in enumerate(recipe.groups):
        if g.count <= 0:
            raise InvalidRecipe(f"group {gi}: count must be positive, got {g.count}")
        for name, (lo, hi), bounds in (
            ("cost", g.cost_range, cfg.cost_bounds),
            ("rho", g.rho_range, cfg.rho_bounds),
            ("beta", g.beta_range, cfg.beta_bounds),
        ):
            if not lo <= hi:
                raise InvalidRecipe(f"group {gi}: {name} range [{lo}, {hi}] is inverted")
            if lo < bounds[0] or hi > bounds[1]:
                raise InvalidRecipe(
                    f"group {gi}: {name} range [{lo}, {hi}] exceeds config bounds "
                    f"[{bounds[0]}, {bounds[1]}]"
                )


def population_streams(cfg: MarketConfig) -> np.random.Generator:
    """Dedicated RNG stream for population sampling, derived from the master seed."""
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n + 1)
    return np.random.default_rng(children[0])


def outcome_streams(cfg: MarketConfig) -> list[np.random.Generator]:
    """One independent outcome stream per worker.

    Streams are spawned from the master seed, so changing which workers get
    allocated (and hence how many draws each stream serves) never perturbs
    another worker's sequence.  This is what makes paired bid-deviation
    comparisons exact.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n + 1)
    return [np.random.default_rng(c) for c in children[1:]]


def sample_population(cfg: MarketConfig, recipe: PopulationRecipe) -> list[WorkerProfile]:
    """Draw the worker population; deterministic given ``cfg.seed``.

    Per worker the draws are taken in the order cost, mjct, mttf, uniformly
    from the group's ranges (degenerate ranges give constants).
    """
    validate_config(cfg)
    _validate_recipe(cfg, recipe)
    rng = population_streams(cfg)
    workers: list[WorkerProfile] = []
    wid = 0
    for g in recipe.groups:
        for _ in range(g.count):
            cost = float(rng.uniform(*g.cost_range))
            mjct = float(rng.uniform(*g.rho_range))
            mttf = float(rng.uniform(*g.beta_range))
            workers.append(WorkerProfile(id=wid, cost=cost, mjct=mjct, mttf=mttf))
            wid += 1
    return workers


def sample_outcome(
    worker: WorkerProfile,
    fraction: float,
    rng: np.random.Generator,
    *,
    sigma_log: float,
    delta: float,
) -> tuple[float, bool | None]:
    """Sample one (completion time, failed-in-window flag) pair.

    The completion time is ``fraction * L`` with ``L`` log-normal of mean
    exactly ``worker.mjct`` (location ``ln mjct - sigma_log**2 / 2``).  The
    failure flag compares a fresh exponential TTF draw of mean ``worker.mttf``
    against the observation window; it is ``None`` when the realized working
    duration is shorter than the window, i.e. the window was not observed.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    location = math.log(worker.mjct) - 0.5 * sigma_log * sigma_log
    jct = float(rng.lognormal(mean=location, sigma=sigma_log))
    tau = fraction * jct
    ttf = float(rng.exponential(worker.mttf))
    if tau < delta:
        return tau, None
    return tau, bool(ttf < delta)


def population_to_csv(workers: list[WorkerProfile], path: str | Path) -> None:
    """Write the population as CSV with columns id,cost,mjct,mttf."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "cost", "mjct", "mttf"])
        for w in workers:
            writer.writerow([w.id, repr(w.cost), repr(w.mjct), repr(w.mttf)])


# --- plain-text config files -------------------------------------------------

_SCALAR_KEYS = {
    "n": int,
    "jobs": int,
    "deadline": float,
    "epsilon": float,
    "delta": float,
    "sigma_log": float,
    "seed": int,
    "cost_min": float,
    "cost_max": float,
    "rho_min": float,
    "rho_max": float,
    "beta_min": float,
    "beta_max": float,
}
_ESTIMATOR_KEYS = {"alpha": float, "u_rho": float, "u_beta": float}
_GROUP_FIELDS = ("count", "cost", "rho", "beta")


def _parse_range(raw: str, where: str) -> Bounds:
    parts = raw.split()
    if len(parts) == 1:
        v = float(parts[0])
        return (v, v)
    if len(parts) == 2:
        return (float(parts[0]), float(parts[1]))
    raise InvalidConfig(f"{where}: expected one or two numbers, got {raw!r}")


def load_config(path: str | Path) -> tuple[MarketConfig, PopulationRecipe, dict[str, float]]:
    """Read a market config and population recipe from a key/value file.

    Scalar keys: ``n``, ``jobs``, ``deadline``, ``epsilon``, ``delta``,
    ``sigma_log``, ``seed``, ``cost_min``/``cost_max``, ``rho_min``/``rho_max``,
    ``beta_min``/``beta_max``.  Worker groups use ``group.<i>.count`` plus
    ``group.<i>.cost``, ``group.<i>.rho`` and ``group.<i>.beta``, each either a
    single number or a ``lo hi`` pair.  Optional estimator overrides ``alpha``,
    ``u_rho`` and ``u_beta`` are returned in the third element.  Lines starting
    with ``#`` and blank lines are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidConfig(f"config file not found: {path}")
    scalars: dict[str, float | int] = {}
    estimator: dict[str, float] = {}
    groups: dict[int, dict[str, str]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _SCALAR_KEYS:
            try:
                scalars[key] = _SCALAR_KEYS[key](value)
            except ValueError as exc:
                raise InvalidConfig(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
        elif key in _ESTIMATOR_KEYS:
            try:
                estimator[key] = float(value)
            except ValueError as exc:
                raise InvalidConfig(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
        elif key.startswith("group."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in _GROUP_FIELDS:
                raise InvalidConfig(f"{path}:{lineno}: unknown group key {key!r}")
            try:
                idx = int(parts[1])
            except ValueError as exc:
                raise InvalidConfig(f"{path}:{lineno}: bad group index in {key!r}") from exc
            groups.setdefault(idx, {})[parts[2]] = value
        else:
            raise InvalidConfig(f"{path}:{lineno}: unknown key {key!r}")

    missing = [k for k in _SCALAR_KEYS if k not in scalars and k not in ("sigma_log", "seed")]
    if missing:
        raise InvalidConfig(f"{path}: missing keys: {', '.join(missing)}")

    cfg = MarketConfig(
        n=int(scalars["n"]),
        T=int(scalars["jobs"]),
        D=float(scalars["deadline"]),
        epsilon=float(scalars["epsilon"]),
        delta=float(scalars["delta"]),
        cost_bounds=(float(scalars["cost_min"]), float(scalars["cost_max"])),
        rho_bounds=(float(scalars["rho_min"]), float(scalars["rho_max"])),
        beta_bounds=(float(scalars["beta_min"]), float(scalars["beta_max"])),
        sigma_log=float(scalars.get("sigma_log", 0.25)),
        seed=int(scalars.get("seed", 0)),
    )

    if not groups:
        raise InvalidConfig(f"{path}: no population groups defined")
    parsed_groups = []
    for idx in sorted(groups):
        g = groups[idx]
        for fieldname in _GROUP_FIELDS:
            if fieldname not in g:
                raise InvalidConfig(f"{path}: group.{idx} is missing {fieldname}")
        parsed_groups.append(
            PopulationGroup(
                count=int(g["count"]),
                cost_range=_parse_range(g["cost"], f"group.{idx}.cost"),
                rho_range=_parse_range(g["rho"], f"group.{idx}.rho"),
                beta_range=_parse_range(g["beta"], f"group.{idx}.beta"),
            )
        )
    recipe = PopulationRecipe(groups=tuple(parsed_groups))

    validate_config(cfg)
    _validate_recipe(cfg, recipe)
    return cfg, recipe, estimator
