"""Monte Carlo sweeps over noise intensities and the statistics computed from them."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .asymptotics import RatePrediction, Regime, rate_constant
from .dynamics import ExitRecord, ExitSide, Mode, Potential, SimConfig, simulate_exit
from .errors import ConfigurationError, EstimationError, LevyExitError
from .measures import LevyTriplet, TailSpec

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
CENSOR_FLAG_LEVEL = 0.05
MIN_UNCENSORED = 30
CSV_COLUMNS = (
    "eps",
    "mean_exit",
    "ci95",
    "censored_fraction",
    "ks_stat",
    "predicted_log_rate",
    "log_mean",
    "n_left",
    "n_right",
)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, eps_index: int, path_index: int) -> int:
    """Per-path seed: ``splitmix64(splitmix64(splitmix64(master) ^ i) ^ j)``.

    Each path owns its stream, so results do not depend on how paths are
    spread over workers.
    """
    s = splitmix64(master_seed & _MASK64)
    s = splitmix64(s ^ (eps_index & _MASK64))
    return splitmix64(s ^ (path_index & _MASK64))


@dataclass(frozen=True)
class SweepPlan:
    triplet: LevyTriplet
    potential: Potential
    eps_grid: tuple
    n_paths: int
    regime: Regime
    master_seed: int = 0
    t_max: Optional[float] = None
    t_max_factor: float = 20.0
    mode: Mode = Mode.PDMP_EXACT
    step_h: float = 0.01
    cutoff_g: Optional[float] = None
    ar_threshold: Optional[float] = None
    theta: Optional[float] = None
    x0: float = 0.0
    barriers: Optional[tuple] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        regime = self.regime if isinstance(self.regime, Regime) else Regime.parse(self.regime)
        object.__setattr__(self, "regime", regime)
        if not self.eps_grid:
            raise ConfigurationError("eps_grid is empty")
        if any(e < 0 for e in self.eps_grid):
            raise ConfigurationError("eps values must be nonnegative")
        if any(b >= a for a, b in zip(self.eps_grid, self.eps_grid[1:])):
            raise ConfigurationError("eps_grid must be strictly decreasing")
        if self.n_paths < 100:
            raise ConfigurationError(f"n_paths must be >= 100, got {self.n_paths}")
        if self.t_max is None and not self.t_max_factor > 0:
            raise ConfigurationError("t_max_factor must be positive")

    def prediction(self, eps: float) -> RatePrediction:
        return rate_constant(
            self.triplet.nu, eps, self.regime, self.theta, barriers=self.barriers, alpha=self.alpha
        )

    def horizon(self, eps: float) -> float:
        if self.t_max is not None:
            return float(self.t_max)
        if eps == 0:
            raise ConfigurationError("eps = 0 needs a fixed t_max")
        return self.t_max_factor * math.exp(self.prediction(eps).log_mean_exit)

    def sim_config(self, eps_index: int, path_index: int, t_max: float) -> SimConfig:
        return SimConfig(
            eps=self.eps_grid[eps_index],
            x0=self.x0,
            t_max=t_max,
            mode=self.mode,
            step_h=self.step_h,
            cutoff_g=self.cutoff_g,
            ar_threshold=self.ar_threshold,
            seed=derive_seed(self.master_seed, eps_index, path_index),
        )

    # -- JSON ----------------------------------------------------------------

    _FIELDS = {
        "measure", "d", "mu", "potential", "eps_grid", "n_paths", "regime", "master_seed",
        "t_max", "t_max_factor", "mode", "step_h", "cutoff_g", "ar_threshold", "theta", "x0",
        "barriers", "alpha",
    }

    @classmethod
    def from_json(cls, obj: dict) -> "SweepPlan":
        unknown = set(obj) - cls._FIELDS
        if unknown:
            raise ConfigurationError(f"unknown sweep plan fields: {sorted(unknown)}")
        for key in ("measure", "eps_grid", "n_paths", "regime"):
            if key not in obj:
                raise ConfigurationError(f"sweep plan needs {key!r}")
        triplet = LevyTriplet(
            float(obj.get("d", 0.0)), TailSpec.from_json(obj["measure"]), float(obj.get("mu", 0.0))
        )
        barriers = obj.get("barriers")
        return cls(
            triplet=triplet,
            potential=Potential.from_json(obj.get("potential", {"kind": "Quadratic"})),
            eps_grid=tuple(obj["eps_grid"]),
            n_paths=int(obj["n_paths"]),
            regime=obj["regime"],
            master_seed=int(obj.get("master_seed", 0)),
            t_max=obj.get("t_max"),
            t_max_factor=float(obj.get("t_max_factor", 20.0)),
            mode=obj.get("mode", Mode.PDMP_EXACT),
            step_h=float(obj.get("step_h", 0.01)),
            cutoff_g=obj.get("cutoff_g"),
            ar_threshold=obj.get("ar_threshold"),
            theta=obj.get("theta"),
            x0=float(obj.get("x0", 0.0)),
            barriers=tuple(barriers) if barriers is not None else None,
            alpha=obj.get("alpha"),
        )

    def to_json(self) -> dict:
        return {
            "measure": self.triplet.nu.to_json(),
            "d": self.triplet.d,
            "mu": self.triplet.mu,
            "potential": self.potential.to_json(),
            "eps_grid": list(self.eps_grid),
            "n_paths": self.n_paths,
            "regime": self.regime.value,
            "master_seed": self.master_seed,
            "t_max": self.t_max,
            "t_max_factor": self.t_max_factor,
            "mode": self.mode.value,
            "step_h": self.step_h,
            "cutoff_g": self.cutoff_g,
            "ar_threshold": self.ar_threshold,
            "theta": self.theta,
            "x0": self.x0,
            "barriers": list(self.barriers) if self.barriers is not None else None,
            "alpha": self.alpha,
        }


# -- batch execution ------------------------------------------------------------


def _run_chunk(args):
    plan, eps_index, start, stop, t_max = args
    out = []
    for i in range(start, stop):
        cfg = plan.sim_config(eps_index, i, t_max)
        try:
            out.append(simulate_exit(plan.triplet, plan.potential, cfg))
        except LevyExitError as exc:
            raise ConfigurationError(
                f"grid point eps[{eps_index}]={plan.eps_grid[eps_index]}, path {i}: {exc}"
            ) from exc
    return eps_index, start, out


def run_batch(plan: SweepPlan, workers: int = 1, chunk_size: int = 50) -> list:
    """Simulate ``n_paths`` exits per grid point; returns ``[(eps, [ExitRecord, ...]), ...]``.

    The output is identical for any ``workers``: path seeds come from
    :func:`derive_seed` and results are reassembled by (eps index, path index).
    """
    horizons = [plan.horizon(e) for e in plan.eps_grid]
    tasks = [
        (plan, ei, s, min(s + chunk_size, plan.n_paths), horizons[ei])
        for ei in range(len(plan.eps_grid))
        for s in range(0, plan.n_paths, chunk_size)
    ]
    if workers <= 1:
        done = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_chunk, tasks))
    grouped: dict[int, dict[int, list]] = {}
    for ei, start, recs in done:
        grouped.setdefault(ei, {})[start] = recs
    result = []
    for ei, eps in enumerate(plan.eps_grid):
        recs = [r for start in sorted(grouped[ei]) for r in grouped[ei][start]]
        result.append((eps, recs))
    return result


# -- estimators -----------------------------------------------------------------


@dataclass(frozen=True)
class EstimateResult:
    eps: float
    mean_exit: float
    ci95_halfwidth: float
    censored_fraction: float
    ks_stat: float
    n_left: int
    n_right: int
    predicted_log_rate: float
    log_mean: float
    n_uncensored: int = 0

    @property
    def flagged(self) -> bool:
        return self.censored_fraction > CENSOR_FLAG_LEVEL

    def csv_row(self) -> list:
        return [
            repr(self.eps),
            repr(self.mean_exit),
            repr(self.ci95_halfwidth),
            repr(self.censored_fraction),
            repr(self.ks_stat),
            repr(self.predicted_log_rate),
            repr(self.log_mean),
            str(self.n_left),
            str(self.n_right),
        ]


def exit_times(records: Sequence[ExitRecord]) -> np.ndarray:
    return np.array([r.exit_time for r in records if not r.censored], dtype=float)


def estimate(
    records: Sequence[ExitRecord], prediction: Optional[RatePrediction], eps: Optional[float] = None
) -> EstimateResult:
    """Mean exit time over uncensored paths and the KS distance of ``sigma/mean`` to Exp(1)."""
    times = exit_times(records)
    n = len(records)
    if times.size < MIN_UNCENSORED:
        raise EstimationError(
            f"only {times.size} uncensored exits (need {MIN_UNCENSORED}); increase t_max"
        )
    mean = float(times.mean())
    sd = float(times.std(ddof=1)) if times.size > 1 else 0.0
    ks = float(stats.kstest(times / mean, "expon").statistic)
    if eps is None:
        eps = float(prediction.exponent_detail.get("eps", math.nan)) if prediction else math.nan
    return EstimateResult(
        eps=float(eps),
        mean_exit=mean,
        ci95_halfwidth=1.96 * sd / math.sqrt(times.size),
        censored_fraction=(n - times.size) / n,
        ks_stat=ks,
        n_left=sum(r.exit_side is ExitSide.LEFT for r in records),
        n_right=sum(r.exit_side is ExitSide.RIGHT for r in records),
        predicted_log_rate=prediction.log_mean_exit if prediction else math.nan,
        log_mean=math.log(mean),
        n_uncensored=int(times.size),
    )


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared}


def fit_log_rate(results: Sequence[EstimateResult], include_flagged: bool = False) -> FitResult:
    """Least-squares fit of ``ln(mean_exit)`` against the predicted log-rate."""
    use = [r for r in results if include_flagged or not r.flagged]
    use = [r for r in use if math.isfinite(r.mean_exit) and math.isfinite(r.predicted_log_rate)]
    if len(use) < 3:
        raise EstimationError(f"need >= 3 usable grid points for a fit, got {len(use)}")
    x = np.array([r.predicted_log_rate for r in use])
    y = np.array([r.log_mean for r in use])
    if np.ptp(x) <= 1e-12 * max(1.0, float(np.abs(x).max())):
        raise EstimationError("predicted log-rates do not vary across the grid")
    fit = stats.linregress(x, y)
    return FitResult(float(fit.slope), float(fit.intercept), min(1.0, float(fit.rvalue**2)))


@dataclass(frozen=True)
class SurvivalRow:
    t: float
    empirical: float
    bound: float
    margin: float
    violated: bool


@dataclass(frozen=True)
class SurvivalReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(r.violated for r in self.rows)

    @property
    def violations(self) -> list:
        return [r for r in self.rows if r.violated]


def survival_check(
    records: Sequence[ExitRecord], C: float, t_grid: Sequence[float], t_max: Optional[float] = None
) -> SurvivalReport:
    """Compare empirical ``P(sigma > t)`` with ``exp(-C t / 2)`` plus a 4-sigma binomial margin.

    Censored paths count as survivors; grid points beyond ``t_max`` are skipped.
    """
    n = len(records)
    times = np.array([math.inf if r.censored else r.exit_time for r in records])
    rows = []
    for t in t_grid:
        if t_max is not None and t > t_max:
            continue
        p = float(np.mean(times > t))
        bound = math.exp(-0.5 * C * t)
        margin = 4.0 * math.sqrt(p * (1.0 - p) / n)
        rows.append(SurvivalRow(float(t), p, bound, margin, p > bound + margin))
    return SurvivalReport(rows)


# -- sweep output -----------------------------------------------------------------


def summarize(plan: SweepPlan, batch: list) -> list:
    out = []
    for eps, recs in batch:
        pred = plan.prediction(eps) if eps > 0 else None
        try:
            out.append(estimate(recs, pred, eps))
        except EstimationError as exc:
            logger.warning("eps=%s: %s", eps, exc)
            n = len(recs)
            cf = sum(r.censored for r in recs) / n
            out.append(
                EstimateResult(
                    eps, math.nan, math.nan, cf, math.nan,
                    sum(r.exit_side is ExitSide.LEFT for r in recs),
                    sum(r.exit_side is ExitSide.RIGHT for r in recs),
                    pred.log_mean_exit if pred else math.nan, math.nan,
                    n - round(cf * n),
                )
            )
    return out


def write_sweep_csv(results: Sequence[EstimateResult], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(r.csv_row())


def write_fit_json(fit: FitResult, fh) -> None:
    json.dump(fit.to_json(), fh, indent=2, sort_keys=True)
    fh.write("\n")


def start_point_sweep(
    plan: SweepPlan, x0s: Sequence[float] = (0.0, -0.5, 0.5, -0.9, 0.9), workers: int = 1
) -> dict:
    """Rerun ``plan`` from several starting points; maps ``x0`` to its estimates."""
    return {x0: summarize(p, run_batch(p, workers)) for x0 in x0s for p in [replace(plan, x0=x0)]}
