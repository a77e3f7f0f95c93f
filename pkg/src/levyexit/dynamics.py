"""Gradient flows perturbed by scaled Lévy noise, and their first exit from (-1, 1).

Two simulation modes are available:

``PdmpExact``
    For a pure-jump, finite-activity driver without drift the state follows
    the deterministic flow between jumps, so a path is simulated event by
    event at a cost proportional to its number of jumps.  Between jumps
    ``|X|`` can only shrink, hence exits happen at jump instants.

``EulerJumpAdapted``
    Jumps above ``ar_threshold`` are simulated exactly; smaller ones are
    replaced by a Brownian motion with the same variance.  Drift and Gaussian
    increments are integrated with an explicit Euler scheme on a grid of step
    ``step_h``, refined by the jump times.

Both modes draw large jumps from one dedicated random stream in the same
chunks, so with ``ar_threshold`` at the support edge they see identical jump
sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numba
import numpy as np

from .errors import ConfigurationError, ParameterError
from .measures import LevyTriplet, mass_above, sample_large_jumps, second_moment_below

_GRID_POINTS = 1001
_RK4_MAX_STEP = 0.01
# jump chunks grow geometrically: short paths waste little, long ones amortize bisection
_JUMP_CHUNK_FIRST = 64
_JUMP_CHUNK_MAX = 16384


class PotentialKind(str, Enum):
    QUADRATIC = "Quadratic"
    QUARTIC = "Quartic"
    CUSTOM = "CustomGradient"


@dataclass(frozen=True)
class AssumptionReport:
    passed: bool
    origin_ok: bool
    sign_violations: list
    lipschitz_estimate: float
    lipschitz_ok: bool

    def __bool__(self):
        return self.passed


@dataclass(frozen=True)
class Potential:
    """Potential ``U`` given through its derivative ``U'``.

    ``U'`` must vanish at the origin, point away from it on (-1, 1) and be
    Lipschitz.  Custom gradients are checked on construction unless
    ``check=False`` is passed to :meth:`custom`.
    """

    kind: PotentialKind
    gradient: Optional[Callable[[float], float]] = field(default=None, compare=False)
    lipschitz: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if self.kind is PotentialKind.CUSTOM and self.gradient is None:
            raise ParameterError("CustomGradient potential needs a gradient function")

    @classmethod
    def quadratic(cls) -> "Potential":
        return cls(PotentialKind.QUADRATIC, lipschitz=1.0)

    @classmethod
    def quartic(cls) -> "Potential":
        return cls(PotentialKind.QUARTIC, lipschitz=3.0)

    @classmethod
    def custom(cls, gradient, lipschitz=None, *, check=True) -> "Potential":
        pot = cls(PotentialKind.CUSTOM, gradient=gradient, lipschitz=lipschitz)
        if check:
            report = check_assumption_U(pot)
            if not report.passed:
                raise ParameterError(f"gradient violates the potential assumptions: {report}")
        return pot

    @classmethod
    def from_json(cls, obj) -> "Potential":
        kind = obj["kind"] if isinstance(obj, dict) else obj
        if kind == PotentialKind.QUADRATIC.value:
            return cls.quadratic()
        if kind == PotentialKind.QUARTIC.value:
            return cls.quartic()
        raise ParameterError(f"potential {kind!r} cannot be built from JSON")

    def to_json(self) -> dict:
        if self.kind is PotentialKind.CUSTOM:
            raise ParameterError("custom potentials are not serializable")
        return {"kind": self.kind.value}

    def grad(self, x: float) -> float:
        if self.kind is PotentialKind.QUADRATIC:
            return x
        if self.kind is PotentialKind.QUARTIC:
            return x * x * x
        return float(self.gradient(x))


def check_assumption_U(pot: Potential) -> AssumptionReport:
    """Grid check of ``U'(0) = 0``, ``x U'(x) > 0`` on (-1, 1) and the Lipschitz bound."""
    xs = np.linspace(-1.0, 1.0, _GRID_POINTS)
    g = np.array([pot.grad(float(x)) for x in xs])
    origin_ok = abs(pot.grad(0.0)) <= 1e-12
    interior = (np.abs(xs) < 1.0) & (xs != 0.0)
    bad = interior & ~(xs * g > 0)
    slopes = np.abs(np.diff(g)) / np.diff(xs)
    lip = float(slopes.max())
    lip_ok = pot.lipschitz is None or lip <= pot.lipschitz * (1 + 1e-6) + 1e-12
    violations = [float(x) for x in xs[bad]]
    return AssumptionReport(origin_ok and not violations and lip_ok, origin_ok, violations, lip, lip_ok)


def ode_flow(pot: Potential, x: float, dt: float) -> float:
    """State of ``y' = -U'(y)`` after time ``dt`` started from ``x``."""
    if dt < 0:
        raise ParameterError("dt must be nonnegative")
    if pot.kind is PotentialKind.QUADRATIC:
        return x * math.exp(-dt)
    if x == 0.0 or dt == 0.0:
        return x
    n = max(1, math.ceil(dt / _RK4_MAX_STEP))
    h = dt / n
    grad = pot.grad
    y = x
    for _ in range(n):
        k1 = -grad(y)
        k2 = -grad(y + 0.5 * h * k1)
        k3 = -grad(y + 0.5 * h * k2)
        k4 = -grad(y + h * k3)
        y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    if y * x < 0:
        return 0.0
    return math.copysign(min(abs(y), abs(x)), x)


# -- simulation -------------------------------------------------------------------


class Mode(str, Enum):
    PDMP_EXACT = "PdmpExact"
    EULER_JUMP_ADAPTED = "EulerJumpAdapted"

    @classmethod
    def parse(cls, name) -> "Mode":
        if isinstance(name, Mode):
            return name
        key = str(name).replace("_", "").replace("-", "").lower()
        if key in ("pdmpexact", "pdmp"):
            return cls.PDMP_EXACT
        if key in ("eulerjumpadapted", "euler"):
            return cls.EULER_JUMP_ADAPTED
        raise ConfigurationError(f"unknown simulation mode {name!r}")


class ExitSide(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"
    CENSORED = "Censored"


@dataclass(frozen=True)
class SimConfig:
    eps: float
    x0: float = 0.0
    t_max: float = 1e4
    mode: Mode = Mode.PDMP_EXACT
    step_h: float = 0.01
    cutoff_g: Optional[float] = None
    ar_threshold: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if not self.eps >= 0:
            raise ConfigurationError(f"eps must be >= 0, got {self.eps}")
        if not abs(self.x0) < 1:
            raise ConfigurationError(f"x0 must lie in (-1, 1), got {self.x0}")
        if not self.t_max > 0:
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}")
        if not self.step_h > 0:
            raise ConfigurationError(f"step_h must be positive, got {self.step_h}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def resolved_cutoff(self, edge: float) -> float:
        if self.cutoff_g is not None:
            return max(float(self.cutoff_g), edge)
        if self.eps > 0:
            return max(edge, 1.0 / (2.0 * self.eps))
        return max(edge, 1.0)


@dataclass(frozen=True)
class ExitRecord:
    exit_time: Optional[float]
    exit_side: ExitSide
    n_large_jumps: int
    seed: int

    @property
    def censored(self) -> bool:
        return self.exit_side is ExitSide.CENSORED


class _JumpStream:
    """Chunked source of (interarrival, jump) pairs of a compound Poisson process."""

    def __init__(self, nu, threshold, rate, rng):
        self.nu, self.threshold, self.rate, self.rng = nu, threshold, rate, rng

    def __iter__(self):
        n = _JUMP_CHUNK_FIRST
        while True:
            gaps = self.rng.exponential(1.0 / self.rate, n)
            sizes = sample_large_jumps(self.nu, self.threshold, self.rng, n)
            yield from zip(gaps.tolist(), sizes.tolist())
            n = min(2 * n, _JUMP_CHUNK_MAX)


def _streams(seed: int):
    jump_ss, diffusion_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(jump_ss), np.random.default_rng(diffusion_ss)


def _side(x: float) -> ExitSide:
    return ExitSide.RIGHT if x > 0 else ExitSide.LEFT


def pdmp_exit_from_events(
    pot: Potential, x0: float, eps: float, events, t_max: float, cutoff_g: float = math.inf
):
    """Run the event-driven recursion over ``(interarrival, jump)`` pairs.

    Returns ``(exit_time or None, side, n_large_jumps)``.
    """
    x, t, n_large = x0, 0.0, 0
    quadratic = pot.kind is PotentialKind.QUADRATIC
    for tau, w in events:
        t_next = t + tau
        if t_next > t_max:
            break
        x = x * math.exp(-tau) if quadratic else ode_flow(pot, x, tau)
        x += eps * w
        t = t_next
        if abs(w) > cutoff_g:
            n_large += 1
        if abs(x) >= 1.0:
            return t, _side(x), n_large
    return None, ExitSide.CENSORED, n_large


def _make_euler_advance(drift, normal):
    def advance(x, t, t_stop, h, mu_eps, sig):
        # explicit Euler on the global grid k*h, stopping exactly at t_stop
        while t < t_stop:
            nxt = (math.floor(t / h + 1e-9) + 1.0) * h
            if nxt > t_stop:
                nxt = t_stop
            dt = nxt - t
            if dt <= 0.0:
                t = t_stop
                break
            x = x + (mu_eps - drift(x)) * dt
            if sig > 0.0:
                x = x + sig * math.sqrt(dt) * normal()
            t = nxt
            if abs(x) >= 1.0:
                return x, t, True
        return x, t, False

    return advance


@numba.njit(cache=True)
def _drift_quadratic(x):
    return x


@numba.njit(cache=True)
def _drift_quartic(x):
    return x * x * x


@numba.njit(cache=True)
def _numba_normal():
    return np.random.standard_normal()


@numba.njit(cache=True)
def _numba_seed(s):
    np.random.seed(s)


_EULER_KERNELS = {
    PotentialKind.QUADRATIC: numba.njit(_make_euler_advance(_drift_quadratic, _numba_normal)),
    PotentialKind.QUARTIC: numba.njit(_make_euler_advance(_drift_quartic, _numba_normal)),
}


def _simulate_pdmp(triplet: LevyTriplet, pot: Potential, cfg: SimConfig, trace):
    nu = triplet.nu
    if triplet.d > 0:
        raise ConfigurationError("PdmpExact mode needs d = 0 (no Gaussian part)")
    if not nu.finite_activity:
        raise ConfigurationError("PdmpExact mode needs a finite-activity jump measure")
    if triplet.mu != 0:
        raise ConfigurationError("PdmpExact mode needs mu = 0 (exits only at jumps)")
    edge = nu.edge
    rate = mass_above(nu, edge)
    g = cfg.resolved_cutoff(edge)
    if rate <= 0:
        return ExitRecord(None, ExitSide.CENSORED, 0, cfg.seed)
    jump_rng, _ = _streams(cfg.seed)
    events = iter(_JumpStream(nu, edge, rate, jump_rng))
    if trace is not None:
        events = _tracing(events, trace, g)
    t, side, n_large = pdmp_exit_from_events(pot, cfg.x0, cfg.eps, events, cfg.t_max, g)
    return ExitRecord(t, side, n_large, cfg.seed)


def _tracing(events, trace, g):
    t = 0.0
    for tau, w in events:
        t += tau
        if abs(w) > g:
            trace.append((t, w))
        yield tau, w


def _simulate_euler(triplet: LevyTriplet, pot: Potential, cfg: SimConfig, trace):
    nu = triplet.nu
    edge = nu.edge
    g = cfg.resolved_cutoff(edge)
    ar = g if cfg.ar_threshold is None else max(float(cfg.ar_threshold), edge)
    if not ar > 0:
        raise ConfigurationError("ar_threshold must be positive for infinite-activity measures")
    d_eff = triplet.d + second_moment_below(nu, ar)
    rate = mass_above(nu, ar)
    sig = cfg.eps * math.sqrt(d_eff)
    mu_eps = cfg.eps * triplet.mu
    jump_rng, diffusion_rng = _streams(cfg.seed)

    if pot.kind in _EULER_KERNELS:
        advance = _EULER_KERNELS[pot.kind]
        _numba_seed(int(diffusion_rng.integers(2**32)))
    else:
        advance = _make_euler_advance(pot.grad, diffusion_rng.standard_normal)

    if rate > 0:
        events = iter(_JumpStream(nu, ar, rate, jump_rng))
    else:
        events = iter(())
    x, t, n_large = cfg.x0, 0.0, 0
    t_max, h, eps = cfg.t_max, cfg.step_h, cfg.eps
    for tau, w in events:
        s = t + tau
        x, t, out = advance(x, t, min(s, t_max), h, mu_eps, sig)
        if out:
            return ExitRecord(t, _side(x), n_large, cfg.seed)
        if s > t_max:
            return ExitRecord(None, ExitSide.CENSORED, n_large, cfg.seed)
        x += eps * w
        if abs(w) > g:
            n_large += 1
            if trace is not None:
                trace.append((s, w))
        if abs(x) >= 1.0:
            return ExitRecord(s, _side(x), n_large, cfg.seed)
    x, t, out = advance(x, t, t_max, h, mu_eps, sig)
    if out:
        return ExitRecord(t, _side(x), n_large, cfg.seed)
    return ExitRecord(None, ExitSide.CENSORED, n_large, cfg.seed)


def simulate_exit(
    triplet: LevyTriplet, pot: Potential, cfg: SimConfig, *, trace: Optional[list] = None
) -> ExitRecord:
    """Simulate one path from ``cfg.x0`` until ``|X| >= 1`` or ``cfg.t_max``.

    The outcome depends only on ``(triplet, pot, cfg)``.  If ``trace`` is a
    list, the large jumps (above the cutoff) are appended to it as
    ``(time, size)`` pairs.
    """
    if cfg.eps == 0:
        return ExitRecord(None, ExitSide.CENSORED, 0, cfg.seed)
    if cfg.mode is Mode.PDMP_EXACT:
        return _simulate_pdmp(triplet, pot, cfg, trace)
    return _simulate_euler(triplet, pot, cfg, trace)
