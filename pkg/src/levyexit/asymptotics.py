"""Leading-order exit rate predictors and the constrained minimization behind them.

The rate laws come in five flavours (see :class:`Regime`).  In the
sub-exponential regime a single big jump triggers the exit, in the
super-exponential regime several jumps of comparable size cooperate; which one
wins is decided by the minimum of ``sum f(x_i)`` over ``sum x_i = a``, which is
why the simplex minimizers live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import DomainError, InfeasibleError
from .measures import TailKind, TailSpec, log_tail, quantile, tail_mass

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_FEAS_TOL = 1e-12


class Regime(str, Enum):
    POWER_TAIL = "PowerTail"
    SUB_EXP = "SubExp"
    SUPER_EXP = "SuperExp"
    BOUNDED_SUB_EXP = "BoundedSubExp"
    GAUSSIAN = "Gaussian"

    @classmethod
    def parse(cls, name: str) -> "Regime":
        aliases = {
            "powertail": cls.POWER_TAIL,
            "power": cls.POWER_TAIL,
            "subexp": cls.SUB_EXP,
            "superexp": cls.SUPER_EXP,
            "bounded": cls.BOUNDED_SUB_EXP,
            "boundedsubexp": cls.BOUNDED_SUB_EXP,
            "gaussian": cls.GAUSSIAN,
        }
        key = str(name).replace("_", "").replace("-", "").lower()
        if key in aliases:
            return aliases[key]
        raise DomainError(f"unknown regime {name!r}")


@dataclass(frozen=True)
class RatePrediction:
    """Predicted exit rate constant and leading-order ``ln E sigma``.

    ``log_mean_exit == -ln(rate_constant)`` whenever the constant is defined.
    """

    regime: Regime
    rate_constant: Optional[float]
    log_mean_exit: float
    exponent_detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "regime": self.regime.value,
            "rate_constant": self.rate_constant,
            "log_mean_exit": self.log_mean_exit,
            "exponent_detail": dict(self.exponent_detail),
        }


# -- d_alpha ----------------------------------------------------------------


def d_alpha_closed(alpha: float) -> float:
    if not alpha > 1:
        raise DomainError(f"d_alpha needs alpha > 1, got {alpha}")
    return alpha * (alpha - 1.0) ** (1.0 / alpha - 1.0)


def golden_section_min(fun: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12):
    """Minimize a unimodal function on ``[lo, hi]``; returns ``(x, fun(x))``."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
        if d <= c:
            # interval collapsed below floating point resolution
            break
    x = 0.5 * (a + b)
    return x, fun(x)


def d_alpha_variational(alpha: float, *, return_minimizer: bool = False):
    """``inf_{y > 0} (y**(1 - alpha) + y)`` by golden-section search on [1e-6, 1e6]."""
    if not alpha > 1:
        raise DomainError(f"d_alpha needs alpha > 1, got {alpha}")
    y, val = golden_section_min(lambda y: y ** (1.0 - alpha) + y, 1e-6, 1e6, 1e-12)
    return (val, y) if return_minimizer else val


# -- simplex minimization ----------------------------------------------------


def _floor_inv(theta: float) -> int:
    return int(math.floor(1.0 / theta + 1e-12))


def phi(theta: float, alpha: float) -> float:
    """Cost of the cheapest multi-jump climb when single jumps are capped at ``theta``."""
    if not theta > 0:
        raise DomainError(f"phi needs theta > 0, got {theta}")
    if math.isinf(theta):
        return 1.0
    n = _floor_inv(theta)
    rest = 1.0 - n * theta
    tail = rest**alpha if rest > _FEAS_TOL else 0.0
    return n * theta**alpha + tail


def _check_feasible(a: float, theta: float, k: int) -> None:
    if k < 1:
        raise DomainError(f"need k >= 1, got {k}")
    if not a > 0:
        raise DomainError(f"need a > 0, got {a}")
    if not theta > 0:
        raise DomainError(f"need theta > 0, got {theta}")
    if not math.isinf(theta) and k * theta < 1.0 - _FEAS_TOL:
        raise InfeasibleError(f"k={k} coordinates capped at theta*a={theta * a} cannot sum to a={a}")


def simplex_min_closed(alpha: float, a: float, theta: float, k: int) -> float:
    """``inf sum x_i**alpha`` over ``sum x_i = a``, ``0 <= x_i <= theta*a``, in closed form."""
    _check_feasible(a, theta, k)
    if not alpha > 0:
        raise DomainError(f"need alpha > 0, got {alpha}")
    if alpha <= 1.0:
        if theta >= 1.0:
            return a**alpha
        n = _floor_inv(theta)
        rest = a - n * theta * a
        tail = rest**alpha if rest > _FEAS_TOL * a else 0.0
        return n * (theta * a) ** alpha + tail
    return k * (a / k) ** alpha


def _eval_objective(objective: Callable, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(objective(x), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(objective(float(v))) for v in x])


def simplex_min_brute(
    objective: Callable,
    a: float,
    theta: float,
    k: int,
    grid_n: int,
    *,
    lower: float = 0.0,
    upper: Optional[float] = None,
) -> float:
    """Exact minimum of ``sum objective(x_i)`` over a discretized simplex.

    Coordinates take the values ``lower + j*h`` with ``h = (a - k*lower)/grid_n``,
    subject to ``sum x_i = a`` and ``x_i <= min(theta*a, upper)``.  Since the
    objective is separable and symmetric, the search over sorted grid tuples is
    carried out by dynamic programming over partial sums, which visits the
    same finite set exhaustively in O(k * grid_n**2).
    """
    if grid_n < 1:
        raise DomainError("grid_n must be positive")
    _check_feasible(a, theta if upper is None else math.inf, k)
    cap_value = theta * a
    if upper is not None:
        cap_value = min(cap_value, upper)
    span = a - k * lower
    if span < -_FEAS_TOL * max(a, 1.0):
        raise InfeasibleError(f"k={k} coordinates >= {lower} exceed the total {a}")
    span = max(span, 0.0)
    if k == 1:
        if a > cap_value * (1 + 1e-12) or a < lower:
            raise InfeasibleError("single coordinate violates its bounds")
        return float(_eval_objective(objective, np.array([a]))[0])
    if span == 0.0:
        return float(k * _eval_objective(objective, np.array([lower]))[0])
    h = span / grid_n
    cap = grid_n if math.isinf(cap_value) else int(math.floor((cap_value - lower) / h + 1e-9))
    cap = min(cap, grid_n)
    if cap < 0 or k * cap < grid_n:
        raise InfeasibleError(f"box cap {cap_value} too small for k={k}, a={a}")
    levels = lower + h * np.arange(cap + 1)
    cost = _eval_objective(objective, levels)

    # best[s]: minimal cost of the coordinates placed so far summing to s grid units
    best = np.full(grid_n + 1, np.inf)
    best[: cap + 1] = cost
    idx = np.arange(grid_n + 1)[:, None] - np.arange(cap + 1)[None, :]
    valid = idx >= 0
    idx = np.where(valid, idx, 0)
    for _ in range(k - 1):
        best = np.where(valid, best[idx] + cost[None, :], np.inf).min(axis=1)
    return float(best[grid_n])


def box_simplex_min(
    objective: Callable,
    total: float,
    k: int,
    lower: float,
    upper: float,
    *,
    grid_n: int = 200,
) -> float:
    """Minimum of ``sum objective(x_i)`` over ``sum x_i = total``, ``lower <= x_i <= upper``.

    Candidates: every vertex of the feasible polytope (optimal for concave
    objectives), the equal split (optimal for convex ones), the exhaustive
    grid minimum and a local SLSQP polish of the best candidate.
    """
    if k * lower > total * (1 + 1e-12) or k * upper < total * (1 - 1e-12):
        raise InfeasibleError(f"no point with {k} coordinates in [{lower}, {upper}] sums to {total}")
    f = lambda x: float(np.sum(_eval_objective(objective, np.asarray(x, dtype=float))))
    candidates = [np.full(k, total / k)]
    # vertices: k-1 coordinates at a bound, the remaining one takes the rest
    for n_hi in range(k):
        rest = total - n_hi * upper - (k - 1 - n_hi) * lower
        if lower - 1e-12 <= rest <= upper + 1e-12:
            candidates.append(np.array([upper] * n_hi + [lower] * (k - 1 - n_hi) + [rest]))
    values = [f(c) for c in candidates]
    best_x = candidates[int(np.argmin(values))]
    best = min(values)
    if k > 1:
        grid_best = simplex_min_brute(
            objective, total, math.inf, k, grid_n, lower=lower, upper=upper
        )
        best = min(best, grid_best)
        res = optimize.minimize(
            f,
            best_x,
            method="SLSQP",
            bounds=[(lower, upper)] * k,
            constraints=[{"type": "eq", "fun": lambda x: np.sum(x) - total}],
        )
        if res.success and abs(np.sum(res.x) - total) < 1e-9 * max(total, 1.0):
            x = np.clip(res.x, lower, upper)
            if np.all(np.isfinite(x)):
                best = min(best, f(x))
    return float(best)


# -- rate predictors -----------------------------------------------------------


def _tail_index(spec: Optional[TailSpec], alpha: Optional[float]) -> float:
    if alpha is not None:
        return float(alpha)
    if spec is None or spec.alpha is None:
        raise DomainError("this regime needs a tail index alpha (pass it explicitly for TableTail)")
    return float(spec.alpha)


def rate_constant(
    spec: Optional[TailSpec],
    eps: float,
    regime,
    theta: Optional[float] = None,
    *,
    barriers: Optional[tuple[float, float]] = None,
    alpha: Optional[float] = None,
) -> RatePrediction:
    """Leading-order rate prediction for noise intensity ``eps``.

    The predictor always uses the untruncated measure; for the bounded-jump
    regime the truncation level enters only through ``theta``.
    """
    regime = regime if isinstance(regime, Regime) else Regime.parse(regime)
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    detail: dict = {"eps": eps}

    if regime is Regime.GAUSSIAN:
        if barriers is None:
            raise DomainError("Gaussian regime needs barrier heights (U(-1), U(1))")
        height = min(barriers)
        if not height > 0:
            raise DomainError("barrier heights must be positive")
        log_mean = 2.0 * height / eps**2
        detail["barrier_height"] = height
        return RatePrediction(regime, math.exp(-log_mean), log_mean, detail)

    if spec is None:
        raise DomainError(f"{regime.value} regime needs a jump measure")
    nu = spec.untruncated()
    inv = 1.0 / eps
    if inv < nu.edge:
        raise DomainError(f"1/eps={inv} lies below the support edge {nu.edge}")

    if regime is Regime.POWER_TAIL:
        if nu.kind is not TailKind.POWER_LAW:
            raise DomainError("PowerTail regime needs a PowerLaw measure")
        r = nu.r_power
        c = 2.0 * eps**r
        detail["r"] = r
        return RatePrediction(regime, c, math.log(eps ** (-r) / 2.0), detail)

    a = _tail_index(nu, alpha)
    f_inv = float(log_tail(nu, inv))
    detail["f_inv_eps"] = f_inv
    detail["alpha"] = a

    if regime is Regime.SUB_EXP:
        if not a < 1:
            raise DomainError(f"SubExp regime needs alpha < 1, got {a}")
        c = 2.0 * float(tail_mass(nu, inv))
        detail["leading_exponent"] = f_inv
        return RatePrediction(regime, c, math.log(0.5) + f_inv, detail)

    if regime is Regime.SUPER_EXP:
        if not a > 1:
            raise DomainError(f"SuperExp regime needs alpha > 1, got {a}")
        q = quantile(nu, eps)
        da = d_alpha_closed(a)
        exponent = da * abs(math.log(eps)) / (eps * q)
        detail.update(q_eps=q, d_alpha=da, leading_exponent=exponent)
        return RatePrediction(regime, math.exp(-exponent), exponent, detail)

    # bounded sub-exponential
    if not a < 1:
        raise DomainError(f"BoundedSubExp regime needs alpha < 1, got {a}")
    if theta is None:
        raise DomainError("BoundedSubExp regime needs theta")
    ph = phi(theta, a)
    exponent = ph * f_inv
    detail.update(phi=ph, theta=theta, leading_exponent=exponent)
    return RatePrediction(regime, math.exp(-exponent), exponent, detail)


def lemma31_bounds(C: float, T: float, t: float) -> tuple[float, float]:
    """Survival bounds from short-interval exit probabilities.

    ``upper = exp(-C t) / (1 - C T)`` holds when every start exits within
    ``T`` with probability at least ``C T``; ``lower = (1 - C T) *
    exp(t ln(1 - C T) / T)`` holds when exit starts within ``T`` have
    probability at most ``C T``.
    """
    if not (C > 0 and T > 0):
        raise DomainError("C and T must be positive")
    if not t >= 0:
        raise DomainError("t must be nonnegative")
    ct = C * T
    if ct >= 1.0:
        raise DomainError(f"C*T = {ct} must be < 1")
    upper = math.exp(-C * t) / (1.0 - ct)
    lower = (1.0 - ct) * math.exp(t * math.log1p(-ct) / T)
    return max(upper, 0.0), max(lower, 0.0)
