"""Symmetric Lévy jump measures described through their upper tail.

A measure is fixed by its upper tail ``T(u) = nu([u, inf))``; symmetry gives
the lower tail.  Everything else (log-tail, quantiles, cutoff masses, the
conditional law of large jumps, small-jump second moments) is derived from
``T`` alone.

Four families are supported:

* ``ExpPower``: ``T(u) = exp(-c * u**alpha * log(e + u)**p)`` for ``u >= u0``
  and no mass on ``(0, u0)``.
* ``TemperedStable``: density ``exp(-lam*|y|**alpha) * |y|**(-1-beta)``, full
  support (infinite activity near zero).
* ``PowerLaw``: ``T(u) = u**(-r)`` for ``u >= u0``.
* ``TableTail``: log-linear interpolation of user supplied ``(u, T(u))``
  knots, extrapolated with the slope of the last segment.

Any of them can be truncated to ``[-b, b]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, ParameterError, SamplerError

#: absolute tolerance of every bisection inversion
BISECT_TOL = 1e-10
#: relative tolerance of tail quadratures
QUAD_RTOL = 1e-8

_MAX_BISECT_ITER = 400


class TailKind(str, Enum):
    EXP_POWER = "ExpPower"
    TEMPERED_STABLE = "TemperedStable"
    POWER_LAW = "PowerLaw"
    TABLE = "TableTail"


@dataclass(frozen=True)
class TailSpec:
    """Parametric description of a symmetric jump measure.

    Use the ``exp_power``/``tempered_stable``/``power_law``/``table_tail``
    constructors rather than filling fields by hand.
    """

    kind: TailKind
    alpha: Optional[float] = None
    scale_c: float = 1.0
    log_power_p: float = 0.0
    lam: Optional[float] = None
    beta_stable: Optional[float] = None
    r_power: Optional[float] = None
    u0: float = 1.0
    trunc: Optional[float] = None
    table: Optional[tuple[tuple[float, float], ...]] = None
    _table_arrays: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = TailKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.trunc is not None and not self.trunc > 0:
            raise ParameterError(f"truncation bound must be positive, got {self.trunc}")
        if kind in (TailKind.EXP_POWER, TailKind.POWER_LAW) and not self.u0 > 0:
            raise ParameterError(f"support edge u0 must be positive, got {self.u0}")
        if kind is TailKind.EXP_POWER:
            if self.alpha is None or not self.alpha > 0:
                raise ParameterError(f"ExpPower needs alpha > 0, got {self.alpha}")
            if not self.scale_c > 0:
                raise ParameterError(f"ExpPower needs c > 0, got {self.scale_c}")
        elif kind is TailKind.TEMPERED_STABLE:
            if self.alpha is None or not self.alpha > 0:
                raise ParameterError(f"TemperedStable needs alpha > 0, got {self.alpha}")
            if self.lam is None or not self.lam > 0:
                raise ParameterError(f"TemperedStable needs lambda > 0, got {self.lam}")
            if self.beta_stable is None or not 0 < self.beta_stable < 2:
                raise ParameterError(
                    f"TemperedStable needs beta in (0, 2), got {self.beta_stable}"
                )
        elif kind is TailKind.POWER_LAW:
            if self.r_power is None or not self.r_power > 0:
                raise ParameterError(f"PowerLaw needs r > 0, got {self.r_power}")
        elif kind is TailKind.TABLE:
            if not self.table or len(self.table) < 2:
                raise ParameterError("TableTail needs at least two (u, tail) knots")
            us = np.array([float(k[0]) for k in self.table])
            ts = np.array([float(k[1]) for k in self.table])
            if us[0] <= 0 or np.any(np.diff(us) <= 0):
                raise ParameterError("TableTail knots must be positive and strictly increasing")
            if np.any(ts <= 0) or np.any(np.diff(ts) >= 0):
                raise ParameterError("TableTail tails must be positive and strictly decreasing")
            object.__setattr__(self, "table", tuple((float(u), float(t)) for u, t in self.table))
            object.__setattr__(self, "_table_arrays", (us, -np.log(ts)))

    # -- constructors -----------------------------------------------------

    @classmethod
    def exp_power(cls, alpha, c=1.0, p=0.0, u0=1.0, trunc=None) -> "TailSpec":
        return cls(TailKind.EXP_POWER, alpha=alpha, scale_c=c, log_power_p=p, u0=u0, trunc=trunc)

    @classmethod
    def tempered_stable(cls, lam, alpha, beta, trunc=None) -> "TailSpec":
        return cls(
            TailKind.TEMPERED_STABLE, alpha=alpha, lam=lam, beta_stable=beta, u0=0.0, trunc=trunc
        )

    @classmethod
    def power_law(cls, r, u0=1.0, trunc=None) -> "TailSpec":
        return cls(TailKind.POWER_LAW, r_power=r, u0=u0, trunc=trunc)

    @classmethod
    def table_tail(cls, knots: Sequence[tuple[float, float]], trunc=None) -> "TailSpec":
        knots = tuple((float(u), float(t)) for u, t in knots)
        return cls(TailKind.TABLE, table=knots, u0=knots[0][0] if knots else 1.0, trunc=trunc)

    # -- derived ----------------------------------------------------------

    @property
    def edge(self) -> float:
        """Lower edge of the jump support (0 for infinite activity)."""
        if self.kind is TailKind.TEMPERED_STABLE:
            return 0.0
        if self.kind is TailKind.TABLE:
            return self._table_arrays[0][0]
        return float(self.u0)

    @property
    def finite_activity(self) -> bool:
        return self.edge > 0

    def untruncated(self) -> "TailSpec":
        return replace(self, trunc=None)

    def truncated(self, bound: float) -> "TailSpec":
        """Restrict to ``[-bound, bound]`` (intersected with any existing truncation)."""
        b = float(bound) if self.trunc is None else min(float(bound), self.trunc)
        return replace(self, trunc=b)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind.value}
        if self.kind is TailKind.EXP_POWER:
            out.update(alpha=self.alpha, c=self.scale_c, p=self.log_power_p, u0=self.u0)
        elif self.kind is TailKind.TEMPERED_STABLE:
            out.update(alpha=self.alpha, **{"lambda": self.lam, "beta": self.beta_stable})
        elif self.kind is TailKind.POWER_LAW:
            out.update(r=self.r_power, u0=self.u0)
        else:
            out["table"] = [list(k) for k in self.table]
        out["trunc"] = self.trunc
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TailSpec":
        allowed = {"kind", "alpha", "c", "p", "lambda", "beta", "r", "u0", "trunc", "table"}
        unknown = set(obj) - allowed
        if unknown:
            raise ParameterError(f"unknown measure fields: {sorted(unknown)}")
        if "kind" not in obj:
            raise ParameterError("measure JSON needs a 'kind' field")
        try:
            kind = TailKind(obj["kind"])
        except ValueError:
            raise ParameterError(f"unknown measure kind {obj['kind']!r}") from None
        trunc = obj.get("trunc")
        if kind is TailKind.EXP_POWER:
            return cls.exp_power(
                obj.get("alpha"), obj.get("c", 1.0), obj.get("p", 0.0), obj.get("u0", 1.0), trunc
            )
        if kind is TailKind.TEMPERED_STABLE:
            return cls.tempered_stable(obj.get("lambda"), obj.get("alpha"), obj.get("beta"), trunc)
        if kind is TailKind.POWER_LAW:
            return cls.power_law(obj.get("r"), obj.get("u0", 1.0), trunc)
        return cls.table_tail(obj.get("table") or (), trunc)


@dataclass(frozen=True)
class LevyTriplet:
    """Generating triplet (Gaussian variance ``d``, jump measure ``nu``, drift ``mu``)."""

    d: float
    nu: TailSpec
    mu: float = 0.0

    def __post_init__(self):
        if not self.d >= 0:
            raise ParameterError(f"Gaussian variance must be >= 0, got {self.d}")

    @property
    def finite_activity(self) -> bool:
        return self.nu.finite_activity


# -- untruncated log-tail -------------------------------------------------


def _tempered_log_tail(spec: TailSpec, u: float) -> float:
    # T(u) = int_u^inf exp(-lam y^a) y^(-1-b) dy, with y = u e^s factored so
    # that the quadrature only sees an O(1) integrand.
    lam, a, b = spec.lam, spec.alpha, spec.beta_stable
    lu = lam * u**a

    def integrand(s):
        x = a * s
        if x > 700.0:
            return 0.0
        return math.exp(-lu * math.expm1(x) - b * s)

    val, _ = integrate.quad(integrand, 0.0, math.inf, epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
    return lu + b * math.log(u) - math.log(val)


def _log_tail0(spec: TailSpec, u: np.ndarray) -> np.ndarray:
    """Untruncated ``f(u) = -ln T(u)`` for ``u`` already clamped to the support edge."""
    kind = spec.kind
    if kind is TailKind.EXP_POWER:
        f = spec.scale_c * u**spec.alpha
        if spec.log_power_p != 0.0:
            f = f * np.log(math.e + u) ** spec.log_power_p
        return f
    if kind is TailKind.POWER_LAW:
        return spec.r_power * np.log(u)
    if kind is TailKind.TEMPERED_STABLE:
        flat = np.array([_tempered_log_tail(spec, float(x)) for x in u.ravel()])
        return flat.reshape(u.shape)
    us, fs = spec._table_arrays
    slope = (fs[-1] - fs[-2]) / (us[-1] - us[-2])
    inside = np.interp(u, us, fs)
    return np.where(u > us[-1], fs[-1] + slope * (u - us[-1]), inside)


def _log_tail_array(spec: TailSpec, u: np.ndarray) -> np.ndarray:
    u = np.maximum(np.asarray(u, dtype=float), spec.edge)
    f = _log_tail0(spec, u)
    if spec.trunc is None:
        return f
    b = spec.trunc
    fb = float(_log_tail0(spec, np.array(max(b, spec.edge))))
    with np.errstate(divide="ignore", invalid="ignore"):
        # -ln(T0(u) - T0(b)) = f0(u) - ln(1 - exp(f0(u) - f0(b)))
        g = f - np.log1p(-np.exp(f - fb))
    return np.where(u >= b, np.inf, g)


def _scalar_or_array(x: np.ndarray, like) -> Any:
    return float(x) if np.ndim(like) == 0 else x


# -- public operations ------------------------------------------------------


def log_tail(spec: TailSpec, u):
    """``f(u) = -ln nu([u, inf))``; ``+inf`` beyond the truncation bound."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr < spec.edge) or np.any(arr <= 0):
        raise DomainError(f"log_tail needs u >= {spec.edge} (and u > 0)")
    return _scalar_or_array(_log_tail_array(spec, arr), u)


def tail_mass(spec: TailSpec, u):
    """``nu([u, inf))``.  Constant below the support edge, zero past truncation."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("tail_mass needs u > 0")
    return _scalar_or_array(np.exp(-_log_tail_array(spec, arr)), u)


def quantile(spec: TailSpec, eps: float) -> float:
    """Largest ``u`` with ``nu([u, inf)) >= eps``.

    If ``eps`` exceeds the whole positive mass the support edge is returned
    instead of raising, so that sweeps with large ``eps`` stay runnable.
    """
    if not eps > 0:
        raise DomainError(f"quantile needs eps > 0, got {eps}")
    level = -math.log(eps)
    edge = spec.edge
    if edge > 0:
        if float(_log_tail_array(spec, np.array(edge))) >= level:
            return edge
        lo = edge
    else:
        lo = 1.0
        while float(_log_tail_array(spec, np.array(lo))) > level:
            lo *= 0.5
    return float(_bisect_level(spec, np.array([level]), np.array([lo]))[0])


def _bisect_level(spec: TailSpec, level: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """Solve ``f(u) = level`` for ``u >= lo`` elementwise (requires ``f(lo) <= level``)."""
    lo = lo.astype(float).copy()
    hi = np.maximum(2.0 * lo, lo + 1.0)
    if spec.trunc is not None:
        hi = np.minimum(hi, spec.trunc)
    for _ in range(_MAX_BISECT_ITER):
        short = _log_tail_array(spec, hi) < level
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
        if spec.trunc is not None:
            hi = np.minimum(hi, spec.trunc)
    for _ in range(_MAX_BISECT_ITER):
        width = hi - lo
        if np.all(width <= np.maximum(BISECT_TOL, 4 * np.spacing(hi))):
            break
        mid = 0.5 * (lo + hi)
        below = _log_tail_array(spec, mid) < level
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def mass_above(spec: TailSpec, g: float) -> float:
    """``beta = nu([-g, g]^c)``; the total mass when ``g`` is below the support edge."""
    if spec.edge == 0 and not g > 0:
        raise DomainError("infinite-activity measure has infinite mass above g <= 0")
    return 2.0 * float(tail_mass(spec, max(g, spec.edge)))


def large_jumps_from_uniforms(spec: TailSpec, g: float, v, signs) -> np.ndarray:
    """Map uniforms ``v`` in (0, 1] and signs to jumps with law ``nu`` restricted to ``|y| >= g``.

    ``|W| = f^{-1}(f(g) - ln v)``, inverted by bisection.
    """
    g = max(float(g), spec.edge)
    if mass_above(spec, g) <= 0:
        raise SamplerError(f"no jump mass above g={g}")
    v = np.asarray(v, dtype=float)
    fg = float(_log_tail_array(spec, np.array(g)))
    level = fg - np.log(v)
    mag = _bisect_level(spec, np.atleast_1d(level), np.full(np.size(level), g))
    mag = np.maximum(mag, g)
    return (np.asarray(signs) * mag.reshape(np.shape(v))).astype(float)


def sample_large_jumps(spec: TailSpec, g: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` i.i.d. jumps from ``nu`` restricted to ``|y| >= g`` and normalized."""
    v = 1.0 - rng.random(size)
    signs = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return large_jumps_from_uniforms(spec, g, v, signs)


def sample_large_jump(spec: TailSpec, g: float, rng: np.random.Generator) -> float:
    return float(sample_large_jumps(spec, g, rng, 1)[0])


def second_moment_below(spec: TailSpec, g: float) -> float:
    """``int_{0 < |y| <= g} y^2 nu(dy)``, computed from the tail by parts."""
    edge = spec.edge
    if g < edge:
        raise DomainError(f"second_moment_below needs g >= {edge}")
    top = g if spec.trunc is None else min(g, spec.trunc)
    if top <= edge:
        return 0.0

    def y_tail(y):
        return y * float(tail_mass(spec, y))

    integral, _ = integrate.quad(y_tail, edge, top, epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
    edge_term = edge**2 * float(tail_mass(spec, edge)) if edge > 0 else 0.0
    one_side = -(g**2) * float(tail_mass(spec, g)) + edge_term + 2.0 * integral
    return 2.0 * max(one_side, 0.0)
