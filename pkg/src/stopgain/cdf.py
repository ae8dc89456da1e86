"""Closed-form distribution of the trading gain, with and without the stop.

Every probability here reduces to combinations of the standard normal CDF
evaluated at log-price arguments.  Branch selection is explicit: each CDF
value carries a tag naming the piece of the piecewise law that produced it,
so tests and reports can assert not just the number but the route.

Internals evaluate the normal-CDF arguments from logarithms directly, which
keeps every expression finite for feedback gains far above one (stress-tested
up to k = 50) where the intermediate growth factors would overflow.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, RegimeError
from .model import MarketParams, Regime, TradeSpec, g_star, g_star_t, require_stop, timid_floor, z_star

__all__ = [
    "ShorthandContext",
    "CdfQuery",
    "CdfValue",
    "std_normal_cdf",
    "big_x",
    "a_of_x",
    "b_of_x_t",
    "cdf_no_stop",
    "stopping_time_cdf",
    "joint_survival",
    "omega",
    "theta",
    "joint_cdf_stopped",
    "joint_cdf_unstopped",
    "cdf_with_stop",
]

_SQRT2 = math.sqrt(2.0)

BRANCH_FLOOR = "floor"
BRANCH_MIDDLE = "middle"
BRANCH_UPPER = "upper"
BRANCH_NO_STOP = "no-stop"


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function.

    Double-precision accurate (absolute error well under 1e-15) and saturates
    cleanly to 0 and 1 in the tails, including at infinite arguments.
    """
    return 0.5 * math.erfc(-x / _SQRT2)


@dataclass(frozen=True)
class ShorthandContext:
    """Validated (market, trade) pair with the derived quantities cached.

    ``z_star`` is the reflection weight and ``drift_rate`` the log-price
    drift ``mu - sigma**2/2``; both are recomputable bit-for-bit from the
    source parameters.  A context without a stop order (``s_star is None``)
    supports only the no-stop operations.
    """

    market: MarketParams
    trade: TradeSpec
    z_star: float = field(init=False)
    drift_rate: float = field(init=False)

    def __post_init__(self):
        if self.trade.s_star is not None:
            require_stop(self.trade, self.market)
            object.__setattr__(self, "z_star", z_star(self.market, self.trade))
        else:
            object.__setattr__(self, "z_star", math.nan)
        object.__setattr__(self, "drift_rate", self.market.drift_rate)

    @property
    def has_stop(self) -> bool:
        return self.trade.s_star is not None

    def _stop(self) -> float:
        if self.trade.s_star is None:
            raise ParameterError("operation requires a stop order but s_star is None")
        return self.trade.s_star

    @property
    def log_s0_over_star(self) -> float:
        return math.log(self.market.s0 / self._stop())


@dataclass(frozen=True)
class CdfQuery:
    """Point query of a gain CDF: level ``x`` at horizon ``t > 0``."""

    x: float
    t: float

    def __post_init__(self):
        if not np.isfinite(self.x):
            raise ParameterError(f"x must be finite (got {self.x})")
        if not (np.isfinite(self.t) and self.t > 0):
            raise ParameterError(f"t must be > 0 (got {self.t})")


@dataclass(frozen=True)
class CdfValue:
    """Probability together with the branch of the piecewise law used."""

    p: float
    branch: str

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p must lie in [0, 1] (got {self.p})")


def _phi_at_log(ctx: ShorthandContext, log_z: float, t: float) -> float:
    """Normal CDF of ``(log_z + drift_rate * t) / (sigma * sqrt(t))``."""
    return std_normal_cdf((log_z + ctx.drift_rate * t) / (ctx.market.sigma * math.sqrt(t)))


def big_x(z: float, t: float, ctx: ShorthandContext) -> float:
    """Standardized log-price coordinate ``(ln z + (mu - sigma^2/2) t) / (sigma sqrt(t))``."""
    if not z > 0:
        raise DomainError(f"z must be > 0 (got {z})")
    if not t > 0:
        raise DomainError(f"t must be > 0 (got {t})")
    return (math.log(z) + ctx.drift_rate * t) / (ctx.market.sigma * math.sqrt(t))


def a_of_x(x: float, ctx: ShorthandContext) -> float:
    """Time at which the stopped-gain level curve reaches ``x`` (k != 1).

    Inverts ``g_star_t``: the result ``A`` satisfies ``g_star_t(A) == x``.
    Zero exactly at the curve's ``t = 0`` value, positive on the stopped side
    of it and negative on the survivor side.
    """
    tr, m = ctx.trade, ctx.market
    if tr.k == 1:
        raise RegimeError("a_of_x is undefined for k = 1 (the level curve is flat)")
    if not x > -tr.u0 / tr.k:
        raise DomainError(f"x must exceed -u0/k = {-tr.u0 / tr.k} (got {x})")
    log_arg = tr.k * ctx.log_s0_over_star + math.log1p(tr.k * x / tr.u0)
    return -2.0 * log_arg / (m.sigma**2 * tr.k * (tr.k - 1.0))


def _log_b(x: float, t: float, ctx: ShorthandContext) -> float:
    """log of the price level whose no-stop gain at time t equals x."""
    tr, m = ctx.trade, ctx.market
    return (math.log1p(tr.k * x / tr.u0) - 0.5 * m.sigma**2 * (tr.k - tr.k**2) * t) / tr.k


def b_of_x_t(x: float, t: float, ctx: ShorthandContext) -> float:
    """Price ratio ``S(t)/s0`` at which the no-stop gain equals ``x``.

    ``((k x / u0 + 1) * exp(-sigma^2 (k - k^2) t / 2)) ** (1/k)``, evaluated
    through logarithms.
    """
    tr = ctx.trade
    if not x > -tr.u0 / tr.k:
        raise DomainError(f"x must exceed -u0/k = {-tr.u0 / tr.k} (got {x})")
    if not t > 0:
        raise DomainError(f"t must be > 0 (got {t})")
    return math.exp(_log_b(x, t, ctx))


def cdf_no_stop(q: CdfQuery, ctx: ShorthandContext) -> CdfValue:
    """CDF of the always-active rule's gain at horizon ``q.t``.

    Zero at and below ``-u0/k`` (the rule can never lose more than that);
    above it, one normal tail of the standardized terminal log price.
    """
    tr = ctx.trade
    if q.x <= -tr.u0 / tr.k:
        return CdfValue(0.0, BRANCH_FLOOR)
    p = 1.0 - _phi_at_log(ctx, -_log_b(q.x, q.t, ctx), q.t)
    return CdfValue(min(max(p, 0.0), 1.0), BRANCH_NO_STOP)


def omega(t: float, ctx: ShorthandContext) -> float:
    """Probability that the stop has not fired by time ``t``; ``omega(0) == 1``."""
    if t < 0:
        raise DomainError(f"t must be >= 0 (got {t})")
    if t == 0:
        return 1.0
    log_ratio = ctx.log_s0_over_star
    return _phi_at_log(ctx, log_ratio, t) - ctx.z_star * _phi_at_log(ctx, -log_ratio, t)


def stopping_time_cdf(t: float, ctx: ShorthandContext) -> float:
    """CDF of the first time the price touches the stop level; 0 at ``t = 0``."""
    if t < 0:
        raise DomainError(f"t must be >= 0 (got {t})")
    return 1.0 - omega(t, ctx)


def joint_survival(x_price: float, t: float, ctx: ShorthandContext) -> float:
    """P(price at ``t`` is >= ``x_price`` and the stop never fired by ``t``).

    Survivor tail minus the reflection image weighted by ``z_star``.
    """
    if not x_price > 0:
        raise DomainError(f"x_price must be > 0 (got {x_price})")
    if not t > 0:
        raise DomainError(f"t must be > 0 (got {t})")
    return _joint_survival_log(math.log(ctx.market.s0 / x_price), t, ctx)


def _joint_survival_log(log_s0_over_x: float, t: float, ctx: ShorthandContext) -> float:
    log_image = log_s0_over_x - 2.0 * ctx.log_s0_over_star
    p = _phi_at_log(ctx, log_s0_over_x, t) - ctx.z_star * _phi_at_log(ctx, log_image, t)
    return min(max(p, 0.0), 1.0)


def theta(x: float, t: float, ctx: ShorthandContext) -> float:
    """P(no stop by ``t`` and the no-stop gain at ``t`` is at least ``x``).

    The survivor-branch tail of the gain law: ``joint_survival`` evaluated at
    the price level whose gain equals ``x``.
    """
    tr = ctx.trade
    if not x > -tr.u0 / tr.k:
        raise DomainError(f"x must exceed -u0/k = {-tr.u0 / tr.k} (got {x})")
    if not t > 0:
        raise DomainError(f"t must be > 0 (got {t})")
    return _joint_survival_log(-_log_b(x, t, ctx), t, ctx)


def _junction(ctx: ShorthandContext) -> float:
    """Gain level where the stopped band meets the survivor band (k != 1)."""
    tr = ctx.trade
    return (tr.u0 / tr.k) * math.expm1(-tr.k * ctx.log_s0_over_star)


def joint_cdf_stopped(x: float, t: float, ctx: ShorthandContext) -> float:
    """P(gain at ``t`` is <= ``x`` and the stop fired by ``t``), k != 1."""
    tr, m = ctx.trade, ctx.market
    regime = Regime.of(tr.k)
    if regime is Regime.BUY_AND_HOLD:
        raise RegimeError("joint_cdf_stopped requires k != 1")
    if not t > 0:
        raise DomainError(f"t must be > 0 (got {t})")
    if regime is Regime.BOLD:
        if x <= g_star_t(tr, m, t):
            return 0.0
        if x >= _junction(ctx):
            return min(max(1.0 - omega(t, ctx), 0.0), 1.0)
        a = max(a_of_x(x, ctx), 0.0)
        return min(max(omega(a, ctx) - omega(t, ctx), 0.0), 1.0)
    # timid: the stop loses money monotonically in its firing time
    if x <= timid_floor(tr, m):
        return 0.0
    if x >= g_star_t(tr, m, t):
        return min(max(stopping_time_cdf(t, ctx), 0.0), 1.0)
    a = max(a_of_x(x, ctx), 0.0)
    return min(max(stopping_time_cdf(a, ctx), 0.0), 1.0)


def joint_cdf_unstopped(x: float, t: float, ctx: ShorthandContext) -> float:
    """P(gain at ``t`` is <= ``x`` and the stop never fired by ``t``), k != 1."""
    tr, m = ctx.trade, ctx.market
    regime = Regime.of(tr.k)
    if regime is Regime.BUY_AND_HOLD:
        raise RegimeError("joint_cdf_unstopped requires k != 1")
    if not t > 0:
        raise DomainError(f"t must be > 0 (got {t})")
    level = g_star_t(tr, m, t)
    if regime is Regime.BOLD:
        if x <= level:
            return 0.0
    else:
        if x < level:
            return 0.0
    return min(max(omega(t, ctx) - theta(x, t, ctx), 0.0), 1.0)


def cdf_with_stop(q: CdfQuery, ctx: ShorthandContext) -> CdfValue:
    """CDF of the stop-protected rule's gain at horizon ``q.t``.

    Piecewise by regime.  ``k = 1`` (dispatched on exact equality): an atom at
    the locked-in stop loss, then a reflected lognormal tail.  ``k > 1``: zero
    at and below the stop level curve, a stopped band up to the junction, then
    the survivor branch.  ``0 < k < 1``: zero at and below the hard floor, a
    stopped band below the level curve, then the survivor branch.
    """
    tr, m = ctx.trade, ctx.market
    x, t = q.x, q.t
    regime = Regime.of(tr.k)

    if regime is Regime.BUY_AND_HOLD:
        floor = g_star(tr, m)
        if x < floor:
            return CdfValue(0.0, BRANCH_FLOOR)
        log_z = math.log(tr.u0) - math.log(x + tr.u0)
        log_image = log_z - 2.0 * ctx.log_s0_over_star
        p = 1.0 - _phi_at_log(ctx, log_z, t) + ctx.z_star * _phi_at_log(ctx, log_image, t)
        return CdfValue(min(max(p, 0.0), 1.0), BRANCH_UPPER)

    if regime is Regime.BOLD:
        if x <= g_star_t(tr, m, t):
            return CdfValue(0.0, BRANCH_FLOOR)
        if x >= _junction(ctx):
            p = 1.0 - theta(x, t, ctx)
            return CdfValue(min(max(p, 0.0), 1.0), BRANCH_UPPER)
        a = max(a_of_x(x, ctx), 0.0)
        p = omega(a, ctx) - theta(x, t, ctx)
        return CdfValue(min(max(p, 0.0), 1.0), BRANCH_MIDDLE)

    if x <= timid_floor(tr, m):
        return CdfValue(0.0, BRANCH_FLOOR)
    if x < g_star_t(tr, m, t):
        a = max(a_of_x(x, ctx), 0.0)
        return CdfValue(min(max(stopping_time_cdf(a, ctx), 0.0), 1.0), BRANCH_MIDDLE)
    p = 1.0 - theta(x, t, ctx)
    return CdfValue(min(max(p, 0.0), 1.0), BRANCH_UPPER)
