"""Monte Carlo verification of the closed-form laws plus trajectory checks.

Comparisons are sup-distance between an empirical CDF and the closed form on
a fixed grid.  No p-values: the gain law mixes an atom (or a band) with a
continuous part, so classical goodness-of-fit distributions do not apply;
the gates are calibrated directly from the empirical-CDF concentration bound
at the batch size used.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import simulate as _sim
from .cdf import CdfQuery, ShorthandContext, cdf_no_stop, cdf_with_stop
from .errors import EmptySampleError, ParameterError
from .model import (
    MarketParams,
    Regime,
    TradeSpec,
    check_survivability,
    expected_gain_lower_bound,
    g_star,
    g_star_t,
    timid_floor,
)
from .simulate import PathGrid, run_batch

__all__ = [
    "EmpiricalCdf",
    "ComparisonReport",
    "LegResult",
    "PropertyReport",
    "FigureResult",
    "FIGURE_PARAMS",
    "empirical_cdf",
    "compare",
    "comparison_grid",
    "replicate",
    "reproduce_figure",
    "property_suite",
]

DEFAULT_SUP_GATE = 0.015  # calibrated for 50,000-path batches
DEFAULT_FIGURE_PATHS = 50_000

# the three demo parameter sets: one market, one feedback gain per regime
FIGURE_PARAMS = {
    1: dict(mu=0.5, sigma=1.0, s0=1.0, s_star=0.5, u0=1.0, k=1.0, t_end=1.0),
    2: dict(mu=0.5, sigma=1.0, s0=1.0, s_star=0.5, u0=1.0, k=2.0, t_end=1.0),
    3: dict(mu=0.5, sigma=1.0, s0=1.0, s_star=0.5, u0=1.0, k=0.5, t_end=1.0),
}


class EmpiricalCdf:
    """Right-continuous empirical CDF of a sample."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size == 0:
            raise EmptySampleError("empirical CDF requires at least one sample")
        if np.isnan(samples).any():
            raise ParameterError("samples must not contain NaN")
        self.samples = np.sort(samples)
        self.n = int(self.samples.size)

    def evaluate(self, x):
        """Fraction of samples <= x; vectorized over x."""
        out = np.searchsorted(self.samples, x, side="right") / self.n
        return float(out) if np.ndim(x) == 0 else out


def empirical_cdf(samples) -> EmpiricalCdf:
    """Build the right-continuous empirical CDF of ``samples``."""
    return EmpiricalCdf(samples)


@dataclass(frozen=True)
class ComparisonReport:
    """Empirical-vs-theory comparison on a fixed grid.

    ``residual[i] = empirical[i] - theory[i]`` and ``sup_distance`` is the
    maximum absolute residual.  ``metadata`` holds everything needed to rerun
    the comparison bit-for-bit.
    """

    grid: np.ndarray
    theory: np.ndarray
    empirical: np.ndarray
    residual: np.ndarray
    sup_distance: float
    n_samples: int
    metadata: dict


def compare(
    e: EmpiricalCdf, theory: Callable[[float], float], grid, metadata: dict | None = None
) -> ComparisonReport:
    """Evaluate both CDFs on ``grid`` and report residuals and sup-distance."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise EmptySampleError("comparison grid must not be empty")
    theory_vals = np.array([theory(float(x)) for x in grid])
    empirical_vals = e.evaluate(grid)
    residual = empirical_vals - theory_vals
    return ComparisonReport(
        grid=grid,
        theory=theory_vals,
        empirical=empirical_vals,
        residual=residual,
        sup_distance=float(np.max(np.abs(residual))),
        n_samples=e.n,
        metadata=dict(metadata or {}),
    )


def _regime_floor(ctx: ShorthandContext, t_end: float) -> float:
    tr, m = ctx.trade, ctx.market
    regime = Regime.of(tr.k)
    if regime is Regime.BUY_AND_HOLD:
        return g_star(tr, m)
    if regime is Regime.BOLD:
        return g_star_t(tr, m, t_end)
    return timid_floor(tr, m)


def _quantile(ctx: ShorthandContext, t_end: float, q: float) -> float:
    """Invert the stop-protected gain CDF at probability ``q`` by bisection."""
    lo = _regime_floor(ctx, t_end)
    hi = lo + max(1.0, abs(lo)) * ctx.trade.u0 / ctx.trade.k
    for _ in range(200):
        if cdf_with_stop(CdfQuery(hi, t_end), ctx).p >= q:
            break
        hi = lo + 2.0 * (hi - lo)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if cdf_with_stop(CdfQuery(mid, t_end), ctx).p >= q:
            hi = mid
        else:
            lo = mid
    return hi


def comparison_grid(ctx: ShorthandContext, t_end: float, n_points: int = 512) -> np.ndarray:
    """Gain levels from just under the regime floor to the 99.9% quantile.

    The exact floor value is always one of the abscissae so atoms sitting on
    it show up in datasets and comparisons.
    """
    floor = _regime_floor(ctx, t_end)
    lo = floor - 0.05 * ctx.trade.u0 / ctx.trade.k
    hi = _quantile(ctx, t_end, 0.999)
    return np.union1d(np.linspace(lo, hi, n_points), [floor])


def replicate(
    mu: float,
    sigma: float,
    s0: float,
    s_star: float,
    u0: float,
    k: float,
    t_end: float,
    n_paths: int,
    n_steps: int,
    master_seed: int,
    bridge: bool = True,
    n_grid: int = 512,
    v0: float | None = None,
    n_workers: int = 1,
) -> ComparisonReport:
    """Simulate a batch and compare it against the stop-protected gain law.

    The report's ``metadata`` echoes every argument, so
    ``replicate(**report.metadata)`` reproduces the report bit-for-bit.
    """
    metadata = dict(
        mu=mu, sigma=sigma, s0=s0, s_star=s_star, u0=u0, k=k, t_end=t_end,
        n_paths=n_paths, n_steps=n_steps, master_seed=master_seed, bridge=bridge,
        n_grid=n_grid, v0=v0, n_workers=n_workers,
    )
    m = MarketParams(mu=mu, sigma=sigma, s0=s0)
    tr = TradeSpec(u0=u0, k=k, v0=u0 / k if v0 is None else v0, s_star=s_star)
    ctx = ShorthandContext(m, tr)
    grid = PathGrid(t_end, n_steps)
    batch = run_batch(m, tr, grid, n_paths, master_seed, bridge=bridge, n_workers=n_workers)
    e = empirical_cdf(batch.terminal_gain)
    xs = comparison_grid(ctx, t_end, n_grid)
    return compare(e, lambda x: cdf_with_stop(CdfQuery(x, t_end), ctx).p, xs, metadata)


@dataclass(frozen=True)
class FigureResult:
    """One reproduced comparison figure: dataset columns plus both reports."""

    which: int
    dataset: dict[str, np.ndarray]
    report: ComparisonReport
    no_stop_report: ComparisonReport


def reproduce_figure(
    which: int,
    n_paths: int = DEFAULT_FIGURE_PATHS,
    master_seed: int = 13,
    n_steps: int | None = None,
    n_workers: int = 1,
    bridge: bool = True,
) -> FigureResult:
    """Rebuild one of the three demo comparisons (k = 1, 2 and 0.5).

    Runs two batches from the same master seed: one with the stop order, one
    without, over identical price paths (the streams are keyed per path, not
    per configuration).  Emits the five-column dataset and the comparison
    report of the stop-protected law.
    """
    if which not in FIGURE_PARAMS:
        raise ParameterError(f"which must be one of {sorted(FIGURE_PARAMS)} (got {which})")
    p = FIGURE_PARAMS[which]
    t_end = p["t_end"]
    if n_steps is None:
        n_steps = PathGrid.default(t_end).n_steps
    m = MarketParams(mu=p["mu"], sigma=p["sigma"], s0=p["s0"])
    tr = TradeSpec(u0=p["u0"], k=p["k"], v0=p["u0"] / p["k"], s_star=p["s_star"])
    ctx = ShorthandContext(m, tr)
    grid = PathGrid(t_end, n_steps)

    batch = run_batch(m, tr, grid, n_paths, master_seed, bridge=bridge, n_workers=n_workers)
    tr_free = TradeSpec(u0=tr.u0, k=tr.k, v0=tr.v0, s_star=None)
    batch_free = run_batch(m, tr_free, grid, n_paths, master_seed, bridge=bridge, n_workers=n_workers)

    xs = comparison_grid(ctx, t_end)
    metadata = dict(
        which=which, mu=p["mu"], sigma=p["sigma"], s0=p["s0"], s_star=p["s_star"],
        u0=p["u0"], k=p["k"], t_end=t_end, n_paths=n_paths, n_steps=n_steps,
        master_seed=master_seed, bridge=bridge,
    )
    report = compare(
        empirical_cdf(batch.terminal_gain),
        lambda x: cdf_with_stop(CdfQuery(x, t_end), ctx).p,
        xs,
        metadata,
    )
    no_stop_report = compare(
        empirical_cdf(batch_free.terminal_gain),
        lambda x: cdf_no_stop(CdfQuery(x, t_end), ctx).p,
        xs,
        {**metadata, "stop_enabled": False},
    )
    dataset = {
        "x": xs,
        "F0_theory": no_stop_report.theory,
        "F_theory": report.theory,
        "F0_empirical": no_stop_report.empirical,
        "F_empirical": report.empirical,
    }
    return FigureResult(which=which, dataset=dataset, report=report, no_stop_report=no_stop_report)


@dataclass(frozen=True)
class LegResult:
    """Outcome of one verification leg: pass, fail or skipped, with details."""

    name: str
    status: str
    detail: dict

    @property
    def failed(self) -> bool:
        return self.status == "fail"


@dataclass(frozen=True)
class PropertyReport:
    """All trajectory and bound legs for one simulated batch."""

    legs: tuple[LegResult, ...]
    metadata: dict

    @property
    def passed(self) -> bool:
        return not any(leg.failed for leg in self.legs)

    def leg(self, name: str) -> LegResult:
        for leg in self.legs:
            if leg.name == name:
                return leg
        raise KeyError(name)


def property_suite(
    m: MarketParams,
    tr: TradeSpec,
    grid: PathGrid,
    n_paths: int,
    master_seed: int,
    bridge: bool = True,
) -> PropertyReport:
    """Check the trajectory guarantees and the expected-gain bound by simulation.

    Legs
    ----
    survivability
        Account value ``v0 + g`` never negative, provided ``u0 <= k * v0``;
        reported as skipped when that precondition does not hold.
    long_only
        Investment strictly positive before the stop, exactly zero from it.
    control_bound
        ``|u| <= u0 + k*v0 + k*v`` at every grid time of every path.
    lower_bound
        Sample mean of the terminal gain is at least
        ``c * (1 - F(c - v0)) - v0`` within three standard errors, for
        cutoffs ``c`` at half, once and twice ``v0``.
    """
    if not (isinstance(n_paths, (int, np.integer)) and n_paths >= 1):
        raise ParameterError(f"n_paths must be an integer >= 1 (got {n_paths})")
    ctx = ShorthandContext(m, tr)
    n = grid.n_steps
    half = 0.5 * m.sigma**2 * (tr.k - tr.k**2)
    cap = tr.u0 + tr.k * tr.v0  # |u| bound is this plus k times the account value

    min_v = math.inf
    min_u_active = math.inf
    max_abs_u_stopped = 0.0
    max_bound_excess = -math.inf
    violations = {"survivability": 0, "long_only": 0, "control_bound": 0}
    terminal = np.empty(int(n_paths))

    chunk = 2048
    times_tail = None
    for first in range(0, int(n_paths), chunk):
        count = min(chunk, int(n_paths) - first)
        log_rel, stop_idx = _sim._chunk_paths(m, tr, grid, master_seed, first, count, bridge)
        if times_tail is None:
            times_tail = grid.times[1:]
        g = (tr.u0 / tr.k) * np.expm1(tr.k * log_rel + half * times_tail)
        col = np.arange(1, n + 1)
        stopped_mask = col >= stop_idx[:, None]
        if tr.s_star is not None:
            stop_t = np.where(stop_idx <= n, grid.times[np.minimum(stop_idx, n)], np.nan)
            frozen = (tr.u0 / tr.k) * np.expm1(
                tr.k * math.log(tr.s_star / m.s0) + half * np.nan_to_num(stop_t)
            )
            g = np.where(stopped_mask, frozen[:, None], g)
        u = np.where(stopped_mask, 0.0, tr.u0 + tr.k * g)
        v = tr.v0 + g

        min_v = min(min_v, float(v.min()))
        active = ~stopped_mask
        if active.any():
            min_u_active = min(min_u_active, float(u[active].min()))
        if stopped_mask.any():
            max_abs_u_stopped = max(max_abs_u_stopped, float(np.abs(u[stopped_mask]).max()))
        excess = np.abs(u) - (cap + tr.k * v)
        max_bound_excess = max(max_bound_excess, float(excess.max()))
        violations["survivability"] += int((v < 0).sum())
        violations["long_only"] += int((u[active] <= 0).sum()) + int((u[stopped_mask] != 0).sum())
        violations["control_bound"] += int((excess > 0).sum())
        terminal[first : first + count] = g[:, -1]

    legs = []
    if check_survivability(tr):
        legs.append(
            LegResult(
                "survivability",
                "pass" if violations["survivability"] == 0 else "fail",
                {"min_account_value": min_v, "violations": violations["survivability"]},
            )
        )
    else:
        legs.append(
            LegResult("survivability", "skipped", {"reason": f"u0={tr.u0} > k*v0={tr.k * tr.v0}"})
        )
    legs.append(
        LegResult(
            "long_only",
            "pass" if violations["long_only"] == 0 else "fail",
            {
                "min_active_investment": min_u_active,
                "max_abs_stopped_investment": max_abs_u_stopped,
                "violations": violations["long_only"],
            },
        )
    )
    legs.append(
        LegResult(
            "control_bound",
            "pass" if violations["control_bound"] == 0 else "fail",
            {"max_excess": max_bound_excess, "violations": violations["control_bound"]},
        )
    )

    if check_survivability(tr):
        mean_g = float(terminal.mean())
        se = float(terminal.std(ddof=1) / math.sqrt(len(terminal))) if len(terminal) > 1 else 0.0
        bound_detail = {"mean_gain": mean_g, "standard_error": se, "cutoffs": {}}
        bound_ok = True
        law = cdf_with_stop if ctx.has_stop else cdf_no_stop
        for label, c in (("half_v0", tr.v0 / 2), ("v0", tr.v0), ("twice_v0", 2 * tr.v0)):
            f_at = law(CdfQuery(c - tr.v0, grid.t_end), ctx).p
            bound = expected_gain_lower_bound(c, tr.v0, f_at)
            ok = mean_g >= bound - 3.0 * se
            bound_ok &= ok
            bound_detail["cutoffs"][label] = {"c": c, "bound": bound, "ok": ok}
        legs.append(LegResult("lower_bound", "pass" if bound_ok else "fail", bound_detail))
    else:
        # the bound's derivation needs the account to stay nonnegative
        legs.append(
            LegResult("lower_bound", "skipped", {"reason": f"u0={tr.u0} > k*v0={tr.k * tr.v0}"})
        )

    metadata = dict(
        mu=m.mu, sigma=m.sigma, s0=m.s0, s_star=tr.s_star, u0=tr.u0, k=tr.k, v0=tr.v0,
        t_end=grid.t_end, n_steps=grid.n_steps, n_paths=int(n_paths),
        master_seed=int(master_seed), bridge=bridge,
    )
    return PropertyReport(legs=tuple(legs), metadata=metadata)
