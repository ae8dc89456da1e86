"""Distribution functions: golden values, branch structure and identities.

Golden constants live in reference_values.py and were produced by two
independent routes (high-precision transcription and a brute-force Monte
Carlo oracle); see make_reference_values.py.
"""

import math

import numpy as np
import pytest

from reference_values import CLOSED_FORM, MC_ORACLE, PHI_TABLE
from stopgain.cdf import (
    BRANCH_FLOOR,
    BRANCH_MIDDLE,
    BRANCH_NO_STOP,
    BRANCH_UPPER,
    CdfQuery,
    CdfValue,
    ShorthandContext,
    a_of_x,
    b_of_x_t,
    big_x,
    cdf_no_stop,
    cdf_with_stop,
    joint_cdf_stopped,
    joint_cdf_unstopped,
    joint_survival,
    omega,
    std_normal_cdf,
    stopping_time_cdf,
    theta,
)
from stopgain.errors import DomainError, ParameterError, RegimeError
from stopgain.model import MarketParams, TradeSpec, g_star_t, timid_floor

DEMO = MarketParams(mu=0.5, sigma=1.0, s0=1.0)


def ctx_for(k, s_star=0.5, u0=1.0, market=DEMO):
    tr = TradeSpec(u0=u0, k=k, v0=u0 / k, s_star=s_star)
    return ShorthandContext(market, tr)


CTX1 = ctx_for(1.0)
CTX2 = ctx_for(2.0)
CTX05 = ctx_for(0.5)


def _phi_abscissa(key):
    if key == "log2":
        return math.log(2.0)
    if key == "neg_log4":
        return -math.log(4.0)
    return float(key)


class TestStdNormalCdf:
    @pytest.mark.parametrize("key", sorted(PHI_TABLE))
    def test_reference_table(self, key):
        assert abs(std_normal_cdf(_phi_abscissa(key)) - PHI_TABLE[key]) <= 1e-15

    def test_symmetry(self):
        for x in np.linspace(-8.0, 8.0, 161):
            assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) <= 1e-15

    def test_tails_saturate(self):
        assert std_normal_cdf(40.0) == 1.0
        assert std_normal_cdf(-40.0) < 1e-300
        assert std_normal_cdf(math.inf) == 1.0
        assert std_normal_cdf(-math.inf) == 0.0

    def test_monotone(self):
        xs = np.linspace(-10.0, 10.0, 2001)
        ps = np.array([std_normal_cdf(x) for x in xs])
        assert (np.diff(ps) >= 0).all()


class TestContextAndQuery:
    def test_cached_derived_values(self):
        assert CTX1.z_star == 1.0  # 2*mu/sigma^2 - 1 = 0
        assert CTX1.drift_rate == 0.0
        assert CTX1.log_s0_over_star == pytest.approx(math.log(2.0), rel=1e-15)

    def test_no_stop_context(self):
        ctx = ShorthandContext(DEMO, TradeSpec(u0=1.0, k=1.0, v0=1.0))
        assert not ctx.has_stop
        assert math.isnan(ctx.z_star)
        with pytest.raises(ParameterError):
            _ = ctx.log_s0_over_star

    def test_context_validates_pair(self):
        with pytest.raises(ParameterError):
            ctx_for(1.0, s_star=1.5)  # barrier above the start price

    def test_query_validation(self):
        with pytest.raises(ParameterError):
            CdfQuery(math.nan, 1.0)
        with pytest.raises(ParameterError):
            CdfQuery(0.0, 0.0)
        with pytest.raises(ParameterError):
            CdfQuery(0.0, -1.0)

    def test_value_range_checked(self):
        with pytest.raises(ParameterError):
            CdfValue(1.5, BRANCH_UPPER)


class TestShorthandOperations:
    def test_big_x(self):
        # drift-free demo market: X(z, 1) = ln z
        assert big_x(2.0, 1.0, CTX1) == pytest.approx(math.log(2.0), rel=1e-15)
        assert big_x(1.0, 4.0, CTX1) == 0.0
        m = MarketParams(mu=1.0, sigma=2.0, s0=1.0)
        ctx = ctx_for(1.0, market=m)  # nu = -1
        assert big_x(1.0, 1.0, ctx) == pytest.approx(-0.5, rel=1e-15)

    def test_big_x_domain(self):
        with pytest.raises(DomainError):
            big_x(0.0, 1.0, CTX1)
        with pytest.raises(DomainError):
            big_x(1.0, 0.0, CTX1)

    def test_a_of_x_golden(self):
        assert a_of_x(0.0, CTX2) == pytest.approx(CLOSED_FORM["k2_a_x0"], rel=1e-14)
        assert a_of_x(-0.5, CTX05) == pytest.approx(CLOSED_FORM["k05_a_xneg05"], rel=1e-14)

    @pytest.mark.parametrize("k, ts", [
        (2.0, (0.1, 1.0, 3.0)),
        (0.5, (0.1, 1.0, 3.0)),
        # at k=5 the level curve flattens onto its asymptote exponentially
        # fast, so only short horizons are numerically invertible at all
        (5.0, (0.05, 0.1, 0.2)),
    ])
    def test_a_of_x_inverts_level_curve(self, k, ts):
        ctx = ctx_for(k)
        for t in ts:
            x = g_star_t(ctx.trade, DEMO, t)
            assert a_of_x(x, ctx) == pytest.approx(t, rel=1e-9)

    def test_a_of_x_errors(self):
        with pytest.raises(RegimeError):
            a_of_x(0.0, CTX1)
        with pytest.raises(DomainError):
            a_of_x(-0.5, CTX2)  # at -u0/k

    def test_b_of_x_t_golden(self):
        assert b_of_x_t(0.0, 1.0, CTX2) == pytest.approx(CLOSED_FORM["k2_b_x0_t1"], rel=1e-14)

    def test_b_inverts_gain(self):
        from stopgain.model import gain_no_stop

        for ctx in (CTX1, CTX2, CTX05):
            for x in (-0.2, 0.0, 1.5):
                for t in (0.25, 1.0):
                    s = b_of_x_t(x, t, ctx) * DEMO.s0
                    assert gain_no_stop(ctx.trade, DEMO, s, t) == pytest.approx(
                        x, abs=1e-12
                    )

    def test_theta_golden(self):
        assert theta(0.0, 1.0, CTX2) == pytest.approx(CLOSED_FORM["k2_theta_x0_t1"], rel=1e-13)


class TestStoppingTimeLaw:
    @pytest.mark.parametrize("t, key", [
        (0.1, "stop_cdf_t01"),
        (1.0, "stop_cdf_t1"),
        (10.0, "stop_cdf_t10"),
    ])
    def test_golden_values(self, t, key):
        assert stopping_time_cdf(t, CTX1) == pytest.approx(CLOSED_FORM[key], rel=1e-13)

    def test_omega_complement_is_exact(self):
        for t in (0.0, 0.1, 1.0, 10.0):
            assert omega(t, CTX1) + stopping_time_cdf(t, CTX1) == 1.0

    def test_boundary_conventions(self):
        assert omega(0.0, CTX1) == 1.0
        assert stopping_time_cdf(0.0, CTX1) == 0.0
        with pytest.raises(DomainError):
            omega(-0.5, CTX1)

    def test_monotone_in_t(self):
        ts = np.linspace(1e-6, 20.0, 400)
        ps = np.array([stopping_time_cdf(float(t), CTX1) for t in ts])
        assert (np.diff(ps) >= 0).all()

    def test_long_horizon_limits(self):
        # driftless log price: the barrier is hit almost surely
        assert stopping_time_cdf(1e4, CTX1) == pytest.approx(
            2.0 * std_normal_cdf(math.log(0.5) / 100.0), rel=1e-12
        )
        assert stopping_time_cdf(1e4, CTX1) > 0.99
        # positive log drift: the limit is (s_star/s0)^(2 nu / sigma^2)
        ctx = ctx_for(1.0, market=MarketParams(mu=1.0, sigma=1.0, s0=1.0))
        assert stopping_time_cdf(1e4, ctx) == pytest.approx(0.5, abs=1e-9)

    def test_mc_cross_check(self):
        # frozen 10^6-path bridge-corrected oracle, SE ~ 5e-4
        assert stopping_time_cdf(1.0, CTX1) == pytest.approx(
            MC_ORACLE["p_stop"], abs=2.5e-3
        )


class TestJointSurvival:
    def test_golden_values(self):
        assert joint_survival(1.0, 1.0, CTX1) == pytest.approx(
            CLOSED_FORM["joint_survival_x1_t1"], rel=1e-13
        )
        assert joint_survival(0.8, 1.0, CTX1) == pytest.approx(
            CLOSED_FORM["joint_survival_x08_t1"], rel=1e-13
        )

    def test_domain(self):
        with pytest.raises(DomainError):
            joint_survival(0.0, 1.0, CTX1)
        with pytest.raises(DomainError):
            joint_survival(1.0, 0.0, CTX1)

    def test_below_barrier_consistency(self):
        # asking for survival at a level under the barrier just drops the
        # price condition: the stop not firing already implies price > s_star
        assert joint_survival(0.5, 1.0, CTX1) == pytest.approx(omega(1.0, CTX1), rel=1e-12)

    def test_mc_cross_check(self):
        assert joint_survival(1.0, 1.0, CTX1) == pytest.approx(
            MC_ORACLE["p_price_ge_1_no_stop"], abs=1.6e-3
        )
        assert joint_survival(0.8, 1.0, CTX1) == pytest.approx(
            MC_ORACLE["p_price_ge_08_no_stop"], abs=1.6e-3
        )


class TestNoStopLaw:
    def test_floor_and_branch(self):
        v = cdf_no_stop(CdfQuery(-1.0, 1.0), CTX1)
        assert v.p == 0.0 and v.branch == BRANCH_FLOOR
        v = cdf_no_stop(CdfQuery(-0.5, 1.0), CTX1)
        assert v.branch == BRANCH_NO_STOP
        assert v.p == pytest.approx(CLOSED_FORM["k1_cdf_no_stop_xneg05_t1"], rel=1e-13)

    def test_matches_lognormal_tail_k1(self):
        # k=1: gain <= x iff terminal price <= x + u0 (u0 = s0 = 1)
        for x in (-0.3, 0.0, 1.0):
            expected = std_normal_cdf(math.log(1.0 + x))
            assert cdf_no_stop(CdfQuery(x, 1.0), CTX1).p == pytest.approx(expected, rel=1e-13)

    def test_monotone_all_regimes(self):
        for ctx in (CTX1, CTX2, CTX05):
            lo = -ctx.trade.u0 / ctx.trade.k
            xs = np.linspace(lo - 0.2, 6.0, 600)
            ps = [cdf_no_stop(CdfQuery(float(x), 1.0), ctx).p for x in xs]
            assert (np.diff(ps) >= -1e-15).all()
            assert ps[0] == 0.0
            assert ps[-1] > 0.9


class TestBuyAndHoldLaw:
    def test_atom_and_branches(self):
        below = cdf_with_stop(CdfQuery(-0.5 - 1e-12, 1.0), CTX1)
        assert below.p == 0.0 and below.branch == BRANCH_FLOOR
        at = cdf_with_stop(CdfQuery(-0.5, 1.0), CTX1)
        assert at.branch == BRANCH_UPPER
        assert at.p == pytest.approx(CLOSED_FORM["k1_cdf_at_g_star_t1"], rel=1e-13)

    def test_atom_identity_with_stop_law(self):
        # the whole mass at the floor is exactly the stopped probability
        for t in (0.1, 1.0, 10.0):
            f_at = cdf_with_stop(CdfQuery(-0.5, t), CTX1).p
            assert abs(f_at - stopping_time_cdf(t, CTX1)) <= 1e-12

    @pytest.mark.parametrize("x, key", [
        (0.0, "k1_cdf_x0_t1"),
        (2.0, "k1_cdf_x2_t1"),
    ])
    def test_golden_values(self, x, key):
        assert cdf_with_stop(CdfQuery(x, 1.0), CTX1).p == pytest.approx(
            CLOSED_FORM[key], rel=1e-13
        )

    def test_mc_cross_checks(self):
        assert cdf_with_stop(CdfQuery(-0.5, 1.0), CTX1).p == pytest.approx(
            MC_ORACLE["k1_p_g_le_neg05"], abs=2.5e-3
        )
        assert cdf_with_stop(CdfQuery(0.0, 1.0), CTX1).p == pytest.approx(
            MC_ORACLE["k1_p_g_le_0"], abs=2.5e-3
        )

    def test_dominates_no_stop_law(self):
        # the stop can only push gains down, never up
        for x in np.linspace(-0.49, 4.0, 80):
            q = CdfQuery(float(x), 1.0)
            assert cdf_with_stop(q, CTX1).p >= cdf_no_stop(q, CTX1).p - 1e-15


class TestBoldLaw:
    def test_branches(self):
        t = 1.0
        floor = g_star_t(CTX2.trade, DEMO, t)
        assert cdf_with_stop(CdfQuery(floor, t), CTX2) == CdfValue(0.0, BRANCH_FLOOR)
        mid = cdf_with_stop(CdfQuery(-0.4, t), CTX2)
        assert mid.branch == BRANCH_MIDDLE
        assert mid.p == pytest.approx(CLOSED_FORM["k2_cdf_xneg04_t1"], rel=1e-13)
        up = cdf_with_stop(CdfQuery(0.0, t), CTX2)
        assert up.branch == BRANCH_UPPER
        assert up.p == pytest.approx(CLOSED_FORM["k2_cdf_x0_t1"], rel=1e-13)

    def test_junction_value_and_continuity(self):
        junction = CLOSED_FORM["k2_junction"]
        lo = cdf_with_stop(CdfQuery(junction - 1e-12, 1.0), CTX2)
        hi = cdf_with_stop(CdfQuery(junction, 1.0), CTX2)
        assert lo.branch == BRANCH_MIDDLE and hi.branch == BRANCH_UPPER
        assert abs(hi.p - lo.p) <= 1e-10

    def test_junction_is_level_curve_start(self):
        assert g_star_t(CTX2.trade, DEMO, 0.0) == CLOSED_FORM["k2_junction"]

    def test_floor_tracks_time(self):
        for t in (0.25, 1.0, 4.0):
            floor = g_star_t(CTX2.trade, DEMO, t)
            assert cdf_with_stop(CdfQuery(floor, t), CTX2).p == 0.0
            assert cdf_with_stop(CdfQuery(floor + 1e-9, t), CTX2).p > 0.0

    def test_monotone(self):
        xs = np.linspace(-0.5, 6.0, 800)
        ps = [cdf_with_stop(CdfQuery(float(x), 1.0), CTX2).p for x in xs]
        assert (np.diff(ps) >= -1e-13).all()

    def test_mc_cross_checks(self):
        assert cdf_with_stop(CdfQuery(-0.4, 1.0), CTX2).p == pytest.approx(
            MC_ORACLE["k2_p_g_le_neg04"], abs=2.5e-3
        )
        assert cdf_with_stop(CdfQuery(0.0, 1.0), CTX2).p == pytest.approx(
            MC_ORACLE["k2_p_g_le_0"], abs=2.5e-3
        )


class TestTimidLaw:
    def test_branches(self):
        t = 1.0
        hard = timid_floor(CTX05.trade, DEMO)
        assert cdf_with_stop(CdfQuery(hard, t), CTX05) == CdfValue(0.0, BRANCH_FLOOR)
        mid = cdf_with_stop(CdfQuery(-0.5, t), CTX05)
        assert mid.branch == BRANCH_MIDDLE
        assert mid.p == pytest.approx(CLOSED_FORM["k05_cdf_xneg05_t1"], rel=1e-13)
        level = g_star_t(CTX05.trade, DEMO, t)
        up = cdf_with_stop(CdfQuery(level, t), CTX05)
        assert up.branch == BRANCH_UPPER
        assert cdf_with_stop(CdfQuery(0.0, t), CTX05).p == pytest.approx(
            CLOSED_FORM["k05_cdf_x0_t1"], rel=1e-13
        )

    def test_level_curve_continuity(self):
        level = g_star_t(CTX05.trade, DEMO, 1.0)
        lo = cdf_with_stop(CdfQuery(level - 1e-12, 1.0), CTX05)
        hi = cdf_with_stop(CdfQuery(level, 1.0), CTX05)
        assert lo.branch == BRANCH_MIDDLE and hi.branch == BRANCH_UPPER
        assert abs(hi.p - lo.p) <= 1e-10

    def test_all_stopped_mass_sits_below_level(self):
        # at the level curve the whole stopped probability has accumulated
        assert cdf_with_stop(
            CdfQuery(CLOSED_FORM["k05_g_level_t1"], 1.0), CTX05
        ).p == pytest.approx(CLOSED_FORM["stop_cdf_t1"], rel=1e-12)

    def test_golden_middle_point(self):
        assert cdf_with_stop(CdfQuery(-0.45, 1.0), CTX05).p == pytest.approx(
            CLOSED_FORM["k05_cdf_xneg045_t1"], rel=1e-13
        )

    def test_monotone(self):
        xs = np.linspace(-0.7, 4.0, 800)
        ps = [cdf_with_stop(CdfQuery(float(x), 1.0), CTX05).p for x in xs]
        assert (np.diff(ps) >= -1e-13).all()

    def test_mc_cross_checks(self):
        for x, key in ((-0.5, "k05_p_g_le_neg05"), (-0.45, "k05_p_g_le_neg045"),
                       (0.0, "k05_p_g_le_0")):
            assert cdf_with_stop(CdfQuery(x, 1.0), CTX05).p == pytest.approx(
                MC_ORACLE[key], abs=2.5e-3
            )


class TestJointDecomposition:
    @pytest.mark.parametrize("k", [2.0, 0.5])
    @pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
    def test_stopped_plus_unstopped_is_total(self, k, t):
        ctx = ctx_for(k)
        lo = -ctx.trade.u0 / ctx.trade.k + 1e-6
        xs = np.linspace(lo, 5.0, 512)
        for x in xs:
            total = cdf_with_stop(CdfQuery(float(x), t), ctx).p
            parts = joint_cdf_stopped(float(x), t, ctx) + joint_cdf_unstopped(float(x), t, ctx)
            assert abs(total - parts) <= 1e-12

    def test_unstopped_tail_matches_omega(self):
        # far enough right every surviving path is counted (x must outrun
        # the k=2 law's quadratic growth in the price, hence the large level)
        for k in (2.0, 0.5):
            ctx = ctx_for(k)
            assert joint_cdf_unstopped(1e6, 1.0, ctx) == pytest.approx(
                omega(1.0, ctx), abs=1e-12
            )
            assert joint_cdf_stopped(1e6, 1.0, ctx) == pytest.approx(
                stopping_time_cdf(1.0, ctx), rel=1e-12
            )

    def test_k1_rejected(self):
        with pytest.raises(RegimeError):
            joint_cdf_stopped(0.0, 1.0, CTX1)
        with pytest.raises(RegimeError):
            joint_cdf_unstopped(0.0, 1.0, CTX1)

    def test_unstopped_mc_cross_check(self):
        assert joint_cdf_unstopped(0.0, 1.0, CTX2) == pytest.approx(
            MC_ORACLE["k2_p_g_le_0_unstopped"], abs=2.5e-3
        )

    def test_timid_band_is_empty_for_survivors(self):
        # between the hard floor and the level curve only stopped paths live
        hard = timid_floor(CTX05.trade, DEMO)
        level = g_star_t(CTX05.trade, DEMO, 1.0)
        for x in np.linspace(hard + 1e-9, level - 1e-9, 25):
            assert joint_cdf_unstopped(float(x), 1.0, CTX05) == 0.0
        assert MC_ORACLE["k05_band_unstopped_count"] == 0


class TestLimitsAndStress:
    @pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
    def test_no_stop_limit(self, k):
        # a barrier at 1e-8 is practically never hit within t = 1
        ctx_eps = ctx_for(k, s_star=1e-8)
        ctx_free = ShorthandContext(DEMO, TradeSpec(u0=1.0, k=k, v0=1.0 / k))
        for x in np.linspace(-1.0 / k + 1e-3, 4.0, 120):
            q = CdfQuery(float(x), 1.0)
            assert abs(cdf_with_stop(q, ctx_eps).p - cdf_no_stop(q, ctx_free).p) <= 1e-6

    def test_continuity_in_k_away_from_atom(self):
        for x in (-0.45, -0.3, 0.0, 0.5, 2.0):
            base = cdf_with_stop(CdfQuery(x, 1.0), CTX1).p
            for k in (1.0 - 1e-6, 1.0 + 1e-6):
                near = cdf_with_stop(CdfQuery(x, 1.0), ctx_for(k)).p
                assert abs(near - base) <= 1e-4

    def test_k50_stress(self):
        ctx = ctx_for(50.0)
        xs = np.linspace(-0.0199, 2.0, 400)
        ps = np.array([cdf_with_stop(CdfQuery(float(x), 1.0), ctx).p for x in xs])
        assert np.isfinite(ps).all()
        assert ((ps >= 0.0) & (ps <= 1.0)).all()
        assert (np.diff(ps) >= -1e-13).all()

    def test_short_horizon(self):
        # virtually no time to move: everything concentrates near zero gain
        for ctx in (CTX1, CTX2, CTX05):
            assert cdf_with_stop(CdfQuery(-0.01, 1e-9), ctx).p < 1e-10
            assert cdf_with_stop(CdfQuery(0.01, 1e-9), ctx).p > 1.0 - 1e-10
