from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopvideo.mcper import PerEstimate, PerTable, Scheme
from coopvideo.scenario import RATES_80211G, NodePlacement, Region, SystemConfig, generate_placements
from coopvideo.schemes import (
    RatePlan,
    SchemeResult,
    brute_force_optimize,
    combine_rdstc,
    evaluate_plan,
    optimize,
    packets_direct,
    packets_nc,
    packets_rdstc,
    packets_rdstc_hr,
    video_rate,
)

CFG = SystemConfig()
R = RATES_80211G


class FlatProvider:
    """Same PER on every link and tuple."""

    def __init__(self, p12=0.0, p21=None, relays=3.0):
        self.p12, self.p21 = p12, p12 if p21 is None else p21
        self.k = relays

    def per_direct(self, r12, r21):
        return PerEstimate(Scheme.DIRECT, (("r12", r12), ("r21", r21)), self.p12, self.p21, 0.0, 1000)

    def per_rdstc(self, d, a, b):
        if d == "12":
            return PerEstimate(Scheme.RDSTC, (("r12", a), ("rr2", b)), self.p12, None, self.k, 1000)
        return PerEstimate(Scheme.RDSTC, (("r21", a), ("rr1", b)), None, self.p21, self.k, 1000)

    def per_hr(self, a, b, c, d):
        return PerEstimate(Scheme.RDSTC_HR, (("r12", a), ("r21", b), ("rr2", c), ("rr1", d)),
                           self.p12, self.p21, self.k, 1000)

    def per_nc(self, a, b, c):
        return PerEstimate(Scheme.RDSTC_NC, (("r12", a), ("r21", b), ("rr", c)),
                           self.p12, self.p21, self.k, 1000)


def test_direct_packet_counts():
    assert packets_direct(CFG, 6e6, 0.5) == 3
    assert packets_direct(CFG, 6e6, 0.0) == 0
    assert packets_direct(CFG, 54e6, 0.5) == 33
    # 0.1 * 54e6 * 0.4 * 0.15 / 12000 is exactly 27
    assert packets_direct(CFG, 54e6, 0.4) == 27


def test_rdstc_packet_counts():
    assert packets_rdstc(CFG, 6e6, 6e6, 0.5) == 1
    for r in R:
        for t in CFG.time_partition_grid:
            expect = int(Fraction("0.1") * Fraction(str(t)) * Fraction("0.15") * int(r) / (2 * 12000))
            assert packets_rdstc(CFG, r, r, t) == expect


def test_hr_packet_counts():
    assert packets_rdstc_hr(CFG, 54e6, 54e6, 54e6, 54e6) == 16
    for r in R:
        assert packets_rdstc_hr(CFG, r, r, r, r) == int(Fraction("0.015") * int(r) / (4 * 12000))


def test_nc_packet_counts():
    assert packets_nc(CFG, 54e6, 54e6, 54e6) == 22
    for r in R:
        assert packets_nc(CFG, r, r, r) == int(Fraction("0.015") * int(r) / (3 * 12000))


def test_four_thirds_identity_exact():
    beta, T, P = Fraction("0.1"), Fraction("0.15"), 12000
    for r in R:
        r = int(r)
        nc = beta * T * r ** 3 / (P * 3 * r * r)
        rd = beta * Fraction(1, 2) * T * r * r / (P * 2 * r)
        assert nc / rd == Fraction(4, 3)


@settings(max_examples=300)
@given(st.lists(st.sampled_from(R), min_size=4, max_size=4), st.integers(0, 3),
       st.sampled_from(R), st.floats(0.01, 1.0), st.sampled_from(CFG.time_partition_grid))
def test_counts_monotone(rates, which, bigger, beta, t):
    cfg = replace(CFG, beta=beta)
    up = list(rates)
    up[which] = max(up[which], bigger)
    assert packets_direct(cfg, up[0], t) >= packets_direct(cfg, rates[0], t)
    assert packets_rdstc(cfg, *up[:2], t) >= packets_rdstc(cfg, *rates[:2], t)
    assert packets_rdstc_hr(cfg, *up) >= packets_rdstc_hr(cfg, *rates)
    assert packets_nc(cfg, *up[:3]) >= packets_nc(cfg, *rates[:3])
    more = replace(cfg, beta=min(1.0, beta * 1.5), t_delay=0.2)
    assert packets_nc(more, *rates[:3]) >= packets_nc(cfg, *rates[:3])


def test_video_rate():
    assert video_rate(0, CFG) == 0
    assert video_rate(33, CFG) == pytest.approx(2.64e6)
    assert video_rate(20, CFG) == 2 * video_rate(10, CFG)


def test_evaluate_lossless():
    plan = RatePlan(Scheme.RDSTC_NC, 54e6, 54e6, rr=54e6)
    res = evaluate_plan(plan, FlatProvider(0.0).per_nc(54e6, 54e6, 54e6), CFG)
    assert (res.n12, res.s12, res.s21) == (22, 22, 22)
    assert res.avg_video_rate == 22 * 12000 / 0.15
    assert res.rv12 == res.s12 * CFG.packet_size / CFG.t_delay
    assert res.feasible


def test_evaluate_per_cap():
    plan = RatePlan(Scheme.DIRECT, 6e6, 6e6, t_i=0.5)
    res = evaluate_plan(plan, FlatProvider(0.30, 0.0).per_direct(6e6, 6e6), CFG)
    assert not res.feasible
    res = evaluate_plan(plan, FlatProvider(0.25, 0.0).per_direct(6e6, 6e6), CFG)
    assert res.feasible


def test_nc_better_direction_carries_more():
    plan = RatePlan(Scheme.RDSTC_NC, 54e6, 54e6, rr=54e6)
    res = evaluate_plan(plan, FlatProvider(0.02, 0.15).per_nc(54e6, 54e6, 54e6), CFG)
    assert res.n12 == res.n21
    assert res.s12 > res.s21


def test_evaluate_rejects_mismatched_per():
    plan = RatePlan(Scheme.RDSTC_HR, 6e6, 6e6, rr2=6e6, rr1=6e6)
    with pytest.raises(ValueError):
        evaluate_plan(plan, FlatProvider().per_nc(6e6, 6e6, 6e6), CFG)
    with pytest.raises(ValueError):
        evaluate_plan(plan, FlatProvider().per_hr(6e6, 6e6, 9e6, 6e6), CFG)
    with pytest.raises(ValueError):
        evaluate_plan(RatePlan(Scheme.RDSTC, 6e6, 6e6, rr2=6e6, rr1=6e6, t_i=0.5),
                      FlatProvider().per_rdstc("12", 6e6, 6e6), CFG)


def test_evaluate_reproducible():
    per = combine_rdstc(FlatProvider(0.05).per_rdstc("12", 24e6, 36e6),
                        FlatProvider(0.05).per_rdstc("21", 18e6, 54e6))
    plan = RatePlan(Scheme.RDSTC, 24e6, 18e6, rr2=36e6, rr1=54e6, t_i=0.6)
    assert evaluate_plan(plan, per, CFG) == evaluate_plan(plan, per, CFG)


def test_direct_lossless_optimum():
    plan, res = optimize(Scheme.DIRECT, None, CFG, FlatProvider(0.0))
    assert (plan.r12, plan.r21) == (54e6, 54e6)
    # floor(67.5 t) + floor(67.5 (1 - t)) peaks at 67; 0.4 and 0.6 are the
    # peak points nearest 1/2 and the lower one wins the final tie-break
    assert plan.t_i == 0.4
    assert res.s12 + res.s21 == 67
    assert res.avg_video_rate == pytest.approx(2.68e6)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_lossless_picks_max_rates(scheme):
    plan, res = optimize(scheme, None, CFG, FlatProvider(0.0))
    assert max(plan.phy_rates()) == 54e6
    assert plan.r12 == plan.r21 == 54e6


def test_everything_infeasible():
    plan, res = optimize(Scheme.RDSTC_NC, None, CFG, FlatProvider(0.5))
    assert plan is None
    assert res == SchemeResult.infeasible()


@pytest.fixture(scope="module")
def tables():
    out = []
    for dens, dist, seed in ((0.001, 120.0, 1), (0.0005, 80.0, 2), (0.001, 160.0, 3)):
        pl = generate_placements(Region(), dens, dist, 1, seed=seed)[0]
        out.append((pl, PerTable(pl, R, 500, seed)))
    return out


@pytest.mark.parametrize("scheme", [Scheme.DIRECT, Scheme.RDSTC_HR, Scheme.RDSTC_NC])
def test_matches_brute_force(tables, scheme):
    for pl, tab in tables:
        assert optimize(scheme, pl, CFG, tab) == brute_force_optimize(scheme, CFG, tab)


def test_rdstc_decomposition_matches_brute_force(tables):
    small = replace(CFG, rate_table=(6e6, 12e6, 24e6, 54e6), time_partition_grid=(0.3, 0.5, 0.6, 0.8))
    for pl, _ in tables:
        tab = PerTable(pl, small.rate_table, 500, 7)
        assert optimize(Scheme.RDSTC, pl, small, tab) == brute_force_optimize(Scheme.RDSTC, small, tab)
    pl, tab = tables[0]
    assert optimize(Scheme.RDSTC, pl, CFG, tab) == brute_force_optimize(Scheme.RDSTC, CFG, tab)


def test_no_relays_nc_equals_direct():
    pl = NodePlacement((50.0, 100.0), (150.0, 100.0), np.zeros((0, 2)))
    tab = PerTable(pl, R, 1000, 0)
    d_plan, d_res = optimize(Scheme.DIRECT, pl, CFG, tab)
    for scheme in (Scheme.RDSTC, Scheme.RDSTC_HR, Scheme.RDSTC_NC):
        plan, res = optimize(scheme, pl, CFG, tab)
        assert res.avg_video_rate == d_res.avg_video_rate
        assert plan.relay_off
        assert (plan.r12, plan.r21, plan.t_i) == (d_plan.r12, d_plan.r21, d_plan.t_i)


def test_nested_grids(tables):
    coarse = replace(CFG, rate_table=(6e6, 18e6, 36e6), time_partition_grid=(0.5,))
    fine = replace(CFG, rate_table=(6e6, 12e6, 18e6, 36e6, 54e6), time_partition_grid=(0.3, 0.5, 0.7))
    for pl, tab in tables:
        for scheme in Scheme:
            a = optimize(scheme, pl, coarse, tab)[1].avg_video_rate
            b = optimize(scheme, pl, fine, tab)[1].avg_video_rate
            assert b >= a


def test_relay_schemes_dominate_direct(tables):
    for pl, tab in tables:
        direct = optimize(Scheme.DIRECT, pl, CFG, tab)[1].avg_video_rate
        for scheme in (Scheme.RDSTC, Scheme.RDSTC_HR, Scheme.RDSTC_NC):
            assert optimize(scheme, pl, CFG, tab)[1].avg_video_rate >= direct


def test_optimizer_respects_cap(tables):
    for pl, tab in tables:
        for scheme in Scheme:
            plan, res = optimize(scheme, pl, CFG, tab)
            if plan is not None:
                assert res.per_used.p12 <= 0.25 and res.per_used.p21 <= 0.25
