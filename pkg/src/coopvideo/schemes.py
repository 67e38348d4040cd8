"""Packet budgets per scheme, useful video rates, and the exhaustive
search over PHY rates and time partitions.

All packet counts are per FEC block, i.e. per ``t_delay`` window of which
a fraction ``beta`` is available for the call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .fec import max_source_packets
from .mcper import ChannelModel, PerEstimate, PerTable, Scheme
from .scenario import SystemConfig

__all__ = [
    "RatePlan",
    "SchemeResult",
    "packets_direct",
    "packets_rdstc",
    "packets_rdstc_hr",
    "packets_nc",
    "video_rate",
    "combine_rdstc",
    "evaluate_plan",
    "optimize",
]

# guards floor() against products like 26.999999999999996 that are exact
# integers in real arithmetic
_FLOOR_EPS = 1e-9


def _floor(x: float) -> int:
    return math.floor(x + _FLOOR_EPS)


def packets_direct(cfg: SystemConfig, r12: float, t_i: float) -> int:
    return _floor(cfg.beta * r12 * t_i * cfg.t_delay / cfg.packet_size)


def packets_rdstc(cfg: SystemConfig, r_src: float, r_relay: float, t_i: float) -> int:
    return _floor(cfg.beta * t_i * cfg.t_delay * r_src * r_relay
                  / (cfg.packet_size * (r_src + r_relay)))


def packets_rdstc_hr(cfg: SystemConfig, r12, r21, rr2, rr1) -> int:
    cycle = cfg.packet_size * (1 / r12 + 1 / r21 + 1 / rr2 + 1 / rr1)
    return _floor(cfg.beta * cfg.t_delay / cycle)


def packets_nc(cfg: SystemConfig, r12, r21, rr) -> int:
    return _floor(cfg.beta * cfg.t_delay * r12 * r21 * rr
                  / (cfg.packet_size * (r21 * rr + r12 * rr + r12 * r21)))


def video_rate(s: int, cfg: SystemConfig) -> float:
    return s * cfg.packet_size / cfg.t_delay


@dataclass(frozen=True)
class RatePlan:
    """One candidate operating point.

    ``relay_off`` marks the direct-transmission fallback of a relay scheme:
    only ``r12``, ``r21`` and ``t_i`` are used and the plan runs as plain
    two-phase direct transmission.
    """

    scheme: Scheme
    r12: float
    r21: float
    rr: float | None = None
    rr2: float | None = None
    rr1: float | None = None
    t_i: float | None = None
    relay_off: bool = False

    @property
    def t_ii(self) -> float | None:
        return None if self.t_i is None else 1.0 - self.t_i

    @property
    def mode(self) -> Scheme:
        return Scheme.DIRECT if self.relay_off else self.scheme

    def rate_key(self) -> tuple:
        m = self.mode
        if m is Scheme.DIRECT:
            return (("r12", self.r12), ("r21", self.r21))
        if m is Scheme.RDSTC:
            return (("r12", self.r12), ("rr2", self.rr2), ("r21", self.r21), ("rr1", self.rr1))
        if m is Scheme.RDSTC_HR:
            return (("r12", self.r12), ("r21", self.r21), ("rr2", self.rr2), ("rr1", self.rr1))
        return (("r12", self.r12), ("r21", self.r21), ("rr", self.rr))

    def phy_rates(self) -> tuple:
        return tuple(v for _, v in self.rate_key())


@dataclass(frozen=True)
class SchemeResult:
    n12: int
    n21: int
    s12: int
    s21: int
    rv12: float
    rv21: float
    avg_video_rate: float
    per_used: PerEstimate | None
    feasible: bool = True

    @classmethod
    def infeasible(cls) -> "SchemeResult":
        return cls(0, 0, 0, 0, 0.0, 0.0, 0.0, None, feasible=False)


def combine_rdstc(e12: PerEstimate, e21: PerEstimate) -> PerEstimate:
    """Join two single-direction R-DSTC estimates; the reported relay count
    is the mean over the two phases."""
    if e12.p12 is None or e21.p21 is None:
        raise ValueError("expected a 1->2 and a 2->1 estimate")
    rates = e12.rates + e21.rates
    return PerEstimate(Scheme.RDSTC, rates, e12.p12, e21.p21,
                       (e12.avg_relay_count + e21.avg_relay_count) / 2,
                       min(e12.trials, e21.trials))


def block_sizes(plan: RatePlan, cfg: SystemConfig) -> tuple[int, int]:
    m = plan.mode
    if m is Scheme.DIRECT:
        return packets_direct(cfg, plan.r12, plan.t_i), packets_direct(cfg, plan.r21, plan.t_ii)
    if m is Scheme.RDSTC:
        return (packets_rdstc(cfg, plan.r12, plan.rr2, plan.t_i),
                packets_rdstc(cfg, plan.r21, plan.rr1, plan.t_ii))
    if m is Scheme.RDSTC_HR:
        n = packets_rdstc_hr(cfg, plan.r12, plan.r21, plan.rr2, plan.rr1)
        return n, n
    n = packets_nc(cfg, plan.r12, plan.r21, plan.rr)
    return n, n


def evaluate_plan(plan: RatePlan, per: PerEstimate, cfg: SystemConfig) -> SchemeResult:
    if per.scheme is not plan.mode or tuple(per.rates) != plan.rate_key():
        raise ValueError(
            f"PER estimate for {per.scheme} {per.rates} does not match plan {plan.mode} {plan.rate_key()}"
        )
    if per.p12 is None or per.p21 is None:
        raise ValueError("plan evaluation needs PERs for both directions")
    if plan.mode in (Scheme.DIRECT, Scheme.RDSTC) and plan.t_i is None:
        raise ValueError("two-phase plans need t_i")
    n12, n21 = block_sizes(plan, cfg)
    s12 = max_source_packets(n12, per.p12, cfg.tau)
    s21 = max_source_packets(n21, per.p21, cfg.tau)
    rv12, rv21 = video_rate(s12, cfg), video_rate(s21, cfg)
    feasible = per.p12 <= cfg.per_cap and per.p21 <= cfg.per_cap
    return SchemeResult(n12, n21, s12, s21, rv12, rv21, (rv12 + rv21) / 2, per, feasible)


def _tie_key(plan: RatePlan, total_s: int):
    """Sort key: best first. More source packets, then lower summed PHY rate,
    then t_i closest to 1/2, then the relay-off fallback, then lexicographic
    rates, then lower t_i."""
    t = plan.t_i if plan.t_i is not None else 0.5
    return (-total_s, sum(plan.phy_rates()), round(abs(t - 0.5), 9),
            0 if plan.relay_off or plan.scheme is Scheme.DIRECT else 1,
            plan.phy_rates(), t)


def _best_direct(cfg, provider, scheme):
    rates, best = cfg.rate_table, None
    for r12 in rates:
        for r21 in rates:
            per = provider.per_direct(r12, r21)
            if per.p12 > cfg.per_cap or per.p21 > cfg.per_cap:
                continue
            for t in cfg.time_partition_grid:
                plan = RatePlan(scheme, r12, r21, t_i=t, relay_off=scheme is not Scheme.DIRECT)
                res = evaluate_plan(plan, per, cfg)
                cand = (_tie_key(plan, res.s12 + res.s21), plan, res)
                if best is None or cand[0] < best[0]:
                    best = cand
    return best


def _best_rdstc(cfg, provider):
    """Exact search over (r12, rr2, r21, rr1, t_i).

    For fixed t_i the objective splits into one term per direction, so for
    every achievable source count each direction keeps only its
    tie-break-preferred rate pair before the two sides are combined.
    """
    rates = cfg.rate_table
    est12 = {(a, b): provider.per_rdstc("12", a, b) for a in rates for b in rates}
    est21 = {(a, b): provider.per_rdstc("21", a, b) for a in rates for b in rates}
    best = None
    for t in cfg.time_partition_grid:
        sides = []
        for est, frac, attr in ((est12, t, "p12"), (est21, 1.0 - t, "p21")):
            by_s = {}
            for (a, b), e in est.items():
                p = getattr(e, attr)
                if p > cfg.per_cap:
                    continue
                s = max_source_packets(packets_rdstc(cfg, a, b, frac), p, cfg.tau)
                k = (a + b, (a, b))
                if s not in by_s or k < by_s[s]:
                    by_s[s] = k
            sides.append(by_s)
        for s1, (_, (r12, rr2)) in sides[0].items():
            for s2, (_, (r21, rr1)) in sides[1].items():
                plan = RatePlan(Scheme.RDSTC, r12, r21, rr2=rr2, rr1=rr1, t_i=t)
                key = _tie_key(plan, s1 + s2)
                if best is None or key < best[0]:
                    best = (key, plan)
    if best is None:
        return None
    plan = best[1]
    per = combine_rdstc(est12[(plan.r12, plan.rr2)], est21[(plan.r21, plan.rr1)])
    res = evaluate_plan(plan, per, cfg)
    return (_tie_key(plan, res.s12 + res.s21), plan, res)


def _best_common(cfg, provider, scheme):
    rates, best = cfg.rate_table, None
    for r12 in rates:
        for r21 in rates:
            if scheme is Scheme.RDSTC_NC:
                relay_sets = [dict(rr=rr) for rr in rates]
            else:
                relay_sets = [dict(rr2=a, rr1=b) for a in rates for b in rates]
            for kw in relay_sets:
                plan = RatePlan(scheme, r12, r21, **kw)
                if scheme is Scheme.RDSTC_NC:
                    per = provider.per_nc(r12, r21, kw["rr"])
                else:
                    per = provider.per_hr(r12, r21, kw["rr2"], kw["rr1"])
                if per.p12 > cfg.per_cap or per.p21 > cfg.per_cap:
                    continue
                res = evaluate_plan(plan, per, cfg)
                key = _tie_key(plan, res.s12 + res.s21)
                if best is None or key < best[0]:
                    best = (key, plan, res)
    return best


def optimize(scheme, placement, cfg: SystemConfig, per_provider=None, trials=1000, seed=0,
             channel: ChannelModel | None = None):
    """Best feasible plan for ``scheme`` on ``placement``.

    Returns ``(plan, result)``; when no candidate meets the PER cap in both
    directions the plan is ``None`` and the result is
    ``SchemeResult.infeasible()``. Relay schemes also consider running as
    plain direct transmission.
    """
    scheme = Scheme(scheme)
    if not cfg.rate_table or not cfg.time_partition_grid:
        raise ValueError("candidate grids must be non-empty")
    provider = per_provider or PerTable(placement, cfg.rate_table, trials, seed, channel)
    cands = [_best_direct(cfg, provider, scheme)]
    if scheme is Scheme.RDSTC:
        cands.append(_best_rdstc(cfg, provider))
    elif scheme in (Scheme.RDSTC_HR, Scheme.RDSTC_NC):
        cands.append(_best_common(cfg, provider, scheme))
    cands = [c for c in cands if c is not None]
    if not cands:
        return None, SchemeResult.infeasible()
    _, plan, res = min(cands, key=lambda c: c[0])
    return plan, res


def brute_force_optimize(scheme, cfg: SystemConfig, provider):
    """Plain enumeration of every candidate tuple; reference for tests and
    small grids."""
    scheme = Scheme(scheme)
    rates, grid = cfg.rate_table, cfg.time_partition_grid
    cands = []
    for r12 in rates:
        for r21 in rates:
            for t in grid:
                cands.append((RatePlan(scheme, r12, r21, t_i=t,
                                       relay_off=scheme is not Scheme.DIRECT),
                              provider.per_direct(r12, r21)))
            if scheme is Scheme.RDSTC:
                for rr2 in rates:
                    for rr1 in rates:
                        per = combine_rdstc(provider.per_rdstc("12", r12, rr2),
                                            provider.per_rdstc("21", r21, rr1))
                        for t in grid:
                            cands.append((RatePlan(scheme, r12, r21, rr2=rr2, rr1=rr1, t_i=t), per))
            elif scheme is Scheme.RDSTC_HR:
                for rr2 in rates:
                    for rr1 in rates:
                        cands.append((RatePlan(scheme, r12, r21, rr2=rr2, rr1=rr1),
                                      provider.per_hr(r12, r21, rr2, rr1)))
            elif scheme is Scheme.RDSTC_NC:
                for rr in rates:
                    cands.append((RatePlan(scheme, r12, r21, rr=rr), provider.per_nc(r12, r21, rr)))
    best = None
    for plan, per in cands:
        res = evaluate_plan(plan, per, cfg)
        if not res.feasible:
            continue
        key = _tie_key(plan, res.s12 + res.s21)
        if best is None or key < best[0]:
            best = (key, plan, res)
    if best is None:
        return None, SchemeResult.infeasible()
    return best[1], best[2]


def with_time_grid(cfg: SystemConfig, grid) -> SystemConfig:
    return replace(cfg, time_partition_grid=tuple(grid))
