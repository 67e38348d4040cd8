"""Monte Carlo end-to-end packet error rates for the four schemes.

A :class:`Realization` holds every random draw one batch of trials needs
for a placement: per-packet fading and a decision uniform for each link
the schemes can use. A packet on a link is decoded when its uniform is at
least the link PER at the instantaneous SNR. All schemes and rate tuples
read the same realization, so outcomes are coupled trial by trial: lower
rates never decode less, and relaying never loses a packet the direct
link delivered.

Relays transmit with per-relay power ``1 / max(K, 1)`` where ``K`` is the
average relay-set size, measured first in a calibration pass over the
realization's hop-1 outcomes.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .phy import FadingModel, LinkModel, PathLossModel, RdstcModel, default_link_model, mean_snr_linear
from .scenario import ConfigError, NodePlacement
from .streams import derive_rng


class Scheme(str, enum.Enum):
    DIRECT = "Direct"
    RDSTC = "RDSTC"
    RDSTC_HR = "RDSTC_HR"
    RDSTC_NC = "RDSTC_NC"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ChannelModel:
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    fading: FadingModel = field(default_factory=FadingModel)
    link: LinkModel = field(default_factory=default_link_model)
    rdstc: RdstcModel = field(default_factory=RdstcModel)

    def digest(self) -> str:
        return repr((self.path_loss, self.fading, self.rdstc, self.link.digest()))


@dataclass(frozen=True)
class PerEstimate:
    """End-to-end PER per direction.

    Single-direction estimates (plain R-DSTC) leave the other direction as
    ``None``.
    """

    scheme: Scheme
    rates: tuple
    p12: float | None
    p21: float | None
    avg_relay_count: float
    trials: int

    @staticmethod
    def _stderr(p, n):
        return None if p is None else math.sqrt(p * (1 - p) / n)

    @property
    def stderr12(self):
        return self._stderr(self.p12, self.trials)

    @property
    def stderr21(self):
        return self._stderr(self.p21, self.trials)


@dataclass(frozen=True)
class TrialOutcome:
    decoded_at_2: bool
    decoded_at_1: bool
    relay_set_size: int


class Realization:
    """Random draws for ``trials`` packets exchanged over one placement.

    Draw order is fixed so that two estimators fed identical generators see
    identical channels.
    """

    def __init__(self, placement: NodePlacement, channel: ChannelModel, trials: int,
                 rng: np.random.Generator):
        if trials < 1:
            raise ValueError("trials must be >= 1")
        self.placement = placement
        self.channel = channel
        self.trials = T = trials
        relays = np.asarray(placement.relays, dtype=float).reshape(-1, 2)
        N = len(relays)
        pl = channel.path_loss
        fade = channel.fading.sample

        m12 = float(mean_snr_linear(placement.user_distance, pl))
        m1n = mean_snr_linear(np.hypot(*(relays - placement.user1).T), pl) if N else np.zeros(0)
        m2n = mean_snr_linear(np.hypot(*(relays - placement.user2).T), pl) if N else np.zeros(0)

        # user <-> user, both directions
        self.snr_d12 = m12 * fade(rng, T)
        self.snr_d21 = m12 * fade(rng, T)
        # hop-1 receptions at relay candidates
        self.snr_1n = m1n * fade(rng, (T, N))
        self.snr_2n = m2n * fade(rng, (T, N))
        # relay -> user gains at full power (reciprocal means)
        self.gain_n2 = m2n * fade(rng, (T, N))
        self.gain_n1 = m1n * fade(rng, (T, N))
        self.u_d12 = rng.random(T)
        self.u_d21 = rng.random(T)
        self.u_1n = rng.random((T, N))
        self.u_2n = rng.random((T, N))
        self.u_r2 = rng.random(T)
        self.u_r1 = rng.random(T)
        # seeds for R-DSTC weight draws; a fresh generator per relay hop
        # keeps the draws identical across relay rates
        self._rdstc_seed2 = int(rng.integers(2**63))
        self._rdstc_seed1 = int(rng.integers(2**63))

    @property
    def link(self) -> LinkModel:
        return self.channel.link

    def _ok(self, rate, snr, u):
        return u >= self.link.per_linear(rate, snr)

    def direct_ok(self, rate, direction: str) -> np.ndarray:
        if direction == "12":
            return self._ok(rate, self.snr_d12, self.u_d12)
        return self._ok(rate, self.snr_d21, self.u_d21)

    def relays_decoding(self, rate, source: int) -> np.ndarray:
        """(T, N) mask of candidates that decoded ``source``'s hop-1 packet."""
        if source == 1:
            return self._ok(rate, self.snr_1n, self.u_1n)
        return self._ok(rate, self.snr_2n, self.u_2n)

    def summed_gain(self, relay_mask: np.ndarray, dest: int) -> np.ndarray:
        g = self.gain_n2 if dest == 2 else self.gain_n1
        return np.einsum("tn,tn->t", relay_mask.astype(float), g)

    def relay_hop_ok(self, rate, summed_gain, fraction, dest: int) -> np.ndarray:
        rng = np.random.default_rng(self._rdstc_seed2 if dest == 2 else self._rdstc_seed1)
        snr = self.channel.rdstc.combine(summed_gain, fraction, rng)
        u = self.u_r2 if dest == 2 else self.u_r1
        return self._ok(rate, snr, u)


def calibrate_relay_count(relay_mask: np.ndarray) -> float:
    """Average relay-set size over the trials (calibration pass)."""
    if relay_mask.shape[1] == 0:
        return 0.0
    return float(relay_mask.sum(axis=1).mean())


def power_fraction(avg_relay_count: float) -> float:
    return 1.0 / max(avg_relay_count, 1.0)


def _failure_rate(ok: np.ndarray) -> float:
    return float(np.count_nonzero(~ok)) / ok.size


def _check_rates(channel: ChannelModel, *rates):
    known = channel.link.curves
    for r in rates:
        if float(r) not in known:
            raise ConfigError(f"rate {r:g} b/s is not in the link model")


def _realize(placement, channel, trials, rng):
    channel = channel if channel is not None else ChannelModel()
    return Realization(placement, channel, trials, rng)


def _trace(ok2, ok1, sizes):
    return [TrialOutcome(bool(a), bool(b), int(k)) for a, b, k in zip(ok2, ok1, sizes)]


def estimate_direct(placement, R12, R21, trials, rng, channel=None, trace=False):
    real = _realize(placement, channel, trials, rng)
    _check_rates(real.channel, R12, R21)
    ok2 = real.direct_ok(R12, "12")
    ok1 = real.direct_ok(R21, "21")
    est = PerEstimate(Scheme.DIRECT, (("r12", R12), ("r21", R21)),
                      _failure_rate(ok2), _failure_rate(ok1), 0.0, trials)
    if trace:
        return est, _trace(ok2, ok1, np.zeros(trials, dtype=int))
    return est


def estimate_rdstc(placement, direction, R_src, R_relay, trials, rng, channel=None, trace=False):
    """Two-hop R-DSTC in one direction (``"12"`` or ``"21"``).

    Relays are the candidates that decoded the source packet; the
    destination keeps the packet if either the direct hop or the R-DSTC
    hop succeeds.
    """
    if direction not in ("12", "21"):
        raise ValueError(f"direction must be '12' or '21', got {direction!r}")
    real = _realize(placement, channel, trials, rng)
    _check_rates(real.channel, R_src, R_relay)
    src, dst = (1, 2) if direction == "12" else (2, 1)
    relays = real.relays_decoding(R_src, src)
    kbar = calibrate_relay_count(relays)
    summed = real.summed_gain(relays, dst)
    ok = real.direct_ok(R_src, direction) | real.relay_hop_ok(R_relay, summed, power_fraction(kbar), dst)
    p = _failure_rate(ok)
    if direction == "12":
        est = PerEstimate(Scheme.RDSTC, (("r12", R_src), ("rr2", R_relay)), p, None, kbar, trials)
    else:
        est = PerEstimate(Scheme.RDSTC, (("r21", R_src), ("rr1", R_relay)), None, p, kbar, trials)
    if trace:
        sizes = relays.sum(axis=1)
        none = np.zeros(trials, dtype=bool)
        ok2, ok1 = (ok, none) if direction == "12" else (none, ok)
        return est, _trace(ok2, ok1, sizes)
    return est


def _common_relays(real, R12, R21):
    s1 = real.relays_decoding(R12, 1)
    s2 = real.relays_decoding(R21, 2)
    return s1 & s2


def estimate_rdstc_hr(placement, R12, R21, Rr2, Rr1, trials, rng, channel=None, trace=False):
    """Hop-reordered R-DSTC: both users send, then the common decoders
    forward each packet in its own R-DSTC hop."""
    real = _realize(placement, channel, trials, rng)
    _check_rates(real.channel, R12, R21, Rr2, Rr1)
    S = _common_relays(real, R12, R21)
    kbar = calibrate_relay_count(S)
    f = power_fraction(kbar)
    ok2 = real.direct_ok(R12, "12") | real.relay_hop_ok(Rr2, real.summed_gain(S, 2), f, 2)
    ok1 = real.direct_ok(R21, "21") | real.relay_hop_ok(Rr1, real.summed_gain(S, 1), f, 1)
    est = PerEstimate(Scheme.RDSTC_HR, (("r12", R12), ("r21", R21), ("rr2", Rr2), ("rr1", Rr1)),
                      _failure_rate(ok2), _failure_rate(ok1), kbar, trials)
    if trace:
        return est, _trace(ok2, ok1, S.sum(axis=1))
    return est


def estimate_rdstc_nc(placement, R12, R21, Rr, trials, rng, channel=None, trace=False):
    """R-DSTC with XOR network coding: the common decoders send one XOR
    packet heard by both users in the same hop."""
    real = _realize(placement, channel, trials, rng)
    _check_rates(real.channel, R12, R21, Rr)
    S = _common_relays(real, R12, R21)
    kbar = calibrate_relay_count(S)
    f = power_fraction(kbar)
    # each user XORs the relayed packet with its own
    ok2 = real.direct_ok(R12, "12") | real.relay_hop_ok(Rr, real.summed_gain(S, 2), f, 2)
    ok1 = real.direct_ok(R21, "21") | real.relay_hop_ok(Rr, real.summed_gain(S, 1), f, 1)
    est = PerEstimate(Scheme.RDSTC_NC, (("r12", R12), ("r21", R21), ("rr", Rr)),
                      _failure_rate(ok2), _failure_rate(ok1), kbar, trials)
    if trace:
        return est, _trace(ok2, ok1, S.sum(axis=1))
    return est


TRACE_COLUMNS = ("trial", "relay_set_size", "decoded_at_1", "decoded_at_2")


def write_trace_csv(path, outcomes) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i, o in enumerate(outcomes):
            w.writerow([i, o.relay_set_size, int(o.decoded_at_1), int(o.decoded_at_2)])


def placement_rng(seed: int, placement: NodePlacement) -> np.random.Generator:
    """Channel stream for a placement, keyed by its coordinates."""
    digest = hashlib.sha256(placement.key()).digest()
    return derive_rng(seed, "channel", int.from_bytes(digest[:8], "little"))


class PerTable:
    """Every PER the optimizer can ask for, for one placement.

    Tables are indexed by positions in ``rates`` and filled lazily from a
    single realization drawn from ``placement_rng(seed, placement)``; each
    entry equals what the corresponding ``estimate_*`` function returns for
    that generator. HR and NC use the same common relay set and the same
    relay-to-user receptions, so they share one table and differ only in
    airtime.
    """

    def __init__(self, placement, rates, trials=1000, seed=0, channel=None, arrays=None):
        self.placement = placement
        self.rates = tuple(float(r) for r in rates)
        self.trials = trials
        self.index = {r: i for i, r in enumerate(self.rates)}
        self._arrays = dict(arrays or {})
        self._real = None
        self._channel = channel if channel is not None else ChannelModel()
        self._seed = seed
        _check_rates(self._channel, *self.rates)

    @property
    def real(self) -> Realization:
        if self._real is None:
            self._real = Realization(self.placement, self._channel, self.trials,
                                     placement_rng(self._seed, self.placement))
        return self._real

    def _get(self, name, build):
        if name not in self._arrays:
            self._arrays.update(build())
        return self._arrays[name]

    def _build_direct(self):
        real = self.real
        ok12 = np.array([real.direct_ok(r, "12") for r in self.rates])
        ok21 = np.array([real.direct_ok(r, "21") for r in self.rates])
        return {
            "direct12": (~ok12).mean(axis=1),
            "direct21": (~ok21).mean(axis=1),
        }

    def _build_rdstc(self):
        real, R = self.real, len(self.rates)
        out = {}
        for direction, src, dst in (("12", 1, 2), ("21", 2, 1)):
            p = np.empty((R, R))
            kbar = np.empty(R)
            for i, rs in enumerate(self.rates):
                relays = real.relays_decoding(rs, src)
                kbar[i] = calibrate_relay_count(relays)
                summed = real.summed_gain(relays, dst)
                direct = real.direct_ok(rs, direction)
                f = power_fraction(kbar[i])
                for j, rr in enumerate(self.rates):
                    p[i, j] = _failure_rate(direct | real.relay_hop_ok(rr, summed, f, dst))
            out["rdstc" + direction] = p
            out["rdstc_kbar" + direction] = kbar
        return out

    def _build_common(self):
        real, R = self.real, len(self.rates)
        dec1 = [real.relays_decoding(r, 1) for r in self.rates]
        dec2 = [real.relays_decoding(r, 2) for r in self.rates]
        d12 = [real.direct_ok(r, "12") for r in self.rates]
        d21 = [real.direct_ok(r, "21") for r in self.rates]
        p12 = np.empty((R, R, R))
        p21 = np.empty((R, R, R))
        kbar = np.empty((R, R))
        for a in range(R):
            for b in range(R):
                S = dec1[a] & dec2[b]
                kbar[a, b] = k = calibrate_relay_count(S)
                f = power_fraction(k)
                g2 = real.summed_gain(S, 2)
                g1 = real.summed_gain(S, 1)
                for c, rr in enumerate(self.rates):
                    p12[a, b, c] = _failure_rate(d12[a] | real.relay_hop_ok(rr, g2, f, 2))
                    p21[a, b, c] = _failure_rate(d21[b] | real.relay_hop_ok(rr, g1, f, 1))
        return {"common12": p12, "common21": p21, "common_kbar": kbar}

    def compute_all(self) -> dict:
        for name, build in (("direct12", self._build_direct), ("rdstc12", self._build_rdstc),
                            ("common12", self._build_common)):
            self._get(name, build)
        return dict(self._arrays)

    # array views used by the optimizer
    def direct_table(self):
        return self._get("direct12", self._build_direct), self._get("direct21", self._build_direct)

    def rdstc_table(self, direction):
        p = self._get("rdstc" + direction, self._build_rdstc)
        return p, self._arrays["rdstc_kbar" + direction]

    def common_table(self):
        p12 = self._get("common12", self._build_common)
        return p12, self._arrays["common21"], self._arrays["common_kbar"]

    # PerEstimate views
    def per_direct(self, r12, r21) -> PerEstimate:
        p12, p21 = self.direct_table()
        i, j = self.index[float(r12)], self.index[float(r21)]
        return PerEstimate(Scheme.DIRECT, (("r12", r12), ("r21", r21)),
                           float(p12[i]), float(p21[j]), 0.0, self.trials)

    def per_rdstc(self, direction, r_src, r_relay) -> PerEstimate:
        p, kbar = self.rdstc_table(direction)
        i, j = self.index[float(r_src)], self.index[float(r_relay)]
        if direction == "12":
            return PerEstimate(Scheme.RDSTC, (("r12", r_src), ("rr2", r_relay)),
                               float(p[i, j]), None, float(kbar[i]), self.trials)
        return PerEstimate(Scheme.RDSTC, (("r21", r_src), ("rr1", r_relay)),
                           None, float(p[i, j]), float(kbar[i]), self.trials)

    def per_hr(self, r12, r21, rr2, rr1) -> PerEstimate:
        p12, p21, kbar = self.common_table()
        a, b = self.index[float(r12)], self.index[float(r21)]
        return PerEstimate(Scheme.RDSTC_HR, (("r12", r12), ("r21", r21), ("rr2", rr2), ("rr1", rr1)),
                           float(p12[a, b, self.index[float(rr2)]]),
                           float(p21[a, b, self.index[float(rr1)]]),
                           float(kbar[a, b]), self.trials)

    def per_nc(self, r12, r21, rr) -> PerEstimate:
        p12, p21, kbar = self.common_table()
        a, b, c = self.index[float(r12)], self.index[float(r21)], self.index[float(rr)]
        return PerEstimate(Scheme.RDSTC_NC, (("r12", r12), ("r21", r21), ("rr", rr)),
                           float(p12[a, b, c]), float(p21[a, b, c]), float(kbar[a, b]), self.trials)
