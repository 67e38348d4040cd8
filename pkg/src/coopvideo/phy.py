"""Link-level abstraction: path loss, block fading, SNR->PER curves and
randomized distributed space-time coded (R-DSTC) reception.

Instantaneous SNRs are handled in linear units internally; ``link_per``
takes dB because the curves are tabulated in dB.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .scenario import ConfigError

__all__ = [
    "PathLossModel",
    "FadingModel",
    "FadingDraw",
    "LinkModel",
    "RdstcModel",
    "mean_snr_db",
    "mean_snr_linear",
    "draw_fading",
    "link_per",
    "packet_success",
    "rdstc_effective_snr",
    "default_link_model",
]


@dataclass(frozen=True)
class PathLossModel:
    exponent: float = 3.0
    ref_distance: float = 1.0
    ref_snr_db: float = 76.0

    def __post_init__(self):
        if not self.exponent > 0 or not self.ref_distance > 0:
            raise ConfigError("path-loss exponent and reference distance must be positive")


def mean_snr_db(tx, rx, model: PathLossModel, power_fraction: float = 1.0) -> float:
    """Average received SNR in dB for a transmitter at ``tx`` and receiver at ``rx``."""
    if not 0 < power_fraction <= 1:
        raise ValueError(f"power_fraction must lie in (0, 1], got {power_fraction}")
    d = math.dist(tx, rx)
    if d == 0:
        raise ValueError("transmitter and receiver are co-located")
    return (
        model.ref_snr_db
        - 10 * model.exponent * math.log10(d / model.ref_distance)
        + 10 * math.log10(power_fraction)
    )


def mean_snr_linear(distance, model: PathLossModel) -> np.ndarray:
    """Vectorized full-power mean SNR (linear) for an array of distances."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("co-located nodes in placement")
    snr_db = model.ref_snr_db - 10 * model.exponent * np.log10(d / model.ref_distance)
    return 10 ** (snr_db / 10)


@dataclass(frozen=True)
class FadingDraw:
    power_gain: float


@dataclass(frozen=True)
class FadingModel:
    """Unit-mean per-packet power gain.

    ``kind`` is ``"rayleigh"`` (exponential gain), ``"nakagami"`` (gamma gain
    with shape ``m``) or ``"none"`` (gain fixed at 1).
    """

    kind: str = "rayleigh"
    m: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rayleigh", "nakagami", "none"):
            raise ConfigError(f"unknown fading kind {self.kind!r}")
        if self.kind == "nakagami" and not self.m >= 0.5:
            raise ConfigError("nakagami m must be >= 0.5")

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "rayleigh":
            return rng.standard_exponential(size)
        if self.kind == "nakagami":
            return rng.gamma(self.m, 1.0 / self.m, size)
        return np.ones(size) if size is not None else 1.0


def draw_fading(rng: np.random.Generator, model: FadingModel = FadingModel()) -> FadingDraw:
    return FadingDraw(float(model.sample(rng)))


class LinkModel:
    """Per-rate packet error curves sampled on an SNR grid (dB).

    Lookups interpolate linearly in dB between samples. Below the first
    sample the PER is 1; above the last it is the curve's minimum.
    """

    def __init__(self, curves):
        self.curves = {}
        for rate, (snr_db, per) in curves.items():
            snr_db = np.asarray(snr_db, dtype=float)
            per = np.asarray(per, dtype=float)
            order = np.argsort(snr_db, kind="stable")
            self.curves[float(rate)] = (snr_db[order], per[order])

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(sorted(self.curves))

    def _curve(self, rate):
        try:
            return self.curves[float(rate)]
        except KeyError:
            raise ConfigError(f"no PER curve for rate {rate:g} b/s") from None

    def per_db(self, rate, snr_db):
        xs, ps = self._curve(rate)
        return np.interp(snr_db, xs, ps, left=1.0, right=float(ps.min()))

    def per_linear(self, rate, snr_lin):
        """PER for linear SNRs; zero SNR (no signal) maps to PER 1."""
        snr_lin = np.asarray(snr_lin, dtype=float)
        with np.errstate(divide="ignore"):
            snr_db = 10 * np.log10(snr_lin)
        return self.per_db(rate, snr_db)

    def validate(self) -> list[str]:
        problems = []
        rates = self.rates
        for r in rates:
            xs, ps = self.curves[r]
            if len(xs) < 2:
                problems.append(f"rate {r:g}: need at least two samples")
                continue
            if np.any((ps < 0) | (ps > 1)):
                problems.append(f"rate {r:g}: PER outside [0, 1]")
            if np.any(np.diff(ps) > 0):
                problems.append(f"rate {r:g}: PER increases with SNR")
            if ps.max() < 0.999 or ps.min() > 1e-4:
                problems.append(f"rate {r:g}: curve does not span PER 0.999 .. 1e-4")
        lo = min(self.curves[r][0][0] for r in rates)
        hi = max(self.curves[r][0][-1] for r in rates)
        grid = np.linspace(lo - 1, hi + 1, 2001)
        table = np.array([self.per_db(r, grid) for r in rates])
        if np.any(np.diff(table, axis=0) < -1e-12):
            problems.append("PER is not non-decreasing in rate at fixed SNR")
        return problems

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.rates:
            xs, ps = self.curves[r]
            h.update(np.float64(r).tobytes())
            h.update(xs.astype("<f8").tobytes())
            h.update(ps.astype("<f8").tobytes())
        return h.hexdigest()

    @classmethod
    def from_csv(cls, path) -> "LinkModel":
        pts: dict[float, list] = {}
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                pts.setdefault(float(rec["rate_bps"]), []).append(
                    (float(rec["snr_db"]), float(rec["per"]))
                )
        if not pts:
            raise ConfigError(f"link model file {path} is empty")
        return cls({r: tuple(zip(*sorted(v))) for r, v in pts.items()})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rate_bps", "snr_db", "per"])
            for r in self.rates:
                for x, p in zip(*self.curves[r]):
                    w.writerow([f"{r:.0f}", f"{x:g}", f"{p:.6e}"])

    @classmethod
    def constant(cls, rates, per: float, span_db: float = 300.0) -> "LinkModel":
        """Flat PER at every finite SNR, for testing against closed forms."""
        return cls({r: ([-span_db, span_db], [per, per]) for r in rates})


def logistic_curves(rates, snr50_db, slope_db=0.4, grid=None):
    """Waterfall curves ``1 / (1 + exp((snr - snr50) / slope))``."""
    grid = np.arange(-10.0, 40.0001, 0.25) if grid is None else np.asarray(grid)
    curves = {}
    for r, mid in zip(rates, snr50_db):
        z = np.clip((grid - mid) / slope_db, -700, 700)
        curves[r] = (grid, 1.0 / (1.0 + np.exp(z)))
    return curves


def default_link_model() -> LinkModel:
    """Bundled 802.11g-shaped curve set (illustrative, not measured)."""
    ref = resources.files("coopvideo").joinpath("data/link_80211g.csv")
    with resources.as_file(ref) as p:
        return LinkModel.from_csv(Path(p))


def link_per(rate, inst_snr_db, model: LinkModel) -> float:
    return float(model.per_db(rate, inst_snr_db))


def packet_success(rate, inst_snr_db, model: LinkModel, rng: np.random.Generator) -> bool:
    return bool(rng.random() >= link_per(rate, inst_snr_db, model))


@dataclass(frozen=True)
class RdstcModel:
    """Reception model for simultaneous R-DSTC relay transmissions.

    ``"full"`` treats the relays as ideal full-diversity transmit antennas.
    ``"randomized"`` draws the random relay weights of an ``stc_dimension``
    stream code: given the channel, the equivalent L-stream channel is
    Gaussian, so the received SNR is the full-diversity SNR scaled by an
    independent Gamma(L, 1/L) variate, capping diversity at L.
    """

    diversity: str = "full"
    stc_dimension: int = 2

    def __post_init__(self):
        if self.diversity not in ("full", "randomized"):
            raise ConfigError(f"unknown R-DSTC diversity mode {self.diversity!r}")
        if self.stc_dimension < 1:
            raise ConfigError("stc_dimension must be >= 1")

    def combine(self, summed_gain, per_relay_power_fraction, rng=None):
        snr = per_relay_power_fraction * np.asarray(summed_gain, dtype=float)
        if self.diversity == "randomized":
            L = self.stc_dimension
            snr = snr * rng.gamma(L, 1.0 / L, size=snr.shape)
        return snr


def rdstc_effective_snr(relay_gains, per_relay_power_fraction: float,
                        model: RdstcModel = RdstcModel(), rng=None) -> float:
    """Linear SNR at a receiver of an R-DSTC transmission.

    ``relay_gains`` are per-relay linear SNRs at full power (path loss and
    fading already applied). No relays means no signal, returned as 0.
    """
    if not 0 < per_relay_power_fraction <= 1:
        raise ValueError(f"power fraction must lie in (0, 1], got {per_relay_power_fraction}")
    gains = np.asarray(relay_gains, dtype=float)
    if gains.size == 0:
        return 0.0
    return float(model.combine(gains.sum(), per_relay_power_fraction, rng))
