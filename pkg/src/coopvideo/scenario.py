"""System constants and random node placements."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .streams import derive_rng

# IEEE 802.11g OFDM rates, bits/s
RATES_80211G = (6e6, 9e6, 12e6, 18e6, 24e6, 36e6, 48e6, 54e6)


def default_time_grid() -> tuple[float, ...]:
    return tuple(round(k / 10, 10) for k in range(1, 10))


@dataclass(frozen=True)
class SystemConfig:
    beta: float = 0.1
    t_delay: float = 0.150
    packet_size: int = 1500 * 8
    tau: float = 0.005
    rate_table: tuple[float, ...] = RATES_80211G
    per_cap: float = 0.25
    time_partition_grid: tuple[float, ...] = field(default_factory=default_time_grid)

    def __post_init__(self):
        object.__setattr__(self, "rate_table", tuple(float(r) for r in self.rate_table))
        object.__setattr__(
            self, "time_partition_grid", tuple(float(t) for t in self.time_partition_grid)
        )


class ConfigError(ValueError):
    pass


def validate_config(cfg: SystemConfig) -> list[str]:
    """Return the violated invariants of ``cfg`` (empty when valid)."""
    problems = []
    if not 0 < cfg.beta <= 1:
        problems.append(f"beta must lie in (0, 1], got {cfg.beta}")
    if not cfg.t_delay > 0:
        problems.append(f"t_delay must be positive, got {cfg.t_delay}")
    if not cfg.packet_size > 0:
        problems.append(f"packet_size must be positive, got {cfg.packet_size}")
    if not 0 < cfg.tau < 1:
        problems.append(f"tau must lie in (0, 1), got {cfg.tau}")
    if not 0 < cfg.per_cap <= 1:
        problems.append(f"per_cap must lie in (0, 1], got {cfg.per_cap}")
    rates = cfg.rate_table
    if not rates:
        problems.append("rate_table is empty")
    elif any(b <= a for a, b in zip(rates, rates[1:])):
        problems.append("rate_table must be strictly increasing")
    elif rates[0] <= 0:
        problems.append("rates must be positive")
    grid = cfg.time_partition_grid
    if not grid:
        problems.append("time_partition_grid is empty")
    elif any(not 0 <= t <= 1 for t in grid):
        problems.append("time_partition_grid values must lie in [0, 1]")
    elif not any(0 < t < 1 for t in grid):
        problems.append("time_partition_grid needs at least one interior split")
    return problems


def check_config(cfg: SystemConfig) -> SystemConfig:
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


@dataclass(frozen=True)
class Region:
    """Axis-aligned deployment rectangle ``[0, width] x [0, height]``, meters."""

    width: float = 200.0
    height: float = 200.0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return self.width / 2, self.height / 2

    def contains(self, xy) -> bool:
        x, y = xy
        return 0 <= x <= self.width and 0 <= y <= self.height


@dataclass(frozen=True)
class NodePlacement:
    user1: tuple[float, float]
    user2: tuple[float, float]
    relays: np.ndarray  # shape (k, 2)

    @property
    def user_distance(self) -> float:
        return math.dist(self.user1, self.user2)

    @property
    def n_relays(self) -> int:
        return len(self.relays)

    def key(self) -> bytes:
        """Canonical byte form, used for content hashing."""
        arr = np.concatenate(
            [np.asarray([self.user1, self.user2], dtype=float), self.relays.reshape(-1, 2)]
        )
        return arr.astype("<f8").tobytes()

    def __eq__(self, other):
        if not isinstance(other, NodePlacement):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class PlacementEnsemble:
    placements: tuple[NodePlacement, ...]
    density: float
    user_distance: float
    seed: int
    region: Region = Region()

    def __len__(self):
        return len(self.placements)

    def __iter__(self):
        return iter(self.placements)

    def __getitem__(self, i):
        return self.placements[i]


def user_positions(region: Region, user_distance: float):
    cx, cy = region.center
    return (cx - user_distance / 2, cy), (cx + user_distance / 2, cy)


def generate_placements(
    region: Region,
    density: float,
    user_distance: float,
    count: int,
    seed: int,
    fixed_count: int | None = None,
) -> PlacementEnsemble:
    """Draw ``count`` independent placements of relay candidates.

    The two users sit on the horizontal line through the region center,
    ``user_distance`` apart. Each placement draws its relay count as
    Poisson(density * area), or uses ``fixed_count`` when given, then places
    relays uniformly. Placement ``i`` uses its own stream keyed by
    ``(seed, i)``, so the relay layout does not depend on ``user_distance``.
    """
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    if density < 0:
        raise ConfigError(f"density must be >= 0, got {density}")
    if user_distance <= 0 or user_distance > region.width:
        raise ConfigError(
            f"user distance {user_distance} m does not fit in a {region.width} m wide region"
        )
    u1, u2 = user_positions(region, user_distance)
    placements = []
    for i in range(count):
        rng = derive_rng(seed, "placement", i)
        k = fixed_count if fixed_count is not None else rng.poisson(density * region.area)
        xy = rng.uniform(0.0, 1.0, size=(int(k), 2)) * (region.width, region.height)
        placements.append(NodePlacement(u1, u2, xy))
    return PlacementEnsemble(tuple(placements), density, user_distance, seed, region)


PLACEMENT_COLUMNS = ("placement_id", "node_id", "role", "x", "y")


def write_placements_csv(path, ensemble: PlacementEnsemble) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLACEMENT_COLUMNS)
        for pid, pl in enumerate(ensemble):
            w.writerow([pid, 0, "user1", repr(pl.user1[0]), repr(pl.user1[1])])
            w.writerow([pid, 1, "user2", repr(pl.user2[0]), repr(pl.user2[1])])
            for j, (x, y) in enumerate(pl.relays):
                w.writerow([pid, j + 2, "relay", repr(float(x)), repr(float(y))])


def read_placements_csv(path) -> list[NodePlacement]:
    rows: dict[int, dict] = {}
    with open(Path(path), newline="") as fh:
        for rec in csv.DictReader(fh):
            pid = int(rec["placement_id"])
            slot = rows.setdefault(pid, {"relays": []})
            xy = (float(rec["x"]), float(rec["y"]))
            role = rec["role"]
            if role in ("user1", "user2"):
                slot[role] = xy
            elif role == "relay":
                slot["relays"].append((int(rec["node_id"]), xy))
            else:
                raise ConfigError(f"unknown role {role!r} in {path}")
    out = []
    for pid in sorted(rows):
        slot = rows[pid]
        if "user1" not in slot or "user2" not in slot:
            raise ConfigError(f"placement {pid} in {path} lacks a user row")
        relays = np.array([xy for _, xy in sorted(slot["relays"])], dtype=float).reshape(-1, 2)
        out.append(NodePlacement(slot["user1"], slot["user2"], relays))
    return out
