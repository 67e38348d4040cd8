import math
from dataclasses import replace

import numpy as np
import pytest

from coopvideo.scenario import (
    ConfigError,
    Region,
    SystemConfig,
    generate_placements,
    read_placements_csv,
    validate_config,
    write_placements_csv,
)


def test_default_config_is_valid():
    cfg = SystemConfig()
    assert validate_config(cfg) == []
    assert cfg.rate_table == (6e6, 9e6, 12e6, 18e6, 24e6, 36e6, 48e6, 54e6)
    assert (cfg.beta, cfg.t_delay, cfg.packet_size, cfg.tau, cfg.per_cap) == (
        0.1, 0.15, 12000, 0.005, 0.25)


@pytest.mark.parametrize("change", [
    dict(beta=0.0),
    dict(beta=1.5),
    dict(t_delay=0.0),
    dict(packet_size=0),
    dict(tau=0.0),
    dict(tau=1.0),
    dict(per_cap=0.0),
    dict(rate_table=(6e6, 12e6, 9e6)),
    dict(rate_table=(6e6, 6e6)),
    dict(rate_table=()),
    dict(time_partition_grid=(0.5, 1.2)),
    dict(time_partition_grid=(0.0, 1.0)),
])
def test_violations_reported(change):
    assert validate_config(replace(SystemConfig(), **change))


def test_zero_density_has_no_relays():
    ens = generate_placements(Region(), 0.0, 50, 5, seed=3)
    assert all(p.n_relays == 0 for p in ens)


def test_deterministic():
    a = generate_placements(Region(), 0.001, 80, 15, seed=42)
    b = generate_placements(Region(), 0.001, 80, 15, seed=42)
    assert [p.key() for p in a] == [p.key() for p in b]
    c = generate_placements(Region(), 0.001, 80, 15, seed=43)
    assert [p.key() for p in a] != [p.key() for p in c]


def test_relay_layout_independent_of_distance():
    a = generate_placements(Region(), 0.001, 40, 4, seed=9)
    b = generate_placements(Region(), 0.001, 140, 4, seed=9)
    for pa, pb in zip(a, b):
        np.testing.assert_array_equal(pa.relays, pb.relays)


def test_poisson_mean_count():
    ens = generate_placements(Region(200, 200), 0.001, 100, 15, seed=1)
    counts = [p.n_relays for p in ens]
    mean, lam = np.mean(counts), 0.001 * 200 * 200
    assert abs(mean - lam) <= 3 * math.sqrt(lam / len(counts))


def test_uniform_positions_and_geometry():
    region = Region(200, 150)
    ens = generate_placements(region, 0.002, 120, 200, seed=5)
    xs = np.concatenate([p.relays[:, 0] for p in ens])
    assert xs.size >= 10_000
    sigma = region.width / math.sqrt(12) / math.sqrt(xs.size)
    assert abs(xs.mean() - region.width / 2) <= 3 * sigma
    for p in ens:
        assert math.isclose(p.user_distance, 120, rel_tol=1e-9)
        assert p.user1[1] == p.user2[1] == region.height / 2
        assert all(region.contains(xy) for xy in p.relays)


def test_fixed_count_mode():
    ens = generate_placements(Region(), 0.001, 60, 3, seed=2, fixed_count=7)
    assert [p.n_relays for p in ens] == [7, 7, 7]


def test_user_distance_must_fit():
    with pytest.raises(ConfigError):
        generate_placements(Region(100, 100), 0.001, 150, 1, seed=0)


def test_csv_roundtrip(tmp_path):
    ens = generate_placements(Region(), 0.001, 70, 4, seed=11)
    path = tmp_path / "pl.csv"
    write_placements_csv(path, ens)
    back = read_placements_csv(path)
    assert [p.key() for p in back] == [p.key() for p in ens]
    assert path.read_text().splitlines()[0] == "placement_id,node_id,role,x,y"
