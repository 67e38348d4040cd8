import math
from pathlib import Path

import numpy as np
import pytest

from coopvideo.config import load_spec, spec_from_dict
from coopvideo.harness import (
    PLAN_COLUMNS,
    REPORT_COLUMNS,
    AggregateEntry,
    AggregateReport,
    ExperimentSpec,
    PerCache,
    aggregate,
    compare_schemes,
    map_rate_to_psnr,
    read_plans_csv,
    read_report_csv,
    run_experiment,
)
from coopvideo.mcper import ChannelModel, Scheme
from coopvideo.phy import LinkModel
from coopvideo.scenario import RATES_80211G, ConfigError, Region, generate_placements

CURVE = [(0.0, 20.0), (1e6, 30.0), (2e6, 36.0)]


def small_spec(**kw):
    base = dict(distances=(60.0, 120.0), densities=(0.001,), placements_per_density=3,
                trials_per_estimate=200, seed=5)
    base.update(kw)
    return ExperimentSpec(**base)


def test_psnr_at_knots_and_between():
    assert map_rate_to_psnr(1e6, CURVE) == 30.0
    assert map_rate_to_psnr(1.5e6, CURVE) == pytest.approx(33.0)
    assert map_rate_to_psnr(5e6, CURVE) == 36.0
    assert map_rate_to_psnr(-1.0, CURVE) == 20.0


def test_psnr_curve_checked():
    with pytest.raises(ConfigError):
        map_rate_to_psnr(1e6, [(1e6, 30.0)])
    with pytest.raises(ConfigError):
        map_rate_to_psnr(1e6, [(2e6, 30.0), (1e6, 31.0)])


def _report(rates):
    entries = [AggregateEntry(s, 0.001, 100.0, 15, 0, r, 0.1 * r) for s, r in rates.items()]
    return AggregateReport(entries, [])


def test_compare_schemes_ratios():
    (e,) = compare_schemes(_report({"RDSTC_NC": 3e6, "RDSTC_HR": 3e6}))
    assert e.ratio == 1.0 and e.status == "ok"
    (e,) = compare_schemes(_report({"RDSTC_NC": 4e6, "RDSTC_HR": 3e6}))
    assert e.ratio == pytest.approx(4 / 3, abs=1e-12)
    assert e.stderr == pytest.approx(4 / 3 * math.hypot(0.1, 0.1))
    (e,) = compare_schemes(_report({"RDSTC_NC": 4e6}))
    assert e.ratio is None and e.status == "missing"
    (e,) = compare_schemes(_report({"RDSTC_NC": 4e6, "RDSTC_HR": 0.0}))
    assert e.status == "zero-denominator"


def test_aggregate_stats():
    plans = [{"scheme": "Direct", "density": 0.001, "distance": 50.0, "feasible": True,
              "avg_video_rate": v} for v in (1e6, 2e6, 3e6)]
    (e,) = aggregate(plans, [Scheme.DIRECT], [0.001], [50.0], {"seq": CURVE}).entries
    assert e.mean_rate == 2e6
    assert e.stderr_rate == pytest.approx(1e6 / math.sqrt(3))
    assert e.psnr["seq"] == pytest.approx(36.0)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    spec = small_spec(psnr_curves={"seq": CURVE})
    return out, spec, run_experiment(spec, out_dir=out)


def test_report_complete(small_run):
    out, spec, report = small_run
    assert len(report.entries) == len(spec.schemes) * len(spec.distances) * len(spec.densities)
    for e in report.entries:
        assert e.placements == spec.placements_per_density
        assert np.isfinite(e.mean_rate) and e.mean_rate >= 0
    for name in ("plans.csv", "report.csv", "ratios.csv"):
        assert (out / name).exists()
    header = (out / "plans.csv").read_text().splitlines()[0].split(",")
    assert tuple(header) == PLAN_COLUMNS
    header = (out / "report.csv").read_text().splitlines()[0].split(",")
    assert tuple(header) == REPORT_COLUMNS + ("psnr_seq",)


def test_report_recomputes_from_plans(small_run):
    out, spec, report = small_run
    plans = read_plans_csv(out / "plans.csv")
    again = aggregate(plans, spec.schemes, spec.densities, spec.distances, spec.psnr_curves)
    disk = read_report_csv(out / "report.csv")
    for a, b, c in zip(report.entries, again.entries, disk.entries):
        assert a.mean_rate == b.mean_rate == c.mean_rate
        assert a.stderr_rate == b.stderr_rate == c.stderr_rate
        assert a.psnr == b.psnr == c.psnr


def test_plans_respect_cap(small_run):
    out, spec, _ = small_run
    for row in read_plans_csv(out / "plans.csv"):
        if row["feasible"] == "1":
            assert float(row["p12"]) <= spec.system.per_cap
            assert float(row["p21"]) <= spec.system.per_cap


def test_lossless_direct_matches_formula():
    channel = ChannelModel(link=LinkModel.constant(RATES_80211G, 0.0))
    spec = small_spec(schemes=(Scheme.DIRECT,), channel=channel, distances=(80.0,))
    report = run_experiment(spec)
    assert report.mean_rate(Scheme.DIRECT, 0.001, 80.0) == pytest.approx(2.68e6)


def test_per_cache_reuse(tmp_path):
    pl = generate_placements(Region(), 0.001, 100.0, 1, seed=3)[0]
    ch = ChannelModel()
    first = PerCache(tmp_path).table(pl, ch, RATES_80211G, 100, 9)
    assert len(list(tmp_path.glob("*.npz"))) == 1
    second = PerCache(tmp_path).table(pl, ch, RATES_80211G, 100, 9)
    assert second.per_nc(54e6, 54e6, 24e6) == first.per_nc(54e6, 54e6, 24e6)
    assert second.per_rdstc("21", 12e6, 36e6) == first.per_rdstc("21", 12e6, 36e6)
    PerCache(tmp_path).table(pl, ch, RATES_80211G, 100, 10)
    assert len(list(tmp_path.glob("*.npz"))) == 2


def test_cached_run_identical(tmp_path):
    spec = small_spec(distances=(100.0,))
    plain = run_experiment(spec, out_dir=tmp_path / "a")
    run_experiment(spec, out_dir=tmp_path / "b", cache_dir=tmp_path / "cache")
    cached = run_experiment(spec, out_dir=tmp_path / "c", cache_dir=tmp_path / "cache")
    assert [e.mean_rate for e in plain.entries] == [e.mean_rate for e in cached.entries]
    for name in ("plans.csv", "report.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_default_config_loads():
    spec = load_spec()
    assert spec.system.tau == 0.005
    assert spec.densities == (0.0005, 0.001)
    assert spec.distances[0] == 20.0 and spec.distances[-1] == 140.0
    assert spec.placements_per_density == 15
    assert spec.schemes == (Scheme.DIRECT, Scheme.RDSTC, Scheme.RDSTC_HR, Scheme.RDSTC_NC)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        spec_from_dict({"system": {"bogus": 1}})
    with pytest.raises(ConfigError):
        spec_from_dict({"system": {"tau": 2.0}})
    with pytest.raises(ConfigError):
        spec_from_dict({"scenario": {"placements_per_density": 0}})
    with pytest.raises(ValueError):
        spec_from_dict({"schemes": ["Nope"]})


def test_config_psnr_and_link_files(tmp_path):
    (tmp_path / "seq.csv").write_text("rate_bps,psnr_db\n0,20\n1000000,30\n")
    LinkModel.constant(RATES_80211G, 0.01).to_csv(tmp_path / "link.csv")
    (tmp_path / "exp.toml").write_text(
        'seed = 4\n[psnr]\nseq = "seq.csv"\nsample = "psnr_sample.csv"\n'
        '[channel]\nlink_model = "link.csv"\n')
    spec = load_spec(tmp_path / "exp.toml")
    assert spec.seed == 4
    assert spec.psnr_curves["seq"] == [(0.0, 20.0), (1e6, 30.0)]
    assert len(spec.psnr_curves["sample"]) >= 2
    assert spec.channel.link.per_db(6e6, 10.0) == pytest.approx(0.01)
