"""TOML experiment files -> :class:`ExperimentSpec`."""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .harness import ExperimentSpec, read_psnr_csv
from .mcper import ChannelModel
from .phy import FadingModel, LinkModel, PathLossModel, RdstcModel, default_link_model
from .scenario import ConfigError, Region, SystemConfig

_SYSTEM_KEYS = {"beta", "t_delay", "packet_size", "tau", "per_cap", "rate_table",
                "time_partition_grid"}


def default_config_path() -> Path:
    return Path(str(resources.files("coopvideo").joinpath("data/default.toml")))


def _resolve(base: Path, name: str) -> Path:
    p = Path(name)
    if not p.is_absolute():
        p = base / p
        if not p.exists():
            bundled = Path(str(resources.files("coopvideo").joinpath("data", name)))
            if bundled.exists():
                return bundled
    return p


def load_spec(path=None) -> ExperimentSpec:
    path = Path(path) if path is not None else default_config_path()
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return spec_from_dict(doc, base=path.parent)


def spec_from_dict(doc: dict, base: Path = Path(".")) -> ExperimentSpec:
    sysd = dict(doc.get("system", {}))
    unknown = set(sysd) - _SYSTEM_KEYS
    if unknown:
        raise ConfigError(f"unknown [system] keys: {sorted(unknown)}")
    system = SystemConfig(**sysd)

    scen = doc.get("scenario", {})
    w, h = scen.get("region", (200.0, 200.0))
    chan = doc.get("channel", {})
    link = (LinkModel.from_csv(_resolve(base, chan["link_model"]))
            if "link_model" in chan else default_link_model())
    channel = ChannelModel(
        path_loss=PathLossModel(
            exponent=float(chan.get("path_loss_exponent", 3.0)),
            ref_distance=float(chan.get("ref_distance", 1.0)),
            ref_snr_db=float(chan.get("ref_snr_db", 76.0)),
        ),
        fading=FadingModel(chan.get("fading", "rayleigh"), float(chan.get("nakagami_m", 1.0))),
        link=link,
        rdstc=RdstcModel(chan.get("rdstc_diversity", "full"), int(chan.get("stc_dimension", 2))),
    )
    psnr = {name: read_psnr_csv(_resolve(base, f)) for name, f in doc.get("psnr", {}).items()}

    spec = ExperimentSpec(
        system=system,
        distances=tuple(scen.get("distances", ExperimentSpec.distances)),
        densities=tuple(scen.get("densities", ExperimentSpec.densities)),
        placements_per_density=int(scen.get("placements_per_density", 15)),
        schemes=tuple(doc.get("schemes", ExperimentSpec.schemes)),
        trials_per_estimate=int(doc.get("trials", 1000)),
        seed=int(doc.get("seed", 0)),
        region=Region(float(w), float(h)),
        channel=channel,
        psnr_curves=psnr,
        fixed_relay_count=scen.get("fixed_relay_count"),
    )
    missing = [r for r in system.rate_table if r not in link.curves]
    if missing:
        raise ConfigError(f"link model lacks curves for rates {missing}")
    spec.validate()
    return spec
