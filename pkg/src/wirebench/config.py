"""INI-style run configuration shared by every CLI subcommand.

Sections and keys (all optional; defaults in the dataclasses below)::

    [paths]     dataset, ae32, ae16, labels        file locations
    [scenario]  any ScenarioConfig field, plus num_users
    [ae]        ratio, c1, c2, snr_low_db, snr_high_db, epochs, batch_size, lr
    [bench]     representations, train_sizes, snr_grid, seeds, epochs, batch_size,
                lr, beams, fov_deg, patch_length
    [power]     users, rho_min, rho_max, gamma_max, train_groups, test_groups,
                snr_db, supervised_fraction, warmup_fraction, pgd_iterations,
                pgd_restarts, epochs, lr

Lists are comma separated; ``inf`` is accepted wherever a number is.  Relative
paths resolve against the directory of the config file.  The only
environment override is ``WIREBENCH_OUT_DIR``, which sets the base directory
for relative ``--out`` paths.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field

from .channel import ScenarioConfig

OUT_DIR_ENV = "WIREBENCH_OUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    dataset: str = "dataset.wbds"
    ae32: str = "ae32.wbnn"
    ae16: str = "ae16.wbnn"
    labels: str = "labels.wblc"


@dataclass
class AESection:
    ratio: int = 32
    c1: int = 16
    c2: int = 32
    snr_low_db: float = 0.0
    snr_high_db: float = 20.0
    epochs: int = 12
    batch_size: int = 16
    lr: float = 1e-3


@dataclass
class BenchSection:
    representations: tuple = ("raw", "ae32", "patch")
    train_sizes: tuple = (100, 316, 1000, 3162, 10000)
    snr_grid: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 20.0, 30.0)
    seeds: tuple = (0, 1, 2)
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    beams: int = 32
    fov_deg: float = 120.0
    patch_length: int = 32


@dataclass
class PowerSection:
    users: int = 4
    rho_min: float = 0.3
    rho_max: float = 0.9
    gamma_max: float = 20.0
    train_groups: int = 400
    test_groups: int = 100
    snr_db: float = 5.0
    supervised_fraction: float = 0.25
    warmup_fraction: float = 0.6
    pgd_iterations: int = 200
    pgd_restarts: int = 5
    epochs: int = 30
    lr: float = 1e-3


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    num_users: int = 17000
    paths: Paths = field(default_factory=Paths)
    ae: AESection = field(default_factory=AESection)
    bench: BenchSection = field(default_factory=BenchSection)
    power: PowerSection = field(default_factory=PowerSection)
    base_dir: str = "."

    def path(self, key):
        p = getattr(self.paths, key)
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def with_seed(self, seed):
        """Copy with the scenario seed replaced (``--seed`` on the command line)."""
        return dataclasses.replace(self, scenario=dataclasses.replace(self.scenario, seed=seed))


def _convert(raw, default, key):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], str):
                return tuple(items)
            if default and isinstance(default[0], int) and not isinstance(default[0], bool):
                return tuple(int(s) for s in items)
            return tuple(float(s) for s in items)
        if default is None or isinstance(default, str):
            return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {key}: {exc}") from None
    raise ConfigError(f"unsupported type for {key}")


def _fill(obj, section, name):
    known = {f.name: f for f in dataclasses.fields(obj)}
    updates = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        default = getattr(obj, key)
        if key == "antenna_spacing":
            updates[key] = None if raw.strip().lower() in ("", "none") else float(raw)
        elif key in ("area", "bs_position", "blocker_size_range"):
            updates[key] = _convert(raw, (0.0,), key)
        else:
            updates[key] = _convert(raw, default, key)
    try:
        return dataclasses.replace(obj, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def parse_config(text, base_dir="."):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(base_dir=base_dir)
    for name in cp.sections():
        section = dict(cp[name])
        if name == "scenario":
            n = section.pop("num_users", None)
            if n is not None:
                cfg.num_users = _convert(n, 0, "num_users")
            cfg.scenario = _fill(cfg.scenario, section, name)
        elif name in ("paths", "ae", "bench", "power"):
            setattr(cfg, name, _fill(getattr(cfg, name), section, name))
        else:
            raise ConfigError(f"unknown section [{name}]")
    validate(cfg)
    return cfg


def load_config(path=None):
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def validate(cfg):
    b = cfg.bench
    if not b.train_sizes or not b.snr_grid or not b.seeds:
        raise ConfigError("train_sizes, snr_grid and seeds must be nonempty")
    if not b.representations:
        raise ConfigError("at least one representation is required")
    for r in b.representations:
        if r not in ("raw", "ae32", "ae16", "patch"):
            raise ConfigError(f"unknown representation {r!r} (raw, ae32, ae16, patch)")
    if cfg.num_users < 10:
        raise ConfigError("num_users must be at least 10")
    if cfg.ae.ratio not in (16, 32):
        raise ConfigError("ae ratio must be 16 or 32")
    if not 0.0 <= cfg.power.supervised_fraction <= 1.0:
        raise ConfigError("supervised_fraction must lie in [0, 1]")


def resolve_out(path):
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path
