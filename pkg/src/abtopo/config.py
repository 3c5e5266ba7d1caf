"""Run configuration: one flat record holding every tunable constant, a
key = value config-file parser, and override plumbing shared by the CLI.

Defaults are the reference operating point of the analysis: candidate window
0.01, disorder W = 0.3 with 200 realizations (50 for calibration), robustness
cut 0.05, radial cut 0.97, marker margin 0.05, group gap 0.01, plateau window
(0.01, 10).
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from .tiling import SystemSpec

WORKERS_ENV_VAR = "ABTOPO_WORKERS"


@dataclass
class RunConfig:
    # system geometry / flux
    r0: float = 12.0
    phi: float = 0.7375
    x0: float = 0.0
    y0: float = 0.0

    # identification thresholds
    candidate_eps: float = 0.01      # |Q - n| window for candidate selection
    omega_q_cut: float = 0.05        # disorder-robustness acceptance cut
    omega_r_cut: float = 0.97        # radial-measure bulk/edge split
    area_margin: float = 0.05        # marker-field threshold n - margin for A_i
    plateau_eps: float = 0.01        # plateau half-width in marker units
    plateau_delta_r: float = 10.0    # minimum plateau extent in radius
    group_gap: float = 0.01          # energy gap that separates candidate groups

    # disorder ensemble
    disorder_w: float = 0.3
    reps: int = 200
    calibration_reps: int = 50
    base_seed: int = 20260823

    # density of states (0 -> 50x median level spacing)
    dos_width: float = 0.0

    # charge pump
    pump_steps: int = 64
    overlap_floor: float = 0.9
    pump_min_step: float = 1.0 / 4096.0

    # sweep grids (comma-separated in config files / flags)
    flux_grid: tuple[float, ...] = tuple(round(0.05 * j, 2) for j in range(1, 20))
    radius_grid: tuple[float, ...] = (10.0, 12.0, 14.0, 16.0, 18.0)

    # execution / output
    out_dir: str = "runs"
    cache_dir: str = ""              # empty -> <out_dir>/cache
    workers: int = 0                 # 0 -> env var, then machine parallelism

    def system_spec(self) -> SystemSpec:
        return SystemSpec(r0=self.r0, phi=self.phi, x0=self.x0, y0=self.y0)

    def effective_cache_dir(self) -> str:
        return self.cache_dir or os.path.join(self.out_dir, "cache")

    def effective_workers(self) -> int:
        if self.workers > 0:
            return self.workers
        env = os.environ.get(WORKERS_ENV_VAR, "")
        if env.strip():
            return max(1, int(env))
        return os.cpu_count() or 1

    def validate(self) -> None:
        positive = [
            "r0", "candidate_eps", "omega_q_cut", "omega_r_cut", "area_margin",
            "plateau_eps", "plateau_delta_r", "group_gap", "pump_min_step",
        ]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.phi:
            raise ValueError(f"phi must be positive, got {self.phi}")
        if self.disorder_w < 0:
            raise ValueError(f"disorder_w must be nonnegative, got {self.disorder_w}")
        if self.reps < 1 or self.calibration_reps < 1:
            raise ValueError("realization counts must be at least 1")
        if self.pump_steps < 2:
            raise ValueError(f"pump_steps must be at least 2, got {self.pump_steps}")
        if not 0.0 < self.overlap_floor <= 1.0:
            raise ValueError(f"overlap_floor must lie in (0, 1], got {self.overlap_floor}")
        if self.dos_width < 0:
            raise ValueError(f"dos_width must be nonnegative, got {self.dos_width}")
        for grid_name in ("flux_grid", "radius_grid"):
            grid = getattr(self, grid_name)
            if any(v <= 0 for v in grid):
                raise ValueError(f"{grid_name} entries must be positive")

    def replace(self, **overrides) -> "RunConfig":
        cfg = dataclasses.replace(self, **overrides)
        cfg.validate()
        return cfg


def _coerce(name: str, ftype, raw: str):
    raw = raw.strip()
    if ftype is float:
        return float(raw)
    if ftype is int:
        return int(raw)
    if ftype is str:
        return raw
    # tuple-of-floats grids, comma separated
    parts = [p for p in raw.replace(",", " ").split() if p]
    return tuple(float(p) for p in parts)


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse flat `key = value` lines; `#` starts a comment; unknown keys are
    an error. Grid values are comma- or space-separated floats."""
    known = {f.name: f.type for f in fields(RunConfig)}
    type_map = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in known:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        ftype = type_map[key]
        overrides[key] = _coerce(key, ftype if ftype is not tuple else tuple, raw)
    cfg = dataclasses.replace(base or RunConfig(), **overrides)
    cfg.validate()
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), base=base)


def config_to_text(cfg: RunConfig) -> str:
    """Inverse of parse_config_text (round-trips every field)."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
