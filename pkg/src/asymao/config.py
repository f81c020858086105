"""Run configuration: INI files with strict key checking.

Every field has a default, so an empty file (or no file) is a valid
configuration. Unknown sections or keys are rejected loudly rather than
ignored, and the fully resolved configuration is echoed into the output
directory so a run can always be reproduced from its artifacts alone.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields
from pathlib import Path

OUTPUT_ROOT_ENV = "ASYMAO_OUT"

# section -> dataclass field names serialized under it
_SECTIONS = {
    "run": ("grid_n", "pad_factor", "seed", "noise_sigma", "output_dir"),
    "aperture": ("aperture_shape", "aperture_size_fraction"),
    "zernike": ("disk_radius_fraction", "max_radial_order", "decay",
                "rms_target"),
    "loop": ("loops", "estimator", "gain", "first_gain", "kernel_size",
             "quantization_levels", "early_stop_rms", "pr_starts",
             "diversity_iters", "support_tau"),
    "scene": ("scene_seed",),
}


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "asymao_out"))


@dataclass
class RunConfig:
    grid_n: int = 256
    pad_factor: int = 2
    seed: int = 0
    noise_sigma: float = 0.0
    output_dir: str = ""          # empty means the env/default root

    aperture_shape: str = "triangle"
    aperture_size_fraction: float = 0.4

    disk_radius_fraction: float = 0.9
    max_radial_order: int = 6
    decay: float = 1.0
    rms_target: float = 1.0

    loops: int = 3
    estimator: str = "blind"
    gain: float = 1.0
    first_gain: float = 0.5
    kernel_size: int = 63
    quantization_levels: int = 0
    early_stop_rms: float = 0.0
    pr_starts: int = 5
    diversity_iters: int = 60
    support_tau: float = 0.03

    scene_seed: int = 0

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir) if self.output_dir else \
            default_output_root()

    def validate(self) -> None:
        if self.grid_n < 8 or self.grid_n & (self.grid_n - 1):
            raise ValueError("grid_n must be a power of two >= 8")
        if self.pad_factor < 1:
            raise ValueError("pad_factor must be >= 1")
        if not 0.0 < self.aperture_size_fraction <= 0.5:
            raise ValueError("aperture_size_fraction must be in (0, 0.5]")
        if self.aperture_shape not in ("disk", "rectangle", "triangle"):
            raise ValueError(f"unknown aperture shape "
                             f"{self.aperture_shape!r}")
        if self.estimator not in ("blind", "oracle", "geometric"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if not 0.0 < self.gain <= 1.0 or not 0.0 < self.first_gain <= 1.0:
            raise ValueError("gains must be in (0, 1]")
        if self.loops < 0:
            raise ValueError("loops must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.rms_target < 0:
            raise ValueError("rms_target must be >= 0")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ValueError(f"bad value for {name}: {raw!r}") from exc


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional INI file plus overrides.

    Unknown sections or keys raise ValueError; overrides (already typed)
    are applied after the file so command-line flags win.
    """
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        text = Path(path).read_text()
        parser.read_string(text, source=str(path))
        for section in parser.sections():
            if section not in _SECTIONS:
                raise ValueError(f"unknown config section [{section}]")
            allowed = _SECTIONS[section]
            for key, raw in parser.items(section):
                if key not in allowed:
                    raise ValueError(
                        f"unknown key {key!r} in section [{section}]")
                setattr(cfg, key, _parse_value(key, raw))
    for key, value in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config field {key!r}")
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Serialize the fully resolved configuration as INI text."""
    lines = []
    for section, names in _SECTIONS.items():
        lines.append(f"[{section}]")
        for name in names:
            lines.append(f"{name} = {getattr(cfg, name)}")
        lines.append("")
    return "\n".join(lines)


def echo_config(cfg: RunConfig, outdir) -> Path:
    out = Path(outdir) / "config_resolved.ini"
    out.write_text(dump_config(cfg))
    return out
