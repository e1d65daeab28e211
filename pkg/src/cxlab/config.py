"""Strict TOML run configuration.

Every physical quantity carries its unit in the key name (``T_mK``,
``omega_MHz``, ``C4_Jm4`` ...). Unknown keys and wrong types are errors, so a
misspelt key fails fast instead of silently falling back to a default.
"""
from __future__ import annotations

import sys
from importlib import resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


_NUM = (int, float)

# section -> key -> (type check, default)
SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "": {
        "seed": (int, 20240611),
        "out_dir": (str, "out"),
    },
    "spin": {
        "preset": (str, "Rb87"),
        "S": (_NUM, None),
        "I1": (_NUM, None),
        "I2": (_NUM, None),
        "entrance_manifold": (_NUM, None),
        "exit_manifolds": (list, None),
    },
    "trap": {
        "omega_MHz": (list, [1.4, 1.5, 0.45]),
        "Omega_rf_MHz": (_NUM, 26.5),
        "q": (list, [-0.14, 0.14, 0.0]),
        "emm_axis": (list, [1.0, 1.0, 0.0]),
        "field_slope_V_per_m_per_V": (_NUM, None),
    },
    "passage": {
        "crystals": (list, ["Sr", "Sr-Sr", "Sr-Rb"]),
        "T_mK": (_NUM, 0.6),
        "kappa_L": (_NUM, 0.29),
        "kappa_ratio": (_NUM, 1.0),
        "atom_T_uK": (_NUM, 10.0),
        "trials": (int, 50000),
        "E_emm_grid_mK": (list, [0.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0]),
        "detection": (str, "double"),
        "false_alarm": (_NUM, 0.005),
        "coupled_modes": (bool, True),
    },
    "md": {
        "trap_on": (bool, True),
        "C4_Jm4": (_NUM, None),
        "polarizability_au": (_NUM, 318.8),
        "contact_radius_nm": (_NUM, None),
        "dissociation_radius_nm": (_NUM, None),
        "ion_T_mK": (_NUM, 0.6),
        "atom_T_uK": (_NUM, 10.0),
        "rtol": (_NUM, 1e-13),
        "max_time_us": (_NUM, 200.0),
        "inner": (str, "analytic"),
        "n_collisions": (int, 2500),
        "energy_bins_mK": (list, None),
        "angle_samples": (int, 2000),
    },
    "inference": {
        "records": (str, None),
        "curves": (str, None),
        "pmf": (str, None),
        "fit_report": (str, None),
        "eta": (_NUM, 0.8),
        "kappa_L": (_NUM, 0.29),
        "kappa_L_sigma": (_NUM, 0.02),
        "T_grid_mK": (list, [0.2, 0.4, 0.6, 0.8, 1.0, 1.2]),
        "kappa_grid": (list, [0.0, 0.1, 0.2, 0.3, 0.4, 0.6]),
    },
}


@dataclass
class RunConfig:
    sections: dict[str, dict[str, Any]]
    base_dir: Path = field(default_factory=Path.cwd)
    source: Path | None = None
    out_base: Path | None = None  # out_dir is relative to this (default base_dir)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    @property
    def seed(self) -> int:
        return self.sections[""]["seed"]

    @property
    def out_dir(self) -> Path:
        p = Path(self.sections[""]["out_dir"])
        return p if p.is_absolute() else (self.out_base or self.base_dir) / p

    def resolve(self, p: str | None) -> Path | None:
        if p is None:
            return None
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path


def _check(section: str, key: str, value):
    kind, _ = SCHEMA[section][key]
    where = f"{section + '.' if section else ''}{key}"
    if kind is _NUM:
        if isinstance(value, bool) or not isinstance(value, _NUM):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if kind is not _NUM and not isinstance(value, kind):
        raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}")
    return value


def from_dict(data: dict, base_dir: Path | None = None, source: Path | None = None) -> RunConfig:
    sections = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in SCHEMA or key == "":
                raise ConfigError(f"unknown section [{key}]")
            for k, v in value.items():
                if k not in SCHEMA[key]:
                    raise ConfigError(f"unknown key {key}.{k}")
                sections[key][k] = _check(key, k, v)
        else:
            if key not in SCHEMA[""]:
                raise ConfigError(f"unknown key {key}")
            sections[""][key] = _check("", key, value)
    return RunConfig(sections, base_dir or Path.cwd(), source)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data, path.resolve().parent, path)


def default() -> RunConfig:
    """Bundled configuration; data paths point into the package, output goes to the cwd."""
    path = Path(str(resources.files("cxlab") / "data" / "default.toml"))
    rc = load(path)
    rc.out_base = Path.cwd()
    return rc
