"""Run configuration: flat key/value sections with strict unknown-key rejection."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .grid import MultiDomainMesh, build_case_mesh, solve_beta_for_min_width
from .physics import AirGlassProperties, GsSchedule, PcmProperties, RoomModel, rt42

_UNSET = object()


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (converter, default); defaults of _UNSET are required keys
SCHEMA = {
    "case": {
        "name": (str, "case"),
        "theta_deg": (float, 45.0),
        "seed": (int, 1234),
    },
    "mesh": {
        "nx": (int, 40),
        "length_m": (float, 1.0),
        "air_ny": (int, 20),
        "air_gap_m": (float, 0.3),
        "pcm_ny": (int, 10),
        "pcm_thickness_m": (float, 0.03),
        "glass_ny": (int, 4),
        "glass_thickness_m": (float, 0.006),
        "beta_x": (float, 1e-8),
        "air_beta": (float, 1.8),
        "pcm_beta": (float, 1.2),
        "glass_beta": (float, 1e-8),
        "air_min_width_m": (float, 0.0),  # >0 solves air_beta from the target
    },
    "physics": {
        "pcm_preset": (str, "RT42"),
        "gs_w_m2": (float, 600.0),
        "charge_end_s": (float, math.inf),
        "t_amb_c": (float, 22.0),
        "room_inertia_kj_m2k": (float, 188.5),
        "room_exchange_w_m2k": (float, 55.0),
        "glass_rho": (float, 2500.0),
        "glass_c": (float, 840.0),
        "glass_lam": (float, 1.0),
        "htc_model": (str, "churchill-chu"),
        "htc_floor_w_m2k": (float, 2.0),
    },
    "time": {
        "dt_s": (float, 1.0),
        "t_end_s": (float, 1800.0),
        "halve_until_s": (float, 1800.0),
        "snapshot_every_s": (float, 30.0),
    },
    "solver": {
        "outer_tol": (float, 1e-6),
        "outer_max": (int, 60),
        "lin_tol": (float, 1e-9),
        "lin_max": (int, 2000),
        "relax_momentum": (float, 0.9),
        "relax_pressure": (float, 1.0),
        "relax_energy": (float, 0.95),
        "weno_eps": (float, 1e-6),
        "bdf_w2": (float, 0.52),
        "bdf_w3": (float, 0.48),
        "radiation_tol": (float, 1e-5),
        "radiation_max": (int, 10000),
    },
    "rom": {
        "n_runs": (int, 8),
        "gs_lo_w_m2": (float, 550.0),
        "gs_hi_w_m2": (float, 650.0),
        "window_split_s": (float, 1080.0),
        "modes": (str, "auto"),
        "center": (_bool, False),
        "scale": (_bool, False),
    },
    "output": {
        "dir": (str, "runs"),
        "vtk": (_bool, False),
        "store_every_step": (_bool, False),
    },
}


@dataclass(frozen=True)
class CaseConfig:
    """Validated run configuration; values mirror the config schema."""

    values: dict
    source_text: str = ""
    path: str = ""

    def __getitem__(self, section_key: tuple[str, str]):
        section, key = section_key
        return self.values[section][key]

    def section(self, name: str) -> dict:
        return dict(self.values[name])

    @property
    def hash(self) -> str:
        from .containers import sha256_text
        canonical = "\n".join(
            f"{s}.{k}={self.values[s][k]!r}"
            for s in sorted(self.values) for k in sorted(self.values[s]))
        return sha256_text(canonical)

    def build_mesh(self) -> MultiDomainMesh:
        m = self.values["mesh"]
        air_beta = m["air_beta"]
        if m["air_min_width_m"] > 0.0:
            air_beta = solve_beta_for_min_width(m["air_ny"], m["air_gap_m"],
                                                m["air_min_width_m"])
        return build_case_mesh(
            nx=m["nx"], length=m["length_m"],
            air_ny=m["air_ny"], air_gap=m["air_gap_m"],
            pcm_ny=m["pcm_ny"], pcm_thickness=m["pcm_thickness_m"],
            glass_ny=m["glass_ny"], glass_thickness=m["glass_thickness_m"],
            theta_deg=self.values["case"]["theta_deg"],
            beta_x=m["beta_x"], air_beta=air_beta,
            pcm_beta=m["pcm_beta"], glass_beta=m["glass_beta"])

    def build_pcm(self) -> PcmProperties:
        return rt42(self.values["physics"]["pcm_preset"])

    def build_air_glass(self) -> AirGlassProperties:
        p = self.values["physics"]
        return AirGlassProperties(rho_glass=p["glass_rho"], c_glass=p["glass_c"],
                                  lam_glass=p["glass_lam"])

    def build_room(self) -> RoomModel:
        p = self.values["physics"]
        return RoomModel(inertia=p["room_inertia_kj_m2k"] * 1e3,
                         exchange=p["room_exchange_w_m2k"], t_amb=p["t_amb_c"])

    def build_schedule(self, gs_override: float | None = None) -> GsSchedule:
        p = self.values["physics"]
        gs = p["gs_w_m2"] if gs_override is None else float(gs_override)
        return GsSchedule.charging(gs, p["charge_end_s"])

    def with_overrides(self, **overrides) -> "CaseConfig":
        """New config with dotted 'section.key' overrides applied."""
        values = {s: dict(kv) for s, kv in self.values.items()}
        for dotted, value in overrides.items():
            section, key = dotted.split("__")
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key [{section}] {key}")
            conv = SCHEMA[section][key][0]
            values[section][key] = conv(value) if isinstance(value, str) else value
        return CaseConfig(values=values, source_text=self.source_text, path=self.path)


def _validate(parser: configparser.ConfigParser, source: str) -> dict:
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}] in {source}")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}] of {source}")
            conv = SCHEMA[section][key][0]
            try:
                values[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    missing = [f"[{s}] {k}" for s, keys in SCHEMA.items()
               for k, (_, d) in keys.items() if d is _UNSET and values[s][k] is _UNSET]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    _sanity(values)
    return values


def _sanity(values: dict) -> None:
    mesh = values["mesh"]
    for key in ("length_m", "air_gap_m", "pcm_thickness_m", "glass_thickness_m"):
        if mesh[key] <= 0.0:
            raise ConfigError(f"[mesh] {key} must be positive")
    for key in ("nx", "air_ny", "pcm_ny", "glass_ny"):
        if mesh[key] < 2:
            raise ConfigError(f"[mesh] {key} must be >= 2")
    t = values["time"]
    if t["dt_s"] <= 0.0 or t["t_end_s"] <= 0.0:
        raise ConfigError("[time] dt_s and t_end_s must be positive")
    if t["snapshot_every_s"] <= 0.0:
        raise ConfigError("[time] snapshot_every_s must be positive")
    s = values["solver"]
    if abs(s["bdf_w2"] + s["bdf_w3"] - 1.0) > 1e-12:
        raise ConfigError("[solver] BDF blend weights must sum to 1")
    for key in ("outer_tol", "lin_tol", "radiation_tol"):
        if s[key] <= 0.0:
            raise ConfigError(f"[solver] {key} must be positive")
    r = values["rom"]
    if not r["gs_lo_w_m2"] < r["gs_hi_w_m2"]:
        raise ConfigError("[rom] sampling interval is degenerate (lo >= hi)")
    if r["modes"] != "auto":
        try:
            n = int(r["modes"])
        except ValueError:
            raise ConfigError("[rom] modes must be 'auto' or an integer") from None
        if n <= 0:
            raise ConfigError("[rom] modes must be positive")
    th = values["case"]["theta_deg"]
    if not 0.0 < th < 90.0:
        raise ConfigError("[case] theta_deg must lie in (0, 90)")


def load_config(path) -> CaseConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config-not-found: {path}")
    text = path.read_text()
    return parse_config(text, source=str(path))


def parse_config(text: str, source: str = "<string>") -> CaseConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_file(io.StringIO(text), source=source)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {source}: {exc}") from exc
    values = _validate(parser, source)
    return CaseConfig(values=values, source_text=text, path=source)


def default_config() -> CaseConfig:
    return parse_config("", source="<defaults>")
