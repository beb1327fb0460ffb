"""Run configuration: flat INI sections, defaults, round-trip serialization.

Precedence is defaults < config file < command-line flags.  Serializing a
parsed config and re-parsing it reproduces the identical config (floats are
emitted with repr, which round-trips exactly).
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass

import numpy as np

from .kinematics import EmissionCurrent, FourVector, ParticleState
from .radiation import QuadratureSpec, SpectralCutoffs


class ConfigError(Exception):
    """Malformed configuration file or invalid option value."""


# section -> key -> (kind, default); kind in {float, int, str, floats, vectors}
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "kinematics": {
        "e_energy": ("float", 10.0),
        "e_mass": ("float", 1.0),
        "nu_energy": ("float", 10.0),
        "nu_mass": ("float", 0.1),
        "angle_deg": ("float", 90.0),
        "angle2_deg": ("float", 60.0),
    },
    "cutoffs": {
        "omega_min": ("float", 0.001),
        "omega_max": ("float", 1.0),
    },
    "quadrature": {
        "n_cos": ("int", 48),
        "n_phi": ("int", 96),
        "n_omega": ("int", 32),
    },
    "fock": {
        "n_cos": ("int", 16),
        "n_phi": ("int", 16),
        "n_omega": ("int", 32),
        "n_max": ("int", -1),  # -1: auto from the level-cap rule
    },
    "branches": {
        "n_branches": ("int", 6),
        "vacuum_rate": ("float", 0.5),
    },
    "sweep": {
        "omega_max": ("float", 5.0),
        "omega_min_start": ("float", 1.0),
        "omega_min_stop": ("float", 1e-05),
        "n_points": ("int", 13),
    },
    "mc": {
        "n_samples": ("int", 1000000),
        "deltas": ("floats", (0.1, 0.01, 0.001, 0.0001)),
    },
    "photons": {
        "omegas": ("floats", (0.01, 0.1, 1.0)),
        "directions": ("vectors", ((1.0, 0.0, 0.0), (0.0, 1.0, 1.0))),
    },
    "run": {
        "seed": ("int", 20260810),
        "format": ("str", "csv"),
        "out": ("str", ""),
        "threads": ("int", 1),
    },
}


def _format_value(kind: str, value) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "str":
        return str(value)
    if kind == "floats":
        return ",".join(repr(float(v)) for v in value)
    if kind == "vectors":
        return "; ".join(",".join(repr(float(c)) for c in vec) for vec in value)
    raise ConfigError(f"unknown schema kind {kind!r}")


def _parse_value(kind: str, raw: str, where: str):
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "str":
            return raw.strip()
        if kind == "floats":
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        if kind == "vectors":
            vecs = []
            for part in raw.split(";"):
                if not part.strip():
                    continue
                comps = tuple(float(tok) for tok in part.split(","))
                if len(comps) != 3:
                    raise ValueError("directions need three components")
                vecs.append(comps)
            return tuple(vecs)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None
    raise ConfigError(f"unknown schema kind {kind!r}")


@dataclass(frozen=True)
class RunConfig:
    """Typed view of the full option tree (section -> key -> value)."""

    values: tuple[tuple[str, tuple[tuple[str, object], ...]], ...]

    def get(self, section: str, key: str):
        for sec, items in self.values:
            if sec == section:
                for k, v in items:
                    if k == key:
                        return v
        raise KeyError(f"{section}.{key}")

    # -- convenience accessors -------------------------------------------

    def electron_in(self) -> ParticleState:
        e = self.get("kinematics", "e_energy")
        m = self.get("kinematics", "e_mass")
        pz = math.sqrt(e * e - m * m)
        return ParticleState(FourVector(e, 0.0, 0.0, pz), m)

    def neutrino_in(self) -> ParticleState:
        e = self.get("kinematics", "nu_energy")
        m = self.get("kinematics", "nu_mass")
        pz = math.sqrt(e * e - m * m)
        return ParticleState(FourVector(e, 0.0, 0.0, -pz), m)

    def current_at_angle(self, angle_deg: float) -> EmissionCurrent:
        """Emission current for an elastic direction change by `angle_deg`."""
        e_in = self.electron_in()
        th = math.radians(angle_deg)
        p = math.sqrt(e_in.energy**2 - e_in.mass**2)
        out = ParticleState(
            FourVector(e_in.energy, p * math.sin(th), 0.0, p * math.cos(th)),
            e_in.mass,
        )
        return EmissionCurrent(e_in, out)

    def cutoffs(self) -> SpectralCutoffs:
        return SpectralCutoffs(
            self.get("cutoffs", "omega_min"), self.get("cutoffs", "omega_max")
        )

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(
            self.get("quadrature", "n_cos"),
            self.get("quadrature", "n_phi"),
            self.get("quadrature", "n_omega"),
        )

    def sweep_omega_mins(self) -> np.ndarray:
        return np.geomspace(
            self.get("sweep", "omega_min_start"),
            self.get("sweep", "omega_min_stop"),
            self.get("sweep", "n_points"),
        )


def default_config() -> RunConfig:
    return RunConfig(
        tuple(
            (sec, tuple((k, spec[1]) for k, spec in keys.items()))
            for sec, keys in SCHEMA.items()
        )
    )


def _with_overrides(cfg: RunConfig, overrides: dict[tuple[str, str], object]) -> RunConfig:
    out = []
    for sec, items in cfg.values:
        new_items = tuple(
            (k, overrides.get((sec, k), v)) for k, v in items
        )
        out.append((sec, new_items))
    return RunConfig(tuple(out))


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse INI text over `base` (defaults when omitted); strict keys."""
    cfg = base or default_config()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    overrides: dict[tuple[str, str], object] = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(
                f"unknown section [{sec}]{_locate(text, sec, None)}"
            )
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(
                    f"unknown option {sec}.{key}{_locate(text, sec, key)}"
                )
            kind = SCHEMA[sec][key][0]
            overrides[(sec, key)] = _parse_value(
                kind, raw, f"{sec}.{key}{_locate(text, sec, key)}"
            )
    return _with_overrides(cfg, overrides)


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def serialize_config(cfg: RunConfig) -> str:
    buf = io.StringIO()
    for sec, items in cfg.values:
        buf.write(f"[{sec}]\n")
        for key, value in items:
            kind = SCHEMA[sec][key][0]
            buf.write(f"{key} = {_format_value(kind, value)}\n")
        buf.write("\n")
    return buf.getvalue()


def apply_cli_overrides(cfg: RunConfig, args) -> RunConfig:
    """Fold parsed argparse flags over the config (flags win)."""
    overrides: dict[tuple[str, str], object] = {}
    if getattr(args, "seed", None) is not None:
        overrides[("run", "seed")] = int(args.seed)
    if getattr(args, "format", None) is not None:
        overrides[("run", "format")] = args.format
    if getattr(args, "out", None) is not None:
        overrides[("run", "out")] = args.out
    if getattr(args, "threads", None) is not None:
        overrides[("run", "threads")] = int(args.threads)
    if getattr(args, "fock_n_max", None) is not None:
        overrides[("fock", "n_max")] = int(args.fock_n_max)
    cfg = _with_overrides(cfg, overrides)
    fmt = cfg.get("run", "format")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"run.format must be csv or json, got {fmt!r}")
    if cfg.get("run", "threads") < 1:
        raise ConfigError("run.threads must be >= 1")
    return cfg


def _locate(text: str, section: str, key: str | None) -> str:
    """' (line N)' hint for error messages, best effort."""
    in_sec = False
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            if not in_sec and stripped == f"[{section}]":
                if key is None:
                    return f" (line {i})"
                in_sec = True
            elif in_sec:
                break
        elif in_sec and key is not None:
            head = stripped.split("=", 1)[0].strip()
            if head == key:
                return f" (line {i})"
    return ""
