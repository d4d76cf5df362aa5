"""Flat key-value configuration files.

The parameter space is flat, so the format is one ``key = value`` pair per
line, ``#`` or ``;`` comments, blank lines ignored. Keys mirror the physical
symbols with a unit suffix. The documented keys:

========================  =====================================================
key                       meaning
========================  =====================================================
m1_kg, m2_kg              masses [kg]
omega1_rad_s, omega2_rad_s  natural trap angular frequencies [rad/s]
d_m                       equilibrium separation [m]
T_K                       bath temperature [K]
eta_per_s                 momentum damping rate [1/s]
Q                         quality factor (feasibility; also sets eta when
                          eta_per_s is absent: eta = Omega/Q)
beta                      separation ratio d/(2R) >= 1
rho_kg_m3                 material density [kg/m^3]
R_m                       sphere radius [m]
Omega_rad_s               resonance angular frequency (feasibility) [rad/s]
N_quanta                  detector noise [quanta]
r_fraction                resolvable thermal-noise fraction
gamma11 .. gamma34        SI diffusion-matrix entries (symmetric completion;
                          units as in gravdiff.model.DiffusionMatrix)
seed                      master seed (unsigned 64-bit)
G_m3_kg_s2, hbar_Js, kB_J_K  constant overrides (default CODATA)
========================  =====================================================
"""

from __future__ import annotations

import numpy as np

from .constants import G_NEWTON, HBAR, KB
from .errors import ConfigError
from .model import DiffusionMatrix, PhysicalSetup
from .feasibility import FeasibilityParams

__all__ = [
    "parse_config",
    "require_keys",
    "setup_from_config",
    "gamma_from_config",
    "feasibility_from_config",
]

_GAMMA_KEYS = [
    ("gamma11", 0, 0), ("gamma12", 0, 1), ("gamma13", 0, 2), ("gamma14", 0, 3),
    ("gamma22", 1, 1), ("gamma23", 1, 2), ("gamma24", 1, 3),
    ("gamma33", 2, 2), ("gamma34", 2, 3), ("gamma44", 3, 3),
]


def parse_config(text: str, source: str = "<config>") -> dict[str, float]:
    """Parse flat key-value text into a dict of floats.

    Raises ConfigError with the offending line number on malformed input or
    duplicate keys.
    """
    out: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            out[key] = float(value)
        except ValueError:
            raise ConfigError(
                f"{source}:{lineno}: value for {key!r} is not a number: {value!r}"
            ) from None
    return out


def load_config(path) -> dict[str, float]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def require_keys(cfg: dict, keys) -> None:
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing required config key(s): {', '.join(missing)}")


def _constants(cfg: dict) -> dict:
    return {
        "G": cfg.get("G_m3_kg_s2", G_NEWTON),
        "hbar": cfg.get("hbar_Js", HBAR),
        "kB": cfg.get("kB_J_K", KB),
    }


def setup_from_config(cfg: dict) -> PhysicalSetup:
    """Build a PhysicalSetup; m2/omega2 default to the mode-1 values."""
    require_keys(cfg, ["m1_kg", "omega1_rad_s", "d_m"])
    m1 = cfg["m1_kg"]
    omega1 = cfg["omega1_rad_s"]
    eta = cfg.get("eta_per_s")
    if eta is None and "Q" in cfg:
        eta = omega1 / cfg["Q"]
    try:
        return PhysicalSetup(
            m1=m1,
            m2=cfg.get("m2_kg", m1),
            omega1=omega1,
            omega2=cfg.get("omega2_rad_s", omega1),
            d=cfg["d_m"],
            T=cfg.get("T_K", 0.0),
            eta=0.0 if eta is None else eta,
            **_constants(cfg),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def gamma_from_config(cfg: dict) -> DiffusionMatrix:
    """Assemble the SI diffusion matrix from gammaXY keys (missing -> 0)."""
    g = np.zeros((4, 4))
    for key, i, j in _GAMMA_KEYS:
        val = cfg.get(key, 0.0)
        g[i, j] = val
        g[j, i] = val
    return DiffusionMatrix(g)


def feasibility_from_config(cfg: dict) -> FeasibilityParams:
    require_keys(cfg, ["Omega_rad_s", "rho_kg_m3", "R_m"])
    kwargs = _constants(cfg)
    kwargs.pop("kB")
    return FeasibilityParams(
        Omega=cfg["Omega_rad_s"],
        rho=cfg["rho_kg_m3"],
        R=cfg["R_m"],
        beta=cfg.get("beta", 1.0),
        T=cfg.get("T_K", 0.01),
        Q=cfg.get("Q", 2e10),
        N=cfg.get("N_quanta", 1.0),
        r=cfg.get("r_fraction", 0.01),
        G=kwargs["G"],
        hbar=kwargs["hbar"],
        kB=cfg.get("kB_J_K", KB),
    )
