"""Closed-form displacement-noise spectra and the detection condition.

All spectra are two-sided densities over angular frequency (Wiener-Khinchin
convention): the position variance is the integral of S_xx(w) dw / (2 pi),
and a white force of intensity I (E[f(t) f(t')] = I d(t-t')) has the flat
spectrum S_ff(w) = I. The quantum thermal force density used here is

    S_xi(w) = hbar eta m w [1 + coth(hbar w / 2 kB T)],

which reduces to the classical white intensity 2 eta m kB T for
kB T >> hbar w and makes the fixed-source spectrum below exact. (The time
domain correlation as printed elsewhere lacks the factor w; this form is the
one consistent with the spectrum and with the classical limit.)

Fixed-source model (the partner mass only sources noise):

    S_xx(w) = hbar^2 / |m (O^2 - w^2 - i eta w) + K|^2
              * [g11 + m^2 w^2 g33 + (eta m w / hbar)(1 + coth(hbar w/2 kB T))
                 + m^2 eta^2 g33 - 2 m eta g13].

Symmetric-pair model: both oscillators move; the response splits into the
direct and cross channels of A_x(w) = chi(w) [[m D(w), -K], [-K, m D(w)]]
with D(w) = O^2 - w^2 - i eta w and chi(w) = (m^2 D(w)^2 - K^2)^{-1}, plus an
interference line that vanishes on resonance for exchange-symmetric noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SymmetryError
from .model import DiffusionMatrix, LinearizedSystem, PhysicalSetup

__all__ = [
    "NoiseSpectrum",
    "thermal_force_density",
    "dns_fixed_source",
    "dns_symmetric_pair",
    "DetectionCondition",
    "detection_condition",
    "gravitational_frequency",
]

SPECTRUM_CONVENTION = "two-sided angular-frequency density, var = int S dw / 2pi"


@dataclass(frozen=True)
class NoiseSpectrum:
    """Sampled S_xx(w) [m^2 s] with its additive component breakdown.

    Component fields are None for estimator outputs (Monte Carlo) where no
    decomposition exists; when present they sum to S_total pointwise.
    """

    omega: np.ndarray
    S_total: np.ndarray
    S_grav_position: np.ndarray | None = None
    S_grav_momentum: np.ndarray | None = None
    S_thermal: np.ndarray | None = None
    S_cross: np.ndarray | None = None
    convention: str = SPECTRUM_CONVENTION
    zero_frequency_substituted: bool = False

    def __post_init__(self):
        for name in ("omega", "S_total", "S_grav_position", "S_grav_momentum",
                     "S_thermal", "S_cross"):
            val = getattr(self, name)
            if val is not None:
                arr = np.asarray(val, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def has_components(self) -> bool:
        return self.S_grav_position is not None

    def csv_rows(self):
        zero = np.zeros_like(self.S_total)
        gp = self.S_grav_position if self.has_components else zero
        gm = self.S_grav_momentum if self.has_components else zero
        th = self.S_thermal if self.has_components else zero
        cr = self.S_cross if self.has_components else zero
        for row in zip(self.omega, self.S_total, gp, gm, th, cr):
            yield tuple(float(v) for v in row)

    CSV_HEADER = ("omega_rad_s", "S_total", "S_grav_pos", "S_grav_mom",
                  "S_thermal", "S_cross")


def _coth_term(omega: np.ndarray, setup: PhysicalSetup) -> tuple[np.ndarray, bool]:
    """(eta m w / hbar)(1 + coth(hbar w / 2 kB T)) with safe limits.

    T = 0 gives the vacuum value (eta m / hbar) * (w + |w|); w = 0 entries
    are replaced by the finite classical-limit value 2 eta m kB T / hbar^2
    and flagged.
    """
    w = np.asarray(omega, dtype=float)
    pref = setup.eta * setup.m1 / setup.hbar
    substituted = False
    if setup.T == 0.0:
        vals = pref * (w + np.abs(w))
        return vals, substituted
    x = setup.hbar * w / (2.0 * setup.kB * setup.T)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = pref * w * (1.0 + 1.0 / np.tanh(x))
    zero = (w == 0.0)
    if np.any(zero):
        vals = np.where(zero, 2.0 * setup.eta * setup.m1 * setup.kB * setup.T / setup.hbar**2, vals)
        substituted = True
    return vals, substituted


def thermal_force_density(omega, setup: PhysicalSetup) -> np.ndarray:
    """Two-sided thermal force density S_xi(w) = hbar eta m w [1 + coth(...)] [N^2 s]."""
    vals, _ = _coth_term(omega, setup)
    return setup.hbar**2 * vals


def dns_fixed_source(setup: PhysicalSetup, sys: LinearizedSystem,
                     gamma: DiffusionMatrix, omega_grid) -> NoiseSpectrum:
    """Displacement-noise spectrum with the partner mass held fixed.

    The monitored oscillator is mode 1: frequency sys.Omega1, mass m1; the
    fixed partner contributes the spring K and the noise entries g11, g33,
    g13 of ``gamma``. Thermal damping eta and temperature come from ``setup``.
    """
    w = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    m = setup.m1
    eta = setup.eta
    Om = sys.Omega1
    K = sys.K
    g = gamma.matrix
    g11, g33, g13 = g[0, 0], g[2, 2], g[0, 2]

    denom = np.abs(m * (Om**2 - w**2 - 1j * eta * w) + K) ** 2
    pref = setup.hbar**2 / denom

    thermal_bracket, substituted = _coth_term(w, setup)

    S_gp = pref * g11
    S_gm = pref * (m**2 * w**2 * g33 + m**2 * eta**2 * g33)
    S_th = pref * thermal_bracket
    S_cr = pref * (-2.0 * m * eta * g13)
    return NoiseSpectrum(
        omega=w,
        S_total=S_gp + S_gm + S_th + S_cr,
        S_grav_position=S_gp,
        S_grav_momentum=S_gm,
        S_thermal=S_th,
        S_cross=S_cr,
        zero_frequency_substituted=substituted,
    )


def _check_pair_symmetry(setup: PhysicalSetup, sys: LinearizedSystem,
                         gamma: DiffusionMatrix, rtol: float = 1e-9):
    if abs(setup.m1 - setup.m2) > rtol * max(setup.m1, setup.m2):
        raise SymmetryError("symmetric pair requires equal masses")
    if abs(sys.Omega1 - sys.Omega2) > rtol * max(sys.Omega1, sys.Omega2):
        raise SymmetryError("symmetric pair requires equal renormalized frequencies")
    g = gamma.matrix
    scale = max(float(np.abs(g).max()), 1e-300)
    pairs = [((0, 0), (1, 1)), ((2, 2), (3, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
    for (a, b) in pairs:
        if abs(g[a] - g[b]) > rtol * scale:
            raise SymmetryError(
                f"exchange symmetry of gamma violated: gamma{a} != gamma{b}"
            )


def dns_symmetric_pair(setup: PhysicalSetup, sys: LinearizedSystem,
                       gamma: DiffusionMatrix, omega_grid) -> NoiseSpectrum:
    """Displacement-noise spectrum of oscillator 1 with both masses mobile.

    Requires the exchange-symmetric configuration (equal masses, equal
    frequencies, shared eta and T, exchange-symmetric gamma). The direct and
    cross susceptibility channels add; the interference line contributes off
    resonance and vanishes at w = Omega.
    """
    _check_pair_symmetry(setup, sys, gamma)
    w = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    m = setup.m1
    eta = setup.eta
    Om = 0.5 * (sys.Omega1 + sys.Omega2)
    K = sys.K
    hb = setup.hbar
    g = gamma.matrix
    g11, g22 = g[0, 0], g[1, 1]
    g33, g44 = g[2, 2], g[3, 3]
    g13, g24 = g[0, 2], g[1, 3]
    g12, g34 = g[0, 1], g[2, 3]
    g14, g23 = g[0, 3], g[1, 2]

    D = Om**2 - w**2 - 1j * eta * w
    chi = 1.0 / (m**2 * D**2 - K**2)
    A11 = chi * m * D
    A12 = -chi * K
    P11 = np.abs(A11) ** 2
    P12 = np.abs(A12) ** 2

    thermal_bracket, substituted = _coth_term(w, setup)

    S_gp = hb**2 * (P11 * g11 + P12 * g22)
    S_gm = hb**2 * (eta**2 + w**2) * m**2 * (P11 * g33 + P12 * g44)
    S_th = hb**2 * (P11 + P12) * thermal_bracket
    # Direct-channel x-p cross terms plus the interference line between the
    # two susceptibility channels.
    S_cr = hb**2 * (-2.0 * eta * m) * (P11 * g13 + P12 * g24)
    interference = 2.0 * hb**2 * np.real(
        A11 * np.conj(A12) * (
            g12
            - (eta - 1j * w) * m * g23
            - (eta + 1j * w) * m * g14
            + (eta**2 + w**2) * m**2 * g34
        )
    )
    S_cr = S_cr + interference
    return NoiseSpectrum(
        omega=w,
        S_total=S_gp + S_gm + S_th + S_cr,
        S_grav_position=S_gp,
        S_grav_momentum=S_gm,
        S_thermal=S_th,
        S_cross=S_cr,
        zero_frequency_substituted=substituted,
    )


def gravitational_frequency(rho: float, G: float) -> float:
    """Gravitational frequency scale w_G = sqrt(G rho) [s^-1] of a material."""
    if rho <= 0:
        raise DomainError("density must be positive")
    return float(np.sqrt(G * rho))


@dataclass(frozen=True)
class DetectionCondition:
    """Result of the on-resonance detectability comparison.

    Iterable as (margin, satisfied); margin is the scale-invariant form
    w_G^2 - (12/pi) beta^3 Omega Gamma [s^-2], independent of the sphere
    radius. ``margin_resonance`` is the direct on-resonance comparison
    G m^2/(hbar d^3) - (eta m Omega/hbar) coth(hbar Omega / 2 kB T)
    [m^-2 s^-1] without the classical-limit approximation.
    """

    margin: float
    satisfied: bool
    margin_resonance: float
    omega_G: float
    Gamma: float

    def __iter__(self):
        return iter((self.margin, self.satisfied))


def detection_condition(setup: PhysicalSetup, beta: float, rho: float) -> DetectionCondition:
    """Can bound-saturating gravitational noise beat thermal noise on resonance?

    The sphere radius is derived from (m1, rho) and the separation from
    d = 2 beta R; Omega is taken as setup.omega1 (the resonance frequency of
    the monitored oscillator) and the heating rate as
    Gamma = eta kB T / (hbar Omega).
    """
    if beta < 1.0:
        raise DomainError(f"beta must be >= 1 (touching spheres), got {beta}")
    if rho <= 0:
        raise DomainError("density must be positive")
    m = setup.m1
    Omega = setup.omega1
    R = (3.0 * m / (4.0 * np.pi * rho)) ** (1.0 / 3.0)
    d = 2.0 * beta * R

    w_G = gravitational_frequency(rho, setup.G)
    n_T = setup.kB * setup.T / (setup.hbar * Omega)
    Gamma = setup.eta * n_T

    lhs_scale_inv = (12.0 / np.pi) * beta**3 * Omega * Gamma
    margin = w_G**2 - lhs_scale_inv

    # Direct resonance form, exact coth.
    rhs_res = setup.G * m**2 / (setup.hbar * d**3)
    if setup.T == 0.0:
        lhs_res = setup.eta * m * Omega / setup.hbar
    else:
        x = setup.hbar * Omega / (2.0 * setup.kB * setup.T)
        lhs_res = setup.eta * m * Omega / setup.hbar / np.tanh(x)
    margin_res = rhs_res - lhs_res

    return DetectionCondition(
        margin=float(margin),
        satisfied=bool(margin >= -1e-9 * max(abs(w_G**2), abs(lhs_scale_inv))),
        margin_resonance=float(margin_res),
        omega_G=float(w_G),
        Gamma=float(Gamma),
    )
