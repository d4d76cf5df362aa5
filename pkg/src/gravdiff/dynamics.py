"""Covariance-matrix evolution, uncertainty relation and PPT separability.

The dimensionless covariance matrix obeys the linear matrix ODE

    dV/dt = J Hbar V - V Hbar J - J gamma_bar J
          = A V + V A^T + D,   A = J Hbar,   D = J gamma_bar J^T,

with D positive semidefinite whenever gamma_bar is. Physicality is the matrix
inequality V + (i/2) J >= 0; separability of the 1x1-mode split is certified
by V + (i/2) L J L >= 0 with the partial reflection L = diag(1, 1, 1, -1).
A negative minimum eigenvalue of the PPT matrix certifies entanglement; a
non-negative one certifies separability for two single modes.

Integration is fixed-step classical Runge-Kutta (RK4): the system is linear
with known timescales, and fixed steps make trajectories reproducible across
runs and platforms. V is re-symmetrized every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import HBAR
from .errors import NonPhysicalInputError, StepSizeError
from .model import (
    DiffusionMatrix,
    GaussianState,
    LinearizedSystem,
    symplectic_form,
    to_dimensionless,
)

__all__ = [
    "ppt_reflector",
    "uncertainty_valid",
    "ppt_separable",
    "EvolutionResult",
    "evolve_covariance",
    "evolve_covariance_dimensionless",
    "entanglement_onset",
]

# Absolute eigenvalue tolerance in dimensionless units.
EIG_TOL = 1e-10

# Fixed-step RK4 is accurate and reproducible only while the step resolves
# the fastest oscillation; reject anything coarser than 1% of that period.
MAX_STEP_FRACTION = 0.01


def ppt_reflector(mode: int = 2) -> np.ndarray:
    """Partial phase-space reflection for the requested mode.

    Mode 2 (the printed convention) flips p2: diag(1, 1, 1, -1). Reflecting
    mode 1 instead flips p1 and leads to the same PPT spectrum.
    """
    if mode == 2:
        return np.diag([1.0, 1.0, 1.0, -1.0])
    if mode == 1:
        return np.diag([1.0, 1.0, -1.0, 1.0])
    raise ValueError(f"mode must be 1 or 2, got {mode}")


def _min_eig_hermitian(V: np.ndarray, X: np.ndarray) -> float:
    """Minimum eigenvalue of the Hermitian matrix V + (i/2) X."""
    return float(np.linalg.eigvalsh(V + 0.5j * X).min())


def uncertainty_valid(state: GaussianState, hbar: float = HBAR,
                      tol: float = EIG_TOL) -> tuple[bool, float]:
    """Check V + (i/2) J_units >= 0; returns (valid, min eigenvalue).

    J_units is hbar*J in SI mode and J in dimensionless mode.
    """
    J = symplectic_form()
    if not state.dimensionless:
        J = hbar * J
    min_eig = _min_eig_hermitian(state.V, J)
    scale = 1.0 if state.dimensionless else hbar
    return bool(min_eig >= -tol * scale), min_eig


def ppt_separable(state: GaussianState, tol: float = EIG_TOL,
                  mode: int = 2) -> tuple[bool, float]:
    """Minimum eigenvalue of V + (i/2) L J L and the separability flag.

    Requires a dimensionless state. A negative eigenvalue certifies
    entanglement; a non-negative one is reported as PPT-separable, which is
    necessary and sufficient for a 1x1-mode Gaussian split.
    """
    if not state.dimensionless:
        raise ValueError("ppt_separable expects a dimensionless state; convert first")
    L = ppt_reflector(mode)
    J = symplectic_form()
    min_eig = _min_eig_hermitian(state.V, L @ J @ L)
    return bool(min_eig >= -tol), min_eig


@dataclass(frozen=True)
class EvolutionResult:
    """Sampled covariance trajectory with the two eigenvalue diagnostics."""

    times: np.ndarray
    states: tuple[GaussianState, ...]
    ppt_min_eig: np.ndarray
    unc_min_eig: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.states) == len(self.ppt_min_eig) == len(self.unc_min_eig) == n):
            raise ValueError("times, states and eigenvalue tracks must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def first_ppt_violation(self, tol: float = 1e-8):
        """Index of the first time ppt_min_eig < -tol, or None."""
        hits = np.nonzero(self.ppt_min_eig < -tol)[0]
        return int(hits[0]) if hits.size else None

    def csv_rows(self):
        """Rows matching the CSV schema t, V11..V44 (upper triangle), ppt, unc."""
        iu = np.triu_indices(4)
        for t, st, pe, ue in zip(self.times, self.states, self.ppt_min_eig, self.unc_min_eig):
            yield (float(t), *st.V[iu].tolist(), float(pe), float(ue))

    CSV_HEADER = (
        "t", "V11", "V12", "V13", "V14", "V22", "V23", "V24",
        "V33", "V34", "V44", "ppt_min_eig", "unc_min_eig",
    )


def _rk4_generator(Hbar: np.ndarray, gamma_bar: np.ndarray):
    J = symplectic_form()
    A = J @ Hbar
    D = J @ gamma_bar @ J.T
    def rhs(V):
        return A @ V + V @ A.T + D
    return A, D, rhs


def evolve_covariance_dimensionless(
    V0: np.ndarray,
    Hbar: np.ndarray,
    gamma_bar: np.ndarray,
    t_end: float,
    dt: float,
    mean0: np.ndarray | None = None,
    unc_tol: float = 1e-8,
    check_input: bool = True,
) -> EvolutionResult:
    """Integrate dV/dt = A V + V A^T + D with fixed-step RK4.

    All inputs are in dimensionless units. The mean is propagated alongside by
    d<c>/dt = A <c>. Raises StepSizeError when dt exceeds 1% of the fastest
    oscillation period and NonPhysicalInputError when V0 violates the
    uncertainty relation beyond ``unc_tol``.
    """
    if dt <= 0:
        raise StepSizeError("dt must be positive")
    Omegas = np.diagonal(Hbar)[2:]
    max_dt = MAX_STEP_FRACTION * 2.0 * np.pi / np.max(np.abs(Omegas))
    if dt > max_dt:
        raise StepSizeError(
            f"dt = {dt:.3e} exceeds {MAX_STEP_FRACTION} * (2 pi / max Omega) = {max_dt:.3e}"
        )

    V = 0.5 * (np.array(V0, dtype=float) + np.array(V0, dtype=float).T)
    mean = np.zeros(4) if mean0 is None else np.array(mean0, dtype=float).reshape(4)

    J = symplectic_form()
    L = ppt_reflector(2)
    LJL = L @ J @ L
    if check_input:
        unc0 = _min_eig_hermitian(V, J)
        if unc0 < -unc_tol:
            raise NonPhysicalInputError(
                f"initial covariance violates the uncertainty relation: "
                f"min eig(V + iJ/2) = {unc0:.3e}"
            )

    A, D, rhs = _rk4_generator(Hbar, gamma_bar)

    n_steps = int(np.ceil(t_end / dt - 1e-12))
    times = np.empty(n_steps + 1)
    states = []
    ppt = np.empty(n_steps + 1)
    unc = np.empty(n_steps + 1)

    def record(i, t, V, mean):
        times[i] = t
        states.append(GaussianState(mean, V, dimensionless=True))
        ppt[i] = _min_eig_hermitian(V, LJL)
        unc[i] = _min_eig_hermitian(V, J)

    record(0, 0.0, V, mean)
    t = 0.0
    for i in range(1, n_steps + 1):
        h = min(dt, t_end - t)
        k1 = rhs(V)
        k2 = rhs(V + 0.5 * h * k1)
        k3 = rhs(V + 0.5 * h * k2)
        k4 = rhs(V + h * k3)
        V = V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        V = 0.5 * (V + V.T)
        m1 = A @ mean
        m2 = A @ (mean + 0.5 * h * m1)
        m3 = A @ (mean + 0.5 * h * m2)
        m4 = A @ (mean + h * m3)
        mean = mean + (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
        t += h
        record(i, t, V, mean)

    return EvolutionResult(times=times, states=tuple(states),
                           ppt_min_eig=ppt, unc_min_eig=unc)


def evolve_covariance(
    V0: GaussianState,
    sys: LinearizedSystem,
    gamma: DiffusionMatrix,
    t_end: float,
    dt: float,
    hbar: float = HBAR,
) -> EvolutionResult:
    """Typed front end: converts (sys, gamma) to dimensionless form and runs RK4.

    ``V0`` must already be a dimensionless state (convert with
    :func:`gravdiff.model.state_to_dimensionless`).
    """
    if not V0.dimensionless:
        raise NonPhysicalInputError(
            "evolve_covariance integrates in dimensionless units; convert V0 first"
        )
    Hbar, gamma_bar = to_dimensionless(sys, gamma, hbar)
    return evolve_covariance_dimensionless(
        V0.V, Hbar, gamma_bar, t_end, dt, mean0=V0.mean
    )


def entanglement_onset(
    V0: GaussianState,
    sys: LinearizedSystem,
    gamma: DiffusionMatrix,
    t_max: float,
    dt: float,
    tol: float = 1e-8,
    hbar: float = HBAR,
    max_bisections: int = 40,
):
    """First time the PPT minimum eigenvalue drops below -tol, or None.

    Scans the RK4 trajectory on the coarse grid, then refines the bracketing
    step by bisection (re-integrating from the last separable grid point) to a
    resolution of dt/100. Returns the bracket midpoint.
    """
    if not V0.dimensionless:
        raise NonPhysicalInputError(
            "entanglement_onset integrates in dimensionless units; convert V0 first"
        )
    Hbar, gamma_bar = to_dimensionless(sys, gamma, hbar)
    res = evolve_covariance_dimensionless(V0.V, Hbar, gamma_bar, t_max, dt, mean0=V0.mean)
    idx = res.first_ppt_violation(tol)
    if idx is None:
        return None
    if idx == 0:
        return 0.0

    # Bracket [t_lo, t_hi] with separable at t_lo, entangled at t_hi.
    t_lo = float(res.times[idx - 1])
    t_hi = float(res.times[idx])
    V_lo = res.states[idx - 1].V
    mean_lo = res.states[idx - 1].mean

    J = symplectic_form()
    L = ppt_reflector(2)
    LJL = L @ J @ L
    _, _, rhs = _rk4_generator(Hbar, gamma_bar)

    def ppt_at(V_start, span):
        """Min PPT eigenvalue after integrating `span` from the bracket start."""
        V = V_start
        n = max(1, int(np.ceil(span / dt)))
        h = span / n
        for _ in range(n):
            k1 = rhs(V)
            k2 = rhs(V + 0.5 * h * k1)
            k3 = rhs(V + 0.5 * h * k2)
            k4 = rhs(V + h * k3)
            V = V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            V = 0.5 * (V + V.T)
        return _min_eig_hermitian(V, LJL)

    target = dt / 100.0
    for _ in range(max_bisections):
        if (t_hi - t_lo) <= target:
            break
        t_mid = 0.5 * (t_lo + t_hi)
        if ppt_at(V_lo, t_mid - t_lo) < -tol:
            t_hi = t_mid
        else:
            t_lo = t_mid
    return 0.5 * (t_lo + t_hi)
