"""Physical setup, linearization and the matrices everything else consumes.

Conventions used throughout the package (documented once, here):

* Quadrature ordering is ``c = (x1, x2, p1, p2)``. Every 4x4 matrix in the
  package (H, J, gamma, V, drift, diffusion) uses this ordering.
* SI units internally. The dimensionless picture (tilde quadratures
  ``xbar_j = sqrt(m_j Omega_j / hbar) x_j``, ``pbar_j = p_j / sqrt(m_j hbar
  Omega_j)``) is an explicit converted view produced by
  :func:`to_dimensionless` and friends, never an implicit one.
* The quadratic Hamiltonian is stored as the symmetric coefficient matrix H
  with ``H_total = 1/2 c^T H c``; the symplectic form J satisfies
  ``[c_i, c_j] = i*hbar*J_ij`` in SI units and ``i*J_ij`` in dimensionless
  units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import G_NEWTON, HBAR, KB
from .errors import PSDError, StabilityError

__all__ = [
    "PhysicalSetup",
    "LinearizedSystem",
    "DiffusionMatrix",
    "GaussianState",
    "symplectic_form",
    "linearize",
    "drift_matrix",
    "quadrature_scales",
    "to_dimensionless",
    "from_dimensionless",
    "dimensionless_hamiltonian",
    "dimensionless_coupling",
    "state_to_dimensionless",
    "state_from_dimensionless",
    "ground_state",
]

# Relative PSD tolerance: eigenvalue >= -PSD_RTOL * ||gamma|| counts as PSD.
# Boundary matrices built in finite precision sit exactly on the cone edge.
PSD_RTOL = 1e-10


def symplectic_form() -> np.ndarray:
    """4x4 symplectic form J = [[0, I2], [-I2, 0]] in (x1, x2, p1, p2) order."""
    J = np.zeros((4, 4))
    J[0, 2] = J[1, 3] = 1.0
    J[2, 0] = J[3, 1] = -1.0
    return J


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PhysicalSetup:
    """Raw experimental dials: masses, traps, separation, environment.

    Masses in kg, angular frequencies in rad/s, separation in m, temperature
    in K, momentum damping rate eta in 1/s. G, hbar, kB default to the CODATA
    values in :mod:`gravdiff.constants`.
    """

    m1: float
    m2: float
    omega1: float
    omega2: float
    d: float
    T: float = 0.0
    eta: float = 0.0
    G: float = G_NEWTON
    hbar: float = HBAR
    kB: float = KB

    def __post_init__(self):
        for name in ("m1", "m2", "omega1", "omega2", "d"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.T < 0.0 or self.eta < 0.0:
            raise ValueError("T and eta must be non-negative")

    @property
    def coupling(self) -> float:
        """Bilinear gravitational spring constant K = 2 G m1 m2 / d^3 [N/m]."""
        return 2.0 * self.G * self.m1 * self.m2 / self.d**3

    def renormalized_frequencies(self) -> tuple[float, float]:
        """(Omega1, Omega2) with Omega_i^2 = omega_i^2 - 2 G m_j / d^3 (j != i).

        Raises StabilityError when a squared frequency is non-positive.
        """
        g1 = 2.0 * self.G * self.m2 / self.d**3
        g2 = 2.0 * self.G * self.m1 / self.d**3
        Om1_sq = self.omega1**2 - g1
        Om2_sq = self.omega2**2 - g2
        if Om1_sq <= 0.0:
            raise StabilityError(
                f"oscillator 1 unstable: omega1^2 = {self.omega1**2:.6e} <= "
                f"2 G m2 / d^3 = {g1:.6e}"
            )
        if Om2_sq <= 0.0:
            raise StabilityError(
                f"oscillator 2 unstable: omega2^2 = {self.omega2**2:.6e} <= "
                f"2 G m1 / d^3 = {g2:.6e}"
            )
        return float(np.sqrt(Om1_sq)), float(np.sqrt(Om2_sq))


@dataclass(frozen=True)
class LinearizedSystem:
    """Quadratic model around equilibrium: frequencies, coupling, H and J.

    ``H`` is the symmetric 4x4 coefficient matrix of the quadratic form over
    (x1, x2, p1, p2); ``equilibrium_shift`` carries the constant-force offsets
    (a1, a2) [m] absorbed when removing the terms linear in the coordinates.
    """

    Omega1: float
    Omega2: float
    K: float
    m1: float
    m2: float
    H: np.ndarray
    J: np.ndarray
    equilibrium_shift: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "H", _readonly(self.H))
        object.__setattr__(self, "J", _readonly(self.J))

    @property
    def frequencies(self) -> tuple[float, float]:
        return (self.Omega1, self.Omega2)

    def min_period(self) -> float:
        return 2.0 * np.pi / max(self.Omega1, self.Omega2)


@dataclass(frozen=True)
class DiffusionMatrix:
    """Real symmetric PSD 4x4 diffusion matrix over (x1, x2, p1, p2).

    SI units per entry: position-position block [m^-2 s^-1], momentum-momentum
    block [s kg^-2 m^-2], position-momentum cross entries [kg^-1 m^-2],
    consistent with a double-commutator generator weighted by gamma_ij.
    """

    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        if g.shape != (4, 4):
            raise ValueError(f"gamma must be 4x4, got shape {g.shape}")
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-12 * max(1.0, np.linalg.norm(g))):
            raise PSDError("gamma must be symmetric")
        g = 0.5 * (g + g.T)
        scale = np.linalg.norm(g)
        min_eig = float(np.linalg.eigvalsh(g).min()) if scale > 0 else 0.0
        if min_eig < -PSD_RTOL * scale:
            raise PSDError(
                f"gamma is not PSD: min eigenvalue {min_eig:.3e} < -{PSD_RTOL:.0e} * ||gamma||"
            )
        object.__setattr__(self, "gamma", _readonly(g))

    @classmethod
    def zero(cls) -> "DiffusionMatrix":
        return cls(np.zeros((4, 4)))

    def scaled(self, factor: float) -> "DiffusionMatrix":
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        return DiffusionMatrix(factor * self.gamma)

    @property
    def matrix(self) -> np.ndarray:
        return self.gamma


@dataclass(frozen=True)
class GaussianState:
    """First and second moments of the four quadratures.

    ``V_ij = <{dc_i, dc_j}>/2`` is the symmetrized covariance matrix. The
    ``dimensionless`` flag records the unit convention V is expressed in; the
    uncertainty relation reads ``V + (i hbar/2) J >= 0`` in SI units and
    ``V + (i/2) J >= 0`` in the dimensionless ones.
    """

    mean: np.ndarray
    V: np.ndarray
    dimensionless: bool = False

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        V = np.array(self.V, dtype=float)
        if V.shape != (4, 4):
            raise ValueError(f"V must be 4x4, got shape {V.shape}")
        if not np.allclose(V, V.T, rtol=0.0, atol=1e-10 * max(1.0, np.linalg.norm(V))):
            raise ValueError("covariance matrix must be symmetric")
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "V", _readonly(0.5 * (V + V.T)))


def ground_state() -> GaussianState:
    """Dimensionless two-mode ground state: zero mean, V = I/2."""
    return GaussianState(np.zeros(4), 0.5 * np.eye(4), dimensionless=True)


def linearize(setup: PhysicalSetup) -> LinearizedSystem:
    """Expand the Newtonian pair potential to second order around equilibrium.

    Returns the renormalized frequencies Omega_i, the bilinear coupling
    K = 2 G m1 m2 / d^3, the 4x4 quadratic-form matrix H and the equilibrium
    shifts (a1, a2) that remove the residual constant-force terms (the two
    linear conditions ``m_i Omega_i^2 a_i - K a_j - K d/2 = 0``). The shifts
    are reported, not silently dropped.

    Raises StabilityError if a renormalized frequency is imaginary or if the
    coupled position block is not positive definite (no stable equilibrium).
    """
    Om1, Om2 = setup.renormalized_frequencies()
    K = setup.coupling
    m1, m2 = setup.m1, setup.m2

    # x-block of H must be positive definite for the coupled system to have a
    # stable equilibrium; Omega_i^2 > 0 alone does not guarantee it.
    det_x = (m1 * Om1**2) * (m2 * Om2**2) - K**2
    if det_x <= 0.0:
        raise StabilityError(
            f"coupled system unstable: m1*Omega1^2 * m2*Omega2^2 = "
            f"{(m1 * Om1**2) * (m2 * Om2**2):.6e} <= K^2 = {K**2:.6e}"
        )

    if K == 0.0:
        a1 = a2 = 0.0
    else:
        rhs = 0.5 * K * setup.d
        a1 = rhs * (m2 * Om2**2 + K) / det_x
        a2 = rhs * (m1 * Om1**2 + K) / det_x

    H = np.zeros((4, 4))
    H[0, 0] = m1 * Om1**2
    H[1, 1] = m2 * Om2**2
    H[0, 1] = H[1, 0] = K
    H[2, 2] = 1.0 / m1
    H[3, 3] = 1.0 / m2

    return LinearizedSystem(
        Omega1=Om1, Omega2=Om2, K=K, m1=m1, m2=m2,
        H=H, J=symplectic_form(), equilibrium_shift=(float(a1), float(a2)),
    )


def drift_matrix(sys: LinearizedSystem) -> np.ndarray:
    """First-moment drift generator A = J H, so d<c>/dt = A <c>."""
    return sys.J @ sys.H


def quadrature_scales(sys: LinearizedSystem, hbar: float = HBAR) -> np.ndarray:
    """Scale factors s with c_SI = s * c_dimensionless, per quadrature.

    s = (sqrt(hbar/(m1 Omega1)), sqrt(hbar/(m2 Omega2)),
         sqrt(m1 hbar Omega1),   sqrt(m2 hbar Omega2)).
    """
    return np.array([
        np.sqrt(hbar / (sys.m1 * sys.Omega1)),
        np.sqrt(hbar / (sys.m2 * sys.Omega2)),
        np.sqrt(sys.m1 * hbar * sys.Omega1),
        np.sqrt(sys.m2 * hbar * sys.Omega2),
    ])


def dimensionless_hamiltonian(sys: LinearizedSystem, hbar: float = HBAR) -> np.ndarray:
    """Hbar matrix (units rad/s): Hbar_ij = H_ij s_i s_j / hbar.

    Diagonal entries are the Omega_i; the x1-x2 entry is the dimensionless
    coupling K / (sqrt(m1 m2) sqrt(Omega1 Omega2)).
    """
    s = quadrature_scales(sys, hbar)
    return (sys.H * np.outer(s, s)) / hbar


def dimensionless_coupling(sys: LinearizedSystem) -> float:
    """K / (sqrt(m1 m2) sqrt(Omega1 Omega2)), the x1-x2 entry of Hbar [rad/s]."""
    return sys.K / (np.sqrt(sys.m1 * sys.m2) * np.sqrt(sys.Omega1 * sys.Omega2))


def to_dimensionless(
    sys: LinearizedSystem, gamma: DiffusionMatrix, hbar: float = HBAR
) -> tuple[np.ndarray, np.ndarray]:
    """Rescale (H, gamma) to the dimensionless quadratures.

    gamma_bar_ij = gamma_ij s_i s_j (all entries acquire units of 1/s), e.g.
    the position block is multiplied by hbar/(m Omega) and the momentum block
    by m hbar Omega; cross terms pick up the geometric mean.
    """
    s = quadrature_scales(sys, hbar)
    Hbar = dimensionless_hamiltonian(sys, hbar)
    gamma_bar = gamma.matrix * np.outer(s, s)
    return Hbar, gamma_bar


def from_dimensionless(
    Hbar: np.ndarray, gamma_bar: np.ndarray, sys: LinearizedSystem, hbar: float = HBAR
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`to_dimensionless`; exact up to rounding."""
    s = quadrature_scales(sys, hbar)
    outer = np.outer(s, s)
    return np.asarray(Hbar) * hbar / outer, np.asarray(gamma_bar) / outer


def state_to_dimensionless(state: GaussianState, sys: LinearizedSystem,
                           hbar: float = HBAR) -> GaussianState:
    """Convert an SI-units Gaussian state to dimensionless quadratures."""
    if state.dimensionless:
        return state
    s = quadrature_scales(sys, hbar)
    return GaussianState(state.mean / s, state.V / np.outer(s, s), dimensionless=True)


def state_from_dimensionless(state: GaussianState, sys: LinearizedSystem,
                             hbar: float = HBAR) -> GaussianState:
    """Convert a dimensionless Gaussian state back to SI units."""
    if not state.dimensionless:
        return state
    s = quadrature_scales(sys, hbar)
    return GaussianState(state.mean * s, state.V * np.outer(s, s), dimensionless=False)
