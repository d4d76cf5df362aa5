"""Time-domain Monte Carlo of the monitored oscillator's Langevin dynamics.

The monitored mass (mode 1) obeys, after removing the static force through
the equilibrium shift,

    dx = (p/m) dt + hbar dW3
    dp = (-(m Omega^2 + K) x - eta p) dt + dXi - hbar dW1,

where (dW1..dW4) are correlated increments with E[dW_i dW_j] = gamma_ij dt
(drawn through a factor L with L L^T = gamma) and dXi is classical white
thermal noise of intensity 2 eta m kB T. The gravitational and thermal noises
are independent. ``keep_static_force=True`` retains the constant -K d term
instead (the mean then settles at the shifted equilibrium).

Integration: the linear drift is propagated exactly through the matrix
exponential of the 2x2 drift generator per step, so noise-free trajectories
reproduce the damped oscillation to rounding at any admissible step; the
noise keeps the plain Euler-Maruyama increment B sqrt(dt) and with it EM's
weak first-order convergence (stationary-moment bias is O(eta dt)).

Seeding is counter-based: stream k of master seed s is Philox(key=[s, k]),
so trajectories are reproducible and order-independent regardless of how the
ensemble is scheduled. Per stream, the draw order is: 2 normals for the
initial condition (when sampled), then 5 normals per step (4 gravitational,
1 thermal), then any protocol-specific draws.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov
from scipy.signal import welch as _scipy_welch

from .errors import ConfigError, ProtocolError, SeedError, StabilityError
from .model import DiffusionMatrix, LinearizedSystem, PhysicalSetup
from .spectra import NoiseSpectrum

__all__ = [
    "NoiseModel",
    "TrajectoryEnsemble",
    "simulate",
    "welch_spectrum",
    "ReheatResult",
    "reheating_run",
    "desk_rescale",
    "effective_frequency",
    "phonon_heating_rate",
    "drift_2x2",
    "diffusion_2x2",
    "stationary_covariance",
    "write_raw_trajectories",
    "read_raw_trajectories",
]

_RAW_MAGIC = b"GDMC"
_RAW_VERSION = 1

# Stream-id domains keep trajectory and protocol streams disjoint under one
# master seed.
_DOMAIN_TRAJECTORY = 0
_DOMAIN_CYCLE = 1 << 56


def _noise_factor(gamma: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = gamma to 1e-12 relative.

    Boundary (singular) PSD matrices get a jitter of 1e-14 * ||gamma|| on the
    diagonal before factoring, well inside the reproduction tolerance.
    """
    scale = np.linalg.norm(gamma)
    if scale == 0.0:
        return np.zeros_like(gamma)
    try:
        return np.linalg.cholesky(gamma)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(gamma + 1e-14 * scale * np.eye(gamma.shape[0]))


@dataclass(frozen=True)
class NoiseModel:
    """Gravitational diffusion plus classical-limit thermal noise, seeded.

    ``thermal_intensity`` is the white force intensity 2 eta m kB T [N^2 s];
    the exact colored quantum kernel is available only through the analytic
    spectra. ``correlation_decomposition`` holds L with L L^T = gamma.
    """

    gamma: DiffusionMatrix
    thermal_intensity: float
    seed: int
    correlation_decomposition: np.ndarray = None

    def __post_init__(self):
        if self.thermal_intensity < 0:
            raise ValueError("thermal_intensity must be non-negative")
        if not isinstance(self.seed, (int, np.integer)):
            raise SeedError(f"seed must be an integer, got {type(self.seed).__name__}")
        L = _noise_factor(self.gamma.matrix)
        L.setflags(write=False)
        object.__setattr__(self, "correlation_decomposition", L)
        object.__setattr__(self, "seed", int(self.seed) & (2**64 - 1))

    @classmethod
    def from_setup(cls, setup: PhysicalSetup, gamma: DiffusionMatrix, seed: int) -> "NoiseModel":
        return cls(gamma=gamma,
                   thermal_intensity=2.0 * setup.eta * setup.m1 * setup.kB * setup.T,
                   seed=seed)

    def stream(self, index: int, domain: int = _DOMAIN_TRAJECTORY) -> np.random.Generator:
        """Counter-based per-stream generator: Philox keyed by (seed, id)."""
        return np.random.Generator(np.random.Philox(key=[self.seed, domain | index]))


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Monitored-oscillator sample paths, one row per trajectory."""

    n_traj: int
    dt: float
    duration: float
    times: np.ndarray
    x: np.ndarray
    p: np.ndarray
    seeds: tuple[int, ...]
    master_seed: int

    def __post_init__(self):
        for name in ("times", "x", "p"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.x.shape != (self.n_traj, len(self.times)):
            raise ValueError("x must have shape (n_traj, n_samples)")
        if self.p.shape != self.x.shape:
            raise ValueError("p must match x in shape")


def effective_frequency(sys: LinearizedSystem) -> float:
    """Oscillation frequency of mode 1 with the partner held fixed:
    sqrt(Omega1^2 + K/m1)."""
    return float(np.sqrt(sys.Omega1**2 + sys.K / sys.m1))


def drift_2x2(setup: PhysicalSetup, sys: LinearizedSystem) -> np.ndarray:
    """Damped drift generator of (x, p) for the monitored oscillator."""
    m = setup.m1
    return np.array([
        [0.0, 1.0 / m],
        [-(m * sys.Omega1**2 + sys.K), -setup.eta],
    ])


def diffusion_2x2(setup: PhysicalSetup, noise: NoiseModel) -> np.ndarray:
    """Noise covariance rate D of (x, p): the drift-augmented covariance ODE
    dV/dt = A V + V A^T + D is the moment oracle for the sampler."""
    g = noise.gamma.matrix
    hb = setup.hbar
    return np.array([
        [hb**2 * g[2, 2], -hb**2 * g[0, 2]],
        [-hb**2 * g[0, 2], hb**2 * g[0, 0] + noise.thermal_intensity],
    ])


def stationary_covariance(setup: PhysicalSetup, sys: LinearizedSystem,
                          noise: NoiseModel) -> np.ndarray:
    """Steady-state covariance of (x, p); requires eta > 0 when noise is on."""
    A = drift_2x2(setup, sys)
    D = diffusion_2x2(setup, noise)
    if np.linalg.norm(D) == 0.0:
        return np.zeros((2, 2))
    if setup.eta <= 0.0:
        raise StabilityError("no stationary state: eta = 0 with non-zero noise")
    V = solve_continuous_lyapunov(A, -D)
    return 0.5 * (V + V.T)


def _noise_step_pieces(noise: NoiseModel, dt: float):
    """(correlation factor L, thermal stddev, sqrt(dt)) for one EM step."""
    return noise.correlation_decomposition, np.sqrt(noise.thermal_intensity), np.sqrt(dt)


def simulate(
    setup: PhysicalSetup,
    sys: LinearizedSystem,
    noise: NoiseModel,
    n_traj: int,
    dt: float,
    duration: float,
    init="stationary",
    keep_static_force: bool = False,
    block_steps: int = 4096,
    stream_offset: int = 0,
) -> TrajectoryEnsemble:
    """Integrate an ensemble of monitored-oscillator sample paths.

    Parameters
    ----------
    init : "stationary", "rest" or (x0, p0)
        "stationary" samples each trajectory's initial (x, p) from the
        steady-state covariance (falls back to rest when there is no noise);
        a pair starts every trajectory deterministically there.
    keep_static_force : bool
        Retain the constant -K d force instead of absorbing it into the
        equilibrium shift; the mean then relaxes to x = -K d/(m Omega^2 + K).
    stream_offset : int
        Index of the first trajectory stream. Trajectory k of this run is
        stream ``stream_offset + k`` of the master seed, so a big ensemble
        produced in batches is bit-identical to one single run: batching and
        scheduling cannot change results.

    Raises StabilityError when dt exceeds 1% of the fastest timescale
    min(2 pi / Omega_eff, 1/eta) and SeedError for an empty ensemble.
    """
    if n_traj <= 0:
        raise SeedError("ensemble must contain at least one trajectory")
    if dt <= 0 or duration <= 0:
        raise ValueError("dt and duration must be positive")
    om_eff = effective_frequency(sys)
    limit = 0.01 * (2.0 * np.pi / om_eff)
    if setup.eta > 0:
        limit = min(limit, 0.01 / setup.eta)
    if dt > limit * (1.0 + 1e-12):
        raise StabilityError(f"dt = {dt:.3e} exceeds 0.01 * min(2 pi/Omega, 1/eta) = {limit:.3e}")

    n_steps = int(round(duration / dt))
    if n_steps < 1:
        raise ValueError("duration shorter than one step")

    A = drift_2x2(setup, sys)
    Phi = expm(A * dt)

    if keep_static_force:
        # Fixed point of dz/dt = A z + (0, -K d): propagate deviations exactly.
        b = np.array([0.0, -sys.K * setup.d])
        z_star = -np.linalg.solve(A, b)
    else:
        z_star = np.zeros(2)

    sample_init = False
    if isinstance(init, str):
        if init == "stationary":
            V0 = stationary_covariance(setup, sys, noise) if (
                np.linalg.norm(diffusion_2x2(setup, noise)) > 0 and setup.eta > 0
            ) else np.zeros((2, 2))
            if np.linalg.norm(V0) > 0:
                C0 = _noise_factor(V0)
                sample_init = True
            z0 = z_star.copy()
        elif init == "rest":
            z0 = z_star.copy()
        else:
            raise ValueError(f"unknown init mode {init!r}")
    else:
        x0, p0 = init
        z0 = np.array([float(x0), float(p0)])

    rngs = [noise.stream(stream_offset + i) for i in range(n_traj)]
    L, sig_th, sqdt = _noise_step_pieces(noise, dt)
    hb = setup.hbar

    x = np.empty((n_traj, n_steps + 1))
    p = np.empty((n_traj, n_steps + 1))
    z = np.tile(z0, (n_traj, 1))
    if sample_init:
        u0 = np.stack([rng.standard_normal(2) for rng in rngs])
        z = z + u0 @ C0.T
    x[:, 0] = z[:, 0]
    p[:, 0] = z[:, 1]

    noiseless = (np.linalg.norm(L) == 0.0) and (sig_th == 0.0)
    step = 0
    while step < n_steps:
        bs = min(block_steps, n_steps - step)
        if noiseless:
            nx = np.zeros((n_traj, bs))
            npp = np.zeros((n_traj, bs))
        else:
            u = np.stack([rng.standard_normal((bs, 5)) for rng in rngs])
            w = u[:, :, :4] @ L.T
            nx = hb * w[:, :, 2] * sqdt
            npp = (-hb * w[:, :, 0] + sig_th * u[:, :, 4]) * sqdt
        for k in range(bs):
            z = z_star + (z - z_star) @ Phi.T
            z[:, 0] += nx[:, k]
            z[:, 1] += npp[:, k]
            x[:, step + k + 1] = z[:, 0]
            p[:, step + k + 1] = z[:, 1]
        step += bs

    times = np.arange(n_steps + 1) * dt
    return TrajectoryEnsemble(
        n_traj=n_traj, dt=dt, duration=n_steps * dt, times=times, x=x, p=p,
        seeds=tuple(range(stream_offset, stream_offset + n_traj)),
        master_seed=noise.seed,
    )


def welch_spectrum(ens: TrajectoryEnsemble, segment_len: int,
                   overlap: float = 0.5) -> NoiseSpectrum:
    """Hann-windowed, overlap- and ensemble-averaged two-sided periodogram.

    Normalized so a white input of intensity sigma^2 (sample variance
    sigma^2/dt) estimates a flat density sigma^2 in the angular two-sided
    convention of :mod:`gravdiff.spectra`. Returns the spectrum on the
    fft-ordered grid sorted by increasing omega.
    """
    n_samples = ens.x.shape[1]
    if not (0 < segment_len <= n_samples):
        raise ConfigError(
            f"segment_len must be in [1, {n_samples}], got {segment_len}"
        )
    if not (0.0 <= overlap < 1.0):
        raise ConfigError(f"overlap must be in [0, 1), got {overlap}")
    fs = 1.0 / ens.dt
    noverlap = int(overlap * segment_len)
    f, Pxx = _scipy_welch(
        ens.x, fs=fs, window="hann", nperseg=segment_len, noverlap=noverlap,
        detrend=False, return_onesided=False, scaling="density", axis=-1,
    )
    S = Pxx.mean(axis=0)
    order = np.argsort(f)
    return NoiseSpectrum(omega=2.0 * np.pi * f[order], S_total=S[order])


@dataclass(frozen=True)
class ReheatResult:
    """Heating-rate estimate from repeated prepare/evolve/measure cycles."""

    Gamma_hat: float
    rel_err: float
    stderr: float
    n_cycles: int
    cycle_time: float

    def __iter__(self):
        return iter((self.Gamma_hat, self.rel_err))


def reheating_run(
    setup: PhysicalSetup,
    sys: LinearizedSystem,
    noise: NoiseModel,
    n_cycles: int,
    cycle_time: float,
    detector_noise_N: float = 1.0,
    dt: float | None = None,
) -> ReheatResult:
    """Estimate the phonon heating rate by dark reheating cycles.

    Each cycle prepares the oscillator near its ground state (a fresh draw
    from the ground-state phase-space distribution), lets it evolve without
    measurement for ``cycle_time``, and reads the energy out once with
    additive detector noise of ``detector_noise_N`` quanta. The growth slope
    Gamma_hat = <n_hat>/cycle_time estimates the total heating rate; the
    quoted relative error is the standard error of that mean across cycles.

    Requires cycle_time < 0.1 / eta so damping does not bend the growth.
    """
    if n_cycles < 2:
        raise SeedError("need at least two cycles to estimate a rate")
    if setup.eta > 0 and cycle_time >= 0.1 / setup.eta:
        raise ProtocolError(
            f"cycle_time = {cycle_time:.3e} s is not << 1/eta = {1.0 / setup.eta:.3e} s"
        )
    om_eff = effective_frequency(sys)
    if dt is None:
        dt = min(0.005 * 2.0 * np.pi / om_eff, cycle_time / 16.0)
    n_steps = max(1, int(round(cycle_time / dt)))
    dt = cycle_time / n_steps

    m = setup.m1
    hb = setup.hbar
    A = drift_2x2(setup, sys)
    Phi = expm(A * dt)
    L, sig_th, sqdt = _noise_step_pieces(noise, dt)

    x_var0 = hb / (2.0 * m * om_eff)
    p_var0 = m * hb * om_eff / 2.0

    rngs = [noise.stream(i, domain=_DOMAIN_CYCLE) for i in range(n_cycles)]
    # one block draw per cycle stream: 2 prep + n_steps*5 path + 1 readout
    u0 = np.empty((n_cycles, 2))
    path = np.empty((n_cycles, n_steps, 5))
    xi = np.empty(n_cycles)
    for i, rng in enumerate(rngs):
        u0[i] = rng.standard_normal(2)
        path[i] = rng.standard_normal((n_steps, 5))
        xi[i] = rng.standard_normal()

    z = np.empty((n_cycles, 2))
    z[:, 0] = u0[:, 0] * np.sqrt(x_var0)
    z[:, 1] = u0[:, 1] * np.sqrt(p_var0)

    w = path[:, :, :4] @ L.T
    nx = hb * w[:, :, 2] * sqdt
    npp = (-hb * w[:, :, 0] + sig_th * path[:, :, 4]) * sqdt
    for k in range(n_steps):
        z = z @ Phi.T
        z[:, 0] += nx[:, k]
        z[:, 1] += npp[:, k]

    energy = z[:, 1] ** 2 / (2.0 * m) + 0.5 * m * om_eff**2 * z[:, 0] ** 2
    n_hat = energy / (hb * om_eff) - 0.5
    if detector_noise_N > 0:
        n_hat = n_hat + detector_noise_N * xi

    gamma_hat = float(n_hat.mean() / cycle_time)
    stderr = float(n_hat.std(ddof=1) / np.sqrt(n_cycles) / cycle_time)
    rel_err = stderr / abs(gamma_hat) if gamma_hat != 0.0 else float("inf")
    return ReheatResult(Gamma_hat=gamma_hat, rel_err=rel_err, stderr=stderr,
                        n_cycles=n_cycles, cycle_time=cycle_time)


def phonon_heating_rate(setup: PhysicalSetup, sys: LinearizedSystem,
                        noise: NoiseModel) -> float:
    """Injected phonon heating rate of the monitored oscillator [1/s].

    Gamma = (D_pp / 2m + m Omega_eff^2 D_xx / 2) / (hbar Omega_eff), the
    small-time energy growth of the sampler divided by the quantum.
    """
    D = diffusion_2x2(setup, noise)
    om_eff = effective_frequency(sys)
    m = setup.m1
    dE_dt = D[1, 1] / (2.0 * m) + 0.5 * m * om_eff**2 * D[0, 0]
    return float(dE_dt / (setup.hbar * om_eff))


def desk_rescale(setup: PhysicalSetup, gamma: DiffusionMatrix,
                 scale: float) -> tuple[PhysicalSetup, DiffusionMatrix]:
    """Map a setup to a faster clock while preserving its dimensionless form.

    All rates scale by ``scale`` (omega, eta), the temperature follows so the
    occupation number kB T / (hbar Omega) is unchanged, and the separation
    shrinks as d / scale^(2/3) so the coupling K picks up the same scale^2 as
    m omega^2. Diffusion entries transform per block: position-position by
    scale^2, cross terms by scale, momentum-momentum unchanged, which keeps
    every dimensionless ratio gamma_bar / Omega fixed. Direct simulation at
    sub-millihertz frequencies over days of model time is impractical; this
    map moves validation runs to desk timescales exactly.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    s = float(scale)
    new_setup = PhysicalSetup(
        m1=setup.m1, m2=setup.m2,
        omega1=setup.omega1 * s, omega2=setup.omega2 * s,
        d=setup.d / s ** (2.0 / 3.0),
        T=setup.T * s, eta=setup.eta * s,
        G=setup.G, hbar=setup.hbar, kB=setup.kB,
    )
    block = np.ones((4, 4))
    block[:2, :2] = s**2
    block[:2, 2:] = s
    block[2:, :2] = s
    return new_setup, DiffusionMatrix(gamma.matrix * block)


def write_raw_trajectories(path, ens: TrajectoryEnsemble) -> None:
    """Dump the ensemble to the documented little-endian binary record.

    Layout: magic ``GDMC`` (4 bytes), version uint32, n_traj uint64,
    n_samples uint64, dt float64, duration float64, master_seed uint64, then
    for each trajectory its x samples followed by its p samples, float64.
    """
    n_samples = ens.x.shape[1]
    header = _RAW_MAGIC + struct.pack(
        "<IQQddQ", _RAW_VERSION, ens.n_traj, n_samples, ens.dt, ens.duration,
        ens.master_seed,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for i in range(ens.n_traj):
            fh.write(np.ascontiguousarray(ens.x[i], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(ens.p[i], dtype="<f8").tobytes())


def read_raw_trajectories(path) -> TrajectoryEnsemble:
    """Read a record written by :func:`write_raw_trajectories`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _RAW_MAGIC:
            raise ConfigError(f"not a trajectory record (magic {magic!r})")
        version, n_traj, n_samples, dt, duration, master_seed = struct.unpack(
            "<IQQddQ", fh.read(4 + 8 + 8 + 8 + 8 + 8)
        )
        if version != _RAW_VERSION:
            raise ConfigError(f"unsupported record version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    expected = 2 * n_traj * n_samples
    if data.size != expected:
        raise ConfigError(f"truncated record: {data.size} values, expected {expected}")
    data = data.reshape(n_traj, 2, n_samples)
    return TrajectoryEnsemble(
        n_traj=n_traj, dt=dt, duration=duration,
        times=np.arange(n_samples) * dt,
        x=data[:, 0, :].copy(), p=data[:, 1, :].copy(),
        seeds=tuple(range(n_traj)), master_seed=master_seed,
    )
