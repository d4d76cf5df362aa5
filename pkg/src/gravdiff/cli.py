"""Command-line front end.

Subcommands: linearize, bound, evolve, spectrum, simulate, reheat,
feasibility, sweep. Each run resolves its parameters from a flat key-value
config file (see gravdiff.config for the key table) or the built-in
reference pendulum design (--table1), writes its outputs as CSV/JSON and
emits a manifest alongside recording the resolved parameters, the master
seed, the tool version, the input hash and the output hashes.

Exit codes: 0 success, 2 configuration problems, 3 numeric/stability
problems, 4 I/O problems.
"""

from __future__ import annotations

import argparse
import os
import sys as _sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import manifest as mani
from .bounds import dimensional_bound, final_bound, minimal_diffusion, strongest_bound, weak_bound
from .dynamics import EvolutionResult, evolve_covariance
from .errors import ConfigError, GravdiffError
from .feasibility import REFERENCE_PENDULUM, FeasibilityParams, feasibility_report
from .model import (
    LinearizedSystem,
    PhysicalSetup,
    ground_state,
    linearize,
    symplectic_form,
    to_dimensionless,
)
from .montecarlo import (
    NoiseModel,
    effective_frequency,
    reheating_run,
    simulate,
    welch_spectrum,
    write_raw_trajectories,
)
from .spectra import dns_fixed_source, dns_symmetric_pair

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _pendulum_system(setup: PhysicalSetup, Omega: float) -> LinearizedSystem:
    """Linear system with the resonance frequency taken as given.

    Used when Omega is the measured pendulum frequency rather than the
    output of the trap linearization (the two-trap renormalization does not
    apply to a torsion mode).
    """
    K = setup.coupling
    H = np.zeros((4, 4))
    H[0, 0] = setup.m1 * Omega**2
    H[1, 1] = setup.m2 * Omega**2
    H[0, 1] = H[1, 0] = K
    H[2, 2] = 1.0 / setup.m1
    H[3, 3] = 1.0 / setup.m2
    return LinearizedSystem(
        Omega1=Omega, Omega2=Omega, K=K, m1=setup.m1, m2=setup.m2,
        H=H, J=symplectic_form(), equilibrium_shift=(0.0, 0.0),
    )


def _resolve_inputs(args):
    """(cfg dict, config sha) from --config/--table1."""
    if getattr(args, "table1", False):
        p = REFERENCE_PENDULUM
        cfg = {
            "m1_kg": p.m, "m2_kg": p.m,
            "omega1_rad_s": p.Omega, "omega2_rad_s": p.Omega,
            "d_m": p.d, "T_K": p.T, "eta_per_s": p.eta,
            "Omega_rad_s": p.Omega, "rho_kg_m3": p.rho, "R_m": p.R,
            "beta": p.beta, "Q": p.Q, "N_quanta": p.N, "r_fraction": p.r,
        }
        return cfg, None
    if getattr(args, "config", None) is None:
        raise ConfigError("either --config FILE or --table1 is required")
    path = Path(args.config)
    cfg = cfgmod.load_config(path)
    return cfg, mani.sha256_file(path)


def _spectrum_model(cfg, args):
    """(setup, sys, gamma) for spectrum/simulate/reheat commands."""
    setup = cfgmod.setup_from_config(cfg)
    if getattr(args, "table1", False) or "Omega_rad_s" in cfg:
        Omega = cfg.get("Omega_rad_s", setup.omega1)
        sys_lin = _pendulum_system(setup, Omega)
    else:
        sys_lin = linearize(setup)
    if getattr(args, "table1", False):
        gamma = minimal_diffusion(setup, "position-only")
    else:
        gamma = cfgmod.gamma_from_config(cfg)
    return setup, sys_lin, gamma


def _start_manifest(args, cfg, sha, seed=None) -> mani.RunManifest:
    return mani.RunManifest(
        command=args.command,
        argv=list(args._argv),
        parameters={k: cfg[k] for k in sorted(cfg)},
        seed=seed,
        config_sha256=sha,
    )


def _finish(args, manifest: mani.RunManifest) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest.write(out / f"{args.command}.manifest.json")
    return EXIT_OK


# ----------------------------------------------------------------- commands

def cmd_linearize(args) -> int:
    cfg, sha = _resolve_inputs(args)
    setup = cfgmod.setup_from_config(cfg)
    sys_lin = linearize(setup)
    payload = {
        "Omega1_rad_s": sys_lin.Omega1,
        "Omega2_rad_s": sys_lin.Omega2,
        "K_N_per_m": sys_lin.K,
        "equilibrium_shift_m": list(sys_lin.equilibrium_shift),
        "H": [[float(v) for v in row] for row in sys_lin.H],
    }
    print(f"Omega1 = {sys_lin.Omega1:.9e} rad/s")
    print(f"Omega2 = {sys_lin.Omega2:.9e} rad/s")
    print(f"K      = {sys_lin.K:.9e} N/m")
    print(f"shift  = ({sys_lin.equilibrium_shift[0]:.9e}, {sys_lin.equilibrium_shift[1]:.9e}) m")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(args, cfg, sha)
    path = out / "linearize.json"
    mani.write_json(path, payload)
    manifest.add_output(path)
    return _finish(args, manifest)


def cmd_bound(args) -> int:
    cfg, sha = _resolve_inputs(args)
    setup, sys_lin, gamma = _spectrum_model(cfg, args)
    omega = cfg.get("Omega_rad_s", sys_lin.Omega1)
    reports = [final_bound(gamma, setup, omega)]
    reports.append(dimensional_bound(gamma, sys_lin, hbar=setup.hbar,
                                     paper_literal=args.paper_literal))
    _, gamma_bar = to_dimensionless(sys_lin, gamma, setup.hbar)
    reports.append(strongest_bound(gamma_bar, sys_lin))
    reports.append(weak_bound(gamma_bar, sys_lin))

    final = reports[0]
    print(f"final bound rhs G m^2/(hbar d^3) = {final.rhs:.9e} m^-2 s^-1")
    for rep in reports:
        status = "satisfied" if rep.satisfied else "violated"
        print(f"{rep.bound_id:20s} lhs = {rep.lhs:.6e}  rhs = {rep.rhs:.6e}  "
              f"margin = {rep.margin:+.6e}  [{status}]")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(args, cfg, sha)
    path = out / "bound.jsonl"
    rows = []
    for rep in reports:
        d = rep.to_dict()
        d["inputs_sha256"] = sha if sha is not None else "table1"
        rows.append(d)
    mani.write_json_lines(path, rows)
    manifest.add_output(path)
    return _finish(args, manifest)


def cmd_evolve(args) -> int:
    cfg, sha = _resolve_inputs(args)
    setup, sys_lin, gamma = _spectrum_model(cfg, args)
    period = sys_lin.min_period()
    dt = args.dt if args.dt is not None else 0.002 * period
    t_end = args.periods * period
    res = evolve_covariance(ground_state(), sys_lin, gamma, t_end, dt,
                            hbar=setup.hbar)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(args, cfg, sha)
    path = out / "evolve.csv"
    mani.write_csv(path, EvolutionResult.CSV_HEADER, res.csv_rows())
    manifest.add_output(path)
    idx = res.first_ppt_violation()
    if idx is None:
        print(f"ppt_min_eig >= -1e-08 throughout [0, {t_end:.6g}] s")
    else:
        print(f"ppt_min_eig < -1e-08 first at t = {res.times[idx]:.6g} s")
    return _finish(args, manifest)


def cmd_spectrum(args) -> int:
    cfg, sha = _resolve_inputs(args)
    setup, sys_lin, gamma = _spectrum_model(cfg, args)
    Om = sys_lin.Omega1
    w = np.linspace(0.25 * Om, 2.0 * Om, args.grid)
    if args.model == "fixed":
        spec = dns_fixed_source(setup, sys_lin, gamma, w)
    else:
        spec = dns_symmetric_pair(setup, sys_lin, gamma, w)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(args, cfg, sha)
    path = out / "spectrum.csv"
    mani.write_csv(path, spec.CSV_HEADER, spec.csv_rows(), preamble=spec.convention)
    manifest.add_output(path)
    peak = int(np.argmax(spec.S_total))
    print(f"{args.grid} rows written; convention: {spec.convention}")
    print(f"peak S = {spec.S_total[peak]:.6e} m^2 s at omega = {spec.omega[peak]:.6e} rad/s")
    return _finish(args, manifest)


def _resolve_seed(args, cfg):
    """--seed wins, then a config 'seed' key, then recorded entropy."""
    if args.seed is not None:
        return int(args.seed)
    if "seed" in cfg:
        return int(cfg["seed"])
    return int.from_bytes(os.urandom(8), "little") & (2**63 - 1)


def cmd_simulate(args) -> int:
    cfg, sha = _resolve_inputs(args)
    setup, sys_lin, gamma = _spectrum_model(cfg, args)
    seed = _resolve_seed(args, cfg)
    noise = NoiseModel.from_setup(setup, gamma, seed)
    om_eff = effective_frequency(sys_lin)
    dt = args.dt if args.dt is not None else 0.005 * 2.0 * np.pi / om_eff
    duration = args.duration if args.duration is not None else (
        20.0 / setup.eta if setup.eta > 0 else 50.0 * 2.0 * np.pi / om_eff
    )
    ens = simulate(setup, sys_lin, noise, args.traj, dt, duration)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(args, cfg, sha, seed=seed)

    stride = max(1, ens.x.shape[1] // 2000)
    rows = zip(
        ens.times[::stride],
        ens.x.mean(axis=0)[::stride],
        ens.x.var(axis=0)[::stride],
        ens.p.mean(axis=0)[::stride],
        ens.p.var(axis=0)[::stride],
    )
    path = out / "simulate_summary.csv"
    mani.write_csv(path, ("t", "mean_x", "var_x", "mean_p", "var_p"), rows)
    manifest.add_output(path)

    if args.welch_segment is not None:
        spec = welch_spectrum(ens, args.welch_segment, args.welch_overlap)
        spath = out / "simulate_spectrum.csv"
        mani.write_csv(spath, spec.CSV_HEADER, spec.csv_rows(), preamble=spec.convention)
        manifest.add_output(spath)

    if args.raw is not None:
        write_raw_trajectories(args.raw, ens)
        manifest.add_output(args.raw)

    print(f"{args.traj} trajectories x {ens.x.shape[1]} samples, seed = {seed}")
    return _finish(args, manifest)


def cmd_reheat(args) -> int:
    cfg, sha = _resolve_inputs(args)
    setup, sys_lin, gamma = _spectrum_model(cfg, args)
    seed = _resolve_seed(args, cfg)
    noise = NoiseModel.from_setup(setup, gamma, seed)
    res = reheating_run(setup, sys_lin, noise, args.cycles, args.cycle_time,
                        detector_noise_N=args.detector_noise)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(args, cfg, sha, seed=seed)
    path = out / "reheat.json"
    mani.write_json(path, {
        "Gamma_hat_per_s": res.Gamma_hat,
        "rel_err": res.rel_err,
        "stderr_per_s": res.stderr,
        "n_cycles": res.n_cycles,
        "cycle_time_s": res.cycle_time,
    })
    manifest.add_output(path)
    print(f"Gamma_hat = {res.Gamma_hat:.6e} 1/s  rel_err = {res.rel_err:.3f}")
    return _finish(args, manifest)


def cmd_feasibility(args) -> int:
    cfg, sha = _resolve_inputs(args)
    if getattr(args, "table1", False):
        params = REFERENCE_PENDULUM
    else:
        params = cfgmod.feasibility_from_config(cfg)
    report = feasibility_report(params)
    print(report.to_text())
    print(f"verdict: {report.verdict}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(args, cfg, sha)
    path = out / "feasibility.json"
    mani.write_json(path, report.to_dict())
    manifest.add_output(path)
    return _finish(args, manifest)


def cmd_sweep(args) -> int:
    cfg, sha = _resolve_inputs(args)
    if getattr(args, "table1", False):
        base = REFERENCE_PENDULUM
    else:
        base = cfgmod.feasibility_from_config(cfg)
    field_map = {
        "Omega_rad_s": "Omega", "rho_kg_m3": "rho", "R_m": "R", "beta": "beta",
        "T_K": "T", "Q": "Q", "N_quanta": "N", "r_fraction": "r",
    }
    if args.param not in field_map:
        raise ConfigError(
            f"unknown sweep parameter {args.param!r}; choose from {sorted(field_map)}"
        )
    if args.values is not None:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --values list: {exc}") from exc
    else:
        if args.start is None or args.stop is None:
            raise ConfigError("sweep needs --values or --start/--stop")
        if args.log:
            values = np.geomspace(args.start, args.stop, args.num).tolist()
        else:
            values = np.linspace(args.start, args.stop, args.num).tolist()
    if not values:
        raise ConfigError("empty sweep")

    attr = field_map[args.param]

    def evaluate(v):
        kwargs = {name: getattr(base, name)
                  for name in ("Omega", "rho", "R", "beta", "T", "Q", "N", "r",
                               "G", "hbar", "kB")}
        kwargs[attr] = v
        rep = feasibility_report(FeasibilityParams(**kwargs))
        return (v, rep.m, rep.omega_G, rep.Gamma_G, rep.Gamma_th, rep.Q_required,
                rep.Q_required_relaxed, rep.t_int, rep.margin_conservative,
                rep.margin_relaxed, 1.0 if rep.verdict == "feasible-in-principle" else 0.0)

    if args.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(evaluate, values))
    else:
        rows = [evaluate(v) for v in values]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _start_manifest(args, cfg, sha)
    path = out / "sweep.csv"
    header = (args.param, "m_kg", "omega_G_per_s", "Gamma_G_per_s", "Gamma_th_per_s",
              "Q_required", "Q_required_relaxed", "t_int_s",
              "margin_conservative_s2", "margin_relaxed_s2", "feasible")
    mani.write_csv(path, header, rows)
    manifest.add_output(path)
    print(f"{len(rows)} sweep points written to {path}")
    return _finish(args, manifest)


# ------------------------------------------------------------------- parser

_SETUP_KEYS = ("m1_kg", "m2_kg", "omega1_rad_s", "omega2_rad_s", "d_m",
               "T_K", "eta_per_s", "Q", "G_m3_kg_s2", "hbar_Js", "kB_J_K")
_GAMMA_KEYS = ("gamma11", "gamma12", "gamma13", "gamma14", "gamma22",
               "gamma23", "gamma24", "gamma33", "gamma34", "gamma44")
_PENDULUM_KEYS = ("Omega_rad_s", "rho_kg_m3", "R_m", "beta", "T_K", "Q",
                  "N_quanta", "r_fraction", "G_m3_kg_s2", "hbar_Js", "kB_J_K")


def _keys_epilog(*groups) -> str:
    keys = []
    for g in groups:
        keys.extend(k for k in g if k not in keys)
    return "config keys read: " + ", ".join(keys)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gravdiff",
        description="Diffusive-gravity toolkit: linearization, separability "
                    "bounds, covariance evolution, noise spectra, Monte Carlo "
                    "and experiment feasibility.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_seed=False):
        p.add_argument("--config", help="flat key-value config file (see gravdiff.config docs)")
        p.add_argument("--table1", action="store_true",
                       help="use the built-in reference pendulum parameter set")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--threads", type=int, default=1,
                       help="parallelism cap; results are independent of N")
        if needs_seed:
            p.add_argument("--seed", type=int, default=None,
                           help="master seed; omitted -> entropy seed recorded in the manifest")

    p = sub.add_parser("linearize",
                       help="renormalized frequencies, coupling and equilibrium shifts",
                       epilog=_keys_epilog(_SETUP_KEYS))
    common(p)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("bound",
                       help="evaluate the separability-bound chain on the configured gamma",
                       epilog=_keys_epilog(_SETUP_KEYS, _GAMMA_KEYS, ("Omega_rad_s",)))
    common(p)
    p.add_argument("--paper-literal", action="store_true",
                   help="use the printed (dimensionally inconsistent) form of the dimensional bound")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("evolve",
                       help="integrate the covariance ODE from the ground state",
                       epilog=_keys_epilog(_SETUP_KEYS, _GAMMA_KEYS, ("Omega_rad_s",)))
    common(p)
    p.add_argument("--periods", type=float, default=3.0, help="evolution length in oscillator periods")
    p.add_argument("--dt", type=float, default=None, help="RK4 step [s] (default: period/500)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("spectrum",
                       help="closed-form displacement-noise spectrum to CSV",
                       epilog=_keys_epilog(_SETUP_KEYS, _GAMMA_KEYS, ("Omega_rad_s",)))
    common(p)
    p.add_argument("--grid", type=int, default=1024, help="number of frequency points")
    p.add_argument("--model", choices=("fixed", "pair"), default="fixed",
                   help="fixed partner mass or symmetric mobile pair")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("simulate", help="Langevin Monte Carlo ensemble",
                       epilog=_keys_epilog(_SETUP_KEYS, _GAMMA_KEYS, ("Omega_rad_s",)))
    common(p, needs_seed=True)
    p.add_argument("--traj", type=int, default=64, help="number of trajectories")
    p.add_argument("--dt", type=float, default=None, help="step [s]")
    p.add_argument("--duration", type=float, default=None, help="trajectory length [s]")
    p.add_argument("--welch-segment", type=int, default=None,
                   help="Welch segment length in samples (enables spectrum output)")
    p.add_argument("--welch-overlap", type=float, default=0.5)
    p.add_argument("--raw", default=None, help="also dump raw trajectories to this binary file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reheat", help="reheating-rate measurement protocol",
                       epilog=_keys_epilog(_SETUP_KEYS, _GAMMA_KEYS, ("Omega_rad_s",)))
    common(p, needs_seed=True)
    p.add_argument("--cycles", type=int, default=256)
    p.add_argument("--cycle-time", type=float, required=True, help="dark time per cycle [s]")
    p.add_argument("--detector-noise", type=float, default=1.0, help="readout noise [quanta]")
    p.set_defaults(func=cmd_reheat)

    p = sub.add_parser("feasibility", help="heating-rate budget and verdict",
                       epilog=_keys_epilog(_PENDULUM_KEYS))
    common(p)
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("sweep", help="sweep one design parameter of the feasibility report",
                       epilog=_keys_epilog(_PENDULUM_KEYS))
    common(p)
    p.add_argument("--param", required=True, help="config key to sweep (e.g. Q, T_K, Omega_rad_s)")
    p.add_argument("--values", default=None, help="comma-separated values")
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--stop", type=float, default=None)
    p.add_argument("--num", type=int, default=16)
    p.add_argument("--log", action="store_true", help="geometric spacing")
    p.set_defaults(func=cmd_sweep)

    return parser


def replay_manifest(manifest_path, out_dir=None) -> int:
    """Re-run the command recorded in a manifest (optionally into out_dir)."""
    record = mani.load_manifest(manifest_path)
    argv = list(record["argv"])
    if record.get("seed") is not None and "--seed" not in " ".join(argv):
        argv += ["--seed", str(record["seed"])]
    if out_dir is not None:
        if "--out" in argv:
            i = argv.index("--out")
            argv[i + 1] = str(out_dir)
        else:
            argv += ["--out", str(out_dir)]
    return main(argv)


def main(argv=None) -> int:
    if argv is None:
        argv = _sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches the config exit code
        return int(exc.code) if exc.code else 0
    args._argv = list(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except GravdiffError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=_sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
