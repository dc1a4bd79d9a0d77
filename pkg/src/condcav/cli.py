"""Batch front door: JSON run configs in, deterministic CSV reports out.

Subcommands:

    spectrum    mode table (roots, modulation amplitudes, frequencies)
    resonances  drive-harmonic resonance scan
    evolve      photon-number evolution (msa | direct | both)
    sweep       one-parameter sweep, one summary row per point

Times in the config are laboratory seconds; they are converted to natural
units (metres) on ingestion and back on output.  All floats are written in
scientific notation with 12 significant digits and no timestamps, so a rerun
of the same config is byte-identical.  Exit codes: 0 success, 2 config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .constants import C_LIGHT, angular_wavenumber_to_hz, seconds_to_metres
from .coupling import QuadratureError, coupling_coeffs, scan_resonances
from .direct import StepSizeError, extract_slow, integrate_full
from .drive import DriveProfile, linear_ramp, profile_from_csv, raised_cosine
from .msa import (
    ResonanceConditionError,
    msa_general,
    msa_parametric,
    photon_number,
)
from .spectrum import (
    CavityConfig,
    ConvergenceError,
    PerturbativeValidityWarning,
    build_spectrum,
)

WORKERS_ENV = "CONDCAV_WORKERS"


class ConfigError(ValueError):
    """Invalid run configuration; message carries the offending key path."""


# ----------------------------------------------------------------- config --

def default_run_config() -> dict:
    """Reference configuration: centimetre cavity, semiconductor film,
    picosecond excitation, pulse period tuned so the 5th harmonic sits on
    the fundamental parametric resonance."""
    cavity = dict(L_x=1e-2, L_y=0.1, L_z=0.1, V_0=1e12, V_max=1e16)
    cfg_obj = CavityConfig(**cavity)
    spec = build_spectrum(cfg_obj, drive_f0=0.5, mode_cut=(1, 1, 1))
    omt = spec.psi_mode((1, 1, 1)).omega_tilde
    harmonic = 5
    T_m = math.pi * harmonic / omt           # j*Omega = 2*omega_tilde
    return {
        "cavity": cavity,
        "drive": {
            "shape": "linear_ramp",
            "T": T_m / C_LIGHT,
            "tau_e": 1e-12,
            "J_max": 20,
            "smooth": False,
            "samples_csv": None,
        },
        "modes": {"cut": [5, 3, 3]},
        "evolution": {
            "method": "msa",
            "tau_end": 0.2,
            "n_points": 301,
            "target_mode": [1, 1, 1],
            "harmonic": harmonic,
            "dt_factor": 40,
            "tolerance": None,
            "seed_mode": "target",
        },
        "sweep": None,
        "output": {"dir": ".", "prefix": "run"},
    }


def _require(cfg, path, types, check=None, what=""):
    node = cfg
    for key in path.split(".")[:-1]:
        node = node.get(key, {})
    leaf = path.split(".")[-1]
    if leaf not in node:
        raise ConfigError(f"config error at {path}: missing")
    value = node[leaf]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ConfigError(f"config error at {path}: expected {what or types}")
    if check is not None and not check(value):
        raise ConfigError(f"config error at {path}: {what}")
    return value


def validate_config(cfg: dict) -> dict:
    """Normalise and validate a run configuration; raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("config error at <root>: expected a JSON object")
    out = copy.deepcopy(default_run_config())
    for section in ("cavity", "drive", "modes", "evolution", "output"):
        user = cfg.get(section, {})
        if not isinstance(user, dict):
            raise ConfigError(f"config error at {section}: expected an object")
        unknown = set(user) - set(out[section])
        if unknown:
            raise ConfigError(
                f"config error at {section}.{sorted(unknown)[0]}: unknown key")
        out[section].update(user)
    out["sweep"] = cfg.get("sweep", None)

    num = (int, float)
    for key in ("L_x", "L_y", "L_z", "V_0", "V_max"):
        _require(out, f"cavity.{key}", num, lambda v: v > 0, "must be positive")
    if out["cavity"]["V_max"] < out["cavity"]["V_0"]:
        raise ConfigError("config error at cavity.V_max: must be >= V_0")

    shape = _require(out, "drive.shape", str,
                     lambda v: v in ("linear_ramp", "raised_cosine", "sampled"),
                     "must be linear_ramp | raised_cosine | sampled")
    T = _require(out, "drive.T", num, lambda v: v > 0, "must be positive")
    tau_e = _require(out, "drive.tau_e", num, lambda v: v > 0, "must be positive")
    if shape == "linear_ramp" and not tau_e < T:
        raise ConfigError("config error at drive.tau_e: must satisfy tau_e < T")
    _require(out, "drive.J_max", int, lambda v: v >= 1, "must be an integer >= 1")
    if shape == "sampled" and not out["drive"].get("samples_csv"):
        raise ConfigError("config error at drive.samples_csv: required for "
                          "shape=sampled")

    cut = _require(out, "modes.cut", list, lambda v: len(v) == 3,
                   "must be a list of three integers >= 1")
    if not all(isinstance(c, int) and c >= 1 for c in cut):
        raise ConfigError("config error at modes.cut: must be a list of three "
                          "integers >= 1")

    _require(out, "evolution.method", str,
             lambda v: v in ("msa", "direct", "both"),
             "must be msa | direct | both")
    _require(out, "evolution.tau_end", num, lambda v: v >= 0,
             "must be >= 0 (slow time, natural units)")
    _require(out, "evolution.n_points", int, lambda v: v >= 1,
             "must be an integer >= 1")
    target = _require(out, "evolution.target_mode", list, lambda v: len(v) == 3,
                      "must be a list of three integers >= 1")
    if not all(isinstance(c, int) and c >= 1 for c in target):
        raise ConfigError("config error at evolution.target_mode: indices "
                          "must be integers >= 1")
    if any(t > c for t, c in zip(target, cut)):
        raise ConfigError("config error at evolution.target_mode: outside "
                          "modes.cut")
    harmonic = out["evolution"]["harmonic"]
    if harmonic is not None and (not isinstance(harmonic, int) or harmonic < 1):
        raise ConfigError("config error at evolution.harmonic: must be null "
                          "or an integer >= 1")
    if harmonic is not None and harmonic > out["drive"]["J_max"]:
        raise ConfigError("config error at evolution.harmonic: exceeds "
                          "drive.J_max")
    tolerance = out["evolution"]["tolerance"]
    if tolerance is not None:
        if not isinstance(tolerance, num) or isinstance(tolerance, bool) \
                or not math.isfinite(tolerance) or tolerance < 0:
            raise ConfigError("config error at evolution.tolerance: must be "
                              "null or a finite number >= 0")
    _require(out, "evolution.dt_factor", num, lambda v: v >= 4,
             "must be >= 4 (steps per fastest period)")
    seed_mode = out["evolution"]["seed_mode"]
    if seed_mode not in ("target", "all") and not (
            isinstance(seed_mode, list) and len(seed_mode) == 3):
        raise ConfigError("config error at evolution.seed_mode: must be "
                          "'target', 'all' or a mode triple")

    sweep = out["sweep"]
    if sweep is not None:
        if not isinstance(sweep, dict) or "parameter" not in sweep:
            raise ConfigError("config error at sweep.parameter: missing")
        known = {"cavity": out["cavity"], "drive": out["drive"],
                 "evolution": out["evolution"]}
        parts = str(sweep["parameter"]).split(".")
        if len(parts) != 2 or parts[0] not in known \
                or parts[1] not in known[parts[0]]:
            raise ConfigError(f"config error at sweep.parameter: unknown "
                              f"parameter {sweep['parameter']!r}")
        if "values" in sweep:
            if not isinstance(sweep["values"], list) or not sweep["values"]:
                raise ConfigError("config error at sweep.values: must be a "
                                  "non-empty list")
        else:
            for key in ("start", "stop", "num"):
                if key not in sweep:
                    raise ConfigError(f"config error at sweep.{key}: missing")
            if sweep.get("scale", "linear") not in ("linear", "log"):
                raise ConfigError("config error at sweep.scale: must be "
                                  "linear | log")

    _require(out, "output.dir", str)
    _require(out, "output.prefix", str)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return validate_config({})
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config error at <file>: {path} not found")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config error at <file>: invalid JSON ({exc})")
    return validate_config(raw)


# ---------------------------------------------------------------- assembly --

def build_problem(cfg: dict):
    """(CavityConfig, DriveProfile, ModeSpectrum) from a validated config."""
    cav = CavityConfig(**cfg["cavity"])
    d = cfg["drive"]
    T_m = seconds_to_metres(d["T"])
    if d["shape"] == "linear_ramp":
        drive = linear_ramp(T_m, seconds_to_metres(d["tau_e"]), d["J_max"],
                            smooth=d.get("smooth", False))
    elif d["shape"] == "raised_cosine":
        drive = raised_cosine(T_m)
    else:
        drive = profile_from_csv(d["samples_csv"], d["J_max"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PerturbativeValidityWarning)
        spectrum = build_spectrum(cav, drive.f0, tuple(cfg["modes"]["cut"]))
    return cav, drive, spectrum


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for value in row:
                if isinstance(value, float):
                    cells.append(f"{value:.12e}")
                else:
                    cells.append(str(value))
            fh.write(",".join(cells) + "\n")


def _emit_effective_config(cfg, outdir, prefix):
    path = outdir / f"{prefix}_config.json"
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _outdir(cfg, override):
    outdir = Path(override) if override else Path(cfg["output"]["dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


# ------------------------------------------------------------- subcommands --

def cmd_spectrum(cfg, outdir):
    _, drive, spectrum = build_problem(cfg)
    rows = []
    for mode in spectrum.psi:
        rows.append(["psi", mode.index.m_x, mode.index.m_y, mode.index.m_z,
                     mode.k0, mode.epsilon, mode.omega_bar, mode.omega_tilde,
                     angular_wavenumber_to_hz(mode.omega_tilde) / 1e9])
    for mode in spectrum.phi:
        k_phi = 2 * math.pi * mode.index.m_x / spectrum.cfg.L_x
        rows.append(["phi", mode.index.m_x, mode.index.m_y, mode.index.m_z,
                     k_phi, 0.0, mode.w, mode.w,
                     angular_wavenumber_to_hz(mode.w) / 1e9])
    path = outdir / f"{cfg['output']['prefix']}_spectrum.csv"
    _write_csv(path, ["family", "mx", "my", "mz", "k0_per_m", "epsilon",
                      "omega_bar_per_m", "omega_tilde_per_m", "freq_GHz"], rows)
    _emit_effective_config(cfg, outdir, cfg["output"]["prefix"])
    return 0


def cmd_resonances(cfg, outdir):
    _, drive, spectrum = build_problem(cfg)
    report = scan_resonances(spectrum, drive.Omega, drive.J_max,
                             cfg["evolution"]["tolerance"])
    path = outdir / f"{cfg['output']['prefix']}_resonances.csv"
    report.to_csv(path)
    _emit_effective_config(cfg, outdir, cfg["output"]["prefix"])
    return 0


def _select_harmonic(cfg, drive, spectrum, target):
    """Configured harmonic, or the closest parametric one for the target."""
    if cfg["evolution"]["harmonic"] is not None:
        return cfg["evolution"]["harmonic"]
    mode = spectrum.psi_mode(target)
    best, best_miss = None, math.inf
    for j in range(1, drive.J_max + 1):
        if drive.f_j[j - 1] <= 0.0:
            continue
        miss = abs(j * drive.Omega - 2 * mode.omega_tilde)
        if miss < best_miss:
            best, best_miss = j, miss
    return best


def _seed_list(cfg, target):
    seed_mode = cfg["evolution"]["seed_mode"]
    if seed_mode == "all":
        return None  # every retained mode
    if seed_mode == "target":
        return [tuple(target)]
    return [tuple(seed_mode)]


def cmd_evolve(cfg, outdir):
    _, drive, spectrum = build_problem(cfg)
    evo = cfg["evolution"]
    target = tuple(evo["target_mode"])
    mode = spectrum.psi_mode(target)
    tol = evo["tolerance"]
    j = _select_harmonic(cfg, drive, spectrum, target)

    on_resonance = False
    if j is not None:
        mismatch = abs(j * drive.Omega - 2 * mode.omega_tilde)
        budget = tol if tol is not None else mode.epsilon * mode.omega_tilde / 10
        on_resonance = mismatch < budget
    if not on_resonance:
        print(f"warning: drive is off resonance for mode {target} "
              f"(no harmonic within tolerance); expect flat photon numbers",
              file=sys.stderr)

    eps_ref = mode.epsilon if mode.epsilon > 0 else 1.0
    prefix = cfg["output"]["prefix"]

    record_msa = None
    record_direct = None
    traj = None
    if evo["method"] in ("msa", "both"):
        tau_grid = np.linspace(0.0, evo["tau_end"], evo["n_points"])
        table = coupling_coeffs(spectrum)
        state = msa_general(spectrum, table, drive, tau_grid, tol=tol,
                            eps_ref=eps_ref)
        record_msa = photon_number(state)
        if on_resonance:
            from dataclasses import replace
            gamma = mode.k0**2 * float(drive.f_j[j - 1]) / (j * drive.Omega)
            record_msa = replace(
                record_msa, target=mode.index,
                sinh2=np.sinh(np.minimum(gamma * state.tau, 350.0)) ** 2)
    if evo["method"] in ("direct", "both"):
        t_end = evo["tau_end"] / eps_ref
        if t_end <= 0:
            t_end = 1e-9
        om_max = float(np.max(spectrum.omega_tildes()))
        dt = 2 * math.pi / (evo["dt_factor"] * om_max)
        n_steps = max(1, int(math.ceil(t_end / dt)))
        table = coupling_coeffs(spectrum)
        traj = integrate_full(
            spectrum, table, drive, t_end, dt=dt,
            seeds=_seed_list(cfg, target),
            record_every=max(1, n_steps // max(evo["n_points"], 2)))
        record_direct = photon_number(extract_slow(traj, eps_ref=eps_ref))
        traj.to_csv(outdir / f"{prefix}_trajectory.csv")

    if evo["method"] == "msa":
        record = record_msa
    elif evo["method"] == "direct":
        record = record_direct
    else:
        # align the slow flow on the direct grid and attach the comparison
        from dataclasses import replace
        table = coupling_coeffs(spectrum)
        tau_grid = eps_ref * traj.t
        state = msa_general(spectrum, table, drive, tau_grid, tol=tol,
                            eps_ref=eps_ref)
        record = photon_number(state)
        i = spectrum.position(target)
        n_dir = record_direct.N[:, i]
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(record.N[:, i] - n_dir) / n_dir
        record = replace(record, target=mode.index, rel_diff=rel)
        if on_resonance:
            gamma = mode.k0**2 * float(drive.f_j[j - 1]) / (j * drive.Omega)
            record = replace(
                record,
                sinh2=np.sinh(np.minimum(gamma * state.tau, 350.0)) ** 2)

    record.to_csv(outdir / f"{prefix}_photons.csv")
    _emit_effective_config(cfg, outdir, prefix)
    return 0


# ------------------------------------------------------------------ sweeps --

def _set_by_path(cfg, dotted, value):
    section, key = dotted.split(".")
    cfg[section][key] = value


def _sweep_values(sweep):
    if "values" in sweep:
        return [float(v) for v in sweep["values"]]
    if sweep.get("scale", "linear") == "log":
        return list(np.geomspace(sweep["start"], sweep["stop"], sweep["num"]))
    return list(np.linspace(sweep["start"], sweep["stop"], sweep["num"]))


def _sweep_point(args):
    index, cfg = args
    evo = cfg["evolution"]
    target = tuple(evo["target_mode"])
    try:
        _, drive, spectrum = build_problem(cfg)
        mode = spectrum.psi_mode(target)
        j = _select_harmonic(cfg, drive, spectrum, target)
        if j is None:
            raise ResonanceConditionError("drive carries no harmonics")
        gamma = mode.k0**2 * float(drive.f_j[j - 1]) / (j * drive.Omega)
        # the summary is the fitted rate: run each point deep into its own
        # exponential regime instead of using the reporting grid
        tau_end = 5.0 / gamma if gamma > 0 else evo["tau_end"]
        tau_grid = np.linspace(0.0, tau_end, evo["n_points"])
        _, record = msa_parametric(spectrum, drive, target, j, tau_grid,
                                   tol=evo["tolerance"])
        return (index, {
            "value": None,  # filled by the collector
            "harmonic": j,
            "epsilon": mode.epsilon,
            "fitted_rate_per_s": record.fitted_rate[0] * C_LIGHT,
            "r_cond_per_s": record.r_cond[0] * C_LIGHT,
            "max_N": float(record.N.max()),
            "status": "ok",
            "error": "",
        })
    except Exception as exc:  # recorded per point, judged by the caller
        return (index, {
            "value": None,
            "harmonic": "",
            "epsilon": "",
            "fitted_rate_per_s": "",
            "r_cond_per_s": "",
            "max_N": "",
            "status": "error",
            "error": f"{type(exc).__name__}: {exc}",
        })


def cmd_sweep(cfg, outdir, workers=1):
    sweep = cfg["sweep"]
    if sweep is None:
        raise ConfigError("config error at sweep: missing sweep block")
    values = _sweep_values(sweep)
    points = []
    for i, value in enumerate(values):
        point_cfg = copy.deepcopy(cfg)
        point_cfg["sweep"] = None
        _set_by_path(point_cfg, sweep["parameter"], value)
        try:
            point_cfg = validate_config(point_cfg)
        except ConfigError as exc:
            points.append((i, None, str(exc)))
            continue
        points.append((i, point_cfg, None))

    results = {}
    jobs = [(i, pc) for i, pc, err in points if pc is not None]
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for index, row in pool.map(_sweep_point, jobs):
                results[index] = row
    else:
        for job in jobs:
            index, row = _sweep_point(job)
            results[index] = row
    for i, pc, err in points:
        if pc is None:
            results[i] = {"value": None, "harmonic": "", "epsilon": "",
                          "fitted_rate_per_s": "", "r_cond_per_s": "",
                          "max_N": "", "status": "error", "error": err}

    header = [sweep["parameter"], "harmonic", "epsilon", "fitted_rate_per_s",
              "r_cond_per_s", "max_N", "status", "error"]
    rows = []
    n_ok = 0
    for i, value in enumerate(values):
        row = results[i]
        n_ok += row["status"] == "ok"
        rows.append([float(value), row["harmonic"], row["epsilon"],
                     row["fitted_rate_per_s"], row["r_cond_per_s"],
                     row["max_N"], row["status"],
                     row["error"].replace(",", ";")])
    path = outdir / f"{cfg['output']['prefix']}_sweep.csv"
    _write_csv(path, header, rows)
    _emit_effective_config(cfg, outdir, cfg["output"]["prefix"])
    return 0 if n_ok >= 0.9 * len(values) else 3


# -------------------------------------------------------------------- main --

def _parser():
    parser = argparse.ArgumentParser(
        prog="condcav",
        description="Photon creation in a cavity with a laser-modulated "
                    "conducting film",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "resonances", "evolve", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="run configuration JSON "
                       "(defaults to the built-in reference run)")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--workers", type=int, default=1,
                       help="sweep worker processes (env %s overrides)"
                       % WORKERS_ENV)
        p.add_argument("--seed-mode", default=None,
                       help='"mx,my,mz", "target" or "all"')
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed_mode is not None:
            if args.seed_mode in ("target", "all"):
                cfg["evolution"]["seed_mode"] = args.seed_mode
            else:
                try:
                    triple = [int(x) for x in args.seed_mode.split(",")]
                except ValueError:
                    raise ConfigError("config error at evolution.seed_mode: "
                                      "expected mx,my,mz")
                cfg["evolution"]["seed_mode"] = triple
            cfg = validate_config(cfg)
        outdir = _outdir(cfg, args.out)
        workers = args.workers
        if os.environ.get(WORKERS_ENV):
            try:
                workers = int(os.environ[WORKERS_ENV])
            except ValueError:
                raise ConfigError(f"config error at <env {WORKERS_ENV}>: "
                                  "expected an integer")
        if args.command == "spectrum":
            return cmd_spectrum(cfg, outdir)
        if args.command == "resonances":
            return cmd_resonances(cfg, outdir)
        if args.command == "evolve":
            return cmd_evolve(cfg, outdir)
        return cmd_sweep(cfg, outdir, workers=max(1, workers))
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (ConvergenceError, QuadratureError, StepSizeError,
            ResonanceConditionError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
