"""Command-line entry point (``raman-control``).

Commands: ``propagate``, ``optimize``, ``scenario``, ``analyze`` and
``replay``.  Every command writes a run directory holding ``config.toml``
(a snapshot from which ``replay`` reruns the command) and ``report.toml``.

Exit codes: 0 success, 2 configuration error, 3 numerical abort,
4 unknown command or scenario.  Errors are printed as a single line
``error: <kind>: <key>: <message>`` on stderr.
"""
import argparse
from datetime import datetime
import inspect
import os
from pathlib import Path
import sys

import numpy as np
import tomli

from . import scenarios
from .config import (RunConfig, format_quantity, parse_quantities, resolve_grid, resolve_initial_state,
                     resolve_krotov, resolve_model, resolve_pulse, resolve_pulse_spec, resolve_target)
from .errors import ConfigError, NumericalAbort
from .krotov import LOG_HEADER, OptimizationAborted, optimize, phase_error
from .model import neon_preset
from .propagator import propagate_forward, save_trajectory
from .pulses import (extract_cep, load_pulse, save_pulse, save_spectrum, save_wigner, spectrum,
                     window, wigner_distribution)
from .scenarios import SCENARIOS, ScenarioReport, write_report

OUT_ENV = "RAMAN_CONTROL_RUNS"
EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_UNKNOWN = 0, 2, 3, 4


class UnknownName(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        if "invalid choice" in message:
            print(f"error: unknown: {message}", file=sys.stderr)
            sys.exit(EXIT_UNKNOWN)
        print(f"error: usage: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML run configuration")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help=f"run directory (default: a new directory under ${OUT_ENV} or ./runs)")
    common.add_argument("--set", dest="overrides", action="append", default=argparse.SUPPRESS,
                        metavar="KEY=VALUE", help="override a config entry (repeatable)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for sweep scenarios")

    p = _Parser(prog="raman-control", parents=[common],
                description="Pulse propagation and optimal control for core-excited Raman transitions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("propagate", parents=[common], help="propagate a pulse sequence")

    o = sub.add_parser("optimize", parents=[common], help="Krotov optimization of a guess pulse")
    o.add_argument("--iterations", type=int)
    o.add_argument("--target-phase", type=float, help="relative phase (rad) of a superposition target")

    s = sub.add_parser("scenario", parents=[common], help="run a scripted experiment")
    s.add_argument("name", help=f"one of: {', '.join(SCENARIOS)}")
    s.add_argument("--durations", type=_float_list, help="pulse durations, fs (comma-separated)")
    s.add_argument("--energies", type=_float_list, help="pulse energies, uJ (comma-separated)")
    s.add_argument("--phases", type=_float_list, help="target phases, rad (comma-separated)")

    a = sub.add_parser("analyze", parents=[common], help="analyze a pulse file")
    a.add_argument("pulse_file")
    a.add_argument("mode", choices=["cep", "wigner", "spectrum"])
    a.add_argument("--window", type=_float_list, metavar="T0,T1", help="restrict to [T0, T1] fs first")
    a.add_argument("--smoothing", type=_float_list, metavar="DT,DE",
                   help="Wigner smoothing widths (fs, eV); default 0.25,0.5")
    a.add_argument("--energy-range", type=_float_list, metavar="E0,E1", help="Wigner energy window, eV")

    r = sub.add_parser("replay", parents=[common], help="rerun a run directory and compare its report")
    r.add_argument("run_dir")
    return p


# run directories ---------------------------------------------------------------

def _run_dir(args, label):
    if getattr(args, "out", None):
        out = Path(args.out)
    else:
        root = Path(os.environ.get(OUT_ENV, "runs"))
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        out = root / f"{label}-{stamp}"
        n = 1
        while out.exists():
            out = root / f"{label}-{stamp}-{n}"
            n += 1
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args):
    path = getattr(args, "config", None)
    cfg = RunConfig.load(path) if path else RunConfig.empty()
    return cfg.override(getattr(args, "overrides", None))


def _set(cfg, key, value):
    node = cfg.doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def _threads(args, cfg):
    n = getattr(args, "threads", None)
    return n if n is not None else int(cfg.get("run.threads", 1))


# commands ------------------------------------------------------------------------

def _pop_scalars(traj):
    sc = {f"final_{g}": traj.final(g) for g in ("ground", "hole_2s", "hole_2p_m0", "hole_2p_m1", "continuum")}
    sc["final_target"] = traj.final("target")
    sc["final_norm"] = float(traj.norm[-1])
    if "intermediate" in traj.populations:
        sc["max_intermediate"], sc["t_max_intermediate"] = traj.max_of("intermediate")
    return sc


def _track(model):
    try:
        return {"intermediate": scenarios.levels(model).intermediate}
    except ValueError:
        return None


def cmd_propagate(cfg, out):
    model = resolve_model(cfg) or neon_preset("experimental")
    grid = resolve_grid(cfg)
    pulse = resolve_pulse(cfg, grid)
    psi0 = resolve_initial_state(cfg, model)
    traj = propagate_forward(model, pulse, psi0, track=_track(model))
    save_pulse(pulse, out / "pulse.tsv")
    save_trajectory(traj, out / "trajectory.tsv")
    report = ScenarioReport("propagate", {"model": model.name}, _pop_scalars(traj),
                            files={"pulse": "pulse.tsv", "trajectory": "trajectory.tsv"})
    write_report(report, out)
    return report


def cmd_optimize(cfg, out):
    model = resolve_model(cfg) or neon_preset("experimental")
    grid = resolve_grid(cfg)
    guess = resolve_pulse(cfg, grid)
    psi0 = resolve_initial_state(cfg, model)
    target = resolve_target(cfg, model)
    kcfg = resolve_krotov(cfg, grid)
    save_pulse(guess, out / "guess.pulse.tsv")
    log = open(out / "iterations.log", "w")
    log.write(LOG_HEADER + "\n")

    def record(rec):
        log.write(rec.log_line() + "\n")
        log.flush()

    try:
        res = optimize(model, guess, psi0, target, kcfg, callback=record)
    except OptimizationAborted as exc:
        save_pulse(exc.result.final_pulse, out / "best.pulse.tsv")
        raise
    finally:
        log.close()
    save_pulse(res.final_pulse, out / "optimized.pulse.tsv")
    traj = propagate_forward(model, res.final_pulse, psi0, track=_track(model))
    save_trajectory(traj, out / "trajectory.tsv")
    sc = _pop_scalars(traj)
    sc.update({"j_initial": res.j_initial, "j_final": res.j_history[-1] if res.j_history else res.j_initial,
               "fidelity": res.final_fidelity, "iterations": res.iterations,
               "all_monotonic": bool(all(res.monotonic)), "peak_field_au": res.final_pulse.peak_field()})
    if target.kind == "superposition":
        omega = cfg.quantity("target.omega")
        t_origin = cfg.quantity("target.t_origin")
        rotate = omega is not None and t_origin is not None
        sc["phase_error"] = phase_error(res.final_state, target, model, omega if rotate else None,
                                        t_origin if rotate else None, grid.t_end if rotate else None)
    report = ScenarioReport("optimize", {"model": model.name, "target": target.kind}, sc,
                            files={"guess": "guess.pulse.tsv", "optimized": "optimized.pulse.tsv",
                                   "trajectory": "trajectory.tsv", "log": "iterations.log"})
    write_report(report, out)
    return report


def _scenario_kwargs(cfg, fn, threads):
    params = inspect.signature(fn).parameters
    kwargs = {}
    for key, value in cfg.section("scenario").items():
        name = "lambda_" if key == "lambda" else key
        if name not in params or name in ("model", "out", "cfg", "grid", "pump", "stokes"):
            raise ConfigError(f"not a parameter of this scenario; accepted: "
                              f"{', '.join(k for k in params if k not in ('model', 'out', 'cfg'))}",
                              key=f"scenario.{key}")
        kwargs[name] = parse_quantities(value, f"scenario.{key}")
    if "model" in params and "model" in cfg.doc:
        kwargs["model"] = resolve_model(cfg)
    if "grid" in params and "grid" in cfg.doc:
        kwargs["grid"] = resolve_grid(cfg)
    for name in ("pump", "stokes"):
        if name in params and name in cfg.doc:
            kwargs[name] = resolve_pulse_spec(cfg, name)
    if "workers" in params:
        kwargs["workers"] = threads
    return kwargs


def cmd_scenario(cfg, out, threads):
    name = cfg.get("run.scenario")
    if name not in SCENARIOS:
        raise UnknownName(f"unknown scenario {name!r}; available: {', '.join(SCENARIOS)}")
    fn = SCENARIOS[name]
    return fn(out=out, **_scenario_kwargs(cfg, fn, threads))


def cmd_analyze(cfg, out):
    path = cfg.get("analyze.file")
    mode = cfg.get("analyze.mode")
    pulse = load_pulse(path)
    win = cfg.get("analyze.window")
    if win:
        if len(win) != 2:
            raise ConfigError("expected T0,T1", key="analyze.window")
        pulse = window(pulse, win[0], win[1])
    sc = {}
    files = {}
    if mode == "cep":
        res = extract_cep(pulse)
        sc = {"cep": res.cep, "t_peak_fs": res.t_peak}
        print(f"cep = {res.cep:.6f} rad (envelope peak at {res.t_peak:.6f} fs)")
    elif mode == "wigner":
        smoothing = tuple(cfg.get("analyze.smoothing", [0.25, 0.5]))
        if len(smoothing) != 2:
            raise ConfigError("expected DT,DE", key="analyze.smoothing")
        erange = cfg.get("analyze.energy_range")
        w = wigner_distribution(pulse, freq_window=tuple(erange) if erange else None, smoothing=smoothing)
        save_wigner(w, out / "wigner.tsv")
        files["wigner"] = "wigner.tsv"
        sc = {"n_times": len(w.times), "n_energies": len(w.energies)}
    elif mode == "spectrum":
        s = spectrum(pulse)
        save_spectrum(s, out / "spectrum.tsv")
        files["spectrum"] = "spectrum.tsv"
        sc = {"peak_energy_eV": float(s.energies[np.argmax(s.amplitude)])}
    else:
        raise UnknownName(f"unknown analysis mode {mode!r}; available: cep, wigner, spectrum")
    report = ScenarioReport(f"analyze-{mode}", {"file": str(path)}, sc, files=files)
    write_report(report, out)
    return report


def execute(cfg, out, threads=1):
    """Run the command recorded in ``cfg`` into ``out`` (snapshot included)."""
    cfg.save(out / "config.toml")
    command = cfg.get("run.command")
    if command == "propagate":
        return cmd_propagate(cfg, out)
    if command == "optimize":
        return cmd_optimize(cfg, out)
    if command == "scenario":
        return cmd_scenario(cfg, out, threads)
    if command == "analyze":
        return cmd_analyze(cfg, out)
    raise UnknownName(f"unknown command {command!r}")


def _report_scalars(path):
    with open(path, "rb") as fh:
        doc = tomli.load(fh)

    def flat(d, prefix=""):
        out = {f"{prefix}{k}": v for k, v in d.get("scalars", {}).items()}
        for i, p in enumerate(d.get("points", [])):
            out.update(flat(p, f"{prefix}points[{i}]."))
        return out

    return flat(doc)


def replay(run_dir, out, threads=1):
    """Rerun ``run_dir``'s snapshot into ``out``; returns the differing scalars."""
    run_dir = Path(run_dir)
    if not (run_dir / "config.toml").exists():
        raise ConfigError(f"no config.toml in {run_dir}", key="run_dir")
    cfg = RunConfig.load(run_dir / "config.toml")
    execute(cfg, out, threads)
    old = _report_scalars(run_dir / "report.toml")
    new = _report_scalars(out / "report.toml")
    keys = sorted(set(old) | set(new))
    return {k: (old.get(k), new.get(k)) for k in keys if old.get(k) != new.get(k)}


def _prepare(args):
    """Fold command-line flags into the config so the snapshot is complete."""
    if args.command == "replay":
        return None
    cfg = _load_config(args)
    _set(cfg, "run.command", args.command)
    if args.command == "optimize":
        if args.iterations is not None:
            _set(cfg, "krotov.iterations", args.iterations)
        if args.target_phase is not None:
            _set(cfg, "target.kind", "superposition")
            _set(cfg, "target.phase", format_quantity(args.target_phase, "rad"))
    elif args.command == "scenario":
        _set(cfg, "run.scenario", args.name)
        for flag, unit in (("durations", "fs"), ("energies", "uJ"), ("phases", "rad")):
            vals = getattr(args, flag)
            if vals is not None:
                _set(cfg, f"scenario.{flag}", [format_quantity(v, unit) for v in vals])
    elif args.command == "analyze":
        _set(cfg, "analyze.file", str(Path(args.pulse_file).resolve()))
        _set(cfg, "analyze.mode", args.mode)
        for flag in ("window", "smoothing", "energy_range"):
            if getattr(args, flag) is not None:
                _set(cfg, f"analyze.{flag}", getattr(args, flag))
    return cfg


def _label(args):
    if args.command == "scenario":
        return f"scenario-{args.name}"
    if args.command == "analyze":
        return f"analyze-{args.mode}"
    return args.command


def _fail(kind, key, message, code):
    print(f"error: {kind}: {key}: {message}", file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scenario" and args.name not in SCENARIOS:
            raise UnknownName(f"unknown scenario {args.name!r}; available: {', '.join(SCENARIOS)}")
        if args.command == "replay":
            out = _run_dir(args, "replay")
            diffs = replay(args.run_dir, out, getattr(args, "threads", 1) or 1)
            if diffs:
                for k, (a, b) in diffs.items():
                    print(f"differs: {k}: {a!r} -> {b!r}")
                return 1
            print(f"identical: {out}")
            return EXIT_OK
        cfg = _prepare(args)
        threads = _threads(args, cfg)
        out = _run_dir(args, _label(args))
        report = execute(cfg, out, threads)
        for k, v in report.scalars.items():
            print(f"{k} = {v!r}")
        print(f"run directory: {out}")
        return EXIT_OK
    except UnknownName as exc:
        return _fail("unknown", args.command, str(exc), EXIT_UNKNOWN)
    except ConfigError as exc:
        key = exc.key or "config"
        msg = str(exc)
        if msg.startswith(f"{key}: "):
            msg = msg[len(key) + 2:]
        return _fail("config", key, msg.replace("\n", " "), EXIT_CONFIG)
    except NumericalAbort as exc:
        return _fail("numerical", args.command, str(exc).replace("\n", " "), EXIT_ABORT)


if __name__ == "__main__":
    sys.exit(main())
