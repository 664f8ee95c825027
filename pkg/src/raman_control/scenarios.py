"""Scripted experiments on the reduced neon model.

Each ``run_*`` function is deterministic, returns a :class:`ScenarioReport`
and, when ``out`` is given, writes its pulses, trajectories and a
``report.toml`` into that directory.  Sweeps evaluate their points on a
thread pool (the compiled kernels release the GIL) and merge results in
input order.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import correlate
import tomli_w

from .krotov import (KrotovConfig, OptimizationAborted, TargetSpec, achieved_phase, flattop_shape,
                     optimize, phase_error, LOG_HEADER)
from .model import Group, neon_preset
from .propagator import populations, propagate_forward, save_trajectory
from .pulses import (GaussianPulseSpec, TimeGrid, bandpass, carrier_phase, envelope, extract_cep,
                     sample_gaussian, save_pulse, superpose, window)
from .units import (AU_TIME_FS, HBAR_EV_FS, field_amplitude_to_intensity, intensity_from_pulse_energy,
                    intensity_to_field_amplitude, pulse_energy)

DT_FS = 0.0012
SPOT_UM = 10.0
POPULATION_KEYS = {
    "final_target", "final_ground", "max_intermediate", "ground_depopulation", "naive_target",
    "transfer", "best_transfer", "best_target", "target_at_intermediate_peak", "target_at_pump_peak",
    "peak_intermediate", "final_norm",
}


@dataclass
class ScenarioReport:
    name: str
    inputs: dict
    scalars: dict
    files: dict = field(default_factory=dict)
    points: list = field(default_factory=list)

    def __post_init__(self):
        for k, v in self.scalars.items():
            if k in POPULATION_KEYS and not -1e-12 <= v <= 1.0 + 1e-9:
                raise ValueError(f"population {k}={v} outside [0, 1]")

    def to_doc(self):
        doc = {"name": self.name, "inputs": _plain(self.inputs), "scalars": _plain(self.scalars)}
        if self.files:
            doc["files"] = dict(self.files)
        if self.points:
            doc["points"] = [p.to_doc() for p in self.points]
        return doc

    def all_scalars(self):
        """Flat mapping of every scalar, including those of sweep points."""
        out = {k: v for k, v in self.scalars.items()}
        for i, p in enumerate(self.points):
            out.update({f"points[{i}].{k}": v for k, v in p.all_scalars().items()})
        return out


def _plain(obj):
    """TOML-safe copy: drops None, converts numpy scalars and arrays."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, GaussianPulseSpec):
        return _plain(obj.__dict__)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    return obj


def write_report(report, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.toml", "wb") as fh:
        tomli_w.dump(report.to_doc(), fh)
    return out / "report.toml"


class _Artifacts:
    def __init__(self, out):
        self.out = Path(out) if out is not None else None
        self.files = {}
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def pulse(self, name, p):
        if self.out is not None:
            save_pulse(p, self.out / f"{name}.pulse.tsv")
            self.files[f"pulse.{name}"] = f"{name}.pulse.tsv"

    def trajectory(self, name, traj):
        if self.out is not None:
            save_trajectory(traj, self.out / f"{name}.traj.tsv")
            self.files[f"trajectory.{name}"] = f"{name}.traj.tsv"

    def table(self, name, header, rows):
        if self.out is not None:
            with open(self.out / f"{name}.tsv", "w") as fh:
                fh.write("# " + "\t".join(header) + "\n")
                for r in rows:
                    fh.write("\t".join(repr(float(x)) for x in r) + "\n")
            self.files[f"table.{name}"] = f"{name}.tsv"

    def text(self, name, text):
        if self.out is not None:
            (self.out / name).write_text(text)
            self.files[name.split(".")[0]] = name

    def finish(self, report):
        report.files.update(self.files)
        if self.out is not None:
            write_report(report, self.out)
        return report


def _pmap(fn, items, workers):
    items = list(items)
    if not workers or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# level scheme ----------------------------------------------------------------

@dataclass(frozen=True)
class Levels:
    ground: str
    intermediate: str
    target: str
    e_intermediate: float  # eV
    e_target: float  # eV

    @property
    def pump_carrier(self):
        return self.e_intermediate

    @property
    def stokes_carrier(self):
        return self.e_intermediate - self.e_target


def levels(model):
    """Ground, lowest 2s-hole resonance and Raman target of a model."""
    gi = model.group_indices()
    if not len(gi[Group.GROUND]) or not len(gi[Group.HOLE_2S]) or model.target_label is None:
        raise ValueError("model needs a ground state, a 2s-hole state and a target label")
    e = model.energies
    hole = gi[Group.HOLE_2S]
    inter = int(hole[np.argmin(e[hole])])
    return Levels(model.labels[gi[Group.GROUND][0]], model.labels[inter], model.target_label,
                  float(e[inter]), float(e[model.target_index]))


def _model(model, variant):
    return neon_preset(variant) if model is None else model


def _coupling(model, a, b):
    return float(model.dipole[model.index(a), model.index(b)])


def _state_scalars(traj):
    imax, tmax = traj.max_of("intermediate")
    return {
        "final_target": traj.final("target"),
        "final_ground": traj.final("ground"),
        "ground_depopulation": 1.0 - traj.final("ground"),
        "max_intermediate": imax,
        "t_max_intermediate": tmax,
        "final_norm": float(traj.norm[-1]),
    }


def _run(model, pulse, lv, psi0=None):
    psi0 = model.ground_state() if psi0 is None else psi0
    return propagate_forward(model, pulse, psi0, track={"intermediate": lv.intermediate})


def _pair(lv, intensity, fwhm, grid, center=0.0):
    return superpose([
        sample_gaussian(GaussianPulseSpec.from_intensity(intensity, lv.pump_carrier, center, fwhm), grid),
        sample_gaussian(GaussianPulseSpec.from_intensity(intensity, lv.stokes_carrier, center, fwhm), grid),
    ])


# naive and optimized sequences ----------------------------------------------

def run_naive(model=None, intensity=3.5e12, fwhm=2.0, grid=None, out=None):
    """Simultaneous transform-limited pump and Stokes pulses."""
    model = _model(model, "tdcis")
    lv = levels(model)
    grid = grid or TimeGrid.from_span(-4.0 * fwhm, 4.0 * fwhm, DT_FS)
    pulse = _pair(lv, intensity, fwhm, grid)
    traj = _run(model, pulse, lv)
    art = _Artifacts(out)
    art.pulse("naive", pulse)
    art.trajectory("naive", traj)
    inputs = {"model": model.name, "intensity_Wcm2": intensity, "fwhm_fs": fwhm,
              "pump_carrier_eV": lv.pump_carrier, "stokes_carrier_eV": lv.stokes_carrier,
              "grid": _grid_doc(grid)}
    return art.finish(ScenarioReport("naive", inputs, _state_scalars(traj)))


def _grid_doc(grid):
    return {"t_start_fs": grid.t_start, "dt_fs": grid.dt, "n_points": grid.n_points}


def color_timing(pulse, lv):
    """Envelope peak times and centroids of the pump and Stokes bands.

    Each band extends half the carrier separation either side of its
    carrier.  ``stokes_delay_fs`` is the shift maximizing the
    cross-correlation of the two envelopes; positive means the Stokes
    envelope comes later.
    """
    half = 0.5 * (lv.pump_carrier - lv.stokes_carrier)
    ep = envelope(bandpass(pulse, lv.pump_carrier - half, lv.pump_carrier + half))
    es = envelope(bandpass(pulse, max(lv.stokes_carrier - half, 0.0), lv.stokes_carrier + half))
    t = pulse.times
    xc = correlate(es, ep, mode="full", method="fft")
    lag = (int(np.argmax(xc)) - (len(ep) - 1)) * pulse.grid.dt
    return {"pump_peak_time": float(t[np.argmax(ep)]), "stokes_peak_time": float(t[np.argmax(es)]),
            "pump_centroid_time": float(np.sum(t * ep**2) / np.sum(ep**2)),
            "stokes_centroid_time": float(np.sum(t * es**2) / np.sum(es**2)),
            "stokes_delay_fs": float(lag)}


def run_optimized(cfg=None, model=None, iterations=30, lambda_=1e-3, intensity=3.5e12, fwhm=2.0,
                  t_rise=3.0, grid=None, out=None, callback=None):
    """Krotov optimization of the naive sequence towards the pure Raman target."""
    model = _model(model, "tdcis")
    lv = levels(model)
    grid = grid or TimeGrid.from_span(-10.0, 15.0, DT_FS)
    if cfg is None:
        cfg = KrotovConfig(lambda_=lambda_, max_iterations=iterations)
    if cfg.shape is None:
        cfg = KrotovConfig(**{**cfg.__dict__, "shape": flattop_shape(grid, t_rise)})
    naive = run_naive(model, intensity, fwhm, grid)
    guess = _pair(lv, intensity, fwhm, grid)
    art = _Artifacts(out)
    art.pulse("guess", guess)
    log = [LOG_HEADER]

    def record(rec):
        log.append(rec.log_line())
        if callback:
            callback(rec)

    try:
        res = optimize(model, guess, model.ground_state(), TargetSpec.pure(lv.target), cfg, callback=record)
    except OptimizationAborted as exc:
        art.pulse("best", exc.result.final_pulse)
        art.text("iterations.log", "\n".join(log) + "\n")
        raise
    art.text("iterations.log", "\n".join(log) + "\n")
    pulse = res.final_pulse
    traj = _run(model, pulse, lv)
    art.pulse("optimized", pulse)
    art.trajectory("optimized", traj)
    scalars = _state_scalars(traj)
    peak = pulse.peak_field()
    scalars.update({
        "naive_target": naive.scalars["final_target"],
        "improvement": scalars["final_target"] / max(naive.scalars["final_target"], 1e-300),
        "peak_field_au": peak,
        "peak_intensity_Wcm2": field_amplitude_to_intensity(peak),
        "amplitude_ratio": peak / guess.peak_field(),
        "iterations": res.iterations,
        "j_initial": res.j_initial,
        "j_final": res.j_history[-1] if res.j_history else res.j_initial,
        "all_monotonic": bool(all(res.monotonic)),
    })
    scalars.update(color_timing(pulse, lv))
    inputs = {"model": model.name, "intensity_Wcm2": intensity, "fwhm_fs": fwhm, "t_rise_fs": t_rise,
              "lambda": cfg.lambda_, "iterations": cfg.max_iterations, "update_form": cfg.update_form,
              "grid": _grid_doc(grid)}
    return art.finish(ScenarioReport("optimized", inputs, scalars))


# superposition targets and CEP ------------------------------------------------

@dataclass(frozen=True)
class PhaseSweepSetup:
    model: object
    levels: Levels
    grid: TimeGrid
    stokes: object  # fixed Stokes pulse
    pump_nominal: GaussianPulseSpec
    split: float  # fs; end of the pump window
    theta_ref: float  # achieved phase of the CEP-0 reference at t_f
    omega_target: float  # eV
    t_origin: float  # fs

    def guess(self, fraction):
        return superpose([sample_gaussian(self.pump_nominal.scaled(fraction), self.grid), self.stokes])


def phase_sweep_setup(model=None, pump_fwhm=10.0, pump_energy=7.1, stokes_fwhm=0.5, stokes_energy=0.71,
                      stokes_center=12.0, spot=SPOT_UM):
    """Fixed Stokes pulse, nominal pump and the phase gauge.

    ``t_origin`` is chosen so the nominal pump with CEP 0 followed by the
    Stokes pulse produces relative phase 0 after back-rotation.
    """
    model = _model(model, "experimental")
    lv = levels(model)
    grid = TimeGrid.from_span(-2.5 * pump_fwhm, stokes_center + 8.0, DT_FS)
    pump = GaussianPulseSpec.from_intensity(intensity_from_pulse_energy(pump_energy, pump_fwhm, spot),
                                            lv.pump_carrier, 0.0, pump_fwhm)
    stokes = sample_gaussian(GaussianPulseSpec.from_intensity(
        intensity_from_pulse_energy(stokes_energy, stokes_fwhm, spot), lv.stokes_carrier, stokes_center,
        stokes_fwhm), grid)
    ref = propagate_forward(model, superpose([sample_gaussian(pump, grid), stokes]), model.ground_state(),
                            stride=grid.n_points).final_state
    theta = achieved_phase(ref, TargetSpec.superposition(0.0, lv.target, lv.ground), model)
    omega = lv.e_target
    t_origin = grid.t_end - theta / (omega / HBAR_EV_FS)
    return PhaseSweepSetup(model, lv, grid, stokes, pump, stokes_center - 3.0 * stokes_fwhm, theta, omega,
                           t_origin)


def run_phase_point(setup, phase, iterations=20, lambda_=0.05, guess_fraction=0.1, t_rise=3.0):
    """Optimize towards ``a e^{i phase}|target> + b|ground>`` with only the pump free."""
    lv, grid = setup.levels, setup.grid
    shape = flattop_shape(grid, t_rise, t_on=grid.t_start, t_off=setup.split)
    cfg = KrotovConfig(lambda_=lambda_, max_iterations=iterations, shape=shape)
    # the optimizer's target carries the phase the gauge maps to `phase`
    tgt = TargetSpec.superposition(phase + setup.theta_ref, lv.target, lv.ground)
    res = optimize(setup.model, setup.guess(guess_fraction), setup.model.ground_state(), tgt, cfg)
    st = res.final_state
    err = phase_error(st, TargetSpec.superposition(phase, lv.target, lv.ground), setup.model,
                      setup.omega_target, setup.t_origin, grid.t_end)
    pump = window(res.final_pulse, None, setup.split)
    pops = populations(st, setup.model)
    scalars = {
        "target_phase": float(phase),
        "pump_cep": carrier_phase(pump, lv.pump_carrier, setup.pump_nominal.center),
        "pump_cep_envelope_peak": extract_cep(pump).cep,
        "phase_error": float(err),
        "final_target": pops["target"],
        "final_ground": pops["ground"],
        "j_final": res.j_history[-1] if res.j_history else res.j_initial,
        "all_monotonic": bool(all(res.monotonic)),
    }
    return res, scalars


def cep_slope(target_phases, ceps):
    """Least-squares slope of the unwrapped pump CEP against the target phase."""
    x = np.asarray(target_phases, dtype=float)
    order = np.argsort(x)
    y = np.unwrap(np.asarray(ceps, dtype=float)[order])
    slope, intercept = np.polyfit(x[order], y, 1)
    return float(slope), float(intercept)


def run_phase_sweep(phases=None, model=None, iterations=20, lambda_=0.05, stokes_center=12.0,
                    guess_fraction=0.1, workers=1, out=None):
    """Superposition targets over a grid of relative phases; extracts the pump CEP."""
    if phases is None:
        phases = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    phases = [float(p) for p in phases]
    setup = phase_sweep_setup(model, stokes_center=stokes_center)
    results = _pmap(lambda ph: run_phase_point(setup, ph, iterations, lambda_, guess_fraction), phases, workers)
    art = _Artifacts(out)
    points = []
    for i, (res, sc) in enumerate(results):
        art.pulse(f"phase{i}", res.final_pulse)
        points.append(ScenarioReport(f"phase-sweep[{i}]", {"target_phase": sc["target_phase"]}, sc))
    slope, intercept = cep_slope(phases, [p.scalars["pump_cep"] for p in points])
    errs = [abs(p.scalars["phase_error"]) for p in points]
    art.table("phase_sweep", ["target_phase", "pump_cep", "phase_error", "final_target", "final_ground"],
              [[p.scalars[k] for k in ("target_phase", "pump_cep", "phase_error", "final_target", "final_ground")]
               for p in points])
    scalars = {"slope": slope, "intercept": intercept, "max_abs_phase_error": max(errs),
               "theta_ref": setup.theta_ref, "t_origin_fs": setup.t_origin, "omega_target_eV": setup.omega_target}
    inputs = {"model": setup.model.name, "phases": phases, "iterations": iterations, "lambda": lambda_,
              "stokes_center_fs": stokes_center, "guess_fraction": guess_fraction, "grid": _grid_doc(setup.grid)}
    return art.finish(ScenarioReport("phase-sweep", inputs, scalars, points=points))


# pump-only dynamics ------------------------------------------------------------

def run_pump_point(model, duration, energy, spot=SPOT_UM, post=60.0):
    lv = levels(model)
    intensity = intensity_from_pulse_energy(energy, duration, spot)
    grid = TimeGrid.from_span(-1.5 * duration - 5.0, 1.5 * duration + post, DT_FS)
    pulse = sample_gaussian(GaussianPulseSpec.from_intensity(intensity, lv.pump_carrier, 0.0, duration), grid)
    traj = _run(model, pulse, lv)
    peak, t_peak = traj.max_of("intermediate")
    scalars = {"duration_fs": duration, "energy_uJ": energy, "intensity_Wcm2": intensity,
               "peak_intermediate": peak, "t_peak_fs": t_peak, "final_ground": traj.final("ground")}
    return traj, scalars


def run_pump_sweep(durations=(2.0, 10.0, 25.0, 50.0, 100.0, 200.0), energies=(0.71, 7.1, 71.0), model=None,
                   spot=SPOT_UM, workers=1, out=None):
    """Gaussian pump pulses from the ground state over a (duration, energy) grid."""
    model = _model(model, "experimental")
    combos = [(float(e), float(d)) for e in energies for d in durations]
    results = _pmap(lambda c: run_pump_point(model, c[1], c[0], spot), combos, workers)
    art = _Artifacts(out)
    points = []
    for i, (traj, sc) in enumerate(results):
        art.trajectory(f"pump_{sc['duration_fs']:g}fs_{sc['energy_uJ']:g}uJ", traj)
        points.append(ScenarioReport(f"pump-sweep[{i}]", {"duration_fs": sc["duration_fs"],
                                                          "energy_uJ": sc["energy_uJ"]}, sc))
    cols = ["duration_fs", "energy_uJ", "intensity_Wcm2", "peak_intermediate", "t_peak_fs", "final_ground"]
    art.table("pump_sweep", cols, [[p.scalars[c] for c in cols] for p in points])
    inputs = {"model": model.name, "durations_fs": [float(d) for d in durations],
              "energies_uJ": [float(e) for e in energies], "spot_um": spot}
    return art.finish(ScenarioReport("pump-sweep", inputs, {"n_points": len(points)}, points=points))


def sweep_table(report):
    """(duration, energy) -> (peak intermediate population, peak time)."""
    return {(p.scalars["duration_fs"], p.scalars["energy_uJ"]): (p.scalars["peak_intermediate"],
                                                                 p.scalars["t_peak_fs"]) for p in report.points}


# sequential pump / Stokes --------------------------------------------------------

def default_pump(model, fwhm=10.0, energy=7.1, center=0.0, spot=SPOT_UM):
    lv = levels(model)
    return GaussianPulseSpec.from_intensity(intensity_from_pulse_energy(energy, fwhm, spot), lv.pump_carrier,
                                            center, fwhm)


def default_stokes(model, fwhm=0.5, energy=0.71, center=18.7, spot=SPOT_UM):
    lv = levels(model)
    return GaussianPulseSpec.from_intensity(intensity_from_pulse_energy(energy, fwhm, spot), lv.stokes_carrier,
                                            center, fwhm)


def _span(specs, pad=20.0):
    t0 = min(s.center - 2.0 * s.fwhm for s in specs)
    t1 = max(s.center + 2.0 * s.fwhm for s in specs) + pad
    return TimeGrid.from_span(t0, t1, DT_FS)


def run_sequential(pump=None, stokes=None, model=None, grid=None, timing_study=True, out=None):
    """Pump followed by a Stokes pulse; optionally re-times the Stokes pulse.

    With ``timing_study`` the same Stokes pulse is also centred at the peak of
    the intermediate population of a pump-only run and at the pump peak.
    """
    model = _model(model, "experimental")
    lv = levels(model)
    pump = pump or default_pump(model)
    stokes = stokes or default_stokes(model)
    grid = grid or _span([pump, stokes])
    art = _Artifacts(out)
    pulse = superpose([sample_gaussian(pump, grid), sample_gaussian(stokes, grid)])
    traj = _run(model, pulse, lv)
    art.pulse("sequence", pulse)
    art.trajectory("sequence", traj)
    scalars = _state_scalars(traj)
    if timing_study:
        pump_only = _run(model, sample_gaussian(pump, grid), lv)
        art.trajectory("pump_only", pump_only)
        _, t_peak = pump_only.max_of("intermediate")
        for key, tc in (("intermediate_peak", t_peak), ("pump_peak", pump.center)):
            p = superpose([sample_gaussian(pump, grid), sample_gaussian(stokes.shifted(tc), grid)])
            scalars[f"target_at_{key}"] = _run(model, p, lv).final("target")
        scalars["t_intermediate_peak_pump_only"] = t_peak
    inputs = {"model": model.name, "pump": pump, "stokes": stokes, "grid": _grid_doc(grid),
              "pump_energy_uJ": pulse_energy(field_amplitude_to_intensity(pump.amplitude), pump.fwhm, SPOT_UM),
              "stokes_energy_uJ": pulse_energy(field_amplitude_to_intensity(stokes.amplitude), stokes.fwhm, SPOT_UM)}
    return art.finish(ScenarioReport("sequential", inputs, scalars))


def stokes_transfer(model, duration, decay=True, n_scan=25):
    """Best intermediate -> target transfer over Stokes amplitudes.

    A coarse scan brackets the first transfer maximum, which is then refined
    by golden-section search on the amplitude.
    """
    lv = levels(model)
    if not decay:
        model = model.without_bound_decay()
    psi0 = model.basis_vector(lv.intermediate)
    grid = TimeGrid.from_span(-2.0 * duration - 2.0, 2.0 * duration + 2.0, DT_FS)
    ti = model.target_index

    def transfer(e0):
        p = sample_gaussian(GaussianPulseSpec(float(e0), lv.stokes_carrier, 0.0, 0.0, duration), grid)
        tr = propagate_forward(model, p, psi0, stride=grid.n_points)
        return float(abs(tr.final_state[ti]) ** 2)

    # amplitude of a resonant pulse area pi
    z = abs(_coupling(model, lv.intermediate, lv.target))
    area_per_e0 = z * (duration / AU_TIME_FS) * math.sqrt(math.pi / (4.0 * math.log(2.0)))
    a_pi = math.pi / area_per_e0
    xs = np.linspace(0.0, 2.5 * a_pi, n_scan)
    ys = np.array([transfer(x) for x in xs])
    k = int(np.argmax(ys))
    if 0 < k < n_scan - 1:
        r = minimize_scalar(lambda x: -transfer(x), bracket=(xs[k - 1], xs[k], xs[k + 1]), method="golden",
                            tol=1e-5)
        best_x, best_y = (float(r.x), -float(r.fun)) if -r.fun >= ys[k] else (float(xs[k]), float(ys[k]))
    else:
        best_x, best_y = float(xs[k]), float(ys[k])
    return best_x, best_y, xs, ys


def run_stokes_transfer(durations=(0.5, 5.0, 30.0), decay=True, model=None, workers=1, out=None):
    """Stokes-only transfer from the intermediate resonance (pi-pulse search)."""
    model = _model(model, "experimental")
    durations = [float(d) for d in durations]
    results = _pmap(lambda d: stokes_transfer(model, d, decay), durations, workers)
    art = _Artifacts(out)
    points = []
    for d, (x, y, xs, ys) in zip(durations, results):
        art.table(f"stokes_scan_{d:g}fs", ["amplitude_au", "transfer"], zip(xs, ys))
        intensity = field_amplitude_to_intensity(x)
        sc = {"duration_fs": d, "best_transfer": y, "best_amplitude_au": x, "best_intensity_Wcm2": intensity,
              "best_energy_uJ": pulse_energy(intensity, d, SPOT_UM) if x > 0 else 0.0}
        points.append(ScenarioReport(f"stokes-transfer[{d:g}fs]", {"duration_fs": d}, sc))
    inputs = {"model": model.name, "durations_fs": durations, "decay": bool(decay)}
    return art.finish(ScenarioReport("stokes-transfer", inputs, {"n_points": len(points)}, points=points))


# negative results --------------------------------------------------------------

def _ladder(model, include_continuum):
    lv = levels(model)
    base = model if include_continuum else model.bound_only()
    keep = [lv.ground, lv.intermediate, lv.target]
    if include_continuum:
        keep += [s.label for s in model.basis if s.group is Group.CONTINUUM]
    return base.restricted(keep), lv


def _stirap_run(model, lv, e_pump, e_stokes, sigma, delay, ordering):
    """``counter``: Stokes first; ``intuitive``: pump first; ``pump_only``."""
    grid = TimeGrid.from_span(-3.0 * sigma - delay, 3.0 * sigma + delay, DT_FS)
    tp = 0.5 * delay if ordering in ("counter", "pump_only") else -0.5 * delay
    parts = [sample_gaussian(GaussianPulseSpec(e_pump, lv.pump_carrier, tp, 0.0, sigma), grid)]
    if ordering != "pump_only":
        parts.append(sample_gaussian(GaussianPulseSpec(e_stokes, lv.stokes_carrier, -tp, 0.0, sigma), grid))
    traj = _run(model, superpose(parts), lv)
    return traj.final("target"), traj.max_of("intermediate")[0]


def run_stirap(sigma=10.0, delay=None, pump_intensity=1.2e15, stokes_intensity=1e13, adiabatic_sigma=20.0,
               coupling_scale=100.0, rabi_area=40.0, include_continuum=False, model=None, out=None):
    """Counterintuitive vs intuitive ordering, realistic and artificially adiabatic.

    The adiabatic regime scales the ground-intermediate coupling by
    ``coupling_scale`` and sets both peak Rabi frequencies so that
    ``Omega * FWHM * sqrt(pi / (4 ln 2))`` equals ``rabi_area``.
    """
    model = _model(model, "experimental")
    ladder, lv = _ladder(model, include_continuum)
    delay = sigma if delay is None else delay
    runs = {}
    ep, es = intensity_to_field_amplitude(pump_intensity), intensity_to_field_amplitude(stokes_intensity)
    for order in ("counter", "intuitive", "pump_only"):
        runs[f"realistic_{order}"] = _stirap_run(ladder, lv, ep, es, sigma, delay, order)
    scaled = ladder.with_scaled_dipoles(coupling_scale, [(lv.ground, lv.intermediate)])
    omega = rabi_area / (adiabatic_sigma / AU_TIME_FS * math.sqrt(math.pi / (4.0 * math.log(2.0))))
    ep_a = omega / abs(_coupling(scaled, lv.ground, lv.intermediate))
    es_a = omega / abs(_coupling(scaled, lv.intermediate, lv.target))
    for order in ("counter", "intuitive"):
        runs[f"adiabatic_{order}"] = _stirap_run(scaled, lv, ep_a, es_a, adiabatic_sigma, 0.8 * adiabatic_sigma,
                                                 order)
    scalars = {}
    for k, (tr, mi) in runs.items():
        scalars[f"transfer_{k}"] = tr
        scalars[f"max_intermediate_{k}"] = mi
    art = _Artifacts(out)
    inputs = {"model": model.name, "sigma_fs": sigma, "delay_fs": delay, "pump_intensity_Wcm2": pump_intensity,
              "stokes_intensity_Wcm2": stokes_intensity, "adiabatic_sigma_fs": adiabatic_sigma,
              "coupling_scale": coupling_scale, "rabi_area": rabi_area, "include_continuum": include_continuum}
    return art.finish(ScenarioReport("stirap", inputs, scalars))


def run_amplitude_scaling(intensities=None, fwhm=2.0, model=None, workers=1, out=None):
    """Simultaneous pump and Stokes pulses of growing peak intensity."""
    model = _model(model, "experimental")
    lv = levels(model)
    if intensities is None:
        intensities = np.logspace(12.0, 16.0, 13)
    intensities = [float(i) for i in intensities]
    grid = TimeGrid.from_span(-4.0 * fwhm, 4.0 * fwhm, DT_FS)

    def point(i):
        return _run(model, _pair(lv, i, fwhm, grid), lv)

    trajs = _pmap(point, intensities, workers)
    art = _Artifacts(out)
    points = []
    for i, tr in zip(intensities, trajs):
        sc = {"intensity_Wcm2": i, "final_target": tr.final("target"), "final_ground": tr.final("ground")}
        points.append(ScenarioReport(f"amplitude-scaling[{i:.3g}]", {"intensity_Wcm2": i}, sc))
    art.table("amplitude_scaling", ["intensity_Wcm2", "final_target", "final_ground"],
              [[p.scalars[k] for k in ("intensity_Wcm2", "final_target", "final_ground")] for p in points])
    k = int(np.argmax([p.scalars["final_target"] for p in points]))
    scalars = {"best_target": points[k].scalars["final_target"], "best_intensity_Wcm2": intensities[k]}
    inputs = {"model": model.name, "intensities_Wcm2": intensities, "fwhm_fs": fwhm}
    return art.finish(ScenarioReport("amplitude-scaling", inputs, scalars, points=points))


SCENARIOS = {
    "naive": run_naive,
    "optimized": run_optimized,
    "phase-sweep": run_phase_sweep,
    "pump-sweep": run_pump_sweep,
    "sequential": run_sequential,
    "stokes-transfer": run_stokes_transfer,
    "stirap": run_stirap,
    "amplitude-scaling": run_amplitude_scaling,
}
