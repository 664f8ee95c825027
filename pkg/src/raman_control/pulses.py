"""Pulse synthesis and analysis on uniform time grids.

Pulses are real field samples (a.u.) on a :class:`TimeGrid` whose axis is in
fs.  Analysis works on the analytic signal built with the one-sided spectrum
method (:func:`scipy.signal.hilbert`).
"""
from dataclasses import dataclass, field
import io
import math
import warnings

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import hilbert

from .errors import ConfigError, UndefinedPhaseError
from .units import AU_TIME_FS, HBAR_EV_FS, intensity_to_field_amplitude

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TimeGrid:
    t_start: float  # fs
    dt: float  # fs
    n_points: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_points < 2:
            raise ValueError(f"need at least 2 grid points, got {self.n_points}")

    @classmethod
    def from_span(cls, t_start, t_end, dt):
        """Grid covering [t_start, t_end] with spacing at most ``dt``."""
        n_steps = max(1, int(math.ceil((t_end - t_start) / dt - 1e-9)))
        return cls(t_start, (t_end - t_start) / n_steps, n_steps + 1)

    @property
    def times(self):
        return self.t_start + self.dt * np.arange(self.n_points)

    @property
    def t_end(self):
        return self.t_start + self.dt * (self.n_points - 1)

    @property
    def dt_au(self):
        return self.dt / AU_TIME_FS

    @property
    def n_steps(self):
        return self.n_points - 1


@dataclass(frozen=True)
class GaussianPulseSpec:
    """``E0 sin(w (t - t0) + phi) exp(-4 ln2 (t - t0)^2 / fwhm^2)``."""

    amplitude: float  # a.u.
    carrier: float  # eV
    center: float  # fs
    cep: float  # rad
    fwhm: float  # fs

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError(f"fwhm must be positive, got {self.fwhm}")
        if self.carrier < 0:
            raise ValueError(f"carrier must be non-negative, got {self.carrier}")

    @classmethod
    def from_intensity(cls, intensity, carrier, center, fwhm, cep=0.0):
        return cls(intensity_to_field_amplitude(intensity), carrier, center, cep, fwhm)

    @property
    def wrapped_cep(self):
        return self.cep % TWO_PI

    def scaled(self, factor):
        return GaussianPulseSpec(self.amplitude * factor, self.carrier, self.center, self.cep, self.fwhm)

    def shifted(self, center):
        return GaussianPulseSpec(self.amplitude, self.carrier, center, self.cep, self.fwhm)


@dataclass(frozen=True, eq=False)
class Pulse:
    grid: TimeGrid
    samples: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} samples, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("pulse samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def times(self):
        return self.grid.times

    def midpoints(self):
        """Field on each integration step (linear interpolation)."""
        s = self.samples
        return 0.5 * (s[:-1] + s[1:])

    def peak_field(self):
        return float(np.max(np.abs(self.samples)))

    def with_samples(self, samples, **provenance):
        return Pulse(self.grid, samples, {**self.provenance, **provenance})

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_points), {"kind": "zero"})


def sample_gaussian(spec, grid):
    t = grid.times
    w = spec.carrier / HBAR_EV_FS  # rad/fs
    dt = t - spec.center
    samples = spec.amplitude * np.sin(w * dt + spec.cep) * np.exp(-4.0 * math.log(2.0) * dt**2 / spec.fwhm**2)
    return Pulse(grid, samples, {"kind": "gaussian", "specs": [spec.__dict__.copy()]})


def superpose(pulses):
    pulses = list(pulses)
    if not pulses:
        raise ValueError("nothing to superpose")
    grid = pulses[0].grid
    for p in pulses[1:]:
        if p.grid != grid:
            raise ValueError(f"grid mismatch: {p.grid} vs {grid}")
    total = np.sum([p.samples for p in pulses], axis=0)
    specs = [s for p in pulses for s in p.provenance.get("specs", [])]
    return Pulse(grid, total, {"kind": "sum", "specs": specs})


def window(p, t_min=None, t_max=None):
    """Pulse zeroed outside [t_min, t_max] (fs)."""
    t = p.times
    keep = np.ones(len(t), dtype=bool)
    if t_min is not None:
        keep &= t >= t_min
    if t_max is not None:
        keep &= t <= t_max
    return p.with_samples(np.where(keep, p.samples, 0.0), window=[t_min, t_max])


def bandpass(p, lo_ev=None, hi_ev=None):
    """Keep spectral components with photon energy in [lo_ev, hi_ev)."""
    spec = np.fft.rfft(p.samples)
    freqs = np.fft.rfftfreq(p.grid.n_points, d=p.grid.dt) * TWO_PI * HBAR_EV_FS
    if lo_ev is not None:
        spec[freqs < lo_ev] = 0.0
    if hi_ev is not None:
        spec[freqs >= hi_ev] = 0.0
    return p.with_samples(np.fft.irfft(spec, n=p.grid.n_points), band_eV=[lo_ev, hi_ev])


def highpass(p, cutoff_ev):
    """Remove spectral components below ``cutoff_ev``."""
    return bandpass(p, lo_ev=cutoff_ev)


def analytic_signal(p):
    return hilbert(p.samples)


@dataclass(frozen=True)
class CepResult:
    cep: float  # rad, in [0, 2pi)
    envelope: np.ndarray
    t_peak: float  # fs


def extract_cep(p, min_cycles=3.0):
    """Carrier-envelope phase against the pulse's own envelope peak.

    For ``E0 sin(w (t - t0) + phi) g(t - t0)`` the analytic signal has phase
    ``w (t - t0) + phi - pi/2``; the envelope peak locates t0, so the CEP is
    the instantaneous phase there plus pi/2.  The peak is refined by a
    parabola through the log-envelope (exact for Gaussians) and the unwrapped
    phase is interpolated linearly to it.
    """
    a = analytic_signal(p)
    env = np.abs(a)
    if not np.any(env > 0):
        raise UndefinedPhaseError("all-zero pulse has no carrier-envelope phase")
    k = int(np.argmax(env))
    t = p.times
    dt = p.grid.dt
    shift = 0.0
    if 0 < k < len(env) - 1 and env[k - 1] > 0 and env[k + 1] > 0:
        l0, l1, l2 = np.log(env[k - 1]), np.log(env[k]), np.log(env[k + 1])
        denom = l0 - 2.0 * l1 + l2
        if denom < 0:
            shift = 0.5 * (l0 - l2) / denom
    j = k + (1 if shift > 0 else -1) if shift != 0 else k
    phase_k = np.angle(a[k])
    if j != k:
        dphi = np.angle(a[j] * np.conj(a[k]))
        phase_k = phase_k + dphi * abs(shift)
    t_peak = t[k] + shift * dt
    _check_cycles(a, env, k, dt, min_cycles)
    cep = (phase_k + 0.5 * math.pi) % TWO_PI
    if cep >= TWO_PI:
        cep = 0.0
    return CepResult(float(cep), env, float(t_peak))


def carrier_phase(p, carrier_ev, t_ref=0.0):
    """Carrier phase relative to a fixed time origin.

    The analytic signal is demodulated at ``carrier_ev`` about ``t_ref`` and
    averaged with the envelope as weight.  For a Gaussian centred at ``t_ref``
    this equals its CEP; unlike :func:`extract_cep` it does not move when the
    envelope peak of a shaped pulse drifts by a fraction of a cycle.
    """
    a = analytic_signal(p)
    env = np.abs(a)
    if not np.any(env > 0):
        raise UndefinedPhaseError("all-zero pulse has no carrier phase")
    w = carrier_ev / HBAR_EV_FS
    z = np.sum(env * a * np.exp(-1j * w * (p.times - t_ref)))
    return float((np.angle(z) + 0.5 * math.pi) % TWO_PI)


def envelope(p):
    return np.abs(analytic_signal(p))


def _check_cycles(a, env, k, dt, min_cycles):
    half = env[k] / 2.0
    above = np.nonzero(env >= half)[0]
    fwhm = (above[-1] - above[0]) * dt if len(above) > 1 else dt
    lo, hi = max(k - 2, 0), min(k + 3, len(a))
    if hi - lo < 2:
        return
    inst = np.diff(np.unwrap(np.angle(a[lo:hi]))).mean() / dt  # rad/fs
    cycles = abs(inst) * fwhm / TWO_PI
    if cycles < min_cycles:
        warnings.warn(f"only {cycles:.1f} carrier cycles within the envelope FWHM; CEP may be inaccurate",
                      RuntimeWarning, stacklevel=3)


@dataclass(frozen=True)
class WignerMap:
    times: np.ndarray  # fs
    energies: np.ndarray  # eV
    values: np.ndarray  # (n_times, n_energies), field^2 per unit angular frequency (a.u.)

    def time_marginal(self):
        """Integral over frequency, in field^2 (a.u.); equals |a(t)|^2 unsmoothed."""
        d_omega = (self.energies[1] - self.energies[0]) / HBAR_EV_FS * AU_TIME_FS if len(self.energies) > 1 else 1.0
        return self.values.sum(axis=1) * d_omega / TWO_PI


def wigner_distribution(p, freq_window=None, smoothing=(0.25, 0.5), n_times=400, max_lag=None):
    """Smoothed Wigner distribution of the analytic signal.

    ``W(t, w) = int a(t + tau/2) a*(t - tau/2) exp(-i w tau) dtau`` evaluated at
    up to ``n_times`` time points; ``smoothing`` gives Gaussian standard
    deviations (fs, eV) applied along time and frequency.  ``freq_window``
    (eV) crops the frequency axis and must lie inside [0, pi hbar / dt).
    """
    a = analytic_signal(p)
    n = len(a)
    dt = p.grid.dt
    nyquist = math.pi / dt * HBAR_EV_FS
    if freq_window is not None:
        lo, hi = freq_window
        if lo < 0 or hi > nyquist or lo >= hi:
            raise ValueError(f"frequency window {freq_window} outside [0, {nyquist:.3f}] eV")
    stride = max(1, n // n_times)
    idx = np.arange(0, n, stride)
    lag_cap = n if max_lag is None else max_lag
    half = min(lag_cap, n - 1)
    length = 1 << int(math.ceil(math.log2(2 * half + 1))) if half > 0 else 1
    values = np.empty((len(idx), length))
    for row, i in enumerate(idx):
        m = min(i, n - 1 - i, lag_cap)
        r = np.zeros(length, dtype=complex)
        lags = np.arange(-m, m + 1)
        r[lags % length] = a[i + lags] * np.conj(a[i - lags])
        # lag step is 2 dt; scaling makes int W dw / 2pi = |a|^2
        values[row] = np.fft.fft(r).real * (2.0 * dt / AU_TIME_FS)
    omega = np.arange(length) * math.pi / (length * dt)  # rad/fs
    energies = omega * HBAR_EV_FS
    times = p.times[idx]
    sig_t, sig_e = smoothing
    if sig_t and len(idx) > 1:
        values = gaussian_filter1d(values, sig_t / (stride * dt), axis=0, mode="constant")
    if sig_e:
        values = gaussian_filter1d(values, sig_e / (energies[1] - energies[0]), axis=1, mode="wrap")
    if freq_window is not None:
        keep = (energies >= freq_window[0]) & (energies <= freq_window[1])
        energies, values = energies[keep], values[:, keep]
    return WignerMap(times, energies, values)


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray  # eV
    amplitude: np.ndarray  # |FT| in a.u. field * fs

    def peaks(self, min_height=0.1):
        """Energies of local maxima above ``min_height`` times the global maximum."""
        a = self.amplitude
        if a.max() == 0:
            return np.array([])
        inner = (a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]) & (a[1:-1] > min_height * a.max())
        return self.energies[1:-1][inner]

    def fwhm(self):
        a = self.amplitude
        k = int(np.argmax(a))
        half = a[k] / 2.0
        lo = k
        while lo > 0 and a[lo] > half:
            lo -= 1
        hi = k
        while hi < len(a) - 1 and a[hi] > half:
            hi += 1
        e = self.energies

        def cross(i, j):
            return e[i] + (half - a[i]) * (e[j] - e[i]) / (a[j] - a[i])

        return cross(hi - 1, hi) - cross(lo, lo + 1)


def spectrum(p, pad_to=None):
    n = pad_to or p.grid.n_points
    amp = np.abs(np.fft.rfft(p.samples, n=n)) * p.grid.dt
    energies = np.fft.rfftfreq(n, d=p.grid.dt) * TWO_PI * HBAR_EV_FS
    return Spectrum(energies, amp)


# file format -------------------------------------------------------------

def save_pulse(p, path):
    """Two columns (time fs, field a.u.) after a ``#`` header with grid metadata."""
    g = p.grid
    buf = io.StringIO()
    buf.write("# raman_control pulse v1\n")
    buf.write(f"# t_start_fs = {g.t_start!r}\n# dt_fs = {g.dt!r}\n# n_points = {g.n_points}\n")
    for k, v in sorted(p.provenance.items()):
        if isinstance(v, (str, int, float)):
            buf.write(f"# {k} = {v}\n")
    np.savetxt(buf, np.column_stack([g.times, p.samples]), fmt="%.17g")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_pulse(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                if "=" in s:
                    k, v = s[1:].split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ConfigError(f"line {lineno}: expected 2 columns, got {len(parts)}", key=str(path))
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ConfigError(f"line {lineno}: not a number: {s!r}", key=str(path)) from None
    if len(rows) < 2:
        raise ConfigError("pulse file needs at least 2 samples", key=str(path))
    data = np.array(rows)
    if "t_start_fs" in meta and "dt_fs" in meta:
        grid = TimeGrid(float(meta["t_start_fs"]), float(meta["dt_fs"]), len(rows))
    else:
        t = data[:, 0]
        d = np.diff(t)
        if not np.allclose(d, d[0], rtol=1e-6):
            raise ConfigError("time column is not uniformly spaced", key=str(path))
        grid = TimeGrid(float(t[0]), float(d.mean()), len(rows))
    return Pulse(grid, data[:, 1], {"source": str(path)})


def save_wigner(w, path):
    with open(path, "w") as fh:
        fh.write("# time_fs\tenergy_eV\tvalue\n")
        T, E = np.meshgrid(w.times, w.energies, indexing="ij")
        np.savetxt(fh, np.column_stack([T.ravel(), E.ravel(), w.values.ravel()]), fmt="%.10g", delimiter="\t")


def save_spectrum(s, path):
    with open(path, "w") as fh:
        fh.write("# energy_eV\tamplitude\n")
        np.savetxt(fh, np.column_stack([s.energies, s.amplitude]), fmt="%.10g", delimiter="\t")
