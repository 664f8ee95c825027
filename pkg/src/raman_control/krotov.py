"""First-order Krotov optimization of a single real control field.

Conventions
-----------
The target enters through its co-vector ``alpha_D`` and the symmetric
product ``alpha_D^T alpha``; this is the pairing that keeps the transposed
backward equations exact when the Hamiltonian carries absorbing terms.  The
state that reaches ``|J| = 1`` is therefore ``conj(alpha_D)``
(:meth:`TargetSpec.ket`).  For the real co-vectors of pure targets the
distinction disappears.
"""
from dataclasses import dataclass, field
import cmath
import math

import numpy as np

from ._backend import kernels as _default_kernels
from .errors import NumericalAbort, UndefinedPhaseError
from .propagator import evolve_states, propagate_backward
from .pulses import Pulse
from .units import HARTREE_EV, time_fs_to_internal

DEFAULT_AMPLITUDES = (0.99, 0.16)  # (excited, reference) before normalization


@dataclass(frozen=True)
class TargetSpec:
    kind: str  # "pure" or "superposition"
    coefficients: tuple  # ((label, complex co-vector component), ...), unit norm
    phase: float = 0.0  # target relative phase (superposition only)
    excited_label: str = None
    reference_label: str = None

    @classmethod
    def pure(cls, label):
        return cls("pure", ((label, 1.0 + 0j),), 0.0, label, None)

    @classmethod
    def superposition(cls, phase, excited_label, reference_label, amplitudes=DEFAULT_AMPLITUDES):
        a, b = amplitudes
        norm = math.hypot(a, b)
        coeffs = ((excited_label, a / norm * cmath.exp(1j * phase)), (reference_label, b / norm + 0j))
        return cls("superposition", coeffs, float(phase), excited_label, reference_label)

    def covector(self, model):
        v = np.zeros(model.dim, dtype=complex)
        for label, c in self.coefficients:
            v[model.index(label)] = c
        return v

    def ket(self, model):
        return np.conj(self.covector(model))


def overlap(state, target, model):
    return complex(target.covector(model) @ np.asarray(state))


def cost(state, target, model):
    """``J = -|<Phi_D|Psi>|^2`` (-1 for a perfect match, 0 for orthogonal)."""
    return -abs(overlap(state, target, model)) ** 2


def fidelity(state, target, model):
    return -cost(state, target, model)


def final_costate(state, target, model):
    """``chi(t_f) = 2 alpha_D (alpha_D^T alpha(t_f))^*``."""
    a_d = target.covector(model)
    return 2.0 * a_d * np.conj(a_d @ np.asarray(state))


def _wrap(x):
    """Wrap to (-pi, pi]."""
    y = (x + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if y == -math.pi else y


def achieved_phase(state, target, model, omega_target=None, t_origin=None, t_f=None):
    """Relative phase of the excited vs reference component in the target's convention.

    The co-vector pairing matches ``conj(alpha)`` against the target, so the
    phase read off the state is ``-arg(alpha_exc / alpha_ref)``.  With
    ``omega_target`` (eV), ``t_origin`` and ``t_f`` (fs) the excited amplitude
    is first back-rotated by ``exp(+i omega (t_f - t_origin))``.
    """
    ae = state[model.index(target.excited_label)]
    ar = state[model.index(target.reference_label)]
    if abs(ae) < 1e-12 or abs(ar) < 1e-12:
        raise UndefinedPhaseError("excited or reference amplitude below 1e-12")
    rel = cmath.phase(ae / ar)
    if omega_target is not None and t_origin is not None and t_f is not None:
        rel += omega_target / HARTREE_EV * time_fs_to_internal(t_f - t_origin)
    return _wrap(-rel)


def phase_error(state, target, model, omega_target=None, t_origin=None, t_f=None):
    """Achieved minus requested relative phase, wrapped to (-pi, pi]."""
    if target.kind != "superposition":
        raise ValueError("phase error is defined for superposition targets only")
    return _wrap(achieved_phase(state, target, model, omega_target, t_origin, t_f) - target.phase)


# shape functions ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ShapeFunction:
    samples: np.ndarray
    kind: str

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.min() < 0 or s.max() > 1:
            raise ValueError("shape function must lie in [0, 1]")
        if s[0] != 0 or s[-1] != 0:
            raise ValueError("shape function must vanish at both ends")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)


def sin2_shape(grid, t_on=None, t_off=None):
    """Single sin^2 bump over [t_on, t_off] (defaults: the whole grid)."""
    t = grid.times
    t_on = grid.t_start if t_on is None else t_on
    t_off = grid.t_end if t_off is None else t_off
    x = np.clip((t - t_on) / (t_off - t_on), 0.0, 1.0)
    s = np.sin(math.pi * x) ** 2
    s[0] = s[-1] = 0.0
    return ShapeFunction(s, "sin2")


def flattop_shape(grid, t_rise, t_on=None, t_off=None):
    """1 on [t_on + t_rise, t_off - t_rise] with sin^2 ramps, 0 outside."""
    t = grid.times
    t_on = grid.t_start if t_on is None else t_on
    t_off = grid.t_end if t_off is None else t_off
    s = np.zeros_like(t)
    inside = (t >= t_on) & (t <= t_off)
    up = np.clip((t - t_on) / t_rise, 0.0, 1.0)
    down = np.clip((t_off - t) / t_rise, 0.0, 1.0)
    s[inside] = (np.sin(0.5 * math.pi * np.minimum(up, down)) ** 2)[inside]
    s[0] = s[-1] = 0.0
    return ShapeFunction(s, "flattop")


# optimization -------------------------------------------------------------

@dataclass
class KrotovConfig:
    lambda_: float = 1.0
    max_iterations: int = 100
    stop_delta_j: float = 0.0
    shape: ShapeFunction = None
    update_form: str = "multiplicative"  # or "as_printed"
    field_cap: float = 10.0  # a.u.
    adapt_lambda: bool = True
    min_shape: float = 1e-3  # clamp for the as-printed 1/S factor

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ValueError("lambda must be positive")
        if self.max_iterations < 0 or self.stop_delta_j < 0:
            raise ValueError("iteration count and threshold must be non-negative")
        if self.update_form not in ("multiplicative", "as_printed"):
            raise ValueError(f"unknown update form {self.update_form!r}")


@dataclass
class IterationRecord:
    iteration: int
    j: float
    delta_j: float
    peak_field: float
    monotonic: bool
    accepted: bool
    lambda_: float

    def log_line(self):
        return (f"{self.iteration}\t{self.j:.15e}\t{self.delta_j:.6e}\t{self.peak_field:.6e}\t"
                f"{int(self.monotonic)}\t{int(self.accepted)}\t{self.lambda_:.6e}")


LOG_HEADER = "# iteration\tJ\tdelta_J\tpeak_field_au\tmonotonic\taccepted\tlambda"


@dataclass
class OptimizationResult:
    final_pulse: Pulse
    j_initial: float
    j_history: list
    monotonic: list
    final_state: np.ndarray
    final_fidelity: float
    records: list = field(default_factory=list)
    phase_error: float = None
    converged: bool = False

    @property
    def iterations(self):
        return len(self.records)


class OptimizationAborted(NumericalAbort):
    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


def _weights(cfg, shape, lam):
    s = shape.samples
    if cfg.update_form == "multiplicative":
        return s / lam
    w = np.zeros_like(s)
    on = s > 0
    w[on] = lam / (2.0 * np.maximum(s[on], cfg.min_shape))
    return w


def _final_state(model, pulse, psi0, kernels):
    n = pulse.grid.n_steps
    _, final = evolve_states(model, pulse.midpoints(), pulse.grid.dt_au, psi0, stride=n + 1, kernels=kernels)
    return final


def optimize(model, guess, psi0, target, cfg, callback=None, kernels=None):
    """Minimize ``J = -|<Phi_D|Psi(t_f)>|^2`` over the field.

    Each iteration back-propagates ``chi`` from ``final_costate`` under the
    current field, then sweeps forward applying
    ``E_new(t) = E(t) - w(t) Im(chi(t)^T z alpha_new(t))`` with
    ``w = S/lambda`` (or ``lambda/(2S)`` in the as-printed form) at every step,
    and finally re-propagates the new field to evaluate J.  An iteration that
    raises J by more than 1e-10 is rejected and lambda doubled (when
    ``adapt_lambda``); the best field so far is always kept.
    """
    k = kernels or _default_kernels
    shape = cfg.shape
    if shape is None:
        shape = sin2_shape(guess.grid)
    if len(shape.samples) != guess.grid.n_points:
        raise ValueError("shape function and pulse grids differ")
    psi0 = np.ascontiguousarray(psi0, dtype=complex)
    h = np.ascontiguousarray(model.hamiltonian_diag())
    ip, ix, d = model.dipole_csr()
    dt = guess.grid.dt_au

    pulse = guess
    state = _final_state(model, pulse, psi0, k)
    j = cost(state, target, model)
    j0 = j
    history, mono, records = [], [], []
    lam = cfg.lambda_
    converged = False

    def result():
        return OptimizationResult(pulse, j0, list(history), list(mono), state, -j, list(records),
                                  converged=converged)

    for it in range(1, cfg.max_iterations + 1):
        chi_f = final_costate(state, target, model)
        chis = propagate_backward(model, pulse, chi_f, kernels=k).states
        new = np.empty(pulse.grid.n_points)
        k.krotov_sweep(h, ip, ix, d, np.ascontiguousarray(pulse.samples), _weights(cfg, shape, lam),
                       np.ascontiguousarray(chis), dt, psi0, new, cfg.field_cap)
        peak = float(np.max(np.abs(new))) if np.all(np.isfinite(new)) else math.inf
        if not peak <= cfg.field_cap:
            raise OptimizationAborted(
                f"iteration {it}: field {peak:.3g} a.u. exceeds cap {cfg.field_cap} a.u. (lambda={lam:.3g})",
                result())
        cand = pulse.with_samples(new, kind="optimized", iteration=it)
        cand_state = _final_state(model, cand, psi0, k)
        j_new = cost(cand_state, target, model)
        dj = j_new - j
        if cfg.adapt_lambda and dj > 1e-10:
            records.append(IterationRecord(it, j_new, dj, peak, False, False, lam))
            if callback:
                callback(records[-1])
            lam *= 2.0
            continue
        pulse, state, j = cand, cand_state, j_new
        history.append(j)
        mono.append(dj <= 1e-12)
        records.append(IterationRecord(it, j, dj, peak, dj <= 1e-12, True, lam))
        if callback:
            callback(records[-1])
        if cfg.stop_delta_j > 0 and abs(dj) < cfg.stop_delta_j:
            converged = True
            break
    return result()
