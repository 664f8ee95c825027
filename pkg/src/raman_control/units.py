"""Laboratory units (eV, fs, W/cm^2, uJ, um) and atomic units.

All dynamics run in atomic units; everything user facing is in eV, fs and
W/cm^2.  Constants are CODATA values taken from :mod:`scipy.constants`.
"""
from dataclasses import dataclass
import math

from scipy import constants as _c


@dataclass(frozen=True)
class PhysicalConstants:
    hartree_in_eV: float
    atomic_time_in_fs: float
    atomic_intensity_in_Wcm2: float
    hbar_eV_fs: float


def _codata():
    pc = _c.physical_constants
    field_au = pc["atomic unit of electric field"][0]  # V/m
    # cycle-averaged intensity of a field with peak amplitude 1 a.u.
    intensity_w_m2 = 0.5 * _c.epsilon_0 * _c.c * field_au**2
    return PhysicalConstants(
        hartree_in_eV=pc["Hartree energy in eV"][0],
        atomic_time_in_fs=pc["atomic unit of time"][0] * 1e15,
        atomic_intensity_in_Wcm2=intensity_w_m2 * 1e-4,
        hbar_eV_fs=pc["reduced Planck constant in eV s"][0] * 1e15,
    )


CONSTANTS = _codata()
HARTREE_EV = CONSTANTS.hartree_in_eV
AU_TIME_FS = CONSTANTS.atomic_time_in_fs
AU_INTENSITY_WCM2 = CONSTANTS.atomic_intensity_in_Wcm2
HBAR_EV_FS = CONSTANTS.hbar_eV_fs

_GAUSS_INTENSITY_FACTOR = math.sqrt(math.pi / (8.0 * math.log(2.0)))


def energy_ev_to_internal(e):
    return e / HARTREE_EV


def energy_internal_to_ev(e):
    return e * HARTREE_EV


def time_fs_to_internal(t):
    return t / AU_TIME_FS


def time_internal_to_fs(t):
    return t * AU_TIME_FS


def intensity_to_field_amplitude(i):
    """Peak field amplitude (a.u.) of a pulse with peak intensity ``i`` in W/cm^2."""
    i = float(i)
    if not i >= 0.0:
        raise ValueError(f"intensity must be non-negative, got {i}")
    return math.sqrt(i / AU_INTENSITY_WCM2)


def field_amplitude_to_intensity(e0):
    return float(e0) ** 2 * AU_INTENSITY_WCM2


def width_from_lifetime(tau_fs):
    """Decay width (eV) of a state with lifetime ``tau_fs``."""
    return HBAR_EV_FS / tau_fs


def lifetime_from_width(width_ev):
    return HBAR_EV_FS / width_ev


def pulse_energy(i_peak, fwhm, spot_diameter):
    """Pulse energy in uJ.

    Flat-top spot of diameter ``spot_diameter`` (um); the temporal intensity
    profile is the square of a Gaussian field envelope with field FWHM
    ``fwhm`` (fs), so its integral is ``fwhm * sqrt(pi / (8 ln 2))``.
    """
    for name, v in (("i_peak", i_peak), ("fwhm", fwhm), ("spot_diameter", spot_diameter)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    area_cm2 = math.pi * (spot_diameter * 1e-4 / 2.0) ** 2
    joules = i_peak * area_cm2 * fwhm * 1e-15 * _GAUSS_INTENSITY_FACTOR
    return joules * 1e6


def intensity_from_pulse_energy(energy_uj, fwhm, spot_diameter):
    """Inverse of :func:`pulse_energy` for the peak intensity (W/cm^2)."""
    if not energy_uj >= 0:
        raise ValueError(f"energy must be non-negative, got {energy_uj}")
    return energy_uj / pulse_energy(1.0, fwhm, spot_diameter)
