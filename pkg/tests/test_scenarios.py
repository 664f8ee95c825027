import math

import numpy as np
import pytest
import tomli

from raman_control import scenarios as sc
from raman_control.model import neon_preset
from raman_control.pulses import GaussianPulseSpec, TimeGrid, sample_gaussian, superpose


@pytest.fixture(scope="module")
def tdcis():
    return neon_preset("tdcis")


def test_levels_of_presets(tdcis):
    lv = sc.levels(tdcis)
    assert lv.ground != lv.intermediate != lv.target
    assert lv.pump_carrier > lv.stokes_carrier > 0
    assert lv.pump_carrier - lv.stokes_carrier == pytest.approx(lv.e_target, rel=1e-9)


def test_report_rejects_population_out_of_range():
    with pytest.raises(ValueError):
        sc.ScenarioReport("x", {}, {"final_target": 1.5})
    sc.ScenarioReport("x", {}, {"final_target": 1.0, "slope": 7.0})


def test_report_round_trip(tmp_path):
    rep = sc.ScenarioReport("x", {"a": np.float64(1.5), "skip": None, "v": np.arange(3)},
                            {"n": np.int64(2), "flag": True},
                            points=[sc.ScenarioReport("p", {}, {"final_target": 0.25})])
    sc.write_report(rep, tmp_path)
    with open(tmp_path / "report.toml", "rb") as fh:
        doc = tomli.load(fh)
    assert doc["inputs"] == {"a": 1.5, "v": [0, 1, 2]}
    assert doc["scalars"] == {"n": 2, "flag": True}
    assert doc["points"][0]["scalars"]["final_target"] == 0.25
    assert rep.all_scalars()["points[0].final_target"] == 0.25


def test_naive_zero_intensity_leaves_ground(tdcis):
    rep = sc.run_naive(tdcis, intensity=0.0)
    assert rep.scalars["final_target"] == 0.0
    assert rep.scalars["final_ground"] == pytest.approx(1.0, abs=1e-12)


def test_naive_target_scales_quadratically_in_intensity(tdcis):
    # two-photon transfer ~ |E_p E_s|^2 ~ I^2 in the perturbative regime
    a = sc.run_naive(tdcis, intensity=1e11).scalars["final_target"]
    b = sc.run_naive(tdcis, intensity=2e11).scalars["final_target"]
    assert b / a == pytest.approx(4.0, rel=0.02)


def test_naive_writes_artifacts(tdcis, tmp_path):
    rep = sc.run_naive(tdcis, out=tmp_path)
    for name in rep.files.values():
        assert (tmp_path / name).exists()
    assert (tmp_path / "report.toml").exists()


def test_color_timing_recovers_delay(tdcis):
    lv = sc.levels(tdcis)
    g = TimeGrid.from_span(-20, 30, 0.002)
    p = superpose([sample_gaussian(GaussianPulseSpec(0.01, lv.pump_carrier, 0.0, 0.0, 3.0), g),
                   sample_gaussian(GaussianPulseSpec(0.01, lv.stokes_carrier, 4.0, 0.0, 3.0), g)])
    t = sc.color_timing(p, lv)
    assert t["stokes_delay_fs"] == pytest.approx(4.0, abs=0.02)
    assert t["pump_peak_time"] == pytest.approx(0.0, abs=0.05)
    assert t["stokes_centroid_time"] == pytest.approx(4.0, abs=0.05)


def test_cep_slope_unwraps():
    phases = np.linspace(0, 2 * math.pi, 9, endpoint=False)
    ceps = (1.0 * phases + 5.5) % (2 * math.pi)
    slope, intercept = sc.cep_slope(phases[::-1], ceps[::-1])
    assert slope == pytest.approx(1.0, abs=1e-12)
    assert intercept % (2 * math.pi) == pytest.approx(5.5, abs=1e-12)


def test_stokes_transfer_without_decay():
    rep = sc.run_stokes_transfer(durations=(0.5,), decay=False)
    assert rep.points[0].scalars["best_transfer"] >= 0.99


def test_stirap_pump_only_does_not_transfer():
    rep = sc.run_stirap()
    s = rep.scalars
    assert s["transfer_realistic_pump_only"] < 1e-12
    assert s["transfer_adiabatic_counter"] >= 0.9
    assert s["max_intermediate_adiabatic_counter"] <= 0.05
    assert s["transfer_adiabatic_counter"] > s["transfer_adiabatic_intuitive"]


def test_sweep_independent_of_worker_count():
    a = sc.run_amplitude_scaling(intensities=[1e12, 1e14, 1e15], workers=1)
    b = sc.run_amplitude_scaling(intensities=[1e12, 1e14, 1e15], workers=3)
    assert a.all_scalars() == b.all_scalars()


def test_pump_point_small_energy_is_perturbative():
    model = neon_preset("experimental")
    _, s1 = sc.run_pump_point(model, 10.0, 0.0071)
    _, s2 = sc.run_pump_point(model, 10.0, 0.0142)
    assert s2["peak_intermediate"] / s1["peak_intermediate"] == pytest.approx(2.0, rel=0.02)


def test_registry_names():
    assert set(sc.SCENARIOS) == {"naive", "optimized", "phase-sweep", "pump-sweep", "sequential",
                                 "stokes-transfer", "stirap", "amplitude-scaling"}
