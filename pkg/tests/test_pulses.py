"""Pulse synthesis: exact pi area by quadrature, selectivity rule, composition."""
import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from molreg.errors import (ConfigurationError, ForbiddenTransitionError,
                           UnresolvableTransitionError)
from molreg.pulses import (FieldSignal, PiPulse, SampledWaveform, export_field,
                           load_pulse_program, min_selective_duration,
                           pi_pulse_for, render)
from molreg.register import CoupledBasis, DipoleOperators
from molreg.units import UnitTag, to_atomic


def test_pi_area_by_quadrature():
    """integral of mu * E0 sin^2(pi t/tau) dt == pi for E0 = 2 pi/(tau mu)."""
    tau = to_atomic(0.01, UnitTag.microsecond)
    mu = 0.37
    e0 = 2.0 * math.pi / (tau * mu)
    area, _ = quad(lambda t: mu * e0 * math.sin(math.pi * t / tau) ** 2, 0.0, tau,
                   epsrel=1e-12)
    assert area == pytest.approx(math.pi, rel=1e-10)


def test_pulse_support_and_peak():
    p = PiPulse(tau_p=100.0, omega=0.0, E0=2.0, t_start=10.0)
    assert p(9.9) == 0.0
    assert p(110.1) == 0.0
    assert p(60.0) == pytest.approx(2.0, rel=1e-12)   # envelope peak, cos(0 * s)
    assert p.t_end == 110.0


def test_pulse_validation():
    with pytest.raises(ConfigurationError):
        PiPulse(tau_p=0.0, omega=1.0, E0=1.0)
    with pytest.raises(ConfigurationError):
        PiPulse(tau_p=1.0, omega=1.0, E0=-1.0)


def test_sampled_waveform_lookup():
    w = SampledWaveform(t0=0.0, dt=1.0, samples=np.array([1.0, 2.0, 3.0]))
    assert w(-0.5) == 0.0
    assert w(0.5) == 1.0
    assert w(2.5) == 3.0
    assert w(3.5) == 0.0
    assert w.t_end == 3.0


def test_field_signal_composition():
    a = PiPulse(tau_p=10.0, omega=1.0, E0=1.0, t_start=0.0)
    b = PiPulse(tau_p=10.0, omega=2.0, E0=0.5, t_start=20.0)
    sig = FieldSignal((a,)) + FieldSignal((b,))
    assert sig.t_start == 0.0
    assert sig.t_end == 30.0
    assert sig.duration == 30.0
    assert sig.carriers == (1.0, 2.0)
    assert sig.max_amplitude == 1.5
    shifted = sig.shifted(5.0)
    assert shifted.t_start == 5.0
    assert shifted.t_end == 35.0
    t = np.linspace(0.0, 30.0, 7)
    assert np.allclose(render(sig, t), a(t) + b(t))


def test_carriers_empty_with_sampled_component():
    sig = FieldSignal((PiPulse(tau_p=1.0, omega=1.0, E0=1.0),
                       SampledWaveform(0.0, 1.0, np.array([0.1]))))
    assert sig.carriers == ()


def test_min_selective_duration():
    d_omega = to_atomic(4.002e-6, UnitTag.wavenumber_cm)
    assert min_selective_duration(d_omega) == pytest.approx(10.0 / d_omega, rel=1e-14)
    with pytest.raises(UnresolvableTransitionError):
        min_selective_duration(0.0)


def _toy_register(mu):
    coupled = CoupledBasis(energies=np.array([0.0, 1.0e-5]), vectors=np.eye(2),
                           product_basis=[])
    dip = DipoleOperators(d1=np.array([[0.0, mu], [mu, 0.0]]), d2=np.zeros((2, 2)))
    return coupled, dip


def test_pi_pulse_for():
    coupled, dip = _toy_register(0.5)
    p = pi_pulse_for(coupled, dip, 0, 1, tau_p=1e6)
    assert p.omega == pytest.approx(1.0e-5)
    assert p.E0 == pytest.approx(2.0 * math.pi / (1e6 * 0.5), rel=1e-14)


def test_pi_pulse_forbidden():
    coupled, dip = _toy_register(0.0)
    with pytest.raises(ForbiddenTransitionError):
        pi_pulse_for(coupled, dip, 0, 1, tau_p=1e6)


def test_load_pulse_program(tmp_path):
    path = tmp_path / "prog.json"
    path.write_text(json.dumps([
        {"type": "pi", "omega_cm": 0.15, "E0_Vm": 1000.0, "tau_us": 10.0},
        {"type": "pi", "transition": [0, 1], "tau_us": 5.0, "start_us": 10.0},
    ]))
    coupled, dip = _toy_register(0.5)
    sig = load_pulse_program(str(path), coupled, dip)
    assert len(sig.components) == 2
    assert sig.components[0].omega == pytest.approx(
        to_atomic(0.15, UnitTag.wavenumber_cm))
    assert sig.components[1].t_start == pytest.approx(
        to_atomic(10.0, UnitTag.microsecond))

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"type": "chirp"}]))
    with pytest.raises(ConfigurationError):
        load_pulse_program(str(bad))

    needs_register = tmp_path / "needs.json"
    needs_register.write_text(json.dumps([
        {"type": "pi", "transition": [0, 1], "tau_us": 1.0}]))
    with pytest.raises(ConfigurationError):
        load_pulse_program(str(needs_register))


def test_export_field(tmp_path):
    sig = FieldSignal((PiPulse(tau_p=1e5, omega=1e-4, E0=1e-7),))
    out = tmp_path / "field.csv"
    export_field(sig, str(out), n_samples=50)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "time_us,amplitude_Vm"
    assert len(lines) == 51
