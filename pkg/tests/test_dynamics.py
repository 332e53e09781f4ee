"""Propagation: closed-form Rabi oracle, independent RK4 oracle, invariants."""
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from molreg.dynamics import (NORM_BUDGET, PropagationResult, StateVector,
                             choose_dt, export_trajectory, phase_fidelity,
                             population_fidelity, propagate)
from molreg.errors import MolregError
from molreg.pulses import FieldSignal, PiPulse, SampledWaveform, render
from molreg.register import CoupledBasis, DipoleOperators


def rabi_final_population(theta):
    """Closed-form transfer for a resonant pulse of Rabi area theta (RWA)."""
    return math.sin(theta / 2.0) ** 2


def test_resonant_pi_pulse_against_closed_form(two_level):
    coupled, dip, omega0, mu = two_level
    tau = 4.0e8   # many carrier periods: RWA error ~ (Omega/omega0)^2 ~ 1e-6
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=2.0 * math.pi / (tau * mu))
    psi0 = StateVector.basis_state(2, 0)
    result = propagate(coupled, dip, FieldSignal((pulse,)), psi0, 0.0, tau)
    p1 = abs(result.final.amplitudes[1]) ** 2
    assert abs(p1 - rabi_final_population(math.pi)) <= 1e-3


def test_half_area_pulse_against_closed_form(two_level):
    coupled, dip, omega0, mu = two_level
    tau = 4.0e8
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=math.pi / (tau * mu))
    psi0 = StateVector.basis_state(2, 0)
    result = propagate(coupled, dip, FieldSignal((pulse,)), psi0, 0.0, tau)
    p1 = abs(result.final.amplitudes[1]) ** 2
    assert abs(p1 - rabi_final_population(math.pi / 2.0)) <= 1e-3


def test_against_independent_schroedinger_integrator(two_level):
    """Full (no-RWA) oracle: scipy's adaptive RK on the same Hamiltonian."""
    coupled, dip, omega0, mu = two_level
    tau = 2.0e7
    e0 = 2.0 * math.pi / (tau * mu)
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=e0)
    signal = FieldSignal((pulse,))
    psi0 = StateVector.basis_state(2, 0)
    result = propagate(coupled, dip, signal, psi0, 0.0, tau)

    h0 = np.diag(coupled.energies)
    d = dip.total

    def rhs(t, y):
        psi = y[:2] + 1j * y[2:]
        h = h0 - float(render(signal, t)) * d
        dpsi = -1j * (h @ psi)
        return np.concatenate([dpsi.real, dpsi.imag])

    y0 = np.array([1.0, 0.0, 0.0, 0.0])
    sol = solve_ivp(rhs, (0.0, tau), y0, rtol=1e-11, atol=1e-12, method="DOP853")
    ref = sol.y[:2, -1] + 1j * sol.y[2:, -1]
    # our state carries the interaction-picture phases already removed at t
    phases = np.exp(-1j * coupled.energies * tau)
    ours = phases * result.final.amplitudes
    assert np.max(np.abs(ours - ref)) < 1e-6


def test_linearity_of_propagation(two_level):
    coupled, dip, omega0, mu = two_level
    tau = 1.0e8
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=1.0 / (tau * mu))
    signal = FieldSignal((pulse,))
    dt, _ = choose_dt(coupled, dip, signal)

    def run(amplitudes):
        psi = StateVector(amplitudes=np.asarray(amplitudes, dtype=complex))
        return propagate(coupled, dip, signal, psi, 0.0, tau, dt=dt).final.amplitudes

    a = run([1.0, 0.0])
    b = run([0.0, 1.0])
    c = run([1.0 / math.sqrt(2), 1.0j / math.sqrt(2)])
    combo = (a + 1.0j * b) / math.sqrt(2)
    assert np.max(np.abs(c - combo)) < 1e-9


def test_norm_conservation(two_level):
    coupled, dip, omega0, mu = two_level
    tau = 4.0e8
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=2.0 * math.pi / (tau * mu))
    psi0 = StateVector.basis_state(2, 0)
    result = propagate(coupled, dip, FieldSignal((pulse,)), psi0, 0.0, tau)
    assert result.norm_error <= NORM_BUDGET
    assert abs(result.final.norm - 1.0) <= 10 * NORM_BUDGET


def test_rk4_convergence_order(two_level):
    """Error against a fine-step reference falls ~dt^4 (order >= 3.5)."""
    coupled, dip, omega0, mu = two_level
    tau = 1.0e8
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=2.0 * math.pi / (tau * mu))
    signal = FieldSignal((pulse,))
    psi0 = StateVector.basis_state(2, 0)

    base_dt, _ = choose_dt(coupled, dip, signal)
    ref = propagate(coupled, dip, signal, psi0, 0.0, tau,
                    dt=base_dt / 64.0).final.amplitudes
    errors = []
    for k in range(3):
        dt = base_dt / 2.0 ** k
        fin = propagate(coupled, dip, signal, psi0, 0.0, tau, dt=dt).final.amplitudes
        errors.append(np.max(np.abs(fin - ref)))
    orders = [math.log2(errors[k] / errors[k + 1]) for k in range(2)]
    assert min(orders) >= 3.5


def test_choose_dt_resolution_rule(two_level):
    coupled, dip, omega0, mu = two_level
    tau = 1.0e9
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=1e-9)
    dt, mask = choose_dt(coupled, dip, FieldSignal((pulse,)))
    assert dt <= 2.0 * math.pi / omega0 / 40.0 * (1 + 1e-12)
    assert dt <= tau / 400.0
    assert mask[0, 1] and mask[1, 0]
    assert not mask[0, 0]


def test_coupling_mask_drops_far_off_resonant(two_level):
    """A very detuned weak line is masked out for analytic pulse programs."""
    coupled, dip, omega0, mu = two_level
    coupled3 = CoupledBasis(
        energies=np.array([0.0, omega0, 2000.0 * omega0]),
        vectors=np.eye(3), product_basis=[])
    d = np.zeros((3, 3))
    d[0, 1] = d[1, 0] = mu
    d[0, 2] = d[2, 0] = 1e-6 * mu   # weak and ~2000 omega0 off resonance
    dip3 = DipoleOperators(d1=d, d2=np.zeros((3, 3)))
    tau = 4.0e8
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=2.0 * math.pi / (tau * mu))
    dt, mask = choose_dt(coupled3, dip3, FieldSignal((pulse,)))
    assert mask[0, 1]
    assert not mask[0, 2]
    # sampled waveforms have no carriers: everything nonzero is kept
    wave = SampledWaveform(0.0, tau / 100, np.full(100, 1e-9))
    _, mask_w = choose_dt(coupled3, dip3, FieldSignal((wave,)))
    assert mask_w[0, 2]


def test_propagate_validation(two_level):
    coupled, dip, omega0, mu = two_level
    pulse = PiPulse(tau_p=1e8, omega=omega0, E0=1e-9)
    psi0 = StateVector.basis_state(2, 0)
    with pytest.raises(MolregError):
        propagate(coupled, dip, FieldSignal((pulse,)), psi0, 1e8, 1e7)
    bad = StateVector(amplitudes=np.array([0.5, 0.0], dtype=complex))
    with pytest.raises(MolregError):
        propagate(coupled, dip, FieldSignal((pulse,)), bad, 0.0, 1e8)


def test_population_fidelity():
    res = {0: PropagationResult(
        final=StateVector(np.array([0.1, 0.99], dtype=complex)),
        times=np.zeros(1), populations=np.zeros((1, 2)), norm_error=0.0, dt=1.0)}
    assert population_fidelity(res, {0: 1}) == pytest.approx(0.99 ** 2)


def test_phase_fidelity_properties():
    rng = np.random.default_rng(7)
    z = 4
    finals = [v / np.linalg.norm(v) for v in
              rng.normal(size=(z, 6)) + 1j * rng.normal(size=(z, 6))]
    # identical sets with a common global phase: F = 1
    targets = [np.exp(1j * 0.73) * f for f in finals]
    assert phase_fidelity(finals, targets) == pytest.approx(1.0, abs=1e-12)
    # a relative phase on one member lowers F below 1
    skew = list(targets)
    skew[0] = np.exp(1j * math.pi / 2) * skew[0]
    assert phase_fidelity(finals, skew) < 0.9
    # direct-summation oracle
    acc = sum(np.vdot(f, t) for f, t in zip(finals, targets))
    assert phase_fidelity(finals, targets) == pytest.approx(
        abs(acc) ** 2 / z ** 2, rel=1e-12)
    with pytest.raises(MolregError):
        phase_fidelity(finals, targets[:2])


def test_export_trajectory(tmp_path, two_level):
    coupled, dip, omega0, mu = two_level
    tau = 1.0e8
    pulse = PiPulse(tau_p=tau, omega=omega0, E0=2.0 * math.pi / (tau * mu))
    psi0 = StateVector.basis_state(2, 0)
    result = propagate(coupled, dip, FieldSignal((pulse,)), psi0, 0.0, tau,
                       n_samples=20)
    out = tmp_path / "traj.csv"
    export_trajectory(result, coupled, str(out))
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("time_us,pop_")
    assert len(lines) == len(result.times) + 1
