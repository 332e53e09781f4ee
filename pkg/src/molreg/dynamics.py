"""Interaction-picture propagation (fixed-step RK4, no RWA) and fidelities."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import MolregError, PropagationDivergedError
from .pulses import FieldSignal, PiPulse, SampledWaveform
from .register import CoupledBasis, DipoleOperators
from .units import UnitTag, from_atomic

POINTS_PER_PERIOD = 40       # RK4 resolution of the fastest retained phase
WEAK_COUPLING_ANGLE = 1e-3   # |W| * duration below this is dynamically dark
OFF_RESONANT_RATIO = 1e-4    # |W| / detuning below this cannot transfer population
NORM_BUDGET = 1e-8           # beyond this the propagation is rejected
MAX_REFINEMENTS = 4          # dt halvings before giving up on the budget
DEFAULT_SAMPLES = 2000


@dataclass
class StateVector:
    amplitudes: np.ndarray
    time: float = 0.0

    @classmethod
    def basis_state(cls, n: int, index: int, time: float = 0.0) -> "StateVector":
        amp = np.zeros(n, dtype=np.complex128)
        amp[index] = 1.0
        return cls(amplitudes=amp, time=time)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


@dataclass
class PropagationResult:
    final: StateVector
    times: np.ndarray        # a.u., sampled output grid
    populations: np.ndarray  # (n_samples, n_states)
    norm_error: float
    dt: float


def _coupling_mask(energies: np.ndarray, dmat: np.ndarray, field: FieldSignal) -> np.ndarray:
    """Boolean mask of dipole couplings that can matter for this field.

    For analytic pulse programs, a coupling is dropped when it is weak
    (rotation angle |W|*duration below WEAK_COUPLING_ANGLE over the
    program) or far off resonance from every carrier (perturbative
    amplitude ratio |W|/detuning below OFF_RESONANT_RATIO, giving a
    population leak below its square); keeping such couplings would force
    the step size onto phases that cannot move any population.  Sampled
    waveforms have no a-priori carrier, so everything is kept.
    """
    nonzero = np.abs(dmat) > 1e-14
    np.fill_diagonal(nonzero, False)
    carriers = field.carriers
    if not carriers:
        return nonzero
    amp = field.max_amplitude
    duration = field.duration
    if amp <= 0 or duration <= 0:
        return nonzero
    w = amp * np.abs(dmat)
    omega = np.abs(energies[:, None] - energies[None, :])
    detuning = np.min(
        np.stack([np.abs(omega - wc) for wc in carriers], axis=0), axis=0)
    weak = w * duration < WEAK_COUPLING_ANGLE
    off_resonant = w < OFF_RESONANT_RATIO * detuning
    return nonzero & ~(weak | off_resonant)


def choose_dt(coupled: CoupledBasis, dip: DipoleOperators, field: FieldSignal,
              duration: float | None = None) -> tuple[float, np.ndarray]:
    """Step size per the resolution rule, plus the coupling mask used.

    dt = T_min / POINTS_PER_PERIOD with T_min the shortest period among
    the field carriers and the largest Bohr frequency with a retained
    coupling.
    """
    mask = _coupling_mask(coupled.energies, dip.total, field)
    omega = np.abs(coupled.energies[:, None] - coupled.energies[None, :])
    omega_max = float(omega[mask].max()) if mask.any() else 0.0
    for wc in field.carriers:
        omega_max = max(omega_max, wc)
    if duration is None:
        duration = field.duration
    if omega_max <= 0:
        return (duration / 1000.0 if duration > 0 else 1.0), mask
    dt = 2.0 * math.pi / omega_max / POINTS_PER_PERIOD
    if duration > 0:
        dt = min(dt, duration / 400.0)
    return dt, mask


def _sparse_triplets(dmat: np.ndarray, mask: np.ndarray):
    rows, cols = np.nonzero(mask)
    return (rows.astype(np.int64), cols.astype(np.int64),
            dmat[rows, cols].astype(np.float64))


def _pulse_array(field: FieldSignal) -> np.ndarray | None:
    comps = []
    for c in field.components:
        if isinstance(c, PiPulse):
            comps.append([c.E0, c.omega, c.tau_p, c.t_start])
        else:
            return None
    return np.array(comps, dtype=np.float64).reshape(-1, 4)


def propagate(coupled: CoupledBasis, dip: DipoleOperators, field: FieldSignal,
              psi0: StateVector, t0: float, tf: float, dt: float | None = None,
              n_samples: int = DEFAULT_SAMPLES) -> PropagationResult:
    """Integrate the interaction-picture Schroedinger equation on [t0, tf].

    If the norm drifts beyond NORM_BUDGET the run is repeated with the
    step halved, up to MAX_REFINEMENTS times, before being rejected.
    """
    if tf <= t0:
        raise MolregError("tf must exceed t0")
    if abs(psi0.norm - 1.0) > 1e-8:
        raise MolregError("initial state is not normalized")
    if dt is None:
        dt, mask = choose_dt(coupled, dip, field, duration=tf - t0)
    else:
        _, mask = choose_dt(coupled, dip, field, duration=tf - t0)
    result = None
    for _ in range(MAX_REFINEMENTS + 1):
        result = _propagate_once(coupled, dip, field, psi0, t0, tf, dt,
                                 n_samples, mask)
        if result is not None:
            return result
        dt *= 0.5
    raise PropagationDivergedError(
        f"norm error exceeds {NORM_BUDGET} even after {MAX_REFINEMENTS} "
        f"step halvings (final dt = {dt:.3e} a.u.)")


def _propagate_once(coupled, dip, field, psi0, t0, tf, dt, n_samples, mask
                    ) -> PropagationResult | None:
    nsteps = max(1, int(math.ceil((tf - t0) / dt)))
    dt = (tf - t0) / nsteps
    rows, cols, vals = _sparse_triplets(dip.total, mask)

    pulses = _pulse_array(field)
    if pulses is not None:
        field_steps = np.zeros(1)
        use_pulses = True
    else:
        mids = t0 + (np.arange(nsteps) + 0.5) * dt
        from .pulses import render
        field_steps = np.asarray(render(field, mids), dtype=np.float64)
        pulses = np.zeros((0, 4))
        use_pulses = False

    stride = max(1, nsteps // max(1, n_samples))
    nrec = 1 + nsteps // stride + (1 if nsteps % stride else 0)
    pops = np.zeros((nrec + 1, coupled.size))
    norm_out = np.zeros(1)
    b = psi0.amplitudes.astype(np.complex128).copy()
    rec = _kernels.rk4_propagate(b, coupled.energies, rows, cols, vals,
                                 pulses, field_steps, use_pulses,
                                 t0, dt, nsteps, stride, pops, norm_out)
    norm_error = float(norm_out[0])
    if norm_error > NORM_BUDGET:
        return None
    rec_steps = [0] + [m for m in range(1, nsteps + 1)
                       if m % stride == 0 or m == nsteps]
    times = t0 + dt * np.array(rec_steps, dtype=float)
    assert len(times) == rec
    return PropagationResult(
        final=StateVector(amplitudes=b, time=tf),
        times=times,
        populations=pops[:rec],
        norm_error=norm_error,
        dt=dt,
    )


def population_fidelity(results: Mapping[int, PropagationResult],
                        targets: Mapping[int, int]) -> float:
    """min over inputs of the final population on the target state."""
    worst = 1.0
    for inp, target in targets.items():
        amp = results[inp].final.amplitudes
        worst = min(worst, float(np.abs(amp[target]) ** 2))
    return worst


def phase_fidelity(finals: Sequence[np.ndarray | StateVector],
                   targets: Sequence[np.ndarray | StateVector]) -> float:
    """F = (1/Z^2) |sum_n <psi_n(t_f)|phi_f,n>|^2 (phase sensitive)."""
    if len(finals) != len(targets):
        raise MolregError("finals and targets must have equal length")
    z = len(finals)
    acc = 0.0 + 0.0j
    for fin, tgt in zip(finals, targets):
        a = fin.amplitudes if isinstance(fin, StateVector) else np.asarray(fin)
        b = tgt.amplitudes if isinstance(tgt, StateVector) else np.asarray(tgt)
        acc += np.vdot(a, b)
    return float(np.abs(acc) ** 2) / z**2


def export_trajectory(result: PropagationResult, coupled: CoupledBasis, path: str) -> None:
    """CSV: time_us plus one population column per coupled-basis label."""
    headers = ["time_us"]
    for k in range(coupled.size):
        if coupled.labels:
            v1, n1, v2, n2 = coupled.labels[k]
            headers.append(f"pop_{v1}.{n1}.{v2}.{n2}")
        else:
            headers.append(f"pop_{k}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        for t, row in zip(result.times, result.populations):
            writer.writerow([f"{from_atomic(t, UnitTag.microsecond):.9e}"]
                            + [f"{p:.9e}" for p in row])
