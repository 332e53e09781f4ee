"""Multi-target optimal control with phase constraint.

One field drives all 2^N gate transformations plus one supplementary
transfer (the uniform superposition of inputs to the uniform
superposition of outputs) that forces a common phase on every
transition.  Each iteration backward-propagates the Z targets under the
current field and then forward-propagates the Z initial states while the
field is rewritten point-by-point from the instantaneous overlap sum
(immediate feedback).  The phase-sensitive fidelity

    F = (1/Z^2) |sum_n <psi_n(t_f)|phi_f,n>|^2

is tracked per iteration and must not decrease; if a discrete update
overshoots, the iteration is retried with a larger penalty.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dynamics import choose_dt, phase_fidelity
from .errors import MolregError, MonotonicityError
from .pulses import FieldSignal, SampledWaveform, render
from .register import CoupledBasis, DipoleOperators
from .units import UnitTag, from_atomic

MONOTONICITY_SLACK = 1e-10
BACKTRACK_LIMIT = 12


@dataclass
class ControlProblem:
    initials: np.ndarray          # (Z, n) complex, normalized rows
    targets: np.ndarray           # (Z, n) complex, normalized rows
    t_f: float                    # a.u.
    alpha: float | None = None    # penalty; None -> auto-scaled
    guess: FieldSignal | None = None
    max_iterations: int = 500
    target_fidelity: float = 0.999
    dt: float | None = None       # integration grid; None -> resolution rule
    seed_carriers: tuple = ()     # (E0, omega, phase) triples; used if no guess

    def __post_init__(self):
        self.initials = np.atleast_2d(np.asarray(self.initials, dtype=np.complex128))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.complex128))
        if self.initials.shape != self.targets.shape:
            raise MolregError("initials and targets must have matching shapes")
        for name, block in (("initial", self.initials), ("target", self.targets)):
            norms = np.linalg.norm(block, axis=1)
            if not np.allclose(norms, 1.0, atol=1e-8):
                raise MolregError(f"{name} states must be normalized")

    @property
    def Z(self) -> int:
        return self.initials.shape[0]


@dataclass
class OCTResult:
    field: SampledWaveform
    fidelity_history: list[float]
    phases: np.ndarray            # achieved per-transition phases, rad
    iterations: int
    converged: bool
    alpha: float
    j_history: list[float] = field(default_factory=list)

    @property
    def fidelity(self) -> float:
        return self.fidelity_history[-1]

    def signal(self) -> FieldSignal:
        return FieldSignal((self.field,))


def phase_constraint_target(initials: np.ndarray, targets: np.ndarray
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Supplementary transfer: uniform sum of inputs -> uniform sum of outputs.

    The common free phase of the constraint is absorbed by the modulus
    structure of the fidelity functional, so none is added here.
    """
    initials = np.atleast_2d(initials)
    targets = np.atleast_2d(targets)
    k = initials.shape[0]
    sup_i = initials.sum(axis=0) / math.sqrt(k)
    sup_f = targets.sum(axis=0) / math.sqrt(k)
    ni, nf = np.linalg.norm(sup_i), np.linalg.norm(sup_f)
    if ni < 1e-12 or nf < 1e-12:
        raise MolregError("degenerate superposition in phase constraint")
    return sup_i / ni, sup_f / nf


def build_problem(initials: np.ndarray, targets: np.ndarray, t_f: float,
                  **kwargs) -> ControlProblem:
    """Assemble the Z = 2^N + 1 problem with the phase-constraint transfer."""
    sup_i, sup_f = phase_constraint_target(initials, targets)
    all_i = np.vstack([initials, sup_i[None, :]])
    all_f = np.vstack([targets, sup_f[None, :]])
    return ControlProblem(initials=all_i, targets=all_f, t_f=t_f, **kwargs)


def switching(t: np.ndarray, t_f: float) -> np.ndarray:
    """s(t) = sin^2(pi t / t_f): smooth on/off at the boundaries."""
    return np.sin(np.pi * t / t_f) ** 2


def _auto_alpha(problem: ControlProblem, guess_max: float, mu_max: float) -> float:
    # Scale the penalty so the first update is of the order of the guess
    # field (or of a pi pulse with unit dipole when starting from zero):
    # the update is ~ s * mu * |S|/Z / alpha with |S|/Z <~ 1.
    scale = guess_max if guess_max > 0 else 2.0 * math.pi / problem.t_f
    return max(mu_max, 1e-3) / (2.0 * scale)


def _grid(problem: ControlProblem, coupled: CoupledBasis, dip: DipoleOperators):
    if problem.dt is not None:
        dt = problem.dt
    else:
        probe = problem.guess if problem.guess is not None else FieldSignal(())
        dt, _ = choose_dt(coupled, dip, probe, duration=problem.t_f)
    nsteps = max(400, int(math.ceil(problem.t_f / dt)))
    dt = problem.t_f / nsteps
    return dt, nsteps


def _triplets(dip: DipoleOperators):
    d = dip.total
    mask = np.abs(d) > 1e-14
    np.fill_diagonal(mask, False)
    rows, cols = np.nonzero(mask)
    return rows.astype(np.int64), cols.astype(np.int64), d[rows, cols].astype(np.float64)


def optimize(problem: ControlProblem, coupled: CoupledBasis,
             dip: DipoleOperators) -> OCTResult:
    """Iterate the two-point immediate-feedback scheme until converged."""
    dt, nsteps = _grid(problem, coupled, dip)
    rows, cols, vals = _triplets(dip)
    en = coupled.energies
    mids = (np.arange(nsteps) + 0.5) * dt
    s_arr = switching(mids, problem.t_f)
    if problem.guess is not None:
        field_cur = np.asarray(render(problem.guess, mids), dtype=np.float64)
    elif problem.seed_carriers:
        # Weak physical seed: the zero field is a stationary point of the
        # update for real (self-conjugate) target sets, so a guess with
        # the right carriers and quadratures is synthesized instead.
        field_cur = np.zeros(nsteps)
        for e0, omega, phase in problem.seed_carriers:
            field_cur += e0 * np.cos(omega * mids + phase)
        field_cur *= s_arr
    else:
        field_cur = np.zeros(nsteps)
    alpha = problem.alpha if problem.alpha is not None else _auto_alpha(
        problem, float(np.max(np.abs(field_cur))) if nsteps else 0.0,
        float(np.max(np.abs(vals))) if vals.size else 0.0)
    alpha_floor = alpha * 1e-3

    def forward_fidelity(field_arr):
        out = problem.initials.copy()
        for z in range(problem.Z):
            b = out[z].copy()
            pops = np.zeros((2, coupled.size))
            norm = np.zeros(1)
            _kernels.rk4_propagate(b, en, rows, cols, vals, np.zeros((0, 4)),
                                   field_arr, False, 0.0, dt, nsteps,
                                   nsteps, pops, norm)
            out[z] = b
        return out

    finals0 = forward_fidelity(field_cur)
    history = [phase_fidelity(list(finals0), list(problem.targets))]
    j_history: list[float] = []
    finals = finals0
    iterations = 0
    converged = history[0] >= problem.target_fidelity

    while not converged and iterations < problem.max_iterations:
        accepted = False
        # Co-state boundary: targets weighted by the conjugate overlap sum,
        # the functional derivative of F with respect to <psi_n(t_f)|.
        c = np.conj(np.sum(np.einsum(
            "zi,zi->z", finals.conj(), problem.targets))) / problem.Z**2
        if abs(c) < 1e-14:
            c = 1.0 / problem.Z**2
        backtracks = 0
        for _ in range(BACKTRACK_LIMIT):
            psi_f = (c * problem.targets).astype(np.complex128)
            _kernels.rk4_propagate_back(psi_f, en, rows, cols, vals,
                                        field_cur, 0.0, dt, nsteps)
            psi_i = problem.initials.copy()
            field_new = np.empty_like(field_cur)
            _kernels.krotov_forward(psi_i, psi_f, en, rows, cols, vals,
                                    field_cur, field_new, s_arr, alpha, 0.0, dt)
            f_new = phase_fidelity(list(psi_i), list(problem.targets))
            if f_new >= history[-1] - MONOTONICITY_SLACK:
                field_cur = field_new
                finals = psi_i
                history.append(f_new)
                accepted = True
                break
            alpha *= 2.0
            backtracks += 1
        if accepted and backtracks == 0:
            # First-try success: cautiously enlarge the step for speed.
            alpha = max(alpha * 0.8, alpha_floor)
        if not accepted:
            raise MonotonicityError(
                f"fidelity decreased from {history[-1]:.12f} despite penalty "
                f"backtracking (alpha={alpha:.3e}); step or grid too coarse")
        iterations += 1
        fluence = float(np.sum(field_cur**2) * dt)
        overlap = float(np.sum(np.abs(
            np.einsum("zi,zi->z", finals.conj(), problem.targets)) ** 2))
        j_history.append(overlap - alpha * fluence)
        converged = history[-1] >= problem.target_fidelity

    overlaps = np.einsum("zi,zi->z", finals.conj(), problem.targets)
    phases = np.angle(overlaps)
    waveform = SampledWaveform(t0=0.0, dt=dt, samples=field_cur.copy())
    return OCTResult(field=waveform, fidelity_history=history, phases=phases,
                     iterations=iterations, converged=converged, alpha=alpha,
                     j_history=j_history)


def evaluate_J(problem: ControlProblem, field_signal: FieldSignal,
               coupled: CoupledBasis, dip: DipoleOperators,
               alpha: float | None = None) -> tuple[float, float, float]:
    """(J, overlap term, fluence term) for a given field.

    The Lagrange-multiplier middle term vanishes on exact dynamics and is
    not evaluated.
    """
    dt, nsteps = _grid(problem, coupled, dip)
    rows, cols, vals = _triplets(dip)
    mids = (np.arange(nsteps) + 0.5) * dt
    field_arr = np.asarray(render(field_signal, mids), dtype=np.float64)
    finals = problem.initials.copy()
    for z in range(problem.Z):
        b = finals[z].copy()
        pops = np.zeros((2, coupled.size))
        norm = np.zeros(1)
        _kernels.rk4_propagate(b, coupled.energies, rows, cols, vals,
                               np.zeros((0, 4)), field_arr, False,
                               0.0, dt, nsteps, nsteps, pops, norm)
        finals[z] = b
    overlap = float(np.sum(np.abs(
        np.einsum("zi,zi->z", finals.conj(), problem.targets)) ** 2))
    fluence = float(np.sum(field_arr**2) * dt)
    a = alpha if alpha is not None else (problem.alpha or 0.0)
    return overlap - a * fluence, overlap, fluence


def export_convergence(result: OCTResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "fidelity", "J", "fluence"])
        dt = result.field.dt
        fluence = float(np.sum(result.field.samples**2) * dt)
        for i, f in enumerate(result.fidelity_history):
            j = result.j_history[i - 1] if 0 < i <= len(result.j_history) else ""
            writer.writerow([i, f"{f:.12f}", j, f"{fluence:.6e}" if i == len(result.fidelity_history) - 1 else ""])


def export_field_spectrum(result: OCTResult, path: str) -> None:
    """CSV (frequency_cm, magnitude) of the optimized field's DFT."""
    samples = result.field.samples
    dt = result.field.dt
    spec = np.abs(np.fft.rfft(samples)) * dt
    freqs = np.fft.rfftfreq(len(samples), d=dt)  # cycles per a.u. time
    freq_au = 2.0 * np.pi * freqs                # angular a.u.
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_cm", "magnitude"])
        for f, m in zip(freq_au, spec):
            writer.writerow([f"{from_atomic(f, UnitTag.wavenumber_cm):.9e}", f"{m:.9e}"])
