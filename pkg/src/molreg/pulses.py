"""Pi-pulse synthesis and field-signal composition.

A pi pulse has a sin^2 envelope and amplitude E0 = 2*pi / (tau_p * mu_if)
in atomic units (hbar = 1): the time-integrated Rabi angle
integral of mu E0 sin^2(pi t / tau_p) dt equals pi exactly.  The
spectral-selectivity rule tau_p > 10/|d_omega| keeps a near-degenerate
twin transition dark.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigurationError, ForbiddenTransitionError,
                     UnresolvableTransitionError)
from .register import CoupledBasis, DipoleOperators, transition
from .units import UnitTag, from_atomic, to_atomic

MU_THRESHOLD = 1e-12  # a.u.; below this a transition counts as forbidden


@dataclass(frozen=True)
class PiPulse:
    tau_p: float       # duration, a.u.
    omega: float       # carrier angular frequency, a.u.
    E0: float          # amplitude, a.u.
    t_start: float = 0.0

    def __post_init__(self):
        if self.tau_p <= 0:
            raise ConfigurationError("pulse duration must be > 0")
        if self.E0 <= 0:
            raise ConfigurationError("pulse amplitude must be > 0")

    @property
    def t_end(self) -> float:
        return self.t_start + self.tau_p

    def __call__(self, t):
        s = np.asarray(t, dtype=float) - self.t_start
        inside = (s >= 0.0) & (s <= self.tau_p)
        env = np.where(inside, np.sin(np.pi * s / self.tau_p) ** 2, 0.0)
        out = self.E0 * env * np.cos(self.omega * s)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class SampledWaveform:
    """Piecewise-constant waveform on a uniform grid (OCT output)."""
    t0: float
    dt: float
    samples: np.ndarray

    @property
    def t_start(self) -> float:
        return self.t0

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * len(self.samples)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.floor((t - self.t0) / self.dt).astype(int)
        inside = (idx >= 0) & (idx < len(self.samples))
        out = np.where(inside, self.samples[np.clip(idx, 0, len(self.samples) - 1)], 0.0)
        return out if out.ndim else float(out)


Component = PiPulse | SampledWaveform


@dataclass(frozen=True)
class FieldSignal:
    components: tuple[Component, ...]

    @property
    def t_start(self) -> float:
        return min((c.t_start for c in self.components), default=0.0)

    @property
    def t_end(self) -> float:
        return max((c.t_end for c in self.components), default=0.0)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def carriers(self) -> tuple[float, ...]:
        """Analytic carrier frequencies; empty if any sampled component."""
        if any(isinstance(c, SampledWaveform) for c in self.components):
            return ()
        return tuple(c.omega for c in self.components)

    @property
    def max_amplitude(self) -> float:
        amp = 0.0
        for c in self.components:
            if isinstance(c, PiPulse):
                amp += c.E0
            else:
                amp += float(np.max(np.abs(c.samples))) if len(c.samples) else 0.0
        return amp

    def shifted(self, offset: float) -> "FieldSignal":
        out = []
        for c in self.components:
            if isinstance(c, PiPulse):
                out.append(PiPulse(c.tau_p, c.omega, c.E0, c.t_start + offset))
            else:
                out.append(SampledWaveform(c.t0 + offset, c.dt, c.samples))
        return FieldSignal(tuple(out))

    def __add__(self, other: "FieldSignal") -> "FieldSignal":
        return FieldSignal(self.components + other.components)


def render(signal: FieldSignal, t):
    """Field amplitude at time(s) t; exact zero outside all supports."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for c in signal.components:
        out = out + c(t)
    return out if out.ndim else float(out)


def pi_pulse_for(coupled: CoupledBasis, dip: DipoleOperators, i: int, j: int,
                 tau_p: float, t_start: float = 0.0) -> PiPulse:
    """Resonant pi pulse for the i <-> j transition."""
    omega, mu = transition(coupled, dip, i, j)
    if mu < MU_THRESHOLD:
        raise ForbiddenTransitionError(
            f"transition {i} <-> {j} has |mu| = {mu:.3e} a.u.; cannot drive a pi pulse")
    return PiPulse(tau_p=tau_p, omega=omega, E0=2.0 * math.pi / (tau_p * mu), t_start=t_start)


def min_selective_duration(delta_omega: float) -> float:
    """Shortest pulse resolving two transitions split by |delta_omega| (a.u.)."""
    if delta_omega == 0:
        raise UnresolvableTransitionError("transitions are exactly degenerate")
    return 10.0 / abs(delta_omega)


def load_pulse_program(path: str, coupled: CoupledBasis | None = None,
                       dip: DipoleOperators | None = None) -> FieldSignal:
    """Pulse-program file: JSON list of {type, ...} entries.

    Entries: {"type": "pi", "omega_cm": w, "E0_Vm": a, "tau_us": T, "start_us": s}
    or {"type": "pi", "transition": [i, j], "tau_us": T, "start_us": s}
    (the latter requires coupled/dip).
    """
    with open(path) as fh:
        entries = json.load(fh)
    comps: list[Component] = []
    for entry in entries:
        if entry.get("type") != "pi":
            raise ConfigurationError(f"unknown pulse type {entry.get('type')!r}")
        tau = to_atomic(float(entry["tau_us"]), UnitTag.microsecond)
        start = to_atomic(float(entry.get("start_us", 0.0)), UnitTag.microsecond)
        if "transition" in entry:
            if coupled is None or dip is None:
                raise ConfigurationError("transition pulses need a built register")
            i, j = entry["transition"]
            comps.append(pi_pulse_for(coupled, dip, int(i), int(j), tau, start))
        else:
            comps.append(PiPulse(
                tau_p=tau,
                omega=to_atomic(float(entry["omega_cm"]), UnitTag.wavenumber_cm),
                E0=to_atomic(float(entry["E0_Vm"]), UnitTag.volt_per_meter),
                t_start=start,
            ))
    return FieldSignal(tuple(comps))


def export_field(signal: FieldSignal, path: str, n_samples: int = 4000) -> None:
    """CSV (time_us, amplitude_Vm) over the signal support."""
    t = np.linspace(signal.t_start, signal.t_end, n_samples)
    amp = render(signal, t)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_us", "amplitude_Vm"])
        for ti, ai in zip(t, amp):
            writer.writerow([f"{from_atomic(ti, UnitTag.microsecond):.9e}",
                             f"{from_atomic(ai, UnitTag.volt_per_meter):.9e}"])
