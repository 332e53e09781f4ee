"""Figure rendering for CLI artifacts.

Every CSV the CLI writes can be paired with a PNG; rendering is
optional and always goes through the Agg backend so runs stay headless.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dynamics import PropagationResult
from .pulses import FieldSignal, render
from .register import CoupledBasis
from .units import UnitTag, from_atomic

POPULATION_FLOOR = 1e-3   # hide states that never get populated


def plot_populations(result: PropagationResult, coupled: CoupledBasis,
                     path: str, title: str = "") -> None:
    t_us = from_atomic(result.times, UnitTag.microsecond)
    fig, ax = plt.subplots(figsize=(7, 4))
    for k in range(coupled.size):
        pop = result.populations[:, k]
        if pop.max() < POPULATION_FLOOR:
            continue
        if coupled.labels:
            v1, n1, v2, n2 = coupled.labels[k]
            label = rf"$|{v1}\,{n1}\,{v2}\,{n2}\rangle$"
        else:
            label = str(k)
        ax.plot(t_us, pop, label=label, lw=1.2)
    ax.set_xlabel(r"time ($\mu$s)")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7, ncol=2, loc="center right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_field(signal: FieldSignal, path: str, n_samples: int = 4000,
               title: str = "") -> None:
    t = np.linspace(signal.t_start, signal.t_end, n_samples)
    amp = render(signal, t)
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(from_atomic(t, UnitTag.microsecond),
            from_atomic(np.asarray(amp), UnitTag.volt_per_meter), lw=0.6)
    ax.set_xlabel(r"time ($\mu$s)")
    ax.set_ylabel("field (V/m)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_spectrum(coupled: CoupledBasis, path: str, title: str = "") -> None:
    energies = from_atomic(coupled.energies, UnitTag.wavenumber_cm)
    fig, ax = plt.subplots(figsize=(5, 6))
    for k, e in enumerate(energies):
        ax.hlines(e, 0.1, 0.9, lw=1.0)
        if coupled.labels:
            v1, n1, v2, n2 = coupled.labels[k]
            ax.annotate(f"{v1}{n1}{v2}{n2}", xy=(0.92, e), fontsize=6,
                        va="center")
    ax.set_xticks([])
    ax.set_ylabel(r"energy (cm$^{-1}$)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_convergence(history, path: str, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(len(history)), history, marker=".", ms=3, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("fidelity F")
    ax.set_ylim(0, 1.02)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_field_fft(samples: np.ndarray, dt: float, path: str,
                   title: str = "", max_cm: float | None = None) -> None:
    spec = np.abs(np.fft.rfft(samples)) * dt
    freq_au = 2.0 * np.pi * np.fft.rfftfreq(len(samples), d=dt)
    freq_cm = from_atomic(freq_au, UnitTag.wavenumber_cm)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(freq_cm, spec, lw=0.8)
    if max_cm is not None:
        ax.set_xlim(0, max_cm)
    ax.set_xlabel(r"frequency (cm$^{-1}$)")
    ax.set_ylabel("|FT| (a.u.)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
