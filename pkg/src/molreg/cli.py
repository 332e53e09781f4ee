"""Command-line orchestrator.

Usage: molreg SUBCOMMAND [--config FILE] [overrides...]

Subcommands: spectrum, pulse, propagate, gate, adder, dj, oct, verify.
Configuration is a JSON file (see data/scenarios/ for examples); every
register parameter can be overridden on the command line.  Each run
writes a manifest echoing the fully resolved configuration next to its
CSV artifacts; --plot renders a PNG beside each CSV.

Exit codes: 0 success, 1 degraded fidelity, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import circuits, oct, report
from .dynamics import StateVector, export_trajectory, propagate
from .errors import InconclusiveError, MolregError
from .molecule import builtin_molecule, load_molecule
from .pulses import (FieldSignal, SampledWaveform, export_field,
                     load_pulse_program, pi_pulse_for)
from .register import (ProductState, RegisterConfig, build_register,
                       export_spectrum)
from .units import UnitTag, from_atomic, to_atomic

OUTPUT_DIR_ENV = "MOLREG_OUTPUT_DIR"

DEFAULT_CONFIG = {
    "molecule1": "nacs",
    "molecule2": "nacs",
    "register": {
        "R_nm": 300.0,
        "E1_kV_cm": 2.0,
        "E2_kV_cm": 1.5,
        "truncation": {"0": 4},
    },
    "output_dir": "molreg_out",
    "plot": False,
}


def _load_config(path: str | None) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise MolregError(f"cannot read config {path}: {exc}") from exc
        for key, value in user.items():
            if key == "register" and isinstance(value, dict):
                cfg["register"].update(value)
            else:
                cfg[key] = value
    return cfg


def _molecule(spec: str):
    if spec.endswith(".json") or "/" in spec:
        return load_molecule(spec)
    return builtin_molecule(spec)


def _register(cfg: dict):
    reg = cfg["register"]
    config = RegisterConfig(
        mol1=_molecule(cfg["molecule1"]),
        mol2=_molecule(cfg["molecule2"]),
        R=to_atomic(float(reg["R_nm"]), UnitTag.nanometer),
        E1=to_atomic(float(reg["E1_kV_cm"]), UnitTag.kilovolt_per_cm),
        E2=to_atomic(float(reg["E2_kV_cm"]), UnitTag.kilovolt_per_cm),
        truncation={int(v): int(n) for v, n in reg["truncation"].items()},
    )
    return config, *build_register(config)


def _outdir(cfg: dict) -> Path:
    path = Path(os.environ.get(OUTPUT_DIR_ENV, cfg["output_dir"]))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(cfg: dict, outdir: Path, command: str, extra: dict) -> None:
    manifest = {"command": command, "resolved_config": cfg, **extra}
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)


def _save_waveform(wf: SampledWaveform, path: Path) -> None:
    np.savez(path, t0=wf.t0, dt=wf.dt, samples=wf.samples)


def _load_waveform(path: str) -> FieldSignal:
    data = np.load(path)
    return FieldSignal((SampledWaveform(
        t0=float(data["t0"]), dt=float(data["dt"]),
        samples=np.asarray(data["samples"], dtype=float)),))


def _durations_au(block: dict) -> dict[str, float]:
    return {name: to_atomic(float(us), UnitTag.microsecond)
            for name, us in (block or {}).items()}


# --- subcommand implementations ---------------------------------------------

def cmd_spectrum(cfg: dict, args) -> int:
    _, basis, coupled, dip = _register(cfg)
    outdir = _outdir(cfg)
    export_spectrum(coupled, str(outdir / "spectrum.csv"))
    if cfg["plot"]:
        report.plot_spectrum(coupled, str(outdir / "spectrum.png"))
    _write_manifest(cfg, outdir, "spectrum", {"n_states": coupled.size})
    print(f"spectrum: {coupled.size} states -> {outdir / 'spectrum.csv'}")
    return 0


def cmd_pulse(cfg: dict, args) -> int:
    _, basis, coupled, dip = _register(cfg)
    outdir = _outdir(cfg)
    block = cfg.get("pulse", {})
    i = int(args.i if args.i is not None else block.get("i"))
    j = int(args.j if args.j is not None else block.get("j"))
    tau_us = float(args.duration_us or block.get("duration_us"))
    pulse = pi_pulse_for(coupled, dip, i, j,
                         to_atomic(tau_us, UnitTag.microsecond))
    signal = FieldSignal((pulse,))
    export_field(signal, str(outdir / "field.csv"))
    if cfg["plot"]:
        report.plot_field(signal, str(outdir / "field.png"))
    _write_manifest(cfg, outdir, "pulse", {
        "omega_cm": from_atomic(pulse.omega, UnitTag.wavenumber_cm),
        "E0_V_m": from_atomic(pulse.E0, UnitTag.volt_per_meter),
        "tau_us": tau_us,
    })
    print(f"pulse {i}<->{j}: omega = "
          f"{from_atomic(pulse.omega, UnitTag.wavenumber_cm):.6f} cm^-1, "
          f"E0 = {from_atomic(pulse.E0, UnitTag.volt_per_meter):.6g} V/m")
    return 0


def cmd_propagate(cfg: dict, args) -> int:
    _, basis, coupled, dip = _register(cfg)
    outdir = _outdir(cfg)
    block = cfg.get("propagate", {})
    program = args.program or block.get("program")
    if not program:
        raise MolregError("propagate needs a pulse-program file")
    signal = load_pulse_program(program, coupled, dip)
    label = block.get("initial", args.initial or "0,0,0,0")
    if isinstance(label, str):
        label = [int(x) for x in label.split(",")]
    index = coupled.index_of(ProductState(*label))
    psi = StateVector.basis_state(coupled.size, index)
    result = propagate(coupled, dip, signal, psi,
                       t0=signal.t_start, tf=signal.t_end)
    export_trajectory(result, coupled, str(outdir / "trajectory.csv"))
    export_field(signal, str(outdir / "field.csv"))
    if cfg["plot"]:
        report.plot_populations(result, coupled, str(outdir / "trajectory.png"))
        report.plot_field(signal, str(outdir / "field.png"))
    _write_manifest(cfg, outdir, "propagate", {
        "initial": list(label), "norm_error": result.norm_error})
    print(f"propagate: norm error {result.norm_error:.3e}")
    return 0


def _encoding_for(width, coupled):
    return (circuits.dj_encoding(coupled) if width == 2
            else circuits.adder_encoding(coupled))


def cmd_gate(cfg: dict, args) -> int:
    _, basis, coupled, dip = _register(cfg)
    outdir = _outdir(cfg)
    block = cfg.get("gate", {})
    name = (args.name or block.get("name", "CNOT")).upper()
    width = 2 if name == "CNOT" else 3
    if name == "NOT" and int(block.get("width", 3)) == 2:
        width = 2
    encoding = _encoding_for(width, coupled)
    duration = None
    dur_us = args.duration_us or block.get("duration_us")
    if dur_us is not None:
        duration = to_atomic(float(dur_us), UnitTag.microsecond)
    gate = circuits.make_gate(name, encoding, coupled, dip, duration)
    t0 = time.perf_counter()
    fidelities = circuits.verify_truth_table(gate, encoding, coupled, dip)
    wall = time.perf_counter() - t0

    export_field(gate.signal, str(outdir / f"{name.lower()}_field.csv"))
    with open(outdir / f"{name.lower()}_fidelity.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["input", "output", "fidelity"])
        for bits, fid in fidelities.items():
            writer.writerow([bits, gate.logical[bits], f"{fid:.9f}"])
    for bits in encoding.strings():
        psi = StateVector.basis_state(coupled.size, encoding.index(coupled, bits))
        result = circuits.apply_gate(gate, coupled, dip, psi)
        export_trajectory(result, coupled,
                          str(outdir / f"{name.lower()}_traj_{bits}.csv"))
        if cfg["plot"]:
            report.plot_populations(
                result, coupled, str(outdir / f"{name.lower()}_traj_{bits}.png"),
                title=f"{name} |{bits}>")
    if cfg["plot"]:
        report.plot_field(gate.signal, str(outdir / f"{name.lower()}_field.png"))
    worst = min(fidelities.values())
    _write_manifest(cfg, outdir, "gate", {
        "gate": name,
        "duration_us": from_atomic(gate.duration, UnitTag.microsecond),
        "pulses": len(gate.signal.components),
        "fidelities": fidelities,
        "wall_time_s": wall,
    })
    for bits, fid in fidelities.items():
        print(f"gate {name}: |{bits}> -> |{gate.logical[bits]}>  F = {fid:.6f}")
    return 0 if worst >= 0.9 else 1


def cmd_adder(cfg: dict, args) -> int:
    _, basis, coupled, dip = _register(cfg)
    outdir = _outdir(cfg)
    block = cfg.get("adder", {})
    mode = f"ADD{int(args.mode if args.mode is not None else block.get('mode', 1))}"
    c_i = int(args.c if args.c is not None else block.get("c", 0))
    b_i = int(args.b if args.b is not None else block.get("b", 0))
    q3 = int(args.q3 if args.q3 is not None else block.get("q3", 0))
    initialize = bool(block.get("initialize", False) or args.initialize)
    durations = _durations_au(block.get("durations_us"))
    encoding = circuits.adder_encoding(coupled)
    result = circuits.run_adder(mode, c_i, b_i, encoding, coupled, dip,
                                durations=durations, initialize=initialize,
                                q3=q3)
    for gate_name, traj in zip(result.gate_names, result.trajectories):
        stem = f"adder_{gate_name.lower()}"
        export_trajectory(traj, coupled, str(outdir / f"{stem}.csv"))
        if cfg["plot"]:
            report.plot_populations(traj, coupled, str(outdir / f"{stem}.png"),
                                    title=f"{mode} {gate_name}")
    _write_manifest(cfg, outdir, "adder", {
        "mode": mode, "c_i": c_i, "b_i": b_i, "q3": q3,
        "output_bits": result.output_bits,
        "s_i": result.s_i, "c_out": result.c_out,
        "gate_fidelities": result.gate_fidelities,
        "fidelity": result.fidelity,
        "degraded": result.degraded,
        "wall_time_s": result.wall_time,
    })
    print(f"{mode}: |{result.input_bits}> -> |{result.output_bits}> "
          f"(s_i={result.s_i}, c_out={result.c_out})  F = {result.fidelity:.6f}")
    return 1 if result.degraded else 0


def cmd_dj(cfg: dict, args) -> int:
    _, basis, coupled, dip = _register(cfg)
    outdir = _outdir(cfg)
    block = cfg.get("dj", {})
    oracle = (args.oracle or block.get("oracle", "balanced")).lower()
    if oracle == "const0":
        f = {0: 0, 1: 0}
    elif oracle == "const1":
        f = {0: 1, 1: 1}
    elif oracle == "balanced":
        f = {0: 1, 1: 0}
    else:
        raise MolregError(f"unknown oracle {oracle!r}")
    encoding = circuits.dj_encoding(coupled)
    fields: dict[str, FieldSignal | None] = {}
    for key in ("not_hadhad", "had_x"):
        path = block.get(f"{key}_field")
        if not path:
            raise MolregError(f"dj needs an optimized field file for {key!r}")
        fields[key] = _load_waveform(path)
    if oracle == "const0":
        fields["uf"] = None
    elif oracle == "const1":
        # NOT on y: a single short pulse covers both nearly degenerate lines.
        i0 = encoding.index(coupled, "00")
        i1 = encoding.index(coupled, "01")
        j0 = encoding.index(coupled, "10")
        j1 = encoding.index(coupled, "11")
        w_a = abs(coupled.energies[i1] - coupled.energies[i0])
        w_b = abs(coupled.energies[j1] - coupled.energies[j0])
        tau = to_atomic(float(block.get("uf_tau_ns", 63.0)), UnitTag.nanosecond)
        pulse = pi_pulse_for(coupled, dip, i0, i1, tau)
        from .pulses import PiPulse
        fields["uf"] = FieldSignal((PiPulse(
            tau_p=tau, omega=0.5 * (w_a + w_b), E0=pulse.E0),))
    else:
        path = block.get("uf_field")
        if not path:
            raise MolregError("dj balanced oracle needs 'uf_field'")
        fields["uf"] = _load_waveform(path)
    try:
        result = circuits.run_deutsch_jozsa(f, fields, encoding, coupled, dip)
    except InconclusiveError as exc:
        print(f"dj: inconclusive ({exc})")
        return 1
    ideal = circuits.dj_ideal_probability(f)
    _write_manifest(cfg, outdir, "dj", {
        "oracle": oracle, "answer": result.answer, "p_x1": result.p_x1,
        "ideal_p_x1": ideal})
    for k, traj in enumerate(result.trajectories):
        export_trajectory(traj, coupled, str(outdir / f"dj_step{k}.csv"))
        if cfg["plot"]:
            report.plot_populations(traj, coupled, str(outdir / f"dj_step{k}.png"))
    print(f"dj[{oracle}]: answer = {result.answer}  P(x=1) = {result.p_x1:.4f} "
          f"(ideal {ideal:.2f})")
    return 0


def cmd_oct(cfg: dict, args) -> int:
    _, basis, coupled, dip = _register(cfg)
    outdir = _outdir(cfg)
    block = cfg.get("oct", {})
    gate = (args.gate or block.get("gate", "cnot")).lower()
    encoding = circuits.dj_encoding(coupled)
    gauge = circuits.logical_gauge(encoding, coupled, dip)
    n = coupled.size

    t_f_ns = block.get("t_f_ns")
    if t_f_ns is not None:
        t_f = to_atomic(float(t_f_ns), UnitTag.nanosecond)
    elif gate == "cnot":
        # default to the resonant pi-pulse duration for this register
        t_f = circuits.make_gate("CNOT", encoding, coupled, dip).duration
    else:
        t_f = to_atomic(63.0, UnitTag.nanosecond)

    def ket(coeffs: dict[str, complex]) -> np.ndarray:
        v = np.zeros(n, dtype=complex)
        for bits, c in coeffs.items():
            v[encoding.index(coupled, bits)] = c * gauge[bits]
        return v / np.linalg.norm(v)

    initials = np.array([ket({b: 1.0}) for b in encoding.strings()])
    targets = oct_targets(gate, ket)

    guess = None
    guess_kind = args.guess or block.get("guess")
    if guess_kind is None and gate == "cnot":
        guess_kind = "pi"
    if guess_kind == "pi":
        cnot = circuits.make_gate("CNOT", encoding, coupled, dip, t_f)
        guess = cnot.signal
    seeds = () if guess is not None else oct_seed_carriers(
        gate, encoding, coupled, dip, t_f)
    problem = oct.build_problem(
        initials, targets, t_f, guess=guess, seed_carriers=seeds,
        max_iterations=int(block.get("max_iterations", 500)),
        target_fidelity=float(block.get("target_fidelity", 0.99)),
        alpha=block.get("alpha"),
        dt=block.get("dt_au"),
    )
    result = oct.optimize(problem, coupled, dip)

    stem = f"oct_{gate}"
    _save_waveform(result.field, outdir / f"{stem}_field.npz")
    export_field(result.signal(), str(outdir / f"{stem}_field.csv"))
    oct.export_field_spectrum(result, str(outdir / f"{stem}_spectrum.csv"))
    oct.export_convergence(result, str(outdir / f"{stem}_convergence.csv"))
    if cfg["plot"]:
        report.plot_field(result.signal(), str(outdir / f"{stem}_field.png"))
        report.plot_convergence(result.fidelity_history,
                                str(outdir / f"{stem}_convergence.png"))
        report.plot_field_fft(result.field.samples, result.field.dt,
                              str(outdir / f"{stem}_fft.png"), max_cm=0.5)
    _write_manifest(cfg, outdir, "oct", {
        "gate": gate, "fidelity": result.fidelity,
        "iterations": result.iterations, "converged": result.converged,
        "phases_pi": [p / np.pi for p in result.phases],
    })
    print(f"oct[{gate}]: F = {result.fidelity:.6f} after {result.iterations} "
          f"iterations (converged: {result.converged})")
    return 0 if result.converged else 1


def oct_targets(gate: str, ket) -> np.ndarray:
    """Target states per input 00, 01, 10, 11 for the optimized gates.

    not_hadhad is NOT on y followed by a Hadamard on each qubit,
    |xy> -> H|x> (x) H|NOT y>; had_x is a Hadamard on x alone.  Both are
    local transformations of the two-qubit logical space.
    """
    h = 0.5
    r = 1.0 / np.sqrt(2.0)
    if gate == "cnot":
        return np.array([ket({"00": 1}), ket({"01": 1}),
                         ket({"11": 1}), ket({"10": 1})])
    if gate == "not_hadhad":
        return np.array([
            ket({"00": h, "01": -h, "10": h, "11": -h}),
            ket({"00": h, "01": h, "10": h, "11": h}),
            ket({"00": h, "01": -h, "10": -h, "11": h}),
            ket({"00": h, "01": h, "10": -h, "11": -h}),
        ])
    if gate == "had_x":
        return np.array([
            ket({"00": r, "10": r}),
            ket({"01": r, "11": r}),
            ket({"00": r, "10": -r}),
            ket({"01": r, "11": -r}),
        ])
    raise MolregError(f"unknown oct gate {gate!r}")


def oct_seed_carriers(gate: str, encoding, coupled, dip, t_f: float) -> tuple:
    """Weak local-rotation seed for gates optimized without a guess field.

    The zero field is a stationary point of the update for these real
    target sets, so the optimizer is seeded with the analytic local
    approximation: a pi-area carrier on the molecule-1 rotational line
    (realizing X up to phase) and, for not_hadhad, a quadrature
    half-area carrier on the molecule-2 line (realizing H*X).  The
    quadrature phases are calibrated for the positive-dipole gauge.
    """
    from .register import transition

    def line(bit: int):
        pairs = ([("00", "10"), ("01", "11")] if bit == 0
                 else [("00", "01"), ("10", "11")])
        ws, mus = [], []
        for a, b in pairs:
            w, mu = transition(coupled, dip,
                               encoding.index(coupled, a),
                               encoding.index(coupled, b))
            ws.append(w)
            mus.append(mu)
        return float(np.mean(ws)), float(np.mean(mus))

    if gate == "not_hadhad":
        w1, mu1 = line(0)
        w2, mu2 = line(1)
        return ((2.0 * np.pi / (t_f * mu1), w1, 0.0),
                (np.pi / (t_f * mu2), w2, 1.5 * np.pi))
    if gate == "had_x":
        w1, mu1 = line(0)
        return ((2.0 * np.pi / (t_f * mu1), w1, 0.0),)
    return ()


def cmd_verify(cfg: dict, args) -> int:
    """Logical-level checks without dynamics."""
    failures = 0
    for mode in ("ADD0", "ADD1"):
        for k in range(8):
            bits = format(k, "03b")
            out = circuits.adder_truth_row(mode, bits)
            c, b, q3 = int(bits[0]), int(bits[1]), int(bits[2])
            if mode == "ADD0":
                s, cout = c ^ b, c & b
            else:
                s, cout = 1 ^ c ^ b, c | b
            want = f"{c}{s}{cout ^ q3}"
            ok = out == want
            failures += not ok
            print(f"verify {mode} |{bits}> -> |{out}> "
                  f"(expected |{want}>) {'ok' if ok else 'FAIL'}")
    for oracle, f in (("const0", {0: 0, 1: 0}), ("const1", {0: 1, 1: 1}),
                      ("balanced", {0: 1, 1: 0})):
        p = circuits.dj_ideal_probability(f)
        answer = "balanced" if p > 0.5 else "constant"
        want = "balanced" if f[0] != f[1] else "constant"
        ok = answer == want
        failures += not ok
        print(f"verify dj[{oracle}]: P(x=1) = {p:.2f} -> {answer} "
              f"{'ok' if ok else 'FAIL'}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molreg",
        description="Two-molecule quantum register simulator and pulse designer")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--output-dir", help="artifact directory")
        p.add_argument("--plot", action="store_true",
                       help="render a PNG beside each CSV")
        p.add_argument("--molecule1")
        p.add_argument("--molecule2")
        p.add_argument("--R-nm", type=float, dest="r_nm")
        p.add_argument("--E1-kV-cm", type=float, dest="e1")
        p.add_argument("--E2-kV-cm", type=float, dest="e2")

    p = sub.add_parser("spectrum", help="coupled-basis spectrum CSV")
    common(p)
    p = sub.add_parser("pulse", help="synthesize one resonant pi pulse")
    common(p)
    p.add_argument("--i", type=int)
    p.add_argument("--j", type=int)
    p.add_argument("--duration-us", type=float)
    p = sub.add_parser("propagate", help="integrate a pulse-program file")
    common(p)
    p.add_argument("--program")
    p.add_argument("--initial", help="product label v1,N1,v2,N2")
    p = sub.add_parser("gate", help="build a gate and verify its truth table")
    common(p)
    p.add_argument("--name")
    p.add_argument("--duration-us", type=float)
    p = sub.add_parser("adder", help="run one adder row end to end")
    common(p)
    p.add_argument("--mode", type=int, choices=(0, 1))
    p.add_argument("--c", type=int, choices=(0, 1))
    p.add_argument("--b", type=int, choices=(0, 1))
    p.add_argument("--q3", type=int, choices=(0, 1),
                   help="third-qubit input (reversibility rows)")
    p.add_argument("--initialize", action="store_true")
    p = sub.add_parser("dj", help="run the Deutsch-Jozsa circuit")
    common(p)
    p.add_argument("--oracle", choices=("const0", "const1", "balanced"))
    p = sub.add_parser("oct", help="optimize a phase-correct field")
    common(p)
    p.add_argument("--gate", choices=("cnot", "not_hadhad", "had_x"))
    p.add_argument("--guess", choices=("pi", "zero"))
    p = sub.add_parser("verify", help="logical truth-table checks, no dynamics")
    common(p)
    return parser


COMMANDS = {
    "spectrum": cmd_spectrum,
    "pulse": cmd_pulse,
    "propagate": cmd_propagate,
    "gate": cmd_gate,
    "adder": cmd_adder,
    "dj": cmd_dj,
    "oct": cmd_oct,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = _load_config(getattr(args, "config", None))
        if getattr(args, "output_dir", None):
            cfg["output_dir"] = args.output_dir
        if getattr(args, "plot", False):
            cfg["plot"] = True
        for attr, key in (("molecule1", "molecule1"), ("molecule2", "molecule2")):
            if getattr(args, attr, None):
                cfg[key] = getattr(args, attr)
        if getattr(args, "r_nm", None) is not None:
            cfg["register"]["R_nm"] = args.r_nm
        if getattr(args, "e1", None) is not None:
            cfg["register"]["E1_kV_cm"] = args.e1
        if getattr(args, "e2", None) is not None:
            cfg["register"]["E2_kV_cm"] = args.e2
        return COMMANDS[args.command](cfg, args)
    except MolregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
