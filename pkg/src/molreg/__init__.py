"""molreg: quantum logic on dipole-dipole coupled polar molecules.

Two trapped polar molecules in a static electric field form a register
whose rotational/vibrational eigenstates encode qubits.  The package
builds the coupled-basis Hamiltonian, propagates the time-dependent
Schroedinger equation under shaped microwave/IR pulses without the
rotating-wave approximation, synthesizes pi-pulse gate programs (NOT,
CNOT, Toffoli, a full binary adder stage) and optimizes phase-correct
multi-target control fields (CNOT, Hadamard-layer gates, Deutsch-Jozsa).
"""
__version__ = "0.1.0"
