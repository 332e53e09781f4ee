"""Single-molecule level data: vibration x rotation plus dipole couplings.

The interatomic potential is never integrated here; vibrational structure
enters as tabulated (E_v, B_v, mu) data loaded from a JSON file.  The
shipped NaCs defaults pin the permanent dipole (4.6 D) and the v=0 -> v=2
carrier (196.43 cm^-1); B_v and the v0-v2 transition dipole are free
calibration parameters of the data file (see README).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

from .errors import MoleculeLoadError, MolregError
from .units import UnitTag, to_atomic


@dataclass(frozen=True)
class VibLevel:
    v: int
    energy: float      # a.u., zero at v=0
    rot_const: float   # B_v, a.u.


@dataclass(frozen=True)
class RotState:
    N: int
    mN: int = 0

    def __post_init__(self):
        if self.N < 0:
            raise MolregError(f"negative rotational quantum number N={self.N}")
        if self.mN != 0:
            # Planar motion with the field along Z restricts us to mN = 0.
            raise MolregError("only mN = 0 states are supported")


@dataclass(frozen=True)
class MoleculeSpec:
    name: str
    levels: tuple[VibLevel, ...]
    mu_perm: dict[int, float] = field(default_factory=dict)       # v -> a.u.
    mu_trans: dict[tuple[int, int], float] = field(default_factory=dict)

    def level(self, v: int) -> VibLevel:
        for lv in self.levels:
            if lv.v == v:
                return lv
        raise MolregError(f"{self.name}: vibrational level v={v} not listed")

    @property
    def vib_numbers(self) -> tuple[int, ...]:
        return tuple(lv.v for lv in self.levels)

    def dipole(self, v1: int, v2: int) -> float:
        """mu matrix element between vibrational manifolds (a.u.)."""
        if v1 == v2:
            return self.mu_perm.get(v1, 0.0)
        key = (min(v1, v2), max(v1, v2))
        return self.mu_trans.get(key, 0.0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "levels": [
                {
                    "v": lv.v,
                    "energy_cm": lv.energy / to_atomic(1.0, UnitTag.wavenumber_cm),
                    "B_cm": lv.rot_const / to_atomic(1.0, UnitTag.wavenumber_cm),
                }
                for lv in self.levels
            ],
            "mu_perm_debye": {
                str(v): mu / to_atomic(1.0, UnitTag.debye)
                for v, mu in self.mu_perm.items()
            },
            "mu_trans_debye": [
                {"v1": v1, "v2": v2, "value": mu / to_atomic(1.0, UnitTag.debye)}
                for (v1, v2), mu in self.mu_trans.items()
            ],
        }


def _validate(spec: MoleculeSpec) -> MoleculeSpec:
    if not spec.levels:
        raise MoleculeLoadError(f"{spec.name}: 'levels' is empty")
    vs = [lv.v for lv in spec.levels]
    if sorted(vs) != vs or len(set(vs)) != len(vs):
        raise MoleculeLoadError(f"{spec.name}: levels must be sorted and unique in v")
    energies = [lv.energy for lv in spec.levels]
    if any(e2 <= e1 for e1, e2 in zip(energies, energies[1:])):
        raise MoleculeLoadError(f"{spec.name}: field 'levels.energy_cm' not strictly increasing in v")
    for lv in spec.levels:
        if lv.rot_const <= 0:
            raise MoleculeLoadError(f"{spec.name}: field 'levels.B_cm' must be > 0 (v={lv.v})")
    for v, mu in spec.mu_perm.items():
        if mu <= 0:
            raise MoleculeLoadError(f"{spec.name}: field 'mu_perm_debye[{v}]' must be > 0")
        if v not in vs:
            raise MoleculeLoadError(f"{spec.name}: field 'mu_perm_debye' references unknown v={v}")
    for (v1, v2) in spec.mu_trans:
        if v1 not in vs or v2 not in vs:
            raise MoleculeLoadError(f"{spec.name}: field 'mu_trans_debye' references unknown v=({v1},{v2})")
    return spec


def molecule_from_dict(data: dict, source: str = "<dict>") -> MoleculeSpec:
    try:
        name = data["name"]
        levels = tuple(
            VibLevel(
                v=int(entry["v"]),
                energy=to_atomic(float(entry["energy_cm"]), UnitTag.wavenumber_cm),
                rot_const=to_atomic(float(entry["B_cm"]), UnitTag.wavenumber_cm),
            )
            for entry in data["levels"]
        )
        mu_perm = {
            int(v): to_atomic(float(mu), UnitTag.debye)
            for v, mu in data["mu_perm_debye"].items()
        }
        mu_trans: dict[tuple[int, int], float] = {}
        for entry in data.get("mu_trans_debye", []):
            v1, v2 = int(entry["v1"]), int(entry["v2"])
            if v1 == v2:
                raise MoleculeLoadError(f"{source}: field 'mu_trans_debye' has v1 == v2 == {v1}")
            key = (min(v1, v2), max(v1, v2))
            value = to_atomic(float(entry["value"]), UnitTag.debye)
            if key in mu_trans and not math.isclose(mu_trans[key], value):
                raise MoleculeLoadError(
                    f"{source}: field 'mu_trans_debye' asymmetric for v=({v1},{v2})")
            mu_trans[key] = value
    except KeyError as exc:
        raise MoleculeLoadError(f"{source}: missing field {exc.args[0]!r}") from None
    return _validate(MoleculeSpec(name=name, levels=levels, mu_perm=mu_perm, mu_trans=mu_trans))


def load_molecule(path: str) -> MoleculeSpec:
    """Load and validate a molecular data file (JSON schema, see README)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise MoleculeLoadError(f"cannot read molecule file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise MoleculeLoadError(f"{path}: not valid JSON ({exc})") from None
    return molecule_from_dict(data, source=path)


def builtin_molecule(name: str) -> MoleculeSpec:
    """Load one of the shipped data files ('nacs' or 'nacs_desk')."""
    try:
        text = resources.files("molreg").joinpath(f"data/{name}.json").read_text()
    except FileNotFoundError:
        raise MoleculeLoadError(f"no built-in molecule named {name!r}") from None
    return molecule_from_dict(json.loads(text), source=f"builtin:{name}")


def cos_theta_element(a: RotState, b: RotState) -> float:
    """<N_a, 0| cos(theta) |N_b, 0>; zero unless |N_a - N_b| = 1."""
    return cos_theta_N(a.N, b.N)


def cos_theta_N(Na: int, Nb: int) -> float:
    if abs(Na - Nb) != 1:
        return 0.0
    Ng = max(Na, Nb)
    return Ng / math.sqrt((2 * Ng - 1) * (2 * Ng + 1))


def rotor_energy(spec: MoleculeSpec, v: int, N: int) -> float:
    """E_v + B_v N(N+1) in a.u."""
    lv = spec.level(v)
    return lv.energy + lv.rot_const * N * (N + 1)
