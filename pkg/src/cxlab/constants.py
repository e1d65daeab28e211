"""Physical constants, species records and unit helpers (SI internally)."""
from __future__ import annotations

from dataclasses import dataclass

from scipy import constants as _c

K_B = _c.k
E_CHARGE = _c.e
AMU = _c.atomic_mass
EPS0 = _c.epsilon_0
BOHR = _c.physical_constants["Bohr radius"][0]

#: Rb-87 ground-state hyperfine splitting expressed as a temperature (K)
E_HPF_K = 328e-3
#: s-wave energy scale for Rb+ + Rb (K)
E_S_K = 79e-9

#: Rb-87 static dipole polarizability in atomic units
RB_POLARIZABILITY_AU = 318.8


def c4_from_polarizability(alpha_au: float) -> float:
    """C4 (J m^4) of the -C4/R^4 atom-ion potential for a polarizability in a.u."""
    return alpha_au * BOHR**3 * E_CHARGE**2 / (2 * 4 * _c.pi * EPS0)


C4_RB = c4_from_polarizability(RB_POLARIZABILITY_AU)


@dataclass(frozen=True)
class IonSpecies:
    """Singly charged particle (charge may be zero for a neutral atom record)."""

    name: str
    mass: float
    charge: float = E_CHARGE

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"{self.name}: mass must be positive")


SR88_ION = IonSpecies("88Sr+", 87.9056125 * AMU)
RB87_ION = IonSpecies("87Rb+", 86.9091805 * AMU)
RB87_ATOM = IonSpecies("87Rb", 86.9091805 * AMU, charge=0.0)

SPECIES = {"Sr": SR88_ION, "Rb": RB87_ION}


def mk_to_joule(e_mk):
    return e_mk * 1e-3 * K_B


def joule_to_mk(e_j):
    return e_j / (1e-3 * K_B)


def mhz_to_angular(f_mhz):
    return 2 * _c.pi * f_mhz * 1e6
