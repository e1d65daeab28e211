"""Spin operators on the electron x nucleus(atom) x nucleus(ion) space.

Quantum numbers are handled internally as integer twice-values so that
half-integers never go through floating-point comparisons. Every operator
lives in the uncoupled product basis ``|S_z, I1_z, I2_z>`` ordered
lexicographically with descending projections; coupled states are built on
demand from Clebsch-Gordan coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SpinSystem",
    "RB87",
    "SPINLESS",
    "clebsch_gordan",
    "spin_matrices",
    "coupled_state",
    "basis_labels",
    "gerade_projector",
    "ungerade_projector",
    "exchange_operator",
    "swap_operator",
    "hyperfine_projector",
    "total_nuclear_z",
    "mixed_state",
    "check_density_matrix",
    "compute_xi",
]

_TOL = 1e-10


def _twice(value, name: str = "quantum number", signed: bool = False) -> int:
    """Return ``2*value`` as an int, rejecting anything off the half-integer grid."""
    if isinstance(value, (int, Fraction)):
        t = Fraction(value) * 2
        if t.denominator != 1:
            raise ValueError(f"{name}={value} is not a multiple of 1/2")
        t = int(t)
    else:
        x = float(value) * 2
        t = round(x)
        if not math.isfinite(x) or abs(x - t) > 1e-9:
            raise ValueError(f"{name}={value} is not a multiple of 1/2")
    if not signed and t < 0:
        raise ValueError(f"{name}={value} must be non-negative")
    return int(t)


@dataclass(frozen=True)
class SpinSystem:
    """Electron spin ``S`` plus nuclear spins of the atom (``I1``) and ion (``I2``)."""

    S: Fraction
    I1: Fraction
    I2: Fraction

    def __init__(self, S=Fraction(1, 2), I1=Fraction(3, 2), I2=Fraction(3, 2)):
        for name, v in (("S", S), ("I1", I1), ("I2", I2)):
            object.__setattr__(self, name, Fraction(_twice(v, name), 2))

    @property
    def twice(self) -> tuple[int, int, int]:
        return int(2 * self.S), int(2 * self.I1), int(2 * self.I2)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(t + 1 for t in self.twice)

    @property
    def dim(self) -> int:
        a, b, c = self.dims
        return a * b * c

    @property
    def nuclear_dim(self) -> int:
        return self.dims[1] * self.dims[2]

    def hyperfine_levels(self) -> list[Fraction]:
        """Allowed total atomic spins F = |S-I1| .. S+I1."""
        s, i1, _ = self.twice
        return [Fraction(f, 2) for f in range(abs(s - i1), s + i1 + 1, 2)]


RB87 = SpinSystem(Fraction(1, 2), Fraction(3, 2), Fraction(3, 2))
SPINLESS = SpinSystem(Fraction(1, 2), 0, 0)


def _fact(n: int) -> int:
    return math.factorial(n)


@lru_cache(maxsize=None)
def _cg_twice(j1: int, j2: int, m1: int, m2: int, J: int, M: int) -> float:
    # Racah closed form with every factorial argument an integer; the sum is
    # carried in exact rationals and the square root taken once at the end.
    if M != m1 + m2:
        return 0.0
    a = (J + j1 - j2) // 2
    b = (J - j1 + j2) // 2
    c = (j1 + j2 - J) // 2
    pref = Fraction(
        (J + 1) * _fact(a) * _fact(b) * _fact(c),
        _fact((j1 + j2 + J) // 2 + 1),
    )
    pref *= (
        _fact((J + M) // 2) * _fact((J - M) // 2)
        * _fact((j1 - m1) // 2) * _fact((j1 + m1) // 2)
        * _fact((j2 - m2) // 2) * _fact((j2 + m2) // 2)
    )
    kmin = max(0, (j2 - J - m1) // 2, (j1 - J + m2) // 2)
    kmax = min(c, (j1 - m1) // 2, (j2 + m2) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            _fact(k) * _fact(c - k) * _fact((j1 - m1) // 2 - k)
            * _fact((j2 + m2) // 2 - k) * _fact((J - j2 + m1) // 2 + k)
            * _fact((J - j1 - m2) // 2 + k)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0.0
    return math.copysign(math.sqrt(total * total * pref), total)


def clebsch_gordan(j1, j2, m1, m2, J, M) -> float:
    """Condon-Shortley coefficient <j1 m1; j2 m2 | J M>.

    Arguments may be ints, floats or Fractions on the half-integer grid.
    Raises ``ValueError`` for projections out of range, parity mismatches or a
    violated triangle rule.
    """
    tj1, tj2, tJ = _twice(j1, "j1"), _twice(j2, "j2"), _twice(J, "J")
    tm1, tm2, tM = (_twice(m, n, signed=True) for m, n in ((m1, "m1"), (m2, "m2"), (M, "M")))
    for tj, tm, name in ((tj1, tm1, "m1"), (tj2, tm2, "m2"), (tJ, tM, "M")):
        if abs(tm) > tj or (tj - tm) % 2:
            raise ValueError(f"{name} inconsistent with its angular momentum")
    if not abs(tj1 - tj2) <= tJ <= tj1 + tj2 or (tj1 + tj2 + tJ) % 2:
        raise ValueError(f"triangle rule violated for ({j1}, {j2}, {J})")
    return _cg_twice(tj1, tj2, tm1, tm2, tJ, tM)


def _projections(tj: int) -> range:
    return range(tj, -tj - 1, -2)


def spin_matrices(j) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (Jx, Jy, Jz) for spin ``j`` in the descending-m basis."""
    tj = _twice(j, "j")
    ms = np.array(list(_projections(tj)), dtype=float) / 2
    jj = tj / 2
    jz = np.diag(ms).astype(complex)
    # <m+1|J+|m> sits just above the diagonal in descending order
    jp = np.diag(np.sqrt(jj * (jj + 1) - ms[1:] * (ms[1:] + 1)), k=1).astype(complex)
    jx = (jp + jp.conj().T) / 2
    jy = (jp - jp.conj().T) / 2j
    return jx, jy, jz


def coupled_state(j1, j2, J, M) -> np.ndarray:
    """|J M> expanded in the uncoupled basis |m1> x |m2> (descending order)."""
    tj1, tj2, tJ, tM = _twice(j1), _twice(j2), _twice(J), _twice(M, signed=True)
    vec = np.zeros((tj1 + 1) * (tj2 + 1))
    for a, tm1 in enumerate(_projections(tj1)):
        tm2 = tM - tm1
        if abs(tm2) > tj2:
            continue
        b = (tj2 - tm2) // 2
        vec[a * (tj2 + 1) + b] = _cg_twice(tj1, tj2, tm1, tm2, tJ, tM)
    return vec


def basis_labels(sys: SpinSystem) -> list[tuple[Fraction, Fraction, Fraction]]:
    """Uncoupled basis labels (S_z, I1_z, I2_z) in matrix order."""
    s, i1, i2 = sys.twice
    return [
        (Fraction(a, 2), Fraction(b, 2), Fraction(c, 2))
        for a in _projections(s)
        for b in _projections(i1)
        for c in _projections(i2)
    ]


def _multiplet_projector(j1, j2, J) -> np.ndarray:
    tJ = _twice(J)
    vecs = np.array([coupled_state(j1, j2, J, Fraction(m, 2)) for m in _projections(tJ)])
    return vecs.T @ vecs


def _nuclear_gerade(sys: SpinSystem) -> np.ndarray:
    _, i1, i2 = sys.twice
    if (i1 + i2) % 2:
        raise ValueError("total nuclear spin is half-integer; gerade/ungerade undefined")
    p = np.zeros((sys.nuclear_dim, sys.nuclear_dim))
    for tI in range(abs(i1 - i2), i1 + i2 + 1, 2):
        if (tI // 2) % 2 == 1:
            p += _multiplet_projector(sys.I1, sys.I2, Fraction(tI, 2))
    return p


def gerade_projector(sys: SpinSystem, embed: bool = True) -> np.ndarray:
    """Projector onto odd total nuclear spin I = I1 + I2.

    With ``embed`` the result is tensored with the electron identity, giving a
    ``sys.dim`` square matrix; otherwise it acts on the nuclear space only.
    """
    p = _nuclear_gerade(sys)
    if embed:
        p = np.kron(np.eye(sys.dims[0]), p)
    return p.astype(complex)


def ungerade_projector(sys: SpinSystem, embed: bool = True) -> np.ndarray:
    p = np.eye(sys.nuclear_dim) - _nuclear_gerade(sys)
    if embed:
        p = np.kron(np.eye(sys.dims[0]), p)
    return p.astype(complex)


def swap_operator(sys: SpinSystem) -> np.ndarray:
    """Nuclear swap <I1z,I2z|X|I1z',I2z'> = d(I1z,I2z') d(I2z,I1z'), times 1_S."""
    _, i1, i2 = sys.twice
    if i1 != i2:
        raise ValueError("nuclear swap requires I1 == I2")
    n = i1 + 1
    x = np.zeros((n * n, n * n))
    for a in range(n):
        for b in range(n):
            x[a * n + b, b * n + a] = 1.0
    return np.kron(np.eye(sys.dims[0]), x).astype(complex)


def exchange_operator(sys: SpinSystem, construction: str = "projector") -> np.ndarray:
    """Resonant charge-exchange operator on the full spin space.

    ``construction="projector"`` builds ``1_S x (P_g - P_u)`` from the coupled
    nuclear multiplets; ``"swap"`` writes the uncoupled-basis swap directly.
    For integer nuclear spins the odd-I projector difference equals minus the
    swap (bosonic exchange symmetry), so that route carries the global phase
    (-1)**(2*I1 + 1). The phase never enters transition probabilities.
    """
    if sys.I1 != sys.I2:
        raise ValueError("resonant exchange needs identical nuclei (I1 == I2)")
    if construction == "swap":
        return swap_operator(sys)
    if construction != "projector":
        raise ValueError(f"unknown construction {construction!r}")
    phase = 1.0 if sys.twice[1] % 2 else -1.0
    return phase * (gerade_projector(sys) - ungerade_projector(sys))


def hyperfine_projector(sys: SpinSystem, F) -> np.ndarray:
    """Projector onto the atom's total-spin-F manifold (S + I1), identity on I2."""
    tF = _twice(F, "F")
    s, i1, _ = sys.twice
    if not abs(s - i1) <= tF <= s + i1 or (s + i1 + tF) % 2:
        raise ValueError(f"F={F} outside |S-I1|..S+I1")
    p = _multiplet_projector(sys.S, sys.I1, Fraction(tF, 2))
    return np.kron(p, np.eye(sys.dims[2])).astype(complex)


def total_nuclear_z(sys: SpinSystem) -> np.ndarray:
    """I1_z + I2_z embedded in the full space."""
    e, n1, n2 = sys.dims
    z1 = spin_matrices(sys.I1)[2]
    z2 = spin_matrices(sys.I2)[2]
    nuc = np.kron(z1, np.eye(n2)) + np.kron(np.eye(n1), z2)
    return np.kron(np.eye(e), nuc)


def mixed_state(
    sys: SpinSystem,
    atom_manifold=None,
    states: Iterable[Sequence] | None = None,
) -> np.ndarray:
    """Uniform atomic mixture tensored with a completely mixed ion nucleus.

    Pass either ``atom_manifold=F`` (all M of that manifold) or ``states`` as
    an explicit list of ``(F, M)`` pairs.
    """
    if (atom_manifold is None) == (states is None):
        raise ValueError("give exactly one of atom_manifold or states")
    if states is None:
        tF = _twice(atom_manifold, "F")
        states = [(Fraction(tF, 2), Fraction(m, 2)) for m in _projections(tF)]
    states = list(states)
    if not states:
        raise ValueError("empty state list")
    dim_atom = sys.dims[0] * sys.dims[1]
    rho1 = np.zeros((dim_atom, dim_atom))
    s, i1, _ = sys.twice
    for F, M in states:
        tF, tM = _twice(F, "F"), _twice(M, "M", signed=True)
        if not abs(s - i1) <= tF <= s + i1 or abs(tM) > tF or (tF - tM) % 2:
            raise ValueError(f"invalid hyperfine state F={F}, M={M}")
        v = coupled_state(sys.S, sys.I1, Fraction(tF, 2), Fraction(tM, 2))
        rho1 += np.outer(v, v)
    rho1 /= len(states)
    rho2 = np.eye(sys.dims[2]) / sys.dims[2]
    return np.kron(rho1, rho2).astype(complex)


def check_density_matrix(rho: np.ndarray, atol: float = 1e-12) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, PSD and unit-trace."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > atol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("density matrix has negative eigenvalues")


def compute_xi(rho: np.ndarray, final_projector: np.ndarray, sys: SpinSystem) -> float:
    """Spin factor Tr(P X rho X P) for exchange operator X and exit projector P."""
    rho = np.asarray(rho)
    p = np.asarray(final_projector)
    if rho.shape != (sys.dim, sys.dim) or p.shape != (sys.dim, sys.dim):
        raise ValueError(f"operators must be {sys.dim}x{sys.dim}")
    if not np.allclose(p @ p, p, atol=_TOL) or not np.allclose(p, p.conj().T, atol=_TOL):
        raise ValueError("final_projector is not an orthogonal projector")
    check_density_matrix(rho)
    x = exchange_operator(sys)
    return float(np.trace(p @ x @ rho @ x @ p).real)
