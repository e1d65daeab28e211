"""Closed-form kinematics of an ion in a linear Paul trap with a DC push.

The lowest-order Mathieu solution along axis i is

    R_i(t) = (x_i + A_i cos(w_i t + phi_i)) * (1 + q_i/2 cos(Omega t))

with x_i the DC offset from the RF null. Everything here is vectorised over
leading array dimensions so the Monte Carlo can evaluate whole ensembles.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import IonSpecies, joule_to_mk, mhz_to_angular

__all__ = [
    "TrapConfig",
    "TrajectoryParams",
    "equilibrium_offset",
    "emm_energy",
    "emm_energy_mk",
    "field_for_emm_energy",
    "micromotion_factor",
    "trajectory",
    "voltage_to_field",
    "LinearCalibration",
]


def _default_axis():
    return np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)


@dataclass(frozen=True)
class TrapConfig:
    """Secular frequencies and RF parameters (angular frequencies in rad/s)."""

    omega: np.ndarray = field(
        default_factory=lambda: mhz_to_angular(np.array([1.4, 1.5, 0.45]))
    )
    Omega_rf: float = mhz_to_angular(26.5)
    q: np.ndarray = field(default_factory=lambda: np.array([-0.14, 0.14, 0.0]))
    emm_axis: np.ndarray = field(default_factory=_default_axis)

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).reshape(3)
        q = np.asarray(self.q, dtype=float).reshape(3)
        axis = np.asarray(self.emm_axis, dtype=float).reshape(3)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("emm_axis must be non-zero")
        if np.any(omega <= 0) or np.any(omega >= self.Omega_rf / 2):
            raise ValueError("need 0 < omega_i < Omega_rf/2 on every axis")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "emm_axis", axis / norm)

    def for_mass(self, mass: float, reference_mass: float) -> "TrapConfig":
        """Same electrodes seen by another species.

        Radial confinement is RF dominated (q and w scale as 1/m); the axial
        spring constant is DC and mass independent (w scales as 1/sqrt(m)).
        """
        ratio = reference_mass / mass
        omega = self.omega.copy()
        omega[:2] *= ratio
        omega[2] *= np.sqrt(ratio)
        return TrapConfig(omega, self.Omega_rf, self.q * ratio, self.emm_axis)


@dataclass(frozen=True)
class TrajectoryParams:
    x: np.ndarray
    A: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        for name in ("x", "A", "phi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.A < 0):
            raise ValueError("secular amplitudes must be non-negative")


def equilibrium_offset(E_dc, ion: IonSpecies, trap: TrapConfig) -> np.ndarray:
    """Offset from the RF null for a DC field of magnitude ``E_dc`` along emm_axis."""
    E_dc = np.asarray(E_dc, dtype=float)
    if not np.all(np.isfinite(E_dc)):
        raise ValueError("E_dc must be finite")
    field_vec = E_dc[..., None] * trap.emm_axis
    return ion.charge * field_vec / (ion.mass * trap.omega**2)


def emm_energy(offsets, ion: IonSpecies, trap: TrapConfig):
    """Time-averaged excess-micromotion kinetic energy (J)."""
    x = np.asarray(offsets, dtype=float)
    return np.sum(ion.mass * trap.Omega_rf**2 * trap.q**2 * x**2, axis=-1) / 16


def emm_energy_mk(offsets, ion: IonSpecies, trap: TrapConfig):
    return joule_to_mk(emm_energy(offsets, ion, trap))


def field_for_emm_energy(E_emm, ion: IonSpecies, trap: TrapConfig):
    """Inverse of the field -> E_EMM map (field magnitude along emm_axis)."""
    unit = emm_energy(equilibrium_offset(1.0, ion, trap), ion, trap)
    if unit <= 0:
        raise ValueError("emm_axis has no micromotion (q along the push axis is zero)")
    return np.sqrt(np.asarray(E_emm, dtype=float) / unit)


def micromotion_factor(trap: TrapConfig, t, q=None):
    """Return g(t) = 1 + q/2 cos(Omega t) and its time derivative."""
    q = trap.q if q is None else q
    t = np.asarray(t, dtype=float)[..., None]
    ph = trap.Omega_rf * t
    g = 1 + 0.5 * q * np.cos(ph)
    dg = -0.5 * q * trap.Omega_rf * np.sin(ph)
    return g, dg


def trajectory(params: TrajectoryParams, trap: TrapConfig, t):
    """Position and velocity (each ``(..., 3)``) at time ``t``."""
    t = np.asarray(t, dtype=float)
    ph = trap.omega * t[..., None] + params.phi
    s = params.x + params.A * np.cos(ph)
    ds = -params.A * trap.omega * np.sin(ph)
    g, dg = micromotion_factor(trap, t)
    return s * g, ds * g + s * dg


@dataclass(frozen=True)
class LinearCalibration:
    """Electrode voltage to DC field: ``E = slope * V`` (V/m per V)."""

    slope: float

    def __post_init__(self):
        if self.slope is None or not np.isfinite(self.slope):
            raise ValueError("calibration slope must be a finite number")


def voltage_to_field(V, calibration: LinearCalibration | None):
    if calibration is None:
        raise ValueError("no voltage calibration configured")
    return calibration.slope * np.asarray(V, dtype=float)

