import numpy as np
import pytest
from scipy import integrate

from cxlab.constants import E_CHARGE, SR88_ION, mk_to_joule
from cxlab.trap_model import (
    LinearCalibration,
    TrajectoryParams,
    TrapConfig,
    emm_energy,
    emm_energy_mk,
    equilibrium_offset,
    field_for_emm_energy,
    micromotion_factor,
    trajectory,
    voltage_to_field,
)

trap = TrapConfig()


def test_defaults_and_validation():
    assert np.allclose(trap.emm_axis, [2**-0.5, 2**-0.5, 0])
    with pytest.raises(ValueError):
        TrapConfig(omega=[1.0, 1.0, 1e9])
    with pytest.raises(ValueError):
        TrapConfig(emm_axis=[0, 0, 0])


def test_offset_is_force_balance():
    E = 3.0
    x = equilibrium_offset(E, SR88_ION, trap)
    assert np.allclose(SR88_ION.mass * trap.omega**2 * x, E_CHARGE * E * trap.emm_axis)
    assert np.allclose(equilibrium_offset(0.0, SR88_ION, trap), 0)


def test_emm_energy_against_period_average():
    """Time-averaged kinetic energy of the pure micromotion over one RF period."""
    x = equilibrium_offset(5.0, SR88_ION, trap)
    params = TrajectoryParams(x, np.zeros(3), np.zeros(3))
    period = 2 * np.pi / trap.Omega_rf

    def ke(t):
        _, v = trajectory(params, trap, t)
        return 0.5 * SR88_ION.mass * np.sum(v**2)

    avg = integrate.quad(ke, 0, period, epsabs=0, epsrel=1e-12, limit=200)[0] / period
    assert emm_energy(x, SR88_ION, trap) == pytest.approx(avg, rel=1e-6)


def test_field_inverse_roundtrip():
    for e_mk in (0.5, 20.0, 160.0):
        E = field_for_emm_energy(mk_to_joule(e_mk), SR88_ION, trap)
        x = equilibrium_offset(E, SR88_ION, trap)
        assert emm_energy_mk(x, SR88_ION, trap) == pytest.approx(e_mk, rel=1e-12)
    with pytest.raises(ValueError):
        field_for_emm_energy(1.0, SR88_ION, TrapConfig(q=[0, 0, 0]))


def test_velocity_is_derivative_of_position():
    params = TrajectoryParams([1e-7, -2e-7, 0.0], [3e-8, 1e-8, 5e-8], [0.1, 1.2, -0.4])
    t = np.linspace(0, 5e-6, 7)
    h = 1e-12
    _, v = trajectory(params, trap, t)
    fd = (trajectory(params, trap, t + h)[0] - trajectory(params, trap, t - h)[0]) / (2 * h)
    assert np.allclose(v, fd, rtol=1e-5, atol=1e-9)


def test_micromotion_factor_limits():
    g, dg = micromotion_factor(trap, 0.0)
    assert np.allclose(g, 1 + trap.q / 2)
    assert np.allclose(dg, 0)


def test_mass_scaling():
    heavy = trap.for_mass(2 * SR88_ION.mass, SR88_ION.mass)
    assert np.allclose(heavy.q, trap.q / 2)
    assert heavy.omega[2] == pytest.approx(trap.omega[2] / np.sqrt(2))


def test_negative_amplitude_rejected():
    with pytest.raises(ValueError):
        TrajectoryParams([0, 0, 0], [-1, 0, 0], [0, 0, 0])


def test_voltage_calibration():
    assert voltage_to_field(2.0, LinearCalibration(3.0)) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        voltage_to_field(1.0, None)
