from dataclasses import replace

import numpy as np
import pytest

from cxlab.binary_md import (
    ContactStatistics,
    MdConfig,
    _collect_encounters,
    _trap_trajectory,
    critical_impact_parameter,
    estimate_pmf,
    free_space_state,
    integrate_trajectory,
    langevin_radius,
    scaling_for,
)
from cxlab.collision_mc import FAL_COEFFS
from cxlab.rate_inference import read_pmf

free = MdConfig(trap_on=False)


def test_langevin_scales():
    E = free.median_energy
    R = langevin_radius(free.C4, E)
    bc = critical_impact_parameter(free.C4, E)
    # centrifugal barrier at b_c sits exactly at the collision energy
    # V_eff = L^2/(2 mu r^2) - C4/r^4 peaks at r_b^2 = 4 mu C4 / L^2
    L2 = 2 * free.mu * E * bc**2
    r_b = (4 * free.mu * free.C4 / L2) ** 0.5
    V = L2 / (2 * free.mu * r_b**2) - free.C4 / r_b**4
    assert V == pytest.approx(E, rel=1e-12)
    assert r_b == pytest.approx(R, rel=1e-12)


@pytest.mark.parametrize("b_ratio", [0.2, 0.7, 0.95, 1.05, 1.5, 2.5])
def test_free_collisions_contact_count_and_invariants(b_ratio):
    E = free.median_energy
    bc = critical_impact_parameter(free.C4, E)
    rec = integrate_trajectory(free_space_state(b_ratio * bc, E, free), free)
    assert rec.ok
    assert rec.n_contacts == (1 if b_ratio < 1 else 0)
    assert rec.energy_drift < 1e-8
    assert rec.angmom_drift < 1e-8


def test_free_capture_reaches_contact_radius():
    E = free.median_energy
    bc = critical_impact_parameter(free.C4, E)
    rec = integrate_trajectory(free_space_state(0.5 * bc, E, free), free)
    assert rec.min_separation <= free.rc * (1 + 1e-6)


def test_random_free_collisions_only_zero_or_one():
    rng = np.random.default_rng(12)
    E0 = free.median_energy
    for _ in range(40):
        E = E0 * rng.gamma(1.5) / 1.2
        bc = critical_impact_parameter(free.C4, E)
        b = bc * rng.uniform(0, 2)
        c = replace(free, launch_radius=4 * bc, contact_radius=0.1 * langevin_radius(free.C4, E))
        rec = integrate_trajectory(free_space_state(b, E, c), c)
        assert rec.ok and rec.n_contacts in (0, 1)
        assert rec.energy_drift < 1e-8 and rec.angmom_drift < 1e-8


def test_time_reversal_in_trap():
    cfg = MdConfig(seed=3)
    sc = scaling_for(cfg)
    for i in range(10):
        fwd = _trap_trajectory(cfg, i)
        assert fwd.ok
        # retrace the same span backwards from the final state
        back_in = fwd.state_out.copy()
        back_in[[3, 4, 5, 9, 10, 11]] *= -1
        t0 = _t0(cfg, i)
        back = integrate_trajectory(back_in, cfg, t_origin=t0 + fwd.t_end, reverse_time=True, t_stop=fwd.t_end)
        assert back.ok
        err = np.max(np.abs(back.state_out[[0, 1, 2, 6, 7, 8]] - fwd.state_in[[0, 1, 2, 6, 7, 8]])) / sc.length
        assert back.n_contacts == fwd.n_contacts
        # repeated hard-core passages amplify round-off chaotically
        assert err < (1e-6 if fwd.n_contacts <= 1 else 0.1)


def _t0(cfg, index):
    from cxlab.binary_md import _sample_trap_state

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
    return _sample_trap_state(cfg, rng)[1]


def test_trap_on_rebinding_exists():
    cfg = MdConfig(seed=1)
    enc, n_traj, excluded = _collect_encounters(cfg, 300)
    counts = np.array([m for m, _ in enc])
    assert len(counts) == 300
    assert np.mean(counts >= 2) > 0.05
    assert excluded <= 0.02 * n_traj


def test_trajectories_reproducible():
    cfg = MdConfig(seed=9)
    a, b = _trap_trajectory(cfg, 4), _trap_trajectory(cfg, 4)
    assert np.array_equal(a.state_out, b.state_out)
    assert np.array_equal(a.contact_times, b.contact_times)


def test_pmf_needs_enough_collisions():
    with pytest.raises(ValueError):
        estimate_pmf(MdConfig(), n_collisions=100)


def test_trap_off_pmf_is_single_contact():
    st = estimate_pmf(MdConfig(trap_on=False, seed=2), n_collisions=2500)
    assert st.pmf == {1: 1.0}
    assert st.n_encounters == 2500


def test_contact_statistics_roundtrip(tmp_path):
    st = ContactStatistics({1: 0.6, 2: 0.3, 3: 0.1}, {1: 0.01, 2: 0.01, 3: 0.005}, 1000, 1500, meta={"seed": 0})
    p = tmp_path / "pmf.csv"
    st.write(p)
    back = read_pmf(p)
    assert back.pmf == pytest.approx(st.pmf)
    assert st.mean == pytest.approx(1.5)
    assert st.monotone_tail()
    assert not ContactStatistics({1: 0.5, 2: 0.1, 3: 0.4}, {1: 0.01, 2: 0.01, 3: 0.01}, 1, 1).monotone_tail()
    with pytest.raises(ValueError):
        ContactStatistics({1: 0.5}, {1: 0.0}, 1, 1)


def test_config_validation():
    with pytest.raises(ValueError):
        MdConfig(inner="bounce")
    with pytest.raises(ValueError):
        MdConfig(contact_radius=1.0)
    assert FAL_COEFFS[0] > 0
