from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from cxlab.collision_mc import (
    FAL_COEFFS,
    PassageConfig,
    ScatteringAngleDist,
    collide,
    crystal_preset,
    default_beam_k,
    detection_probability,
    ensemble_curve,
    normal_modes,
    sample_scattering_angle,
    sample_secular_energy,
    simulate_passage,
    thermal_floor,
    two_attempts,
)
from cxlab.constants import K_B
from cxlab.trap_model import TrapConfig

GRID = [0.0, 10.0, 80.0]


def _random_pairs(rng, n):
    return rng.normal(size=(n, 3)), rng.normal(size=(n, 3)) * 0.3


def test_collision_conserves_cm_speed():
    rng = np.random.default_rng(1)
    v, va = _random_pairs(rng, 10**5)
    r = 0.5
    out = collide(v, va, r, rng.uniform(0, np.pi, len(v)), rng.uniform(0, 2 * np.pi, len(v)))
    # CM velocity for mass ratio r = m_a/(m_i+m_a)
    vcm = (1 - r) * v + r * va
    before = np.linalg.norm(v - vcm, axis=1)
    after = np.linalg.norm(out - vcm, axis=1)
    assert np.max(np.abs(after - before) / before) < 1e-12


def test_zero_angle_is_identity():
    rng = np.random.default_rng(2)
    v, va = _random_pairs(rng, 1000)
    assert np.array_equal(collide(v, va, 0.4, 0.0, rng.uniform(0, 6, 1000)), v)
    assert np.array_equal(collide(v, va, 0.0, 1.0, 0.3), v)


def test_equal_mass_head_on_stops_ion():
    v = np.array([0.3, -0.2, 0.7])
    out = collide(v, np.zeros(3), 0.5, np.pi, 0.0)
    assert np.linalg.norm(out) < 1e-15 * np.linalg.norm(v)


def test_angle_distribution_normalised():
    d = ScatteringAngleDist()
    assert d.raw_integral == pytest.approx(sum(c * np.pi ** (k + 1) / (k + 1) for k, c in enumerate(FAL_COEFFS)))
    assert integrate.quad(d.pdf, 0, np.pi)[0] == pytest.approx(1.0, abs=1e-12)
    u = np.linspace(0.001, 0.999, 50)
    assert np.allclose(d.cdf(d.ppf(u)), u, atol=1e-12)


def test_angle_sampler_ks():
    d = ScatteringAngleDist()
    x = sample_scattering_angle(d, np.random.default_rng(3), 20000)
    assert stats.kstest(x, d.cdf).pvalue > 1e-3


def test_energy_sampler_moments():
    T = 0.6e-3
    E = sample_secular_energy(T, np.random.default_rng(4), 10**6) / (K_B * T)
    assert E.mean() == pytest.approx(3, rel=0.01)
    assert E.var() == pytest.approx(3, rel=0.02)
    with pytest.raises(ValueError):
        sample_secular_energy(0.0, np.random.default_rng(0), 3)


def test_detection_limits():
    k = default_beam_k()
    assert detection_probability(np.zeros(3), k) == pytest.approx(0.0, abs=1e-30)
    p = np.array([0.0, 0.3, 1.0])
    assert np.allclose(two_attempts(p), 1 - (1 - p) ** 2)
    big = detection_probability(np.array([1e-6, 1e-6, 0.0]), k)
    assert 0 <= big <= 1


def test_normal_modes_orthonormal():
    modes = normal_modes(crystal_preset("Sr-Rb"), TrapConfig(), coupled=True)
    for B in modes.vectors:
        assert np.allclose(B.T @ B, np.eye(2), atol=1e-12)
    assert np.all(modes.omega > 0)
    # axial centre-of-mass and stretch modes of an equal-mass pair: w and sqrt(3) w
    eq = normal_modes(crystal_preset("Sr-Sr"), TrapConfig())
    assert eq.omega[2] == pytest.approx(TrapConfig().omega[2] * np.array([1, np.sqrt(3)]), rel=1e-12)


def test_crystal_presets():
    c = crystal_preset("Sr-Rb", 0.9)
    assert c.detected == (True, False)
    assert c.kappa_scale == (1.0, 0.9)
    with pytest.raises(ValueError):
        crystal_preset("Rb-Sr")


def test_curve_deterministic_and_thread_invariant():
    cfg = PassageConfig(trials=3000, seed=11)
    a = ensemble_curve(cfg, GRID)
    b = ensemble_curve(cfg, GRID, threads=2)
    assert np.array_equal(a.mean["double"], b.mean["double"])
    assert np.array_equal(a.stderr["single"], b.stderr["single"])


def test_curve_rises_with_micromotion():
    res = ensemble_curve(PassageConfig(trials=20000, seed=5), GRID)
    assert np.all(np.diff(res.mean["double"]) > 0)
    assert np.all(res.mean["double"] >= res.mean["single"])
    assert res.mean_collisions == pytest.approx(0.29, rel=0.05)


def test_zero_kappa_is_flat_floor():
    cfg = PassageConfig(trials=4000, seed=6, kappa_L=0.0)
    res = ensemble_curve(cfg, GRID)
    assert np.ptp(res.mean["double"]) == 0.0
    assert res.mean["double"][0] == pytest.approx(thermal_floor(cfg))


def test_sampled_outcomes_match_mean():
    cfg = PassageConfig(trials=20000, seed=8)
    res = ensemble_curve(cfg, GRID, sample_outcomes=True)
    p = res.counts["double"] / res.n_trials
    assert np.all(np.abs(p - res.mean["double"]) < 5 * np.sqrt(p * (1 - p) / res.n_trials) + 1e-3)


def test_single_passage():
    cfg = replace(PassageConfig(), crystal=crystal_preset("Sr-Sr"))
    out = simulate_passage(cfg, 0.0, np.random.default_rng(0))
    assert out.n_collisions.shape == (2,)
    assert np.all((out.P_b >= 0) & (out.P_b <= 1))
    assert 0 <= out.bright["double"] <= 1
