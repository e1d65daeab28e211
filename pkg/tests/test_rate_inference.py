import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxlab.rate_inference import (
    ContactPMF,
    CorrectedTable,
    DataError,
    Estimate,
    MeasurementRecord,
    NumericalError,
    binomial_estimate,
    binomial_interval,
    bootstrap_hpf,
    bound_state_correct,
    bound_state_forward,
    false_alarm_correct,
    hpf_probability_rb,
    hpf_probability_sr,
    invert_passage,
    passage_probability,
    read_pmf,
    read_records,
    suppression_factor,
    write_records,
)
from cxlab.synthetic import reference_pmf, synthetic_records


def _records(crystal, base_plus, base_minus, signal, n=10000):
    rec = [
        MeasurementRecord(crystal, 1, 1, n, round(base_plus * n)),
        MeasurementRecord(crystal, 1, -1, n, round(base_minus * n)),
    ]
    for m, s in zip(range(-2, 3), np.broadcast_to(signal, 5)):
        rec.append(MeasurementRecord(crystal, 2, m, n, round(s * n)))
    return rec


# --- binomial intervals ----------------------------------------------------


def test_wilson_edges_and_symmetry():
    assert binomial_interval(0, 100)[0] == 0.0
    assert binomial_interval(100, 100)[1] == 1.0
    lo, hi = binomial_interval(50, 100)
    assert 0.5 - lo == pytest.approx(hi - 0.5, abs=1e-3)
    assert 0.5 * (hi - lo) == pytest.approx(0.05, abs=1e-3)
    with pytest.raises(ValueError):
        binomial_interval(0, 0)


@given(st.integers(1, 5000), st.data())
@settings(max_examples=60, deadline=None)
def test_wilson_contains_point_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = binomial_interval(k, n)
    assert lo <= k / n <= hi


def test_records_validation_and_io(tmp_path):
    with pytest.raises(DataError):
        MeasurementRecord("Sr", 3, 0, 10, 1)
    with pytest.raises(DataError):
        MeasurementRecord("Sr", 2, 0, 10, 11)
    recs = synthetic_records()
    p = tmp_path / "r.csv"
    write_records(p, recs)
    assert read_records(p) == recs
    p.write_text("crystal,F,M,n_trials\nSr,1,1,10\n")
    with pytest.raises(DataError):
        read_records(p)


# --- logic detection -------------------------------------------------------


def test_pure_background_gives_zero():
    t = false_alarm_correct(_records("Sr-Sr", 0.04, 0.04, 0.04), "Sr-Sr")
    assert all(abs(v) < 1e-15 for v in t.values.values())


def test_baseline_is_mean_of_channels():
    t = false_alarm_correct(_records("Sr-Sr", 0.041, 0.035, 0.2), "Sr-Sr")
    assert t.baseline.value == pytest.approx(0.038)
    t2 = false_alarm_correct(_records("Sr-Rb", 0.016, 0.016, 0.1), "Sr-Rb")
    assert t2.baseline.value == pytest.approx(0.016)


def test_missing_baseline_rejected():
    rec = [r for r in _records("Sr-Sr", 0.04, 0.04, 0.1) if (r.F, r.M) != (1, -1)]
    with pytest.raises(DataError):
        false_alarm_correct(rec, "Sr-Sr")


def _table(values, sigma=0.0):
    return CorrectedTable("Sr-Sr", {m: Estimate(v, sigma) for m, v in zip(range(-2, 3), values)}, Estimate(0.0))


def test_hpf_sr_arithmetic():
    p = 0.1
    assert hpf_probability_sr(_table([p] * 5), 0.8).value == pytest.approx(0.625 * p)
    assert hpf_probability_sr(_table([0] * 5)).value == 0
    a = hpf_probability_sr(_table([p] * 5), 0.4).value
    b = hpf_probability_sr(_table([p] * 5), 0.8).value
    assert a == pytest.approx(2 * b)
    with pytest.raises(ValueError):
        hpf_probability_sr(_table([p] * 5), 1.2)


def test_hpf_rb_linear_and_ordering():
    p_sr = hpf_probability_sr(_table([0.16] * 5))
    # Sr-Rb signal entirely from the Sr ion
    sr_only = _table([0.8 * p_sr.value] * 5)
    assert hpf_probability_rb(sr_only, p_sr).value == pytest.approx(0.0, abs=1e-15)
    # Rb channel one ninth of Sr
    tab = _table([0.8 * p_sr.value * (1 + 1 / 9)] * 5)
    p_rb = hpf_probability_rb(tab, p_sr)
    assert p_rb.value == pytest.approx(p_sr.value / 9)
    assert p_rb.value < p_sr.value / 5
    s = 2.5
    scaled_sr = hpf_probability_sr(_table([0.16 * s] * 5))
    assert scaled_sr.value == s * p_sr.value
    assert hpf_probability_rb(tab.scaled(s), scaled_sr).value == pytest.approx(s * p_rb.value, rel=1e-15)


def test_shared_baseline_propagation():
    rec = _records("Sr-Sr", 0.04, 0.04, 0.2, n=2000)
    t = false_alarm_correct(rec, "Sr-Sr")
    naive = math.sqrt(sum(t[m].sigma ** 2 for m in range(-2, 3)))
    assert t.sum_over_m().sigma > naive


def test_propagation_agrees_with_bootstrap():
    recs = synthetic_records()
    boot = bootstrap_hpf(recs, n_boot=100_000, seed=3)
    p_sr = hpf_probability_sr(false_alarm_correct(recs, "Sr-Sr"))
    p_rb = hpf_probability_rb(false_alarm_correct(recs, "Sr-Rb"), p_sr)
    assert p_sr.sigma == pytest.approx(boot["P_hpf_Sr"].sigma, rel=0.15)
    assert p_rb.sigma == pytest.approx(boot["P_hpf_Rb"].sigma, rel=0.15)


# --- passage relation ------------------------------------------------------


def test_passage_point_values():
    P = passage_probability(0.053, 0.29)
    assert P == pytest.approx(0.0147, abs=1e-4)
    assert invert_passage(P, 0.29).value == pytest.approx(0.053, abs=1e-6)
    assert P / 0.29 == pytest.approx(0.053, rel=0.07)
    assert invert_passage(0.0, 0.29).value == 0.0


@pytest.mark.parametrize("kappa", [0.05, 0.29, 1.0])
def test_passage_roundtrip(kappa):
    for p in np.linspace(0, 0.9, 37):
        assert invert_passage(passage_probability(p, kappa), kappa).value == pytest.approx(p, abs=1e-8)


def test_small_kappa_limit():
    for kappa in (0.01, 0.003):
        P = passage_probability(0.2, kappa)
        assert abs(invert_passage(P, kappa).value - P / kappa) / (P / kappa) < 2 * kappa


def test_passage_errors():
    with pytest.raises(ValueError):
        invert_passage(0.01, 0.0)
    with pytest.raises(ValueError):
        invert_passage(-0.01, 0.3)
    with pytest.raises(NumericalError):
        invert_passage(0.9, 0.29)


def test_passage_sigma_first_order():
    e = invert_passage(Estimate(0.0147, 0.004), Estimate(0.29, 0.02))
    h = 1e-7
    dp = (invert_passage(0.0147 + h, 0.29).value - invert_passage(0.0147 - h, 0.29).value) / (2 * h)
    dk = (invert_passage(0.0147, 0.29 + h).value - invert_passage(0.0147, 0.29 - h).value) / (2 * h)
    assert e.sigma == pytest.approx(math.hypot(dp * 0.004, dk * 0.02), rel=1e-5)


# --- bound states ----------------------------------------------------------


def test_single_contact_identity():
    for p in (0.0, 0.01, 0.3, 0.999):
        assert bound_state_correct(p, {1: 1.0}).value == pytest.approx(p, abs=1e-10)


def test_two_term_hand_value():
    pmf = {1: 0.5, 2: 0.5}
    assert bound_state_forward(0.2, pmf) == pytest.approx(0.28, abs=1e-15)
    assert bound_state_correct(0.28, pmf).value == pytest.approx(0.2, abs=1e-10)


def test_forward_monotone_and_enhancing():
    rng = np.random.default_rng(7)
    s = np.linspace(0, 1, 201)
    for _ in range(100):
        n = rng.integers(1, 30)
        w = rng.dirichlet(np.ones(n))
        pmf = {k + 1: float(x) for k, x in enumerate(w)}
        f = np.array([bound_state_forward(x, pmf) for x in s])
        assert np.all(np.diff(f) > 0)
        if n > 1:
            assert np.all(f[1:-1] > s[1:-1])


def test_boundary_and_validation():
    assert bound_state_correct(1.0, {1: 0.5, 3: 0.5}).value == 1.0
    with pytest.raises(ValueError):
        bound_state_correct(0.1, {0: 0.5, 1: 0.5})
    with pytest.raises(ValueError):
        bound_state_correct(0.1, {1: 0.7})


def test_reference_pmf_maps_point_values():
    pmf = reference_pmf()
    assert bound_state_correct(0.053, pmf).value == pytest.approx(0.015, abs=1e-9)


def test_pmf_file(tmp_path):
    p = tmp_path / "pmf.csv"
    p.write_text("# comment\nn,probability,error\n1,0.25,0.01\n2,0.75,0.01\n")
    pm = read_pmf(p)
    assert isinstance(pm, ContactPMF) and pm.pmf == {1: 0.25, 2: 0.75}
    p.write_text("n,probability,error\n1,0.25,0\n")
    with pytest.raises(DataError):
        read_pmf(p)


# --- suppression -----------------------------------------------------------


def test_suppression_values():
    assert suppression_factor(3 / 16, 3 / 8) == pytest.approx(1.0)
    assert suppression_factor(0.015, 3 / 8) == pytest.approx(12.5)
    assert suppression_factor(0.053, 3 / 8) == pytest.approx(3.54, abs=0.01)
    assert math.isinf(suppression_factor(0.0, 3 / 8))
    with pytest.raises(ValueError):
        suppression_factor(0.1, 0.0)
