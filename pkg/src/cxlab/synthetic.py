"""Generators for the bundled synthetic datasets.

The experiment's raw counts are not public, so the bundled inputs are built
from point values: a per-passage Sr+ probability, the exchange probability per
Langevin collision, the Langevin rate and the measured false-alarm baselines.
Everything here is deterministic.
"""
from __future__ import annotations

import numpy as np
from scipy import optimize

from .collision_mc import PassageConfig
from .rate_inference import (
    M_VALUES,
    CurveSimulator,
    MeasurementRecord,
    bound_state_correct,
    bound_state_forward,
    passage_probability,
)

TRUE_T = 0.6e-3
TRUE_KAPPA = 0.29
TRUE_P_EX = 0.053
TRUE_SIGMA_RATIO = 0.015
P_HPF_SR = 0.12
BASELINES = {"Sr-Sr": (0.041, 0.035), "Sr-Rb": (0.016, 0.016), "Sr": (0.005, 0.005)}
CURVE_GRID_MK = (0.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0)
CURVE_SEEDS = {"Sr": 101, "Sr-Sr": 102, "Sr-Rb": 103}


def geometric_pmf(g: float, n_max: int = 60) -> dict[int, float]:
    """PMF(n) proportional to g^(n-1), truncated at n_max and renormalised."""
    w = g ** np.arange(n_max)
    w /= w.sum()
    return {n + 1: float(p) for n, p in enumerate(w)}


def reference_pmf(p_ex: float = TRUE_P_EX, ratio: float = TRUE_SIGMA_RATIO) -> dict[int, float]:
    """Geometric PMF whose bound-state enhancement maps ``ratio`` onto ``p_ex``."""
    g = optimize.brentq(lambda g: bound_state_forward(ratio, geometric_pmf(g)) - p_ex, 0.0, 0.99, xtol=1e-14)
    return geometric_pmf(g)


def write_pmf(path, pmf: dict[int, float], comment: str = "") -> None:
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("n,probability,error\n")
        for n in sorted(pmf):
            fh.write(f"{n},{pmf[n]!r},0.0\n")


def synthetic_records(
    p_sr: float = P_HPF_SR,
    p_ex: float = TRUE_P_EX,
    kappa: float = TRUE_KAPPA,
    eta: float = 0.8,
    n_trials: int = 2000,
    baselines=BASELINES,
) -> list[MeasurementRecord]:
    """Counts equal to the rounded expectation in every (crystal, F, M) channel."""
    p_rb = passage_probability(p_ex, kappa)
    signal = {"Sr-Sr": 2 * eta * p_sr, "Sr-Rb": eta * (p_sr + p_rb)}
    out = []
    for crystal in ("Sr-Sr", "Sr-Rb"):
        b_plus, b_minus = baselines[crystal]
        base = 0.5 * (b_plus + b_minus)
        out.append(MeasurementRecord(crystal, 1, 1, n_trials, round(b_plus * n_trials)))
        out.append(MeasurementRecord(crystal, 1, -1, n_trials, round(b_minus * n_trials)))
        for m in M_VALUES:
            out.append(MeasurementRecord(crystal, 2, m, n_trials, round((base + signal[crystal]) * n_trials)))
    return out


def synthetic_curves(sim: CurveSimulator | None = None, T: float = TRUE_T, kappa: float = TRUE_KAPPA,
                     kappa_ratio: float = 1.0, crystals=("Sr", "Sr-Sr", "Sr-Rb"), trials: int = 50_000):
    """Noisy bright counts from the passage Monte Carlo at the injected (T, kappa)."""
    sim = sim or CurveSimulator(PassageConfig())
    return [
        sim.synthesize(c, CURVE_GRID_MK, T, kappa, kappa_ratio, trials=trials, seed=CURVE_SEEDS[c])
        for c in crystals
    ]


def generation_truth(pmf) -> float:
    """Free-space ratio used to build the records, recovered exactly from the PMF."""
    return bound_state_correct(TRUE_P_EX, pmf).value


def write_bundle(directory) -> None:
    """Regenerate the synthetic counts, curves and PMF shipped with the package."""
    from pathlib import Path

    from .rate_inference import write_curves, write_records

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    pmf = reference_pmf()
    write_pmf(d / "pmf_reference.csv", pmf,
              f"geometric PMF chosen so that sigma_ex/sigma_L = {TRUE_SIGMA_RATIO} maps to p_ex,L = {TRUE_P_EX}")
    write_records(d / "hpf_counts.csv", synthetic_records())
    write_curves(d / "curves.csv", synthetic_curves())


if __name__ == "__main__":
    import sys

    write_bundle(sys.argv[1] if len(sys.argv) > 1 else ".")
