"""From shelving counts to a bound-state-corrected exchange cross-section.

Pipeline stages, in order: false-alarm subtraction per crystal, per-ion
hyperfine-change probabilities, Langevin rate (fitted against the passage
Monte Carlo), Poisson passage inversion, bound-state correction and the
suppression factor relative to the semiclassical value. Uncertainties are
carried to first order; raw binomial proportions use Wilson intervals.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize

from .collision_mc import PassageConfig, crystal_preset, ensemble_curve

log = logging.getLogger(__name__)

CRYSTALS = ("Sr", "Sr-Sr", "Sr-Rb")
M_VALUES = (-2, -1, 0, 1, 2)
DEFAULT_ETA = 0.8
FALSE_ALARM = 0.005


class DataError(ValueError):
    """Input data inconsistent with what a pipeline stage needs."""


class NumericalError(RuntimeError):
    """A root-finding or fitting stage failed."""


@dataclass(frozen=True)
class Estimate:
    value: float
    sigma: float = 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return self.value - self.sigma, self.value + self.sigma

    def __str__(self):
        return f"{self.value:.6g} +- {self.sigma:.2g}"


# ---------------------------------------------------------------------------
# binomial bookkeeping


def binomial_interval(k: int, n: int, z: float = 1.0) -> tuple[float, float]:
    """Wilson score interval; ``z = 1`` gives 68.27 % coverage."""
    if n < 1:
        raise ValueError("need at least one trial")
    if not 0 <= k <= n:
        raise ValueError("successes must lie in [0, n]")
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def binomial_estimate(k: int, n: int) -> Estimate:
    """Proportion k/n with the Wilson half-width as its 1 sigma."""
    lo, hi = binomial_interval(k, n)
    return Estimate(k / n, 0.5 * (hi - lo))


@dataclass(frozen=True)
class MeasurementRecord:
    crystal: str
    F: int
    M: int
    n_trials: int
    n_bright: int

    def __post_init__(self):
        if self.crystal not in CRYSTALS:
            raise DataError(f"unknown crystal {self.crystal!r}")
        if self.F not in (1, 2) or abs(self.M) > self.F:
            raise DataError(f"invalid hyperfine channel F={self.F}, M={self.M}")
        if self.n_trials < 1 or not 0 <= self.n_bright <= self.n_trials:
            raise DataError("need 0 <= n_bright <= n_trials and n_trials >= 1")

    @property
    def probability(self) -> Estimate:
        return binomial_estimate(self.n_bright, self.n_trials)


RECORD_HEADER = ("crystal", "F", "M", "n_trials", "n_bright")


def read_records(path) -> list[MeasurementRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_HEADER:
            raise DataError(f"{path}: expected header {','.join(RECORD_HEADER)}")
        try:
            return [
                MeasurementRecord(row["crystal"].strip(), int(row["F"]), int(row["M"]),
                                  int(row["n_trials"]), int(row["n_bright"]))
                for row in reader
            ]
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: {exc}") from exc


def write_records(path, records: Iterable[MeasurementRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow([r.crystal, r.F, r.M, r.n_trials, r.n_bright])


# ---------------------------------------------------------------------------
# logic detection


@dataclass(frozen=True)
class CorrectedTable:
    """Background-subtracted P_b(M) for one crystal.

    The baseline is shared by every M, so sums over M must be propagated
    through ``sum_over_m`` rather than by adding the per-M sigmas.
    """

    crystal: str
    raw: Mapping[int, Estimate]
    baseline: Estimate

    @property
    def values(self) -> dict[int, float]:
        return {m: e.value - self.baseline.value for m, e in self.raw.items()}

    def __getitem__(self, m: int) -> Estimate:
        e = self.raw[m]
        return Estimate(e.value - self.baseline.value, math.hypot(e.sigma, self.baseline.sigma))

    def sum_over_m(self) -> Estimate:
        n = len(self.raw)
        total = sum(e.value for e in self.raw.values()) - n * self.baseline.value
        var = sum(e.sigma**2 for e in self.raw.values()) + (n * self.baseline.sigma) ** 2
        return Estimate(total, math.sqrt(var))

    def scaled(self, s: float) -> "CorrectedTable":
        raw = {m: Estimate(s * e.value, abs(s) * e.sigma) for m, e in self.raw.items()}
        base = Estimate(s * self.baseline.value, abs(s) * self.baseline.sigma)
        return CorrectedTable(self.crystal, raw, base)


def false_alarm_correct(records: Sequence[MeasurementRecord], crystal: str) -> CorrectedTable:
    """Subtract the mean of the |1,+1> and |1,-1> channels from every |2,M>."""
    rows = {(r.F, r.M): r for r in records if r.crystal == crystal}
    try:
        b_plus, b_minus = rows[(1, 1)].probability, rows[(1, -1)].probability
    except KeyError as exc:
        raise DataError(f"{crystal}: missing false-alarm channel F=1, M={exc.args[0][1]}") from None
    baseline = Estimate(0.5 * (b_plus.value + b_minus.value), 0.5 * math.hypot(b_plus.sigma, b_minus.sigma))
    raw = {m: rows[(2, m)].probability for m in M_VALUES if (2, m) in rows}
    if not raw:
        raise DataError(f"{crystal}: no F=2 channels")
    return CorrectedTable(crystal, raw, baseline)


def _check_eta(eta: float) -> None:
    if not 0 < eta <= 1:
        raise ValueError("detection efficiency must lie in (0, 1]")


def hpf_probability_sr(table: CorrectedTable, eta: float = DEFAULT_ETA) -> Estimate:
    """Hyperfine-change probability per passage per Sr+ ion (two-Sr crystal)."""
    _check_eta(eta)
    s = table.sum_over_m()
    return Estimate(s.value / (10 * eta), s.sigma / (10 * eta))


def hpf_probability_rb(table: CorrectedTable, p_sr: Estimate, eta: float = DEFAULT_ETA) -> Estimate:
    """Probability per passage attributed to the Rb+ ion of a Sr-Rb crystal."""
    _check_eta(eta)
    s = table.sum_over_m()
    value = s.value / (5 * eta) - p_sr.value
    return Estimate(value, math.hypot(s.sigma / (5 * eta), p_sr.sigma))


def bootstrap_hpf(records: Sequence[MeasurementRecord], eta: float = DEFAULT_ETA,
                  n_boot: int = 100_000, seed: int = 0) -> dict[str, Estimate]:
    """Parametric bootstrap of the per-ion probabilities.

    Every channel is redrawn as Binomial(n_trials, n_bright/n_trials) and the
    linear logic-detection stages are re-evaluated; returns mean and standard
    deviation of P_hpf for Sr+ and Rb+.
    """
    rng = np.random.default_rng(seed)
    draws: dict[tuple[str, int, int], np.ndarray] = {}
    for r in records:
        draws[(r.crystal, r.F, r.M)] = rng.binomial(r.n_trials, r.n_bright / r.n_trials, n_boot) / r.n_trials

    def summed(crystal):
        base = 0.5 * (draws[(crystal, 1, 1)] + draws[(crystal, 1, -1)])
        ms = [m for m in M_VALUES if (crystal, 2, m) in draws]
        return sum(draws[(crystal, 2, m)] for m in ms) - len(ms) * base

    p_sr = summed("Sr-Sr") / (10 * eta)
    p_rb = summed("Sr-Rb") / (5 * eta) - p_sr
    return {
        "P_hpf_Sr": Estimate(float(p_sr.mean()), float(p_sr.std(ddof=1))),
        "P_hpf_Rb": Estimate(float(p_rb.mean()), float(p_rb.std(ddof=1))),
    }


# ---------------------------------------------------------------------------
# Poisson passage relation


def passage_probability(p: float, kappa: float) -> float:
    """Per-passage probability from up to two collisions with exchange prob ``p``."""
    return kappa * math.exp(-kappa) * (p + 0.5 * kappa * (2 * p - p * p))


def invert_passage(P_hpf, kappa, tol: float = 1e-10) -> Estimate:
    """Exchange probability per Langevin collision from the per-passage value.

    ``P_hpf`` and ``kappa`` may be floats or ``Estimate``s; the returned sigma
    is first-order in both.
    """
    P = P_hpf if isinstance(P_hpf, Estimate) else Estimate(float(P_hpf))
    K = kappa if isinstance(kappa, Estimate) else Estimate(float(kappa))
    if not K.value > 0:
        raise ValueError("kappa_L must be positive")
    if P.value < 0:
        raise ValueError("P_hpf must be non-negative")
    if P.value == 0:
        p = 0.0
    else:
        top = passage_probability(1.0, K.value)
        if P.value > top:
            raise NumericalError(
                f"P_hpf={P.value:.4g} exceeds the largest value {top:.4g} reachable at kappa={K.value:.4g}"
            )
        f = lambda x: passage_probability(x, K.value) - P.value
        try:
            p = optimize.brentq(f, 0.0, 1.0, xtol=tol, rtol=4 * np.finfo(float).eps)
        except ValueError:
            p = P.value / K.value
    k = K.value
    dP_dp = k * math.exp(-k) * (1 + k - k * p)
    dP_dk = (1 - k) * math.exp(-k) * (p + 0.5 * k * (2 * p - p * p)) + k * math.exp(-k) * 0.5 * (2 * p - p * p)
    sigma = math.hypot(P.sigma, dP_dk * K.sigma) / dP_dp
    return Estimate(p, sigma)


# ---------------------------------------------------------------------------
# bound states


def _pmf_arrays(pmf) -> tuple[np.ndarray, np.ndarray]:
    probs = getattr(pmf, "pmf", pmf)
    n = np.array(sorted(probs), dtype=int)
    w = np.array([probs[k] for k in n], dtype=float)
    if n.size == 0 or n.min() < 1:
        raise ValueError("PMF support must start at n = 1")
    if abs(w.sum() - 1) > 1e-9 or np.any(w < 0):
        raise ValueError("PMF must be non-negative and sum to 1")
    return n, w


def bound_state_forward(sigma_ratio: float, pmf) -> float:
    """Measured exchange probability per Langevin collision for a free-space ratio.

    A pair that makes n close contacts reacts at the first contact where the
    exchange happens, so n contacts contribute sum_k (1-s)^(k-1) s = 1-(1-s)^n.
    """
    n, w = _pmf_arrays(pmf)
    s = float(sigma_ratio)
    return float(np.sum(w * -np.expm1(n * np.log1p(-s)))) if s < 1 else 1.0


def _forward_slope(s: float, n: np.ndarray, w: np.ndarray) -> float:
    return float(np.sum(w * n * (1 - s) ** (n - 1)))


def bound_state_correct(p_ex_L, pmf, tol: float = 1e-10) -> Estimate:
    """Invert ``bound_state_forward``: bisection on [0, 1], then Newton polishing."""
    P = p_ex_L if isinstance(p_ex_L, Estimate) else Estimate(float(p_ex_L))
    n, w = _pmf_arrays(pmf)
    if not 0 <= P.value <= 1:
        raise ValueError("p_ex_L must lie in [0, 1]")
    if P.value == 1:
        return Estimate(1.0, 0.0)
    if P.value == 0:
        s = 0.0
    elif n.size == 1 and n[0] == 1:
        # single contact: the map is the identity
        s = P.value
    else:
        table = {int(a): b for a, b in zip(n, w)}
        s = optimize.bisect(lambda x: bound_state_forward(x, table) - P.value, 0.0, 1.0, xtol=tol)
        for _ in range(3):
            s = min(max(s - (bound_state_forward(s, table) - P.value) / _forward_slope(s, n, w), 0.0), 1.0)
    return Estimate(s, P.sigma / _forward_slope(s, n, w))


def semiclassical_ratio(xi: float) -> float:
    """sigma_ex / sigma_L under the rapid-phase average: xi / 2."""
    return 0.5 * xi


def suppression_factor(sigma_ratio, xi: float):
    """Semiclassical over measured ratio; ``inf`` flags a result below sensitivity."""
    if not 0 < xi <= 1:
        raise ValueError("xi must lie in (0, 1]")
    S = sigma_ratio if isinstance(sigma_ratio, Estimate) else Estimate(float(sigma_ratio))
    if S.value <= 0:
        return Estimate(math.inf, math.inf) if isinstance(sigma_ratio, Estimate) else math.inf
    value = semiclassical_ratio(xi) / S.value
    if isinstance(sigma_ratio, Estimate):
        return Estimate(value, value * S.sigma / S.value)
    return value


# ---------------------------------------------------------------------------
# Langevin-rate fit against the passage Monte Carlo


@dataclass
class CurveData:
    """Measured bright counts versus E_EMM for one crystal."""

    crystal: str
    E_emm_mk: np.ndarray
    n_trials: np.ndarray
    n_bright: np.ndarray

    def __post_init__(self):
        self.E_emm_mk = np.asarray(self.E_emm_mk, dtype=float)
        self.n_trials = np.asarray(self.n_trials, dtype=int)
        self.n_bright = np.asarray(self.n_bright, dtype=int)
        if np.any(self.n_bright > self.n_trials) or np.any(self.n_bright < 0):
            raise DataError("need 0 <= n_bright <= n_trials")

    @property
    def p(self) -> np.ndarray:
        return self.n_bright / self.n_trials

    @property
    def sigma(self) -> np.ndarray:
        return np.array([binomial_estimate(k, n).sigma for k, n in zip(self.n_bright, self.n_trials)])


CURVE_HEADER = ("crystal", "E_EMM_mK", "n_trials", "n_bright")


def read_curves(path) -> list[CurveData]:
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CURVE_HEADER:
            raise DataError(f"{path}: expected header {','.join(CURVE_HEADER)}")
        try:
            for row in reader:
                rows.setdefault(row["crystal"].strip(), []).append(
                    (float(row["E_EMM_mK"]), int(row["n_trials"]), int(row["n_bright"]))
                )
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: {exc}") from exc
    out = []
    for name, pts in rows.items():
        if name not in CRYSTALS:
            raise DataError(f"{path}: unknown crystal {name!r}")
        e, n, k = zip(*sorted(pts))
        out.append(CurveData(name, e, n, k))
    return out


def write_curves(path, curves: Iterable[CurveData]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for c in curves:
            for e, n, k in zip(c.E_emm_mk, c.n_trials, c.n_bright):
                w.writerow([c.crystal, f"{e:.6g}", n, k])


def _point_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(i,)).generate_state(1)[0])


@dataclass
class CurveSimulator:
    """Cached passage Monte Carlo returning model bright probabilities.

    Every call uses the same seeds, so the objective seen by the optimiser is a
    deterministic function of (T, kappa, kappa_ratio). Each E_EMM point has
    its own stream: common random numbers across the grid would turn the
    model's sampling noise into a coherent shift of the fitted parameters.
    """

    base: PassageConfig = field(default_factory=PassageConfig)
    model: str = "double"
    false_alarm: float = FALSE_ALARM
    threads: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def predict(self, crystal: str, grid, T: float, kappa: float, kappa_ratio: float = 1.0):
        grid = tuple(float(g) for g in grid)
        key = (crystal, grid, round(T, 15), round(kappa, 12), round(kappa_ratio, 12))
        hit = self._cache.get(key)
        if hit is None:
            cfg = replace(self.base, crystal=crystal_preset(crystal, kappa_ratio), T=T, kappa_L=kappa)
            p = np.empty(len(grid))
            err = np.empty(len(grid))
            for i, e in enumerate(grid):
                res = ensemble_curve(replace(cfg, seed=_point_seed(cfg.seed, i)), [e], threads=self.threads)
                p[i], err[i] = res.mean[self.model][0], res.stderr[self.model][0]
            fa = self.false_alarm
            hit = (1 - (1 - fa) * (1 - p), (1 - fa) * err)
            self._cache[key] = hit
        return hit

    def synthesize(self, crystal: str, grid, T: float, kappa: float, kappa_ratio: float = 1.0,
                   trials: int | None = None, seed: int | None = None) -> CurveData:
        """Counting data: every simulated trial resolved into bright or dark.

        Each E_EMM point gets its own trials (independent streams), as in a
        measurement; the common random numbers of ``predict`` would correlate
        the points.
        """
        cfg = replace(
            self.base,
            crystal=crystal_preset(crystal, kappa_ratio),
            T=T,
            kappa_L=kappa,
            trials=trials or self.base.trials,
            seed=self.base.seed if seed is None else seed,
        )
        hits = np.zeros(len(grid), dtype=np.int64)
        for i, e in enumerate(grid):
            res = ensemble_curve(replace(cfg, seed=_point_seed(cfg.seed, i)), [e],
                                 threads=self.threads, sample_outcomes=True)
            hits[i] = res.counts[self.model][0]
            if self.false_alarm > 0:
                # false alarms on trials that stayed dark, drawn from a separate stream
                rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(i, 2**31)))
                hits[i] += rng.binomial(cfg.trials - hits[i], self.false_alarm)
        return CurveData(crystal, np.asarray(grid, float), np.full(len(grid), cfg.trials), hits)


@dataclass
class FitResult:
    names: tuple[str, ...]
    best: np.ndarray
    cov: np.ndarray
    chi2: float
    ndof: int
    converged: bool
    n_evals: int

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0, None))

    def estimate(self, name: str) -> Estimate:
        i = self.names.index(name)
        return Estimate(float(self.best[i]), float(self.sigma[i]))


def _chi2(data: Sequence[CurveData], sim: CurveSimulator, T: float, kappa: float, ratio: float = 1.0) -> float:
    total = 0.0
    for d in data:
        p_model, s_model = sim.predict(d.crystal, d.E_emm_mk, T, kappa, ratio)
        var = d.sigma**2 + s_model**2
        total += float(np.sum((d.p - p_model) ** 2 / var))
    return total


def _quadratic_surface(f: Callable, x0: np.ndarray, steps: np.ndarray, lower: np.ndarray):
    """Least-squares quadratic fit of chi^2 on a 5^d stencil.

    Returns (covariance 2 H^-1, stationary point, chi^2 predicted there).
    """
    dim = x0.size
    offsets = np.array(np.meshgrid(*[[-2, -1, 0, 1, 2]] * dim, indexing="ij")).reshape(dim, -1).T
    centre = np.maximum(x0, lower + 2 * steps)
    pts = centre + offsets * steps
    vals = np.array([f(p) for p in pts])
    d = (pts - x0) / steps
    cols = [np.ones(len(d))] + [d[:, i] for i in range(dim)]
    pairs = [(i, j) for i in range(dim) for j in range(i, dim)]
    cols += [d[:, i] * d[:, j] for i, j in pairs]
    coef, *_ = np.linalg.lstsq(np.array(cols).T, vals, rcond=None)
    H = np.zeros((dim, dim))
    for c, (i, j) in zip(coef[1 + dim:], pairs):
        if i == j:
            H[i, i] = 2 * c
        else:
            H[i, j] = H[j, i] = c
    if np.any(np.linalg.eigvalsh(H) <= 0):
        raise NumericalError("chi^2 surface is not convex around the optimum")
    g = coef[1:1 + dim]
    u = -np.linalg.solve(H, g)
    f_star = coef[0] + g @ u + 0.5 * u @ H @ u
    H = H / np.outer(steps, steps)
    return 2 * np.linalg.inv(H), x0 + u * steps, float(f_star)


def fit_langevin(
    data: Sequence[CurveData],
    sim: CurveSimulator,
    T_grid_mk: Sequence[float] = (0.2, 0.4, 0.6, 0.8, 1.0, 1.2),
    kappa_grid: Sequence[float] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.6),
    max_evals: int = 80,
) -> FitResult:
    """Fit the initial temperature and Langevin rate to measured curves.

    A coarse (T, kappa) grid seeds a bounded Nelder-Mead search; the 1 sigma
    covariance comes from the curvature of the chi^2 surface. Returns the best
    grid point with ``converged=False`` when the simplex fails.
    """
    npts = sum(len(d.E_emm_mk) for d in data)
    if npts < 4:
        raise DataError("need at least four E_EMM points to fit two parameters")
    n_evals = 0

    def f(x):
        nonlocal n_evals
        n_evals += 1
        T_mk, kappa = x
        if T_mk <= 0 or kappa < 0:
            return 1e30
        return _chi2(data, sim, T_mk * 1e-3, kappa)

    grid_pts = [(t, k) for t in T_grid_mk for k in kappa_grid]
    vals = [f(np.array(p)) for p in grid_pts]
    x0 = np.array(grid_pts[int(np.argmin(vals))])
    res = optimize.minimize(
        f, x0, method="Nelder-Mead",
        bounds=[(1e-3, None), (0.0, None)],
        options={"xatol": 2e-3, "fatol": 1e-2, "maxfev": max_evals,
                 "initial_simplex": [x0, x0 + [0.1, 0.0], x0 + [0.0, 0.05]]},
    )
    converged = bool(res.success)
    best = res.x if converged or res.fun < min(vals) else x0
    chi2 = float(min(res.fun, min(vals)))
    # the simplex stops within ~1 sigma of kappa; polish on the local quadratic
    steps, lower = np.array([0.008, 0.002]), np.array([1e-3, 0.0])
    try:
        cov, x_star, _ = _quadratic_surface(f, best, steps, lower)
        if np.all(np.abs(x_star - best) <= 2 * steps) and np.all(x_star > lower):
            f_star = f(x_star)
            if f_star < chi2:
                best, chi2 = x_star, f_star
                cov = _quadratic_surface(f, best, steps, lower)[0]
    except NumericalError:
        log.warning("chi^2 curvature not positive; reporting an unbounded covariance")
        cov = np.full((2, 2), np.nan)
        converged = False
    best = best * np.array([1e-3, 1.0])
    cov = cov * np.outer([1e-3, 1.0], [1e-3, 1.0])
    return FitResult(("T", "kappa_L"), best, cov, chi2, npts - 2, converged, n_evals)


def fit_kappa_ratio(
    data: Sequence[CurveData],
    sim: CurveSimulator,
    T: float | Estimate,
    kappa: Estimate,
    bounds: tuple[float, float] = (0.0, 3.0),
    cov: np.ndarray | None = None,
) -> Estimate:
    """Langevin rate of the second species relative to Sr+ from mixed crystals.

    T and kappa (of Sr+) are held at their fitted values. Their uncertainty
    enters through the response of the refitted ratio to a 1 sigma shift of
    each, combined with ``cov`` (the (T, kappa) covariance) when given.
    """
    T = T if isinstance(T, Estimate) else Estimate(T, 0.0)

    def best(t, k):
        f = lambda r: _chi2(data, sim, t, k, r)
        res = optimize.minimize_scalar(f, bounds=bounds, method="bounded", options={"xatol": 1e-3})
        return float(res.x), f

    r0, f = best(T.value, kappa.value)
    h = 0.04
    lo = max(bounds[0], r0 - h)
    xs = np.array([lo, lo + h, lo + 2 * h]) if r0 - h < bounds[0] else np.array([r0 - h, r0, r0 + h])
    ys = np.array([f(x) for x in xs])
    curv = np.polyfit(xs, ys, 2)[0] * 2
    if curv <= 0:
        raise NumericalError("chi^2 not convex in the kappa ratio")
    var = 2 / curv
    sig = np.array([T.sigma, kappa.sigma])
    if np.any(sig > 0):
        # central differences of the refitted ratio over +-1 sigma of T and kappa
        g = np.zeros(2)
        for i, s_ in enumerate(sig):
            if s_ > 0:
                dx = np.eye(2)[i] * s_
                up = best(T.value + dx[0], kappa.value + dx[1])[0]
                dn = best(max(T.value - dx[0], 1e-9), max(kappa.value - dx[1], 0.0))[0]
                g[i] = (up - dn) / (2 * s_)
        C = np.diag(sig**2) if cov is None else np.asarray(cov, float)
        var += float(g @ C @ g)
    return Estimate(r0, math.sqrt(var))


# ---------------------------------------------------------------------------
# contact statistics file and the full analysis


@dataclass
class ContactPMF:
    """Minimal reader-side view of a contact-multiplicity table."""

    pmf: dict[int, float]
    error: dict[int, float] = field(default_factory=dict)


def read_pmf(path) -> ContactPMF:
    pmf, err = {}, {}
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ())[:2] != ("n", "probability"):
        raise DataError(f"{path}: expected columns n,probability,error")
    try:
        for row in reader:
            n = int(row["n"])
            pmf[n] = float(row["probability"])
            err[n] = float(row.get("error") or 0.0)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    total = sum(pmf.values())
    if not pmf or abs(total - 1) > 1e-6:
        raise DataError(f"{path}: probabilities sum to {total}, not 1")
    # renormalise away the rounding of the text format
    return ContactPMF({n: p / total for n, p in pmf.items()}, err)


@dataclass
class RateResult:
    P_hpf_Sr: Estimate
    P_hpf_Rb: Estimate
    kappa_L: Estimate
    T_fit: Estimate | None
    p_ex_L: Estimate
    sigma_ratio: Estimate
    suppression: Estimate
    suppression_upper_bound: Estimate
    xi: float
    eta: float
    corrected: dict = field(default_factory=dict)


REFERENCE_VALUES = {"kappa_L": "0.29 +- 0.02", "p_ex_L": "0.053 +- 0.04", "sigma_ratio": "0.015 +- 0.012"}


def analyze(
    records: Sequence[MeasurementRecord],
    pmf,
    kappa: Estimate,
    xi: float,
    eta: float = DEFAULT_ETA,
    T_fit: Estimate | None = None,
) -> RateResult:
    """Run every inference stage on raw shelving counts."""
    sr_sr = false_alarm_correct(records, "Sr-Sr")
    sr_rb = false_alarm_correct(records, "Sr-Rb")
    p_sr = hpf_probability_sr(sr_sr, eta)
    p_rb = hpf_probability_rb(sr_rb, p_sr, eta)
    # negative values are statistical; clipping happens only here, at reporting
    p_rb_clipped = Estimate(max(p_rb.value, 0.0), p_rb.sigma)
    p_ex = invert_passage(p_rb_clipped, kappa)
    p_ex = Estimate(min(max(p_ex.value, 0.0), 1.0), p_ex.sigma)
    ratio = bound_state_correct(p_ex, pmf)
    return RateResult(
        P_hpf_Sr=p_sr,
        P_hpf_Rb=p_rb,
        kappa_L=kappa,
        T_fit=T_fit,
        p_ex_L=p_ex,
        sigma_ratio=ratio,
        suppression=suppression_factor(ratio, xi),
        suppression_upper_bound=suppression_factor(p_ex, xi),
        xi=xi,
        eta=eta,
        corrected={"Sr-Sr": sr_sr, "Sr-Rb": sr_rb},
    )


def _fmt(e: Estimate | None) -> str:
    if e is None:
        return "n/a"
    if math.isinf(e.value):
        return "below sensitivity"
    return f"{e.value:.6g} +- {e.sigma:.3g}"


def format_report(res: RateResult) -> str:
    lines = ["# charge-exchange analysis report", ""]
    for name, table in res.corrected.items():
        lines.append(f"{name}: false-alarm baseline {_fmt(table.baseline)}")
        for m in sorted(table.raw):
            lines.append(f"  P_b(M={m:+d}) = {_fmt(table[m])}")
    lines += [
        "",
        f"P_hpf per Sr+ ion       : {_fmt(res.P_hpf_Sr)}",
        f"P_hpf per Rb+ ion       : {_fmt(res.P_hpf_Rb)}",
        f"kappa_L                 : {_fmt(res.kappa_L)}   (reference {REFERENCE_VALUES['kappa_L']})",
        f"p_ex,L (trap, upper bd) : {_fmt(res.p_ex_L)}   (reference {REFERENCE_VALUES['p_ex_L']})",
        f"sigma_ex/sigma_L        : {_fmt(res.sigma_ratio)}   (reference {REFERENCE_VALUES['sigma_ratio']})",
        f"semiclassical xi/2      : {semiclassical_ratio(res.xi):.6g}",
        f"suppression             : {_fmt(res.suppression)}",
        f"suppression (uncorr.)   : {_fmt(res.suppression_upper_bound)}",
        "",
        "[results]",
    ]
    kv = {
        "xi": Estimate(res.xi),
        "eta": Estimate(res.eta),
        "P_hpf_Sr": res.P_hpf_Sr,
        "P_hpf_Rb": res.P_hpf_Rb,
        "kappa_L": res.kappa_L,
        "p_ex_L": res.p_ex_L,
        "sigma_ratio": res.sigma_ratio,
        "suppression": res.suppression,
        "suppression_upper_bound": res.suppression_upper_bound,
    }
    if res.T_fit is not None:
        kv["T_fit_K"] = res.T_fit
    for k, e in kv.items():
        lines.append(f"{k} = {e.value!r}")
        lines.append(f"{k}_sigma = {e.sigma!r}")
    return "\n".join(lines) + "\n"


def parse_key_values(text: str, section: str = "results") -> dict[str, float]:
    """Read the machine-readable block written by the report formatters."""
    out, inside = {}, False
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            inside = s[1:-1] == section
            continue
        if inside and "=" in s:
            k, v = (x.strip() for x in s.split("=", 1))
            out[k] = float(v)
    return out
