"""Monte Carlo of one atom-cloud passage through a trapped-ion crystal.

Each ion suffers a Poisson number of instantaneous Langevin collisions. At a
collision the full ion velocity (secular plus micromotion) is updated with
the elastic two-body kernel, the change is projected back onto the crystal's
normal modes, and after the passage the logic ion's mode amplitudes feed the
carrier-shelving detection formula.

Randomness is organised in fixed-size trial blocks. Block ``b`` draws from
``SeedSequence(seed, spawn_key=(b, ...))`` so every trial is a pure function
of (config, trial index, seed), independent of threading and of the E_EMM
grid. Temperatures enter only through a scale factor and collision counts
through the Poisson inverse CDF, so neighbouring (T, kappa) points share
random numbers, which keeps the fit objective smooth.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special, stats

from .constants import (
    E_CHARGE,
    EPS0,
    K_B,
    RB87_ATOM,
    SPECIES,
    IonSpecies,
    mk_to_joule,
)
from .trap_model import TrapConfig, equilibrium_offset, field_for_emm_energy, micromotion_factor

BLOCK_SIZE = 1024
SHELVING_WAVELENGTH = 674e-9
FAL_COEFFS = (0.384, -0.013, -0.014)
DETECTION_MODELS = ("single", "double")


def default_beam_k() -> np.ndarray:
    k = 2 * np.pi / SHELVING_WAVELENGTH
    return k * np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# scattering-angle distribution


@dataclass(frozen=True)
class ScatteringAngleDist:
    """Quadratic pdf ``c0 + c1*phi + c2*phi**2`` on [0, pi], renormalised."""

    coeffs: tuple[float, float, float] = FAL_COEFFS

    def __post_init__(self):
        c0, c1, c2 = self.coeffs
        candidates = [0.0, np.pi]
        if c2 != 0 and 0 < -c1 / (2 * c2) < np.pi:
            candidates.append(-c1 / (2 * c2))
        if min(self.raw_pdf(np.array(candidates))) < 0:
            raise ValueError("quadratic pdf is negative somewhere on [0, pi]")
        if self.raw_integral <= 0:
            raise ValueError("quadratic pdf has no mass on [0, pi]")

    def raw_pdf(self, phi):
        c0, c1, c2 = self.coeffs
        return c0 + c1 * phi + c2 * phi**2

    def _raw_cdf(self, phi):
        c0, c1, c2 = self.coeffs
        return c0 * phi + c1 * phi**2 / 2 + c2 * phi**3 / 3

    @property
    def raw_integral(self) -> float:
        return float(self._raw_cdf(np.pi))

    @property
    def norm(self) -> float:
        return 1.0 / self.raw_integral

    def pdf(self, phi):
        phi = np.asarray(phi, dtype=float)
        inside = (phi >= 0) & (phi <= np.pi)
        return np.where(inside, self.raw_pdf(phi) * self.norm, 0.0)

    def cdf(self, phi):
        phi = np.clip(np.asarray(phi, dtype=float), 0, np.pi)
        return self._raw_cdf(phi) * self.norm

    def ppf(self, u):
        """Inverse CDF by bracketed Newton iteration (vectorised)."""
        u = np.asarray(u, dtype=float)
        target = u * self.raw_integral
        lo = np.zeros_like(u)
        hi = np.full_like(u, np.pi)
        x = u * np.pi
        for _ in range(60):
            f = self._raw_cdf(x) - target
            lo = np.where(f < 0, x, lo)
            hi = np.where(f > 0, x, hi)
            step = f / np.maximum(self.raw_pdf(x), 1e-300)
            x_new = x - step
            bad = (x_new <= lo) | (x_new >= hi)
            x_new = np.where(bad, 0.5 * (lo + hi), x_new)
            if np.all(np.abs(x_new - x) < 1e-14):
                x = x_new
                break
            x = x_new
        return x


def sample_scattering_angle(dist: ScatteringAngleDist, rng, size=None):
    """Draw angles by inverse-transform sampling of the renormalised pdf."""
    return dist.ppf(rng.random(size))


def sample_secular_energy(T: float, rng, size=None, modes: int = 3):
    """Thermal secular energy of ``modes`` harmonic modes.

    For the default three modes the density is E^2/(2 (k_B T)^3) exp(-E/k_B T),
    i.e. an Erlang(3) law with scale k_B T.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    return K_B * T * rng.standard_gamma(modes, size)


# ---------------------------------------------------------------------------
# collision kernel and detection


def collide(v_ion, v_atom, r, phi, azimuth):
    """Elastic update ``v -> (1 - r + r R(phi)) (v - v_a) + v_a``.

    ``R`` rotates the relative velocity by ``phi`` about an axis perpendicular
    to it; ``azimuth`` fixes that axis within the perpendicular plane. The
    update is evaluated as ``v + r (R u - u)`` so that ``phi = 0`` or ``r = 0``
    return ``v_ion`` bit-for-bit. A vanishing relative velocity leaves the
    ion untouched.
    """
    v_ion = np.asarray(v_ion, dtype=float)
    v_atom = np.asarray(v_atom, dtype=float)
    u = v_ion - v_atom
    speed = np.linalg.norm(u, axis=-1, keepdims=True)
    safe = np.where(speed > 0, speed, 1.0)
    uhat = u / safe
    # any helper not parallel to u gives a valid perpendicular frame
    helper = np.zeros_like(uhat)
    use_x = np.abs(uhat[..., 0]) < 0.9
    helper[..., 0] = np.where(use_x, 1.0, 0.0)
    helper[..., 1] = np.where(use_x, 0.0, 1.0)
    e1 = np.cross(uhat, helper)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(uhat, e1)
    az = np.asarray(azimuth, dtype=float)[..., None]
    ph = np.asarray(phi, dtype=float)[..., None]
    axis = np.cos(az) * e1 + np.sin(az) * e2
    turn = (np.cos(ph) - 1) * uhat + np.sin(ph) * np.cross(axis, uhat)
    r = np.asarray(r, dtype=float)
    dv = (r[..., None] if r.ndim else r) * speed * turn
    return np.where(speed > 0, v_ion + dv, v_ion)


def detection_probability(A, beam_k):
    """Bright probability ``cos^2(pi/2 prod_i J0(k_i A_i))`` (long pulse)."""
    A = np.asarray(A, dtype=float)
    arg = np.prod(special.j0(np.asarray(beam_k) * A), axis=-1)
    return np.cos(0.5 * np.pi * arg) ** 2


def two_attempts(p):
    """Bright after either of two independent shelving attempts."""
    return 1 - (1 - p) ** 2


# ---------------------------------------------------------------------------
# crystals and normal modes


@dataclass(frozen=True)
class Crystal:
    """Ion chain along the trap axis; ion 0 is the logic ion."""

    name: str
    ions: tuple[IonSpecies, ...]
    detected: tuple[bool, ...]
    kappa_scale: tuple[float, ...]

    def __post_init__(self):
        n = len(self.ions)
        if n not in (1, 2):
            raise ValueError("only one- and two-ion crystals are supported")
        if len(self.detected) != n or len(self.kappa_scale) != n:
            raise ValueError("per-ion fields must match the number of ions")
        if not any(self.detected):
            raise ValueError("at least one ion must be detected")
        if any(k < 0 for k in self.kappa_scale):
            raise ValueError("kappa_scale must be non-negative")


def crystal_preset(name: str, kappa_ratio: float = 1.0) -> Crystal:
    """``"Sr"``, ``"Sr-Sr"`` or ``"Sr-Rb"``; only Sr+ ions are shelved."""
    labels = name.split("-")
    try:
        ions = tuple(SPECIES[s] for s in labels)
    except KeyError as exc:
        raise ValueError(f"unknown crystal {name!r}") from exc
    if labels[0] != "Sr":
        raise ValueError("the logic ion (first in the label) must be Sr")
    detected = tuple(s == "Sr" for s in labels)
    scale = tuple(kappa_ratio if s == "Rb" else 1.0 for s in labels)
    return Crystal(name, ions, detected, scale)


@dataclass(frozen=True)
class NormalModes:
    omega: np.ndarray  # (3, n) mode angular frequencies per Cartesian axis
    vectors: np.ndarray  # (3, n_ion, n_mode) mass-weighted eigenvectors
    masses: np.ndarray  # (n,)
    spring: np.ndarray  # (3, n, n) Hessian of the linearised potential
    q: np.ndarray  # (n, 3) per-ion Mathieu q


def normal_modes(crystal: Crystal, trap: TrapConfig, coupled: bool = True) -> NormalModes:
    """Linearised normal modes of a one- or two-ion chain along z.

    ``trap`` describes the logic ion; other species see the same electrodes
    (``TrapConfig.for_mass``). With ``coupled=False`` the Coulomb coupling is
    dropped and every ion keeps its single-ion modes.
    """
    m = np.array([ion.mass for ion in crystal.ions])
    traps = [trap.for_mass(mj, m[0]) for mj in m]
    k_single = np.array([[mj * tj.omega[d] ** 2 for mj, tj in zip(m, traps)] for d in range(3)])
    n = len(m)
    spring = np.zeros((3, n, n))
    for d in range(3):
        spring[d] = np.diag(k_single[d])
    if n == 2 and coupled:
        # equilibrium spacing from the axial spring constant of the logic ion
        kz = k_single[2, 0]
        coulomb = E_CHARGE**2 / (4 * np.pi * EPS0)
        d3 = 2 * coulomb / kz
        c_ax = 2 * coulomb / d3
        lap = np.array([[1.0, -1.0], [-1.0, 1.0]])
        spring[0] += -0.5 * c_ax * lap
        spring[1] += -0.5 * c_ax * lap
        spring[2] += c_ax * lap
    inv_sqrt_m = 1 / np.sqrt(m)
    omega = np.zeros((3, n))
    vectors = np.zeros((3, n, n))
    for d in range(3):
        h = spring[d] * inv_sqrt_m[:, None] * inv_sqrt_m[None, :]
        w2, vec = np.linalg.eigh(h)
        if np.any(w2 <= 0):
            raise ValueError("crystal is unstable for these trap frequencies")
        omega[d] = np.sqrt(w2)
        vectors[d] = vec
    q = np.array([tj.q for tj in traps])
    return NormalModes(omega, vectors, m, spring, q)


def crystal_offsets(modes: NormalModes, crystal: Crystal, trap: TrapConfig, E_dc) -> np.ndarray:
    """Static displacements (..., n, 3) for a uniform DC field along emm_axis."""
    E_dc = np.asarray(E_dc, dtype=float)
    charges = np.array([ion.charge for ion in crystal.ions])
    out = np.zeros(E_dc.shape + (len(charges), 3))
    for d in range(3):
        force = charges[None, :] * (E_dc.reshape(-1, 1) * trap.emm_axis[d])
        out[..., d] = np.linalg.solve(modes.spring[d], force.T).T.reshape(out.shape[:-1])
    return out


# ---------------------------------------------------------------------------
# configuration and outcomes


@dataclass(frozen=True)
class PassageConfig:
    kappa_L: float = 0.29
    T: float = 0.6e-3
    atom_T: float = 10e-6
    trap: TrapConfig = field(default_factory=TrapConfig)
    crystal: Crystal = field(default_factory=lambda: crystal_preset("Sr"))
    atom: IonSpecies = RB87_ATOM
    beam_k: np.ndarray = field(default_factory=default_beam_k)
    trials: int = 50_000
    seed: int = 0
    r: float | None = None
    coupled: bool = True
    passage_time: float = 1.0
    angle_dist: ScatteringAngleDist = field(default_factory=ScatteringAngleDist)

    def __post_init__(self):
        if self.kappa_L < 0:
            raise ValueError("kappa_L must be non-negative")
        if self.T < 0 or self.atom_T < 0:
            raise ValueError("temperatures must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.r is not None and not 0 < self.r < 1:
            raise ValueError("mass ratio r must lie in (0, 1)")
        object.__setattr__(self, "beam_k", np.asarray(self.beam_k, dtype=float).reshape(3))

    def mass_ratios(self) -> np.ndarray:
        """r = mu/m_ion for every ion of the crystal."""
        if self.r is not None:
            return np.full(len(self.crystal.ions), self.r)
        m_a = self.atom.mass
        return np.array([m_a / (ion.mass + m_a) for ion in self.crystal.ions])


@dataclass
class PassageOutcome:
    mode_amplitudes: np.ndarray  # (n_ion, 3, n_mode) displacement amplitudes (m)
    n_collisions: np.ndarray  # per ion
    P_b: np.ndarray  # per ion, single attempt
    bright: dict  # detection model -> crystal-level bright probability

    @property
    def A(self) -> np.ndarray:
        """Per-ion, per-axis rms-combined secular amplitude."""
        return np.sqrt(np.sum(self.mode_amplitudes**2, axis=-1))


# ---------------------------------------------------------------------------
# random draws


class _BlockDraws:
    """Deterministic per-block streams; slot draws are independent of caps."""

    def __init__(self, seed: int, block: int):
        self.seed = seed
        self.block = block

    def _gen(self, *key):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.block,) + key)
        return np.random.Generator(np.random.PCG64(ss))

    def base(self, n, n_ion):
        g = self._gen(0)
        return _base_draws(g, n, n_ion)

    def slot(self, ion, slot, n):
        return _slot_draws(self._gen(1 + ion, slot), n)

    def outcome(self, n):
        return self._gen(0, 1).random(n)


class _RngDraws:
    def __init__(self, rng):
        self.rng = rng

    def base(self, n, n_ion):
        return _base_draws(self.rng, n, n_ion)

    def slot(self, ion, slot, n):
        return _slot_draws(self.rng, n)

    def outcome(self, n):
        return self.rng.random(n)


def _base_draws(g, n, n_ion):
    modes = 3 * n_ion
    return {
        "gamma": g.standard_gamma(modes, n),
        "split": g.standard_exponential((n, modes)),
        "phase": g.uniform(0, 2 * np.pi, (n, 3, n_ion)),
        "u_count": g.random((n, n_ion)),
    }


def _slot_draws(g, n):
    return {
        "t": g.random(n),
        "v_atom": g.standard_normal((n, 3)),
        "u_phi": g.random(n),
        "azimuth": g.uniform(0, 2 * np.pi, n),
    }


def _collision_cap(kappa: float) -> int:
    if kappa <= 0:
        return 0
    return max(1, int(stats.poisson.isf(1e-12, kappa)) + 1)


# ---------------------------------------------------------------------------
# kernel


def _run_kernel(cfg: PassageConfig, offsets: np.ndarray, n: int, draws, modes: NormalModes):
    """Simulate ``n`` trials for every row of ``offsets`` (G, n_ion, 3).

    Returns per-ion single-attempt P_b (G, n, n_ion), mode amplitudes
    (G, n, n_ion, 3, n_mode) and collision counts (n, n_ion).
    """
    crystal = cfg.crystal
    n_ion = len(crystal.ions)
    G = offsets.shape[0]
    w = modes.omega  # (3, k)
    B = modes.vectors  # (3, j, k)
    sqrt_m = np.sqrt(modes.masses)
    ratios = cfg.mass_ratios()

    base = draws.base(n, n_ion)
    # thermal start: total energy ~ Gamma(3 n_ion) k_B T split uniformly over modes
    e_tot = K_B * cfg.T * base["gamma"]
    frac = base["split"] / base["split"].sum(axis=1, keepdims=True)
    e_mode = (e_tot[:, None] * frac).reshape(n, 3, n_ion)
    amp = np.sqrt(2 * e_mode) / w[None]
    c = amp * np.exp(1j * base["phase"])
    c = np.broadcast_to(c, (G,) + c.shape).copy()

    kappas = cfg.kappa_L * np.asarray(crystal.kappa_scale)
    counts = np.zeros((n, n_ion), dtype=int)
    for j, kap in enumerate(kappas):
        cap = _collision_cap(kap)
        if cap:
            counts[:, j] = np.minimum(stats.poisson.ppf(base["u_count"][:, j], kap), cap)

    # gather every (ion, slot) event and order them in time per trial
    src_ion, src_draw, times = [], [], []
    for j in range(n_ion):
        for s in range(int(counts[:, j].max(initial=0))):
            d = draws.slot(j, s, n)
            t = d["t"] * cfg.passage_time
            times.append(np.where(s < counts[:, j], t, np.inf))
            src_ion.append(j)
            src_draw.append(d)
    if times:
        times = np.stack(times, axis=1)
        order = np.argsort(times, axis=1, kind="stable")
        n_events = counts.sum(axis=1)
        sigma_a = math.sqrt(K_B * cfg.atom_T / cfg.atom.mass)
        src_ion = np.array(src_ion)
        for e in range(times.shape[1]):
            idx = np.nonzero(n_events > e)[0]
            if idx.size == 0:
                break
            src = order[idx, e]
            t = times[idx, src]
            ion = src_ion[src]
            v_atom = np.empty((idx.size, 3))
            u_phi = np.empty(idx.size)
            az = np.empty(idx.size)
            for s_i in np.unique(src):
                sel = src == s_i
                d = src_draw[s_i]
                v_atom[sel] = sigma_a * d["v_atom"][idx[sel]]
                u_phi[sel] = d["u_phi"][idx[sel]]
                az[sel] = d["azimuth"][idx[sel]]
            phi = cfg.angle_dist.ppf(u_phi)

            rot = np.exp(1j * w[None] * t[:, None, None])  # (M, 3, k)
            z = c[:, idx] * rot
            Q = z.real
            Qd = -(w[None, None] * z.imag)
            Bj = np.transpose(B[:, ion, :], (1, 0, 2))  # (M, 3, k)
            sm = sqrt_m[ion]
            s_pos = np.sum(Bj * Q, axis=-1) / sm[:, None]
            s_vel = np.sum(Bj * Qd, axis=-1) / sm[:, None]
            g, dg = micromotion_factor(cfg.trap, t, q=modes.q[ion])
            x = offsets[:, ion]  # (G, M, 3)
            v = s_vel * g + (x + s_pos) * dg
            v_new = collide(v, v_atom, ratios[ion], phi, az)
            d_sdot = (v_new - v) / g
            Qd = Qd + Bj * (sm[:, None, None] * d_sdot[..., None])
            c[:, idx] = (Q - 1j * Qd / w[None, None]) * np.conj(rot)

    # per-ion amplitudes contributed by every mode
    mode_amp = np.abs(c)[:, :, None] * np.abs(np.transpose(B, (1, 0, 2)))[None, None] / sqrt_m[
        None, None, :, None, None
    ]
    P = detection_probability(mode_amp.reshape(G, n, n_ion, -1), np.repeat(cfg.beam_k, n_ion))
    return P, mode_amp, counts


def _crystal_bright(P: np.ndarray, detected: Sequence[bool]) -> dict:
    det = np.asarray(detected)
    out = {}
    for model in DETECTION_MODELS:
        p = P if model == "single" else two_attempts(P)
        out[model] = 1 - np.prod(1 - p[..., det], axis=-1)
    return out


def _grid_offsets(cfg: PassageConfig, modes: NormalModes, emm_grid_j) -> np.ndarray:
    logic = cfg.crystal.ions[0]
    E_dc = field_for_emm_energy(np.asarray(emm_grid_j, dtype=float), logic, cfg.trap)
    if len(cfg.crystal.ions) == 1:
        return equilibrium_offset(E_dc, logic, cfg.trap)[:, None, :]
    return crystal_offsets(modes, cfg.crystal, cfg.trap, E_dc)


def simulate_passage(cfg: PassageConfig, E_emm: float, rng) -> PassageOutcome:
    """One passage of the cloud at excess-micromotion energy ``E_emm`` (J)."""
    modes = normal_modes(cfg.crystal, cfg.trap, cfg.coupled)
    offsets = _grid_offsets(cfg, modes, [E_emm])
    P, amp, counts = _run_kernel(cfg, offsets, 1, _RngDraws(rng), modes)
    bright = {k: float(v[0, 0]) for k, v in _crystal_bright(P, cfg.crystal.detected).items()}
    return PassageOutcome(amp[0, 0], counts[0], P[0, 0], bright)


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class CurveResult:
    crystal: str
    E_emm_mk: np.ndarray
    mean: dict  # model -> (G,)
    stderr: dict
    n_trials: int
    mean_collisions: float
    counts: dict | None = None  # model -> (G,) bright counts when outcomes sampled

    def write_csv(self, path, model: str = "double") -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["E_EMM[k_B*mK]", "mean_Pb", "stderr", "n_trials"])
            for e, m, s in zip(self.E_emm_mk, self.mean[model], self.stderr[model]):
                w.writerow([f"{e:.6g}", f"{m:.10g}", f"{s:.10g}", self.n_trials])


def _block_sums(cfg, offsets, modes, block, n, sample_outcomes):
    draws = _BlockDraws(cfg.seed, block)
    P, _, counts = _run_kernel(cfg, offsets, n, draws, modes)
    bright = _crystal_bright(P, cfg.crystal.detected)
    out = {"n_coll": float(counts.sum(axis=1).sum())}
    for model, p in bright.items():
        out[model] = (p.sum(axis=1), (p**2).sum(axis=1))
    if sample_outcomes:
        u = draws.outcome(n)
        out["hits"] = {m: (u[None, :] < p).sum(axis=1) for m, p in bright.items()}
    return out


def ensemble_curve(
    cfg: PassageConfig,
    emm_grid_mk: Sequence[float],
    threads: int = 1,
    sample_outcomes: bool = False,
) -> CurveResult:
    """Average bright probability on a grid of E_EMM values (k_B x mK).

    Block sums are reduced in block order with ``math.fsum`` so the result is
    identical for any ``threads``. With ``sample_outcomes`` each trial is also
    resolved into a bright/dark outcome, giving synthetic counting data.
    """
    grid = np.atleast_1d(np.asarray(emm_grid_mk, dtype=float))
    if grid.size == 0:
        raise ValueError("empty E_EMM grid")
    if np.any(grid < 0):
        raise ValueError("E_EMM must be non-negative")
    modes = normal_modes(cfg.crystal, cfg.trap, cfg.coupled)
    offsets = _grid_offsets(cfg, modes, mk_to_joule(grid))
    n_blocks = -(-cfg.trials // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, cfg.trials - b * BLOCK_SIZE) for b in range(n_blocks)]

    def work(b):
        return _block_sums(cfg, offsets, modes, b, sizes[b], sample_outcomes)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, range(n_blocks)))
    else:
        parts = [work(b) for b in range(n_blocks)]

    N = cfg.trials
    mean, stderr = {}, {}
    for model in DETECTION_MODELS:
        s1 = np.array([math.fsum(p[model][0][g] for p in parts) for g in range(grid.size)])
        s2 = np.array([math.fsum(p[model][1][g] for p in parts) for g in range(grid.size)])
        m = s1 / N
        mean[model] = m
        if N > 1:
            var = np.maximum((s2 - N * m**2) / (N - 1), 0.0)
            stderr[model] = np.sqrt(var / N)
        else:
            stderr[model] = np.zeros_like(m)
    counts = None
    if sample_outcomes:
        counts = {m: sum(p["hits"][m] for p in parts) for m in DETECTION_MODELS}
    mean_coll = math.fsum(p["n_coll"] for p in parts) / N
    return CurveResult(cfg.crystal.name, grid, mean, stderr, N, mean_coll, counts)


def thermal_floor(cfg: PassageConfig, model: str = "double") -> float:
    """Mean bright probability without collisions (initial temperature only)."""
    res = ensemble_curve(replace(cfg, kappa_L=0.0), [0.0])
    return float(res.mean[model][0])


__all__ = [
    "BLOCK_SIZE",
    "FAL_COEFFS",
    "DETECTION_MODELS",
    "ScatteringAngleDist",
    "sample_scattering_angle",
    "sample_secular_energy",
    "collide",
    "detection_probability",
    "two_attempts",
    "Crystal",
    "crystal_preset",
    "NormalModes",
    "normal_modes",
    "crystal_offsets",
    "PassageConfig",
    "PassageOutcome",
    "simulate_passage",
    "CurveResult",
    "ensemble_curve",
    "thermal_floor",
    "default_beam_k",
]
