"""Classical atom-ion binary dynamics in an RF trap.

The ion feels the full time-dependent Mathieu force plus the -C4/R^4
polarization attraction; the atom feels only the latter. Integration uses an
adaptive 8(5,3) Dormand-Prince scheme compiled with numba. The potential is
singular, so the motion inside ``contact_radius`` is not integrated: each
downward crossing is logged as a close contact and the pair is carried through
the inner region analytically (the two-body solution with a vanishing hard
core, i.e. in-and-out through the centre of force) or simply reflected.

Internally everything is scaled: length by the Langevin radius R* at the
reference energy, mass by the reduced mass, and time so that the reference
relative speed is one.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import special, stats
from scipy.integrate._ivp import dop853_coefficients as _dop

from .constants import C4_RB, K_B, RB87_ATOM, RB87_ION, SR88_ION, IonSpecies, joule_to_mk
from .trap_model import TrapConfig, TrajectoryParams, trajectory

log = logging.getLogger(__name__)

INNER_MODES = {"analytic": 0, "reflect": 1}
STATUS = {0: "exited", 1: "timeout", 2: "step-size underflow", 3: "too many steps", 4: "contact overflow"}
MAX_CONTACTS = 4096

_A = np.ascontiguousarray(_dop.A[:_dop.N_STAGES, :_dop.N_STAGES])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_dop.N_STAGES])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)
_GL_X = 0.5 * (_GL_X + 1)
_GL_W = 0.5 * _GL_W


def default_md_trap() -> TrapConfig:
    """The experiment trap as seen by a Rb+ ion."""
    return TrapConfig().for_mass(RB87_ION.mass, SR88_ION.mass)


def langevin_radius(C4: float, E: float) -> float:
    """R* = (C4/E)^(1/4), where the centrifugal barrier of b_c meets E."""
    return (C4 / E) ** 0.25


def critical_impact_parameter(C4: float, E: float) -> float:
    """Classical capture threshold b_c = (4 C4 / E)^(1/4) for -C4/R^4."""
    return (4 * C4 / E) ** 0.25


@dataclass(frozen=True)
class MdConfig:
    trap: TrapConfig = field(default_factory=default_md_trap)
    trap_on: bool = True
    ion: IonSpecies = RB87_ION
    atom: IonSpecies = RB87_ATOM
    C4: float = C4_RB
    contact_radius: float | None = None  # m; default R*/10 at the median energy
    ion_T: float = 0.6e-3
    atom_T: float = 10e-6
    launch_radius: float | None = None  # m; trap off: start distance; trap on: escape radius
    impact_range: float | None = None  # m; free-space impact parameters up to this (default b_c)
    dissociation_radius: float | None = None  # m; separation ending an encounter
    rtol: float = 1e-13
    atol: float = 1e-15
    max_time: float = 2e-4
    max_steps: int = 5_000_000
    inner: str = "analytic"
    seed: int = 0

    def __post_init__(self):
        if not self.C4 > 0:
            raise ValueError("C4 must be positive")
        if self.inner not in INNER_MODES:
            raise ValueError(f"inner must be one of {sorted(INNER_MODES)}")
        if self.ion_T < 0 or self.atom_T < 0:
            raise ValueError("temperatures must be non-negative")
        if self.contact_radius is not None and self.contact_radius >= 0.5 * self.r_star:
            raise ValueError("contact_radius must lie well below the Langevin radius")

    @property
    def mu(self) -> float:
        return self.ion.mass * self.atom.mass / (self.ion.mass + self.atom.mass)

    @property
    def median_energy(self) -> float:
        """Median relative kinetic energy of a Langevin collision (J).

        The Langevin rate does not depend on speed, so colliding pairs carry the
        thermal relative-energy distribution. Each partner contributes a
        Gamma(3/2) energy weighted by mu/m; the median of the sum is approximated
        by the median of a Gamma(3/2) at the combined temperature.
        """
        T_eff = self.mu / self.ion.mass * self.ion_T + self.mu / self.atom.mass * self.atom_T
        return K_B * max(T_eff, 1e-9) * float(special.gammaincinv(1.5, 0.5))

    @property
    def r_star(self) -> float:
        return langevin_radius(self.C4, self.median_energy)

    @property
    def rc(self) -> float:
        return self.contact_radius if self.contact_radius is not None else 0.1 * self.r_star

    @property
    def ion_spread(self) -> float:
        """Largest thermal position spread of the ion (m)."""
        return float(np.sqrt(K_B * max(self.ion_T, 1e-9) / (self.ion.mass * self.trap.omega.min() ** 2)))

    @property
    def b_max_ratio(self) -> float:
        """Free-space impact-parameter range in units of b_c."""
        if self.impact_range is None:
            return 1.0
        return self.impact_range / critical_impact_parameter(self.C4, self.median_energy)

    @property
    def r_launch(self) -> float:
        if self.launch_radius is not None:
            return self.launch_radius
        if self.trap_on:
            return 3 * self.ion_spread + 3 * self.r_star
        return 4 * critical_impact_parameter(self.C4, self.median_energy)

    @property
    def r_diss(self) -> float:
        return self.dissociation_radius if self.dissociation_radius is not None else 4 * self.r_star


# ---------------------------------------------------------------------------
# compiled core
#
# consts: [C4, m_ion, m_atom, trap_on, Omega, t_origin, t_dir, a0, a1, a2, q0, q1, q2]


@njit(cache=True)
def _rhs(t, y, c, out):
    rx = y[6] - y[0]
    ry = y[7] - y[1]
    rz = y[8] - y[2]
    r2 = rx * rx + ry * ry + rz * rz
    f = 4.0 * c[0] / (r2 * r2 * r2)
    for k in range(3):
        out[k] = y[3 + k]
        out[6 + k] = y[9 + k]
    out[3] = f * rx / c[1]
    out[4] = f * ry / c[1]
    out[5] = f * rz / c[1]
    out[9] = -f * rx / c[2]
    out[10] = -f * ry / c[2]
    out[11] = -f * rz / c[2]
    if c[3] != 0.0:
        om = c[4]
        cs = math.cos(om * (c[5] + c[6] * t))
        for k in range(3):
            out[3 + k] -= 0.25 * om * om * (c[7 + k] + 2.0 * c[10 + k] * cs) * y[k]


@njit(cache=True)
def _step(t, y, h, f0, c, K, A, B, C):
    n = y.size
    K[0, :] = f0
    tmp = np.empty(n)
    for s in range(1, 12):
        for i in range(n):
            acc = 0.0
            for j in range(s):
                acc += A[s, j] * K[j, i]
            tmp[i] = y[i] + h * acc
        _rhs(t + C[s] * h, tmp, c, K[s])
    ynew = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(12):
            acc += B[j] * K[j, i]
        ynew[i] = y[i] + h * acc
    _rhs(t + h, ynew, c, K[12])
    return ynew


@njit(cache=True)
def _err_norm(y, ynew, h, K, E3, E5, rtol, atol):
    n = y.size
    e5 = 0.0
    e3 = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        a5 = 0.0
        a3 = 0.0
        for j in range(13):
            a5 += E5[j] * K[j, i]
            a3 += E3[j] * K[j, i]
        e5 += (a5 / sc) ** 2
        e3 += (a3 / sc) ** 2
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * n)


@njit(cache=True)
def _sep(y):
    return math.sqrt((y[6] - y[0]) ** 2 + (y[7] - y[1]) ** 2 + (y[8] - y[2]) ** 2)


@njit(cache=True)
def _radial_speed(y):
    r = _sep(y)
    s = 0.0
    for k in range(3):
        s += (y[6 + k] - y[k]) * (y[9 + k] - y[3 + k])
    return s / r


@njit(cache=True)
def _energy(y, c):
    ki = 0.0
    ka = 0.0
    for k in range(3):
        ki += y[3 + k] ** 2
        ka += y[9 + k] ** 2
    r = _sep(y)
    return 0.5 * c[1] * ki + 0.5 * c[2] * ka - c[0] / r**4


@njit(cache=True)
def _angmom(y, c):
    L = np.zeros(3)
    for base, m in ((0, c[1]), (6, c[2])):
        x0, x1, x2 = y[base], y[base + 1], y[base + 2]
        v0, v1, v2 = y[base + 3], y[base + 4], y[base + 5]
        L[0] += m * (x1 * v2 - x2 * v1)
        L[1] += m * (x2 * v0 - x0 * v2)
        L[2] += m * (x0 * v1 - x1 * v0)
    return L


@njit(cache=True)
def _inner_passage(y, c, rc, mode, glx, glw):
    """Carry the pair through R < rc; returns (new state, elapsed time)."""
    mi = c[1]
    ma = c[2]
    M = mi + ma
    mu = mi * ma / M
    R = np.empty(3)
    V = np.empty(3)
    rcm = np.empty(3)
    vcm = np.empty(3)
    for k in range(3):
        R[k] = y[6 + k] - y[k]
        V[k] = y[9 + k] - y[3 + k]
        rcm[k] = (mi * y[k] + ma * y[6 + k]) / M
        vcm[k] = (mi * y[3 + k] + ma * y[9 + k]) / M
    r = math.sqrt(R[0] ** 2 + R[1] ** 2 + R[2] ** 2)
    rh = R / r
    vr = V[0] * rh[0] + V[1] * rh[1] + V[2] * rh[2]
    vt = V - vr * rh
    vtn = math.sqrt(vt[0] ** 2 + vt[1] ** 2 + vt[2] ** 2)
    Lmag = mu * r * vtn
    E = 0.5 * mu * (V[0] ** 2 + V[1] ** 2 + V[2] ** 2) - c[0] / r**4
    uc = 1.0 / r
    dtheta = 0.0
    dt = 0.0
    ok = mode == 0
    if ok:
        for i in range(glx.size):
            w = glx[i]
            s = 1.0 - w * w
            D = 2 * mu * E * s**4 + 2 * mu * c[0] * uc**4 - Lmag * Lmag * uc * uc * s * s
            if D <= 0.0:
                ok = False
                break
            sq = math.sqrt(D)
            dtheta += glw[i] * 2 * w * Lmag * uc / sq
            dt += glw[i] * 2 * w * mu * s * s / (uc * sq)
        dtheta *= 2.0
        dt *= 2.0
    if not ok:
        dtheta = 0.0
        dt = 0.0
    # outgoing relative state before rotation: radial velocity reversed
    Vout = vt - vr * rh
    Rnew = R.copy()
    Vnew = Vout.copy()
    if vtn > 0.0 and dtheta != 0.0:
        th = vt / vtn
        cs = math.cos(dtheta)
        sn = math.sin(dtheta)
        # rotate within the orbital plane spanned by (rh, th)
        Rnew = r * (cs * rh + sn * th)
        rh2 = cs * rh + sn * th
        th2 = -sn * rh + cs * th
        Vnew = -vr * rh2 + vtn * th2
    out = y.copy()
    for k in range(3):
        cm = rcm[k] + vcm[k] * dt
        out[k] = cm - ma / M * Rnew[k]
        out[6 + k] = cm + mi / M * Rnew[k]
        out[3 + k] = vcm[k] - ma / M * Vnew[k]
        out[9 + k] = vcm[k] + mi / M * Vnew[k]
    return out, dt


@njit(cache=True)
def _locate(t, y, h, f0, c, K, A, B, C, rc):
    """Step length in (0, h] at which the separation falls to rc (Illinois)."""
    a = 0.0
    ga = _sep(y) - rc
    b = h
    yb = _step(t, y, b, f0, c, K, A, B, C)
    gb = _sep(yb) - rc
    side = 0
    for _ in range(100):
        m = (a * gb - b * ga) / (gb - ga)
        ym = _step(t, y, m, f0, c, K, A, B, C)
        gm = _sep(ym) - rc
        if abs(gm) <= 1e-13 * rc or abs(b - a) <= 1e-15 * abs(h):
            return m, ym
        if (gm > 0) == (ga > 0):
            a, ga = m, gm
            if side == 1:
                gb *= 0.5
            side = 1
        else:
            b, gb = m, gm
            if side == -1:
                ga *= 0.5
            side = -1
    return m, ym


@njit(cache=True)
def _integrate(y0, c, rc, r_launch, t_max, rtol, atol, max_steps, mode, track,
               A, B, C, E3, E5, glx, glw, ctimes, cenergy, cgap):
    """Returns (status, n_contacts, t, y, max |dE/E|, max |dL|/|L|, min sep)."""
    y = y0.copy()
    t = 0.0
    K = np.empty((13, y.size))
    f0 = np.empty(y.size)
    _rhs(t, y, c, f0)
    E0 = _energy(y, c)
    L0 = _angmom(y, c)
    L0n = math.sqrt(L0[0] ** 2 + L0[1] ** 2 + L0[2] ** 2)
    dE = 0.0
    dL = 0.0
    r = _sep(y)
    rmin = r
    gap = r
    armed = r < 0.9 * r_launch
    vrel = 0.0
    for k in range(3):
        vrel += (y[9 + k] - y[3 + k]) ** 2
    h = 0.01 * r / math.sqrt(vrel + 1e-300)
    if c[3] != 0.0:
        h = min(h, 0.1 / c[4])
    n = 0
    steps = 0
    while True:
        if t >= t_max * (1 - 1e-14):
            return 1, n, t, y, dE, dL, rmin
        if steps >= max_steps:
            return 3, n, t, y, dE, dL, rmin
        steps += 1
        vrel = 0.0
        for k in range(3):
            vrel += (y[9 + k] - y[3 + k]) ** 2
        hcap = 0.3 * r / math.sqrt(vrel + 1e-300)
        h = min(h, hcap, t_max - t + 1e-300)
        if h < 1e-14 * max(t, hcap):
            return 2, n, t, y, dE, dL, rmin
        ynew = _step(t, y, h, f0, c, K, A, B, C)
        err = _err_norm(y, ynew, h, K, E3, E5, rtol, atol)
        if err > 1.0 or not math.isfinite(err):
            h *= max(0.2, 0.9 * err ** (-1.0 / 8.0)) if math.isfinite(err) else 0.2
            continue
        rnew = _sep(ynew)
        if rnew < rc:
            hc, yc = _locate(t, y, h, f0, c, K, A, B, C, rc)
            if n >= ctimes.size:
                return 4, n, t, y, dE, dL, rmin
            ctimes[n] = t + hc
            cgap[n] = gap
            mi = c[1]
            ma = c[2]
            mu = mi * ma / (mi + ma)
            v2 = 0.0
            for k in range(3):
                v2 += (yc[9 + k] - yc[3 + k]) ** 2
            cenergy[n] = 0.5 * mu * v2 - c[0] / rc**4
            n += 1
            y, dt_in = _inner_passage(yc, c, rc, mode, glx, glw)
            t = t + hc + dt_in
            gap = rc
            rmin = min(rmin, rc)
            r = _sep(y)
            _rhs(t, y, c, f0)
            h = hc if hc > 0 else h
            continue
        t += h
        y = ynew
        for i in range(y.size):
            f0[i] = K[12, i]
        r = rnew
        rmin = min(rmin, r)
        gap = max(gap, r)
        if track:
            e = abs(_energy(y, c) - E0) / abs(E0)
            if e > dE:
                dE = e
            L = _angmom(y, c)
            l = math.sqrt((L[0] - L0[0]) ** 2 + (L[1] - L0[1]) ** 2 + (L[2] - L0[2]) ** 2)
            if L0n > 0:
                l /= L0n
            if l > dL:
                dL = l
        if c[3] != 0.0:
            # trapped ion: the atom has left once it is outside the ion's reach
            ra2 = y[6] ** 2 + y[7] ** 2 + y[8] ** 2
            if ra2 > r_launch * r_launch and y[6] * y[9] + y[7] * y[10] + y[8] * y[11] > 0.0:
                return 0, n, t, y, dE, dL, rmin
        else:
            if r < 0.9 * r_launch:
                armed = True
            if _radial_speed(y) > 0.0:
                if (armed and r > r_launch) or r > 1.2 * r_launch:
                    return 0, n, t, y, dE, dL, rmin
        if err == 0.0:
            h *= 10.0
        else:
            h *= min(10.0, max(0.2, 0.9 * err ** (-1.0 / 8.0)))


# ---------------------------------------------------------------------------
# python interface


@dataclass
class Scaling:
    """Conversion between SI and the internal units."""

    length: float
    time: float
    mass: float

    @property
    def velocity(self):
        return self.length / self.time

    @property
    def energy(self):
        return self.mass * self.velocity**2


def scaling_for(cfg: MdConfig) -> Scaling:
    E = cfg.median_energy
    ell = langevin_radius(cfg.C4, E)
    return Scaling(ell, ell / math.sqrt(2 * E / cfg.mu), cfg.mu)


def _consts(cfg: MdConfig, sc: Scaling, t_origin: float = 0.0, t_dir: float = 1.0) -> np.ndarray:
    trap = cfg.trap
    a = (2 * trap.omega / trap.Omega_rf) ** 2 - 0.5 * trap.q**2
    c = np.zeros(13)
    c[0] = cfg.C4 / (sc.energy * sc.length**4)
    c[1] = cfg.ion.mass / sc.mass
    c[2] = cfg.atom.mass / sc.mass
    c[3] = 1.0 if cfg.trap_on else 0.0
    c[4] = trap.Omega_rf * sc.time
    c[5] = t_origin / sc.time
    c[6] = t_dir
    c[7:10] = a
    c[10:13] = trap.q
    return c


@dataclass
class TrajectoryRecord:
    status: int
    n_contacts: int
    t_end: float  # s
    state_in: np.ndarray  # SI, [r_ion, v_ion, r_atom, v_atom]
    state_out: np.ndarray
    contact_times: np.ndarray
    contact_energies: np.ndarray  # relative energy at each contact (J)
    contact_gaps: np.ndarray  # largest separation since the previous contact (m)
    energy_drift: float
    angmom_drift: float
    min_separation: float

    @property
    def ok(self) -> bool:
        return self.status == 0

    @property
    def deflection(self) -> float:
        """Angle between initial and final relative velocity, in [0, pi]."""
        v0 = self.state_in[9:12] - self.state_in[3:6]
        v1 = self.state_out[9:12] - self.state_out[3:6]
        cosang = np.dot(v0, v1) / (np.linalg.norm(v0) * np.linalg.norm(v1))
        return float(np.arccos(np.clip(cosang, -1.0, 1.0)))

    def encounters(self, r_diss: float) -> list[int]:
        """Contact multiplicities, splitting whenever the pair separated beyond ``r_diss``."""
        out: list[int] = []
        for gap in self.contact_gaps:
            if not out or gap > r_diss:
                out.append(1)
            else:
                out[-1] += 1
        return out


def integrate_trajectory(state, cfg: MdConfig, t_origin: float = 0.0, reverse_time: bool = False,
                         track_invariants: bool | None = None, t_stop: float | None = None) -> TrajectoryRecord:
    """Integrate one atom-ion pair from an SI state ``[r_ion, v_ion, r_atom, v_atom]``.

    ``t_origin`` is the RF phase reference of the initial state (s). With
    ``reverse_time`` the trap clock runs backwards, which together with
    negated velocities retraces a trajectory. ``t_stop`` replaces the exit
    test by a fixed duration (s).
    """
    state = np.asarray(state, dtype=float).reshape(12)
    sc = scaling_for(cfg)
    y = state.copy()
    y[[0, 1, 2, 6, 7, 8]] /= sc.length
    y[[3, 4, 5, 9, 10, 11]] /= sc.velocity
    rc = cfg.rc / sc.length
    if _sep(y) <= 2 * rc:
        raise ValueError("initial separation must be well outside the contact radius")
    c = _consts(cfg, sc, t_origin, -1.0 if reverse_time else 1.0)
    if track_invariants is None:
        track_invariants = not cfg.trap_on
    ctimes = np.zeros(MAX_CONTACTS)
    cen = np.zeros(MAX_CONTACTS)
    cgap = np.zeros(MAX_CONTACTS)
    r_exit = cfg.r_launch / sc.length if t_stop is None else np.inf
    t_max = (cfg.max_time if t_stop is None else t_stop) / sc.time
    status, n, t, yout, dE, dL, rmin = _integrate(
        y, c, rc, r_exit, t_max, cfg.rtol, cfg.atol,
        cfg.max_steps, INNER_MODES[cfg.inner], track_invariants,
        _A, _B, _C, _E3, _E5, _GL_X, _GL_W, ctimes, cen, cgap,
    )
    if t_stop is not None and status == 1:
        status = 0
    out = yout.copy()
    out[[0, 1, 2, 6, 7, 8]] *= sc.length
    out[[3, 4, 5, 9, 10, 11]] *= sc.velocity
    return TrajectoryRecord(
        int(status), int(n), t * sc.time, state, out,
        ctimes[:n] * sc.time, cen[:n] * sc.energy, cgap[:n] * sc.length,
        float(dE), float(dL), rmin * sc.length,
    )


def free_space_state(b: float, E: float, cfg: MdConfig, distance: float | None = None) -> np.ndarray:
    """Zero-momentum pair with asymptotic relative energy ``E`` (J) and impact parameter ``b`` (m).

    The pair starts at a finite distance, so the speed includes the potential
    energy gained there and the transverse offset keeps L = mu v_inf b.
    """
    mi, ma = cfg.ion.mass, cfg.atom.mass
    M = mi + ma
    d = distance if distance is not None else cfg.r_launch
    d = max(d, 1.5 * b)
    v_inf = math.sqrt(2 * E / cfg.mu)
    v = math.sqrt(2 * (E + cfg.C4 / d**4) / cfg.mu)
    x = b * v_inf / v
    z = -math.sqrt(max(d * d - x * x, 0.0))
    R = np.array([x, 0.0, z])
    V = np.array([0.0, 0.0, v])
    return np.concatenate([-ma / M * R, -ma / M * V, mi / M * R, mi / M * V])


def _sample_trap_state(cfg: MdConfig, rng) -> tuple[np.ndarray, float]:
    """Thermal ion at a random RF phase and a slow thermal atom inside its cloud.

    The Langevin rate is speed independent, so collisions happen wherever the
    ion density is high; the atom is placed with the ion's thermal density
    (minus a hole of one dissociation radius around the ion) and a plain
    Maxwell-Boltzmann velocity.
    """
    trap = cfg.trap
    E_mode = cfg.ion_T * K_B * rng.standard_exponential(3)
    A = np.sqrt(2 * E_mode / (cfg.ion.mass * trap.omega**2))
    phi = rng.uniform(0, 2 * np.pi, 3)
    t0 = rng.uniform(0, 2 * np.pi / trap.Omega_rf)
    pos, vel = trajectory(TrajectoryParams(np.zeros(3), A, phi), trap, np.array(t0))
    spread = np.sqrt(K_B * max(cfg.ion_T, 1e-9) / (cfg.ion.mass * trap.omega**2))
    while True:
        ra = spread * rng.normal(size=3)
        if np.linalg.norm(ra - pos) > cfg.r_diss and np.linalg.norm(ra) < cfg.r_launch:
            break
    va = math.sqrt(K_B * max(cfg.atom_T, 1e-12) / cfg.atom.mass) * rng.normal(size=3)
    return np.concatenate([pos, vel, ra, va]), t0


def _trap_trajectory(cfg: MdConfig, index: int) -> TrajectoryRecord:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
    state, t0 = _sample_trap_state(cfg, rng)
    return integrate_trajectory(state, cfg, t_origin=t0)


# ---------------------------------------------------------------------------
# scattering-angle distribution


@dataclass
class AngleDistribution:
    edges: np.ndarray
    density: np.ndarray
    coeffs: np.ndarray  # c0 + c1 phi + c2 phi^2
    angles: np.ndarray
    ks_uniform: float
    ks_forward: float
    n_failed: int = 0

    def pdf(self, phi):
        return np.polyval(self.coeffs[::-1], phi)

    @property
    def fit_integral(self) -> float:
        c0, c1, c2 = self.coeffs
        return c0 * np.pi + c1 * np.pi**2 / 2 + c2 * np.pi**3 / 3

    def table(self) -> str:
        lines = ["# phi_lo,phi_hi,density,fit"]
        for lo, hi, d in zip(self.edges[:-1], self.edges[1:], self.density):
            lines.append(f"{lo:.6f},{hi:.6f},{d:.6f},{self.pdf(0.5 * (lo + hi)):.6f}")
        lines.append(f"# fit: {self.coeffs[0]:.5f} {self.coeffs[1]:+.5f} phi {self.coeffs[2]:+.5f} phi^2")
        return "\n".join(lines) + "\n"


def _free_deflections(cfg: MdConfig, b_over_bc: np.ndarray, energies: np.ndarray, threads: int = 1):
    def run(i):
        bc = critical_impact_parameter(cfg.C4, energies[i])
        c = replace(cfg, launch_radius=4 * bc)
        return integrate_trajectory(free_space_state(b_over_bc[i] * bc, energies[i], c), c, track_invariants=False)

    with ThreadPoolExecutor(max(1, threads)) as ex:
        recs = list(ex.map(run, range(len(b_over_bc))))
    return recs


def scattering_angle_distribution(cfg: MdConfig, samples: int = 2000, bins: int = 18,
                                  threads: int = 1, min_per_bin: int = 40) -> AngleDistribution:
    """Deflection-angle pdf of spiralling (contact-reaching) free-space collisions.

    Impact parameters are stratified uniformly in b^2 below b_c, which is the
    Langevin-weighted population; energies follow the thermal relative-energy
    distribution (the hard-core deflection is scale invariant, so they only
    matter through the contact radius).
    """
    cfg = replace(cfg, trap_on=False)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0xA9,)))
    u = (np.arange(samples) + rng.uniform(size=samples)) / samples
    b = np.sqrt(u) * (1 - 1e-9)
    E = cfg.median_energy / special.gammaincinv(1.5, 0.5) * rng.standard_gamma(1.5, samples)
    E = np.maximum(E, 1e-3 * cfg.median_energy)
    # keep the contact radius fixed in SI while energies vary
    cfg = replace(cfg, contact_radius=min(cfg.rc, 0.2 * langevin_radius(cfg.C4, E.max())))
    recs = _free_deflections(cfg, b, E, threads)
    good = [r for r in recs if r.ok and r.n_contacts >= 1]
    n_failed = sum(1 for r in recs if not r.ok)
    if n_failed:
        log.warning("%d of %d scattering trajectories failed and were excluded", n_failed, samples)
    phi = np.array([r.deflection for r in good])
    if len(phi) < min_per_bin * bins:
        bins = max(4, len(phi) // min_per_bin)
        warnings.warn(f"only {len(phi)} spiralling samples; widened to {bins} bins", RuntimeWarning)
    density, edges = np.histogram(phi, bins=bins, range=(0, np.pi), density=True)
    mid = 0.5 * (edges[1:] + edges[:-1])
    coeffs = np.polynomial.polynomial.polyfit(mid, density, 2)
    # forward-peaked reference: glancing collisions just outside capture
    bg = np.sqrt(1 + 3 * (np.arange(200) + 0.5) / 200)
    glance = _free_deflections(cfg, bg, np.full(200, cfg.median_energy), threads)
    ref = np.array([r.deflection for r in glance if r.ok])
    ks_u = float(stats.kstest(phi, stats.uniform(0, np.pi).cdf).statistic)
    ks_f = float(stats.ks_2samp(phi, ref).statistic)
    return AngleDistribution(edges, density, coeffs, phi, ks_u, ks_f, n_failed)


# ---------------------------------------------------------------------------
# contact statistics


@dataclass
class ContactStatistics:
    pmf: dict[int, float]
    error: dict[int, float]
    n_encounters: int
    n_trajectories: int
    n_excluded: int = 0
    energy_bins: dict = field(default_factory=dict)  # (lo_mK, hi_mK) -> (pmf dict, count)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pmf:
            if min(self.pmf) < 1:
                raise ValueError("PMF support must start at n = 1")
            if abs(sum(self.pmf.values()) - 1) > 1e-9:
                raise ValueError("PMF must sum to 1")

    @property
    def mean(self) -> float:
        return sum(n * p for n, p in self.pmf.items())

    def monotone_tail(self, nsigma: float = 2.0) -> bool:
        """PMF(n) non-increasing for n >= 2 within the error bars."""
        ns = sorted(n for n in self.pmf if n >= 2)
        for a, b in zip(ns, ns[1:]):
            if self.pmf[b] - self.pmf[a] > nsigma * math.hypot(self.error[a], self.error[b]):
                return False
        return True

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    def to_text(self) -> str:
        lines = [f"# {k} = {v}" for k, v in self.meta.items()]
        lines += [
            f"# encounters = {self.n_encounters}",
            f"# trajectories = {self.n_trajectories}",
            f"# excluded = {self.n_excluded}",
        ]
        for (lo, hi), (pm, cnt) in self.energy_bins.items():
            body = " ".join(f"{n}:{p:.6g}" for n, p in sorted(pm.items()))
            lines.append(f"# energy_bin [{lo:g},{hi:g}) mK count={cnt} {body}")
        lines.append("n,probability,error")
        for n in sorted(self.pmf):
            lines.append(f"{n},{self.pmf[n]!r},{self.error[n]!r}")
        return "\n".join(lines) + "\n"


def _pmf_from_counts(counts: list[int]) -> tuple[dict, dict]:
    arr = np.asarray(counts, dtype=int)
    N = arr.size
    pmf, err = {}, {}
    for n in np.unique(arr):
        p = float(np.count_nonzero(arr == n)) / N
        pmf[int(n)] = p
        err[int(n)] = math.sqrt(p * (1 - p) / N)
    return pmf, err


def estimate_pmf(cfg: MdConfig, n_collisions: int = 2500, threads: int = 1,
                 energy_edges_mk=None, chunk: int = 64) -> ContactStatistics:
    """Close-contact multiplicity per encounter from trapped-ion trajectories.

    Trajectories are generated in seed order until ``n_collisions`` encounters
    (n >= 1) are collected; the result depends only on the seed. With the trap
    off, a single free-space collision is simulated per encounter.
    """
    if n_collisions < 2500:
        raise ValueError("need at least 2500 Langevin collisions for a PMF")
    if not cfg.trap_on:
        # free-space collisions cannot rebind: one contact per capture
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0xF5,)))
        b = cfg.b_max_ratio * np.sqrt(rng.uniform(size=n_collisions)) * (1 - 1e-9)
        recs = _free_deflections(cfg, b, np.full(n_collisions, cfg.median_energy), threads)
        counts = [r.n_contacts for r in recs if r.ok and r.n_contacts >= 1]
        pmf, err = _pmf_from_counts(counts)
        return ContactStatistics(pmf, err, len(counts), n_collisions, sum(not r.ok for r in recs),
                                 meta=_meta(cfg))
    encounters, n_traj, excluded = _collect_encounters(cfg, n_collisions, threads, chunk)
    counts = [m for m, _ in encounters]
    pmf, err = _pmf_from_counts(counts)
    bins = {}
    if energy_edges_mk is not None:
        e_mk = joule_to_mk(np.array([e for _, e in encounters]))
        edges = np.asarray(energy_edges_mk, dtype=float)
        for lo, hi in zip(edges[:-1], edges[1:]):
            sel = [c for c, e in zip(counts, e_mk) if lo <= e < hi]
            if sel:
                bins[(float(lo), float(hi))] = (_pmf_from_counts(sel)[0], len(sel))
    if excluded:
        log.warning("%d trajectories excluded (integrator failure or timeout)", excluded)
    stats_ = ContactStatistics(pmf, err, len(counts), n_traj, excluded, bins, _meta(cfg))
    if not stats_.monotone_tail():
        log.warning("PMF(n) is not monotone for n >= 2 within error bars")
    return stats_


def _collect_encounters(cfg: MdConfig, n_collisions: int, threads: int = 1, chunk: int = 64):
    """Encounters (multiplicity, relative energy at first contact) in seed order."""
    encounters: list[tuple[int, float]] = []
    n_traj = 0
    excluded = 0
    with ThreadPoolExecutor(max(1, threads)) as ex:
        while len(encounters) < n_collisions:
            recs = list(ex.map(lambda i: _trap_trajectory(cfg, i), range(n_traj, n_traj + chunk)))
            n_traj += chunk
            for r in recs:
                if not r.ok:
                    excluded += 1
                    continue
                k = 0
                for m in r.encounters(cfg.r_diss):
                    encounters.append((m, r.contact_energies[k]))
                    k += m
    return encounters[:n_collisions], n_traj, excluded


def pmf_sensitivity(cfg: MdConfig, n_collisions: int = 500, factors=(3**-0.5, 1.0, 3**0.5),
                    inner_modes=("analytic", "reflect"), threads: int = 1) -> list[dict]:
    """PMF summary across a 3x range of contact radius and both inner treatments."""
    rows = []
    for mode in inner_modes:
        for f in factors:
            c = replace(cfg, contact_radius=f * 0.1 * cfg.r_star, inner=mode)
            enc, n_traj, excl = _collect_encounters(c, n_collisions, threads)
            counts = np.array([m for m, _ in enc])
            rows.append({
                "inner": mode,
                "contact_radius_over_rstar": 0.1 * f,
                "pmf1": float(np.mean(counts == 1)),
                "pmf_ge2": float(np.mean(counts >= 2)),
                "mean_n": float(counts.mean()),
                "median_n": float(np.median(counts)),
                "trajectories": n_traj,
                "excluded": excl,
            })
    return rows


def _meta(cfg: MdConfig) -> dict:
    return {
        "trap_on": cfg.trap_on,
        "contact_radius_m": f"{cfg.rc:.4e}",
        "langevin_radius_m": f"{cfg.r_star:.4e}",
        "dissociation_radius_m": f"{cfg.r_diss:.4e}",
        "inner": cfg.inner,
        "ion_T_K": cfg.ion_T,
        "atom_T_K": cfg.atom_T,
        "seed": cfg.seed,
    }
