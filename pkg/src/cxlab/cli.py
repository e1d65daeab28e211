"""Command-line entry point: ``cxlab {xi,simulate,pmf,fit,analyze}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import spin_algebra as sa
from .binary_md import MdConfig, default_md_trap, estimate_pmf, scattering_angle_distribution
from .collision_mc import DETECTION_MODELS, PassageConfig, crystal_preset, ensemble_curve
from .config import ConfigError, RunConfig
from .constants import RB87_ION, SR88_ION, c4_from_polarizability, mhz_to_angular
from .rate_inference import (
    CurveSimulator,
    DataError,
    Estimate,
    NumericalError,
    analyze,
    fit_kappa_ratio,
    fit_langevin,
    format_report,
    parse_key_values,
    read_curves,
    read_pmf,
    read_records,
)
from .trap_model import TrapConfig

log = logging.getLogger("cxlab")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SPIN_PRESETS = {"Rb87": sa.RB87, "spinless": sa.SPINLESS}


# ---------------------------------------------------------------------------
# config -> domain objects


def spin_system(rc: RunConfig, preset: str | None = None) -> sa.SpinSystem:
    s = rc["spin"]
    name = preset or s["preset"]
    if name == "custom":
        if None in (s["S"], s["I1"], s["I2"]):
            raise ConfigError("custom spin preset needs spin.S, spin.I1 and spin.I2")
        try:
            return sa.SpinSystem(*(Fraction(s[k]).limit_denominator(2) for k in ("S", "I1", "I2")))
        except ValueError as exc:
            raise ConfigError(f"invalid spin system: {exc}") from None
    if name not in SPIN_PRESETS:
        raise ConfigError(f"spin.preset must be one of {sorted(SPIN_PRESETS) + ['custom']}")
    return SPIN_PRESETS[name]


def trap_config(rc: RunConfig) -> TrapConfig:
    t = rc["trap"]
    try:
        return TrapConfig(
            omega=mhz_to_angular(np.asarray(t["omega_MHz"], float)),
            Omega_rf=mhz_to_angular(t["Omega_rf_MHz"]),
            q=np.asarray(t["q"], float),
            emm_axis=np.asarray(t["emm_axis"], float),
        )
    except ValueError as exc:
        raise ConfigError(f"[trap]: {exc}") from None


def passage_config(rc: RunConfig, seed: int) -> PassageConfig:
    p = rc["passage"]
    try:
        return PassageConfig(
            kappa_L=p["kappa_L"],
            T=p["T_mK"] * 1e-3,
            atom_T=p["atom_T_uK"] * 1e-6,
            trap=trap_config(rc),
            trials=p["trials"],
            seed=seed,
            coupled=p["coupled_modes"],
        )
    except ValueError as exc:
        raise ConfigError(f"[passage]: {exc}") from None


def md_config(rc: RunConfig, seed: int) -> MdConfig:
    m = rc["md"]
    c4 = m["C4_Jm4"] if m["C4_Jm4"] is not None else c4_from_polarizability(m["polarizability_au"])
    nm = lambda v: None if v is None else v * 1e-9
    try:
        return MdConfig(
            trap=trap_config(rc).for_mass(RB87_ION.mass, SR88_ION.mass),
            trap_on=m["trap_on"],
            C4=c4,
            contact_radius=nm(m["contact_radius_nm"]),
            dissociation_radius=nm(m["dissociation_radius_nm"]),
            ion_T=m["ion_T_mK"] * 1e-3,
            atom_T=m["atom_T_uK"] * 1e-6,
            rtol=m["rtol"],
            atol=m["rtol"] * 1e-2,
            max_time=m["max_time_us"] * 1e-6,
            inner=m["inner"],
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"[md]: {exc}") from None


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"no {what} file configured")
    if not path.is_file():
        raise DataError(f"{what} file not found: {path}")
    return path


def _fmt_q(x) -> str:
    return str(Fraction(x).limit_denominator(2))


# ---------------------------------------------------------------------------
# commands


def cmd_xi(rc: RunConfig, args) -> int:
    sys_ = spin_system(rc, args.preset)
    s = dict(rc["spin"])
    if args.preset and args.preset != s["preset"]:
        # configured manifolds belong to the configured system
        s["entrance_manifold"] = s["exit_manifolds"] = None
    tS, tI1, _ = sys_.twice
    F_in = s["entrance_manifold"] if s["entrance_manifold"] is not None else Fraction(tS + tI1, 2)
    try:
        rho = sa.mixed_state(sys_, atom_manifold=Fraction(F_in).limit_denominator(2))
        if args.all_channels:
            xi = sa.compute_xi(rho, np.eye(sys_.dim), sys_)
            print(f"xi(all channels) = {round(xi, 12):.12g}")
            return EXIT_OK
        exits = s["exit_manifolds"] if s["exit_manifolds"] is not None else [Fraction(abs(tS - tI1), 2)]
        for F in exits:
            xi = sa.compute_xi(rho, sa.hyperfine_projector(sys_, Fraction(F).limit_denominator(2)), sys_)
            print(f"xi(F={_fmt_q(F)} exit) = {round(xi, 12):.12g}")
    except ValueError as exc:
        raise ConfigError(f"invalid spin specification: {exc}") from None
    return EXIT_OK


def cmd_simulate(rc: RunConfig, args) -> int:
    base = passage_config(rc, args.seed)
    p = rc["passage"]
    model = p["detection"]
    if model not in DETECTION_MODELS:
        raise ConfigError(f"passage.detection must be one of {DETECTION_MODELS}")
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    fa = p["false_alarm"]
    lines = ["[simulate]"]
    for name in p["crystals"]:
        try:
            cfg = replace(base, crystal=crystal_preset(name, p["kappa_ratio"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        res = ensemble_curve(cfg, p["E_emm_grid_mK"], threads=args.threads)
        path = out / f"curve_{name}.csv"
        res.write_csv(path, model)
        print(f"{name}: wrote {path.name} ({len(res.E_emm_mk)} points, {res.n_trials} trials)")
        lines.append(f"{name}.mean_collisions = {res.mean_collisions!r}")
        lines.append(f"{name}.floor_with_false_alarm = {1 - (1 - fa) * (1 - res.mean[model][0])!r}")
    (out / "simulate_summary.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_pmf(rc: RunConfig, args) -> int:
    cfg = md_config(rc, args.seed)
    m = rc["md"]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    stats = estimate_pmf(cfg, m["n_collisions"], threads=args.threads, energy_edges_mk=m["energy_bins_mK"])
    stats.write(out / "pmf.csv")
    print(f"wrote pmf.csv: {stats.n_encounters} encounters, PMF(1) = {stats.pmf.get(1, 0.0):.4f}, "
          f"mean n = {stats.mean:.3f}, excluded = {stats.n_excluded}")
    if not stats.monotone_tail():
        print("warning: PMF(n) not monotone for n >= 2 within error bars")
    if m["angle_samples"] > 0:
        ang = scattering_angle_distribution(cfg, m["angle_samples"], threads=args.threads)
        (out / "angles.csv").write_text(ang.table())
        c = ang.coeffs
        print(f"wrote angles.csv: f(phi) = {c[0]:.4f} {c[1]:+.4f} phi {c[2]:+.4f} phi^2")
    return EXIT_OK


def _simulator(rc: RunConfig, seed: int, threads: int) -> CurveSimulator:
    p = rc["passage"]
    return CurveSimulator(passage_config(rc, seed), p["detection"], p["false_alarm"], threads)


def cmd_fit(rc: RunConfig, args) -> int:
    curves = read_curves(_require(rc.resolve(rc["inference"]["curves"]), "curves"))
    sim = _simulator(rc, args.seed, args.threads)
    inf = rc["inference"]
    main = [c for c in curves if c.crystal in ("Sr", "Sr-Sr")]
    mixed = [c for c in curves if c.crystal == "Sr-Rb"]
    if not main:
        raise DataError("fit needs Sr and/or Sr-Sr curves")
    res = fit_langevin(main, sim, inf["T_grid_mK"], inf["kappa_grid"])
    if not np.all(np.isfinite(res.cov)):
        raise NumericalError("chi^2 surface has no usable curvature at the optimum")
    T, kappa = res.estimate("T"), res.estimate("kappa_L")
    lines = [
        "# Langevin-rate fit",
        f"T       = {T.value * 1e3:.4f} +- {T.sigma * 1e3:.4f} mK",
        f"kappa_L = {kappa.value:.4f} +- {kappa.sigma:.4f}",
        f"chi2/ndof = {res.chi2:.2f}/{res.ndof}, evaluations = {res.n_evals}, converged = {res.converged}",
    ]
    kv = {"T_K": T, "kappa_L": kappa}
    if mixed:
        ratio = fit_kappa_ratio(mixed, sim, T, kappa, cov=res.cov)
        lines.append(f"kappa_Rb/kappa_Sr = {ratio.value:.4f} +- {ratio.sigma:.4f}")
        kv["kappa_ratio"] = ratio
    lines += ["", "[fit]"]
    for k, e in kv.items():
        lines += [f"{k} = {e.value!r}", f"{k}_sigma = {e.sigma!r}"]
    lines += [f"chi2 = {res.chi2!r}", f"ndof = {res.ndof}", f"converged = {int(res.converged)}"]
    text = "\n".join(lines) + "\n"
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "fit_report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_analyze(rc: RunConfig, args) -> int:
    inf = rc["inference"]
    records = read_records(_require(rc.resolve(inf["records"]), "records"))
    pmf = read_pmf(_require(rc.resolve(inf["pmf"]), "pmf"))
    T_fit = None
    fit_path = rc.resolve(inf["fit_report"])
    if fit_path is not None:
        kv = parse_key_values(_require(fit_path, "fit report").read_text(), "fit")
        if "kappa_L" not in kv:
            raise DataError(f"{fit_path}: no kappa_L in the [fit] block")
        kappa = Estimate(kv["kappa_L"], kv.get("kappa_L_sigma", 0.0))
        if "T_K" in kv:
            T_fit = Estimate(kv["T_K"], kv.get("T_K_sigma", 0.0))
    else:
        kappa = Estimate(inf["kappa_L"], inf["kappa_L_sigma"])
    sys_ = spin_system(rc)
    tS, tI1, _ = sys_.twice
    rho = sa.mixed_state(sys_, atom_manifold=Fraction(tS + tI1, 2))
    xi = sa.compute_xi(rho, sa.hyperfine_projector(sys_, Fraction(abs(tS - tI1), 2)), sys_)
    result = analyze(records, pmf, kappa, xi, inf["eta"], T_fit)
    text = format_report(result)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {"xi": cmd_xi, "simulate": cmd_simulate, "pmf": cmd_pmf, "fit": cmd_fit, "analyze": cmd_analyze}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cxlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", type=Path, help="TOML run configuration (defaults if omitted)")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--out", type=Path, help="output directory (overrides the config)")
    ap.add_argument("--threads", type=int, default=1, help="worker cap")
    ap.add_argument("--all-channels", action="store_true", help="xi: sum over every exit channel")
    ap.add_argument("--preset", choices=sorted(SPIN_PRESETS), help="xi: spin-system preset")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        rc = cfgmod.load(args.config) if args.config else cfgmod.default()
        args.seed = rc.seed if args.seed is None else args.seed
        args.out = args.out if args.out is not None else rc.out_dir
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](rc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
