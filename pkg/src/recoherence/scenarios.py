"""Build validated objects from a RunConfig and execute one scenario.

``prepare`` does all object construction (and therefore all precondition
checks) without running anything; ``execute`` runs a prepared scenario and
writes its files into a directory.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bath import (
    DECOHERENCE_NORMALIZATION,
    BathSpec,
    CouplingSchedule,
    adiabaticity_metric,
    renormalization_integral,
)
from .config import RunConfig
from .dephasing import BlochState, run_analytic, run_ode_oracle, run_sudden_decouple, sample_times, write_columns

CONVENTIONS = {
    "decoherence_exponent": "ln J = -c eps^2 D, D = int |h(k)|^2 / omega_k dk (unitary Fourier transform)",
    "kernel_coeff": "kappa = eps^2 D / 4 (eps^2 included so that eps -> 0 removes the kernel)",
    "mass_factor": "M = 1 + eps^2 int |h(k)|^2 / (k^2 + m^2) dk (kernelled form)",
}


@dataclass
class Prepared:
    cfg: RunConfig
    bath: BathSpec | None
    schedule: CouplingSchedule | None
    objects: dict = field(default_factory=dict)


@dataclass
class Result:
    summary: dict
    files: list
    diagnostics: dict = field(default_factory=dict)


def build_bath(cfg: RunConfig, resolve_time: float | None = None) -> BathSpec | None:
    if not cfg.bath:
        return None
    b = dict(cfg.bath)
    if resolve_time is not None and b.get("resolve_time") is None:
        b["resolve_time"] = resolve_time
    return BathSpec.build(
        b["mass"], b["cutoff"],
        nodes_per_panel=int(b.get("nodes_per_panel", 12)),
        k_max=b.get("k_max"),
        resolve_time=b.get("resolve_time"),
    )


def build_schedule(sch: dict | None, bath: BathSpec | None) -> CouplingSchedule | None:
    if sch is None:
        return None
    shape = sch.get("shape", "smooth")
    if "points" in sch:
        return CouplingSchedule.from_points([tuple(p) for p in sch["points"]], shape=shape)
    if "round_trip" in sch:
        rt = sch["round_trip"]
        return CouplingSchedule.round_trip(rt["eps_max"], rt["t_ramp"], rt["t_hold"], shape=shape)
    if "constant" in sch:
        return CouplingSchedule.constant(sch["constant"], sch["T"])
    if bath is None:
        raise ValueError("constant_J needs a bath")
    eps = math.sqrt(-math.log(sch["constant_J"]) / (DECOHERENCE_NORMALIZATION * bath.spectral.D))
    return CouplingSchedule.constant(eps, sch["T"])


def _rho0(block, default=(1.0, 0.0, 0.0)) -> BlochState:
    return BlochState(np.asarray(block.get("rho0", default), float))


def prepare(cfg: RunConfig) -> Prepared:
    """Construct every object the run needs; raises ValueError on bad input."""
    blk = cfg.block
    resolve = None
    if cfg.scenario == "sudden":
        resolve = float(blk["t_final"]) - float(blk.get("t0", 0.0))
        if resolve < 0:
            raise ValueError("block.t_final precedes block.t0")
        resolve = max(resolve, 1.0)
    bath = build_bath(cfg, resolve)
    sched = build_schedule(cfg.schedule, bath)
    p = Prepared(cfg, bath, sched)
    if cfg.scenario == "dephasing":
        p.objects["rho0"] = _rho0(blk)
        method = blk.get("method", "analytic")
        if method in ("ode", "both"):
            omax = float(bath.omega().max())
            integ = blk.get("integrator", "rk4")
            dt = blk.get("dt") or (0.1 / omax if integ == "rk4" else 0.01)
            if integ == "rk4" and dt > 0.1 / omax * (1 + 1e-12):
                raise ValueError(f"block.dt={dt} exceeds 0.1/omega_max = {0.1 / omax:.3e}")
            p.objects["dt"] = dt
        elif method == "analytic" and sched.has_steps:
            raise ValueError("analytic dephasing needs a step-free schedule")
    elif cfg.scenario == "oscillator":
        from .oscillator import OscillatorSpec

        spec = OscillatorSpec.two_packets(
            float(blk["Omega"]), float(blk["separation"]), blk.get("width"),
            int(blk.get("n_points", 2048)), float(blk.get("margin", 6.0)),
        )
        if spec.Omega / bath.mass > 0.1:
            raise ValueError(f"Omega/m = {spec.Omega / bath.mass:.3g}; the oscillator must be slow (Omega << m)")
        if sched.has_steps:
            raise ValueError("oscillator evolution needs a step-free schedule")
        p.objects["spec"] = spec
    elif cfg.scenario == "spinboson":
        from .spin_boson import SpinBosonSpec

        cp = blk.get("c_plus", 1.0)
        cm = blk.get("c_minus", 0.0)
        cp = complex(*cp) if isinstance(cp, list) else complex(cp)
        cm = complex(*cm) if isinstance(cm, list) else complex(cm)
        p.objects["spec"] = SpinBosonSpec(float(blk["Omega"]), bath, sched, cp, cm)
    elif cfg.scenario == "sudden":
        from .sudden import RotationEvent

        p.objects["event"] = RotationEvent.wrapped(float(blk["theta"]), float(blk.get("t0", 0.0)))
        p.objects["rho0"] = _rho0(blk)
    elif cfg.scenario == "oracle-compare":
        mode = blk.get("mode", "calibrate")
        if mode == "dephasing":
            from .fock import OracleConfig

            if "k" not in blk or "weights" not in blk:
                raise ValueError("oracle dephasing comparison needs block.k and block.weights")
            modes = BathSpec.from_modes(bath.mass, bath.cutoff, blk["k"], blk["weights"])
            dt = blk.get("dt") or 0.05 / float(modes.omega().max())
            p.objects["modes"] = modes
            p.objects["oracle"] = OracleConfig.from_bath_grid(modes, sched, dt, fock_dim=int(blk.get("fock_dim", 12)))
            p.objects["rho0"] = _rho0(blk)
        elif mode == "rabi" and bath is None:
            raise ValueError("rabi mode needs a bath")
    return p


# ---------------------------------------------------------------------------


def _plateau_mid(s: CouplingSchedule) -> float:
    best = max(s.segments, key=lambda g: (g.eps_end if g.shape == "plateau" else -1.0, g.duration))
    if best.shape != "plateau":
        t = np.linspace(0, s.T, 2001)
        return float(t[np.argmax(s.values(t)[0])])
    return 0.5 * (best.t_start + best.t_end)


def _run_dephasing(p: Prepared, out: Path) -> Result:
    cfg, bath, s = p.cfg, p.bath, p.schedule
    blk = cfg.block
    rho0 = p.objects["rho0"]
    method = blk.get("method", "analytic")
    files, summary = [], {}
    if method == "sudden":
        tr = run_sudden_decouple(bath, float(blk["eps_max"]), float(blk["t_hold"]), float(blk["t_after"]), rho0,
                                 int(blk.get("n_samples", 201)))
        tr.write_csv(out / "trace.csv")
        files.append("trace.csv")
        summary.update({k: tr.info[k] for k in ("t_step", "J_step", "post_min", "post_max")})
        summary["post_ratio_min"] = tr.info["post_min"] / tr.info["J_step"]
        summary["post_ratio_max"] = tr.info["post_max"] / tr.info["J_step"]
        return Result(summary, files)
    sample_dt = cfg.sample_dt or s.T / 400
    traces = {}
    if method in ("ode", "both"):
        traces["ode"] = run_ode_oracle(bath, s, rho0, p.objects["dt"], sample_dt,
                                       method=blk.get("integrator", "rk4"), backend=blk.get("backend"))
    if method in ("analytic", "both"):
        times = traces["ode"].t if "ode" in traces else None
        traces["analytic"] = run_analytic(bath, s, rho0, sample_dt, times=times)
    for name, tr in traces.items():
        fname = "trace.csv" if len(traces) == 1 else f"{name}.csv"
        tr.write_csv(out / fname)
        files.append(fname)
    main = traces.get("ode", traces.get("analytic"))
    tmid = _plateau_mid(s)
    summary["final_deviation"] = float(np.linalg.norm(main.rho[-1] - rho0.rho_vec))
    summary["plateau_absJ"] = float(np.interp(tmid, main.t, np.abs(main.J)))
    summary["min_absJ"] = float(np.abs(main.J).min())
    summary["adiabaticity_metric"] = adiabaticity_metric(bath, s)
    if len(traces) == 2:
        summary["max_abs_dJ"] = float(np.max(np.abs(traces["ode"].J - traces["analytic"].J)))
    return Result(summary, files)


def _run_oscillator(p: Prepared, out: Path) -> Result:
    from .oscillator import (
        evolve_reduced, fringe_visibility, recombination_time, renormalization, write_diagonals, write_matrix,
    )

    cfg, bath, s, spec = p.cfg, p.bath, p.schedule, p.objects["spec"]
    blk = cfg.block
    eps0 = float(s.values(np.asarray([0.0]))[0][0])
    ren = renormalization(bath, eps0, spec.Omega)
    zero = CouplingSchedule.constant(0.0, max(s.T, 1.0))
    if blk.get("at", "recombination") == "recombination":
        t_rec = recombination_time(spec, bath, eps0)
        t_ref = recombination_time(spec, bath, 0.0)
        if t_rec > s.T or t_ref > zero.T:
            raise ValueError(f"schedule ends at {s.T} before recombination at {max(t_rec, t_ref):.4g}")
        times = [0.0, t_rec]
    else:
        times = [float(t) for t in blk["times"]]
        t_rec = t_ref = None
    mats = [evolve_reduced(spec, bath, s, t) for t in times]
    for m in mats:
        m.check()
    write_diagonals(out / "diagonal.csv", mats)
    files = ["diagonal.csv"]
    if blk.get("dump_matrix"):
        for i, m in enumerate(mats):
            write_matrix(out / f"rho_{i:03d}.csv", m)
            files.append(f"rho_{i:03d}.csv")
    dq = abs(spec.packets[1].center - spec.packets[0].center)
    summary = {
        "M": ren.M, "Omega_tilde": ren.Omega_tilde, "kappa": ren.kernel_coeff,
        "kappa_literal": ren.kernel_coeff_literal, "kappa_dq2": ren.kernel_coeff * dq * dq,
    }
    vis_sep = fringe_visibility(mats[0], "momentum")
    ref0 = evolve_reduced(spec, bath, zero, 0.0)
    summary["visibility_separated"] = vis_sep.value
    summary["visibility_separated_uncoupled"] = fringe_visibility(ref0, "momentum").value
    if t_rec is not None:
        v = fringe_visibility(mats[-1])
        vref = fringe_visibility(evolve_reduced(spec, bath, zero, t_ref))
        summary.update({
            "t_recombine": t_rec, "visibility_recombined": v.value, "fringes_detected": v.detected,
            "t_recombine_uncoupled": t_ref, "visibility_uncoupled": vref.value,
            "visibility_rel_diff": abs(v.value - vref.value) / vref.value if vref.value else math.inf,
        })
    else:
        for t, m in zip(times, mats):
            summary[f"visibility_t{t:g}"] = fringe_visibility(m).value
    return Result(summary, files)


def _run_spinboson(p: Prepared, out: Path) -> Result:
    from .spin_boson import closed_form_entropy, entropy_cycle_stats, run_adiabatic

    spec = p.objects["spec"]
    sample_dt = p.cfg.sample_dt or 0.05 / spec.Omega
    tr = run_adiabatic(spec, sample_dt)
    tr.write_csv(out / "trace.csv")
    summary = {"Omega": spec.Omega, "J_min": float(np.abs(tr.J).min()), "J_max": float(np.abs(tr.J).max())}
    try:
        cyc = entropy_cycle_stats(tr)
        summary.update({"S_min": cyc.S_min, "S_max": cyc.S_max, "period": cyc.period})
    except ValueError as exc:
        summary["cycle"] = str(exc)
    summary["S_closed_form_Jmin"] = closed_form_entropy(summary["J_min"])
    return Result(summary, ["trace.csv"])


SUDDEN_COLUMNS = ("theta", "rho1", "rho2", "rho3", "real_loss_factor", "paper_formula_discrepancy")


def _run_sudden(p: Prepared, out: Path) -> Result:
    from .sudden import apply_sudden_rotation, orthogonality_ratio

    blk, bath = p.cfg.block, p.bath
    ev, rho0 = p.objects["event"], p.objects["rho0"]
    eps0 = float(blk["eps_t0"])
    res = apply_sudden_rotation(bath, eps0, rho0, ev, float(blk["t_final"]))
    row = [ev.theta, *res.bloch_final.rho_vec, res.real_loss_factor, res.literal_discrepancy]
    write_columns(out / "sudden.csv", {k: [v] for k, v in zip(SUDDEN_COLUMNS, row)})
    tab = res.overlap_table
    with open(out / "overlaps.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["overlap", "closed_form", "direct_re", "direct_im", "discrepancy", "budget", "flagged"])
        for lab, cf, d, disc, bud, fl in zip(tab.labels, tab.closed_form, tab.direct, tab.discrepancy, tab.budget, tab.flagged):
            w.writerow([lab, repr(float(cf)), repr(d.real), repr(d.imag), repr(float(disc)), repr(float(bud)), int(fl)])
    summary = dict(zip(SUDDEN_COLUMNS, (float(x) for x in row)))
    summary.update({
        "J_t0": res.J_t0, "J_t0_pow4": res.J_t0**4, "bloch_length": res.bloch_final.length,
        "literal_formula_flagged": bool(res.flagged), "overlaps_flagged": int(tab.flagged.sum()),
        "orthogonality_ratio": orthogonality_ratio(bath, eps0, eps0, float(blk["t_final"]) - ev.t0),
    })
    return Result(summary, ["sudden.csv", "overlaps.csv"])


def _run_oracle(p: Prepared, out: Path) -> Result:
    blk = p.cfg.block
    mode = blk.get("mode", "calibrate")
    if mode == "calibrate":
        from .fock import calibrate_normalization

        kw = {k: blk[k] for k in ("omega", "coupling", "eps", "t_ramp", "t_hold") if k in blk}
        if "fock_dim" in blk:
            kw["fock_dim"] = int(blk["fock_dim"])
        c, resid = calibrate_normalization(**kw)
        summary = {"c": c, "residual": resid, "c_in_use": DECOHERENCE_NORMALIZATION}
        write_columns(out / "calibration.csv", {"c": [c], "residual": [resid]})
        return Result(summary, ["calibration.csv"])
    if mode == "overlap":
        from .fock import overlap_oracle_check

        r = overlap_oracle_check(p.cfg.seed, int(blk.get("n_pairs", 50)), int(blk.get("max_modes", 3)),
                                 int(blk.get("fock_dim", 30)), float(blk.get("max_abs", 1.0)))
        write_columns(out / "overlap_errors.csv", {"pair": np.arange(r["errors"].size), "error": r["errors"]})
        return Result({k: r[k] for k in ("n_pairs", "fock_dim", "max_error")}, ["overlap_errors.csv"])
    if mode == "rabi":
        from .spin_boson import oracle_rabi_check

        kw = {k: blk[k] for k in ("J_target", "k_max", "t_ramp", "t_hold") if k in blk}
        for k in ("n_modes", "fock_dim", "sample_every"):
            if k in blk:
                kw[k] = int(blk[k])
        r = oracle_rabi_check(p.bath, float(blk.get("Omega", 0.05)), **kw)
        r["trace"].trace().write_csv(out / "trace.csv")
        return Result({k: v for k, v in r.items() if k != "trace"}, ["trace.csv"])
    # dephasing: Fock oracle vs forced-mode ODE on the same discrete modes
    from .fock import evolve

    run = evolve(p.objects["oracle"], p.objects["rho0"], int(blk.get("sample_every", 20)))
    fock_tr = run.trace()
    fock_tr.write_csv(out / "fock.csv")
    modes = p.objects["modes"]
    ode = run_ode_oracle(modes, p.schedule, p.objects["rho0"], 0.05 / float(modes.omega().max()), times_hint(run.t))
    ode_J = np.interp(run.t, ode.t, np.abs(ode.J))
    write_columns(out / "ode.csv", {"t": run.t, "absJ": ode_J})
    summary = {
        "max_transverse_diff": float(np.max(np.abs(np.abs(fock_tr.J) - ode_J))),
        "max_leakage": run.max_leakage, "max_norm_drift": run.max_norm_drift,
        "recurrence_time": run.recurrence_time, "config_digest": run.config_digest,
    }
    return Result(summary, ["fock.csv", "ode.csv"])


def times_hint(t: np.ndarray) -> float:
    return float(np.min(np.diff(t))) if t.size > 1 else 1.0


RUNNERS = {
    "dephasing": _run_dephasing,
    "oscillator": _run_oscillator,
    "spinboson": _run_spinboson,
    "sudden": _run_sudden,
    "oracle-compare": _run_oracle,
}


def execute(p: Prepared, out: Path) -> Result:
    out.mkdir(parents=True, exist_ok=True)
    res = RUNNERS[p.cfg.scenario](p, out)
    diag = {"decoherence_normalization": DECOHERENCE_NORMALIZATION, "conventions": CONVENTIONS}
    if p.bath is not None:
        diag["bath"] = p.bath.describe()
        diag["quadrature_errors"] = {"D": p.bath.spectral.quadrature_error}
        diag["spectral_D"] = p.bath.spectral.D
        try:
            diag["quadrature_errors"]["K"] = renormalization_integral(p.bath)[1]
        except Exception:  # reported, never fatal
            diag["quadrature_errors"]["K"] = None
    if p.schedule is not None and p.bath is not None:
        diag["adiabaticity_metric"] = adiabaticity_metric(p.bath, p.schedule)
    res.diagnostics = diag
    return res


__all__ = ["prepare", "execute", "Prepared", "Result", "sample_times"]
