"""Command-line entry point: verify, spectrum, evolve, stability.

Every command reads one JSON config (all fields defaulted), applies --set
overrides, writes a JSON report plus a run manifest named by the config
hash, and returns 0 on success, 1 on configuration errors, 2 when a
scientific check fails.  Re-running a manifest reproduces the outputs
byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import closed_forms as cf
from . import config as cfgmod
from . import evolution as ev
from . import functionals as fn
from . import grid as gr
from . import spectral as sp
from . import stability as st


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which this tool reserves for
    # scientific failures; remap to the config-error code
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="breatherlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "verify": "closed-form identity suite",
        "spectrum": "linearized-operator spectrum and Wronskian analysis",
        "evolve": "time evolution with conservation monitoring",
        "stability": "perturbed-breather modulation experiment",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="FILE", help="JSON config or manifest")
        p.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="KEY=VALUE", help="dotted config override")
        p.add_argument("--out", default=".", metavar="DIR", help="output directory")
    return parser


def _auto_frame(config: dict) -> float:
    speed = config["integrator"]["frame_speed"]
    if speed is not None:
        return speed
    if config["evolve"]["initial"] == "soliton":
        return config["evolve"]["soliton_c"]
    return -(3.0 * config["alpha"] ** 2 - config["beta"] ** 2)


def _integrator(config: dict, frame_speed: float, boundary_margin=None) -> ev.IntegratorConfig:
    integ = config["integrator"]
    margin = integ["boundary_margin"] if integ["boundary_margin"] is not None else boundary_margin
    return ev.IntegratorConfig(
        dt=integ["dt"],
        t_end=integ["t_end"],
        frame_speed=frame_speed,
        dealias=integ["dealias"],
        monitor_stride=integ["monitor_stride"],
        boundary_margin=margin,
    )


def _residual_grid(config: dict) -> gr.PeriodicGrid:
    # sup-norm residuals need the wide, fine grid; see the grid module notes
    return gr.PeriodicGrid(44.0 / min(config["beta"], 1.0), config["verify"]["residual_n_points"])


def _cmd_verify(config: dict, outdir: str, prefix: str):
    p = cfgmod.breather_params(config)
    t = config["t"]
    alpha, beta = p.alpha, p.beta
    gamma = 3.0 * alpha**2 - beta**2
    quad_grid = cfgmod.make_grid(config)
    res_grid = _residual_grid(config)

    b = gr.sample(lambda tt, xx: cf.breather(p, tt, xx), quad_grid, t)
    report = fn.functional_report(b, p)
    checks: dict[str, dict] = {}

    def add(name: str, residual: float, bound: float) -> None:
        checks[name] = {"residual": residual, "bound": bound, "pass": bool(residual < bound)}

    add("mass_closed_form", abs(report.mass - 4.0 * beta) / (4.0 * beta), 1e-10)
    energy_exact = (4.0 / 3.0) * beta * gamma
    add("energy_closed_form",
        abs(report.energy - energy_exact) / max(abs(energy_exact), 1e-12), 1e-8)

    wein = fn.weinstein_derivatives(p, quad_grid, t)
    wein_dev = max(
        abs(wein["dmass_dalpha"]),
        abs(wein["dmass_dbeta"] - 4.0),
        abs(wein["denergy_dalpha"] - 8.0 * alpha * beta),
        abs(wein["denergy_dbeta"] - 4.0 * (alpha**2 - beta**2)),
    )
    add("weinstein_conditions", wein_dev, 1e-6)

    g_res = fn.stationary_residual(p, res_grid, t, gamma_scale=config["verify"]["gamma_scale"])
    sup_b = float(np.max(np.abs(cf.breather(p, t, res_grid.nodes))))
    add("stationary", float(np.max(np.abs(g_res.values))), 1e-6 * max(1.0, sup_b**5))

    bounds = {
        fn.IdentityKind.SECOND_ORDER: 1e-6,
        fn.IdentityKind.FIRST_ORDER: 1e-6,
        fn.IdentityKind.MIXED: 1e-6,
        fn.IdentityKind.MASS_PROFILE: 1e-8,
        fn.IdentityKind.WRONSKIAN: 1e-8,
    }
    for kind, bound in bounds.items():
        rep = fn.identity_report(kind, p, res_grid, t)
        add(kind.value, rep.sup_residual / rep.scale, bound)
    soliton = cf.SolitonParams(c=config["evolve"]["soliton_c"])
    rep = fn.identity_report(fn.IdentityKind.SOLITON_ODE, soliton, res_grid, t)
    add(rep.kind, rep.sup_residual, 1e-8)

    # energy-functional expansion at a seeded H^2-norm-0.1 perturbation
    rng = np.random.default_rng(config["seed"])
    coeff = np.zeros(quad_grid.wavenumbers.shape[0], dtype=complex)
    band = (quad_grid.wavenumbers >= 0.2) & (quad_grid.wavenumbers <= 2.5)
    coeff[band] = rng.standard_normal(int(band.sum())) + 1j * rng.standard_normal(int(band.sum()))
    z = gr.GridField(quad_grid, np.fft.irfft(coeff, n=quad_grid.n_points))
    z = z.with_values(0.1 * z.values / gr.sobolev_norm(z, 2))
    u = b.with_values(b.values + z.values)
    h_u = fn.h_value(u, p)
    closure = abs(h_u - fn.h_value(b, p) - 0.5 * fn.quadratic_form(z, p, t) - fn.remainder(z, p, t))
    add("lyapunov_expansion", closure / max(abs(h_u), 1e-30), 1e-9)

    pass_fail = {name: entry["pass"] for name, entry in checks.items()}
    report_doc = {
        "functionals": {
            "mass": report.mass,
            "energy": report.energy,
            "f": report.f_value,
            "h": report.h_value,
        },
        "checks": checks,
    }
    return report_doc, pass_fail, []


def _cmd_spectrum(config: dict, outdir: str, prefix: str):
    p = cfgmod.breather_params(config)
    t = config["t"]
    eig_grid = cfgmod.make_grid(config, n_points=config["spectrum"]["n_points"])
    op = sp.assemble(p, eig_grid, t)
    srep = sp.spectrum(op)
    wrep = sp.wronskian_analysis(p, t)

    pass_fail = {
        "negative_count_is_one": srep.negative_count == 1,
        "root_count_matches_negative_count": wrep.root_count == srep.negative_count,
        "lambda0_sq_positive": srep.lambda0_sq > 0.0,
        "wronskian_closed_form": wrep.closed_form_max_err < 1e-8,
    }
    report_doc = {"spectrum": srep.to_dict(), "wronskian": wrep.to_dict(), "sweep": None}

    if config["spectrum"]["phase_sweep"]:
        n_samples = config["spectrum"]["phase_samples"]
        half_period = np.pi / p.alpha
        cases = [
            (replace(p, x1=p.x1 + j * half_period / n_samples), eig_grid, t)
            for j in range(n_samples)
        ]
        reports = sp.sweep_spectra(cases)
        lam = [r.lambda0_sq for r in reports]
        pass_fail["sweep_lambda0_sq_positive"] = bool(all(v > 0.0 for v in lam))
        report_doc["sweep"] = {
            "phase_samples": n_samples,
            "lambda0_sq": lam,
            "lambda0_sq_min": min(lam),
            "negative_counts": [r.negative_count for r in reports],
        }
    return report_doc, pass_fail, []


def _cmd_evolve(config: dict, outdir: str, prefix: str):
    t0 = config["t"]
    grid = cfgmod.make_grid(config)
    if config["evolve"]["initial"] == "breather":
        p = cfgmod.breather_params(config)
        u0 = gr.sample(lambda tt, xx: cf.breather(p, tt, xx), grid, t0)
    else:
        soliton = cf.SolitonParams(c=config["evolve"]["soliton_c"])
        u0 = gr.sample(lambda tt, xx: cf.soliton(soliton, tt, xx), grid, t0)
    cfg = _integrator(config, _auto_frame(config))
    trace = ev.evolve(u0, cfg)

    drift_tol = config["evolve"]["drift_tol"]
    names = ("mass", "energy", "f")
    pass_fail = {
        f"{name}_drift": drift < drift_tol for name, drift in zip(names, trace.max_drift)
    }
    report_doc = {
        "frame_speed": cfg.frame_speed,
        "max_drift": dict(zip(names, trace.max_drift)),
        "drift_tol": drift_tol,
        "monitored_times": [float(trace.times[0]), float(trace.times[-1])],
        "n_checkpoints": int(trace.times.shape[0]),
        "final_sup": float(trace.sup_series[-1]),
    }
    if config["evolve"]["initial"] == "soliton":
        deviation = float(np.max(np.abs(trace.fields[-1].values - u0.values)))
        pass_fail["steady"] = deviation < config["evolve"]["steady_tol"]
        report_doc["steady_deviation"] = deviation

    trace_name = f"{prefix}_trace.csv"
    ev.write_trace_csv(trace, os.path.join(outdir, trace_name))
    ckpt_dir = f"{prefix}_checkpoints"
    os.makedirs(os.path.join(outdir, ckpt_dir), exist_ok=True)
    written = ev.write_checkpoints(trace, os.path.join(outdir, ckpt_dir))
    outputs = [trace_name] + [os.path.join(ckpt_dir, os.path.basename(w)) for w in written]
    return report_doc, pass_fail, outputs


def _cmd_stability(config: dict, outdir: str, prefix: str):
    p = cfgmod.breather_params(config)
    stab = config["stability"]
    grid = cfgmod.make_grid(config, n_points=stab["n_points"])
    perturbation = st.default_perturbations(grid, seed=config["seed"])[stab["perturbation"]]
    cfg = _integrator(config, _auto_frame(config), boundary_margin=5.0 / p.beta)
    etas = list(stab["eta_sweep"]) or [stab["eta"]]
    runs = st.sweep_runs([(p, perturbation, eta, cfg) for eta in etas])

    pass_fail: dict[str, bool] = {}
    outputs: list[str] = []
    summaries = []
    config_hash = cfgmod.config_hash(config)
    for i, run in enumerate(runs):
        audit = st.lyapunov_audit(run, p, tol=stab["closure_tol"])
        h_drift = float(np.max(np.abs(audit.h_u - audit.h_u[0])) / max(abs(audit.h_u[0]), 1e-30))
        stable = run.failure_time is None and run.a0_observed < stab["a0_threshold"]
        audit_ok = not bool(audit.flagged.any()) and h_drift < stab["h_drift_tol"]
        pass_fail[f"run{i}_stable"] = stable
        pass_fail[f"run{i}_audit"] = audit_ok
        csv_name = f"{prefix}_run{i}.csv"
        st.write_stability_csv(run, audit, os.path.join(outdir, csv_name))
        outputs.append(csv_name)
        summaries.append({
            "eta": run.eta,
            "a0_observed": run.a0_observed if run.eta > 0.0 else None,
            "stable_flag": stable,
            "config_hash": config_hash,
            "sup_z_h2": run.sup_z_h2,
            "shift_rate_sup": run.shift_rate_sup,
            "h_drift": h_drift,
            "q_growth_constant": audit.q_growth_constant,
            "pairing_constant": audit.pairing_constant,
            "failure_time": run.failure_time,
            "csv": csv_name,
        })

    report_doc = {"runs": summaries, "sweep": None}
    if len(runs) > 1:
        sups = [run.sup_z_h2 for run in runs]
        # etas are swept largest first; sup should shrink with eta up to slack
        monotone = all(sups[i + 1] <= 1.1 * sups[i] for i in range(len(sups) - 1))
        pass_fail["sweep_monotone"] = monotone
        report_doc["sweep"] = {
            "etas": etas,
            "sup_z_h2": sups,
            "linearity_ratios": [sups[i] / etas[i] for i in range(len(etas))],
        }
    return report_doc, pass_fail, outputs


def _finish(command: str, config: dict, outdir: str, prefix: str,
            report_doc: dict, pass_fail: dict, outputs: list[str]) -> int:
    report_name = f"{prefix}.report.json"
    with open(os.path.join(outdir, report_name), "w", encoding="ascii") as handle:
        handle.write(cfgmod.canonical_json(report_doc))
    manifest = {
        "command": command,
        "config": config,
        "seed": config["seed"],
        "artifact_version": __version__,
        "outputs": outputs + [report_name],
        "pass_fail": pass_fail,
    }
    manifest_name = f"{prefix}.manifest.json"
    with open(os.path.join(outdir, manifest_name), "w", encoding="ascii") as handle:
        handle.write(cfgmod.canonical_json(manifest))
    for name in sorted(pass_fail):
        print(f"[{'PASS' if pass_fail[name] else 'FAIL'}] {name}")
    print(f"report: {os.path.join(outdir, report_name)}")
    print(f"manifest: {os.path.join(outdir, manifest_name)}")
    return 0 if all(pass_fail.values()) else 2


_RUNNERS = {
    "verify": _cmd_verify,
    "spectrum": _cmd_spectrum,
    "evolve": _cmd_evolve,
    "stability": _cmd_stability,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = cfgmod.load_config(args.config)
        cfgmod.apply_overrides(config, args.overrides)
        cfgmod.validate_config(config)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    prefix = f"{args.command}_{cfgmod.config_hash(config)}"
    try:
        report_doc, pass_fail, outputs = _RUNNERS[args.command](config, args.out, prefix)
    except (sp.AssemblyError, sp.ClassificationError, st.ModulationError,
            ev.BlowUpError, ev.DomainExitError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return _finish(args.command, config, args.out, prefix, report_doc, pass_fail, outputs)


if __name__ == "__main__":
    sys.exit(main())
