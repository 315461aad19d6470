"""probespec command line: one experiment per invocation.

    probespec reconstruct --config run.toml --out results/ --seed 3 --format csv --format svg

Without ``--config`` a built-in preset is used (``--preset`` to pick one).
The default output directory comes from $PROBESPEC_OUT, else ./probespec-out.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import traceback
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import TASKS, ExperimentConfig, config_hash, load, preset, resolved
from .io import EmitError, Results, Table, emit
from .models import BHModel, KitaevModel, ModelError, model_modes
from .probe import ProbeConfig

ENV_OUT = "PROBESPEC_OUT"
DEFAULT_PRESETS = {
    "spectrum": "kitaev-reconstruct",
    "sweep": "kitaev-sweep",
    "reconstruct": "kitaev-reconstruct",
    "correlations": "kitaev-lightcone",
    "bloch": "bloch",
    "lindblad": "lindblad",
    "validate": "validate",
}


class TaskError(RuntimeError):
    pass


# -- builders ------------------------------------------------------------------

def build_model(cfg: ExperimentConfig):
    m = cfg.model
    if m.type == "kitaev":
        return KitaevModel(m.hopping, m.pairing, m.range_exponent, m.sites, m.lattice_constant)
    return BHModel(m.hopping, m.interaction, m.sites, m.condensate_filling, m.lattice_constant)


def build_probe(cfg: ExperimentConfig, model) -> ProbeConfig:
    dim, p = model.dimension, cfg.probe
    return ProbeConfig(coupling=p.coupling, position_offset=(0.0,) * dim,
                       wavefunction_widths=(p.probe_width,) * dim, ground_levels=(0,) * dim,
                       excited_levels=(0,) * dim, wannier_width=p.wannier_width,
                       elastic_overlap=p.elastic_overlap)


def _clean(obj):
    """NaN/inf -> None so the manifest stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _time_and_grid(cfg, model, warnings):
    from .rates import default_nu_grid
    from .reconstruct import measurement_window

    win = measurement_window(model, cfg.probe.coupling, cfg.probe.window_convention)
    if win.empty:
        warnings.append(f"empty measurement window: t_min {win.t_min:.4g} >= t_max {win.t_max:.4g}")
    t = cfg.probe.time if cfg.probe.time != "auto" else cfg.probe.time_factor * win.t_min
    if not win.contains(t):
        warnings.append(f"t = {t:.6g} outside the measurement window [{win.t_min:.6g}, {win.t_max:.6g}]")
    beta = cfg.model.beta
    if cfg.probe.nu_step == "auto" and cfg.probe.nu_min == "auto" and cfg.probe.nu_max == "auto":
        nu = default_nu_grid(model, t, beta)
    else:
        auto = default_nu_grid(model, t, beta)
        lo = auto[0] if cfg.probe.nu_min == "auto" else cfg.probe.nu_min
        hi = auto[-1] if cfg.probe.nu_max == "auto" else cfg.probe.nu_max
        step = 2 * np.pi / (5 * t) if cfg.probe.nu_step == "auto" else cfg.probe.nu_step
        nu = lo + step * np.arange(int(math.floor((hi - lo) / step)) + 1)
    return t, nu, win


def _curves(cfg, model, positions, t, nu, seed):
    from .rates import sweep

    probe = build_probe(cfg, model)
    return [sweep(model, probe, p, nu, t, cfg.model.beta, cfg.probe.form, cfg.probe.elastic, seed)
            for p in positions]


# -- tasks ---------------------------------------------------------------------

def task_spectrum(cfg, seed):
    from .reconstruct import measurement_window

    model = build_model(cfg)
    modes = model_modes(model, cfg.model.beta)
    reps, _ = modes.distinct()
    k = np.abs(modes.momenta[reps])
    cols = {"kx": k[:, 0]} if model.dimension == 1 else {"kx": k[:, 0], "ky": k[:, 1]}
    cols.update(omega=modes.frequency[reps], coupling=modes.coupling[reps],
                degeneracy=modes.degeneracy[reps].astype(float), occupation=modes.occupation[reps])
    order = np.lexsort(tuple(cols[c] for c in reversed(list(cols)[:model.dimension])))
    cols = {c: v[order] for c, v in cols.items()}
    win = measurement_window(model, cfg.probe.coupling, cfg.probe.window_convention)
    res = Results("spectrum", [Table("spectrum", cols)])
    res.summary = {"modes": len(modes), "orbits": int(len(reps)),
                   "window": {"t_min": win.t_min, "t_max": win.t_max, "convention": win.convention,
                              "empty": win.empty}}
    if isinstance(model, BHModel) and not model.superfluid_regime:
        res.warnings.append("U n0 is not small compared with J; Bogoliubov theory is unreliable")
    return res


def task_sweep(cfg, seed):
    model = build_model(cfg)
    res = Results("sweep")
    t, nu, win = _time_and_grid(cfg, model, res.warnings)
    curves = _curves(cfg, model, cfg.probe.positions, t, nu, seed)
    cols = {"nu": nu}
    for c in curves:
        cols[f"rate_{c.config_index}"] = c.values
        res.warnings.extend(c.metadata["warnings"])
    res.tables.append(Table("transition", cols))
    res.summary = {"time": t, "points": int(nu.size), "nu_step": float(nu[1] - nu[0]) if nu.size > 1 else None,
                   "window": {"t_min": win.t_min, "t_max": win.t_max},
                   "values": "time-rescaled rate Gamma / (g^2 t^2)"}
    return res


def task_reconstruct(cfg, seed):
    import dataclasses

    from .reconstruct import (ReconstructionOptions, alt_peaks_at, assign_momenta, detect_peaks)

    model = build_model(cfg)
    res = Results("reconstruct")
    t, nu, win = _time_and_grid(cfg, model, res.warnings)
    dim = model.dimension
    positions = ["I", "II"] if dim == 1 else ["I", "II", "III"]
    curves = _curves(cfg, model, positions, t, nu, seed)
    for c in curves:
        res.warnings.extend(c.metadata["warnings"])
    r = cfg.reconstruct
    opts = ReconstructionOptions(model.grid.sites_per_axis, dim, "cos4" if cfg.probe.form == "kitaev" else "cos2",
                                 model.lattice_constant, r.threshold, r.detection, r.calibration,
                                 exclude_zero=isinstance(model, BHModel), noise=cfg.noise.epsilon,
                                 seed=seed, tolerance=r.tolerance)
    base = detect_peaks(curves[0], r.threshold, r.detection)
    alts = [alt_peaks_at(c, base) for c in curves[1:]]
    runs = []
    first = None
    for s in range(seed, seed + cfg.noise.seeds):
        out = assign_momenta(base, alts, dataclasses.replace(opts, seed=s))
        if first is None:
            first = out
        k = out.momenta.reshape(len(out.frequencies), dim)
        err = np.abs(out.frequencies - model.dispersion(k)) if len(k) else np.zeros(0)
        step = float(nu[1] - nu[0]) if nu.size > 1 else 0.0
        runs.append((s, len(out.frequencies), len(out.unassigned), int(np.sum(err <= step)),
                     float(np.max(err, initial=0.0))))
    cols = first.to_columns()
    k = first.momenta.reshape(len(first.frequencies), dim)
    model_w = model.dispersion(k) if len(k) else np.zeros(0)
    cols["omega_model"] = np.concatenate([model_w, np.full(len(first.unassigned), np.nan)])
    res.tables.append(Table("dispersion", cols))
    if cfg.noise.seeds > 1:
        a = np.array(runs, dtype=float)
        res.tables.append(Table("noise_runs", {"seed": a[:, 0], "assigned": a[:, 1], "unassigned": a[:, 2],
                                               "correct": a[:, 3], "max_omega_error": a[:, 4]}, "none"))
    res.summary = {"time": t, "points": int(nu.size), "peaks": len(base),
                   "assigned": len(first.frequencies), "unassigned": first.unassigned.tolist(),
                   "calibration": first.calibration, "orphans": first.metadata["orphans"],
                   "correct": runs[0][3], "window": {"t_min": win.t_min, "t_max": win.t_max},
                   "seeds": [x[0] for x in runs]}
    if cfg.noise.seeds > 1:
        res.summary["median_correct_fraction"] = float(np.median([x[3] for x in runs]) / max(len(base), 1))
    if len(first.unassigned):
        res.warnings.append(f"{len(first.unassigned)} peak(s) could not be assigned a momentum")
    return res


def task_correlations(cfg, seed):
    from .correlations import ProbePair, default_probe_gap, lightcone_map

    model = build_model(cfg)
    c = cfg.correlations
    half = model.grid.sites_per_axis // 2
    seps = list(range(1, half + 1)) if c.separations == "auto" else c.separations
    if model.dimension == 2:
        seps = [(s, 0) for s in seps]
    nu = default_probe_gap(model, cfg.model.beta) if c.nu == "auto" else c.nu
    origin = 0 if model.dimension == 1 else (0, 0)
    other = 1 if model.dimension == 1 else (1, 0)
    times = np.linspace(c.t_start, c.t_stop, c.t_count)
    cmap = lightcone_map(model, ProbePair(origin, other, nu, c.coupling), seps, times, cfg.model.beta)
    cols = cmap.to_columns(normalized=True)
    if model.dimension == 2:
        cols.pop("dy")
        cols = {"separation": cols.pop("dx"), **cols}
    value = "normalized" if c.normalize else "gamma_bar"
    res = Results("correlations", [Table("lightcone", cols, "heatmap", ("separation", "t", value))])
    arrival = cmap.arrival_times(c.threshold, normalize=False)
    res.summary = {"nu": nu, "beta": cfg.model.beta, "threshold": c.threshold,
                   "arrival_times": arrival, "separations": [list(np.atleast_1d(s)) for s in seps],
                   "sites_per_axis": model.grid.sites_per_axis}
    if isinstance(model, BHModel) and model.grid.sites_per_axis < 121:
        res.summary["scale"] = f"desk scale: {model.grid.sites_per_axis}^2 lattice standing in for 121^2"
    return res


def task_bloch(cfg, seed):
    from .reconstruct import bloch_reconstruct

    b = cfg.bloch
    a = cfg.model.lattice_constant
    m = b.samples_per_period
    h = a / m
    s = np.arange(m) * h
    sp, sw = b.probe_width, b.bloch_width
    psi = lambda x: gaussian(x, sp)  # noqa: E731
    conv = periodic(lambda x: gaussian(x, math.hypot(sp, sw)), a)
    res_b = bloch_reconstruct(conv(s), psi, h, b.regularization)
    truth = periodic(lambda x: gaussian(x, sw), a)(res_b.x)
    err = float(np.max(np.abs(res_b.w - truth)))
    res = Results("bloch", [Table("bloch", {"x": res_b.x, "w_k": res_b.w, "w_true": truth})])
    res.summary = {"max_abs_error": err, "kept_modes": res_b.kept_modes, "spacing": h}
    return res


def gaussian(x, width):
    """Unit-area Gaussian."""
    x = np.asarray(x, dtype=float)
    return np.exp(-x**2 / (2 * width**2)) / (math.sqrt(2 * math.pi) * width)


def periodic(f, period, images: int = 6):
    return lambda x: sum(f(np.asarray(x, dtype=float) + n * period) for n in range(-images, images + 1))


def task_lindblad(cfg, seed):
    from .lindblad import (LindbladParams, decay_rate, evolve_numeric, excited_population,
                           extract_coupling)

    L = cfg.lindblad
    p = LindbladParams(L.weight, L.occupation, L.statistics)
    gamma = decay_rate(p)
    t_end = L.decay_times / gamma if gamma > 0 else L.decay_times
    t = np.linspace(0.0, t_end, L.samples)
    traj = evolve_numeric(p, t)
    closed = excited_population(p, t)
    res = Results("lindblad", [Table("lindblad", {"t": t, "rho_ee": traj.excited, "rho_ee_closed": closed})])
    res.summary = {"decay_rate": gamma, "max_deviation": float(np.max(np.abs(traj.excited - closed))),
                   "max_trace_error": float(np.max(np.abs(traj.trace - 1)))}
    if gamma > 0 and L.occupation > 0:
        fit = extract_coupling(t, traj.excited, L.occupation, L.statistics)
        res.summary["fit"] = {"weight": fit.weight, "residual": fit.residual, "flagged": fit.flagged,
                              "message": fit.message}
        if fit.flagged:
            res.warnings.append(f"coupling fit flagged: {fit.message}")
    return res


def task_validate(cfg, seed):
    from .validate import run_suites

    rows = run_suites(seed)
    res = Results("validate")
    res.tables.append(Table("validate", {"suite": np.arange(len(rows), dtype=float),
                                         "passed": np.array([r["passed"] for r in rows], dtype=float),
                                         "metric": np.array([r["metric"] for r in rows]),
                                         "tolerance": np.array([r["tolerance"] for r in rows])}, "none"))
    res.summary = {"suites": rows, "all_passed": all(r["passed"] for r in rows)}
    width = max(len(r["name"]) for r in rows)
    for r in rows:
        print(f"{r['name']:<{width}}  {'PASS' if r['passed'] else 'FAIL'}  {r['metric']:.3e} (tol {r['tolerance']:.1e})")
    return res


TASK_FUNCS = {
    "spectrum": task_spectrum,
    "sweep": task_sweep,
    "reconstruct": task_reconstruct,
    "correlations": task_correlations,
    "bloch": task_bloch,
    "lindblad": task_lindblad,
    "validate": task_validate,
}


# -- entry point ---------------------------------------------------------------

def run(cfg: ExperimentConfig, out_dir, formats=None, threads: int | None = None) -> dict:
    """Execute ``cfg`` and write its bundle; returns the manifest."""
    if threads:
        import numba

        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    formats = formats or cfg.output.formats
    seed = cfg.seed
    results = TASK_FUNCS[cfg.task](cfg, seed)
    manifest = _clean({
        "tool": "probespec",
        "version": __version__,
        "config_hash": config_hash(cfg),
        "seed": seed,
        "config": resolved(cfg),
    })
    results.summary = _clean(results.summary)
    return emit(results, formats, out_dir, manifest, cfg.output.plot)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="probespec", description="Quantum-probe spectroscopy experiments")
    sub = p.add_subparsers(dest="task", required=True)
    for task in TASKS:
        s = sub.add_parser(task)
        s.add_argument("--config", type=Path, help="TOML experiment file")
        s.add_argument("--preset", help="built-in preset name (ignored with --config)")
        s.add_argument("--out", type=Path, help=f"output directory (default ${ENV_OUT} or ./probespec-out)")
        s.add_argument("--seed", type=int, help="overrides the config seed")
        s.add_argument("--threads", type=int)
        s.add_argument("--format", action="append", choices=["csv", "json", "svg"], dest="formats")
    return p


def _fail(kind: str, message: str, out_dir, code: int) -> int:
    err = {"error": kind, "message": message}
    print(json.dumps(err), file=sys.stderr)
    if out_dir is not None:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(json.dumps(err, indent=2) + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = args.out
    try:
        if args.config is not None:
            cfg = load(args.config)
            if "task" not in cfg.model_fields_set:
                cfg = cfg.model_copy(update={"task": args.task})
            elif cfg.task != args.task:
                return _fail("ConfigError", f"config task {cfg.task!r} does not match subcommand {args.task!r}",
                             out, 2)
        else:
            cfg = preset(args.preset or DEFAULT_PRESETS[args.task])
            cfg = cfg.model_copy(update={"task": args.task})
        cfg = ExperimentConfig.model_validate(resolved(cfg))
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        if out is None:
            out = Path(cfg.output.directory or os.environ.get(ENV_OUT, "probespec-out"))
        t0 = time.perf_counter()
        manifest = run(cfg, out, args.formats, args.threads)
    except ValidationError as exc:
        return _fail("SchemaError", str(exc), out, 2)
    except (OSError, EmitError) as exc:
        return _fail(type(exc).__name__, str(exc), out, 1)
    except (ValueError, ModelError, RuntimeError) as exc:
        return _fail(type(exc).__name__, f"{exc}", out, 1)
    except Exception as exc:  # noqa: BLE001 - surfaced as machine-readable JSON
        return _fail(type(exc).__name__, "".join(traceback.format_exception_only(type(exc), exc)).strip(), out, 1)
    print(f"{args.task}: results in {out} ({time.perf_counter() - t0:.2f} s)")
    for w in manifest["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    if args.task == "validate" and not manifest["summary"].get("all_passed", False):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
