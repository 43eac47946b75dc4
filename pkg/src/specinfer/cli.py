"""Command-line driver.

Every subcommand reads one experiment config (``--config``), applies
``--set section.key=value`` overrides, and writes its artifacts into the
output directory (``--out``, else ``$SPECINFER_OUTPUT_DIR``, else the
config's ``[output] directory``). Each artifact carries the config hash.
Failures print one line ``specinfer: error code=<n> type=<name>: <message>``
on stderr and exit with the code of the error class.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, scenario
from .calibration import (
    Misfit,
    ObservationSet,
    SpectralForwardModel,
    check_derivatives,
    random_admissible,
    sensitivity_cutoff,
    spectrum_to_vector,
    step_sweep,
)
from .calibration.checks import GRADIENT_TOL, HESSIAN_TOL
from .errors import ConsistencyError, NumericalError, SpecInferError, StorageError
from .highfid import Grid2D, PermeabilityRealization, run_upscaled, sample_permeability, solve_darcy
from .interrogation import (
    assumption_report,
    cross_mode_matrix,
    default_times,
    propagate_mode,
)
from .io import (
    ColumnarTable,
    ExperimentConfig,
    export_plot_data,
    read_arrays,
    read_kv,
    spectrum_from_table,
    write_arrays,
    write_kv,
)
from .spectral import propagate_exact, synthesize

logger = logging.getLogger("specinfer")

SUBCOMMANDS = ("gen-frade", "gen-perm", "solve-2d", "upscale", "evolve", "calibrate-map",
               "calibrate-mcmc", "sensitivity", "interrogate", "check-derivatives", "report")


class Context:
    def __init__(self, args):
        self.args = args
        self.cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        for item in args.set or []:
            self.cfg.override(item)
        self.out = args.out or self.cfg.output_directory
        self.hash = self.cfg.content_hash
        try:
            os.makedirs(self.out, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create output directory {self.out}: {exc}") from exc

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def meta(self, **extra) -> dict:
        return {"config_hash": self.hash, **{k: v for k, v in extra.items() if v is not None}}

    def default_input(self, given, name):
        return given if given else self.path(name)


def _series_table(times, x, values, meta) -> ColumnarTable:
    times = np.asarray(times, float)
    return ColumnarTable.from_columns("series", {
        "t": np.repeat(times, len(x)), "x": np.tile(x, len(times)),
        "c": np.asarray(values, float).ravel()}, meta)


def _observations_table(obs: ObservationSet, meta) -> ColumnarTable:
    meta = dict(meta)
    meta["sigma"] = "none" if obs.sigma is None else repr(obs.sigma)
    return ColumnarTable.from_columns("observations", {"x": obs.x, "t": obs.t, "value": obs.values}, meta)


def _load_observations(ctx: Context, path, time=None) -> ObservationSet:
    table = ColumnarTable.read(path)
    if table.schema == "observations":
        s = table.meta.get("sigma", "none")
        sigma = None if s == "none" else float(s)
        o = ctx.cfg["observations"]
        if o["sigma"] is not None:
            sigma = o["sigma"]
        return ObservationSet(table.column("x"), table.column("t"), table.column("value"), sigma)
    if table.schema == "upscaled":
        t_all = table.column("t")
        t = ctx.cfg["observations"]["time"] if time is None else time
        sel = np.isclose(t_all, t, rtol=0, atol=1e-12)
        if not sel.any():
            raise StorageError(f"{path}: no snapshot at t={t}")
        return scenario.upscaled_observations(table.column("x")[sel], t, table.column("mean")[sel],
                                              ctx.cfg["observations"]["sigma"])
    raise StorageError(f"{path}: schema {table.schema!r} holds no observations")


def cmd_gen_frade(ctx: Context) -> None:
    grid = scenario.wave_grid(ctx.cfg)
    consts = scenario.transport_constants(ctx.cfg)
    truth = scenario.truth_spectrum(ctx.cfg)
    ic = scenario.initial_condition(ctx.cfg).on_grid(grid)
    export_plot_data(truth, "spectrum", ctx.path("truth_spectrum.tsv"), ctx.meta())
    obs = scenario.synthetic_observations(ctx.cfg, truth)
    _observations_table(obs, ctx.meta(seed=ctx.cfg["observations"]["seed"])).write(ctx.path("observations.tsv"))
    times = ctx.args.times or [0.0, float(np.max(obs.t))]
    vals = [synthesize(propagate_exact(ic, truth, consts, t)) for t in times]
    _series_table(times, grid.x, vals, ctx.meta(model="frade")).write(ctx.path("solution.tsv"))
    print(f"wrote truth spectrum, {len(obs)} observations, {len(times)} snapshots to {ctx.out}")


def cmd_gen_perm(ctx: Context) -> None:
    grid = scenario.highfid_grid(ctx.cfg)
    seed = ctx.cfg["highfid"]["seed"]
    perm = sample_permeability(grid, scenario.permeability_stats(ctx.cfg), seed)
    write_arrays(ctx.path("permeability.f2d"), {"kappa": perm.kappa},
                 ctx.meta(seed=seed, lx=repr(grid.lx), ly=repr(grid.ly)))
    print(f"log-permeability mean {np.log(perm.kappa).mean():.4f}, variance {np.log(perm.kappa).var():.4f}")


def _load_perm(ctx: Context, path) -> PermeabilityRealization:
    arrays, meta = read_arrays(path)
    if "kappa" not in arrays:
        raise StorageError(f"{path}: no kappa array")
    k = arrays["kappa"]
    lx = float(meta.get("lx", ctx.cfg["highfid"]["lx"]))
    ly = float(meta.get("ly", ctx.cfg["highfid"]["ly"]))
    seed = int(meta["seed"]) if "seed" in meta else None
    return PermeabilityRealization(Grid2D(lx, ly, k.shape[0], k.shape[1]), k, seed, None)


def cmd_solve_2d(ctx: Context) -> None:
    perm = _load_perm(ctx, ctx.default_input(ctx.args.perm, "permeability.f2d"))
    vel = solve_darcy(perm, scenario.transport_settings(ctx.cfg).darcy)
    div = float(np.abs(vel.divergence()).max())
    write_arrays(ctx.path("velocity.f2d"), {"ux": vel.ux, "uy": vel.uy, "pressure": vel.pressure},
                 ctx.meta(seed=perm.seed, pressure_gradient=repr(vel.gradient), max_divergence=repr(div)))
    print(f"mean u_x {vel.mean_velocity:.6g}, max |div u| {div:.3e}")


def cmd_upscale(ctx: Context) -> None:
    grid = scenario.highfid_grid(ctx.cfg)
    if ctx.args.perm:
        perm = _load_perm(ctx, ctx.args.perm)
        grid, source = perm.grid, perm
    else:
        source = scenario.ensemble_spec(ctx.cfg, workers=ctx.args.workers)
    times = ctx.args.times or ctx.cfg["highfid"]["times"]
    ser = run_upscaled(scenario.initial_condition(ctx.cfg), source, grid,
                       scenario.transport_settings(ctx.cfg), times)
    nt, nx = ser.mean.shape
    table = ColumnarTable.from_columns("upscaled", {
        "t": np.repeat(ser.times, nx), "x": np.tile(ser.x, nt),
        "mean": ser.mean.ravel(), "stderr": ser.stderr.ravel()},
        ctx.meta(members=ser.n_members, seeds=",".join(map(str, ser.seeds))))
    table.write(ctx.path("upscaled.tsv"))
    print(f"upscaled {ser.n_members} member(s) at {nt} times")


def cmd_evolve(ctx: Context) -> None:
    grid = scenario.wave_grid(ctx.cfg)
    consts = scenario.transport_constants(ctx.cfg)
    path = ctx.default_input(ctx.args.spectrum, "map_spectrum.tsv")
    spectrum = spectrum_from_table(ColumnarTable.read(path, "spectrum"), grid)
    ic = scenario.initial_condition(ctx.cfg).on_grid(grid)
    times = ctx.args.times or [1.5]
    vals = [synthesize(propagate_exact(ic, spectrum, consts, t)) for t in times]
    name = ctx.args.name or "evolved.tsv"
    _series_table(times, grid.x, vals, ctx.meta(spectrum=os.path.basename(path))).write(ctx.path(name))
    print(f"evolved to {len(times)} time(s) -> {name}")


def _sensitivity_table(sens, meta) -> ColumnarTable:
    n = len(sens.r_sensitivity)
    return ColumnarTable.from_columns("sensitivity", {
        "k": np.arange(1, n + 1), "h_rr": sens.r_sensitivity, "h_thth": sens.theta_sensitivity,
        "active": sens.active_mask[:n].astype(float)}, meta)


def _rescaled_table(theta, active, meta) -> ColumnarTable:
    n = len(theta) // 2
    return ColumnarTable.from_columns("rescaled", {
        "k": np.arange(1, n + 1), "r_star": theta[:n], "theta_star": theta[n:],
        "active": np.asarray(active[:n], float)}, meta)


def _calibrate(ctx: Context):
    obs = _load_observations(ctx, ctx.default_input(ctx.args.data, "observations.tsv"), ctx.args.time)
    res, misfit = scenario.calibrate(ctx.cfg, obs)
    return res, misfit


def cmd_calibrate_map(ctx: Context) -> None:
    res, misfit = _calibrate(ctx)
    meta = ctx.meta()
    export_plot_data(misfit.model.spectrum(res.theta), "spectrum", ctx.path("map_spectrum.tsv"), meta)
    _rescaled_table(res.theta, res.active, meta).write(ctx.path("map_rescaled.tsv"))
    _sensitivity_table(res.sensitivity, meta).write(ctx.path("sensitivity.tsv"))
    pred = misfit.model.observe(res.theta)
    d = misfit.obs.values
    summary = {"config_hash": ctx.hash, "cutoff": res.cutoff, "misfit": repr(res.newton.value),
               "relative_l2": repr(float(np.linalg.norm(pred - d) / np.linalg.norm(d))),
               "converged": res.converged, "reason": res.newton.reason, "iterations": res.newton.n_iter}
    write_kv(ctx.path("calibration.txt"), summary)
    print(f"cutoff {res.cutoff}, J = {res.newton.value:.6e} ({res.newton.reason})")


def cmd_calibrate_mcmc(ctx: Context) -> None:
    res, misfit = _calibrate(ctx)
    chain, post = scenario.sample_posterior(ctx.cfg, misfit, res)
    meta = ctx.meta(seed=ctx.cfg["mcmc"]["seed"])
    n = misfit.model.grid.n_modes
    idx = np.nonzero(post.active)[0]
    names = [f"r{i + 1}" if i < n else f"th{i - n + 1}" for i in idx]
    cols = {"lp": chain.log_posterior, **{nm: chain.states[:, j] for j, nm in enumerate(names)}}
    ColumnarTable.from_columns("chain", cols, meta).write(ctx.path("chain.tsv"))
    export_plot_data(chain, "histogram", ctx.path("histogram.tsv"), dict(meta, params=",".join(names)),
                     bins=ctx.cfg["mcmc"]["bins"])
    ci = chain.central_interval()
    truth = post.reduce(spectrum_to_vector(scenario.truth_spectrum(ctx.cfg)))
    ColumnarTable.from_columns("interval", {
        "param": np.arange(len(idx)), "lo": ci[:, 0], "hi": ci[:, 1],
        "map": post.reduce(res.theta), "truth": truth}, dict(meta, params=",".join(names))).write(
        ctx.path("intervals.tsv"))
    write_kv(ctx.path("mcmc.txt"), {"config_hash": ctx.hash, "samples": len(chain),
                                    "acceptance": repr(chain.acceptance_rate),
                                    "step_size": repr(chain.step_size),
                                    "proposals_outside": chain.proposals_outside})
    print(f"{len(chain)} samples, acceptance {chain.acceptance_rate:.3f}")


def cmd_sensitivity(ctx: Context) -> None:
    obs = _load_observations(ctx, ctx.default_input(ctx.args.data, "observations.tsv"), ctx.args.time)
    misfit = scenario.build_misfit(ctx.cfg, obs)
    grid = misfit.model.grid
    lo, hi = scenario.prior_bounds(ctx.cfg, grid)
    theta0 = scenario.starting_points(ctx.cfg, grid, lo, hi)[0]
    sens = sensitivity_cutoff(misfit, theta0, ctx.cfg["calibration"]["gamma_tol"])
    _sensitivity_table(sens, ctx.meta()).write(ctx.path("sensitivity.tsv"))
    print(f"cutoff {sens.cutoff} of {grid.n_modes} modes")


def _probe_task(args):
    k, source, grid, settings, times = args
    return propagate_mode(k, source, grid, settings, times)


def cmd_interrogate(ctx: Context) -> None:
    cfg = ctx.cfg
    it = cfg["interrogation"]
    grid = scenario.highfid_grid(cfg)
    settings = scenario.transport_settings(cfg, limiter=it["limiter"])
    if ctx.args.perm:
        source = _load_perm(ctx, ctx.args.perm)
        grid = source.grid
    elif it["ensemble_size"] > 0:
        source = scenario.ensemble_spec(cfg, size=it["ensemble_size"], workers=1)
    else:
        source = sample_permeability(grid, scenario.permeability_stats(cfg), cfg["highfid"]["seed"])
    times = default_times(it["t_end"], it["dt_snap"])
    tasks = [(int(k), source, grid, settings, times) for k in it["probes"]]
    workers = ctx.args.workers or cfg["highfid"]["workers"]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            probes = list(pool.map(_probe_task, tasks))
    else:
        probes = [_probe_task(t) for t in tasks]
    for p in probes:
        export_plot_data(p, "logderiv", ctx.path(f"probe_{p.probe}.tsv"), ctx.meta(**p.provenance))
    cm = cross_mode_matrix(probes, times[-1])
    kk, pp = np.meshgrid(cm.ks, cm.probes, indexing="ij")
    ColumnarTable.from_columns("cross_mode", {
        "k": kk.ravel(), "probe": pp.ravel(), "re_m": cm.matrix.real.ravel(),
        "im_m": cm.matrix.imag.ravel()}, ctx.meta(time=repr(cm.time))).write(ctx.path("cross_mode.tsv"))
    rep = assumption_report(probes, it["shift_tol"], it["time_tol"])
    d = rep.to_dict()
    flat = {"config_hash": ctx.hash, "shift_invariance": d["shift_invariance"],
            "time_independence": d["time_independence"], "shift_tol": repr(rep.shift_tol),
            "time_tol": repr(rep.time_tol)}
    for v in rep.verdicts:
        flat[f"mode_{v.probe}_off_diagonal"] = repr(v.off_diagonal)
        flat[f"mode_{v.probe}_log_derivative_variation"] = repr(v.log_derivative_variation)
        flat[f"mode_{v.probe}_real_part_variation"] = repr(v.real_part_variation)
    write_kv(ctx.path("assumptions.txt"), flat)
    with open(ctx.path("assumptions.json"), "w") as fh:
        json.dump(dict(d, config_hash=ctx.hash), fh, indent=2)
        fh.write("\n")
    print(rep.to_text())


def cmd_check_derivatives(ctx: Context) -> None:
    grid = scenario.wave_grid(ctx.cfg)
    consts = scenario.transport_constants(ctx.cfg)
    rng = np.random.default_rng(ctx.args.seed)
    ic = scenario.initial_condition(ctx.cfg).on_grid(grid)
    n_obs = ctx.args.observations
    x = rng.uniform(0, grid.domain_length, n_obs)
    t = rng.uniform(0.05, 1.0, n_obs)
    model = SpectralForwardModel(ic, consts, x, t)
    worst_g = worst_h = 0.0
    last = None
    for _ in range(ctx.args.points):
        theta = random_admissible(grid, rng)
        data = model.observe(random_admissible(grid, rng)) + rng.normal(0, 0.01, n_obs)
        misfit = Misfit(model, ObservationSet(x, t, data, 0.01))
        rep = check_derivatives(misfit, theta)
        worst_g, worst_h = max(worst_g, rep.gradient_error), max(worst_h, rep.hessian_error)
        last = (misfit, theta, rep)
    misfit, theta, rep = last
    sweep = step_sweep(misfit, theta)
    ColumnarTable.from_columns("steps", {"h": list(sweep), "gradient_error": list(sweep.values())},
                               ctx.meta(seed=ctx.args.seed)).write(ctx.path("derivative_steps.tsv"))
    ok = worst_g < GRADIENT_TOL and worst_h < HESSIAN_TOL
    write_kv(ctx.path("derivatives.txt"), {
        "config_hash": ctx.hash, "verdict": "PASS" if ok else "FAIL", "points": ctx.args.points,
        "gradient_error": repr(worst_g), "hessian_error": repr(worst_h),
        "gradient_tol": repr(GRADIENT_TOL), "hessian_tol": repr(HESSIAN_TOL)})
    print(f"{'PASS' if ok else 'FAIL'} gradient {worst_g:.2e}, hessian {worst_h:.2e} over {ctx.args.points} points")
    if not ok:
        raise NumericalError("analytic derivatives disagree with finite differences")


def _artifact_hash(path) -> str | None:
    if path.endswith(".f2d"):
        return read_arrays(path)[1].get("config_hash")
    if path.endswith(".json"):
        try:
            with open(path) as fh:
                return json.load(fh).get("config_hash")
        except (OSError, ValueError) as exc:
            raise StorageError(f"cannot read {path}: {exc}") from exc
    if path.endswith(".txt"):
        return read_kv(path).get("config_hash")
    return ColumnarTable.read(path).meta.get("config_hash")


def cmd_report(ctx: Context) -> None:
    paths = ctx.args.artifacts
    if not paths:
        paths = sorted(os.path.join(ctx.out, f) for f in os.listdir(ctx.out)
                       if f.endswith((".tsv", ".txt", ".f2d", ".json")) and f != "report.txt")
    hashes = {p: _artifact_hash(p) for p in paths}
    distinct = sorted({h for h in hashes.values()}, key=str)
    if len(distinct) > 1 and not ctx.args.force:
        detail = ", ".join(f"{os.path.basename(p)}={h}" for p, h in hashes.items())
        raise ConsistencyError(f"artifacts come from different configs ({detail}); use --force to combine")
    entries = {"config_hash": ctx.hash, "artifacts": len(paths),
               "hashes": ",".join(str(h) for h in distinct), "forced": bool(len(distinct) > 1)}
    for p in paths:
        name = os.path.basename(p)
        entries[f"artifact.{name}"] = hashes[p]
        if p.endswith(".txt"):
            for k, v in read_kv(p).items():
                if k != "config_hash":
                    entries[f"{name}.{k}"] = v
    write_kv(ctx.path("report.txt"), entries)
    print(f"report over {len(paths)} artifact(s) -> {ctx.path('report.txt')}")


COMMANDS = {
    "gen-frade": cmd_gen_frade, "gen-perm": cmd_gen_perm, "solve-2d": cmd_solve_2d,
    "upscale": cmd_upscale, "evolve": cmd_evolve, "calibrate-map": cmd_calibrate_map,
    "calibrate-mcmc": cmd_calibrate_mcmc, "sensitivity": cmd_sensitivity,
    "interrogate": cmd_interrogate, "check-derivatives": cmd_check_derivatives, "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (INI)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config entry; repeatable")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, default=None, help="worker processes for ensembles and probes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="specinfer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    times = dict(type=float, nargs="+", default=None, help="output times")
    s = sub.add_parser("gen-frade", parents=[common], help="synthetic FRADE truth, observations, snapshots")
    s.add_argument("--times", **times)
    sub.add_parser("gen-perm", parents=[common], help="sample a log-normal permeability field")
    s = sub.add_parser("solve-2d", parents=[common], help="Darcy velocity for a stored permeability")
    s.add_argument("--perm")
    s = sub.add_parser("upscale", parents=[common], help="2D transport reduced to depth averages")
    s.add_argument("--perm", help="stored realization; default samples the configured ensemble")
    s.add_argument("--times", **times)
    s = sub.add_parser("evolve", parents=[common], help="propagate the IC under a stored spectrum")
    s.add_argument("--spectrum")
    s.add_argument("--times", **times)
    s.add_argument("--name", help="output file name")
    for name, helptext in (("calibrate-map", "Newton MAP point"), ("calibrate-mcmc", "posterior samples"),
                           ("sensitivity", "Hessian-diagonal mode selection")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--data", help="observations or upscaled table")
        s.add_argument("--time", type=float, default=None, help="snapshot to use from an upscaled table")
    s = sub.add_parser("interrogate", parents=[common], help="Fourier-mode probes of the 2D model")
    s.add_argument("--perm")
    s = sub.add_parser("check-derivatives", parents=[common], help="finite-difference derivative check")
    s.add_argument("--points", type=int, default=20)
    s.add_argument("--observations", type=int, default=30)
    s.add_argument("--seed", type=int, default=0)
    s = sub.add_parser("report", parents=[common], help="combine artifacts after a hash check")
    s.add_argument("artifacts", nargs="*")
    s.add_argument("--force", action="store_true", help="combine despite mismatched config hashes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](Context(args))
    except SpecInferError as exc:
        msg = " ".join(str(exc).split())
        print(f"specinfer: error code={exc.exit_code} type={type(exc).__name__}: {msg}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
