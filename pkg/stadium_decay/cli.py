"""
Command-line front end: ``stadium-decay <task> --config FILE``.

Each task writes CSV tables, JSON metadata and a ``summary.json`` with the
pass/fail state of its checks into the output directory. Exit status is 0 on
completion (failed checks included), 2 for configuration errors and 3 for
numerical failures.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import plots
from .config import (
    InitialData,
    RunConfig,
    Task,
    apply_overrides,
    config_hash,
    load_config,
    parse_config,
)
from .damping import DampingKind, build_smooth_m_damping, lemma31_constant, x_minorant
from .evolution import (
    CFL_LIMIT,
    bouncing_ball_data,
    decay_bound_functional,
    eigenfunction_data,
    evolve,
    wing_bump_data,
)
from .exceptions import ConfigError, FitError, StadiumDecayError
from .fitting import fit_decay_with_log
from .geometry import GridMesh, build_mesh
from .mode1d import dyadic_window_maxima, high_mode_check, r0_sweep, window_growth_ratio
from .operator_norm import random_start
from .quasimode import QuasimodeSpec, build_quasimode_mesh, quasimode_defect, quasimode_residual_curve
from .resolvent2d import (
    HelmholtzSystem,
    SweepResult,
    apply_generator_resolvent,
    generator_sweep,
    h10_bound_slack,
    imaginary_identity_defect,
    solve_helmholtz,
    sweep_and_fit,
)
from .results import ResultWriter
from .spectrum import (
    RESIDUAL_TOL,
    assemble_generator,
    band_violations,
    compute_spectrum,
    constant_damping_oracle,
    default_targets,
    lower_halfplane_bound_check,
    match_sets,
    reflection_mismatch,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

ORACLE_TOL = 1e-8
BLOCK_IDENTITY_TOL = 1e-8
H10_SLACK_TOL = -1e-12
AREA_TOL = 0.1

TaskRunner = Callable[[RunConfig, ResultWriter], Dict]


def _mesh(config: RunConfig) -> GridMesh:
    mesh = config.domain.build()
    logger.info("Mesh: %s h=%.5g n_interior=%d", mesh.spec.shape.value, mesh.h, mesh.n_interior)
    return mesh


def run_mesh_info(config: RunConfig, writer: ResultWriter) -> Dict:
    mesh = _mesh(config)
    damping = config.damping.build(mesh)
    summary = mesh.summary()
    writer.write_json("mesh.json", {"mesh": summary, "damping": damping.metadata()})
    error = abs(summary["area_estimate"] - summary["area_exact"]) / summary["area_exact"]
    writer.add_check("n_interior_positive", summary["n_interior"], 0, summary["n_interior"] > 0)
    writer.add_check("area_relative_error", error, AREA_TOL, error <= AREA_TOL)
    return {}


def _identity_table(config: RunConfig, mesh: GridMesh, damping) -> pd.DataFrame:
    """Imaginary-part identity and H^1_0 bound on one seeded solve per frequency."""
    rows = []
    f = random_start(mesh.n_interior, config.seed)
    for lam in config.sweep.lambdas:
        system = HelmholtzSystem(mesh, damping, lam)
        u = solve_helmholtz(mesh, damping, lam, f, system=system)
        rows.append(
            {
                "lambda": lam,
                "identity_defect": imaginary_identity_defect(mesh, damping, lam, f, u),
                "h10_slack": h10_bound_slack(mesh, lam, f, u),
            }
        )
    return pd.DataFrame(rows)


def _block_identity_residual(config: RunConfig, mesh: GridMesh, damping) -> float:
    """Worst ``||(lam - A) y - x||_H / ||x||_H`` for ``y`` from the block formula."""
    gen = assemble_generator(mesh, damping)
    x = random_start(gen.dimension, config.seed)
    worst = 0.0
    for lam in config.sweep.lambdas:
        y = apply_generator_resolvent(HelmholtzSystem(mesh, damping, lam), x)
        worst = max(worst, gen.h_norm(lam * y - gen.apply(y) - x) / gen.h_norm(x))
    return worst


def _record_failures(writer: ResultWriter, result: SweepResult) -> None:
    for record in result.failure_records():
        writer.add_failure(record)


def _check_fit_residual(writer: ResultWriter, name: str, result: SweepResult, bound: float) -> None:
    residual = result.fit_residual
    writer.add_check(name, residual, bound, result.fit is not None and residual < bound)


def run_sweep(config: RunConfig, writer: ResultWriter) -> Dict:
    sc = config.sweep
    mesh = _mesh(config)
    damping = config.damping.build(mesh)
    fits = {}

    result = sweep_and_fit(mesh, damping, sc.lambdas, sc.tol, sc.window, config.jobs, config.seed)
    writer.write_table("sweep.csv", result.to_frame())
    fits["resolvent"] = result.fit_summary()
    _record_failures(writer, result)
    writer.add_check("resolvent_alpha", result.fitted_exponent, sc.alpha_bound,
                     result.fit is not None and result.fitted_exponent <= sc.alpha_bound)
    _check_fit_residual(writer, "resolvent_fit_residual", result, sc.residual_bound)
    writer.add_check("sweep_failures", len(result.failures), 0, not result.failures)

    identities = _identity_table(config, mesh, damping)
    writer.write_table("identities.csv", identities)
    worst_defect = float(identities["identity_defect"].max())
    worst_slack = float(identities["h10_slack"].min())
    writer.add_check("imaginary_identity", worst_defect, sc.identity_tol, worst_defect <= sc.identity_tol)
    writer.add_check("h10_bound", worst_slack, H10_SLACK_TOL, worst_slack >= H10_SLACK_TOL)

    if sc.compare_orders:
        alphas = {damping.m: result.fitted_exponent}
        for m in sc.compare_orders:
            if m in alphas:
                continue
            other = sweep_and_fit(mesh, config.damping.build(mesh, m=m), sc.lambdas, sc.tol, sc.window,
                                  config.jobs, config.seed)
            writer.write_table(f"sweep_m{m}.csv", other.to_frame())
            _record_failures(writer, other)
            fits[f"resolvent_m{m}"] = other.fit_summary()
            alphas[m] = other.fitted_exponent
            writer.add_check(f"resolvent_alpha_m{m}", other.fitted_exponent, sc.alpha_bound,
                             other.fit is not None and other.fitted_exponent <= sc.alpha_bound)
            _check_fit_residual(writer, f"resolvent_fit_residual_m{m}", other, sc.residual_bound)
        ordered = [alphas[m] for m in sorted(alphas)]
        decreasing = all(b < a for a, b in zip(ordered, ordered[1:]))
        writer.add_check("alpha_decreases_with_m", {str(m): alphas[m] for m in sorted(alphas)}, "decreasing", decreasing)

    if sc.generator:
        gen_result = generator_sweep(mesh, damping, sc.lambdas, sc.tol, sc.window, config.jobs, config.seed)
        writer.write_table("generator_sweep.csv", gen_result.to_frame())
        _record_failures(writer, gen_result)
        fits["generator"] = gen_result.fit_summary()
        writer.add_check("generator_alpha", gen_result.fitted_exponent, sc.generator_alpha_bound,
                         gen_result.fit is not None and gen_result.fitted_exponent <= sc.generator_alpha_bound)
        block = _block_identity_residual(config, mesh, damping)
        writer.add_check("block_resolvent_identity", block, BLOCK_IDENTITY_TOL, block < BLOCK_IDENTITY_TOL)

    if config.plots:
        writer.write_figure("sweep.svg", plots.sweep_figure(result.to_frame(), result.fit))
    return fits


def _initial_data(config: RunConfig, mesh: GridMesh):
    ec = config.evolve
    if ec.data is InitialData.WING_BUMP:
        return wing_bump_data(mesh)
    if ec.data is InitialData.EIGENFUNCTION:
        return eigenfunction_data(mesh, n=1, k=ec.mode)
    return bouncing_ball_data(mesh, k=ec.mode, x_center=0.5 * mesh.spec.Lx)


def run_evolve(config: RunConfig, writer: ResultWriter) -> Dict:
    ec = config.evolve
    mesh = _mesh(config)
    damping = config.damping.build(mesh)
    dt = ec.dt or CFL_LIMIT * mesh.h
    orders = sorted(set(ec.orders))
    trace = evolve(mesh, damping, _initial_data(config, mesh), ec.T, dt, norm_orders=sorted({0, *orders}))
    writer.write_table("evolve.csv", trace.to_frame(orders))
    writer.write_json("trace.json", {**trace.metadata(), "damping": damping.metadata()})

    if damping.a_max == 0:
        drift = trace.staggered_drift()
        writer.add_check("energy_conservation", drift, ec.conservation_tol, drift <= ec.conservation_tol)
        halved = evolve(mesh, damping, _initial_data(config, mesh), ec.T, dt / 2, norm_orders=())
        coarse, fine = trace.conservation_error(), halved.conservation_error()
        writer.add_check("collocated_energy_drift", coarse, ec.conservation_tol, coarse <= ec.conservation_tol)
        order = coarse / fine if fine > 0 else math.inf
        lo, hi = ec.order_bounds
        writer.add_check("collocated_energy_dt2_order", order, [lo, hi], lo <= order <= hi)
        return {"collocated_energy_error": {"dt": coarse, "dt_half": fine}}

    increase = trace.max_relative_increase()
    writer.add_check("energy_monotone", increase, ec.monotone_slack, increase <= ec.monotone_slack)

    fits: Dict = {"decay_functional": {}}
    late = trace.times >= 2
    for k in orders:
        if trace.T < 2:
            break
        value = decay_bound_functional(trace, k)
        fits["decay_functional"][f"k{k}"] = value
        writer.add_check(f"decay_functional_k{k}_finite", value, "finite", math.isfinite(value))
        if trace.T / 2 >= 2:
            half = decay_bound_functional(trace, k, t_max=trace.T / 2)
            change = abs(value - half) / half if half > 0 else math.inf
            writer.add_check(f"decay_functional_k{k}_doubling", change, ec.doubling_tol, change <= ec.doubling_tol)
        if ec.m is not None:
            improved = decay_bound_functional(trace, k, m=ec.m, eps=ec.eps)
            fits["decay_functional"][f"k{k}_m{ec.m:g}"] = improved
        try:
            fits[f"decay_rate_k{k}"] = fit_decay_with_log(trace.times[late], trace.energies[late], k).to_dict()
        except FitError as exc:
            logger.warning("No decay-rate fit for k=%d: %s", k, exc)

    if config.plots:
        writer.write_figure("evolve.svg", plots.energy_figure(trace.to_frame(orders)))
    return fits


def run_spectrum(config: RunConfig, writer: ResultWriter) -> Dict:
    spc = config.spectrum
    mesh = _mesh(config)
    damping = config.damping.build(mesh)
    gen = assemble_generator(mesh, damping)
    targets = default_targets(spc.window, spc.n_targets) if spc.window is not None else None
    result = compute_spectrum(gen, spc.window, targets, spc.per_target, config.jobs)
    frame = result.to_frame()
    writer.write_table("spectrum.csv", frame)

    worst = float(result.residuals.max()) if result.residuals.size else 0.0
    writer.add_check("eigen_residual", worst, RESIDUAL_TOL, worst <= RESIDUAL_TOL)
    outside = band_violations(result, gen.a_max, spc.band_slack)
    writer.add_check("spectral_band", len(outside), 0, outside.size == 0)

    if spc.window is None:
        mismatch = reflection_mismatch(result)
        scale = max(1.0, float(np.abs(result.eigenvalues).max()))
        writer.add_check("reflection_symmetry", mismatch / scale, ORACLE_TOL, mismatch / scale <= ORACLE_TOL)
        if damping.kind is DampingKind.CONSTANT and mesh.is_rectangle:
            oracle = constant_damping_oracle(mesh, damping.amplitude)
            distance = match_sets(result.eigenvalues, oracle) / scale
            writer.add_check("constant_damping_oracle", distance, ORACLE_TOL, distance <= ORACLE_TOL)

    rows = []
    for re, im in spc.lower_halfplane:
        lam = complex(re, im)
        norm = lower_halfplane_bound_check(gen, lam, max_iter=spc.max_iter, seed=config.seed)
        bound = 1.0 / abs(im) + 1e-6
        rows.append({"re_lambda": re, "im_lambda": im, "norm": norm, "bound": bound})
        writer.add_check(f"lower_halfplane_{re:g}{im:+g}i", norm, bound, norm <= bound)
    if rows:
        writer.write_table("lower_halfplane.csv", pd.DataFrame(rows))

    if config.plots:
        writer.write_figure("spectrum.svg", plots.spectrum_figure(frame, gen.a_max))
    return {"a_max": gen.a_max, "n_eigenvalues": int(result.eigenvalues.size), "method": result.method.value}


def _quasimode_times(k: int, n_times: int, extra: float, horizon: float) -> List[float]:
    times = set(np.linspace(0.5, k / 4, n_times).round(12).tolist())
    if extra <= horizon:
        times.add(extra)
    return sorted(t for t in times if t <= horizon)


def run_quasimode(config: RunConfig, writer: ResultWriter) -> Dict:
    qc = config.quasimode
    specs = [QuasimodeSpec(k, qc.half_length, sigma=qc.sigma, cutoff=qc.cutoff) for k in qc.ks]
    mesh = build_quasimode_mesh(specs[0], qc.h)

    frames, defects, at_ratio_time = [], {}, {}
    for spec in specs:
        times = _quasimode_times(spec.k, qc.n_times, qc.ratio_time, spec.horizon)
        curve = quasimode_residual_curve(mesh, spec, times, qc.dt)
        requested = np.asarray(times)
        if np.any(requested == qc.ratio_time):
            at_ratio_time[spec.k] = float(curve["residual"][requested == qc.ratio_time].iloc[0])
        frames.append(curve[requested <= spec.k / 4])
        defects[f"k{spec.k}"] = quasimode_defect(mesh, spec)
    frame = pd.concat(frames, ignore_index=True)
    writer.write_table("quasimode.csv", frame)

    peaks = frame.groupby("k")["residual_over_t_over_k"].max()
    spread = float(peaks.max() / peaks.min()) if peaks.min() > 0 else math.inf
    writer.add_check("scaled_residual_uniform_in_k", spread, 2.0, spread <= 2.0)

    lo, hi = qc.ratio_bounds
    for k in qc.ks:
        if 2 * k in qc.ks and k in at_ratio_time and 2 * k in at_ratio_time:
            ratio = at_ratio_time[k] / at_ratio_time[2 * k]
            writer.add_check(f"residual_ratio_k{k}_k{2 * k}", ratio, [lo, hi], lo <= ratio <= hi)

    if config.plots:
        writer.write_figure("quasimode.svg", plots.quasimode_figure(frame, qc.ks))
    return {"defects": defects}


def run_r0(config: RunConfig, writer: ResultWriter) -> Dict:
    rc = config.r0
    mesh = _mesh(config)
    damping = config.damping.build(mesh)
    _, a_x = x_minorant(damping)
    hx = mesh.hx

    taus = np.geomspace(rc.tau_min, rc.tau_max, rc.n_tau)
    frame = r0_sweep(taus, a_x, hx)
    writer.write_table("r0.csv", frame)
    windows = pd.DataFrame(dyadic_window_maxima(taus, frame["norm_times_1plustau"]),
                           columns=["tau_lo", "tau_hi", "max_norm_times_1plustau"])
    writer.write_table("r0_windows.csv", windows)
    growth = window_growth_ratio(taus, frame["norm_times_1plustau"])
    writer.add_check("r0_dyadic_window_ratio", growth, rc.window_factor, growth < rc.window_factor)

    rows = []
    for lam in rc.high_mode_lambdas:
        for multiple in rc.high_mode_multiples:
            k = multiple * math.ceil(lam)
            rows.append({"lambda": lam, "k": k,
                         "ratio": high_mode_check(k, lam, rc.trials, a_x, hx, config.seed)})
    high = pd.DataFrame(rows)
    writer.write_table("high_mode.csv", high)
    bound = 2.0 + 10.0 * mesh.h
    worst = float(high["ratio"].max())
    writer.add_check("high_mode_ratio", worst, bound, worst <= bound)
    drift = max(
        (float(b / a) for _, group in high.groupby("lambda")
         for a, b in zip(group["ratio"], group["ratio"].iloc[1:])),
        default=1.0,
    )
    writer.add_check("high_mode_k_independence", drift, 1.0 + rc.k_drift, drift <= 1.0 + rc.k_drift)

    if config.plots:
        writer.write_figure("r0.svg", plots.r0_figure(frame))
    return {"window_growth_ratio": growth}


def run_lemma31(config: RunConfig, writer: ResultWriter) -> Dict:
    lc = config.lemma31
    mesh = _mesh(config)
    fine = build_mesh(mesh.spec, config.domain.h / 2)

    rows = []
    for m in lc.orders:
        amplitude = lc.delta ** m if lc.normalized else config.damping.amplitude
        coarse = build_smooth_m_damping(mesh, m, lc.delta, amplitude)
        refined = build_smooth_m_damping(fine, m, lc.delta, amplitude)
        left, right = coarse.one_sided_derivative_signs()
        writer.add_check(f"one_sided_derivative_signs_m{m}", None, "nonnegative", left and right)
        for n in range(1, m):
            value = lemma31_constant(coarse, n)
            value_fine = lemma31_constant(refined, n)
            rows.append({"m": m, "n": n, "constant": value, "constant_refined": value_fine,
                         "relative_change": abs(value_fine - value) / value})
    table = pd.DataFrame(rows)
    writer.write_table("lemma31.csv", table)

    writer.add_check("constants_finite", None, "finite", bool(np.isfinite(table["constant"]).all()))
    change = float(table["relative_change"].max())
    writer.add_check("refinement_stable", change, lc.refinement_tol, change <= lc.refinement_tol)
    if lc.normalized:
        first = table[table["n"] == 1]
        error = float((first["constant"] - first["m"]).abs().max())
        writer.add_check("first_derivative_constant_equals_m", error, 1e-10, error <= 1e-10)
    return {}


TASKS: Dict[Task, TaskRunner] = {
    Task.MESH_INFO: run_mesh_info,
    Task.SWEEP: run_sweep,
    Task.EVOLVE: run_evolve,
    Task.SPECTRUM: run_spectrum,
    Task.QUASIMODE: run_quasimode,
    Task.R0: run_r0,
    Task.LEMMA31: run_lemma31,
}


def run(config: RunConfig) -> int:
    """
    Execute ``config.task`` and write its artifacts.

    Args:
        config: Validated run configuration

    Returns:
        Exit status (0 done, 2 configuration error, 3 numerical failure)
    """
    writer = ResultWriter(Path(config.output_dir))
    logger.info("Running %s into %s", config.task.value, writer.out_dir)
    try:
        fits = TASKS[config.task](config, writer)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StadiumDecayError as exc:
        logger.error("Numerical failure in %s: %s", config.task.value, exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    writer.write_json("config.json", config.model_dump(mode="json"))
    writer.write_summary(config.task.value, config_hash(config), fits)
    if writer.failures:
        print(f"error: {len(writer.failures)} numerical failure(s), see summary.json", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _parse_set(values: Sequence[str]) -> Dict[str, str]:
    overrides = {}
    for item in values:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        overrides[key.strip()] = value.strip()
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stadium-decay",
        description="Resolvent, spectrum and energy-decay experiments for the damped wave equation on a stadium.",
    )
    parser.add_argument("task", choices=[task.value for task in Task])
    parser.add_argument("--config", type=Path, help="JSON run configuration (defaults when omitted)")
    parser.add_argument("--jobs", type=int, help="Worker threads for independent solves")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--seed", type=int, help="Seed for random starts and trial data")
    parser.add_argument("--plots", action="store_true", help="Also write SVG figures")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a configuration scalar, e.g. domain.h=0.02")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Load ``--config`` (or defaults) and apply the task, flags and ``--set`` overrides."""
    config = load_config(args.config, args.task) if args.config else parse_config({"task": args.task})
    config = apply_overrides(config, _parse_set(args.overrides))
    flags = {"task": args.task, "jobs": args.jobs, "output_dir": args.out, "seed": args.seed}
    if args.plots:
        flags["plots"] = True
    data = config.model_dump(mode="json")
    data.update({key: value for key, value in flags.items() if value is not None})
    return parse_config(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
