"""Command-line front end: sweeps, optimal-segmentation search and validation.

Every command resolves a scenario (preset plus optional JSON overrides),
evaluates its sweep and writes one CSV: ``#``-prefixed metadata lines, then
a header, then data rows (RFC 4180 quoting).  Output files are written
atomically and never appended to.  Exit codes: 0 success, 1 validation
failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import math
import io
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np
from scipy import stats

from . import __version__
from .chain import (
    build_baseline,
    build_failure_chain,
    build_level_dependent,
    completion_probability,
    mean_absorption_time,
    worker_idle_probability,
)
from .collab import bias_sweep
from .config import ScenarioConfig, config_hash, load_config
from .coverage import (
    CoverageQuery,
    RandomSelection,
    RankedSelection,
    ranked_success_probabilities,
    success_probability,
)
from .errors import ConfigError, ParameterError, QuadratureError, UnservableError
from .montecarlo import SimConfig, empirical_delay, empirical_success_curve

BIAS_SCENARIOS = ("base", "low_mu_f", "low_nu_w", "low_nu_r", "high_nu_r")


def _parse_grid(text: str) -> list[float]:
    """Parse "start:stop:step" (inclusive) or a comma-separated list."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must be start:stop:step or a comma list")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("grid step must be positive")
        count = int(round((stop - start) / step))
        values = [start + i * step for i in range(count + 1)]
        return [v for v in values if v <= stop + 1e-9]
    return [float(p) for p in text.split(",") if p.strip()]


def _parse_int_grid(text: str) -> list[int]:
    values = _parse_grid(text)
    out = []
    for v in values:
        if abs(v - round(v)) > 1e-9:
            raise ConfigError(f"expected integers in grid, got {v}")
        out.append(int(round(v)))
    return out


def _parse_selection(text: str):
    if text == "random":
        return RandomSelection()
    if text.startswith("ranked:"):
        try:
            return RankedSelection(int(text.split(":", 1)[1]))
        except (ValueError, ParameterError) as exc:
            raise ConfigError(f"bad selection {text!r}: {exc}") from exc
    raise ConfigError(f"selection must be 'random' or 'ranked:K', got {text!r}")


def _selection_name(selection) -> str:
    return "random" if isinstance(selection, RandomSelection) else f"ranked:{selection.rank}"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(out_path: str | None, metadata: list[tuple[str, object]],
               header: list[str], rows: list[list]):
    """Emit metadata comments, header, then rows; atomic when writing a file."""
    buffer = io.StringIO()
    for key, value in metadata:
        buffer.write(f"# {key}: {_fmt(value)}\r\n")
    writer = csv.writer(buffer, quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(cell) for cell in row])
    payload = buffer.getvalue()
    if out_path is None:
        sys.stdout.write(payload)
        return
    directory = os.path.dirname(os.path.abspath(out_path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(payload)
        os.replace(tmp_path, out_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _base_metadata(command: str, config: ScenarioConfig, seed: int) -> list[tuple[str, object]]:
    return [
        ("tool", f"eecsim {__version__}"),
        ("command", command),
        ("config_hash", config_hash(config)),
        ("seed", seed),
    ]


def _scenario_overrides(config: ScenarioConfig, scenario: str) -> ScenarioConfig:
    """Apply a named bias-study perturbation to the resolved scenario."""
    deploy, task, mec = config.deploy, config.task, config.mec
    if scenario == "base":
        pass
    elif scenario == "low_mu_f":
        task = replace(task, task_exec_rate_per_s=0.002)
        mec = replace(mec, mec_task_rate_mu_f=0.002)
    elif scenario == "low_nu_w":
        deploy = replace(deploy, worker_intensity_per_m2=deploy.worker_intensity_per_m2 / 4)
    elif scenario == "low_nu_r":
        deploy = replace(deploy, requester_intensity_per_m2=deploy.requester_intensity_per_m2 / 4)
    elif scenario == "high_nu_r":
        deploy = replace(deploy, requester_intensity_per_m2=deploy.requester_intensity_per_m2 * 4)
    else:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {BIAS_SCENARIOS}")
    return replace(config, deploy=deploy, task=task, mec=mec)


def _level_rates(config: ScenarioConfig, n_max: int) -> np.ndarray:
    query = CoverageQuery(config.radio, config.deploy, RankedSelection(1))
    ps = ranked_success_probabilities(query, ks=range(1, n_max + 1))
    return ps / config.task.d2d_slot_s


def _delay_model(config: ScenarioConfig, variant: str, n: int, rates: np.ndarray | None):
    mu_f = config.task.task_exec_rate_per_s
    if variant == "random":
        query = CoverageQuery(config.radio, config.deploy, RandomSelection())
        lam = success_probability(query) / config.task.d2d_slot_s
        return build_baseline(n, lam, mu_f)
    if variant == "ordered":
        return build_level_dependent(n, rates[:n].tolist(), mu_f)
    if variant == "ordered+failure":
        return build_failure_chain(n, rates[:n].tolist(), mu_f,
                                   config.reliability.reliability_l,
                                   config.reliability.spare_budget)
    raise ConfigError(f"unknown variant {variant!r}")


def cmd_coverage(config: ScenarioConfig, args) -> int:
    xi_grid = _parse_grid(args.xi)
    selections = [_parse_selection(s) for s in (args.selection or ["random"])]
    radio = config.radio if args.rl is None else replace(config.radio, los_radius_m=args.rl)
    rows = []
    header = ["selection", "los_radius_m", "xi_db", "success_probability"]
    if args.simulate:
        header += ["simulated", "std_error", "resampled"]
    for selection in selections:
        sim = None
        if args.simulate and xi_grid:
            cfg = SimConfig(seed=args.seed, replications=args.reps,
                            arena_half_width_m=config.sim.arena_half_width_m)
            sim = empirical_success_curve(
                cfg, CoverageQuery(radio, config.deploy, selection), xi_grid)
        for i, xi in enumerate(xi_grid):
            query = CoverageQuery(replace(radio, sinr_threshold_db=xi),
                                  config.deploy, selection)
            row = [_selection_name(selection), radio.los_radius_m, xi,
                   success_probability(query)]
            if args.simulate:
                row += [sim[i].estimate, sim[i].std_error, sim[i].resampled_realizations]
            rows.append(row)
    meta = _base_metadata("coverage", config, args.seed)
    _write_csv(args.out, meta, header, rows)
    return 0


def cmd_delay(config: ScenarioConfig, args) -> int:
    n_grid = sorted(set(_parse_int_grid(args.n)))
    if any(n < 1 for n in n_grid):
        raise ConfigError("segment counts must be >= 1")
    variants = args.variant or ["ordered"]
    rates = None
    if any(v != "random" for v in variants) and n_grid:
        rates = _level_rates(config, max(n_grid))
    header = ["variant", "n", "mean_delay_s", "is_optimal"]
    if args.simulate:
        header += ["simulated_mean_s", "std_error_s", "completion_fraction"]
    rows = []
    for variant in variants:
        delays = []
        sim_results = []
        for n in n_grid:
            model = _delay_model(config, variant, n, rates)
            delays.append(mean_absorption_time(model).mean_delay_s)
            if args.simulate:
                cfg = SimConfig(seed=args.seed, replications=args.reps)
                sim_results.append(empirical_delay(cfg, model))
        best = delays.index(min(delays)) if delays else -1
        for i, n in enumerate(n_grid):
            row = [variant, n, delays[i], i == best]
            if args.simulate:
                row += [sim_results[i].mean_delay_s, sim_results[i].std_error_s,
                        sim_results[i].completion_fraction]
            rows.append(row)
    meta = _base_metadata("delay", config, args.seed)
    _write_csv(args.out, meta, header, rows)
    return 0


def cmd_completion(config: ScenarioConfig, args) -> int:
    n_grid = sorted(set(_parse_int_grid(args.n)))
    l_values = _parse_grid(args.l)
    budget = config.reliability.spare_budget
    if budget is None:
        budget = 0  # completion is only informative with a finite budget
    header = ["reliability_l", "n", "spare_budget", "completion_probability"]
    if args.simulate:
        header += ["simulated_fraction", "std_error"]
    rows = []
    if n_grid:
        rates = _level_rates(config, max(n_grid))
        for l in l_values:
            for n in n_grid:
                model = build_failure_chain(n, rates[:n].tolist(),
                                            config.task.task_exec_rate_per_s,
                                            l, spare_budget=budget)
                analytic = completion_probability(model)
                row = [l, n, budget, analytic]
                if args.simulate:
                    est = empirical_delay(SimConfig(seed=args.seed,
                                                    replications=args.reps), model)
                    se = (analytic * (1.0 - analytic) / args.reps) ** 0.5
                    row += [est.completion_fraction, se]
                rows.append(row)
    meta = _base_metadata("completion", config, args.seed)
    _write_csv(args.out, meta, header, rows)
    return 0


def cmd_contour(config: ScenarioConfig, args) -> int:
    nu_w_grid = _parse_grid(args.nu_w)
    mu_f_grid = _parse_grid(args.mu_f)
    rows = []
    for nu_w in nu_w_grid:
        scenario = replace(config, deploy=replace(config.deploy,
                                                  worker_intensity_per_m2=nu_w))
        rates = _level_rates(scenario, args.n_max)
        usable = next((i for i, r in enumerate(rates) if r <= 0), args.n_max)
        for mu_f in mu_f_grid:
            delays = [mean_absorption_time(
                build_level_dependent(n, rates[:n].tolist(), mu_f)).mean_delay_s
                for n in range(1, usable + 1)]
            best = delays.index(min(delays))
            rows.append([nu_w, mu_f, best + 1, delays[best]])
    meta = _base_metadata("contour", config, args.seed)
    _write_csv(args.out, meta, ["nu_w_per_m2", "mu_f_per_s", "optimal_n",
                                "mean_delay_s"], rows)
    return 0


def cmd_bias(config: ScenarioConfig, args) -> int:
    scenario = _scenario_overrides(config, args.scenario)
    if not 0.0 < args.alpha_step <= 1.0:
        raise ConfigError("alpha-step must lie in (0, 1]")
    steps = int(round(1.0 / args.alpha_step))
    alphas = [round(min(i * args.alpha_step, 1.0), 12) for i in range(steps + 1)]
    if alphas[-1] != 1.0:
        alphas.append(1.0)
    points = bias_sweep(alphas, scenario.radio, scenario.deploy, scenario.task,
                        scenario.mec, n_max=args.n_max)
    alpha_star = min(points, key=lambda p: p.tau_alpha_s).alpha
    meta = _base_metadata("bias", config, args.seed)
    meta += [("scenario", args.scenario), ("alpha_star", alpha_star),
             ("eec_n_reoptimized_per_alpha", True)]
    rows = [[p.alpha, p.tau_eec_s, p.tau_mec_s, p.tau_alpha_s, p.eec_optimal_n,
             p.alpha == alpha_star] for p in points]
    _write_csv(args.out, meta, ["alpha", "tau_eec_s", "tau_mec_s", "tau_alpha_s",
                                "eec_optimal_n", "is_optimal"], rows)
    return 0


def _validate_rows(config: ScenarioConfig, seed: int, reps: int, chunk: int):
    """All analytic-versus-simulation checks; returns (rows, all_pass)."""
    rows = []

    def add(check, analytic, simulated, std_error, tolerance, extra=""):
        gap = abs(simulated - analytic)
        ok = gap <= tolerance
        rows.append([check, analytic, simulated, std_error, gap, tolerance,
                     "pass" if ok else "fail", extra])
        return ok

    all_ok = True
    sim_cfg = SimConfig(seed=seed, replications=reps,
                        arena_half_width_m=config.sim.arena_half_width_m)
    # small-sample mean checks need the 3-sigma-equivalent t quantile, since
    # the standard error is itself estimated from the replications
    t_factor = float(stats.t.ppf(1.0 - 0.00135, reps - 1)) if reps > 1 else math.inf

    # coverage, both selection rules, at the scenario threshold; the test
    # standard error comes from the analytic probability (known-null test),
    # which stays positive even when a tiny sample is all successes
    for selection in (RandomSelection(), RankedSelection(1)):
        query = CoverageQuery(config.radio, config.deploy, selection)
        analytic = success_probability(query)
        est = empirical_success_curve(sim_cfg, query, [config.radio.sinr_threshold_db],
                                      chunk_size=chunk)[0]
        null_se = math.sqrt(analytic * (1.0 - analytic) / reps)
        tol = 3.0 * null_se + 0.02
        all_ok &= add(f"coverage/{_selection_name(selection)}", analytic,
                      est.estimate, null_se, tol)

    # blockage-classification toggle: informational gap, always reported
    query = CoverageQuery(config.radio, config.deploy, RandomSelection())
    worker_c = empirical_success_curve(sim_cfg, query, [config.radio.sinr_threshold_db],
                                       los_classification="worker", chunk_size=chunk)[0]
    req_c = empirical_success_curve(sim_cfg, query, [config.radio.sinr_threshold_db],
                                    los_classification="requester", chunk_size=chunk)[0]
    rows.append(["coverage/classification_toggle_gap", worker_c.estimate, req_c.estimate,
                 req_c.std_error, abs(worker_c.estimate - req_c.estimate), "", "info", ""])

    # chain delays, all variants
    n_values = (1, 2, 4, 6)
    rates = _level_rates(config, max(n_values))
    for variant in ("random", "ordered", "ordered+failure"):
        for n in n_values:
            model = _delay_model(config, variant, n, rates)
            analytic = mean_absorption_time(model).mean_delay_s
            est = empirical_delay(sim_cfg, model, chunk_size=chunk)
            all_ok &= add(f"delay/{variant}/n={n}", analytic, est.mean_delay_s,
                          est.std_error_s, t_factor * est.std_error_s)

    # completion probability against the no-spare closed form and simulation
    l = config.reliability.reliability_l
    for n in (1, 2, 3):
        model = build_failure_chain(n, rates[:n].tolist(),
                                    config.task.task_exec_rate_per_s, l, spare_budget=0)
        analytic = completion_probability(model)
        closed = (n * n * l / (n * n * l + 1.0)) ** n
        all_ok &= add(f"completion/closed_form/n={n}", closed, analytic, 0.0, 1e-12)
        est = empirical_delay(sim_cfg, model, chunk_size=chunk)
        se = (analytic * (1 - analytic) / reps) ** 0.5
        all_ok &= add(f"completion/simulated/n={n}", analytic,
                      est.completion_fraction, se, 3.0 * se + 1e-9)

    # worker idle probability against a direct stationary solve
    mu_f = config.task.task_exec_rate_per_s
    nu_r = config.deploy.requester_intensity_per_m2
    nu_w = config.deploy.worker_intensity_per_m2
    analytic = worker_idle_probability(mu_f, nu_r, nu_w)
    a, b = nu_r / nu_w, mu_f
    stationary = np.linalg.solve(np.array([[-a, b], [1.0, 1.0]]),
                                 np.array([0.0, 1.0]))[0]
    all_ok &= add("worker_idle/stationary_solve", stationary, analytic, 0.0, 1e-12)
    return rows, all_ok


def cmd_validate(config: ScenarioConfig, args) -> int:
    rows, all_ok = _validate_rows(config, args.seed, args.reps, args.chunk)
    meta = _base_metadata("validate", config, args.seed)
    meta += [("replications", args.reps), ("result", "pass" if all_ok else "fail")]
    _write_csv(args.out, meta, ["check", "analytic", "simulated", "std_error",
                                "gap", "tolerance", "status", "note"], rows)
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eecsim",
        description="Edge-offloading model sweeps: coverage, delay, completion, "
                    "segmentation contours, bias optimization and validation.")
    parser.add_argument("--version", action="version", version=f"eecsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON scenario overrides")
        p.add_argument("--preset", default="table1", help="base preset name")
        p.add_argument("--seed", type=int, default=None,
                       help="simulation seed (default: scenario sim.seed)")
        p.add_argument("--reps", type=int, default=None,
                       help="simulation replications (default: scenario sim.replications)")
        p.add_argument("--out", help="output CSV path (default: stdout)")

    p = sub.add_parser("coverage", help="offloading success probability vs SINR threshold")
    common(p)
    p.add_argument("--xi", default="-20:15:1", help="threshold grid in dB")
    p.add_argument("--selection", action="append",
                   help="random or ranked:K (repeatable; default random)")
    p.add_argument("--rl", type=float, default=None, help="override LoS radius (m)")
    p.add_argument("--simulate", action="store_true", help="add Monte Carlo columns")

    p = sub.add_parser("delay", help="mean task response delay vs segment count")
    common(p)
    p.add_argument("--n", default="1:12:1", help="segment-count grid")
    p.add_argument("--variant", action="append",
                   choices=["random", "ordered", "ordered+failure"],
                   help="chain variant (repeatable; default ordered)")
    p.add_argument("--simulate", action="store_true", help="add Monte Carlo columns")

    p = sub.add_parser("completion", help="task completion probability vs n and l")
    common(p)
    p.add_argument("--n", default="1:18:1", help="segment-count grid")
    p.add_argument("--l", default="1,2,5", help="reliability parameter list")
    p.add_argument("--simulate", action="store_true", help="add Monte Carlo columns")

    p = sub.add_parser("contour", help="optimal segment count over (nu_w, mu_f)")
    common(p)
    p.add_argument("--nu-w", required=True, help="worker intensity grid (1/m^2)")
    p.add_argument("--mu-f", required=True, help="execution rate grid (1/s)")
    p.add_argument("--n-max", type=int, default=50, help="largest n searched")

    p = sub.add_parser("bias", help="edge/MEC bias sweep and optimum")
    common(p)
    p.add_argument("--alpha-step", type=float, default=0.1, help="bias grid step")
    p.add_argument("--scenario", default="base", choices=BIAS_SCENARIOS,
                   help="named perturbation of the scenario")
    p.add_argument("--n-max", type=int, default=50, help="largest n searched")

    p = sub.add_parser("validate", help="analytic-versus-simulation check suite")
    common(p)
    p.add_argument("--chunk", type=int, default=4096,
                   help="internal replication chunk width (results do not depend on it)")
    return parser


_COMMANDS = {
    "coverage": cmd_coverage,
    "delay": cmd_delay,
    "completion": cmd_completion,
    "contour": cmd_contour,
    "bias": cmd_bias,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.preset)
        if args.seed is None:
            args.seed = config.sim.seed
        if getattr(args, "reps", None) is None:
            args.reps = config.sim.replications
        return _COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, QuadratureError, UnservableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
