"""Command-line front end.

Four subcommands form a pipeline with explicit artifact files between stages:

    swobs check    scenario.json
    swobs design   scenario.json --out design.json
    swobs simulate scenario.json --design design.json --out trace.csv
    swobs analyze  scenario.json --design design.json --trace trace.csv

Exit codes: 0 success, 1 domain failure (assumption violated, placement or
convergence failed, certification negative), 2 usage or parse failure.
``--batch DIR`` applies a subcommand to every ``*.json`` scenario in a
directory, deriving artifact names from the scenario stem.  Set ``SWOBS_LOG``
to DEBUG/INFO/WARNING to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis as analysis_mod
from .design import ObserverBank, assemble_bank
from .errors import (
    AssumptionError,
    DesignError,
    DivergenceError,
    JointConnectivityViolation,
    ScenarioError,
    SwobsError,
)
from .graph import check_joint_connectivity
from .plant import check_joint_observability, check_neutral_stability
from .scenario import Scenario, load_scenario
from .simulation import (
    SimConfig,
    SimulationTrace,
    read_trace_csv,
    simulate_kernel_consensus,
    simulate_network,
    write_trace_csv,
)

log = logging.getLogger("swobs")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def cmd_check(scenario: Scenario) -> tuple[int, dict]:
    """Run the three standing assumption checks; exit 0 iff all pass."""
    results = []

    report = check_neutral_stability(scenario.plant.A)
    results.append(
        {
            "name": "neutral_stability",
            "passed": report.is_neutrally_stable,
            "detail": {
                "max_real_part": report.max_real_part,
                "semisimplicity_defect": report.semisimplicity_defect,
            },
        }
    )

    jointly_observable = check_joint_observability(scenario.plant)
    results.append({"name": "joint_observability", "passed": jointly_observable, "detail": {}})

    try:
        cert = check_joint_connectivity(scenario.schedule, scenario.T_c)
        finite = [f for f in cert.fiedler_values if math.isfinite(f)]
        results.append(
            {
                "name": "joint_connectivity",
                "passed": True,
                "detail": {
                    "windows": len(cert.fiedler_values),
                    "min_fiedler": min(finite) if finite else None,
                },
            }
        )
    except JointConnectivityViolation as exc:
        results.append(
            {
                "name": "joint_connectivity",
                "passed": False,
                "detail": {"window": list(exc.window), "message": str(exc)},
            }
        )

    passed = all(r["passed"] for r in results)
    return (EXIT_OK if passed else EXIT_DOMAIN), {"passed": passed, "assumptions": results}


def cmd_design(scenario: Scenario, out) -> tuple[int, dict]:
    """Synthesise the observer bank and write its full serialization."""
    code, check_report = cmd_check(scenario)
    if code != EXIT_OK:
        failed = [r["name"] for r in check_report["assumptions"] if not r["passed"]]
        return code, {"error": f"assumption checks failed: {', '.join(failed)}", "check": check_report}
    try:
        bank = assemble_bank(
            scenario.plant,
            scenario.schedule,
            gains=scenario.gains,
            targets=scenario.targets,
            T_c=scenario.T_c,
            use_transform=scenario.use_transform,
        )
    except (AssumptionError, DesignError) as exc:
        return EXIT_DOMAIN, {"error": str(exc)}
    payload = bank.to_jsonable()
    Path(out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    summary = {
        "out": str(out),
        "margin": bank.margin,
        "P_cond": bank.P.cond,
        "agents": [
            {
                "agent": obs.agent,
                "n_unobs": obs.decomposition.n_unobs,
                "gamma": obs.gamma,
                "targets": [[z.real, z.imag] for z in obs.targets],
                "achieved": [[z.real, z.imag] for z in obs.achieved],
                "placement_error": obs.placement_error,
            }
            for obs in bank.observers
        ],
    }
    return EXIT_OK, summary


def _load_bank(scenario: Scenario, design_path) -> ObserverBank:
    try:
        data = json.loads(Path(design_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read design file {design_path}: {exc}") from exc
    try:
        bank = ObserverBank.from_jsonable(data, scenario.plant)
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"malformed design file {design_path}: {exc}") from exc
    if bank.N != scenario.plant.N or bank.P.P.shape[0] != scenario.plant.n:
        raise ScenarioError("design file does not match the scenario dimensions")
    return bank


def cmd_simulate(scenario: Scenario, design, out, seed: int | None = None) -> tuple[int, dict]:
    """Integrate the coupled network and write the trace CSV plus a summary."""
    bank = _load_bank(scenario, design)
    config = scenario.sim
    if seed is not None:
        config = SimConfig(
            dt=config.dt,
            T_end=config.T_end,
            seed=seed,
            disturbance=config.disturbance,
            x0=config.x0,
            xhat0=config.xhat0,
            match_initial=config.match_initial,
            csv_stride=config.csv_stride,
        )
    try:
        trace = simulate_network(scenario.plant, bank, scenario.schedule, config)
    except DivergenceError as exc:
        return EXIT_DOMAIN, {"error": str(exc), "last_finite_time": exc.last_time}
    write_trace_csv(trace, out, stride=config.csv_stride)
    rates = []
    for i in range(trace.N):
        try:
            fit = analysis_mod.fit_exponential_rate(trace.times, trace.error_norms[:, i], scenario.fit_window)
            rates.append({"agent": i, "rate": fit.rate, "r_squared": fit.r_squared})
        except SwobsError:
            rates.append({"agent": i, "rate": None, "r_squared": None})
    summary = {
        "out": str(out),
        "initial_error_norms": trace.error_norms[0].tolist(),
        "final_error_norms": trace.error_norms[-1].tolist(),
        "rate_fits": rates,
    }
    return EXIT_OK, summary


def cmd_analyze(trace_path, scenario: Scenario, design) -> tuple[int, dict]:
    """Certify the run: windowed Gramian bounds, energy contraction, decay rates.

    The contraction certificate integrates the kernel-consensus flow (unit
    gain, seeded initial state) over several windows, since that flow is not
    part of the network trace itself.  Exit 0 iff the Gramian report is
    valid, every contraction ratio is below one, and every fitted rate is
    positive.
    """
    bank = _load_bank(scenario, design)
    trace = read_trace_csv(trace_path)
    if trace.n != scenario.plant.n or trace.N != scenario.plant.N:
        raise ScenarioError(
            f"trace dimensions (n={trace.n}, N={trace.N}) do not match the scenario"
        )
    if trace.times[-1] < scenario.fit_window[1] - 1e-9:
        raise ScenarioError("trace is shorter than the configured fit window")

    U = bank.stacked_kernel_basis()
    W = scenario.analysis_window
    horizon = max(2.0 * W, float(trace.times[-1]))
    gram = analysis_mod.uco_certify(U, scenario.schedule, W, horizon)

    union_eigs = analysis_mod.union_gramian_min_eigs(U, scenario.schedule, scenario.T_c)

    nu = U.shape[1]
    ratios: list[float] = []
    if nu:
        rng = np.random.default_rng(scenario.sim.seed)
        z0 = rng.standard_normal(nu)
        dt_eta = min(scenario.sim.dt, scenario.schedule.dwell / 2.0)
        eta_trace = simulate_kernel_consensus(
            U,
            np.eye(nu),
            scenario.schedule,
            SimConfig(dt=dt_eta, T_end=4.0 * W, seed=scenario.sim.seed),
            z0,
        )
        ratios = analysis_mod.window_contraction(eta_trace, np.eye(nu), W)

    rate_fits = []
    for i in range(trace.N):
        fit = analysis_mod.fit_exponential_rate(trace.times, trace.error_norms[:, i], scenario.fit_window)
        rate_fits.append(
            {"agent": i, "rate": fit.rate, "r_squared": fit.r_squared, "degenerate": fit.degenerate}
        )

    max_ratio = max(ratios) if ratios else None
    rates_positive = all(r["rate"] is not None and r["rate"] > 0 for r in rate_fits)
    passed = bool(gram.valid and (max_ratio is None or max_ratio < 1.0) and rates_positive)
    report = {
        "passed": passed,
        "uco": {
            "window_length": gram.window_length,
            "alpha_min": gram.alpha_min,
            "alpha_max": gram.alpha_max,
            "valid": gram.valid,
        },
        "union_window_min_eigs": union_eigs,
        "contraction": {
            "window_length": W,
            "ratios": ratios,
            "max_ratio": max_ratio,
            "rho_observed": None if max_ratio is None else 1.0 - max_ratio,
        },
        "rate_fits": rate_fits,
    }
    return (EXIT_OK if passed else EXIT_DOMAIN), report


def _emit(report: dict, out) -> None:
    text = json.dumps(report, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _artifact(directory: Path, stem: str, suffix: str) -> Path:
    return directory / f"{stem}{suffix}"


def _run_single(command: str, scenario_path: Path, args) -> int:
    scenario = load_scenario(scenario_path)
    stem = scenario_path.stem
    out_dir = Path(args.out) if args.batch and args.out else scenario_path.parent

    if command == "check":
        code, report = cmd_check(scenario)
        _emit(report, None if args.batch else args.out)
        return code
    if command == "design":
        out = _artifact(out_dir, stem, ".design.json") if args.batch else (args.out or f"{stem}.design.json")
        code, report = cmd_design(scenario, out)
        _emit(report, None)
        return code
    if command == "simulate":
        design = _artifact(out_dir, stem, ".design.json") if args.batch else args.design
        if design is None:
            raise ScenarioError("simulate requires --design PATH")
        out = _artifact(out_dir, stem, ".trace.csv") if args.batch else (args.out or f"{stem}.trace.csv")
        code, report = cmd_simulate(scenario, design, out, seed=args.seed)
        _emit(report, None)
        return code
    if command == "analyze":
        design = _artifact(out_dir, stem, ".design.json") if args.batch else args.design
        trace = _artifact(out_dir, stem, ".trace.csv") if args.batch else args.trace
        if design is None or trace is None:
            raise ScenarioError("analyze requires --design PATH and --trace PATH")
        code, report = cmd_analyze(trace, scenario, design)
        _emit(report, _artifact(out_dir, stem, ".report.json") if args.batch else args.out)
        return code
    raise AssertionError(f"unknown command {command}")


def _configure_logging() -> None:
    level_name = os.environ.get("SWOBS_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swobs",
        description="Design, simulate, and certify distributed observers over switching networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("check", "validate the standing assumptions of a scenario"),
        ("design", "synthesise the observer bank"),
        ("simulate", "integrate the coupled network and write a trace CSV"),
        ("analyze", "certify Gramian bounds, contraction, and decay rates"),
    ]:
        p = sub.add_parser(name, help=doc)
        p.add_argument("scenario", nargs="?", help="scenario JSON file")
        p.add_argument("--out", help="output path (directory in batch mode)")
        p.add_argument("--design", help="design artifact from `swobs design`")
        p.add_argument("--trace", help="trace CSV from `swobs simulate`")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--batch", help="run over every *.json scenario in a directory")
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.batch:
            batch_dir = Path(args.batch)
            paths = sorted(batch_dir.glob("*.json"))
            paths = [p for p in paths if not p.name.endswith(".design.json")]
            if not paths:
                raise ScenarioError(f"no scenario files in {batch_dir}")
            with ThreadPoolExecutor(max_workers=min(4, len(paths))) as pool:
                codes = list(pool.map(lambda p: _run_single(args.command, p, args), paths))
            return max(codes)
        if not args.scenario:
            raise ScenarioError("a scenario file is required (or use --batch DIR)")
        return _run_single(args.command, Path(args.scenario), args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AssumptionError, DesignError, DivergenceError, JointConnectivityViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
