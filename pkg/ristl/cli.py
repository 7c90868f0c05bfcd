#!/usr/bin/env python3
"""
RiSTL command-line tool

Determinize risk-aware specifications, simulate the barrier controller,
monitor traces and verify simulator output.

Exit codes: 0 ok, 1 specification violated, 2 assumption failure,
3 runtime or controller error, 64 usage or scenario error.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from loguru import logger

from . import __version__
from .config import settings
from .determinize import DeterminizationResult, compare_references
from .errors import (
    AssumptionError,
    EmptySetError,
    InfeasibleThresholdError,
    RistlError,
    ScenarioError,
)
from .logging_setup import configure_logging
from .logic import format_formula
from .monitor import DeterministicMode, StochasticMode, Trajectory, rho
from .scenario import load_scenario
from .sim import COL, BoundedNoise, Scenario, determinize_scenario, run_scenario, verify_trace
from .stochastics import AUTO, EvaluationMethod
from .utils import dumps, plot_data_paths, read_trace_table, summary_path, write_json, write_trace

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ASSUMPTION = 2
EXIT_RUNTIME = 3
EXIT_USAGE = 64

ASSUMPTION_ERRORS = (AssumptionError, InfeasibleThresholdError, EmptySetError)


class UsageExitParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage code instead of 2."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def exit_code_for(error: RistlError) -> int:
    if isinstance(error, ScenarioError):
        return EXIT_USAGE
    if isinstance(error, ASSUMPTION_ERRORS):
        return EXIT_ASSUMPTION
    return EXIT_RUNTIME


class RistlCLI:
    """Command implementations; each returns a result dict with an exit code."""

    def __init__(self, mc_samples: Optional[int] = None, seed: Optional[int] = None) -> None:
        self.mc_samples = mc_samples
        self.seed = seed

    def _load(self, spec_path: str) -> Scenario:
        scenario = load_scenario(spec_path)
        if self.seed is not None:
            scenario = replace(scenario, seed=self.seed)
            if isinstance(scenario.dynamics.disturbance, BoundedNoise):
                noise = replace(scenario.dynamics.disturbance, seed=self.seed)
                scenario = replace(scenario, dynamics=replace(scenario.dynamics, disturbance=noise))
        return scenario

    def _determinize(self, scenario: Scenario) -> DeterminizationResult:
        result = determinize_scenario(scenario)
        if scenario.references or scenario.alternate_gaussian is not None:
            alternate = scenario.alternate_gaussian or scenario.gaussian
            label = scenario.alternate_label if scenario.alternate_gaussian is not None else "recomputed"
            compare_references(result, scenario.predicates, scenario.box, alternate, scenario.references, label)
        return result

    def determinize(self, spec_path: str, out: Optional[str] = None) -> Dict[str, Any]:
        scenario = self._load(spec_path)
        result = self._determinize(scenario)
        report = {"scenario": scenario.name, "formula": format_formula(scenario.formula), **result.to_dict()}
        ok = result.assumption1_ok and result.assumption2_ok
        report["success"] = ok
        report["exit_code"] = EXIT_OK if ok else EXIT_ASSUMPTION
        if out:
            write_json(out, report)
        return report

    def simulate(self, spec_path: str, out: str, emit_plot_data: bool = False) -> Dict[str, Any]:
        scenario = self._load(spec_path)
        determinization = self._determinize(scenario)
        result = run_scenario(scenario, determinization)
        trace_path = write_trace(out, result.trajectory)
        summary = {
            "scenario": scenario.name,
            "trace": str(trace_path),
            "thresholds": determinization.levels(False),
            "modified_thresholds": determinization.levels(True),
            **result.to_summary(),
        }
        ok = result.success and result.invariance_ok
        summary["exit_code"] = EXIT_OK if ok else EXIT_VIOLATION
        if emit_plot_data:
            summary["plot_data"] = {key: str(path) for key, path in self.write_plot_data(out, result.trajectory).items()}
        write_json(summary_path(out), summary)
        return summary

    @staticmethod
    def write_plot_data(out: str, table: np.ndarray) -> Dict[str, Path]:
        paths = plot_data_paths(out)
        t = table[:, [COL["t"]]]
        write_trace(paths["trajectory"], np.hstack([t, table[:, [COL["x1"], COL["x2"], COL["p1"], COL["p2"]]]]), ("t", "x1", "x2", "p1", "p2"))
        write_trace(paths["barrier"], np.hstack([t, table[:, [COL["b"]]]]), ("t", "b"))
        write_trace(paths["slack"], np.hstack([t, table[:, [COL["eps"]]]]), ("t", "eps"))
        return paths

    def monitor(self, spec_path: str, trace_path: str, mode: str = "both", out: Optional[str] = None) -> Dict[str, Any]:
        scenario = self._load(spec_path)
        trace = Trajectory.from_csv(trace_path)
        report: Dict[str, Any] = {"scenario": scenario.name, "trace": str(trace_path), "formula": format_formula(scenario.formula)}
        satisfied = True
        if mode in ("stoch", "both"):
            method = AUTO
            if self.mc_samples is not None:
                method = EvaluationMethod.monte_carlo(self.mc_samples, self.seed if self.seed is not None else settings.mc_seed)
            stochastic = rho(scenario.formula, trace, 0.0, StochasticMode(scenario.gaussian, scenario.predicates, method))
            report["stochastic"] = {**stochastic.to_dict(), "method": method.kind}
            satisfied = satisfied and stochastic.satisfied_weak
        if mode in ("det", "both"):
            determinization = self._determinize(scenario)
            deterministic = rho(determinization.phi, trace, 0.0, DeterministicMode(scenario.gaussian.mean, scenario.predicates))
            report["deterministic"] = {**deterministic.to_dict(), "formula": format_formula(determinization.phi)}
            satisfied = satisfied and deterministic.satisfied_weak
        report["success"] = satisfied
        report["exit_code"] = EXIT_OK if satisfied else EXIT_VIOLATION
        if out:
            write_json(out, report)
        return report

    def verify(self, spec_path: str, trace_path: str, out: Optional[str] = None) -> Dict[str, Any]:
        scenario = self._load(spec_path)
        table = read_trace_table(trace_path)
        verification = verify_trace(scenario, table)
        report = {"scenario": scenario.name, "trace": str(trace_path), **verification.to_dict()}
        report["success"] = verification.ok
        report["exit_code"] = EXIT_OK if verification.ok else EXIT_VIOLATION
        if out:
            write_json(out, report)
        return report

    @staticmethod
    def output_json(data: Dict[str, Any]) -> None:
        print(dumps(data))


def build_parser() -> argparse.ArgumentParser:
    parser = UsageExitParser(
        prog="ristl",
        description="Risk-aware STL toolkit: determinize, simulate, monitor and verify",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  ristl determinize --spec scenarios/example2.toml
  ristl simulate --spec scenarios/mission.toml --out out/mission.csv --emit-plot-data
  ristl monitor --spec scenarios/corridor.toml --trace scenarios/corridor_trace1.csv --mode stoch
  ristl verify --spec scenarios/mission.toml --trace out/mission.csv
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help=f"Log level (default {settings.log_level})")
    parser.add_argument("--log-file", default=None, help="Also write logs to this file")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    det_parser = subparsers.add_parser("determinize", help="Synthesize thresholds and write the determinization report")
    det_parser.add_argument("--spec", required=True, help="Scenario TOML file")
    det_parser.add_argument("--out", help="Report JSON path")

    sim_parser = subparsers.add_parser("simulate", help="Run the closed-loop simulation")
    sim_parser.add_argument("--spec", required=True, help="Scenario TOML file")
    sim_parser.add_argument("--out", required=True, help="Trace CSV path; the summary goes to <stem>.summary.json")
    sim_parser.add_argument("--seed", type=int, help="Override the scenario seed")
    sim_parser.add_argument("--emit-plot-data", action="store_true", help="Write per-figure CSV files next to the trace")

    mon_parser = subparsers.add_parser("monitor", help="Evaluate robustness of a trace")
    mon_parser.add_argument("--spec", required=True, help="Scenario TOML file")
    mon_parser.add_argument("--trace", required=True, help="Trace CSV with columns t,x1,x2,...")
    mon_parser.add_argument("--mode", choices=["det", "stoch", "both"], default="both", help="Semantics to evaluate")
    mon_parser.add_argument("--mc-samples", type=int, help="Use Monte-Carlo evaluation with this many samples")
    mon_parser.add_argument("--seed", type=int, help="Monte-Carlo seed")
    mon_parser.add_argument("--out", help="Report JSON path")

    ver_parser = subparsers.add_parser("verify", help="Check a simulator trace against the scenario")
    ver_parser.add_argument("--spec", required=True, help="Scenario TOML file")
    ver_parser.add_argument("--trace", required=True, help="Trace CSV written by simulate")
    ver_parser.add_argument("--out", help="Report JSON path")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    if getattr(args, "mc_samples", None) is not None and args.mc_samples < 1:
        parser.error("--mc-samples must be at least 1")

    cli = RistlCLI(mc_samples=getattr(args, "mc_samples", None), seed=getattr(args, "seed", None))
    try:
        if args.command == "determinize":
            result = cli.determinize(args.spec, args.out)
        elif args.command == "simulate":
            result = cli.simulate(args.spec, args.out, args.emit_plot_data)
        elif args.command == "monitor":
            result = cli.monitor(args.spec, args.trace, args.mode, args.out)
        else:
            result = cli.verify(args.spec, args.trace, args.out)
    except RistlError as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} failed: {e.message}")
        sys.stderr.write(dumps({**e.to_dict(), "exit_code": code}) + "\n")
        return code
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user.")
        return EXIT_RUNTIME

    cli.output_json(result)
    return int(result["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
