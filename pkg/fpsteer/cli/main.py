"""
Command-line interface for distribution steering.
"""

import argparse
import logging
import sys
from typing import Any, Dict

from ..core.pipeline import STAGES, PipelineRun, run_pipeline
from ..core.scenario import bundled_scenarios, load_scenario
from ..exceptions import SteeringError
from ..utils.config import Config

logger = logging.getLogger(__name__)


def setup_logging(level: str = "INFO"):
    """Setup logging configuration."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True,
    )


def _overrides(args) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["simulation.seed"] = args.seed
    if args.runs is not None:
        overrides["simulation.runs"] = args.runs
    if args.cost is not None:
        overrides["controller.cost"] = args.cost
    return overrides


def _summarize(run: PipelineRun) -> None:
    last = run.stages[-1]
    if last == "check":
        steps = len(run.feasibility)
        print(f"✅ All {steps} steps reachable")
    if last in ("plan", "check") and run.plan is not None:
        plan = run.plan
        print(f"🗺️  Planned {plan.horizon + 1} moment states, order {plan.order}")
    if last == "solve":
        gains = ", ".join(f"{control.gain:.4g}" for control in run.controls)
        print(f"✅ Solved {len(run.controls)} steps, c(k) = [{gains}]")
    if last == "simulate" and run.result is not None:
        print(f"✅ Simulated {run.result.runs} runs over {run.result.horizon} steps")
    if last == "report" and run.report is not None:
        terminal = run.report.terminal
        print(f"📊 Terminal moments (z = {run.report.z:g}):")
        for ell, (target, empirical, se, ok) in enumerate(
            zip(
                terminal.expected.values,
                terminal.empirical.values,
                terminal.standard_errors,
                terminal.within,
            ),
            start=1,
        ):
            mark = "✅" if ok else "❌"
            print(
                f"   {mark} m{ell}: target {target:.6g}, "
                f"empirical {empirical:.6g} ± {se:.3g}"
            )
        if run.report.passed:
            print("✅ Steering validated")
        else:
            print("⚠️  Steering outside tolerance")
    print(f"📁 Output directory: {run.output_dir}")


def run_command(args):
    """Run the pipeline up to the stage named by the subcommand."""
    stage = "report" if args.command == "all" else args.command

    try:
        config = Config(args.config)
        setup_logging("DEBUG" if args.verbose else config.get("logging.level", "INFO"))
        scenario = load_scenario(args.scenario)

        print(f"🚀 Running '{scenario.name}' up to stage '{stage}'...")
        run = run_pipeline(
            scenario,
            stage=stage,
            config=config,
            output_dir=args.out,
            overrides=_overrides(args),
        )
        _summarize(run)

    except SteeringError as e:
        print(f"❌ Error: {e}")
        sys.exit(e.exit_code)
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"❌ Error: {e}")
        sys.exit(SteeringError.exit_code)


def list_scenarios_command(args):
    """Print the names of the bundled scenarios."""
    names = bundled_scenarios()
    print(f"📦 {len(names)} bundled scenarios:")
    for name in names:
        print(f"   - {name}")


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scenario",
        "-s",
        required=True,
        help="Scenario JSON file, or the name of a bundled scenario",
    )
    parser.add_argument("--out", "-o", help="Output directory for artifacts")
    parser.add_argument("--config", "-c", help="YAML configuration file")
    parser.add_argument("--seed", type=int, help="Master seed of the simulation")
    parser.add_argument("--runs", type=int, help="Number of Monte Carlo runs")
    parser.add_argument(
        "--cost",
        choices=["paper", "physical"],
        help="Step cost written with u~ (paper) or with F (physical)",
    )


def main():
    """Main CLI entry point."""
    parser = argparse.ArgumentParser(
        description=(
            "fpsteer - steer a scalar stochastic system's distribution "
            "by power moments"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Show the bundled scenarios
  fpsteer list-scenarios

  # Check reachability of the bundled first example
  fpsteer check --scenario example1

  # Full run with 10^5 Monte Carlo samples
  fpsteer all --scenario example1 --runs 100000 --out ./output/example1

  # Solve with the physical-control cost
  fpsteer solve --scenario my_scenario.json --cost physical
        """,
    )

    parser.add_argument(
        "--verbose", "-v", action="store_true", help="Enable verbose logging"
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    descriptions = {
        "check": "Check per-step reachability of the interpolated plan",
        "plan": "Write the (repaired) moment-state plan",
        "solve": "Solve the gains and realize the kernel densities",
        "simulate": "Run the Monte Carlo closed loop",
        "report": "Compare simulation with plan and target",
        "all": "Run every stage",
    }
    for command in STAGES + ("all",):
        sub = subparsers.add_parser(command, help=descriptions[command])
        _add_common_arguments(sub)
        sub.set_defaults(func=run_command)

    listing = subparsers.add_parser(
        "list-scenarios", help="List the scenarios shipped with the package"
    )
    listing.set_defaults(func=list_scenarios_command)

    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        sys.exit(1)

    log_level = "DEBUG" if args.verbose else "INFO"
    setup_logging(log_level)

    args.func(args)


if __name__ == "__main__":
    main()
