"""
End-to-end orchestration: check, plan, solve, simulate, report.

Every stage writes its artifacts before the next begins and reads its inputs
back from disk, verifying them against the digests recorded in the manifest.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..exceptions import ConfigurationError, DomainError, SteeringError, StageError
from ..utils.config import Config
from ..utils.file_handler import FileHandler
from .density_realizer import RealizedDensity, RealizerConfig, realize_all
from .distribution_catalog import mean_and_std
from .monte_carlo import (
    ClosedLoopResult,
    SimulationConfig,
    moment_table,
    run_closed_loop,
)
from .reporting import (
    SteeringReport,
    build_report,
    export_density_grid,
    export_histogram,
)
from .scenario import Scenario
from .steering_planner import (
    MomentStateTrajectory,
    StepFeasibilityReport,
    check_plan,
    feasible_plan,
    interpolate_states,
    repair_plan,
)
from .step_controller import ControllerConfig, StepControl, solve_plan

logger = logging.getLogger(__name__)

STAGES = ("check", "plan", "solve", "simulate", "report")

FEASIBILITY = "feasibility.json"
PLAN = "plan.json"
CONTROLS = "controls.json"
KERNELS = "kernels"
SAMPLES = "samples.csv"
INPUTS = "inputs.csv"
REPORT = "report.json"
MOMENTS = "moments.csv"
TARGET_DENSITY = "target_density.csv"
MANIFEST = "manifest.json"
EFFECTIVE_CONFIG = "config.yaml"


@dataclass
class PipelineRun:
    """
    Everything a pipeline run produced, up to the last completed stage.
    """

    scenario: Scenario
    output_dir: Path
    stages: List[str] = field(default_factory=list)
    feasibility: List[StepFeasibilityReport] = field(default_factory=list)
    plan: Optional[MomentStateTrajectory] = None
    controls: List[StepControl] = field(default_factory=list)
    kernels: List[RealizedDensity] = field(default_factory=list)
    result: Optional[ClosedLoopResult] = None
    report: Optional[SteeringReport] = None
    manifest: Dict[str, Any] = field(default_factory=dict)


class SteeringPipeline:
    """
    Runs the steering stages for one scenario with a merged configuration.
    """

    def __init__(
        self,
        scenario: Scenario,
        config: Optional[Config] = None,
        output_dir: Optional[Union[str, Path]] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ):
        """
        Initialize the pipeline.

        Args:
            scenario: Validated scenario
            config: Tool configuration; scenario blocks are merged over it
            output_dir: Artifact directory (default: <paths.output_dir>/<name>)
            overrides: Final overrides keyed by dotted path, e.g. from
                command-line flags (``{"simulation.runs": 1000}``)

        Raises:
            ConfigurationError: If the merged configuration is invalid
        """
        self.scenario = scenario
        self.config = config or Config()
        self.config.merge(scenario.overrides)
        for key, value in (overrides or {}).items():
            self.config.set(key, value)

        self.controller_config = self._typed("controller", ControllerConfig)
        self.realizer_config = self._typed("realizer", RealizerConfig)
        self.simulation_config = self._typed("simulation", SimulationConfig)
        planner = self.config.get_planner_config()
        reporting = self.config.get_reporting_config()
        try:
            self.repair_iterations = int(planner["repair_max_iterations"])
            self.repair_inflation = float(planner["repair_initial_inflation"])
            self.z = float(reporting["z"])
            self.bins = int(reporting["bins"])
            self.density_points = int(reporting["density_points"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(
                f"invalid setting: {e}", field="planner/reporting"
            ) from e

        if output_dir is None:
            paths = self.config.get_paths_config()
            base = Path(paths.get("output_dir", "./output"))
            output_dir = base / FileHandler.clean_filename(scenario.name)
        self.output_dir = FileHandler.ensure_directory(output_dir)
        self.run_state = PipelineRun(scenario=scenario, output_dir=self.output_dir)
        self.manifest = self._load_manifest()
        self.config.save_to_file(self._path(EFFECTIVE_CONFIG))
        logger.info(
            f"SteeringPipeline initialized for '{scenario.name}' -> {self.output_dir}"
        )

    def _typed(self, section: str, cls):
        try:
            return cls.from_config(self.config)
        except (DomainError, KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(str(e), field=section) from e

    def _load_manifest(self) -> Dict[str, Any]:
        path = self.output_dir / MANIFEST
        manifest = FileHandler.read_json(path) if path.exists() else {}
        scenario_digest = FileHandler.canonical_digest(self.scenario.to_dict())
        if manifest.get("scenario_digest") != scenario_digest:
            manifest = {}
        manifest.update(
            {
                "scenario": self.scenario.name,
                "scenario_digest": scenario_digest,
                "config_digest": FileHandler.canonical_digest(self.config.config_data),
                "seed": self.simulation_config.seed,
                "runs": self.simulation_config.runs,
            }
        )
        manifest.setdefault("stages", {})
        return manifest

    # -- artifact IO --------------------------------------------------------

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    def _read(self, name: str, stage: str) -> Path:
        """Return the artifact path after checking it against the manifest."""
        path = self._path(name)
        recorded = None
        for entry in self.manifest["stages"].values():
            recorded = entry.get("outputs", {}).get(name, recorded)
        if recorded is None:
            raise ConfigurationError(
                f"artifact {name} has not been produced yet", field=stage
            )
        if not path.exists() or FileHandler.file_digest(path) != recorded:
            raise ConfigurationError(
                f"artifact {name} is missing or was modified", field=stage
            )
        self._inputs[name] = recorded
        return path

    def _written(self, path: Path) -> None:
        name = path.relative_to(self.output_dir).as_posix()
        self._outputs[name] = FileHandler.file_digest(path)

    def _write_json(self, name: str, data: Any) -> None:
        self._written(FileHandler.write_json(self._path(name), data))

    def _write_csv(self, name: str, frame: pd.DataFrame) -> None:
        self._written(FileHandler.write_csv(self._path(name), frame))

    # -- stages -------------------------------------------------------------

    def run_stage(self, stage: str) -> PipelineRun:
        """
        Execute one stage, reading earlier stages' artifacts from disk.

        Raises:
            DomainError: On an unknown stage name
            StageError: Wrapping any failure inside the stage
        """
        if stage not in STAGES:
            raise DomainError(f"unknown stage {stage!r}; expected one of {STAGES}")

        self._inputs: Dict[str, str] = {}
        self._outputs: Dict[str, str] = {}
        logger.info(f"Stage '{stage}' started")
        start = time.perf_counter()
        try:
            getattr(self, f"_stage_{stage}")()
        except Exception as e:
            logger.error(f"Stage '{stage}' failed: {e}")
            raise StageError(stage, e) from e
        finally:
            self.manifest["stages"][stage] = {
                "inputs": dict(sorted(self._inputs.items())),
                "outputs": dict(sorted(self._outputs.items())),
                "seconds": round(time.perf_counter() - start, 6),
            }
            FileHandler.write_json(self._path(MANIFEST), self.manifest)

        self.run_state.stages.append(stage)
        self.run_state.manifest = self.manifest
        seconds = self.manifest["stages"][stage]["seconds"]
        logger.info(f"Stage '{stage}' finished in {seconds:.3f}s")
        return self.run_state

    def run(self, until: str = "report") -> PipelineRun:
        """
        Run all stages in order up to and including ``until``.
        """
        if until not in STAGES:
            raise DomainError(f"unknown stage {until!r}; expected one of {STAGES}")
        for stage in STAGES[: STAGES.index(until) + 1]:
            self.run_stage(stage)
        return self.run_state

    def _stage_check(self) -> None:
        scenario = self.scenario
        x0 = scenario.initial_moments()
        xk = scenario.target_moments()
        interpolated = interpolate_states(x0, xk, scenario.horizon)
        settings = (
            self.controller_config.grid_points,
            self.controller_config.psd_tolerance,
            self.controller_config.refine_tolerance,
        )
        reports = check_plan(interpolated, scenario, *settings)
        document = {
            "initial_moments": x0.to_list(),
            "target_moments": xk.to_list(),
            "interpolated_feasible": feasible_plan(reports),
            "steps": [report.to_dict() for report in reports],
        }

        plan = interpolated
        try:
            if not feasible_plan(reports):
                plan = repair_plan(
                    interpolated,
                    scenario,
                    self.repair_iterations,
                    self.repair_inflation,
                    *settings,
                )
                reports = check_plan(plan, scenario, *settings)
        except SteeringError as e:
            document.update(
                {"feasible": False, "failed_step": getattr(e, "step", None)}
            )
            self._write_json(FEASIBILITY, document)
            raise

        document.update(
            {
                "feasible": True,
                "repaired": plan is not interpolated,
                "steps": [report.to_dict() for report in reports],
                "planned_states": plan.to_dict()["states"],
            }
        )
        self._write_json(FEASIBILITY, document)
        self.run_state.feasibility = reports
        self.run_state.plan = plan

    def _stage_plan(self) -> None:
        data = FileHandler.read_json(self._read(FEASIBILITY, "plan"))
        plan = MomentStateTrajectory.from_dict({"states": data["planned_states"]})
        self._write_json(PLAN, plan.to_dict())
        self.run_state.plan = plan

    def _stage_solve(self) -> None:
        plan = self._load_plan("solve")
        controls = solve_plan(plan, self.scenario, self.controller_config)
        self._write_json(
            CONTROLS,
            {
                "cost": self.controller_config.cost,
                "steps": [c.to_dict() for c in controls],
            },
        )

        kernels = realize_all(
            [c.kernel_moments for c in controls], self.realizer_config
        )
        for control, kernel in zip(controls, kernels):
            self._write_json(f"{KERNELS}/{control.step}.json", kernel.to_dict())
            mean = control.kernel_moments[1]
            spread = float(np.sqrt(control.kernel_moments[2] - mean**2))
            grid = export_density_grid(
                kernel,
                (mean - self.z * spread, mean + self.z * spread),
                self.density_points,
            )
            self._write_csv(f"{KERNELS}/{control.step}.density.csv", grid)

        self.run_state.plan = plan
        self.run_state.controls = controls
        self.run_state.kernels = kernels

    def _load_plan(self, stage: str) -> MomentStateTrajectory:
        return MomentStateTrajectory.from_dict(
            FileHandler.read_json(self._read(PLAN, stage))
        )

    def _load_controls(self, stage: str) -> List[StepControl]:
        data = FileHandler.read_json(self._read(CONTROLS, stage))
        return [StepControl.from_dict(entry) for entry in data["steps"]]

    def _stage_simulate(self) -> None:
        controls = self._load_controls("simulate")
        kernels = [
            RealizedDensity.from_dict(
                FileHandler.read_json(self._read(f"{KERNELS}/{k}.json", "simulate"))
            )
            for k in range(self.scenario.horizon)
        ]
        result = run_closed_loop(
            self.scenario, controls, kernels, self.simulation_config
        )

        horizon = self.scenario.horizon
        samples = {"run": np.arange(result.runs)}
        if result.states is not None:
            for k in range(horizon + 1):
                samples[f"x_{k}"] = result.states[:, k]
        else:
            samples[f"x_{horizon}"] = result.terminal
        self._write_csv(SAMPLES, pd.DataFrame(samples))

        inputs = {"run": np.arange(result.runs)}
        for k in range(horizon):
            inputs[f"u_{k}"] = result.controls[:, k]
        for k in range(horizon):
            inputs[f"f_{k}"] = result.kernel_draws[:, k]
        self._write_csv(INPUTS, pd.DataFrame(inputs))

        self.run_state.controls = controls
        self.run_state.kernels = kernels
        self.run_state.result = result

    def _load_result(self) -> ClosedLoopResult:
        horizon = self.scenario.horizon
        samples = FileHandler.read_csv(self._read(SAMPLES, "report"))
        inputs = FileHandler.read_csv(self._read(INPUTS, "report"))
        state_columns = [f"x_{k}" for k in range(horizon + 1)]
        states = (
            samples[state_columns].to_numpy(dtype=float)
            if all(column in samples for column in state_columns)
            else None
        )
        controls = [f"u_{k}" for k in range(horizon)]
        draws = [f"f_{k}" for k in range(horizon)]
        return ClosedLoopResult(
            terminal=samples[f"x_{horizon}"].to_numpy(dtype=float),
            states=states,
            controls=inputs[controls].to_numpy(dtype=float),
            kernel_draws=inputs[draws].to_numpy(dtype=float),
        )

    def _stage_report(self) -> None:
        scenario = self.scenario
        plan = self._load_plan("report")
        controls = self._load_controls("report")
        result = self._load_result()

        report = build_report(result, plan, controls, scenario.target, self.z)
        self._write_json(REPORT, report.to_dict())

        if result.states is not None:
            moments, errors = moment_table(result, plan.order)
            table = {"step": np.arange(scenario.horizon + 1)}
            for ell in range(1, plan.order + 1):
                table[f"planned_m{ell}"] = [state[ell] for state in plan.states]
                table[f"m{ell}"] = moments[:, ell - 1]
                table[f"se{ell}"] = errors[:, ell - 1]
            self._write_csv(MOMENTS, pd.DataFrame(table))

            overlays = {0: scenario.initial, scenario.horizon: scenario.target}
            for k in range(scenario.horizon + 1):
                histogram = export_histogram(
                    result.states[:, k], self.bins, overlay=overlays.get(k)
                )
                self._write_csv(f"hist_x{k}.csv", histogram.to_frame())
        else:
            histogram = export_histogram(
                result.terminal, self.bins, overlay=scenario.target
            )
            self._write_csv(f"hist_x{scenario.horizon}.csv", histogram.to_frame())
        for k in range(scenario.horizon):
            histogram = export_histogram(result.controls[:, k], self.bins)
            self._write_csv(f"hist_u{k}.csv", histogram.to_frame())

        mean, std = mean_and_std(scenario.target)
        value_range = (mean - self.z * std, mean + self.z * std)
        grid = export_density_grid(scenario.target, value_range, self.density_points)
        self._write_csv(TARGET_DENSITY, grid)

        self.run_state.plan = plan
        self.run_state.controls = controls
        self.run_state.result = result
        self.run_state.report = report


def run_pipeline(
    scenario: Scenario,
    stage: str = "report",
    config: Optional[Config] = None,
    output_dir: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> PipelineRun:
    """
    Run the stages of one scenario up to ``stage``.

    Args:
        scenario: Validated scenario
        stage: Last stage to run: check, plan, solve, simulate or report
        config: Tool configuration
        output_dir: Artifact directory
        overrides: Final configuration overrides keyed by dotted path

    Returns:
        The run, populated up to ``stage``

    Raises:
        StageError: Naming the failed stage and wrapping its error
    """
    pipeline = SteeringPipeline(scenario, config, output_dir, overrides)
    return pipeline.run(stage)
