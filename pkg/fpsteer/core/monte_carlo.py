"""
Monte Carlo execution of the physical closed loop.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..exceptions import DomainError
from .density_realizer import RealizedDensity, sample_realized
from .distribution_catalog import sample
from .moment_algebra import MomentSequence
from .scenario import Scenario
from .step_controller import StepControl

logger = logging.getLogger(__name__)

ROLE_INIT = 0
ROLE_KERNEL = 1
ROLE_NOISE = 2


@dataclass(frozen=True)
class SimulationConfig:
    """
    Monte Carlo settings.

    Runs are split into blocks of ``block_size``; every (block, step, role)
    triple owns an independent counter-based stream derived from ``seed``,
    so output does not depend on ``max_workers``.
    """

    runs: int = 2000
    seed: int = 2024
    record_full_trajectories: bool = True
    block_size: int = 1000
    max_workers: int = 4
    progress: bool = False

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise DomainError(f"runs must be >= 1, got {self.runs}")
        if self.seed < 0:
            raise DomainError(f"seed must be nonnegative, got {self.seed}")
        if self.block_size < 1 or self.max_workers < 1:
            raise DomainError("block_size and max_workers must be >= 1")

    @classmethod
    def from_config(cls, config) -> "SimulationConfig":
        section = config.get_simulation_config()
        return cls(
            runs=int(section["runs"]),
            seed=int(section["seed"]),
            record_full_trajectories=bool(section["record_full_trajectories"]),
            block_size=int(section["block_size"]),
            max_workers=int(section["max_workers"]),
            progress=bool(section["progress"]),
        )


@dataclass(frozen=True, eq=False)
class ClosedLoopResult:
    """
    Sample paths of M runs over K steps.

    Attributes:
        terminal: x(K), shape (M,)
        states: x(0..K), shape (M, K+1), or None when not recorded
        controls: u(k), shape (M, K)
        kernel_draws: F(k), shape (M, K)
    """

    terminal: np.ndarray
    states: Optional[np.ndarray]
    controls: np.ndarray
    kernel_draws: np.ndarray

    def __post_init__(self) -> None:
        runs, horizon = self.controls.shape
        if self.terminal.shape != (runs,) or self.kernel_draws.shape != (runs, horizon):
            raise DomainError("inconsistent result dimensions")
        if self.states is not None and self.states.shape != (runs, horizon + 1):
            raise DomainError("inconsistent state matrix dimensions")

    @property
    def runs(self) -> int:
        return int(self.terminal.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.controls.shape[1])


def stream(seed: int, block: int, step: int, role: int) -> np.random.Generator:
    """Independent Philox stream keyed by (block, step, role)."""
    sequence = np.random.SeedSequence(seed, spawn_key=(block, step, role))
    return np.random.Generator(np.random.Philox(sequence))


class ClosedLoopSimulator:
    """
    Runs the closed loop x(k+1) = a x + b u + w with u = -c a x + F, block by block.
    """

    def __init__(
        self,
        scenario: Scenario,
        controls: Sequence[StepControl],
        kernels: Sequence[RealizedDensity],
        config: Optional[SimulationConfig] = None,
    ):
        """
        Initialize the simulator.

        Args:
            scenario: Problem instance
            controls: Solved steps 0..K-1
            kernels: Realized kernel densities 0..K-1

        Raises:
            DomainError: If controls or kernels do not cover every step
        """
        if len(controls) != scenario.horizon or len(kernels) != scenario.horizon:
            raise DomainError(
                f"need {scenario.horizon} controls and kernels, "
                f"got {len(controls)} and {len(kernels)}"
            )
        steps = [control.step for control in controls]
        if steps != list(range(scenario.horizon)):
            raise DomainError(f"controls must cover steps in order, got {steps}")

        self.scenario = scenario
        self.controls = list(controls)
        self.kernels = list(kernels)
        self.config = config or SimulationConfig()
        self._progress_lock = threading.Lock()
        logger.info(
            f"ClosedLoopSimulator initialized: {self.config.runs} runs, "
            f"{scenario.horizon} steps, seed {self.config.seed}"
        )

    def _run_block(self, block: int, size: int) -> Dict[str, np.ndarray]:
        seed = self.config.seed
        horizon = self.scenario.horizon
        noise_std = float(np.sqrt(self.scenario.noise_variance))

        states = np.empty((size, horizon + 1))
        controls = np.empty((size, horizon))
        kernel_draws = np.empty((size, horizon))

        init_rng = stream(seed, block, 0, ROLE_INIT)
        states[:, 0] = sample(self.scenario.initial, init_rng, size)
        for k in range(horizon):
            a, b = self.scenario.gains(k)
            c = self.controls[k].gain
            x = states[:, k]
            kernel_rng = stream(seed, block, k, ROLE_KERNEL)
            f = sample_realized(self.kernels[k], kernel_rng, size)
            w = stream(seed, block, k, ROLE_NOISE).normal(0.0, noise_std, size)
            u = -c * a * x + f
            kernel_draws[:, k] = f
            controls[:, k] = u
            states[:, k + 1] = a * x + b * u + w

        return {"states": states, "controls": controls, "kernel_draws": kernel_draws}

    def run(
        self, progress_callback: Optional[Callable[[int, int], None]] = None
    ) -> ClosedLoopResult:
        """
        Simulate every run and merge blocks by run index.

        Args:
            progress_callback: Called with (completed blocks, total blocks)

        Returns:
            Closed-loop sample paths
        """
        runs = self.config.runs
        horizon = self.scenario.horizon
        block_size = self.config.block_size
        blocks = [
            (block, min(block_size, runs - start))
            for block, start in enumerate(range(0, runs, block_size))
        ]

        states = np.empty((runs, horizon + 1))
        controls = np.empty((runs, horizon))
        kernel_draws = np.empty((runs, horizon))
        completed = 0
        bar = tqdm(
            total=len(blocks), desc="Simulating", disable=not self.config.progress
        )

        def update_progress() -> None:
            nonlocal completed
            with self._progress_lock:
                completed += 1
                bar.update(1)
                if progress_callback:
                    progress_callback(completed, len(blocks))

        with ThreadPoolExecutor(max_workers=self.config.max_workers) as executor:
            future_to_block = {
                executor.submit(self._run_block, block, size): block
                for block, size in blocks
            }
            for future in as_completed(future_to_block):
                block = future_to_block[future]
                try:
                    part = future.result()
                except Exception as e:
                    logger.error(f"Simulation block {block} failed: {e}")
                    bar.close()
                    raise
                start = block * block_size
                stop = start + part["states"].shape[0]
                states[start:stop] = part["states"]
                controls[start:stop] = part["controls"]
                kernel_draws[start:stop] = part["kernel_draws"]
                update_progress()
        bar.close()

        if not (np.all(np.isfinite(states)) and np.all(np.isfinite(controls))):
            raise DomainError("simulation produced non-finite values")

        logger.info(f"Simulated {runs} runs in {len(blocks)} blocks")
        return ClosedLoopResult(
            terminal=states[:, -1].copy(),
            states=states if self.config.record_full_trajectories else None,
            controls=controls,
            kernel_draws=kernel_draws,
        )


def run_closed_loop(
    scenario: Scenario,
    controls: Sequence[StepControl],
    kernels: Sequence[RealizedDensity],
    config: Optional[SimulationConfig] = None,
) -> ClosedLoopResult:
    """
    Simulate M independent runs of the controlled system.

    Raises:
        DomainError: If controls or kernels do not cover steps 0..K-1
    """
    return ClosedLoopSimulator(scenario, controls, kernels, config).run()


def empirical_moments(samples: Sequence[float], order: int) -> MomentSequence:
    """
    Sample raw moments (1/M) sum x_i^l for l = 1..order.

    Raises:
        DomainError: If ``samples`` is empty
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise DomainError("cannot take moments of an empty sample")
    if order < 1:
        raise DomainError(f"order must be positive, got {order}")
    return MomentSequence(np.mean(x[:, None] ** np.arange(1, order + 1), axis=0))


def standard_errors(samples: Sequence[float], order: int) -> np.ndarray:
    """
    Standard errors of the raw sample moments: sd(x^l) / sqrt(M).

    Raises:
        DomainError: If fewer than two samples are given
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < 2:
        raise DomainError("standard errors need at least two samples")
    powers = x[:, None] ** np.arange(1, order + 1)
    return np.std(powers, axis=0, ddof=1) / np.sqrt(x.size)


def moment_table(result: ClosedLoopResult, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Empirical moments and standard errors of every recorded state.

    Returns:
        Arrays of shape (K+1, order): moments and their standard errors
    """
    if result.states is None:
        raise DomainError("full trajectories were not recorded")
    columns = [result.states[:, k] for k in range(result.horizon + 1)]
    moments = np.array([empirical_moments(x, order).values for x in columns])
    errors = np.array([standard_errors(x, order) for x in columns])
    return moments, errors
