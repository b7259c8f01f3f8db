"""
Configuration management utilities.
"""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class Config:
    """
    Configuration manager for the steering solver.
    """

    DEFAULT_CONFIG = {
        "controller": {
            "grid_points": 201,
            "refine_tolerance": 1e-6,
            "psd_tolerance": 1e-9,
            "cost": "paper",
        },
        "planner": {"repair_max_iterations": 20, "repair_initial_inflation": 1e-3},
        "realizer": {
            "nodes": 4001,
            "half_width": 12.0,
            "max_iterations": 200,
            "gradient_tolerance": 1e-8,
            "backtracking": 0.5,
            "armijo": 1e-4,
            "moment_tolerance": 1e-5,
            "psd_tolerance": 1e-9,
            "reference_variance": "central",
            "method": "newton",
            "max_workers": 4,
            "widening": [1.0, 4.0, 16.0, 64.0],
            "acceptance_floor": 1e-3,
        },
        "simulation": {
            "runs": 2000,
            "seed": 2024,
            "record_full_trajectories": True,
            "block_size": 1000,
            "max_workers": 4,
            "progress": False,
        },
        "reporting": {"z": 4.0, "bins": 50, "density_points": 400},
        "paths": {"output_dir": "./output"},
        "logging": {
            "level": "INFO",
            "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        },
    }

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        """
        Initialize configuration.

        Args:
            config_path: Path to a YAML configuration file (optional)
        """
        self.config_data = copy.deepcopy(self.DEFAULT_CONFIG)

        if config_path:
            self.load_from_file(config_path)

        self._setup_logging()
        logger.info("Configuration initialized")

    def load_from_file(self, config_path: Union[str, Path]) -> None:
        """
        Load configuration from YAML file.

        Args:
            config_path: Path to configuration file

        Raises:
            ConfigurationError: If the file is missing, unreadable or not a mapping
        """
        config_path = Path(config_path)

        if not config_path.exists():
            raise ConfigurationError(
                f"Configuration file not found: {config_path}", field="config"
            )

        try:
            with open(config_path, "r", encoding="utf-8") as f:
                user_config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            logger.error(f"Invalid YAML in config file: {e}")
            raise ConfigurationError(f"invalid YAML: {e}", field="config") from e

        if user_config:
            if not isinstance(user_config, dict):
                raise ConfigurationError("top level must be a mapping", field="config")
            self._merge_config(self.config_data, user_config)
            logger.info(f"Loaded configuration from: {config_path}")

    def save_to_file(self, config_path: Union[str, Path]) -> None:
        """
        Save current configuration to YAML file.

        Args:
            config_path: Path where to save configuration
        """
        config_path = Path(config_path)
        config_path.parent.mkdir(parents=True, exist_ok=True)

        try:
            with open(config_path, "w", encoding="utf-8") as f:
                yaml.dump(self.config_data, f, default_flow_style=False, indent=2)

            logger.info(f"Configuration saved to: {config_path}")

        except Exception as e:
            logger.error(f"Failed to save configuration: {e}")
            raise

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation.

        Args:
            key: Configuration key (e.g., 'simulation.runs')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        keys = key.split(".")
        value = self.config_data

        try:
            for k in keys:
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key: str, value: Any) -> None:
        """
        Set configuration value using dot notation.

        Args:
            key: Configuration key (e.g., 'controller.cost')
            value: Value to set
        """
        keys = key.split(".")
        config = self.config_data

        for k in keys[:-1]:
            if k not in config:
                config[k] = {}
            config = config[k]

        config[keys[-1]] = value
        logger.debug(f"Set configuration: {key} = {value}")

    def merge(self, overrides: Dict[str, Any]) -> None:
        """
        Merge a nested override mapping, e.g. a scenario's config blocks.
        """
        self._merge_config(self.config_data, copy.deepcopy(overrides))
        logger.debug(f"Merged configuration overrides for {sorted(overrides)}")

    def _merge_config(self, base: Dict[str, Any], override: Dict[str, Any]) -> None:
        """
        Recursively merge configuration dictionaries.

        Args:
            base: Base configuration dictionary
            override: Override configuration dictionary
        """
        for key, value in override.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._merge_config(base[key], value)
            else:
                base[key] = value

    def _setup_logging(self) -> None:
        """
        Setup logging configuration.
        """
        log_level = self.get("logging.level", "INFO")
        log_format = self.get("logging.format")

        numeric_level = getattr(logging, str(log_level).upper(), logging.INFO)

        logging.basicConfig(level=numeric_level, format=log_format, force=True)

    def get_controller_config(self) -> Dict[str, Any]:
        """
        Get gain-search configuration.

        Returns:
            Dictionary with controller configuration
        """
        return self.get("controller", {})

    def get_planner_config(self) -> Dict[str, Any]:
        return self.get("planner", {})

    def get_realizer_config(self) -> Dict[str, Any]:
        """
        Get density-realization configuration.

        Returns:
            Dictionary with realizer configuration
        """
        return self.get("realizer", {})

    def get_simulation_config(self) -> Dict[str, Any]:
        """
        Get Monte Carlo configuration.

        Returns:
            Dictionary with simulation configuration
        """
        return self.get("simulation", {})

    def get_reporting_config(self) -> Dict[str, Any]:
        return self.get("reporting", {})

    def get_paths_config(self) -> Dict[str, Any]:
        """
        Get paths-related configuration.

        Returns:
            Dictionary with paths configuration
        """
        return self.get("paths", {})
