import os
from enum import Enum
from typing import Dict
from pathlib import Path
from dataclasses import dataclass
from functools import cached_property


class EnvironmentVars(Enum):
    """
    Environment variables used by the application.
    """

    SEED = "SEED"
    BUDGET_SCALE = "BUDGET_SCALE"
    MAX_WORKERS = "MAX_WORKERS"
    OUT_DIR = "OUT_DIR"
    LOG_LEVEL = "LOG_LEVEL"


@dataclass(frozen=True)
class EnvironmentManager:
    """
    Manages environment variables.
    """

    variables: EnvironmentVars = EnvironmentVars

    @staticmethod
    def get_environment_var(key: EnvironmentVars, default: str = None):
        """
        Retrieves an environment variable, falling back to the given default.
        """
        key_val = key.value
        env_var = os.environ.get(key_val, default)
        if env_var is None:
            raise ValueError(f"Environment variable '{key_val}' not found")
        return env_var


class Directories(Enum):
    """
    Directories used by the application.
    """

    RESULTS = "results"
    LOGS = "logs"


@dataclass(frozen=True)
class DirectoryManager:
    """
    Manages directory paths, ensuring they exist.
    """

    base_dir: Path = Path.cwd()
    directories: Directories = Directories

    @cached_property
    def directory_paths(self) -> Dict[str, Path]:
        """
        Returns a dictionary with absolute paths for all directories.
        """
        paths = {}
        for dir in self.directories:
            dir_path = self.base_dir / dir.value
            try:
                dir_path.mkdir(parents=True, exist_ok=True)
                paths[dir.name] = dir_path
            except OSError as e:
                raise RuntimeError(
                    f"Unexpected error occured while creating '{dir_path}' : {e}"
                )
        return paths

    def get_directory_path(self, directory: Directories) -> Path:
        """
        Retrieves the absolute path of a specific directory.
        """
        dir_name = directory.name
        path = self.directory_paths.get(dir_name)
        if path is None:
            raise ValueError(f"Directory '{dir_name}' not found")
        return path


class CatalogPaths:
    """
    In-repo locations of the shipped scenario and measure documents.
    """

    ROOT: Path = Path(__file__).resolve().parent
    SCENARIOS: Path = ROOT / "scenarios"
    MEASURES: Path = ROOT / "measures"


@dataclass(frozen=True)
class RunDefaults:
    """
    Built-in defaults for a verification run, overridable from the environment.
    """

    seed: int
    budget_scale: float
    max_workers: int
    log_level: str

    @classmethod
    def from_environment(cls, env_manager: EnvironmentManager) -> "RunDefaults":
        variables = env_manager.variables
        return cls(
            seed=int(env_manager.get_environment_var(variables.SEED, "20240917")),
            budget_scale=float(
                env_manager.get_environment_var(variables.BUDGET_SCALE, "1.0")
            ),
            max_workers=int(
                env_manager.get_environment_var(
                    variables.MAX_WORKERS, str(max(1, (os.cpu_count() or 2) - 1))
                )
            ),
            log_level=env_manager.get_environment_var(variables.LOG_LEVEL, "INFO"),
        )


@dataclass(frozen=True)
class AppConfig:
    """
    Main application configuration.
    """

    directory_manager: DirectoryManager = DirectoryManager()
    environment_manager: EnvironmentManager = EnvironmentManager()

    def run_defaults(self) -> RunDefaults:
        return RunDefaults.from_environment(self.environment_manager)

    def results_dir(self) -> Path:
        """
        Output directory: OUT_DIR when set, otherwise ./results.
        """
        out_dir = os.environ.get(self.environment_manager.variables.OUT_DIR.value)
        if out_dir:
            path = Path(out_dir)
            path.mkdir(parents=True, exist_ok=True)
            return path
        return self.directory_manager.get_directory_path(
            self.directory_manager.directories.RESULTS
        )


app_config = AppConfig()
