"""Stochastic modified flows for SGD."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from ._core import (
    available_commands,
    available_models,
    fit_order,
    linear_oracle,
    min_cost_assignment,
    sgd_chain,
    two_point_covariation,
    wasserstein2,
    weak_error_closed_form,
)

__all__ = [
    "ExperimentResult",
    "available_commands",
    "available_models",
    "fit_order",
    "linear_oracle",
    "min_cost_assignment",
    "run_experiment",
    "sgd_chain",
    "two_point_covariation",
    "wasserstein2",
    "weak_error_closed_form",
]


@dataclass
class ExperimentResult:
    summary: dict
    curve_csv: str
    trajectory_csv: str
    passed: bool


def run_experiment(config: Union[dict, str, Path], command: Optional[str] = None) -> ExperimentResult:
    """Run a config (a dict or a path to a JSON file), as the command line tool does."""
    if not isinstance(config, dict):
        config = json.loads(Path(config).read_text())
    from ._core import run_experiment_json

    summary, curve, trajectory, passed = run_experiment_json(json.dumps(config), command or "")
    return ExperimentResult(json.loads(summary), curve, trajectory, passed)
