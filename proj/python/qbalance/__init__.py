"""Simulate multidimensional queues and check their distributional balance relations."""

from __future__ import annotations

import json
import os
from typing import Any, Mapping, Optional, Union

from . import _qbal
from ._qbal import (
    REPORT_SCHEMA,
    SCENARIO_SCHEMA,
    ConfigError,
    IoError,
    QbalError,
    SimultaneityViolation,
    check_families,
    scenario_files,
    sigma,
    solve_traffic,
    traffic_residual,
)

ScenarioLike = Union[str, os.PathLike, Mapping[str, Any]]

__all__ = [
    "REPORT_SCHEMA",
    "SCENARIO_SCHEMA",
    "ConfigError",
    "IoError",
    "QbalError",
    "SimultaneityViolation",
    "check_families",
    "estimate",
    "replay",
    "scenario_files",
    "sigma",
    "solve_traffic",
    "traffic_residual",
    "verify",
]


def _source(scenario: ScenarioLike) -> tuple[str, bool]:
    if isinstance(scenario, Mapping):
        return json.dumps(scenario), False
    return os.fspath(scenario), True


def verify(
    scenario: ScenarioLike,
    *,
    threads: int = 1,
    horizon: Optional[float] = None,
    seed: Optional[int] = None,
    replications: Optional[int] = None,
    events: Optional[int] = None,
) -> dict:
    """Simulate a scenario (file path or parsed document) and return the report as a dict."""
    text, is_path = _source(scenario)
    return json.loads(_qbal.verify_json(text, is_path, threads, horizon, seed, replications, events))


def estimate(
    scenario: ScenarioLike,
    *,
    threads: int = 1,
    horizon: Optional[float] = None,
    seed: Optional[int] = None,
    replications: Optional[int] = None,
) -> dict:
    """Time-average and embedded-epoch PGF estimates on the scenario grid."""
    text, is_path = _source(scenario)
    return json.loads(_qbal.estimate_json(text, is_path, threads, horizon, seed, replications))


def replay(path: Union[str, os.PathLike], end_time: Optional[float] = None) -> dict:
    """Model-free checks on a stored jump log."""
    return json.loads(_qbal.replay_json(os.fspath(path), end_time))
