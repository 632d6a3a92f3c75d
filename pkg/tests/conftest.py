"""Shared fixtures: scenes, datasets, and the reference-policy suite runs."""

from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from avgrid.core import StepConfig
from avgrid.env import Scene, generate_city
from avgrid.runner import Episode, RunConfig, SuiteResult, generate_dataset, run_suite


@pytest.fixture(scope="session")
def step_cfg() -> StepConfig:
    return StepConfig()


@pytest.fixture(scope="session")
def run_cfg() -> RunConfig:
    return RunConfig()


@pytest.fixture(scope="session")
def city() -> Scene:
    """Acceptance-scale city: 400 m square at building density 0.15."""
    return generate_city(seed=11, extent=400.0, building_density=0.15,
                         max_height=30.0)


@pytest.fixture(scope="session")
def small_city() -> Scene:
    """Compact scene for unit tests that need real obstacles."""
    return generate_city(seed=5, extent=150.0, building_density=0.25,
                         max_height=25.0)


@pytest.fixture(scope="session")
def open_scene() -> Scene:
    """Ground plane only: obstacle-free air for controller tests."""
    return generate_city(seed=1, extent=200.0, building_density=0.0,
                         max_height=10.0, clearance=60.0)


@pytest.fixture(scope="session")
def suite_episodes(city, run_cfg) -> list[Episode]:
    """The 200-episode evaluation dataset, path lengths 10-40 moves."""
    return generate_dataset(city, n_episodes=200, seed=11,
                            length_range=(10, 40), cfg=run_cfg.step)


@dataclass
class TimedSuite:
    suite: SuiteResult
    seconds: float


@pytest.fixture(scope="session")
def oracle_suite_serial(city, suite_episodes, run_cfg) -> TimedSuite:
    """Single-threaded oracle run over the full dataset, with wall time."""
    t0 = time.perf_counter()
    suite = run_suite(suite_episodes, {city.scene_id: city}, "oracle", run_cfg,
                      parallelism=1)
    return TimedSuite(suite=suite, seconds=time.perf_counter() - t0)
