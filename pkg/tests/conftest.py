"""Shared fixtures: the example network, synthesized gains, and reference runs.

Everything heavy (gain synthesis, full-horizon simulations) is session-scoped
so the suite pays for each expensive artifact exactly once.  All randomness is
seeded; every fixture is deterministic.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from rol.model import builtin_example_scenario
from rol.simcore import simulate
from rol.synthesis import synthesize


@pytest.fixture(scope="session")
def scenario():
    return builtin_example_scenario()


@pytest.fixture(scope="session")
def gains(scenario):
    return synthesize(scenario)


@pytest.fixture(scope="session")
def baseline_gains(scenario):
    return synthesize(scenario, kind="baseline")


@pytest.fixture(scope="session")
def attack_run(scenario, gains):
    """Resilient observers under the biased node-2 injection, seed 0."""
    return simulate(scenario, gains, seed=0)


@pytest.fixture(scope="session")
def baseline_run(scenario, baseline_gains):
    """Plain observers (no detector layer) under the same injection."""
    return simulate(scenario, baseline_gains, seed=0)


@pytest.fixture(scope="session")
def noattack_scenario(scenario):
    return dataclasses.replace(scenario, attacks=())


@pytest.fixture(scope="session")
def noattack_run(noattack_scenario, gains):
    return simulate(noattack_scenario, gains, seed=0)


def error_norms(traj) -> np.ndarray:
    """Per-node estimation-error magnitudes, shape (samples, nodes)."""
    return np.linalg.norm(traj.e, axis=2)


def time_slice(t: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return (t >= lo) & (t <= hi)
