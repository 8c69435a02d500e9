"""Shared test fixtures for glacier-da tests."""

from __future__ import annotations

import dataclasses

import pytest

from glacier_da.core.dynamics import calibrate_constants
from glacier_da.core.models import ModelParams, TwinSetup
from glacier_da.core.osse import default_twin_setup


@pytest.fixture(scope="session")
def p_true() -> ModelParams:
    return calibrate_constants(ModelParams())


@pytest.fixture(scope="session")
def coarse_setup() -> TwinSetup:
    """Default twin configuration on a one-year step."""
    return default_twin_setup(dt=1.0)


@pytest.fixture(scope="session")
def short_setup(coarse_setup: TwinSetup) -> TwinSetup:
    """One-year step over the first four centuries only."""
    return dataclasses.replace(coarse_setup, window=(0.0, 400.0))
