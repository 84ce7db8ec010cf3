"""Shared fixtures for the engine test suite."""

from __future__ import annotations

import os

import numpy as np
import pytest

os.environ.setdefault("MPLBACKEND", "Agg")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """One shared synthetic dataset for harness/acceptance tests."""
    from guidecap import generate_synthetic_dataset

    out = tmp_path_factory.mktemp("synthetic")
    return generate_synthetic_dataset(out, n_clips=50, seed=7, dim=256)
