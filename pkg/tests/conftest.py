"""Shared fixtures for the test suite."""

import json
import pathlib

import pytest

ORACLE_FILE = pathlib.Path(__file__).parent / "oracles" / "reference_values.json"


@pytest.fixture(scope="session")
def oracles():
    """Frozen reference values computed by the independent generator
    script before the main build (see tests/oracles/)."""
    with open(ORACLE_FILE) as f:
        return json.load(f)
