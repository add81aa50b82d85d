import pytest

from croplattice import preset_config, preset_names, run_scenario


@pytest.fixture(scope="session")
def preset_reports():
    """Run all built-in presets once; shared by scenario and acceptance tests."""
    return {name: run_scenario(preset_config(name)) for name in preset_names()}


@pytest.fixture(scope="session")
def baseline_report(preset_reports):
    return preset_reports["baseline"]
