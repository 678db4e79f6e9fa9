import os

import pytest

SLOW_ENV = "LRP_SLOW"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale runs, enabled with LRP_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv(SLOW_ENV) == "1":
        return
    skip = pytest.mark.skip(reason=f"set {SLOW_ENV}=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
