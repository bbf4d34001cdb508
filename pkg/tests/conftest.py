import pytest

import provtrack.run as runmod


@pytest.fixture(autouse=True)
def _isolate_active_run():
    """No test may leak an active run into the next one."""
    runmod._ACTIVE = None
    yield
    runmod._ACTIVE = None
