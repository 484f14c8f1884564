import pytest

from lhsim.config import parse_config
from lhsim.linkchar import build_threshold_set


@pytest.fixture(scope="session")
def default_thresholds():
    """Threshold set at the default grid, cached on disk across sessions."""
    cfg = parse_config()
    return build_threshold_set(cfg.linkchar_config(),
                               cache_path=cfg["run.cache"])
