import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seadbs.config import ExperimentConfig  # noqa: E402


@pytest.fixture
def tiny_cfg() -> ExperimentConfig:
    """A few short episodes; enough to exercise every code path quickly."""
    cfg = ExperimentConfig()
    cfg.seeds = [0, 1]
    cfg.training.episodes = 3
    cfg.training.steps_per_episode = 12
    cfg.evaluation.intervals = [5]
    cfg.evaluation.rollout_steps = 10
    cfg.evaluation.eval_seeds = [1001]
    cfg.evaluation.carrier_steps = 8
    cfg.calibration_seeds = [0, 1, 2, 3, 4]
    return cfg
