import numpy as np
import pytest

from dualarm.collision import Scene
from dualarm.kinematics import default_model
from dualarm.shapespace import build_shape_space
from dualarm.shapespace import synthetic as syn


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def empty_scene():
    return Scene()


@pytest.fixture(scope="session")
def can_space():
    """Shape space over 8 synthetic can instances (d = 8), shared by the
    shape-space and acceptance tests."""
    canonical = syn.sample_can(syn.CANONICAL_CAN)
    rng = np.random.default_rng(7)
    training = [syn.sample_can(syn.random_can_params(rng)) for _ in range(8)]
    space, fields = build_shape_space(
        canonical, training, 8, grasps=syn.can_grasps(syn.CANONICAL_CAN)
    )
    return {"space": space, "fields": fields, "canonical": canonical}
