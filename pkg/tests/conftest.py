import numpy as np
import pytest

from ergoguide.model import HumanModel, Posture, Segment, default_model


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def make_test_model(masses, com_ratios=None, lengths=None, limits=None):
    """Synthetic five-segment model with controllable mass placement."""
    names = ("shank", "thigh", "torso", "upper_arm", "forearm")
    lengths = lengths or [0.4, 0.4, 0.5, 0.3, 0.3]
    com_ratios = com_ratios or [0.5] * 5
    segments = tuple(
        Segment(n, l, m, c) for n, l, m, c in zip(names, lengths, masses, com_ratios)
    )
    joint_limits = limits or {
        "ankle": (-30.0, 30.0),
        "knee": (0.0, 135.0),
        "torso": (-15.0, 90.0),
        "shoulder": (-180.0, 30.0),
        "elbow": (-145.0, 0.0),
    }
    return HumanModel(segments=segments, joint_limits=joint_limits)


def random_feasible_posture(model, rng):
    return Posture(rng.uniform(model.limits_low, model.limits_high))
