import numpy as np
import pytest

from negsteer import preset_world_path
from negsteer.world import MixtureWorld


@pytest.fixture(scope="session")
def pet_world() -> MixtureWorld:
    return MixtureWorld.from_file(preset_world_path("pet"))


@pytest.fixture(scope="session")
def two_mode_world() -> MixtureWorld:
    return MixtureWorld.from_file(preset_world_path("two_mode"))


@pytest.fixture(scope="session")
def three_mode_world() -> MixtureWorld:
    return MixtureWorld.from_file(preset_world_path("three_mode"))


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
