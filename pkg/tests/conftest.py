import pytest

from trajlens import corpus
from trajlens.dp import DPModel


@pytest.fixture
def two_state() -> DPModel:
    return corpus.two_state().model


@pytest.fixture
def absorbing() -> DPModel:
    return corpus.absorbing().model


@pytest.fixture(scope="session")
def ls50():
    return corpus.ls_nonregular(50)
