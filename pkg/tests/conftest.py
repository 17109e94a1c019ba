import pytest

from efl.names import NameSupply

from helpers import Names


@pytest.fixture
def supply() -> NameSupply:
    return NameSupply()


@pytest.fixture
def ns() -> Names:
    return Names()
