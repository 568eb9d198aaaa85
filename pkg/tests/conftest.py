import pytest

from intentbot import fixtures
from intentbot.commerce import CsvSheetStore
from intentbot.dialog import DialogEngine


@pytest.fixture(scope="session")
def bundle():
    return fixtures.fixture_bundle()


@pytest.fixture(scope="session")
def catalog():
    return fixtures.fixture_catalog()


@pytest.fixture(scope="session")
def faq_kb():
    return fixtures.fixture_faq()


@pytest.fixture(scope="session")
def business():
    return fixtures.fixture_business()


@pytest.fixture
def store(tmp_path):
    return CsvSheetStore(tmp_path / "orders.csv")


@pytest.fixture
def engine(bundle, catalog, faq_kb, business, store):
    return DialogEngine(bundle, catalog, faq_kb, business, store)
