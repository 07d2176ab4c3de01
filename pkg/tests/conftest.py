from pathlib import Path

import pytest

import probkb

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def cancer_text() -> str:
    return (FIXTURES / "cancer.akb").read_text()


@pytest.fixture(scope="session")
def cancer_kb(cancer_text):
    return probkb.parse_kb(cancer_text)


@pytest.fixture(scope="session")
def cancer_query(cancer_kb):
    return probkb.parse_query(
        "cancer(?a,SAM) | headache(YES,SAM), coma(YES,SAM)", cancer_kb
    )


@pytest.fixture(scope="session")
def early_margin_kb():
    return probkb.parse_kb((FIXTURES / "early_margin.akb").read_text())


@pytest.fixture(scope="session")
def early_margin_query(early_margin_kb):
    return probkb.parse_query("alarm(?a,KIT) | alert(ON,KIT)", early_margin_kb)


@pytest.fixture(scope="session")
def guarded_kb():
    return probkb.parse_kb((FIXTURES / "guarded.akb").read_text())


def fixture_path(name: str) -> Path:
    return FIXTURES / name
