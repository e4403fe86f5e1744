import pytest

from ledgermine.ledger import Event, Ledger, Taxonomy

H = 3600

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def taxonomy():
    return Taxonomy(
        [
            "exercise.bike",
            "exercise.run",
            "exercise.walk",
            "work",
            "sleep",
            "wellbeing.energy",
            "health.goal.energy",
            "health.goal.weight",
            "food.snack",
            "app.instagram",
            "app.blog",
            "app.podcast",
        ],
        actionable=["exercise.bike", "exercise.run", "exercise.walk", "sleep"],
        media=["app.instagram", "app.blog", "app.podcast"],
    )


@pytest.fixture
def ab_taxonomy():
    return Taxonomy(["a", "b"])


@pytest.fixture
def ab_ledger():
    """A@0h, A@10h, B@3h, B@11h, B@14h."""
    return Ledger(
        [
            Event("a0", "a", 0),
            Event("a1", "a", 10 * H),
            Event("b0", "b", 3 * H),
            Event("b1", "b", 11 * H),
            Event("b2", "b", 14 * H),
        ]
    )
