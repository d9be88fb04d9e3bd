from __future__ import annotations

import pytest

from fixture_repo import build_fixture, build_small


@pytest.fixture(scope="session")
def fixture_history(tmp_path_factory):
    return build_fixture(tmp_path_factory.mktemp("fixture") / "repo")


@pytest.fixture(scope="session")
def small_origin(tmp_path_factory):
    return build_small(tmp_path_factory.mktemp("small") / "origin").path


@pytest.fixture
def small_catalog(tmp_path, small_origin):
    path = tmp_path / "catalog.csv"
    path.write_text(f"name,url,language,skip\ndemo/small,{small_origin.as_uri()},Java,0\n", encoding="utf-8")
    return path


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per criterion; printed in the terminal summary."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} :: {detail}"
        print(ACCEPTANCE_LINES[number])
        assert ok, ACCEPTANCE_LINES[number]

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
