from __future__ import annotations

import re

import pytest

from aggseek.equilibrium import EquilibriumResult, solve_equilibrium
from aggseek.model import GameSpec

from helpers import demand_response_game, single_agent_game

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    """One CRITERION n: PASS/FAIL line per acceptance test, after capture ends."""
    lines: list[tuple[int, str]] = []
    for verdict, key in (("PASS", "passed"), ("FAIL", "failed"), ("FAIL", "error")):
        for report in terminalreporter.stats.get(key, []):
            if getattr(report, "when", "call") != "call" and verdict == "PASS":
                continue
            match = _CRITERION.match(report.nodeid.split("::")[-1])
            if match is None:
                continue
            num = int(match.group(1))
            desc = match.group(2).replace("_", " ")
            lines.append((num, f"CRITERION {num}: {verdict} - {desc}"))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    seen: set[int] = set()
    for num, line in sorted(lines):
        if num in seen:
            continue
        seen.add(num)
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def demand_game() -> GameSpec:
    return demand_response_game()


@pytest.fixture(scope="session")
def demand_ref(demand_game: GameSpec) -> EquilibriumResult:
    return solve_equilibrium(demand_game)


@pytest.fixture(scope="session")
def single_game() -> GameSpec:
    return single_agent_game()


@pytest.fixture(scope="session")
def single_ref(single_game: GameSpec) -> EquilibriumResult:
    return solve_equilibrium(single_game)
