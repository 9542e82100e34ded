from __future__ import annotations

import pytest

from rashomon_mdp.checker import max_reach_mdp
from rashomon_mdp.cloning import extract_expert_dataset
from rashomon_mdp.proplang import parse_predicate
from rashomon_mdp.taxi import TaxiParams, build_taxi

# Lines recorded by the acceptance tests; echoed after the run so the
# per-criterion verdicts survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture()
def record_criterion():
    def _record(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


@pytest.fixture(scope="session")
def tiny_params() -> TaxiParams:
    # 2x2 grid, every cell a depot, two jobs: a few thousand states, fast
    # enough for unit tests while exercising every dynamics branch.
    return TaxiParams(
        width=2,
        height=2,
        fuel_capacity=12,
        num_jobs=2,
        first_passenger=(1, 2),
    )


@pytest.fixture(scope="session")
def tiny_mdp(tiny_params):
    return build_taxi(tiny_params)


@pytest.fixture(scope="session")
def tiny_target(tiny_params):
    return parse_predicate(f"jobs_done={tiny_params.num_jobs} & done=1")


@pytest.fixture(scope="session")
def tiny_expert(tiny_mdp, tiny_target):
    result, policy = max_reach_mdp(tiny_mdp, tiny_target)
    return result, policy


@pytest.fixture(scope="session")
def tiny_dataset(tiny_mdp, tiny_expert):
    _, policy = tiny_expert
    return extract_expert_dataset(tiny_mdp, policy)
