import numpy as np
import pytest

from batchedmg import MarkovGame, MaxPolicy, MinPolicy, make_env

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one human-readable pass/fail line for the terminal summary."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_game(rng, H=2, S=2, A=2, B=2, s0=0) -> MarkovGame:
    P = rng.dirichlet(np.ones(S), size=(H, S, A, B))
    return MarkovGame(P / P.sum(-1, keepdims=True), rng.random((H, S, A, B)), s0)


def random_policies(rng, H, S, A, B):
    mu = MaxPolicy(rng.dirichlet(np.ones(A), size=(H, S)))
    nu = MinPolicy(rng.dirichlet(np.ones(B), size=(H, S)))
    return mu, nu


def chain_game(H=3, r=1.0) -> MarkovGame:
    """Deterministic S=A=B=1 chain."""
    return MarkovGame(np.ones((H, 1, 1, 1, 1)), np.full((H, 1, 1, 1), r))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_game():
    return make_env({"name": "random_dense"}, 0)
