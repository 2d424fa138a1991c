import math

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from aoipreempt.dist import ServiceDistribution

# fixed example sequence so repeated runs see the same cases
settings.register_profile("repeatable", derandomize=True, deadline=None)
settings.load_profile("repeatable")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def service_laws(draw, max_atoms=2, max_exps=2):
    """Random atoms+exponentials mixtures with weights summing to one."""
    n_atoms = draw(st.integers(0, max_atoms))
    n_exps = draw(st.integers(0 if n_atoms else 1, max_exps))
    raw = draw(
        st.lists(st.floats(0.05, 1.0), min_size=n_atoms + n_exps, max_size=n_atoms + n_exps)
    )
    total = sum(raw)
    weights = [w / total for w in raw]
    weights[-1] = 1.0 - sum(weights[:-1])
    locs = draw(st.lists(st.floats(0.1, 3.0), min_size=n_atoms, max_size=n_atoms))
    rates = draw(st.lists(st.floats(0.2, 5.0), min_size=n_exps, max_size=n_exps))
    return ServiceDistribution(
        atoms=tuple(zip(locs, weights[:n_atoms])),
        exp_components=tuple(zip(rates, weights[n_atoms:])),
    )


thresholds = st.one_of(st.just(0.0), st.floats(0.01, 4.0), st.just(math.inf))
rates = st.floats(0.1, 4.0)
