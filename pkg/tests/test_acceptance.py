"""Acceptance criteria, one test each at the stated tolerance.

Each test prints a ``[PASS]``/``[FAIL]`` line; the lines are also repeated in
the pytest terminal summary. ``polyshape selftest`` runs the same checks.
"""
import pytest

from polyshape import selftest

ACCEPTANCE_LINES = []


@pytest.mark.parametrize("number", sorted(selftest.CRITERIA))
def test_criterion(number):
    res = selftest.CRITERIA[number]()
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line
