"""Every acceptance criterion at its stated tolerance and time budget.

One PASS/FAIL line per criterion is printed and repeated in the terminal
summary.
"""

import pytest

from confhyp.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: f"criterion_{c.number}")
def test_criterion(criterion, acceptance_log):
    result = run_criterion(criterion, seed=0)
    line = result.line()
    acceptance_log.append(line)
    print(line)
    assert result.passed, line
