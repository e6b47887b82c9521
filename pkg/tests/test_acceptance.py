"""End-to-end acceptance criteria, one test per criterion.

Each check prints its pass/fail line (visible with -s or on failure); the
verdicts, tolerances and pinned seeds live in gstlab.verify.
"""

import pytest

from gstlab.verify import ALL_CHECKS


@pytest.mark.parametrize("criterion", sorted(ALL_CHECKS))
def test_acceptance_criterion(criterion):
    result = ALL_CHECKS[criterion]()
    print(result.line())
    assert result.passed, result.line()
