import pytest

from coordmech import run_examples
from coordmech.examples import EXPECTED

EXAMPLES = {
    "chicken",
    "coordination",
    "direct",
    "matching pennies",
    "larger message set",
    "construction a",
    "construction b",
    "construction c",
}


def test_suite_passes():
    result = run_examples()
    assert result.passed, [f"{c.example}: {c.name} {c.detail}" for c in result.failures()]
    assert {c.example for c in result.checks} == EXAMPLES
    assert not result.degraded


@pytest.mark.parametrize(
    "key, bad, example",
    [
        ("coordination belief", [["1/4", "1/4"], ["1/4", "1/4"]], "coordination"),
        ("chicken CE value", ["5", "5"], "chicken"),
        ("pennies CE", [["1/4", "1/4"], ["1/4", "1/4"]], "matching pennies"),
        ("construction b belief", [["1/24"] * 6] * 4, "construction b"),
    ],
)
def test_wrong_expectation_is_a_named_failure(key, bad, example):
    result = run_examples(expected={key: bad})
    assert not result.passed
    failures = result.failures()
    assert failures and all(f.example == example for f in failures)
    assert all(f.name for f in failures)


def test_malformed_expectation_does_not_crash_the_suite():
    result = run_examples(expected={"direct belief": "garbage"})
    assert [f.example for f in result.failures()] == ["direct"]
    assert {c.example for c in result.checks} == EXAMPLES


def test_loose_tolerance_is_degraded():
    result = run_examples(tol=1e-2)
    assert result.degraded and result.passed


def test_expected_table_is_untouched():
    run_examples(expected={"pennies CE": [["1", "0"], ["0", "0"]]})
    assert EXPECTED["pennies CE"] == [["1/9", "2/9"], ["2/9", "4/9"]]
