"""Tests for the randomized invariant suites."""

from jedmimo.selftest import SUITES, SuiteResult, run_all


class TestSelftestSuites:
    def test_run_all_passes_at_reduced_case_count(self):
        results = run_all(cases=40)
        assert len(results) == len(SUITES) == 6
        names = [r.name for r in results]
        assert len(set(names)) == 6
        for r in results:
            assert isinstance(r, SuiteResult)
            assert r.passed, f"{r.name}: {r.detail}"
            assert r.cases == 40 and r.detail == ""

    def test_each_suite_runs_standalone(self):
        for suite in SUITES:
            result = suite(cases=10)
            assert result.passed and result.name
