from logic.selfcheck import CheckResult, SelfCheck, run_selfcheck


def test_all_checks_pass():
    results = run_selfcheck(seed=0)
    assert [r.name for r in results] == ["bandit", "cola", "kl_oracle", "markov_run_length"]
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_crashing_check_is_reported_not_raised():
    class Broken(SelfCheck):
        def check_cola(self) -> CheckResult:
            raise RuntimeError("boom")

    results = {r.name: r for r in Broken(seed=0, bandit_samples=2000).run()}
    assert not results["cola"].passed
    assert "boom" in results["cola"].detail
    assert results["kl_oracle"].passed
