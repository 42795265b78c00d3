"""Fast analytic self-checks run by ``prosody selfcheck``.

Checks:
    * bandit: score-function estimator, baseline variance reduction, policy convergence
    * cola: Hann overlap-add denominator is 1 in the interior at 50% hop
    * kl_oracle: chain-decomposed prior KL equals 2^T enumeration for random small cases
    * markov_run_length: run survival crosses 0.5 between 9 and 10 frames at p_stay = 0.93
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from config.settings import BANDIT_SAMPLES, FEATURE_HOP, SAMPLE_RATE
from services.bandit import reinforce_bandit_check
from services.markov_mask import prior_kl_bruteforce, prior_kl_chain
from services.models import MarkovPrior
from services.wsola import cola_denominator, hann_window, output_anchors
from utils.seeding import substream

logger = logging.getLogger(__name__)

__all__ = ["CheckResult", "SelfCheck", "run_selfcheck"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


class SelfCheck:
    """Runs every check; a failing check never stops the others."""

    # ---------------- Configuration ----------------
    COLA_LENGTHS = (64, 256, 512, 1024)
    COLA_TOL = 1e-6
    KL_CASES = 200
    KL_MAX_FRAMES = 10
    KL_TOL = 1e-8
    RUN_LENGTH_FRAMES = 10

    def __init__(self, seed: int = 0, bandit_samples: int = BANDIT_SAMPLES):
        self.seed = int(seed)
        self.bandit_samples = int(bandit_samples)

    # ---------------- Checks ----------------
    def check_bandit(self) -> CheckResult:
        report = reinforce_bandit_check(seed=self.seed, samples=self.bandit_samples)
        detail = " ".join(f"{k}={v:.4f}" for k, v in report.details.items())
        return CheckResult("bandit", report.passed, detail)

    def check_cola(self) -> CheckResult:
        worst = 0.0
        for length in self.COLA_LENGTHS:
            out_len = 8 * length
            den = cola_denominator(hann_window(length), output_anchors(out_len, length // 2), out_len)
            worst = max(worst, float(np.max(np.abs(den[length:out_len - length] - 1.0))))
        return CheckResult("cola", worst <= self.COLA_TOL, f"max_deviation={worst:.3e}")

    def check_kl_oracle(self) -> CheckResult:
        rng = substream(self.seed, "eval", 0)
        worst = 0.0
        for _ in range(self.KL_CASES):
            t = int(rng.integers(1, self.KL_MAX_FRAMES + 1))
            q = rng.uniform(0.01, 0.99, size=t)
            prior = MarkovPrior(p_stay=float(rng.uniform(0.5, 0.99)), p_init=float(rng.uniform(0.01, 0.5)))
            chain = prior_kl_chain(q, prior).item()
            worst = max(worst, abs(chain - prior_kl_bruteforce(q, prior)))
        return CheckResult("kl_oracle", worst <= self.KL_TOL, f"cases={self.KL_CASES} max_abs_error={worst:.3e}")

    def check_markov_run_length(self) -> CheckResult:
        prior = MarkovPrior()
        k = self.RUN_LENGTH_FRAMES
        longer, shorter = prior.run_survival(k), prior.run_survival(k - 1)
        ms = 1000.0 * FEATURE_HOP / SAMPLE_RATE
        passed = longer < 0.5 <= shorter
        return CheckResult(
            "markov_run_length",
            passed,
            f"P(run>={k})={longer:.3f} P(run>={k - 1})={shorter:.3f} crossing_ms={(k - 1) * ms:.0f}-{k * ms:.0f}",
        )

    # ---------------- Pipeline ----------------
    def checks(self) -> Sequence[Callable[[], CheckResult]]:
        return (self.check_bandit, self.check_cola, self.check_kl_oracle, self.check_markov_run_length)

    def run(self) -> List[CheckResult]:
        results = []
        for check in self.checks():
            try:
                result = check()
            except Exception as e:  # noqa: BLE001
                result = CheckResult(check.__name__.removeprefix("check_"), False, f"error: {e}")
            logger.info(f"[selfcheck] check={result.name} passed={result.passed} {result.detail}")
            results.append(result)
        return results


def run_selfcheck(seed: int = 0) -> List[CheckResult]:
    return SelfCheck(seed).run()
