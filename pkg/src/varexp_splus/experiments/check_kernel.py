"""Runner for ``check-kernel``: sampled A1-A3 checks of a registered kernel."""

from __future__ import annotations

import logging

from ..config import ExperimentConfig
from ..operator_kernel import check_all, validate_kernel
from .base import ExperimentResult, ExperimentRunner, ExperimentStatus, ExperimentTable

logger = logging.getLogger(__name__)

CHECK_FIELDS = ("condition", "samples", "violations", "worst_slack", "passed")
VIOLATION_FIELDS = ("condition", "z", "s", "xi", "xi_prime", "slack")


class CheckKernelRunner(ExperimentRunner):
    """Validates the declared exponents, then falsification-tests A1, A2, A3."""

    def handles(self, command: str) -> bool:
        return command == "check-kernel"

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        p = self.exponent(config)
        kernel = self.kernel(config, p)
        validate_kernel(kernel, p)

        reports = check_all(kernel, p, config.kernel.samples, config.seed)
        checks = [
            {
                "condition": report.condition.value,
                "samples": report.samples,
                "violations": len(report.violations),
                "worst_slack": report.worst_slack,
                "passed": report.passed,
            }
            for report in reports
        ]
        violations = [v.as_row(report.condition) for report in reports for v in report.violations]
        passed = all(report.passed for report in reports)
        failed = [report.condition.value for report in reports if not report.passed]
        if failed:
            logger.warning(f"kernel '{kernel.label}' violates {', '.join(failed)}")

        return ExperimentResult(
            command="check-kernel",
            status=ExperimentStatus.PASSED if passed else ExperimentStatus.FAILED,
            summary={
                "kernel": kernel.label,
                "exponent": p.describe(),
                "seed": config.seed,
                "failed_conditions": failed,
            },
            tables=[
                ExperimentTable("checks", CHECK_FIELDS, checks),
                ExperimentTable("violations", VIOLATION_FIELDS, violations),
            ],
            message=f"violations of {', '.join(failed)}" if failed else None,
        )
