"""Validation findings shared by agent and workflow checks.

Findings are data, not failures: validators return a report and callers
decide whether to refuse execution.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Finding:
    severity: str
    code: str
    location: str
    message: str

    def line(self) -> str:
        return f"{self.severity} {self.code} {self.location}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, code: str, location: str, message: str, severity: str = "error") -> None:
        self.findings.append(Finding(severity, code, location, message))

    def extend(self, other: "ValidationReport") -> None:
        self.findings.extend(other.findings)

    def codes(self) -> set[str]:
        return {f.code for f in self.findings}

    def lines(self) -> list[str]:
        return [f.line() for f in self.findings]
