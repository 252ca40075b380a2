import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, computed_field


class CheckRecord(BaseModel):
    name: str
    anchor: str
    residual: Optional[float] = None
    tolerance: Optional[float] = None
    passed: bool
    gated: bool = True
    detail: Optional[str] = None
    error: Optional[str] = None

    @classmethod
    def from_residual(
        cls,
        name: str,
        anchor: str,
        residual: float,
        tolerance: float,
        gated: bool = True,
        detail: Optional[str] = None,
    ) -> "CheckRecord":
        residual = float(residual)
        ok = math.isfinite(residual) and residual <= tolerance
        return cls(name=name, anchor=anchor, residual=residual, tolerance=tolerance,
                   passed=ok or not gated, gated=gated, detail=detail)

    @classmethod
    def from_flag(cls, name: str, anchor: str, ok: bool, detail: Optional[str] = None) -> "CheckRecord":
        return cls(name=name, anchor=anchor, passed=bool(ok), detail=detail)

    @classmethod
    def from_error(cls, name: str, anchor: str, exc: Exception) -> "CheckRecord":
        return cls(name=name, anchor=anchor, passed=False, error=f"{type(exc).__name__}: {exc}")


class VerificationReport(BaseModel):
    suite: str
    checks: List[CheckRecord] = Field(default_factory=list)
    timing: Dict[str, float] = Field(default_factory=dict)
    config: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.error is None and all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> List[CheckRecord]:
        return [check for check in self.checks if not check.passed]

    def check(self, name: str) -> CheckRecord:
        for record in self.checks:
            if record.name == name:
                return record
        raise KeyError(name)


class AssumptionReport(BaseModel):
    """Residuals of the standing assumptions on (L, A, T) with pass flags."""

    tolerance: float
    clauses: Dict[str, CheckRecord]

    @computed_field
    @property
    def passed(self) -> bool:
        return all(clause.passed for clause in self.clauses.values())

    def flagged(self) -> List[str]:
        return [name for name, clause in self.clauses.items() if not clause.passed]
