"""Data-sparsity rules that gate model fitting.

All three rules use a strict 25% threshold, evaluated in integer arithmetic
(4 * count > n_areas) so the boundary case is exact.  The direct and
unit-level warnings can be overridden by the user; the area-level block
cannot.  Message strings are stable and versioned because the UI displays
them verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass

from .direct import DirectEstimates

__all__ = [
    "GateBlockedError",
    "GateOverrideRequired",
    "GateReport",
    "evaluate_gate",
    "MESSAGE_VERSION",
]

MESSAGE_VERSION = "1"

ALLOW = "allow"
WARN = "warn_overridable"
BLOCK = "error_blocked"

METHOD_DIRECT = "direct"
METHOD_AREA = "area_level"
METHOD_UNIT = "unit_level"


class GateBlockedError(RuntimeError):
    """Raised when a fit is requested for a blocked method/level."""

    def __init__(self, report: "GateReport", method: str):
        self.report = report
        self.method = method
        super().__init__("; ".join(report.messages_for(method)) or f"{method} blocked")


class GateOverrideRequired(RuntimeError):
    """Raised when a warned fit is requested without the override flag."""

    def __init__(self, report: "GateReport", method: str):
        self.report = report
        self.method = method
        super().__init__(
            "; ".join(report.messages_for(method))
            or f"{method} warned; set override to proceed"
        )


@dataclass(frozen=True)
class GateReport:
    level: int
    n_areas: int
    n_no_data: int
    n_low_info: int
    verdicts: dict[str, str]
    recommendation: str
    messages: tuple[str, ...]
    excluded_area_ids: tuple[str, ...]

    def verdict(self, method: str) -> str:
        return self.verdicts[method]

    def messages_for(self, method: str) -> tuple[str, ...]:
        prefix = {
            METHOD_DIRECT: "Direct estimates:",
            METHOD_AREA: "Area-level model:",
            METHOD_UNIT: "Unit-level model:",
        }[method]
        return tuple(m for m in self.messages if m.startswith(prefix))

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "n_areas": self.n_areas,
            "n_no_data": self.n_no_data,
            "n_low_info": self.n_low_info,
            "verdicts": dict(self.verdicts),
            "recommendation": self.recommendation,
            "messages": list(self.messages),
            "excluded_area_ids": list(self.excluded_area_ids),
            "message_version": MESSAGE_VERSION,
        }


def _pct(count: int, n: int) -> str:
    return f"{100.0 * count / n:.0f}%"


def evaluate_gate(direct: DirectEstimates, level: int) -> GateReport:
    """Apply the sparsity rules to completed direct estimates at a level."""
    if direct.level != level:
        raise ValueError(f"direct estimates are for level {direct.level}, not {level}")
    n, nd, li = direct.flag_counts()
    if n == 0:
        raise ValueError("gate undefined for a level with no areas")
    problem = nd + li

    verdicts = {
        METHOD_DIRECT: WARN if 4 * problem > n else ALLOW,
        METHOD_AREA: BLOCK if 4 * problem > n else ALLOW,
        METHOD_UNIT: WARN if 4 * nd > n else ALLOW,
    }

    messages: list[str] = []
    if verdicts[METHOD_DIRECT] == WARN:
        messages.append(
            f"Direct estimates: {nd} areas with no data plus {li} low-information areas "
            f"is {_pct(problem, n)} of {n} areas (above the 25% threshold). "
            f"Estimates are reported only where data exist; uncertainty may be unreliable. "
            f"You can override this warning."
        )
    if verdicts[METHOD_AREA] == BLOCK:
        messages.append(
            f"Area-level model: {nd} areas with no data plus {li} low-information areas "
            f"is {_pct(problem, n)} of {n} areas (above the 25% threshold), "
            f"so the area-level model cannot be fitted at this level. "
            f"This check cannot be overridden."
        )
    elif problem > 0:
        messages.append(
            f"Area-level model: {problem} of {n} areas lack usable direct estimates "
            f"and will be excluded from the likelihood; the spatial model predicts them."
        )
    if verdicts[METHOD_UNIT] == WARN:
        messages.append(
            f"Unit-level model: {nd} of {n} areas have no data ({_pct(nd, n)}, above the "
            f"25% threshold). Fitting uses all available clusters but the prevalence "
            f"surface may be oversmoothed; interpret uncertainty carefully. "
            f"You can override this warning."
        )

    if verdicts[METHOD_DIRECT] == ALLOW:
        recommendation = METHOD_DIRECT
    elif verdicts[METHOD_AREA] == ALLOW:
        recommendation = METHOD_AREA
    else:
        recommendation = METHOD_UNIT

    excluded: tuple[str, ...] = ()
    if verdicts[METHOD_AREA] == ALLOW:
        excluded = tuple(
            aid for aid, a in direct.areas.items() if a.flag != "ok"
        )

    return GateReport(
        level=level,
        n_areas=n,
        n_no_data=nd,
        n_low_info=li,
        verdicts=verdicts,
        recommendation=recommendation,
        messages=tuple(messages),
        excluded_area_ids=excluded,
    )
