"""Per-check validation records."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

FLOOR = 1e-12


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a single numerical check.

    ``passed`` is derived: ``|estimate - analytic| <= tolerance * max(|analytic|, floor)``.
    """

    check_name: str
    analytic: float
    estimate: float
    tolerance: float
    seed: int | None = None
    n: int | None = None
    notes: str = ""
    extra_ok: bool = True
    passed: bool = field(init=False)

    def __post_init__(self):
        ok = (
            math.isfinite(self.estimate)
            and abs(self.estimate - self.analytic)
            <= self.tolerance * max(abs(self.analytic), FLOOR)
        )
        object.__setattr__(self, "passed", bool(ok and self.extra_ok))

    @property
    def rel_error(self) -> float:
        return abs(self.estimate - self.analytic) / max(abs(self.analytic), FLOOR)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ValidationReport":
        data = json.loads(text)
        passed = data.pop("passed")
        rep = cls(**data)
        if rep.passed != passed:
            raise ValueError("serialized 'passed' flag is inconsistent with its fields")
        return rep
