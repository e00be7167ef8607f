"""Structured results for identity and inequality checks."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["VerificationReport"]


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


@dataclass
class VerificationReport:
    """Outcome of one checked identity or inequality.

    ``lhs`` and ``rhs`` are the two computed sides, ``ratio`` their quotient
    (or another scalar figure of merit named in ``details``), ``tolerance``
    the acceptance threshold the check was run at.
    """

    name: str
    passed: bool
    lhs: float | None = None
    rhs: float | None = None
    ratio: float | None = None
    tolerance: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def rel_gap(self):
        if self.lhs is None or self.rhs is None:
            return None
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        return abs(self.lhs - self.rhs) / scale

    def to_dict(self):
        d = {
            "name": self.name,
            "passed": bool(self.passed),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "tolerance": self.tolerance,
            "rel_gap": self.rel_gap,
            "details": self.details,
        }
        return _jsonable(d)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        parts = [f"[{status}] {self.name}"]
        if self.lhs is not None and self.rhs is not None:
            parts.append(f"lhs={self.lhs:.6g} rhs={self.rhs:.6g}")
        if self.ratio is not None:
            parts.append(f"ratio={self.ratio:.6g}")
        if self.tolerance is not None:
            parts.append(f"tol={self.tolerance:g}")
        return "  ".join(parts)
