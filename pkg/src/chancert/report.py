from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

INSIDE = "inside"
OUTSIDE = "outside"
INCONCLUSIVE = "inconclusive"


class SolverError(RuntimeError):
    """An optimisation did not converge; the attached status says how far it got."""

    def __init__(self, message: str, status: str = "max_iter", details: dict | None = None):
        super().__init__(message)
        self.status = status
        self.details = details or {}


@dataclass
class CertificateReport:
    """Verdict of a membership test together with the numbers that justify it."""

    target: str
    verdict: str
    residuals: dict[str, float] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    value: float | None = None
    witness: Any = None
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in (INSIDE, OUTSIDE, INCONCLUSIVE):
            raise ValueError(f"bad verdict {self.verdict!r}")

    @property
    def inside(self) -> bool:
        return self.verdict == INSIDE

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "verdict": self.verdict,
            "value": self.value,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "tolerances": dict(self.tolerances),
            "witness": _jsonable(self.witness),
            "details": _jsonable(self.details),
        }


def _jsonable(x):
    if x is None or isinstance(x, (bool, int, str)):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return _jsonable(np.stack([x.real, x.imag], axis=-1))
        return x.tolist()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "to_dict"):
        return x.to_dict()
    return str(x)
