"""Result containers shared by the recovery methods, and their JSON form."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CASE_MID = "a"      # sample inside the transient core
CASE_EDGE = "b"     # sample near a transient edge or past it


@dataclass
class FoldEstimate:
    n: int
    s: int
    tau: float
    beta: Optional[float] = None
    case: str = CASE_EDGE
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n": int(self.n), "s": int(self.s), "tau": float(self.tau),
                "beta": None if self.beta is None else float(self.beta),
                "case": self.case, "flags": list(self.flags)}


@dataclass
class RecoveryReport:
    method: str
    gamma_tilde: np.ndarray
    folds: list
    residual_tilde: np.ndarray
    filtered: Optional[np.ndarray] = None
    N: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    @property
    def P(self) -> int:
        return len(self.folds)

    @property
    def taus(self) -> np.ndarray:
        return np.array([f.tau for f in self.folds], dtype=float)

    @property
    def warnings(self) -> list:
        return self.diagnostics.setdefault("warnings", [])

    def to_dict(self) -> dict:
        diag = dict(self.diagnostics)
        diag.setdefault("warnings", [])
        return {
            "method": self.method,
            "N": self.N,
            "P": self.P,
            "gamma_tilde": [float(v) for v in self.gamma_tilde],
            "folds": [f.to_dict() for f in self.folds],
            "diagnostics": _jsonable(diag),
            "metrics": _jsonable(self.metrics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj
