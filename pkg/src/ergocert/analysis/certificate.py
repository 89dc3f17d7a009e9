"""Certificate value objects and controller configurations."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


class Framework(str, Enum):
    NOMINAL = "Nominal"
    INTERVAL = "Interval"
    ROBUST = "Robust"
    SIGN = "Sign"
    STRUCTURAL = "Structural"


class Property(str, Enum):
    ERGODICITY = "Ergodicity"
    ERGODICITY_BIMOLECULAR = "ErgodicityBimolecular"
    OUTPUT_CONTROLLABILITY = "OutputControllability"
    AIC = "AIC"


class Verdict(str, Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    UNKNOWN = "Unknown"

    @property
    def exit_code(self) -> int:
        return {"Holds": 0, "Fails": 1, "Unknown": 2}[self.value]


def worst(verdicts) -> Verdict:
    vs = list(verdicts)
    if Verdict.FAILS in vs:
        return Verdict.FAILS
    if Verdict.UNKNOWN in vs:
        return Verdict.UNKNOWN
    return Verdict.HOLDS


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class ControlSpec:
    """Antithetic controller acting on ``actuated`` to regulate ``controlled``.

    Indices are 0-based species positions.
    """

    actuated: int = 0
    controlled: int = 0
    mu: float = 1.0
    theta: float = 1.0
    eta: float = 1.0
    k: float = 1.0

    def validate(self, d: int) -> None:
        for name in ("actuated", "controlled"):
            i = getattr(self, name)
            if not 0 <= i < d:
                raise IndexError(f"{name} species index {i} out of range for {d} species")
        for name in ("mu", "theta", "eta", "k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"controller rate {name} must be positive")

    @property
    def setpoint(self) -> float:
        return self.mu / self.theta

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("actuated", "controlled", "mu", "theta", "eta", "k")}


def _arr(x):
    if x is None:
        return None
    return np.asarray(x, dtype=float)


def _matrix(x) -> np.ndarray:
    # an empty matrix serialises to [] and would come back one-dimensional
    m = np.asarray(x, dtype=float)
    return m.reshape(0, 0) if m.size == 0 else m


def _list(x):
    if x is None:
        return None
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


@dataclass
class Certificate:
    framework: Framework
    property: Property
    verdict: Verdict
    v: np.ndarray | None = None
    w: np.ndarray | None = None
    mu_shift: float | None = None
    alpha: float | None = None
    setpoint_bound: float | None = None
    caveats: list[str] = field(default_factory=list)
    matrices: dict[str, np.ndarray] = field(default_factory=dict)
    counterexample: dict[str, Any] | None = None
    details: dict[str, Any] = field(default_factory=dict)
    irreducible_asserted: bool = False
    sub: list["Certificate"] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    def to_dict(self) -> dict:
        return {
            "framework": self.framework.value,
            "property": self.property.value,
            "verdict": self.verdict.value,
            "v": _list(self.v),
            "w": _list(self.w),
            "mu_shift": self.mu_shift,
            "alpha": self.alpha,
            "setpoint_bound": self.setpoint_bound,
            "caveats": list(self.caveats),
            "matrices": {k: _list(m) for k, m in self.matrices.items()},
            "counterexample": _jsonable(self.counterexample),
            "details": _jsonable(self.details),
            "irreducible_asserted": self.irreducible_asserted,
            "sub": [c.to_dict() for c in self.sub],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Certificate":
        return cls(
            framework=Framework(data["framework"]),
            property=Property(data["property"]),
            verdict=Verdict(data["verdict"]),
            v=_arr(data.get("v")),
            w=_arr(data.get("w")),
            mu_shift=data.get("mu_shift"),
            alpha=data.get("alpha"),
            setpoint_bound=data.get("setpoint_bound"),
            caveats=list(data.get("caveats", [])),
            matrices={k: _matrix(m) for k, m in data.get("matrices", {}).items()},
            counterexample=data.get("counterexample"),
            details=data.get("details", {}),
            irreducible_asserted=bool(data.get("irreducible_asserted", False)),
            sub=[cls.from_dict(c) for c in data.get("sub", [])],
        )

    def summary(self) -> str:
        parts = [f"{self.framework.value:<10} {self.property.value:<22} {self.verdict.value}"]
        if self.setpoint_bound is not None:
            parts.append(f"mu/theta > {self.setpoint_bound:.6g}")
        return "  ".join(parts)


def _jsonable(obj):
    if obj is None:
        return None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Enum):
        return obj.value
    return obj
