"""
Result records shared by every pipeline, flattened to CSV rows on output.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

from utils.io import to_json


def bound_margin(bound: float, measured: float) -> float:
    """bound / measured; infinite when nothing was measured."""
    if measured <= 0:
        return math.inf
    return float(bound) / float(measured)


@dataclass
class BoundCheck:
    """One lemma bound measured against its guarantee."""

    lemma: str
    epsilon: float
    bound: float
    measured: float
    params: Dict[str, object] = field(default_factory=dict)
    model: str = ""

    @property
    def margin(self) -> float:
        return bound_margin(self.bound, self.measured)

    @property
    def holds(self) -> bool:
        return self.measured <= self.bound

    def to_row(self) -> dict:
        return {
            "lemma": self.lemma,
            "epsilon": self.epsilon,
            "bound": self.bound,
            "measured": self.measured,
            "margin": self.margin,
            "params_json": to_json(self.params),
        }


@dataclass
class RunResult:
    """
    Outcome of one CD, AQC or qDRIFT run.

    Attributes
    ----------
    sqrt_infidelity : float
        Distance of the prepared state from the target eigenstate. CD and
        AQC produce a pure state and report √(1 - |<ψ|n(λ_f)>|²). qDRIFT
        produces the trajectory-averaged mixed state ρ and reports the trace
        distance ½‖ρ - |n><n|‖₁, which reduces to the same quantity when ρ
        is pure (a single trajectory, or the constant-H case).
    margins : dict
        bound / measured per checked bound; ≥ 1 when the bound holds.
    """

    pipeline: str
    model: str
    level: int
    epsilon: float
    sqrt_infidelity: float = math.nan
    gate_count: int = 0
    params: Dict[str, object] = field(default_factory=dict)
    margins: Dict[str, float] = field(default_factory=dict)
    flags: Dict[str, bool] = field(default_factory=dict)
    overrides: Dict[str, object] = field(default_factory=dict)
    q: Optional[int] = None
    k: Optional[int] = None
    seed: Optional[int] = None
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_row(self) -> dict:
        row = {
            "pipeline": self.pipeline,
            "model": self.model,
            "level": self.level,
            "epsilon": self.epsilon,
            "q": self.q,
            "k": self.k,
            "seed": self.seed,
            "sqrt_infidelity": self.sqrt_infidelity,
            "gate_count": self.gate_count,
        }
        for key, value in self.params.items():
            row[key] = value
        for key, value in self.margins.items():
            row[f"margin_{key}"] = value
        for key, value in self.flags.items():
            row[f"flag_{key}"] = value
        row["overrides_json"] = to_json(self.overrides)
        row["error"] = self.error or ""
        row["wall_time"] = self.wall_time
        return row

    def record(self) -> dict:
        """Full nested record for the manifest."""
        return {
            "pipeline": self.pipeline,
            "model": self.model,
            "level": self.level,
            "epsilon": self.epsilon,
            "q": self.q,
            "k": self.k,
            "seed": self.seed,
            "sqrt_infidelity": self.sqrt_infidelity,
            "gate_count": self.gate_count,
            "params": self.params,
            "margins": self.margins,
            "flags": self.flags,
            "overrides": self.overrides,
            "error": self.error,
        }
