"""Per-iteration step-size schedules.

Every schedule exposes rates(t) -> (eta_w, eta_a), the step sizes used to
move from iterate t to iterate t + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import TeacherSpec


@dataclass(frozen=True)
class ConstantSchedule:
    eta_a: float
    eta_w: float

    def __post_init__(self) -> None:
        if self.eta_a <= 0 or self.eta_w <= 0:
            raise ValueError("step sizes must be positive")

    def rates(self, t: int) -> tuple[float, float]:
        return self.eta_w, self.eta_a

    @classmethod
    def for_k(cls, k: int) -> "ConstantSchedule":
        eta = 1.0 / k**2
        return cls(eta_a=eta, eta_w=eta)


@dataclass(frozen=True)
class WarmupSchedule:
    """Two-phase schedule with a conservative filter step during warmup."""

    eta_a_stage1: float
    eta_w_stage1: float
    stage1_iters: int
    eta_a_stage2: float
    eta_w_stage2: float

    def __post_init__(self) -> None:
        for v in (self.eta_a_stage1, self.eta_w_stage1, self.eta_a_stage2, self.eta_w_stage2):
            if v <= 0:
                raise ValueError("step sizes must be positive")
        if self.stage1_iters < 0:
            raise ValueError("stage1_iters must be >= 0")

    def rates(self, t: int) -> tuple[float, float]:
        if t < self.stage1_iters:
            return self.eta_w_stage1, self.eta_a_stage1
        return self.eta_w_stage2, self.eta_a_stage2

    @classmethod
    def for_k(cls, k: int, stage1_iters: int = 1000) -> "WarmupSchedule":
        """The convention eta_a = 1/k^2 with eta_w = eta_a^2 during warmup."""
        eta_a = 1.0 / k**2
        return cls(
            eta_a_stage1=eta_a,
            eta_w_stage1=eta_a * eta_a,
            stage1_iters=stage1_iters,
            eta_a_stage2=eta_a,
            eta_w_stage2=eta_a,
        )


@dataclass(frozen=True)
class AnalyticRateSchedule:
    """Step sizes from the convergence analysis rather than the 1/k^2 convention.

    Stage 1: eta_a = pi / (20 (k + pi - 1)^2) and eta_w = C ||a_star||^2 eta_a^2.
    Stage 2: eta_a = eta_w = min(m / (2 M^2), 5 pi^2 / (4 (k + pi - 1)^2)) with
    (m, M) the teacher's alignment bounds.
    """

    eta_a_stage1: float
    eta_w_stage1: float
    stage1_iters: int
    eta_stage2: float

    def __post_init__(self) -> None:
        if self.eta_a_stage1 <= 0 or self.eta_w_stage1 <= 0 or self.eta_stage2 <= 0:
            raise ValueError("step sizes must be positive")
        if self.stage1_iters < 0:
            raise ValueError("stage1_iters must be >= 0")

    def rates(self, t: int) -> tuple[float, float]:
        if t < self.stage1_iters:
            return self.eta_w_stage1, self.eta_a_stage1
        return self.eta_stage2, self.eta_stage2

    @classmethod
    def from_teacher(
        cls, teacher: TeacherSpec, c_w: float = 1.0, stage1_iters: int | None = None
    ) -> "AnalyticRateSchedule":
        k = teacher.k
        eta_a1 = math.pi / (20.0 * (k + math.pi - 1.0) ** 2)
        eta_w1 = c_w * teacher.a_star_norm_sq * eta_a1 * eta_a1
        m = teacher.alignment_lower
        big_m = teacher.alignment_upper
        if m <= 0:
            raise ValueError("analytic rates require a_star != 0")
        eta2 = min(m / (2.0 * big_m * big_m), 5.0 * math.pi**2 / (4.0 * (k + math.pi - 1.0) ** 2))
        if stage1_iters is None:
            # Stage 1 runs O(1/eta_a) iterations; the hidden constant defaults to 10.
            stage1_iters = math.ceil(10.0 / eta_a1)
        return cls(
            eta_a_stage1=eta_a1,
            eta_w_stage1=eta_w1,
            stage1_iters=stage1_iters,
            eta_stage2=eta2,
        )


Schedule = ConstantSchedule | WarmupSchedule | AnalyticRateSchedule
