"""Closed-form population loss, its gradients, critical points, and regions.

With z ~ N(0, I) per patch, squared-error population loss between the
teacher and the normalized student reduces to scalars of the state: the
angle phi between shortcut + w and v_star enters only through the ReLU
correlation kernel, and the output weights enter through inner products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .geometry import angle_between, relu_kernel
from .model import MANIFOLD_TOL, StudentState, TeacherSpec, check_shapes, require_manifold

TWO_PI = 2.0 * np.pi


def filter_angle(state: StudentState, teacher: TeacherSpec) -> float:
    """Angle between the student's normalized filter and v_star."""
    return angle_between(state.v, teacher.v_star)


def population_loss(state: StudentState, teacher: TeacherSpec) -> float:
    """Mean squared teacher-student gap over Gaussian inputs, in closed form."""
    check_shapes(state, teacher)
    require_manifold(state)
    g = relu_kernel(filter_angle(state, teacher))
    a, a_star = state.a, teacher.a_star
    sa = float(a.sum())
    s = teacher.sum_a_star
    adot = float(a @ a_star)
    norm_a_sq = float(a @ a)
    return 0.5 * (
        (np.pi - 1.0) / TWO_PI * teacher.a_star_norm_sq
        + (np.pi - 1.0) / TWO_PI * norm_a_sq
        - (g - 1.0) / np.pi * adot
        + s * s / TWO_PI
        + sa * sa / TWO_PI
        - s * sa / np.pi
    )


def grad_a(state: StudentState, teacher: TeacherSpec) -> np.ndarray:
    """Gradient of the population loss in the output weights.

    Equals (1/2pi) [(J + (pi-1) I) a - (J + (g(phi)-1) I) a_star] with
    J the all-ones matrix; both scalar terms multiply the identity.
    """
    check_shapes(state, teacher)
    require_manifold(state)
    g = relu_kernel(filter_angle(state, teacher))
    a, a_star = state.a, teacher.a_star
    return (
        a.sum() + (np.pi - 1.0) * a - teacher.sum_a_star - (g - 1.0) * a_star
    ) / TWO_PI


def grad_w(state: StudentState, teacher: TeacherSpec) -> np.ndarray:
    """Gradient of the population loss in the filter offset.

    Equals -(a^T a_star (pi-phi) / 2pi) (I - v v^T) v_star with
    v = shortcut + w; the output is tangent to the unit sphere at v.
    """
    check_shapes(state, teacher)
    require_manifold(state)
    v = state.v
    phi = filter_angle(state, teacher)
    adot = float(state.a @ teacher.a_star)
    projected = teacher.v_star - float(v @ teacher.v_star) * v
    return -(adot * (np.pi - phi) / TWO_PI) * projected


@dataclass(frozen=True)
class CriticalPair:
    """The two critical points of the constrained landscape.

    The global optimum is (w_star, a_star). At the spurious optimum the
    normalized filter points to -v_star and the output weights solve
    (J + (pi-1) I) a = (J - I) a_star.
    """

    global_w: np.ndarray
    global_a: np.ndarray
    spurious_w: np.ndarray
    spurious_a: np.ndarray


def spurious_output_weights(teacher: TeacherSpec) -> np.ndarray:
    """Solve (J + (pi-1) I) a = (J - I) a_star by the rank-one inverse formula."""
    a_star = teacher.a_star
    s = teacher.sum_a_star
    k = teacher.k
    return ((s - a_star) - (k - 1) * s / (np.pi - 1.0 + k)) / (np.pi - 1.0)


def critical_points(teacher: TeacherSpec) -> CriticalPair:
    return CriticalPair(
        global_w=teacher.w_star.copy(),
        global_a=teacher.a_star.copy(),
        spurious_w=-teacher.shortcut - teacher.v_star,
        spurious_a=spurious_output_weights(teacher),
    )


@dataclass(frozen=True)
class EscapeRegion:
    """States where the output-weight gradient is dissipative far from a_star.

    Membership: the output weights are weakly aligned (a^T a_star small) or
    far from a_star/2, the filter angle is at most 5pi/12, and the running
    sum satisfies the envelope -3 s^2 <= s 1^T a - s^2 <= 0 with s = 1^T a_star.
    """

    teacher: TeacherSpec


@dataclass(frozen=True)
class FilterBasinRegion:
    """States where the filter gradient makes progress toward w_star.

    Membership: a^T a_star >= min_alignment and the filter direction lies in
    the v_star half-space.
    """

    teacher: TeacherSpec
    min_alignment: float

    def __post_init__(self) -> None:
        if self.min_alignment <= 0:
            raise ValueError("min_alignment must be positive")


@dataclass(frozen=True)
class RefinementRegion:
    """Near-convergence states with bounded alignment and accurate filter.

    Membership: a^T a_star in [min_alignment, max_alignment] and
    ||w - w_star||^2 <= filter_err_bound.
    """

    teacher: TeacherSpec
    min_alignment: float
    max_alignment: float
    filter_err_bound: float

    def __post_init__(self) -> None:
        if self.min_alignment <= 0:
            raise ValueError("min_alignment must be positive")
        if self.max_alignment < self.min_alignment:
            raise ValueError("max_alignment must be >= min_alignment")
        if self.filter_err_bound <= 0:
            raise ValueError("filter_err_bound must be positive")


Region = Union[EscapeRegion, FilterBasinRegion, RefinementRegion]

# Largest filter angle admitted by the escape region.
ESCAPE_MAX_ANGLE = 5.0 * np.pi / 12.0


def region_membership(state: StudentState, region: Region, *, tol: float = MANIFOLD_TOL) -> bool:
    """Evaluate the region's defining predicates (closed inequalities, no slack)."""
    teacher = region.teacher
    check_shapes(state, teacher)
    if not state.on_manifold(tol):
        return False
    a, a_star = state.a, teacher.a_star
    adot = float(a @ a_star)
    if isinstance(region, EscapeRegion):
        s = teacher.sum_a_star
        norm_sq = teacher.a_star_norm_sq
        far = adot <= norm_sq / 20.0 or float(np.sum((a - a_star / 2.0) ** 2)) >= norm_sq
        envelope = -3.0 * s * s <= s * float(a.sum()) - s * s <= 0.0
        return far and envelope and filter_angle(state, teacher) <= ESCAPE_MAX_ANGLE
    if isinstance(region, FilterBasinRegion):
        half_space = float(state.v @ teacher.v_star) >= 0.0
        return adot >= region.min_alignment and half_space
    if isinstance(region, RefinementRegion):
        w_err = float(np.sum((state.w - teacher.w_star) ** 2))
        return (
            region.min_alignment <= adot <= region.max_alignment
            and w_err <= region.filter_err_bound
        )
    raise TypeError(f"unknown region type {type(region)!r}")
