"""Teacher and student parameter containers plus seeded samplers.

The teacher holds the true filter v_star (unit norm) and output weights
a_star; derived quantities used throughout (w_star, the output-alignment
bounds for the basin of attraction) are computed once at construction.
The student state is the pair (w, a) with the manifold constraint
||shortcut + w|| = 1 maintained by the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OffManifoldError
from .geometry import angle_between, shortcut_direction

# Tolerance for the unit-norm manifold constraint on shortcut + w.
MANIFOLD_TOL = 1e-9
# Tolerance for validating ||v_star|| = 1.
VSTAR_NORM_TOL = 1e-12


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by (seed, stream).

    Distinct (seed, stream) pairs give statistically independent streams, so
    per-sample or per-trial streams can be split deterministically no matter
    how work is scheduled.
    """
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class TeacherSpec:
    """True parameters (v_star, a_star) and derived constants.

    Derived fields:
      w_star            v_star - shortcut, the true filter offset
      sum_a_star        1^T a_star
      a_star_norm_sq    ||a_star||^2
      alignment_lower   ||a_star||^2 / 5, lower alignment bound in the basin
      alignment_upper   3 ||a_star||^2 + 2 (1^T a_star)^2, upper bound
      strict_prior      True when ||w_star|| <= 1 (the strong closeness prior)
    """

    p: int
    k: int
    v_star: np.ndarray
    a_star: np.ndarray
    w_star: np.ndarray = field(init=False, repr=False)
    sum_a_star: float = field(init=False)
    a_star_norm_sq: float = field(init=False)
    alignment_lower: float = field(init=False)
    alignment_upper: float = field(init=False)
    strict_prior: bool = field(init=False)

    def __post_init__(self) -> None:
        if self.p < 1 or self.k < 1:
            raise ValueError("p and k must be positive integers")
        v_star = np.array(self.v_star, dtype=float)
        a_star = np.array(self.a_star, dtype=float)
        if v_star.shape != (self.p,):
            raise ValueError(f"v_star must have shape ({self.p},), got {v_star.shape}")
        if a_star.shape != (self.k,):
            raise ValueError(f"a_star must have shape ({self.k},), got {a_star.shape}")
        if abs(np.linalg.norm(v_star) - 1.0) > VSTAR_NORM_TOL:
            raise ValueError(f"v_star must be unit norm, got {np.linalg.norm(v_star)}")
        w_star = v_star - shortcut_direction(self.p)
        # ||w_star|| < sqrt(2) is equivalent to shortcut^T v_star > 0: the true
        # filter must not be orthogonal to (or behind) the shortcut direction.
        if float(shortcut_direction(self.p) @ v_star) <= 0.0:
            raise ValueError("v_star must have positive overlap with the shortcut direction")
        v_star.setflags(write=False)
        a_star.setflags(write=False)
        w_star.setflags(write=False)
        s = float(a_star.sum())
        norm_sq = float(a_star @ a_star)
        object.__setattr__(self, "v_star", v_star)
        object.__setattr__(self, "a_star", a_star)
        object.__setattr__(self, "w_star", w_star)
        object.__setattr__(self, "sum_a_star", s)
        object.__setattr__(self, "a_star_norm_sq", norm_sq)
        object.__setattr__(self, "alignment_lower", norm_sq / 5.0)
        object.__setattr__(self, "alignment_upper", 3.0 * norm_sq + 2.0 * s * s)
        object.__setattr__(self, "strict_prior", bool(np.linalg.norm(w_star) <= 1.0))

    @property
    def shortcut(self) -> np.ndarray:
        return shortcut_direction(self.p)

    def shortcut_angle(self) -> float:
        """Angle between the shortcut direction and v_star."""
        return angle_between(self.shortcut, self.v_star)


@dataclass(frozen=True)
class StudentState:
    """Current iterate (w, a); shortcut + w is kept unit norm by the optimizer."""

    w: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=float)
        a = np.array(self.a, dtype=float)
        if w.ndim != 1 or a.ndim != 1:
            raise ValueError("w and a must be 1-d vectors")
        w.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", a)

    @property
    def p(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.a.shape[0]

    @property
    def v(self) -> np.ndarray:
        """The normalized filter direction shortcut + w."""
        return shortcut_direction(self.p) + self.w

    def manifold_error(self) -> float:
        return abs(float(np.linalg.norm(self.v)) - 1.0)

    def on_manifold(self, tol: float = MANIFOLD_TOL) -> bool:
        return self.manifold_error() <= tol


def require_manifold(state: StudentState, tol: float = MANIFOLD_TOL) -> None:
    err = state.manifold_error()
    if err > tol:
        raise OffManifoldError(f"||shortcut + w|| deviates from 1 by {err:.3e} (tol {tol:.1e})")


def check_shapes(state: StudentState, teacher: TeacherSpec) -> None:
    if state.p != teacher.p or state.k != teacher.k:
        raise ValueError(
            f"state dims (p={state.p}, k={state.k}) do not match "
            f"teacher (p={teacher.p}, k={teacher.k})"
        )


def random_teacher(
    k: int,
    p: int,
    seed: int,
    *,
    a_norm: float = 1.0,
    max_angle: float = np.pi / 3,
) -> TeacherSpec:
    """Random teacher with the filter prior satisfied.

    v_star is drawn at an angle uniform in [0, max_angle] from the shortcut
    direction (max_angle <= pi/3 keeps ||w_star|| <= 1); a_star is a uniform
    direction scaled to a_norm.
    """
    rng = make_rng(seed, 101)
    sc = shortcut_direction(p)
    theta = rng.uniform(0.0, max_angle)
    if p == 1:
        v_star = sc.copy()
    else:
        z = rng.standard_normal(p)
        z -= (z @ sc) * sc
        nz = np.linalg.norm(z)
        if nz == 0.0:
            z = np.zeros(p)
            z[0] = 1.0
            z -= (z @ sc) * sc
            nz = np.linalg.norm(z)
        u = z / nz
        v_star = np.cos(theta) * sc + np.sin(theta) * u
    za = rng.standard_normal(k)
    a_star = a_norm * za / np.linalg.norm(za)
    return TeacherSpec(p=p, k=k, v_star=v_star, a_star=a_star)


def random_state(teacher: TeacherSpec, seed: int, *, a_scale: float | None = None) -> StudentState:
    """Random manifold state: uniform filter direction, Gaussian output weights."""
    rng = make_rng(seed, 102)
    z = rng.standard_normal(teacher.p)
    v = z / np.linalg.norm(z)
    if a_scale is None:
        a_scale = max(1.0, np.sqrt(teacher.a_star_norm_sq)) / np.sqrt(teacher.k)
    a = a_scale * rng.standard_normal(teacher.k)
    return StudentState(w=v - teacher.shortcut, a=a)
