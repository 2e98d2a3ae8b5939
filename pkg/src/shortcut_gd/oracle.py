"""Monte-Carlo oracle for the population loss/gradients and a finite-difference check.

The estimator draws the Gaussian patches directly and averages the
per-sample integrands, giving a certificate for the closed forms that does
not share any code path with them. Sampling is split into fixed-size chunks,
each with its own counter-based stream (Philox keyed by (seed, chunk)), and
partial sums are reduced in chunk order, so results are bit-reproducible and
independent of how chunks might be scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import renormalize_shortcut
from .landscape import grad_a, grad_w, population_loss
from .model import StudentState, TeacherSpec, check_shapes, make_rng, require_manifold

CHUNK_SAMPLES = 16384


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with per-component standard error of the mean."""

    value: np.ndarray | float
    std_error: np.ndarray | float
    n_samples: int
    seed: int


@dataclass(frozen=True)
class FdReport:
    max_rel_error_a: float
    max_rel_error_w: float


def _accumulate(state: StudentState, teacher: TeacherSpec, n_samples: int, seed: int):
    """Single pass over the sample stream; returns sums and sums of squares."""
    v = state.v
    v = v / np.linalg.norm(v)
    a, a_star, v_star = state.a, teacher.a_star, teacher.v_star
    k, p = teacher.k, teacher.p

    n_chunks = (n_samples + CHUNK_SAMPLES - 1) // CHUNK_SAMPLES
    loss_parts = np.empty((n_chunks, 2))
    ga_parts = np.empty((n_chunks, 2, k))
    gw_parts = np.empty((n_chunks, 2, p))
    for c in range(n_chunks):
        m = min(CHUNK_SAMPLES, n_samples - c * CHUNK_SAMPLES)
        rng = make_rng(seed, c)
        z = rng.standard_normal((m, k, p))
        zv = z @ v
        act = np.maximum(zv, 0.0)
        g_out = np.maximum(z @ v_star, 0.0) @ a_star
        f_out = act @ a
        diff = g_out - f_out
        loss_samples = 0.5 * diff * diff
        # d/da of 0.5 (g - f)^2 = -(g - f) sigma(z^T v)
        ga_samples = -diff[:, None] * act
        # d/dw through the normalization: -(g - f) (I - v v^T) sum_j a_j 1{z_j^T v > 0} z_j
        gate = (zv > 0.0) * a
        raw = np.matmul(gate[:, None, :], z)[:, 0, :]
        raw -= (raw @ v)[:, None] * v
        gw_samples = -diff[:, None] * raw
        loss_parts[c, 0] = loss_samples.sum()
        loss_parts[c, 1] = (loss_samples * loss_samples).sum()
        ga_parts[c, 0] = ga_samples.sum(axis=0)
        ga_parts[c, 1] = (ga_samples * ga_samples).sum(axis=0)
        gw_parts[c, 0] = gw_samples.sum(axis=0)
        gw_parts[c, 1] = (gw_samples * gw_samples).sum(axis=0)
    return loss_parts.sum(axis=0), ga_parts.sum(axis=0), gw_parts.sum(axis=0)


def _finalize(sums, n: int, seed: int) -> McEstimate:
    total, total_sq = sums[0], sums[1]
    mean = total / n
    var = np.maximum(0.0, (total_sq - n * mean * mean) / (n - 1))
    se = np.sqrt(var / n)
    if np.ndim(mean) == 0:
        return McEstimate(value=float(mean), std_error=float(se), n_samples=n, seed=seed)
    return McEstimate(value=mean, std_error=se, n_samples=n, seed=seed)


def mc_estimates(
    state: StudentState, teacher: TeacherSpec, n_samples: int, seed: int
) -> tuple[McEstimate, McEstimate, McEstimate]:
    """Loss, filter-gradient, and output-gradient estimates from one stream."""
    check_shapes(state, teacher)
    require_manifold(state)
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    loss_s, ga_s, gw_s = _accumulate(state, teacher, n_samples, seed)
    return (
        _finalize(loss_s, n_samples, seed),
        _finalize(gw_s, n_samples, seed),
        _finalize(ga_s, n_samples, seed),
    )


def mc_loss(state: StudentState, teacher: TeacherSpec, n_samples: int, seed: int) -> McEstimate:
    return mc_estimates(state, teacher, n_samples, seed)[0]


def mc_grads(
    state: StudentState, teacher: TeacherSpec, n_samples: int, seed: int
) -> tuple[McEstimate, McEstimate]:
    """(filter-gradient estimate, output-gradient estimate)."""
    _, gw, ga = mc_estimates(state, teacher, n_samples, seed)
    return gw, ga


def _rel_error(approx: np.ndarray, exact: np.ndarray, floor: float = 1e-8) -> float:
    """Max relative error, falling back to absolute below the floor."""
    err = np.abs(approx - exact)
    scale = np.abs(exact)
    out = np.where(scale < floor, err, err / np.maximum(scale, floor))
    return float(out.max())


def fd_grad_check(state: StudentState, teacher: TeacherSpec, step: float = 1e-6) -> FdReport:
    """Central finite differences of the closed-form loss against both gradients.

    Output-weight coordinates are perturbed directly; filter coordinates are
    perturbed in ambient space and pulled back through the normalization map,
    which on the manifold matches the projected gradient because the loss is
    scale invariant along the filter direction.
    """
    check_shapes(state, teacher)
    require_manifold(state)
    if not 0.0 < step <= 1e-3:
        raise ValueError(f"step must lie in (0, 1e-3], got {step}")

    fd_a = np.empty(teacher.k)
    for j in range(teacher.k):
        e = np.zeros(teacher.k)
        e[j] = step
        hi = population_loss(StudentState(w=state.w, a=state.a + e), teacher)
        lo = population_loss(StudentState(w=state.w, a=state.a - e), teacher)
        fd_a[j] = (hi - lo) / (2.0 * step)

    fd_w = np.empty(teacher.p)
    for i in range(teacher.p):
        e = np.zeros(teacher.p)
        e[i] = step
        hi = population_loss(
            StudentState(w=renormalize_shortcut(state.w + e), a=state.a), teacher
        )
        lo = population_loss(
            StudentState(w=renormalize_shortcut(state.w - e), a=state.a), teacher
        )
        fd_w[i] = (hi - lo) / (2.0 * step)

    return FdReport(
        max_rel_error_a=_rel_error(fd_a, grad_a(state, teacher)),
        max_rel_error_w=_rel_error(fd_w, grad_w(state, teacher)),
    )
