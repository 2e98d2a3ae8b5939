import numpy as np
import pytest

from shortcut_gd.errors import OffManifoldError
from shortcut_gd.geometry import shortcut_direction
from shortcut_gd.landscape import (
    ESCAPE_MAX_ANGLE,
    CriticalPair,
    EscapeRegion,
    FilterBasinRegion,
    RefinementRegion,
    critical_points,
    filter_angle,
    grad_a,
    grad_w,
    population_loss,
    region_membership,
    spurious_output_weights,
)
from shortcut_gd.model import StudentState, TeacherSpec, random_state, random_teacher


def _teacher(p, k, v_star, a_star):
    return TeacherSpec(p=p, k=k, v_star=np.asarray(v_star, float), a_star=np.asarray(a_star, float))


def _global_state(teacher):
    return StudentState(w=teacher.w_star, a=teacher.a_star)


def _spurious_state(teacher):
    cp = critical_points(teacher)
    return StudentState(w=cp.spurious_w, a=cp.spurious_a)


def test_loss_zero_at_global_optimum():
    for seed in range(5):
        t = random_teacher(4, 3, seed, a_norm=1.7)
        assert population_loss(_global_state(t), t) == pytest.approx(0.0, abs=1e-12)


def test_loss_halved_second_moment_case():
    # teacher (1, 0) with silent student: loss is half the second moment of one
    # rectified unit, i.e. 1/4
    t = _teacher(2, 2, [1.0, 0.0], [1.0, 0.0])
    state = StudentState(w=t.w_star, a=np.zeros(2))
    assert population_loss(state, t) == pytest.approx(0.25, abs=1e-12)


def test_loss_at_spurious_point_closed_value():
    # independent evaluation for k=2, a_star=(1,1): at the spurious point the
    # angle is pi (kernel 0) and a = ones/(pi+1); expanding the quadratic form
    # by hand gives the frozen value below
    t = _teacher(2, 2, [1.0, 0.0], [1.0, 1.0])
    c = 1.0 / (np.pi + 1.0)
    expected = 0.5 * (
        (np.pi - 1) / (2 * np.pi) * 2.0
        + (np.pi - 1) / (2 * np.pi) * 2.0 * c * c
        + (1.0 / np.pi) * 2.0 * c
        + 4.0 / (2 * np.pi)
        + (2.0 * c) ** 2 / (2 * np.pi)
        - (1.0 / np.pi) * 2.0 * 2.0 * c
    )
    assert expected == pytest.approx(0.6207, abs=5e-4)
    assert population_loss(_spurious_state(t), t) == pytest.approx(expected, abs=1e-12)


def test_loss_rejects_off_manifold():
    t = _teacher(2, 2, [1.0, 0.0], [1.0, 0.0])
    with pytest.raises(OffManifoldError):
        population_loss(StudentState(w=np.ones(2), a=np.zeros(2)), t)


def test_loss_nonnegative_at_random_states():
    for seed in range(40):
        t = random_teacher(5, 4, seed % 7, a_norm=0.5 + (seed % 4))
        state = random_state(t, seed)
        assert population_loss(state, t) >= -1e-12


def test_grad_a_examples():
    t = _teacher(2, 2, [1.0, 0.0], [1.0, 0.0])
    assert np.allclose(grad_a(_global_state(t), t), 0.0, atol=1e-12)
    state = StudentState(w=t.w_star, a=np.zeros(2))
    expected = np.array([-0.5, -1.0 / (2.0 * np.pi)])
    assert np.allclose(grad_a(state, t), expected, atol=1e-12)


def test_grad_a_zero_at_spurious_point():
    for seed in range(5):
        t = random_teacher(6, 3, seed, a_norm=2.0)
        assert np.linalg.norm(grad_a(_spurious_state(t), t)) <= 1e-10


def test_grad_w_examples():
    t = _teacher(2, 2, [1.0, 0.0], [1.0, 1.0])
    # angle zero: projection annihilates v_star
    assert np.allclose(grad_w(_global_state(t), t), 0.0, atol=1e-12)
    # zero alignment: scalar prefactor vanishes
    state = StudentState(w=np.zeros(2), a=np.array([1.0, -1.0]))
    assert np.allclose(grad_w(state, t), 0.0, atol=1e-15)
    # v orthogonal to v_star with unit alignment: -(pi - pi/2)/2pi * v_star = -v_star/4
    t2 = _teacher(2, 2, [1.0, 0.0], [1.0, 0.0])
    v = np.array([0.0, 1.0])
    state2 = StudentState(w=v - shortcut_direction(2), a=np.array([1.0, 0.0]))
    assert np.allclose(grad_w(state2, t2), -t2.v_star / 4.0, atol=1e-12)


def test_grad_w_tangent_to_manifold():
    for seed in range(30):
        t = random_teacher(4, 5, seed % 6, a_norm=1.5)
        state = random_state(t, seed + 50)
        g = grad_w(state, t)
        assert abs(float(g @ state.v)) <= 1e-10


def test_spurious_weights_closed_form():
    t = _teacher(2, 2, [1.0, 0.0], [1.0, 1.0])
    expected = np.full(2, 1.0 / (np.pi + 1.0))
    assert np.allclose(spurious_output_weights(t), expected, atol=1e-12)

    t0 = _teacher(2, 3, [1.0, 0.0], [0.0, 0.0, 0.0])
    assert np.allclose(spurious_output_weights(t0), 0.0, atol=0)


def test_spurious_weights_defining_residual():
    for seed in range(8):
        k = 2 + seed
        t = random_teacher(k, 4, seed, a_norm=1.0 + seed / 3)
        a_bar = spurious_output_weights(t)
        lhs = np.full((k, k), 1.0) + (np.pi - 1.0) * np.eye(k)
        rhs = np.full((k, k), 1.0) - np.eye(k)
        assert np.linalg.norm(lhs @ a_bar - rhs @ t.a_star) <= 1e-10
        # cross-check against a dense solve
        assert np.allclose(a_bar, np.linalg.solve(lhs, rhs @ t.a_star), atol=1e-12)


def test_critical_pair_geometry():
    for seed in range(5):
        t = random_teacher(3, 5, seed)
        cp = critical_points(t)
        assert isinstance(cp, CriticalPair)
        v_bar = t.shortcut + cp.spurious_w
        assert np.linalg.norm(v_bar) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(v_bar, -t.v_star, atol=1e-12)


def test_gradients_vanish_at_both_critical_points():
    for seed in range(5):
        t = random_teacher(4, 4, seed, a_norm=2.0)
        for state in (_global_state(t), _spurious_state(t)):
            assert np.linalg.norm(grad_a(state, t)) <= 1e-10
            assert np.linalg.norm(grad_w(state, t)) <= 1e-10


def test_loss_gap_spurious_vs_global():
    for seed in range(6):
        t = random_teacher(5, 3, seed, a_norm=0.7 + seed / 2)
        assert population_loss(_spurious_state(t), t) > 1e-9
        assert population_loss(_global_state(t), t) == pytest.approx(0.0, abs=1e-12)


def test_region_membership_escape_example():
    t = _teacher(4, 2, [1.0, 0.0, 0.0, 0.0], [1.0, 1.0])
    state = StudentState(w=np.zeros(4), a=np.zeros(2))
    # shortcut overlap 0.5 puts the angle at pi/3 <= 5pi/12
    assert filter_angle(state, t) == pytest.approx(np.pi / 3, abs=1e-12)
    assert region_membership(state, EscapeRegion(teacher=t))


def test_region_membership_filter_basin_and_refinement():
    t = _teacher(4, 2, [1.0, 0.0, 0.0, 0.0], [1.0, 1.0])
    at_truth = _global_state(t)
    assert region_membership(at_truth, FilterBasinRegion(teacher=t, min_alignment=0.2))
    region = RefinementRegion(teacher=t, min_alignment=0.2, max_alignment=t.alignment_upper,
                              filter_err_bound=0.01)
    assert region_membership(at_truth, region)
    # filter error 0.02 > bound 0.01
    u = np.array([0.0, 1.0, 0.0, 0.0])
    phi = np.arccos(1.0 - 0.01)  # ||v - v_star||^2 = 0.02
    v = np.cos(phi) * t.v_star + np.sin(phi) * u
    off = StudentState(w=v - t.shortcut, a=t.a_star)
    assert not region_membership(off, region)


def test_region_membership_respects_angle_cap():
    t = _teacher(2, 2, [1.0, 0.0], [1.0, 1.0])
    v = np.array([np.cos(ESCAPE_MAX_ANGLE + 0.05), np.sin(ESCAPE_MAX_ANGLE + 0.05)])
    state = StudentState(w=v - t.shortcut, a=np.zeros(2))
    assert not region_membership(state, EscapeRegion(teacher=t))
