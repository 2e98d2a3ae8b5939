import numpy as np
import pytest

from shortcut_gd.errors import OffManifoldError
from shortcut_gd.geometry import shortcut_direction
from shortcut_gd.model import (
    StudentState,
    TeacherSpec,
    make_rng,
    random_state,
    random_teacher,
    require_manifold,
)


def _teacher(k=2, p=2, a=(1.0, 1.0)):
    return TeacherSpec(p=p, k=k, v_star=np.array([1.0] + [0.0] * (p - 1)), a_star=np.array(a))


def test_teacher_derived_quantities():
    t = _teacher(a=(1.0, 1.0))
    assert t.sum_a_star == 2.0
    assert t.a_star_norm_sq == 2.0
    assert t.alignment_lower == pytest.approx(2.0 / 5.0, abs=1e-15)
    assert t.alignment_upper == pytest.approx(3.0 * 2.0 + 2.0 * 4.0, abs=1e-15)
    assert np.allclose(t.w_star, t.v_star - shortcut_direction(2), atol=0)


def test_teacher_validation():
    with pytest.raises(ValueError):
        TeacherSpec(p=2, k=1, v_star=np.array([2.0, 0.0]), a_star=np.array([1.0]))
    # orthogonal to the shortcut direction: prior violated
    with pytest.raises(ValueError):
        TeacherSpec(p=2, k=1, v_star=np.array([1.0, -1.0]) / np.sqrt(2), a_star=np.array([1.0]))
    with pytest.raises(ValueError):
        TeacherSpec(p=2, k=2, v_star=np.array([1.0, 0.0]), a_star=np.array([1.0]))


def test_strict_prior_flag():
    # ||w_star|| = sqrt(2 - 2 cos(angle)); angle pi/3 sits exactly at the strict cutoff
    p = 4
    sc = shortcut_direction(p)
    u = np.array([1.0, -1.0, 0.0, 0.0]) / np.sqrt(2)
    near = TeacherSpec(p=p, k=1, v_star=np.cos(0.2) * sc + np.sin(0.2) * u, a_star=np.array([1.0]))
    far = TeacherSpec(p=p, k=1, v_star=np.cos(1.3) * sc + np.sin(1.3) * u, a_star=np.array([1.0]))
    assert near.strict_prior
    assert not far.strict_prior


def test_teacher_arrays_read_only():
    t = _teacher()
    with pytest.raises(ValueError):
        t.v_star[0] = 2.0


def test_student_state_manifold():
    st = StudentState(w=np.zeros(4), a=np.zeros(3))
    assert st.on_manifold()
    require_manifold(st)
    bad = StudentState(w=np.full(4, 0.3), a=np.zeros(3))
    assert not bad.on_manifold()
    with pytest.raises(OffManifoldError):
        require_manifold(bad)


def test_make_rng_streams():
    a = make_rng(7, 0).standard_normal(4)
    b = make_rng(7, 0).standard_normal(4)
    c = make_rng(7, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_random_teacher_properties():
    for seed in range(20):
        t = random_teacher(5, 4, seed)
        assert np.linalg.norm(t.v_star) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(t.a_star) == pytest.approx(1.0, abs=1e-12)
        assert t.strict_prior
    t2 = random_teacher(3, 2, 0, a_norm=2.5)
    assert np.linalg.norm(t2.a_star) == pytest.approx(2.5, abs=1e-12)


def test_random_state_on_manifold():
    t = random_teacher(5, 4, 0)
    for seed in range(10):
        st = random_state(t, seed)
        assert st.on_manifold(1e-12)
        assert st.p == 4 and st.k == 5
