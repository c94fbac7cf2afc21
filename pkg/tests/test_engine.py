import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentqm.engine import (
    GroupPath,
    QmReport,
    Segment,
    conjugation_transport,
    defect,
    homogenize,
    nu_x,
    power_schedule,
)
from momentqm.quadrature import QuadParams
from momentqm.sp_qm import random_sp_path, rotation_loop, sp_instance
from momentqm.symplectic import j0, random_compatible, random_symplectic

segments = st.lists(
    st.tuples(st.floats(0.01, 2.0), st.floats(-5, 5)).map(lambda p: Segment(*p)), max_size=5
).map(GroupPath)


@given(segments, segments, segments)
def test_product_is_associative(a, b, c):
    assert ((a * b) * c).segments == (a * (b * c)).segments


@given(segments)
def test_inverse_reverses_and_negates(p):
    q = ~p
    assert q.duration == pytest.approx(p.duration)
    assert [s.generator for s in q.segments] == [-s.generator for s in reversed(p.segments)]
    assert (~q).segments == p.segments


@given(segments, st.integers(0, 4))
def test_power_preserves_total_duration(p, k):
    assert (p**k).duration == pytest.approx(k * p.duration)


def test_power_fuses_repeated_single_segment():
    p = GroupPath.single(np.eye(2), 0.5)
    assert len(p**8) == 1
    assert (p**8).duration == pytest.approx(4.0)


def test_locate_finds_segments():
    p = GroupPath([Segment(1.0, 1.0), Segment(2.0, 2.0)])
    idx, off = p.locate(np.array([0.0, 0.5, 1.0, 2.9]))
    assert idx.tolist() == [0, 0, 1, 1]
    assert np.allclose(off, [0.0, 0.5, 0.0, 1.9])


def test_segment_rejects_nonpositive_duration():
    with pytest.raises(ValueError):
        Segment(0.0, 1.0)


def test_power_schedule():
    assert power_schedule(16) == [1, 2, 4, 8, 16]
    assert power_schedule(12) == [1, 2, 4, 8, 12]
    with pytest.raises(ValueError):
        power_schedule(1)


def test_report_enforces_decomposition():
    q = QmReport(1.0, 3.0, 2.0, QuadParams())
    assert q.as_row()["value"] == 1.0
    with pytest.raises(ValueError):
        QmReport(1.5, 3.0, 2.0, QuadParams())


def test_constant_path_gives_zero():
    space, action = sp_instance(1)
    assert nu_x(space, action, GroupPath.constant(), j0(1)).value == 0.0


@pytest.mark.parametrize("n", [1, 2])
def test_rotation_loop_at_j0(n):
    space, action = sp_instance(n)
    r = nu_x(space, action, rotation_loop(n, 1), j0(n))
    assert r.disk_term == pytest.approx(0.0, abs=1e-12)
    assert r.value == pytest.approx(-2 * np.pi * n, rel=1e-10)
    assert r.extra["time_nodes"] > 0


def test_inverse_path_cancels(rng):
    space, action = sp_instance(2)
    p = random_sp_path(rng, 2, segments=3)
    x = random_compatible(rng, 2, 0.5)
    total = nu_x(space, action, p, x).value + nu_x(space, action, ~p, x).value
    assert abs(total) < 1e-6


def test_defect_equals_triangle_area(rng):
    space, action = sp_instance(1)
    p, q = random_sp_path(rng, 1), random_sp_path(rng, 1)
    d, tri = defect(space, action, p, q, j0(1))
    assert d == pytest.approx(tri, abs=1e-6)
    # the trace-form triangle bound for n = 1 is pi / 2
    assert abs(d) <= np.pi / 2


def test_conjugation_transport(rng):
    space, action = sp_instance(2)
    p = random_sp_path(rng, 2)
    h = random_symplectic(rng, 2, 0.3)
    lhs, rhs = conjugation_transport(space, action, p, h, j0(2))
    assert lhs == pytest.approx(rhs, abs=1e-6)


def test_homogenize_rotation_is_exact():
    space, action = sp_instance(1)
    res = homogenize(space, action, rotation_loop(1, 1), j0(1), 8)
    est, hw = res
    assert est == pytest.approx(-2 * np.pi, rel=1e-10)
    assert res.ks == (1, 2, 4, 8)
    assert hw == pytest.approx(res.defect_bound / 8)


def test_homogenize_threads_agree(rng):
    space, action = sp_instance(1)
    p = random_sp_path(rng, 1)
    a = homogenize(space, action, p, j0(1), 4)
    b = homogenize(space, action, p, j0(1), 4, threads=3)
    assert a.values == b.values
