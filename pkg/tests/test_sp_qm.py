import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentqm.engine import GroupPath, nu_x
from momentqm.siegel import form_scale
from momentqm.sp_qm import (
    CalibrationError,
    CalibrationLedger,
    SpPathSpec,
    calibrate,
    frozen_ledger,
    guichardet_wigner_restriction,
    maslov_turns,
    random_sp_path,
    rotation_loop,
    rotation_number_nu,
    sp_instance,
)
from momentqm.symplectic import j0, mat_exp, random_algebra, random_compatible


@pytest.mark.parametrize("n,m", [(1, 1), (1, -2), (2, 3), (3, 1)])
def test_maslov_of_rotation_loops(n, m):
    assert maslov_turns(rotation_loop(n, m)) == pytest.approx(2 * m * n, abs=1e-9)


def test_maslov_of_block_rotation():
    assert maslov_turns(rotation_loop(3, 2, block=1)) == pytest.approx(4, abs=1e-9)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]))
def test_rotation_number_reproduces_nu(seed, n):
    """The isotropy rotation number is an independent oracle for the surface quadrature."""
    rng = np.random.default_rng(seed)
    p = random_sp_path(rng, n, segments=3)
    x = random_compatible(rng, n, 0.5)
    space, action = sp_instance(n)
    assert nu_x(space, action, p, x).value == pytest.approx(rotation_number_nu(p, x), abs=1e-6)


def test_rotation_number_kind_scaling(rng):
    p = random_sp_path(rng, 2)
    base = rotation_number_nu(p)
    for kind in ("siegel", "bergman"):
        assert rotation_number_nu(p, kind=kind) == pytest.approx(form_scale(kind, 2) * base)


def test_guichardet_wigner_on_rotation():
    r = guichardet_wigner_restriction(rotation_loop(2, 3))
    assert r["winding"] == pytest.approx(6)
    assert r["ref_det2"] == pytest.approx(-12)
    assert r["ref_det_n1"] == pytest.approx(18)


def test_guichardet_wigner_rejects_non_unitary_and_open(rng):
    with pytest.raises(ValueError):
        guichardet_wigner_restriction(GroupPath.single(random_algebra(rng, 1) + 3 * j0(1) @ np.diag([1.0, -1.0])))
    with pytest.raises(ValueError):
        guichardet_wigner_restriction(GroupPath.single(np.pi * j0(1)))


def test_path_spec_forms_agree(rng):
    X = random_algebra(rng, 2, 0.4)
    a = SpPathSpec(2, segments=[(1.0, X)]).compile()
    b = SpPathSpec(2, generator=lambda t: X, m=4).compile()
    samples = np.stack([mat_exp(t * X) for t in np.linspace(0, 1, 9)])
    c = SpPathSpec(2, samples=samples).compile()
    space, action = sp_instance(2)
    vals = [nu_x(space, action, p, j0(2)).value for p in (a, b, c)]
    assert np.allclose(vals, vals[0], atol=1e-8)


def test_path_spec_errors(rng):
    with pytest.raises(ValueError):
        SpPathSpec(1).compile()
    with pytest.raises(ValueError):
        SpPathSpec(1, segments=[(1.0, np.eye(2))]).compile()
    with pytest.raises(ValueError):
        SpPathSpec(2, segments=[(1.0, j0(1))]).compile()
    bad = np.stack([2 * np.eye(2), np.eye(2)])
    with pytest.raises(ValueError):
        SpPathSpec(1, samples=bad).compile()


def test_calibrate_small_suite(rng, tmp_path):
    paths = [random_sp_path(rng, 1, reach=6, power=4) for _ in range(2)]
    led = calibrate(1, [rotation_loop(1, 1), rotation_loop(1, 2)], paths, k_max=4)
    assert led.kappa_trace == pytest.approx(-np.pi, rel=1e-8)
    assert led.kappa_siegel == pytest.approx(2 * led.kappa_trace)
    assert led.kappa_bergman == pytest.approx(2 * led.kappa_trace)
    assert all(r["ok_trace"] for r in led.provenance)
    led.save(tmp_path / "l.json")
    assert CalibrationLedger.load(tmp_path / "l.json") == led


def test_calibrate_needs_nontrivial_loops():
    with pytest.raises(ValueError):
        calibrate(1, [], [])
    with pytest.raises(CalibrationError):
        calibrate(1, [GroupPath.single(np.zeros((2, 2)))], [])


@pytest.mark.parametrize("n", [1, 2])
def test_frozen_ledgers(n):
    led = frozen_ledger(n)
    assert led.n == n
    assert led.kappa_trace == pytest.approx(-np.pi, rel=1e-6)
    assert led.kappa_bergman / led.kappa_trace == pytest.approx(n + 1, rel=1e-6)


def test_frozen_ledger_missing():
    with pytest.raises(FileNotFoundError):
        frozen_ledger(7)
