import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochframes.degrees import (UnitaryField, eta4d, lattice_three_degree, lift_argument, one_degree,
                                 su2_coords, su2_degree, su2_from_coords, three_degree, winding_number)
from blochframes.errors import GridTooCoarse, NonzeroWinding, RefineGrid
from blochframes.kgrid import KGrid


def dirac3_field(grid, mass):
    """Normalized (mass + sum cos k, sin k1, sin k2, sin k3) on the 3-sphere, read as SU(2)."""
    k = grid.kpoints()
    v = np.stack([mass + np.cos(k).sum(-1), np.sin(k[..., 0]), np.sin(k[..., 1]), np.sin(k[..., 2])], -1)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return su2_from_coords(*np.moveaxis(v, -1, 0))


def preimage_degree_3d(mass):
    """Independent oracle: signed preimages of +e0, Jacobian diag(cos k_j) at the zeros of sin."""
    deg = 0
    for ks in itertools.product((0.0, np.pi), repeat=3):
        if mass + np.sum(np.cos(ks)) > 0:
            deg += int(np.prod(np.sign(np.cos(ks))))
    return deg


@pytest.mark.parametrize("n", [5, 8, 64])
def test_winding_of_unit_loop_is_exactly_one(n):
    k = 2 * np.pi * np.arange(n) / n
    assert winding_number(np.exp(1j * k)) == 1
    assert winding_number(np.exp(-1j * k)) == -1


def test_winding_aliasing_guard():
    k = 2 * np.pi * np.arange(8) / 8
    assert winding_number(np.exp(-1j * k)) == -1
    with pytest.raises(RefineGrid):
        winding_number(np.exp(3j * k))


def test_one_degree_reads_determinant():
    g = KGrid(2, 16)
    k = g.kpoints()
    vals = np.zeros(g.shape + (2, 2), dtype=complex)
    vals[..., 0, 0] = np.exp(2j * k[..., 1])
    vals[..., 1, 1] = np.exp(-1j * k[..., 0])
    U = UnitaryField(g, vals)
    assert one_degree(U, 0) == -1
    assert one_degree(U, 1) == 2


def test_lift_argument_recovers_smooth_phase():
    g = KGrid(2, 32)
    k = g.kpoints()
    theta = 0.3 * np.sin(k[..., 0]) * np.cos(k[..., 1]) + 0.1 * np.cos(2 * k[..., 1])
    lifted = lift_argument(np.exp(2j * np.pi * theta))
    assert np.allclose(lifted, theta - theta[0, 0], atol=1e-12)


def test_lift_argument_refuses_winding():
    g = KGrid(2, 16)
    with pytest.raises(NonzeroWinding) as info:
        lift_argument(np.exp(1j * g.kpoints()[..., 1]))
    assert info.value.axis == 2


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_su2_coordinates_roundtrip(v):
    x = np.asarray(v) / np.linalg.norm(v)
    U = su2_from_coords(*x)
    assert np.allclose(U.conj().T @ U, np.eye(2))
    assert np.linalg.det(U) == pytest.approx(1.0)
    assert np.allclose(su2_coords(U), x)


@pytest.mark.parametrize("mass", [-2.0, -0.5, 2.0, 4.0])
def test_three_degree_against_preimage_oracle(mass):
    g = KGrid(3, 24)
    field = UnitaryField(g, dirac3_field(g, mass))
    expected = preimage_degree_3d(mass)
    raw, val = three_degree(field)
    assert val == expected
    assert lattice_three_degree(field, strict=False) == expected


@pytest.mark.parametrize("degree", [-2, -1, 0, 1, 2])
def test_eta4d_lattice_degree(degree):
    g = KGrid(3, 16)
    field = UnitaryField(g, eta4d(g, degree))
    assert field.unitarity_residual() < 1e-12
    assert lattice_three_degree(field, strict=False) == degree
    deg, info = su2_degree(field)
    assert deg == degree and info["lattice"] == degree


def test_eta4d_is_identity_on_the_cell_boundary():
    g = KGrid(3, 12)
    vals = eta4d(g, 1)
    assert np.allclose(vals[0], np.eye(2)) and np.allclose(vals[:, 0], np.eye(2))


def test_three_degree_unit_value():
    # [PAPER] normalization: eta4d(1) has 3-degree one
    raw, val = three_degree(UnitaryField(KGrid(3, 24), eta4d(KGrid(3, 24), 1)))
    assert val == 1
    assert abs(raw - 1) < 0.02


def test_three_degree_is_cell_independent_for_periodic_fields():
    g = KGrid(3, 16)
    field = UnitaryField(g, dirac3_field(g, 2.0))
    r0, _ = three_degree(field)
    r1, _ = three_degree(field, offset=(5, 3, 11))
    assert r0 == pytest.approx(r1, abs=1e-12)


def test_conjugate_field_flips_degree():
    g = KGrid(3, 16)
    field = UnitaryField(g, eta4d(g, 1))
    inv = UnitaryField(g, np.conj(np.swapaxes(field.values, -1, -2)))
    assert lattice_three_degree(inv, strict=False) == -1


def test_disagreeing_counts_raise():
    g = KGrid(3, 3)
    rng = np.random.default_rng(5)
    x = rng.standard_normal(g.shape + (4,))
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    field = UnitaryField(g, su2_from_coords(*np.moveaxis(x, -1, 0)))
    with pytest.raises(GridTooCoarse):
        lattice_three_degree(field, strict=True)


def test_field_validation():
    g = KGrid(2, 4)
    with pytest.raises(ValueError):
        UnitaryField(g, np.zeros((4, 5, 2, 2)))
    with pytest.raises(ValueError):
        UnitaryField(g, np.zeros((4, 4, 2, 2)), laws=[None])
