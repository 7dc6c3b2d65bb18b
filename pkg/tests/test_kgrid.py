import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochframes.kgrid import FormField, KGrid, centered_diff, shuffle_sign


def test_grid_basics():
    g = KGrid(2, 8)
    assert g.shape == (8, 8)
    assert g.size == 64
    assert np.isclose(g.h, np.pi / 4)
    kp = g.kpoints()
    assert kp.shape == (8, 8, 2)
    assert np.allclose(kp[3, 5], [3 * g.h, 5 * g.h])
    assert g.index_of([2 * np.pi + g.h, -g.h]) == (1, 7)


@pytest.mark.parametrize("dim,n", [(0, 4), (5, 4), (2, 1)])
def test_grid_rejects_bad_shapes(dim, n):
    with pytest.raises(ValueError):
        KGrid(dim, n)


def test_negated_index_map_is_exact():
    g = KGrid(3, 7)
    neg = np.ix_(*g.negated_index_map())
    k = g.kpoints()
    assert np.allclose(np.mod(k[neg] + k, 2 * np.pi), 0)


@pytest.mark.parametrize("order,expected_rate", [(2, 2), (4, 4)])
def test_centered_diff_convergence(order, expected_rate):
    errs = []
    for n in (16, 32):
        g = KGrid(1, n)
        f = np.exp(np.sin(g.axis_values))
        exact = np.cos(g.axis_values) * f
        errs.append(np.max(np.abs(centered_diff(f, 0, g.h, order) - exact)))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(expected_rate, abs=0.3)


@given(st.lists(st.integers(0, 5), min_size=0, max_size=5))
def test_shuffle_sign_matches_permutation_parity(idx):
    s = shuffle_sign(idx)
    if len(set(idx)) < len(idx):
        assert s == 0
        return
    parity = round(np.linalg.det(np.eye(len(idx))[np.argsort(idx)])) if idx else 1
    assert s == parity


def _scalar_form(grid, degree, rng):
    comps = {I: rng.standard_normal(grid.shape) for I in itertools.combinations(range(grid.dim), degree)}
    return FormField(grid, degree, comps)


def test_d_squared_vanishes(rng):
    g = KGrid(4, 6)
    for p in range(3):
        w = _scalar_form(g, p, rng)
        assert w.d().d().max_abs() < 1e-10


def test_leibniz_rule_on_trig_functions():
    # d(f g) = df g + f dg holds up to O(h^2) for smooth f, g
    errs = []
    for n in (16, 32):
        g = KGrid(2, n)
        k = g.kpoints()
        f = FormField.scalar0(g, np.sin(k[..., 0]) * np.cos(2 * k[..., 1]))
        w = FormField(g, 1, {(0,): np.cos(k[..., 1]), (1,): np.sin(k[..., 0] + k[..., 1])})
        lhs = (f ^ w).d()
        rhs = (f.d() ^ w) + (f ^ w.d())
        errs.append((lhs - rhs).max_abs())
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.15)


def test_wedge_graded_commutativity_scalar(rng):
    g = KGrid(4, 3)
    a, b = _scalar_form(g, 1, rng), _scalar_form(g, 2, rng)
    assert ((a ^ b) - (b ^ a)).max_abs() < 1e-14
    c = _scalar_form(g, 1, rng)
    assert ((a ^ c) + (c ^ a)).max_abs() < 1e-14


def test_wedge_degree_overflow():
    g = KGrid(2, 4)
    with pytest.raises(ValueError):
        FormField.dk(g, 0) ^ FormField.dk(g, 1) ^ FormField.dk(g, 0)


def test_integrate_volume_form():
    g = KGrid(3, 5)
    vol = FormField.dk(g, 0) ^ FormField.dk(g, 1) ^ FormField.dk(g, 2)
    assert vol.integrate((0, 1, 2)) == pytest.approx((2 * np.pi) ** 3)
    area = FormField.dk(g, 2) ^ FormField.dk(g, 0)
    assert area.integrate((0, 2)) == pytest.approx(-(2 * np.pi) ** 2)


def test_invalid_index_set_rejected():
    with pytest.raises(ValueError):
        FormField(KGrid(2, 4), 2, {(1, 0): 1.0})


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_matrix_trace_of_commutator_vanishes(dim, seed):
    rng = np.random.default_rng(seed)
    g = KGrid(dim, 3)
    a = FormField(g, 0, {(): rng.standard_normal(g.shape + (3, 3))})
    b = FormField(g, 0, {(): rng.standard_normal(g.shape + (3, 3))})
    assert ((a ^ b) - (b ^ a)).trace().max_abs() < 1e-12


def test_csv_dump(tmp_path):
    g = KGrid(2, 3)
    w = FormField(g, 1, {(1,): np.arange(9.0).reshape(3, 3)})
    path = tmp_path / "w.csv"
    w.to_csv(path, (1,))
    rows = path.read_text().splitlines()
    assert rows[0] == "k1,k2,re,im"
    assert len(rows) == 10
    assert rows[2].split(",")[2] == "1"
