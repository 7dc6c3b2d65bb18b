import itertools
import json

import numpy as np
import pytest

from blochframes.errors import GapClosed, ValidationError
from blochframes.kgrid import KGrid
from blochframes.models import (DIRAC4D_PINNED_MASS, DIRAC4D_TRIVIAL_MASS, GAMMA, BUILTINS, ModelSpec,
                                build_projector_field, builtin, dirac4d, eval_hamiltonian, load_model,
                                model_from_dict, qwz, spectral_projector)

TRIM = np.array(list(itertools.product((0.0, np.pi), repeat=4)))


def test_gamma_matrices_form_a_clifford_algebra():
    for a, b in itertools.product(range(5), repeat=2):
        anti = GAMMA[a] @ GAMMA[b] + GAMMA[b] @ GAMMA[a]
        assert np.allclose(anti, 2 * np.eye(4) * (a == b))


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_are_hermitian(name):
    model = builtin(name)
    k = np.random.default_rng(0).uniform(0, 2 * np.pi, (20, model.dim))
    H = eval_hamiltonian(model, k)
    assert np.allclose(H, np.conj(np.swapaxes(H, -1, -2)))


def test_qwz_matches_closed_form():
    k = np.array([0.3, -1.1])
    d = np.array([np.sin(k[0]), np.sin(k[1]), 0.5 + np.cos(k[0]) + np.cos(k[1])])
    sig = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    assert np.allclose(eval_hamiltonian(qwz(0.5), k), sum(c * s for c, s in zip(d, sig)))


@pytest.mark.parametrize("mass", [DIRAC4D_PINNED_MASS, DIRAC4D_TRIVIAL_MASS, -1.0, 1.0])
def test_dirac4d_gap_at_time_reversal_momenta(mass):
    # the gap of a Dirac model is 2|d(k)|; on TRIM points d0 = M + sum cos k
    model = dirac4d(mass)
    E = np.linalg.eigvalsh(eval_hamiltonian(model, TRIM))
    d0 = mass + np.cos(TRIM).sum(axis=1)
    assert np.allclose(E[:, 2] - E[:, 1], 2 * np.abs(d0))


def test_pinned_masses_are_gapped():
    # [DERIVED] d0 on TRIM points is M + 4 - 2j; the gap closes only for even integer M in [-4, 4]
    for M in (DIRAC4D_PINNED_MASS, DIRAC4D_TRIVIAL_MASS):
        pf, gap = build_projector_field(dirac4d(M), KGrid(4, 6))
        assert gap.min_gap_over_grid == pytest.approx(2.0)


def test_gap_closed_at_qwz_u0():
    with pytest.raises(GapClosed) as info:
        build_projector_field(qwz(0.0), KGrid(2, 40))
    assert info.value.exit_code == 2
    assert info.value.gap < 1e-8


def test_gap_threshold_override():
    # u = 0.01 has a true gap of 0.02 at (0, pi)
    with pytest.raises(GapClosed):
        build_projector_field(qwz(0.01), KGrid(2, 8), gap_threshold=0.05)
    build_projector_field(qwz(0.01), KGrid(2, 8))


def test_projector_field_residuals(projector_cache):
    pf, _ = projector_cache("dirac4d", 6)
    res = pf.residuals()
    assert max(res.values()) < 1e-12
    assert pf.rank == 2 and pf.norb == 4


def test_threads_give_identical_fields():
    model = builtin("weak3d")
    a, _ = build_projector_field(model, KGrid(3, 8), threads=1)
    b, _ = build_projector_field(model, KGrid(3, 8), threads=3)
    assert np.array_equal(a.P, b.P) and np.array_equal(a.frame, b.frame)


def test_spectral_projector_single_point():
    P, frame, gap = spectral_projector(qwz(1.0), [0.0, np.pi])
    assert np.allclose(P @ P, P)
    assert gap == pytest.approx(2.0)


def test_missing_partner_names_the_vector():
    hop = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(ValidationError, match=r"R=\[1, 0\]"):
        ModelSpec(2, 2, [((1, 0), hop), ((0, 0), np.diag([1.0, -1.0]))], 1)


def test_unknown_builtin_and_bad_params():
    with pytest.raises(ValidationError):
        builtin("graphene")
    with pytest.raises(ValidationError):
        builtin("qwz", {"mass": 1.0})


def test_custom_model_roundtrip(tmp_path):
    model = builtin("weak3d", {"u": -1.0})
    raw = model.to_dict()
    assert raw == {"name": "weak3d", "params": {"u": -1.0, "t": 0.3}}
    custom = ModelSpec(model.dim, model.norb, model.hoppings, model.occupied)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(custom.to_dict()))
    back = load_model(path)
    k = np.array([[0.1, 0.2, 0.3]])
    assert np.allclose(eval_hamiltonian(back, k), eval_hamiltonian(model, k))


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError):
        load_model(path)
    with pytest.raises(ValidationError):
        model_from_dict({"dim": 2})
