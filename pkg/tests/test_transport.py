import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from blochframes.errors import BranchAmbiguous, RefineGrid, TransportInconsistent
from blochframes.kgrid import KGrid
from blochframes.models import ProjectorField, build_projector_field, flat1d
from blochframes.transport import check_unitary, holonomy_log, holonomy_log_escape, parallel_transport


def _random_unitary(m, seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_holonomy_log_inverts_exponential(m, seed):
    U = _random_unitary(m, seed)
    X = holonomy_log(U)
    assert np.allclose(X, X.conj().T)
    assert np.allclose(scipy.linalg.expm(2j * np.pi * X), U, atol=1e-10)
    ev = np.linalg.eigvalsh(X)
    assert np.all(ev > -0.5) and np.all(ev <= 0.5)


def test_branch_cut_guard_and_escape():
    U = np.diag([-1.0, 1j]).astype(complex)
    with pytest.raises(BranchAmbiguous) as info:
        holonomy_log(U)
    assert info.value.exit_code == 4
    X, shift = holonomy_log_escape(U)
    assert shift > 0
    assert np.allclose(scipy.linalg.expm(2j * np.pi * X), U, atol=1e-10)


def _berry_phase_of_planar_vector(a):
    # d = (sin k, 0, a + cos k) stays in a plane; the lower band picks up pi iff d winds around 0
    return np.pi if abs(a) < 1 else 0.0


@pytest.mark.parametrize("a", [2.0, -1.7, 0.4])
def test_zak_phase_matches_planar_winding(a):
    pf, _ = build_projector_field(flat1d(a), KGrid(1, 64))
    sweep = parallel_transport(pf, 0, pf.frame[0])
    hol = complex(sweep.holonomy[0, 0])
    assert abs(abs(hol) - 1) < 1e-12
    assert np.angle(hol) % (2 * np.pi) == pytest.approx(_berry_phase_of_planar_vector(a), abs=1e-2)


def test_transported_frames_stay_in_fibres(projector_cache):
    pf, _ = projector_cache("qwz", 24, u=1.0)
    sweep = parallel_transport(pf, 0, pf.frame[0])
    assert sweep.frames.shape == (25, 24, 2, 1)
    P = np.concatenate([pf.P, pf.P[:1]], axis=0)
    assert np.max(np.abs(P @ sweep.frames - sweep.frames)) < 1e-12
    check_unitary(sweep.holonomy)


def test_wilson_loop_winding_equals_c1(projector_cache):
    # the Berry phase along k1 winds once as k2 goes around for c1 = 1
    pf, _ = projector_cache("qwz", 40, u=1.0)
    sweep = parallel_transport(pf, 0, pf.frame[0])
    ph = sweep.holonomy[:, 0, 0]
    steps = np.angle(np.roll(ph, -1) / ph)
    assert abs(round(steps.sum() / (2 * np.pi))) == 1


def test_coarse_transport_asks_for_refinement():
    # consecutive fibres are 72 degrees apart, so the overlap cos(72) is below the 0.5 floor
    g = KGrid(1, 5)
    th = 0.4 * np.pi * np.arange(5)
    pf = ProjectorField.from_frames(g, np.stack([np.cos(th), np.sin(th)], -1)[..., None].astype(complex))
    with pytest.raises(RefineGrid):
        parallel_transport(pf, 0, pf.frame[0])


def test_base_frame_outside_fibre_rejected(projector_cache):
    pf, _ = projector_cache("qwz", 24, u=1.0)
    with pytest.raises(ValueError):
        parallel_transport(pf, 0, np.ones_like(pf.frame[0]))


def test_non_unitary_matching_rejected():
    with pytest.raises(TransportInconsistent):
        check_unitary(np.full((4, 2, 2), 0.7, dtype=complex))
