"""Parallel transport of frames along one torus axis, holonomy logarithms, matching matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chern import dagger
from .errors import BranchAmbiguous, RefineGrid, TransportInconsistent
from .models import ProjectorField

MIN_OVERLAP = 0.5
BRANCH_GUARD = 1e-8


@dataclass
class TransportSweep:
    """Transported frames along ``axis`` at indices 0..n (index n is k_axis = 2 pi).

    ``frames`` has the transport axis first: shape ``(n + 1,) + base + (N, m)``
    where ``base`` is the grid shape with ``axis`` removed. ``holonomy`` is
    ``frames[0]^dag frames[n]``, shape ``base + (m, m)``.
    """

    axis: int
    frames: np.ndarray
    holonomy: np.ndarray
    min_overlap: float


def _polar(w):
    u, s, vh = np.linalg.svd(w, full_matrices=False)
    return u @ vh, s


def parallel_transport(field: ProjectorField, axis: int, base_frame: np.ndarray) -> TransportSweep:
    """Discrete parallel transport of ``base_frame`` (given on the slice k_axis = 0).

    Each step projects onto the next fibre and re-orthonormalizes with the
    polar factor, which is the discrete analogue of the transport equation
    (P dphi = 0). Raises RefineGrid if consecutive fibres overlap too little.
    """
    P = np.moveaxis(field.P, axis, 0)
    n = P.shape[0]
    phi = np.asarray(base_frame, dtype=complex)
    if phi.shape != P.shape[1:-2] + (P.shape[-1], phi.shape[-1]):
        raise ValueError(f"base frame shape {phi.shape} does not match the slice")
    resid = np.max(np.abs(P[0] @ phi - phi))
    if resid > 1e-8:
        raise ValueError(f"base frame is not in the fibre at k=0 (residual {resid:.1e})")
    frames = np.empty((n + 1,) + phi.shape, dtype=complex)
    frames[0] = phi
    worst = 1.0
    for j in range(n):
        w = P[(j + 1) % n] @ frames[j]
        frames[j + 1], s = _polar(w)
        worst = min(worst, float(s.min()))
    if worst < MIN_OVERLAP:
        raise RefineGrid(f"adjacent fibres overlap only {worst:.3f} along axis {axis}; refine the grid")
    hol = dagger(frames[0]) @ frames[n]
    return TransportSweep(axis, frames, hol, worst)


def holonomy_log(U: np.ndarray, guard: float = BRANCH_GUARD) -> np.ndarray:
    """Hermitian X with exp(2 pi i X) = U and spectrum in (-1/2, 1/2].

    Raises BranchAmbiguous when an eigenvalue sits within ``guard`` of -1.
    """
    T, Z = scipy.linalg.schur(np.asarray(U, dtype=complex), output="complex")
    lam = np.diag(T)
    if np.min(np.abs(lam + 1)) < guard:
        raise BranchAmbiguous(f"holonomy eigenvalue within {guard:g} of -1; branch cut is ambiguous")
    ang = np.angle(lam) / (2 * np.pi)
    X = Z @ np.diag(ang) @ dagger(Z)
    return 0.5 * (X + dagger(X))


def holonomy_log_escape(U: np.ndarray, guard: float = BRANCH_GUARD, eps: float = 1e-6):
    """Like :func:`holonomy_log`, but rotates the branch cut off an eigenvalue at -1.

    Returns ``(X, shift)``; ``exp(2 pi i X) = U`` still holds and ``shift``
    is the phase used to move the cut (0 when no escape was needed).
    """
    try:
        return holonomy_log(U, guard), 0.0
    except BranchAmbiguous:
        X = holonomy_log(U * np.exp(1j * eps), guard)
        return X - eps / (2 * np.pi) * np.eye(U.shape[-1]), eps


def check_unitary(values: np.ndarray, tol: float = 1e-8, what: str = "matching matrix") -> float:
    m = values.shape[-1]
    err = float(np.max(np.abs(dagger(values) @ values - np.eye(m))))
    if err >= tol:
        raise TransportInconsistent(f"{what} unitarity residual {err:.2e} exceeds {tol:g}")
    return err


def matching_matrices(sweep: TransportSweep, slice_grid, laws=None):
    """Matching field U(k') with psi(2 pi, k') = psi(0, k') U(k').

    ``laws`` are the diagonal quasi-periodicity phases of the slice frame;
    they become conjugation laws of U.
    """
    from .degrees import UnitaryField

    check_unitary(sweep.holonomy)
    return UnitaryField(slice_grid, sweep.holonomy, laws)
