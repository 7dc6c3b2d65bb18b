"""Berry connection and curvature, Chern forms and numbers, Chern-Simons forms.

Conventions: A_mu = (1/2 pi i) <phi_a, d_mu phi_b>, curvature coefficients on
ordered pairs F_{mu nu} = (1/2 pi i) phi^dag [d_mu P, d_nu P] phi, so that
F = dA + 2 pi i A^A up to discretization error. Orientation of every
sub-torus is the ascending order of its axes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarse, RefineGrid
from .kgrid import FormField, KGrid, centered_diff
from .models import ProjectorField

ROUNDING_TOLERANCE = 0.05
# the fourth-order stencil keeps the rounding bias of c2 at n = 12 well inside the tolerance
CURVATURE_STENCIL = 4
TWO_PI_I = 2j * np.pi


def dagger(x):
    return np.conj(np.swapaxes(x, -1, -2))


def berry_connection(grid: KGrid, frame: np.ndarray, check: float = 1e-8) -> FormField:
    """Matrix-valued 1-form A_mu = (1/2 pi i) phi^dag d_mu phi of a periodic frame field."""
    m = frame.shape[-1]
    gram = dagger(frame) @ frame
    err = float(np.max(np.abs(gram - np.eye(m))))
    if err > check:
        raise ValueError(f"frame is not orthonormal (residual {err:.2e})")
    comps = {(mu,): dagger(frame) @ centered_diff(frame, mu, grid.h) / TWO_PI_I
             for mu in range(grid.dim)}
    return FormField(grid, 1, comps, matrix_size=m)


def berry_curvature(field: ProjectorField, frame: np.ndarray | None = None,
                    order: int = CURVATURE_STENCIL) -> FormField:
    """Curvature 2-form from projector differences, expressed in ``frame`` (default: eigenframe).

    ``order`` selects the centered stencil for d P (2 or 4).
    """
    grid = field.grid
    frame = field.frame if frame is None else frame
    dP = [centered_diff(field.P, mu, grid.h, order) for mu in range(grid.dim)]
    fd = dagger(frame)
    comps = {}
    for mu, nu in itertools.combinations(range(grid.dim), 2):
        comm = dP[mu] @ dP[nu] - dP[nu] @ dP[mu]
        comps[(mu, nu)] = fd @ comm @ frame / TWO_PI_I
    return FormField(grid, 2, comps, matrix_size=frame.shape[-1])


def curvature_from_connection(A: FormField) -> FormField:
    """F = dA + 2 pi i A^A (frame-based route, used for cross-checks)."""
    return A.d() + (A ^ A).scale(TWO_PI_I)


def chern_form(F: FormField, n: int) -> FormField:
    """Scalar Chern form c_1 = Tr F or c_2 = (Tr F ^ Tr F - Tr(F ^ F)) / 2."""
    if n == 1:
        return F.trace()
    if n == 2:
        if 4 > F.grid.dim:
            raise ValueError("second Chern form needs a 4-torus")
        trF = F.trace()
        return ((trF ^ trF) - (F ^ F).trace()).scale(0.5)
    raise ValueError("only c_1 and c_2 are supported")


def round_invariant(raw: float, tol: float = ROUNDING_TOLERANCE, what: str = "invariant") -> int:
    value = int(np.rint(raw))
    if abs(raw - value) >= tol:
        raise GridTooCoarse(raw, what)
    return value


def chern_number(field: ProjectorField, n: int, I, base=None, tol: float = ROUNDING_TOLERANCE,
                 curvature: FormField | None = None):
    """(raw, integer) Chern number of order ``n`` over the sub-torus spanned by axes ``I``."""
    I = tuple(sorted(I))
    if len(I) != 2 * n:
        raise ValueError(f"index set {I} must have {2 * n} axes")
    F = berry_curvature(field) if curvature is None else curvature
    raw = chern_form(F, n).integrate(I, base).real
    return raw, round_invariant(raw, tol, f"c{n}{_label(I)}")


def fhs_chern1(field: ProjectorField, I, base=None) -> int:
    """Plaquette (link-variable) first Chern number on the 2-sub-torus ``I``.

    Uses only overlaps of the occupied frame, so the result is independent
    of the per-k frame gauge and an exact integer.
    """
    a, b = sorted(I)
    grid = field.grid
    frame = _slice_through(field.frame, grid, (a, b), base)

    def link(axis):
        ov = dagger(frame) @ np.roll(frame, -1, axis=axis)
        det = np.linalg.det(ov)
        small = np.min(np.abs(det))
        if small < 1e-10:
            raise RefineGrid(f"singular link overlap ({small:.1e}) on plaquette loop; refine the grid")
        return det / np.abs(det)

    ua, ub = link(0), link(1)
    loop = ua * np.roll(ub, -1, axis=0) * np.conj(np.roll(ua, -1, axis=1)) * np.conj(ub)
    total = np.sum(np.angle(loop)) / (2 * np.pi)
    return int(np.rint(total))


def _slice_through(values, grid, axes, base):
    from .kgrid import _base_index
    idx = _base_index(grid, base)
    sl = tuple(slice(None) if ax in axes else idx[ax] for ax in range(grid.dim))
    return values[sl]


def chern_simons(A: FormField, F: FormField) -> FormField:
    """CS = (Tr A ^ Tr F - Tr(F ^ A - (2 pi i / 3) A ^ A ^ A)) / 2."""
    if A.grid.dim < 3:
        raise ValueError("Chern-Simons form needs at least three dimensions")
    if A.matrix_size != F.matrix_size:
        raise ValueError("connection and curvature come from different frames")
    trA, trF = A.trace(), F.trace()
    inner = (F ^ A) - (A ^ A ^ A).scale(TWO_PI_I / 3)
    return ((trA ^ trF) - inner.trace()).scale(0.5)


def maurer_cartan(grid: KGrid, gamma: np.ndarray) -> FormField:
    """gamma^-1 d gamma with centered differences."""
    ginv = dagger(gamma)
    comps = {(mu,): ginv @ centered_diff(gamma, mu, grid.h) for mu in range(grid.dim)}
    return FormField(grid, 1, comps, matrix_size=gamma.shape[-1])


def right_maurer_cartan(grid: KGrid, gamma: np.ndarray) -> FormField:
    """d gamma gamma^-1 with centered differences."""
    ginv = dagger(gamma)
    comps = {(mu,): centered_diff(gamma, mu, grid.h) @ ginv for mu in range(grid.dim)}
    return FormField(grid, 1, comps, matrix_size=gamma.shape[-1])


def gauge_transform_connection(A: FormField, gamma: np.ndarray) -> FormField:
    """gamma^-1 A gamma + (1/2 pi i) gamma^-1 d gamma."""
    ginv = dagger(gamma)
    conj = A.apply(lambda v: ginv @ v @ gamma)
    return conj + maurer_cartan(A.grid, gamma).scale(1 / TWO_PI_I)


def cubic_trace(omega: FormField) -> FormField:
    """Tr(omega ^ omega ^ omega) for a matrix 1-form."""
    return (omega ^ omega ^ omega).trace()


def cs_gauge_correction(A: FormField, gamma: np.ndarray):
    """Terms of the gauge law CS(A^gamma) = CS(A) - W(gamma) - dB(gamma).

    Returns the 3-form W = (1/24 pi^2) Tr[(gamma^-1 d gamma)^3] and the 2-form
    B = (1/4 pi i)[Tr(A ^ d gamma gamma^-1) + Tr A ^ Tr(d gamma gamma^-1)].
    """
    W = cubic_trace(maurer_cartan(A.grid, gamma)).scale(1 / (24 * np.pi**2))
    R = right_maurer_cartan(A.grid, gamma)
    B = ((A ^ R).trace() + (A.trace() ^ R.trace())).scale(1 / (4j * np.pi))
    return W, B


def _label(I) -> str:
    return "".join(str(i + 1) for i in I)


@dataclass
class InvariantReport:
    grid: int
    gap: dict
    c1: dict = field(default_factory=dict)
    c2: dict | None = None
    method: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"c1": self.c1}
        if self.c2 is not None:
            out["c2"] = self.c2
        out.update({"method": self.method, "grid": self.grid, "gap": self.gap})
        return out


def compute_invariants(field: ProjectorField, gap_info=None, tol: float = ROUNDING_TOLERANCE,
                       with_fhs: bool = True) -> InvariantReport:
    """All first Chern numbers (and c_2 on a 4-torus) of a projector field."""
    grid = field.grid
    # a 1-torus carries no 2-form, hence no Chern numbers
    F = berry_curvature(field) if grid.dim >= 2 else None
    c1 = {}
    for I in itertools.combinations(range(grid.dim), 2):
        raw, val = chern_number(field, 1, I, tol=tol, curvature=F)
        entry = {"raw": raw, "int": val}
        if with_fhs:
            entry["fhs"] = fhs_chern1(field, I)
        c1[_label(I)] = entry
    c2 = None
    if grid.dim == 4:
        raw, val = chern_number(field, 2, (0, 1, 2, 3), tol=tol, curvature=F)
        c2 = {"raw": raw, "int": val}
    method = {"curvature": "projector centered differences", "c1_oracle": "plaquette link variables"
              if with_fhs else "none", "rounding_tolerance": tol}
    gap = gap_info.to_dict() if gap_info is not None else {}
    return InvariantReport(grid.n, gap, c1, c2, method)
