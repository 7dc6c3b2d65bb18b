"""Inductive construction of Bloch frames, Parseval frames by space doubling, and diagnostics.

The d-dimensional frame is built from a frame on the slice k_1 = 0 (itself
built recursively), parallel transported along k_1. The matching field of
the transport is deformed to a normal form and the deformation is turned
into a gauge along k_1. Quasi-periodicity laws are kept per axis as
``F(k + 2 pi e_j) = F(k) L_j(k)``.
"""

from __future__ import annotations

import csv
import itertools
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .chern import ROUNDING_TOLERANCE, berry_curvature, chern_form, compute_invariants, dagger
from .degrees import UnitaryField, eta4d, one_degree, su2_degree
from .errors import (BlochFrameError, DoublingNotTrivial, StageError, TransportInconsistent,
                     ValidationError)
from .homotopy import (ColumnContraction, HomotopyPath, NormalFormCertificate, column_interpolation,
                       contract_to_eta, gauge_from_homotopy, log_chart, log_chart_cut,
                       unwind_determinant)
from .kgrid import KGrid
from .models import ProjectorField
from .transport import holonomy_log_escape, parallel_transport

KINDS = ("orthonormal_periodic", "orthonormal_quasiperiodic", "parseval")


@dataclass
class FrameResult:
    """Frame vectors on a grid, shape ``grid.shape + (norb, M)``.

    ``laws[j]`` is None (periodic) or an array of M x M matrices over the grid
    with axis ``j`` removed, such that F(k + 2 pi e_j) = F(k) laws[j](k).
    ``wrap`` records, per axis, how far the construction's own value at
    k_j = 2 pi is from what the law predicts.
    """

    grid: KGrid
    kind: str
    vectors: np.ndarray
    certificate: NormalFormCertificate
    laws: list
    wrap: list
    info: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.vectors.shape[-1]

    @property
    def norb(self) -> int:
        return self.vectors.shape[-2]

    def law_diagonals(self):
        """Diagonal phases of every law (raises if a law is not diagonal)."""
        out = []
        for law in self.laws:
            if law is None:
                out.append(None)
                continue
            d = np.diagonal(law, axis1=-2, axis2=-1)
            if np.max(np.abs(law - d[..., :, None] * np.eye(self.M))) > 1e-12:
                raise ValueError("law is not diagonal")
            out.append(d.copy())
        return out

    def shifted(self, axis: int) -> np.ndarray:
        """F(k + h e_axis), using the law across the wrap."""
        nxt = np.roll(self.vectors, -1, axis=axis)
        if self.laws[axis] is not None:
            sl = [slice(None)] * self.grid.dim
            sl[axis] = -1
            first = np.take(self.vectors, 0, axis=axis)
            nxt[tuple(sl)] = first @ self.laws[axis]
        return nxt

    def summary(self) -> dict:
        return {"kind": self.kind, "M": self.M, "norb": self.norb, "grid": self.grid.n,
                "dim": self.grid.dim, "certificate": self.certificate.to_dict(),
                "residuals": self.residuals, "info": _jsonable(self.info)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _shift_label(label: str) -> str:
    return "".join(str(int(ch) + 1) for ch in label)


# -- 1D ---------------------------------------------------------------------------------


def frame_1d(pfield: ProjectorField, base_frame=None) -> FrameResult:
    """Transport from k = 0 and remove the holonomy with its logarithm."""
    grid = pfield.grid
    if grid.dim != 1:
        raise ValueError("frame_1d needs a 1D projector field")
    phi0 = pfield.frame[0] if base_frame is None else base_frame
    sweep = parallel_transport(pfield, 0, phi0)
    X, shift = holonomy_log_escape(sweep.holonomy)
    w, V = np.linalg.eigh(X)
    n = grid.n
    ks = grid.h * np.arange(n + 1)
    gauge = (V[None] * np.exp(-1j * ks[:, None, None] * w[None, None, :])) @ dagger(V)[None]
    frames = sweep.frames @ gauge
    wrap = float(np.max(np.abs(frames[n] - frames[0])))
    info = {"branch_shift": shift, "min_overlap": sweep.min_overlap,
            "holonomy_phases": np.sort(2 * np.pi * w).tolist()}
    return FrameResult(grid, "orthonormal_periodic", frames[:n], NormalFormCertificate(),
                       [None], [wrap], info)


# -- d >= 2 ---------------------------------------------------------------------------------


def _slice_field(pfield: ProjectorField) -> ProjectorField:
    g = pfield.grid
    return ProjectorField(KGrid(g.dim - 1, g.n), pfield.P[0], pfield.frame[0])


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except BlochFrameError as exc:
        raise StageError(name, exc) from exc


def _row0_phase(grid, ints):
    """e^{i n . k} as a function of (possibly unwrapped) integer grid indices."""
    vec = np.asarray(ints, dtype=float)

    def phase(index):
        return np.exp(1j * grid.h * (np.asarray(index, dtype=float) @ vec))
    return phase


def _lift_through_row0(path: HomotopyPath, sub: HomotopyPath, phase):
    """Append the stages of ``sub`` (a path of sigma = D^-1 alpha) to ``path`` on alpha = D sigma."""
    for st in sub.stages:
        def fn(X, index, s, st=st):
            ph = phase(index)
            Y = X.copy()
            Y[..., 0, :] *= np.conj(ph)[..., None]
            Y = st.apply(Y, index, s)
            Y[..., 0, :] *= ph[..., None]
            return Y
        path.then(st.name, fn, st.info)
    return path


def exact_normal_form(grid: KGrid, m: int, ints, degree: int = 0) -> np.ndarray:
    """diag(e^{i n . k}, 1, ..., 1), times eta4d(degree) (+) 1 when ``degree`` is nonzero."""
    out = np.broadcast_to(np.eye(m, dtype=complex), grid.shape + (m, m)).copy()
    if degree:
        out[..., :2, :2] = eta4d(grid, degree)
    out[..., 0, :] *= np.exp(1j * (grid.kpoints() @ np.asarray(ints, dtype=float)))[..., None]
    return out


def _normal_form_path(U: UnitaryField, ints, seed):
    """Path from the matching field to its normal form; returns (path, second datum, form, exact end)."""
    d_base = U.grid.dim
    m = U.m
    path = HomotopyPath(U)
    cut = None if any(ints) or m == 1 else log_chart_cut(U)
    if cut is not None:
        # spectrum leaves a gap on the circle: the logarithm gives a path analytic in time
        path = _stage("log_chart", log_chart, U, cut, path=path)
        return path, (0 if d_base == 3 else None), "identity", exact_normal_form(U.grid, m, ints, 0)
    if d_base <= 2 or m == 1:
        if m > 1:
            path = _stage("column_interpolation", column_interpolation, U, seed=seed, path=path)
        path = _stage("unwind_determinant", unwind_determinant, path.end, ints, path=path)
        form = "exponential" if any(ints) else "identity"
        return path, (0 if d_base == 3 else None), form, exact_normal_form(U.grid, m, ints)
    # base is a 3-torus: split off the U(1) part, reduce the SU part to SU(2) and contract
    path = _stage("unwind_determinant", unwind_determinant, U, ints, path=path)
    phase = _row0_phase(U.grid, ints)
    index = np.moveaxis(np.indices(U.grid.shape), 0, -1)
    sigma = path.end.values.copy()
    sigma[..., 0, :] *= np.conj(phase(index))[..., None]
    sig = UnitaryField(U.grid, sigma, U.laws)
    sub = HomotopyPath(sig)
    if m > 2:
        cc = _stage("reduce_to_su2", ColumnContraction, sig, stop=2, seed=seed)
        sub.then("reduce_to_su2", cc.apply,
                 {"levels": [{"size": lv.size, "gap": lv.gap, "modulus": lv.modulus}
                             for lv in cc.levels]})
    eta = sub.end.block(2)
    deg, deg_info = _stage("three_degree", su2_degree, eta)
    sub = _stage("contract", contract_to_eta, sub.end, deg, seed=seed, path=sub)
    path.notes["three_degree"] = deg_info
    _lift_through_row0(path, sub, phase)
    form = "exponential" if any(ints) else "identity"
    if deg:
        form = "exponential*twisted" if any(ints) else "twisted"
    return path, -deg, form, exact_normal_form(U.grid, m, ints, deg)


def _matching(pfield: ProjectorField, seed: int, check_paths: bool):
    slice_res = _frame_recursive(_slice_field(pfield), seed, check_paths)
    sweep = _stage("transport", parallel_transport, pfield, 0, slice_res.vectors)
    hol = sweep.holonomy
    err = float(np.max(np.abs(dagger(hol) @ hol - np.eye(pfield.rank))))
    if err >= 1e-8:
        raise StageError("matching", TransportInconsistent(f"matching unitarity residual {err:.1e}"))
    U = UnitaryField(slice_res.grid, hol, slice_res.law_diagonals())
    ints = [_stage("one_degree", one_degree, U, j) for j in range(U.grid.dim)]
    return U, ints, slice_res, sweep


def matching_field(pfield: ProjectorField, seed: int = 0):
    """Matching field along k_1 over the frame of the k_1 = 0 slice, with its 1-degrees.

    Returns ``(U, ints, slice_certificate)``; ``ints[j]`` is the 1-degree of
    U along slice axis j (the pair label "1{j + 2}").
    """
    if pfield.grid.dim < 2:
        raise ValidationError("a matching field needs at least two dimensions")
    U, ints, slice_res, _ = _matching(pfield, seed, check_paths=False)
    return U, ints, slice_res.certificate


def matching_three_degree(U: UnitaryField, ints, seed: int = 0):
    """3-degree of the SU part of a matching field over a 3-torus.

    The determinant is first unwound to exp(i n . k) and removed from row 0;
    for m > 2 the SU(m) field is contracted onto SU(2) (+) 1. Returns
    ``(degree, info)`` with the Riemann-sum raw value in ``info``.
    """
    if U.grid.dim != 3:
        raise ValidationError("the 3-degree needs a matching field over a 3-torus")
    path = _stage("unwind_determinant", unwind_determinant, U, ints)
    phase = _row0_phase(U.grid, ints)
    index = np.moveaxis(np.indices(U.grid.shape), 0, -1)
    sigma = path.end.values.copy()
    sigma[..., 0, :] *= np.conj(phase(index))[..., None]
    sig = UnitaryField(U.grid, sigma, U.laws)
    if U.m > 2:
        sig = _stage("reduce_to_su2", ColumnContraction, sig, stop=2, seed=seed).apply(
            sig.values, index, 1.0)
        sig = UnitaryField(U.grid, sig, U.laws)
    if U.m == 1:
        return 0, {"lattice": 0, "riemann_raw": 0.0, "margin": None}
    return _stage("three_degree", su2_degree, sig.block(2))


def _frame_recursive(pfield: ProjectorField, seed: int, check_paths: bool) -> FrameResult:
    grid = pfield.grid
    if grid.dim == 1:
        return _stage("frame_1d", frame_1d, pfield)
    n, m = grid.n, pfield.rank
    U, ints, slice_res, sweep = _matching(pfield, seed, check_paths)
    path, second, form, new_match = _normal_form_path(U, ints, seed)
    snap = float(np.max(np.abs(path.end.values - new_match)))
    if snap >= 1e-9:
        raise StageError("normal_form", TransportInconsistent(
            f"path end misses the exact normal form by {snap:.1e}"))
    path_diag = path.check() if check_paths and not path.is_trivial else None
    beta = gauge_from_homotopy(path, n, end=new_match)
    frames = sweep.frames @ beta
    law_res = float(np.max(np.abs(frames[n] - slice_res.vectors @ new_match)))
    if law_res >= 1e-7:
        raise StageError("gauge", TransportInconsistent(
            f"gauged frame misses the normal form by {law_res:.1e}"))

    cert = NormalFormCertificate(seed=seed)
    for lab, v in slice_res.certificate.first.items():
        cert.first[_shift_label(lab)] = v
    for j, v in enumerate(ints):
        cert.first[f"1{j + 2}"] = int(v)
    cert.second = second
    cert.form = form

    eye = np.eye(m)
    laws = [None if np.max(np.abs(new_match - eye)) == 0 else new_match]
    wrap = [float(np.max(np.abs(frames[n] - frames[0] @ (eye if laws[0] is None else new_match))))]
    for j, law in enumerate(slice_res.laws):
        laws.append(None if law is None else np.broadcast_to(law, (n,) + law.shape).copy())
        wrap.append(slice_res.wrap[j])
    info = {"slice": slice_res.info, "min_overlap": sweep.min_overlap, "path": path_diag,
            "notes": path.notes,
            "stages": [{"name": st.name, **_jsonable(st.info)} for st in path.stages]}
    kind = "orthonormal_periodic" if all(l is None for l in laws) else "orthonormal_quasiperiodic"
    return FrameResult(grid, kind, frames[:n], cert, laws, wrap, info)


def crosscheck_certificate(cert: NormalFormCertificate, pfield: ProjectorField,
                           tol: float = ROUNDING_TOLERANCE) -> dict:
    """Compare certificate integers with curvature-integrated Chern numbers.

    Raw values outside ``tol`` of an integer are still compared by nearest
    integer and flagged; any disagreement raises.
    """
    F = berry_curvature(pfield)
    pairs = [(1, I) for I in itertools.combinations(range(pfield.grid.dim), 2)]
    if pfield.grid.dim == 4:
        pairs.append((2, (0, 1, 2, 3)))
    out = {}
    for order, I in pairs:
        raw = float(chern_form(F, order).integrate(I).real)
        near = int(np.rint(raw))
        lab = "".join(str(i + 1) for i in I)
        claimed = cert.first.get(lab) if order == 1 else cert.second
        key = f"c{order}_{lab}"
        out[key] = {"raw": raw, "certificate": claimed, "within_tolerance": abs(raw - near) < tol}
        if claimed != near:
            raise StageError("crosscheck", TransportInconsistent(
                f"{key}: certificate {claimed} vs curvature {raw:.4f}"))
    return out


def frame_nd(pfield: ProjectorField, seed: int = 0, crosscheck: bool = True,
             check_paths: bool = True) -> FrameResult:
    """Orthonormal frame of ``pfield`` (periodic if every invariant vanishes).

    With ``crosscheck`` the certificate integers are compared to the
    curvature-integrated Chern numbers.
    """
    res = _frame_recursive(pfield, seed, check_paths)
    if crosscheck and pfield.grid.dim >= 2:
        res.info["crosscheck"] = crosscheck_certificate(res.certificate, pfield)
    res.residuals = verify_frame(res, pfield)
    return res


# -- space doubling ----------------------------------------------------------------------------


def reflect_conjugate_projector(pfield: ProjectorField) -> ProjectorField:
    """Q(k) = conj(P(-k)) with exact index negation."""
    g = pfield.grid
    neg = np.ix_(*g.negated_index_map())
    return ProjectorField(g, np.conj(pfield.P[neg]), np.conj(pfield.frame[neg]))


def _pad_orbitals(pfield: ProjectorField, extra: int) -> ProjectorField:
    N = pfield.norb
    P = np.zeros(pfield.P.shape[:-2] + (N + extra, N + extra), dtype=complex)
    P[..., :N, :N] = pfield.P
    F = np.zeros(pfield.frame.shape[:-2] + (N + extra, pfield.rank), dtype=complex)
    F[..., :N, :] = pfield.frame
    return ProjectorField(pfield.grid, P, F)


def complement_q2(p2: ProjectorField, seed: int = 0) -> ProjectorField:
    """Rank-2 subprojection of 1 - P2 carrying all of its topology (negated invariants of P2)."""
    if p2.rank != 2:
        raise ValueError("complement_q2 expects a rank-2 projector field")
    if p2.norb - 2 < 2:
        p2 = _pad_orbitals(p2, 2)
    N = p2.norb
    Q = np.eye(N) - p2.P
    qfield = ProjectorField.from_projectors(p2.grid, Q, N - 2)
    if N - 2 == 2:
        return qfield
    res = frame_nd(qfield, seed=seed)
    top = res.vectors[..., :2]
    return ProjectorField.from_frames(p2.grid, top)


def _direct_sum(a: ProjectorField, b: ProjectorField) -> ProjectorField:
    Na, Nb = a.norb, b.norb
    P = np.zeros(a.P.shape[:-2] + (Na + Nb, Na + Nb), dtype=complex)
    P[..., :Na, :Na] = a.P
    P[..., Na:, Na:] = b.P
    F = np.zeros(a.frame.shape[:-2] + (Na + Nb, a.rank + b.rank), dtype=complex)
    F[..., :Na, :a.rank] = a.frame
    F[..., Na:, a.rank:] = b.frame
    return ProjectorField(a.grid, P, F)


def parseval_frame(pfield: ProjectorField, seed: int = 0) -> FrameResult:
    """Periodic Parseval frame with at most m + 1 (d <= 3) or m + 2 (d = 4) vectors."""
    res = frame_nd(pfield, seed=seed)
    if res.kind == "orthonormal_periodic":
        return res
    grid = pfield.grid
    top_rank = 2 if (grid.dim == 4 and res.certificate.second) else 1
    top = res.vectors[..., :top_rank]
    rest = res.vectors[..., top_rank:]
    ptop = ProjectorField.from_frames(grid, top)
    if top_rank == 1:
        partner = reflect_conjugate_projector(ptop)
    else:
        partner = _stage("complement_q2", complement_q2, ptop, seed=seed)
    doubled = _direct_sum(ptop, partner)
    inv = compute_invariants(doubled, with_fhs=False)
    bad = {k: v["int"] for k, v in inv.c1.items() if v["int"]}
    if inv.c2 is not None and inv.c2["int"]:
        bad["c2"] = inv.c2["int"]
    if bad:
        raise DoublingNotTrivial(f"doubled projector carries invariants {bad}")
    dres = _stage("doubled_frame", frame_nd, doubled, seed=seed, crosscheck=False)
    if dres.kind != "orthonormal_periodic":
        raise DoublingNotTrivial(f"doubled frame came out {dres.kind}")
    first_leg = dres.vectors[..., :pfield.norb, :]
    vectors = np.concatenate([first_leg, rest], axis=-1)
    wrap = [max(a, b) for a, b in zip(dres.wrap, [0.0] * grid.dim)]
    for j in range(grid.dim):
        if res.laws[j] is not None and rest.shape[-1]:
            law_rest = res.laws[j][..., top_rank:, top_rank:]
            eye = np.eye(rest.shape[-1])
            if np.max(np.abs(law_rest - eye)) > 1e-12:
                raise DoublingNotTrivial(f"untouched vectors are not periodic along axis {j + 1}")
    info = {"topological_rank": top_rank, "orthonormal": res.info, "doubled": dres.info,
            "doubled_invariants": inv.to_dict()}
    out = FrameResult(grid, "parseval", vectors, res.certificate, [None] * grid.dim, wrap, info)
    out.residuals = verify_frame(out, pfield)
    return out


# -- diagnostics ----------------------------------------------------------------------------------


def smoothness_metric(frame: FrameResult) -> float:
    """max_k |F(k + h e_j) - F(k)| / h over axes (Frobenius norm, law used across the wrap)."""
    h = frame.grid.h
    worst = 0.0
    for ax in range(frame.grid.dim):
        d = frame.shifted(ax) - frame.vectors
        worst = max(worst, float(np.max(np.linalg.norm(d, axis=(-2, -1)))) / h)
    return worst


def verify_frame(frame: FrameResult, pfield: ProjectorField) -> dict:
    """Residual report: orthonormality or Parseval, span, periodicity per axis, smoothness."""
    if frame.grid != pfield.grid:
        raise ValidationError("frame and projector field live on different grids")
    F = frame.vectors
    out = {}
    if frame.kind == "parseval":
        out["parseval"] = float(np.max(np.abs(F @ dagger(F) - pfield.P)))
    else:
        out["orthonormality"] = float(np.max(np.abs(dagger(F) @ F - np.eye(frame.M))))
    out["span"] = float(np.max(np.abs(pfield.P @ F - F)))
    per = {}
    for ax in range(frame.grid.dim):
        first = np.take(F, 0, axis=ax)
        mismatch = 0.0
        if frame.laws[ax] is not None:
            mismatch = float(np.max(np.abs(first @ frame.laws[ax] - first)))
        per[str(ax + 1)] = mismatch + float(frame.wrap[ax])
    out["periodicity"] = per
    out["smoothness"] = smoothness_metric(frame)
    return out


def periodicity_profile(frame: FrameResult, axis: int) -> np.ndarray:
    """|F(k + 2 pi e_axis) - F(k)| on the face k_axis = 0 (per remaining grid point)."""
    first = np.take(frame.vectors, 0, axis=axis)
    if frame.laws[axis] is None:
        return np.zeros(first.shape[:-2])
    return np.linalg.norm(first @ frame.laws[axis] - first, axis=(-2, -1))


# -- Wannier functions -------------------------------------------------------------------------------


@dataclass
class WannierProfile:
    """Lattice amplitudes |w(R)| (all frame vectors together) and a log10 decay fit."""

    dim: int
    n: int
    R: np.ndarray
    amplitude: np.ndarray
    shells: np.ndarray
    shell_max: np.ndarray
    slope: float

    def norm_squared(self) -> float:
        return float(np.sum(self.amplitude**2))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"R{j + 1}" for j in range(self.dim)] + ["amplitude"])
            for r, a in zip(self.R, self.amplitude):
                wr.writerow([int(x) for x in r] + [f"{a:.17g}"])


def wannier_transform(vectors: np.ndarray, dim: int) -> np.ndarray:
    """w(R) = n^-d sum_k e^{i k R} phi(k), R in the centred range of the lattice."""
    axes = tuple(range(dim))
    return np.fft.fftshift(np.fft.ifftn(vectors, axes=axes), axes=axes)


def _decay_fit(shells, shell_max, n, floor_rel=1e-13):
    top = shell_max[0] if shell_max[0] > 0 else shell_max.max()
    sel = (shells >= 1) & (shells <= n // 2) & (shell_max > floor_rel * top)
    if sel.sum() < 2:
        return float("-inf")
    slope, _ = np.polyfit(shells[sel], np.log10(shell_max[sel]), 1)
    return float(slope)


def wannier_profile_from_vectors(vectors: np.ndarray, dim: int) -> WannierProfile:
    n = vectors.shape[0]
    w = wannier_transform(vectors, dim)
    amp = np.sqrt(np.sum(np.abs(w) ** 2, axis=(-2, -1)))
    R = np.moveaxis(np.indices((n,) * dim), 0, -1) - n // 2
    shell = np.max(np.abs(R), axis=-1)
    shells = np.arange(shell.max() + 1)
    shell_max = np.array([amp[shell == s].max() for s in shells])
    return WannierProfile(dim, n, R.reshape(-1, dim), amp.reshape(-1), shells, shell_max,
                          _decay_fit(shells, shell_max, n))


def wannierize(frame: FrameResult) -> WannierProfile:
    """Wannier amplitudes of a periodic (orthonormal or Parseval) frame."""
    if frame.kind == "orthonormal_quasiperiodic" or any(l is not None for l in frame.laws):
        raise ValidationError("Wannier functions need a periodic frame")
    return wannier_profile_from_vectors(frame.vectors, frame.grid.dim)


# -- export --------------------------------------------------------------------------------------------


FRAME_MAGIC = b"BFFRAME1"


def export_frame(frame: FrameResult, path, config: dict | None = None) -> str:
    """Write the binary frame (header then k-major complex128) and a JSON sidecar; returns its path."""
    with open(path, "wb") as fh:
        fh.write(FRAME_MAGIC)
        fh.write(struct.pack("<4i", frame.grid.dim, frame.grid.n, frame.norb, frame.M))
        fh.write(np.ascontiguousarray(frame.vectors, dtype="<c16").tobytes())
    side = str(path) + ".json"
    meta = frame.summary()
    if config is not None:
        meta["config"] = config
    with open(side, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return side


def load_frame(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(8) != FRAME_MAGIC:
            raise ValueError("not a frame file")
        dim, n, norb, M = struct.unpack("<4i", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape((n,) * dim + (norb, M))
