"""Constructive deformations of unitary fields and their conversion to gauge fields.

A :class:`HomotopyPath` is a chain of stages. Each stage is a pointwise map
``(values, index, s) -> values`` applied to the stage's start field, where
``index`` holds integer grid indices (possibly outside the fundamental cell,
for law checks) and ``s`` runs from 0 to 1. Stages are equivariant under the
diagonal quasi-periodicity laws of the field, so every intermediate field
obeys the same law as the start.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special
import scipy.stats

from .chern import dagger
from .degrees import (UnitaryField, eta4d, lift_argument, one_degree, su2_coords, su2_from_coords,
                      su2_degree)
from .errors import AntipodeStuck, HomotopyFailure, NonzeroWinding, SardFailure

PATH_STEP_BOUND = 0.5
SARD_SET_SIZE = 2000
SARD_GAP_FACTOR = 0.5
ANTIPODE_GAP = 0.1
MAX_RETRIES = 8
MIN_PATH_SAMPLES = 32
MAX_PATH_SAMPLES = 4096
MAX_REFINEMENTS = 3
# widest eigenvalue-free arc (radians) for the logarithm shortcut
LOG_CHART_ARC = 0.5


def smoothstep(t):
    """C-infinity ramp from 0 to 1 with all derivatives vanishing at both ends."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _unitary_log(R):
    """Anti-Hermitian L with expm(L) = R (R unitary)."""
    T, Z = scipy.linalg.schur(R, output="complex")
    return Z @ np.diag(1j * np.angle(np.diag(T))) @ dagger(Z)


def _expm_antihermitian(L, s):
    """expm(s L) for anti-Hermitian L, batched over s (array)."""
    w, V = np.linalg.eigh(-1j * L)
    s = np.asarray(s, dtype=float)
    ph = np.exp(1j * s[..., None] * w)
    return (V * ph[..., None, :]) @ dagger(V)


# -- stages -------------------------------------------------------------------------


@dataclass
class Stage:
    name: str
    start: np.ndarray
    fn: object = None
    info: dict = field(default_factory=dict)
    # a one-parameter group in s may run at constant speed when it is the only stage
    linear: bool = False

    def apply(self, values, index, s):
        if self.fn is None:
            return values
        return self.fn(values, index, s)


class HomotopyPath:
    """Chain of stages from a start field to an end field on a common grid and law."""

    def __init__(self, field0: UnitaryField, stages=None, n_samples: int | None = None):
        self.grid = field0.grid
        self.laws = field0.laws
        self.m = field0.m
        self.stages = list(stages or [])
        self._start = field0.values
        self.n_samples = n_samples or max(self.grid.n, MIN_PATH_SAMPLES)
        self.notes = {}
        self._end = None

    # construction -----------------------------------------------------------------

    @property
    def start(self) -> UnitaryField:
        return UnitaryField(self.grid, self._start, self.laws)

    @property
    def end(self) -> UnitaryField:
        if self._end is None:
            self._end = self.evaluate(1.0)
        return UnitaryField(self.grid, self._end, self.laws)

    @property
    def is_trivial(self) -> bool:
        return not any(st.fn is not None for st in self.stages)

    def then(self, name, fn, info=None, linear=False):
        """Append a stage acting on the current end field."""
        st = Stage(name, self.end.values, fn, info or {}, linear)
        self.stages.append(st)
        self._end = None
        return self

    def extend(self, other: "HomotopyPath"):
        if other.grid != self.grid or other.m != self.m:
            raise ValueError("paths live on different fields")
        gap = np.max(np.abs(other._start - self.end.values))
        if gap > 1e-9:
            raise ValueError(f"paths do not connect (gap {gap:.1e})")
        self.stages.extend(other.stages)
        self._end = None
        return self

    # evaluation -------------------------------------------------------------------

    def _locate(self, t):
        nst = len(self.stages)
        if nst == 0:
            return None, 0.0
        x = float(np.clip(t, 0.0, 1.0)) * nst
        if nst == 1 and self.stages[0].linear:
            return 0, x
        j = min(int(np.floor(x)), nst - 1)
        return j, float(smoothstep(x - j))

    def evaluate(self, t: float) -> np.ndarray:
        j, s = self._locate(t)
        if j is None:
            return self._start.copy()
        st = self.stages[j]
        index = np.indices(self.grid.shape)
        index = np.moveaxis(index, 0, -1)
        return st.apply(st.start, index, s)

    def samples(self, n_t: int | None = None) -> np.ndarray:
        n_t = n_t or self.n_samples
        return np.stack([self.evaluate(i / n_t) for i in range(n_t + 1)])

    # diagnostics ----------------------------------------------------------------------

    def law_residual(self, t: float) -> float:
        """max |stage(L^-1 X L, k + 2 pi e_j) - L^-1 stage(X, k) L| over cell faces."""
        j, s = self._locate(t)
        if j is None:
            return 0.0
        st = self.stages[j]
        dim, n = self.grid.dim, self.grid.n
        src = UnitaryField(self.grid, st.start, self.laws)
        index = np.moveaxis(np.indices(self.grid.shape), 0, -1)
        worst = 0.0
        for ax in range(dim):
            if src._trivial(ax):
                continue
            face = [slice(None)] * dim
            face[ax] = 0
            face = tuple(face)
            X = st.start[face]
            idx = index[face]
            ph = src.laws[ax]
            img = np.conj(ph)[..., :, None] * X * ph[..., None, :]
            idx_img = idx.copy()
            idx_img[..., ax] += n
            a = st.apply(img, idx_img, s)
            b = st.apply(X, idx, s)
            b = np.conj(ph)[..., :, None] * b * ph[..., None, :]
            worst = max(worst, float(np.max(np.abs(a - b))))
        return worst

    def diagnostics(self, n_t: int | None = None) -> dict:
        n_t = n_t or self.n_samples
        eye = np.eye(self.m)
        prev = None
        step = unit = law = 0.0
        for i in range(n_t + 1):
            X = self.evaluate(i / n_t)
            unit = max(unit, float(np.max(np.abs(dagger(X) @ X - eye))))
            law = max(law, self.law_residual(i / n_t))
            if prev is not None:
                step = max(step, float(np.max(np.linalg.norm(X - prev, ord=2, axis=(-2, -1)))))
            prev = X
        return {"n_t": n_t, "max_step": step, "unitarity": unit, "law": law,
                "stages": [st.name for st in self.stages]}

    def check(self, n_t: int | None = None, bound: float = PATH_STEP_BOUND) -> dict:
        diag = self.diagnostics(n_t)
        # a continuous path passes once sampled finely enough; a jump never does
        for _ in range(MAX_REFINEMENTS):
            if diag["max_step"] < bound or diag["n_t"] >= MAX_PATH_SAMPLES:
                break
            nxt = int(np.ceil(diag["n_t"] * 2 * diag["max_step"] / bound))
            diag = self.diagnostics(min(nxt, MAX_PATH_SAMPLES))
        if diag["max_step"] >= bound or diag["unitarity"] >= 1e-9 or diag["law"] >= 1e-8:
            raise HomotopyFailure(f"path invariants violated: {diag}")
        return diag

    def dump(self, path, n_t: int | None = None):
        """Binary dump: 8-byte magic, int32 (dim, n, m, n_t), then t-major complex128 samples."""
        data = self.samples(n_t)
        with open(path, "wb") as fh:
            fh.write(b"BFPATH1\0")
            fh.write(struct.pack("<4i", self.grid.dim, self.grid.n, self.m, data.shape[0] - 1))
            fh.write(np.ascontiguousarray(data, dtype="<c16").tobytes())


def load_path_dump(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != b"BFPATH1\0":
            raise ValueError("not a path dump")
        dim, n, m, n_t = struct.unpack("<4i", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape((n_t + 1,) + (n,) * dim + (m, m))


@dataclass
class NormalFormCertificate:
    """Integers certified by the normal-form construction.

    ``first`` maps 1-based axis-pair labels (e.g. "12") to first Chern data;
    ``second`` is the second Chern datum (4-torus only).
    """

    first: dict = field(default_factory=dict)
    second: int | None = None
    form: str = "identity"
    seed: int | None = None

    @property
    def trivial(self) -> bool:
        return all(v == 0 for v in self.first.values()) and not self.second

    def to_dict(self) -> dict:
        out = {"first": dict(sorted(self.first.items())), "form": self.form}
        if self.second is not None:
            out["second"] = self.second
        if self.seed is not None:
            out["seed"] = self.seed
        return out


# -- U(1) x SU(m) splitting -------------------------------------------------------------


def split_u1_su(values: np.ndarray):
    """(delta, sigma) with delta = diag(det, 1, ..., 1) and sigma = delta^-1 alpha in SU(m)."""
    values = np.asarray(values, dtype=complex)
    det = np.linalg.det(values)
    m = values.shape[-1]
    delta = np.broadcast_to(np.eye(m, dtype=complex), values.shape).copy()
    delta[..., 0, 0] = det
    sigma = values.copy()
    sigma[..., 0, :] = values[..., 0, :] / det[..., None]
    return delta, sigma


# -- column interpolation -------------------------------------------------------------------


def sard_sphere(real_dim: int, size: int = SARD_SET_SIZE) -> np.ndarray:
    """Fixed low-discrepancy point set on the unit sphere of C^(real_dim / 2)."""
    pts = scipy.stats.qmc.Halton(d=real_dim, scramble=False).random(size + 1)[1:]
    g = scipy.special.ndtri(pts)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, 0::2] + 1j * g[:, 1::2]


def _direct_rotation(x, y):
    """Unitary R (batched) with R x = y that is the identity off span{x, y}.

    Continuous in (x, y) while <x, y> stays away from 0.
    """
    c = np.einsum("...i,...i->...", np.conj(x), y)
    ac = np.abs(c)
    ph = c / ac
    r = y - c[..., None] * x
    eye = np.eye(x.shape[-1], dtype=complex)
    xx = x[..., :, None] * np.conj(x)[..., None, :]
    rx = r[..., :, None] * np.conj(x)[..., None, :]
    xr = x[..., :, None] * np.conj(r)[..., None, :]
    rr = r[..., :, None] * np.conj(r)[..., None, :]
    # (|c| - 1) / |r|^2 = -1 / (1 + |c|) keeps the rr coefficient finite as y -> x
    return (eye + (c - 1)[..., None, None] * xx + rx - ph[..., None, None] * xr
            - (1.0 / (1.0 + ac))[..., None, None] * rr)


def _rotation_to_basis(q, c):
    """Unitary W with W q = e_c (q a unit vector in C^a)."""
    a = q.shape[0]
    cols = [q] + [np.eye(a, dtype=complex)[j] for j in range(a)]
    M = np.stack(cols, axis=1)
    Q, R = np.linalg.qr(M[:, :a + 1])
    Q = Q[:, :a]
    # QR picks a basis whose first column is q up to phase; fix the phase
    Q[:, 0] *= q[np.argmax(np.abs(q))] / Q[np.argmax(np.abs(q)), 0]
    perm = list(range(1, a))
    perm.insert(c, 0)
    V = Q[:, perm]
    return dagger(V)


@dataclass
class _Level:
    size: int
    column: int
    offset: int
    q: np.ndarray
    steps: int
    rot_log: np.ndarray
    gap: float
    modulus: float


class ColumnContraction:
    """Level-by-level contraction of trailing columns to standard basis vectors.

    At each level the last active column is pushed along great-circle chords
    to ``-p`` (``p`` a sphere point far from every sampled column value), then
    a constant rotation carries ``-p`` to the basis vector. Columns already
    handled are untouched. When the field has a nontrivial diagonal law the
    first coordinate is excluded from ``p`` and from all rotations, which makes
    every step equivariant.

    ``weights`` (optional, per grid point in [0, 1]) scales the parameter
    pointwise; Sard samples of level ``j`` are then taken only where the
    weight exceeds ``j / levels``.
    """

    def __init__(self, field: UnitaryField, stop: int = 1, weights=None, seed: int = 0,
                 retries: int = MAX_RETRIES, gap_factor: float = SARD_GAP_FACTOR):
        self.grid = field.grid
        self.m = field.m
        self.restricted = field.law_tag != "periodic"
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        rng = np.random.default_rng(seed)
        self.levels: list[_Level] = []
        sizes = list(range(self.m, stop, -1))
        cur = field.values
        L = max(len(sizes), 1)
        for j, a in enumerate(sizes):
            mask = None if self.weights is None else self.weights > j / L
            lvl = self._build_level(UnitaryField(self.grid, cur, field.laws), a, mask, rng,
                                    retries, gap_factor)
            self.levels.append(lvl)
            cur = self._apply_level(cur, lvl, np.ones(cur.shape[:-2]))

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def _build_level(self, fld, a, mask, rng, retries, gap_factor):
        c = a - 1
        off = 1 if self.restricted else 0
        free = a - off
        v = fld.values[..., :a, c]
        mod = 0.0
        for ax in range(self.grid.dim):
            nb = fld.shifted(ax, 1)[..., :a, c]
            d = np.linalg.norm(nb - v, axis=-1)
            if mask is not None:
                d = d[mask]
            mod = max(mod, float(d.max()) if d.size else 0.0)
        pts = v.reshape(-1, a) if mask is None else v[mask].reshape(-1, a)
        if pts.shape[0] == 0:
            q = np.zeros(a, dtype=complex)
            q[-1] = 1.0
            return self._finish_level(a, c, off, q, 2.0, 0.0)
        if free == 1:
            base = np.exp(2j * np.pi * np.arange(SARD_SET_SIZE) / SARD_SET_SIZE)[:, None]
        else:
            base = sard_sphere(2 * free)
        gap = 0.0
        for attempt in range(retries + 1):
            cand = base
            if attempt:
                if free == 1:
                    break
                cand = base @ scipy.stats.unitary_group.rvs(free, random_state=rng).T
            if off:
                # the law only rotates the phase of row 0, so p_0 = 0 keeps |v - p| law-invariant
                cand = np.concatenate([np.zeros((cand.shape[0], 1)), cand], axis=1)
            dist = _min_distances(cand, pts)
            best = int(np.argmax(dist))
            gap = float(dist[best])
            if gap > gap_factor * mod:
                return self._finish_level(a, c, off, -cand[best], gap, mod)
        raise SardFailure(f"column {c + 1}: best sphere gap {gap:.3f} does not exceed "
                          f"{gap_factor:g} x modulus {mod:.3f}")

    def _finish_level(self, a, c, off, q, gap, mod):
        steps = int(max(8, np.ceil(8.0 / max(gap, 1e-3))))
        W = np.eye(a, dtype=complex)
        W[off:, off:] = _rotation_to_basis(q[off:], c - off)
        return _Level(a, c, off, q, steps, _unitary_log(W), gap, mod)

    def _apply_level(self, X, lvl: _Level, u):
        a, c = lvl.size, lvl.column
        u = np.broadcast_to(np.asarray(u, dtype=float), X.shape[:-2])
        if not np.any(u > 0):
            return X
        X = X.copy()
        # both halves are reparametrized so that every t-derivative vanishes at the joints
        ua = smoothstep(2 * u)
        ub = smoothstep(2 * u - 1)
        v0 = X[..., :a, c].copy()
        q = lvl.q

        def chord(w):
            y = (1 - w)[..., None] * v0 + w[..., None] * q
            return y / np.linalg.norm(y, axis=-1, keepdims=True)

        # uniform subdivision of [0, ua]: the composed rotations depend smoothly on ua
        x = v0
        for st in range(1, lvl.steps + 1):
            y = chord(ua * st / lvl.steps)
            X[..., :a, :] = _direct_rotation(x, y) @ X[..., :a, :]
            x = y
        if np.any(ub > 0):
            X[..., :a, :] = _expm_antihermitian(lvl.rot_log, ub) @ X[..., :a, :]
        done = u >= 1
        if np.any(done):
            Xd = X[done]
            Xd[..., :, c] = 0
            Xd[..., c, :] = 0
            Xd[..., c, c] = 1
            X[done] = Xd
        return X

    def apply(self, X, index, s):
        """C(X, s): pointwise contraction with parameter ``s`` (scaled by the weights)."""
        s = np.broadcast_to(np.asarray(s, dtype=float), X.shape[:-2])
        if self.weights is not None:
            wt = self.weights[tuple(np.moveaxis(np.asarray(index) % self.grid.n, -1, 0))]
            s = s * wt
        det0 = np.linalg.det(X)
        L = self.n_levels
        for j, lvl in enumerate(self.levels):
            X = self._apply_level(X, lvl, smoothstep(s * L - j))
        if L:
            X = X.copy()
            X[..., :, 0] *= (det0 / np.linalg.det(X))[..., None]
        return X


def _min_distances(cand, pts, chunk=256):
    out = np.empty(cand.shape[0])
    for i in range(0, cand.shape[0], chunk):
        c = cand[i:i + chunk]
        d2 = (np.sum(np.abs(c) ** 2, 1)[:, None] + np.sum(np.abs(pts) ** 2, 1)[None, :]
              - 2 * np.real(np.conj(c) @ pts.T))
        out[i:i + chunk] = np.sqrt(np.maximum(d2.min(axis=1), 0))
    return out


def _is_diagonal_form(values, tol=1e-12):
    m = values.shape[-1]
    if m == 1:
        return True
    off = values.copy()
    off[..., 0, 0] = 0
    return bool(np.max(np.abs(off - np.diag([0] + [1] * (m - 1)))) < tol)


def column_interpolation(field: UnitaryField, seed: int = 0, path: HomotopyPath | None = None,
                         stop: int = 1) -> HomotopyPath:
    """Deform ``field`` to diag(det, 1, ..., 1) (or to an SU(stop) block when ``stop`` > 1)."""
    path = HomotopyPath(field) if path is None else path
    cur = path.end
    if field.m <= stop or (stop == 1 and _is_diagonal_form(cur.values)):
        return path
    cc = ColumnContraction(cur, stop=stop, seed=seed)
    info = {"levels": [{"size": lv.size, "gap": lv.gap, "modulus": lv.modulus} for lv in cc.levels]}
    return path.then("column_interpolation", cc.apply, info)


# -- determinant unwinding -------------------------------------------------------------------


def unwind_determinant(field: UnitaryField, targets, path: HomotopyPath | None = None) -> HomotopyPath:
    """Deform det to exp(i sum_j n_j k_j) by rescaling row 0.

    ``targets`` are the required windings of det along each axis.
    """
    path = HomotopyPath(field) if path is None else path
    cur = path.end
    grid = cur.grid
    targets = tuple(int(t) for t in targets)
    det = np.linalg.det(cur.values)
    det = det / np.abs(det)
    for ax in range(grid.dim):
        w = one_degree(UnitaryField(grid, det[..., None, None]), ax)
        if w != targets[ax]:
            raise NonzeroWinding(ax + 1, w - targets[ax])
    k = grid.kpoints()
    g = det * np.exp(-1j * (k @ np.asarray(targets, dtype=float)))
    theta = lift_argument(g)
    arg0 = np.angle(g.flat[0])
    if np.max(np.abs(theta)) < 1e-15 and abs(arg0) < 1e-15:
        return path
    n = grid.n

    def fn(X, index, s):
        th = theta[tuple(np.moveaxis(np.asarray(index) % n, -1, 0))]
        r = np.exp(-1j * s * (2 * np.pi * th + arg0))
        X = X.copy()
        X[..., 0, :] *= r[..., None]
        return X

    return path.then("unwind_determinant", fn, {"targets": targets}, linear=True)


def log_chart_cut(field: UnitaryField, min_arc: float = LOG_CHART_ARC):
    """Centre of the widest arc of the unit circle free of eigenvalues of ``field``, or None.

    An arc qualifies when it is at least ``min_arc`` (radians) wide and its
    half-width exceeds the largest eigenvalue displacement between grid
    neighbours, so that no eigenvalue can cross the cut between samples.
    """
    phases = np.sort(np.angle(np.linalg.eigvals(field.values)).ravel())
    gaps = np.diff(np.concatenate([phases, phases[:1] + 2 * np.pi]))
    j = int(np.argmax(gaps))
    step = max(float(np.max(np.linalg.norm(field.shifted(ax, 1) - field.values, ord=2, axis=(-2, -1))))
               for ax in range(field.grid.dim))
    reach = 2 * np.arcsin(min(step / 2, 1.0))
    if gaps[j] < max(min_arc, 2 * reach):
        return None
    return float(phases[j] + gaps[j] / 2)


def log_chart(field: UnitaryField, cut: float, path: HomotopyPath | None = None) -> HomotopyPath:
    """Contract a field whose spectrum misses the ray at angle ``cut`` along U exp(-s log U).

    The logarithm is a matrix function, hence commutes with the diagonal laws,
    and the path is a one-parameter group in s ending at the identity.
    """
    path = HomotopyPath(field) if path is None else path
    centre = float(np.angle(-np.exp(1j * cut)))

    def fn(X, index, s):
        lam, V = np.linalg.eig(X)
        # argument of lam continuous on the circle minus the ray at ``cut``
        th = np.angle(lam * np.exp(-1j * centre)) + centre
        lam_s = lam * np.exp(-1j * s * th)
        Y = (V * lam_s[..., None, :]) @ np.linalg.inv(V)
        # polar clean-up removes the non-orthogonality of eig's vectors
        u, _, vh = np.linalg.svd(Y)
        return u @ vh

    return path.then("log_chart", fn, {"cut": cut}, linear=True)


# -- boundary normalization, SU(2) reduction and contraction ---------------------------------------


def boundary_collar(grid, width: int) -> np.ndarray:
    """Weight 1 on cell faces decaying linearly to 0 over ``width`` grid steps."""
    idx = np.indices(grid.shape)
    dist = np.minimum(idx, grid.n - idx).min(axis=0)
    return np.clip(1.0 - dist / max(width, 1), 0.0, 1.0)


def normalize_boundary(field: UnitaryField, seed: int = 0, width: int | None = None) -> HomotopyPath:
    """Deform an SU(m) field to one equal to the identity on every cell face."""
    path = HomotopyPath(field, n_samples=8)
    if field.m == 1 or np.max(np.abs(field.values - np.eye(field.m))) < 1e-15:
        return path
    widths = [width] if width else sorted({max(1, field.grid.n // 4), max(1, field.grid.n // 8), 1},
                                          reverse=True)
    last = None
    for w in widths:
        wt = boundary_collar(field.grid, w)
        try:
            cc = ColumnContraction(field, stop=1, weights=wt, seed=seed)
        except SardFailure as exc:
            last = exc
            continue
        boundary = wt >= 1.0

        def fn(X, index, s, cc=cc, m=field.m):
            out = cc.apply(X, index, s)
            if np.isscalar(s) and s >= 1.0:
                wt_here = cc.weights[tuple(np.moveaxis(np.asarray(index) % cc.grid.n, -1, 0))]
                on = wt_here >= 1.0
                res = np.max(np.abs(out[on] - np.eye(m))) if np.any(on) else 0.0
                if res >= 1e-6:
                    raise HomotopyFailure(f"boundary not normalized (residual {res:.1e})")
                out[on] = np.eye(m)
            return out

        path.then("normalize_boundary", fn, {"collar": w, "boundary_points": int(boundary.sum())})
        return path
    raise last


def reduce_to_su2(field: UnitaryField, seed: int = 0, path: HomotopyPath | None = None):
    """Deform an SU(m) field to eta (+) 1_{m-2}; returns (path, eta field)."""
    path = column_interpolation(field, seed=seed, path=path, stop=2)
    end = path.end
    return path, end.block(2)


def _sphere_distance_to_minus_one(eta):
    x = su2_coords(eta)
    return np.linalg.norm(x + np.array([1.0, 0, 0, 0]), axis=-1)


def _exp_chart_contraction(X, s):
    """exp(i (1 - s) n . tau) for X = exp(i n . tau) in SU(2), acting on the top 2x2 block."""
    x = su2_coords(X[..., :2, :2])
    ang = np.arccos(np.clip(x[..., 0], -1, 1))
    sn = np.sin(ang)
    safe = np.where(sn > 1e-12, sn, 1.0)
    ratio = np.where(sn > 1e-12, np.sin((1 - s) * ang) / safe, 1 - s)
    nv = ratio[..., None] * x[..., 1:]
    out = X.copy()
    out[..., :2, :2] = su2_from_coords(np.cos((1 - s) * ang), nv[..., 0], nv[..., 1], nv[..., 2])
    return out


def contract_identity(field: UnitaryField, seed: int = 0, path: HomotopyPath | None = None,
                      antipode_gap: float = ANTIPODE_GAP, retries: int = MAX_RETRIES,
                      check_degree: bool = True) -> HomotopyPath:
    """Contract an SU(2)-valued field (top block of ``field``) of 3-degree 0 to the identity."""
    path = HomotopyPath(field) if path is None else path
    cur = path.end
    eta = cur.values[..., :2, :2]
    if check_degree and cur.grid.dim == 3:
        deg, _ = su2_degree(cur.block(2))
        if deg != 0:
            raise HomotopyFailure(f"3-degree {deg} obstructs contraction to the identity")
    if np.max(np.abs(cur.values - np.eye(cur.m))) < 1e-15:
        return path
    rng = np.random.default_rng(seed)
    diagonal_only = cur.law_tag != "periodic"
    rot = np.eye(2, dtype=complex)
    for attempt in range(retries + 1):
        if np.min(_sphere_distance_to_minus_one(rot @ eta)) > antipode_gap:
            break
        if diagonal_only:
            ph = np.exp(2j * np.pi * rng.random())
            rot = np.diag([ph, np.conj(ph)])
        else:
            rot = scipy.stats.unitary_group.rvs(2, random_state=rng)
            rot = rot / np.sqrt(np.linalg.det(rot))
    else:
        raise AntipodeStuck(f"image of the field stays within {antipode_gap} of -1 after "
                            f"{retries} random rotations")
    if attempt:
        log_rot = _unitary_log(rot)
        full = np.zeros((cur.m, cur.m), dtype=complex)
        full[:2, :2] = log_rot

        def rotate(X, index, s):
            return _expm_antihermitian(full, np.broadcast_to(s, X.shape[:-2])) @ X

        path.then("antipode_rotation", rotate, {"attempts": attempt})
    path.then("exp_chart_contraction", lambda X, index, s: _exp_chart_contraction(X, s),
              {"min_antipode_distance": float(np.min(_sphere_distance_to_minus_one(rot @ eta)))})
    return path


def contract_to_eta(field: UnitaryField, degree: int, seed: int = 0,
                    path: HomotopyPath | None = None) -> HomotopyPath:
    """Deform eta (+) 1 with 3-degree ``degree`` to eta4d(degree) (+) 1.

    Contracts zeta = eta eta4d(degree)^-1 (degree 0) and carries the fixed
    factor along.
    """
    path = HomotopyPath(field) if path is None else path
    if degree == 0:
        return contract_identity(field, seed=seed, path=path)
    cur = path.end
    grid, n, m = cur.grid, cur.grid.n, cur.m
    ref = eta4d(grid, degree)
    ref_inv = dagger(ref)
    zeta = cur.values.copy()
    zeta[..., :2, :2] = cur.values[..., :2, :2] @ ref_inv
    zfield = UnitaryField(grid, zeta, cur.laws)
    deg, _ = su2_degree(zfield.block(2))
    if deg != 0:
        raise HomotopyFailure(f"residual 3-degree {deg} after removing the reference field")
    zpath = contract_identity(zfield, seed=seed, check_degree=False)

    def lift(stage):
        def fn(X, index, s):
            sl = tuple(np.moveaxis(np.asarray(index) % n, -1, 0))
            Z = X.copy()
            Z[..., :2, :2] = X[..., :2, :2] @ ref_inv[sl]
            Z = stage.fn(Z, index, s)
            Z[..., :2, :2] = Z[..., :2, :2] @ ref[sl]
            return Z
        return fn

    for st in zpath.stages:
        path.then(st.name, lift(st), dict(st.info, reference_degree=degree))
    return path


# -- gauge fields ------------------------------------------------------------------------


def gauge_from_homotopy(path: HomotopyPath, n: int, end: np.ndarray | None = None) -> np.ndarray:
    """beta(k_1 = 2 pi i / n, k') = U(k')^-1 alpha_{i/n}(k') for i = 0..n.

    Result has shape ``(n + 1,) + base + (m, m)``; ``beta[0]`` is the identity
    and ``U beta[n]`` is the path end (replaced by ``end`` when given, e.g.
    an exact normal form the path end agrees with to rounding).
    """
    if n < 2:
        raise ValueError("gauge needs at least two samples along the transport axis")
    Uinv = dagger(path.start.values)
    beta = np.stack([Uinv @ path.evaluate(i / n) for i in range(n + 1)])
    beta[0] = np.eye(path.m)
    if end is not None:
        beta[n] = Uinv @ end
    return beta
