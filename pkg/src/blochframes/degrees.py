"""Unitary fields on tori, winding numbers, argument lifting and the 3-degree.

A :class:`UnitaryField` may be quasi-periodic: along axis ``j`` it obeys
``U(k + 2 pi e_j) = L_j(k)^-1 U(k) L_j(k)`` with a diagonal phase matrix
``L_j`` that does not depend on ``k_j`` and is periodic in the other axes.
Laws are stored as the diagonals of ``L_j`` sampled on the grid with axis
``j`` removed; ``None`` means periodic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .chern import ROUNDING_TOLERANCE, dagger, round_invariant
from .errors import GridTooCoarse, NonzeroWinding, RefineGrid
from .kgrid import KGrid


@dataclass
class UnitaryField:
    grid: KGrid
    values: np.ndarray
    laws: list = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.laws is None:
            self.laws = [None] * self.grid.dim
        if len(self.laws) != self.grid.dim:
            raise ValueError("one law entry per axis is required")
        if self.values.shape[: self.grid.dim] != self.grid.shape:
            raise ValueError("field values do not match the grid")

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    @property
    def law_tag(self) -> str:
        if all(self._trivial(j) for j in range(self.grid.dim)):
            return "periodic"
        return "pseudo-periodic"

    def _trivial(self, j) -> bool:
        law = self.laws[j]
        return law is None or np.allclose(law, 1.0, atol=1e-14)

    def with_values(self, values):
        return UnitaryField(self.grid, values, self.laws)

    def block(self, size: int):
        """Top-left ``size`` block, with laws restricted accordingly."""
        laws = [None if law is None else law[..., :size] for law in self.laws]
        return UnitaryField(self.grid, self.values[..., :size, :size], laws)

    def unitarity_residual(self) -> float:
        eye = np.eye(self.m)
        return float(np.max(np.abs(dagger(self.values) @ self.values - eye)))

    def law_phase(self, axis: int, power: np.ndarray) -> np.ndarray | None:
        """Diagonal of L_axis^power broadcast over the full grid (power varies along ``axis``)."""
        law = self.laws[axis]
        if law is None:
            return None
        law = np.expand_dims(law, axis)
        shape = [1] * self.grid.dim
        shape[axis] = -1
        return law ** np.reshape(power, shape + [1])

    def window(self, offset=None, pad: int = 1) -> np.ndarray:
        """Law-extended values on the index box ``offset - pad .. offset + n - 1 + pad``."""
        n, dim = self.grid.n, self.grid.dim
        offset = (0,) * dim if offset is None else tuple(offset)
        vals = self.values
        idx_lists = [np.arange(o - pad, o + n + pad) for o in offset]
        for ax, idx in enumerate(idx_lists):
            vals = np.take(vals, idx % n, axis=ax)
        for ax, idx in enumerate(idx_lists):
            if self._trivial(ax):
                continue
            q = idx // n
            if not np.any(q):
                continue
            law = self.laws[ax]
            # law is indexed by the other axes: take the same windows there
            lw = law
            others = [a for a in range(dim) if a != ax]
            for pos, a in enumerate(others):
                lw = np.take(lw, idx_lists[a] % n, axis=pos)
            lw = np.expand_dims(lw, ax)
            shape = [1] * dim
            shape[ax] = -1
            ph = lw ** np.reshape(q, shape + [1])
            vals = np.conj(ph)[..., :, None] * vals * ph[..., None, :]
        return vals

    def shifted(self, axis: int, step: int) -> np.ndarray:
        """U(k + step h e_axis) on the grid, using the law across the wrap."""
        w = self.window(pad=1)
        n = self.grid.n
        sl = [slice(1, n + 1)] * self.grid.dim
        sl[axis] = slice(1 + step, n + 1 + step)
        return w[tuple(sl)]


def winding_number(loop) -> int:
    """Winding of a closed loop of unit complex samples (last sample connects to the first).

    Raises RefineGrid when a single step turns by pi/2 or more.
    """
    f = np.asarray(loop, dtype=complex).ravel()
    steps = np.angle(np.roll(f, -1) / f)
    if np.max(np.abs(steps)) >= np.pi / 2:
        raise RefineGrid(f"winding aliased: phase step {np.max(np.abs(steps)):.3f} >= pi/2")
    return int(np.rint(np.sum(steps) / (2 * np.pi)))


def one_degree(field: UnitaryField, axis: int, base=None) -> int:
    """Winding of det U along ``axis`` through ``base`` (grid index tuple)."""
    base = (0,) * field.grid.dim if base is None else tuple(base)
    sl = tuple(slice(None) if a == axis else base[a] for a in range(field.grid.dim))
    det = np.linalg.det(field.values[sl])
    return winding_number(det / np.abs(det))


def lift_argument(f: np.ndarray, base=None) -> np.ndarray:
    """Continuous periodic theta with f = exp(2 pi i theta) f(base) and theta(base) = 0.

    ``f`` is a scalar unit field on a grid of any dimension (array of shape
    ``(n,) * b``). Every axis must carry zero winding.
    """
    f = np.asarray(f, dtype=complex)
    dim = f.ndim
    base = (0,) * dim if base is None else tuple(base)
    g = np.roll(f / f[base], shift=[-b for b in base], axis=tuple(range(dim)))
    g = g / np.abs(g)
    for ax in range(dim):
        steps = np.angle(np.roll(g, -1, axis=ax) / g)
        if np.max(np.abs(steps)) >= np.pi / 2:
            raise RefineGrid(f"argument lift aliased along axis {ax}")
        w = np.rint(np.sum(steps, axis=ax) / (2 * np.pi)).astype(int)
        if np.any(w != 0):
            raise NonzeroWinding(ax + 1, int(w.flat[np.argmax(np.abs(w))]))
    theta = np.zeros(g.shape)
    for ax in range(dim):
        # fill the sub-grid spanned by axes 0..ax (later axes at 0), starting from axes 0..ax-1
        sub_sl = tuple(_prefix_slice(dim, ax))
        sub = g[sub_sl]
        st = np.angle(np.roll(sub, -1, axis=ax) / sub)
        st = np.take(st, np.arange(sub.shape[ax] - 1), axis=ax)
        start = np.zeros(np.take(sub, [0], axis=ax).shape)
        acc = np.concatenate([start, np.cumsum(st, axis=ax)], axis=ax) / (2 * np.pi)
        if ax > 0:
            acc = acc + np.expand_dims(theta[tuple(_prefix_slice(dim, ax - 1))], ax)
        theta[sub_sl] = acc
    jumps = max((np.max(np.abs(np.roll(theta, -1, axis=a) - theta)) for a in range(dim)), default=0.0)
    if jumps >= 0.25:
        raise RefineGrid(f"lifted argument jumps by {jumps:.3f} between neighbours")
    return np.roll(theta, shift=list(base), axis=tuple(range(dim)))


def _prefix_slice(dim, last):
    return [slice(None) if a <= last else 0 for a in range(dim)]


def maurer_cartan_components(field: UnitaryField, offset=None, order: int = 4) -> list:
    """U^-1 d_mu U (centered, law-aware) on the cell shifted by ``offset``."""
    pad = order // 2
    w = field.window(offset, pad=pad)
    n, dim, h = field.grid.n, field.grid.dim, field.grid.h

    def shifted(mu, s):
        sl = [slice(pad, n + pad)] * dim
        sl[mu] = slice(pad + s, n + pad + s)
        return w[tuple(sl)]

    U = shifted(0, 0)
    out = []
    for mu in range(dim):
        d1 = shifted(mu, 1) - shifted(mu, -1)
        if order == 2:
            dU = d1 / (2 * h)
        else:
            dU = (8 * d1 - (shifted(mu, 2) - shifted(mu, -2))) / (12 * h)
        out.append(dagger(U) @ dU)
    return out


def three_degree_density(field: UnitaryField, offset=None, order: int = 4) -> np.ndarray:
    """(1/24 pi^2) times the dk1 dk2 dk3 coefficient of Tr[(U^-1 dU)^3]."""
    if field.grid.dim != 3:
        raise ValueError("the 3-degree needs a field on a 3-torus")
    X = maurer_cartan_components(field, offset, order)
    acc = np.zeros(field.grid.shape, dtype=complex)
    for perm in itertools.permutations(range(3)):
        sign = _perm_sign(perm)
        acc += sign * np.trace(X[perm[0]] @ X[perm[1]] @ X[perm[2]], axis1=-2, axis2=-1)
    return acc / (24 * np.pi**2)


def three_degree(field: UnitaryField, tol: float = ROUNDING_TOLERANCE, offset=None):
    """(raw, integer) 3-degree of a unitary field on the 3-torus (cell shifted by ``offset``)."""
    dens = three_degree_density(field, offset)
    raw = float(np.real(np.sum(dens)) * field.grid.h**3)
    return raw, round_invariant(raw, tol, "3-degree")


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


# -- reference fields -------------------------------------------------------------

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def su2_from_coords(x0, x1, x2, x3) -> np.ndarray:
    """x0 + i (x1 t1 + x2 t2 + x3 t3): the unit 3-sphere realized inside SU(2)."""
    return (np.asarray(x0)[..., None, None] * PAULI[0]
            + 1j * (np.asarray(x1)[..., None, None] * PAULI[1]
                    + np.asarray(x2)[..., None, None] * PAULI[2]
                    + np.asarray(x3)[..., None, None] * PAULI[3]))


def su2_coords(U: np.ndarray) -> np.ndarray:
    """Inverse of :func:`su2_from_coords` (real 4-vector per matrix)."""
    x0 = 0.5 * np.trace(U, axis1=-2, axis2=-1).real
    xs = [0.5 * np.trace(PAULI[j] @ U, axis1=-2, axis2=-1).imag for j in (1, 2, 3)]
    return np.stack([x0] + xs, axis=-1)


def eta4d(grid: KGrid, n: int) -> np.ndarray:
    """SU(2) field on the 3-cell equal to the identity on its boundary, with 3-degree ``n``.

    The cell is mapped to the 3-sphere by a radial profile (identity outside
    the inscribed ball, minus identity at the centre); then the (x0, x1)
    plane is wound ``n`` times: r cos(n phi) + i (r sin(n phi) t1 + x2 t2 + x3 t3).
    """
    if grid.dim != 3:
        raise ValueError("eta4d lives on a 3-torus grid")
    y = (grid.kpoints() - np.pi) / np.pi
    rho = np.linalg.norm(y, axis=-1)
    ang = np.where(rho < 1, np.pi * np.cos(0.5 * np.pi * np.minimum(rho, 1)) ** 2, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(rho[..., None] > 0, y / rho[..., None], 0.0)
    x0 = np.cos(ang)
    xv = np.sin(ang)[..., None] * unit
    r = np.hypot(x0, xv[..., 0])
    phi = np.arctan2(xv[..., 0], x0)
    # orientation chosen so that n = 1 has 3-degree +1 in the ascending-axis convention
    return su2_from_coords(r * np.cos(n * phi), -r * np.sin(n * phi), -xv[..., 1], -xv[..., 2])


# -- simplicial 3-degree -------------------------------------------------------------

# Freudenthal split of the unit cube: one tetrahedron per axis permutation
_KUHN = [(perm, _perm_sign(perm)) for perm in itertools.permutations(range(3))]
# every simplex must sit inside an open hemisphere (about its vertex mean) with this margin
HEMISPHERE_MARGIN = 0.05
# |det| of four unit vertex vectors below which a simplex counts as collapsed
DEGENERATE_SIMPLEX = 1e-12
_PROBES = np.array([
    [0.3611, -0.5203, 0.6437, -0.4280],
    [-0.7012, 0.2219, 0.3348, 0.5904],
    [0.1875, 0.8391, -0.3120, -0.4026],
])


def lattice_three_degree_report(field: UnitaryField, probes: np.ndarray | None = None) -> dict:
    """Signed preimage counts of regular values and the hemisphere margin of the worst simplex.

    Every grid cube is split into six tetrahedra whose vertex values span
    spherical simplices on the unit 3-sphere; the count for a regular value is
    the signed number of simplices containing it.
    """
    if field.grid.dim != 3 or field.m != 2:
        raise ValueError("the lattice 3-degree needs an SU(2) field on a 3-torus")
    n = field.grid.n
    x = su2_coords(field.window(pad=1)[1:, 1:, 1:])
    probes = _PROBES if probes is None else np.asarray(probes, dtype=float)
    probes = probes / np.linalg.norm(probes, axis=1, keepdims=True)
    counts = np.zeros(len(probes), dtype=int)
    base = x[:n, :n, :n]
    margin = 1.0
    for perm, sign in _KUHN:
        corner = np.zeros(3, dtype=int)
        verts = [base]
        for ax in perm:
            corner[ax] = 1
            verts.append(x[corner[0]:corner[0] + n, corner[1]:corner[1] + n, corner[2]:corner[2] + n])
        X = np.stack(verts, axis=-1)
        centre = X.sum(axis=-1)
        centre /= np.maximum(np.linalg.norm(centre, axis=-1, keepdims=True), 1e-300)
        margin = min(margin, float(np.min(np.einsum("...ia,...i->...a", X, centre))))
        det = np.linalg.det(X)
        sdet = np.sign(det)
        # collapsed simplices (constant patches) carry rounding-noise orientations
        live = np.abs(det) > DEGENERATE_SIMPLEX
        for p, y in enumerate(probes):
            # y lies in the positive cone iff replacing any vertex by y keeps the orientation
            inside = live.copy()
            for a in range(4):
                Xa = X.copy()
                Xa[..., a] = y
                inside &= np.sign(np.linalg.det(Xa)) == sdet
            counts[p] += sign * int(np.sum(sdet[inside]))
    return {"counts": counts.tolist(), "margin": margin}


def lattice_three_degree(field: UnitaryField, probes: np.ndarray | None = None,
                         strict: bool = True) -> int:
    """Exact 3-degree of an SU(2)-valued field on the 3-torus from signed preimage counts.

    ``strict`` additionally requires every simplex to sit inside an open
    hemisphere (the piecewise-geodesic interpolant is then well defined).
    """
    rep = lattice_three_degree_report(field, probes)
    counts = rep["counts"]
    if strict and rep["margin"] <= HEMISPHERE_MARGIN:
        raise GridTooCoarse(float(np.mean(counts)),
                            f"lattice 3-degree (simplex leaves its hemisphere, margin {rep['margin']:.2f})")
    if any(c != counts[0] for c in counts):
        raise GridTooCoarse(float(np.mean(counts)), "lattice 3-degree (regular values disagree)")
    return int(counts[0])


def su2_degree(field: UnitaryField) -> tuple:
    """Integer 3-degree of an SU(2) field for construction purposes, plus diagnostics.

    The integer is the lattice count (regular values must agree); the
    Riemann-sum raw value and the hemisphere margin are reported alongside.
    """
    rep = lattice_three_degree_report(field)
    counts = rep["counts"]
    if any(c != counts[0] for c in counts):
        raise GridTooCoarse(float(np.mean(counts)), "lattice 3-degree (regular values disagree)")
    raw = float(np.real(np.sum(three_degree_density(field))) * field.grid.h**3)
    return int(counts[0]), {"lattice": int(counts[0]), "riemann_raw": raw, "margin": rep["margin"]}
