"""Regular torus grids and a small algebra of grid-sampled differential forms.

Forms store only ordered index sets: a p-form is a dict mapping sorted
axis tuples ``I`` to coefficient arrays, so that the form reads
``sum_I w_I dk_I``. Coefficients are either scalars per k-point or square
matrices per k-point.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KGrid:
    """Uniform grid with ``n`` points per axis on the ``dim``-torus."""

    dim: int
    n: int

    def __post_init__(self):
        if not 1 <= self.dim <= 4:
            raise ValueError(f"grid dimension must be in 1..4, got {self.dim}")
        if self.n < 2:
            raise ValueError(f"need at least 2 points per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 2 * np.pi / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def axis_values(self) -> np.ndarray:
        return self.h * np.arange(self.n)

    def kpoints(self) -> np.ndarray:
        """Array of shape ``shape + (dim,)`` holding every k-point."""
        axes = np.meshgrid(*([self.axis_values] * self.dim), indexing="ij")
        return np.stack(axes, axis=-1)

    def k_of(self, index) -> np.ndarray:
        # unwrapped: index n maps to 2*pi, not back to 0
        return self.h * np.asarray(index, dtype=float)

    def wrap(self, index) -> tuple:
        return tuple(int(i) % self.n for i in index)

    def index_of(self, k) -> tuple:
        """Nearest grid index of a k-point, wrapped into the fundamental cell."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if k.shape != (self.dim,):
            raise ValueError(f"k-point must have {self.dim} components")
        return self.wrap(np.rint(k / self.h).astype(int))

    def negated_index_map(self) -> tuple:
        """Per-axis index permutation realizing k -> -k exactly."""
        return tuple((-np.arange(self.n)) % self.n for _ in range(self.dim))


def centered_diff(values: np.ndarray, axis: int, h: float, order: int = 2) -> np.ndarray:
    """Periodic centered difference along ``axis``.

    ``order=2`` is (f(k+h) - f(k-h)) / 2h; ``order=4`` is the five-point stencil.
    """
    d1 = np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)
    if order == 2:
        return d1 / (2 * h)
    if order == 4:
        d2 = np.roll(values, -2, axis=axis) - np.roll(values, 2, axis=axis)
        return (8 * d1 - d2) / (12 * h)
    raise ValueError("difference order must be 2 or 4")


def shuffle_sign(indices) -> int:
    """Sign of the permutation sorting ``indices``; 0 when an index repeats."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return 0
    sign = 1
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                sign = -sign
    return sign


def _mul(a, b, a_mat, b_mat):
    if a_mat and b_mat:
        return a @ b
    if a_mat:
        return a * b[..., None, None]
    if b_mat:
        return a[..., None, None] * b
    return a * b


class FormField:
    """Grid-sampled p-form with scalar or matrix coefficients.

    Parameters
    ----------
    grid : KGrid
    degree : int
        Form degree ``p``; must not exceed ``grid.dim``.
    comps : dict
        Maps sorted axis tuples (0-based) to arrays of shape
        ``grid.shape`` (scalar) or ``grid.shape + (m, m)`` (matrix).
        Missing index sets are zero.
    """

    def __init__(self, grid: KGrid, degree: int, comps: dict, matrix_size: int | None = None):
        if degree < 0 or degree > grid.dim:
            raise ValueError(f"degree {degree} out of range for a {grid.dim}-torus")
        self.grid = grid
        self.degree = degree
        clean = {}
        for key, val in comps.items():
            key = tuple(int(i) for i in key)
            if len(key) != degree or list(key) != sorted(set(key)) or (key and key[-1] >= grid.dim):
                raise ValueError(f"invalid ordered index set {key} for degree {degree}")
            val = np.asarray(val, dtype=complex)
            if val.shape[: grid.dim] != grid.shape:
                val = np.broadcast_to(val, grid.shape + val.shape).copy()
            clean[key] = val
        if matrix_size is None:
            shapes = {v.shape[grid.dim:] for v in clean.values()}
            if len(shapes) > 1:
                raise ValueError("inconsistent coefficient shapes")
            tail = shapes.pop() if shapes else ()
            matrix_size = tail[0] if tail else None
        self.matrix_size = matrix_size
        self.comps = clean

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zeros(cls, grid: KGrid, degree: int, matrix_size: int | None = None):
        return cls(grid, degree, {}, matrix_size=matrix_size)

    @classmethod
    def scalar0(cls, grid: KGrid, values):
        return cls(grid, 0, {(): values})

    @classmethod
    def dk(cls, grid: KGrid, axis: int):
        """The constant 1-form dk_axis."""
        return cls(grid, 1, {(axis,): np.ones(grid.shape, dtype=complex)})

    @property
    def is_matrix(self) -> bool:
        return self.matrix_size is not None

    def index_sets(self):
        return list(itertools.combinations(range(self.grid.dim), self.degree))

    def coeff(self, key) -> np.ndarray:
        key = tuple(key)
        if key in self.comps:
            return self.comps[key]
        tail = (self.matrix_size, self.matrix_size) if self.is_matrix else ()
        return np.zeros(self.grid.shape + tail, dtype=complex)

    def __getitem__(self, key):
        return self.coeff(key)

    # -- algebra ----------------------------------------------------------------

    def _check_same(self, other):
        if not isinstance(other, FormField) or other.grid != self.grid:
            raise ValueError("forms live on different grids")

    def __add__(self, other):
        self._check_same(other)
        if other.degree != self.degree:
            raise ValueError("cannot add forms of different degree")
        out = {k: v.copy() for k, v in self.comps.items()}
        for k, v in other.comps.items():
            out[k] = out[k] + v if k in out else v.copy()
        size = self.matrix_size if self.is_matrix else other.matrix_size
        return FormField(self.grid, self.degree, out, matrix_size=size)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return FormField(self.grid, self.degree, {k: c * v for k, v in self.comps.items()},
                         matrix_size=self.matrix_size)

    def apply(self, fn, matrix_size=None):
        """Apply ``fn`` to every coefficient array (e.g. a pointwise conjugation)."""
        return FormField(self.grid, self.degree, {k: fn(v) for k, v in self.comps.items()},
                         matrix_size=matrix_size if matrix_size is not None else self.matrix_size)

    def wedge(self, other):
        """Wedge product; matrix coefficients multiply pointwise in order."""
        self._check_same(other)
        deg = self.degree + other.degree
        if deg > self.grid.dim:
            raise ValueError(f"wedge degree {deg} exceeds dimension {self.grid.dim}")
        out = {}
        for I, a in self.comps.items():
            for J, b in other.comps.items():
                sign = shuffle_sign(I + J)
                if sign == 0:
                    continue
                K = tuple(sorted(I + J))
                term = _mul(a, b, self.is_matrix, other.is_matrix)
                out[K] = out[K] + sign * term if K in out else sign * term
        size = self.matrix_size if self.is_matrix else other.matrix_size
        return FormField(self.grid, deg, out, matrix_size=size)

    def __xor__(self, other):
        return self.wedge(other)

    def trace(self):
        if not self.is_matrix:
            return self
        return FormField(self.grid, self.degree,
                         {k: np.trace(v, axis1=-2, axis2=-1) for k, v in self.comps.items()})

    def d(self):
        """Exterior derivative with periodic centered differences."""
        if self.degree >= self.grid.dim:
            raise ValueError("exterior derivative of a top-degree form")
        out = {}
        for I, w in self.comps.items():
            for mu in range(self.grid.dim):
                if mu in I:
                    continue
                sign = (-1) ** sum(1 for i in I if i < mu)
                K = tuple(sorted(I + (mu,)))
                term = sign * centered_diff(w, mu, self.grid.h)
                out[K] = out[K] + term if K in out else term
        return FormField(self.grid, self.degree + 1, out, matrix_size=self.matrix_size)

    def integrate(self, I, base=None) -> complex:
        """Riemann sum of the (traced) I-coefficient over the sub-torus through ``base``.

        ``base`` is a grid index tuple (ints) or a k-point (floats); it fixes
        the axes not in ``I``. Defaults to the origin.
        """
        I = tuple(sorted(int(i) for i in I))
        if len(I) != self.degree:
            raise ValueError(f"index set {I} does not match degree {self.degree}")
        coef = self.coeff(I)
        if self.is_matrix:
            coef = np.trace(coef, axis1=-2, axis2=-1)
        base_idx = _base_index(self.grid, base)
        sl = tuple(slice(None) if ax in I else base_idx[ax] for ax in range(self.grid.dim))
        return complex(self.grid.h ** len(I) * np.sum(coef[sl]))

    def max_abs(self) -> float:
        if not self.comps:
            return 0.0
        return max(float(np.max(np.abs(v))) for v in self.comps.values())

    def to_csv(self, path, I=None):
        """Write k-point columns plus real/imag coefficient columns (scalar forms only)."""
        if self.is_matrix:
            raise ValueError("CSV dump supports scalar forms only")
        I = tuple(I) if I is not None else (self.index_sets()[0] if self.degree else ())
        kp = self.grid.kpoints().reshape(-1, self.grid.dim)
        vals = self.coeff(I).reshape(-1)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"k{j + 1}" for j in range(self.grid.dim)] + ["re", "im"])
            for kk, v in zip(kp, vals):
                wr.writerow([f"{x:.12g}" for x in kk] + [f"{v.real:.17g}", f"{v.imag:.17g}"])


def _base_index(grid: KGrid, base):
    if base is None:
        return (0,) * grid.dim
    arr = np.asarray(base)
    if arr.shape != (grid.dim,):
        raise ValueError(f"base point must have {grid.dim} components")
    if np.issubdtype(arr.dtype, np.integer):
        return grid.wrap(arr)
    return grid.index_of(arr)
