"""Tight-binding Bloch Hamiltonians, spectral projectors and occupied eigenframes."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GapClosed, ValidationError
from .kgrid import KGrid

GAP_THRESHOLD = 1e-8

SIGMA0 = np.eye(2, dtype=complex)
SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)

# Dirac matrices for dirac4d: five mutually anticommuting Hermitian 4x4
# matrices squaring to one. GAMMA[0] is the mass term.
GAMMA = (
    np.kron(SIGMA3, SIGMA0),
    np.kron(SIGMA1, SIGMA1),
    np.kron(SIGMA1, SIGMA2),
    np.kron(SIGMA1, SIGMA3),
    np.kron(SIGMA2, SIGMA0),
)

# Mass of dirac4d used by default: gapped, with nonzero second Chern number.
# Located by a gap scan plus the curvature integral (see tests/test_models.py
# and tests/test_chern.py for the frozen values).
DIRAC4D_PINNED_MASS = -3.0
DIRAC4D_TRIVIAL_MASS = 5.0


@dataclass
class ModelSpec:
    """Bloch Hamiltonian ``H(k) = sum_R exp(i k.R) M_R`` with ``occupied`` filled bands."""

    dim: int
    norb: int
    hoppings: list
    occupied: int
    params: dict = field(default_factory=dict)
    name: str = "custom"

    def __post_init__(self):
        merged = {}
        for R, M in self.hoppings:
            R = tuple(int(r) for r in R)
            M = np.asarray(M, dtype=complex)
            if len(R) != self.dim:
                raise ValidationError(f"lattice vector {R} has wrong length for dim={self.dim}")
            if M.shape != (self.norb, self.norb):
                raise ValidationError(f"hopping at R={R} has shape {M.shape}, expected {(self.norb,) * 2}")
            merged[R] = merged[R] + M if R in merged else M.copy()
        self.hoppings = sorted(merged.items())
        self.validate()

    def validate(self):
        if not 1 <= self.dim <= 4:
            raise ValidationError(f"dim must be in 1..4, got {self.dim}")
        if not 1 <= self.occupied < self.norb:
            raise ValidationError(f"need 1 <= occupied < norb, got occupied={self.occupied}, norb={self.norb}")
        table = dict(self.hoppings)
        scale = max((np.max(np.abs(M)) for M in table.values()), default=1.0)
        for R, M in self.hoppings:
            partner = table.get(tuple(-r for r in R))
            if partner is None or np.max(np.abs(partner - M.conj().T)) > 1e-12 * max(scale, 1.0):
                raise ValidationError(f"missing Hermitian partner (-R, M^dagger) for R={list(R)}")

    def to_dict(self) -> dict:
        if self.name != "custom":
            return {"name": self.name, "params": dict(self.params)}
        return {
            "dim": self.dim,
            "norb": self.norb,
            "occupied": self.occupied,
            "hoppings": [{"R": list(R), "re": M.real.tolist(), "im": M.imag.tolist()}
                         for R, M in self.hoppings],
        }


def _with_partners(dim, terms):
    """Turn {R: M} for half the lattice vectors into a full Hermitian hopping list."""
    hops = []
    for R, M in terms.items():
        hops.append((R, M))
        negR = tuple(-r for r in R)
        if negR != R:
            hops.append((negR, M.conj().T))
    return hops


def _sin_cos_model(dim, sin_terms, mass_matrix, mass, cos_weights):
    """Hamiltonian sum_j sin k_j A_j + (mass + sum_j w_j cos k_j) B."""
    terms = {(0,) * dim: mass * mass_matrix}
    for j in range(dim):
        R = tuple(1 if i == j else 0 for i in range(dim))
        M = np.zeros_like(mass_matrix)
        if sin_terms[j] is not None:
            M = M + sin_terms[j] / 2j
        M = M + cos_weights[j] * mass_matrix / 2
        if np.any(M):
            terms[R] = M
    return _with_partners(dim, terms)


def flat1d(a: float = 2.0) -> ModelSpec:
    """Two-band chain sin k s1 + (a + cos k) s3, gapped for |a| != 1."""
    hops = _sin_cos_model(1, [SIGMA1], SIGMA3, a, [1.0])
    return ModelSpec(1, 2, hops, 1, {"a": a}, "flat1d")


def qwz(u: float = 1.0) -> ModelSpec:
    """sin k1 s1 + sin k2 s2 + (u + cos k1 + cos k2) s3."""
    hops = _sin_cos_model(2, [SIGMA1, SIGMA2], SIGMA3, u, [1.0, 1.0])
    return ModelSpec(2, 2, hops, 1, {"u": u}, "qwz")


def weak3d(u: float = 1.0, t: float = 0.3) -> ModelSpec:
    """QWZ layers with a weak cos k3 mass modulation along the stacking axis."""
    hops = _sin_cos_model(3, [SIGMA1, SIGMA2, None], SIGMA3, u, [1.0, 1.0, t])
    return ModelSpec(3, 2, hops, 1, {"u": u, "t": t}, "weak3d")


def weak4d(u: float = 1.0, t: float = 0.3, s: float = 0.2) -> ModelSpec:
    """weak3d with a further trivial fourth axis."""
    hops = _sin_cos_model(4, [SIGMA1, SIGMA2, None, None], SIGMA3, u, [1.0, 1.0, t, s])
    return ModelSpec(4, 2, hops, 1, {"u": u, "t": t, "s": s}, "weak4d")


def dirac4d(M: float = DIRAC4D_PINNED_MASS) -> ModelSpec:
    """sum_j sin k_j G^j + (M + sum_j cos k_j) G^0 with two occupied bands."""
    hops = _sin_cos_model(4, list(GAMMA[1:]), GAMMA[0], M, [1.0] * 4)
    return ModelSpec(4, 4, hops, 2, {"M": M}, "dirac4d")


BUILTINS = {
    "flat1d": flat1d,
    "qwz": qwz,
    "weak3d": weak3d,
    "weak4d": weak4d,
    "dirac4d": dirac4d,
}


def builtin(name: str, params: dict | None = None) -> ModelSpec:
    if name not in BUILTINS:
        raise ValidationError(f"unknown built-in model {name!r}; choose from {sorted(BUILTINS)}")
    try:
        return BUILTINS[name](**{k: float(v) for k, v in (params or {}).items()})
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {name}: {exc}") from None


def model_from_dict(data: dict) -> ModelSpec:
    if "name" in data:
        return builtin(data["name"], data.get("params", {}))
    try:
        hops = []
        for entry in data["hoppings"]:
            re = np.asarray(entry["re"], dtype=float)
            im = np.asarray(entry.get("im", np.zeros_like(re)), dtype=float)
            hops.append((tuple(entry["R"]), re + 1j * im))
        return ModelSpec(int(data["dim"]), int(data["norb"]), hops, int(data["occupied"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed model JSON: {exc}") from None


def load_model(path) -> ModelSpec:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(data)


# -- evaluation -----------------------------------------------------------------


def eval_hamiltonian(model: ModelSpec, k) -> np.ndarray:
    """H(k) for a single k-point or a batch of shape ``(..., dim)``."""
    k = np.asarray(k, dtype=float)
    if k.ndim == 0 or k.shape[-1] != model.dim:
        raise ValueError(f"k must have {model.dim} components, got shape {k.shape}")
    H = np.zeros(k.shape[:-1] + (model.norb, model.norb), dtype=complex)
    for R, M in model.hoppings:
        phase = np.exp(1j * (k @ np.asarray(R, dtype=float)))
        H += phase[..., None, None] * M
    return H


def fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-modulus entry is real positive.

    Ties (within 1e-10 of the maximum) go to the lowest index.
    """
    mod = np.abs(vecs)
    top = mod.max(axis=-2, keepdims=True)
    idx = np.argmax(mod >= top - 1e-10, axis=-2)
    pivot = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    return vecs * (pivot.conj() / np.abs(pivot))


def _eig_block(H, m, kpts, threshold=GAP_THRESHOLD):
    E, V = np.linalg.eigh(H)
    gaps = E[:, m] - E[:, m - 1]
    bad = np.argmin(gaps)
    if gaps[bad] <= threshold:
        raise GapClosed(kpts[bad], gaps[bad])
    frame = fix_phases(V[:, :, :m])
    return E, frame


def spectral_projector(model: ModelSpec, k):
    """Projector onto the ``occupied`` lowest bands, phase-fixed frame and local gap."""
    k = np.asarray(k, dtype=float)
    H = eval_hamiltonian(model, k)[None]
    E, frame = _eig_block(H, model.occupied, k[None])
    frame = frame[0]
    P = frame @ frame.conj().T
    return P, frame, float(E[0, model.occupied] - E[0, model.occupied - 1])


@dataclass
class GapInfo:
    mu: float
    g: float
    min_gap_over_grid: float
    argmin_k: tuple

    def to_dict(self):
        return {"mu": self.mu, "g": self.g, "min_gap_over_grid": self.min_gap_over_grid,
                "argmin_k": list(self.argmin_k)}


@dataclass
class ProjectorField:
    """Projectors and phase-fixed occupied eigenframes on every grid point."""

    grid: KGrid
    P: np.ndarray
    frame: np.ndarray

    @property
    def rank(self) -> int:
        return self.frame.shape[-1]

    @property
    def norb(self) -> int:
        return self.P.shape[-1]

    @classmethod
    def from_projectors(cls, grid: KGrid, P: np.ndarray, rank: int | None = None):
        """Build a field from projector matrices alone (frames from their eigenvectors)."""
        P = np.asarray(P, dtype=complex)
        P = 0.5 * (P + np.conj(np.swapaxes(P, -1, -2)))
        if rank is None:
            rank = int(round(np.trace(P.reshape(-1, *P.shape[-2:])[0]).real))
        _, V = np.linalg.eigh(P)
        frame = fix_phases(V[..., :, ::-1][..., :rank])
        return cls(grid, P, frame)

    @classmethod
    def from_frames(cls, grid: KGrid, frame: np.ndarray):
        frame = np.asarray(frame, dtype=complex)
        return cls(grid, frame @ np.conj(np.swapaxes(frame, -1, -2)), frame)

    def residuals(self) -> dict:
        P, F = self.P, self.frame
        Ph = np.conj(np.swapaxes(P, -1, -2))
        return {
            "idempotency": float(np.max(np.abs(P @ P - P))),
            "hermiticity": float(np.max(np.abs(P - Ph))),
            "trace": float(np.max(np.abs(np.trace(P, axis1=-2, axis2=-1) - self.rank))),
            "frame_span": float(np.max(np.abs(P @ F - F))),
            "frame_orthonormality": float(np.max(np.abs(
                np.conj(np.swapaxes(F, -1, -2)) @ F - np.eye(self.rank)))),
        }


def build_projector_field(model: ModelSpec, grid: KGrid, threads: int = 1,
                          gap_threshold: float = GAP_THRESHOLD):
    """Sample P(k) and the occupied eigenframe over ``grid``; raises GapClosed at a gap <= ``gap_threshold``."""
    if grid.dim != model.dim:
        raise ValueError(f"grid dimension {grid.dim} != model dimension {model.dim}")
    kp = grid.kpoints().reshape(-1, grid.dim)
    m = model.occupied
    chunks = np.array_split(np.arange(len(kp)), max(1, threads) * 4 if threads > 1 else 1)

    def work(ix):
        H = eval_hamiltonian(model, kp[ix])
        return _eig_block(H, m, kp[ix], gap_threshold)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(ix) for ix in chunks]
    E = np.concatenate([p[0] for p in parts])
    frame = np.concatenate([p[1] for p in parts])
    frame = frame.reshape(grid.shape + frame.shape[1:])
    P = frame @ np.conj(np.swapaxes(frame, -1, -2))
    local = E[:, m] - E[:, m - 1]
    arg = int(np.argmin(local))
    lower, upper = E[:, m - 1].max(), E[:, m].min()
    if upper > lower:
        mu, g = 0.5 * (upper + lower), 0.5 * (upper - lower)
    else:
        mu, g = 0.5 * (E[arg, m] + E[arg, m - 1]), 0.5 * local[arg]
    info = GapInfo(float(mu), float(g), float(local[arg]), tuple(float(x) for x in kp[arg]))
    return ProjectorField(grid, P, frame), info
