"""Exact symmetric 3x3 matrix algebra for diffusion tensors.

All functions are vectorized over leading batch dimensions: a "matrix"
argument has shape (..., 3, 3) and a "vecs" argument has shape (..., 6).
The vecs convention stores the lower triangle row by row,

    vecs(A) = (a11, a21, a22, a31, a32, a33),

so off-diagonal entries appear once in the vector but twice in the
matrix; ``SYM_WEIGHTS`` carries the multiplicities needed to evaluate
Frobenius norms directly on vecs vectors.

Eigendecomposition uses the trigonometric closed form for the
characteristic cubic, with a cyclic-Jacobi fallback whenever the
cross-product eigenvector construction loses accuracy (nearly degenerate
spectra).  No LAPACK call sits in the hot loop, and results are
deterministic across platforms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateTensor, NotPositiveDefinite

# Multiplicity of each vecs component in the full symmetric matrix.
SYM_WEIGHTS = np.array([1.0, 2.0, 1.0, 2.0, 2.0, 1.0])

# Relative floor for accepting a matrix as positive definite.
SPD_RTOL = 1e-12

# exp(x) overflows float64 just above this.
_EXP_OVERFLOW = 709.0

_ROWS = np.array([0, 1, 1, 2, 2, 2])
_COLS = np.array([0, 0, 1, 0, 1, 2])


def vecs(mat: NDArray[np.float64]) -> NDArray[np.float64]:
    """Half-vectorize symmetric matrices: (..., 3, 3) -> (..., 6)."""
    mat = np.asarray(mat, dtype=float)
    return mat[..., _ROWS, _COLS]


def ivecs(vec: NDArray[np.float64]) -> NDArray[np.float64]:
    """Rebuild symmetric matrices from vecs vectors: (..., 6) -> (..., 3, 3)."""
    vec = np.asarray(vec, dtype=float)
    out = np.empty(vec.shape[:-1] + (3, 3), dtype=float)
    out[..., _ROWS, _COLS] = vec
    out[..., _COLS, _ROWS] = vec
    return out


def sym_vec_norm2(vec: NDArray[np.float64]) -> NDArray[np.float64]:
    """Squared Frobenius norm of the symmetric matrix a vecs vector encodes."""
    vec = np.asarray(vec, dtype=float)
    return vec * vec @ SYM_WEIGHTS


def _jacobi_eig3(mats: NDArray[np.float64], sweeps: int = 15):
    """Cyclic Jacobi diagonalization of a stack of symmetric 3x3 matrices."""
    a = np.array(mats, dtype=float)
    v = np.broadcast_to(np.eye(3), a.shape).copy()
    norm = np.linalg.norm(a, axis=(-2, -1), keepdims=False)
    for _ in range(sweeps):
        off = a[..., 0, 1] ** 2 + a[..., 0, 2] ** 2 + a[..., 1, 2] ** 2
        if np.all(off <= (1e-30 + 1e-32 * norm * norm)):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[..., p, q]
            small = np.abs(apq) <= 1e-300
            tau = np.where(small, 0.0, (a[..., q, q] - a[..., p, p]) / np.where(small, 1.0, 2.0 * apq))
            tau_c = np.clip(tau, -1e150, 1e150)
            t = np.sign(tau) / (np.abs(tau_c) + np.sqrt(1.0 + tau_c * tau_c))
            t = np.where(tau == 0.0, 1.0, t)  # sign(0) = 0 would stall the zeroing
            t = np.where(small, 0.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rot = np.broadcast_to(np.eye(3), a.shape).copy()
            rot[..., p, p] = c
            rot[..., q, q] = c
            rot[..., p, q] = s
            rot[..., q, p] = -s
            a = np.swapaxes(rot, -1, -2) @ a @ rot
            v = v @ rot
    w = np.stack([a[..., 0, 0], a[..., 1, 1], a[..., 2, 2]], axis=-1)
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    return w, v


def sym_eigvals3(mats: NDArray[np.float64]) -> NDArray[np.float64]:
    """Eigenvalues of symmetric 3x3 matrices, sorted descending, (..., 3).

    Closed-form roots of the characteristic cubic.  The trigonometric
    formula loses absolute accuracy (~sqrt(eps) * spread) when exactly two
    roots nearly coincide, so those items are redone with Jacobi sweeps.
    """
    a = np.asarray(mats, dtype=float)
    q = (a[..., 0, 0] + a[..., 1, 1] + a[..., 2, 2]) / 3.0
    b = a - q[..., None, None] * np.eye(3)
    p2 = np.sum(b * b, axis=(-2, -1)) / 6.0
    scale = np.linalg.norm(a, axis=(-2, -1))
    iso = p2 <= (1e-15 * scale) ** 2
    p = np.sqrt(np.where(iso, 1.0, p2))
    detb = np.linalg.det(b / p[..., None, None])
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam1 = q + 2.0 * p * np.cos(phi)
    lam3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    lam2 = 3.0 * q - lam1 - lam3
    w = np.stack([lam1, lam2, lam3], axis=-1)
    w = np.where(iso[..., None], q[..., None] * np.ones(3), w)
    spread = w[..., 0] - w[..., 2]
    gap = np.minimum(w[..., 0] - w[..., 1], w[..., 1] - w[..., 2])
    pair = ~iso & (gap <= 1e-3 * spread)
    if np.any(pair):
        flatw = w.reshape((-1, 3))
        flat_pair = pair.reshape(-1)
        wj, _ = _jacobi_eig3(a.reshape((-1, 3, 3))[flat_pair])
        flatw[flat_pair] = wj
        w = flatw.reshape(w.shape)
    return w


def _eigvec_for(mats, lam):
    """Null-space direction of (A - lam I) via the largest row cross product."""
    m = mats - lam[..., None, None] * np.eye(3)
    r0, r1, r2 = m[..., 0, :], m[..., 1, :], m[..., 2, :]
    cands = np.stack([np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)], axis=-2)
    norms = np.linalg.norm(cands, axis=-1)
    best = np.argmax(norms, axis=-1)
    vec = np.take_along_axis(cands, best[..., None, None], axis=-2)[..., 0, :]
    nrm = np.take_along_axis(norms, best[..., None], axis=-1)[..., 0]
    return vec, nrm


def sym_eig3(mats: NDArray[np.float64]):
    """Spectral decomposition of symmetric 3x3 matrices.

    Returns (w, V) with eigenvalues w (..., 3) sorted descending and
    orthonormal eigenvectors in the columns of V (..., 3, 3).  Items whose
    closed-form eigenvectors fail a residual check (near-degenerate
    spectrum) are redone with Jacobi rotations.
    """
    a = np.asarray(mats, dtype=float)
    batch = a.shape[:-2]
    flat = a.reshape((-1, 3, 3))
    w = sym_eigvals3(flat)
    scale = np.linalg.norm(flat, axis=(-2, -1))
    v1, n1 = _eigvec_for(flat, w[..., 0])
    v3, n3 = _eigvec_for(flat, w[..., 2])
    floor = 1e-8 * scale * scale + 1e-300
    bad = (n1 <= floor) | (n3 <= floor)
    safe1 = np.where(bad[..., None], 1.0, np.linalg.norm(v1, axis=-1)[..., None])
    safe3 = np.where(bad[..., None], 1.0, np.linalg.norm(v3, axis=-1)[..., None])
    v1 = v1 / safe1
    v3 = v3 / safe3
    v3 = v3 - np.sum(v3 * v1, axis=-1)[..., None] * v1
    n3b = np.linalg.norm(v3, axis=-1)
    bad |= n3b <= 1e-8
    v3 = v3 / np.where(bad[..., None], 1.0, n3b[..., None])
    v2 = np.cross(v3, v1)
    v = np.stack([v1, v2, v3], axis=-1)
    resid = np.linalg.norm(flat @ v - v * w[..., None, :], axis=(-2, -1))
    bad |= resid > 1e-12 * (scale + 1.0)
    if np.any(bad):
        wj, vj = _jacobi_eig3(flat[bad])
        w[bad] = wj
        v[bad] = vj
    return w.reshape(batch + (3,)), v.reshape(batch + (3, 3))


def spd_check(mats: NDArray[np.float64]) -> NDArray[np.bool_]:
    """Elementwise SPD test: symmetric with lam_min > SPD_RTOL * max(1, lam_max)."""
    a = np.asarray(mats, dtype=float)
    sym = np.all(np.abs(a - np.swapaxes(a, -1, -2)) <= 1e-12 * (1.0 + np.abs(a).max(axis=(-2, -1))[..., None, None]), axis=(-2, -1))
    w = sym_eigvals3(a)
    return sym & (w[..., 2] > SPD_RTOL * np.maximum(1.0, w[..., 0]))


def _require_spd(mats: NDArray[np.float64], what: str = "matrix") -> None:
    ok = spd_check(mats)
    if not np.all(ok):
        idx = np.argwhere(~np.atleast_1d(ok))
        raise NotPositiveDefinite(f"{what} at index {tuple(idx[0])} is not positive definite (of {idx.shape[0]} offender(s))")


def _apply_spectral(mats, fn, check_spd, what):
    if check_spd:
        _require_spd(mats, what)
    w, v = sym_eig3(mats)
    fw = fn(w)
    return (v * fw[..., None, :]) @ np.swapaxes(v, -1, -2)


def matrix_log(mats: NDArray[np.float64], check: bool = True) -> NDArray[np.float64]:
    """Matrix logarithm of SPD matrices: V diag(log w) V^T.

    Raises NotPositiveDefinite when any eigenvalue falls below the SPD
    tolerance.
    """
    return _apply_spectral(mats, np.log, check, "matrix_log input")


def matrix_exp(mats: NDArray[np.float64]) -> NDArray[np.float64]:
    """Matrix exponential of symmetric matrices: V diag(exp w) V^T.

    Always SPD; raises OverflowError if an eigenvalue exceeds the float64
    exp range.
    """
    a = np.asarray(mats, dtype=float)
    w, v = sym_eig3(a)
    if np.any(w[..., 0] > _EXP_OVERFLOW):
        raise OverflowError(f"matrix_exp eigenvalue {float(np.max(w)):.3g} exceeds exp overflow threshold {_EXP_OVERFLOW}")
    return (v * np.exp(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def geodesic_distance(s1: NDArray[np.float64], s2: NDArray[np.float64], check: bool = True) -> NDArray[np.float64]:
    """Log-Euclidean geodesic distance sqrt(tr[(log S1 - log S2)^2])."""
    diff = matrix_log(s1, check=check) - matrix_log(s2, check=check)
    return np.sqrt(np.sum(diff * diff, axis=(-2, -1)))


def log_vecs(mats: NDArray[np.float64], check: bool = True) -> NDArray[np.float64]:
    """vecs(log(S)) in one step, the response vector of the regression model."""
    return vecs(matrix_log(mats, check=check))


def exp_ivecs(vec: NDArray[np.float64]) -> NDArray[np.float64]:
    """exp(Ivecs(v)), mapping a 6-vector in log space back to an SPD tensor."""
    return matrix_exp(ivecs(vec))


def mean_diffusivity(eigenvalues: NDArray[np.float64]) -> NDArray[np.float64]:
    """MD = (lam1 + lam2 + lam3) / 3 from an (..., 3) eigenvalue array."""
    return np.mean(np.asarray(eigenvalues, dtype=float), axis=-1)


def fractional_anisotropy(eigenvalues: NDArray[np.float64]) -> NDArray[np.float64]:
    """FA from an (..., 3) eigenvalue array with lam3 >= 0 allowed.

    FA = sqrt(3 sum (lam_k - mean)^2 / (2 sum lam_k^2)); raises
    DegenerateTensor where all three eigenvalues vanish.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    sumsq = np.sum(lam * lam, axis=-1)
    if np.any(sumsq == 0.0):
        raise DegenerateTensor("all eigenvalues are zero; FA undefined")
    dev = lam - np.mean(lam, axis=-1)[..., None]
    return np.sqrt(3.0 * np.sum(dev * dev, axis=-1) / (2.0 * sumsq))


def tensor_eigenvalues(mats: NDArray[np.float64], check: bool = True) -> NDArray[np.float64]:
    """Descending eigenvalues of SPD tensors, (..., 3)."""
    if check:
        _require_spd(mats, "tensor")
    return sym_eigvals3(mats)


@dataclass(frozen=True)
class ScalarDiffusion:
    """Tensor-derived scalars: anisotropy, mean diffusivity, spectrum."""

    fa: float
    md: float
    eigenvalues: NDArray[np.float64]


def scalar_diffusion(mat: NDArray[np.float64]) -> ScalarDiffusion:
    """FA, MD and the sorted spectrum of one SPD tensor."""
    lam = tensor_eigenvalues(mat)
    return ScalarDiffusion(fa=float(fractional_anisotropy(lam)), md=float(mean_diffusivity(lam)), eigenvalues=lam)


@dataclass(frozen=True)
class SymMat3:
    """A real symmetric 3x3 matrix stored as its vecs vector."""

    vec: NDArray[np.float64]

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float)
        if v.shape != (6,):
            raise ValueError(f"SymMat3 needs 6 entries, got shape {v.shape}")
        object.__setattr__(self, "vec", v)

    @classmethod
    def from_matrix(cls, mat: NDArray[np.float64]) -> "SymMat3":
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (3, 3) or not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(mat).max())):
            raise ValueError("from_matrix needs a symmetric 3x3 matrix")
        return cls(vecs(mat))

    @property
    def matrix(self) -> NDArray[np.float64]:
        return ivecs(self.vec)

    def exp(self) -> "SpdTensor":
        return SpdTensor(matrix_exp(self.matrix))


@dataclass(frozen=True)
class SpdTensor:
    """One symmetric positive definite 3x3 diffusion tensor."""

    matrix: NDArray[np.float64] = field()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"SpdTensor needs a 3x3 matrix, got {m.shape}")
        _require_spd(m, "tensor")
        object.__setattr__(self, "matrix", m)

    def log(self) -> SymMat3:
        return SymMat3(vecs(matrix_log(self.matrix, check=False)))

    def scalars(self) -> ScalarDiffusion:
        return scalar_diffusion(self.matrix)

    def distance_to(self, other: "SpdTensor") -> float:
        return float(geodesic_distance(self.matrix, other.matrix, check=False))
