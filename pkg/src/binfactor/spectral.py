"""Spectral machinery: eigendecomposition, loading subspace, noise variances.

The estimated correlation matrix is decomposed symmetrically; the leading
eigenvectors span the loading subspace, the loading matrix is the basis
scaled by square-rooted leading eigenvalues, and the noise variances are
the diagonal of the correlation matrix projected onto the orthogonal
complement.  Subspace quality is measured by the squared Frobenius
distance between projection matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .moments import BinaryMatrix, MarginalSummary, TetrachoricMatrix, estimate_tetrachoric

TAU2_FLOOR = 1e-10
EIGENGAP_WARN = 1e-8


class EigengapWarning(UserWarning):
    """Raised when the retained/discarded eigenvalue gap is near-degenerate."""


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order with orthonormal column eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class FactorModel:
    """Fitted parameters of the binary latent factor model.

    ``b_hat`` has mutually orthogonal columns (scaled eigenvectors); its
    column span is only identified as a subspace, so entrywise values are a
    chosen representative.  ``meta`` carries fit bookkeeping (sample size,
    clamp counts, seed) for persistence.
    """

    d: int
    p: int
    c_hat: np.ndarray
    b_hat: np.ndarray
    tau2_hat: np.ndarray
    eigvals: np.ndarray
    meta: dict = field(default_factory=dict)


def sym_eigen(a: np.ndarray) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) > 1e-12:
        raise ValueError("matrix is not symmetric within 1e-12")
    values, vectors = np.linalg.eigh(a)
    return EigenDecomposition(values[::-1].copy(), vectors[:, ::-1].copy())


def sign_normalize(basis: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Ties break toward the lowest row index; the spanned subspace is
    unchanged and the operation is idempotent.
    """
    basis = np.asarray(basis, dtype=float)
    out = basis.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        lead = col[np.argmax(np.abs(col))]
        if lead < 0.0:
            out[:, k] = -col
    return out


def leading_subspace(e: EigenDecomposition, d: int) -> np.ndarray:
    """First d eigenvectors, sign-normalized.

    Warns (``EigengapWarning``) when the gap between the d-th and (d+1)-th
    eigenvalues is below 1e-8: the retained subspace is then numerically
    ill-determined, though still returned.
    """
    p = e.vectors.shape[0]
    if not 1 <= d <= p:
        raise ValueError(f"need 1 <= d <= p={p}, got d={d}")
    if d < p and e.values[d - 1] - e.values[d] < EIGENGAP_WARN:
        warnings.warn(
            f"eigenvalue gap {e.values[d - 1] - e.values[d]:.3e} below "
            f"{EIGENGAP_WARN:g} at cut d={d}; subspace is near-degenerate",
            EigengapWarning,
            stacklevel=2,
        )
    return sign_normalize(e.vectors[:, :d])


def projection(basis: np.ndarray) -> np.ndarray:
    """Orthogonal projection matrix onto the span of an orthonormal basis."""
    basis = np.asarray(basis, dtype=float)
    _check_orthonormal(basis)
    h = basis @ basis.T
    return 0.5 * (h + h.T)


def subspace_discrepancy(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Frobenius distance between the projections of two spans.

    Accepts any full-column-rank matrices (projections are formed through
    the Gram inverse).  Zero iff the spans coincide; for two d-dimensional
    spans the value is at most 2d, attained when they are orthogonal.
    """
    ha = _general_projection(a)
    hb = _general_projection(b)
    diff = ha - hb
    return float(np.sum(diff * diff))


def noise_variances(
    sigma: np.ndarray,
    basis: np.ndarray,
    floor: float = TAU2_FLOOR,
) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal of the correlation matrix projected off the loading span.

    Returns the variance vector (floored below at ``floor``, since a
    finite-sample projection can dip negative) and the boolean mask of
    floored entries.
    """
    sigma = np.asarray(sigma, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if sigma.shape[0] != basis.shape[0]:
        raise ValueError(
            f"dimension mismatch: sigma is {sigma.shape}, basis is {basis.shape}"
        )
    _check_orthonormal(basis)
    q = np.eye(sigma.shape[0]) - basis @ basis.T
    raw = np.einsum("ij,jk,ik->i", q, sigma, q)
    clamped = raw < floor
    return np.maximum(raw, floor), clamped


def fit_from_tetrachoric(
    ms: MarginalSummary,
    tetra: TetrachoricMatrix,
    d: int,
    tau2_floor: float = TAU2_FLOOR,
    meta: dict | None = None,
) -> FactorModel:
    """Assemble a factor model from an estimated correlation matrix."""
    model, _ = _fit_pieces(ms, tetra, d, tau2_floor, meta)
    return model


def fit_model(
    y: BinaryMatrix,
    d: int,
    tau2_floor: float = TAU2_FLOOR,
    meta: dict | None = None,
) -> FactorModel:
    """End-to-end fit: moments, eigendecomposition, loadings, noise variances."""
    if not 1 <= d <= y.p:
        raise ValueError(f"need 1 <= d <= p={y.p}, got d={d}")
    ms, tetra = estimate_tetrachoric(y)
    extra = {"n": y.n}
    if meta:
        extra.update(meta)
    return fit_from_tetrachoric(ms, tetra, d, tau2_floor, extra)


def _fit_pieces(
    ms: MarginalSummary,
    tetra: TetrachoricMatrix,
    d: int,
    tau2_floor: float,
    meta: dict | None,
) -> tuple[FactorModel, np.ndarray]:
    """Fit and also hand back the orthonormal subspace basis."""
    e = sym_eigen(tetra.sigma)
    basis = leading_subspace(e, d)
    lead = e.values[:d]
    # The correlation estimate is not forced positive semidefinite, so a
    # leading eigenvalue can in principle be negative; clip before sqrt.
    b_hat = basis * np.sqrt(np.maximum(lead, 0.0))[None, :]
    tau2, tau2_clamped = noise_variances(tetra.sigma, basis, tau2_floor)
    info = {
        "marginal_clamps": ms.clamp_count,
        "pair_clamps": len(tetra.clamp_flags),
        "tau2_floored": int(tau2_clamped.sum()),
        "negative_eigvals": int(np.count_nonzero(lead < 0.0)),
    }
    if meta:
        info.update(meta)
    model = FactorModel(
        d=d,
        p=tetra.p,
        c_hat=ms.c_hat.copy(),
        b_hat=b_hat,
        tau2_hat=tau2,
        eigvals=lead.copy(),
        meta=info,
    )
    return model, basis


def _check_orthonormal(basis: np.ndarray) -> None:
    if basis.ndim != 2:
        raise ValueError(f"basis must be 2-D, got shape {basis.shape}")
    d = basis.shape[1]
    if d == 0:
        return
    gram = basis.T @ basis
    if np.max(np.abs(gram - np.eye(d))) > 1e-10:
        raise ValueError("basis columns are not orthonormal within 1e-10")


def _general_projection(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] == 0 or x.shape[0] < x.shape[1]:
        raise ValueError(f"expected a tall full-rank matrix, got shape {x.shape}")
    sv = np.linalg.svd(x, compute_uv=False)
    if sv[-1] <= max(x.shape) * np.finfo(float).eps * sv[0]:
        raise ValueError("matrix is rank deficient; its span is not well defined")
    h = x @ np.linalg.solve(x.T @ x, x.T)
    return 0.5 * (h + h.T)
