"""Dense matrix utilities: truncated SVD, projectors, and norms.

Everything here operates on plain 2-D numpy arrays of floats.  These are the
building blocks for the factor-model estimators; all functions are pure and
none mutate their inputs.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "SvdResult",
    "svd_truncated",
    "projector",
    "annihilator",
    "spectral_norm",
    "frobenius_norm",
    "nuclear_norm",
    "max_abs_entry",
    "zero_entry_11",
    "trace_product",
    "numerical_rank",
]

# Singular values below max(n, T) * sigma_1 * PINV_RTOL are treated as zero
# when deciding rank (pseudo-inverse cutoff).
PINV_RTOL = 1e-12


class SvdResult(NamedTuple):
    """Top-k singular triplets: U (n x k), s (k,), V (T x k)."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def _orient_columns(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Deterministic sign convention: make the largest-magnitude entry of each
    # left singular vector positive; flip the paired right vector to match.
    u = u.copy()
    v = v.copy()
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return u, v


def svd_truncated(a, k: int) -> SvdResult:
    """Best rank-k factors of `a` via a full dense SVD.

    Returns orthonormal U, V and nonincreasing singular values.  k may equal
    min(n, T), in which case the full decomposition is returned.
    """
    a = _as_matrix(a)
    kmax = min(a.shape)
    if not 1 <= k <= kmax:
        raise ValueError(f"k={k} out of range [1, {kmax}]")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u, v = _orient_columns(u[:, :k], vt[:k].T)
    return SvdResult(U=u, s=s[:k], V=v)


def projector(a) -> np.ndarray:
    """Orthogonal projector onto the column space of `a`.

    Computed as A (A'A)^+ A' with the standard machine-precision rank cutoff,
    so rank-deficient inputs (duplicated or zero columns) are handled.
    """
    a = _as_matrix(a)
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], a.shape[0]))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], a.shape[0]))
    cutoff = max(a.shape) * s[0] * PINV_RTOL
    u = u[:, s > cutoff]
    return u @ u.T


def annihilator(a) -> np.ndarray:
    """I - projector(a): projector onto the orthogonal complement."""
    a = _as_matrix(a)
    return np.eye(a.shape[0]) - projector(a)


def spectral_norm(a) -> float:
    """Largest singular value."""
    a = _as_matrix(a)
    if a.size == 0 or not a.any():
        return 0.0
    return float(np.linalg.norm(a, 2))


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(_as_matrix(a), "fro"))


def nuclear_norm(a) -> float:
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(_as_matrix(a), compute_uv=False)))


def max_abs_entry(a) -> float:
    """Entrywise sup norm."""
    a = _as_matrix(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def zero_entry_11(a) -> np.ndarray:
    """Copy of `a` with its (1,1) entry (index [0, 0]) replaced by zero."""
    a = _as_matrix(a)
    out = a.copy()
    out[0, 0] = 0.0
    return out


def trace_product(a, b) -> float:
    """trace(A'B), i.e. the entrywise inner product of A and B."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def numerical_rank(a, rtol: float = 1e-8) -> int:
    """Number of singular values above rtol * sigma_1."""
    s = np.linalg.svd(_as_matrix(a), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))
