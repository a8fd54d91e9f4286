"""Small numerical helpers shared by blocks and correlations."""

from __future__ import annotations

import numpy as np

RANK_RTOL = 1e-12


def sort_by_modulus(values: np.ndarray) -> np.ndarray:
    """Descending modulus; equal moduli ordered by phase in (-pi, pi]."""
    values = np.asarray(values, dtype=complex)
    mod = np.round(np.abs(values), 12)
    order = np.lexsort((np.angle(values), -mod))
    return values[order]


def low_rank_factors(m: np.ndarray, rtol: float = RANK_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Return ``P, Q`` with ``m = P @ Q`` and inner dimension equal to the numerical rank."""
    u, s, vh = np.linalg.svd(m)
    if s[0] == 0:
        return u[:, :0], vh[:0]
    r = int(np.sum(s > rtol * s[0]))
    return u[:, :r], s[:r, None] * vh[:r]


def compressed_eig(m: np.ndarray, rtol: float = RANK_RTOL, factors: tuple[np.ndarray, np.ndarray] | None = None):
    """Eigen-decomposition of a low-rank square matrix.

    The nonzero spectrum of ``P Q`` coincides with that of the small matrix
    ``Q P``.  Working there avoids the spurious O(eps**(1/k)) eigenvalues a
    dense solver produces from defective zero eigenvalues.

    Returns ``(values, right, left)``: sorted eigenvalues padded with zeros to
    the full size, plus right and left eigenvectors of the nonzero part
    (columns of ``right``; rows of ``left``, normalized so ``left @ right = I``).
    """
    p, q = factors if factors is not None else low_rank_factors(m, rtol)
    r = p.shape[1]
    n = m.shape[0]
    if r == 0:
        return np.zeros(n, dtype=complex), np.zeros((n, 0), complex), np.zeros((0, n), complex)
    small = q @ p
    w, vr = np.linalg.eig(small)
    order = np.lexsort((np.angle(w), -np.round(np.abs(w), 12)))
    w, vr = w[order], vr[:, order]
    right = p @ vr
    # left eigenvectors of the small matrix: rows of inv(vr)
    try:
        vl = np.linalg.inv(vr)
        left = vl @ q
        # rescale so that left_k . right_k = 1 with |right_k| = 1
        norms = np.linalg.norm(right, axis=0)
        right = right / norms
        left = left * norms[:, None]
    except np.linalg.LinAlgError:
        left = np.full((r, n), np.nan + 0j)
    values = np.concatenate([w, np.zeros(n - r, dtype=complex)])
    return values, right, left


def compressed_eigvals(m: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    p, q = low_rank_factors(m, rtol)
    vals = np.linalg.eigvals(q @ p) if p.shape[1] else np.zeros(0, complex)
    full = np.concatenate([vals, np.zeros(m.shape[0] - vals.size, dtype=complex)])
    return sort_by_modulus(full)


def identity_residual(g: np.ndarray) -> tuple[float, complex]:
    """Fit ``g ≈ s * Id`` and return (relative residual, s)."""
    n = g.shape[0]
    s = np.trace(g) / n
    if abs(s) == 0:
        return float("inf"), 0j
    return float(np.linalg.norm(g - s * np.eye(n)) / (abs(s) * np.sqrt(n))), complex(s)
