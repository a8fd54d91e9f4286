"""Tile/edge conditions of an encoding hyperinvariant network.

For the node split used here the tile tensor is the interleaved building
block ``A = T x F`` (bulk leg plus five 16-dim legs) and the edge tensor is
``B = U U^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import identity_residual
from .node import Node, block_tensor


@dataclass(frozen=True)
class CodeVerdict:
    cyclic: float
    edge_symmetric: float
    edge_unitary: float
    single_isometry: float
    double_isometry: float
    bulk_isometry: float
    tol: float

    @property
    def conditions(self) -> dict[str, bool]:
        return {
            "cyclic": self.cyclic < self.tol,
            "edge": self.edge_symmetric < self.tol and self.edge_unitary < self.tol,
            "isometries": self.single_isometry < self.tol and self.double_isometry < self.tol,
            "bulk_isometry": self.bulk_isometry < self.tol,
        }

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())


def edge_tensor(u: np.ndarray) -> np.ndarray:
    return u @ u.T


def _half_gram(a: np.ndarray, kept: list[int]) -> np.ndarray:
    """``sum A conj(A)`` over all legs not in ``kept``; kept legs ket-major then bra."""
    others = [k for k in range(a.ndim) if k not in kept]
    x = a.transpose(kept + others).reshape(int(np.prod([a.shape[k] for k in kept])), -1)
    return x @ x.conj().T


def check_evenbly_code(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> CodeVerdict:
    """Residuals of the cyclic, edge, isometry and bulk-isometry conditions.

    ``a`` has legs (bulk, i1..i5); ``b`` is the edge matrix.  Because ``b`` is
    unitary it cancels in ``V^dag V`` and ``W^dag W`` only if it really is
    unitary, so the isometry residuals are evaluated with ``b`` applied.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 6 or b.ndim != 2 or b.shape[0] != b.shape[1] or a.shape[1] != b.shape[0]:
        raise ValueError("expected a with (bulk + 5) legs and a square edge matrix matching the leg size")
    scale = max(np.linalg.norm(a), 1e-300)
    cyclic = float(np.linalg.norm(a - a.transpose(0, 2, 3, 4, 5, 1)) / scale)
    n = b.shape[0]
    edge_sym = float(np.linalg.norm(b - b.T) / np.sqrt(n))
    edge_uni = float(np.linalg.norm(b @ b.conj().T - np.eye(n)) / np.sqrt(n))

    # single tile: V' = A with B on legs i2..i5, an isometry from (i0, i1)
    v = a
    for _ in range(4):
        v = np.tensordot(v, b, axes=([2], [0]))
    single, _ = identity_residual(_half_gram(v, [0, 1]))

    # two tiles glued through B between leg i5 of the first and leg i2 of the second
    ab = np.tensordot(a, b, axes=([5], [0]))  # (i0, i1, i2, i3, i4, e)
    for axis in (2, 3, 4):
        ab = np.moveaxis(np.tensordot(ab, b, axes=([axis], [0])), -1, axis)
    a2 = a
    for axis in (3, 4, 5):
        a2 = np.moveaxis(np.tensordot(a2, b, axes=([axis], [0])), -1, axis)
    # W'[(i0, i1, i0', i1'), (j2, j3, j4, j3', j4', j5')] is too large to store;
    # form W'^dag W' from the two half-contractions instead
    e1 = _half_gram(ab, [0, 1, 5]).reshape(64, 16, 64, 16)  # (I, e; K, e')
    e2 = _half_gram(a2, [0, 1, 2]).reshape(64, 16, 64, 16)  # (I', c; K', c')
    g = np.einsum("aebf,cedf->acbd", e1, e2, optimize=True).reshape(4096, 4096)
    double, _ = identity_residual(g)

    bulk, _ = identity_residual(_half_gram(a, [0]))
    return CodeVerdict(cyclic, edge_sym, edge_uni, single, double, bulk, tol)


def node_code_split(node: Node) -> tuple[np.ndarray, np.ndarray]:
    """Tile tensor and edge matrix of a node."""
    return block_tensor(node.perfect, node.frame), edge_tensor(node.entangler.matrix)
