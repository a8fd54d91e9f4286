"""Pentagon frame built from five copies of one dual-unitary gate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gates import GateSpec, is_dual_unitary
from ..linalg import identity_residual
from ..tensor_core import DenseTensor

FRAME_QUBITS = tuple("abcdefghij")
# direction k of the pentagon carries qubits (2k, 2k+1); the first is the high bit
DIRECTIONS = ("v", "w", "x", "y", "z")

# gate legs are (out1, out2, in1, in2); qubit a..j and internal bonds k..o
_FRAME_SUBSCRIPTS = "ibnk,adol,cfkm,ehln,gjmo->abcdefghij"


class FrameError(ValueError):
    """Generator gate is not dual unitary."""


@dataclass(frozen=True, eq=False)
class Frame:
    tensor: DenseTensor
    generator: GateSpec

    def directions_array(self) -> np.ndarray:
        """The frame as a 5-leg tensor with one 4-dim leg per direction."""
        return self.tensor.data.reshape((4,) * 5)


def frame_array(u: np.ndarray) -> np.ndarray:
    u4 = np.asarray(u, dtype=complex).reshape(2, 2, 2, 2)
    return np.einsum(_FRAME_SUBSCRIPTS, u4, u4, u4, u4, u4, optimize="greedy")


def build_frame(g: GateSpec, check: bool = True, tol: float = 1e-10) -> Frame:
    """Wire five copies of ``g`` around the pentagon.

    Set ``check=False`` to force a non-dual-unitary gate through (used as a
    negative control).
    """
    if check:
        verdict = is_dual_unitary(g, tol)
        if not verdict.passed:
            raise FrameError(
                f"generator is not dual unitary (residuals {verdict.unitary_residual:.2e}, {verdict.dual_residual:.2e})"
            )
    arr = frame_array(g.matrix)
    return Frame(DenseTensor.from_array(arr, FRAME_QUBITS), g)


@dataclass(frozen=True)
class PlanarVerdict:
    scalars: tuple[float, ...]
    residuals: tuple[float, ...]
    passed: bool

    @property
    def worst(self) -> float:
        return max(self.residuals)


def planar_gram(f5: np.ndarray, start: int) -> np.ndarray:
    """Contract directions start, start+1, start+2 with the conjugate.

    Returns the 16x16 matrix on the remaining two directions (in cyclic
    order start+3, start+4).
    """
    contracted = [(start + k) % 5 for k in range(3)]
    kept = [(start + 3) % 5, (start + 4) % 5]
    x = f5.transpose(kept + contracted).reshape(16, 64)
    return x @ x.conj().T


def check_planar_2uniform(f: Frame | np.ndarray, tol: float = 1e-10) -> PlanarVerdict:
    f5 = f.directions_array() if isinstance(f, Frame) else np.asarray(f).reshape((4,) * 5)
    scalars, residuals = [], []
    for start in range(5):
        res, s = identity_residual(planar_gram(f5, start))
        scalars.append(float(s.real))
        residuals.append(res)
    return PlanarVerdict(tuple(scalars), tuple(residuals), all(r < tol for r in residuals))


def is_frame_cyclic(f: Frame, tol: float = 1e-12) -> bool:
    f5 = f.directions_array()
    return float(np.linalg.norm(f5 - f5.transpose(1, 2, 3, 4, 0))) < tol * max(1.0, np.linalg.norm(f5))
