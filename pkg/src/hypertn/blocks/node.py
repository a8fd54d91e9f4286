"""Node assembly, node recipes and the reduced path node.

Node leg convention: a boundary leg ``b_d`` (d = 0..4, cyclic pentagon order)
is 16-dimensional with qubit order ``(f1, t1, f2, t2)``.  The perfect-tensor
ququart ``(t1, t2)`` comes from leg ``d + 1`` of the perfect tensor (leg 0 is
the bulk leg) and the frame ququart ``(f1, f2)`` from frame direction ``d``.
The entangler ``U`` multiplies with its row index on the building block:
``N[.., alpha, ..] = sum_x A[.., x, ..] U[x, alpha]``.  With this placement
two neighbouring nodes meet through the edge matrix ``U U^T``.

The perfect tensor enters rescaled to a permutation (each 3|3 split is a
permutation matrix), and the bulk leg of a reduced node is contracted
against the trace-normalized operator ``Id/4``.  With these choices the
leading eigenvalue of the reduced path node is exactly ``2**5 = 32``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from ..gates import GateSpec, dual_family, entangler_family, gate_from_provenance, haar_unitary, sinkhorn_dual_unitary
from ..linalg import compressed_eig, identity_residual, low_rank_factors
from ..tensor_core import DenseTensor
from .frame import Frame, build_frame
from .perfect import PerfectTensor, default_coefficients, default_perfect_tensor, perfect_from_recipe

BOUNDARY = ("b0", "b1", "b2", "b3", "b4")
NODE_LEGS = ("bulk",) + BOUNDARY
LEADING = 32.0
TURNS = {"right": 2, "left": 3}


def _leg_from_tf() -> np.ndarray:
    """TF_OF_LEG[x] = 4 * t + f for leg index x with qubits (f1, t1, f2, t2)."""
    out = np.empty(16, dtype=np.int64)
    for x in range(16):
        f1, t1, f2, t2 = (x >> 3) & 1, (x >> 2) & 1, (x >> 1) & 1, x & 1
        out[x] = 4 * (2 * t1 + t2) + (2 * f1 + f2)
    return out


TF_OF_LEG = _leg_from_tf()


class NodeError(RuntimeError):
    """Node reduction rule violated."""


class IntegrityError(RuntimeError):
    """A numerical invariant that must hold exactly by construction failed."""


@dataclass(frozen=True)
class NodeRecipe:
    """Everything needed to rebuild a node: cubes, permutations, two gates."""

    frame_gate: Mapping[str, Any]
    entangler: Mapping[str, Any]
    coefficients: tuple[tuple[int, ...], ...] = field(default_factory=default_coefficients)
    permutations: tuple[tuple[int, ...], ...] | None = None

    def to_dict(self) -> dict[str, Any]:
        perms = self.permutations or default_perfect_tensor().permutations
        return {
            "cubes": {"field": "GF(4)", "coefficients": [list(r) for r in self.coefficients]},
            "permutations": [list(p) for p in perms],
            "frame_gate": dict(self.frame_gate),
            "entangler": dict(self.entangler),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str | Mapping[str, Any]) -> "NodeRecipe":
        d = json.loads(text) if isinstance(text, str) else dict(text)
        return cls(
            frame_gate=d["frame_gate"],
            entangler=d["entangler"],
            coefficients=tuple(tuple(r) for r in d["cubes"]["coefficients"]),
            permutations=tuple(tuple(p) for p in d["permutations"]),
        )

    @property
    def recipe_id(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def perfect(self) -> PerfectTensor:
        default = default_perfect_tensor()
        if self.coefficients == default_coefficients() and self.permutations in (None, default.permutations):
            return default
        return perfect_from_recipe(self.coefficients, self.permutations or default.permutations)

    def parts(self) -> tuple[PerfectTensor, Frame, GateSpec]:
        return self.perfect(), build_frame(gate_from_provenance(self.frame_gate)), gate_from_provenance(self.entangler)


def family_recipe(a: float, family: str, b: float) -> NodeRecipe:
    return NodeRecipe(dual_family(a).provenance.to_dict(), entangler_family(family, b).provenance.to_dict())


def random_recipe(frame_seed: int, entangler_seed: int, tol: float = 1e-10, max_iter: int = 10_000) -> NodeRecipe:
    g = sinkhorn_dual_unitary(frame_seed, tol=tol, max_iter=max_iter)
    u = haar_unitary(16, entangler_seed)
    return NodeRecipe(g.provenance.to_dict(), u.provenance.to_dict())


def block_tensor(perfect: PerfectTensor, frame: Frame) -> np.ndarray:
    """``A[i, x0..x4]``: perfect tensor times frame, legs interleaved into 16-dim legs."""
    t = perfect.unitary_array()
    f = frame.directions_array()
    a = np.einsum("iabcde,ABCDE->iaAbBcCdDeE", t, f).reshape((4,) + (16,) * 5)
    for axis in range(1, 6):
        a = np.take(a, TF_OF_LEG, axis=axis)
    return a


def apply_entangler(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = a
    for _ in range(5):
        out = np.tensordot(out, u, axes=([1], [0]))
    return out


@dataclass(frozen=True)
class ReductionVerdict:
    scalars: tuple[float, ...]
    residuals: tuple[float, ...]
    passed: bool

    @property
    def worst(self) -> float:
        return max(self.residuals)


def node_reduction_gram(n: np.ndarray, start: int) -> np.ndarray:
    """Contract ``N`` with ``conj(N)`` on boundary legs start..start+2.

    The result is a square matrix on (bulk, b_{start+3}, b_{start+4}).
    """
    contracted = [1 + (start + k) % 5 for k in range(3)]
    kept = [0, 1 + (start + 3) % 5, 1 + (start + 4) % 5]
    x = n.transpose(kept + contracted).reshape(4 * 256, -1)
    return x @ x.conj().T


def check_node_reduction(n: np.ndarray, tol: float = 1e-9) -> ReductionVerdict:
    scalars, residuals = [], []
    for start in range(5):
        res, s = identity_residual(node_reduction_gram(n, start))
        scalars.append(float(s.real))
        residuals.append(res)
    return ReductionVerdict(tuple(scalars), tuple(residuals), all(r < tol for r in residuals))


@dataclass(frozen=True, eq=False)
class Node:
    tensor: DenseTensor
    perfect: PerfectTensor
    frame: Frame
    entangler: GateSpec
    normalization: float
    adjacency: tuple[str, ...] = BOUNDARY
    recipe: NodeRecipe | None = None

    @property
    def array(self) -> np.ndarray:
        return self.tensor.data

    @property
    def recipe_id(self) -> str | None:
        return self.recipe.recipe_id if self.recipe else None


def build_node(
    perfect: PerfectTensor,
    frame: Frame,
    u: GateSpec,
    verify: bool = True,
    tol: float = 1e-9,
    recipe: NodeRecipe | None = None,
) -> Node:
    if u.dim != 16:
        raise ValueError("entangler must act on a 16-dimensional leg")
    arr = apply_entangler(block_tensor(perfect, frame), u.matrix)
    if verify:
        verdict = check_node_reduction(arr, tol)
        if not verdict.passed:
            raise NodeError(f"node reduction fails: residuals {verdict.residuals}")
        norm = float(np.sqrt(np.mean(verdict.scalars)))
    else:
        norm = float(np.sqrt(np.vdot(arr, arr).real / (4 * 256 * 4)))
    return Node(DenseTensor.from_array(arr, NODE_LEGS), perfect, frame, u, norm, recipe=recipe)


def node_from_recipe(recipe: NodeRecipe, verify: bool = True) -> Node:
    p, f, u = recipe.parts()
    return build_node(p, f, u, verify=verify, recipe=recipe)


def _turn_slot(turn: str | int) -> int:
    if isinstance(turn, str):
        if turn not in TURNS:
            raise ValueError(f"turn must be one of {sorted(TURNS)}")
        return TURNS[turn]
    if turn not in (2, 3):
        raise ValueError("through slots must be non-adjacent (offset 2 or 3)")
    return int(turn)


def dense_transfer_matrix(n: np.ndarray, turn: str | int = "right", in_slot: int = 0) -> np.ndarray:
    """``M[(o, o'), (p, p')]`` by full contraction of the node with its conjugate.

    ``p`` is the through-in leg (``in_slot``), ``o`` the through-out leg.
    """
    out_slot = (in_slot + _turn_slot(turn)) % 5
    rest = [0] + [1 + s for s in range(5) if s not in (in_slot, out_slot)]
    x = n.transpose([1 + in_slot, 1 + out_slot] + rest).reshape(256, -1)
    g = (x @ x.conj().T / 4.0).reshape(16, 16, 16, 16)  # (p, o, p', o')
    return g.transpose(1, 3, 0, 2).reshape(256, 256)


def _pair_kernel(arr: np.ndarray, in_leg: int, out_leg: int) -> np.ndarray:
    """Sum ``arr * conj(arr)`` over all legs except ``in_leg`` and ``out_leg``.

    Returns ``K[o, o', p, p']`` with ``p`` from ``in_leg`` and ``o`` from ``out_leg``.
    """
    others = [k for k in range(arr.ndim) if k not in (in_leg, out_leg)]
    d = arr.shape[in_leg]
    x = arr.transpose([in_leg, out_leg] + others).reshape(d * d, -1)
    g = (x @ x.conj().T).reshape(d, d, d, d)  # (p, o, p', o')
    return g.transpose(1, 3, 0, 2)


def structured_transfer_matrix(perfect: PerfectTensor, frame: Frame, u: np.ndarray, turn: str | int = "right") -> np.ndarray:
    """Transfer matrix from the factorized building block.

    The contracted boundary legs see ``U U^dag``-type cancellations, so only
    the perfect-tensor and frame kernels on the two through legs are needed,
    dressed by ``U (x) conj(U)`` on each side.
    """
    out_slot = _turn_slot(turn)
    kt = _pair_kernel(perfect.unitary_array(), 1, 1 + out_slot) / 4.0
    kf = _pair_kernel(frame.directions_array(), 0, out_slot)
    k = np.einsum("abcd,ABCD->aAbBcCdD", kt, kf).reshape(16, 16, 16, 16)
    k = k[np.ix_(TF_OF_LEG, TF_OF_LEG, TF_OF_LEG, TF_OF_LEG)]
    w = np.kron(u, u.conj())
    return w.T @ k.reshape(256, 256) @ w


def phi_vector() -> np.ndarray:
    return np.eye(16, dtype=complex).reshape(256)


@dataclass(eq=False)
class ReducedPathNode:
    """256x256 transfer matrix of a path node with its cached spectrum."""

    matrix: np.ndarray
    turn: str
    recipe_id: str | None = None
    lambda1_tol: float = 1e-6

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (256, 256):
            raise ValueError("reduced path node must be 256x256")
        lam1 = self.spectrum[0]
        if abs(lam1 - LEADING) > self.lambda1_tol * LEADING:
            raise IntegrityError(f"leading eigenvalue {lam1} differs from 32")

    @cached_property
    def factors(self) -> tuple[np.ndarray, np.ndarray]:
        """``P, Q`` with orthonormal ``P`` and ``M = P Q`` at the numerical rank."""
        return low_rank_factors(self.matrix)

    @cached_property
    def _eig(self):
        return compressed_eig(self.matrix, factors=self.factors)

    @property
    def spectrum(self) -> np.ndarray:
        return self._eig[0]

    @property
    def rank(self) -> int:
        return self._eig[1].shape[1]

    @property
    def lambda1(self) -> complex:
        return complex(self.spectrum[0])

    @property
    def leading_right(self) -> np.ndarray:
        return self._eig[1][:, 0]

    @property
    def leading_left(self) -> np.ndarray:
        return self._eig[2][0]

    def phi_residual(self) -> float:
        phi = phi_vector()
        return float(np.linalg.norm(self.matrix @ phi - LEADING * phi) / np.linalg.norm(phi))

    def left_phi_residual(self) -> float:
        """How far ``Phi`` is from being a left eigenvector (diagnostic)."""
        phi = phi_vector()
        return float(np.linalg.norm(phi @ self.matrix - LEADING * phi) / np.linalg.norm(phi))

    def spectral_radius(self) -> float:
        return float(abs(self.spectrum[0]))

    def normalized_moduli(self, count: int = 6) -> np.ndarray:
        return np.abs(self.spectrum[:count]) / LEADING


def reduced_path_node(n: Node, turn: str = "right", method: str = "dense") -> ReducedPathNode:
    if method == "dense":
        m = dense_transfer_matrix(n.array, turn)
    elif method == "structured":
        m = structured_transfer_matrix(n.perfect, n.frame, n.entangler.matrix, turn)
    else:
        raise ValueError("method must be 'dense' or 'structured'")
    return ReducedPathNode(m, turn, n.recipe_id)


def reduced_path_node_from_recipe(recipe: NodeRecipe, turn: str = "right") -> ReducedPathNode:
    """Structured route without assembling the dense node."""
    p, f, u = recipe.parts()
    return ReducedPathNode(structured_transfer_matrix(p, f, u.matrix, turn), turn, recipe.recipe_id)
