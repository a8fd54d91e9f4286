"""Two-qubit and two-ququart unitaries.

Ordering convention used throughout the package: in a two-qubit matrix the
first qubit is the most significant bit.  A 16-dimensional node leg is the
ordered qubit quadruple ``(f1, t1, f2, t2)`` where ``f`` are frame qubits and
``t`` are perfect-tensor qubits, so each factor of a product entangler
``G (x) G`` acts on one (frame, perfect-tensor) pair with the frame qubit as
the first (most significant) one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .tensor_core import DenseTensor, reshuffle

UNITARY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_NAMED = {
    "Id": np.eye(4),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
}
# DCNOT is fixed as the a = 1 endpoint of the dual-unitary family.
_NAMED["DCNOT"] = _NAMED["CNOT"] @ _NAMED["SWAP"]


class GateError(ValueError):
    """Invalid gate request or non-unitary matrix."""


class ConvergenceError(RuntimeError):
    """Sinkhorn projection ran out of iterations."""

    def __init__(self, message: str, residuals: tuple[float, float], iterations: int):
        super().__init__(message)
        self.residuals = residuals
        self.iterations = iterations


@dataclass(frozen=True)
class Provenance:
    kind: str  # named | family | haar | sinkhorn | cartan | custom
    name: str | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    seed: int | None = None
    iterations: int | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.name is not None:
            out["name"] = self.name
        if self.params:
            out["params"] = {k: float(v) for k, v in self.params.items()}
        if self.seed is not None:
            out["seed"] = int(self.seed)
        if self.iterations is not None:
            out["iterations"] = int(self.iterations)
        if self.flags:
            out["flags"] = list(self.flags)
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Provenance":
        return cls(
            kind=d["kind"],
            name=d.get("name"),
            params=dict(d.get("params", {})),
            seed=d.get("seed"),
            iterations=d.get("iterations"),
            flags=tuple(d.get("flags", ())),
        )


@dataclass(frozen=True, eq=False)
class GateSpec:
    """A unitary with its subsystem dimensions and how it was made."""

    tensor: DenseTensor
    local_dims: tuple[int, ...]
    provenance: Provenance

    def __post_init__(self) -> None:
        if self.tensor.labels != ("out", "in") or self.tensor.dims[0] != self.tensor.dims[1]:
            raise GateError("gate tensor must have legs ('out', 'in') of equal dimension")
        if int(np.prod(self.local_dims)) != self.tensor.dims[0]:
            raise GateError("local dimensions do not multiply to the gate size")
        res = unitarity_residual(self.tensor.data)
        if res > UNITARY_TOL:
            raise GateError(f"matrix is not unitary (residual {res:.2e})")

    @classmethod
    def from_matrix(cls, u: np.ndarray, local_dims=(2, 2), provenance: Provenance | None = None) -> "GateSpec":
        u = np.asarray(u, dtype=complex)
        return cls(DenseTensor.from_array(u, ("out", "in")), tuple(local_dims), provenance or Provenance("custom"))

    @property
    def matrix(self) -> np.ndarray:
        return self.tensor.data

    @property
    def dim(self) -> int:
        return self.tensor.dims[0]

    def to_json(self) -> str:
        return json.dumps(self.provenance.to_dict(), sort_keys=True)


def unitarity_residual(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])))


def named_gate(name: str) -> GateSpec:
    """Permutation gates ``Id``, ``CNOT``, ``DCNOT`` and ``SWAP``."""
    if name not in _NAMED:
        raise GateError(f"unknown gate {name!r}; choose from {sorted(_NAMED)}")
    return GateSpec.from_matrix(_NAMED[name], provenance=Provenance("named", name=name))


def _x_power(b: float) -> np.ndarray:
    # X = P+ - P-, so X^b = P+ + e^{i pi b} P-
    plus = (I2 + PAULI_X) / 2
    return plus + half_turn_phase(b) * (I2 - plus)


def half_turn_phase(t: float) -> complex:
    """``exp(i pi t)``, exact when ``t`` is a multiple of 1/2."""
    quarter = 2.0 * t
    if quarter == round(quarter):
        return (1, 1j, -1, -1j)[int(round(quarter)) % 4]
    return complex(np.exp(1j * np.pi * t))


def _cnot_power_matrix(b: float) -> np.ndarray:
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = I2
    out[2:, 2:] = _x_power(b)
    return out


def _flags_for(value: float) -> tuple[str, ...]:
    return () if 0.0 <= value <= 1.0 else ("outside_unit_interval",)


def cnot_power(b: float) -> GateSpec:
    """``CNOT**b`` with the first qubit as control and ``(-1)**b = exp(i pi b)``."""
    b = float(b)
    return GateSpec.from_matrix(
        _cnot_power_matrix(b),
        provenance=Provenance("family", name="cnot_power", params={"b": b}, flags=_flags_for(b)),
    )


def dual_family(a: float) -> GateSpec:
    """The dual-unitary line ``CNOT**a . SWAP`` from SWAP (a=0) to DCNOT (a=1)."""
    a = float(a)
    phase = half_turn_phase(a)
    p, m = (1 + phase) / 2, (1 - phase) / 2
    u = np.array(
        [
            [1, 0, 0, 0],
            [0, 0, 1, 0],
            [0, p, 0, m],
            [0, m, 0, p],
        ],
        dtype=complex,
    )
    return GateSpec.from_matrix(u, provenance=Provenance("family", name="dual_family", params={"a": a}, flags=_flags_for(a)))


def _control_second(g: np.ndarray) -> np.ndarray:
    swap = _NAMED["SWAP"]
    return swap @ g @ swap


def entangler_factor(name: str, b: float) -> np.ndarray:
    """Two-qubit factor (frame qubit first) of the named entangler family."""
    if name == "f1":
        return _cnot_power_matrix(b)
    if name == "f2":
        return _NAMED["CNOT"] @ _control_second(_cnot_power_matrix(b))
    raise GateError(f"unknown entangler family {name!r}; choose 'f1' or 'f2'")


def entangler_family(name: str, b: float) -> GateSpec:
    """Product entangler ``G (x) G`` on the ``(f1, t1, f2, t2)`` leg ordering.

    ``f1``: ``G = CNOT_{F->T}**b``.  ``f2``: ``G = CNOT_{F->T} . CNOT_{T->F}**b``.
    """
    b = float(b)
    g = entangler_factor(name, b)
    return GateSpec.from_matrix(
        np.kron(g, g),
        local_dims=(2, 2, 2, 2),
        provenance=Provenance("family", name=name, params={"b": b}, flags=_flags_for(b)),
    )


@dataclass(frozen=True)
class CartanParams:
    """Interaction angles plus local dressing ``(u_A, u_B)`` before and ``(v_A, v_B)`` after."""

    alphas: tuple[float, float, float]
    local_pre: tuple[np.ndarray, np.ndarray] = (I2, I2)
    local_post: tuple[np.ndarray, np.ndarray] = (I2, I2)


def interaction_hamiltonian(alphas) -> np.ndarray:
    a1, a2, a3 = alphas
    return a1 * np.kron(PAULI_X, PAULI_X) + a2 * np.kron(PAULI_Y, PAULI_Y) + a3 * np.kron(PAULI_Z, PAULI_Z)


def cartan_gate(p: CartanParams) -> GateSpec:
    """``(u_A (x) u_B) exp(i sum_k alpha_k s_k (x) s_k) (v_A (x) v_B)``."""
    h = interaction_hamiltonian(p.alphas)
    w, v = np.linalg.eigh(h)
    core = (v * np.exp(1j * w)) @ v.conj().T
    u = np.kron(*p.local_pre) @ core @ np.kron(*p.local_post)
    return GateSpec.from_matrix(u, provenance=Provenance("cartan", params=dict(zip(("a1", "a2", "a3"), map(float, p.alphas)))))


def canonical_alphas(alphas) -> tuple[float, float, float]:
    """Fold interaction angles into ``pi/4 >= a1 >= a2 >= |a3|``.

    Uses the local moves: shift any angle by pi/2, permute the angles, and
    flip the sign of two angles at once.  The sign of ``a3`` left over is a
    mirror label; it is non-negative exactly on the half chamber.
    """
    q = np.pi / 2
    folded = [((float(x) + np.pi / 4) % q) - np.pi / 4 for x in alphas]
    # the interval endpoint -pi/4 is equivalent to +pi/4
    folded = [np.pi / 4 if np.isclose(x, -np.pi / 4) else x for x in folded]
    negatives = sum(x < 0 for x in folded)
    mags = sorted((abs(x) for x in folded), reverse=True)
    if negatives % 2 == 1 and not np.isclose(mags[0], np.pi / 4):
        mags[2] = -mags[2]
    return (mags[0], mags[1], mags[2])


_MAGIC_BASIS = np.array([[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex) / np.sqrt(2)


def makhlin_invariants(u: np.ndarray) -> tuple[complex, float]:
    """Local-equivalence invariants ``(G1, G2)`` of a two-qubit unitary."""
    u = np.asarray(u, dtype=complex)
    ub = _MAGIC_BASIS.conj().T @ u @ _MAGIC_BASIS
    m = ub.T @ ub
    det = np.linalg.det(u)
    tr = np.trace(m)
    g1 = tr**2 / (16 * det)
    g2 = (tr**2 - np.trace(m @ m)) / (4 * det)
    return complex(g1), float(np.real(g2))


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """``min_phi |u - e^{i phi} v|`` (Frobenius)."""
    u, v = np.asarray(u), np.asarray(v)
    overlap = np.vdot(v, u)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(u - phase * v))


@dataclass(frozen=True)
class DualUnitarityVerdict:
    unitary_residual: float
    dual_residual: float
    passed: bool


def is_dual_unitary(g: GateSpec | np.ndarray, tol: float = 1e-10) -> DualUnitarityVerdict:
    u = g.matrix if isinstance(g, GateSpec) else np.asarray(g, dtype=complex)
    if u.shape != (4, 4):
        raise GateError("dual unitarity is defined here for two-qubit gates only")
    r1 = unitarity_residual(u)
    r2 = unitarity_residual(reshuffle(u))
    return DualUnitarityVerdict(r1, r2, bool(r1 < tol and r2 < tol))


def haar_unitary(n: int, seed: int) -> GateSpec:
    """Haar-random ``n x n`` unitary (QR of a complex Ginibre matrix)."""
    if n < 1:
        raise GateError("dimension must be positive")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    dims = (2,) * int(np.log2(n)) if n & (n - 1) == 0 and n > 1 else (n,)
    return GateSpec.from_matrix(q, local_dims=dims, provenance=Provenance("haar", params={"n": n}, seed=int(seed)))


def polar_unitary(m: np.ndarray) -> np.ndarray:
    """Closest unitary in Frobenius norm."""
    w, _, vh = np.linalg.svd(m)
    return w @ vh


def sinkhorn_dual_unitary(
    seed: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    start: np.ndarray | None = None,
) -> GateSpec:
    """Alternate polar projections of ``U`` and of ``reshuffle(U)``.

    The starting point is a Haar 4x4 unitary drawn from ``seed`` unless
    ``start`` is given.  Iteration stops once both residuals of
    :func:`is_dual_unitary` are below ``tol``.
    """
    if tol <= 0 or max_iter < 1:
        raise GateError("need tol > 0 and max_iter >= 1")
    if start is None:
        if seed is None:
            raise GateError("either seed or start is required")
        u = haar_unitary(4, seed).matrix.copy()
    else:
        u = np.asarray(start, dtype=complex)
    r1 = r2 = np.inf
    for it in range(1, max_iter + 1):
        u = polar_unitary(u)
        u = reshuffle(polar_unitary(reshuffle(u)))
        r1, r2 = unitarity_residual(u), unitarity_residual(reshuffle(u))
        if r1 < tol and r2 < tol:
            u = polar_unitary(u)
            prov = Provenance("sinkhorn", seed=seed, iterations=it, params={"tol": tol})
            return GateSpec.from_matrix(u, provenance=prov)
    raise ConvergenceError(f"no convergence in {max_iter} sweeps", (r1, r2), max_iter)


def gate_from_provenance(p: Provenance | Mapping[str, Any]) -> GateSpec:
    """Rebuild a gate from its provenance record."""
    if not isinstance(p, Provenance):
        p = Provenance.from_dict(p)
    if p.kind == "named":
        return named_gate(p.name)
    if p.kind == "family":
        if p.name == "cnot_power":
            return cnot_power(p.params["b"])
        if p.name == "dual_family":
            return dual_family(p.params["a"])
        return entangler_family(p.name, p.params["b"])
    if p.kind == "haar":
        return haar_unitary(int(p.params["n"]), p.seed)
    if p.kind == "sinkhorn":
        return sinkhorn_dual_unitary(p.seed, tol=p.params.get("tol", 1e-10))
    if p.kind == "cartan":
        return cartan_gate(CartanParams((p.params["a1"], p.params["a2"], p.params["a3"])))
    raise GateError(f"provenance kind {p.kind!r} cannot be rebuilt")
