"""Boundary observables computed from reduced path nodes.

Vectorization convention: an operator ``v`` on a 16-dim leg enters the
transfer matrix as the vector ``x[(p, p')] = v[p', p]`` so that
``Tr[phi v] = sum phi[p, p'] v[p', p]``.  Correlators are normalized so
that identity probes and a trace-one bulk operator give exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .blocks.node import (
    LEADING,
    Node,
    NodeRecipe,
    ReducedPathNode,
    dense_transfer_matrix,
    node_from_recipe,
    structured_transfer_matrix,
)
from .network import TilingNetwork

MU = 2.0 + math.sqrt(3.0)
ZERO_LAMBDA = 1e-12
DEGENERATE_TOL = 1e-10
MULTIPLICITY_RTOL = 1e-8
THREE_POINT_POWER = 20
SV_RATIO_THRESHOLD = 100.0
REALNESS_RTOL = 1e-8


class DegenerateSpectrumError(ArithmeticError):
    """Subleading modulus equals the leading one."""


class UnderflowError(ArithmeticError):
    """Correlator range too small for a reliable fit."""


class RecipeMismatchError(ValueError):
    pass


class SizeError(MemoryError):
    """Dense contraction would exceed the memory guard."""


class RealnessError(ArithmeticError):
    """A value that must be real has a significant imaginary part."""


@dataclass(frozen=True)
class BoundaryObservable:
    matrix: np.ndarray
    traceless: bool = False
    physical: bool = False

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (16, 16):
            raise ValueError("boundary observables act on a 16-dim leg")
        if self.traceless and abs(np.trace(m)) > 1e-12:
            raise ValueError("observable flagged traceless has nonzero trace")
        if self.physical and np.linalg.norm(m - m.conj().T) > 1e-12 * max(1.0, np.linalg.norm(m)):
            raise ValueError("physical probe must be Hermitian")
        object.__setattr__(self, "matrix", m)

    def vector(self) -> np.ndarray:
        return self.matrix.T.reshape(256)


@dataclass(frozen=True)
class BulkOperator:
    matrix: np.ndarray
    constraint: str = "none"

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("single-site bulk operators are 4x4")
        if self.constraint == "hermitian_psd_trace1":
            if np.linalg.norm(m - m.conj().T) > 1e-12:
                raise ValueError("bulk operator is not Hermitian")
            if np.linalg.eigvalsh(m).min() < -1e-12:
                raise ValueError("bulk operator is not positive semi-definite")
            if abs(np.trace(m) - 1) > 1e-12:
                raise ValueError("bulk operator does not have unit trace")
        elif self.constraint != "none":
            raise ValueError(f"unknown constraint {self.constraint!r}")
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @classmethod
    def maximally_mixed(cls) -> "BulkOperator":
        return cls(np.eye(4) / 4, "hermitian_psd_trace1")


def random_traceless_probe(rng: np.random.Generator) -> BoundaryObservable:
    """Hermitian, traceless, Frobenius-normalized 16x16 probe."""
    g = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    h = (g + g.conj().T) / 2
    h -= np.trace(h) / 16 * np.eye(16)
    return BoundaryObservable(h / np.linalg.norm(h), traceless=True, physical=True)


def random_density_matrix(rng: np.random.Generator, dim: int = 4) -> BulkOperator:
    """Normalized complex Wishart draw ``G G^dag / Tr``."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    rho /= np.trace(rho).real
    return BulkOperator(rho, "hermitian_psd_trace1")


def central_charge_bound() -> float:
    """``9 ln 16 / ln(2 + sqrt 3)``."""
    return 9.0 * math.log(16.0) / math.log(MU)


def delta_from_lambda(lam2: float) -> float:
    """Scaling dimension ``-log_mu |lambda_2|``; infinite for a vanishing eigenvalue."""
    lam2 = abs(lam2)
    if lam2 < ZERO_LAMBDA:
        return math.inf
    return -math.log(lam2) / math.log(MU)


# spectral analysis --------------------------------------------------------


@dataclass(frozen=True)
class Deflated:
    """``M/32 - r l`` kept as ``P X`` with orthonormal ``P`` (``256 x r``)."""

    p: np.ndarray
    x: np.ndarray
    right: np.ndarray
    left: np.ndarray

    def small(self) -> np.ndarray:
        return self.x @ self.p

    def dense(self) -> np.ndarray:
        return self.p @ self.x

    def power(self, n: int) -> np.ndarray:
        """``D**n`` as a dense 256x256 matrix (n >= 1)."""
        return self.p @ np.linalg.matrix_power(self.small(), n - 1) @ self.x


def deflate(r: ReducedPathNode) -> Deflated:
    """Remove the leading spectral projector using measured left/right vectors."""
    p, q = r.factors
    right = r.leading_right
    left = r.leading_left / (r.leading_left @ right)
    coeff = p.conj().T @ right
    x = q / LEADING - np.outer(coeff, left)
    return Deflated(p, x, right, left)


def jordan_block_hint(d: Deflated, lam2: complex, n_range: Sequence[int] = range(8, 41, 4)) -> int | None:
    """Estimate the Jordan block size at ``lambda_2`` from the growth of ``|D**n| / |lambda_2|**n``."""
    if abs(lam2) < ZERO_LAMBDA:
        return None
    small = d.small() / lam2
    ns, logs = [], []
    acc = np.linalg.matrix_power(small, min(n_range) - 1)
    prev = min(n_range) - 1
    for n in n_range:
        acc = acc @ np.linalg.matrix_power(small, n - 1 - prev)
        prev = n - 1
        val = np.linalg.norm(acc @ d.x / lam2)
        ns.append(math.log(n))
        logs.append(math.log(val))
    slope = np.polyfit(ns, logs, 1)[0]
    return max(1, int(round(slope)) + 1)


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray  # first six, normalized by 32, moduli sorted
    lambda2: complex
    delta: float
    multiplicity: int
    deflation_residual: float
    jordan_block_hint: int | None
    left_is_phi: float
    rank: int

    @property
    def moduli(self) -> np.ndarray:
        return np.sort(np.abs(self.eigenvalues))[::-1]

    def to_dict(self) -> dict:
        return {
            "lambda": [float(x) for x in self.moduli],
            "lambda2": [float(self.lambda2.real), float(self.lambda2.imag)],
            "delta": self.delta if math.isfinite(self.delta) else "inf",
            "multiplicity": self.multiplicity,
            "deflation_residual": self.deflation_residual,
            "jordan_block_hint": self.jordan_block_hint,
            "left_phi_residual": self.left_is_phi,
            "rank": self.rank,
        }


def scaling_dimension(r: ReducedPathNode, jordan: bool = False) -> SpectralReport:
    lam = r.spectrum / LEADING
    lam2 = complex(lam[1])
    if abs(abs(lam2) - 1.0) < DEGENERATE_TOL:
        raise DegenerateSpectrumError("subleading eigenvalue has unit modulus")
    delta = delta_from_lambda(abs(lam2))
    if abs(lam2) < ZERO_LAMBDA:
        mult = int(np.sum(np.abs(lam[1:]) < ZERO_LAMBDA))
    else:
        mult = int(np.sum(np.abs(np.abs(lam[1:]) - abs(lam2)) <= MULTIPLICITY_RTOL * abs(lam2)))
    d = deflate(r)
    rho = float(np.abs(np.linalg.eigvals(d.small())).max()) if d.p.shape[1] else 0.0
    hint = jordan_block_hint(d, lam2) if jordan else None
    return SpectralReport(
        eigenvalues=lam[:6].copy(),
        lambda2=lam2,
        delta=delta,
        multiplicity=mult,
        deflation_residual=abs(rho - abs(lam2)),
        jordan_block_hint=hint,
        left_is_phi=r.left_phi_residual(),
        rank=r.rank,
    )


# two-point functions -------------------------------------------------------


@dataclass(frozen=True)
class EndCaps:
    """Transfer matrices of the two path ends with the probe port open."""

    left: np.ndarray
    right: np.ndarray
    recipe_id: str | None


def end_caps(source: Node | NodeRecipe, turn: str = "right") -> EndCaps:
    """Cap matrices built with the same contraction as the path node."""
    if isinstance(source, Node):
        m = dense_transfer_matrix(source.array, turn)
        rid = source.recipe_id
    else:
        p, f, u = source.parts()
        m = structured_transfer_matrix(p, f, u.matrix, turn)
        rid = source.recipe_id
    return EndCaps(m, m, rid)


def path_operator(r: ReducedPathNode, n: int, caps: EndCaps) -> np.ndarray:
    """``W`` for a path of ``n`` tiles (unnormalized)."""
    if n < 1:
        raise ValueError("path length must be at least 1")
    if caps.recipe_id is not None and r.recipe_id is not None and caps.recipe_id != r.recipe_id:
        raise RecipeMismatchError("caps were built from a different node recipe")
    if n == 1:
        return caps.left
    middle = np.linalg.matrix_power(r.matrix, n - 2) if n > 2 else np.eye(256)
    return caps.right @ middle @ caps.left


def two_point_transfer(
    r: ReducedPathNode,
    n: int,
    caps: EndCaps,
    v1: BoundaryObservable,
    v2: BoundaryObservable,
    bulk: BulkOperator | None = None,
) -> complex:
    """``Tr[O] Tr[W (v1 x v2)]`` with ``1/32`` per node and ``1/16`` for the
    leading overlap, so identity probes give ``Tr[O]``."""
    bulk = bulk or BulkOperator.maximally_mixed()
    w = path_operator(r, n, caps)
    value = v2.vector() @ w @ v1.vector()
    return complex(bulk.trace * value / (16.0 * LEADING**n))


def correlator_sequence(m: np.ndarray, x: np.ndarray, y: np.ndarray, ns: Sequence[int]) -> np.ndarray:
    """``y^T m**n x`` for increasing ``ns`` by repeated multiplication."""
    ns = list(ns)
    out = np.empty(len(ns), dtype=complex)
    vec, cur = np.asarray(x, dtype=complex), 0
    for k, n in enumerate(ns):
        if n < cur:
            raise ValueError("ns must be non-decreasing")
        for _ in range(n - cur):
            vec = m @ vec
        cur = n
        out[k] = y @ vec
    return out


def even_step_ratio(c_n: complex, c_n2: complex) -> complex:
    """Correlator growth over one inflation step (two extra tiles)."""
    return c_n2 / c_n


def binomial_step_factor(n: int, k: int) -> float:
    """``C(n+2, k-1) / C(n, k-1)``: the Jordan-block prefactor of the even-step ratio."""
    return math.comb(n + 2, k - 1) / math.comb(n, k - 1)


@dataclass(frozen=True)
class DecayFit:
    delta_hat: float
    slope: float
    residual: float
    block_size: int
    ns: tuple[int, ...]
    delta_expected: float | None = None

    @property
    def discrepancy(self) -> float | None:
        if self.delta_expected is None:
            return None
        return abs(self.delta_hat - self.delta_expected)


def fit_decay(values: np.ndarray, ns: Sequence[int], block_size: int = 1) -> DecayFit:
    """Fit ``log|c(n)| - log C(n, k-1) = a + n log|lambda|``."""
    ns = list(ns)
    if len(ns) < 5:
        raise ValueError("need at least five path lengths")
    y = np.log(np.abs(values)) - np.array([math.log(math.comb(n, block_size - 1)) for n in ns])
    coeffs, res, *_ = np.polyfit(ns, y, 1, full=True)
    slope = float(coeffs[0])
    rms = float(np.sqrt(res[0] / len(ns))) if len(res) else 0.0
    return DecayFit(-slope / math.log(MU), slope, rms, block_size, tuple(ns))


def decay_fit(
    r: ReducedPathNode,
    n_range: Sequence[int],
    v1: BoundaryObservable,
    v2: BoundaryObservable,
    caps: EndCaps,
    block_size: int | None = None,
) -> DecayFit:
    n_range = list(n_range)
    lam2 = abs(r.spectrum[1]) / LEADING
    if lam2 ** max(n_range) < 1e-13:
        raise UnderflowError("|lambda_2|**n falls below 1e-13 inside the fit range")
    report = scaling_dimension(r, jordan=block_size is None)
    if block_size is None:
        block_size = report.jordan_block_hint or 1
    values = np.array([two_point_transfer(r, n, caps, v1, v2) for n in n_range])
    fit = fit_decay(values, n_range, block_size)
    return DecayFit(fit.delta_hat, fit.slope, fit.residual, fit.block_size, fit.ns, report.delta)


def _apply_on_axis(t: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(op, t, axes=([1], [axis])), 0, axis)


def brute_force_sandwich(
    net: TilingNetwork,
    node: Node | NodeRecipe,
    bulk: BulkOperator | Mapping[int, BulkOperator] | None = None,
    probes: Mapping[int, BoundaryObservable] | None = None,
    max_elements: int = 2**24,
) -> complex:
    """``Tr[V O V^dag P] / Tr[V (Id/4) V^dag]`` by dense contraction.

    Every tile carries the same node with boundary direction ``d`` on edge
    slot ``d``.  ``bulk`` is either one operator for tile 0 or a map from
    tile to operator (others get ``Id/4``); ``probes`` maps boundary-leg ids
    to observables.  Each tile is first contracted with its own conjugate,
    leaving one (ket, bra) pair per internal edge; the small per-tile
    tensors are then joined along the edges.
    """
    if isinstance(node, NodeRecipe):
        node = node_from_recipe(node, verify=False)
    probes = dict(probes or {})
    if bulk is None:
        bulk_ops: dict[int, BulkOperator] = {}
    elif isinstance(bulk, BulkOperator):
        bulk_ops = {0: bulk}
    else:
        bulk_ops = dict(bulk)
    mixed = BulkOperator.maximally_mixed()

    def tile_tensors(with_ops: bool) -> list[tuple[np.ndarray, list[tuple[int, int]]]]:
        out = []
        for t in range(net.n_tiles):
            internal = [s for s in range(5) if net.neighbors[t][s] is not None]
            if 16 ** (2 * len(internal)) > max_elements:
                raise SizeError(f"tile {t} keeps {len(internal)} internal edges open")
            arr = node.array
            op = bulk_ops.get(t, mixed).matrix if with_ops else mixed.matrix
            y = np.tensordot(op, arr, axes=([0], [0]))  # y[i', ...] = sum_i O[i, i'] N[i, ...]
            if with_ops:
                for s in range(5):
                    if net.neighbors[t][s] is None:
                        leg = net.leg_id((t, s))
                        if leg in probes:
                            y = _apply_on_axis(y, probes[leg].matrix, 1 + s)
            keep = [1 + s for s in internal]
            rest = [k for k in range(6) if k not in keep]
            rows = 16 ** len(internal)
            ym = y.transpose(keep + rest).reshape(rows, -1)
            nm = arr.transpose(keep + rest).reshape(rows, -1)
            red = (ym @ nm.conj().T).reshape((16,) * (2 * len(internal)))
            out.append((red, [(t, s) for s in internal]))
        return out

    def join(parts) -> complex:
        labels: dict[frozenset, int] = {}
        operands = []
        for red, slots in parts:
            kets, bras = [], []
            for t, s in slots:
                key = frozenset({(t, s), net.neighbors[t][s]})
                if key not in labels:
                    labels[key] = len(labels)
                kets.append(2 * labels[key])
                bras.append(2 * labels[key] + 1)
            operands.extend([red, kets + bras])
        if len(parts) == 1 and not parts[0][1]:
            return complex(parts[0][0])
        return complex(np.einsum(*operands, [], optimize="greedy"))

    value = join(tile_tensors(True))
    norm = join(tile_tensors(False))
    return value / norm


# three-point coefficient ---------------------------------------------------


@dataclass(frozen=True)
class ThreePointReport:
    v_left: np.ndarray | None
    v_right: np.ndarray | None
    sv_ratio: float
    c_value: complex | None
    dismissed: bool
    bulk: str
    deflation_residual: float
    lambda2: complex

    @property
    def c_real(self) -> float | None:
        return None if self.c_value is None else float(self.c_value.real)


@dataclass(frozen=True)
class SubleadingVectors:
    v_left: np.ndarray
    v_right: np.ndarray
    sv_ratio: float
    lambda2: complex
    deflation_residual: float


def hermitian_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a unit vector so that its 16x16 reshaping is (as close as possible to) Hermitian.

    The sign is fixed by making the eigenvalue of largest modulus positive.
    """
    w = v.reshape(16, 16)
    tr = np.trace(w @ w)
    if abs(tr) > 1e-300:
        w = w * np.exp(-0.5j * np.angle(tr))
    herm = (w + w.conj().T) / 2
    ev = np.linalg.eigvalsh(herm)
    if ev[np.argmax(np.abs(ev))] < 0:
        w = -w
    return w.reshape(256)


def subleading_vectors(r: ReducedPathNode, power: int = THREE_POINT_POWER) -> SubleadingVectors:
    """SVD of ``(deflated M/32 / lambda_2)**power``; leading singular pair."""
    lam2 = complex(r.spectrum[1] / LEADING)
    d = deflate(r)
    rho = float(np.abs(np.linalg.eigvals(d.small())).max()) if d.p.shape[1] else 0.0
    if abs(lam2) < ZERO_LAMBDA:
        return SubleadingVectors(np.zeros(256, complex), np.zeros(256, complex), 0.0, lam2, abs(rho - abs(lam2)))
    small = d.small() / lam2
    core = np.linalg.matrix_power(small, power - 1) @ (d.x / lam2)  # N = P @ core
    u, s, vh = np.linalg.svd(core, full_matrices=False)
    ratio = float(s[0] / s[1]) if s.size > 1 and s[1] > 0 else math.inf
    v_right = d.p @ u[:, 0]
    v_left = hermitian_phase(vh[0])
    return SubleadingVectors(v_left, v_right, ratio, lam2, abs(rho - abs(lam2)))


def intersection_kernel(node: Node, v_left: np.ndarray, ports: Sequence[int] = (0, 2, 4)) -> np.ndarray:
    """``G[i, i']`` with ``C(O) = sum O[i, i'] G[i, i']``.

    The three ``ports`` are each contracted with ``v_left`` reshaped to a
    (ket, bra) matrix; the other two legs are traced.
    """
    arr = node.array
    w = v_left.reshape(16, 16)
    y = arr
    for s in ports:
        y = _apply_on_axis(y, w.T, 1 + s)  # y[.., a', ..] = sum_a w[a, a'] N[.., a, ..]
    return y.reshape(4, -1) @ arr.reshape(4, -1).conj().T


def three_point_C(
    r: ReducedPathNode,
    node: Node,
    bulk: BulkOperator,
    power: int = THREE_POINT_POWER,
    threshold: float = SV_RATIO_THRESHOLD,
    ports: Sequence[int] = (0, 2, 4),
    kernel: np.ndarray | None = None,
    vectors: SubleadingVectors | None = None,
) -> ThreePointReport:
    if bulk.constraint != "hermitian_psd_trace1":
        raise ValueError("three-point extraction needs a Hermitian PSD trace-one bulk operator")
    vec = vectors or subleading_vectors(r, power)
    if vec.sv_ratio < threshold:
        return ThreePointReport(None, None, vec.sv_ratio, None, True, "hermitian_psd_trace1", vec.deflation_residual, vec.lambda2)
    g = kernel if kernel is not None else intersection_kernel(node, vec.v_left, ports)
    c = complex(np.sum(bulk.matrix * g))
    if abs(c.imag) > REALNESS_RTOL * max(1.0, abs(c.real)):
        raise RealnessError(f"three-point value {c} is not real")
    return ThreePointReport(vec.v_left, vec.v_right, vec.sv_ratio, c, False, "hermitian_psd_trace1", vec.deflation_residual, vec.lambda2)
