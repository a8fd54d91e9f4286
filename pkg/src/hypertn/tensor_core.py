"""Dense complex tensors with labeled legs.

Every tensor is a numpy array of ``complex128`` plus an ordered tuple of
``(label, dim)`` pairs.  Contractions go through ``np.tensordot``, which
regroups both operands into matrices and calls a single BLAS product.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

Label = Hashable

DEFAULT_TOL = 1e-10


class TensorError(Exception):
    """Base class for tensor-core failures."""


class ContractionError(TensorError):
    """Raised when paired legs have incompatible dimensions."""


class ArgumentError(TensorError, ValueError):
    """Raised for malformed leg specifications."""


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable dense tensor.

    Attributes
    ----------
    legs : tuple of (label, dim)
        Ordered leg specification; the array axes follow this order.
    data : ndarray
        Complex amplitudes with ``data.shape == dims``.
    """

    legs: tuple[tuple[Label, int], ...]
    data: np.ndarray
    norm_cache: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        legs = tuple((lab, int(dim)) for lab, dim in self.legs)
        labels = [lab for lab, _ in legs]
        if len(set(labels)) != len(labels):
            raise ArgumentError(f"duplicate leg labels: {labels}")
        if any(dim < 1 for _, dim in legs):
            raise ArgumentError("leg dimensions must be positive")
        # private copy so that freezing it never touches the caller's array
        data = np.array(self.data, dtype=np.complex128, copy=True)
        dims = tuple(dim for _, dim in legs)
        if data.size != int(np.prod(dims, dtype=np.int64)):
            raise ArgumentError(f"data size {data.size} does not match dims {dims}")
        data = data.reshape(dims)
        if not np.all(np.isfinite(data)):
            raise TensorError("tensor contains NaN or Inf entries")
        data.flags.writeable = False
        object.__setattr__(self, "legs", legs)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array: np.ndarray, labels: Sequence[Label]) -> "DenseTensor":
        array = np.asarray(array)
        if array.ndim != len(labels):
            raise ArgumentError(f"{array.ndim}-d array but {len(labels)} labels")
        return cls(tuple(zip(labels, array.shape)), array)

    @property
    def labels(self) -> tuple[Label, ...]:
        return tuple(lab for lab, _ in self.legs)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.legs)

    @property
    def ndim(self) -> int:
        return len(self.legs)

    def dim(self, label: Label) -> int:
        return self.dims[self.axis(label)]

    def axis(self, label: Label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ArgumentError(f"no leg labeled {label!r}") from None

    def norm(self) -> float:
        if self.norm_cache is None:
            object.__setattr__(self, "norm_cache", float(np.linalg.norm(self.data)))
        return self.norm_cache

    def conj(self) -> "DenseTensor":
        return DenseTensor(self.legs, self.data.conj())

    def scale(self, factor: complex) -> "DenseTensor":
        return DenseTensor(self.legs, self.data * factor)

    def relabel(self, mapping: Mapping[Label, Label]) -> "DenseTensor":
        return DenseTensor(tuple((mapping.get(l, l), d) for l, d in self.legs), self.data)

    def transpose(self, labels: Sequence[Label]) -> "DenseTensor":
        if len(labels) != self.ndim or set(labels) != set(self.labels):
            raise ArgumentError("transpose needs a permutation of the leg labels")
        axes = [self.axis(l) for l in labels]
        return DenseTensor(tuple(self.legs[a] for a in axes), self.data.transpose(axes))

    def matrix(self, rows: Sequence[Label], cols: Sequence[Label]) -> np.ndarray:
        """Return the tensor as a (rows x cols) matrix."""
        t = self.transpose(list(rows) + list(cols))
        nr = int(np.prod([self.dim(l) for l in rows], dtype=np.int64))
        return t.data.reshape(nr, -1)

    def __repr__(self) -> str:
        return f"DenseTensor(legs={self.legs})"


@dataclass(frozen=True)
class LegGrouping:
    """Ordered partition of legs into composite legs.

    ``blocks`` is a sequence of ``(new_label, (old_label, ...))``.  Within a
    block the first old leg is the most significant digit of the composite
    index.
    """

    blocks: tuple[tuple[Label, tuple[Label, ...]], ...]

    def __init__(self, blocks: Iterable[tuple[Label, Iterable[Label]]]):
        object.__setattr__(self, "blocks", tuple((n, tuple(m)) for n, m in blocks))

    @property
    def members(self) -> list[Label]:
        return [lab for _, mem in self.blocks for lab in mem]


def relative_distance(a: np.ndarray | DenseTensor, b: np.ndarray | DenseTensor) -> float:
    """Frobenius distance of ``a`` and ``b`` relative to ``max(|b|, 1e-300)``."""
    a = a.data if isinstance(a, DenseTensor) else np.asarray(a)
    b = b.data if isinstance(b, DenseTensor) else np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def allclose(a: np.ndarray | DenseTensor, b: np.ndarray | DenseTensor, tol: float = DEFAULT_TOL) -> bool:
    return relative_distance(a, b) < tol


def contract(a: DenseTensor, b: DenseTensor, pairs: Sequence[tuple[Label, Label]]) -> DenseTensor:
    """Sum over paired legs.  Unpaired legs of ``a`` come first, then ``b``."""
    left = [p[0] for p in pairs]
    right = [p[1] for p in pairs]
    if len(set(left)) != len(left) or len(set(right)) != len(right):
        raise ArgumentError("a leg may be paired only once")
    ax_a = [a.axis(l) for l in left]
    ax_b = [b.axis(l) for l in right]
    for la, lb, i, j in zip(left, right, ax_a, ax_b):
        if a.dims[i] != b.dims[j]:
            raise ContractionError(f"dimension mismatch {la!r}:{a.dims[i]} vs {lb!r}:{b.dims[j]}")
    free = [leg for k, leg in enumerate(a.legs) if k not in ax_a]
    free += [leg for k, leg in enumerate(b.legs) if k not in ax_b]
    data = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
    return DenseTensor(tuple(free), data)


def regroup(t: DenseTensor, g: LegGrouping) -> DenseTensor:
    """Fuse legs block-wise into composite legs."""
    members = g.members
    if len(members) != len(set(members)) or set(members) != set(t.labels) or len(members) != t.ndim:
        raise ArgumentError("grouping must partition the tensor's legs exactly")
    moved = t.transpose(members)
    dims = [int(np.prod([t.dim(l) for l in mem], dtype=np.int64)) for _, mem in g.blocks]
    legs = tuple((name, d) for (name, _), d in zip(g.blocks, dims))
    return DenseTensor(legs, moved.data.reshape(dims))


def ungroup(t: DenseTensor, g: LegGrouping, dims: Mapping[Label, int]) -> DenseTensor:
    """Inverse of :func:`regroup`; ``dims`` gives the dimension of every old leg."""
    legs: list[tuple[Label, int]] = []
    for name, _ in t.legs:
        block = dict(g.blocks).get(name)
        if block is None:
            legs.append((name, t.dim(name)))
        else:
            legs.extend((lab, dims[lab]) for lab in block)
    return DenseTensor(tuple(legs), t.data.reshape([d for _, d in legs]))


def partial_trace(t: DenseTensor, pairs: Sequence[tuple[Label, Label]]) -> DenseTensor:
    """Trace out each pair of legs."""
    flat = [l for p in pairs for l in p]
    if len(set(flat)) != len(flat):
        raise ArgumentError("trace pairs must be disjoint")
    for x, y in pairs:
        if t.dim(x) != t.dim(y):
            raise ContractionError(f"cannot trace {x!r} against {y!r}: dims differ")
    letters = {lab: chr(97 + k) if k < 26 else chr(65 + k - 26) for k, lab in enumerate(t.labels)}
    for x, y in pairs:
        letters[y] = letters[x]
    spec_in = "".join(letters[l] for l in t.labels)
    keep = [leg for leg in t.legs if leg[0] not in flat]
    spec_out = "".join(letters[l] for l, _ in keep)
    return DenseTensor(tuple(keep), np.einsum(f"{spec_in}->{spec_out}", t.data))


def reshuffle(u: np.ndarray | DenseTensor, d: int | None = None) -> np.ndarray:
    """Realignment ``R[(i,k),(j,l)] = U[(i,j),(k,l)]`` of a two-site matrix.

    Accepts a ``d^2 x d^2`` matrix or a 4-leg tensor ``(i, j, k, l)``.  The
    map is its own inverse.
    """
    arr = u.data if isinstance(u, DenseTensor) else np.asarray(u)
    if arr.ndim == 2:
        if arr.shape[0] != arr.shape[1]:
            raise ArgumentError("reshuffle expects a square matrix")
        d = d or int(round(np.sqrt(arr.shape[0])))
        if d * d != arr.shape[0]:
            raise ArgumentError("matrix size is not a square of the local dimension")
        arr = arr.reshape(d, d, d, d)
    elif arr.ndim != 4:
        raise ArgumentError("reshuffle expects a 4-leg tensor")
    d = arr.shape[0]
    if any(s != d for s in arr.shape):
        raise ArgumentError("all four legs must share one dimension")
    return arr.transpose(0, 2, 1, 3).reshape(d * d, d * d)


_MAGIC = b"HTNT"


def dumps(t: DenseTensor) -> bytes:
    """Serialize as magic, header length, JSON header, then re/im float64 pairs (little endian)."""
    header = {
        "legs": [[_json_label(l), d] for l, d in t.legs],
        "endianness": "little",
        "dtype": "complex128-interleaved",
    }
    raw = json.dumps(header).encode()
    payload = np.ascontiguousarray(t.data).view(np.float64).astype("<f8").tobytes()
    return _MAGIC + struct.pack("<Q", len(raw)) + raw + payload


def loads(blob: bytes) -> DenseTensor:
    if blob[:4] != _MAGIC:
        raise ArgumentError("not a serialized tensor")
    (n,) = struct.unpack("<Q", blob[4:12])
    header = json.loads(blob[12 : 12 + n].decode())
    legs = tuple((_unjson_label(l), int(d)) for l, d in header["legs"])
    flat = np.frombuffer(blob[12 + n :], dtype="<f8").astype(np.float64)
    data = flat.view(np.complex128).reshape([d for _, d in legs])
    return DenseTensor(legs, data.copy())


def save(t: DenseTensor, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(t))


def load(path) -> DenseTensor:
    with open(path, "rb") as fh:
        return loads(fh.read())


def _json_label(label: Label):
    if isinstance(label, tuple):
        return {"tuple": [_json_label(x) for x in label]}
    return label


def _unjson_label(obj) -> Label:
    if isinstance(obj, dict):
        return tuple(_unjson_label(x) for x in obj["tuple"])
    return obj


__all__ = [
    "ArgumentError",
    "ContractionError",
    "DenseTensor",
    "LegGrouping",
    "TensorError",
    "allclose",
    "contract",
    "dumps",
    "load",
    "loads",
    "partial_trace",
    "regroup",
    "relative_distance",
    "reshuffle",
    "save",
    "ungroup",
]
