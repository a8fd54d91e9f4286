"""Perfect (AME(6,4)) tensor from three orthogonal Latin cubes.

The cubes are linear forms over GF(4), ``L_q(l, m, n) = A[q] . (l, m, n)``.
The support ``{(L1, L2, L3, l, m, n)}`` is a length-6, dimension-3 MDS code
exactly when every square submatrix of ``A`` is nonsingular, and then every
choice of 3 coordinates determines the other 3.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..tensor_core import DenseTensor
from ..linalg import identity_residual

PERFECT_LEGS = ("i", "j", "k", "l", "m", "n")

# GF(4) = {0, 1, w, w^2} encoded 0, 1, 2, 3; addition is XOR
GF4_MUL = np.array([[0, 0, 0, 0], [0, 1, 2, 3], [0, 2, 3, 1], [0, 3, 1, 2]], dtype=np.int64)

PERMS = tuple(itertools.permutations(range(4)))
IDENTITY = (0, 1, 2, 3)


class CubeError(ValueError):
    """Cube triple fails the Latin or orthogonality property."""


class NotSymmetrizableError(RuntimeError):
    """No value permutation of the last four legs gives cyclic symmetry."""


def gf4_det(mat: np.ndarray) -> int:
    """Determinant over GF(4) (signs are irrelevant in characteristic 2)."""
    mat = np.asarray(mat, dtype=np.int64)
    n = mat.shape[0]
    total = 0
    for perm in itertools.permutations(range(n)):
        prod = 1
        for r, c in enumerate(perm):
            prod = GF4_MUL[prod, mat[r, c]]
        total ^= int(prod)
    return total


def is_superregular(a: np.ndarray) -> bool:
    a = np.asarray(a)
    n = a.shape[0]
    for size in range(1, n + 1):
        for rows in itertools.combinations(range(n), size):
            for cols in itertools.combinations(range(n), size):
                if gf4_det(a[np.ix_(rows, cols)]) == 0:
                    return False
    return True


def cubes_from_coefficients(a: np.ndarray) -> np.ndarray:
    """Values (0-based) of the three linear-form cubes, shape (3, 4, 4, 4)."""
    a = np.asarray(a, dtype=np.int64)
    grid = np.indices((4, 4, 4))
    out = np.zeros((3, 4, 4, 4), dtype=np.int64)
    for q in range(3):
        acc = np.zeros((4, 4, 4), dtype=np.int64)
        for p in range(3):
            acc ^= GF4_MUL[a[q, p], grid[p]]
        out[q] = acc
    return out


def _support_points(cubes0: np.ndarray) -> np.ndarray:
    l, m, n = np.indices((4, 4, 4)).reshape(3, -1)
    return np.stack([cubes0[0].ravel(), cubes0[1].ravel(), cubes0[2].ravel(), l, m, n], axis=1)


def mds_violations(points: np.ndarray) -> list[tuple[int, ...]]:
    """Coordinate triples whose projection of the 64 support points is not injective."""
    bad = []
    for cols in itertools.combinations(range(6), 3):
        keys = points[:, cols] @ np.array([16, 4, 1])
        if np.unique(keys).size != 64:
            bad.append(cols)
    return bad


@dataclass(frozen=True)
class LatinCubeTriple:
    """Cube values in 1..4, shape (3, 4, 4, 4), optional GF(4) coefficients."""

    cubes: np.ndarray
    coefficients: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        cubes = np.asarray(self.cubes, dtype=np.int64)
        if cubes.shape != (3, 4, 4, 4) or cubes.min() < 1 or cubes.max() > 4:
            raise CubeError("expected three 4x4x4 cubes with entries 1..4")
        cubes.flags.writeable = False
        object.__setattr__(self, "cubes", cubes)

    def latin_violations(self) -> int:
        """Number of hyper-rows (48 per cube) that repeat a symbol."""
        bad = 0
        for cube in self.cubes:
            for axis in range(3):
                rows = np.moveaxis(cube, axis, -1).reshape(-1, 4)
                bad += int(sum(len(set(r)) != 4 for r in rows))
        return bad

    def support(self) -> np.ndarray:
        return _support_points(self.cubes - 1)

    def is_valid(self) -> bool:
        return self.latin_violations() == 0 and not mds_violations(self.support())

    @classmethod
    def from_coefficients(cls, a) -> "LatinCubeTriple":
        a = np.asarray(a, dtype=np.int64)
        return cls(cubes_from_coefficients(a) + 1, tuple(map(tuple, a.tolist())))


@dataclass(frozen=True, eq=False)
class PerfectTensor:
    tensor: DenseTensor
    symmetrized: bool = False
    permutations: tuple[tuple[int, ...], ...] = (IDENTITY,) * 4
    cubes: LatinCubeTriple | None = None

    @property
    def array(self) -> np.ndarray:
        return self.tensor.data

    def unitary_array(self) -> np.ndarray:
        """The tensor rescaled so that every 3|3 split is a permutation matrix."""
        return self.tensor.data * 8.0


# Published symmetrizer: pi = rho = tau = (1,3,4,2) 1-based, sigma = id.
REFERENCE_QUADRUPLE = ((0, 2, 3, 1), (0, 2, 3, 1), IDENTITY, (0, 2, 3, 1))


@lru_cache(maxsize=1)
def default_coefficients() -> tuple[tuple[int, ...], ...]:
    """First superregular coefficient matrix (lexicographic order of its
    entries) whose symmetrization search returns the reference quadruple."""
    for flat in itertools.product(range(1, 4), repeat=9):
        a = np.array(flat).reshape(3, 3)
        if not is_superregular(a):
            continue
        pts = _support_points(cubes_from_coefficients(a))
        if not _is_cyclic(_apply_perms(pts, REFERENCE_QUADRUPLE)):
            continue
        base = build_perfect(LatinCubeTriple.from_coefficients(a))
        if symmetrizing_quadruples(base)[0] == REFERENCE_QUADRUPLE:
            return tuple(map(tuple, a.tolist()))
    raise CubeError("no superregular coefficient matrix found")


def generate_latin_cubes() -> LatinCubeTriple:
    triple = LatinCubeTriple.from_coefficients(default_coefficients())
    if not triple.is_valid():
        raise CubeError("generated cubes failed verification")
    return triple


def build_perfect(c: LatinCubeTriple) -> PerfectTensor:
    """Minimal-support tensor ``T[L1, L2, L3, l, m, n] = 1/8``."""
    if not c.is_valid():
        raise CubeError("cube triple is not Latin and mutually orthogonal")
    pts = c.support()
    arr = np.zeros((4,) * 6)
    arr[tuple(pts.T)] = 1.0
    arr /= np.linalg.norm(arr)
    return PerfectTensor(DenseTensor.from_array(arr, PERFECT_LEGS), cubes=c)


def _apply_perms(points: np.ndarray, perms) -> np.ndarray:
    """Support of ``T~[i,j,k,l,m,n] = T[i,j,p0(k),p1(l),p2(m),p3(n)]``."""
    out = points.copy()
    for col, perm in zip(range(2, 6), perms):
        inv = np.argsort(perm)
        out[:, col] = inv[points[:, col]]
    return out


_CODE = 4 ** np.arange(5, -1, -1)


def _keyset(points: np.ndarray, cols) -> np.ndarray:
    w = 4 ** np.arange(len(cols) - 1, -1, -1)
    return np.sort(points[:, list(cols)] @ w)


def _is_cyclic(points: np.ndarray) -> bool:
    rotated = points[:, [0, 5, 1, 2, 3, 4]]
    return np.array_equal(np.sort(points @ _CODE), np.sort(rotated @ _CODE))


def symmetrizing_quadruples(t: PerfectTensor, first_only: bool = True) -> list[tuple]:
    """Exhaustive search over value permutations of legs k, l, m, n.

    Loop order is (k-perm, l-perm, n-perm) outermost with the m-perm
    innermost, lexicographic in each.  A necessary condition involving only
    the k, l and n permutations prunes before the m-perm is tried: the
    projection on (i, j, k, l) of a cyclic support must equal its projection
    on (i, n, j, k).
    """
    pts = _support_from_tensor(t.array)
    found = []
    for pk in PERMS:
        inv_k = np.argsort(pk)
        for pl in PERMS:
            inv_l = np.argsort(pl)
            for pn in PERMS:
                inv_n = np.argsort(pn)
                a = np.column_stack([pts[:, 0], pts[:, 1], inv_k[pts[:, 2]], inv_l[pts[:, 3]]])
                b = np.column_stack([pts[:, 0], inv_n[pts[:, 5]], pts[:, 1], inv_k[pts[:, 2]]])
                if not np.array_equal(_keyset(a, range(4)), _keyset(b, range(4))):
                    continue
                for pm in PERMS:
                    quad = (pk, pl, pm, pn)
                    if _is_cyclic(_apply_perms(pts, quad)):
                        found.append(quad)
                        if first_only:
                            return found
    return found


def _support_from_tensor(arr: np.ndarray) -> np.ndarray:
    pts = np.argwhere(np.abs(arr) > 1e-12)
    if pts.shape[0] != 64:
        raise NotSymmetrizableError("expected a minimal-support tensor with 64 nonzero entries")
    return pts


def symmetrize_perfect(t: PerfectTensor) -> PerfectTensor:
    quads = symmetrizing_quadruples(t)
    if not quads:
        raise NotSymmetrizableError("cubes not symmetrizable; regenerate cubes")
    quad = quads[0]
    arr = t.array
    idx = np.ix_(range(4), range(4), *quad)
    sym = arr[idx]
    if not np.array_equal(sym, np.transpose(sym, (0, 2, 3, 4, 5, 1))):
        raise NotSymmetrizableError("permuted tensor is not cyclic")
    return PerfectTensor(DenseTensor.from_array(sym, PERFECT_LEGS), True, quad, t.cubes)


@dataclass(frozen=True)
class PerfectnessVerdict:
    worst_residual: float
    worst_subset: tuple[int, ...]
    subsets_checked: int
    passed: bool


def is_perfect(t: DenseTensor | np.ndarray, tol: float = 1e-10) -> PerfectnessVerdict:
    """Check every leg subset of size 1, 2 or 3 (41 subsets) for the isometry property.

    For subset ``S`` the matrix ``V`` with rows ``S`` and columns the
    complement must satisfy ``V V^dag = |T|^2 / 4**|S| * Id``.
    """
    arr = t.data if isinstance(t, DenseTensor) else np.asarray(t)
    if arr.shape != (4,) * 6:
        raise ValueError("is_perfect expects a 6-leg tensor with dimension 4 per leg")
    norm2 = float(np.vdot(arr, arr).real)
    worst, worst_s, count = 0.0, (), 0
    for size in (1, 2, 3):
        for s in itertools.combinations(range(6), size):
            rest = [k for k in range(6) if k not in s]
            v = arr.transpose(list(s) + rest).reshape(4**size, -1)
            g = v @ v.conj().T
            target = norm2 / 4**size
            res = float(np.linalg.norm(g - target * np.eye(4**size)) / (target * 2**size))
            count += 1
            if res > worst:
                worst, worst_s = res, s
    return PerfectnessVerdict(worst, worst_s, count, worst < tol)


def is_cyclic_symmetric(t: PerfectTensor | np.ndarray, tol: float = 1e-12) -> bool:
    arr = t.array if isinstance(t, PerfectTensor) else np.asarray(t)
    return float(np.linalg.norm(arr - np.transpose(arr, (0, 2, 3, 4, 5, 1)))) < tol


@lru_cache(maxsize=1)
def default_perfect_tensor() -> PerfectTensor:
    """Symmetrized perfect tensor from :func:`generate_latin_cubes`."""
    return symmetrize_perfect(build_perfect(generate_latin_cubes()))


def perfect_from_recipe(coefficients, permutations) -> PerfectTensor:
    cubes = LatinCubeTriple.from_coefficients(coefficients)
    base = build_perfect(cubes)
    quad = tuple(tuple(int(x) for x in p) for p in permutations)
    sym = base.array[np.ix_(range(4), range(4), *quad)]
    symmetrized = quad != (IDENTITY,) * 4 or is_cyclic_symmetric(sym)
    return PerfectTensor(DenseTensor.from_array(sym, PERFECT_LEGS), symmetrized, quad, cubes)


def marginal_residual(t: PerfectTensor, legs=(0,)) -> float:
    """Distance of a reduced density matrix of ``|T>`` from maximally mixed."""
    arr = t.array
    rest = [k for k in range(6) if k not in legs]
    v = arr.transpose(list(legs) + rest).reshape(4 ** len(legs), -1)
    res, _ = identity_residual(v @ v.conj().T)
    return res
