import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertn.tensor_core import (
    ArgumentError,
    ContractionError,
    DenseTensor,
    LegGrouping,
    TensorError,
    allclose,
    contract,
    dumps,
    load,
    loads,
    partial_trace,
    regroup,
    reshuffle,
    save,
    ungroup,
)
from hypertn.blocks import default_perfect_tensor
from hypertn.gates import haar_unitary, named_gate


def _random(shape, seed=0, labels=None):
    rng = np.random.default_rng(seed)
    arr = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    labels = labels or [f"x{k}" for k in range(len(shape))]
    return DenseTensor.from_array(arr, labels)


def test_construction_rejects_bad_input():
    with pytest.raises(ArgumentError):
        DenseTensor((("a", 2), ("a", 2)), np.zeros(4))
    with pytest.raises(ArgumentError):
        DenseTensor((("a", 2),), np.zeros(3))
    with pytest.raises(TensorError):
        DenseTensor((("a", 2),), np.array([1.0, np.nan]))


def test_input_array_stays_writeable():
    arr = np.zeros((2, 2))
    t = DenseTensor.from_array(arr, ["a", "b"])
    arr[0, 0] = 5.0
    assert t.data[0, 0] == 0
    assert not t.data.flags.writeable


def test_identity_composition():
    eye = DenseTensor.from_array(np.eye(2), ["o", "i"])
    out = contract(eye, eye.relabel({"o": "p", "i": "q"}), [("i", "p")])
    assert out.labels == ("o", "q")
    assert allclose(out.data, np.eye(2))


def test_bell_overlap_is_dimension():
    phi = DenseTensor.from_array(np.eye(2), ["a", "b"])
    assert contract(phi, phi, [("a", "a"), ("b", "b")]).data == pytest.approx(2.0)


def test_swap_first_orthogonality_relation():
    u = DenseTensor.from_array(named_gate("SWAP").matrix.reshape(2, 2, 2, 2), ["i", "j", "k", "l"])
    out = contract(u, u.conj().relabel({"k": "k2", "l": "l2"}), [("i", "i"), ("j", "j")])
    assert allclose(out.data.reshape(4, 4), np.eye(4))


def test_contract_errors():
    a = _random((2, 3), labels=["a", "b"])
    b = _random((3, 2), labels=["c", "d"])
    with pytest.raises(ContractionError):
        contract(a, b, [("a", "c")])
    with pytest.raises(ArgumentError):
        contract(a, b, [("b", "c"), ("b", "d")])


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
@settings(max_examples=30, deadline=None)
def test_contract_is_bilinear(alpha):
    a = _random((3, 4), 1, ["a", "b"])
    b = _random((4, 2), 2, ["c", "d"])
    lhs = contract(a.scale(alpha), b, [("b", "c")]).data
    rhs = alpha * contract(a, b, [("b", "c")]).data
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(rhs), 1e-300)


def test_isometry_preserves_norm():
    v = DenseTensor.from_array(haar_unitary(16, 3).matrix[:, :8], ["out", "in"])
    x = _random((8,), 4, ["in"])
    assert abs(contract(v, x, [("in", "in")]).norm() - x.norm()) < 1e-10 * x.norm()


def test_regroup_shapes_and_inverse():
    t = _random((4,) * 6, 5, list("ijklmn"))
    g = LegGrouping([("row", ("i", "j")), ("col", ("k", "l", "m", "n"))])
    m = regroup(t, g)
    assert m.dims == (16, 256)
    assert m.norm() == pytest.approx(t.norm())
    back = ungroup(m, g, dict(t.legs))
    assert back.labels == t.labels
    assert np.array_equal(back.data, t.data)
    with pytest.raises(ArgumentError):
        regroup(t, LegGrouping([("row", ("i", "j"))]))


def test_regroup_node_directions():
    t = _random((4,) + (2,) * 20, 6, ["bulk"] + [f"q{k}" for k in range(20)])
    g = LegGrouping([("bulk", ("bulk",))] + [(f"d{k}", tuple(f"q{4 * k + r}" for r in range(4))) for k in range(5)])
    assert regroup(t, g).dims == (4,) + (16,) * 5


def test_partial_trace_examples():
    eye = DenseTensor.from_array(np.eye(4), ["a", "b"])
    assert partial_trace(eye, [("a", "b")]).data == pytest.approx(4.0)
    phi = np.eye(2).reshape(4)
    rho = DenseTensor.from_array(np.outer(phi, phi).reshape(2, 2, 2, 2), ["a", "b", "a_", "b_"])
    assert allclose(partial_trace(rho, [("b", "b_")]).data, np.eye(2))
    with pytest.raises(ContractionError):
        partial_trace(_random((2, 3), labels=["a", "b"]), [("a", "b")])


def test_partial_trace_of_ame_projector():
    t = default_perfect_tensor().tensor.data.reshape(64, 64)
    t = t / np.linalg.norm(t)
    proj = np.outer(t.reshape(-1), t.reshape(-1).conj()).reshape(64, 64, 64, 64)
    rho = DenseTensor.from_array(proj, ["a", "b", "a_", "b_"])
    assert allclose(partial_trace(rho, [("b", "b_")]).data, np.eye(64) / 64)


def test_reshuffle_examples():
    r = reshuffle(named_gate("SWAP").matrix)
    assert allclose(r @ r.conj().T, np.eye(4))
    assert np.linalg.matrix_rank(reshuffle(np.eye(4))) == 1
    u = haar_unitary(4, 9).matrix
    assert np.array_equal(reshuffle(reshuffle(u)), u)
    u4 = u.reshape(2, 2, 2, 2)
    assert reshuffle(u)[1 * 2 + 0, 1 * 2 + 1] == u4[1, 1, 0, 1]
    with pytest.raises(ArgumentError):
        reshuffle(np.zeros((2, 2, 2)))


@given(st.lists(st.integers(1, 3), min_size=1, max_size=4), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_serialization_roundtrip(dims, seed):
    t = _random(tuple(dims), seed, [f"leg{k}" for k in range(len(dims))])
    assert np.array_equal(loads(dumps(t)).data, t.data)
    assert loads(dumps(t)).legs == t.legs


def test_serialization_tuple_labels(tmp_path):
    t = DenseTensor.from_array(np.arange(4.0).reshape(2, 2) + 1j, [("a", 1), "b"])
    save(t, tmp_path / "t.htnt")
    back = load(tmp_path / "t.htnt")
    assert back.labels == (("a", 1), "b")
    assert np.array_equal(back.data, t.data)
