import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from hypertn.blocks import (
    ReducedPathNode,
    build_frame,
    build_node,
    default_perfect_tensor,
    family_recipe,
    node_from_recipe,
    random_recipe,
    reduced_path_node,
)
from hypertn.correlations import (
    MU,
    BoundaryObservable,
    BulkOperator,
    DegenerateSpectrumError,
    EndCaps,
    RecipeMismatchError,
    SizeError,
    UnderflowError,
    binomial_step_factor,
    brute_force_sandwich,
    central_charge_bound,
    correlator_sequence,
    decay_fit,
    deflate,
    delta_from_lambda,
    end_caps,
    even_step_ratio,
    fit_decay,
    random_density_matrix,
    random_traceless_probe,
    scaling_dimension,
    subleading_vectors,
    three_point_C,
    two_point_transfer,
)
from hypertn.gates import GateSpec, named_gate
from hypertn.network import build_network


@pytest.fixture(scope="module")
def reference():
    node = node_from_recipe(family_recipe(0.302, "f1", 0.817), verify=False)
    return node, reduced_path_node(node), end_caps(node)


@pytest.fixture(scope="module")
def happy():
    node = build_node(default_perfect_tensor(), build_frame(named_gate("SWAP")), GateSpec.from_matrix(np.eye(16), (2, 2, 2, 2)))
    return node, reduced_path_node(node), end_caps(node)


def synthetic_transfer(subleading: np.ndarray, seed: int = 0) -> np.ndarray:
    """256x256 matrix with leading pair ``(32, Phi)`` on both sides and
    ``32 * subleading`` acting on an orthogonal complement."""
    rng = np.random.default_rng(seed)
    phi = np.eye(16).reshape(256) / 4.0
    comp = null_space(phi[None, :])
    k = subleading.shape[0]
    s = rng.standard_normal((k, k)) + 3 * np.eye(k)
    block = s @ subleading @ np.linalg.inv(s)
    basis = np.column_stack([phi, comp[:, :k]])
    core = np.zeros((k + 1, k + 1), complex)
    core[0, 0] = 1.0
    core[1:, 1:] = block
    return 32.0 * basis @ core @ basis.T


def jordan(lam: complex, size: int) -> np.ndarray:
    return lam * np.eye(size) + np.eye(size, k=1)


# central charge and scaling dimension


def test_central_charge():
    c = central_charge_bound()
    assert abs(c - 18.948) < 0.01 and c > 1
    assert c == pytest.approx(9 * 4 * math.log(2) / math.log(MU), rel=1e-15)


def test_delta_examples():
    assert delta_from_lambda(1 / MU) == pytest.approx(1.0, rel=1e-14)
    lam = MU**-0.858852
    assert round(lam, 4) == 0.3227
    assert delta_from_lambda(lam) == pytest.approx(0.858852, rel=1e-12)
    assert delta_from_lambda(0.0) == math.inf


@given(st.floats(1e-8, 0.999))
@settings(max_examples=50, deadline=None)
def test_delta_positive_below_unit_modulus(lam):
    assert delta_from_lambda(lam) > 0


def test_reference_spectral_report(reference):
    _, r, _ = reference
    rep = scaling_dimension(r, jordan=True)
    assert abs(rep.lambda2) == pytest.approx(0.083127, abs=1e-6)
    assert rep.delta == pytest.approx(-math.log(abs(rep.lambda2)) / math.log(MU), rel=1e-14)
    assert rep.deflation_residual < 1e-7 and rep.multiplicity == 1
    assert rep.jordan_block_hint == 1
    assert rep.left_is_phi < 1e-8
    assert np.all(np.diff(rep.moduli) <= 0)


def test_happy_delta_sentinel(happy):
    _, r, _ = happy
    rep = scaling_dimension(r)
    assert abs(rep.lambda2) < 1e-8 and rep.delta == math.inf
    assert rep.to_dict()["delta"] == "inf"


def test_degenerate_unit_modulus():
    m = synthetic_transfer(np.diag([1.0, 0.2]))
    with pytest.raises(DegenerateSpectrumError):
        scaling_dimension(ReducedPathNode(m, "right"))


def test_deflation_radius_matches_lambda2(reference):
    _, r, _ = reference
    d = deflate(r)
    assert abs(np.abs(np.linalg.eigvals(d.small())).max() - abs(r.spectrum[1]) / 32) < 1e-7


# two-point functions


def test_one_point_factorization_with_identity_probe(reference):
    node, r, caps = reference
    ident = BoundaryObservable(np.eye(16))
    rng = np.random.default_rng(2)
    for n in (1, 2, 5):
        for _ in range(3):
            v2 = random_traceless_probe(rng)
            assert abs(two_point_transfer(r, n, caps, ident, v2)) < 1e-8
        assert two_point_transfer(r, n, caps, ident, ident) == pytest.approx(1.0, rel=1e-8)


def test_bulk_trace_linearity(reference):
    _, r, caps = reference
    rng = np.random.default_rng(3)
    v1, v2 = random_traceless_probe(rng), random_traceless_probe(rng)
    rho = random_density_matrix(rng)
    doubled = BulkOperator(2 * rho.matrix)
    for n in (1, 3):
        one = two_point_transfer(r, n, caps, v1, v2, rho)
        assert two_point_transfer(r, n, caps, v1, v2, doubled) == 2 * one


def test_leading_behavior_at_n30(reference):
    _, r, caps = reference
    rng = np.random.default_rng(4)
    for _ in range(3):
        a = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        b = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        v1, v2 = BoundaryObservable(a + a.conj().T), BoundaryObservable(b + b.conj().T)
        expected = np.trace(v1.matrix) * np.trace(v2.matrix) / 256
        assert abs(two_point_transfer(r, 30, caps, v1, v2) - expected) < 1e-6 * abs(expected)


@pytest.mark.parametrize("n", range(1, 7))
def test_happy_two_point_vanishes(happy, n):
    _, r, caps = happy
    rng = np.random.default_rng(n)
    for _ in range(3):
        v1, v2 = random_traceless_probe(rng), random_traceless_probe(rng)
        assert abs(two_point_transfer(r, n, caps, v1, v2)) < 1e-9


def test_recipe_mismatch(reference):
    _, r, _ = reference
    other = end_caps(family_recipe(0.5, "f1", 0.5))
    with pytest.raises(RecipeMismatchError):
        two_point_transfer(r, 3, other, random_traceless_probe(np.random.default_rng(0)), random_traceless_probe(np.random.default_rng(1)))
    with pytest.raises(ValueError):
        two_point_transfer(r, 0, end_caps(reference[0]), BoundaryObservable(np.eye(16)), BoundaryObservable(np.eye(16)))


def test_observable_validation():
    with pytest.raises(ValueError):
        BoundaryObservable(np.eye(16), traceless=True)
    with pytest.raises(ValueError):
        BoundaryObservable(np.triu(np.ones((16, 16))), physical=True)
    with pytest.raises(ValueError):
        BulkOperator(np.eye(4), "hermitian_psd_trace1")
    with pytest.raises(ValueError):
        BulkOperator(np.diag([2.0, -1.0, 0, 0]), "hermitian_psd_trace1")


# brute-force oracle


def test_brute_force_normalization_and_one_point(reference):
    node, _, _ = reference
    net = build_network(0)
    assert brute_force_sandwich(net, node) == pytest.approx(1.0, rel=1e-12)
    rng = np.random.default_rng(5)
    assert abs(brute_force_sandwich(net, node, probes={1: random_traceless_probe(rng)})) < 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_oracle_equivalence_single_tile(seed):
    rng = np.random.default_rng(100 + seed)
    recipe = random_recipe(seed, 200 + seed)
    node = node_from_recipe(recipe, verify=False)
    r = reduced_path_node(node)
    v1, v2 = random_traceless_probe(rng), random_traceless_probe(rng)
    rho = random_density_matrix(rng)
    brute = brute_force_sandwich(build_network(0), node, rho, {0: v1, 2: v2})
    transfer = two_point_transfer(r, 1, end_caps(node), v1, v2, rho)
    assert abs(brute - transfer) < 1e-8 * abs(brute)


def test_brute_force_two_tiles_matches_transfer(reference):
    node, _, _ = reference
    net = build_network(1).subnetwork([0, 1])
    (t0, t1) = (0, 1)
    s0 = next(s for s in range(5) if net.neighbors[t0][s] == (t1, net.neighbors[t0][s][1]) if net.neighbors[t0][s])
    s1 = net.neighbors[t0][s0][1]
    # path enters tile 0 opposite the shared edge and leaves tile 1 likewise
    for turn, off in (("right", 2), ("left", 3)):
        leg_in = net.leg_id(((t0), (s0 - off) % 5))
        leg_out = net.leg_id((t1, (s1 + off) % 5))
        rng = np.random.default_rng(off)
        v1, v2 = random_traceless_probe(rng), random_traceless_probe(rng)
        brute = brute_force_sandwich(net, node, None, {leg_in: v1, leg_out: v2})
        r = reduced_path_node(node, turn)
        transfer = two_point_transfer(r, 2, end_caps(node, turn), v1, v2)
        assert abs(brute - transfer) < 1e-8 * abs(brute)


def test_brute_force_size_guard(reference):
    node, _, _ = reference
    with pytest.raises(SizeError):
        brute_force_sandwich(build_network(1), node, max_elements=2**20)


# decay laws on synthetic matrices


def test_decay_fit_diagonalizable_synthetic():
    lam2 = 0.3
    m = synthetic_transfer(np.diag([lam2, 0.1, -0.05]))
    r = ReducedPathNode(m, "right")
    caps = EndCaps(m, m, None)
    rng = np.random.default_rng(6)
    v1, v2 = random_traceless_probe(rng), random_traceless_probe(rng)
    fit = decay_fit(r, range(12, 24), v1, v2, caps, block_size=1)
    assert abs(fit.delta_hat - delta_from_lambda(lam2)) < 1e-3
    assert fit.discrepancy < 1e-3


def test_decay_fit_underflow(reference):
    _, r, caps = reference
    rng = np.random.default_rng(7)
    with pytest.raises(UnderflowError):
        decay_fit(r, range(10, 20), random_traceless_probe(rng), random_traceless_probe(rng), caps)


def test_fit_decay_recovers_jordan_slope():
    lam = 0.4
    ns = list(range(20, 60, 4))
    values = np.array([math.comb(n, 2) * lam ** (n - 2) for n in ns])
    fit = fit_decay(values, ns, block_size=3)
    assert abs(fit.delta_hat - delta_from_lambda(lam)) < 1e-12
    with pytest.raises(ValueError):
        fit_decay(values[:3], ns[:3])


def deflated_synthetic(blocks: list[np.ndarray], seed: int = 0) -> np.ndarray:
    """Dense similarity transform of a block-diagonal Jordan structure."""
    size = sum(b.shape[0] for b in blocks)
    core = np.zeros((size, size), complex)
    k = 0
    for b in blocks:
        core[k : k + b.shape[0], k : k + b.shape[0]] = b
        k += b.shape[0]
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((size, size)) + 3 * np.eye(size)
    return s @ core @ np.linalg.inv(s)


@pytest.mark.parametrize("lam2", [0.05, 0.1, 0.2, 0.3227])
def test_jordan_even_step_ratio(lam2):
    # raw ratio of even-step correlators for a 2x2 Jordan block, compared with lambda_2**2
    m = deflated_synthetic([jordan(lam2, 2), np.diag([0.3 * lam2, -0.2 * lam2])], seed=1)
    rng = np.random.default_rng(8)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    c60, c62 = correlator_sequence(m, x, y, [60, 62])
    assert abs(even_step_ratio(c60, c62) - lam2**2) < 1e-3


@pytest.mark.parametrize("k", [1, 2, 3])
def test_jordan_ratio_binomial_correction(k):
    lam2 = 0.3227
    m = deflated_synthetic([jordan(lam2, k), np.diag([0.1, -0.05])], seed=2)
    rng = np.random.default_rng(9)
    x, y = rng.standard_normal(k + 2), rng.standard_normal(k + 2)
    # the corrected ratio still carries an O(1/n**2) term from the rest of the chain
    c = correlator_sequence(m, x, y, [200, 202])
    corrected = even_step_ratio(*c) / binomial_step_factor(200, k)
    assert abs(corrected - lam2**2) < 1e-3 * lam2**2


def test_binomial_step_factor_values():
    assert binomial_step_factor(10, 1) == 1.0
    assert binomial_step_factor(10, 2) == pytest.approx(12 / 10)
    assert binomial_step_factor(10, 3) == pytest.approx(66 / 45)


def test_jordan_hint_on_synthetic():
    m = synthetic_transfer(jordan(0.5, 2), seed=3)
    rep = scaling_dimension(ReducedPathNode(m, "right"), jordan=True)
    assert rep.jordan_block_hint == 2


def test_correlator_sequence_requires_sorted_lengths():
    with pytest.raises(ValueError):
        correlator_sequence(np.eye(2), np.ones(2), np.ones(2), [3, 1])


# three-point coefficient


def test_three_point_reference_is_real(reference):
    node, r, _ = reference
    rep = three_point_C(r, node, BulkOperator.maximally_mixed())
    assert not rep.dismissed and rep.sv_ratio >= 100
    assert abs(rep.c_value.imag) < 1e-8 * max(1.0, abs(rep.c_value.real))
    assert rep.deflation_residual < 1e-7
    w = rep.v_left.reshape(16, 16)
    assert np.linalg.norm(w - w.conj().T) < 1e-8


def test_three_point_wishart_draws_are_real(reference):
    node, r, _ = reference
    vec = subleading_vectors(r)
    rng = np.random.default_rng(10)
    for _ in range(10):
        rep = three_point_C(r, node, random_density_matrix(rng), vectors=vec)
        assert abs(rep.c_value.imag) < 1e-8 * max(1.0, abs(rep.c_value.real))


def test_three_point_requires_density_matrix(reference):
    node, r, _ = reference
    with pytest.raises(ValueError):
        three_point_C(r, node, BulkOperator(np.eye(4)))


def test_degenerate_modulus_is_dismissed():
    lam = 0.3
    block = np.diag([lam, lam * np.exp(2.1j), 0.05])
    r = ReducedPathNode(synthetic_transfer(block, seed=4), "right")
    vec = subleading_vectors(r)
    assert vec.sv_ratio < 100
    rep = three_point_C(r, None, BulkOperator.maximally_mixed(), vectors=vec)
    assert rep.dismissed and rep.c_value is None


def test_happy_node_three_point_dismissed(happy):
    node, r, _ = happy
    rep = three_point_C(r, node, BulkOperator.maximally_mixed())
    assert rep.dismissed
