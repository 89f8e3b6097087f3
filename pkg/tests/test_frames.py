import math

import numpy as np
import pytest

from core_pipeline import (
    DimensionMismatchError, NotAFrameError, NotApproximatelyDualError, NotPseudoDualError,
    PerturbationTooLargeError,
)
from frames import (
    FiniteFrame, FrameBoundsEstimate, PerturbationData, analysis, approx_duality_defect, c1_bound,
    canonical_dual, difference_bessel_bound, example_a1, example_r1, frame_bounds, is_pseudo_dual,
    mixed_frame_operator, natural_dual, neumann_dual_partial, operator_norm, perturbation_defect_chain,
    perturbed_canonical_dual, pseudo_dual_lower_bound, pseudo_inverse_dual, random_approximate_pair,
    random_frame, self_scaling_bound, synthesis, t1_bound,
)
from utils import make_rng

E1, E2 = np.eye(2)
ZERO = np.zeros(2)


def frame(*vectors):
    return FiniteFrame.from_vectors(vectors)


def assert_frames_close(actual, expected, tol=1e-12):
    assert actual.synthesis.shape == expected.synthesis.shape
    assert np.allclose(actual.synthesis, expected.synthesis, atol=tol, rtol=0)


@pytest.mark.parametrize(("vectors", "coeffs", "expected"), [
    ((ZERO, E1, E2), (5, 1, 2), (1, 2)),
    ((ZERO, E1, E2), (0, 0, 0), (0, 0)),
    ((E1, E1, E2), (1, 1, 0), (2, 0)),
])
def test_synthesis(vectors, coeffs, expected):
    assert np.allclose(synthesis(frame(*vectors), coeffs), expected)


@pytest.mark.parametrize(("vectors", "f", "expected"), [
    ((ZERO, E1, E2), E1, (0, 1, 0)),
    ((E1, E2), (3 + 1j, -2), (3 + 1j, -2)),
    ((E1, E1, E2), (1, 1), (1, 1, 1)),
])
def test_analysis(vectors, f, expected):
    assert np.allclose(analysis(frame(*vectors), f), expected)


def test_analysis_is_conjugate_linear_in_frame():
    F = frame(np.array([1j, 0]), E2)
    assert np.allclose(analysis(F, E1), (-1j, 0))


def test_synthesis_rejects_wrong_coefficient_count():
    with pytest.raises(DimensionMismatchError):
        synthesis(frame(E1, E2), (1, 2, 3))


def test_mixed_frame_operator_examples():
    assert np.allclose(mixed_frame_operator(frame(E1, E2), frame(E1, E2)).entries, np.eye(2))
    F, G = example_a1(7.0)
    assert np.allclose(mixed_frame_operator(F, G).entries, np.eye(2))
    F, _, G = example_r1(0.5)
    assert np.allclose(mixed_frame_operator(F, G).entries, np.diag([0.0, 1.0]))


@pytest.mark.parametrize(("matrix", "expected"), [
    (np.eye(2), 1.0),
    (np.diag([0.5, 1.0]), 1.0),
    (np.array([[2.0, 0.0], [0.0, 1.0]]), 2.0),
])
def test_operator_norm(matrix, expected):
    assert operator_norm(matrix) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(("vectors", "lower", "upper"), [
    ((ZERO, E1, E2), 1.0, 1.0),
    ((2 * E1, E1, E2), 1.0, 5.0),
    ((E1, E1, E2), 1.0, 2.0),
    ((E1, ZERO), 0.0, 1.0),
])
def test_frame_bounds(vectors, lower, upper):
    bounds = frame_bounds(frame(*vectors))
    assert bounds.lower == pytest.approx(lower, abs=1e-12)
    assert bounds.upper == pytest.approx(upper, abs=1e-12)
    assert bounds.is_frame == (lower > 0)


def test_frame_bounds_fewer_vectors_than_dimension():
    bounds = frame_bounds(FiniteFrame.from_vectors([E1]))
    assert bounds.lower == 0.0
    assert not bounds.is_frame


def test_frame_bounds_estimate_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        FrameBoundsEstimate(2.0, 1.0)


@pytest.mark.parametrize(("F", "G", "expected"), [
    (example_a1()[0], example_a1()[1], 0.0),
    (frame(E1, E2), frame(E1, E2), 0.0),
    (frame(E1, E2), frame(E1 / 2, E2), 0.5),
])
def test_approx_duality_defect(F, G, expected):
    assert approx_duality_defect(F, G) == pytest.approx(expected, abs=1e-12)


def test_approx_duality_defect_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        approx_duality_defect(frame(E1, E2), frame(E1, E2, E1))


def test_adjoint_symmetry_on_random_pairs():
    rng = make_rng(7)
    for _ in range(20):
        F, G = random_frame(rng, 4, 6), random_frame(rng, 4, 6)
        T, U = F.synthesis, G.synthesis
        forward = operator_norm(np.eye(4) - U @ T.conj().T)
        backward = operator_norm(np.eye(4) - T @ U.conj().T)
        assert forward == pytest.approx(backward, abs=1e-10)


@pytest.mark.parametrize(("F", "G", "expected"), [
    (example_r1(0.5)[0], example_r1(0.5)[2], False),
    (frame(E1, E2), frame(E1, E2), True),
    (frame(E1, E2), frame(E2, E1), True),
])
def test_is_pseudo_dual(F, G, expected):
    assert is_pseudo_dual(F, G) is expected


def test_is_pseudo_dual_rejects_nonpositive_tol():
    with pytest.raises(ValueError):
        is_pseudo_dual(frame(E1, E2), frame(E1, E2), tol=0)


def test_natural_dual_examples():
    basis = frame(E1, E2)
    assert_frames_close(natural_dual(basis, basis), basis)
    redundant = frame(E1, E1, E2)
    assert_frames_close(natural_dual(redundant, redundant), frame(E1 / 2, E1 / 2, E2))
    F, G = example_a1(3.0)
    assert_frames_close(natural_dual(F, G), G)


def test_natural_dual_is_dual_for_pseudo_dual_pair():
    rng = make_rng(11)
    F, G = random_frame(rng, 3, 5), random_frame(rng, 3, 5)
    assert is_pseudo_dual(F, G)
    assert approx_duality_defect(F, natural_dual(F, G)) <= 1e-10


def test_natural_dual_requires_pseudo_dual():
    F, _, G = example_r1(0.5)
    with pytest.raises(NotPseudoDualError):
        natural_dual(F, G)


@pytest.mark.parametrize("dual", [canonical_dual, pseudo_inverse_dual])
def test_canonical_and_pseudo_inverse_duals(dual):
    assert_frames_close(dual(frame(E1, E2)), frame(E1, E2))
    assert_frames_close(dual(frame(E1, E1, E2)), frame(E1 / 2, E1 / 2, E2))
    assert_frames_close(dual(frame(ZERO, E1, E2)), frame(ZERO, E1, E2))


@pytest.mark.parametrize("dual", [canonical_dual, pseudo_inverse_dual])
def test_duals_require_frame(dual):
    with pytest.raises(NotAFrameError):
        dual(frame(E1, ZERO))


def test_pseudo_inverse_dual_matches_canonical_dual_on_random_frame():
    F = random_frame(make_rng(3), 5, 9)
    assert_frames_close(pseudo_inverse_dual(F), canonical_dual(F), tol=1e-10)


def test_canonical_dual_frame_bounds_are_reciprocal():
    F = random_frame(make_rng(5), 4, 7)
    bounds = frame_bounds(F)
    dual = frame_bounds(canonical_dual(F))
    assert dual.lower == pytest.approx(1 / bounds.upper, rel=1e-10)
    assert dual.upper == pytest.approx(1 / bounds.lower, rel=1e-10)


def test_neumann_dual_partial_examples():
    F, G = frame(E1, E2), frame(E1 / 2, E2)
    assert_frames_close(neumann_dual_partial(F, G, 0), G)
    gamma = neumann_dual_partial(F, G, 1)
    assert_frames_close(gamma, frame(3 * E1 / 4, E2))
    assert approx_duality_defect(F, gamma) == pytest.approx(0.25, abs=1e-12)

    F, H = example_a1()
    assert_frames_close(neumann_dual_partial(F, H, 5), H)


def test_neumann_dual_partial_converges_to_natural_dual():
    rng = make_rng(5)
    F, G = random_approximate_pair(rng, 4, 7, 0.5)
    assert_frames_close(neumann_dual_partial(F, G, 80), natural_dual(F, G), tol=1e-9)


def test_neumann_dual_partial_errors():
    with pytest.raises(NotApproximatelyDualError):
        neumann_dual_partial(frame(E1, E2), frame(3 * E1, E2), 1)
    with pytest.raises(ValueError):
        neumann_dual_partial(frame(E1, E2), frame(E1, E2), -1)


@pytest.mark.parametrize(("A", "B", "bound"), [
    (2.6, 10.1, 0.59),
    (3.0, 3.0, 0.0),
    (1.0, 2.0, 1 / 3),
])
def test_self_scaling_bound(A, B, bound):
    factor, value = self_scaling_bound(FrameBoundsEstimate(A, B))
    assert factor == pytest.approx(2 / (A + B))
    assert value == pytest.approx(bound, abs=5e-3)


def test_self_scaling_bound_requires_frame():
    with pytest.raises(NotAFrameError):
        self_scaling_bound(FrameBoundsEstimate(0.0, 1.0))


@pytest.mark.parametrize(("C", "R", "value", "certified"), [
    (1.0, 0.0006, 0.0245, True),
    (1.0, 0.0, 0.0, True),
    (4.0, 0.25, 1.0, False),
])
def test_t1_bound(C, R, value, certified):
    result = t1_bound(PerturbationData(R, C))
    assert result.value == pytest.approx(value, abs=1e-4)
    assert result.certified is certified


def test_perturbation_data_rejects_negative():
    with pytest.raises(ValueError):
        PerturbationData(-1.0, 1.0)


def test_c1_bound_examples():
    result = c1_bound(2.6, 6.5e-4)
    assert result.value == pytest.approx(1 / (math.sqrt(4000) - 1))
    assert result.value < 0.0162
    assert result.certified

    boundary = c1_bound(4.0, 1.0)
    assert boundary.value == pytest.approx(1.0)
    assert not boundary.certified

    window = c1_bound(4.0, 1.0, B=9.0).perturbed_bounds
    assert (window.lower, window.upper) == pytest.approx((1.0, 16.0))


def test_c1_bound_errors():
    with pytest.raises(PerturbationTooLargeError):
        c1_bound(1.0, 1.0)
    with pytest.raises(NotAFrameError):
        c1_bound(0.0, 0.1)
    with pytest.raises(ValueError):
        c1_bound(1.0, 0.0)


def test_difference_bessel_bound():
    F = frame(E1, E2)
    assert difference_bessel_bound(F, F) == 0.0
    F, H, _ = example_r1(0.1)
    assert difference_bessel_bound(F, H) == pytest.approx(0.01, abs=1e-14)


def test_difference_bessel_bound_dominates_sampled_sphere():
    rng = make_rng(2024)
    F, H = random_frame(rng, 3, 5), random_frame(rng, 3, 5)
    R = difference_bessel_bound(F, H)
    D = F.synthesis - H.synthesis
    f = rng.standard_normal((3, 10_000)) + 1j * rng.standard_normal((3, 10_000))
    f /= np.linalg.norm(f, axis=0)
    sampled = np.sum(np.abs(D.conj().T @ f) ** 2, axis=0)
    assert sampled.max() <= R * (1 + 1e-12)
    top = np.linalg.svd(D)[0][:, 0]
    assert np.sum(np.abs(D.conj().T @ top) ** 2) == pytest.approx(R, rel=1e-10)


def test_pseudo_dual_lower_bound_does_not_exceed_optimal():
    rng = make_rng(19)
    for _ in range(10):
        F, G = random_frame(rng, 3, 6), random_frame(rng, 3, 6)
        assert pseudo_dual_lower_bound(F, G) <= frame_bounds(G).lower + 1e-9


def test_perturbation_defect_chain_is_monotone():
    rng = make_rng(23)
    H = random_frame(rng, 3, 6)
    F = FiniteFrame(H.synthesis + 0.05 * random_frame(rng, 3, 6).synthesis)
    chain = perturbation_defect_chain(F, H, canonical_dual(H))
    assert chain.dual_defect <= 1e-10
    assert chain.consistent


def test_perturbed_canonical_dual_certificate():
    rng = make_rng(29)
    F = random_frame(rng, 4, 8)
    E = random_frame(rng, 4, 8).synthesis
    H = FiniteFrame(F.synthesis + 0.1 * math.sqrt(frame_bounds(F).lower) * E / operator_norm(E))
    dual, certificate = perturbed_canonical_dual(F, H)
    assert certificate.certified
    assert approx_duality_defect(F, dual) <= certificate.value + 1e-9


def test_example_a1_dual_upper_bound_is_unbounded():
    F, G = example_a1(100.0)
    assert frame_bounds(G).upper == pytest.approx(10001.0)
    assert approx_duality_defect(F, G) <= 1e-10


def test_example_r1_non_transitivity():
    F, H, G = example_r1(0.01)
    assert approx_duality_defect(F, H) <= 1e-10
    assert approx_duality_defect(H, G) <= 1e-10
    assert not is_pseudo_dual(F, G)


def test_random_approximate_pair_hits_target_defect():
    F, G = random_approximate_pair(make_rng(1), 5, 8, 0.3)
    assert approx_duality_defect(F, G) == pytest.approx(0.3, rel=1e-9)


def test_frame_json_round_trip():
    F = frame(np.array([1 + 2j, 0]), E2, E1 - E2)
    data = F.to_json()
    assert data["dim"] == 2
    assert data["vectors"][0] == [1.0, 2.0]
    assert_frames_close(FiniteFrame.from_json(data), F)


def test_from_json_rejects_ragged_vectors():
    with pytest.raises(DimensionMismatchError):
        FiniteFrame.from_json({"dim": 2, "vectors": [[1, 0], [0, 0], [1, 1]]})
