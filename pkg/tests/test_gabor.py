import math

import numpy as np
import pytest

from core_pipeline import (
    LatticeMismatchError, NotApproximatelyDualError, TruncationError, TruncationPolicy, WindowSpecError,
)
from frames import c1_bound, self_scaling_bound
from gabor import (
    GaborSystem, ShiftMajorant, WalnutOrdering, duality_residuals, gabor_coefficients, gabor_frame_bounds,
    iterated_window, painless_frame_bounds, perturbation_R, plan_shifts, self_scaled_system_bound,
    shift_majorant_terms, walnut_defect_bound,
)
from verify import default_test_set, empirical_defect
from windows import GaussianWindow, bspline, ck_dual_window, gaussian, indicator, lattice_correlation, scale


def system_pair(analysis_window, synthesis_window, a, b):
    return GaborSystem(analysis_window, a, b), GaborSystem(synthesis_window, a, b)


def test_gabor_system_validation():
    with pytest.raises(WindowSpecError):
        GaborSystem(bspline(2), 0.0, 1.0)
    with pytest.raises(WindowSpecError):
        GaborSystem(bspline(2), 1.0, -0.5)


class UnboundedCellWindow(GaussianWindow):
    def cell_sup(self, left, right):
        return math.inf


def test_gabor_system_requires_finite_wiener_norm():
    with pytest.raises(WindowSpecError):
        GaborSystem(UnboundedCellWindow(1.0, 1.0), 1.0, 1.0)
    GaborSystem(gaussian(1.0, 1.0), 1.0, 1.0)


def test_lattice_mismatch(fast_policy, chi_pair):
    phi, g = chi_pair
    with pytest.raises(LatticeMismatchError):
        duality_residuals(GaborSystem(phi, 1.0, 1.0), GaborSystem(g, 1.0, 0.5), fast_policy)


def test_lattice_correlation_reduces_modulo_a():
    g = gaussian(1.0, 0.7)
    x = np.array([0.3, 1.3, -2.7, 5.3])
    c = lattice_correlation(g, g, 0.5, 1.0, x, 1e-16)
    assert np.allclose(c.values, c.values[0], rtol=1e-13)
    k = np.arange(-40, 41)
    direct = np.sum(g(0.3 - 0.5 - k) * g(0.3 - k))
    assert c.values[0] == pytest.approx(direct, rel=1e-13)


def test_shift_majorant_for_compact_windows_is_open_interval():
    term = ShiftMajorant(2.0, math.inf, -1.0, 1.0)
    assert term.compact
    assert term.at(0.0) == 2.0
    assert term.at(1.0) == 0.0
    assert term.tail(1.0, 1.0) == 0.0
    assert term.mirrored() == ShiftMajorant(2.0, math.inf, -1.0, 1.0)


def test_plan_shifts_skips_vanishing_compact_shifts(chi_pair):
    phi, g = chi_pair
    plan = plan_shifts(shift_majorant_terms(phi, g, 1.0), 1.0, 1e-10)
    assert plan.active == ()
    assert plan.certificate == 0.0


def test_plan_shifts_gaussian_tail_below_tolerance():
    g = gaussian(1.0, 0.5)
    terms = shift_majorant_terms(g, g, 1.0)
    plan = plan_shifts(terms, 0.1, 1e-11)
    assert plan.tail <= 1e-11
    assert plan.active == tuple(sorted(plan.active))
    assert all(abs(n) <= plan.cutoff for n in plan.active)
    beyond = sum(t.at(n / 0.1) for t in terms for n in (plan.cutoff + 1, -plan.cutoff - 1))
    assert beyond <= plan.tail


def test_plan_shifts_raises_when_tail_does_not_converge():
    terms = [ShiftMajorant(1e30, 1e-12, 0.0, 0.0)]
    with pytest.raises(TruncationError):
        plan_shifts(terms, 1.0, 1e-10)


def test_residuals_of_orthonormal_basis_vanish(fast_policy, chi_pair):
    analysis, synthesis = system_pair(*chi_pair, 1.0, 1.0)
    profile = duality_residuals(analysis, synthesis, fast_policy)
    assert profile.r0 == 0.0
    assert profile.rn == {}
    assert profile.tail_certificate == 0.0
    assert walnut_defect_bound(analysis, synthesis, fast_policy).value == 0.0


@pytest.mark.parametrize("b", [0.05, 0.06, 1 / 15])
def test_residuals_of_exact_dual_pair(policy, b):
    analysis, synthesis = system_pair(bspline(8), ck_dual_window(8, b), 1.0, b)
    profile = duality_residuals(analysis, synthesis, policy)
    assert profile.r0 < 1e-10
    assert all(value < 1e-10 for value in profile.rn.values())
    assert walnut_defect_bound(analysis, synthesis, policy).value == pytest.approx(0.0, abs=1e-10)


def test_residual_profile_serialization(fast_policy, chi_pair):
    analysis, synthesis = system_pair(*chi_pair, 1.0, 1.0)
    data = duality_residuals(analysis, synthesis, fast_policy).to_dict()
    assert data == {"r0": 0.0, "rn": {}, "n_range": {"cutoff": 1, "tail_certificate": 0.0}}


def test_residuals_detect_scaled_dual(fast_policy):
    chi = indicator(0.0, 1.0)
    analysis, synthesis = system_pair(chi, scale(chi, 0.75), 1.0, 1.0)
    assert duality_residuals(analysis, synthesis, fast_policy).r0 == pytest.approx(0.25)
    assert walnut_defect_bound(analysis, synthesis, fast_policy).value == pytest.approx(0.25)


def test_walnut_bound_is_invariant_under_swap(fast_policy):
    analysis, synthesis = system_pair(gaussian(1.0, 0.5), scale(bspline(4), 0.25), 1.0, 0.25)
    forward = walnut_defect_bound(analysis, synthesis, fast_policy)
    swapped = walnut_defect_bound(synthesis, analysis, fast_policy)
    slack = forward.tail_certificate + swapped.tail_certificate
    assert swapped.value == pytest.approx(forward.value, rel=1e-6, abs=slack)
    reordered = walnut_defect_bound(analysis, synthesis, fast_policy, WalnutOrdering.SYNTHESIS_SHIFT)
    assert reordered.value == pytest.approx(swapped.value, rel=1e-12)


def test_frame_bounds_of_orthonormal_basis(fast_policy, chi_pair):
    bounds = gabor_frame_bounds(GaborSystem(chi_pair[0], 1.0, 1.0), fast_policy)
    assert bounds.lower == pytest.approx(1.0, abs=1e-12)
    assert bounds.upper == pytest.approx(1.0, abs=1e-12)


def test_frame_bounds_of_painless_triangle_match_periodization(fast_policy):
    # supp B_2 的长度为 2 ≤ 1/b，所以 n ≠ 0 的相关项全为零
    system = GaborSystem(bspline(2), 1.0, 0.5)
    bounds = gabor_frame_bounds(system, fast_policy)
    painless = painless_frame_bounds(bspline(2), 1.0, 0.5, fast_policy)
    assert bounds.lower == pytest.approx(1.0, abs=1e-4)
    assert bounds.upper == pytest.approx(2.0, abs=5e-3)
    assert painless.lower == pytest.approx(bounds.lower, abs=1e-4)
    assert painless.upper == pytest.approx(bounds.upper, abs=5e-3)


def test_painless_frame_bounds_require_short_support(fast_policy):
    with pytest.raises(WindowSpecError):
        painless_frame_bounds(bspline(8), 1.0, 0.5, fast_policy)


def test_perturbation_R_of_identical_windows_is_zero(fast_policy):
    w = gaussian(1.0, 0.5)
    # 只剩k-尾项与n-尾项的证书
    assert perturbation_R(w, w, 1.0, 0.5, fast_policy) == pytest.approx(0.0, abs=1e-9)


def test_self_scaled_system_bound_for_tight_system(fast_policy, chi_pair):
    factor, bound, bounds = self_scaled_system_bound(GaborSystem(chi_pair[0], 1.0, 1.0), fast_policy)
    assert factor == pytest.approx(1.0)
    assert bound == pytest.approx(0.0, abs=1e-12)


def test_self_scaled_walnut_bound_respects_frame_bound(fast_policy):
    g = bspline(4)
    system = GaborSystem(g, 1.0, 0.25)
    factor, bound, bounds = self_scaled_system_bound(system, fast_policy)
    assert 0.0 < bounds.lower < bounds.upper
    walnut = walnut_defect_bound(system, GaborSystem(scale(g, factor), 1.0, 0.25), fast_policy)
    # 无痛情形下两者理论上相等，差别只来自网格修正
    assert walnut.value <= bound + 1e-5
    assert walnut.value == pytest.approx(bound, abs=1e-4)


def test_reports_identical_across_thread_counts():
    analysis, synthesis = system_pair(gaussian(1.0, 1.0), bspline(4), 1.0, 0.5)
    reports = []
    for threads in (1, 4):
        policy = TruncationPolicy(grid_points=4096, max_refinements=1, threads=threads)
        reports.append((duality_residuals(analysis, synthesis, policy).to_dict(),
                        walnut_defect_bound(analysis, synthesis, policy).to_dict(),
                        gabor_frame_bounds(analysis, policy).to_dict()))
    assert reports[0] == reports[1]


def test_gabor_coefficients_of_orthonormal_basis(fast_policy, chi_pair):
    phi, g = chi_pair
    table = gabor_coefficients(g, phi, 1.0, 1.0, fast_policy)
    assert table.get(0, 0) == pytest.approx(1.0, abs=1e-12)
    assert max(abs(table.get(m, 0)) for m in range(-5, 6) if m != 0) <= 1e-12
    assert table.get(0, 3) == 0.0
    assert table.get(fast_policy.lattice_cutoff_M + 1, 0) == 0.0


def test_iterated_window_of_orthonormal_basis_is_unchanged(fast_policy, chi_pair):
    analysis, synthesis = system_pair(*chi_pair, 1.0, 1.0)
    result = iterated_window(analysis, synthesis, fast_policy)
    assert result.inner_product == pytest.approx(1.0)
    assert result.squared_bound == 0.0
    assert len(result.window.terms) == 1
    x = np.linspace(-1.0, 2.0, 301)
    assert np.allclose(result.window(x), chi_pair[1](x), atol=1e-12)
    assert result.to_dict()["cutoff"] == {"m": 0, "n": 0}


def test_iterated_window_requires_approximate_duality(fast_policy):
    chi = indicator(0.0, 1.0)
    analysis, synthesis = system_pair(chi, scale(chi, 3.0), 1.0, 1.0)
    with pytest.raises(NotApproximatelyDualError):
        iterated_window(analysis, synthesis, fast_policy)


def test_iterated_window_reduces_defect_of_scaled_dual(fast_policy):
    chi = indicator(0.0, 1.0)
    analysis, synthesis = system_pair(chi, scale(chi, 0.75), 1.0, 1.0)
    result = iterated_window(analysis, synthesis, fast_policy)
    assert result.squared_bound == pytest.approx(0.0625)
    # γ = (2 − 3/4)·(3/4)χ = (15/16)χ，缺陷 1/16
    assert result.window(0.5) == pytest.approx(15 / 16, abs=1e-9)
    gamma = GaborSystem(result.window, 1.0, 1.0)
    assert walnut_defect_bound(analysis, gamma, fast_policy).value == pytest.approx(1 / 16, abs=1e-9)


@pytest.mark.slow
def test_example_e1_bounds(policy, e1_windows):
    phi, h, g = e1_windows
    analysis, synthesis = system_pair(phi, g, 1.0, 0.06)
    walnut = walnut_defect_bound(analysis, synthesis, policy)
    assert 0.0020 <= walnut.value <= 0.0031
    R = perturbation_R(phi, h, 1.0, 0.06, policy)
    assert 4e-4 <= R <= 8e-4
    C = gabor_frame_bounds(synthesis, policy).upper
    assert C <= 1.05
    assert math.sqrt(C * R) <= 0.0283


@pytest.mark.slow
def test_example_e2_bounds(policy, e2_windows):
    phi, h, g = e2_windows
    analysis, synthesis = system_pair(phi, g, 1.0, 0.1)
    bounds = gabor_frame_bounds(analysis, policy)
    assert 2.3 <= bounds.lower <= 2.9
    assert 9.1 <= bounds.upper <= 11.1
    assert self_scaling_bound(bounds)[1] == pytest.approx(0.59, abs=0.02)

    R = perturbation_R(phi, h, 1.0, 0.1, policy)
    assert R <= 1e-3 and R < bounds.lower / 4
    assert 0.013 <= c1_bound(bounds.lower, R).value <= 0.019

    walnut = walnut_defect_bound(analysis, synthesis, policy)
    assert 0.007 <= walnut.value <= 0.011
    painless = duality_residuals(GaborSystem(h, 1.0, 0.1), synthesis, policy)
    assert max([painless.r0] + list(painless.rn.values())) < 1e-10


@pytest.mark.slow
def test_example_e2_iterated_window(policy, e2_windows):
    phi, _, g = e2_windows
    analysis, synthesis = system_pair(phi, g, 1.0, 0.1)
    result = iterated_window(analysis, synthesis, policy)
    assert result.squared_bound == pytest.approx(result.walnut.value ** 2, rel=1e-12)
    assert result.squared_bound <= 0.011 ** 2
    tests = default_test_set()
    improved = empirical_defect(analysis, GaborSystem(result.window, 1.0, 0.1), tests, policy)
    assert improved <= result.squared_bound
    assert improved < empirical_defect(analysis, synthesis, tests, policy)
