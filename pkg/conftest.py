import pytest

from core_pipeline import TruncationPolicy
from reproduce import example_e1_windows, example_e2_windows
from windows import bspline, ck_dual_window, indicator


@pytest.fixture(scope="session")
def policy():
    return TruncationPolicy()


@pytest.fixture(scope="session")
def fast_policy():
    """粗网格，用于只关心结构而不关心末位数字的测试"""
    return TruncationPolicy(grid_points=512, max_refinements=2, lattice_cutoff_M=32, lattice_cutoff_N=16)


@pytest.fixture(scope="session")
def chi_pair():
    """χ_[0,1) 与自身：a = b = 1 时的正交基"""
    w = indicator(0.0, 1.0)
    return w, w


@pytest.fixture(scope="session")
def exact_dual_pair():
    """(B_8, ck_dual_window(8, 0.06))"""
    return bspline(8), ck_dual_window(8, 0.06)


@pytest.fixture(scope="session")
def e1_windows():
    return example_e1_windows()


@pytest.fixture(scope="session")
def e2_windows(policy):
    return example_e2_windows(policy)
