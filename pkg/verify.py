"""独立验证

用两种方法作用混合框架算子（Walnut级数与截断的框架展开），在测试函数上
测量重构误差，从下方检验每个经过认证的上界；以及有限维框架不变量的检查。
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List

import numpy as np
from scipy import linalg

from config import AUDIT_TOL, RANDOM_PAIR_COUNT, TEST_FUNCTION_COUNT, TEST_FUNCTION_SEED
from core_pipeline import NotAFrameError, TruncationPolicy, integrate, merge_intervals, split_intervals
from frames import (
    FiniteFrame, approx_duality_defect, c1_bound, canonical_dual, difference_bessel_bound,
    frame_bounds, is_pseudo_dual, mixed_frame_operator, natural_dual, neumann_dual_partial,
    perturbation_defect_chain, pseudo_dual_lower_bound, random_approximate_pair, random_frame,
    self_scaling_bound,
)
from gabor import (
    check_lattice, gabor_coefficients, plan_shifts, shift_majorant_terms, walnut_defect_bound, window_reach,
)
from utils import make_rng
from windows import gaussian, lattice_correlation, translate

logger = logging.getLogger(__name__)

NORM_QUAD_TOL = 1e-14
# 测试点从包络高于 sup 的该比例的区域中抽取
SAMPLE_REACH = 1e-2


class TestFunction:
    """L² 中的测试函数，由一个窗口表示"""
    __test__ = False  # 不是pytest测试类

    def __init__(self, window):
        self.window = window

    def __call__(self, x):
        return self.window.evaluate(x)

    @cached_property
    def norm(self):
        lo, hi = window_reach(self.window)
        intervals = split_intervals(lo, hi, self.window.breakpoints)
        result = integrate(lambda x: np.abs(self.window.evaluate(x)) ** 2, intervals, NORM_QUAD_TOL)
        value = math.sqrt(float(np.real(result.value)))
        if not value > 0:
            raise ValueError("测试函数的范数必须为正")
        return value

    def describe(self):
        return self.window.descriptor()


def gaussian_test_function(center, width):
    return TestFunction(translate(gaussian(1.0, width), center))


def default_test_set(seed=TEST_FUNCTION_SEED, count=TEST_FUNCTION_COUNT):
    """宽度 U[0.5, 2]、中心 U[−3, 3] 的高斯测试函数"""
    rng = make_rng(seed)
    widths = rng.uniform(0.5, 2.0, count)
    centers = rng.uniform(-3.0, 3.0, count)
    return [gaussian_test_function(c, w) for c, w in zip(centers, widths)]


@dataclass(frozen=True)
class OracleValue:
    """算子作用的值及其截断量

    Walnut：逐点尾项证书；展开式：被舍弃系数的 ℓ² 质量。
    """
    values: np.ndarray
    tail: float


# -------------------------------------------------------------------
# 两个神谕
# -------------------------------------------------------------------

def _walnut_shifts(analysis, synthesis, policy):
    phi, g, b = analysis.window, synthesis.window, analysis.b
    plan = plan_shifts(shift_majorant_terms(phi, g, analysis.a), b, policy.n_tail_tol * b)
    return (0,) + plan.active, plan


def walnut_apply(analysis, synthesis, f, x, policy=None):
    """(UT*f)(x) = (1/b)·Σ_n G_n(x)·f(x − n/b)"""
    policy = policy or TruncationPolicy()
    check_lattice(analysis, synthesis)
    phi, g, a, b = analysis.window, synthesis.window, analysis.a, analysis.b
    shifts, plan = _walnut_shifts(analysis, synthesis, policy)
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape, dtype=complex)
    k_tail = 0.0
    for n in shifts:
        c = lattice_correlation(phi, g, n / b, a, x, policy.k_tail_tol * b)
        total += c.values * f(x - n / b)
        k_tail += c.tail
    tail = (plan.certificate + k_tail) * f.window.sup_norm / b
    return OracleValue(total / b, tail)


def expansion_apply(analysis, synthesis, f, x, policy=None):
    """Σ_{|m|≤M, |n|≤N} ⟨f, E_mb T_na φ⟩·e^{2πimbx}·g(x − na)"""
    policy = policy or TruncationPolicy()
    check_lattice(analysis, synthesis)
    phi, g, a, b = analysis.window, synthesis.window, analysis.a, analysis.b
    table = gabor_coefficients(f.window, phi, a, b, policy)
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    phases = np.exp(2j * math.pi * b * np.outer(table.modulations(), flat))
    total = np.zeros(flat.shape, dtype=complex)
    for n, row in sorted(table.rows.items()):
        window_values = g.evaluate(flat - n * a)
        if not np.any(window_values):
            continue
        total += (row @ phases) * window_values
    return OracleValue(total.reshape(x.shape), math.sqrt(table.discarded_energy))


# -------------------------------------------------------------------
# 经验缺陷
# -------------------------------------------------------------------

def _lattice_points(points, a, left, right):
    """{p + ak} ∩ [left, right]"""
    for p in points:
        for k in range(math.ceil((left - p) / a), math.floor((right - p) / a) + 1):
            yield p + a * k


def _defect_intervals(analysis, synthesis, f, shifts):
    """f(x − n/b) 的有效区间并集，并在被积函数的断点处切开"""
    a, b = analysis.a, analysis.b
    lo, hi = window_reach(f.window)
    moved = [p + n / b for n in shifts for p in f.window.breakpoints]
    analysis_points = [p + n / b for n in shifts for p in analysis.window.breakpoints]
    pieces = []
    for left, right in merge_intervals([(lo + n / b, hi + n / b) for n in shifts]):
        cuts = moved + list(_lattice_points(synthesis.window.breakpoints, a, left, right))
        cuts += list(_lattice_points(analysis_points, a, left, right))
        pieces.extend(split_intervals(left, right, cuts))
    return pieces


def reconstruction_error(analysis, synthesis, f, policy=None):
    """‖f − UT*f‖/‖f‖"""
    policy = policy or TruncationPolicy()
    shifts, _ = _walnut_shifts(analysis, synthesis, policy)

    def integrand(x):
        return np.abs(f(x) - walnut_apply(analysis, synthesis, f, x, policy).values) ** 2

    intervals = _defect_intervals(analysis, synthesis, f, shifts)
    result = integrate(integrand, intervals, NORM_QUAD_TOL * f.norm ** 2)
    return math.sqrt(max(0.0, float(np.real(result.value)))) / f.norm


def empirical_defect(analysis, synthesis, test_set, policy=None):
    """测试集上 ‖f − UT*f‖/‖f‖ 的最大值：‖I − UT*‖ 的下界"""
    if not test_set:
        raise ValueError("测试集不能为空")
    errors = [reconstruction_error(analysis, synthesis, f, policy) for f in test_set]
    logger.info(f"[Verify] 经验缺陷 {max(errors):.6e}（{len(errors)} 个测试函数）")
    return max(errors)


def cross_oracle_gap(analysis, synthesis, test_set, points=4, policy=None, seed=TEST_FUNCTION_SEED):
    """两个神谕在随机点上的最大相对差 |walnut − expansion|/‖f‖"""
    rng = make_rng(seed)
    gap = 0.0
    for f in test_set:
        reach = f.window.envelope.interval(SAMPLE_REACH * f.window.sup_norm) or window_reach(f.window)
        x = rng.uniform(reach[0], reach[1], points)
        walnut = walnut_apply(analysis, synthesis, f, x, policy).values
        expansion = expansion_apply(analysis, synthesis, f, x, policy).values
        gap = max(gap, float(np.max(np.abs(walnut - expansion))) / f.norm)
    logger.info(f"[Verify] 神谕最大相对差 {gap:.3e}")
    return gap


def verification_report(analysis, synthesis, test_set, policy=None, points=4):
    """{certified_bound, empirical_defect, cross_oracle_max_gap, policy}"""
    policy = policy or TruncationPolicy()
    certified = walnut_defect_bound(analysis, synthesis, policy)
    empirical = empirical_defect(analysis, synthesis, test_set, policy)
    gap = cross_oracle_gap(analysis, synthesis, test_set, points, policy)
    return {
        "certified_bound": certified.to_dict(),
        "empirical_defect": empirical,
        "sandwich_holds": bool(empirical <= certified.value),
        "cross_oracle_max_gap": gap,
        "analysis": analysis.describe(),
        "synthesis": synthesis.describe(),
        "test_functions": [f.describe() for f in test_set],
        "policy": policy.to_dict(),
    }


# -------------------------------------------------------------------
# 有限维不变量
# -------------------------------------------------------------------

@dataclass(frozen=True)
class CheckEntry:
    """一项检查；relation 类表示关系事实（如“不是伪对偶”），不计入失败"""
    name: str
    passed: bool
    slack: float = 0.0
    relation: bool = False

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "slack": float(self.slack),
                "relation": bool(self.relation)}


@dataclass
class ModelCheckReport:
    entries: List[CheckEntry] = field(default_factory=list)

    def add(self, name, passed, slack=0.0, relation=False):
        self.entries.append(CheckEntry(name, bool(passed), float(slack), relation))

    def get(self, name):
        for entry in self.entries:
            if entry.name == name:
                return entry
        return None

    @property
    def passed(self):
        return all(e.passed for e in self.entries if not e.relation)

    def to_dict(self):
        return {"passed": self.passed, "entries": [e.to_dict() for e in self.entries]}


def _frame_characterization(frame):
    """下界为正 ⇔ 框架算子双射 ⇔ 典范对偶存在 ⇔ 与自身伪对偶"""
    positive = frame_bounds(frame).is_frame
    s = linalg.svdvals(mixed_frame_operator(frame, frame).entries)
    bijective = bool(s[0] > 0 and s[-1] > 1e-10 * s[0])
    try:
        canonical_dual(frame)
        dual_exists = True
    except NotAFrameError:
        dual_exists = False
    return len({positive, bijective, dual_exists, is_pseudo_dual(frame, frame)}) == 1


def finite_model_check(F, G, H=None):
    """对 (F, G)（以及给定时的 H）运行有限维框架不变量检查"""
    report = ModelCheckReport()
    identity = np.eye(F.dim)
    T, U = F.synthesis, G.synthesis
    forward = linalg.norm(identity - U @ T.conj().T, 2)
    backward = linalg.norm(identity - T @ U.conj().T, 2)
    report.add("adjoint_symmetry", abs(forward - backward) <= AUDIT_TOL, AUDIT_TOL - abs(forward - backward))
    report.add("frame_characterization", _frame_characterization(F) and _frame_characterization(G))

    defect = approx_duality_defect(F, G)
    pseudo = is_pseudo_dual(F, G)
    report.add("pseudo_dual_symmetry", pseudo == is_pseudo_dual(G, F))
    if frame_bounds(F).is_frame:
        report.add("pseudo_dual_reflexive", is_pseudo_dual(F, F))
    if defect < 1:
        both_frames = frame_bounds(F).is_frame and frame_bounds(G).is_frame
        report.add("approximate_implies_pseudo_dual", pseudo and both_frames, 1 - defect)
        for N in (1, 2, 3):
            partial = approx_duality_defect(F, neumann_dual_partial(F, G, N))
            bound = defect ** (N + 1)
            report.add(f"neumann_N{N}", partial <= bound + 1e-9, bound + 1e-9 - partial)
    if pseudo:
        natural = approx_duality_defect(F, natural_dual(F, G))
        report.add("natural_dual_defect", natural <= AUDIT_TOL, AUDIT_TOL - natural)
        lower = pseudo_dual_lower_bound(F, G)
        optimal = frame_bounds(G).lower
        report.add("pseudo_dual_lower_bound", lower <= optimal + 1e-9, optimal + 1e-9 - lower)
        W = identity + 0.5 * np.triu(np.ones((F.dim, F.dim)), 1)
        report.add("pseudo_dual_invertible_image", is_pseudo_dual(F, G.transformed(W)))

    bounds_F = frame_bounds(F)
    if bounds_F.is_frame:
        factor, bound = self_scaling_bound(bounds_F)
        measured = approx_duality_defect(F, F.scaled(factor))
        report.add("self_scaling", measured <= bound + 1e-9, bound + 1e-9 - measured)
        if defect <= AUDIT_TOL:
            lower_G = frame_bounds(G).lower
            report.add("dual_lower_bound", lower_G >= 1 / bounds_F.upper - 1e-9,
                       lower_G - 1 / bounds_F.upper + 1e-9)

    if H is not None:
        _check_triple(report, F, G, H)
    return report


def _check_triple(report, F, G, H):
    f_dual_h = approx_duality_defect(F, H) <= AUDIT_TOL
    h_dual_g = approx_duality_defect(H, G) <= AUDIT_TOL
    f_pseudo_g = is_pseudo_dual(F, G)
    report.add("F dual H", f_dual_h, relation=True)
    report.add("H dual G", h_dual_g, relation=True)
    report.add("F pseudo-dual G", f_pseudo_g, relation=True)
    report.add("non_transitive", f_dual_h and h_dual_g and not f_pseudo_g, relation=True)

    if h_dual_g:
        chain = perturbation_defect_chain(F, H, G)
        report.add("perturbation_chain", chain.consistent, chain.product_bound + 1e-9 - chain.measured)

    bounds_F = frame_bounds(F)
    R = difference_bessel_bound(F, H)
    if bounds_F.is_frame and 0 < R < bounds_F.lower:
        certificate = c1_bound(bounds_F.lower, R, bounds_F.upper)
        bounds_H = frame_bounds(H)
        window = certificate.perturbed_bounds
        inside = (window.lower - 1e-9 <= bounds_H.lower and bounds_H.upper <= window.upper + 1e-9)
        report.add("perturbed_frame_bounds", inside,
                   min(bounds_H.lower - window.lower, window.upper - bounds_H.upper) + 1e-9)
        measured = approx_duality_defect(F, canonical_dual(H))
        report.add("perturbed_canonical_dual", measured <= certificate.value + 1e-9,
                   certificate.value + 1e-9 - measured)


def random_model_checks(count=RANDOM_PAIR_COUNT, seed=TEST_FUNCTION_SEED):
    """在 count 个随机近似对偶对与扰动三元组上运行检查，按检查项汇总"""
    rng = make_rng(seed)
    summary = {}
    for _ in range(count):
        dim = int(rng.integers(2, 11))
        frames_count = dim + int(rng.integers(0, 6))
        target = float(rng.uniform(0.05, 0.95))
        F, G = random_approximate_pair(rng, dim, frames_count, target)

        H = random_frame(rng, dim, frames_count)
        E = random_frame(rng, dim, frames_count).synthesis
        radius = math.sqrt(frame_bounds(H).lower) * float(rng.uniform(0.01, 0.45))
        F_near = FiniteFrame(H.synthesis + radius * E / linalg.norm(E, 2))

        # 自然对偶是精确对偶，覆盖只对精确对偶成立的检查
        checks = (finite_model_check(F, G), finite_model_check(F, natural_dual(F, G)),
                  finite_model_check(F_near, canonical_dual(H), H))
        for report in checks:
            for entry in report.entries:
                if entry.relation:
                    continue
                stats = summary.setdefault(entry.name, {"checked": 0, "failed": 0, "min_slack": math.inf})
                stats["checked"] += 1
                stats["failed"] += 0 if entry.passed else 1
                stats["min_slack"] = min(stats["min_slack"], entry.slack)
    passed = all(stats["failed"] == 0 for stats in summary.values())
    logger.info(f"[Verify] {count} 组随机检查，{'全部通过' if passed else '存在失败'}")
    return {"pairs": count, "seed": seed, "passed": passed,
            "checks": {name: summary[name] for name in sorted(summary)}}
