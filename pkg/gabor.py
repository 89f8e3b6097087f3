"""Gabor系统的界估计

对偶条件残差、Walnut缺陷界、可容许框架界、扰动输入 R，以及一步迭代窗口 γ。
所有上确界都在一个周期 [0, a) 上扫描；k-求和与 n-求和的截断都带有证书。
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple

import numpy as np
from scipy.special import erfc

from core_pipeline import (
    BoundReport, LatticeMismatchError, NotApproximatelyDualError, ResidualProfile,
    ScanMode, ScanSample, TruncationError, TruncationPolicy, WindowSpecError,
    integrate, scan_period, split_intervals,
)
from frames import FrameBoundsEstimate, self_scaling_bound
from utils import encode_complex
from windows import (
    LatticeCombination, Window, combine, difference, lattice_correlation, periodization_power, wiener_norm,
)

logger = logging.getLogger(__name__)

# 求积区间取包络高于该值的部分
REACH_TOL = 1e-13
# n-截断在核心范围之外最多再扩展的步数
N_CUTOFF_SLACK = 10000


class WalnutOrdering(Enum):
    """n/b 平移放在分析窗（证明中的形式）还是合成窗上"""
    ANALYSIS_SHIFT = "analysis"
    SYNTHESIS_SHIFT = "synthesis"


@dataclass(frozen=True)
class GaborSystem:
    """{E_mb T_na window}"""
    window: Window
    a: float
    b: float

    def __post_init__(self):
        if not self.a > 0 or not self.b > 0:
            raise WindowSpecError(f"格参数必须为正，收到 a={self.a!r}, b={self.b!r}")
        if self.window.envelope.is_empty:
            raise WindowSpecError("窗口缺少包络，无法确认属于Wiener空间")
        norm = wiener_norm(self.window)
        if not math.isfinite(norm):
            raise WindowSpecError(f"窗口不属于Wiener空间：Wiener范数为 {norm}")

    def describe(self):
        return {"window": self.window.descriptor(), "a": float(self.a), "b": float(self.b)}


def check_lattice(first, second):
    if not (math.isclose(first.a, second.a, rel_tol=1e-12) and math.isclose(first.b, second.b, rel_tol=1e-12)):
        raise LatticeMismatchError(
            f"格参数不一致: (a, b) = ({first.a}, {first.b}) 与 ({second.a}, {second.b})")


# -------------------------------------------------------------------
# n-求和的截断
# -------------------------------------------------------------------

@dataclass(frozen=True)
class ShiftMajorant:
    """sup_x Σ_k |φ(x − s − ak)·g(x − ak)| ≤ coef·e^{−γ·dist(s, [lo, hi])²}

    gamma 为无穷时表示两紧支撑窗口：开区间 (lo, hi) 之外精确为零。
    """
    coef: float
    gamma: float
    lo: float
    hi: float

    @property
    def compact(self):
        return math.isinf(self.gamma)

    def at(self, s):
        if self.compact:
            return self.coef if self.lo < s < self.hi else 0.0
        distance = max(self.lo - s, s - self.hi, 0.0)
        return self.coef * math.exp(-self.gamma * distance * distance)

    def tail(self, start, spacing):
        """Σ_{j≥0} at(start + j·spacing)，要求 start ≥ hi"""
        if self.compact:
            return 0.0
        t0 = start - self.hi
        root = math.sqrt(self.gamma)
        return self.coef * (math.exp(-self.gamma * t0 * t0)
                            + math.sqrt(math.pi) / (2 * root * spacing) * erfc(root * t0))

    def mirrored(self):
        return ShiftMajorant(self.coef, self.gamma, -self.hi, -self.lo)


def shift_majorant_terms(phi, g, a):
    """由两窗口的包络构造关于平移量 s 的上界项"""
    terms = []
    for c1, a1, m1 in phi.envelope.gaussians:
        for c2, a2, m2 in g.envelope.gaussians:
            beta = a1 + a2
            center = m2 - m1
            terms.append(ShiftMajorant(c1 * c2 * (1 + math.sqrt(math.pi / beta) / a),
                                       a1 * a2 / beta, center, center))
        for h, l, r in g.envelope.boxes:
            count = math.floor((r - l) / a) + 1
            terms.append(ShiftMajorant(c1 * h * count, a1, l - m1, r - m1))
    for h1, l1, r1 in phi.envelope.boxes:
        for c2, a2, m2 in g.envelope.gaussians:
            count = math.floor((r1 - l1) / a) + 1
            terms.append(ShiftMajorant(h1 * c2 * count, a2, m2 - r1, m2 - l1))
        for h2, l2, r2 in g.envelope.boxes:
            shortest = min(r1 - l1, r2 - l2)
            terms.append(ShiftMajorant(h1 * h2 * (shortest / a + 1), math.inf, l2 - r1, r2 - l1))
    return terms


@dataclass(frozen=True)
class ShiftPlan:
    """需要扫描的 n、被上界吸收的 n 以及截断尾项"""
    cutoff: int
    active: Tuple[int, ...]
    absorbed: float
    tail: float

    @property
    def certificate(self):
        return self.absorbed + self.tail


def plan_shifts(terms, b, tol):
    """选择 n-截断 N：|n| > N 的上界和 < tol；|n| ≤ N 中上界为零的跳过、小于 tol 的计入证书"""
    spacing = 1.0 / b
    core = 0
    for term in terms:
        core = max(core, math.ceil(term.hi * b), math.ceil(-term.lo * b))
    cutoff = core
    while True:
        start = (cutoff + 1) * spacing
        tail = math.fsum(t.tail(start, spacing) + t.mirrored().tail(start, spacing) for t in terms)
        if tail <= tol:
            break
        if cutoff >= core + N_CUTOFF_SLACK:
            raise TruncationError(f"n-尾项 {tail:.3e} 在 N={cutoff} 时仍高于 {tol:.1e}")
        cutoff += 1

    active = []
    absorbed = 0.0
    for magnitude in range(1, cutoff + 1):
        for n in (-magnitude, magnitude):
            bound = math.fsum(t.at(n * spacing) for t in terms)
            if bound == 0.0:
                continue
            if bound < tol:
                absorbed += bound
            else:
                active.append(n)
    logger.debug(f"[Gabor] n-截断 N={cutoff}，扫描 {len(active)} 个平移，尾项 {tail:.2e}")
    return ShiftPlan(cutoff, tuple(sorted(active)), absorbed, tail)


# -------------------------------------------------------------------
# 残差与Walnut界
# -------------------------------------------------------------------

def _correlation_sampler(phi, g, shift, a, tol, offset=0.0):
    def sample(x):
        c = lattice_correlation(phi, g, shift, a, x, tol, order=2)
        return ScanSample(np.abs(c.values - offset) + c.tail,
                          np.abs(c.derivatives[0]), np.abs(c.derivatives[1]))
    return sample


def duality_residuals(analysis, synthesis, policy=None, ordering=WalnutOrdering.ANALYSIS_SHIFT):
    """r0 = sup|Σ_k conj φ(x−ak)·g(x−ak) − b|，r_n = sup|Σ_k conj φ(x−n/b−ak)·g(x−ak)|"""
    policy = policy or TruncationPolicy()
    check_lattice(analysis, synthesis)
    a, b = analysis.a, analysis.b
    phi, g = analysis.window, synthesis.window
    if ordering is WalnutOrdering.SYNTHESIS_SHIFT:
        phi, g = g, phi
    tol_k = policy.k_tail_tol * b

    r0 = scan_period(_correlation_sampler(phi, g, 0.0, a, tol_k, offset=b), a, policy, ScanMode.SUP, "r0")
    plan = plan_shifts(shift_majorant_terms(phi, g, a), b, policy.n_tail_tol * b)
    grid_points, refined = r0.grid_points, r0.refined
    rn: Dict[int, float] = {}
    for n in plan.active:
        result = scan_period(_correlation_sampler(phi, g, n / b, a, tol_k), a, policy, ScanMode.SUP, f"r{n}")
        rn[n] = result.value
        grid_points = max(grid_points, result.grid_points)
        refined = refined and result.refined
        logger.debug(f"[Gabor] r_{n} = {result.value:.6e}")
    logger.info(f"[Gabor] 残差: r0={r0.value:.6e}, Σr_n={math.fsum(rn.values()):.6e}, N={plan.cutoff}")
    return ResidualProfile(r0.value, rn, plan.cutoff, plan.certificate, grid_points, refined)


def walnut_defect_bound(analysis, synthesis, policy=None, ordering=WalnutOrdering.ANALYSIS_SHIFT):
    """‖I − UT*‖ ≤ (1/b)·(r0 + Σ r_n) + n-尾项证书"""
    profile = duality_residuals(analysis, synthesis, policy, ordering)
    b = analysis.b
    certificate = profile.tail_certificate / b
    value = profile.total() / b + certificate
    logger.info(f"[Gabor] Walnut界 {value:.6e}（尾项 {certificate:.2e}）")
    return BoundReport(value, certificate, profile.grid_points, profile.refined)


# -------------------------------------------------------------------
# 框架界与扰动
# -------------------------------------------------------------------

def gabor_frame_bounds(system, policy=None):
    """B = (1/b)·sup Σ_n |G_n|，A = (1/b)·inf [G_0 − Σ_{n≠0} |G_n|]，A 截断到 0"""
    policy = policy or TruncationPolicy()
    g, a, b = system.window, system.a, system.b
    tol_k = policy.k_tail_tol * b
    plan = plan_shifts(shift_majorant_terms(g, g, a), b, policy.n_tail_tol * b)

    def collect(x):
        c0 = lattice_correlation(g, g, 0.0, a, x, tol_k, order=2)
        cross = np.zeros(np.shape(x))
        slopes = np.abs(c0.derivatives[0])
        curvatures = np.abs(c0.derivatives[1])
        k_tail = c0.tail
        for n in plan.active:
            c = lattice_correlation(g, g, n / b, a, x, tol_k, order=2)
            cross = cross + np.abs(c.values)
            slopes = slopes + np.abs(c.derivatives[0])
            curvatures = curvatures + np.abs(c.derivatives[1])
            k_tail += c.tail
        return np.real(c0.values), cross, slopes, curvatures, k_tail

    def upper(x):
        diagonal, cross, slopes, curvatures, k_tail = collect(x)
        return ScanSample(diagonal + cross + k_tail, slopes, curvatures)

    def lower(x):
        diagonal, cross, slopes, curvatures, k_tail = collect(x)
        return ScanSample(diagonal - cross - k_tail, slopes, curvatures)

    sup = scan_period(upper, a, policy, ScanMode.SUP, "frame upper")
    inf = scan_period(lower, a, policy, ScanMode.INF, "frame lower")
    certificate = plan.certificate
    B = (sup.value + certificate) / b
    A = max(0.0, (inf.value - certificate) / b)
    k_tail = collect(np.zeros(1))[4]
    logger.info(f"[Gabor] 框架界 A={A:.6g}, B={B:.6g}")
    return FrameBoundsEstimate(min(A, B), B, (certificate + k_tail) / b)


def painless_frame_bounds(h, a, b, policy=None):
    """无痛情形下框架算子是乘以 H/b：A = inf H / b，B = sup H / b"""
    if h.support is None or h.support[1] - h.support[0] > (1.0 / b) * (1 + 1e-12):
        raise WindowSpecError("无痛框架界要求 supp h 的长度 ≤ 1/b")
    periodization = periodization_power(h, a, policy)
    return FrameBoundsEstimate(periodization.inf / b, periodization.sup / b, periodization.tail / b)


def self_scaled_system_bound(system, policy=None):
    """把系统自身乘以 2/(A+B) 作为近似对偶时的缺陷界"""
    bounds = gabor_frame_bounds(system, policy)
    factor, bound = self_scaling_bound(bounds)
    return factor, bound, bounds


def perturbation_R(analysis_window, perturbed_window, a, b, policy=None):
    """差窗口 φ − h 生成的Gabor系统的Bessel界"""
    window = difference(analysis_window, perturbed_window)
    return gabor_frame_bounds(GaborSystem(window, a, b), policy).upper


# -------------------------------------------------------------------
# Gabor系数与迭代窗口
# -------------------------------------------------------------------

def window_reach(w, tol=REACH_TOL):
    """窗口的有效区间：紧支撑或包络高于 tol 的部分"""
    if w.support is not None:
        return w.support
    reach = w.envelope.interval(tol)
    if reach is None:
        raise WindowSpecError("窗口包络处处低于截断容差")
    return reach


@dataclass(frozen=True)
class CoefficientTable:
    """⟨f, E_mb T_na w⟩：n ↦ 长度 2M+1 的数组，下标 m + M

    discarded_energy 是被舍弃系数（|m| > M 或 |n| > N）的平方和上界，
    误差在求积容差以内。
    """
    M: int
    rows: Dict[int, np.ndarray]
    discarded_energy: float = 0.0

    def modulations(self):
        return np.arange(-self.M, self.M + 1)

    def get(self, m, n):
        row = self.rows.get(n)
        if row is None or abs(m) > self.M:
            return 0.0
        return complex(row[m + self.M])


def gabor_coefficients(f, window, a, b, policy=None):
    """对 |m| ≤ lattice_cutoff_M、支撑相交的 n 计算 ∫ f(x)·conj w(x − na)·e^{−2πimbx} dx

    每一行的全部系数满足 Σ_m |c_m|² ≤ (K/b)·∫|f·conj w(· − na)|²，K 为乘积的
    有效区间被 1/b 平移覆盖的重数；减去保留部分即得舍弃部分的上界。
    """
    policy = policy or TruncationPolicy()
    M, N = policy.lattice_cutoff_M, policy.lattice_cutoff_N
    lf, hf = window_reach(f)
    lw, hw = window_reach(window)
    first, last = math.ceil((lf - hw) / a), math.floor((hf - lw) / a)
    if first < -N or last > N:
        logger.warning(f"[Gabor] n 范围 [{first}, {last}] 超出上限 ±{N}，超出部分只计入舍弃能量")

    frequencies = 2 * math.pi * b * np.arange(-M, M + 1)
    panel_width = 1.0 / max(1.0, M * b)
    rows = {}
    discarded = 0.0
    for n in range(first, last + 1):
        shift = n * a
        lo, hi = max(lf, lw + shift), min(hf, hw + shift)
        if hi <= lo:
            continue
        kept = -N <= n <= N
        breakpoints = list(f.breakpoints) + [p + shift for p in window.breakpoints]

        def integrand(x, shift=shift, kept=kept):
            product = f.evaluate(x) * np.conj(window.evaluate(x - shift))
            energy = (np.abs(product) ** 2)[None, :]
            if not kept:
                return energy
            return np.vstack([product[None, :] * np.exp(-1j * np.outer(frequencies, x)), energy])

        result = integrate(integrand, split_intervals(lo, hi, breakpoints),
                           policy.quadrature_abs_tol, panel_width=panel_width)
        value = np.asarray(result.value)
        overlap = max(1, math.ceil((hi - lo) * b * (1 - 1e-12)))
        energy = overlap / b * float(np.real(value[-1]))
        if kept:
            rows[n] = value[:-1]
            energy -= float(np.sum(np.abs(rows[n]) ** 2))
        discarded += max(energy, 0.0)
    logger.debug(f"[Gabor] 计算了 {len(rows)} 行Gabor系数，|m| ≤ {M}，舍弃能量 {discarded:.3e}")
    return CoefficientTable(M, rows, discarded)


@dataclass(frozen=True)
class IteratedWindow:
    """γ = (2 − ⟨g, f⟩)·g − Σ_{(m,n)≠(0,0)} ⟨g, E_mb T_na f⟩·E_mb T_na g"""
    window: LatticeCombination
    squared_bound: float
    walnut: BoundReport
    inner_product: complex
    cutoff_m: int
    cutoff_n: int

    def to_dict(self):
        return {
            "window": self.window.descriptor(),
            "squared_bound": float(self.squared_bound),
            "walnut": self.walnut.to_dict(),
            "inner_product": encode_complex(self.inner_product),
            "cutoff": {"m": int(self.cutoff_m), "n": int(self.cutoff_n)},
            "terms": len(self.window.terms),
        }


def iterated_window(analysis, synthesis, policy=None):
    """Neumann迭代 N = 1 的窗口 γ，其缺陷界为 Walnut界的平方"""
    policy = policy or TruncationPolicy()
    check_lattice(analysis, synthesis)
    walnut = walnut_defect_bound(analysis, synthesis, policy)
    if walnut.value >= 1:
        raise NotApproximatelyDualError(f"Walnut界 {walnut.value:.6g} ≥ 1，无法迭代")

    f, g, a, b = analysis.window, synthesis.window, analysis.a, analysis.b
    table = gabor_coefficients(g, f, a, b, policy)
    threshold = policy.quadrature_abs_tol / max(g.sup_norm, 1e-300)
    inner = table.get(0, 0)
    terms = [(0.0, 0.0, 2.0 - inner)]
    cutoff_m = cutoff_n = 0
    for n in sorted(table.rows):
        for m, c in zip(table.modulations(), table.rows[n]):
            if (m, n) == (0, 0) or abs(c) < threshold:
                continue
            terms.append((n * a, m * b, -complex(c)))
            cutoff_m, cutoff_n = max(cutoff_m, abs(int(m))), max(cutoff_n, abs(n))
    gamma = combine(g, terms)
    logger.info(f"[Gabor] 迭代窗口: {len(terms)} 项，|m| ≤ {cutoff_m}，|n| ≤ {cutoff_n}")
    return IteratedWindow(gamma, walnut.value ** 2, walnut, inner, cutoff_m, cutoff_n)
