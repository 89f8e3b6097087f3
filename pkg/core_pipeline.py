import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum, auto
from functools import lru_cache
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from config import (
    DEFAULT_GRID_POINTS, DEFAULT_K_TAIL_TOL, DEFAULT_LATTICE_CUTOFF_M,
    DEFAULT_LATTICE_CUTOFF_N, DEFAULT_MAX_REFINEMENTS, DEFAULT_N_TAIL_TOL,
    DEFAULT_QUADRATURE_ABS_TOL, POLICY_KEYS, REFINEMENT_REL_TOL,
)

logger = logging.getLogger(__name__)

# 绝对收敛下限：精确对偶时残差本身就是舍入噪声
REFINEMENT_ABS_FLOOR = 1e-15
# 每个线程处理的网格块大小；块的划分与线程数无关，保证结果逐位一致
CHUNK_SIZE = 2048


# -------------------------------------------------------------------
# 错误类型
# -------------------------------------------------------------------

class FrameToolkitError(ValueError):
    """所有领域错误的基类"""


class DimensionMismatchError(FrameToolkitError):
    """框架或向量的维数不一致"""


class LatticeMismatchError(FrameToolkitError):
    """两个Gabor系统的格参数 (a, b) 不一致"""


class NotAFrameError(FrameToolkitError):
    """下框架界为零，不构成框架"""


class NotPseudoDualError(FrameToolkitError):
    """混合框架算子不可逆"""


class NotApproximatelyDualError(FrameToolkitError):
    """对偶缺陷 ≥ 1"""


class PerturbationTooLargeError(FrameToolkitError):
    """扰动界 R ≥ A，公式无意义"""


class WindowSpecError(FrameToolkitError):
    """窗口参数不合法或窗口描述格式错误"""


class TruncationError(FrameToolkitError):
    """截断尾项或求积无法在策略上限内达到容差"""


# -------------------------------------------------------------------
# 截断策略与报告
# -------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationPolicy:
    """控制所有估计器的网格密度、截断与求积容差"""
    grid_points: int = DEFAULT_GRID_POINTS
    k_tail_tol: float = DEFAULT_K_TAIL_TOL
    n_tail_tol: float = DEFAULT_N_TAIL_TOL
    quadrature_abs_tol: float = DEFAULT_QUADRATURE_ABS_TOL
    lattice_cutoff_M: int = DEFAULT_LATTICE_CUTOFF_M
    lattice_cutoff_N: int = DEFAULT_LATTICE_CUTOFF_N
    max_refinements: int = DEFAULT_MAX_REFINEMENTS
    threads: int = 1

    def __post_init__(self):
        for name in ("grid_points", "k_tail_tol", "n_tail_tol", "quadrature_abs_tol",
                     "lattice_cutoff_M", "lattice_cutoff_N", "threads"):
            value = getattr(self, name)
            if not value > 0:
                raise FrameToolkitError(f"截断策略字段 {name} 必须为正，收到 {value!r}")
        if self.max_refinements < 0:
            raise FrameToolkitError(f"max_refinements 不能为负，收到 {self.max_refinements!r}")

    def with_overrides(self, overrides=None, threads=None):
        """返回覆盖了部分字段的新策略"""
        changes = {key: value for key, value in (overrides or {}).items() if key in POLICY_KEYS}
        for key in ("grid_points", "lattice_cutoff_M", "lattice_cutoff_N", "max_refinements"):
            if key in changes:
                changes[key] = int(changes[key])
        if threads is not None:
            changes["threads"] = int(threads)
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BoundReport:
    """经过认证的标量上界及其审计信息

    value 为网格最大值（含Lipschitz修正）加上 tail_certificate。
    """
    value: float
    tail_certificate: float
    grid_points: int
    refined: bool

    def to_dict(self):
        return {
            "value": float(self.value),
            "tail_certificate": float(self.tail_certificate),
            "grid_points": int(self.grid_points),
            "refined": bool(self.refined),
        }


@dataclass(frozen=True)
class ResidualProfile:
    """Gabor对偶条件左端的偏差：r0 与各 n ≠ 0 的 r_n"""
    r0: float
    rn: Dict[int, float]
    n_cutoff: int
    tail_certificate: float
    grid_points: int = field(default=0, compare=False)
    refined: bool = field(default=True, compare=False)

    def total(self):
        """r0 + Σ r_n，不含尾项"""
        return self.r0 + math.fsum(self.rn[n] for n in sorted(self.rn))

    def to_dict(self):
        return {
            "r0": float(self.r0),
            "rn": {str(n): float(self.rn[n]) for n in sorted(self.rn)},
            "n_range": {"cutoff": int(self.n_cutoff),
                        "tail_certificate": float(self.tail_certificate)},
        }


# -------------------------------------------------------------------
# 周期网格扫描
# -------------------------------------------------------------------

class ScanMode(Enum):
    """扫描方向：上确界或下确界"""
    SUP = auto()
    INF = auto()


@dataclass
class ScanSample:
    """采样器在一组网格点上的输出

    values 为被扫描函数的值；slopes、curvatures 为一阶、二阶导数模的采样，
    用于把网格极值修正为单侧保守的估计。
    """
    values: np.ndarray
    slopes: np.ndarray
    curvatures: np.ndarray

    @staticmethod
    def concatenate(parts):
        return ScanSample(
            np.concatenate([p.values for p in parts]),
            np.concatenate([p.slopes for p in parts]),
            np.concatenate([p.curvatures for p in parts]),
        )


@dataclass(frozen=True)
class ScanResult:
    """一次周期扫描的结果"""
    value: float         # 修正后的保守估计
    grid_extremum: float # 修正前的网格极值
    correction: float
    grid_points: int
    refined: bool


def map_chunks(func, x, threads=1, chunk_size=CHUNK_SIZE):
    """按固定块大小对 x 分块求值，并按原顺序拼接

    块划分只取决于 chunk_size，所以不同线程数下结果逐位相同。
    """
    x = np.asarray(x, dtype=float)
    chunks = [x[i:i + chunk_size] for i in range(0, max(len(x), 1), chunk_size)]
    if threads <= 1 or len(chunks) == 1:
        return [func(chunk) for chunk in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, chunks))


def scan_period(sampler: Callable[[np.ndarray], ScanSample], period, policy, mode=ScanMode.SUP, label="scan"):
    """在 [0, period) 上求周期函数的上（下）确界

    从 policy.grid_points 开始逐次加倍网格，直到相邻两次的相对变化小于
    REFINEMENT_REL_TOL；之后在每个网格点加上 (|F'| + max|F''|·h/2)·h/2 的
    修正，使结果对上确界偏大、对下确界偏小。
    """
    grid = int(policy.grid_points)
    previous = None
    refined = False
    sample = None
    extremum = None
    for level in range(policy.max_refinements + 1):
        x = period * np.arange(grid) / grid
        sample = ScanSample.concatenate(map_chunks(sampler, x, policy.threads))
        extremum = float(np.max(sample.values) if mode is ScanMode.SUP else np.min(sample.values))
        logger.debug(f"[Scan] {label}: 网格 {grid} 点，极值 {extremum:.6e}")
        if previous is not None:
            change = abs(extremum - previous)
            if change <= REFINEMENT_REL_TOL * abs(extremum) or change <= REFINEMENT_ABS_FLOOR:
                refined = True
                break
        previous = extremum
        if level < policy.max_refinements:
            grid *= 2

    if not refined:
        logger.warning(f"[Scan] {label}: {grid} 点网格仍未收敛，使用最后一次结果")

    step = period / grid
    # 每个网格点覆盖半步长：|F(x)| ≤ |F(x_i)| + (|F'(x_i)| + max|F''|·h/2)·h/2
    local = (sample.slopes + float(np.max(sample.curvatures)) * step / 2) * step / 2
    if mode is ScanMode.SUP:
        value = float(np.max(sample.values + local))
    else:
        value = float(np.min(sample.values - local))
    return ScanResult(value, extremum, abs(value - extremum), grid, refined)


# -------------------------------------------------------------------
# Gauss–Legendre 复合求积
# -------------------------------------------------------------------

@lru_cache(maxsize=16)
def legendre_rule(order):
    """[-1, 1] 上的 Gauss–Legendre 节点与权重"""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray
    error_estimate: float
    panels: int


def _composite(func, left, right, panels, order):
    nodes, weights = legendre_rule(order)
    edges = np.linspace(left, right, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return np.sum(np.asarray(func(x)) * w, axis=-1)


def integrate(func, intervals: Sequence[Tuple[float, float]], abs_tol, order=24,
              panel_width=1.0, max_doublings=10):
    """自适应复合 Gauss–Legendre 求积

    func(x) 返回形状 (..., len(x)) 的数组，允许一次对多个被积函数
    （例如所有调制指标 m）求积。每个区间从宽度约 panel_width 的面板开始，
    面板数逐次加倍，直到两次结果之差不超过分配给该区间的容差。
    """
    intervals = [(float(l), float(r)) for l, r in intervals if r > l]
    if not intervals:
        return QuadratureResult(np.asarray(0.0), 0.0, 0)
    share = abs_tol / len(intervals)
    total = None
    error = 0.0
    panels_used = 0
    for left, right in intervals:
        panels = max(1, int(math.ceil((right - left) / panel_width)))
        coarse = _composite(func, left, right, panels, order)
        for _ in range(max_doublings):
            panels *= 2
            fine = _composite(func, left, right, panels, order)
            delta = float(np.max(np.abs(fine - coarse)))
            coarse = fine
            if delta <= share:
                break
        else:
            raise TruncationError(
                f"求积在 [{left:.4g}, {right:.4g}] 上经 {max_doublings} 次加倍仍未达到 {share:.1e}")
        error += delta
        panels_used += panels
        total = coarse if total is None else total + coarse
    logger.debug(f"[Quadrature] {len(intervals)} 个区间，共 {panels_used} 个面板，误差估计 {error:.2e}")
    return QuadratureResult(total, error, panels_used)


def split_intervals(left, right, breakpoints):
    """把 [left, right] 在落入其中的断点处切开"""
    cuts = sorted({float(p) for p in breakpoints if left < p < right})
    edges = [left] + cuts + [right]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1) if edges[i + 1] > edges[i]]


def merge_intervals(intervals):
    """合并重叠区间"""
    merged = []
    for left, right in sorted(intervals):
        if merged and left <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], right))
        else:
            merged.append((left, right))
    return merged
