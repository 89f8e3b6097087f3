"""实轴上可精确求值的窗口函数

高斯窗、中心化B样条以及由它们组合出的对偶窗。每个窗口同时携带支撑、
包络（|w| 的上界）、Lipschitz常数等元数据，供所有截断证书使用。
"""
import bisect
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property, lru_cache, reduce
from typing import Dict, Tuple

import numpy as np
from scipy.special import comb, erfc

from core_pipeline import ScanMode, ScanSample, TruncationPolicy, WindowSpecError, scan_period
from utils import decode_complex, encode_complex

logger = logging.getLogger(__name__)

# 包络低于该值的区域视为零（Wiener范数的单元截断）
WIENER_TAIL_TOL = 1e-16
# 默认单元上确界的网格点数
CELL_GRID = 512


class WindowKind(Enum):
    GAUSSIAN = "gaussian"
    BSPLINE = "bspline"
    LATTICE_COMBINATION = "lattice-combination"
    PERIODIZED_QUOTIENT = "periodized-quotient"


# -------------------------------------------------------------------
# 精确分段多项式
# -------------------------------------------------------------------

def _taylor_shift(coeffs, delta):
    """p(u) ↦ p(u + delta)，系数由低次到高次"""
    if delta == 0:
        return tuple(coeffs)
    n = len(coeffs)
    return tuple(
        sum((coeffs[i] * math.comb(i, j) * delta ** (i - j) for i in range(j, n)), Fraction(0))
        for j in range(n)
    )


def _add_coeffs(p, q):
    n = max(len(p), len(q))
    p = tuple(p) + (Fraction(0),) * (n - len(p))
    q = tuple(q) + (Fraction(0),) * (n - len(q))
    return tuple(x + y for x, y in zip(p, q))


def _normalize(coeffs):
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs) or (Fraction(0),)


def _integrate_coeffs(coeffs, constant):
    return (constant,) + tuple(c / (j + 1) for j, c in enumerate(coeffs))


def _horner_exact(coeffs, u):
    result = Fraction(0)
    for c in reversed(coeffs):
        result = result * u + c
    return result


def _derivative_array(coef):
    """局部系数数组（最后一维由低到高）的导数"""
    if coef.shape[-1] <= 1:
        return np.zeros_like(coef[..., :1])
    return coef[..., 1:] * np.arange(1, coef.shape[-1])


class PiecewisePolynomial:
    """有理系数的分段多项式

    第 i 段定义在 [knots[i], knots[i+1]) 上，以局部变量 u = x − knots[i]
    展开；区间 [knots[0], knots[-1]) 之外恒为零。浮点求值时每段同时保存
    关于左右两个节点的展开，取离 x 较近的一个，避免支撑端点附近的抵消。
    """

    def __init__(self, knots, pieces):
        knots = tuple(Fraction(k) for k in knots)
        pieces = tuple(_normalize(tuple(Fraction(c) for c in p)) for p in pieces)
        if len(knots) != len(pieces) + 1 or not pieces:
            raise WindowSpecError(f"{len(knots)} 个节点与 {len(pieces)} 段不匹配")
        if any(k1 <= k0 for k0, k1 in zip(knots, knots[1:])):
            raise WindowSpecError("节点必须严格递增")
        self.knots = knots
        self.pieces = pieces

        width = max(len(p) for p in pieces)
        coef = np.zeros((len(pieces), width))
        right_coef = np.zeros((len(pieces), width))
        for i, p in enumerate(pieces):
            coef[i, :len(p)] = [float(c) for c in p]
            right_coef[i, :len(p)] = [float(c) for c in _taylor_shift(p, knots[i + 1] - knots[i])]
        self._knots = np.array([float(k) for k in knots])
        self._derivatives = [coef]
        self._right_derivatives = [right_coef]
        for _ in range(3):
            self._derivatives.append(_derivative_array(self._derivatives[-1]))
            self._right_derivatives.append(_derivative_array(self._right_derivatives[-1]))

    # ---- 构造 ----

    def shifted(self, shift):
        """x ↦ p(x − shift)"""
        shift = Fraction(shift)
        return PiecewisePolynomial([k + shift for k in self.knots], self.pieces)

    def scaled(self, factor):
        factor = Fraction(factor)
        return PiecewisePolynomial(self.knots, [[c * factor for c in p] for p in self.pieces])

    def _local_piece(self, left):
        """覆盖 [left, ·) 的那一段，以 left 为原点重新展开"""
        if left < self.knots[0] or left >= self.knots[-1]:
            return (Fraction(0),)
        i = bisect.bisect_right(self.knots, left) - 1
        return _taylor_shift(self.pieces[i], left - self.knots[i])

    def __add__(self, other):
        knots = sorted(set(self.knots) | set(other.knots))
        pieces = [_add_coeffs(self._local_piece(k), other._local_piece(k)) for k in knots[:-1]]
        return PiecewisePolynomial(knots, pieces).trimmed()

    def trimmed(self):
        """去掉两端恒为零的段"""
        pieces = list(self.pieces)
        knots = list(self.knots)
        zero = (Fraction(0),)
        while len(pieces) > 1 and pieces[0] == zero:
            pieces.pop(0)
            knots.pop(0)
        while len(pieces) > 1 and pieces[-1] == zero:
            pieces.pop()
            knots.pop()
        return PiecewisePolynomial(knots, pieces)

    # ---- 求值 ----

    @property
    def interval(self):
        return float(self.knots[0]), float(self.knots[-1])

    @cached_property
    def is_even(self):
        """p(−x) = p(x) 是否精确成立"""
        n = len(self.pieces)
        if any(k != -self.knots[-1 - i] for i, k in enumerate(self.knots)):
            return False
        for i, p in enumerate(self.pieces):
            k0, k1 = self.knots[i], self.knots[i + 1]
            mirror = self.pieces[n - 1 - i]
            # 每段次数 < len(p) + 1，在这么多个点上相等即恒等
            for j in range(len(p) + 1):
                t = k0 + (k1 - k0) * Fraction(j + 1, len(p) + 2)
                if _horner_exact(p, t - k0) != _horner_exact(mirror, -t - self.knots[n - 1 - i]):
                    return False
        return True

    def evaluate(self, x, derivative=0):
        x = np.asarray(x, dtype=float)
        if derivative == 0 and self.is_even and self.is_continuous:
            # 连续偶函数在 |x| 处求值；有跳跃时保留半开区间约定
            x = np.abs(x)
        n = len(self.pieces)
        idx = np.searchsorted(self._knots, x, side="right") - 1
        inside = (idx >= 0) & (idx < n)
        safe = np.clip(idx, 0, n - 1)
        u_left = x - self._knots[safe]
        u_right = x - self._knots[safe + 1]
        use_right = np.abs(u_right) < np.abs(u_left)
        u = np.where(use_right, u_right, u_left)
        coef = np.where(use_right[..., None], self._right_derivatives[derivative][safe],
                        self._derivatives[derivative][safe])
        result = coef[..., -1]
        for j in range(coef.shape[-1] - 2, -1, -1):
            result = result * u + coef[..., j]
        return np.where(inside, result, 0.0)

    def exact(self, x):
        """有理点处的精确值"""
        x = Fraction(x)
        if x < self.knots[0] or x >= self.knots[-1]:
            return Fraction(0)
        i = bisect.bisect_right(self.knots, x) - 1
        return _horner_exact(self.pieces[i], x - self.knots[i])

    def integral(self):
        return sum(
            (_horner_exact(_integrate_coeffs(p, Fraction(0)), k1 - k0)
             for p, k0, k1 in zip(self.pieces, self.knots, self.knots[1:])),
            Fraction(0),
        )

    @cached_property
    def is_continuous(self):
        """节点处（含两端的零延拓）是否无跳跃"""
        ends = [Fraction(0)]
        starts = []
        for p, k0, k1 in zip(self.pieces, self.knots, self.knots[1:]):
            starts.append(p[0])
            ends.append(_horner_exact(p, k1 - k0))
        starts.append(Fraction(0))
        return all(e == s for e, s in zip(ends, starts))

    def abs_max(self, left, right, derivative=0):
        """[left, right) 上 |p^(derivative)| 的上确界（由临界点精确求得）"""
        best = 0.0
        for i in range(len(self.pieces)):
            k0, k1 = self._knots[i], self._knots[i + 1]
            if not (k0 < right and left < k1):
                continue
            lo, hi = max(k0, left) - k0, min(k1, right) - k0
            coef = np.trim_zeros(self._derivatives[derivative][i], "b")
            if coef.size == 0:
                continue
            candidates = [lo, hi]
            slope = np.trim_zeros(self._derivatives[derivative + 1][i], "b")
            if slope.size > 1:
                roots = np.polynomial.polynomial.polyroots(slope)
                real = roots[np.abs(roots.imag) < 1e-12].real
                candidates.extend(real[(real > lo) & (real < hi)])
            values = np.polynomial.polynomial.polyval(np.asarray(candidates), coef)
            best = max(best, float(np.max(np.abs(values))))
        return best


@lru_cache(maxsize=None)
def bspline_polynomial(order):
    """中心化B样条 B_m 的精确分段多项式

    B_m(x) = ∫_{x−1/2}^{x+1/2} B_{m−1}。在局部坐标下第 j 段为
    Q_j(u) − Q_{j−1}(u)，其中 Q_j 是 B_{m−1} 的原函数在第 j 段上的表示。
    """
    if order < 1:
        raise WindowSpecError(f"B样条阶数必须 ≥ 1，收到 {order}")
    half = Fraction(1, 2)
    if order == 1:
        return PiecewisePolynomial([-half, half], [[1]])
    previous = bspline_polynomial(order - 1)
    antiderivatives = []
    constant = Fraction(0)
    for p in previous.pieces:
        q = _integrate_coeffs(p, constant)
        antiderivatives.append(q)
        constant = _horner_exact(q, Fraction(1))
    zero, one = (Fraction(0),), (Fraction(1),)
    pieces = []
    for j in range(order):
        upper = antiderivatives[j] if j < order - 1 else one
        lower = antiderivatives[j - 1] if j >= 1 else zero
        pieces.append(_add_coeffs(upper, tuple(-c for c in lower)))
    knots = [Fraction(-order, 2) + j for j in range(order + 1)]
    return PiecewisePolynomial(knots, pieces)


# -------------------------------------------------------------------
# 包络
# -------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """|w(x)| 的上界：高斯项 c·e^{−α(x−μ)²} 与盒子项 h·χ_[l,r] 之和"""
    gaussians: Tuple[Tuple[float, float, float], ...] = ()
    boxes: Tuple[Tuple[float, float, float], ...] = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for c, alpha, mu in self.gaussians:
            total = total + c * np.exp(-alpha * (x - mu) ** 2)
        for h, l, r in self.boxes:
            total = total + np.where((x >= l) & (x <= r), h, 0.0)
        return total

    def __add__(self, other):
        return Envelope(self.gaussians + other.gaussians, self.boxes + other.boxes)

    @property
    def is_empty(self):
        return not self.gaussians and not self.boxes

    def scaled(self, factor):
        s = abs(factor)
        return Envelope(tuple((s * c, a, m) for c, a, m in self.gaussians),
                        tuple((s * h, l, r) for h, l, r in self.boxes))

    def dilated(self, factor):
        """w(s·x) 的包络"""
        s = float(factor)
        return Envelope(tuple((c, a * s * s, m / s) for c, a, m in self.gaussians),
                        tuple((h,) + tuple(sorted((l / s, r / s))) for h, l, r in self.boxes))

    def translated(self, shift):
        """w(x − t) 的包络"""
        t = float(shift)
        return Envelope(tuple((c, a, m + t) for c, a, m in self.gaussians),
                        tuple((h, l + t, r + t) for h, l, r in self.boxes))

    def sup(self):
        return math.fsum(c for c, _, _ in self.gaussians) + math.fsum(h for h, _, _ in self.boxes)

    def interval(self, tol):
        """包络各项均 < tol 的区域之外的最小区间；全部可忽略时返回 None"""
        lo, hi = math.inf, -math.inf
        for c, alpha, mu in self.gaussians:
            if c > tol:
                radius = math.sqrt(math.log(c / tol) / alpha)
                lo, hi = min(lo, mu - radius), max(hi, mu + radius)
        for h, l, r in self.boxes:
            if h > tol:
                lo, hi = min(lo, l), max(hi, r)
        return None if lo > hi else (lo, hi)

    def gaussian_tail(self, tol, spacing=1.0):
        """interval(tol) 之外、以 spacing 为间距的格点上高斯项之和的上界"""
        total = 0.0
        for c, alpha, _ in self.gaussians:
            radius = math.sqrt(math.log(c / tol) / alpha) if c > tol else 0.0
            total += 2 * c * (math.exp(-alpha * radius ** 2)
                              + math.sqrt(math.pi) / (2 * math.sqrt(alpha) * spacing)
                              * erfc(math.sqrt(alpha) * radius))
        return total


# -------------------------------------------------------------------
# 窗口
# -------------------------------------------------------------------

class Window:
    """窗口基类：子类实现 _evaluate 与 descriptor"""

    def __init__(self, kind, support, envelope, lipschitz_bound, sup_norm, breakpoints=(), is_real=True):
        self.kind = kind
        self.support = None if support is None else (float(support[0]), float(support[1]))
        self.envelope = envelope
        self.lipschitz_bound = float(lipschitz_bound)
        self.sup_norm = float(sup_norm)
        self.breakpoints = tuple(sorted({float(p) for p in breakpoints}))
        self.is_real = is_real

    def _evaluate(self, x, derivative):
        raise NotImplementedError("Subclasses must implement _evaluate")

    def descriptor(self):
        raise NotImplementedError("Subclasses must implement descriptor")

    def evaluate(self, x, derivative=0):
        """w^(derivative)(x)；支撑之外精确为零"""
        if derivative not in (0, 1, 2):
            raise WindowSpecError(f"只支持 0、1、2 阶导数，收到 {derivative}")
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        values = self._evaluate(x, derivative)
        if self.is_real:
            values = np.real(values)
        if self.support is not None:
            left, right = self.support
            values = np.where((x < left) | (x > right), 0.0, values)
        return np.asarray(values).item() if scalar else values

    def __call__(self, x):
        return self.evaluate(x)

    def cell_sup(self, left, right):
        """[left, right) 上 |w| 的上确界（网格加Lipschitz修正）"""
        if self.support is not None:
            left, right = max(left, self.support[0]), min(right, self.support[1])
            if left >= right:
                return 0.0
        x = np.concatenate([np.linspace(left, right, CELL_GRID + 1),
                            [p for p in self.breakpoints if left < p < right]])
        peak = float(np.max(np.abs(self.evaluate(x))))
        if math.isfinite(self.lipschitz_bound):
            peak += self.lipschitz_bound * (right - left) / (2 * CELL_GRID)
        return peak

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor()})"


class GaussianWindow(Window):
    """x ↦ amplitude·e^{−(x/width)²}"""

    def __init__(self, amplitude, width):
        if not width > 0:
            raise WindowSpecError(f"高斯窗宽度必须为正，收到 {width!r}")
        self.amplitude = float(amplitude)
        self.width = float(width)
        alpha = 1.0 / self.width ** 2
        super().__init__(
            WindowKind.GAUSSIAN, None,
            Envelope(gaussians=((abs(self.amplitude), alpha, 0.0),)),
            abs(self.amplitude) * math.sqrt(2 / math.e) / self.width,
            abs(self.amplitude),
        )

    def _evaluate(self, x, derivative):
        w2 = self.width ** 2
        base = self.amplitude * np.exp(-x * x / w2)
        if derivative == 0:
            return base
        if derivative == 1:
            return base * (-2 * x / w2)
        return base * (4 * x * x / (w2 * w2) - 2 / w2)

    def cell_sup(self, left, right):
        return abs(self.amplitude) * math.exp(-(min(max(0.0, left), right) / self.width) ** 2)

    def descriptor(self):
        return {"kind": "gaussian", "params": {"amplitude": self.amplitude, "width": self.width}}


class PiecewiseWindow(Window):
    """由精确分段多项式给出的紧支撑窗口"""

    def __init__(self, polynomial, kind, descriptor):
        self.polynomial = polynomial
        self._descriptor = descriptor
        left, right = polynomial.interval
        sup = polynomial.abs_max(left, right)
        if polynomial.is_continuous:
            lipschitz = polynomial.abs_max(left, right, derivative=1)
        else:
            lipschitz = math.inf
        super().__init__(kind, (left, right), Envelope(boxes=((sup, left, right),)),
                         lipschitz, sup, polynomial.knots)

    def _evaluate(self, x, derivative):
        return self.polynomial.evaluate(x, derivative)

    def cell_sup(self, left, right):
        return self.polynomial.abs_max(left, right)

    def descriptor(self):
        return self._descriptor


class DilatedWindow(Window):
    """x ↦ w(s·x)"""

    def __init__(self, base, factor):
        if factor == 0 or not math.isfinite(factor):
            raise WindowSpecError(f"伸缩因子必须是非零有限数，收到 {factor!r}")
        self.base = base
        self.factor = float(factor)
        s = self.factor
        support = None if base.support is None else tuple(sorted((base.support[0] / s, base.support[1] / s)))
        super().__init__(base.kind, support, base.envelope.dilated(s), abs(s) * base.lipschitz_bound,
                         base.sup_norm, [p / s for p in base.breakpoints], base.is_real)

    def _evaluate(self, x, derivative):
        return self.base.evaluate(self.factor * x, derivative) * self.factor ** derivative

    def cell_sup(self, left, right):
        ends = sorted((self.factor * left, self.factor * right))
        return self.base.cell_sup(*ends)

    def descriptor(self):
        return {"kind": "dilate", "params": {"window": self.base.descriptor(), "factor": self.factor}}


class TranslatedWindow(Window):
    """x ↦ w(x − shift)"""

    def __init__(self, base, shift):
        self.base = base
        self.shift = float(shift)
        t = self.shift
        support = None if base.support is None else (base.support[0] + t, base.support[1] + t)
        super().__init__(base.kind, support, base.envelope.translated(t), base.lipschitz_bound,
                         base.sup_norm, [p + t for p in base.breakpoints], base.is_real)

    def _evaluate(self, x, derivative):
        return self.base.evaluate(x - self.shift, derivative)

    def cell_sup(self, left, right):
        return self.base.cell_sup(left - self.shift, right - self.shift)

    def descriptor(self):
        return {"kind": "translate", "params": {"window": self.base.descriptor(), "shift": self.shift}}


class LinearCombination(Window):
    """Σ c_i·w_i（实系数）"""

    def __init__(self, parts, kind=None, descriptor=None):
        if not parts:
            raise WindowSpecError("线性组合至少需要一项")
        self.parts = tuple((float(c), w) for c, w in parts)
        self._descriptor = descriptor
        supports = [w.support for _, w in self.parts]
        support = None
        if all(s is not None for s in supports):
            support = (min(s[0] for s in supports), max(s[1] for s in supports))
        envelope = reduce(lambda e, f: e + f, (w.envelope.scaled(c) for c, w in self.parts))
        super().__init__(
            kind or WindowKind.LATTICE_COMBINATION, support, envelope,
            math.fsum(abs(c) * w.lipschitz_bound for c, w in self.parts),
            math.fsum(abs(c) * w.sup_norm for c, w in self.parts),
            [p for _, w in self.parts for p in w.breakpoints],
            all(w.is_real for _, w in self.parts),
        )

    def _evaluate(self, x, derivative):
        return sum(c * w.evaluate(x, derivative) for c, w in self.parts)

    def cell_sup(self, left, right):
        if len(self.parts) == 1:
            c, w = self.parts[0]
            return abs(c) * w.cell_sup(left, right)
        return super().cell_sup(left, right)

    def descriptor(self):
        if self._descriptor is not None:
            return self._descriptor
        return {"kind": "linear_combination",
                "params": {"parts": [[c, w.descriptor()] for c, w in self.parts]}}


class LatticeCombination(Window):
    """Σ_j c_j·e^{2πiμ_j x}·base(x − τ_j)

    当所有调制为零、系数为实数且 base 为分段多项式时，直接合并成一个
    精确的分段多项式求值。
    """

    def __init__(self, base, terms, descriptor=None):
        terms = tuple((float(t), float(m), complex(c)) for t, m, c in terms)
        if not terms:
            raise WindowSpecError("格组合至少需要一项")
        if not all(math.isfinite(t) and math.isfinite(m) and np.isfinite(c) for t, m, c in terms):
            raise WindowSpecError("格组合的项必须是有限数")
        self.base = base
        self.terms = terms
        self._descriptor = descriptor

        groups: Dict[float, list] = {}
        for t, m, c in terms:
            groups.setdefault(t, []).append((m, c))
        self._groups = tuple(
            (t, np.array([m for m, _ in items]), np.array([c for _, c in items]))
            for t, items in sorted(groups.items())
        )

        self._exact = None
        real = base.is_real and all(m == 0 and c.imag == 0 for _, m, c in terms)
        if real and isinstance(base, PiecewiseWindow):
            polynomial = reduce(lambda p, q: p + q, (
                base.polynomial.scaled(Fraction(c.real)).shifted(Fraction(t)) for t, _, c in terms))
            self._exact = PiecewiseWindow(polynomial, WindowKind.LATTICE_COMBINATION, None)

        if self._exact is not None:
            super().__init__(WindowKind.LATTICE_COMBINATION, self._exact.support, self._exact.envelope,
                             self._exact.lipschitz_bound, self._exact.sup_norm,
                             self._exact.breakpoints, True)
            return

        support = None
        if base.support is not None:
            support = (base.support[0] + self._groups[0][0], base.support[1] + self._groups[-1][0])
        weights = [float(np.sum(np.abs(c))) for _, _, c in self._groups]
        envelope = reduce(lambda e, f: e + f, (
            base.envelope.translated(t).scaled(w) for (t, _, _), w in zip(self._groups, weights)))
        lipschitz = math.fsum(
            float(np.sum(np.abs(c) * (base.lipschitz_bound + 2 * math.pi * np.abs(m) * base.sup_norm)))
            for _, m, c in self._groups)
        super().__init__(WindowKind.LATTICE_COMBINATION, support, envelope, lipschitz,
                         math.fsum(weights) * base.sup_norm,
                         [p + t for t, _, _ in self._groups for p in base.breakpoints], real)

    def _evaluate(self, x, derivative):
        if self._exact is not None:
            return self._exact.evaluate(x, derivative)
        shape = x.shape
        flat = x.ravel()
        total = np.zeros(flat.shape, dtype=complex)
        for shift, modulations, coefficients in self._groups:
            y = flat - shift
            omega = 2j * math.pi * modulations
            phases = np.exp(np.outer(omega, flat))
            base = [self.base.evaluate(y, d) for d in range(derivative + 1)]
            for k in range(derivative + 1):
                weighted = (coefficients * omega ** k) @ phases
                total += comb(derivative, k, exact=True) * weighted * base[derivative - k]
        return total.reshape(shape)

    def cell_sup(self, left, right):
        if self._exact is not None:
            return self._exact.cell_sup(left, right)
        return super().cell_sup(left, right)

    def descriptor(self):
        if self._descriptor is not None:
            return self._descriptor
        return {"kind": "lattice_combination",
                "params": {"base": self.base.descriptor(),
                           "terms": [[t, m, encode_complex(c)] for t, m, c in self.terms]}}


# -------------------------------------------------------------------
# 格上的相关和
# -------------------------------------------------------------------

@dataclass
class Correlation:
    """Σ_k conj φ(x − s − ak)·g(x − ak) 及其对 x 的导数"""
    values: np.ndarray
    derivatives: Tuple[np.ndarray, ...]
    tail: float


def _product_reach(phi_env, g_env, tol):
    """两包络乘积的有效区间 [lo, hi] 与区间外的高斯乘积项 (C, β, m, t)"""
    lo, hi = math.inf, -math.inf
    products = []

    def extend(left, right):
        nonlocal lo, hi
        if left <= right:
            lo, hi = min(lo, left), max(hi, right)

    for h1, l1, r1 in phi_env.boxes:
        for h2, l2, r2 in g_env.boxes:
            extend(max(l1, l2), min(r1, r2))
        for _ in g_env.gaussians:
            extend(l1, r1)
    for c1, a1, m1 in phi_env.gaussians:
        for _, l2, r2 in g_env.boxes:
            extend(l2, r2)
        for c2, a2, m2 in g_env.gaussians:
            beta = a1 + a2
            center = (a1 * m1 + a2 * m2) / beta
            C = c1 * c2 * math.exp(-a1 * a2 / beta * (m1 - m2) ** 2)
            radius = math.sqrt(math.log(C / tol) / beta) if C > tol else 0.0
            if C > tol:
                extend(center - radius, center + radius)
            products.append((C, beta, center, radius))
    return lo, hi, products


def lattice_correlation(phi, g, shift, a, x, tol, order=0):
    """G(x) = Σ_k conj φ(x − shift − ak)·g(x − ak)

    G 以 a 为周期，先把 x 约化到 [0, a)；k 的范围由两窗口包络乘积决定，
    范围之外的高斯乘积项给出 tail 证书（不含导数）。
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    lo, hi, products = _product_reach(phi.envelope.translated(shift), g.envelope, tol)
    tail = 0.0
    for C, beta, _, radius in products:
        tail += 2 * C * (math.exp(-beta * radius ** 2)
                         + math.sqrt(math.pi) / (2 * math.sqrt(beta) * a) * erfc(math.sqrt(beta) * radius))
    complex_out = not (phi.is_real and g.is_real)
    if lo > hi:
        zeros = np.zeros(shape, dtype=complex if complex_out else float)
        return Correlation(zeros, tuple(zeros for _ in range(order)), tail)

    reduced = np.mod(x.ravel(), a)
    k = np.arange(math.floor(-hi / a), math.ceil((a - lo) / a) + 1)
    y = (reduced[:, None] - a * k[None, :]).ravel()
    left = [phi.evaluate(y - shift, d) for d in range(order + 1)]
    if not phi.is_real:
        left = [np.conj(v) for v in left]
    right = [g.evaluate(y, d) for d in range(order + 1)]
    outputs = []
    for d in range(order + 1):
        term = sum(comb(d, j, exact=True) * left[j] * right[d - j] for j in range(d + 1))
        outputs.append(np.sum(term.reshape(len(reduced), len(k)), axis=1).reshape(shape))
    return Correlation(outputs[0], tuple(outputs[1:]), tail)


class Periodization:
    """H(x) = Σ_k |h(x + ka)|²，以 a 为周期"""

    def __init__(self, h, a, tol=None, policy=None):
        if not a > 0:
            raise WindowSpecError(f"步长 a 必须为正，收到 {a!r}")
        if h.envelope.is_empty:
            raise WindowSpecError("周期化要求窗口具有紧支撑或高斯包络")
        self.window = h
        self.period = float(a)
        self.policy = policy or TruncationPolicy()
        self.tol = self.policy.k_tail_tol if tol is None else tol

    def correlation(self, x, order=0):
        return lattice_correlation(self.window, self.window, 0.0, self.period, x, self.tol, order)

    def evaluate(self, x, derivative=0):
        c = self.correlation(x, derivative)
        values = c.values if derivative == 0 else c.derivatives[derivative - 1]
        return np.real(values)

    def __call__(self, x):
        return self.evaluate(x)

    def _sampler(self, x):
        c = self.correlation(x, 2)
        return ScanSample(np.real(c.values), np.abs(c.derivatives[0]), np.abs(c.derivatives[1]))

    @cached_property
    def tail(self):
        return self.correlation(np.zeros(1)).tail

    @cached_property
    def sup(self):
        result = scan_period(self._sampler, self.period, self.policy, ScanMode.SUP, "periodization sup")
        return result.value + self.tail

    @cached_property
    def inf(self):
        result = scan_period(self._sampler, self.period, self.policy, ScanMode.INF, "periodization inf")
        return max(0.0, result.value)


class PeriodizedQuotient(Window):
    """g(x) = b·h(x)/H(x)，H 为 h 的周期化（逐点惰性求值）"""

    def __init__(self, h, periodization, b):
        self.h = h
        self.periodization = periodization
        self.b = float(b)
        a = periodization.period
        inf_h, sup_h = periodization.inf, h.sup_norm
        left, right = h.support
        count = math.ceil((right - left) / a) + 1
        # |H'| ≤ 2·sup|h|·Lip(h)·count
        slope_H = 2 * sup_h * h.lipschitz_bound * count
        lipschitz = self.b * (h.lipschitz_bound / inf_h + sup_h * slope_H / inf_h ** 2)
        sup = self.b * sup_h / inf_h
        shifted = [p + k * a for p in h.breakpoints
                   for k in range(-count - 1, count + 2) if left <= p + k * a <= right]
        super().__init__(WindowKind.PERIODIZED_QUOTIENT, h.support,
                         Envelope(boxes=((sup, left, right),)), lipschitz, sup, shifted, h.is_real)

    def _evaluate(self, x, derivative):
        c = self.periodization.correlation(x, derivative)
        H = [np.real(c.values)] + [np.real(v) for v in c.derivatives]
        h = [self.h.evaluate(x, d) for d in range(derivative + 1)]
        safe = np.where(H[0] > 0, H[0], 1.0)
        if derivative == 0:
            return self.b * h[0] / safe
        numerator = h[1] * safe - h[0] * H[1]
        if derivative == 1:
            return self.b * numerator / safe ** 2
        return self.b * ((h[2] * safe - h[0] * H[2]) / safe ** 2 - 2 * H[1] * numerator / safe ** 3)

    def descriptor(self):
        return {"kind": "painless_dual",
                "params": {"window": self.h.descriptor(), "a": self.periodization.period, "b": self.b}}


# -------------------------------------------------------------------
# 构造函数
# -------------------------------------------------------------------

def gaussian(amplitude, width):
    return GaussianWindow(amplitude, width)


def bspline(order):
    """中心化 m 阶B样条，支撑 [−m/2, m/2]"""
    if int(order) != order or order < 1:
        raise WindowSpecError(f"B样条阶数必须是正整数，收到 {order!r}")
    order = int(order)
    return PiecewiseWindow(bspline_polynomial(order), WindowKind.BSPLINE,
                           {"kind": "bspline", "params": {"order": order}})


def indicator(left, right):
    """χ_[left, right)"""
    if not left < right:
        raise WindowSpecError(f"指示函数区间必须满足 left < right，收到 [{left}, {right})")
    polynomial = PiecewisePolynomial([Fraction(left), Fraction(right)], [[1]])
    return PiecewiseWindow(polynomial, WindowKind.BSPLINE,
                           {"kind": "indicator", "params": {"left": float(left), "right": float(right)}})


def ck_dual_window(order, b):
    """g(x) = b·Σ_{n=−(N−1)}^{N−1} B_N(x + n)，要求 0 < b ≤ 1/(2N−1)"""
    if int(order) != order or order < 1:
        raise WindowSpecError(f"阶数 N 必须是正整数，收到 {order!r}")
    order = int(order)
    limit = 1.0 / (2 * order - 1)
    if not 0 < b <= limit * (1 + 1e-12):
        raise WindowSpecError(f"N={order} 时 b 必须在 (0, {limit:.12g}] 内，收到 {b!r}")
    terms = [(-n, 0.0, b) for n in range(-(order - 1), order)]
    return LatticeCombination(bspline(order), terms,
                              descriptor={"kind": "ck_dual", "params": {"order": order, "b": float(b)}})


def periodization_power(h, a, policy=None):
    """H(x) = Σ_k |h(x + ka)|²，附带一个周期上的 inf / sup"""
    return Periodization(h, a, policy=policy)


def painless_canonical_dual(h, a, b, policy=None):
    """g = b·h/Σ_n |h(x + na)|²，要求 supp h 的长度 ≤ 1/b 且周期化远离零"""
    if not a > 0 or not b > 0:
        raise WindowSpecError(f"格参数必须为正，收到 a={a!r}, b={b!r}")
    if h.support is None:
        raise WindowSpecError("无痛对偶要求 h 具有紧支撑")
    length = h.support[1] - h.support[0]
    if length > (1.0 / b) * (1 + 1e-12):
        raise WindowSpecError(f"supp h 的长度 {length:.6g} 超过 1/b = {1.0 / b:.6g}")
    periodization = periodization_power(h, a, policy)
    if not periodization.inf > 0:
        raise WindowSpecError("h 的周期化没有远离零的下界")
    logger.info(f"[Windows] 周期化范围 [{periodization.inf:.6g}, {periodization.sup:.6g}]")
    return PeriodizedQuotient(h, periodization, b)


def wiener_norm(w, tol=WIENER_TAIL_TOL):
    """Σ_n sup_{[n, n+1)} |w|，包络低于 tol 的单元用高斯尾界代替"""
    reach = w.envelope.interval(tol)
    if reach is None:
        return w.envelope.gaussian_tail(tol)
    lo, hi = reach
    if w.support is not None:
        lo, hi = max(lo, w.support[0]), min(hi, w.support[1])
    cells = range(math.floor(lo), max(math.ceil(hi), math.floor(lo) + 1))
    return math.fsum(w.cell_sup(n, n + 1) for n in cells) + w.envelope.gaussian_tail(tol)


def combine(base, terms):
    """Σ c·e^{2πiμx}·base(x − τ)，terms 为 (τ, μ, c) 列表"""
    return LatticeCombination(base, terms)


def scale(w, factor):
    return LinearCombination(((factor, w),), kind=w.kind,
                             descriptor={"kind": "scale",
                                         "params": {"window": w.descriptor(), "factor": float(factor)}})


def difference(left, right):
    return LinearCombination(((1.0, left), (-1.0, right)),
                             descriptor={"kind": "difference",
                                         "params": {"left": left.descriptor(), "right": right.descriptor()}})


def dilate(w, factor):
    return DilatedWindow(w, factor)


def translate(w, shift):
    return TranslatedWindow(w, shift)


# -------------------------------------------------------------------
# 描述符
# -------------------------------------------------------------------

WINDOW_SCHEMAS = {
    "gaussian": ("amplitude", "width"),
    "bspline": ("order",),
    "indicator": ("left", "right"),
    "ck_dual": ("order", "b"),
    "painless_dual": ("window", "a", "b"),
    "dilate": ("window", "factor"),
    "scale": ("window", "factor"),
    "translate": ("window", "shift"),
    "difference": ("left", "right"),
    "linear_combination": ("parts",),
    "lattice_combination": ("base", "terms"),
}


def window_from_spec(spec):
    """由 {"kind": ..., "params": {...}} 构造窗口"""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise WindowSpecError(f"窗口描述必须是含 kind 的JSON对象，收到 {spec!r}")
    kind = spec["kind"]
    params = spec.get("params", {})
    if kind not in WINDOW_SCHEMAS:
        raise WindowSpecError(f"未知的窗口类型 {kind!r}；可选: {', '.join(sorted(WINDOW_SCHEMAS))}")
    if not isinstance(params, dict):
        raise WindowSpecError(f"{kind} 的 params 必须是JSON对象")
    expected = WINDOW_SCHEMAS[kind]
    missing = [key for key in expected if key not in params]
    unknown = [key for key in params if key not in expected]
    if missing or unknown:
        raise WindowSpecError(f"窗口 {kind} 的参数不符合模式 {list(expected)}: "
                              f"缺少 {missing}，多余 {unknown}")
    try:
        if kind == "gaussian":
            return gaussian(float(params["amplitude"]), float(params["width"]))
        if kind == "bspline":
            return bspline(params["order"])
        if kind == "indicator":
            return indicator(float(params["left"]), float(params["right"]))
        if kind == "ck_dual":
            return ck_dual_window(params["order"], float(params["b"]))
        if kind == "painless_dual":
            return painless_canonical_dual(window_from_spec(params["window"]),
                                           float(params["a"]), float(params["b"]))
        if kind == "dilate":
            return dilate(window_from_spec(params["window"]), float(params["factor"]))
        if kind == "scale":
            return scale(window_from_spec(params["window"]), float(params["factor"]))
        if kind == "translate":
            return translate(window_from_spec(params["window"]), float(params["shift"]))
        if kind == "difference":
            return difference(window_from_spec(params["left"]), window_from_spec(params["right"]))
        if kind == "linear_combination":
            return LinearCombination([(float(c), window_from_spec(w)) for c, w in params["parts"]])
        terms = [(float(t), float(m), decode_complex(c)) for t, m, c in params["terms"]]
        return combine(window_from_spec(params["base"]), terms)
    except WindowSpecError:
        raise
    except (TypeError, KeyError, ValueError) as e:
        raise WindowSpecError(f"窗口 {kind} 的参数格式错误: {e}") from e


def sample_window(w, start, stop, step):
    """等距采样，返回 (x, value) 行"""
    if not step > 0 or stop < start:
        raise WindowSpecError(f"采样范围无效: [{start}, {stop}] 步长 {step}")
    count = int(round((stop - start) / step)) + 1
    x = np.round(start + step * np.arange(count), 12)
    values = np.real(w.evaluate(x))
    return list(zip(x.tolist(), values.tolist()))
