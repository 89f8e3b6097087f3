"""有限维框架代数

约定：内积对第一个变量线性、对第二个变量共轭线性。
框架以 d×K 合成矩阵 T 表示，第 k 列为 f_k；分析算子为 T^H。
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from config import AUDIT_TOL, BIJECTIVITY_TOL, EXAMPLE_A1_C, EXAMPLE_R1_EPSILON
from core_pipeline import (
    DimensionMismatchError, NotAFrameError, NotApproximatelyDualError,
    NotPseudoDualError, PerturbationTooLargeError,
)
from utils import decode_complex, encode_complex

logger = logging.getLogger(__name__)


# -------------------------------------------------------------------
# 类型
# -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FiniteFrame:
    """C^d 中 K 个向量构成的有限序列（允许零向量与重复向量）"""
    synthesis: np.ndarray

    def __post_init__(self):
        arr = np.array(self.synthesis, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatchError(f"合成矩阵必须是非空的 d×K 数组，收到形状 {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("框架向量含有非有限数")
        arr.setflags(write=False)
        object.__setattr__(self, "synthesis", arr)

    @classmethod
    def from_vectors(cls, vectors, dim=None):
        vecs = [np.asarray(v, dtype=complex).ravel() for v in vectors]
        if not vecs:
            raise DimensionMismatchError("框架至少需要一个向量")
        d = dim if dim is not None else len(vecs[0])
        for k, v in enumerate(vecs):
            if len(v) != d:
                raise DimensionMismatchError(f"第 {k} 个向量的维数为 {len(v)}，期望 {d}")
        return cls(np.column_stack(vecs))

    @property
    def dim(self):
        return self.synthesis.shape[0]

    @property
    def count(self):
        return self.synthesis.shape[1]

    def scaled(self, factor):
        return FiniteFrame(factor * self.synthesis)

    def transformed(self, operator):
        """{W f_k}"""
        W = np.asarray(getattr(operator, "entries", operator), dtype=complex)
        if W.shape != (self.dim, self.dim):
            raise DimensionMismatchError(f"算子形状 {W.shape} 与维数 {self.dim} 不符")
        return FiniteFrame(W @ self.synthesis)

    def to_json(self):
        """{"dim": d, "vectors": [[re, im], ...]}，按列优先展开"""
        return {"dim": self.dim,
                "vectors": [encode_complex(z) for z in self.synthesis.ravel(order="F")]}

    @classmethod
    def from_json(cls, data):
        d = int(data["dim"])
        flat = [decode_complex(p) for p in data["vectors"]]
        if d < 1 or not flat or len(flat) % d:
            raise DimensionMismatchError(f"{len(flat)} 个分量无法按 dim={d} 分成列")
        return cls(np.array(flat, dtype=complex).reshape((d, len(flat) // d), order="F"))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """C^d 上的算子"""
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatchError(f"算子矩阵必须是方阵，收到形状 {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("算子矩阵含有非有限数")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class FrameBoundsEstimate:
    """框架界 (A, B)；A = 0 表示不是框架"""
    lower: float
    upper: float
    tail_certificate: float = 0.0

    def __post_init__(self):
        if self.lower < 0 or self.upper < 0:
            raise ValueError(f"框架界必须非负: ({self.lower}, {self.upper})")
        if self.lower > self.upper * (1 + 1e-12):
            raise ValueError(f"下界 {self.lower} 大于上界 {self.upper}")

    @property
    def is_frame(self):
        return self.lower > 0

    def to_dict(self):
        return {"lower": float(self.lower), "upper": float(self.upper),
                "tail_certificate": float(self.tail_certificate)}


@dataclass(frozen=True)
class PerturbationData:
    """R：差序列的Bessel界；C：候选对偶的上界"""
    R: float
    C: float

    def __post_init__(self):
        for name in ("R", "C"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} 必须是有限的非负数，收到 {value!r}")


@dataclass(frozen=True)
class CertifiedBound:
    value: float
    certified: bool

    def to_dict(self):
        return {"value": float(self.value), "certified": bool(self.certified)}


@dataclass(frozen=True)
class PerturbationCertificate:
    """扰动后典范对偶的缺陷上界，以及（给定 B 时）扰动框架的框架界"""
    value: float
    certified: bool
    perturbed_bounds: Optional[FrameBoundsEstimate] = None

    def to_dict(self):
        result = {"value": float(self.value), "certified": bool(self.certified)}
        if self.perturbed_bounds is not None:
            result["perturbed_bounds"] = self.perturbed_bounds.to_dict()
        return result


@dataclass(frozen=True)
class PerturbationChain:
    """‖I−UT*‖ ≤ ‖U‖·√R ≤ √(C·R)"""
    measured: float
    operator_bound: float
    product_bound: float
    dual_defect: float

    @property
    def consistent(self):
        return (self.measured <= self.operator_bound + 1e-9
                and self.operator_bound <= self.product_bound + 1e-9)

    def to_dict(self):
        return {"measured": self.measured, "operator_bound": self.operator_bound,
                "product_bound": self.product_bound, "dual_defect": self.dual_defect,
                "consistent": self.consistent}


# -------------------------------------------------------------------
# 算子
# -------------------------------------------------------------------

def _check_pair(F, G):
    if F.synthesis.shape != G.synthesis.shape:
        raise DimensionMismatchError(
            f"框架形状不一致: {F.synthesis.shape} 与 {G.synthesis.shape}")


def _spectral_norm(matrix):
    return float(linalg.svdvals(np.asarray(matrix))[0])


def synthesis(frame, coeffs):
    """Σ c_k f_k"""
    c = np.asarray(coeffs, dtype=complex).ravel()
    if c.shape[0] != frame.count:
        raise DimensionMismatchError(f"系数个数 {c.shape[0]} 与框架向量个数 {frame.count} 不符")
    return frame.synthesis @ c


def analysis(frame, f):
    """{⟨f, f_k⟩}_k"""
    v = np.asarray(f, dtype=complex).ravel()
    if v.shape[0] != frame.dim:
        raise DimensionMismatchError(f"向量维数 {v.shape[0]} 与框架维数 {frame.dim} 不符")
    return frame.synthesis.conj().T @ v


def mixed_frame_operator(analysis_frame, synthesis_frame):
    """f ↦ Σ ⟨f, f_k⟩ g_k，即 UT*"""
    _check_pair(analysis_frame, synthesis_frame)
    return OperatorMatrix(synthesis_frame.synthesis @ analysis_frame.synthesis.conj().T)


def operator_norm(M):
    """最大奇异值"""
    return _spectral_norm(M.entries if isinstance(M, OperatorMatrix) else M)


def frame_bounds(frame):
    """最优框架界：合成矩阵奇异值平方的最小/最大值"""
    s = linalg.svdvals(frame.synthesis)
    upper = float(s[0] ** 2)
    if len(s) < frame.dim or s[0] == 0 or s[-1] <= BIJECTIVITY_TOL * s[0]:
        lower = 0.0
    else:
        lower = float(s[-1] ** 2)
    return FrameBoundsEstimate(lower, upper)


def approx_duality_defect(F, G):
    """‖I − UT*‖，并与 ‖I − TU*‖ 互相核对"""
    _check_pair(F, G)
    identity = np.eye(F.dim)
    T, U = F.synthesis, G.synthesis
    defect = _spectral_norm(identity - U @ T.conj().T)
    mirrored = _spectral_norm(identity - T @ U.conj().T)
    if abs(defect - mirrored) > AUDIT_TOL * max(1.0, defect):
        logger.warning(f"[Frames] 伴随对称性自检偏差 {abs(defect - mirrored):.3e}")
    return defect


def is_pseudo_dual(F, G, tol=BIJECTIVITY_TOL):
    """UT* 是否为双射：σ_min > tol·σ_max"""
    if not tol > 0:
        raise ValueError(f"tol 必须为正，收到 {tol!r}")
    s = linalg.svdvals(mixed_frame_operator(F, G).entries)
    return bool(s[0] > 0 and s[-1] > tol * s[0])


def natural_dual(F, G):
    """{(UT*)⁻¹ g_k}：伪对偶对生成的对偶框架"""
    if not is_pseudo_dual(F, G):
        raise NotPseudoDualError("UT* 不可逆，不是伪对偶对")
    D = FiniteFrame(linalg.solve(mixed_frame_operator(F, G).entries, G.synthesis))
    defect = approx_duality_defect(F, D)
    if defect > AUDIT_TOL:
        logger.warning(f"[Frames] 自然对偶的缺陷 {defect:.3e} 超过 {AUDIT_TOL:.0e}")
    return D


def canonical_dual(frame):
    """{(TT*)⁻¹ f_k}"""
    if not frame_bounds(frame).is_frame:
        raise NotAFrameError("下框架界为零，不存在典范对偶")
    S = mixed_frame_operator(frame, frame).entries
    return FiniteFrame(linalg.solve(S, frame.synthesis, assume_a="her"))


def pseudo_inverse_dual(frame):
    """分析算子为 T† 的对偶：合成矩阵为 (T†)^H"""
    if not frame_bounds(frame).is_frame:
        raise NotAFrameError("下框架界为零，不存在伪逆对偶")
    dual = FiniteFrame(linalg.pinv(frame.synthesis).conj().T)
    mismatch = _spectral_norm(dual.synthesis - canonical_dual(frame).synthesis)
    if mismatch > AUDIT_TOL * max(1.0, _spectral_norm(dual.synthesis)):
        logger.warning(f"[Frames] 伪逆对偶与典范对偶相差 {mismatch:.3e}")
    return dual


def neumann_dual_partial(F, G, N):
    """γ_k = g_k + Σ_{n=1..N} (I − UT*)ⁿ g_k，用矩阵幂逐项累加"""
    if int(N) != N or N < 0:
        raise ValueError(f"N 必须是非负整数，收到 {N!r}")
    defect = approx_duality_defect(F, G)
    if defect >= 1:
        raise NotApproximatelyDualError(f"对偶缺陷 {defect:.6g} ≥ 1，Neumann级数不收敛")
    E = np.eye(F.dim) - mixed_frame_operator(F, G).entries
    term = np.array(G.synthesis)
    Z = np.array(G.synthesis)
    for _ in range(int(N)):
        term = E @ term
        Z = Z + term
    return FiniteFrame(Z)


def self_scaling_bound(bounds):
    """(2/(A+B), (B/A − 1)/(B/A + 1))：框架自身乘以常数后作为近似对偶"""
    A, B = bounds.lower, bounds.upper
    if not A > 0:
        raise NotAFrameError("下框架界为零，无法自缩放")
    ratio = B / A
    return 2.0 / (A + B), (ratio - 1.0) / (ratio + 1.0)


def t1_bound(data):
    """√(C·R)，小于 1 时认证为近似对偶"""
    value = math.sqrt(data.C * data.R)
    return CertifiedBound(value, value < 1)


def c1_bound(A, R, B=None):
    """扰动框架的典范对偶缺陷界 1/(√(A/R) − 1)；R < A/4 时认证"""
    if not A > 0:
        raise NotAFrameError(f"A 必须为正，收到 {A!r}")
    if not R > 0:
        raise ValueError(f"R 必须为正，收到 {R!r}")
    if R >= A:
        raise PerturbationTooLargeError(f"R = {R:.6g} ≥ A = {A:.6g}，扰动过大")
    value = 1.0 / (math.sqrt(A / R) - 1.0)
    perturbed = None
    if B is not None:
        perturbed = FrameBoundsEstimate((math.sqrt(A) - math.sqrt(R)) ** 2,
                                        (math.sqrt(B) + math.sqrt(R)) ** 2)
    return PerturbationCertificate(value, R < A / 4, perturbed)


def difference_bessel_bound(F, H):
    """最优 R = ‖T* − V*‖²"""
    _check_pair(F, H)
    return _spectral_norm(F.synthesis - H.synthesis) ** 2


# -------------------------------------------------------------------
# 补充：证明中出现的界
# -------------------------------------------------------------------

def pseudo_dual_lower_bound(F, G):
    """伪对偶对中 G 的下框架界 1/‖(TU*)⁻¹T‖²"""
    if not is_pseudo_dual(F, G):
        raise NotPseudoDualError("UT* 不可逆，不是伪对偶对")
    T, U = F.synthesis, G.synthesis
    X = linalg.solve(T @ U.conj().T, T)
    return 1.0 / _spectral_norm(X) ** 2


def perturbation_defect_chain(F, H, G, C=None):
    """G 为 H 的对偶时，逐级给出 ‖I−UT*‖ ≤ ‖U‖·√R ≤ √(C·R)"""
    _check_pair(F, H)
    _check_pair(H, G)
    R = difference_bessel_bound(F, H)
    if C is None:
        C = frame_bounds(G).upper
    return PerturbationChain(
        measured=approx_duality_defect(F, G),
        operator_bound=_spectral_norm(G.synthesis) * math.sqrt(R),
        product_bound=math.sqrt(C * R),
        dual_defect=approx_duality_defect(H, G),
    )


def perturbed_canonical_dual(F, H) -> Tuple[FiniteFrame, PerturbationCertificate]:
    """H 的典范对偶，以及由 F 的最优界与最优 R 得到的缺陷证书"""
    bounds = frame_bounds(F)
    R = difference_bessel_bound(F, H)
    certificate = c1_bound(bounds.lower, R, bounds.upper)
    dual = canonical_dual(H)
    logger.info(f"[Frames] 扰动典范对偶: R={R:.3e}, 证书={certificate.value:.4g}")
    return dual, certificate


# -------------------------------------------------------------------
# 示例与随机生成器
# -------------------------------------------------------------------

def example_a1(C=EXAMPLE_A1_C):
    """{0, e1, e2} 与其对偶 {C·e1, e1, e2}；对偶的上界为 C²+1，可任意大"""
    e1, e2 = np.eye(2)
    F = FiniteFrame.from_vectors([np.zeros(2), e1, e2])
    G = FiniteFrame.from_vectors([C * e1, e1, e2])
    return F, G


def example_r1(epsilon=EXAMPLE_R1_EPSILON):
    """伪对偶不可传递的三元组 (F, H, G)：F 与 H 对偶、H 与 G 对偶，但 F 与 G 不是伪对偶"""
    if not epsilon > 0:
        raise ValueError(f"epsilon 必须为正，收到 {epsilon!r}")
    e1, e2 = np.eye(2)
    F = FiniteFrame.from_vectors([np.zeros(2), e1, e2])
    H = FiniteFrame.from_vectors([epsilon * e1, e1, e2])
    G = FiniteFrame.from_vectors([e1 / epsilon, np.zeros(2), e2])
    return F, H, G


def random_frame(rng, dim, count):
    """复高斯随机框架（count ≥ dim 时几乎必然是框架）"""
    shape = (dim, count)
    return FiniteFrame(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_approximate_pair(rng, dim, count, target_defect):
    """构造缺陷恰为 target_defect 的近似对偶对 (F, G)

    G = 典范对偶 + t·E，其中 t = target / ‖E T*‖，所以 ‖I − UT*‖ = target。
    """
    F = random_frame(rng, dim, count)
    D = canonical_dual(F)
    E = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    scale = target_defect / _spectral_norm(E @ F.synthesis.conj().T)
    return F, FiniteFrame(D.synthesis + scale * E)
