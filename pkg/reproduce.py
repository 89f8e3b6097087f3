"""示例流水线

e1：高斯窗与B样条构造的对偶窗（b = 0.06）
e2：e^{−4x²} 与由膨胀B样条得到的无痛对偶（b = 0.1）
r1：伪对偶不可传递的三元组
a1：对偶框架的上界可以任意大
"""
import logging
import math
import time
from dataclasses import dataclass
from enum import Enum

from config import EXAMPLE_A1_C, EXAMPLE_R1_EPSILON
from core_pipeline import FrameToolkitError, TruncationPolicy
from frames import (
    approx_duality_defect, c1_bound, difference_bessel_bound, example_a1, example_r1,
    frame_bounds, PerturbationData, self_scaling_bound, t1_bound,
)
from gabor import (
    GaborSystem, duality_residuals, gabor_frame_bounds, iterated_window, painless_frame_bounds,
    perturbation_R, walnut_defect_bound,
)
from verify import finite_model_check
from windows import bspline, ck_dual_window, dilate, gaussian, painless_canonical_dual, scale

logger = logging.getLogger(__name__)

# 示例窗口与验收目标的常数
E1_B = 0.06
E1_GAUSSIAN_AMPLITUDE = 151 / 315
E1_GAUSSIAN_WIDTH = 1.18
E2_B = 0.1
E2_DILATION = 2.36
E2_WALNUT_REFERENCE = 0.009
EXACT_RESIDUAL_TOL = 1e-10


class ReproduceCase(Enum):
    E1 = "e1"
    E2 = "e2"
    R1 = "r1"
    A1 = "a1"


@dataclass(frozen=True)
class TargetCheck:
    """一个验收目标：value ∈ [low, high]"""
    name: str
    value: float
    low: float
    high: float

    @property
    def passed(self):
        return self.low <= self.value <= self.high

    def to_dict(self):
        # 无界的一侧写成 null
        return {"name": self.name, "value": float(self.value),
                "low": None if math.isinf(self.low) else float(self.low),
                "high": None if math.isinf(self.high) else float(self.high),
                "passed": self.passed}


def example_e1_windows():
    """(φ, h, g)：φ = (151/315)e^{−(x/1.18)²}，h = B_8，g = ck_dual_window(8, 0.06)"""
    return (gaussian(E1_GAUSSIAN_AMPLITUDE, E1_GAUSSIAN_WIDTH), bspline(8), ck_dual_window(8, E1_B))


def example_e2_windows(policy=None):
    """(φ, h, g)：φ = e^{−4x²}，h = (315/151)·B_8(2.36x)，g 为 h 的无痛典范对偶"""
    h = scale(dilate(bspline(8), E2_DILATION), 315 / 151)
    return gaussian(1.0, 0.5), h, painless_canonical_dual(h, 1.0, E2_B, policy)


class ExampleRunner:
    """运行一个示例并对照目标值"""

    def __init__(self, policy=None, epsilon=EXAMPLE_R1_EPSILON, C=EXAMPLE_A1_C):
        self.policy = policy or TruncationPolicy()
        self.epsilon = epsilon
        self.C = C
        self.targets = []

    def _target(self, name, value, low=-math.inf, high=math.inf):
        check = TargetCheck(name, value, low, high)
        self.targets.append(check)
        status = "通过" if check.passed else "未达标"
        logger.info(f"[Reproduce] {name} = {value:.6g} ∈ [{low:.6g}, {high:.6g}]: {status}")
        return check

    def run(self, case):
        """返回 (report, passed)"""
        case = ReproduceCase(case)
        self.targets = []
        start = time.perf_counter()
        handler = {
            ReproduceCase.E1: self._run_e1,
            ReproduceCase.E2: self._run_e2,
            ReproduceCase.R1: self._run_r1,
            ReproduceCase.A1: self._run_a1,
        }[case]
        try:
            results = handler()
            error = None
        except FrameToolkitError as e:
            logger.error(f"[Reproduce] {case.value} 失败: {e}")
            results, error = {}, f"{type(e).__name__}: {e}"
        passed = error is None and all(t.passed for t in self.targets)
        logger.info(f"[Reproduce] {case.value} 用时 {time.perf_counter() - start:.1f}s")
        report = {
            "case": case.value,
            "results": results,
            "targets": [t.to_dict() for t in self.targets],
            "passed": passed,
        }
        if error is not None:
            report["error"] = error
        return report, passed

    def _run_e1(self):
        phi, h, g = example_e1_windows()
        a, b = 1.0, E1_B
        exact = duality_residuals(GaborSystem(h, a, b), GaborSystem(g, a, b), self.policy)
        exact_max = max([exact.r0] + list(exact.rn.values()))
        self._target("exact_residual_max", exact_max, high=EXACT_RESIDUAL_TOL)

        R = perturbation_R(phi, h, a, b, self.policy)
        self._target("perturbation_R", R, 4e-4, 8e-4)
        C = gabor_frame_bounds(GaborSystem(g, a, b), self.policy).upper
        self._target("dual_bessel_bound", C, high=1.05)
        t1 = t1_bound(PerturbationData(R, C))
        self._target("t1_bound", t1.value, high=0.0283)

        walnut = walnut_defect_bound(GaborSystem(phi, a, b), GaborSystem(g, a, b), self.policy)
        self._target("walnut_bound", walnut.value, 0.0020, 0.0031)

        frame = gabor_frame_bounds(GaborSystem(phi, a, b), self.policy)
        _, self_scaled = self_scaling_bound(frame)
        return {
            "exact_residuals": exact.to_dict(),
            "perturbation_R": R,
            "dual_bessel_bound": C,
            "t1_bound": t1.to_dict(),
            "walnut_bound": walnut.to_dict(),
            "frame_bounds": frame.to_dict(),
            "self_scaling_bound": self_scaled,
        }

    def _run_e2(self):
        phi, h, g = example_e2_windows(self.policy)
        a, b = 1.0, E2_B
        analysis, synthesis = GaborSystem(phi, a, b), GaborSystem(g, a, b)

        frame = gabor_frame_bounds(analysis, self.policy)
        self._target("frame_lower", frame.lower, 2.3, 2.9)
        self._target("frame_upper", frame.upper, 9.1, 11.1)
        _, self_scaled = self_scaling_bound(frame)
        self._target("self_scaling_bound", self_scaled, 0.57, 0.61)

        R = perturbation_R(phi, h, a, b, self.policy)
        self._target("perturbation_R", R, high=1e-3)
        self._target("R_over_A", R / frame.lower, high=0.25 * (1 - 1e-12))
        c1 = c1_bound(frame.lower, R, frame.upper)
        self._target("c1_bound", c1.value, 0.013, 0.019)

        exact = duality_residuals(GaborSystem(h, a, b), synthesis, self.policy)
        exact_max = max([exact.r0] + list(exact.rn.values()))
        self._target("painless_residual_max", exact_max, high=EXACT_RESIDUAL_TOL)

        walnut = walnut_defect_bound(analysis, synthesis, self.policy)
        self._target("walnut_bound", walnut.value, 0.007, 0.011)
        iterated = iterated_window(analysis, synthesis, self.policy)
        self._target("iterated_squared_bound", iterated.squared_bound,
                     walnut.value ** 2 * (1 - 1e-12), walnut.value ** 2 * (1 + 1e-12))

        return {
            "frame_bounds": frame.to_dict(),
            "self_scaling_bound": self_scaled,
            "perturbation_R": R,
            "c1_bound": c1.to_dict(),
            "painless_residuals": exact.to_dict(),
            "painless_frame_bounds": painless_frame_bounds(h, a, b, self.policy).to_dict(),
            "walnut_bound": walnut.to_dict(),
            "iterated": {
                "squared_bound": iterated.squared_bound,
                "reference_squared_bound": E2_WALNUT_REFERENCE ** 2,
                "terms": len(iterated.window.terms),
                "cutoff": {"m": iterated.cutoff_m, "n": iterated.cutoff_n},
            },
        }

    def _run_r1(self):
        F, H, G = example_r1(self.epsilon)
        report = finite_model_check(F, G, H)
        for name in ("F dual H", "H dual G", "non_transitive"):
            self._target(name, float(report.get(name).passed), 1.0, 1.0)
        self._target("F pseudo-dual G", float(report.get("F pseudo-dual G").passed), 0.0, 0.0)
        R = difference_bessel_bound(F, H)
        C = frame_bounds(G).upper
        self._target("R_over_epsilon_squared", R / self.epsilon ** 2, 1 - 1e-12, 1 + 1e-12)
        self._target("CR", C * R, 1 - 1e-12, 1 + 1e-12)
        return {"epsilon": self.epsilon, "R": R, "C": C, "model_check": report.to_dict()}

    def _run_a1(self):
        F, G = example_a1(self.C)
        bounds_F, bounds_G = frame_bounds(F), frame_bounds(G)
        expected = self.C ** 2 + 1
        defect = approx_duality_defect(F, G)
        self._target("dual_upper_bound", bounds_G.upper, expected * (1 - 1e-12), expected * (1 + 1e-12))
        self._target("duality_defect", defect, high=1e-10)
        self._target("frame_lower", bounds_F.lower, 1 - 1e-12, 1 + 1e-12)
        self._target("frame_upper", bounds_F.upper, 1 - 1e-12, 1 + 1e-12)
        return {"C": self.C, "frame_bounds": bounds_F.to_dict(), "dual_frame_bounds": bounds_G.to_dict(),
                "duality_defect": defect, "model_check": finite_model_check(F, G).to_dict()}
