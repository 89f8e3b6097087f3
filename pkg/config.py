import json
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Optional

# 调试设置
DEBUG = False  # 设置为True时开启DEBUG级别日志（逐级网格、逐个n的残差）

# 报告格式
SCHEMA_VERSION = "1"

# 网格扫描设置
DEFAULT_GRID_POINTS = 4096      # 一个周期 [0, a) 上的初始网格点数
DEFAULT_MAX_REFINEMENTS = 3     # 网格加倍的最大次数
REFINEMENT_REL_TOL = 1e-4       # 两次加倍之间相对变化小于该值即视为收敛

# 截断设置
DEFAULT_K_TAIL_TOL = 1e-14      # k-求和：包络乘积 < 该值·b 的项被丢弃
DEFAULT_N_TAIL_TOL = 1e-10      # n-求和：r_n 的上界 < 该值·b 时不再扫描
DEFAULT_QUADRATURE_ABS_TOL = 1e-9
DEFAULT_LATTICE_CUTOFF_M = 96   # 展开式/迭代窗口中 |m| 的上限
DEFAULT_LATTICE_CUTOFF_N = 32   # 展开式/迭代窗口中 |n| 的上限

# 有限维框架设置
BIJECTIVITY_TOL = 1e-10         # σ_min > tol·σ_max 视为双射
AUDIT_TOL = 1e-10               # 范数自检容差

# 验证设置
TEST_FUNCTION_SEED = 0x5EED
TEST_FUNCTION_COUNT = 10
RANDOM_PAIR_COUNT = 200

# 有限维示例默认参数
EXAMPLE_R1_EPSILON = 0.01
EXAMPLE_A1_C = 100.0

# 运行配置中允许出现的策略字段
POLICY_KEYS = (
    "grid_points", "max_refinements", "k_tail_tol", "n_tail_tol",
    "quadrature_abs_tol", "lattice_cutoff_M", "lattice_cutoff_N",
)


class ConfigError(ValueError):
    """运行配置错误（CLI退出码2）"""


@dataclass
class RunConfig:
    """一次CLI运行的全部参数，来自JSON配置文件与命令行参数"""
    policy_overrides: Dict[str, Any] = field(default_factory=dict)
    out: Optional[str] = None
    threads: int = 1
    epsilon: float = EXAMPLE_R1_EPSILON
    C: float = EXAMPLE_A1_C
    seed: int = TEST_FUNCTION_SEED
    test_functions: int = TEST_FUNCTION_COUNT
    pairs: int = RANDOM_PAIR_COUNT

    def validate(self):
        """检查所有容差与计数为正"""
        for key, value in self.policy_overrides.items():
            if key not in POLICY_KEYS:
                raise ConfigError(f"未知的策略字段: {key}")
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"策略字段 {key} 必须为正数，收到 {value!r}")
        for name in ("threads", "test_functions", "pairs"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigError(f"{name} 必须为正整数，收到 {value!r}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon 必须为正，收到 {self.epsilon!r}")
        return self


def load_run_config(path):
    """从JSON键值文件读取运行配置

    文件是一个JSON对象；策略字段写在顶层或 "policy" 子对象中均可，
    其余键必须是 RunConfig 的字段名。未知键直接拒绝。
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"找不到配置文件 {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件 {path} 不是合法的JSON: {e}") from e

    if not isinstance(raw, dict):
        raise ConfigError(f"配置文件 {path} 顶层必须是JSON对象")

    known = {f.name for f in fields(RunConfig)} - {"policy_overrides"}
    overrides = dict(raw.pop("policy", {}) or {})
    kwargs = {}
    for key, value in raw.items():
        if key in POLICY_KEYS:
            overrides[key] = value
        elif key in known:
            kwargs[key] = value
        else:
            raise ConfigError(f"配置文件 {os.path.basename(path)} 含未知键: {key}")
    return RunConfig(policy_overrides=overrides, **kwargs).validate()
