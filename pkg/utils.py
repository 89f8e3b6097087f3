import csv
import io
import json
import logging
import sys

import numpy as np

logger = logging.getLogger(__name__)


def encode_complex(z):
    """复数编码为 [re, im]"""
    z = complex(z)
    return [float(z.real), float(z.imag)]


def decode_complex(pair):
    """[re, im] 或实数 → complex"""
    if isinstance(pair, (int, float)) and not isinstance(pair, bool):
        return complex(pair)
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ValueError(f"复数必须编码为 [re, im]，收到 {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def _to_builtin(obj):
    """json.dumps 的 default 钩子：把 numpy 标量/数组转换为内置类型"""
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return encode_complex(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"无法序列化类型 {type(obj).__name__}")


def dumps_report(report):
    """确定性JSON：键排序、固定缩进，相同输入逐字节相同"""
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, default=_to_builtin) + "\n"


def format_csv(rows, header=("x", "value")):
    """把 (x, value) 行格式化为CSV文本，浮点数用 repr 保留全部精度"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buffer.getvalue()


def write_output(text, out=None):
    """写到 out 指定的文件；未指定时写到标准输出"""
    if out:
        with open(out, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        logger.info(f"[Output] 已写入 {out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def make_rng(seed):
    """所有随机性的唯一入口"""
    return np.random.default_rng(seed)
