import argparse
import json
import logging
import sys

import config
from config import ConfigError, RunConfig, SCHEMA_VERSION, load_run_config
from core_pipeline import FrameToolkitError, TruncationPolicy, WindowSpecError
from gabor import (
    GaborSystem, WalnutOrdering, duality_residuals, gabor_frame_bounds, iterated_window, walnut_defect_bound,
)
from reproduce import ExampleRunner, ReproduceCase
from utils import dumps_report, format_csv, write_output
from verify import default_test_set, random_model_checks, verification_report
from windows import sample_window, window_from_spec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def setup_logging(verbose=False):
    """日志写到stderr，保证stdout上的JSON逐字节可复现"""
    level = logging.DEBUG if verbose or config.DEBUG else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def parse_window(text):
    """窗口描述：JSON字符串，或以 @ 开头的JSON文件路径"""
    try:
        if text.startswith("@"):
            with open(text[1:], 'r', encoding='utf-8') as f:
                spec = json.load(f)
        else:
            spec = json.loads(text)
    except (OSError, json.JSONDecodeError) as e:
        raise WindowSpecError(f"无法读取窗口描述 {text!r}: {e}") from e
    return window_from_spec(spec)


def build_run_config(args):
    """配置文件的值被命令行参数覆盖"""
    run = load_run_config(args.config) if args.config else RunConfig()
    for name in ("out", "threads", "epsilon", "C", "seed", "test_functions", "pairs"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(run, name, value)
    return run.validate()


def envelope(command, policy, result):
    return {"schema": SCHEMA_VERSION, "command": command, "policy": policy.to_dict(), "result": result}


def _systems(args):
    return (GaborSystem(parse_window(args.analysis), args.a, args.b),
            GaborSystem(parse_window(args.synthesis), args.a, args.b))


def run_reproduce(args, run, policy):
    runner = ExampleRunner(policy, epsilon=run.epsilon, C=run.C)
    report, passed = runner.run(args.case)
    write_output(dumps_report(envelope("reproduce", policy, report)), run.out)
    return EXIT_OK if passed else EXIT_FAILED


def run_bounds(args, run, policy):
    system = GaborSystem(parse_window(args.window), args.a, args.b)
    bounds = gabor_frame_bounds(system, policy)
    result = dict(bounds.to_dict(), system=system.describe())
    write_output(dumps_report(envelope("bounds", policy, result)), run.out)
    return EXIT_OK


def run_walnut(args, run, policy):
    analysis, synthesis = _systems(args)
    report = walnut_defect_bound(analysis, synthesis, policy, WalnutOrdering(args.ordering))
    write_output(dumps_report(envelope("walnut", policy, report.to_dict())), run.out)
    return EXIT_OK


def run_residuals(args, run, policy):
    analysis, synthesis = _systems(args)
    profile = duality_residuals(analysis, synthesis, policy, WalnutOrdering(args.ordering))
    write_output(dumps_report(envelope("residuals", policy, profile.to_dict())), run.out)
    return EXIT_OK


def run_iterate(args, run, policy):
    analysis, synthesis = _systems(args)
    result = iterated_window(analysis, synthesis, policy)
    write_output(dumps_report(envelope("iterate", policy, result.to_dict())), run.out)
    return EXIT_OK


def run_sample_window(args, run, policy):
    rows = sample_window(parse_window(args.window), args.start, args.stop, args.step)
    write_output(format_csv(rows), run.out)
    return EXIT_OK


def run_check(args, run, policy):
    summary = random_model_checks(run.pairs, run.seed)
    write_output(dumps_report(envelope("check", policy, summary)), run.out)
    return EXIT_OK if summary["passed"] else EXIT_FAILED


def run_verify(args, run, policy):
    analysis, synthesis = _systems(args)
    tests = default_test_set(run.seed, run.test_functions)
    report = verification_report(analysis, synthesis, tests, policy, args.points)
    write_output(dumps_report(envelope("verify", policy, report)), run.out)
    return EXIT_OK if report["sandwich_holds"] else EXIT_FAILED


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON运行配置文件')
    common.add_argument('--out', help='输出文件（默认写到标准输出）')
    common.add_argument('--threads', type=int, help='网格扫描使用的线程数')
    common.add_argument('--verbose', action='store_true', help='输出DEBUG日志')

    lattice = argparse.ArgumentParser(add_help=False)
    lattice.add_argument('--a', type=float, default=1.0, help='平移参数 a')
    lattice.add_argument('--b', type=float, required=True, help='调制参数 b')

    pair = argparse.ArgumentParser(add_help=False, parents=[lattice])
    pair.add_argument('--analysis', required=True, help='分析窗描述（JSON或@文件）')
    pair.add_argument('--synthesis', required=True, help='合成窗描述（JSON或@文件）')

    ordering = argparse.ArgumentParser(add_help=False)
    ordering.add_argument('--ordering', choices=[o.value for o in WalnutOrdering],
                          default=WalnutOrdering.ANALYSIS_SHIFT.value, help='n/b 平移放在哪个窗口上')

    parser = argparse.ArgumentParser(description="近似对偶框架计算工具")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('reproduce', parents=[common], help='复现示例并对照目标值')
    p.add_argument('case', choices=[c.value for c in ReproduceCase])
    p.add_argument('--epsilon', type=float, help='r1 示例的 ε')
    p.add_argument('--C', type=float, help='a1 示例的 C')
    p.set_defaults(handler=run_reproduce)

    p = sub.add_parser('bounds', parents=[common, lattice], help='Gabor系统的可容许框架界')
    p.add_argument('--window', required=True, help='窗口描述（JSON或@文件）')
    p.set_defaults(handler=run_bounds)

    for name, handler, text in (('walnut', run_walnut, 'Walnut缺陷界'),
                                ('residuals', run_residuals, '对偶条件残差')):
        p = sub.add_parser(name, parents=[common, pair, ordering], help=text)
        p.set_defaults(handler=handler)

    p = sub.add_parser('iterate', parents=[common, pair], help='一步迭代窗口 γ')
    p.set_defaults(handler=run_iterate)

    p = sub.add_parser('sample-window', parents=[common], help='等距采样窗口，输出CSV')
    p.add_argument('--window', required=True, help='窗口描述（JSON或@文件）')
    p.add_argument('--start', type=float, required=True)
    p.add_argument('--stop', type=float, required=True)
    p.add_argument('--step', type=float, required=True)
    p.set_defaults(handler=run_sample_window)

    p = sub.add_parser('check', parents=[common], help='随机有限维框架对的不变量检查')
    p.add_argument('--pairs', type=int, help='随机对的个数')
    p.add_argument('--seed', type=int, help='随机种子')
    p.set_defaults(handler=run_check)

    p = sub.add_parser('verify', parents=[common, pair], help='经验缺陷与双神谕验证报告')
    p.add_argument('--seed', type=int, help='测试函数的随机种子')
    p.add_argument('--test-functions', dest='test_functions', type=int, help='测试函数个数')
    p.add_argument('--points', type=int, default=4, help='每个测试函数的比较点数')
    p.set_defaults(handler=run_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    try:
        run = build_run_config(args)
        policy = TruncationPolicy().with_overrides(run.policy_overrides, threads=run.threads)
        return args.handler(args, run, policy)
    except (ConfigError, WindowSpecError) as e:
        logger.error(f"[App] {e}")
        return EXIT_USAGE
    except FrameToolkitError as e:
        logger.error(f"[App] {type(e).__name__}: {e}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
