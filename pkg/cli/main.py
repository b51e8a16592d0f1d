#!/usr/bin/env python3
"""
septoskill CLI

Main command-line entry point.

Usage:
    python -m cli.main <command> [options]

Commands:
    calibrate - pivot-calibrate both tips, write offsets into meta.json
    register  - register the septal plane, write it into meta.json
    features  - strokes and SCC/SDC/CR for trial bundles
    classify  - TO/UO cross-validation of the SVM and HMM classifiers
    simulate  - write synthetic trial bundles with ground truth
    report    - search-graph and cumulative-area figures

Exit codes: 0 success, 2 input/schema error, 3 empty result, 4 numeric failure
(simulate --evaluate also exits 4 when a trial misses its truth tolerance).
"""

import sys
import os
import argparse
import logging

# Resolve the repository root so `septoskill` imports without installation
_BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _BASE_DIR)

from septoskill import tracing
from septoskill.utils import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, SeptoskillError, setup_console_encoding


def _config(args):
    from septoskill.config import load_config

    overrides = {
        'head.mode': getattr(args, 'head_mode', None),
        'run.workers': getattr(args, 'workers', None),
    }
    if args.seed is not None:
        overrides['run.seed'] = args.seed
        overrides['hmm.seed'] = args.seed
    return load_config(args.config, overrides)


def cmd_calibrate(args):
    """Pivot-calibrate every bundle."""
    from septoskill.facade import calibrate_bundle

    for path in args.bundles:
        result = calibrate_bundle(path, args.trace_id)
        print(f"{result['trial_id']}:")
        for tip, cal in result['calibrations'].items():
            offset = ', '.join(f"{v:.3f}" for v in cal['offset'])
            print(f"  {tip}: offset ({offset}) mm, residual rms {cal['residual_rms']:.4f} mm")
    return 0


def cmd_register(args):
    """Register the septal plane of every bundle."""
    from septoskill.facade import register_bundle

    config = _config(args)
    for path in args.bundles:
        result = register_bundle(path, config, trace_id=args.trace_id)
        reg = result['registration']
        normal = ', '.join(f"{v:.4f}" for v in reg['plane']['normal'])
        center = ', '.join(f"{v:.2f}" for v in reg['nose_center'])
        print(f"{result['trial_id']}: head mode {reg['head_mode']}")
        print(f"  normal ({normal})")
        print(f"  nose center ({center}) mm")
    return 0


def cmd_features(args):
    """Compute features.csv, strokes.csv and subtrial_features.csv."""
    from septoskill.facade import run_features

    config = _config(args)
    summary = run_features(args.bundles, args.output, config, compare_head=args.compare_head,
                           trace_id=args.trace_id)

    print(f"Trials: {summary['trials']}")
    print(f"Rows: {summary['rows']}")
    print(f"Strokes: {summary['strokes']}")
    print(f"Excluded sub-trials: {summary['excluded_subtrials']}")
    if summary['skipped_trials']:
        print(f"Skipped trials (every sub-trial excluded): {', '.join(summary['skipped_trials'])}")
    for name, path in sorted(summary['outputs'].items()):
        print(f"  {name}: {path}")
    return 0


def cmd_classify(args):
    """Cross-validate classifiers and write report.json."""
    from septoskill.classify import CLASSIFIERS, SCHEMES
    from septoskill.facade import run_classify, summarize_tables

    config = _config(args)
    schemes = SCHEMES if args.scheme == 'all' else (args.scheme,)
    classifiers = CLASSIFIERS if args.classifier == 'all' else (args.classifier,)
    report = run_classify(args.features, args.output, args.strokes, config,
                          schemes, classifiers, args.trace_id)

    print(f"Rows: {report['dataset']['rows']} "
          f"(expert {report['dataset']['class_counts']['expert']}, "
          f"novice {report['dataset']['class_counts']['novice']})")
    print()
    print(f"{'scheme':<7}{'classifier':<11}{'subset':<10}{'micro':>8}{'macro':>8}")
    for scheme, name, subset, micro, macro in summarize_tables(report):
        print(f"{scheme:<7}{name:<11}{subset:<10}{micro:>8.1f}{macro:>8.1f}")
    print()
    print(f"Report: {args.output}")
    return 0


def _trials_per_surgeon(text: str):
    parts = [p for p in text.split(',') if p.strip()]
    try:
        counts = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or comma list, got {text!r}")
    return counts[0] if len(counts) == 1 else counts


def cmd_simulate(args):
    """Write synthetic bundles."""
    from septoskill.facade import simulate
    from septoskill.synth import HeadMotion

    config = _config(args)
    motion = HeadMotion.parse(args.head_motion)
    summary = simulate(args.output, args.experts, args.novices, args.trials_per_surgeon,
                       args.profile_pair, config.run.seed, motion, config, args.evaluate,
                       args.trace_id)

    print(f"Trials: {summary['trials']} -> {args.output}")
    for sid, info in summary['surgeons'].items():
        print(f"  {sid}: {info['class']} ({info['role']})")
    if 'evaluation' in summary:
        ev = summary['evaluation']
        print()
        print(f"Evaluation: {ev['passed']}/{ev['total']} trials passed")
        print(f"  recall {ev['recall']:.3f}, precision {ev['precision']:.3f}")
        return EXIT_OK if ev['passed'] == ev['total'] else EXIT_NUMERIC
    return EXIT_OK


def cmd_report(args):
    """Search-graph and cumulative-area figures from strokes.csv."""
    from septoskill.facade import run_report

    result = run_report(args.strokes, args.output, args.trial, args.trace_id)
    print(f"Trial: {result['trial_id']} ({result['graphs']} search graph(s))")
    print(f"Cumulative-area curves: {result['curves']}")
    for name, path in sorted(result['outputs'].items()):
        print(f"  {name}: {path}")
    return 0


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-c', '--config', help='JSON config file (overrides flags and defaults)')
    common.add_argument('--seed', type=int, help='Seed for every random draw')
    common.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    common.add_argument('--trace-jsonl', metavar='PATH', help='Export the run trace as JSONL')
    return common


def _head_mode(parser):
    parser.add_argument('--head-mode', choices=['sensor', 'estimate', 'auto', 'none'],
                        help='Head-motion compensation (default from config: auto)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='septoskill',
        description='Skill assessment from Cottle elevator motion'
    )
    subparsers = parser.add_subparsers(dest='command', help='Commands')
    common = _common_options()

    # calibrate
    parser_cal = subparsers.add_parser('calibrate', parents=[common], help='Pivot-calibrate tips')
    parser_cal.add_argument('bundles', nargs='+', help='Trial bundle directories')
    parser_cal.set_defaults(func=cmd_calibrate)

    # register
    parser_reg = subparsers.add_parser('register', parents=[common], help='Register the septal plane')
    parser_reg.add_argument('bundles', nargs='+', help='Trial bundle directories')
    _head_mode(parser_reg)
    parser_reg.set_defaults(func=cmd_register)

    # features
    parser_feat = subparsers.add_parser('features', parents=[common], help='Compute stroke features')
    parser_feat.add_argument('bundles', nargs='+', help='Trial bundle directories')
    parser_feat.add_argument('-o', '--output', default='.', help='Output directory (default: cwd)')
    parser_feat.add_argument('-w', '--workers', type=int, help='Parallel trials')
    parser_feat.add_argument('--compare-head', action='store_true',
                             help='Also compare sensor vs estimator (head_comparison.json)')
    _head_mode(parser_feat)
    parser_feat.set_defaults(func=cmd_features)

    # classify
    parser_cls = subparsers.add_parser('classify', parents=[common], help='Cross-validate classifiers')
    parser_cls.add_argument('features', nargs='+', help='features.csv, or trial bundle directories')
    parser_cls.add_argument('-s', '--strokes', help='strokes.csv (needed by the HMM with features.csv)')
    parser_cls.add_argument('-o', '--output', default='report.json', help='Report path')
    parser_cls.add_argument('--scheme', choices=['TO', 'UO', 'all'], default='all')
    parser_cls.add_argument('--classifier', choices=['svm', 'hmm', 'all'], default='all')
    parser_cls.add_argument('-w', '--workers', type=int, help='Parallel folds')
    _head_mode(parser_cls)
    parser_cls.set_defaults(func=cmd_classify)

    # simulate
    parser_sim = subparsers.add_parser('simulate', parents=[common], help='Write synthetic bundles')
    parser_sim.add_argument('-o', '--output', required=True, help='Output directory')
    parser_sim.add_argument('--experts', type=int, default=4)
    parser_sim.add_argument('--novices', type=int, default=7)
    parser_sim.add_argument('--trials-per-surgeon', type=_trials_per_surgeon, default=4,
                            help='One count, or a comma list (experts first)')
    parser_sim.add_argument('--profile-pair', default='clinical', help='clinical | shared | separated')
    parser_sim.add_argument('--head-motion', default='none', help="'none' or 'sinusoid:AMP_DEG:FREQ_HZ'")
    parser_sim.add_argument('--evaluate', action='store_true', help='Score the pipeline against truth.json')
    parser_sim.set_defaults(func=cmd_simulate)

    # report
    parser_rep = subparsers.add_parser('report', parents=[common], help='Figures from strokes.csv')
    parser_rep.add_argument('strokes', help='strokes.csv')
    parser_rep.add_argument('-o', '--output', default='.', help='Output directory')
    parser_rep.add_argument('-t', '--trial', help='Trial for search_graph.svg (default: first)')
    parser_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    setup_console_encoding()
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')

    args.trace_id = tracing.start_trace(args.command, {'argv': list(argv or sys.argv[1:])})
    status = 'completed'
    try:
        code = args.func(args)
    except SeptoskillError as exc:
        status = 'error'
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        code = exc.exit_code
    except FileNotFoundError as exc:
        status = 'error'
        print(f"FileNotFoundError: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    finally:
        tracing.finish_trace(args.trace_id, status)
        if args.trace_jsonl:
            tracing.export_trace_jsonl(args.trace_jsonl, args.trace_id)
    return code


if __name__ == '__main__':
    sys.exit(main())
