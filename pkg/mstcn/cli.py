"""
Command-line entry point, `mstcn <command>`.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
import numpy as np
from collections import OrderedDict
from .core.checkpoint import read_checkpoint
from .core.crossval import run_cv, run_ablation, LeakageError
from .core.model import ModelConfig, ConfigError, build, canonical_modalities
from .core.tensor import DimensionError, FormatError, NumericalError, \
    blob_save
from .core.train import TrainPlan, train, predict, evaluate
from .data.dataset import load_dataset, read_header
from .data.preprocess import DataError, IMU_LENGTH, MFCC_LENGTH
from .data.synth import SynthSpec, synth_generate, LAYOUTS
from .metrics.report import format_table, format_summary, write_report
from .modules.gradcheck import layer_suite, model_suite
from .optimizers.adam import Adam

__all__ = ['RunConfig', 'main', 'EXIT_OK', 'EXIT_CONFIG', 'EXIT_DATA',
           'EXIT_NUMERICAL']


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class RunConfig:
    """
    One flat JSON document: `ModelConfig` fields, `TrainPlan` fields and the
    run keys of `RUN_FIELDS`. Unknown keys are rejected.

    `ps_width` and `label_count`, if absent, are taken from the dataset
    header when the model config is resolved.
    """
    RUN_FIELDS = OrderedDict([
        ('dataset', None),
        ('output', None),
        ('folds', 5),
        ('threshold', 0.5),
        ('workers', None),
        ('subsets', None),
        ('validation', False),
    ])

    def __init__(self, d):
        if not isinstance(d, dict):
            raise ConfigError('the run config should be a JSON object.')
        known = (set(ModelConfig.FIELDS) | set(TrainPlan.FIELDS) |
                 set(self.RUN_FIELDS))
        unknown = sorted(k for k in d if k not in known)
        if unknown:
            raise ConfigError('unknown config key(s) {}.'.format(unknown))
        self._model = OrderedDict((k, v) for k, v in d.items() if k in
                                  ModelConfig.FIELDS)
        self.plan = TrainPlan(**{k: v for k, v in d.items() if k in
                                 TrainPlan.FIELDS})
        run = OrderedDict(self.RUN_FIELDS)
        run.update((k, v) for k, v in d.items() if k in self.RUN_FIELDS)
        for key in ('dataset', 'output'):
            if run[key] is not None and not isinstance(run[key], str):
                raise ConfigError('{} should be a path, instead of '
                                  '{}.'.format(key, run[key]))
        try:
            self.folds = int(run['folds'])
            assert self.folds >= 2 and self.folds == run['folds']
        except (TypeError, ValueError, AssertionError):
            raise ConfigError('folds should be an int >= 2, instead of '
                              '{}.'.format(run['folds']))
        try:
            self.threshold = float(run['threshold'])
            assert 0. < self.threshold < 1.
        except (TypeError, ValueError, AssertionError):
            raise ConfigError('threshold should be in (0, 1), instead of '
                              '{}.'.format(run['threshold']))
        workers = run['workers']
        if workers is not None:
            try:
                workers = int(workers)
                assert workers >= 1
            except (TypeError, ValueError, AssertionError):
                raise ConfigError('workers should be a positive int or null, '
                                  'instead of {}.'.format(run['workers']))
        self.workers = workers
        self.dataset = run['dataset']
        self.output = run['output']
        self.subsets = run['subsets']
        self.validation = bool(run['validation'])
        # fail early on everything that does not depend on the dataset
        self.model_config(ps_width=1, label_count=1)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as f:
                d = json.load(f)
        except FileNotFoundError:
            raise ConfigError('config file {} does not exist.'.format(path))
        except ValueError as e:
            raise ConfigError('config file {} is not valid JSON: {}'.format(
                path, e))
        return cls(d)

    def model_config(self, ps_width=None, label_count=None):
        d = OrderedDict(self._model)
        if 'ps_width' not in d and ps_width is not None:
            d['ps_width'] = ps_width
        if 'label_count' not in d and label_count is not None:
            d['label_count'] = label_count
        return ModelConfig(**d)

    def require(self, *keys):
        missing = [k for k in keys if getattr(self, k) is None]
        if missing:
            raise ConfigError('the config needs the key(s) {}.'.format(
                missing))

    def load(self):
        """Resolve the model config against the dataset and load it."""
        n_labels, ps_width, _ = read_header(self.dataset)
        config = self.model_config(ps_width, n_labels)
        return config, load_dataset(self.dataset, config.imu_length,
                                    config.aud_length)


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, '{}: error: {}\n'.format(self.prog, message))


def _load_for_checkpoint(path, model):
    c = model.config
    return load_dataset(path, c.imu_length, c.aud_length)


def _cmd_synth(args):
    spec = SynthSpec(n_users=args.users, n_instances=args.instances,
                     n_labels=args.labels, missing_rate=args.missing_rate,
                     positive_rate=args.positive_rate, seed=args.seed,
                     noise=args.noise, amplitude=args.amplitude,
                     ps_width=args.ps_width, layout=args.layout,
                     vary_lengths=args.vary_lengths,
                     imu_length=args.imu_length, mfcc_length=args.mfcc_length)
    report = synth_generate(spec, args.out)
    print('label\tpositive_rate')
    for name, rate in report.positive_rates.items():
        print('{}\t{}'.format(name, 'NA' if np.isnan(rate) else
                              '{:.4f}'.format(rate)))
    return EXIT_OK


def _cmd_train(args):
    run = RunConfig.from_file(args.config)
    run.require('dataset', 'output')
    state = None
    if args.resume is not None:
        state = read_checkpoint(args.resume)
    config, dataset = run.load()
    optimizer = None
    start_step = 0
    if state is not None:
        if state.model.config != config:
            raise ConfigError('the checkpoint in {} was trained with a '
                              'different model config.'.format(args.resume))
        model = state.model
        start_step = state.step
        if state.optimizer is not None:
            optimizer = Adam()
            optimizer.load_state_dict(state.optimizer)
    else:
        model = build(config, run.plan.seed)
    os.makedirs(run.output, exist_ok=True)
    result = train(model, dataset, run.plan, log=os.path.join(
        run.output, 'train.log'), checkpoint_dir=os.path.join(
            run.output, 'checkpoint'), optimizer=optimizer,
        start_step=start_step)
    last = result.trace.last
    if last is not None:
        print('step {}: loss {:.6f}'.format(last.step, last.loss))
    return EXIT_OK


def _cmd_eval(args):
    model = read_checkpoint(args.checkpoint).model
    dataset = _load_for_checkpoint(args.data, model)
    report = evaluate(model, dataset, threshold=args.threshold)
    sys.stdout.write(format_table(report))
    sys.stdout.write(format_summary(report, threshold=args.threshold))
    if args.output is not None:
        write_report(report, args.output, 'eval', threshold=args.threshold)
    return EXIT_OK


def _cmd_cv(args):
    run = RunConfig.from_file(args.config)
    run.require('dataset')
    config, dataset = run.load()
    result = run_cv(dataset, config, run.plan, run.folds,
                    threshold=run.threshold, client=run.workers,
                    subsets=run.subsets, validation=run.validation,
                    output=run.output)
    for i, report in enumerate(result.fold_reports):
        m = report.macro
        print('fold {}: ba {:.3f}, sensitivity {:.3f}, specificity '
              '{:.3f}'.format(i, m['ba'], m['sensitivity'],
                              m['specificity']))
    sys.stdout.write(format_summary(result.summary))
    return EXIT_OK


def _cmd_ablate(args):
    run = RunConfig.from_file(args.config)
    run.require('dataset')
    try:
        with open(args.grid) as f:
            grid = json.load(f)
    except FileNotFoundError:
        raise ConfigError('grid file {} does not exist.'.format(args.grid))
    except ValueError as e:
        raise ConfigError('grid file {} is not valid JSON: {}'.format(
            args.grid, e))
    config, dataset = run.load()
    result = run_ablation(grid, dataset, config, run.plan, run.folds,
                          threshold=run.threshold, client=run.workers,
                          output=run.output)
    sys.stdout.write(result.table)
    return EXIT_OK


def _cmd_predict(args):
    model = read_checkpoint(args.checkpoint).model
    subset = canonical_modalities(args.modalities)
    dataset = _load_for_checkpoint(args.input, model)
    prob = predict(model, dataset, subset=subset)
    out = sys.stdout if args.output is None else open(args.output, 'w')
    try:
        for iid, p in zip(dataset.ids, prob):
            out.write(json.dumps(OrderedDict([
                ('id', str(iid)), ('probabilities', [float(v) for v in p])]))
                + '\n')
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _cmd_gradcheck(args):
    reports = layer_suite(args.seed, tol=args.tol, n_coord=args.coords)
    reports.update(model_suite(args.seed, tol=args.tol, n_coord=args.coords))
    print('case\tmax_rel_err\tn_checked\tn_skipped\tpassed')
    for name, r in reports.items():
        print('{}\t{:.3e}\t{}\t{}\t{}'.format(
            name, max(r.max_rel_err.values()), r.n_checked, r.n_skipped,
            'yes' if r.passed else 'no'))
    failed = [name for name, r in reports.items() if not r.passed]
    if failed:
        logger.error('gradient check failed for %s', failed)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_dump(args):
    model = read_checkpoint(args.checkpoint).model
    valid = model.capture_names
    if args.layer not in valid:
        raise ConfigError('unknown layer "{}"; valid names are {}.'.format(
            args.layer, valid))
    dataset = _load_for_checkpoint(args.data, model)
    output = args.output or 'dump_' + args.layer
    os.makedirs(output, exist_ok=True)
    modalities = model.config.modalities
    for start in range(0, len(dataset), 100):
        rows = np.arange(start, min(start + 100, len(dataset)))
        model.forward(dataset.take(rows, modalities), 'infer', capture=True)
        acts = model.activations[args.layer]
        for j, row in enumerate(rows):
            blob_save(os.path.join(output, '{}.blob'.format(
                dataset.ids[row])), np.ascontiguousarray(acts[j]))
    print('wrote {} activation(s) of {} to {}'.format(len(dataset),
                                                     args.layer, output))
    return EXIT_OK


def build_parser():
    parser = _Parser(prog='mstcn', description='Multi-stream temporal '
                     'convolutional networks for multi-label activity '
                     'recognition.')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true')
    verbosity.add_argument('--quiet', '-q', action='store_true')
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)
    sub.required = True

    p = sub.add_parser('synth', help='write a synthetic dataset')
    p.add_argument('--out', required=True)
    p.add_argument('--users', type=int, default=10)
    p.add_argument('--instances', type=int, default=500)
    p.add_argument('--labels', type=int, default=8)
    p.add_argument('--missing-rate', type=float, default=0.1)
    p.add_argument('--positive-rate', type=float, default=0.2)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--noise', type=float, default=0.5)
    p.add_argument('--amplitude', type=float, default=1.0)
    p.add_argument('--ps-width', type=int, default=None)
    p.add_argument('--layout', choices=LAYOUTS, default='redundant')
    p.add_argument('--vary-lengths', action='store_true')
    p.add_argument('--imu-length', type=int, default=IMU_LENGTH)
    p.add_argument('--mfcc-length', type=int, default=MFCC_LENGTH)
    p.set_defaults(fun=_cmd_synth)

    p = sub.add_parser('train', help='train one model')
    p.add_argument('--config', required=True)
    p.add_argument('--resume', default=None)
    p.set_defaults(fun=_cmd_train)

    p = sub.add_parser('eval', help='evaluate a checkpoint')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--threshold', type=float, default=0.5)
    p.add_argument('--output', default=None)
    p.set_defaults(fun=_cmd_eval)

    p = sub.add_parser('cv', help='user-grouped cross-validation')
    p.add_argument('--config', required=True)
    p.set_defaults(fun=_cmd_cv)

    p = sub.add_parser('ablate', help='cross-validate every grid cell')
    p.add_argument('--config', required=True)
    p.add_argument('--grid', required=True)
    p.set_defaults(fun=_cmd_ablate)

    p = sub.add_parser('predict', help='label probabilities per instance')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--input', required=True)
    p.add_argument('--modalities', required=True)
    p.add_argument('--output', default=None)
    p.set_defaults(fun=_cmd_predict)

    p = sub.add_parser('gradcheck', help='finite-difference gradient suites')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--tol', type=float, default=1e-4)
    p.add_argument('--coords', type=int, default=200)
    p.set_defaults(fun=_cmd_gradcheck)

    p = sub.add_parser('dump', help='write block activations as blobs')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--layer', required=True)
    p.add_argument('--output', default=None,
                   help='directory for the blobs, dump_<layer> by default')
    p.set_defaults(fun=_cmd_dump)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    if args.verbose:
        level = logging.INFO
    elif args.quiet:
        level = logging.ERROR
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: '
                        '%(message)s')
    try:
        return args.fun(args)
    except NumericalError as e:
        logger.error('numerical failure: %s', e)
        return EXIT_NUMERICAL
    except (DataError, FormatError, DimensionError, LeakageError,
            FileNotFoundError) as e:
        logger.error('data error: %s', e)
        return EXIT_DATA
    except ValueError as e:
        logger.error('config error: %s', e)
        return EXIT_CONFIG
