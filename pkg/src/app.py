"""Command-line front end of the MEC scheduling toolkit.

    python src/app.py derive   --config config/baseline.env
    python src/app.py evaluate --policy greedy --alpha 0.3
    python src/app.py optimize --alpha 0.3 --grid 100 --out data/results/optimal.csv
    python src/app.py sweep    --alpha-start 0.02 --alpha-end 0.4 --alpha-step 0.02
    python src/app.py simulate --policy cloud --alpha 0.2 --slots 1000000 --seed 1

Exit codes: 0 success, 2 results produced but a model assumption is violated
(overflow or unstable load), 1 error.
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

import pandas as pd

from analytics.metrics import evaluate
from analytics.reporting import metrics_reporter
from chain.transitions import decision_kernel, dump_matrix, policy_kernel
from model.config_loader import config_loader
from model.parameters import SystemParams
from optimization.lp_solver import METHODS, write_mps
from optimization.synthesis import DEFAULT_GRID, P2Builder, search_optimal
from policy.policies import BASELINES, make_baseline
from policy.storage import policy_storage
from processing.sweep_pipeline import SWEEP_POLICIES, SweepPipeline, SweepSpec
from processing.validity import validity_checker
from simulation.simulator import SimConfig, run as simulate
from utils.exceptions import MecToolkitError
from utils.helpers import Helpers

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
DEFAULT_CONFIG = 'config/baseline.env'
DEFAULT_POLICY_OUT = 'data/results/optimal.csv'


def _load_params(args) -> SystemParams:
    return config_loader.load(args.config, alpha=args.alpha, p_max=args.pmax, buffer_cap=args.buffer_cap)


def _resolve_policy(name: str, params: SystemParams, args):
    if name == 'optimal':
        return search_optimal(params, grid_size=args.grid, method=args.lp_method, n_jobs=args.jobs).policy
    if name in BASELINES:
        return make_baseline(name, params)
    if Helpers.is_policy_file(name):
        return policy_storage.load(name, params)
    return make_baseline(name, params)   # raises with the list of known names


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)


def _write(frame: pd.DataFrame, out: Optional[str]) -> None:
    Helpers.ensure_parent(out)
    _emit(metrics_reporter.to_csv(frame, out), out)


def command_derive(args) -> int:
    params = _load_params(args)
    _write(metrics_reporter.params_summary(params), args.out)
    return EXIT_OK


def command_evaluate(args) -> int:
    params = _load_params(args)
    policy = _resolve_policy(args.policy, params, args)
    metrics = evaluate(policy, params)
    if args.dump_matrix:
        Helpers.ensure_parent(args.dump_matrix)
        dump_matrix(policy_kernel(decision_kernel(params), policy), args.dump_matrix)

    _write(metrics_reporter.metrics_frame([metrics]), args.out)
    checks = validity_checker.check_validity(metrics, params)
    if not validity_checker.is_valid(checks):
        logging.warning(f"Policy '{policy.name}' violates {validity_checker.failures(checks)}")
        return EXIT_INVALID
    return EXIT_OK


def command_optimize(args) -> int:
    params = _load_params(args)
    result = search_optimal(params, grid_size=args.grid, method=args.lp_method, n_jobs=args.jobs)

    out = args.out or DEFAULT_POLICY_OUT
    Helpers.ensure_parent(out)
    policy_storage.save(result.policy, out)
    metrics_reporter.to_csv(metrics_reporter.trace_frame(result.trace), Helpers.sibling_path(out, '_trace'))
    if args.dump_mps:
        Helpers.ensure_parent(args.dump_mps)
        write_mps(P2Builder(params).build(result.eta_star), args.dump_mps)

    if result.metrics is None:
        logging.error("Recovered policy could not be evaluated")
        return EXIT_ERROR
    frame = metrics_reporter.metrics_frame([result.metrics])
    frame.insert(frame.columns.get_loc('valid'), 'eta_star', result.eta_star)
    frame.insert(frame.columns.get_loc('valid'), 't_bar_star', result.t_bar_star)
    frame.insert(frame.columns.get_loc('valid'), 'round_trip_tv', result.round_trip_tv)
    sys.stdout.write(metrics_reporter.to_csv(frame))

    checks = validity_checker.check_validity(result.metrics, params)
    return EXIT_OK if validity_checker.is_valid(checks) and not result.warnings else EXIT_INVALID


def command_sweep(args) -> int:
    params = _load_params(args)
    spec = SweepSpec(
        alpha_start=args.alpha_start,
        alpha_end=args.alpha_end,
        alpha_step=args.alpha_step,
        policies=tuple(Helpers.split_names(args.policies)),
        grid_size=args.grid,
        out=args.out,
        method=args.lp_method,
        n_jobs=args.jobs,
    )
    Helpers.ensure_parent(args.out)
    frame = SweepPipeline(params).run_pipeline(spec)
    if args.out is None:
        sys.stdout.write(metrics_reporter.to_csv(frame))
    if (frame['status'] == 'error').all():
        return EXIT_ERROR
    return EXIT_OK


def command_simulate(args) -> int:
    params = _load_params(args)
    policy = _resolve_policy(args.policy, params, args)
    report = simulate(policy, params, SimConfig(slots=args.slots, warmup=args.warmup, seed=args.seed))

    if args.trace:
        Helpers.ensure_parent(args.trace)
        metrics_reporter.to_csv(report.trace_frame(), args.trace)
    Helpers.ensure_parent(args.out)
    if args.format == 'json':
        record = dict(report.summary(), occupancy=report.occupancy)
        _emit(metrics_reporter.to_json(record, args.out), args.out)
    else:
        _write(pd.DataFrame([report.summary()]), args.out)
    return EXIT_INVALID if report.dropped_tasks else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=DEFAULT_CONFIG, help='flat key=value parameter file')
    common.add_argument('--alpha', type=float, help='override the task arrival probability')
    common.add_argument('--pmax', type=float, help='override the average power budget (W)')
    common.add_argument('--buffer-cap', type=int, help='override the task buffer size Q')
    common.add_argument('--out', help='write the result here instead of stdout')
    common.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument('--grid', type=int, default=DEFAULT_GRID, help='eta grid size J')
    solver.add_argument('--lp-method', choices=METHODS, default='highs')
    solver.add_argument('--jobs', type=int, default=1, help='parallel workers for grid points')

    parser = argparse.ArgumentParser(prog='mec-sched', description=__doc__.split('\n')[0])
    sub = parser.add_subparsers(dest='command', required=True)

    derive = sub.add_parser('derive', parents=[common], help='print the derived slot-level constants')
    derive.set_defaults(func=command_derive)

    ev = sub.add_parser('evaluate', parents=[common, solver], help='analytical metrics of one policy')
    ev.add_argument('--policy', default='greedy', help=f"{'|'.join(BASELINES)}|optimal or a policy CSV")
    ev.add_argument('--dump-matrix', help='also write the policy transition matrix')
    ev.set_defaults(func=command_evaluate)

    opt = sub.add_parser('optimize', parents=[common, solver],
                         help=f'synthesize the delay-optimal policy into --out (default {DEFAULT_POLICY_OUT})')
    opt.add_argument('--dump-mps', help='write the LP at the optimal eta in MPS format')
    opt.set_defaults(func=command_optimize)

    sweep = sub.add_parser('sweep', parents=[common, solver], help='metrics over a range of arrival rates')
    sweep.add_argument('--alpha-start', type=float, default=0.02)
    sweep.add_argument('--alpha-end', type=float, default=0.40)
    sweep.add_argument('--alpha-step', type=float, default=0.02)
    sweep.add_argument('--policies', default=','.join(SWEEP_POLICIES))
    sweep.set_defaults(func=command_sweep)

    sim = sub.add_parser('simulate', parents=[common, solver], help='Monte Carlo run of one policy')
    sim.add_argument('--policy', default='greedy')
    sim.add_argument('--slots', type=int, default=1_000_000)
    sim.add_argument('--warmup', type=int, help='slots discarded before measuring (default 10%%)')
    sim.add_argument('--seed', type=int, default=0)
    sim.add_argument('--trace', help='per-task trace CSV')
    sim.add_argument('--format', choices=['csv', 'json'], default='csv')
    sim.set_defaults(func=command_simulate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s - %(levelname)s - %(message)s', stream=sys.stderr)
    try:
        return args.func(args)
    except (MecToolkitError, OSError) as e:
        logging.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
