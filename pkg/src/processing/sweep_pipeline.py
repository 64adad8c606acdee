import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from analytics.metrics import evaluate
from analytics.reporting import MS_COLUMNS, METRICS_COLUMNS, metrics_reporter
from model.parameters import SystemParams
from optimization.synthesis import DEFAULT_GRID, OVERFLOW_LIMIT, search_optimal
from policy.policies import BASELINES, make_baseline
from processing.validity import ValidityChecker
from utils.exceptions import InvalidArgumentError, MecToolkitError

SWEEP_POLICIES = BASELINES + ('optimal',)
SWEEP_COLUMNS = METRICS_COLUMNS + ['eta_star', 'valid', 'status'] + MS_COLUMNS + ['error']


@dataclass(frozen=True)
class SweepSpec:
    alpha_start: float
    alpha_end: float
    alpha_step: float
    policies: Tuple[str, ...] = SWEEP_POLICIES
    grid_size: int = DEFAULT_GRID
    out: Optional[str] = None
    method: str = 'highs'
    n_jobs: int = 1
    overflow_limit: Optional[float] = OVERFLOW_LIMIT

    def __post_init__(self):
        if not 0.0 < self.alpha_start <= self.alpha_end <= 1.0:
            raise InvalidArgumentError(
                f"need 0 < alpha_start <= alpha_end <= 1, got {self.alpha_start}..{self.alpha_end}")
        if not self.alpha_step > 0:
            raise InvalidArgumentError(f"alpha_step must be positive, got {self.alpha_step}")
        unknown = [p for p in self.policies if p not in SWEEP_POLICIES]
        if unknown or not self.policies:
            raise InvalidArgumentError(f"unknown sweep policies {unknown}, expected a subset of {SWEEP_POLICIES}")
        object.__setattr__(self, 'policies', tuple(self.policies))

    def alphas(self) -> List[float]:
        count = math.floor((self.alpha_end - self.alpha_start) / self.alpha_step + 1e-9) + 1
        return [round(self.alpha_start + i * self.alpha_step, 12) for i in range(count)]


def _sweep_point(params: SystemParams, alpha: float, policy_name: str, spec: SweepSpec) -> dict:
    checker = ValidityChecker()
    point = params.with_overrides(alpha=alpha)
    row = {'alpha': alpha, 'beta': params.beta, 'policy_name': policy_name, 'eta_star': np.nan,
           'error': ''}
    try:
        if policy_name == 'optimal':
            result = search_optimal(point, grid_size=spec.grid_size, method=spec.method,
                                    overflow_limit=spec.overflow_limit)
            metrics = result.metrics
            row['eta_star'] = result.eta_star
            if metrics is None:
                raise MecToolkitError("; ".join(result.warnings))
        else:
            metrics = evaluate(make_baseline(policy_name, point), point)
    except MecToolkitError as e:
        logging.warning(f"Sweep point alpha={alpha:g} policy={policy_name} failed: {e}")
        row.update({'valid': False, 'status': 'error', 'error': str(e)})
        return row

    checks = checker.check_validity(metrics, point)
    row.update(metrics_reporter.metrics_row(metrics))
    row['valid'] = checker.is_valid(checks)
    row['status'] = 'ok' if row['valid'] else 'invalid:' + '+'.join(checker.failures(checks))
    return row


class SweepPipeline:
    def __init__(self, params: SystemParams):
        self.params = params

    def run_pipeline(self, spec: SweepSpec) -> pd.DataFrame:
        """Evaluate every (alpha, policy) point and write the long-format table"""
        points = self._extract_points(spec)
        logging.info(f"Sweep over {len(points)} points with {spec.n_jobs} workers")

        rows = self._transform_points(points, spec)
        frame = self._load_results(rows, spec)

        failed = int((frame['status'] == 'error').sum())
        logging.info(f"Sweep completed: {len(frame)} rows, {failed} failed")
        return frame

    def _extract_points(self, spec: SweepSpec):
        return [(alpha, name) for alpha in spec.alphas() for name in spec.policies]

    def _transform_points(self, points, spec: SweepSpec) -> List[dict]:
        return Parallel(n_jobs=spec.n_jobs)(
            delayed(_sweep_point)(self.params, alpha, name, spec) for alpha, name in points)

    def _load_results(self, rows, spec: SweepSpec) -> pd.DataFrame:
        frame = pd.DataFrame(rows).reindex(columns=SWEEP_COLUMNS)
        order = {name: i for i, name in enumerate(SWEEP_POLICIES)}
        frame['_order'] = frame['policy_name'].map(order)
        frame = frame.sort_values(['alpha', '_order'], kind='mergesort').drop(columns='_order')
        frame = frame.reset_index(drop=True)
        if spec.out is not None:
            metrics_reporter.to_csv(frame, spec.out)
        return frame
