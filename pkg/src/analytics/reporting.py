import io
import json
import logging
from typing import Iterable

import numpy as np
import pandas as pd

from analytics.metrics import Metrics
from model.parameters import SystemParams

METRICS_COLUMNS = ['alpha', 'beta', 'policy_name', 't_q', 'eta', 't_p', 't_bar',
                   'nu_loc', 'nu_tx', 'p_bar', 'overflow_mass']
MS_COLUMNS = ['t_q_ms', 't_p_ms', 't_bar_ms']
FLOAT_FORMAT = '%.12g'


class MetricsReporter:
    def metrics_row(self, metrics: Metrics) -> dict:
        """Flat record of one evaluation, slots first then milliseconds"""
        row = {column: getattr(metrics, column) for column in METRICS_COLUMNS}
        row['valid'] = metrics.valid
        row['t_q_ms'] = metrics.in_ms(metrics.t_q)
        row['t_p_ms'] = metrics.in_ms(metrics.t_p)
        row['t_bar_ms'] = metrics.in_ms(metrics.t_bar)
        return row

    def metrics_frame(self, metrics: Iterable[Metrics]) -> pd.DataFrame:
        rows = [self.metrics_row(m) for m in metrics]
        return pd.DataFrame(rows, columns=METRICS_COLUMNS + ['valid'] + MS_COLUMNS)

    def trace_frame(self, trace) -> pd.DataFrame:
        return pd.DataFrame([(p.eta, p.status, p.t_bar) for p in trace],
                            columns=['eta', 'status', 't_bar'])

    def params_summary(self, params: SystemParams) -> pd.DataFrame:
        """Derived constants as a two-column name/value table"""
        values = {
            'alpha': params.alpha,
            'beta': params.beta,
            'slot_len': params.slot_len,
            'buffer_cap': params.buffer_cap,
            'packets_per_task': params.packets_per_task,
            'local_slots': params.local_slots,
            'cloud_slots': params.cloud_slots,
            'feedback_slots': params.feedback_slots,
            't_tx': params.t_tx,
            't_c': params.t_c,
            'p_loc': params.p_loc,
            'p_tx': params.p_tx,
            'p_max': params.p_max,
            'service_capacity': params.service_capacity,
        }
        return pd.DataFrame({'name': list(values), 'value': list(values.values())})

    def to_csv(self, frame: pd.DataFrame, path=None) -> str:
        """Render with 12 significant digits; also write to `path` when given"""
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        text = buffer.getvalue()
        if path is not None:
            try:
                with open(path, 'w', encoding='utf-8', newline='') as handle:
                    handle.write(text)
                logging.info(f"{len(frame)} rows written to {path}")
            except OSError as e:
                logging.error(f"Error writing {path}: {e}")
                raise
        return text

    def to_json(self, record: dict, path=None) -> str:
        text = json.dumps(_jsonable(record), indent=2, sort_keys=False) + '\n'
        if path is not None:
            with open(path, 'w', encoding='utf-8') as handle:
                handle.write(text)
            logging.info(f"Report written to {path}")
        return text


def _jsonable(value):
    if isinstance(value, dict):
        return {key: _jsonable(v) for key, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if not np.isfinite(value) else float(f"{value:.12g}")
    return value


metrics_reporter = MetricsReporter()
