import logging

from analytics.metrics import Metrics
from chain.steady_state import RESIDUAL_TOL
from model.parameters import SystemParams

OVERFLOW_WARN = 1e-6
OVERFLOW_LIMIT = 1e-3
POWER_TOL = 1e-6


class ValidityChecker:
    def check_validity(self, metrics: Metrics, params: SystemParams):
        """Model-assumption checks for one evaluated policy"""
        checks = {}

        try:
            checks['overflow'] = self._check_overflow(metrics)
            checks['stability'] = self._check_stability(metrics, params)
            checks['power'] = self._check_power(metrics, params)
            checks['residual'] = self._check_residual(metrics)
        except (AttributeError, TypeError, ValueError) as e:
            logging.error(f"Validity check error: {e}")
            checks['error'] = {'value': 0, 'status': 'failed'}

        return checks

    def is_valid(self, checks) -> bool:
        return all(check['status'] != 'failed' for check in checks.values())

    def failures(self, checks):
        return [name for name, check in checks.items() if check['status'] == 'failed']

    def _check_overflow(self, metrics):
        """Steady-state mass on a full buffer"""
        mass = metrics.overflow_mass
        if mass < OVERFLOW_WARN:
            return {'value': mass, 'status': 'good'}
        if mass < OVERFLOW_LIMIT:
            return {'value': mass, 'status': 'fair'}
        return {'value': mass, 'status': 'failed'}

    def _check_stability(self, metrics, params):
        """Utilization of the busier unit: alpha*eta*N locally, alpha*(1-eta)*M/beta on the link"""
        local = metrics.alpha * metrics.eta * params.local_slots
        link = metrics.alpha * (1.0 - metrics.eta) * params.t_tx
        load = max(local, link)
        if load < 0.95:
            return {'value': load, 'status': 'good'}
        if load < 1.0:
            return {'value': load, 'status': 'fair'}
        return {'value': load, 'status': 'failed'}

    def _check_power(self, metrics, params):
        status = 'good' if metrics.p_bar <= params.p_max + POWER_TOL else 'failed'
        return {'value': metrics.p_bar, 'status': status}

    def _check_residual(self, metrics):
        residual = metrics.steady.residual
        return {'value': residual, 'status': 'good' if residual <= RESIDUAL_TOL else 'failed'}


validity_checker = ValidityChecker()
