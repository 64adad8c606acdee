"""Delay-optimal policy synthesis.

For a fixed local fraction eta the policy search is a linear program over the
occupation measure x[tau, k]; a grid search over eta then picks the best LP.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sps
from joblib import Parallel, delayed

from analytics.metrics import Metrics, evaluate
from chain.transitions import DecisionKernel, decision_kernel
from model.parameters import SystemParams
from optimization.lp_solver import LpProblem, solve
from policy.policies import Policy
from utils.exceptions import (InvalidArgumentError, NoThroughputError, NumericalFailureError,
                              SynthesisInfeasibleError, UndefinedDelayError)

DEFAULT_GRID = 100
OVERFLOW_LIMIT = 1e-3
ROUND_TRIP_TOL = 1e-6


@dataclass(frozen=True)
class OccupationMeasure:
    """x[p] for every feasible (state, decision) pair p of the kernel"""
    kernel: DecisionKernel
    x: np.ndarray

    def table(self) -> np.ndarray:
        """|S| x 4 table with zeros at infeasible pairs"""
        table = np.zeros((self.kernel.space.size, 4))
        table[self.kernel.pairs[:, 0], self.kernel.pairs[:, 1] - 1] = self.x
        return table

    def state_marginal(self) -> np.ndarray:
        return np.bincount(self.kernel.pairs[:, 0], weights=self.x, minlength=self.kernel.space.size)

    def balance_residual(self) -> float:
        inflow = self.kernel.matrix.T @ self.x
        return float(np.abs(inflow - self.state_marginal()).max())

    def nu_loc(self) -> float:
        return float(self.x @ _local_active(self.kernel))

    def nu_tx_attempt(self) -> float:
        """Transmitter-busy mass, beta factored out"""
        return float(self.x @ _tx_active(self.kernel))

    def overflow_mass(self) -> float:
        space = self.kernel.space
        full = space.q[self.kernel.pairs[:, 0]] == space.buffer_cap
        return float(self.x[full].sum())


@dataclass(frozen=True)
class TracePoint:
    eta: float
    status: str
    t_bar: float


@dataclass
class SynthesisResult:
    eta_star: float
    policy: Policy
    occupation: OccupationMeasure
    t_bar_star: float
    trace: List[TracePoint]
    metrics: Optional[Metrics] = None
    round_trip_tv: float = float('nan')
    grid_size: int = DEFAULT_GRID
    method: str = 'highs'
    warnings: List[str] = field(default_factory=list)


def _local_active(kernel: DecisionKernel) -> np.ndarray:
    c_l = kernel.space.c_l[kernel.pairs[:, 0]]
    k = kernel.pairs[:, 1]
    return ((c_l > 0) | (k == 1) | (k == 3)).astype(float)


def _tx_active(kernel: DecisionKernel) -> np.ndarray:
    c_t = kernel.space.c_t[kernel.pairs[:, 0]]
    k = kernel.pairs[:, 1]
    return ((c_t > 0) | (k == 2) | (k == 3)).astype(float)


class P2Builder:
    """Assembles the fixed-eta LP; everything except the local-fraction row is built once"""

    def __init__(self, params: SystemParams):
        if params.alpha <= 0:
            raise UndefinedDelayError("policy synthesis needs a positive arrival rate")
        self.params = params
        self.kernel = decision_kernel(params)
        kernel = self.kernel
        pairs = kernel.pair_count
        space = kernel.space

        self.objective = np.r_[space.q[kernel.pairs[:, 0]] / params.alpha, 0.0]

        power = (_local_active(kernel) * params.p_loc
                 + params.beta * _tx_active(kernel) * params.p_tx)
        self.power_row = sps.csr_matrix(np.r_[power, 1.0])

        leaving = sps.csr_matrix((np.ones(pairs), (np.arange(pairs), kernel.pairs[:, 0])),
                                 shape=(pairs, space.size))
        balance = (kernel.matrix - leaving).T.tocsr()[1:]   # row of (0, 0, 0) dropped
        self.balance = sps.hstack([balance, sps.csr_matrix((space.size - 1, 1))], format='csr')
        self.normalization = sps.csr_matrix(np.r_[np.ones(pairs), 0.0])

        self._k = kernel.pairs[:, 1]
        self.rhs = np.r_[params.p_max, 0.0, np.zeros(space.size - 1), 1.0]

    @property
    def variable_count(self) -> int:
        """Occupation variables plus the power slack"""
        return self.kernel.pair_count + 1

    def gamma_row(self, eta: float) -> sps.csr_matrix:
        coef = np.select([self._k == 1, self._k == 2, self._k == 3],
                         [1.0 - eta, -eta, 1.0 - 2.0 * eta], default=0.0)
        return sps.csr_matrix(np.r_[coef, 0.0])

    def build(self, eta: float) -> LpProblem:
        if not 0.0 <= eta <= 1.0:
            raise InvalidArgumentError(f"eta must lie in [0, 1], got {eta}")
        A = sps.vstack([self.power_row, self.gamma_row(eta), self.balance, self.normalization],
                       format='csr')
        offset = eta * self.params.local_slots + (1.0 - eta) * self.params.t_c
        return LpProblem(c=self.objective, A=A, b=self.rhs, offset=offset, name=f"P2e{eta:.4f}")

    def occupation(self, solution_x: np.ndarray) -> OccupationMeasure:
        x = np.maximum(solution_x[:self.kernel.pair_count], 0.0)
        return OccupationMeasure(kernel=self.kernel, x=x)


def build_p2(params: SystemParams, eta: float) -> LpProblem:
    return P2Builder(params).build(eta)


def _work_conserving(mask: np.ndarray) -> np.ndarray:
    """Both units where possible, else whichever unit is free; idle only when nothing can start"""
    choice = np.full(mask.shape[0], 3)
    choice[mask[:, 0]] = 0
    choice[mask[:, 1]] = 1
    choice[mask[:, 2]] = 2
    rows = np.zeros(mask.shape)
    rows[np.arange(mask.shape[0]), choice] = 1.0
    return rows


def recover_policy(occupation: OccupationMeasure, name: str = 'optimal') -> Policy:
    """g[tau, k] = x[tau, k] / sum_k x[tau, k] wherever tau carries mass.

    States without mass get a work-conserving row: a queued task starts as soon
    as a unit is free.
    """
    table = occupation.table()
    totals = table.sum(axis=1)
    reached = totals > 0.0
    policy = _work_conserving(occupation.kernel.mask)
    policy[reached] = table[reached] / totals[reached, None]
    return Policy(space=occupation.kernel.space, table=policy, name=name)


def _solve_point(builder: P2Builder, eta: float, method: str, overflow_limit):
    solution = solve(builder.build(eta), method=method)
    if not solution.optimal:
        return TracePoint(eta, solution.status, float('nan')), None
    occupation = builder.occupation(solution.x)
    if overflow_limit is not None and occupation.overflow_mass() >= overflow_limit:
        return TracePoint(eta, 'overflow', solution.objective), None
    return TracePoint(eta, 'optimal', solution.objective), occupation


def search_optimal(params: SystemParams, grid_size: int = DEFAULT_GRID, method: str = 'highs',
                   n_jobs: int = 1, overflow_limit: Optional[float] = OVERFLOW_LIMIT) -> SynthesisResult:
    """Solve the fixed-eta LP on eta = 0, 1/J, ..., 1 and keep the best grid point"""
    if grid_size < 1:
        raise InvalidArgumentError(f"grid size must be at least 1, got {grid_size}")
    builder = P2Builder(params)
    grid = [j / grid_size for j in range(grid_size + 1)]
    logging.info(f"Searching {len(grid)} eta grid points at alpha={params.alpha:g} with {method}")

    points = Parallel(n_jobs=n_jobs)(
        delayed(_solve_point)(builder, eta, method, overflow_limit) for eta in grid)

    trace = [point for point, _ in points]
    best = None
    for index, (point, occupation) in enumerate(points):
        if occupation is None:
            logging.debug(f"eta={point.eta:.4f}: {point.status}")
            continue
        if best is None or point.t_bar < trace[best].t_bar - 1e-12:
            best = index

    if best is None:
        statuses = sorted({p.status for p in trace})
        logging.error(f"No feasible eta grid point at alpha={params.alpha:g} (statuses: {statuses})")
        raise SynthesisInfeasibleError(
            f"every eta grid point is infeasible ({', '.join(statuses)}): "
            f"power budget {params.p_max:g} W too tight or alpha={params.alpha:g} too large for buffer "
            f"{params.buffer_cap}")

    star = trace[best]
    occupation = points[best][1]
    policy = recover_policy(occupation)
    result = SynthesisResult(eta_star=star.eta, policy=policy, occupation=occupation,
                             t_bar_star=star.t_bar, trace=trace, grid_size=grid_size, method=method)
    _round_trip(result, params)
    logging.info(f"alpha={params.alpha:g}: eta*={star.eta:.4f}, T*={star.t_bar:.6g} slots")
    return result


def _round_trip(result: SynthesisResult, params: SystemParams) -> None:
    """Re-evaluate the recovered policy and compare with the occupation measure it came from"""
    try:
        metrics = evaluate(result.policy, params)
    except (NoThroughputError, NumericalFailureError) as e:
        result.warnings.append(f"recovered policy could not be evaluated: {e}")
        logging.warning(f"Synthesis at alpha={params.alpha:g}: {result.warnings[-1]}")
        return
    result.metrics = metrics
    result.round_trip_tv = 0.5 * float(np.abs(metrics.steady.pi - result.occupation.state_marginal()).sum())

    if result.round_trip_tv > ROUND_TRIP_TOL:
        result.warnings.append(f"round-trip total variation {result.round_trip_tv:.3e}")
    if metrics.p_bar > params.p_max + ROUND_TRIP_TOL:
        result.warnings.append(f"recovered policy draws {metrics.p_bar:.6g} W over the {params.p_max:g} W budget")
    if abs(metrics.eta - result.eta_star) > 0.5 / result.grid_size + ROUND_TRIP_TOL:
        result.warnings.append(f"recovered policy has eta {metrics.eta:.6g}, grid point {result.eta_star:.6g}")
    for message in result.warnings:
        logging.warning(f"Synthesis at alpha={params.alpha:g}: {message}")
