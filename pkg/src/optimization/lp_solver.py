"""Linear programs in standard equality form: min c x  s.t.  A x = b, x >= 0.

Two interchangeable backends sit behind `solve`: scipy's HiGHS and a
self-contained two-phase revised simplex with a dense basis inverse.
Both receive the problem after the same presolve pass.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sps
from scipy.optimize import linprog
from scipy.sparse.linalg import lsqr

from utils.exceptions import InvalidArgumentError, NumericalFailureError

FEAS_TOL = 1e-8
OPT_TOL = 1e-8
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100
METHODS = ('highs', 'simplex')
HIGHS_OPTIONS = {'primal_feasibility_tolerance': 1e-10, 'dual_feasibility_tolerance': 1e-10}


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A: sps.csr_matrix
    b: np.ndarray
    offset: float = 0.0
    name: str = 'LP'

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        A = sps.csr_matrix(self.A, dtype=float)
        if A.shape != (b.size, c.size):
            raise InvalidArgumentError(f"constraint matrix is {A.shape}, expected ({b.size}, {c.size})")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b)) and np.all(np.isfinite(A.data))):
            raise InvalidArgumentError("LP data contains NaN or infinite entries")
        A.eliminate_zeros()
        A.sort_indices()
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'A', A)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size

    def residual(self, x: np.ndarray) -> float:
        if self.m == 0:
            return 0.0
        return float(np.abs(self.A @ x - self.b).max())


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0
    basis: Optional[np.ndarray] = None
    method: str = ''

    @property
    def optimal(self) -> bool:
        return self.status == 'optimal'

    @classmethod
    def failed(cls, status: str, method: str, iterations: int = 0) -> "LpSolution":
        return cls(status=status, x=None, objective=float('nan'), iterations=iterations, method=method)


@dataclass
class Presolved:
    problem: LpProblem
    rows: np.ndarray
    cols: np.ndarray
    status: Optional[str] = None
    ray: bool = False            # an empty column with negative cost: unbounded once feasible
    dropped: dict = field(default_factory=dict)


def presolve(problem: LpProblem, tol: float = FEAS_TOL) -> Presolved:
    """Drop empty columns, empty rows and rows that repeat an earlier row up to scale"""
    col_nnz = np.diff(problem.A.tocsc().indptr)
    empty_cols = col_nnz == 0
    cols = np.flatnonzero(~empty_cols)
    ray = bool(np.any(problem.c[empty_cols] < -OPT_TOL))

    A = problem.A[:, cols].tocsr()
    A.sort_indices()
    row_nnz = np.diff(A.indptr)
    status = None
    empty_rows = np.flatnonzero(row_nnz == 0)
    if np.any(np.abs(problem.b[empty_rows]) > tol):
        status = 'infeasible'

    keep, seen, duplicates = [], {}, 0
    for i in np.flatnonzero(row_nnz > 0):
        start, end = A.indptr[i], A.indptr[i + 1]
        scale = A.data[start]
        key = (A.indices[start:end].tobytes(), np.round(A.data[start:end] / scale, 12).tobytes())
        rhs = problem.b[i] / scale
        if key in seen:
            duplicates += 1
            if abs(seen[key] - rhs) > tol * max(1.0, abs(rhs)):
                status = 'infeasible'
            continue
        seen[key] = rhs
        keep.append(i)

    rows = np.array(keep, dtype=int)
    reduced = LpProblem(c=problem.c[cols], A=A[rows], b=problem.b[rows], offset=problem.offset,
                        name=problem.name)
    dropped = {'empty_cols': int(empty_cols.sum()), 'empty_rows': int(empty_rows.size),
               'duplicate_rows': duplicates}
    logging.debug(f"Presolve {problem.name}: {dropped}")
    return Presolved(problem=reduced, rows=rows, cols=cols, status=status, ray=ray, dropped=dropped)


class RevisedSimplexSolver:
    """Two-phase revised simplex.

    Dantzig pricing with a switch to Bland's rule after 10 (m + n) consecutive
    degenerate pivots. B^-1 is kept dense, updated by rank-one eta steps and
    rebuilt from scratch every `refactor_every` pivots.
    """

    name = 'simplex'

    def __init__(self, feas_tol=FEAS_TOL, opt_tol=OPT_TOL, refactor_every=REFACTOR_EVERY, max_iter=None):
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.refactor_every = refactor_every
        self.max_iter = max_iter

    def solve(self, problem: LpProblem) -> LpSolution:
        m, n = problem.m, problem.n
        flip = np.where(problem.b < 0, -1.0, 1.0)
        A = (sps.diags(flip) @ problem.A).tocsc()
        self._b = problem.b * flip
        self._A = sps.hstack([A, sps.identity(m, format='csc')], format='csc')
        self._m, self._n = m, n
        self._basis = np.arange(n, n + m)
        self._binv = np.eye(m)
        self._xb = self._b.copy()
        self._iterations = 0
        self._since_refactor = 0
        self._cap = self.max_iter if self.max_iter is not None else 50 * (m + n)

        phase1_cost = np.r_[np.zeros(n), np.ones(m)]
        self._run(phase1_cost, np.ones(n + m, dtype=bool), phase=1)
        infeasibility = float(self._xb[self._basis >= n].sum())
        if infeasibility > self.feas_tol * max(1.0, np.abs(self._b).max(initial=0.0)):
            logging.info(f"Simplex phase 1 ended with infeasibility {infeasibility:.3e}")
            return LpSolution.failed('infeasible', self.name, self._iterations)

        redundant = self._drive_out_artificials()
        if redundant:
            logging.debug(f"{redundant} redundant rows left with a zero-level artificial")

        cost = np.r_[problem.c, np.zeros(m)]
        status = self._run(cost, np.r_[np.ones(n, dtype=bool), np.zeros(m, dtype=bool)], phase=2)
        if status == 'unbounded':
            return LpSolution.failed('unbounded', self.name, self._iterations)

        self._refactor()
        x = np.zeros(n)
        structural = self._basis < n
        x[self._basis[structural]] = np.maximum(self._xb[structural], 0.0)
        y = cost[self._basis] @ self._binv
        reduced = problem.c - self._A[:, :n].T @ y
        return LpSolution(status='optimal', x=x, objective=float(problem.c @ x),
                          reduced_costs=np.asarray(reduced).ravel(), iterations=self._iterations,
                          basis=self._basis.copy(), method=self.name)

    def _column(self, j: int) -> np.ndarray:
        start, end = self._A.indptr[j], self._A.indptr[j + 1]
        return self._binv[:, self._A.indices[start:end]] @ self._A.data[start:end]

    def _run(self, cost: np.ndarray, eligible: np.ndarray, phase: int) -> str:
        bland = False
        degenerate = 0
        threshold = 10 * (self._m + self._n)
        while True:
            y = cost[self._basis] @ self._binv
            reduced = cost - self._A.T @ y
            reduced[self._basis] = 0.0
            candidates = np.flatnonzero(eligible & (reduced < -self.opt_tol))
            if candidates.size == 0:
                return 'optimal'
            if self._iterations >= self._cap:
                self._fail(f"simplex iteration cap {self._cap} reached in phase {phase}", cost, phase)

            j = int(candidates[0]) if bland else int(candidates[np.argmin(reduced[candidates])])
            d = self._column(j)
            leaving = self._ratio_test(d, bland, phase)
            if leaving is None:
                return 'unbounded'
            r, theta = leaving
            self._pivot(r, j, d, theta)

            degenerate = degenerate + 1 if theta <= self.feas_tol else 0
            if not bland and degenerate >= threshold:
                logging.debug(f"Phase {phase}: {degenerate} degenerate pivots, switching to Bland's rule")
                bland = True

    def _ratio_test(self, d: np.ndarray, bland: bool, phase: int):
        if phase == 2:
            # a zero-level artificial touched by the direction leaves first, with a zero step
            artificial = np.flatnonzero((self._basis >= self._n) & (np.abs(d) > PIVOT_TOL))
            if artificial.size:
                return int(artificial[0]), 0.0
        rows = np.flatnonzero(d > PIVOT_TOL)
        if rows.size == 0:
            return None
        ratios = self._xb[rows] / d[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12]
        r = ties[np.argmin(self._basis[ties])] if bland else ties[np.argmax(d[ties])]
        return int(r), max(float(best), 0.0)

    def _pivot(self, r: int, j: int, d: np.ndarray, theta: float) -> None:
        self._xb -= theta * d
        self._xb[r] = theta
        pivot_row = self._binv[r] / d[r]
        self._binv -= np.outer(d, pivot_row)
        self._binv[r] = pivot_row
        self._basis[r] = j
        self._iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= self.refactor_every or self._xb.min(initial=0.0) < -self.feas_tol:
            self._refactor()
        self._xb[self._xb < 0] = 0.0

    def _refactor(self) -> None:
        basis_matrix = self._A[:, self._basis].toarray()
        try:
            self._binv = np.linalg.inv(basis_matrix)
        except np.linalg.LinAlgError as e:
            logging.error(f"Basis refactorization failed: {e}")
            raise NumericalFailureError(f"singular basis after {self._iterations} pivots",
                                        report={'basis': self._basis.copy(), 'iterations': self._iterations})
        self._xb = self._binv @ self._b
        self._since_refactor = 0
        if self._xb.min(initial=0.0) < -1e-6:
            raise NumericalFailureError(
                f"basis lost primal feasibility ({self._xb.min():.3e}) after refactorization",
                residual=float(-self._xb.min()),
                report={'basis': self._basis.copy(), 'iterations': self._iterations})

    def _drive_out_artificials(self) -> int:
        redundant = 0
        for r in np.flatnonzero(self._basis >= self._n):
            row = np.asarray(self._A[:, :self._n].T @ self._binv[r]).ravel()
            row[self._basis[self._basis < self._n]] = 0.0
            cols = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if cols.size == 0:
                redundant += 1
                continue
            j = int(cols[np.argmax(np.abs(row[cols]))])
            self._xb[r] = 0.0
            self._pivot(int(r), j, self._column(j), 0.0)
        return redundant

    def _fail(self, message, cost, phase):
        structural = self._basis < self._n
        report = {
            'phase': phase,
            'iterations': self._iterations,
            'basis': self._basis.copy(),
            'objective': float(cost[self._basis] @ self._xb),
            'artificials_in_basis': int((~structural).sum()),
        }
        logging.error(f"{message}: {report['objective']:.6g} at last basis")
        raise NumericalFailureError(message, report=report)


class HighsSolver:
    name = 'highs'

    def solve(self, problem: LpProblem) -> LpSolution:
        try:
            res = linprog(problem.c, A_eq=problem.A, b_eq=problem.b, bounds=(0, None), method='highs',
                          options=HIGHS_OPTIONS)
        except ValueError as e:
            logging.error(f"HiGHS rejected {problem.name}: {e}")
            raise NumericalFailureError(f"HiGHS rejected the problem: {e}")

        if res.status == 2:
            return LpSolution.failed('infeasible', self.name, int(res.nit))
        if res.status == 3:
            return LpSolution.failed('unbounded', self.name, int(res.nit))
        if res.status != 0:
            logging.error(f"HiGHS failed on {problem.name}: {res.message}")
            raise NumericalFailureError(f"HiGHS status {res.status}: {res.message}",
                                        report={'status': res.status, 'message': res.message})

        x = _polish(problem, np.maximum(res.x, 0.0))
        reduced = getattr(getattr(res, 'lower', None), 'marginals', None)
        return LpSolution(status='optimal', x=x, objective=float(problem.c @ x),
                          reduced_costs=None if reduced is None else np.asarray(reduced),
                          iterations=int(res.nit), method=self.name)


def _polish(problem: LpProblem, x: np.ndarray) -> np.ndarray:
    """Least-squares correction of A x = b on the support of x.

    HiGHS measures feasibility on its scaled model, so the unscaled residual can
    sit above FEAS_TOL. The correction is kept only if x stays non-negative and
    the residual drops.
    """
    before = problem.residual(x)
    support = np.flatnonzero(x > 0)
    if before <= FEAS_TOL * max(1.0, np.abs(problem.b).max(initial=0.0)) or support.size == 0:
        return x

    dx = lsqr(problem.A[:, support], problem.b - problem.A @ x, atol=1e-15, btol=1e-15,
              iter_lim=10 * support.size)[0]
    candidate = x.copy()
    candidate[support] += dx
    if candidate[support].min() < -FEAS_TOL:
        logging.debug(f"{problem.name}: polish step would leave the positive orthant")
        return x
    candidate = np.maximum(candidate, 0.0)
    after = problem.residual(candidate)
    logging.debug(f"{problem.name}: primal residual {before:.3e} -> {after:.3e} after polish")
    return candidate if after < before else x


def _backend(method: str):
    if method == 'highs':
        return HighsSolver()
    if method == 'simplex':
        return RevisedSimplexSolver()
    raise InvalidArgumentError(f"unknown LP method '{method}', expected one of {METHODS}")


def solve(problem: LpProblem, method: str = 'highs') -> LpSolution:
    """Presolve, run the chosen backend and map the answer back to the full variable set"""
    backend = _backend(method)
    pre = presolve(problem)
    if pre.status == 'infeasible':
        return LpSolution.failed('infeasible', method)

    reduced = pre.problem
    if reduced.n == 0:
        inner = LpSolution(status='optimal', x=np.zeros(0), objective=0.0,
                           reduced_costs=np.zeros(0), method=method)
    else:
        inner = backend.solve(reduced)
    if not inner.optimal:
        return inner
    if pre.ray:
        return LpSolution.failed('unbounded', method, inner.iterations)

    x = np.zeros(problem.n)
    x[pre.cols] = inner.x
    reduced_costs = problem.c.copy()
    if inner.reduced_costs is not None:
        reduced_costs[pre.cols] = inner.reduced_costs

    residual = problem.residual(x)
    limit = 1e-8 * max(1.0, np.abs(problem.b).max(initial=0.0))
    if residual > limit:
        logging.error(f"{problem.name}: primal residual {residual:.3e} exceeds {limit:.1e}")
        raise NumericalFailureError(f"LP solution violates the constraints by {residual:.3e}",
                                    residual=residual)

    return LpSolution(status='optimal', x=x, objective=float(problem.c @ x) + problem.offset,
                      reduced_costs=reduced_costs, iterations=inner.iterations,
                      basis=inner.basis, method=method)


def _mps_number(value: float) -> str:
    for digits in range(12, 0, -1):
        text = f"{value:.{digits}g}"
        if len(text) <= 12:
            return text
    return f"{value:.1e}"


def write_mps(problem: LpProblem, path) -> None:
    """Fixed-column MPS dump; rows are R0000000.., columns C0000000.., bounds are the default x >= 0"""
    A = problem.A.tocsc()
    lines = [f"NAME          {problem.name[:8]}", "ROWS", " N  COST"]
    lines += [f" E  R{i:07d}" for i in range(problem.m)]
    lines.append("COLUMNS")
    for j in range(problem.n):
        entries = [('COST', problem.c[j])] if problem.c[j] != 0 else []
        start, end = A.indptr[j], A.indptr[j + 1]
        entries += [(f"R{i:07d}", v) for i, v in zip(A.indices[start:end], A.data[start:end])]
        if not entries:
            entries = [('COST', 0.0)]
        for row, value in entries:
            lines.append(f"    {f'C{j:07d}':<8}  {row:<8}  {_mps_number(value):>12}")
    lines.append("RHS")
    for i in np.flatnonzero(problem.b != 0):
        lines.append(f"    {'RHS':<8}  {f'R{i:07d}':<8}  {_mps_number(problem.b[i]):>12}")
    lines.append("ENDATA")
    try:
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write("\n".join(lines) + "\n")
        logging.info(f"MPS dump of {problem.name} ({problem.m} rows, {problem.n} columns) written to {path}")
    except OSError as e:
        logging.error(f"Error writing MPS file {path}: {e}")
        raise
