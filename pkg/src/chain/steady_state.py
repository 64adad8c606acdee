import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.linalg import splu

from utils.exceptions import NumericalFailureError

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SteadyState:
    pi: np.ndarray
    residual: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.pi > 0)


def _factorize(matrix):
    try:
        return splu(sps.csc_matrix(matrix))
    except RuntimeError as e:
        logging.error(f"Sparse LU failed: {e}")
        raise NumericalFailureError(f"singular balance system: {e}")


def _solve_class(block) -> np.ndarray:
    """Stationary vector of one closed communicating class: one balance row replaced by sum(pi) = 1"""
    m = block.shape[0]
    if m == 1:
        return np.ones(1)
    balance = (block.T - sps.identity(m, format='csr')).tocsr()
    system = sps.vstack([balance[:-1], sps.csr_matrix(np.ones((1, m)))])
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    return _factorize(system).solve(rhs)


def _closed_classes(sub, labels, n_classes):
    coo = sub.tocoo()
    crossing = (labels[coo.row] != labels[coo.col]) & (coo.data > 0)
    leaky = set(labels[coo.row[crossing]].tolist())
    return [c for c in range(n_classes) if c not in leaky]


def _absorption_weights(sub, labels, closed, start):
    """Probability of ending in each closed class when the chain starts from `start`"""
    in_closed = np.isin(labels, closed)
    transient = np.flatnonzero(~in_closed)
    position = int(np.flatnonzero(transient == start)[0])
    p_tt = sub[transient][:, transient]
    lu = _factorize(sps.identity(len(transient), format='csc') - p_tt)
    weights = {}
    for c in closed:
        members = np.flatnonzero(labels == c)
        into = np.asarray(sub[transient][:, members].sum(axis=1)).ravel()
        weights[c] = float(lu.solve(into)[position])
    return weights


def steady_state(matrix, start: int = 0, tol: float = RESIDUAL_TOL) -> SteadyState:
    """Stationary distribution of the chain as observed from `start` (the empty system by default)"""
    chi = sps.csr_matrix(matrix)
    n = chi.shape[0]

    reachable = np.sort(breadth_first_order(chi, start, directed=True, return_predecessors=False))
    sub = chi[reachable][:, reachable]
    local_start = int(np.flatnonzero(reachable == start)[0])
    n_classes, labels = connected_components(sub, directed=True, connection='strong')
    closed = _closed_classes(sub, labels, n_classes)

    if len(closed) == 1:
        weights = {closed[0]: 1.0}
    else:
        logging.warning(f"{len(closed)} closed classes reachable from state {start}; "
                        f"weighting by absorption probability")
        weights = _absorption_weights(sub, labels, closed, local_start)

    pi_sub = np.zeros(len(reachable))
    for c, weight in weights.items():
        if weight <= 0:
            continue
        members = np.flatnonzero(labels == c)
        pi_sub[members] = weight * _solve_class(sub[members][:, members])

    pi = np.zeros(n)
    pi[reachable] = pi_sub
    pi[pi < 0] = 0.0
    pi /= pi.sum()

    residual = float(np.abs(chi.T @ pi - pi).max())
    if residual > tol:
        logging.error(f"Steady-state residual {residual:.3e} exceeds {tol:.1e}")
        raise NumericalFailureError(f"steady-state residual {residual:.3e} exceeds tolerance",
                                    residual=residual)
    return SteadyState(pi=pi, residual=residual)
