"""Dense-tableau two-phase simplex for the planning LP relaxations.

Entering columns follow Dantzig's rule (most negative reduced cost, lowest
index on ties). After a run of degenerate pivots the solve switches to
Bland's rule for the rest of the phase, which cannot cycle.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from mhdiffusion.config import SOLVER_CONFIG
from mhdiffusion.core.milp import MilpModel, VarKind

logger = logging.getLogger(__name__)

Bounds = Dict[int, Tuple[float, float]]


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class LpResult:
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective: float = float("nan")
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Tableau:
    """Tableau rows 0..m-1, objective (reduced-cost) row m, rhs in the last column."""

    def __init__(self, T: np.ndarray, basis: np.ndarray, tol: float, max_iter: int,
                 degenerate_switch: int):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.max_iter = max_iter
        self.degenerate_switch = degenerate_switch
        self.iterations = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def pivot(self, row: int, col: int):
        T = self.T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        self.basis[row] = col

    def run(self, allowed: np.ndarray) -> LpStatus:
        """Iterate to optimality over the allowed entering columns."""
        T, tol = self.T, self.tol
        bland = False
        degenerate_run = 0

        while True:
            reduced = np.where(allowed, T[-1, :-1], 0.0)
            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            if self.iterations >= self.max_iter:
                return LpStatus.ITERATION_LIMIT

            col = int(candidates[0]) if bland else int(np.argmin(reduced))

            column = T[:-1, col]
            rows = np.flatnonzero(column > tol)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol]
            # Leaving variable: lowest basic index among the minimum-ratio rows.
            row = int(ties[np.argmin(self.basis[ties])])

            if best <= tol:
                degenerate_run += 1
                if not bland and degenerate_run >= self.degenerate_switch:
                    logger.debug(f"Switching to Bland's rule after {degenerate_run} degenerate pivots")
                    bland = True
            else:
                degenerate_run = 0

            self.pivot(row, col)
            self.iterations += 1


def solve_standard(A: np.ndarray, b: np.ndarray, senses: np.ndarray, c: np.ndarray,
                   lb: np.ndarray, ub: np.ndarray, tol: float = SOLVER_CONFIG["lp_tol"],
                   feasibility_tol: float = SOLVER_CONFIG["lp_feasibility_tol"],
                   max_iter: int = SOLVER_CONFIG["lp_max_iter"],
                   degenerate_switch: int = SOLVER_CONFIG["degenerate_switch"]) -> LpResult:
    """
    Minimize c.x subject to row constraints and finite lower bounds.

    Args:
        A: Row coefficients (m x n)
        b: Right-hand sides
        senses: -1 for <=, 1 for >=, 0 for ==
        c: Objective
        lb: Lower bounds (finite)
        ub: Upper bounds (inf allowed)

    Returns:
        LpResult
    """
    n = c.size
    if np.any(~np.isfinite(lb)):
        raise ValueError("lower bounds must be finite")
    if np.any(ub < lb - tol):
        return LpResult(LpStatus.INFEASIBLE)

    # x = lb + y with y >= 0; finite upper bounds become explicit rows
    rhs = b - A @ lb
    bounded = np.flatnonzero(np.isfinite(ub))
    A_all = np.vstack([A, np.eye(n)[bounded]])
    rhs = np.concatenate([rhs, np.maximum(ub[bounded] - lb[bounded], 0.0)])
    senses = np.concatenate([senses, -np.ones(bounded.size, dtype=int)])

    flip = rhs < 0
    A_all[flip] *= -1.0
    rhs[flip] *= -1.0
    senses = np.where(flip, -senses, senses)

    m = A_all.shape[0]
    slack_rows = np.flatnonzero(senses != 0)
    art_rows = np.flatnonzero(senses >= 0)
    n_slack, n_art = slack_rows.size, art_rows.size
    width = n + n_slack + n_art

    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A_all
    T[slack_rows, n + np.arange(n_slack)] = np.where(senses[slack_rows] < 0, 1.0, -1.0)
    T[art_rows, n + n_slack + np.arange(n_art)] = 1.0
    T[:m, -1] = rhs

    basis = np.empty(m, dtype=int)
    le_rows = slack_rows[senses[slack_rows] < 0]
    basis[le_rows] = n + np.flatnonzero(senses[slack_rows] < 0)
    basis[art_rows] = n + n_slack + np.arange(n_art)

    tableau = _Tableau(T, basis, tol, max_iter, degenerate_switch)
    is_art = np.zeros(width, dtype=bool)
    is_art[n + n_slack:] = True

    # Phase 1: minimize the sum of artificials
    if n_art:
        T[-1, :] = -T[art_rows].sum(axis=0)
        T[-1, :-1][is_art] = 0.0
        status = tableau.run(np.ones(width, dtype=bool))
        if status is not LpStatus.OPTIMAL:
            return LpResult(status, iterations=tableau.iterations)
        if -T[-1, -1] > feasibility_tol * max(1.0, float(np.abs(rhs).max(initial=0.0))):
            return LpResult(LpStatus.INFEASIBLE, iterations=tableau.iterations)

        # Drive remaining (zero-level) artificials out of the basis
        redundant = []
        for row in range(m):
            if not is_art[tableau.basis[row]]:
                continue
            entries = np.flatnonzero((np.abs(T[row, :-1]) > tol) & ~is_art)
            if entries.size:
                tableau.pivot(row, int(entries[0]))
            else:
                redundant.append(row)
        if redundant:
            keep = np.setdiff1d(np.arange(m + 1), redundant)
            tableau.T = T = T[keep]
            tableau.basis = np.delete(tableau.basis, redundant)

    # Phase 2
    cost = np.zeros(width + 1)
    cost[:n] = c
    T[-1, :] = cost
    for row, col in enumerate(tableau.basis):
        if cost[col] != 0.0:
            T[-1, :] -= cost[col] * T[row]
    status = tableau.run(~is_art)
    if status is not LpStatus.OPTIMAL:
        return LpResult(status, iterations=tableau.iterations)

    y = np.zeros(width)
    y[tableau.basis] = T[:-1, -1]
    x = lb + y[:n]
    return LpResult(LpStatus.OPTIMAL, x=x, objective=float(c @ x), iterations=tableau.iterations)


def solve_lp(model: MilpModel, relax: bool = True,
             bounds_override: Optional[Bounds] = None) -> LpResult:
    """
    Solve the LP of a planning model.

    Args:
        model: Planning model
        relax: Treat binaries as continuous in [0, 1]. When False every binary
            must be fixed through bounds_override
        bounds_override: {variable index: (lb, ub)} applied on top of the model

    Returns:
        LpResult with status, solution and objective
    """
    A, b, senses, c, lb, ub = model.to_dense()
    lb, ub = lb.copy(), ub.copy()
    for idx, (lo, hi) in (bounds_override or {}).items():
        lb[idx], ub[idx] = lo, hi

    if not relax:
        loose = [i for i in model.binary_indices if lb[i] != ub[i]]
        if loose:
            raise ValueError(f"{len(loose)} binary variables are not fixed (first: {model.variables[loose[0]].name})")

    return solve_standard(A, b, senses, c, lb, ub)
