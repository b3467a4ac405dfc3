"""Combination-weight design.

- balancing rule: weights proportional to inverse composite variances
- LMI bisection for the balancing coefficient beta (alpha = 1/(beta+1))
- adaptive variant driven by moving-average variance estimates
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional, Sequence, Union, Iterable

import numpy as np

from mhdiffusion.config import DIFFUSION_CONFIG, SOLVER_CONFIG
from mhdiffusion.core.datamodel import BlockMatrices, NodeProfile, composite_variances
from mhdiffusion.exceptions import InfeasibleError, NumericalError
from mhdiffusion.utils.helpers import min_eigenvalue_is_psd

logger = logging.getLogger(__name__)

InfoSets = Union[Mapping[int, Iterable[int]], Sequence[Iterable[int]]]


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Column-stochastic N x N combination matrix; a[l, k] weights l's estimate at k."""

    A: np.ndarray

    def __post_init__(self):
        """Validate matrix after initialization."""
        A = np.array(self.A, dtype=float, ndmin=2)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"combination matrix must be square, got shape {A.shape}")
        if np.any(A < 0):
            raise ValueError("combination weights must be nonnegative")
        if not np.allclose(A.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError(f"columns must sum to 1, got: {A.sum(axis=0)}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @classmethod
    def identity(cls, n: int) -> "WeightMatrix":
        return cls(np.eye(n))

    def support(self) -> list:
        """Information set of every node (rows with positive weight)."""
        return [frozenset(np.flatnonzero(self.A[:, k] > 0).tolist()) for k in range(self.N)]


@dataclass(frozen=True)
class BalanceCoefficient:
    """Balancing coefficient beta and the blend alpha = 1/(beta+1)."""

    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got: {self.beta}")

    @property
    def alpha(self) -> float:
        return 1.0 / (self.beta + 1.0)


class BalanceLmi:
    """The (NM+M) x (NM+M) matrix inequality whose smallest feasible beta is sought.

    [[beta*(MSM)^-1 + Q,  Q E        ],
     [E^T Q,              E^T (Q-I) E]]  >= 0

    with Q = (I - MR)^-2 and E = 1_N (x) I_M.
    """

    def __init__(self, blocks: BlockMatrices, rel_tol: float = SOLVER_CONFIG["psd_rel_tol"]):
        self.blocks = blocks
        self.rel_tol = rel_tol

        nm = blocks.N * blocks.M
        msm = blocks.Mstep @ blocks.Sblk @ blocks.Mstep
        if np.linalg.eigvalsh(0.5 * (msm + msm.T))[0] <= 0:
            raise NumericalError("M S M must be positive definite")
        contraction = np.eye(nm) - blocks.Mstep @ blocks.Rblk
        if np.linalg.cond(contraction) > 1e12:
            raise NumericalError("I - M R is singular (mu_k * eigenvalue = 1)")

        inv_contraction = np.linalg.inv(contraction)
        self._msm_inv = np.linalg.inv(msm)
        self._q = inv_contraction @ inv_contraction
        self._e = np.kron(np.ones((blocks.N, 1)), np.eye(blocks.M))

    @cached_property
    def _constant(self) -> np.ndarray:
        q, e = self._q, self._e
        upper = np.hstack([q, q @ e])
        lower = np.hstack([e.T @ q, e.T @ (q - np.eye(q.shape[0])) @ e])
        return np.vstack([upper, lower])

    def matrix(self, beta: float) -> np.ndarray:
        """LMI matrix at a given beta."""
        mat = self._constant.copy()
        nm = self._q.shape[0]
        mat[:nm, :nm] += beta * self._msm_inv
        return mat

    def feasible(self, beta: float) -> bool:
        return min_eigenvalue_is_psd(self.matrix(beta), self.rel_tol)


def solve_beta(blocks: BlockMatrices, tolerance: float = SOLVER_CONFIG["beta_tolerance"],
               beta_max: float = SOLVER_CONFIG["beta_max"]) -> BalanceCoefficient:
    """
    Smallest beta making the balancing LMI positive semi-definite, by bisection.

    Feasibility is monotone in beta because the beta term is positive definite.

    Args:
        blocks: Block matrices of the model
        tolerance: Absolute tolerance on beta
        beta_max: Upper bracket

    Returns:
        BalanceCoefficient

    Raises:
        InfeasibleError: no beta <= beta_max is feasible
    """
    lmi = BalanceLmi(blocks)
    if not lmi.feasible(beta_max):
        raise InfeasibleError(f"balancing LMI infeasible at beta_max={beta_max:g} (check input scaling)")

    lo, hi = 0.0, float(beta_max)
    if lmi.feasible(lo):
        return BalanceCoefficient(0.0)

    steps = 0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if lmi.feasible(mid):
            hi = mid
        else:
            lo = mid
        steps += 1

    logger.debug(f"Beta bisection converged in {steps} steps: beta={hi:.12g}")
    return BalanceCoefficient(hi)


def _as_sets(sets: InfoSets, n: int) -> list:
    if isinstance(sets, Mapping):
        return [frozenset(sets[k]) for k in range(n)]
    sets = [frozenset(s) for s in sets]
    if len(sets) != n:
        raise ValueError(f"expected {n} information sets, got {len(sets)}")
    return sets


def balancing_weights(sets: InfoSets, gammas: Sequence[float]) -> WeightMatrix:
    """
    Balancing-rule weights a_lk = gamma_l^-2 / sum_{j in set_k} gamma_j^-2.

    Args:
        sets: Information set of every node (each must contain the node itself)
        gammas: Composite variance of every node

    Returns:
        WeightMatrix
    """
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas <= 0):
        raise ValueError(f"composite variances must be > 0, got: {gammas}")
    n = gammas.size
    A = np.zeros((n, n))
    for k, members in enumerate(_as_sets(sets, n)):
        if k not in members:
            raise ValueError(f"information set of node {k} must contain the node itself")
        rows = sorted(members)
        inverse = 1.0 / gammas[rows]
        A[rows, k] = inverse / inverse.sum()
        A[:, k] /= A[:, k].sum()
    return WeightMatrix(A)


def uniform_weights(sets: InfoSets, n: int) -> WeightMatrix:
    """Equal weights over every information set."""
    return balancing_weights(sets, np.ones(n))


def relative_variance_gammas(profiles: Sequence[NodeProfile]) -> np.ndarray:
    """Composite variances at alpha = 1 (pure steady-state noise power)."""
    return composite_variances(profiles, 1.0)


@dataclass
class AdaptiveVarState:
    """Moving-average variance estimates, arrays over (..., N)."""

    gamma1: np.ndarray
    R_hat: np.ndarray
    gamma: np.ndarray

    @classmethod
    def zeros(cls, runs: int, n: int, m: int) -> "AdaptiveVarState":
        return cls(
            gamma1=np.zeros((runs, n)),
            R_hat=np.zeros((runs, n, m, m)),
            gamma=np.zeros((runs, n)),
        )


def update_adaptive_state(state: AdaptiveVarState, psi: np.ndarray, omega_prev: np.ndarray,
                          u: np.ndarray, profiles: Union[NodeProfile, Sequence[NodeProfile]],
                          alpha_hat: float = DIFFUSION_CONFIG["alpha_hat"]) -> AdaptiveVarState:
    """
    One step of the moving-average composite variance estimates (in place).

    Args:
        state: Current estimates
        psi: Intermediate estimates, shape (..., N, M)
        omega_prev: Previous estimates, shape (..., N, M)
        u: Regressors, shape (..., N, M)
        profiles: Node profile(s) providing mu and nu
        alpha_hat: Blend coefficient in [0, 1]

    Returns:
        The updated state
    """
    if not 0.0 <= alpha_hat <= 1.0:
        raise ValueError(f"alpha_hat must be in [0, 1], got: {alpha_hat}")
    if isinstance(profiles, NodeProfile):
        profiles = [profiles]
    mu = np.array([p.mu for p in profiles])
    nu = np.array([p.nu for p in profiles])

    step = psi - omega_prev
    state.gamma1 *= 1.0 - nu
    state.gamma1 += nu * np.sum(step * step, axis=-1)

    state.R_hat *= (1.0 - nu)[:, None, None]
    state.R_hat += nu[:, None, None] * (u[..., :, None] * u[..., None, :])

    m = state.R_hat.shape[-1]
    contraction = np.eye(m) - mu[:, None, None] * state.R_hat
    gamma2 = np.sum(contraction * contraction, axis=(-2, -1))

    state.gamma = alpha_hat * state.gamma1 + (1.0 - alpha_hat) * gamma2
    return state


def adaptive_weights(gamma_hat: Sequence[float]) -> np.ndarray:
    """
    Adaptive balancing column over one information set.

    Args:
        gamma_hat: Estimated composite variances of the set members

    Returns:
        Weights in the same order; uniform while any estimate is still zero
    """
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    if np.any(gamma_hat <= 0):
        return np.full(gamma_hat.size, 1.0 / gamma_hat.size)
    inverse = 1.0 / gamma_hat
    return inverse / inverse.sum()


def adaptive_weight_tensor(gamma_hat: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """
    Vectorized adaptive weights for every run and node.

    Args:
        gamma_hat: Composite variance estimate per run and origin, shape (R, N),
            or per run, origin and consulting node, shape (R, N, N) indexed [r, l, k]
        mask: mask[r, l, k] True when k combines l's estimate, shape (R, N, N) or (N, N)

    Returns:
        Weights W[r, l, k], column-stochastic over the mask
    """
    gamma = gamma_hat[:, :, None] if gamma_hat.ndim == 2 else gamma_hat
    mask = np.broadcast_to(mask, (gamma.shape[0],) + mask.shape[-2:])
    warm = gamma > 0
    with np.errstate(divide="ignore"):
        inverse = np.where(warm, 1.0 / np.where(warm, gamma, 1.0), 0.0)

    weights = np.where(mask, inverse, 0.0)
    # Columns that include a node without an estimate fall back to uniform.
    cold = np.any(mask & ~warm, axis=1)
    weights = np.where(cold[:, None, :], mask.astype(float), weights)
    return weights / weights.sum(axis=1, keepdims=True)
