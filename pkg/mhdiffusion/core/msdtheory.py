"""Closed-form mean-square deviation analysis of diffusion networks.

All network MSD figures use the uniform weighting Sigma = I/N. Estimates start
at zero, so the initial error of every node equals w_true.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from mhdiffusion.config import SIMULATION_CONFIG, SOLVER_CONFIG
from mhdiffusion.core.datamodel import BlockMatrices, NodeProfile
from mhdiffusion.core.weights import WeightMatrix
from mhdiffusion.exceptions import NumericalError
from mhdiffusion.utils.helpers import to_db

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ErrorDynamics:
    """Error recursion matrices: B = A^T (I - MR), Y = A^T M S M A (A = A (x) I_M)."""

    B: np.ndarray
    Y: np.ndarray
    Omega_init: np.ndarray
    N: int
    M: int


@dataclass(frozen=True)
class MsdBounds:
    """Upper bounds on the steady-state network MSD (+inf when a denominator is <= 0)."""

    msd_bar: float
    msd_a: float
    msd_b: float
    r1: float
    r2: float


@dataclass(frozen=True)
class ConvergenceStats:
    """Convergence summary of one MSD trace."""

    rate_db: float
    iterations: int
    energy: float
    steady_state: float

    @property
    def steady_state_db(self) -> float:
        return float(to_db(self.steady_state))


@dataclass
class MsdTrace:
    """Per-iteration network MSD (linear) with the energy spent each iteration.

    Attributes:
        msd: Network MSD per iteration
        energy: Network energy spent per iteration (zeros for theory traces)
        label: Strategy / source label
        node_msd: Optional per-node MSD, shape (iterations, N)
        runs: Monte Carlo runs averaged (0 for theory)
    """

    msd: np.ndarray
    energy: Optional[np.ndarray] = None
    label: str = ""
    node_msd: Optional[np.ndarray] = None
    runs: int = 0

    def __post_init__(self):
        self.msd = np.asarray(self.msd, dtype=float)
        if self.energy is None:
            self.energy = np.zeros_like(self.msd)
        self.energy = np.asarray(self.energy, dtype=float)
        if self.energy.shape != self.msd.shape:
            raise ValueError(f"energy has {self.energy.size} entries for {self.msd.size} iterations")
        if self.node_msd is not None and self.node_msd.shape[0] != self.msd.size:
            raise ValueError("node_msd must have one row per iteration")

    @property
    def iterations(self) -> int:
        return self.msd.size

    @property
    def msd_db(self) -> np.ndarray:
        return to_db(self.msd)

    @property
    def energy_cum(self) -> np.ndarray:
        return np.cumsum(self.energy)

    @property
    def steady_state(self) -> float:
        return steady_state_value(self.msd)

    @property
    def steady_state_db(self) -> float:
        return float(to_db(self.steady_state))

    @property
    def convergence_rate(self) -> float:
        return convergence_rate(self)


def steady_state_value(series: np.ndarray,
                       tail_fraction: float = SIMULATION_CONFIG["steady_tail_fraction"]) -> float:
    """Mean of the last tail_fraction of a series (at least one sample)."""
    series = np.asarray(series, dtype=float)
    start = min(int(np.floor(series.size * (1.0 - tail_fraction))), series.size - 1)
    return float(np.mean(series[start:]))


def build_dynamics(weights: Union[WeightMatrix, np.ndarray], blocks: BlockMatrices,
                   w_true: np.ndarray) -> ErrorDynamics:
    """
    Error recursion matrices for a combination matrix.

    Args:
        weights: Combination matrix (N x N)
        blocks: Block matrices of the model
        w_true: True parameter vector (initial error of every node)

    Returns:
        ErrorDynamics
    """
    A = weights.A if isinstance(weights, WeightMatrix) else np.asarray(weights, dtype=float)
    n, m = blocks.N, blocks.M
    if A.shape != (n, n):
        raise ValueError(f"combination matrix is {A.shape}, model has {n} nodes")
    w_true = np.asarray(w_true, dtype=float).reshape(-1)
    if w_true.size != m:
        raise ValueError(f"w_true has {w_true.size} entries, model has M={m}")

    big_a = np.kron(A, np.eye(m))
    B = big_a.T @ (np.eye(n * m) - blocks.Mstep @ blocks.Rblk)
    Y = big_a.T @ blocks.Mstep @ blocks.Sblk @ blocks.Mstep @ big_a
    Y = 0.5 * (Y + Y.T)
    initial_error = np.kron(np.ones(n), w_true)
    return ErrorDynamics(B=B, Y=Y, Omega_init=np.outer(initial_error, initial_error), N=n, M=m)


def transient_msd(dyn: ErrorDynamics, iters: int,
                  divergence_limit: float = SIMULATION_CONFIG["divergence_limit"]) -> MsdTrace:
    """
    Theoretical network MSD for iterations 0..iters-1.

    Keeps W_i = B^T^i Sigma B^i and accumulates
    MSD_i = MSD_{i-1} + Tr(W_i Y) - Tr((W_i - W_{i+1}) Omega).

    Args:
        dyn: Error dynamics
        iters: Number of iterations

    Returns:
        MsdTrace labelled "theory"

    Raises:
        NumericalError: MSD exceeds the divergence limit
    """
    if iters < 0:
        raise ValueError(f"iters must be >= 0, got: {iters}")
    W = np.eye(dyn.B.shape[0]) / dyn.N
    msd_prev = float(np.sum(W * dyn.Omega_init))
    out = np.empty(iters)

    for i in range(iters):
        W_next = dyn.B.T @ W @ dyn.B
        msd_prev = msd_prev + float(np.sum(W * dyn.Y)) - float(np.sum((W - W_next) * dyn.Omega_init))
        if not np.isfinite(msd_prev) or msd_prev > divergence_limit:
            raise NumericalError(f"theoretical MSD diverged at iteration {i}")
        out[i] = msd_prev
        W = W_next

    return MsdTrace(msd=out, label="theory")


def spectral_radius(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def steady_state_msd(dyn: ErrorDynamics, tol: float = SOLVER_CONFIG["lyapunov_tol"],
                     max_iter: int = SOLVER_CONFIG["lyapunov_max_iter"]) -> float:
    """
    Steady-state network MSD Tr(X)/N where X = B X B^T + Y.

    Fixed-point iteration in doubling form: X <- X + G X G^T, G <- G^2, which
    sums the series sum_j B^j Y B^T^j in blocks of doubling length.

    Args:
        dyn: Error dynamics
        tol: Relative tolerance on the update
        max_iter: Iteration cap

    Returns:
        Steady-state MSD (linear)

    Raises:
        NumericalError: rho(B) >= 1 or no convergence within max_iter
    """
    rho = spectral_radius(dyn.B)
    if rho >= 1.0:
        raise NumericalError(f"error recursion is unstable (spectral radius {rho:.6f} >= 1)")

    X = dyn.Y.copy()
    G = dyn.B.copy()
    for step in range(max_iter):
        update = G @ X @ G.T
        X = X + update
        G = G @ G
        if np.linalg.norm(update) <= tol * max(1.0, np.linalg.norm(X)):
            logger.debug(f"Lyapunov fixed point reached after {step + 1} doubling steps")
            return float(np.trace(X)) / dyn.N

    raise NumericalError(f"Lyapunov iteration did not converge in {max_iter} steps")


def msd_bounds(dyn: ErrorDynamics, blocks: BlockMatrices) -> MsdBounds:
    """
    Upper bounds on the steady-state MSD.

    msd_bar = M lmax(Y) / (1 - lmax(B B^T))
    msd_a   = M Tr(Y) / (1 - r1^2),   r1 = rho(I - MR)
    msd_b   = M r2 / (1 - Tr(B B^T)), r2 = lmax(M S M)

    Args:
        dyn: Error dynamics
        blocks: Block matrices

    Returns:
        MsdBounds (+inf where a denominator is <= 0)
    """
    m = dyn.M
    nm = dyn.B.shape[0]
    bbt = dyn.B @ dyn.B.T
    lmax_bbt = float(np.linalg.eigvalsh(0.5 * (bbt + bbt.T))[-1])
    lmax_y = float(np.linalg.eigvalsh(dyn.Y)[-1])

    r1 = spectral_radius(np.eye(nm) - blocks.Mstep @ blocks.Rblk)
    msm = blocks.Mstep @ blocks.Sblk @ blocks.Mstep
    r2 = float(np.linalg.eigvalsh(0.5 * (msm + msm.T))[-1])

    def ratio(numerator: float, denominator: float) -> float:
        return numerator / denominator if denominator > 0 else float("inf")

    return MsdBounds(
        msd_bar=ratio(m * lmax_y, 1.0 - lmax_bbt),
        msd_a=ratio(m * float(np.trace(dyn.Y)), 1.0 - r1 ** 2),
        msd_b=ratio(m * r2, 1.0 - float(np.trace(bbt))),
        r1=r1,
        r2=r2,
    )


def stability_check(profiles: Sequence[NodeProfile]) -> np.ndarray:
    """Per-node mean stability: mu_k < 2 / lambda_max(R_k)."""
    return np.array([p.mu < 2.0 / p.lambda_max for p in profiles], dtype=bool)


def convergence_stats(trace: MsdTrace,
                      fraction: float = SIMULATION_CONFIG["convergence_fraction"],
                      tail_fraction: float = SIMULATION_CONFIG["steady_tail_fraction"]) -> ConvergenceStats:
    """
    Convergence time, rate and energy of an MSD trace.

    T is the first iteration where the MSD has covered `fraction` of its total
    decrease toward the steady state (tail mean). The rate is the dB decrease
    up to T divided by T.

    Args:
        trace: MSD trace
        fraction: Share of the total decrease defining convergence
        tail_fraction: Tail share for the steady-state estimate

    Returns:
        ConvergenceStats

    Raises:
        NumericalError: trace does not decrease, or its end has not settled
    """
    msd = trace.msd
    if msd.size < 2:
        raise NumericalError("trace too short for a convergence rate")
    steady = steady_state_value(msd, tail_fraction)
    decrease = msd[0] - steady
    if not decrease > 0:
        raise NumericalError(f"trace '{trace.label}' does not decrease toward a steady state")
    # Settled: final sample within 1% of the tail mean.
    if abs(msd[-1] - steady) > 0.01 * steady:
        raise NumericalError(f"trace '{trace.label}' has not converged")

    reached = np.flatnonzero(msd[0] - msd >= fraction * decrease)
    T = int(reached[0])
    msd_db = trace.msd_db
    rate = float((msd_db[0] - msd_db[T]) / T)
    return ConvergenceStats(rate_db=rate, iterations=T,
                            energy=float(trace.energy_cum[T]), steady_state=steady)


def convergence_rate(trace: MsdTrace) -> float:
    """dB decrease per iteration until 90% of the total decrease is covered."""
    return convergence_stats(trace).rate_db
