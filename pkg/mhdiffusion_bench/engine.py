"""Monte Carlo diffusion engine.

This module coordinates:
1. Resolving a strategy into combination weights, relay rules and an energy ledger
2. Running independent Monte Carlo runs in fixed-size chunks (optionally in parallel)
3. Applying scripted change events before sampling
4. Reducing per-node squared deviations into an MSD trace
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from mhdiffusion.config import DIFFUSION_CONFIG, SIMULATION_CONFIG
from mhdiffusion.core.datamodel import GlobalModel, build_blocks, composite_variances, generate_batch
from mhdiffusion.core.milp import Budgets
from mhdiffusion.core.msdtheory import (
    MsdTrace,
    build_dynamics,
    stability_check,
    steady_state_msd,
    transient_msd,
)
from mhdiffusion.core.optimizer import (
    NeighborSelection,
    diagonal_selection,
    full_consultation_selection,
    one_hop_selection,
    verify_feasible,
)
from mhdiffusion.core.topology import Network
from mhdiffusion.core.weights import (
    AdaptiveVarState,
    adaptive_weight_tensor,
    balancing_weights,
    relative_variance_gammas,
    uniform_weights,
    update_adaptive_state,
)
from mhdiffusion.exceptions import ConfigError, InfeasibleError, NumericalError
from mhdiffusion.utils.logger import log_run_details
from mhdiffusion.utils.monitor import monitor

from .config import ChangeEvent, StrategyConfig
from .exchange import (
    DelayBuffer,
    RelayState,
    algorithm2_async_step,
    algorithm2_step,
    broadcast_capacity,
    combine_async,
    energy_ledger,
    plan_broadcasts,
    plan_delays,
)
from .scenario import balancing_alpha, optimize_plan

MODES = ("noncoop", "static", "static_async", "adaptive_static", "algorithm2")


@dataclass
class StrategyPlan:
    """A strategy resolved into everything a worker needs.

    Attributes:
        label: Strategy label
        mode: One of MODES
        weights: Static combination matrix a[l, k] (static modes)
        mask: Information sets mask[l, k] (adaptive_static)
        delays: Combination delay per link (static_async)
        energy: Per-node energy per iteration of a static plan
        selection: Static plan behind the weights, when there is one
        h: Max consultation hops (algorithm2)
        asynchronous: One hop per iteration for relayed messages (algorithm2)
        alpha_hat: Blend of the adaptive variance estimates
    """

    label: str
    mode: str
    weights: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None
    delays: Optional[np.ndarray] = None
    energy: Optional[np.ndarray] = None
    selection: Optional[NeighborSelection] = None
    h: int = 1
    asynchronous: bool = False
    alpha_hat: float = DIFFUSION_CONFIG["alpha_hat"]

    @property
    def is_adaptive(self) -> bool:
        return self.mode in ("adaptive_static", "algorithm2")

    @property
    def has_theory(self) -> bool:
        """Static synchronous weights admit the closed-form MSD recursion."""
        return self.mode in ("noncoop", "static")


def apply_event(model: GlobalModel, event: ChangeEvent) -> GlobalModel:
    """
    Model after a scripted change.

    Args:
        model: Current model
        event: Change event

    Returns:
        New GlobalModel

    Raises:
        ConfigError: payload does not fit the model
    """
    try:
        if event.action == "set_w_true":
            return model.with_w_true(np.asarray(event.payload, dtype=float))
        if event.action == "scale_noise":
            return model.with_noise_scale(float(event.payload))
        if event.action == "set_budgets":
            payload = event.payload
            if payload is None or np.isscalar(payload):
                payload = [payload] * model.N
            return model.with_budgets(local=[float("inf") if c is None else float(c) for c in payload])
        if event.action == "scale_budgets":
            return model.with_budgets(local=model.local_budgets * float(event.payload))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"event at iteration {event.at_iteration} ({event.action}): {e}") from e
    raise ConfigError(f"unknown event action '{event.action}'")


def _static_weights(model: GlobalModel, sel: NeighborSelection, strategy: StrategyConfig,
                    alpha: float) -> np.ndarray:
    sets = sel.info_sets()
    if strategy.weight_rule == "uniform":
        return uniform_weights(sets, model.N).A
    if strategy.weight_rule == "relative_variance":
        return balancing_weights(sets, relative_variance_gammas(model.profiles)).A
    return balancing_weights(sets, composite_variances(model.profiles, alpha)).A


def resolve_strategy(model: GlobalModel, net: Network, strategy: StrategyConfig,
                     plan: Optional[NeighborSelection] = None, alpha: Optional[float] = None,
                     logger: Optional[logging.Logger] = None) -> StrategyPlan:
    """
    Resolve a strategy into weights, relay rules and energy ledger.

    Args:
        model: Global model at iteration 0
        net: Network
        strategy: Strategy configuration
        plan: Plan for matc / matc_async (computed from the model when omitted
            and the strategy carries no inline plan)
        alpha: Balancing coefficient when the strategy has none (LMI-optimal when None)
        logger: Optional logger instance

    Returns:
        StrategyPlan

    Raises:
        InfeasibleError: the plan breaks a budget or a relay path
        ConfigError: strategy requirements not met by the model
    """
    logger = logger or logging.getLogger(__name__)
    alpha_hat = strategy.alpha if strategy.alpha is not None else DIFFUSION_CONFIG["alpha_hat"]

    if strategy.kind in ("catc", "adaptive_matc"):
        if strategy.kind == "adaptive_matc" and not np.all(np.isfinite(model.local_budgets)):
            raise ConfigError("adaptive_matc needs a finite local budget at every node")
        if np.isfinite(model.network_budget):
            logger.warning(f"{strategy.label}: network budget ignored, relaying is limited by local budgets")
        return StrategyPlan(
            label=strategy.label,
            mode="algorithm2",
            h=1 if strategy.kind == "catc" else strategy.h,
            asynchronous=strategy.asynchronous,
            alpha_hat=alpha_hat,
        )

    if strategy.kind == "noncoop":
        sel = None
    elif strategy.kind == "atc":
        sel = one_hop_selection(net, np.ones(model.N))
    elif strategy.kind == "centralized":
        sel = full_consultation_selection(net, np.ones(model.N))
    else:
        sel = plan
        if sel is None and strategy.plan is not None:
            sel = NeighborSelection.from_dict(strategy.plan, net.costs, np.ones(model.N), source=strategy.label)
        if sel is None and strategy.plan_file is not None:
            sel = NeighborSelection.from_json(strategy.plan_file, net.costs, np.ones(model.N))
        if sel is None:
            sel = optimize_plan(model, net, strategy.variant, strategy.method,
                                alpha=strategy.alpha if strategy.alpha is not None else alpha, logger=logger)
        report = verify_feasible(sel, net, Budgets.from_model(model), None if sel.variant == "none" else sel.variant)
        if not report:
            raise InfeasibleError(f"{strategy.label}: plan is infeasible", violations=report.violations)

    if sel is None:
        n = model.N
        return StrategyPlan(label=strategy.label, mode="noncoop", weights=np.eye(n),
                            energy=np.zeros(n), selection=diagonal_selection(net, np.ones(n)),
                            alpha_hat=alpha_hat)

    energy = energy_ledger(plan_broadcasts(sel), net.costs)
    if strategy.weight_rule == "adaptive_balancing":
        return StrategyPlan(label=strategy.label, mode="adaptive_static", mask=sel.delta.copy(),
                            energy=energy, selection=sel, alpha_hat=alpha_hat)

    need_alpha = strategy.weight_rule == "balancing"
    alpha = balancing_alpha(model, strategy.alpha if strategy.alpha is not None else alpha) if need_alpha else 1.0
    weights = _static_weights(model, sel, strategy, alpha)
    if strategy.kind == "matc_async":
        return StrategyPlan(label=strategy.label, mode="static_async", weights=weights,
                            delays=plan_delays(sel, net), energy=energy, selection=sel, alpha_hat=alpha_hat)
    return StrategyPlan(label=strategy.label, mode="static", weights=weights, energy=energy,
                        selection=sel, alpha_hat=alpha_hat)


@dataclass
class ChunkTask:
    """One block of independent runs with its own random stream."""

    model: GlobalModel
    net: Network
    plan: StrategyPlan
    events: List[ChangeEvent]
    iterations: int
    runs: int
    seed: int
    index: int
    divergence_limit: float = SIMULATION_CONFIG["divergence_limit"]


@dataclass
class ChunkResult:
    index: int
    msd_sum: np.ndarray  # (iterations, N): squared deviations summed over runs
    energy_sum: np.ndarray  # (iterations,): network energy summed over runs
    broadcast_sum: Optional[np.ndarray] = None  # (N,): broadcasts summed over runs and iterations


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    """Random stream of one chunk, keyed by (seed, chunk index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def simulate_chunk(task: ChunkTask) -> ChunkResult:
    """
    Run one chunk of independent Monte Carlo runs.

    Each iteration: apply due events, draw data, adapt
    psi = w + mu u (d - u.w), exchange, combine.

    Args:
        task: Chunk description

    Returns:
        ChunkResult with sums over the chunk's runs

    Raises:
        NumericalError: network MSD of the chunk exceeds the divergence limit
    """
    model, net, plan = task.model, task.net, task.plan
    rng = chunk_rng(task.seed, task.index)
    runs, n, m = task.runs, model.N, model.M

    omega = np.zeros((runs, n, m))
    adaptive = AdaptiveVarState.zeros(runs, n, m) if plan.is_adaptive else None
    relay_state = RelayState.empty(runs, n, m if plan.asynchronous else None)
    buffer = None
    if plan.mode == "static_async":
        buffer = DelayBuffer(int(plan.delays.max(initial=0)), (runs, n, m))
    capacity = broadcast_capacity(model.local_budgets, net.costs)

    msd_sum = np.zeros((task.iterations, n))
    energy_sum = np.zeros(task.iterations)
    broadcast_sum = np.zeros(n)
    pending = list(task.events)

    for i in range(task.iterations):
        while pending and pending[0].at_iteration == i:
            model = apply_event(model, pending.pop(0))
            capacity = broadcast_capacity(model.local_budgets, net.costs)

        u, d = generate_batch(model.chol, model.sigma_v2, model.w_true, rng, runs)
        error = d - np.einsum("rnm,rnm->rn", u, omega)
        psi = omega + model.mu[None, :, None] * u * error[:, :, None]

        if adaptive is not None:
            update_adaptive_state(adaptive, psi, omega, u, model.profiles, plan.alpha_hat)

        if plan.mode == "noncoop":
            omega = psi
        elif plan.mode == "static":
            omega = np.einsum("lk,rlm->rkm", plan.weights, psi)
        elif plan.mode == "static_async":
            buffer.push(psi)
            omega = combine_async(buffer, plan.weights, plan.delays)
        elif plan.mode == "adaptive_static":
            weights = adaptive_weight_tensor(adaptive.gamma, plan.mask)
            omega = np.einsum("rlk,rlm->rkm", weights, psi)
        else:
            step = algorithm2_async_step if plan.asynchronous else algorithm2_step
            result = step(relay_state, psi, adaptive.gamma, capacity, plan.h, net)
            omega = result.estimates
            energy_sum[i] = float(energy_ledger(result.broadcasts, net.costs).sum())
            broadcast_sum += result.broadcasts.sum(axis=0)

        deviation = model.w_true[None, None, :] - omega
        node_sq = np.sum(deviation * deviation, axis=2)
        msd_sum[i] = node_sq.sum(axis=0)

        network_msd = msd_sum[i].sum() / (runs * n)
        if not np.isfinite(network_msd) or network_msd > task.divergence_limit:
            raise NumericalError(f"{plan.label}: MSD diverged at iteration {i} ({network_msd:.3g})")

    if plan.mode != "algorithm2":
        energy_sum[:] = runs * float(plan.energy.sum())
        broadcast_sum = runs * task.iterations * plan_broadcasts(plan.selection).astype(float)
    return ChunkResult(index=task.index, msd_sum=msd_sum, energy_sum=energy_sum, broadcast_sum=broadcast_sum)


class SimulationEngine:
    """Monte Carlo engine for one strategy.

    Runs are split in chunks of chunk_size; chunk c draws from its own
    SeedSequence child, so traces do not depend on the worker count.
    """

    def __init__(
        self,
        model: GlobalModel,
        net: Network,
        strategy: StrategyConfig,
        iterations: int = SIMULATION_CONFIG["iterations"],
        runs: int = SIMULATION_CONFIG["runs"],
        seed: int = SIMULATION_CONFIG["seed"],
        events: Sequence[ChangeEvent] = (),
        chunk_size: int = SIMULATION_CONFIG["chunk_size"],
        n_jobs: int = SIMULATION_CONFIG["n_jobs"],
        plan: Optional[NeighborSelection] = None,
        alpha: Optional[float] = None,
        logger: Optional[logging.Logger] = None
    ):
        """Initialize simulation engine.

        Args:
            model: Global model at iteration 0
            net: Network
            strategy: Strategy to simulate
            iterations: Iterations per run
            runs: Independent runs averaged
            seed: Base seed
            events: Scripted change events
            chunk_size: Runs per chunk
            n_jobs: Parallel workers (-1 = all cores, 1 = sequential)
            plan: Precomputed plan for matc / matc_async
            alpha: Balancing coefficient when the strategy has none
            logger: Optional logger
        """
        if model.N != net.node_count:
            raise ValueError(f"model has {model.N} nodes, network has {net.node_count}")
        if iterations < 1 or runs < 1 or chunk_size < 1:
            raise ValueError("iterations, runs and chunk_size must be >= 1")

        self.model = model
        self.net = net
        self.strategy = strategy
        self.iterations = int(iterations)
        self.runs = int(runs)
        self.seed = int(seed)
        self.events = sorted(events, key=lambda e: e.at_iteration)
        self.chunk_size = int(chunk_size)
        self.n_jobs = int(n_jobs)
        self.alpha = alpha
        self.logger = logger or logging.getLogger(__name__)

        # Validate the script against the model before any run starts
        scripted = model
        for event in self.events:
            scripted = apply_event(scripted, event)

        self.plan = resolve_strategy(model, net, strategy, plan=plan, alpha=alpha, logger=self.logger)
        self.broadcasts_per_iteration: Optional[np.ndarray] = None

    def _tasks(self) -> List[ChunkTask]:
        tasks = []
        for index, start in enumerate(range(0, self.runs, self.chunk_size)):
            tasks.append(ChunkTask(
                model=self.model,
                net=self.net,
                plan=self.plan,
                events=list(self.events),
                iterations=self.iterations,
                runs=min(self.chunk_size, self.runs - start),
                seed=self.seed,
                index=index,
            ))
        return tasks

    def _run_sequential(self, tasks: List[ChunkTask]) -> List[ChunkResult]:
        results = []
        for task in tasks:
            with monitor.track("simulation_chunk", label=self.plan.label):
                results.append(simulate_chunk(task))
            self.logger.debug(f"[{task.index + 1}/{len(tasks)}] chunk of {task.runs} runs done")
        return results

    def _run_parallel(self, tasks: List[ChunkTask]) -> List[ChunkResult]:
        n_jobs = self.n_jobs
        if n_jobs == -1:
            n_jobs = os.cpu_count()
        self.logger.info(f"Running with {n_jobs} parallel workers")

        with monitor.track("simulation_parallel", label=self.plan.label, chunks=len(tasks)):
            with ProcessPoolExecutor(max_workers=n_jobs) as executor:
                results = list(executor.map(simulate_chunk, tasks))
        return results

    def run(self) -> MsdTrace:
        """Run the Monte Carlo simulation.

        Returns:
            MsdTrace with network MSD and network energy per iteration

        Raises:
            NumericalError: divergence beyond the limit
        """
        self.logger.info("=" * 70)
        self.logger.info(f"SIMULATION: {self.plan.label}")
        self.logger.info("=" * 70)
        self.logger.info(f"Mode: {self.plan.mode}")
        self.logger.info(f"Runs: {self.runs}, Iterations: {self.iterations}, Seed: {self.seed}")
        self.logger.info(f"Events: {len(self.events)}")
        self.logger.info("=" * 70)

        stable = stability_check(self.model.profiles)
        for k in np.flatnonzero(~stable):
            self.logger.warning(f"Node {k} is not mean stable (mu >= 2 / lambda_max); running anyway")

        tasks = self._tasks()
        if self.n_jobs == 1 or len(tasks) == 1:
            results = self._run_sequential(tasks)
        else:
            results = self._run_parallel(tasks)

        # Reduce in chunk order so the sums do not depend on completion order
        results.sort(key=lambda r: r.index)
        msd_sum = results[0].msd_sum.copy()
        energy_sum = results[0].energy_sum.copy()
        broadcast_sum = results[0].broadcast_sum.copy()
        for result in results[1:]:
            msd_sum += result.msd_sum
            energy_sum += result.energy_sum
            broadcast_sum += result.broadcast_sum

        node_msd = msd_sum / self.runs
        if self.plan.mode == "algorithm2":
            energy = energy_sum / self.runs
        else:
            energy = np.full(self.iterations, float(self.plan.energy.sum()))
        self.broadcasts_per_iteration = broadcast_sum / (self.runs * self.iterations)

        trace = MsdTrace(
            msd=node_msd.mean(axis=1),
            energy=energy,
            label=self.plan.label,
            node_msd=node_msd,
            runs=self.runs,
        )
        log_run_details(self.logger, "SIMULATION", {
            "label": trace.label,
            "runs": self.runs,
            "iterations": self.iterations,
            "steady_state_db": trace.steady_state_db,
        })
        return trace

    def theory(self) -> Tuple[Optional[MsdTrace], Optional[float]]:
        """
        Closed-form transient trace and steady-state MSD of the simulated weights.

        Only static synchronous weights without scripted events have a closed
        form; (None, None) otherwise, or when the recursion is unstable.
        """
        if not self.plan.has_theory or self.events:
            return None, None
        dyn = build_dynamics(self.plan.weights, build_blocks(self.model), self.model.w_true)
        try:
            trace = transient_msd(dyn, self.iterations)
            steady = steady_state_msd(dyn)
        except NumericalError as e:
            self.logger.warning(f"{self.plan.label}: no theoretical MSD ({e})")
            return None, None
        trace.label = f"{self.plan.label}_theory"
        return trace, steady


def run(model: GlobalModel, net: Network, strategy: StrategyConfig,
        iters: int = SIMULATION_CONFIG["iterations"], n_runs: int = SIMULATION_CONFIG["runs"],
        seed: int = SIMULATION_CONFIG["seed"], events: Sequence[ChangeEvent] = (),
        **kwargs) -> MsdTrace:
    """
    Simulate one strategy and return its MSD trace.

    Args:
        model: Global model
        net: Network
        strategy: Strategy configuration
        iters: Iterations per run
        n_runs: Independent runs
        seed: Base seed
        events: Scripted change events
        **kwargs: chunk_size, n_jobs, plan, alpha, logger

    Returns:
        MsdTrace
    """
    return SimulationEngine(model, net, strategy, iterations=iters, runs=n_runs, seed=seed,
                            events=events, **kwargs).run()


def noncoop_run(model: GlobalModel, net: Network, **kwargs) -> MsdTrace:
    """Every node adapts alone (A = I)."""
    return run(model, net, StrategyConfig(kind="noncoop"), **kwargs)


def centralized_run(model: GlobalModel, net: Network, **kwargs) -> MsdTrace:
    """Every node combines every estimate that can reach it."""
    return run(model, net, StrategyConfig(kind="centralized"), **kwargs)
