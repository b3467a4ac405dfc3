"""Estimate exchange between nodes within one diffusion iteration.

Arrays carry a leading run axis r. Relay and reception maps are indexed
[r, l, k]: origin l, holding / forwarding node k.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from mhdiffusion.core.optimizer import NeighborSelection
from mhdiffusion.core.topology import Network
from mhdiffusion.core.weights import adaptive_weight_tensor

NO_PATH = -1


def plan_broadcasts(sel: NeighborSelection) -> np.ndarray:
    """Broadcasts per node and iteration under a static plan."""
    return sel.pi.sum(axis=0)


def energy_ledger(broadcasts: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """
    Energy spent per node: broadcast cost times number of broadcasts.

    Args:
        broadcasts: Broadcast counts, shape (N,) or (R, N)
        costs: Per-node broadcast cost, shape (N,)

    Returns:
        Energy with the shape of broadcasts
    """
    return np.asarray(broadcasts, dtype=float) * np.asarray(costs, dtype=float)


def broadcast_capacity(budgets: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Broadcasts a node can afford per iteration, capped at the node count."""
    budgets = np.asarray(budgets, dtype=float)
    costs = np.asarray(costs, dtype=float)
    n = budgets.size
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(costs > 0, np.floor(budgets / np.where(costs > 0, costs, 1.0) + 1e-9), np.inf)
    return np.minimum(ratio, n).astype(int)


def relay_hops(net: Network, pi: np.ndarray) -> np.ndarray:
    """
    Hops every estimate travels along a plan's relay chains.

    Args:
        net: Network
        pi: Relay map pi[l, k] of a plan

    Returns:
        hops[l, k]: 0 on the diagonal, NO_PATH where k never receives l's estimate
    """
    n = net.node_count
    hops = np.full((n, n), NO_PATH, dtype=int)
    for l in range(n):
        hops[l, l] = 0
        frontier = [l]
        depth = 0
        while frontier:
            depth += 1
            nxt = []
            for node in frontier:
                if not pi[l, node]:
                    continue
                for j in sorted(net.index.direct_reach[node]):
                    if hops[l, j] == NO_PATH:
                        hops[l, j] = depth
                        nxt.append(j)
            frontier = nxt
    return hops


def plan_delays(sel: NeighborSelection, net: Network) -> np.ndarray:
    """Combination delay of every consulted estimate: (hops - 1) iterations, 0 on the diagonal."""
    hops = relay_hops(net, sel.pi)
    unserved = sel.delta & (hops == NO_PATH)
    if np.any(unserved):
        l, k = np.argwhere(unserved)[0]
        raise ValueError(f"node {k} consults {l} but no relay chain delivers it")
    return np.where(sel.delta, np.maximum(hops - 1, 0), 0)


class DelayBuffer:
    """Ring buffer of the most recent intermediate estimates."""

    def __init__(self, depth: int, shape: tuple):
        self.depth = int(depth)
        self._data = np.zeros((self.depth + 1,) + tuple(shape))
        self._head = -1
        self.pushed = 0

    def push(self, psi: np.ndarray):
        self._head = (self._head + 1) % (self.depth + 1)
        self._data[self._head] = psi
        self.pushed += 1

    def available(self, delay: int) -> bool:
        return 0 <= delay <= self.depth and delay < self.pushed

    def get(self, delay: int) -> Optional[np.ndarray]:
        """Estimates pushed `delay` iterations ago, None when not yet available."""
        if not self.available(delay):
            return None
        return self._data[(self._head - delay) % (self.depth + 1)]


def combine_async(buffer: DelayBuffer, weights: np.ndarray, delays: np.ndarray) -> np.ndarray:
    """
    Combine whatever estimates have arrived.

    An estimate from a j-hop neighbor is combined j-1 iterations after it was
    produced. Columns with estimates still in flight are renormalized over
    the arrived subset.

    Args:
        buffer: Intermediate estimates of the current and past iterations
        weights: Static combination weights a[l, k]
        delays: Combination delay per link, shape (N, N)

    Returns:
        Combined estimates, shape (R, N, M)
    """
    combined = None
    arrived = np.zeros(weights.shape)
    for delay in np.unique(delays[weights > 0]):
        psi = buffer.get(int(delay))
        if psi is None:
            continue
        part = weights * (delays == delay)
        arrived += part
        term = np.einsum("lk,rlm->rkm", part, psi)
        combined = term if combined is None else combined + term

    total = arrived.sum(axis=0)
    missing = ~np.isclose(total, weights.sum(axis=0), rtol=0.0, atol=1e-15)
    if np.any(missing):
        scale = np.where(missing, 1.0 / np.where(total > 0, total, 1.0), 1.0)
        combined = combined * scale[None, :, None]
    return combined


@dataclass
class RelayState:
    """What every node received in the previous iteration.

    Attributes:
        received: received[r, l, k] True when k held l's estimate (l != k)
        hops: Hops the held copy travelled, shape (R, N, N)
        gamma: Composite variance estimate carried with the copy, shape (R, N, N)
        psi: Carried intermediate estimate (asynchronous mode only), shape (R, N, N, M)
    """

    received: np.ndarray
    hops: np.ndarray
    gamma: np.ndarray
    psi: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, runs: int, n: int, m: Optional[int] = None) -> "RelayState":
        return cls(
            received=np.zeros((runs, n, n), dtype=bool),
            hops=np.zeros((runs, n, n), dtype=int),
            gamma=np.zeros((runs, n, n)),
            psi=None if m is None else np.zeros((runs, n, n, m)),
        )


@dataclass
class ExchangeResult:
    """Decisions and outcome of one exchange."""

    relays: np.ndarray  # relays[r, l, k]: k broadcast l's estimate (own included)
    broadcasts: np.ndarray  # (R, N)
    mask: np.ndarray  # mask[r, l, k]: k combined l's estimate
    estimates: np.ndarray  # (R, N, M)


def _select_relays(state: RelayState, capacity: np.ndarray, h: int, can_send: np.ndarray) -> tuple:
    """Own broadcast first, then the smallest previous variances (lowest origin on ties)."""
    own = (capacity >= 1) & can_send
    remaining = np.where(can_send, capacity - own, 0)

    candidates = state.received & (state.hops <= h - 1)
    key = np.where(candidates, state.gamma, np.inf)
    order = np.argsort(key, axis=1, kind="stable")
    rank = np.argsort(order, axis=1, kind="stable")
    chosen = candidates & (rank < remaining[None, None, :])
    return own, chosen


def _spread(senders: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """reached[r, l, k]: some node j sending l's estimate transmits to k."""
    return np.einsum("rlj,jk->rlk", senders.astype(float), adjacency.astype(float)) > 0


def algorithm2_step(state: RelayState, psi: np.ndarray, gamma_hat: np.ndarray,
                    capacity: np.ndarray, h: int, net: Network) -> ExchangeResult:
    """
    One synchronous round of budget-driven relay selection and adaptive combination.

    Every node broadcasts its own (psi, gamma) when it can afford one
    broadcast, then rebroadcasts up to its remaining capacity the estimates it
    received last iteration from at most h-1 hops away whose carried
    variances were smallest. Relaying completes within the iteration; a node
    forwards an estimate only if it actually holds it this iteration.

    Args:
        state: Receptions of the previous iteration (updated in place)
        psi: Intermediate estimates, shape (R, N, M)
        gamma_hat: Composite variance estimates, shape (R, N)
        capacity: Broadcasts each node can afford, shape (N,)
        h: Max consultation hops
        net: Network

    Returns:
        ExchangeResult
    """
    runs, n, _ = psi.shape
    adjacency = net.adjacency
    can_send = adjacency.any(axis=1)
    eye = np.eye(n, dtype=bool)

    own, chosen = _select_relays(state, capacity, h, can_send)

    held = np.broadcast_to(eye, (runs, n, n)).copy()
    hops = np.where(held, 0, NO_PATH)
    relays = np.zeros((runs, n, n), dtype=bool)
    senders = np.broadcast_to(eye & own[None, :], (runs, n, n)).copy()
    relays |= senders

    for stage in range(1, h + 1):
        fresh = _spread(senders, adjacency) & ~held
        held |= fresh
        hops = np.where(fresh, stage, hops)
        if stage == h:
            break
        senders = fresh & chosen
        relays |= senders

    mask = held
    weights = adaptive_weight_tensor(gamma_hat, mask)
    estimates = np.einsum("rlk,rlm->rkm", weights, psi)

    state.received = held & ~eye
    state.hops = hops
    state.gamma = np.broadcast_to(gamma_hat[:, :, None], (runs, n, n)).copy()
    return ExchangeResult(relays=relays, broadcasts=relays.sum(axis=1), mask=mask, estimates=estimates)


def algorithm2_async_step(state: RelayState, psi: np.ndarray, gamma_hat: np.ndarray,
                          capacity: np.ndarray, h: int, net: Network) -> ExchangeResult:
    """
    Asynchronous round: relayed messages travel one hop per iteration.

    Own broadcasts arrive at one hop with the current (psi, gamma). Relays
    forward copies from their previous inbox, so a j-hop copy is j-1
    iterations old. When several copies of an origin arrive, the one with the
    fewest hops (then the lowest relay index) is kept. Each node combines its
    current own estimate with the copies that arrived this iteration.

    Args:
        state: Inbox of the previous iteration, with carried psi (updated in place)
        psi: Intermediate estimates, shape (R, N, M)
        gamma_hat: Composite variance estimates, shape (R, N)
        capacity: Broadcasts each node can afford, shape (N,)
        h: Max consultation hops
        net: Network

    Returns:
        ExchangeResult
    """
    runs, n, m = psi.shape
    adjacency = net.adjacency
    can_send = adjacency.any(axis=1)
    eye = np.eye(n, dtype=bool)
    if state.psi is None:
        state.psi = np.zeros((runs, n, n, m))

    own, chosen = _select_relays(state, capacity, h, can_send)

    received = np.zeros((runs, n, n), dtype=bool)
    hops = np.full((runs, n, n), np.iinfo(np.int64).max // 2, dtype=np.int64)
    carried_psi = np.zeros((runs, n, n, m))
    carried_gamma = np.zeros((runs, n, n))

    # Own broadcasts: one hop, current payload.
    own_links = own[:, None] & adjacency
    received |= own_links[None, :, :]
    hops = np.where(own_links[None], 1, hops)
    carried_psi = np.where(own_links[None, :, :, None], psi[:, :, None, :], carried_psi)
    carried_gamma = np.where(own_links[None], gamma_hat[:, :, None], carried_gamma)

    # Relayed copies from each relay in ascending order; only strictly fewer hops replace.
    for relay in range(n):
        forwarded = chosen[:, :, relay]
        if not forwarded.any():
            continue
        targets = adjacency[relay]
        arriving = forwarded[:, :, None] & targets[None, None, :] & ~eye[None]
        new_hops = state.hops[:, :, relay][:, :, None] + 1
        better = arriving & (new_hops < hops)
        received |= better
        hops = np.where(better, new_hops, hops)
        carried_psi = np.where(better[..., None], state.psi[:, :, relay, None, :], carried_psi)
        carried_gamma = np.where(better, state.gamma[:, :, relay][:, :, None], carried_gamma)

    relays = np.broadcast_to(eye & own[None, :], (runs, n, n)) | chosen
    mask = received | eye
    gamma = np.where(eye[None], gamma_hat[:, :, None], carried_gamma)
    weights = adaptive_weight_tensor(gamma, mask)
    payload = np.where(eye[None, :, :, None], psi[:, :, None, :], carried_psi)
    estimates = np.einsum("rlk,rlkm->rkm", weights, payload)

    state.received = received
    state.hops = np.where(received, hops, 0)
    state.gamma = carried_gamma
    state.psi = carried_psi
    return ExchangeResult(relays=relays, broadcasts=relays.sum(axis=1), mask=mask, estimates=estimates)
