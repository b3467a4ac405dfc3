"""Statistical data model: node profiles, sample generation and block matrices."""

import json
import logging
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag

from mhdiffusion.config import DIFFUSION_CONFIG, SYNTH_CONFIG
from mhdiffusion.exceptions import ConfigError, NumericalError

logger = logging.getLogger(__name__)


def _budget(value: Optional[float]) -> float:
    """File/JSON budgets: null means unlimited."""
    return float("inf") if value is None else float(value)


def _budget_out(value: float) -> Optional[float]:
    return None if np.isinf(value) else float(value)


@dataclass(frozen=True, eq=False)
class NodeProfile:
    """Per-node statistics and adaptation parameters."""

    sigma_v2: float
    R_u: np.ndarray
    mu: float = DIFFUSION_CONFIG["mu"]
    nu: float = DIFFUSION_CONFIG["nu"]
    energy_budget: float = float("inf")

    def __post_init__(self):
        """Validate profile after initialization."""
        R_u = np.array(self.R_u, dtype=float, ndmin=2)
        if R_u.ndim != 2 or R_u.shape[0] != R_u.shape[1]:
            raise ValueError(f"R_u must be square, got shape {R_u.shape}")
        if not np.allclose(R_u, R_u.T, atol=1e-12):
            raise ValueError("R_u must be symmetric")
        if np.linalg.eigvalsh(R_u)[0] <= 0:
            raise ValueError("R_u must be positive definite")
        R_u.setflags(write=False)
        object.__setattr__(self, "R_u", R_u)

        if not self.sigma_v2 > 0:
            raise ValueError(f"sigma_v2 must be > 0, got: {self.sigma_v2}")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got: {self.mu}")
        if not 0 < self.nu < 1:
            raise ValueError(f"nu must be in (0, 1), got: {self.nu}")
        if self.energy_budget < 0:
            raise ValueError(f"energy_budget must be >= 0, got: {self.energy_budget}")

    @property
    def M(self) -> int:
        return self.R_u.shape[0]

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of R_u."""
        try:
            return np.linalg.cholesky(self.R_u)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"Cholesky factorization of R_u failed: {e}") from e

    @cached_property
    def lambda_max(self) -> float:
        return float(np.linalg.eigvalsh(self.R_u)[-1])


@dataclass(frozen=True, eq=False)
class GlobalModel:
    """Unknown parameter vector plus one profile per node."""

    w_true: np.ndarray
    profiles: Tuple[NodeProfile, ...]
    network_budget: float = float("inf")

    def __post_init__(self):
        """Validate model after initialization."""
        w_true = np.array(self.w_true, dtype=float).reshape(-1)
        w_true.setflags(write=False)
        object.__setattr__(self, "w_true", w_true)
        object.__setattr__(self, "profiles", tuple(self.profiles))

        if not self.profiles:
            raise ValueError("GlobalModel needs at least one node profile")
        for k, profile in enumerate(self.profiles):
            if profile.M != w_true.size:
                raise ValueError(f"node {k}: R_u is {profile.M}x{profile.M} but w_true has {w_true.size} entries")
        if self.network_budget < 0:
            raise ValueError(f"network_budget must be >= 0, got: {self.network_budget}")

    @property
    def M(self) -> int:
        return self.w_true.size

    @property
    def N(self) -> int:
        return len(self.profiles)

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.profiles])

    @property
    def nu(self) -> np.ndarray:
        return np.array([p.nu for p in self.profiles])

    @property
    def sigma_v2(self) -> np.ndarray:
        return np.array([p.sigma_v2 for p in self.profiles])

    @property
    def local_budgets(self) -> np.ndarray:
        return np.array([p.energy_budget for p in self.profiles])

    @cached_property
    def chol(self) -> np.ndarray:
        """Stacked Cholesky factors, shape (N, M, M)."""
        return np.stack([p.chol for p in self.profiles])

    def with_w_true(self, w_true: Sequence[float]) -> "GlobalModel":
        return replace(self, w_true=np.asarray(w_true, dtype=float))

    def with_noise_scale(self, factor: float) -> "GlobalModel":
        profiles = tuple(replace(p, sigma_v2=p.sigma_v2 * factor) for p in self.profiles)
        return replace(self, profiles=profiles)

    def with_budgets(self, local: Optional[Sequence[float]] = None,
                     network: Optional[float] = None) -> "GlobalModel":
        profiles = self.profiles
        if local is not None:
            if len(local) != self.N:
                raise ValueError(f"expected {self.N} local budgets, got {len(local)}")
            profiles = tuple(replace(p, energy_budget=float(c)) for p, c in zip(profiles, local))
        return replace(self, profiles=profiles,
                       network_budget=self.network_budget if network is None else float(network))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: Optional[str] = None) -> "GlobalModel":
        """Build a model from its file representation.

        Example JSON:
            {
                "w_true": [0.707, 0.707],
                "network_budget": null,
                "defaults": {"mu": 0.08, "nu": 0.05},
                "nodes": [
                    {"sigma_v2": 0.1, "R_u_diag": [5.0, 5.0], "energy_budget": 2.0},
                    {"sigma_v2": 0.2, "R_u": [[10.0, 0.0], [0.0, 10.0]]}
                ]
            }
        """
        defaults = dict(data.get("defaults", {}))
        try:
            profiles = []
            for k, node in enumerate(data["nodes"]):
                entry = {**defaults, **node}
                if "R_u_diag" in entry:
                    R_u = np.diag(np.asarray(entry["R_u_diag"], dtype=float))
                else:
                    R_u = np.asarray(entry["R_u"], dtype=float)
                profiles.append(NodeProfile(
                    sigma_v2=float(entry["sigma_v2"]),
                    R_u=R_u,
                    mu=float(entry.get("mu", DIFFUSION_CONFIG["mu"])),
                    nu=float(entry.get("nu", DIFFUSION_CONFIG["nu"])),
                    energy_budget=_budget(entry.get("energy_budget")),
                ))
            return cls(
                w_true=np.asarray(data["w_true"], dtype=float),
                profiles=tuple(profiles),
                network_budget=_budget(data.get("network_budget")),
            )
        except KeyError as e:
            raise ConfigError(f"missing profile field {e}", source=source) from e
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid profile: {e}", source=source) from e

    @classmethod
    def from_json(cls, filepath: Union[str, Path]) -> "GlobalModel":
        """Load a profile file."""
        with open(filepath, "r") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(e.msg, line=e.lineno, source=str(filepath)) from e
        return cls.from_dict(data, source=str(filepath))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "w_true": self.w_true.tolist(),
            "network_budget": _budget_out(self.network_budget),
            "nodes": [
                {
                    "sigma_v2": p.sigma_v2,
                    "R_u": p.R_u.tolist(),
                    "mu": p.mu,
                    "nu": p.nu,
                    "energy_budget": _budget_out(p.energy_budget),
                }
                for p in self.profiles
            ],
        }

    def to_json(self, filepath: Union[str, Path]):
        """Save the profile file."""
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


@dataclass(frozen=True, eq=False)
class BlockMatrices:
    """Block-diagonal step-size, covariance and noise-weighted covariance matrices."""

    Mstep: np.ndarray
    Rblk: np.ndarray
    Sblk: np.ndarray
    N: int
    M: int


def generate_sample(profile: NodeProfile, w_true: np.ndarray,
                    rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """
    Draw one regressor / measurement pair.

    Args:
        profile: Node profile
        w_true: True parameter vector
        rng: Random generator

    Returns:
        (u, d): regressor of shape (M,), scalar measurement d = u.w + v
    """
    u = profile.chol @ rng.standard_normal(profile.M)
    v = np.sqrt(profile.sigma_v2) * rng.standard_normal()
    return u, float(u @ w_true + v)


def generate_batch(chol: np.ndarray, sigma_v2: np.ndarray, w_true: np.ndarray,
                   rng: np.random.Generator, runs: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw one regressor / measurement pair per run and node.

    Args:
        chol: Cholesky factors, shape (N, M, M)
        sigma_v2: Noise variances, shape (N,)
        w_true: True parameter vector, shape (M,)
        rng: Random generator
        runs: Number of runs

    Returns:
        (u, d) with shapes (runs, N, M) and (runs, N)
    """
    n, m, _ = chol.shape
    z = rng.standard_normal((runs, n, m))
    u = np.einsum("nij,rnj->rni", chol, z)
    v = rng.standard_normal((runs, n)) * np.sqrt(sigma_v2)[None, :]
    d = u @ w_true + v
    return u, d


def composite_variance(profile: NodeProfile, alpha: float) -> float:
    """
    Composite variance blending steady-state noise power and transient contraction.

    Args:
        profile: Node profile
        alpha: Blend coefficient in [0, 1]

    Returns:
        alpha*mu^2*sigma^2*Tr(R) + (1-alpha)*Tr((I - mu R)^2)
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got: {alpha}")
    noise_power = profile.mu ** 2 * profile.sigma_v2 * np.trace(profile.R_u)
    contraction = np.eye(profile.M) - profile.mu * profile.R_u
    transient = np.sum(contraction * contraction)
    return float(alpha * noise_power + (1.0 - alpha) * transient)


def composite_variances(profiles: Sequence[NodeProfile], alpha: float) -> np.ndarray:
    """composite_variance for every node."""
    return np.array([composite_variance(p, alpha) for p in profiles])


def build_blocks(model: GlobalModel) -> BlockMatrices:
    """
    Assemble the NM x NM block-diagonal matrices in node order.

    Args:
        model: Global model

    Returns:
        BlockMatrices with diag(mu_k I), diag(R_k), diag(sigma_k^2 R_k)
    """
    m = model.M
    Mstep = block_diag(*[p.mu * np.eye(m) for p in model.profiles])
    Rblk = block_diag(*[p.R_u for p in model.profiles])
    Sblk = block_diag(*[p.sigma_v2 * p.R_u for p in model.profiles])
    return BlockMatrices(Mstep=Mstep, Rblk=Rblk, Sblk=Sblk, N=model.N, M=m)


def synth_profiles(kind: str, rng: np.random.Generator,
                   params: Optional[Dict[str, Any]] = None) -> GlobalModel:
    """
    Regenerate node profiles the way the reference experiments construct them.

    R_u is diagonal with entries r_m * signal_power * sigma_v2 where the r_m are
    positive and sum to one, so Tr(R_u) = signal_power * sigma_v2. Every entry of
    w_true equals 1/sqrt(M).

    Args:
        kind: "tree" (M=3, random power split) or "random" (M=2, equal split)
        rng: Random generator
        params: Overrides: nodes, M, sigma_v2_range, mu, nu, signal_power,
                power_split ("random" | "equal"), energy_budget, network_budget

    Returns:
        GlobalModel
    """
    if kind not in ("tree", "random"):
        raise ValueError(f"kind must be 'tree' or 'random', got: {kind}")
    settings = {
        **SYNTH_CONFIG[kind],
        "signal_power": SYNTH_CONFIG["signal_power"],
        "mu": DIFFUSION_CONFIG["mu"],
        "nu": DIFFUSION_CONFIG["nu"],
        "power_split": "random" if kind == "tree" else "equal",
        "energy_budget": None,
        "network_budget": None,
        **(params or {}),
    }
    n = int(settings["nodes"])
    m = int(settings["M"])
    lo, hi = settings["sigma_v2_range"]

    budgets = settings["energy_budget"]
    if budgets is None or np.isscalar(budgets):
        budgets = [_budget(budgets)] * n

    sigma_v2 = rng.uniform(lo, hi, size=n)
    profiles = []
    for k in range(n):
        if settings["power_split"] == "equal":
            split = np.full(m, 1.0 / m)
        else:
            split = rng.uniform(0.5, 1.5, size=m)
            split /= split.sum()
        R_u = np.diag(split * settings["signal_power"] * sigma_v2[k])
        profiles.append(NodeProfile(
            sigma_v2=float(sigma_v2[k]),
            R_u=R_u,
            mu=float(settings["mu"]),
            nu=float(settings["nu"]),
            energy_budget=_budget(budgets[k]),
        ))

    return GlobalModel(
        w_true=np.full(m, 1.0 / np.sqrt(m)),
        profiles=tuple(profiles),
        network_budget=_budget(settings["network_budget"]),
    )
