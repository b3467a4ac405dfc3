"""Scenario configuration using dataclasses."""

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from mhdiffusion.config import SIMULATION_CONFIG
from mhdiffusion.core.milp import VARIANTS
from mhdiffusion.exceptions import ConfigError

STRATEGY_KINDS = ("atc", "matc", "matc_async", "catc", "noncoop", "centralized", "adaptive_matc")
ADAPTIVE_KINDS = ("catc", "adaptive_matc")
WEIGHT_RULES = ("balancing", "adaptive_balancing", "relative_variance", "uniform")
METHODS = ("exact", "algorithm1")
EVENT_ACTIONS = ("set_w_true", "scale_noise", "set_budgets", "scale_budgets")


class FieldError(ConfigError):
    """Validation error tied to one key of a scenario file."""

    def __init__(self, key: str, message: str, occurrence: int = 0):
        self.key = key
        self.occurrence = occurrence
        super().__init__(f"{key}: {message}")


def _line_of(text: str, key: str, occurrence: int = 0) -> Optional[int]:
    """1-based line of the n-th occurrence of a JSON key, None if absent."""
    matches = list(re.finditer(rf'"{re.escape(key)}"\s*:', text))
    if not matches:
        return None
    match = matches[min(occurrence, len(matches) - 1)]
    return text.count("\n", 0, match.start()) + 1


def _known_fields(cls, data: Dict[str, Any]) -> Dict[str, Any]:
    # Remove non-dataclass fields (like "comment")
    valid = {f.name for f in fields(cls) if f.init}
    return {k: v for k, v in data.items() if k in valid}


@dataclass
class ChangeEvent:
    """Scripted change applied before sampling at a given iteration.

    Actions:
        set_w_true: payload is the new parameter vector
        scale_noise: payload multiplies every noise variance
        set_budgets: payload is one local budget per node (or one for all; null = unlimited)
        scale_budgets: payload multiplies every local budget
    """

    at_iteration: int
    action: str
    payload: Any = None

    def __post_init__(self):
        if int(self.at_iteration) < 0:
            raise FieldError("at_iteration", f"must be >= 0, got: {self.at_iteration}")
        self.at_iteration = int(self.at_iteration)
        if self.action not in EVENT_ACTIONS:
            raise FieldError("action", f"must be one of {EVENT_ACTIONS}, got: {self.action}")
        if self.payload is None and self.action != "set_budgets":
            raise FieldError("payload", f"action '{self.action}' needs a payload")
        if self.action in ("scale_noise", "scale_budgets") and not float(self.payload) > 0:
            raise FieldError("payload", f"scale factor must be > 0, got: {self.payload}")


@dataclass
class StrategyConfig:
    """One strategy simulated by the workbench.

    Kinds:
        noncoop: every node keeps its own estimate
        atc: one-hop diffusion over physical neighborhoods
        matc / matc_async: multi-hop diffusion over a neighbor-selection plan
        centralized: every node combines every estimate that can reach it
        catc: nodes broadcast their own estimate while the local budget allows
        adaptive_matc: distributed adaptive relay selection within h hops
    """

    kind: str
    label: Optional[str] = None
    plan: Optional[Dict[str, Any]] = None  # Inline plan (same layout as plan files)
    plan_file: Optional[str] = None
    variant: str = "p3"  # Planning model when the plan is computed
    method: str = "exact"
    h: int = 2  # Max consultation hops (adaptive_matc)
    weight_rule: Optional[str] = None  # Default: adaptive_balancing for catc/adaptive_matc, else balancing
    alpha: Optional[float] = None  # Balancing coefficient; solved from the LMI when None
    asynchronous: bool = False  # Relayed messages travel one hop per iteration (adaptive_matc)

    def __post_init__(self):
        """Validate strategy after initialization."""
        if self.kind not in STRATEGY_KINDS:
            raise FieldError("kind", f"must be one of {STRATEGY_KINDS}, got: {self.kind}")
        if self.label is None:
            self.label = self.kind + ("_async" if self.asynchronous else "")

        if self.weight_rule is None:
            self.weight_rule = "adaptive_balancing" if self.kind in ADAPTIVE_KINDS else "balancing"
        if self.weight_rule not in WEIGHT_RULES:
            raise FieldError("weight_rule", f"must be one of {WEIGHT_RULES}, got: {self.weight_rule}")
        if self.kind in ADAPTIVE_KINDS and self.weight_rule != "adaptive_balancing":
            raise FieldError("weight_rule", f"{self.kind} combines with adaptive_balancing weights only")
        if self.kind == "matc_async" and self.weight_rule == "adaptive_balancing":
            raise FieldError("weight_rule", "matc_async uses static weights (see adaptive_matc with asynchronous)")

        if self.variant not in VARIANTS:
            raise FieldError("variant", f"must be one of {VARIANTS}, got: {self.variant}")
        if self.method not in METHODS:
            raise FieldError("method", f"must be one of {METHODS}, got: {self.method}")
        if int(self.h) < 1:
            raise FieldError("h", f"must be >= 1, got: {self.h}")
        self.h = int(self.h)
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise FieldError("alpha", f"must be in [0, 1], got: {self.alpha}")
        if self.asynchronous and self.kind != "adaptive_matc":
            raise FieldError("asynchronous", "only adaptive_matc has an asynchronous flag (use matc_async)")
        if self.plan is not None and self.plan_file is not None:
            raise FieldError("plan_file", "give either plan or plan_file, not both")
        if (self.plan is not None or self.plan_file is not None) and self.kind not in ("matc", "matc_async"):
            raise FieldError("plan", f"{self.kind} does not take a plan")

    @property
    def is_adaptive(self) -> bool:
        return self.weight_rule == "adaptive_balancing"

    @property
    def needs_plan(self) -> bool:
        return self.kind in ("matc", "matc_async")


@dataclass
class ScenarioConfig:
    """Configuration of one workbench scenario.

    The network and the node profiles are given inline, as file paths
    (relative to the scenario file), or synthesized from `synth`.
    """

    name: str = "scenario"

    # Inputs
    network: Optional[Union[str, Dict[str, Any]]] = None
    profiles: Optional[Union[str, Dict[str, Any]]] = None
    synth: Optional[Dict[str, Any]] = None  # {"kind": "tree" | "random", "seed": int, "params": {...}}

    # Budget overrides (null = unlimited)
    local_budgets: Optional[Union[float, List[Optional[float]]]] = None
    network_budget: Optional[float] = None

    # Strategies and script
    strategies: List[Any] = field(default_factory=lambda: [{"kind": "atc"}])
    events: List[Any] = field(default_factory=list)

    # Monte Carlo settings
    iterations: int = SIMULATION_CONFIG["iterations"]
    runs: int = SIMULATION_CONFIG["runs"]
    seed: int = SIMULATION_CONFIG["seed"]
    chunk_size: int = SIMULATION_CONFIG["chunk_size"]
    n_jobs: int = SIMULATION_CONFIG["n_jobs"]  # -1 = all cores, 1 = sequential

    # Planning settings (optimize / tradeoff)
    variant: str = "p3"
    method: str = "exact"
    budgets: Optional[List[float]] = None  # Network budgets swept by tradeoff
    alpha: Optional[float] = None

    # Output settings
    output_dir: str = "./results"
    linear: bool = False
    verbose: bool = False

    base_dir: Optional[str] = field(default=None, repr=False)

    def __post_init__(self):
        """Validate configuration after initialization."""
        if not re.fullmatch(r"[A-Za-z0-9_.-]+", str(self.name)):
            raise FieldError("name", f"must be a file-name friendly identifier, got: {self.name!r}")
        if self.synth is None and (self.network is None or self.profiles is None):
            raise FieldError("synth", "needs a synth block when network or profiles are missing")
        if self.synth is not None and self.synth.get("kind") not in ("tree", "random"):
            raise FieldError("kind", f"synth kind must be 'tree' or 'random', got: {self.synth.get('kind')}")

        for key in ("iterations", "runs", "chunk_size", "n_jobs", "seed"):
            setattr(self, key, int(getattr(self, key)))
        if self.iterations < 1:
            raise FieldError("iterations", f"must be >= 1, got: {self.iterations}")
        if self.runs < 1:
            raise FieldError("runs", f"must be >= 1, got: {self.runs}")
        if self.chunk_size < 1:
            raise FieldError("chunk_size", f"must be >= 1, got: {self.chunk_size}")
        if self.n_jobs == 0 or self.n_jobs < -1:
            raise FieldError("n_jobs", f"must be -1 or >= 1, got: {self.n_jobs}")
        if self.variant not in VARIANTS:
            raise FieldError("variant", f"must be one of {VARIANTS}, got: {self.variant}")
        if self.method not in METHODS:
            raise FieldError("method", f"must be one of {METHODS}, got: {self.method}")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise FieldError("alpha", f"must be in [0, 1], got: {self.alpha}")
        if self.network_budget is not None and self.network_budget < 0:
            raise FieldError("network_budget", f"must be >= 0, got: {self.network_budget}")
        if self.budgets is not None:
            if not self.budgets or any(b is None or b < 0 for b in self.budgets):
                raise FieldError("budgets", f"sweep values must be nonnegative numbers, got: {self.budgets}")

        self.strategies = [self._parse_item(StrategyConfig, s, self.strategies[:i], "strategies")
                           for i, s in enumerate(self.strategies)]
        if not self.strategies:
            raise FieldError("strategies", "at least one strategy is required")
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise FieldError("label", f"strategy labels must be unique, got: {labels}")

        self.events = [self._parse_item(ChangeEvent, e, self.events[:i], "events")
                       for i, e in enumerate(self.events)]
        self.events.sort(key=lambda e: e.at_iteration)

    @staticmethod
    def _parse_item(cls, item: Any, earlier: List[Any], key: str):
        if isinstance(item, cls):
            return item
        if not isinstance(item, dict):
            raise FieldError(key, f"entries must be objects, got: {item!r}")
        try:
            return cls(**_known_fields(cls, item))
        except FieldError as e:
            e.occurrence = sum(1 for other in earlier if isinstance(other, dict) and e.key in other)
            raise
        except TypeError as e:
            raise FieldError(key, str(e)) from e

    @classmethod
    def from_json(cls, filepath: Union[str, Path]) -> "ScenarioConfig":
        """Load configuration from JSON file.

        Args:
            filepath: Path to JSON scenario file

        Returns:
            ScenarioConfig instance

        Raises:
            ConfigError: syntax or validation error, with the line of the offending key

        Example JSON:
            {
                "name": "tree8",
                "synth": {"kind": "tree", "seed": 7},
                "network_budget": 10,
                "strategies": [{"kind": "atc"}, {"kind": "matc", "method": "exact"}],
                "iterations": 1000,
                "runs": 1000
            }
        """
        path = Path(filepath)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read scenario file: {e}", source=str(path)) from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(e.msg, line=e.lineno, source=str(path)) from e
        if not isinstance(data, dict):
            raise ConfigError("scenario file must hold a JSON object", line=1, source=str(path))

        filtered = _known_fields(cls, data)
        filtered["base_dir"] = str(path.parent)
        try:
            return cls(**filtered)
        except FieldError as e:
            message = str(e)
            raise ConfigError(message, line=_line_of(text, e.key, e.occurrence), source=str(path)) from e
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), source=str(path)) from e

    def to_dict(self) -> Dict[str, Any]:
        """Resolved scenario: file references made absolute, dataclass entries expanded."""
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base_dir"}
        for key in ("network", "profiles"):
            if isinstance(data[key], str):
                data[key] = str(self.resolve(data[key]))
        data["strategies"] = [asdict(s) for s in self.strategies]
        for strategy in data["strategies"]:
            if strategy["plan_file"]:
                strategy["plan_file"] = str(self.resolve(strategy["plan_file"]))
        data["events"] = [asdict(e) for e in self.events]
        return data

    def to_json(self, filepath: Union[str, Path]):
        """Save configuration to JSON file.

        Args:
            filepath: Path to save JSON scenario file
        """
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2, default=_json_default)

    def resolve(self, relative: Union[str, Path]) -> Path:
        """Path of a referenced file, relative to the scenario file's directory."""
        path = Path(relative)
        if path.is_absolute() or self.base_dir is None:
            return path
        return Path(self.base_dir) / path

    def strategy(self, label: str) -> StrategyConfig:
        for strategy in self.strategies:
            if strategy.label == label:
                return strategy
        raise ConfigError(f"no strategy labelled '{label}'")


def _json_default(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")
