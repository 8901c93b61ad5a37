"""Experiment configuration: defaults, flat ``key = value`` files, CLI overrides."""
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("toy", "rl", "lax-demo", "lemma-check")
ESTIMATORS = {
    "toy": ("reinforce", "relax", "kf-relax"),
    "rl": ("relax", "kf-relax"),
    "lax-demo": ("reinforce", "lax", "kf-lax"),
    "lemma-check": (None,),
}


class UsageError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


@dataclass
class ExperimentConfig:
    kind: str = "toy"
    estimator: str = "relax"
    seeds: list = field(default_factory=lambda: [0])
    out: str = "runs"
    # toy / lax-demo
    t: float = 0.499
    steps: int = 5000
    theta0: float = 0.0
    lr_theta: float = 1.0
    theta_optimizer: str = "sgd"
    log_period: int = 10
    # surrogate and curvature
    lr_surrogate: float = 0.01
    surrogate_hidden: int = 10
    surrogate_layers: int = 3
    damping: float = 1e-3
    trust_bound: float = 1e-3
    kfac_decay: float = 0.95
    inverse_period: int = 20
    # variance measurement
    variance_period: int = 100
    variance_samples: int = 1000
    # rl
    env: str = "cartpole"
    episodes: int = 2000
    batch_size: int = 4
    lr_policy: float = 0.01
    gamma: float = 0.99
    entropy_weight: float = 0.01
    policy_hidden: int = 32
    rl_variance_period: int = 50
    rl_variance_samples: int = 20
    # lemma checks
    n_mdps: int = 10
    n_states: int = 2
    n_actions: int = 2
    mdp_gamma: float = 0.9

    def validate(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown experiment kind {self.kind!r}")
        allowed = ESTIMATORS[self.kind]
        if self.kind != "lemma-check" and self.estimator not in allowed:
            raise UsageError(f"estimator {self.estimator!r} is not valid for {self.kind}; choose from {allowed}")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        if self.kind in ("toy",) and not 0.0 < self.t < 1.0:
            raise UsageError("t must lie in (0, 1)")
        if self.kind == "rl" and self.env not in ("cartpole", "acrobot"):
            raise UsageError(f"unknown environment {self.env!r}")
        if self.theta_optimizer not in ("sgd", "adam"):
            raise UsageError("theta_optimizer must be sgd or adam")
        for name in ("steps", "episodes", "log_period", "variance_period", "batch_size",
                     "rl_variance_period", "inverse_period", "n_mdps"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")
        for name in ("variance_samples", "rl_variance_samples"):
            if getattr(self, name) < 2:
                raise UsageError(f"{name} must be >= 2")
        for name in ("lr_theta", "lr_surrogate", "lr_policy", "trust_bound"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.damping < 0 or self.entropy_weight < 0 or not 0 <= self.gamma <= 1:
            raise UsageError("damping, entropy_weight must be >= 0 and gamma in [0, 1]")
        return self

    def as_dict(self):
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name, raw):
    default = ExperimentConfig().__getattribute__(name)
    try:
        if isinstance(default, list):
            return [int(s) for s in str(raw).replace(",", " ").split()]
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise UsageError(f"bad value for {name}: {raw!r}") from None
    return str(raw)


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment, hyphens equal underscores."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "seed":
            key = "seeds"
        if key not in _FIELDS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return values


def load_config_file(path):
    try:
        return parse_config_text(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None


def build_config(kind, file_values=None, cli_values=None):
    """Defaults < config file < CLI flags (``None`` CLI values are ignored)."""
    merged = {"kind": kind}
    if kind == "rl":
        merged["estimator"] = "relax"
    elif kind == "lax-demo":
        merged["estimator"] = "lax"
        merged["t"] = 0.5
        merged["steps"] = 2000
        merged["lr_theta"] = 0.01
    merged.update(file_values or {})
    merged.update({k: v for k, v in (cli_values or {}).items() if v is not None})
    unknown = set(merged) - set(_FIELDS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**merged).validate()
