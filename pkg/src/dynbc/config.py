"""Flat key-value run configuration with a strict schema.

The format is one ``key = value`` pair per line, ``#`` comments, no
nesting.  Unknown keys are rejected, duplicates are rejected, and every
numeric constraint of the owning modules is re-validated at parse time.
"""

from dataclasses import dataclass, fields

from .errors import ConfigError

_INITIAL_STATES = ("one", "parabola", "zero")
_COEFFICIENT_FAMILIES = ("zero", "additive", "multiplicative", "forced")
_CONTROL_PROBLEMS = ("benchmark",)


@dataclass(frozen=True)
class RunConfig:
    b0: float = 1.0
    b1: float = 1.0
    n_modes: int = 16
    m_noise: int = None
    dt: float = 5e-3
    T: float = 0.5
    t0: float = 0.0
    seed: int = 12345
    n_paths: int = 1000
    panels: int = 64
    nodes_per_panel: int = 8
    coefficients: str = "additive"
    g_scale: float = 0.2
    h0: float = 1.0
    h1: float = 1.0
    f_scale: float = 1.0
    initial: str = "one"
    control_problem: str = "benchmark"
    ball_radius: float = 1.0
    policies: str = "zero, feedback:terminal_proxy"
    record_paths: int = 4
    fd_n: int = 2000
    hs_modes: int = 200

    def policy_specs(self) -> list[str]:
        return [p.strip() for p in self.policies.split(",") if p.strip()]

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {
    "n_modes",
    "m_noise",
    "seed",
    "n_paths",
    "panels",
    "nodes_per_panel",
    "record_paths",
    "fd_n",
    "hs_modes",
}
_STR_KEYS = {"coefficients", "initial", "control_problem", "policies"}


def _coerce(key: str, raw: str):
    if key in _STR_KEYS:
        return raw
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from exc


def _validate(cfg: RunConfig):
    checks = [
        (cfg.b0 > 0.0, "b0 must be positive"),
        (cfg.b1 > 0.0, "b1 must be positive"),
        (cfg.n_modes >= 1, "n_modes must be >= 1"),
        (1 <= cfg.m_noise <= cfg.n_modes, "need 1 <= m_noise <= n_modes"),
        (cfg.dt > 0.0, "dt must be positive"),
        (0.0 <= cfg.t0 < cfg.T, "need 0 <= t0 < T"),
        (0 <= cfg.seed < 2**64, "seed must fit in 64 bits"),
        (cfg.n_paths >= 2, "n_paths must be >= 2"),
        (cfg.panels >= 1, "panels must be >= 1"),
        (cfg.nodes_per_panel >= 2, "nodes_per_panel must be >= 2"),
        (cfg.record_paths >= 0, "record_paths must be >= 0"),
        (8 <= cfg.fd_n <= 4001, "fd_n must be in [8, 4001]"),
        (cfg.hs_modes >= 1, "hs_modes must be >= 1"),
        (cfg.ball_radius > 0.0, "ball_radius must be positive"),
        (
            cfg.coefficients in _COEFFICIENT_FAMILIES,
            f"coefficients must be one of {_COEFFICIENT_FAMILIES}",
        ),
        (
            cfg.initial in _INITIAL_STATES,
            f"initial must be one of {_INITIAL_STATES}",
        ),
        (
            cfg.control_problem in _CONTROL_PROBLEMS,
            f"control_problem must be one of {_CONTROL_PROBLEMS}",
        ),
        (len(cfg.policy_specs()) >= 1, "policies must name at least one policy"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    if "m_noise" not in values:
        values["m_noise"] = values.get("n_modes", RunConfig.n_modes)
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def default_config() -> RunConfig:
    cfg = RunConfig(m_noise=RunConfig.n_modes)
    _validate(cfg)
    return cfg


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    values = cfg.as_dict()
    values.update(overrides)
    new = RunConfig(**values)
    _validate(new)
    return new
