"""Run configuration: nested dataclasses, TOML round-trip, validation, hashing."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import tomli
import tomli_w

SCHEMA_VERSION = 1
SCHEME_ALIASES = {
    "split-step": "split_step",
    "split_step": "split_step",
    "em": "em_perturbed",
    "em_perturbed": "em_perturbed",
    "backward-euler": "backward_euler",
    "backward_euler": "backward_euler",
}


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(field_path, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.problems))


@dataclass
class Domain:
    L: float = 1.0
    kappa: float = 1.0
    n_modes: int = 64
    padding: int = 2


@dataclass
class Nonlinearity:
    beta: float = 1.0


@dataclass
class Noise:
    gamma: float = 2.0
    mu: float = 1.0
    seed: int = 20240611
    samples: int = 64
    allow_inadmissible: bool = False


@dataclass
class Initial:
    # sine coefficients of X0 for modes 1, 2, ...; the rest are zero
    coefficients: list = field(default_factory=lambda: [0.1, 0.05, 0.025])


@dataclass
class Time:
    T: float = 1.0
    ladder: list = field(default_factory=lambda: [16, 32, 64, 128, 256])
    N_ref: int = 2048


@dataclass
class BESolverConfig:
    tolerance: float = 1e-10
    max_iter: int = 200


@dataclass
class Study:
    reference_check: bool = True
    probes: int = 32
    workers: int = 1


@dataclass
class Output:
    dir: str = "out"
    dump_states: bool = False


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    scheme: str = "split_step"
    domain: Domain = field(default_factory=Domain)
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity)
    noise: Noise = field(default_factory=Noise)
    initial: Initial = field(default_factory=Initial)
    time: Time = field(default_factory=Time)
    be_solver: BESolverConfig = field(default_factory=BESolverConfig)
    study: Study = field(default_factory=Study)
    output: Output = field(default_factory=Output)

    # -- (de)serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(cls, data, "")

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError([("<file>", str(exc))]) from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_toml(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_toml())

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, output section excluded."""
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- derived quantities ---------------------------------------------------

    @property
    def seeds(self) -> list:
        return [self.noise.seed]

    @property
    def k_max(self) -> float:
        return self.time.T / min(self.time.ladder)

    def validate(self) -> "RunConfig":
        problems = []
        d, t = self.domain, self.time
        if self.schema_version != SCHEMA_VERSION:
            problems.append(("schema_version", f"unsupported version {self.schema_version}"))
        if self.scheme not in SCHEME_ALIASES:
            problems.append(("scheme", f"unknown scheme {self.scheme!r}"))
        if not d.L > 0:
            problems.append(("domain.L", "must be positive"))
        if not d.kappa > 0:
            problems.append(("domain.kappa", "must be positive"))
        if d.n_modes < 8:
            problems.append(("domain.n_modes", f"must be >= 8, got {d.n_modes}"))
        if d.padding < 2:
            problems.append(("domain.padding", f"must be >= 2, got {d.padding}"))
        if self.nonlinearity.beta < 0:
            problems.append(("nonlinearity.beta", "must be non-negative"))
        if self.noise.samples < 1:
            problems.append(("noise.samples", "must be >= 1"))
        if not 0 <= self.noise.seed < 2**64:
            problems.append(("noise.seed", "must be an unsigned 64-bit integer"))
        if self.noise.mu < 0 or (self.noise.mu == 0 and not self.noise.allow_inadmissible):
            problems.append(("noise.mu", "must be positive"))
        if len(self.initial.coefficients) > d.n_modes:
            problems.append(("initial.coefficients", "more coefficients than modes"))
        if not t.T > 0:
            problems.append(("time.T", "must be positive"))
        if not t.ladder:
            problems.append(("time.ladder", "must not be empty"))
        else:
            for N in t.ladder:
                if N < 1:
                    problems.append(("time.ladder", f"step count {N} must be positive"))
                elif t.N_ref % N:
                    problems.append(("time.ladder", f"{N} does not divide N_ref={t.N_ref}"))
            if len(set(t.ladder)) != len(t.ladder):
                problems.append(("time.ladder", "duplicate entries"))
            if t.T > 0 and min(t.ladder) > 0:
                if not 2 * self.k_max * self.nonlinearity.beta**2 < 1:
                    problems.append(
                        ("time.ladder", f"coarsest step k={self.k_max} violates 2 k beta^2 < 1")
                    )
        if t.N_ref < 1:
            problems.append(("time.N_ref", "must be positive"))
        if not self.be_solver.tolerance > 0:
            problems.append(("be_solver.tolerance", "must be positive"))
        if self.be_solver.max_iter < 1:
            problems.append(("be_solver.max_iter", "must be >= 1"))
        if self.study.probes < 1:
            problems.append(("study.probes", "must be >= 1"))
        if self.study.workers < 1:
            problems.append(("study.workers", "must be >= 1"))
        if problems:
            raise ConfigError(problems)
        return self

    @property
    def scheme_name(self) -> str:
        return SCHEME_ALIASES[self.scheme]


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError([(prefix.rstrip(".") or "<root>", "expected a table")])
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError([(f"{prefix}{u}", "unknown key") for u in unknown])
    kwargs = {}
    defaults = cls()
    for name, f in known.items():
        if name not in data:
            continue
        path = f"{prefix}{name}"
        value = data[name]
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, path + ".")
        else:
            kwargs[name] = _coerce(current, value, path)
    return cls(**kwargs)


def _coerce(default, value, path):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError([(path, f"expected a boolean, got {value!r}")])
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError([(path, f"expected an integer, got {value!r}")])
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError([(path, f"expected a number, got {value!r}")])
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError([(path, f"expected a list, got {value!r}")])
        return list(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError([(path, f"expected a string, got {value!r}")])
        return value
    return value
