"""Experiment configuration: a small ``key = value`` grammar with sections.

Keys may be written inside a ``[section]`` block or as dotted ``section.key``
anywhere. ``#`` starts a comment. Top-level keys: ``mode``, ``seed``,
``threads``. Unknown sections or keys are errors.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

MODES = ("chaos-sweep", "verify", "moments", "decay")
MODELS = ("example61", "mean_square", "linear_mean_field")
SCHEMES = ("TamedEuler", "ExplicitEuler", "FrozenMeasureTamed")


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class ModelSection:
    name: str = "example61"
    theta: float = 2.0
    kappa: float = 0.5
    sigma: float = 0.5


@dataclass
class InitialSection:
    law: str = "normal"
    mean: float = 0.0
    var: float = 1.0


@dataclass
class SchemeSection:
    kind: str = "TamedEuler"
    # None: 1e-3 for T < 10, 2e-3 otherwise
    dt: Optional[float] = None
    outer_m: Optional[int] = None


@dataclass
class HorizonSection:
    T: float = 1.0


@dataclass
class ChaosSection:
    N_1: int = 16
    levels: int = 6
    U: int = 100


@dataclass
class VerifySection:
    n_samples: int = 100_000
    radii: str = "1,5,10"
    assumptions: str = "all"


@dataclass
class MomentsSection:
    N: int = 10_000
    n_obs: int = 11


@dataclass
class DecaySection:
    N: int = 10_000
    p: float = 2.0
    T_long: float = 4.0


@dataclass
class OutputSection:
    path: str = "results"


@dataclass
class ExperimentConfig:
    mode: str = "chaos-sweep"
    seed: int = 42
    # None: one worker per CPU
    threads: Optional[int] = None
    model: ModelSection = field(default_factory=ModelSection)
    initial: InitialSection = field(default_factory=InitialSection)
    scheme: SchemeSection = field(default_factory=SchemeSection)
    horizon: HorizonSection = field(default_factory=HorizonSection)
    chaos: ChaosSection = field(default_factory=ChaosSection)
    verify: VerifySection = field(default_factory=VerifySection)
    moments: MomentsSection = field(default_factory=MomentsSection)
    decay: DecaySection = field(default_factory=DecaySection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def dt(self):
        if self.scheme.dt is not None:
            return self.scheme.dt
        return 1e-3 if self.horizon.T < 10 else 2e-3

    def to_dict(self):
        return asdict(self)

    def to_text(self):
        """Canonical text form; parses back to an equal config."""
        lines = [f"mode = {self.mode}", f"seed = {self.seed}"]
        if self.threads is not None:
            lines.append(f"threads = {self.threads}")
        for f in fields(self):
            sec = getattr(self, f.name)
            if not hasattr(sec, "__dataclass_fields__"):
                continue
            lines.append(f"\n[{f.name}]")
            for sf in fields(sec):
                val = getattr(sec, sf.name)
                if val is not None:
                    lines.append(f"{sf.name} = {val!r}" if isinstance(val, float) else f"{sf.name} = {val}")
        return "\n".join(lines) + "\n"


_TOP = {"mode", "seed", "threads"}


def _coerce(raw, typ, key, line):
    typ = typ.replace("Optional[", "").rstrip("]")
    try:
        if typ == "int":
            val = float(raw)
            if not val.is_integer():
                raise ValueError
            return int(val)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: expected {typ}, got {raw!r}", line) from None


def _set(cfg, section, key, raw, line):
    if section is None:
        if key not in _TOP:
            raise ConfigError(f"unknown top-level key {key!r}", line)
        target = cfg
    else:
        target = getattr(cfg, section, None)
        if target is None or not hasattr(target, "__dataclass_fields__"):
            raise ConfigError(f"unknown section [{section}]", line)
    ftypes = {f.name: f.type for f in fields(target)}
    if key not in ftypes:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key {key!r} in {where}; accepted: {sorted(ftypes)}", line)
    setattr(target, key, _coerce(raw.strip().strip('"'), str(ftypes[key]), key, line))


def apply_assignment(cfg, text, line=None, section=None):
    if "=" not in text:
        raise ConfigError(f"expected 'key = value', got {text!r}", line)
    key, raw = (s.strip() for s in text.split("=", 1))
    if "." in key:
        section, key = key.split(".", 1)
    if not raw:
        raise ConfigError(f"{key}: missing value", line)
    _set(cfg, section, key, raw, line)


def parse_config(text, overrides=()):
    """Parse, apply ``overrides`` (``key=value`` strings), fill defaults, validate."""
    cfg = ExperimentConfig()
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", n)
            section = line[1:-1].strip()
            if not hasattr(getattr(cfg, section, None), "__dataclass_fields__"):
                raise ConfigError(f"unknown section [{section}]", n)
            continue
        apply_assignment(cfg, line, n, section)
    for ov in overrides:
        apply_assignment(cfg, ov)
    validate(cfg)
    return cfg


def _range(cond, key, accepted):
    if not cond:
        raise ConfigError(f"{key} out of range; accepted: {accepted}")


def validate(cfg):
    _range(cfg.mode in MODES, "mode", " | ".join(MODES))
    _range(0 <= cfg.seed < 2**64, "seed", "0 <= seed < 2^64")
    _range(cfg.threads is None or cfg.threads >= 1, "threads", ">= 1")
    _range(cfg.model.name in MODELS, "model.name", " | ".join(MODELS))
    _range(cfg.initial.law in ("normal", "point"), "initial.law", "normal | point")
    _range(cfg.initial.var >= 0, "initial.var", ">= 0")
    _range(cfg.scheme.kind in SCHEMES, "scheme.kind", " | ".join(SCHEMES))
    _range(cfg.scheme.dt is None or cfg.scheme.dt > 0, "scheme.dt", "> 0")
    if cfg.scheme.kind == "FrozenMeasureTamed":
        _range(cfg.scheme.outer_m is not None and cfg.scheme.outer_m >= 1, "scheme.outer_m", ">= 1 for FrozenMeasureTamed")
    _range(cfg.horizon.T > 0, "horizon.T", "> 0")
    n = round(cfg.horizon.T / cfg.dt)
    _range(abs(n * cfg.dt - cfg.horizon.T) <= 1e-12 * max(1.0, cfg.horizon.T), "scheme.dt", "a divisor of horizon.T")
    if cfg.chaos.N_1 % 2 or cfg.chaos.N_1 < 2:
        raise ConfigError(f"chaos.N_1 must be even (got {cfg.chaos.N_1}); accepted: even integers >= 2")
    _range(cfg.chaos.levels >= 1, "chaos.levels", ">= 1")
    _range(cfg.chaos.U >= 1, "chaos.U", ">= 1")
    _range(cfg.verify.n_samples >= 1, "verify.n_samples", ">= 1")
    try:
        radii = [float(r) for r in cfg.verify.radii.split(",")]
    except ValueError:
        raise ConfigError("verify.radii must be a comma-separated list of positive numbers") from None
    _range(all(r > 0 for r in radii), "verify.radii", "positive numbers")
    _range(cfg.moments.N >= 1, "moments.N", ">= 1")
    _range(cfg.moments.n_obs >= 2, "moments.n_obs", ">= 2")
    _range(cfg.decay.N >= 1, "decay.N", ">= 1")
    _range(cfg.decay.p >= 1, "decay.p", ">= 1")
    _range(cfg.decay.T_long > 0, "decay.T_long", "> 0")
    return cfg


def from_dict(d):
    cfg = ExperimentConfig()
    for key, val in d.items():
        if isinstance(val, dict):
            sec = getattr(cfg, key)
            setattr(cfg, key, replace(sec, **val))
        else:
            setattr(cfg, key, val)
    return validate(cfg)
