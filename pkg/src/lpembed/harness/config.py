"""Plain-text experiment configuration.

One ``key = value`` per line, ``#`` starts a comment, grid-valued keys take
comma-separated lists. Numbers may be written as fractions (``eta = 1/16``).
"""

from dataclasses import dataclass, fields, replace
from fractions import Fraction
import math

from ..errors import DomainError

__all__ = ["ExperimentConfig", "EXPERIMENTS", "parse_config", "emit_config", "load_config",
           "default_config", "eq1_m", "resolve_m"]

EXPERIMENTS = ("certify", "distortion", "phase", "gelfand", "stable")


def _num(text):
    text = text.strip()
    if text.lower() in ("inf", "+inf"):
        return math.inf
    return float(Fraction(text)) if "/" in text else float(text)


def _int(text):
    v = _num(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _opt_int(text):
    return None if text.strip().lower() in ("", "none", "auto") else _int(text)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "certify"
    n: tuple = (256,)
    eta: tuple = (0.25,)
    p: tuple = (1.5,)
    r: tuple = (1.0,)
    s: tuple = (0, 1, 2, 4, 8, 16, 32, 64)
    t: tuple = (0.25, 0.5, 1.0, 2.0)
    J: int | None = None
    trials: int = 10_000
    theta_trials: int = 10_000
    samples: int = 10_000
    seed: int = 0
    c_prime: float = 1.0
    m_rule: str = "eq1"
    m: int | None = None
    m_coeff: float = 0.1
    threads: int = 1
    output_dir: str = "out"
    max_iter: int = 5000
    eps0: float = 1.0
    eps_decay: float = 0.7
    feas_tol: float = 1e-8
    sparsity_hint: int | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise DomainError(f"unknown experiment {self.experiment!r}")
        for key in _GRIDS:
            if not getattr(self, key) and key != "s":
                raise DomainError(f"grid {key!r} must be non-empty")
        if self.m_rule not in ("eq1", "explicit"):
            raise DomainError("m_rule must be 'eq1' or 'explicit'")
        if self.m_rule == "explicit" and (self.m is None or self.m < 1):
            raise DomainError("m_rule = explicit needs m >= 1")
        if any(not 0 < e <= 1 for e in self.eta):
            raise DomainError("eta values must lie in (0, 1]")
        if self.threads < 1:
            raise DomainError("threads must be >= 1")

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_GRIDS = {"n": _int, "eta": _num, "p": _num, "r": _num, "s": _int, "t": _num}
_SCALARS = {
    "experiment": str, "J": _opt_int, "trials": _int, "theta_trials": _int, "samples": _int,
    "seed": _int, "c_prime": _num, "m_rule": str, "m": _opt_int, "m_coeff": _num,
    "threads": _int, "output_dir": str, "max_iter": _int, "eps0": _num, "eps_decay": _num,
    "feas_tol": _num, "sparsity_hint": _opt_int,
}


# per-experiment defaults layered over the dataclass defaults
_DEFAULTS = {
    "certify": {},
    "distortion": {"n": (512,), "eta": (0.0625, 0.125, 0.25, 0.5, 1.0)},
    "phase": {"eta": (0.5,), "p": (1.5,), "r": (0.5, 1.0), "trials": 100},
    "gelfand": {"n": (128, 256, 512), "eta": (0.5,), "r": (0.5, 1.0), "samples": 2000},
    "stable": {"p": (0.5, 1.0, 1.5, 2.0), "samples": 100_000},
}


def default_config(experiment):
    return ExperimentConfig(experiment=experiment, **_DEFAULTS[experiment])


def parse_value(key, text):
    if key in _GRIDS:
        parts = [u for u in (v.strip() for v in text.split(",")) if u]
        return tuple(_GRIDS[key](u) for u in parts)
    if key in _SCALARS:
        return _SCALARS[key](text.strip())
    raise DomainError(f"unknown config key {key!r}")


def parse_config(text, base=None):
    """Parse config text; keys not present keep the values of ``base``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected 'key = value'")
        key, value = (u.strip() for u in line.split("=", 1))
        try:
            values[key] = parse_value(key, value)
        except ValueError as exc:
            raise DomainError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return replace(base or ExperimentConfig(), **values)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg):
    """Canonical text form; ``parse_config(emit_config(c)) == c``."""
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        text = ", ".join(_fmt(u) for u in v) if f.name in _GRIDS else _fmt(v)
        out.append(f"{f.name} = {text}")
    return "\n".join(out) + "\n"


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def eq1_m(n, eta, coeff):
    """``max(1, floor(coeff * eta / log(1 + 1/eta) * n))``."""
    return max(1, math.floor(round(coeff * eta / math.log1p(1.0 / eta) * n, 9)))


def resolve_m(cfg, n, eta):
    m = cfg.m if cfg.m_rule == "explicit" else eq1_m(n, eta, cfg.m_coeff)
    return min(int(m), int(n))
