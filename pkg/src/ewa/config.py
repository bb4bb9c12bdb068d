"""Flat ``key = value`` run configuration with dotted sections.

One pair per line; ``#`` starts a comment. Lists are comma separated.
Only ``n``, ``noise.scale`` and ``agg.beta`` are required.
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional

from ewa._validation import DomainError, ValidationError
from ewa.estimators import default_ranks, make_collection
from ewa.harness import SignalSpec
from ewa.noise import NoiseModel
from ewa.risk import AggregationConfig


class ConfigError(ValueError):
    """Raised for malformed or inadmissible configuration text."""


def _float_list(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _int_list(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _opt_int_list(text):
    return None if text.strip().lower() in ("", "none") else _int_list(text)


def _opt_float_list(text):
    return None if text.strip().lower() in ("", "none") else _float_list(text)


# config key -> (RunConfig field, parser)
_KEYS = {
    "n": ("n", int),
    "signal.kind": ("signal_kind", str),
    "signal.amplitude": ("signal_amplitude", float),
    "signal.frequencies": ("signal_frequencies", _float_list),
    "signal.values": ("signal_values", _opt_float_list),
    "collection.basis": ("basis", str),
    "collection.kind": ("collection_kind", str),
    "collection.ranks": ("ranks", _opt_int_list),
    "collection.seed": ("basis_seed", int),
    "collection.v_bound": ("v_bound", _opt_float),
    "noise.kind": ("noise_kind", str),
    "noise.scale": ("noise_scale", float),
    "agg.beta": ("beta", float),
    "agg.delta": ("delta", float),
    "agg.eta": ("eta", float),
    "agg.penalty_rule": ("penalty_rule", str),
    "agg.kappa": ("kappa", _opt_float),
    "run.trials": ("trials", int),
    "run.seed": ("seed", int),
    "run.out": ("out", str),
    "moments.samples": ("moment_samples", int),
    "moments.pairs": ("moment_pairs", int),
    "moments.nu": ("moment_nu", float),
    "mgf.directions": ("mgf_directions", int),
    "mgf.samples": ("mgf_samples", int),
}
_FIELD_TO_KEY = {f: k for k, (f, _) in _KEYS.items()}
REQUIRED = ("n", "noise.scale", "agg.beta")


@dataclass(frozen=True)
class RunConfig:
    n: int
    noise_scale: float
    beta: float
    signal_kind: str = "sinusoid"
    signal_amplitude: float = 3.0
    signal_frequencies: tuple = (2.0,)
    signal_values: Optional[tuple] = None
    basis: str = "cosine"
    collection_kind: str = "projection"
    ranks: Optional[tuple] = None
    basis_seed: int = 0
    v_bound: Optional[float] = None
    noise_kind: str = "gaussian"
    delta: float = 1.0
    eta: float = 0.05
    penalty_rule: str = "theorem1"
    kappa: Optional[float] = None
    trials: int = 1000
    seed: int = 0
    out: str = "out"
    moment_samples: int = 1_000_000
    moment_pairs: int = 10
    moment_nu: float = 1.0
    mgf_directions: int = 20
    mgf_samples: int = 1_000_000

    def signal(self):
        return SignalSpec(self.signal_kind, self.n, self.signal_amplitude,
                          self.signal_frequencies, self.signal_values)

    def collection(self):
        return make_collection(self.n, self.basis, self.collection_kind,
                               self.ranks or default_ranks(self.n), self.basis_seed,
                               v_bound=self.v_bound)

    def noise(self):
        return NoiseModel(self.noise_kind, self.noise_scale)

    def aggregation(self, **overrides):
        noise = self.noise()
        kw = dict(beta=self.beta, delta=self.delta, eta=self.eta,
                  penalty_rule=self.penalty_rule, sigma_sq=noise.sigma_sq,
                  v_bound=self.collection().v_bound, kappa=self.kappa)
        kw.update(overrides)
        return AggregationConfig(**kw)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _fail_key(key, exc):
    return ConfigError(f"{key}: {exc}")


def validate(cfg):
    """Build every object the run needs; raise ConfigError naming the key at fault."""
    for key, build in (("signal.kind", cfg.signal), ("collection.kind", cfg.collection),
                       ("noise.kind", cfg.noise), ("agg.beta", cfg.aggregation)):
        try:
            build()
        except (ValidationError, DomainError) as exc:
            raise _fail_key(key, exc) from None
    for key in ("run.trials", "moments.samples", "moments.pairs", "mgf.directions", "mgf.samples"):
        if getattr(cfg, _KEYS[key][0]) < 1:
            raise ConfigError(f"{key}: must be at least 1")
    if cfg.moment_nu <= 0:
        raise ConfigError("moments.nu: must be positive")
    return cfg


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        field_name, parse = _KEYS[key]
        try:
            values[field_name] = parse(value)
        except ValueError:
            raise ConfigError(
                f"{key}: cannot parse {value!r} as {getattr(parse, '__name__', parse)}"
            ) from None
    missing = [k for k in REQUIRED if _KEYS[k][0] not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    return validate(RunConfig(**values))


def _render_value(v):
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_config(cfg):
    lines = [f"{_FIELD_TO_KEY[f.name]} = {_render_value(getattr(cfg, f.name))}"
             for f in dataclasses.fields(cfg)]
    return "\n".join(lines) + "\n"


def config_echo(cfg):
    """Mapping of config keys to plain JSON-able values, in key order."""
    out = {}
    for key, (name, _) in _KEYS.items():
        v = getattr(cfg, name)
        out[key] = list(v) if isinstance(v, tuple) else v
    return out
