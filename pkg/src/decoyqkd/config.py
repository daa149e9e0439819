"""Run configuration and experiment-count files.

Configuration files are flat text, one ``key = value`` per line, with ``#``
starting a comment. List values are comma separated. Count files are a CSV
with a header row and exactly one data row.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields, replace

from .channel import ChannelParams, FiniteCounts, SourceParams
from .finite import ASYMPTOTIC_METHODS, METHODS

MODES = ("derived", "published")
ESTIMATORS = METHODS


class ConfigError(ValueError):
    """Malformed configuration or count file. ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    """Everything a batch run needs.

    ``N`` lists the data sizes; ``inf`` stands for the fluctuation-free
    limit. ``vacuum_split`` is the (signal, weak, vacuum) selection split used
    by the vacuum+weak estimator in finite-size runs. ``mode`` selects the
    coefficient and single-photon deviation variants of the tangent-line
    estimator.
    """

    mu: float = 0.6
    nu: float = 0.2
    p_mu: float = 6 / 7
    p_nu: float = 1 / 7
    vacuum_split: tuple = (0.75, 0.125, 0.125)
    alpha_db_per_km: float = 0.21
    eta_d: float = 0.72
    Y0: float = 3e-8
    e_d: float = 0.015
    N: tuple = (1e11,)
    epsilon: float = 1e-10
    f: float = 1.06
    methods: tuple = ASYMPTOTIC_METHODS
    distance_start: float = 0.0
    distance_stop: float = 260.0
    distance_step: float = 1.0
    mode: str = "derived"
    seed: int = 0
    trials: int = 100000
    validate_estimator: str = "improved"
    validate_distance: float = 50.0
    validate_N: float = 1e7
    validate_epsilon: float = 0.01
    trial_csv: str = ""
    out: str = ""

    def __post_init__(self):
        if not self.distance_step > 0:
            raise ConfigError("distance_step", "must be > 0")
        if self.distance_stop < self.distance_start:
            raise ConfigError("distance_stop", "must be >= distance_start")
        for m in self.methods:
            if m not in ASYMPTOTIC_METHODS:
                raise ConfigError("methods", f"unknown method {m!r}")
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {MODES}")
        if self.validate_estimator not in ESTIMATORS:
            raise ConfigError("validate_estimator", f"must be one of {ESTIMATORS}")
        for n in self.N:
            if not n > 0:
                raise ConfigError("N", f"data sizes must be positive, got {n}")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon", "must be in (0, 1)")
        if not 0 < self.validate_epsilon < 1:
            raise ConfigError("validate_epsilon", "must be in (0, 1)")
        if len(self.vacuum_split) != 3:
            raise ConfigError("vacuum_split", "needs three probabilities")
        try:
            self.source()
            self.vacuum_source()
            self.channel()
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError("source/channel", str(err)) from err

    def source(self) -> SourceParams:
        return SourceParams(self.mu, self.nu, self.p_mu, self.p_nu)

    def vacuum_source(self) -> SourceParams:
        return SourceParams.with_vacuum(self.mu, self.nu, *self.vacuum_split)

    def channel(self, length_km: float = 0.0) -> ChannelParams:
        return ChannelParams(length_km, self.alpha_db_per_km, self.eta_d, self.Y0, self.e_d)

    def improved_options(self) -> dict:
        if self.mode == "published":
            return {"coefficient": "published", "delta_n": "closed-form"}
        return {"coefficient": "derived", "delta_n": "exact"}

    def distances(self) -> list[float]:
        count = int(math.floor((self.distance_stop - self.distance_start)
                               / self.distance_step + 1e-9))
        return [round(self.distance_start + k * self.distance_step, 10)
                for k in range(count + 1)]


_TUPLE_TYPES = {"vacuum_split": float, "N": float, "methods": str}


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """Text form of ``config``; :func:`parse_config` inverts it exactly."""
    return "".join(f"{k} = {_format(v)}\n" for k, v in asdict(config).items())


def _convert(name: str, kind, text: str):
    try:
        if name in _TUPLE_TYPES:
            items = [t.strip() for t in text.split(",") if t.strip()]
            return tuple(_TUPLE_TYPES[name](t) for t in items)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError as err:
        raise ConfigError(name, f"cannot parse {text!r}") from err


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines on top of ``base`` (defaults if omitted)."""
    types = {f.name: f.type for f in fields(RunConfig)}
    kinds = {"float": float, "int": int, "str": str, "tuple": tuple}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _convert(key, kinds[types[key]], val)
    return replace(base or RunConfig(), **values)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def save_config(config: RunConfig, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_config(config))


COUNT_FIELDS = ("N", "N_mu", "N_nu", "n_mu", "n_nu", "m_mu", "m_nu")
VACUUM_FIELDS = ("N_vac", "n_vac", "m_vac")


def parse_counts(rows: list[dict]) -> FiniteCounts:
    """Validated counts from parsed CSV records (exactly one record)."""
    if len(rows) != 1:
        raise ConfigError("counts", f"expected exactly one record, got {len(rows)}")
    row = {k.strip(): (v or "").strip() for k, v in rows[0].items() if k is not None}
    missing = [k for k in COUNT_FIELDS if k not in row]
    if missing:
        raise ConfigError(missing[0], "missing column")
    unknown = [k for k in row if k not in COUNT_FIELDS + VACUUM_FIELDS]
    if unknown:
        raise ConfigError(unknown[0], "unknown column")
    values = {}
    for key, text in row.items():
        try:
            val = float(text)
        except ValueError as err:
            raise ConfigError(key, f"not a number: {text!r}") from err
        if not math.isfinite(val) or val < 0:
            raise ConfigError(key, f"must be a finite non-negative count, got {text!r}")
        values[key] = val
    try:
        return FiniteCounts(**values)
    except ValueError as err:
        raise ConfigError("counts", f"rejected: {err}") from err


def ingest_counts(path: str) -> FiniteCounts:
    """Read a single-record counts CSV."""
    with open(path, newline="") as fh:
        return parse_counts(list(csv.DictReader(fh)))


def write_counts(counts: FiniteCounts, path: str) -> None:
    """Write ``counts`` so that :func:`ingest_counts` reads them back exactly."""
    names = COUNT_FIELDS + (VACUUM_FIELDS if counts.N_vac > 0 else ())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerow([repr(float(getattr(counts, k))) for k in names])
