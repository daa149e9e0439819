"""Batch runs behind the command line: scans, max-distance tables, validation.

CSV conventions: fixed column order, numbers written with 12 significant
digits, key rates below ``RATE_FLOOR`` written as 0 and quantities that were
not computed left empty.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor

from . import asymptotic as asym
from .channel import FiniteCounts, simulate_rates
from .config import RunConfig
from .finite import (ASYMPTOTIC_METHODS, asymptotic_rate, finite_improved_rate,
                     finite_one_decoy_rate, finite_rate, finite_vacuum_weak_rate,
                     max_distance)
from .montecarlo import estimate_failure_rate

RATE_FLOOR = 1e-15

SCAN_COLUMNS = (("N", "distance_km")
                + tuple(f"R_{m}" for m in ASYMPTOTIC_METHODS)
                + ("e_t", "delta_N", "delta_1", "delta_2", "correction"))
MAX_DISTANCE_COLUMNS = (("N",) + tuple(f"L_{m}" for m in ASYMPTOTIC_METHODS)
                        + tuple(f"evals_{m}" for m in ASYMPTOTIC_METHODS))
COUNTS_COLUMNS = ("method", "R_lower", "epsilon_total", "e_t", "deltas", "notes")


def fmt(value) -> str:
    """12-significant-digit text; ``None`` and NaN become empty fields."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.12g}"


def fmt_rate(value) -> str:
    if value is None:
        return ""
    return fmt(0.0 if value < RATE_FLOOR else value)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([row.get(c, "") for c in columns])
    return buf.getvalue()


def write_text(text: str, path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _source_for(config: RunConfig, method: str, finite: bool):
    # only finite vacuum+weak runs see the three-way split; the fluctuation-free
    # rate depends on the signal probability alone and uses the main source
    if method == "vacuum-weak" and finite:
        return config.vacuum_source()
    return config.source()


def _method_options(config: RunConfig, method: str) -> dict:
    return config.improved_options() if method == "improved" else {}


def _correction(config: RunConfig, length: float) -> float:
    rates = simulate_rates(config.source(), config.channel(length))
    try:
        return asym.closed_form_terms(rates, config.source())[1]
    except (ZeroDivisionError, ValueError):
        return math.nan


def scan_point(config: RunConfig, N: float, length: float) -> dict:
    """One scan row at data size ``N`` (``inf`` for asymptotic) and ``length``."""
    finite = math.isfinite(N)
    channel = config.channel(length)
    row = {"N": fmt(N), "distance_km": fmt(length)}
    for method in config.methods:
        src = _source_for(config, method, finite)
        if finite and method != "infinite-decoy":
            r = finite_rate(method, src, channel, N, config.f, config.epsilon,
                            **_method_options(config, method)).R_lower
        else:
            r = asymptotic_rate(method, src, channel, config.f)
        row[f"R_{method}"] = fmt_rate(r)
    if finite:
        res = finite_rate("improved", config.source(), channel, N, config.f, config.epsilon,
                          **config.improved_options())
        if res.tangent is not None:
            row["e_t"] = fmt(res.tangent.e_t)
            for name, d in zip(("delta_N", "delta_1", "delta_2"), res.deltas):
                row[name] = fmt(float(d))
    else:
        rates = simulate_rates(config.source(), channel)
        row["e_t"] = fmt(asym.preferred_tangent(rates, config.source()).e_t)
    row["correction"] = fmt(_correction(config, length))
    return row


def _scan_task(args):
    return scan_point(*args)


def _map(func, tasks, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, tasks))
    return [func(t) for t in tasks]


def run_scan(config: RunConfig, workers: int = 1) -> str:
    """Distance scan for every data size in ``config.N``; returns CSV text.

    Rows come out in (N, distance) input order regardless of ``workers``. An
    empty method list yields the header alone.
    """
    if not config.methods:
        return to_csv(SCAN_COLUMNS, [])
    tasks = [(config, N, d) for N in config.N for d in config.distances()]
    return to_csv(SCAN_COLUMNS, _map(_scan_task, tasks, workers))


def _max_distance_row(args):
    config, N = args
    finite = math.isfinite(N)
    row = {"N": fmt(N)}
    for method in config.methods:
        src = _source_for(config, method, finite)
        calls = [0]

        def rate_at(length, method=method, src=src):
            calls[0] += 1
            channel = config.channel(length)
            if finite and method != "infinite-decoy":
                return finite_rate(method, src, channel, N, config.f, config.epsilon,
                                   **_method_options(config, method)).R_lower
            return asymptotic_rate(method, src, channel, config.f)

        row[f"L_{method}"] = fmt(max_distance(rate_at))
        row[f"evals_{method}"] = str(calls[0])
    return row


def run_max_distance(config: RunConfig, workers: int = 1) -> str:
    """Maximum positive-rate distance per data size and method; CSV text."""
    if not config.N:
        raise ValueError("N list is empty")
    return to_csv(MAX_DISTANCE_COLUMNS,
                  _map(_max_distance_row, [(config, N) for N in config.N], workers))


def run_validate(config: RunConfig):
    """Monte Carlo coverage run; returns ``(summary, CSV text)``."""
    est = config.validate_estimator
    src = _source_for(config, est, True)
    summary = estimate_failure_rate(
        est, src, config.channel(config.validate_distance), int(config.validate_N),
        config.validate_epsilon, config.trials, config.seed, f=config.f,
        trial_csv=config.trial_csv or None)
    record = summary.as_record()
    columns = tuple(record)
    return summary, to_csv(columns, [{k: fmt(v) for k, v in record.items()}])


def rate_from_counts(config: RunConfig, counts: FiniteCounts) -> str:
    """Key rates of every applicable estimator on measured counts; CSV text."""
    rows = []
    for method in config.methods:
        if method == "improved":
            res = finite_improved_rate(counts, config.source(), config.f, config.epsilon,
                                       **config.improved_options())
        elif method == "one-decoy":
            res = finite_one_decoy_rate(counts, config.source(), config.f, config.epsilon)
        elif method == "vacuum-weak":
            if counts.N_vac <= 0:
                continue
            res = finite_vacuum_weak_rate(counts, config.vacuum_source(), config.f,
                                          config.epsilon)
        else:
            continue
        deltas = []
        for d in res.deltas:
            if hasattr(d, "delta_upper"):
                # per-count deviations of the baselines: lower/upper tail
                deltas.append(f"{fmt(d.delta_lower)}/{fmt(d.delta_upper)}")
            else:
                deltas.append(fmt(float(d)))
        rows.append({
            "method": method, "R_lower": fmt_rate(res.R_lower),
            "epsilon_total": fmt(res.epsilon_total),
            "e_t": fmt(res.tangent.e_t) if res.tangent is not None else "",
            "deltas": " ".join(deltas), "notes": "; ".join(res.notes),
        })
    return to_csv(COUNTS_COLUMNS, rows)
