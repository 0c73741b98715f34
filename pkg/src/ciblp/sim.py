"""Monte-Carlo SER and runtime harness with seeded reproducibility.

Every (sweep point, channel trial) pair owns three independent random
streams — channel, symbols, noise — derived from the master seed through
a spawn-key tree. The scheme tag never enters the derivation, so runs that
differ only in the precoding scheme see identical draws and compare under
common random numbers. Trials partition freely across workers, and counts
merge by summation, so the partitioning can never change a result.

SNR follows the 1/sigma^2 convention of the model layer; the per-point
noise variance is 10^(-snr_db/10), with an infinite SNR meaning exactly
zero noise.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import subprocess
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .baselines import ci_slp_precoder, rzf_precoder, zf_precoder
from .ci_geometry import build_geometry
from .model import (
    Constellation,
    NoiseModel,
    SUPPORTED_ORDERS,
    detect,
    sample_channel,
    sample_noise,
    sample_symbols,
)
from .precoder import recover_precoder
from .qp_builder import build_qp
from .solvers import SCHEME1, SCHEME2, AdmmConfig, oracle_solve, solve

CSV_HEADER = ("scheme", "axis", "errors", "symbols", "ser", "median_ms", "iters")

# solver accuracy for the exact-reference scheme; sweeps can override per call
DEFAULT_ORACLE_TOL = 1e-8

_ADMM_KINDS = {"ci-blp-admm1": SCHEME1, "ci-blp-admm2": SCHEME2}
_PLAIN_KINDS = ("zf", "rzf", "ci-slp", "ci-blp-oracle")


@dataclass(frozen=True)
class SchemeSpec:
    """Parsed scheme tag: the family plus an iteration budget where one applies."""

    kind: str
    budget: int | None = None


def parse_scheme(tag: str) -> SchemeSpec:
    """Parse a scheme tag such as 'zf', 'ci-slp', or 'ci-blp-admm2-50'."""
    if tag in _PLAIN_KINDS:
        return SchemeSpec(kind=tag)
    for prefix, _ in _ADMM_KINDS.items():
        if tag.startswith(prefix + "-"):
            suffix = tag[len(prefix) + 1:]
            if suffix.isdigit() and int(suffix) >= 1:
                return SchemeSpec(kind=prefix, budget=int(suffix))
            raise ValueError(f"iteration budget in {tag!r} must be a positive integer")
    raise ValueError(
        f"unknown scheme tag {tag!r}; expected one of {_PLAIN_KINDS} or "
        f"ci-blp-admm1-<budget> / ci-blp-admm2-<budget>")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep description: scheme, system size, axis, and trial budget."""

    scheme: str
    num_antennas: int
    num_users: int
    block_length: int
    psk_order: int
    snr_db: tuple[float, ...]
    block_lengths: tuple[int, ...] | None
    trials: int
    blocks_per_channel: int
    seed: int
    p0: float = 1.0
    # ADMM penalty for iterative schemes; None keeps the solver default.
    # The useful range scales with the quadratic form's top eigenvalue, so
    # experiments at a given size typically set this once, record it in the
    # sidecar, and reuse it across budgets.
    rho: float | None = None

    def __post_init__(self):
        parse_scheme(self.scheme)
        for name in ("num_antennas", "num_users", "block_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.psk_order not in SUPPORTED_ORDERS:
            raise ValueError(f"psk_order must be one of {SUPPORTED_ORDERS}, got {self.psk_order}")
        object.__setattr__(self, "snr_db", tuple(float(v) for v in self.snr_db))
        if len(self.snr_db) == 0:
            raise ValueError("snr_db axis must be non-empty")
        if self.block_lengths is not None:
            object.__setattr__(self, "block_lengths", tuple(int(v) for v in self.block_lengths))
            if len(self.block_lengths) == 0:
                raise ValueError("block_lengths axis must be non-empty when given")
            if any(n < 1 for n in self.block_lengths):
                raise ValueError("every swept block length must be >= 1")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.blocks_per_channel < 1:
            raise ValueError(f"blocks_per_channel must be >= 1, got {self.blocks_per_channel}")
        if not self.p0 > 0:
            raise ValueError(f"p0 must be positive, got {self.p0}")
        if self.rho is not None and not float(self.rho) > 0:
            raise ValueError(f"rho must be positive when given, got {self.rho}")


@dataclass(frozen=True)
class SweepPoint:
    """One result row: scheme tag, axis value, counts, and solve statistics."""

    scheme: str
    axis: float
    errors: int
    symbols: int
    ser: float
    median_ms: float
    iters: float


@dataclass(frozen=True)
class SerResult:
    """All rows of one sweep plus the configuration that produced them."""

    points: tuple[SweepPoint, ...]
    config: ExperimentConfig


def derive_streams(seed: int, point_index: int, trial_index: int):
    """Three generators (channel, symbols, noise) for one sweep point trial."""
    root = np.random.SeedSequence(entropy=seed, spawn_key=(point_index, trial_index))
    return tuple(np.random.default_rng(child) for child in root.spawn(3))


def _noise_variance(snr_db: float) -> float:
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return NoiseModel.from_snr_db(snr_db).variance


def _partition(trials: int, workers: int) -> list[range]:
    workers = max(1, int(workers))
    return [range(w, trials, workers) for w in range(workers)]


class _BlockSolve:
    __slots__ = ("transmit", "seconds", "iterations")

    def __init__(self, transmit, seconds, iterations):
        self.transmit = transmit
        self.seconds = seconds
        self.iterations = iterations


def _make_block_solver(spec: SchemeSpec, p0: float, sigma2: float, oracle_tol: float,
                       rho: float | None = None):
    """Callable (channel, block) -> _BlockSolve for one scheme at one point."""
    if spec.kind == "zf":
        def run(channel, block):
            start = time.perf_counter()
            rec = zf_precoder(channel, block, p0=p0)
            transmit = rec.w_complex @ block.symbols
            return _BlockSolve(transmit, time.perf_counter() - start, 0)
    elif spec.kind == "rzf":
        def run(channel, block):
            start = time.perf_counter()
            rec = rzf_precoder(channel, block, p0=p0, sigma2=sigma2)
            transmit = rec.w_complex @ block.symbols
            return _BlockSolve(transmit, time.perf_counter() - start, 0)
    elif spec.kind == "ci-slp":
        def run(channel, block):
            start = time.perf_counter()
            transmit = ci_slp_precoder(channel, block, p0=p0, oracle_tol=oracle_tol)
            return _BlockSolve(transmit, time.perf_counter() - start, 0)
    elif spec.kind == "ci-blp-oracle":
        def run(channel, block):
            start = time.perf_counter()
            geometry = build_geometry(channel, block)
            qp = build_qp(geometry)
            delta, iterations = oracle_solve(qp, tol=oracle_tol, return_iterations=True)
            rec = recover_precoder(geometry, qp.gram, delta, p0=p0)
            transmit = rec.w_complex @ block.symbols
            return _BlockSolve(transmit, time.perf_counter() - start, iterations)
    else:
        scheme = _ADMM_KINDS[spec.kind]
        config = (AdmmConfig(max_iters=spec.budget) if rho is None
                  else AdmmConfig(rho=rho, max_iters=spec.budget))

        def run(channel, block):
            start = time.perf_counter()
            geometry = build_geometry(channel, block)
            qp = build_qp(geometry)
            result = solve(qp, scheme, config)
            delta = np.clip(result.delta, 0.0, None)
            rec = recover_precoder(geometry, qp.gram, delta, p0=p0)
            transmit = rec.w_complex @ block.symbols
            return _BlockSolve(transmit, time.perf_counter() - start,
                               result.stats.iterations)
    return run


def _run_point(config: ExperimentConfig, spec: SchemeSpec, point_index: int,
               block_length: int, sigma2: float, trial_indices, oracle_tol: float):
    """Accumulate errors/times over one partition of one sweep point."""
    constellation = Constellation(config.psk_order)
    solver = _make_block_solver(spec, config.p0, sigma2, oracle_tol, rho=config.rho)
    users, antennas = config.num_users, config.num_antennas
    errors = 0
    seconds = []
    iterations = []
    for trial in trial_indices:
        rng_channel, rng_symbols, rng_noise = derive_streams(config.seed, point_index, trial)
        channel = sample_channel(rng_channel, users, antennas)
        for _ in range(config.blocks_per_channel):
            block = sample_symbols(rng_symbols, users, block_length, constellation)
            noise = sample_noise(rng_noise, (users, block_length), sigma2)
            outcome = solver(channel, block)
            received = channel.entries @ outcome.transmit + noise
            errors += int(np.count_nonzero(detect(received, constellation) != block.indices))
            seconds.append(outcome.seconds)
            iterations.append(outcome.iterations)
    return errors, seconds, iterations


def _finish_point(config, scheme_tag, axis, errors, seconds, iterations, block_length):
    symbols = config.num_users * block_length * config.blocks_per_channel * config.trials
    return SweepPoint(
        scheme=scheme_tag,
        axis=float(axis),
        errors=errors,
        symbols=symbols,
        ser=errors / symbols,
        median_ms=1e3 * float(np.median(seconds)),
        iters=float(np.median(iterations)),
    )


def run_ser_sweep(config: ExperimentConfig, workers: int = 1,
                  oracle_tol: float = DEFAULT_ORACLE_TOL) -> SerResult:
    """SER versus SNR for one scheme: row per entry of config.snr_db."""
    spec = parse_scheme(config.scheme)
    points = []
    for point_index, snr in enumerate(config.snr_db):
        sigma2 = _noise_variance(snr)
        errors = 0
        seconds = []
        iterations = []
        for part in _partition(config.trials, workers):
            e, s, i = _run_point(config, spec, point_index, config.block_length,
                                 sigma2, part, oracle_tol)
            errors += e
            seconds.extend(s)
            iterations.extend(i)
        points.append(_finish_point(config, config.scheme, snr, errors, seconds,
                                    iterations, config.block_length))
    return SerResult(points=tuple(points), config=config)


def run_blocklength_sweep(config: ExperimentConfig, workers: int = 1,
                          oracle_tol: float = DEFAULT_ORACLE_TOL) -> SerResult:
    """SER versus block length at fixed SNR (the first snr_db entry)."""
    if config.block_lengths is None:
        raise ValueError("block-length sweep needs config.block_lengths")
    spec = parse_scheme(config.scheme)
    sigma2 = _noise_variance(config.snr_db[0])
    points = []
    for point_index, length in enumerate(config.block_lengths):
        errors = 0
        seconds = []
        iterations = []
        for part in _partition(config.trials, workers):
            e, s, i = _run_point(config, spec, point_index, length, sigma2,
                                 part, oracle_tol)
            errors += e
            seconds.extend(s)
            iterations.extend(i)
        points.append(_finish_point(config, config.scheme, length, errors, seconds,
                                    iterations, length))
    return SerResult(points=tuple(points), config=config)


def run_budget_sweep(config: ExperimentConfig, budgets=(10, 30, 50),
                     include_oracle: bool = True, workers: int = 1,
                     oracle_tol: float = DEFAULT_ORACLE_TOL) -> SerResult:
    """SER at several iteration budgets from one solver run per block.

    The splitting scheme runs once per block to the largest budget while
    snapshotting the iterate at every requested budget, so all budget rows
    share the block's draws and factorization. A budget's solve time is the
    factorization/setup time plus the measured time of its first `budget`
    iterations. The optional exact-solver reference row carries axis 0.
    """
    spec = parse_scheme(config.scheme)
    if spec.kind not in _ADMM_KINDS:
        raise ValueError("budget sweep needs a ci-blp-admm1/2-<budget> scheme")
    budgets = tuple(sorted(int(b) for b in budgets))
    if budgets[0] < 1:
        raise ValueError("budgets must be positive")
    if budgets[-1] > spec.budget:
        raise ValueError(f"largest budget {budgets[-1]} exceeds the scheme cap {spec.budget}")
    scheme = _ADMM_KINDS[spec.kind]
    admm_config = (AdmmConfig(max_iters=spec.budget) if config.rho is None
                   else AdmmConfig(rho=config.rho, max_iters=spec.budget))
    constellation = Constellation(config.psk_order)
    sigma2 = _noise_variance(config.snr_db[0])
    users, antennas = config.num_users, config.num_antennas
    length = config.block_length

    tags = [f"{spec.kind}-{b}" for b in budgets]
    errors = {tag: 0 for tag in tags}
    seconds = {tag: [] for tag in tags}
    if include_oracle:
        errors["ci-blp-oracle"] = 0
        seconds["ci-blp-oracle"] = []
    oracle_iterations = []

    for part in _partition(config.trials, workers):
        for trial in part:
            rng_channel, rng_symbols, rng_noise = derive_streams(config.seed, 0, trial)
            channel = sample_channel(rng_channel, users, antennas)
            for _ in range(config.blocks_per_channel):
                block = sample_symbols(rng_symbols, users, length, constellation)
                noise = sample_noise(rng_noise, (users, length), sigma2)

                start = time.perf_counter()
                geometry = build_geometry(channel, block)
                qp = build_qp(geometry)
                assembled = time.perf_counter() - start
                result = solve(qp, scheme, admm_config, snapshot_iters=budgets)
                setup = result.stats.wall_time - float(np.sum(result.stats.iter_times))

                for budget, tag in zip(budgets, tags):
                    delta = np.clip(result.snapshots[budget], 0.0, None)
                    rec = recover_precoder(geometry, qp.gram, delta, p0=config.p0)
                    received = channel.entries @ (rec.w_complex @ block.symbols) + noise
                    errors[tag] += int(np.count_nonzero(
                        detect(received, constellation) != block.indices))
                    seconds[tag].append(
                        assembled + setup + float(np.sum(result.stats.iter_times[:budget])))

                if include_oracle:
                    start = time.perf_counter()
                    delta, iters = oracle_solve(qp, tol=oracle_tol, return_iterations=True)
                    oracle_seconds = time.perf_counter() - start
                    rec = recover_precoder(geometry, qp.gram, delta, p0=config.p0)
                    received = channel.entries @ (rec.w_complex @ block.symbols) + noise
                    errors["ci-blp-oracle"] += int(np.count_nonzero(
                        detect(received, constellation) != block.indices))
                    seconds["ci-blp-oracle"].append(assembled + oracle_seconds)
                    oracle_iterations.append(iters)

    points = [_finish_point(config, tag, budget, errors[tag], seconds[tag],
                            [budget], length)
              for budget, tag in zip(budgets, tags)]
    if include_oracle:
        points.append(_finish_point(config, "ci-blp-oracle", 0, errors["ci-blp-oracle"],
                                    seconds["ci-blp-oracle"], oracle_iterations, length))
    return SerResult(points=tuple(points), config=config)


def run_timing_bench(config: ExperimentConfig, schemes=None,
                     oracle_tol: float = DEFAULT_ORACLE_TOL) -> SerResult:
    """Per-block solve time (and SER) for several schemes on identical draws.

    Every scheme replays sweep point 0 of the same seed, so the timing
    comparison is paired block for block.
    """
    if schemes is None:
        schemes = ("zf", "rzf", "ci-slp", config.scheme)
    sigma2 = _noise_variance(config.snr_db[0])
    points = []
    for tag in schemes:
        spec = parse_scheme(tag)
        errors, seconds, iterations = _run_point(
            config, spec, 0, config.block_length, sigma2, range(config.trials),
            oracle_tol)
        points.append(_finish_point(config, tag, config.snr_db[0], errors, seconds,
                                    iterations, config.block_length))
    return SerResult(points=tuple(points), config=config)


def git_revision() -> str:
    """Current repository revision, or 'unknown' outside a checkout."""
    try:
        out = subprocess.run(
            ["git", "-C", str(Path(__file__).resolve().parent), "rev-parse", "HEAD"],
            capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def _format_axis(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def write_csv(path, result: SerResult) -> None:
    """Emit one sweep as CSV with the fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for p in result.points:
            writer.writerow([p.scheme, _format_axis(p.axis), p.errors, p.symbols,
                             repr(p.ser), repr(p.median_ms), _format_axis(p.iters)])


def write_sidecar(path, result: SerResult, extra: dict | None = None) -> None:
    """Emit the JSON sidecar: full configuration, revision, and machine info."""
    payload = {
        "config": asdict(result.config),
        "git_revision": git_revision(),
        "machine": {
            "platform": platform.platform(),
            "processor": platform.processor() or platform.machine(),
            "python": platform.python_version(),
        },
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=list)
        fh.write("\n")


def build_instance(num_antennas: int, num_users: int, block_length: int,
                   psk_order: int, seed: int):
    """One seeded (geometry, qp) pair drawn through the sweep stream protocol."""
    rng_channel, rng_symbols, _ = derive_streams(seed, 0, 0)
    channel = sample_channel(rng_channel, num_users, num_antennas)
    block = sample_symbols(rng_symbols, num_users, block_length, Constellation(psk_order))
    geometry = build_geometry(channel, block)
    return geometry, build_qp(geometry)
