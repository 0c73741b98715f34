"""Batch numerical verification of the solver's structural claims.

Each case checks one claim on one system size across a list of seeds:

- measured matrix ranks against their closed-form predictions, including the
  full-rank gate that decides when the pseudo-inverse recovery applies;
- the feasibility identity of the recovered precoder (the numerator matrix
  lies in the row space of the Gram matrix, so W_hat D = C to roundoff);
- orthogonality of the lifted symbol vectors to the Gram null space;
- descent of the augmented Lagrangian when the penalty sits above the
  guaranteed-descent threshold, plus the per-iteration stationarity
  cancellation of the inequality-form scheme;
- single-matrix-factorization caching across iterations.

Failures are report entries, never exceptions; the report serializes to
JSON so a CI step can consume it and gate on the aggregate flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ci_geometry import build_geometry
from .model import Constellation, sample_channel, sample_generic_symbols
from .qp_builder import (
    build_qp,
    null_space_products,
    rank_report,
    verify_pinv_feasibility,
)
from .solvers import SCHEME2, AdmmConfig, monotone_rho, solve

# spans short blocks (N < K), the square boundary (N = K), and long blocks
# (N > K) so both branches of the rank predictions are exercised
DEFAULT_SIZES = (
    (6, 6, 4),
    (8, 8, 6),
    (10, 10, 8),
    (12, 12, 10),
    (4, 4, 4),
    (3, 3, 5),
    (2, 2, 4),
)
DEFAULT_SEEDS = tuple(range(5))
DEFAULT_TOLERANCE = 1e-9
MAX_PROBLEM_DIM = 512  # largest 2NK the suite will assemble

_DESCENT_ITERS = 500


@dataclass(frozen=True)
class VerificationCase:
    """Outcome of one check on one size: pass flag plus measured values."""

    name: str
    dims: tuple
    seeds: tuple
    tolerance: float
    passed: bool
    measured: dict

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "dims": list(self.dims),
            "seeds": list(self.seeds),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "measured": self.measured,
        }


@dataclass(frozen=True)
class VerificationReport:
    """All cases of one run; the suite passes only if every case passed."""

    cases: tuple

    @property
    def passed(self) -> bool:
        return all(case.passed for case in self.cases)

    @property
    def failures(self) -> tuple:
        return tuple(case for case in self.cases if not case.passed)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "num_cases": len(self.cases),
            "num_failures": len(self.failures),
            "cases": [case.as_dict() for case in self.cases],
        }

    def to_json(self, indent: int = 1) -> str:
        return json.dumps(self.as_dict(), indent=indent)


def _instance(seed: int, dims: tuple):
    """Deterministic geometry + QP for one (seed, size) cell.

    Rank predictions are generic-position claims, so the symbol draw is
    guarded against rank-deficient blocks; the guard is part of the
    deterministic derivation from the seed.
    """
    num_antennas, num_users, block_length = dims
    rng = np.random.default_rng(seed)
    channel = sample_channel(rng, num_users, num_antennas)
    block = sample_generic_symbols(rng, num_users, block_length, Constellation(8))
    geometry = build_geometry(channel, block)
    return geometry, build_qp(geometry)


def _rank_case(dims: tuple, seeds: tuple) -> VerificationCase:
    num_antennas, num_users, block_length = dims
    two_k, two_n = 2 * num_users, 2 * block_length
    predicted = {
        "rank_d": min(two_k, two_n),
        "rank_u1": min(two_k, two_n),
        "rank_u2": num_users,
        "rank_u_hat": min(two_n * num_users, two_k * num_users),
        "rank_u": min(two_n * num_users, two_k * num_users),
        "closed_form_applicable": block_length <= num_users,
    }
    mismatches = []
    for seed in seeds:
        geometry, qp = _instance(seed, dims)
        measured = rank_report(geometry, qp.gram, qp).as_dict()
        for key, want in predicted.items():
            got = measured[key]
            if got != want:
                mismatches.append({"seed": seed, "field": key,
                                   "predicted": want, "measured": got})
    return VerificationCase(
        name="ranks",
        dims=dims,
        seeds=seeds,
        tolerance=0.0,
        passed=not mismatches,
        measured={"predicted": predicted, "violations": len(mismatches),
                  "mismatches": mismatches},
    )


def _feasibility_case(dims: tuple, seeds: tuple, tolerance: float) -> VerificationCase:
    worst = 0.0
    for seed in seeds:
        geometry, qp = _instance(seed, dims)
        rng = np.random.default_rng(seed + 1)
        weights = rng.exponential(size=qp.size)
        worst = max(worst, verify_pinv_feasibility(qp, weights / weights.sum()))
    return VerificationCase(
        name="pinv_feasibility",
        dims=dims,
        seeds=seeds,
        tolerance=tolerance,
        passed=worst <= tolerance,
        measured={"max_relative_residual": worst},
    )


def _null_space_case(dims: tuple, seeds: tuple, tolerance: float) -> VerificationCase:
    worst = 0.0
    null_dims = []
    for seed in seeds:
        geometry, qp = _instance(seed, dims)
        worst = max(worst, null_space_products(geometry, qp.gram))
        null_dims.append(int(qp.gram.null_basis.shape[1]))
    return VerificationCase(
        name="null_space_orthogonality",
        dims=dims,
        seeds=seeds,
        tolerance=tolerance,
        passed=worst <= tolerance,
        measured={"max_abs_product": worst, "null_dims": null_dims},
    )


def _descent_case(dims: tuple, seeds: tuple, tolerance: float) -> VerificationCase:
    """Augmented-Lagrangian descent at the guaranteed penalty, stationarity

    cancellation each iteration, and the single-factorization cache counter,
    all measured on the same inequality-form runs."""
    increases = 0
    worst_rise = 0.0
    worst_gap = 0.0
    factor_counts = []
    for seed in seeds:
        _, qp = _instance(seed, dims)
        config = AdmmConfig(rho=monotone_rho(qp.max_eig), max_iters=_DESCENT_ITERS)
        result = solve(qp, SCHEME2, config)
        trace = np.asarray(result.state.trace.lagrangian)
        rises = np.diff(trace)
        increases += int(np.count_nonzero(rises > tolerance))
        if rises.size:
            worst_rise = max(worst_rise, float(rises.max()))
        worst_gap = max(worst_gap, float(result.stationarity_gaps.max()))
        factor_counts.append(result.stats.factor_count)
    passed = increases == 0 and worst_gap <= tolerance and set(factor_counts) == {1}
    return VerificationCase(
        name="penalized_descent",
        dims=dims,
        seeds=seeds,
        tolerance=tolerance,
        passed=passed,
        measured={
            "monotonicity_violations": increases,
            "worst_rise": worst_rise,
            "max_stationarity_gap": worst_gap,
            "factor_counts": factor_counts,
            "iterations": _DESCENT_ITERS,
        },
    )


def run_all(sizes=None, seeds=None, tolerance: float = DEFAULT_TOLERANCE) -> VerificationReport:
    """Execute every check on every (size, seed) cell and collect the report.

    sizes are (num_antennas, num_users, block_length) triples with
    2*N*K <= 512; seeds is any iterable of integers.
    """
    sizes = tuple(tuple(size) for size in (DEFAULT_SIZES if sizes is None else sizes))
    seeds = tuple(int(seed) for seed in (DEFAULT_SEEDS if seeds is None else seeds))
    if not sizes or not seeds:
        raise ValueError("need at least one size and one seed")
    for size in sizes:
        if len(size) != 3 or min(size) < 1:
            raise ValueError(f"size must be three positive ints, got {size!r}")
        if 2 * size[1] * size[2] > MAX_PROBLEM_DIM:
            raise ValueError(
                f"size {size!r} gives problem dimension {2 * size[1] * size[2]}"
                f" > {MAX_PROBLEM_DIM}")
    cases = []
    for dims in sizes:
        cases.append(_rank_case(dims, seeds))
        cases.append(_feasibility_case(dims, seeds, tolerance))
        cases.append(_null_space_case(dims, seeds, tolerance))
        cases.append(_descent_case(dims, seeds, tolerance))
    return VerificationReport(cases=tuple(cases))
