"""Solvers for the simplex QP min delta^T U delta, 1^T delta = 1, delta >= 0.

Two ADMM splittings share a once-factorized linear system per problem
instance; an accelerated projected-gradient method with a KKT stopping
certificate serves as the independent reference solver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

SCHEME1 = "scheme1"
SCHEME2 = "scheme2"

# smallest penalty multiple guaranteeing a non-increasing augmented Lagrangian
_MONOTONE_FACTOR = 2.0 * np.sqrt(2.0)


def monotone_rho(phi: float, margin: float = 0.05) -> float:
    """Penalty just above the descent threshold for curvature phi."""
    return _MONOTONE_FACTOR * phi * (1.0 + margin)


@dataclass(frozen=True)
class AdmmConfig:
    """Penalty, iteration budget, and optional early-stop tolerances."""

    rho: float = 1.0
    max_iters: int = 50
    tol_primal: float = 0.0
    tol_dual: float = 0.0
    rho_policy: str = "fixed"
    margin: float = 0.05

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError("penalty must be positive")
        if self.max_iters < 0:
            raise ValueError("iteration budget must be nonnegative")
        if self.tol_primal < 0.0 or self.tol_dual < 0.0:
            raise ValueError("tolerances must be nonnegative")
        if self.rho_policy not in ("fixed", "auto"):
            raise ValueError(f"unknown penalty policy {self.rho_policy!r}")


def resolve_rho(config: AdmmConfig, phi: float) -> float:
    """Effective penalty: the configured value or the curvature-scaled one."""
    if config.rho_policy == "fixed":
        return config.rho
    auto = monotone_rho(phi, config.margin)
    # zero curvature gives no scale to lean on; keep the fixed value
    return auto if auto > 0.0 else config.rho


@dataclass
class Trace:
    """Per-iteration diagnostics, one entry appended per full iteration."""

    objective: list = field(default_factory=list)
    primal: list = field(default_factory=list)
    dual: list = field(default_factory=list)
    lagrangian: list = field(default_factory=list)

    def append(self, objective, primal, dual, lagrangian):
        self.objective.append(float(objective))
        self.primal.append(float(primal))
        self.dual.append(float(dual))
        self.lagrangian.append(float(lagrangian))

    def rows(self):
        """One-indexed (iter, objective, primal, dual, lagrangian) tuples."""
        return [
            (k + 1, self.objective[k], self.primal[k], self.dual[k], self.lagrangian[k])
            for k in range(len(self.objective))
        ]

    def __len__(self):
        return len(self.objective)


@dataclass
class AdmmState:
    """Iterates of one ADMM run; omega and lam are one entry longer in scheme 2."""

    delta: np.ndarray
    omega: np.ndarray
    lam: np.ndarray
    nu: float
    rho: float
    iters: int
    omega_prev: np.ndarray | None
    trace: Trace


class CachedKkt:
    """Once-built Cholesky handle for the per-scheme linear system."""

    def __init__(self, u_matrix: np.ndarray, rho: float, scheme: str):
        dim = u_matrix.shape[0]
        if scheme == SCHEME1:
            system = 2.0 * u_matrix + rho * np.eye(dim)
        elif scheme == SCHEME2:
            system = 2.0 * u_matrix + rho * (np.ones((dim, dim)) + np.eye(dim))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.factor = cho_factor(system)
        self.factor_count = 1
        if scheme == SCHEME1:
            # pre-solved ones-column closes the equality-multiplier step
            self.ones_solve = cho_solve(self.factor, np.ones(dim))
            self.ones_inner = float(self.ones_solve.sum())

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self.factor, rhs)


def initial_state(dim: int, scheme: str, rho: float) -> AdmmState:
    """Zero initialization for either splitting."""
    aux_dim = dim if scheme == SCHEME1 else dim + 1
    return AdmmState(
        delta=np.zeros(dim),
        omega=np.zeros(aux_dim),
        lam=np.zeros(aux_dim),
        nu=0.0,
        rho=rho,
        iters=0,
        omega_prev=None,
        trace=Trace(),
    )


def _expand(delta: np.ndarray) -> np.ndarray:
    # stacks the sum constraint on top of the identity rows
    return np.concatenate([[delta.sum()], delta])


def _contract(w: np.ndarray) -> np.ndarray:
    return w[0] + w[1:]


def _slack_offset(dim: int) -> np.ndarray:
    c = np.zeros(dim + 1)
    c[0] = 1.0
    return c


def residuals(state: AdmmState, scheme: str) -> tuple:
    """Primal and dual residual norms; dual is NaN before any history exists."""
    if scheme == SCHEME1:
        primal = float(np.linalg.norm(state.delta - state.omega))
        if state.omega_prev is None:
            return primal, float("nan")
        dual = state.rho * float(np.linalg.norm(state.omega - state.omega_prev))
        return primal, dual
    if scheme == SCHEME2:
        c = _slack_offset(state.delta.size)
        primal = float(np.linalg.norm(-_expand(state.delta) + c + state.omega))
        if state.omega_prev is None:
            return primal, float("nan")
        dual = float(np.linalg.norm(_contract(state.omega - state.omega_prev)))
        return primal, dual
    raise ValueError(f"unknown scheme {scheme!r}")


def _scheme1_iterate(u_matrix, cache, state):
    rho = state.rho
    x = cache.solve(rho * state.omega + state.lam)
    nu = (x.sum() - 1.0) / cache.ones_inner
    delta = x - nu * cache.ones_solve
    omega = np.maximum(0.0, delta - state.lam / rho)
    lam = state.lam - rho * (delta - omega)
    # the zero init is not iteration history; the first dual stays a marker
    state.omega_prev = state.omega if state.iters > 0 else None
    state.delta, state.omega, state.lam, state.nu = delta, omega, lam, float(nu)
    state.iters += 1
    u_delta = u_matrix @ delta
    objective = float(delta @ u_delta)
    primal, dual = residuals(state, SCHEME1)
    gap = delta - omega
    lagrangian = objective - float(lam @ gap) + 0.5 * rho * float(gap @ gap)
    state.trace.append(objective, primal, dual, lagrangian)
    return u_delta


def _scheme2_iterate(u_matrix, cache, state, c):
    rho = state.rho
    omega = np.maximum(0.0, _expand(state.delta) - c - state.lam / rho)
    delta = cache.solve(rho * _contract(c + omega + state.lam / rho))
    gap = _expand(delta) - c - omega
    lam = state.lam - rho * gap
    state.omega_prev = state.omega if state.iters > 0 else None
    state.delta, state.omega, state.lam = delta, omega, lam
    state.iters += 1
    u_delta = u_matrix @ delta
    objective = float(delta @ u_delta)
    primal, dual = residuals(state, SCHEME2)
    lagrangian = objective - float(lam @ gap) + 0.5 * rho * float(gap @ gap)
    state.trace.append(objective, primal, dual, lagrangian)
    return u_delta


@dataclass
class SolveStats:
    """Bookkeeping for one solve call."""

    factor_count: int
    wall_time: float
    iterations: int
    iter_times: np.ndarray


@dataclass
class SolveResult:
    """Final iterate plus trace, snapshots, and timing of one ADMM run."""

    delta: np.ndarray
    state: AdmmState
    stats: SolveStats
    snapshots: dict
    rho: float
    scheme: str
    stationarity_gaps: np.ndarray | None


def _u_and_phi(qp, need_phi: bool) -> tuple:
    if isinstance(qp, np.ndarray):
        u = qp
        phi = float(np.linalg.eigvalsh(u)[-1]) if need_phi else 0.0
    else:
        u = qp.u_matrix
        phi = qp.max_eig if need_phi else 0.0
    return u, phi


def solve(qp, scheme: str, config: AdmmConfig = AdmmConfig(), snapshot_iters=()):
    """Run one ADMM scheme on an assembled problem or a bare PSD matrix.

    Iterates are zero-initialized. Early stopping triggers only when both
    residual norms drop strictly below their tolerances. `snapshot_iters`
    collects copies of delta after the named iterations; a snapshot equals
    the final iterate of a run capped at that budget.
    """
    u_matrix, phi = _u_and_phi(qp, need_phi=config.rho_policy == "auto")
    rho = resolve_rho(config, phi)
    start = time.perf_counter()
    cache = CachedKkt(u_matrix, rho, scheme)
    state = initial_state(u_matrix.shape[0], scheme, rho)
    c = _slack_offset(u_matrix.shape[0]) if scheme == SCHEME2 else None
    wanted = set(snapshot_iters)
    snapshots = {}
    gaps = [] if scheme == SCHEME2 else None
    iter_times = []
    for k in range(1, config.max_iters + 1):
        tick = time.perf_counter()
        if scheme == SCHEME1:
            _scheme1_iterate(u_matrix, cache, state)
        else:
            u_delta = _scheme2_iterate(u_matrix, cache, state, c)
            # the delta and multiplier steps cancel exactly; record the roundoff
            gaps.append(float(np.abs(2.0 * u_delta - _contract(state.lam)).max()))
        iter_times.append(time.perf_counter() - tick)
        if k in wanted:
            snapshots[k] = state.delta.copy()
        primal, dual = state.trace.primal[-1], state.trace.dual[-1]
        if (
            config.tol_primal > 0.0
            and config.tol_dual > 0.0
            and primal < config.tol_primal
            and dual < config.tol_dual
        ):
            break
    stats = SolveStats(
        factor_count=cache.factor_count,
        wall_time=time.perf_counter() - start,
        iterations=state.iters,
        iter_times=np.asarray(iter_times),
    )
    return SolveResult(
        delta=state.delta.copy(),
        state=state,
        stats=stats,
        snapshots=snapshots,
        rho=rho,
        scheme=scheme,
        stationarity_gaps=None if gaps is None else np.asarray(gaps),
    )


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort based)."""
    u = np.sort(v)[::-1]
    shifted = np.cumsum(u) - 1.0
    counts = np.arange(1, v.size + 1)
    support = counts[u - shifted / counts > 0.0][-1]
    tau = shifted[support - 1] / support
    return np.maximum(v - tau, 0.0)


def kkt_residual(u_matrix: np.ndarray, delta: np.ndarray) -> float:
    """Optimality certificate: feasibility plus complementary slackness."""
    grad = 2.0 * (u_matrix @ delta)
    feasibility = abs(float(delta.sum()) - 1.0)
    negativity = max(0.0, -float(delta.min()))
    slackness = float(np.max(delta * (grad - grad.min())))
    return max(feasibility, negativity, slackness)


class OracleConvergenceError(RuntimeError):
    """Reference solver hit its iteration cap; carries the best iterate."""

    def __init__(self, message: str, delta: np.ndarray, kkt: float):
        super().__init__(message)
        self.delta = delta
        self.kkt = kkt


def oracle_solve(qp, tol: float, max_iters: int = 200_000,
                 return_iterations: bool = False):
    """Accelerated projected gradient with restarts, stopped on the KKT certificate.

    Returns the iterate alone, or (iterate, iterations taken) when
    return_iterations is set.
    """
    u_matrix, phi = _u_and_phi(qp, need_phi=True)
    step = 1.0 / (2.0 * phi) if phi > 0.0 else 1.0
    dim = u_matrix.shape[0]
    x = np.full(dim, 1.0 / dim)
    y = x
    t = 1.0
    best_kkt = np.inf
    best = x
    for iteration in range(1, max_iters + 1):
        x_new = project_simplex(y - step * 2.0 * (u_matrix @ y))
        kkt = kkt_residual(u_matrix, x_new)
        if kkt <= tol:
            return (x_new, iteration) if return_iterations else x_new
        if kkt < best_kkt:
            best_kkt, best = kkt, x_new
        if float((y - x_new) @ (x_new - x)) > 0.0:
            # momentum points uphill; restart the acceleration sequence
            t = 1.0
            y = x_new
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_next) * (x_new - x)
            t = t_next
        x = x_new
    raise OracleConvergenceError(
        f"no KKT point within {max_iters} iterations (best residual {best_kkt:.3e})",
        delta=best,
        kkt=best_kkt,
    )
