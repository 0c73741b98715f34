"""Assembly of the simplex QP that the block precoder optimization reduces to.

The max-min margin problem over one block dualizes to

    minimize  delta' U delta   subject to  sum(delta) = 1, delta >= 0,

where U is a symmetric PSD matrix built from the per-slot margin maps and the
pseudo-inverse of the Gram matrix of all lifted symbol vectors. This module
builds that data, provides a second, independently derived factored assembly
of U used as a cross-check, and carries the feasibility / rank verification
helpers for the structural claims the construction relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ci_geometry import CiGeometry

# singular values below dim * sigma_max * RANK_RTOL count as zero
RANK_RTOL = 1e-10


def numerical_rank(matrix: np.ndarray) -> int:
    """Numerical rank of a symmetric matrix by eigenvalue-magnitude thresholding.

    For symmetric matrices the singular values are the absolute eigenvalues,
    so one symmetric eigensolve gives the thresholded rank directly.
    """
    sv = np.abs(np.linalg.eigvalsh(matrix))
    top = float(sv.max(initial=0.0))
    if top == 0.0:
        return 0
    return int(np.count_nonzero(sv > matrix.shape[0] * top * RANK_RTOL))


@dataclass(frozen=True)
class GramData:
    """Gram matrix of all lifted symbol vectors, with its eigendecomposition.

    matrix = sum_n s_E^n s_E^n' + c_E^n c_E^n' (2K x 2K, PSD); pinv is the
    Moore-Penrose pseudo-inverse through the symmetric eigendecomposition;
    null_basis columns span the zero-eigenvalue eigenspace (empty when the
    matrix is invertible, which happens exactly when rank == 2K).
    """

    matrix: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    rank: int
    pinv: np.ndarray
    null_basis: np.ndarray


def build_gram(geometry: CiGeometry) -> GramData:
    """Gram matrix, eigendecomposition, thresholded rank, and pseudo-inverse."""
    s, c = geometry.s_lift, geometry.c_lift
    D = s.T @ s + c.T @ c
    eigvals, eigvecs = np.linalg.eigh(D)
    dim = D.shape[0]
    cutoff = dim * float(eigvals[-1]) * RANK_RTOL if eigvals[-1] > 0 else 0.0
    keep = eigvals > cutoff
    rank = int(np.count_nonzero(keep))
    pinv = (eigvecs[:, keep] / eigvals[keep]) @ eigvecs[:, keep].T

    # null space taken from the SVD of the lifted-vector factor F (D = F F'):
    # the left singular vectors beyond the rank are zero-eigenvalue
    # eigenvectors of D with far less roundoff contamination in the products
    # F' v than eigenvectors of the assembled D carry
    factor = np.concatenate([s, c], axis=0).T  # (2K, 2N)
    left, _, _ = np.linalg.svd(factor, full_matrices=True)
    null_basis = left[:, rank:]
    return GramData(matrix=D, eigvals=eigvals, eigvecs=eigvecs, rank=rank,
                    pinv=pinv, null_basis=null_basis)


@dataclass(frozen=True)
class CoefficientGrids:
    """The four N x N scalar grids weighting the blockwise quadratic form.

    p[m, n] = s_E^m' D+ s_E^n, f[m, n] = s_E^m' D+ c_E^n,
    g[m, n] = c_E^m' D+ s_E^n, q[m, n] = c_E^m' D+ c_E^n.
    """

    p: np.ndarray
    f: np.ndarray
    g: np.ndarray
    q: np.ndarray


def build_coefficients(gram: GramData, geometry: CiGeometry) -> CoefficientGrids:
    """All four coefficient grids; uses the pseudo-inverse uniformly."""
    s, c = geometry.s_lift, geometry.c_lift
    ds = gram.pinv @ s.T  # (2K, N)
    dc = gram.pinv @ c.T
    return CoefficientGrids(p=s @ ds, f=s @ dc, g=c @ ds, q=c @ dc)


@dataclass(frozen=True)
class QpProblem:
    """The assembled simplex QP: quadratic form, coefficient grids, and inputs."""

    u_matrix: np.ndarray
    grids: CoefficientGrids
    geometry: CiGeometry
    gram: GramData

    @property
    def size(self) -> int:
        return self.u_matrix.shape[0]

    @property
    def num_users(self) -> int:
        return self.geometry.num_users

    @property
    def block_length(self) -> int:
        return self.geometry.block_length

    @cached_property
    def max_eig(self) -> float:
        """Largest eigenvalue of the quadratic form (the step-size / penalty scale)."""
        return float(np.linalg.eigvalsh(self.u_matrix)[-1])


def build_qp(geometry: CiGeometry) -> QpProblem:
    """Blockwise assembly of U from the margin maps and the coefficient grids.

    Block (m, n) of U is p[m,n] A^m A^n' + f[m,n] A^m B^n' + g[m,n] B^m A^n'
    + q[m,n] B^m B^n'.
    """
    gram = build_gram(geometry)
    grids = build_coefficients(gram, geometry)
    A, B = geometry.a_mats, geometry.b_mats
    aat = np.einsum("mkt,nlt->mnkl", A, A, optimize=True)
    abt = np.einsum("mkt,nlt->mnkl", A, B, optimize=True)
    bat = np.einsum("mkt,nlt->mnkl", B, A, optimize=True)
    bbt = np.einsum("mkt,nlt->mnkl", B, B, optimize=True)
    blocks = (grids.p[:, :, None, None] * aat + grids.f[:, :, None, None] * abt
              + grids.g[:, :, None, None] * bat + grids.q[:, :, None, None] * bbt)
    n, two_k = A.shape[0], A.shape[1]
    u = blocks.transpose(0, 2, 1, 3).reshape(n * two_k, n * two_k)
    return QpProblem(u_matrix=u, grids=grids, geometry=geometry, gram=gram)


@dataclass(frozen=True)
class FactoredQp:
    """The factored form of U: interleaved coefficient grid, stacked margin

    Gram, and their Hadamard combination. Kept separate from the blockwise
    assembly so the two routes stay independent cross-checks."""

    u1: np.ndarray      # (2N, 2N) interleaved coefficient grid
    u2: np.ndarray      # (4NK, 4NK) Gram of the interleaved margin-map stack
    u_hat: np.ndarray   # (4NK, 4NK) Hadamard combination
    num_users: int
    block_length: int

    def expand(self) -> np.ndarray:
        """Collapse the factored form back to the 2NK x 2NK quadratic form."""
        two_k, n = 2 * self.num_users, self.block_length
        fold = np.kron(np.eye(n), np.hstack([np.eye(two_k), np.eye(two_k)]))
        return fold @ self.u_hat @ fold.T


def build_factored(geometry: CiGeometry, gram: GramData) -> FactoredQp:
    """Assemble the factored form from the interleaved margin-map stack."""
    grids = build_coefficients(gram, geometry)
    A, B = geometry.a_mats, geometry.b_mats
    n, two_k, _ = A.shape
    stack = np.empty((2 * n, two_k, A.shape[2]))
    stack[0::2] = A
    stack[1::2] = B
    u2 = np.einsum("ikt,jlt->ikjl", stack, stack, optimize=True).reshape(
        2 * n * two_k, 2 * n * two_k)
    u1 = np.empty((2 * n, 2 * n))
    u1[0::2, 0::2] = grids.p
    u1[0::2, 1::2] = grids.f
    u1[1::2, 0::2] = grids.g
    u1[1::2, 1::2] = grids.q
    u_hat = np.kron(u1, np.ones((two_k, two_k))) * u2
    return FactoredQp(u1=u1, u2=u2, u_hat=u_hat, num_users=geometry.num_users,
                      block_length=n)


def build_numerator(geometry: CiGeometry, delta: np.ndarray) -> np.ndarray:
    """Numerator matrix of the closed-form precoder: sum over slots of

    A^n' delta^n s_E^n' + B^n' delta^n c_E^n', shape (Nt, 2K). The recovered
    lifted precoder is this matrix times the Gram pseudo-inverse."""
    n, two_k = geometry.block_length, 2 * geometry.num_users
    slots = np.asarray(delta).reshape(n, two_k)
    return (np.einsum("nkt,nk,nj->tj", geometry.a_mats, slots, geometry.s_lift, optimize=True)
            + np.einsum("nkt,nk,nj->tj", geometry.b_mats, slots, geometry.c_lift, optimize=True))


def verify_pinv_feasibility(qp: QpProblem, delta: np.ndarray) -> float:
    """Relative residual of the pseudo-inverse stationarity identity.

    Forms the numerator C and the recovered W_hat = C D+, then returns
    ||W_hat D - C||_F / max(1, ||C||_F). The construction keeps C's rows in
    the Gram column space, so the residual stays at roundoff level even when
    the Gram matrix is singular (short blocks, N < K).
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise ValueError("delta must be elementwise nonnegative")
    C = build_numerator(qp.geometry, delta)
    w_hat = C @ qp.gram.pinv
    denom = max(1.0, float(np.linalg.norm(C)))
    return float(np.linalg.norm(w_hat @ qp.gram.matrix - C) / denom)


def null_space_products(geometry: CiGeometry, gram: GramData) -> float:
    """Largest |<lifted vector, null direction>| over all slots and directions.

    Zero when the Gram matrix has no null space.
    """
    if gram.null_basis.shape[1] == 0:
        return 0.0
    factor = np.concatenate([geometry.s_lift, geometry.c_lift], axis=0)  # (2N, 2K)
    return float(np.max(np.abs(factor @ gram.null_basis)))


@dataclass(frozen=True)
class RankReport:
    """Measured numerical ranks of every structural matrix plus the gate flag.

    closed_form_applicable is the operative predicate: the quadratic form has
    full rank 2NK, which holds on generic draws exactly when the block is
    short enough (N <= K, strictly below the saturation branch).
    """

    num_antennas: int
    num_users: int
    block_length: int
    rank_d: int
    rank_u1: int
    rank_u2: int
    rank_u_hat: int
    rank_u: int
    closed_form_applicable: bool

    def as_dict(self) -> dict:
        return {
            "nt": self.num_antennas,
            "k": self.num_users,
            "n": self.block_length,
            "rank_d": self.rank_d,
            "rank_u1": self.rank_u1,
            "rank_u2": self.rank_u2,
            "rank_u_hat": self.rank_u_hat,
            "rank_u": self.rank_u,
            "closed_form_applicable": self.closed_form_applicable,
        }


def rank_report(geometry: CiGeometry, gram: GramData, qp: QpProblem) -> RankReport:
    """Numerical ranks of the Gram matrix, both factored pieces, their

    combination, and the assembled quadratic form."""
    fac = build_factored(geometry, gram)
    rank_u = numerical_rank(qp.u_matrix)
    return RankReport(
        num_antennas=geometry.num_antennas,
        num_users=geometry.num_users,
        block_length=geometry.block_length,
        rank_d=gram.rank,
        rank_u1=numerical_rank(fac.u1),
        rank_u2=numerical_rank(fac.u2),
        rank_u_hat=numerical_rank(fac.u_hat),
        rank_u=rank_u,
        closed_form_applicable=bool(rank_u == qp.size),
    )
