"""Symbol-scaling interference geometry for M-PSK detection regions.

A noiseless received signal is decomposed along the two decision boundaries
flanking its intended constellation point; the pair of scaling coefficients
(alpha_right, alpha_left) measures how deep inside the detection region the
signal sits. This module builds that decomposition and its real-valued lifted
form: per-slot matrices mapping a lifted transmit vector to all 2K scaling
coefficients at once, split so the precoder appears linearly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import ChannelBlock, Constellation, SymbolBlock


class SingularBasisError(ValueError):
    """The two boundary directions are collinear; the 2x2 basis solve is undefined."""


@dataclass(frozen=True)
class BoundaryBasis:
    """Unit vectors along the two decision boundaries of one constellation point.

    nominal_components holds the (right, left) pieces whose sum reconstructs
    the point itself.
    """

    right: complex
    left: complex
    nominal_components: tuple[complex, complex]


def boundary_basis(constellation: Constellation, index: int) -> BoundaryBasis:
    """Boundary directions flanking constellation point `index`.

    The point at angle (2m+1)*pi/M has boundaries at 2m*pi/M (right, clockwise
    side) and 2(m+1)*pi/M (left). For BPSK both boundaries are the real axis,
    so there is no usable basis and the caller must fall back to the scalar
    margin Re(y*conj(s)).
    """
    M = constellation.order
    if M == 2:
        raise SingularBasisError("BPSK boundary directions are collinear; use the scalar margin")
    m = int(index)
    right = np.exp(2j * np.pi * m / M)
    left = np.exp(2j * np.pi * (m + 1) / M)
    # s = coef*(right + left) with coef = 1/(2 cos(pi/M)) reconstructs the point
    coef = 1.0 / (2.0 * np.cos(np.pi / M))
    return BoundaryBasis(right=complex(right), left=complex(left),
                         nominal_components=(complex(coef * right), complex(coef * left)))


def basis_matrix(basis: BoundaryBasis) -> np.ndarray:
    """Real 2x2 matrix whose columns are the lifted nominal components."""
    s_r, s_l = basis.nominal_components
    return np.array([[s_r.real, s_l.real], [s_r.imag, s_l.imag]])


def decompose(z: complex, basis: BoundaryBasis) -> tuple[float, float]:
    """Coefficients (alpha_right, alpha_left) with z = ar*s_right + al*s_left.

    Exact 2x2 real solve; the nominal point itself decomposes to (1, 1).
    """
    G = basis_matrix(basis)
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    if abs(det) < 1e-14:
        raise SingularBasisError("boundary directions are collinear")
    zr, zi = np.real(z), np.imag(z)
    ar = (G[1, 1] * zr - G[0, 1] * zi) / det
    al = (-G[1, 0] * zr + G[0, 0] * zi) / det
    return float(ar), float(al)


def lift(v: np.ndarray) -> np.ndarray:
    """Real lifting of a complex vector: stack(Re v, Im v)."""
    v = np.asarray(v)
    return np.concatenate([np.real(v), np.imag(v)])


def lift_precoder(W: np.ndarray) -> np.ndarray:
    """Real lifting of a complex Nt x K precoder: [Re W, -Im W] (Nt x 2K)."""
    W = np.asarray(W)
    return np.concatenate([np.real(W), -np.imag(W)], axis=1)


def unlift_precoder(w_hat: np.ndarray) -> np.ndarray:
    """Inverse of lift_precoder: first K columns are Re W, last K are -Im W."""
    w_hat = np.asarray(w_hat)
    k = w_hat.shape[1] // 2
    return w_hat[:, :k] - 1j * w_hat[:, k:]


def _match_indices(slot_symbols: np.ndarray, constellation: Constellation) -> np.ndarray:
    idx = np.argmin(np.abs(slot_symbols[:, None] - constellation.points[None, :]), axis=1)
    if not np.allclose(slot_symbols, constellation.points[idx], atol=1e-12):
        raise ValueError("slot symbols must lie on the constellation")
    return idx


def build_slot_matrix(channel: ChannelBlock, slot_symbols: np.ndarray,
                      constellation: Constellation) -> np.ndarray:
    """Real 2K x 2Nt map from a lifted transmit vector to all scaling coefficients.

    Row k is the right-margin coefficient of user k, row K+k the left-margin
    one. Composition per user: the 2x2 inverse of the boundary basis applied
    to the lifted pair (Re y_k, Im y_k), which is itself linear in the lifted
    transmit vector through the channel row h_k.
    """
    H = channel.entries
    K, Nt = H.shape
    slot_symbols = np.asarray(slot_symbols, dtype=complex)
    if slot_symbols.shape != (K,):
        raise ValueError(f"expected {K} slot symbols, got shape {slot_symbols.shape}")
    idx = _match_indices(slot_symbols, constellation)

    # rows mapping lifted transmit x_E to (Re y_k; Im y_k)
    R = np.empty((K, 2, 2 * Nt))
    R[:, 0, :Nt] = H.real
    R[:, 0, Nt:] = -H.imag
    R[:, 1, :Nt] = H.imag
    R[:, 1, Nt:] = H.real

    out = np.empty((2 * K, 2 * Nt))
    if constellation.order == 2:
        # collapsed margin Re(y*conj(s)) duplicated into both alpha rows
        w = np.stack([slot_symbols.real, slot_symbols.imag], axis=1)  # (K, 2)
        rows = np.einsum("kj,kjt->kt", w, R)
        out[:K] = rows
        out[K:] = rows
        return out

    M = constellation.order
    u_r = np.exp(2j * np.pi * idx / M)
    u_l = np.exp(2j * np.pi * (idx + 1) / M)
    coef = 1.0 / (2.0 * np.cos(np.pi / M))
    s_r, s_l = coef * u_r, coef * u_l
    # analytic inverse of [[Re s_r, Re s_l], [Im s_r, Im s_l]] per user
    det = s_r.real * s_l.imag - s_l.real * s_r.imag
    Ginv = np.empty((K, 2, 2))
    Ginv[:, 0, 0] = s_l.imag / det
    Ginv[:, 0, 1] = -s_l.real / det
    Ginv[:, 1, 0] = -s_r.imag / det
    Ginv[:, 1, 1] = s_r.real / det
    rows = np.einsum("kij,kjt->kit", Ginv, R)  # (K, 2, 2Nt)
    out[:K] = rows[:, 0]
    out[K:] = rows[:, 1]
    return out


@dataclass(frozen=True)
class CiGeometry:
    """Per-slot lifted maps for one (channel, symbol block) pair.

    m_mats[n] sends a lifted transmit vector to the 2K scaling coefficients of
    slot n; a_mats/b_mats are its antenna-half splits so that
    alpha^n = A^n W_hat s_E^n + B^n W_hat c_E^n for a lifted precoder W_hat.
    s_lift[n] and c_lift[n] are the lifted symbol vector of slot n and its
    quarter-turn companion (the lift of -1j * s^n).
    """

    m_mats: np.ndarray   # (N, 2K, 2Nt)
    a_mats: np.ndarray   # (N, 2K, Nt)
    b_mats: np.ndarray   # (N, 2K, Nt)
    s_lift: np.ndarray   # (N, 2K)
    c_lift: np.ndarray   # (N, 2K)
    symbols: np.ndarray  # (K, N) complex
    indices: np.ndarray  # (K, N) int
    constellation: Constellation
    num_users: int
    num_antennas: int
    block_length: int

    @cached_property
    def selector_p(self) -> np.ndarray:
        """Top-half column selector: identity stacked over zeros (2Nt x Nt)."""
        nt = self.num_antennas
        return np.vstack([np.eye(nt), np.zeros((nt, nt))])

    @cached_property
    def selector_q(self) -> np.ndarray:
        """Bottom-half column selector: zeros stacked over identity (2Nt x Nt)."""
        nt = self.num_antennas
        return np.vstack([np.zeros((nt, nt)), np.eye(nt)])

    @cached_property
    def skew_map(self) -> np.ndarray:
        """2K x 2K block matrix [[0, I], [-I, 0]]; squares to -I and sends s_lift to c_lift."""
        k = self.num_users
        T = np.zeros((2 * k, 2 * k))
        T[:k, k:] = np.eye(k)
        T[k:, :k] = -np.eye(k)
        return T


def build_geometry(channel: ChannelBlock, symbols: SymbolBlock,
                   validate: bool = False) -> CiGeometry:
    """Assemble all per-slot maps and lifted vectors for one block."""
    K, Nt = channel.num_users, channel.num_antennas
    if symbols.num_users != K:
        raise ValueError(f"symbol block has {symbols.num_users} users, channel has {K}")
    N = symbols.block_length
    constellation = symbols.constellation

    m_mats = np.stack([build_slot_matrix(channel, symbols.symbols[:, n], constellation)
                       for n in range(N)])
    s_lift = np.concatenate([symbols.symbols.T.real, symbols.symbols.T.imag], axis=1)
    c_lift = np.concatenate([symbols.symbols.T.imag, -symbols.symbols.T.real], axis=1)
    geometry = CiGeometry(
        m_mats=m_mats,
        a_mats=np.ascontiguousarray(m_mats[:, :, :Nt]),
        b_mats=np.ascontiguousarray(m_mats[:, :, Nt:]),
        s_lift=s_lift,
        c_lift=c_lift,
        symbols=symbols.symbols,
        indices=symbols.indices,
        constellation=constellation,
        num_users=K,
        num_antennas=Nt,
        block_length=N,
    )
    if validate:
        _validate_geometry(geometry)
    return geometry


def _validate_geometry(g: CiGeometry, atol: float = 1e-10) -> None:
    """Check the lifted-chain identity on a random precoder draw."""
    rng = np.random.default_rng(0)
    w_hat = rng.standard_normal((g.num_antennas, 2 * g.num_users))
    w_lifted = g.selector_p @ w_hat + g.selector_q @ w_hat @ g.skew_map
    for n in range(g.block_length):
        lhs = g.m_mats[n] @ (w_lifted @ g.s_lift[n])
        rhs = g.a_mats[n] @ (w_hat @ g.s_lift[n]) + g.b_mats[n] @ (w_hat @ g.c_lift[n])
        if not np.allclose(lhs, rhs, atol=atol):
            raise AssertionError(f"lifted-chain identity violated at slot {n}")


def alpha_from_lifted(geometry: CiGeometry, w_hat: np.ndarray) -> np.ndarray:
    """All scaling coefficients of a lifted precoder, shape (N, 2K).

    Column layout per slot: first K entries are right margins, last K left
    margins, matching the slot-matrix row order.
    """
    ws = np.einsum("tj,nj->nt", w_hat, geometry.s_lift)
    wc = np.einsum("tj,nj->nt", w_hat, geometry.c_lift)
    return (np.einsum("nkt,nt->nk", geometry.a_mats, ws)
            + np.einsum("nkt,nt->nk", geometry.b_mats, wc))
