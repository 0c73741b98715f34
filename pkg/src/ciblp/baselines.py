"""Reference precoders: zero-forcing, regularized zero-forcing, per-slot CI.

ZF inverts the channel and splits the block power budget evenly over the
block; RZF adds the standard MMSE diagonal loading (K * sigma^2 / p0) before
inverting. The per-slot CI baseline reuses the full block pipeline with a
block length of one, so each slot gets its own max-min-margin transmit
vector under a per-slot power budget — the pooled-versus-per-slot budget
being exactly what separates it from block-level precoding.
"""

from __future__ import annotations

import numpy as np

from .ci_geometry import build_geometry, lift_precoder
from .model import ChannelBlock, SymbolBlock
from .precoder import PrecoderMatrix, recover_precoder
from .qp_builder import build_qp
from .solvers import SCHEME2, AdmmConfig, oracle_solve, solve


def _block_normalized(w_complex: np.ndarray, symbols: np.ndarray, p0: float) -> PrecoderMatrix:
    """Scale a complex precoder so its block transmit power equals N * p0."""
    if p0 <= 0:
        raise ValueError(f"power budget must be positive, got {p0}")
    slots = symbols.shape[1]
    transmitted = w_complex @ symbols
    raw_power = float(np.sum(np.abs(transmitted) ** 2))
    if not raw_power > 0:
        raise ValueError("precoder transmits no power on this block")
    scale = float(np.sqrt(slots * p0 / raw_power))
    w = scale * w_complex
    block_power = float(np.sum(np.abs(w @ symbols) ** 2))
    return PrecoderMatrix(w_hat=lift_precoder(w), w_complex=w,
                          block_power=block_power, scale=scale)


def zf_precoder(channel: ChannelBlock, symbols: SymbolBlock, p0: float = 1.0) -> PrecoderMatrix:
    """Channel-inverting precoder W = H^H (H H^H)^-1, block-power normalized.

    Raises numpy.linalg.LinAlgError when H H^H is singular (rank-deficient
    channel).
    """
    H = channel.entries
    gram = H @ H.conj().T
    w_raw = np.linalg.solve(gram, H).conj().T
    return _block_normalized(w_raw, symbols.symbols, p0)


def rzf_precoder(channel: ChannelBlock, symbols: SymbolBlock, p0: float = 1.0,
                 sigma2: float = 0.0) -> PrecoderMatrix:
    """Diagonally loaded channel inverse W = H^H (H H^H + (K sigma2 / p0) I)^-1.

    The loading is the conventional MMSE choice; sigma2 = 0 degrades to plain
    ZF (and then inherits its invertibility requirement).
    """
    if sigma2 < 0:
        raise ValueError(f"noise power must be nonnegative, got {sigma2}")
    H = channel.entries
    K = channel.num_users
    loaded = H @ H.conj().T + (K * sigma2 / p0) * np.eye(K)
    w_raw = np.linalg.solve(loaded, H).conj().T
    return _block_normalized(w_raw, symbols.symbols, p0)


def ci_slp_precoder(channel: ChannelBlock, symbols: SymbolBlock, p0: float = 1.0,
                    config: AdmmConfig | None = None,
                    oracle_tol: float = 1e-10) -> np.ndarray:
    """Per-slot max-min-margin transmit vectors, one independent solve per slot.

    Each slot is handed to the block pipeline as a length-one block with its
    own power budget p0; the returned array holds the transmitted vector of
    every slot as columns (Nt x N). With config=None each slot is solved to
    the oracle_tol KKT certificate by the projected-gradient oracle; an
    AdmmConfig runs the fixed-budget splitting scheme instead.
    """
    slots = symbols.block_length
    columns = []
    for n in range(slots):
        slot_block = SymbolBlock(symbols=symbols.symbols[:, n:n + 1],
                                 indices=symbols.indices[:, n:n + 1],
                                 constellation=symbols.constellation)
        geometry = build_geometry(channel, slot_block)
        qp = build_qp(geometry)
        if config is None:
            delta = oracle_solve(qp, tol=oracle_tol)
        else:
            delta = np.clip(solve(qp, SCHEME2, config).delta, 0.0, None)
        rec = recover_precoder(geometry, qp.gram, delta, p0=p0)
        columns.append(rec.w_complex @ slot_block.symbols[:, 0])
    return np.stack(columns, axis=1)
