"""Recovery of the block precoding matrix from the simplex-QP solution.

The optimal lifted precoder has the closed form W_hat proportional to
C(delta) D^+, where C is the slot-weighted numerator matrix and D the Gram
matrix of the lifted symbol vectors. The proportionality constant is fixed
by driving the block power budget to equality: the margins scale linearly
with the precoder, so the max-min objective always saturates the budget.
The unscaled block power collapses to the quadratic form itself,
tr(C D^+ C') = delta' U delta, which keeps the normalization cheap and
exposes degenerate (zero-power) weightings directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ci_geometry import CiGeometry, alpha_from_lifted, unlift_precoder
from .qp_builder import GramData, build_numerator

# weights this far below zero are treated as solver roundoff and clipped
_NEGATIVE_WEIGHT_TOL = 1e-9
# unscaled block power at or below this level means the weighting produced
# no transmit direction at all (mass confined to the kernel of the form)
_DEGENERATE_POWER_TOL = 1e-20


@dataclass(frozen=True)
class PrecoderMatrix:
    """One block precoder in both real-lifted and complex form.

    w_hat is the real Nt x 2K lifted matrix [Re W, -Im W]; w_complex the
    complex Nt x K precoder it encodes; block_power the achieved
    sum-over-slots transmit power after scaling; scale the normalization
    factor applied to the raw closed-form matrix.
    """

    w_hat: np.ndarray
    w_complex: np.ndarray
    block_power: float
    scale: float


def recover_precoder(geometry: CiGeometry, gram: GramData, delta: np.ndarray,
                     p0: float = 1.0) -> PrecoderMatrix:
    """Closed-form precoder for a nonnegative slot/user weighting.

    Forms the numerator C from the weighting, multiplies by the Gram
    pseudo-inverse, and rescales so the block transmit power equals
    N * p0 exactly. Raises ValueError for materially negative weights or
    a degenerate weighting whose closed form carries no power.
    """
    if p0 <= 0:
        raise ValueError(f"power budget must be positive, got {p0}")
    delta = np.asarray(delta, dtype=float).ravel()
    if delta.min(initial=0.0) < -_NEGATIVE_WEIGHT_TOL:
        raise ValueError("weight vector has materially negative entries")
    delta = np.clip(delta, 0.0, None)

    numerator = build_numerator(geometry, delta)
    w_raw = numerator @ gram.pinv
    # tr(W_raw D W_raw') = sum over slots of the lifted transmit power
    raw_power = float(np.sum(w_raw * (w_raw @ gram.matrix)))
    if not raw_power > _DEGENERATE_POWER_TOL:
        raise ValueError("degenerate weighting: closed-form precoder carries no power")

    slots = geometry.block_length
    scale = float(np.sqrt(slots * p0 / raw_power))
    w_hat = scale * w_raw
    block_power = float(np.sum(w_hat * (w_hat @ gram.matrix)))
    return PrecoderMatrix(w_hat=w_hat, w_complex=unlift_precoder(w_hat),
                          block_power=block_power, scale=scale)


def evaluate_alpha(geometry: CiGeometry, precoder) -> tuple[np.ndarray, float]:
    """Per-slot margin coefficients of a precoder and their minimum.

    Accepts a PrecoderMatrix or a raw lifted Nt x 2K matrix. Returns
    (alphas, min_alpha): alphas has shape (N, 2K), each row holding the K
    right margins followed by the K left margins of one slot; min_alpha is
    the smallest entry (the max-min objective value of that precoder).
    """
    w_hat = precoder.w_hat if isinstance(precoder, PrecoderMatrix) else np.asarray(precoder, dtype=float)
    alphas = alpha_from_lifted(geometry, w_hat)
    return alphas, float(alphas.min())
