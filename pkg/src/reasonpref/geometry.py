"""Vector math shared by every other module.

Covers exactly the three primitives the method needs: orthogonal projection
of a trajectory embedding onto a rationale axis, the pairwise-preference
probability, and a stable softmax. All scalars are double precision. The
functions accept autodiff tensors as well as plain arrays, so the training
path reuses the same formulas.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

# Probabilities are clamped into the open interval so downstream logs stay
# finite even when reward gaps saturate float64.
PROB_FLOOR = 1e-12

# Logistic argument beyond which float64 sigmoid is exactly 0 or 1 anyway.
_LOGIT_CAP = 60.0


class GeometryError(ValueError):
    """Raised for degenerate or inconsistent vector inputs."""


def _check_vector(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise GeometryError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"{name} contains non-finite entries")
    return v


def project_decompose(phi, psi) -> tuple:
    """Split ``phi`` into its component along ``psi`` and the residual.

    Returns ``(parallel, perpendicular)`` with ``parallel = ((phi.psi)/|psi|^2) psi``
    and ``perpendicular = phi - parallel``, so the two always sum back to
    ``phi`` and are mutually orthogonal up to rounding.
    """
    if isinstance(phi, Tensor) or isinstance(psi, Tensor):
        psi_v = ad.value_of(psi)
        denom = float(psi_v @ psi_v)
        if denom == 0.0:
            raise GeometryError("degenerate rationale embedding: psi has zero norm")
        coeff = ad.mul(ad.tsum(ad.mul(phi, psi)), 1.0 / denom)
        parallel = ad.mul(coeff, psi)
        return parallel, ad.add(phi, ad.mul(parallel, -1.0))

    phi = _check_vector(phi, "phi")
    psi = _check_vector(psi, "psi")
    if phi.shape != psi.shape:
        raise GeometryError(f"dimension mismatch: phi {phi.shape[0]} vs psi {psi.shape[0]}")
    denom = float(psi @ psi)
    if denom == 0.0:
        raise GeometryError("degenerate rationale embedding: psi has zero norm")
    parallel = ((phi @ psi) / denom) * psi
    return parallel, phi - parallel


def sigmoid(x):
    """Numerically stable logistic, clamped into (0, 1).

    Equivalent to exp(x)/(exp(x)+1) computed after subtracting the max of the
    two logits; the argument is capped so the unused exp branch cannot
    overflow, and the output is kept inside [PROB_FLOOR, 1-PROB_FLOOR].
    """
    z = ad.clip(x, -_LOGIT_CAP, _LOGIT_CAP)
    p = 1.0 / (1.0 + ad.exp(ad.mul(z, -1.0)))
    return ad.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def bt_probability(r_a, r_b):
    """Probability that the first reward wins the pairwise comparison.

    Computes exp(r_a) / (exp(r_a) + exp(r_b)) in shifted form. Scalar or
    array rewards are accepted elementwise.
    """
    if not (isinstance(r_a, Tensor) or isinstance(r_b, Tensor)):
        r_a = np.asarray(r_a, dtype=np.float64)
        r_b = np.asarray(r_b, dtype=np.float64)
        if not (np.all(np.isfinite(r_a)) and np.all(np.isfinite(r_b))):
            raise GeometryError("bt_probability requires finite rewards")
        out = sigmoid(r_a - r_b)
        return float(out) if out.ndim == 0 else out
    return sigmoid(ad.add(r_a, ad.mul(r_b, -1.0)))


def softmax(scores) -> np.ndarray:
    """Stable softmax over a 1-D score vector; entries sum to 1.

    The max is subtracted before exponentiating, so arbitrarily large score
    magnitudes are fine; entries stay strictly positive as long as the score
    spread is below the float64 exp underflow range (~745).
    """
    scores = _check_vector(scores, "scores")
    if scores.size == 0:
        raise GeometryError("softmax of empty score vector")
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()
