"""Training losses for preference-based reward learning.

Five method variants share these pieces: the plain pairwise
cross-entropy ("bt", "bt_multi"), the same loss with an auxiliary
rationale-score term ("rfp"), and the rationale-projection variants with an
equality ("ec") or inequality ("ic") consistency constraint plus a
reward-ratio regularizer. The low-level forms work elementwise on arrays or
autodiff tensors; the batch-level operations take explicit pair evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import geometry


VARIANTS = ("bt", "bt_multi", "rfp", "ec", "ic")


class ObjectiveError(ValueError):
    """Raised for invalid variant routing or malformed pair batches."""


@dataclass(frozen=True)
class LossWeights:
    """Scalar knobs of the composed objectives."""

    lambda_ratio: float = 1.0
    lambda_eq: float = 1.0
    lambda_ineq: float = 1.0
    alpha: float = 0.5
    epsilon: float = 1e-8
    rfp_aux_weight: float = 1.0

    def __post_init__(self):
        for name in ("lambda_ratio", "lambda_eq", "lambda_ineq", "rfp_aux_weight"):
            if getattr(self, name) < 0:
                raise ObjectiveError(f"{name} must be nonnegative")
        if not 0.0 < self.alpha < 1.0:
            raise ObjectiveError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.epsilon <= 0:
            raise ObjectiveError(f"epsilon must be positive, got {self.epsilon}")


@dataclass
class PairEval:
    """Scalar reward evaluations of one preference pair.

    The decomposed fields are only meaningful when ``has_reason`` is set, in
    which case each total must equal its aligned plus orthogonal parts.
    """

    r_a: float
    r_b: float
    y: int
    has_reason: bool = False
    r_a_par: float = 0.0
    r_b_par: float = 0.0
    r_a_perp: float = 0.0
    r_b_perp: float = 0.0

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ObjectiveError(f"label must be 0 or 1, got {self.y}")
        if self.has_reason:
            for total, par, perp, side in (
                (self.r_a, self.r_a_par, self.r_a_perp, "A"),
                (self.r_b, self.r_b_par, self.r_b_perp, "B"),
            ):
                if abs(total - (par + perp)) > 1e-10 * max(1.0, abs(total)):
                    raise ObjectiveError(
                        f"side {side}: total reward {total} != par {par} + perp {perp}"
                    )


# -- elementwise forms (array or tensor inputs) ------------------------------


def bce_terms(r_a, r_b, y):
    """Per-pair cross-entropy of the pairwise-preference probability."""
    p = geometry.bt_probability(r_a, r_b)
    one_m = ad.add(1.0, ad.mul(p, -1.0))
    return ad.mul(ad.add(ad.mul(y, ad.log(p)), ad.mul(ad.add(1.0, ad.mul(y, -1.0)), ad.log(one_m))), -1.0)


def eq_terms(r_a_perp, r_b_perp):
    """Squared gap of the rationale-orthogonal rewards within a pair."""
    d = ad.add(r_a_perp, ad.mul(r_b_perp, -1.0))
    return ad.mul(d, d)


def ineq_score_terms(d_par, d_perp, y):
    """Cross-entropy pushing the aligned reward gap above the orthogonal gap."""
    s = geometry.sigmoid(ad.add(d_par, ad.mul(d_perp, -1.0)))
    one_m = ad.add(1.0, ad.mul(s, -1.0))
    return ad.mul(ad.add(ad.mul(y, ad.log(s)), ad.mul(ad.add(1.0, ad.mul(y, -1.0)), ad.log(one_m))), -1.0)


def ratio_terms(r_par, r_perp, weights: LossWeights):
    """Penalty on the aligned fraction of one trajectory's reward magnitude."""
    a_par = ad.absolute(r_par)
    frac = a_par / ad.add(ad.add(a_par, ad.absolute(r_perp)), weights.epsilon)
    return ad.maximum(0.0, ad.add(frac, -weights.alpha))


# -- batch-of-PairEval operations --------------------------------------------


def _require_nonempty(batch):
    if not batch:
        raise ObjectiveError("empty pair batch")


def _require_reasons(batch):
    for i, pe in enumerate(batch):
        if not pe.has_reason:
            raise ObjectiveError(
                f"pair {i} has no rationale; route reason-less pairs to loss_bce_bt"
            )


def _cols(batch, *names):
    return [np.asarray([getattr(pe, n) for pe in batch], dtype=np.float64) for n in names]


def loss_bce_bt(batch: list[PairEval]) -> float:
    """Mean pairwise cross-entropy on total rewards."""
    _require_nonempty(batch)
    r_a, r_b, y = _cols(batch, "r_a", "r_b", "y")
    return float(np.mean(bce_terms(r_a, r_b, y)))


def loss_reason(batch: list[PairEval]) -> float:
    """Mean pairwise cross-entropy on the rationale-aligned rewards only."""
    _require_nonempty(batch)
    _require_reasons(batch)
    r_a, r_b, y = _cols(batch, "r_a_par", "r_b_par", "y")
    return float(np.mean(bce_terms(r_a, r_b, y)))


def loss_eq(batch: list[PairEval]) -> float:
    """Mean squared within-pair gap of the orthogonal rewards."""
    _require_nonempty(batch)
    _require_reasons(batch)
    pa, pb = _cols(batch, "r_a_perp", "r_b_perp")
    return float(np.mean(eq_terms(pa, pb)))


def loss_ineq(batch: list[PairEval]) -> float:
    """Inequality consistency: aligned-vs-orthogonal gap score plus plain BCE."""
    _require_nonempty(batch)
    _require_reasons(batch)
    apar, bpar, aperp, bperp, y = _cols(batch, "r_a_par", "r_b_par", "r_a_perp", "r_b_perp", "y")
    s_term = float(np.mean(ineq_score_terms(apar - bpar, aperp - bperp, y)))
    return s_term + loss_bce_bt(batch)


def loss_ratio(batch: list[PairEval], weights: LossWeights) -> float:
    """Mean ratio penalty over the individual trajectories of the batch."""
    _require_nonempty(batch)
    _require_reasons(batch)
    apar, bpar, aperp, bperp = _cols(batch, "r_a_par", "r_b_par", "r_a_perp", "r_b_perp")
    terms = np.concatenate(
        [ratio_terms(apar, aperp, weights), ratio_terms(bpar, bperp, weights)]
    )
    return float(np.mean(terms))


def rfp_aux_loss(batch: list[PairEval], q_scores) -> float:
    """Auxiliary cross-entropy on raw rationale scores q = phi . psi."""
    _require_nonempty(batch)
    _require_reasons(batch)
    if len(q_scores) != len(batch):
        raise ObjectiveError("q_scores length does not match batch")
    q_a = np.asarray([q[0] for q in q_scores], dtype=np.float64)
    q_b = np.asarray([q[1] for q in q_scores], dtype=np.float64)
    y = _cols(batch, "y")[0]
    return float(np.mean(bce_terms(q_a, q_b, y)))


def per_pair_losses(variant, r_a, r_b, y, has_reason, weights,
                    r_a_par=None, r_b_par=None, r_a_perp=None, r_b_perp=None,
                    q_a=None, q_b=None):
    """Per-pair composed loss vector; the trainer's tensor-aware entry point.

    ``has_reason`` is a plain boolean mask: pairs without a rationale fall
    back to the plain pairwise cross-entropy under every variant. Decomposed
    reward inputs may carry arbitrary placeholder values at masked-off
    positions; they never reach the result there.
    """
    if variant not in VARIANTS:
        raise ObjectiveError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    base = bce_terms(r_a, r_b, y)
    if variant in ("bt", "bt_multi"):
        return base
    has_reason = np.asarray(has_reason, dtype=bool)
    if variant == "rfp":
        aux = bce_terms(q_a, q_b, y)
        with_reason = ad.add(base, ad.mul(aux, weights.rfp_aux_weight))
        return ad.where(has_reason, with_reason, base)
    reason = bce_terms(r_a_par, r_b_par, y)
    ratio = ad.mul(
        ad.add(ratio_terms(r_a_par, r_a_perp, weights), ratio_terms(r_b_par, r_b_perp, weights)),
        0.5,
    )
    if variant == "ec":
        consistency = ad.mul(eq_terms(r_a_perp, r_b_perp), weights.lambda_eq)
    else:
        d_par = ad.add(r_a_par, ad.mul(r_b_par, -1.0))
        d_perp = ad.add(r_a_perp, ad.mul(r_b_perp, -1.0))
        consistency = ad.mul(
            ad.add(ineq_score_terms(d_par, d_perp, y), base), weights.lambda_ineq
        )
    with_reason = ad.add(ad.add(reason, consistency), ad.mul(ratio, weights.lambda_ratio))
    return ad.where(has_reason, with_reason, base)


def total_loss(variant: str, batch: list[PairEval], weights: LossWeights,
               q_scores=None) -> float:
    """Mean composed loss of a batch under the chosen method variant."""
    _require_nonempty(batch)
    if variant not in VARIANTS:
        raise ObjectiveError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    cols = _cols(batch, "r_a", "r_b", "y", "r_a_par", "r_b_par", "r_a_perp", "r_b_perp")
    r_a, r_b, y, apar, bpar, aperp, bperp = cols
    mask = np.asarray([pe.has_reason for pe in batch], dtype=bool)
    if variant == "rfp":
        if any(mask) and q_scores is None:
            raise ObjectiveError("rfp needs q_scores for every rationale-bearing pair")
        if q_scores is None:
            q_scores = [(0.0, 0.0)] * len(batch)
        q_a = np.asarray([q[0] for q in q_scores], dtype=np.float64)
        q_b = np.asarray([q[1] for q in q_scores], dtype=np.float64)
    else:
        q_a = q_b = None
    terms = per_pair_losses(
        variant, r_a, r_b, y, mask, weights,
        r_a_par=apar, r_b_par=bpar, r_a_perp=aperp, r_b_perp=bperp,
        q_a=q_a, q_b=q_b,
    )
    return float(np.mean(terms))
