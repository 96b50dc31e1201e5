"""Training loop and evaluation metrics.

One ``train`` call covers all five method variants; it resolves every task
and rationale string against the frozen embedding table up front, then runs
mini-batch Adam on exact gradients with a fixed shuffle order per seed.
Evaluation reports reward accuracy (preferred side scores higher, ties count
half) and greedy-selection success.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import encoder as enc
from . import objectives as obj
from .embeddings import EmbeddingTable
from .worlds import CandidateSet, LabeledPair


class HarnessError(ValueError):
    """Raised for invalid training inputs."""


class TrainingDivergence(RuntimeError):
    """Raised when the loss goes non-finite mid-training."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimization and architecture settings for one training run."""

    method: str = "ec"
    weights: obj.LossWeights = field(default_factory=obj.LossWeights)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 300
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    embed_dim: int = 64
    discount: float = 1.0

    def __post_init__(self):
        if self.method not in obj.VARIANTS:
            raise HarnessError(f"unknown method {self.method!r}; expected one of {obj.VARIANTS}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise HarnessError("learning rate, batch size, and epochs must be positive")


def _records(dataset) -> list[LabeledPair]:
    return list(dataset.records) if hasattr(dataset, "records") else list(dataset)


@dataclass
class _PairArrays:
    """Dataset pre-resolved into dense arrays for batched training."""

    x_a: np.ndarray        # (N, H, D)
    x_b: np.ndarray
    y: np.ndarray          # (N,)
    theta: np.ndarray      # (N, d)
    u: np.ndarray          # (N, d) unit rationale axes (placeholder where unused)
    udot: np.ndarray       # (N,) axis-task inner products
    psi: np.ndarray        # (N, d) raw rationale vectors as stored
    has_reason: np.ndarray  # (N,) bool


def _resolve_arrays(records: list[LabeledPair], table: EmbeddingTable, need_reasons: bool) -> _PairArrays:
    n = len(records)
    horizons = {p.seg_a.horizon for p in records}
    if len(horizons) != 1:
        raise HarnessError(f"training records mix horizons: {sorted(horizons)}")
    h = horizons.pop()
    d_in = records[0].seg_a.step_dim
    dim = table.dim
    x_a = np.empty((n, h, d_in))
    x_b = np.empty((n, h, d_in))
    y = np.empty(n)
    theta = np.empty((n, dim))
    u = np.zeros((n, dim))
    u[:, 0] = 1.0
    udot = np.zeros(n)
    psi = np.zeros((n, dim))
    has_reason = np.zeros(n, dtype=bool)
    theta_cache: dict[str, np.ndarray] = {}
    psi_cache: dict[str, np.ndarray] = {}
    for i, p in enumerate(records):
        x_a[i] = p.seg_a.steps
        x_b[i] = p.seg_b.steps
        y[i] = p.y
        if p.task not in theta_cache:
            theta_cache[p.task] = table.lookup(p.task)
        theta[i] = theta_cache[p.task]
        if need_reasons and p.reason is not None:
            if p.reason not in psi_cache:
                raw = table.lookup(p.reason)
                norm = np.linalg.norm(raw)
                if norm == 0:
                    raise HarnessError(f"rationale {p.reason!r} has a zero embedding")
                psi_cache[p.reason] = (raw, raw / norm)
            raw, unit = psi_cache[p.reason]
            psi[i] = raw
            u[i] = unit
            udot[i] = unit @ theta[i]
            has_reason[i] = True
    return _PairArrays(x_a, x_b, y, theta, u, udot, psi, has_reason)


def _batch_loss_fn(arrays: _PairArrays, idx: np.ndarray, arch: enc.EncoderArchitecture,
                   method: str, weights: obj.LossWeights):
    x_a, x_b = arrays.x_a[idx], arrays.x_b[idx]
    y = arrays.y[idx]
    theta = arrays.theta[idx]
    mask = arrays.has_reason[idx]

    def loss_fn(tlayers):
        phi_a = enc.batch_phi(tlayers, arch, x_a)
        phi_b = enc.batch_phi(tlayers, arch, x_b)
        r_a = ad.tsum(ad.mul(phi_a, theta), axis=1)
        r_b = ad.tsum(ad.mul(phi_b, theta), axis=1)
        kw = {}
        if method == "rfp":
            psi = arrays.psi[idx]
            kw["q_a"] = ad.tsum(ad.mul(phi_a, psi), axis=1)
            kw["q_b"] = ad.tsum(ad.mul(phi_b, psi), axis=1)
        elif method in ("ec", "ic"):
            u, udot = arrays.u[idx], arrays.udot[idx]
            par_a = ad.mul(ad.tsum(ad.mul(phi_a, u), axis=1), udot)
            par_b = ad.mul(ad.tsum(ad.mul(phi_b, u), axis=1), udot)
            kw["r_a_par"] = par_a
            kw["r_b_par"] = par_b
            kw["r_a_perp"] = ad.add(r_a, ad.mul(par_a, -1.0))
            kw["r_b_perp"] = ad.add(r_b, ad.mul(par_b, -1.0))
        terms = obj.per_pair_losses(method, r_a, r_b, y, mask, weights, **kw)
        return ad.tmean(terms)

    return loss_fn


def _bce_grad(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d(cross-entropy)/d(logit gap); zero where the probability clamp binds."""
    from .geometry import PROB_FLOOR

    live = (p > PROB_FLOOR) & (p < 1.0 - PROB_FLOOR)
    return np.where(live, p - y, 0.0)


def _fused_loss_and_grad(params: enc.EncoderParams, arrays: _PairArrays, idx: np.ndarray,
                         arch: enc.EncoderArchitecture, method: str,
                         weights: obj.LossWeights):
    """Loss and exact parameter gradients for one mini-batch, hand-derived.

    Equivalent to differentiating ``per_pair_losses`` through ``batch_phi``
    (the test suite asserts agreement with the reverse-mode path); an order
    of magnitude faster, which is what keeps the experiment grids cheap.
    """
    from .geometry import bt_probability

    b = len(idx)
    y = arrays.y[idx]
    theta = arrays.theta[idx]
    mask = arrays.has_reason[idx]
    h = arrays.x_a.shape[1]
    d_in = arrays.x_a.shape[2]

    X = np.concatenate([arrays.x_a[idx], arrays.x_b[idx]]).reshape(2 * b * h, d_in)
    out, hs = enc.forward_cached(params.layers, X)
    w_t = enc.discount_weights(h, arch.discount)
    phi = (out.reshape(2 * b, h, arch.output_dim) * w_t[None, :, None]).sum(axis=1)
    phi_a, phi_b = phi[:b], phi[b:]

    r_a = np.einsum("ij,ij->i", phi_a, theta)
    r_b = np.einsum("ij,ij->i", phi_b, theta)
    g_ra = np.zeros(b)
    g_rb = np.zeros(b)
    g_par_a = np.zeros(b)
    g_par_b = np.zeros(b)
    g_perp_a = np.zeros(b)
    g_perp_b = np.zeros(b)
    g_qa = np.zeros(b)
    g_qb = np.zeros(b)
    kw = {}

    p_tot = bt_probability(r_a, r_b)
    g_tot = _bce_grad(p_tot, y)

    if method in ("bt", "bt_multi"):
        g_ra, g_rb = g_tot, -g_tot
    elif method == "rfp":
        psi = arrays.psi[idx]
        q_a = np.einsum("ij,ij->i", phi_a, psi)
        q_b = np.einsum("ij,ij->i", phi_b, psi)
        kw["q_a"], kw["q_b"] = q_a, q_b
        g_ra, g_rb = g_tot, -g_tot
        g_aux = np.where(mask, weights.rfp_aux_weight * _bce_grad(bt_probability(q_a, q_b), y), 0.0)
        g_qa, g_qb = g_aux, -g_aux
    else:
        u, udot = arrays.u[idx], arrays.udot[idx]
        par_a = np.einsum("ij,ij->i", phi_a, u) * udot
        par_b = np.einsum("ij,ij->i", phi_b, u) * udot
        perp_a = r_a - par_a
        perp_b = r_b - par_b
        kw.update(r_a_par=par_a, r_b_par=par_b, r_a_perp=perp_a, r_b_perp=perp_b)

        g_reason = np.where(mask, _bce_grad(bt_probability(par_a, par_b), y), 0.0)
        g_par_a += g_reason
        g_par_b -= g_reason

        for sign_target, par, perp, g_par, g_perp in (
            ("a", par_a, perp_a, g_par_a, g_perp_a),
            ("b", par_b, perp_b, g_par_b, g_perp_b),
        ):
            apar, aperp = np.abs(par), np.abs(perp)
            den = apar + aperp + weights.epsilon
            active = mask & (apar / den - weights.alpha > 0.0)
            coeff = weights.lambda_ratio * 0.5
            g_par += np.where(active, coeff * np.sign(par) * (aperp + weights.epsilon) / den**2, 0.0)
            g_perp += np.where(active, coeff * np.sign(perp) * (-apar) / den**2, 0.0)

        if method == "ec":
            g_eq = np.where(mask, weights.lambda_eq * 2.0 * (perp_a - perp_b), 0.0)
            g_perp_a += g_eq
            g_perp_b -= g_eq
        else:
            s = bt_probability(par_a - par_b, perp_a - perp_b)
            g_s = np.where(mask, weights.lambda_ineq * _bce_grad(s, y), 0.0)
            g_par_a += g_s
            g_par_b -= g_s
            g_perp_a -= g_s
            g_perp_b += g_s
            g_inner = np.where(mask, weights.lambda_ineq * g_tot, 0.0)
            g_ra += g_inner
            g_rb -= g_inner
        # Pairs without a rationale fall back to the plain pairwise loss.
        fallback = np.where(mask, 0.0, g_tot)
        g_ra += fallback
        g_rb -= fallback
        g_par_a = np.where(mask, g_par_a, 0.0)
        g_par_b = np.where(mask, g_par_b, 0.0)
        g_perp_a = np.where(mask, g_perp_a, 0.0)
        g_perp_b = np.where(mask, g_perp_b, 0.0)

    terms = obj.per_pair_losses(method, r_a, r_b, y, mask, weights, **kw)
    loss_value = float(np.mean(terms))
    if not np.isfinite(loss_value):
        raise enc.NonFiniteLossError(f"loss evaluated to {loss_value}")

    # Rewards are linear in phi: r = phi.theta, r_par = phi.(u*udot),
    # r_perp = phi.(theta - u*udot), q = phi.psi.
    scale = 1.0 / b
    d_phi = np.empty_like(phi)
    for side, (g_r, g_par, g_perp, g_q) in enumerate(
        ((g_ra, g_par_a, g_perp_a, g_qa), (g_rb, g_par_b, g_perp_b, g_qb))
    ):
        d = g_r[:, None] * theta
        if method in ("ec", "ic"):
            u, udot = arrays.u[idx], arrays.udot[idx]
            apar_vec = u * udot[:, None]
            d = d + g_par[:, None] * apar_vec + g_perp[:, None] * (theta - apar_vec)
        elif method == "rfp":
            d = d + g_q[:, None] * arrays.psi[idx]
        d_phi[side * b : (side + 1) * b] = d * scale
    d_out = (d_phi[:, None, :] * w_t[None, :, None]).reshape(2 * b * h, arch.output_dim)
    grads = enc.backward_from(params.layers, hs, d_out)
    return grads, loss_value


def train(method: str, dataset, cfg: TrainConfig, embeddings: EmbeddingTable):
    """Fit the encoder with mini-batch Adam; returns (params, loss_history).

    Deterministic per seed (fixed init, fixed shuffle order). Task and
    rationale strings are resolved before the first step, so a missing string
    fails fast; plain preference methods never look rationale strings up.
    """
    if method != cfg.method:
        cfg = replace(cfg, method=method)
    records = _records(dataset)
    if not records:
        raise HarnessError("cannot train on an empty dataset")
    if method == "bt" and len({p.task for p in records}) != 1:
        raise HarnessError("single-task preference training needs a single-task dataset")
    need_reasons = method in ("rfp", "ec", "ic")
    table_checksum = embeddings.checksum()
    arrays = _resolve_arrays(records, embeddings, need_reasons)

    arch = enc.EncoderArchitecture(
        input_dim=records[0].seg_a.step_dim,
        hidden=cfg.hidden,
        output_dim=embeddings.dim,
        discount=cfg.discount,
    )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, 7_741)))
    params = enc.init_params(int(rng.integers(2**32)), arch)

    flat = params.flat()
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)
    step = 0
    n = len(records)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            try:
                grads, loss_value = _fused_loss_and_grad(
                    params, arrays, idx, arch, method, cfg.weights
                )
            except enc.NonFiniteLossError as e:
                raise TrainingDivergence(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}: {e}"
                ) from e
            g = np.concatenate([np.concatenate([gw.ravel(), gb.ravel()]) for gw, gb in grads])
            step += 1
            m = cfg.beta1 * m + (1 - cfg.beta1) * g
            v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
            m_hat = m / (1 - cfg.beta1**step)
            v_hat = v / (1 - cfg.beta2**step)
            flat = flat - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
            params = params.with_flat(flat)
            epoch_losses.append(loss_value)
        history.append(float(np.mean(epoch_losses)))
    if embeddings.checksum() != table_checksum:
        raise HarnessError("embedding table changed during training; it must stay frozen")
    return params, history


# -- evaluation ---------------------------------------------------------------


def _pair_rewards(params: enc.EncoderParams, records: list[LabeledPair],
                  embeddings: EmbeddingTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    theta_cache: dict[str, np.ndarray] = {}
    by_h: dict[int, list[int]] = {}
    for i, p in enumerate(records):
        by_h.setdefault(p.seg_a.horizon, []).append(i)
    n = len(records)
    r_a = np.empty(n)
    r_b = np.empty(n)
    y = np.asarray([p.y for p in records], dtype=np.float64)
    for h, idxs in by_h.items():
        x = np.stack(
            [np.stack([records[i].seg_a.steps, records[i].seg_b.steps]) for i in idxs]
        )  # (k, 2, H, D)
        k = len(idxs)
        phi = enc.batch_phi(params.layers, params.arch, x.reshape(k * 2, h, -1))
        phi = phi.reshape(k, 2, -1)
        for row, i in enumerate(idxs):
            p = records[i]
            if p.task not in theta_cache:
                theta_cache[p.task] = embeddings.lookup(p.task)
            th = theta_cache[p.task]
            r_a[i] = phi[row, 0] @ th
            r_b[i] = phi[row, 1] @ th
    return r_a, r_b, y


def reward_accuracy(params: enc.EncoderParams, pairs, embeddings: EmbeddingTable) -> float:
    """Fraction of pairs whose preferred side gets the higher reward.

    Exact reward ties score one half. Pure read-only evaluation.
    """
    records = _records(pairs)
    if not records:
        raise HarnessError("reward_accuracy needs at least one pair")
    r_a, r_b, y = _pair_rewards(params, records, embeddings)
    pref = np.where(y == 1, r_a, r_b)
    other = np.where(y == 1, r_b, r_a)
    score = np.where(pref > other, 1.0, np.where(pref == other, 0.5, 0.0))
    return float(score.mean())


def greedy_selection_success(params: enc.EncoderParams, candidate_sets: list[CandidateSet],
                             embeddings: EmbeddingTable) -> float:
    """Fraction of sets where the top-reward segment is the desirable one.

    Ties resolve to the lowest index, matching a deterministic greedy picker.
    """
    if not candidate_sets:
        raise HarnessError("greedy_selection_success needs at least one candidate set")
    hits = 0
    for cs in candidate_sets:
        if len(cs.segments) < 2:
            raise HarnessError("candidate sets need at least 2 segments")
        theta = embeddings.lookup(cs.task)
        x = np.stack([s.steps for s in cs.segments])
        phi = enc.batch_phi(params.layers, params.arch, x)
        rewards = phi @ theta
        if int(np.argmax(rewards)) == cs.desirable_index:
            hits += 1
    return hits / len(candidate_sets)
