"""Trainable trajectory encoder.

A per-step MLP (tanh hidden layers, linear output) maps raw state-action
features to a d-dimensional step embedding; a trajectory embeds as the
discount-weighted sum of its step embeddings. Rewards are inner products of
that embedding with a frozen task vector, optionally decomposed along a
rationale axis. Gradients of any scalar loss built from these pieces are
exact reverse-mode, checked against finite differences in the test suite.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import geometry
from .autodiff import Tensor


class EncoderError(ValueError):
    """Raised for shape mismatches or invalid architectures."""


class NonFiniteLossError(RuntimeError):
    """Raised when a training loss evaluates to NaN or infinity."""


@dataclass(frozen=True)
class EncoderArchitecture:
    """Shape and aggregation settings of the trajectory encoder."""

    input_dim: int
    hidden: tuple[int, ...] = (64, 64)
    output_dim: int = 64
    discount: float = 1.0

    def __post_init__(self):
        widths = (self.input_dim, *self.hidden, self.output_dim)
        if any(int(w) <= 0 for w in widths):
            raise EncoderError(f"layer widths must be positive, got {widths}")
        if not 0.0 < self.discount <= 1.0:
            raise EncoderError(f"discount must be in (0, 1], got {self.discount}")

    @property
    def layer_sizes(self) -> list[tuple[int, int]]:
        widths = (self.input_dim, *self.hidden, self.output_dim)
        return list(zip(widths[:-1], widths[1:]))


@dataclass
class TrajectorySegment:
    """A fixed-length run of per-step feature vectors from one task."""

    steps: np.ndarray
    source_task: str = ""

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.float64)
        if self.steps.ndim != 2 or self.steps.shape[0] < 1:
            raise EncoderError(
                f"segment steps must be a nonempty (H, D) array, got shape {self.steps.shape}"
            )
        if not np.all(np.isfinite(self.steps)):
            raise EncoderError("segment contains non-finite features")

    @property
    def horizon(self) -> int:
        return self.steps.shape[0]

    @property
    def step_dim(self) -> int:
        return self.steps.shape[1]


@dataclass
class EncoderParams:
    """All trainable weights: a list of (W, b) per layer, input side first."""

    arch: EncoderArchitecture
    layers: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in self.layers])

    def with_flat(self, values: np.ndarray) -> "EncoderParams":
        out, i = [], 0
        for W, b in self.layers:
            w = values[i : i + W.size].reshape(W.shape)
            i += W.size
            bb = values[i : i + b.size].reshape(b.shape)
            i += b.size
            out.append((w, bb))
        return EncoderParams(arch=self.arch, layers=out)

    def copy(self) -> "EncoderParams":
        return EncoderParams(arch=self.arch, layers=[(W.copy(), b.copy()) for W, b in self.layers])


@dataclass
class RewardDecomposition:
    """Reward of one segment split along a rationale axis."""

    phi: np.ndarray
    phi_par: np.ndarray
    phi_perp: np.ndarray
    r: float
    r_par: float
    r_perp: float


# The linear output layer starts wider than the hidden layers so initial
# reward magnitudes are O(1) rather than vanishing; training then reshapes an
# already-live output space instead of inflating it from near zero.
OUTPUT_INIT_GAIN = 3.0


def init_params(seed: int, arch: EncoderArchitecture) -> EncoderParams:
    """Fan-in scaled uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    layers = []
    sizes = arch.layer_sizes
    for i, (fan_in, fan_out) in enumerate(sizes):
        gain = OUTPUT_INIT_GAIN if i == len(sizes) - 1 else 1.0
        bound = gain / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append((W, np.zeros(fan_out)))
    return EncoderParams(arch=arch, layers=layers)


def _forward(layers, X):
    """Run the MLP on a (n, input_dim) batch; works on arrays or tensors."""
    h = X
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        z = ad.add(ad.matmul(h, W), b)
        h = ad.tanh(z) if i < last else z
    return h


def forward_cached(layers, X: np.ndarray):
    """MLP forward on a (n, input_dim) batch, keeping per-layer activations.

    Returns ``(out, hs)`` where ``hs[l]`` is the input to layer ``l`` (so
    ``hs[0]`` is ``X`` and hidden activations are post-tanh), as needed by
    ``backward_from``.
    """
    hs = [np.asarray(X, dtype=np.float64)]
    h = hs[0]
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        if i < last:
            h = np.tanh(z)
            hs.append(h)
        else:
            return z, hs
    raise EncoderError("encoder has no layers")


def backward_from(layers, hs, d_out: np.ndarray):
    """Hand-derived MLP backward pass from cached activations.

    ``d_out`` is the loss gradient at the linear output; returns parameter
    gradients shaped like ``layers``.
    """
    grads = [None] * len(layers)
    d = d_out
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads[i] = (hs[i].T @ d, d.sum(axis=0))
        if i > 0:
            d = (d @ W.T) * (1.0 - hs[i] * hs[i])
    return grads


def encode_steps(params: EncoderParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.arch.input_dim:
        raise EncoderError(
            f"step batch must have shape (n, {params.arch.input_dim}), got {X.shape}"
        )
    return _forward(params.layers, X)


def encode_step(params: EncoderParams, step: np.ndarray) -> np.ndarray:
    """Embed a single raw step feature vector."""
    step = np.asarray(step, dtype=np.float64)
    if step.ndim != 1 or step.shape[0] != params.arch.input_dim:
        raise EncoderError(
            f"step must have shape ({params.arch.input_dim},), got {step.shape}"
        )
    return encode_steps(params, step[None, :])[0]


def discount_weights(horizon: int, discount: float) -> np.ndarray:
    return discount ** np.arange(horizon, dtype=np.float64)


def encode_trajectory(params: EncoderParams, segment: TrajectorySegment) -> np.ndarray:
    """Discount-weighted sum of per-step embeddings."""
    if segment.horizon < 1:
        raise EncoderError("cannot encode an empty segment")
    E = encode_steps(params, segment.steps)
    w = discount_weights(segment.horizon, params.arch.discount)
    return (w[:, None] * E).sum(axis=0)


def batch_phi(layers, arch: EncoderArchitecture, X):
    """Trajectory embeddings for a (B, H, D) batch; tensor-aware.

    ``layers`` may hold plain arrays (fast evaluation) or autodiff tensors
    (training), and the result type follows.
    """
    B, H, D = X.shape
    E = _forward(layers, np.reshape(X, (B * H, D)))
    E = ad.reshape(E, (B, H, arch.output_dim))
    w = discount_weights(H, arch.discount)
    return ad.tsum(ad.mul(E, w[None, :, None]), axis=1)


def reward(params: EncoderParams, segment: TrajectorySegment, theta: np.ndarray) -> float:
    """Task reward: inner product of the trajectory embedding with theta."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (params.arch.output_dim,):
        raise EncoderError(
            f"theta must have shape ({params.arch.output_dim},), got {theta.shape}"
        )
    return float(encode_trajectory(params, segment) @ theta)


def decomposed_reward(
    params: EncoderParams,
    segment: TrajectorySegment,
    theta: np.ndarray,
    psi: np.ndarray,
) -> RewardDecomposition:
    """Total reward split into rationale-aligned and orthogonal parts."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (params.arch.output_dim,):
        raise EncoderError(
            f"theta must have shape ({params.arch.output_dim},), got {theta.shape}"
        )
    phi = encode_trajectory(params, segment)
    phi_par, phi_perp = geometry.project_decompose(phi, psi)
    r_par = float(phi_par @ theta)
    r_perp = float(phi_perp @ theta)
    return RewardDecomposition(
        phi=phi,
        phi_par=phi_par,
        phi_perp=phi_perp,
        r=float(phi @ theta),
        r_par=r_par,
        r_perp=r_perp,
    )


def gradients(params: EncoderParams, loss_fn):
    """Exact gradients of a scalar loss with respect to every parameter.

    ``loss_fn`` receives the parameters as a list of (W, b) autodiff tensor
    pairs and must return the scalar loss built from them (a plain float
    return means the loss ignores the parameters, giving zero gradients).
    Returns ``(grads, loss_value)`` with ``grads`` shaped like the layers.
    """
    tlayers = [(Tensor(W), Tensor(b)) for W, b in params.layers]
    loss = loss_fn(tlayers)
    loss_value = float(ad.value_of(loss))
    if not np.isfinite(loss_value):
        raise NonFiniteLossError(f"loss evaluated to {loss_value}")
    if isinstance(loss, Tensor):
        loss.backward()
        grads = [
            (
                W.grad if W.grad is not None else np.zeros_like(W.value),
                b.grad if b.grad is not None else np.zeros_like(b.value),
            )
            for W, b in tlayers
        ]
    else:
        grads = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params.layers]
    return grads, loss_value


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(params: EncoderParams, path: str) -> None:
    """Write architecture plus full-precision weights as JSON."""
    payload = {
        "input_dim": params.arch.input_dim,
        "hidden": list(params.arch.hidden),
        "output_dim": params.arch.output_dim,
        "discount": params.arch.discount,
        "layers": [
            {"W": [[float(x) for x in row] for row in W], "b": [float(x) for x in b]}
            for W, b in params.layers
        ],
    }
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> EncoderParams:
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise EncoderError(f"cannot load checkpoint {path}: {e}") from e
    arch = EncoderArchitecture(
        input_dim=raw["input_dim"],
        hidden=tuple(raw["hidden"]),
        output_dim=raw["output_dim"],
        discount=raw["discount"],
    )
    layers = []
    for i, ((fan_in, fan_out), layer) in enumerate(zip(arch.layer_sizes, raw["layers"])):
        W = np.asarray(layer["W"], dtype=np.float64)
        b = np.asarray(layer["b"], dtype=np.float64)
        if W.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise EncoderError(f"checkpoint layer {i} has inconsistent shapes")
        layers.append((W, b))
    if len(layers) != len(arch.layer_sizes):
        raise EncoderError("checkpoint layer count does not match architecture")
    return EncoderParams(arch=arch, layers=layers)
