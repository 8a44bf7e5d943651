"""A tiny two-layer ReLU network with hand-rolled reverse-mode differentiation.

The backward pass uses ReLU'(0) := 0, the same selection convention autodiff
frameworks apply, so the returned vector is a valid subgradient selection
everywhere and equals the gradient wherever no pre-activation is exactly zero.
Parameters travel as a single flat vector (W1, b1, W2, b2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOSSES = ("mse", "softmax_ce")


@dataclass(frozen=True)
class MlpSpec:
    n_inputs: int
    n_hidden: int
    n_outputs: int
    loss: str = "mse"

    def __post_init__(self) -> None:
        if min(self.n_inputs, self.n_hidden, self.n_outputs) < 1:
            raise ValueError("layer widths must be positive")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")

    @property
    def n_params(self) -> int:
        return (
            self.n_hidden * self.n_inputs
            + self.n_hidden
            + self.n_outputs * self.n_hidden
            + self.n_outputs
        )

    def unpack(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {params.shape}")
        h, i, o = self.n_hidden, self.n_inputs, self.n_outputs
        w1, rest = params[: h * i].reshape(h, i), params[h * i :]
        b1, rest = rest[:h], rest[h:]
        w2, b2 = rest[: o * h].reshape(o, h), rest[o * h :]
        return w1, b1, w2, b2

    def pack(self, w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray) -> np.ndarray:
        return np.concatenate([w1.ravel(), b1.ravel(), w2.ravel(), b2.ravel()])

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """He-style initialization, zero biases."""
        w1 = rng.standard_normal((self.n_hidden, self.n_inputs)) * np.sqrt(2.0 / self.n_inputs)
        w2 = rng.standard_normal((self.n_outputs, self.n_hidden)) * np.sqrt(2.0 / self.n_hidden)
        return self.pack(w1, np.zeros(self.n_hidden), w2, np.zeros(self.n_outputs))


def forward(spec: MlpSpec, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Network outputs for a batch, shape (B, n_outputs)."""
    w1, b1, w2, b2 = spec.unpack(params)
    pre = inputs @ w1.T + b1
    hidden = np.maximum(pre, 0.0)
    return hidden @ w2.T + b2


def min_preactivation_gap(spec: MlpSpec, params: np.ndarray, inputs: np.ndarray) -> float:
    """Smallest |pre-activation| over the batch: the distance to the nearest ReLU kink."""
    w1, b1, _, _ = spec.unpack(params)
    return float(np.min(np.abs(inputs @ w1.T + b1)))


def _loss_and_output_grad(
    spec: MlpSpec, outputs: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    batch = outputs.shape[0]
    if spec.loss == "mse":
        targets = np.asarray(targets, dtype=float).reshape(batch, spec.n_outputs)
        err = outputs - targets
        loss = 0.5 * float(np.mean(np.sum(err**2, axis=1)))
        return loss, err / batch
    # softmax cross-entropy over integer class labels
    labels = np.asarray(targets).reshape(batch).astype(int)
    shifted = outputs - outputs.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    loss = float(-np.mean(np.log(probs[np.arange(batch), labels])))
    grad = probs.copy()
    grad[np.arange(batch), labels] -= 1.0
    return loss, grad / batch


def loss_value(spec: MlpSpec, params: np.ndarray, inputs: np.ndarray, targets: np.ndarray) -> float:
    loss, _ = _loss_and_output_grad(spec, forward(spec, params, inputs), targets)
    return loss


def loss_and_subgrad(
    spec: MlpSpec, params: np.ndarray, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Batch loss and its subgradient selection with respect to the flat parameters."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != spec.n_inputs:
        raise ValueError(f"inputs must have shape (B, {spec.n_inputs}), got {inputs.shape}")
    if inputs.shape[0] < 1:
        raise ValueError("batch must be nonempty")
    w1, b1, w2, b2 = spec.unpack(params)
    pre = inputs @ w1.T + b1
    hidden = np.maximum(pre, 0.0)
    outputs = hidden @ w2.T + b2
    loss, d_out = _loss_and_output_grad(spec, outputs, targets)
    d_w2 = d_out.T @ hidden
    d_b2 = d_out.sum(axis=0)
    d_hidden = d_out @ w2
    d_pre = d_hidden * (pre > 0.0)
    d_w1 = d_pre.T @ inputs
    d_b1 = d_pre.sum(axis=0)
    return loss, spec.pack(d_w1, d_b1, d_w2, d_b2)


def synthetic_regression(
    spec: MlpSpec,
    n_samples: int,
    rng: np.random.Generator,
    *,
    teacher_hidden: int = 8,
    noise_sigma: float = 0.05,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw inputs ~ N(0,1) and targets from a random teacher network plus noise."""
    teacher = MlpSpec(spec.n_inputs, teacher_hidden, spec.n_outputs)
    theta = teacher.init_params(rng)
    # random biases so the teacher's kinks are not all at the origin
    theta = theta.copy()
    w1_end = teacher.n_hidden * teacher.n_inputs
    theta[w1_end : w1_end + teacher.n_hidden] = rng.standard_normal(teacher.n_hidden) * 0.5
    inputs = rng.standard_normal((n_samples, spec.n_inputs))
    targets = forward(teacher, theta, inputs)
    if noise_sigma > 0:
        targets = targets + noise_sigma * rng.standard_normal(targets.shape)
    return inputs, targets


def synthetic_classification(
    spec: MlpSpec, n_samples: int, rng: np.random.Generator, *, teacher_hidden: int = 8
) -> tuple[np.ndarray, np.ndarray]:
    """Inputs ~ N(0,1); integer labels = argmax of a random teacher's outputs."""
    teacher = MlpSpec(spec.n_inputs, teacher_hidden, spec.n_outputs)
    theta = teacher.init_params(rng)
    inputs = rng.standard_normal((n_samples, spec.n_inputs))
    labels = np.argmax(forward(teacher, theta, inputs), axis=1)
    return inputs, labels
