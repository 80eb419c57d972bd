"""Minimal numpy MLP used to exercise the logger without a DL framework."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


class DenseLayer:
    def __init__(self, name: str, kernel: np.ndarray, bias: np.ndarray,
                 activation: str = "tanh", capture_output: bool = True):
        self.name = name
        self.type = "dense"
        self.activation = activation
        self.kernel = kernel
        self.bias = bias
        self.capture_output = capture_output

    def output_shape(self) -> tuple[int, ...]:
        return (self.kernel.shape[1],)

    def apply(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.kernel + self.bias
        if self.activation == "tanh":
            return np.tanh(z)
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        if self.activation == "softmax":
            e = np.exp(z - z.max(axis=1, keepdims=True))
            return e / e.sum(axis=1, keepdims=True)
        return z


class DenseNet:
    """Feed-forward stack; training is plain SGD on cross-entropy, enough to
    move the weights between epochs."""

    def __init__(self, layer_sizes: Sequence[int], seed: int = 0,
                 hidden_activation: str = "tanh"):
        rng = np.random.default_rng(seed)
        self.layers: list[DenseLayer] = []
        for i in range(len(layer_sizes) - 1):
            last = i == len(layer_sizes) - 2
            self.layers.append(DenseLayer(
                name="output" if last else f"hidden_{i + 1}",
                kernel=rng.standard_normal((layer_sizes[i], layer_sizes[i + 1])) * 0.3,
                bias=np.zeros(layer_sizes[i + 1]),
                activation="softmax" if last else hidden_activation,
            ))

    def layer_outputs(self, x: np.ndarray) -> dict[str, np.ndarray]:
        outputs: dict[str, np.ndarray] = {}
        h = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            h = layer.apply(h)
            if layer.capture_output:
                outputs[layer.name] = h
        return outputs

    def predict(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            h = layer.apply(h)
        return h

    def train_epoch(self, x: np.ndarray, y: np.ndarray, lr: float = 0.05) -> float:
        """One coarse gradient step per epoch; returns the epoch loss."""
        probs = self.predict(x)
        n = x.shape[0]
        onehot = np.zeros_like(probs)
        onehot[np.arange(n), y] = 1.0
        loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-12)))
        # backprop through the output layer only: cheap and sufficient to
        # change the weights between checkpoints
        grad_logits = (probs - onehot) / n
        last = self.layers[-1]
        inputs = np.asarray(x, dtype=np.float64)
        for layer in self.layers[:-1]:
            inputs = layer.apply(inputs)
        last.kernel = last.kernel - lr * inputs.T @ grad_logits
        last.bias = last.bias - lr * grad_logits.sum(axis=0)
        return loss


def toy_dataset(n: int, input_dim: int, classes: int,
                seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, input_dim))
    y = rng.integers(0, classes, size=n)
    return x, y
