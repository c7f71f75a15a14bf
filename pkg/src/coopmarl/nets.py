"""Dense feed-forward networks with exact analytic gradients, in plain numpy.

Everything the learners need and nothing more: an MLP with ReLU hidden
layers and a linear output, reverse-mode gradients for both parameters and
inputs (the actor update differentiates a critic with respect to its action
input), an Adam optimizer, soft target-network interpolation, and
Gumbel-Softmax sampling for discrete exploration.

Conventions:
  - weights[l] has shape (layer_dims[l+1], layer_dims[l]); biases[l] has
    shape (layer_dims[l+1],). Forward is x @ W.T + b.
  - ReLU uses subgradient 0 at exactly 0.
  - Default dtype is float32 for training speed; gradient-check tests build
    float64 nets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHECKPOINT_VERSION = 1


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax, computed in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


class DenseNet:
    """MLP with ReLU hidden activations and a linear output layer.

    Parameters are initialized uniformly in +-1/sqrt(fan_in), the same rule
    for weights and biases, drawn from the generator passed in.
    """

    def __init__(self, layer_dims, rng: np.random.Generator, dtype=np.float32):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ValueError(f"layer_dims must be >=2 positive ints, got {layer_dims}")
        self.layer_dims = dims
        self.dtype = np.dtype(dtype)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(
                rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(self.dtype)
            )
            self.biases.append(rng.uniform(-bound, bound, size=fan_out).astype(self.dtype))

    @property
    def input_width(self) -> int:
        return self.layer_dims[0]

    @property
    def output_width(self) -> int:
        return self.layer_dims[-1]

    @property
    def param_count(self) -> int:
        return sum((fi + 1) * fo for fi, fo in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    def parameters(self) -> list[np.ndarray]:
        """All parameter arrays, alternating [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_parameters(self, params) -> None:
        for dst, src in zip(self.parameters(), params):
            if dst.shape != np.shape(src):
                raise ValueError(f"parameter shape mismatch: {dst.shape} vs {np.shape(src)}")
            dst[...] = src

    def copy(self) -> "DenseNet":
        clone = object.__new__(DenseNet)
        clone.layer_dims = list(self.layer_dims)
        clone.dtype = self.dtype
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.input_width:
            raise ValueError(
                f"input width {x.shape[-1]} does not match net input {self.input_width}"
            )
        return x

    def forward(self, x) -> np.ndarray:
        """Evaluate the net on a single vector (d,) or a batch (B, d)."""
        x = self._check_input(x)
        single = x.ndim == 1
        a = x.reshape(1, -1) if single else x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w.T + b
            if l < last:
                a = relu(a)
        return a[0] if single else a

    def forward_cached(self, x) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batched forward that keeps per-layer inputs and pre-activations.

        Returns (output, cache) where cache = [a0, z1, a1, z2, ..., zL] with
        a_l the post-activation input to layer l and z_l its pre-activation.
        The cache feeds backward().
        """
        a = self._check_input(x)
        if a.ndim != 2:
            raise ValueError("forward_cached expects a (B, d) batch")
        cache = [a]
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            cache.append(z)
            a = relu(z) if l < last else z
            if l < last:
                cache.append(a)
        return a, cache

    def backward(self, cache, grad_output) -> tuple[list[np.ndarray], np.ndarray]:
        """Reverse-mode gradients for a batched forward pass.

        grad_output is dL/d(output), shape (B, output_width). Returns
        (param_grads, input_grad): param_grads aligns with parameters()
        (summed over the batch), input_grad has shape (B, input_width).
        """
        g = np.asarray(grad_output, dtype=self.dtype)
        if g.ndim != 2 or g.shape[1] != self.output_width:
            raise ValueError(
                f"grad_output shape {g.shape} does not match output width {self.output_width}"
            )
        n_layers = len(self.weights)
        grads_w = [None] * n_layers
        grads_b = [None] * n_layers
        for l in range(n_layers - 1, -1, -1):
            a_in = cache[2 * l]
            grads_w[l] = g.T @ a_in
            grads_b[l] = g.sum(axis=0)
            g = g @ self.weights[l]
            if l > 0:
                z_prev = cache[2 * l - 1]
                g = g * (z_prev > 0)
        param_grads = []
        for gw, gb in zip(grads_w, grads_b):
            param_grads.append(gw)
            param_grads.append(gb)
        return param_grads, g

    def save(self, path) -> None:
        arrays = {
            "checkpoint_version": np.array(CHECKPOINT_VERSION),
            "layer_dims": np.array(self.layer_dims, dtype=np.int64),
        }
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{l}"] = w
            arrays[f"b{l}"] = b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "DenseNet":
        with np.load(path) as data:
            version = int(data["checkpoint_version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            dims = [int(d) for d in data["layer_dims"]]
            net = object.__new__(cls)
            net.layer_dims = dims
            net.weights = [data[f"w{l}"] for l in range(len(dims) - 1)]
            net.biases = [data[f"b{l}"] for l in range(len(dims) - 1)]
            net.dtype = net.weights[0].dtype
            for l, (w, b) in enumerate(zip(net.weights, net.biases)):
                if w.shape != (dims[l + 1], dims[l]) or b.shape != (dims[l + 1],):
                    raise ValueError(f"checkpoint layer {l} shape does not match descriptor")
        return net


class Adam:
    """Adaptive-moment optimizer over a net's parameter list.

    Rejects non-finite gradients with a ValueError so training loops surface
    divergence instead of silently corrupting parameters.
    """

    def __init__(self, net: DenseNet, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self, net: DenseNet, grads) -> None:
        params = net.parameters()
        if len(grads) != len(params):
            raise ValueError("gradient list does not match parameter list")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise ValueError("non-finite gradient passed to Adam.step")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        return {"step_count": self.step_count, "m": self.m, "v": self.v,
                "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    def load_state(self, state: dict) -> None:
        self.step_count = int(state["step_count"])
        self.m = [np.array(a) for a in state["m"]]
        self.v = [np.array(a) for a in state["v"]]


def soft_update(target: DenseNet, online: DenseNet, tau: float) -> None:
    """In-place target update: target <- tau * online + (1 - tau) * target."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    if target.layer_dims != online.layer_dims:
        raise ValueError(
            f"architecture mismatch: {target.layer_dims} vs {online.layer_dims}"
        )
    for tp, op in zip(target.parameters(), online.parameters()):
        tp *= 1.0 - tau
        tp += tau * op


@dataclass
class GumbelSample:
    """One draw from the Gumbel-Softmax over a logit vector."""

    logits: np.ndarray
    temperature: float
    relaxed_probabilities: np.ndarray
    hard_index: int


def gumbel_softmax_from_noise(logits, noise, temperature: float) -> np.ndarray:
    """Relaxed categorical sample given explicit Gumbel noise.

    Pure function of its arguments; the stochastic wrapper below draws the
    noise. Supports (n,) and (B, n) shapes.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return softmax((np.asarray(logits, dtype=np.float64) + noise) / temperature)


def gumbel_softmax_sample(logits, temperature: float, rng: np.random.Generator) -> GumbelSample:
    """Sample a relaxed one-hot and its hard argmax from a logit vector.

    The hard index is exactly Categorical(softmax(logits)) in distribution,
    independent of temperature; temperature only sharpens or flattens the
    relaxed vector.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError("gumbel_softmax_sample expects a logit vector")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    noise = rng.gumbel(size=logits.shape)
    relaxed = gumbel_softmax_from_noise(logits, noise, temperature)
    return GumbelSample(
        logits=logits,
        temperature=float(temperature),
        relaxed_probabilities=relaxed,
        hard_index=int(np.argmax(relaxed)),
    )


def relaxed_softmax_grad(relaxed: np.ndarray, grad_relaxed: np.ndarray,
                         temperature: float) -> np.ndarray:
    """Backprop through y = softmax((logits + g) / tau) to the logits.

    Given y and dL/dy (both (B, n)), returns dL/dlogits via the softmax
    Jacobian: dL/du = y * (dL/dy - sum(dL/dy * y)), dL/dlogits = dL/du / tau.
    """
    inner = (grad_relaxed * relaxed).sum(axis=-1, keepdims=True)
    return relaxed * (grad_relaxed - inner) / temperature
