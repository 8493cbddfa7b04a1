"""Small ReLU MLP with explicit forward and reverse passes.

The model output f(x) is a single logit per example; probability scores are
the sigmoid of the logit clamped to [-10, 10] (NaN protection for the entropy
terms). Everything is float64 so finite-difference gradient checks at 1e-4
relative tolerance are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DataFormatError
from .rng import derive_rng

CLAMP_LO = -10.0
CLAMP_HI = 10.0

_CHECKPOINT_MAGIC = b"DISTPU-CKPT v1\n"


@dataclass(frozen=True)
class MLPConfig:
    """Layer widths run input -> hidden... -> 1; at least one hidden layer."""

    layer_widths: tuple[int, ...]
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 3:
            raise ConfigError("layer_widths needs input, at least one hidden, and output")
        if widths[-1] != 1:
            raise ConfigError(f"output width must be 1, got {widths[-1]}")
        if any(w < 1 for w in widths):
            raise ConfigError(f"layer widths must be positive, got {widths}")
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation!r}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def feature_dim(self) -> int:
        return self.layer_widths[0]


@dataclass(frozen=True)
class ParamSet:
    """Per-layer weight matrices (fan_in, fan_out) and bias vectors (fan_out,)."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "biases", tuple(self.biases))
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ContractError("inconsistent parameter shapes")

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> tuple[np.ndarray, ...]:
        """All parameter arrays in a fixed order (W0, b0, W1, b1, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return tuple(out)


def params_like(params: ParamSet, arrays) -> ParamSet:
    """Rebuild a ParamSet from arrays in the order produced by `arrays()`."""
    arrays = list(arrays)
    n = len(params.weights)
    return ParamSet(tuple(arrays[2 * i] for i in range(n)), tuple(arrays[2 * i + 1] for i in range(n)))


def zeros_like_params(params: ParamSet) -> ParamSet:
    return params_like(params, [np.zeros_like(a) for a in params.arrays()])


def add_params(a: ParamSet, b: ParamSet) -> ParamSet:
    return params_like(a, [x + y for x, y in zip(a.arrays(), b.arrays())])


def init_params(config: MLPConfig) -> ParamSet:
    """Zero-mean weights scaled by 1/sqrt(fan_in); biases zero; seeded."""
    rng = derive_rng(config.init_seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(config.layer_widths[:-1], config.layer_widths[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return ParamSet(tuple(weights), tuple(biases))


def forward(params: ParamSet, features: np.ndarray):
    """Compute logits for a batch; the cache feeds `backward`.

    Returns (logits (n,), cache).
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ContractError(f"features must be 2-d, got shape {x.shape}")
    if x.shape[1] != params.weights[0].shape[0]:
        raise ContractError(
            f"feature width {x.shape[1]} does not match input width "
            f"{params.weights[0].shape[0]}"
        )
    activations = [x]
    preacts = []
    a = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        preacts.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        if i != last:
            activations.append(a)
    cache = (activations, preacts)
    return preacts[-1][:, 0], cache


def score(logits: np.ndarray) -> np.ndarray:
    """Sigmoid of the logit clamped to [-10, 10]; strictly inside (0, 1)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size and not np.isfinite(logits).all():
        raise ContractError("logits contain NaN or Inf")
    return 1.0 / (1.0 + np.exp(-np.clip(logits, CLAMP_LO, CLAMP_HI)))


def score_grad(logits: np.ndarray) -> np.ndarray:
    """d score / d logit: s(1-s) inside the clamp window, 0 outside (saturating)."""
    logits = np.asarray(logits, dtype=np.float64)
    s = score(logits)
    inside = (logits >= CLAMP_LO) & (logits <= CLAMP_HI)
    return np.where(inside, s * (1.0 - s), 0.0)


def backward(cache, grad_wrt_logits: np.ndarray, params: ParamSet) -> ParamSet:
    """Exact reverse-mode gradients of sum_i grad_i * logit_i w.r.t. every parameter."""
    activations, preacts = cache
    g = np.asarray(grad_wrt_logits, dtype=np.float64)
    if g.shape != (activations[0].shape[0],):
        raise ContractError(
            f"grad_wrt_logits shape {g.shape} does not match batch size "
            f"{activations[0].shape[0]}"
        )
    if len(preacts) != len(params.weights):
        raise ContractError("cache does not match the parameter set")
    delta = g[:, None]
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (preacts[i - 1] > 0)
    return ParamSet(tuple(grads_w), tuple(grads_b))


def finite_diff_grad(loss_fn, params: ParamSet, step: float) -> ParamSet:
    """Central-difference gradient of a scalar loss over every parameter coordinate."""
    if not step > 0:
        raise ConfigError(f"step must be > 0, got {step}")
    grads = []
    base = [a.copy() for a in params.arrays()]
    for k, arr in enumerate(base):
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            hi = loss_fn(params_like(params, base))
            arr[idx] = orig - step
            lo = loss_fn(params_like(params, base))
            arr[idx] = orig
            g[idx] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return params_like(params, grads)


def save_params(path, params: ParamSet) -> None:
    """Versioned checkpoint: magic line, widths line, then row-major float64 LE bytes."""
    widths = " ".join(str(w) for w in params.layer_widths)
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write((widths + "\n").encode("ascii"))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_params(path) -> ParamSet:
    """Read a checkpoint written by `save_params`."""
    path = str(path)
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != _CHECKPOINT_MAGIC:
            raise DataFormatError(f"{path}: bad checkpoint magic at offset 0")
        try:
            widths = [int(tok) for tok in fh.readline().split()]
        except ValueError as exc:
            raise DataFormatError(f"{path}: malformed widths line") from exc
        if len(widths) < 2:
            raise DataFormatError(f"{path}: widths line must list at least two layers")
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            n = fan_in * fan_out * 8
            buf = fh.read(n)
            if len(buf) != n:
                raise DataFormatError(f"{path}: truncated weight block")
            weights.append(np.frombuffer(buf, dtype="<f8").reshape(fan_in, fan_out).copy())
            buf = fh.read(fan_out * 8)
            if len(buf) != fan_out * 8:
                raise DataFormatError(f"{path}: truncated bias block")
            biases.append(np.frombuffer(buf, dtype="<f8").copy())
        if fh.read(1):
            raise DataFormatError(f"{path}: trailing bytes after final layer")
    params = ParamSet(tuple(weights), tuple(biases))
    for arr in params.arrays():
        if not np.isfinite(arr).all():
            raise DataFormatError(f"{path}: checkpoint contains non-finite values")
    return params
