"""Shared test utilities: random net instances and filtered gradient checks."""

from __future__ import annotations

import numpy as np

from distpu.mlp import (
    CLAMP_HI,
    MLPConfig,
    ParamSet,
    add_params,
    backward,
    finite_diff_grad,
    forward,
    init_params,
    score,
    score_grad,
)

# Margin every preactivation / clamp argument must keep from its kink so a
# 1e-5 finite-difference step cannot flip a branch.
KINK_MARGIN = 1e-3


def random_instance(rng, n_labeled=3, n_unlabeled=6, dim=3, hidden=(6, 5)):
    """A random 2-hidden-layer net plus labeled/unlabeled batches, kink-safe.

    Resamples until all ReLU preactivations and clamp arguments sit at least
    KINK_MARGIN away from their kinks.
    """
    while True:
        params = init_params(
            MLPConfig((dim, *hidden, 1), init_seed=int(rng.integers(2**31)))
        )
        x_l = rng.standard_normal((n_labeled, dim))
        x_u = rng.standard_normal((n_unlabeled, dim))
        if kink_safe(params, x_l) and kink_safe(params, x_u):
            return params, x_l, x_u


def kink_safe(params: ParamSet, x: np.ndarray) -> bool:
    if x.shape[0] == 0:
        return True
    logits, (activations, preacts) = forward(params, x)
    for z in preacts[:-1]:
        if np.abs(z).min() < KINK_MARGIN:
            return False
    if (np.abs(np.abs(logits) - CLAMP_HI)).min() < KINK_MARGIN:
        return False
    return True


def analytic_param_grads(params, chains):
    """Sum of backward passes; chains = [(cache, grad_wrt_logits), ...]."""
    total = None
    for cache, g in chains:
        part = backward(cache, g, params)
        total = part if total is None else add_params(total, part)
    return total


def rel_errors(analytic: ParamSet, numeric: ParamSet) -> np.ndarray:
    """Per-coordinate relative error with a small floor on the denominator.

    The floor keeps central-difference cancellation noise (absolute level
    around 1e-11 at step 1e-5) from dominating coordinates whose true
    gradient is orders of magnitude below the loss's gradient scale.
    """
    errs = []
    for a, f in zip(analytic.arrays(), numeric.arrays()):
        scale = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
        errs.append((np.abs(a - f) / scale).ravel())
    return np.concatenate(errs)


def gradcheck(value_fn, params, analytic: ParamSet, step=1e-5, tol=1e-4) -> float:
    """Max relative error between analytic grads and central differences."""
    numeric = finite_diff_grad(value_fn, params, step)
    err = rel_errors(analytic, numeric).max()
    assert err < tol, f"gradient mismatch: max relative error {err:.3e} >= {tol}"
    return err


def score_chain(params, x):
    """Forward + clamped sigmoid with the pieces needed to chain gradients back."""
    logits, cache = forward(params, x)
    return logits, score(logits), score_grad(logits), cache
