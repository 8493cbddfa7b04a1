"""Training objectives for PU learning.

The label-distribution-alignment risk drives the mean predicted score of the
labeled positives toward 1 and of the unlabeled pool toward the class prior,
through absolute differences of batch means. Entropy minimization pushes
individual scores toward 0/1 (avoiding the constant-prior trivial solution),
and Mixup regularizes with soft interpolated targets. uPU and nnPU
cost-sensitive risk estimators are provided as baselines.

Every operation returns its value together with exact gradients with respect
to its direct inputs (sigmoid scores, or raw logits for uPU/nnPU).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .rng import as_rng

# Searched hyperparameter ranges; violations warn but do not fail.
MU_RANGE = (0.0, 0.1)
NU_RANGE = (0.0, 10.0)
GAMMA_RANGE = (0.0, 0.3)
ALPHA_RANGE = (0.1, 10.0)


@dataclass(frozen=True)
class LossWeights:
    """Weights of the combined objective: base risk + mu*ent + nu*mix + gamma*ent_mixed."""

    mu: float = 0.0
    nu: float = 0.0
    gamma: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.mu < 0 or self.nu < 0 or self.gamma < 0:
            raise ConfigError("loss weights mu, nu, gamma must be >= 0")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")

    def warn_if_out_of_range(self) -> None:
        """Soft enforcement of the searched hyperparameter ranges."""
        for name, value, (lo, hi) in (
            ("mu", self.mu, MU_RANGE),
            ("nu", self.nu, NU_RANGE),
            ("gamma", self.gamma, GAMMA_RANGE),
            ("alpha", self.alpha, ALPHA_RANGE),
        ):
            if not lo <= value <= hi:
                warnings.warn(
                    f"{name}={value} is outside the searched range [{lo}, {hi}]",
                    stacklevel=3,
                )


@dataclass(frozen=True)
class RiskTerm:
    """Base risk value and gradients; `wrt` names the differentiation space."""

    value: float
    grad_labeled: np.ndarray
    grad_unlabeled: np.ndarray
    r_labeled: float = 0.0
    r_unlabeled: float = 0.0
    wrt: str = "scores"


@dataclass(frozen=True)
class MixedBatch:
    """Convex input combinations with their frozen soft targets.

    `lam` is the per-pair coefficient in [0.5, 1]; a batch-shared draw is
    broadcast. Targets are the sources' predicted scores, treated as constants.
    """

    features: np.ndarray
    lam: np.ndarray
    targets_a: np.ndarray
    targets_b: np.ndarray


@dataclass(frozen=True)
class LossBreakdown:
    """Values and gradients of the combined objective for one step.

    Gradient arrays live in the space named by `wrt` ("scores" or "logits"),
    one entry per example of the labeled, unlabeled, and mixed inputs.
    """

    r_lab: float
    r_l: float
    r_u: float
    l_ent: float
    l_mix: float
    l_ent_mixed: float
    total: float
    grad_labeled: np.ndarray
    grad_unlabeled: np.ndarray
    grad_mixed: np.ndarray
    wrt: str = "scores"

    def to_record(self) -> dict[str, float]:
        """Flat term -> value mapping for the per-step training log."""
        return {
            "r_lab": self.r_lab,
            "r_l": self.r_l,
            "r_u": self.r_u,
            "l_ent": self.l_ent,
            "l_mix": self.l_mix,
            "l_ent_mixed": self.l_ent_mixed,
            "total": self.total,
        }


def _check_scores(scores: np.ndarray, name: str) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size and not (
        np.isfinite(scores).all() and (scores > 0.0).all() and (scores < 1.0).all()
    ):
        raise ContractError(f"{name} must lie strictly inside (0, 1)")
    return scores


def _check_prior(prior: float, lo_open: bool = True) -> float:
    prior = float(prior)
    lo_ok = prior > 0.0 if lo_open else prior >= 0.0
    if not (lo_ok and prior < 1.0):
        bounds = "(0, 1)" if lo_open else "[0, 1)"
        raise ConfigError(f"class prior must lie in {bounds}, got {prior}")
    return prior


def dist_alignment_risk(scores_l, scores_u, prior: float) -> RiskTerm:
    """Label distribution alignment risk 2*prior*|mean_L - 1| + |mean_U - prior|.

    Gradients are exact subgradients: the sign of each absolute-value argument
    distributed over its mean, and 0 at the kink. An empty labeled side drops
    the labeled term.
    """
    scores_l = _check_scores(scores_l, "scores_l")
    scores_u = _check_scores(scores_u, "scores_u")
    prior = _check_prior(prior)
    if scores_u.size == 0:
        raise ContractError("scores_u must be non-empty")

    if scores_l.size:
        diff_l = scores_l.mean() - 1.0
        r_l = abs(diff_l)
        grad_l = np.full(scores_l.shape, 2.0 * prior * np.sign(diff_l) / scores_l.size)
    else:
        r_l = 0.0
        grad_l = np.zeros(0)
    diff_u = scores_u.mean() - prior
    r_u = abs(diff_u)
    grad_u = np.full(scores_u.shape, np.sign(diff_u) / scores_u.size)
    value = 2.0 * prior * r_l + r_u
    return RiskTerm(float(value), grad_l, grad_u, float(r_l), float(r_u), wrt="scores")


def binary_entropy(scores: np.ndarray) -> np.ndarray:
    """Elementwise -(1-s)ln(1-s) - s ln(s)."""
    return -((1.0 - scores) * np.log1p(-scores) + scores * np.log(scores))


def entropy_loss(scores) -> tuple[float, np.ndarray]:
    """Mean binary entropy of the scores; gradient per score is ln((1-s)/s)/n."""
    scores = _check_scores(scores, "scores")
    if scores.size == 0:
        raise ContractError("entropy_loss needs at least one score")
    value = binary_entropy(scores).mean()
    grads = (np.log1p(-scores) - np.log(scores)) / scores.size
    return float(value), grads


def sample_mixup(features, scores, alpha: float, seed, per_pair: bool = False) -> MixedBatch:
    """Pair the batch against a random permutation of itself and mix convexly.

    lambda ~ Beta(alpha, alpha) once per batch (or per pair), folded to
    lambda' = max(lambda, 1-lambda). Targets are the sources' current scores,
    recorded as constants.
    """
    features = np.asarray(features, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    n = features.shape[0]
    if n < 2:
        raise ContractError(f"mixup needs a batch of >= 2 examples, got {n}")
    if scores.shape != (n,):
        raise ContractError("scores must have one entry per batch row")
    if not alpha > 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    rng = as_rng(seed)
    lam = rng.beta(alpha, alpha, size=n if per_pair else None)
    lam = np.maximum(lam, 1.0 - lam)
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (n,)).copy()
    perm = rng.permutation(n)
    mixed = lam[:, None] * features + (1.0 - lam)[:, None] * features[perm]
    return MixedBatch(mixed, lam, scores.copy(), scores[perm].copy())


def bce(pred, target) -> np.ndarray:
    """Binary cross entropy -(1-t)ln(1-p) - t ln(p); targets may touch 0 or 1."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return -((1.0 - target) * np.log1p(-pred) + target * np.log(pred))


def mixup_loss(mixed_scores, mixed: MixedBatch) -> tuple[float, np.ndarray]:
    """Mean of lam*bce(s', s1) + (1-lam)*bce(s', s2); gradients w.r.t. s' only."""
    s = _check_scores(mixed_scores, "mixed_scores")
    if s.shape != mixed.lam.shape:
        raise ContractError("mixed_scores must match the mixed batch size")
    ta, tb = mixed.targets_a, mixed.targets_b
    if not (
        np.isfinite(ta).all()
        and np.isfinite(tb).all()
        and (ta >= 0).all()
        and (ta <= 1).all()
        and (tb >= 0).all()
        and (tb <= 1).all()
    ):
        raise ContractError("mixup targets must be finite values in [0, 1]")
    lam = mixed.lam
    value = (lam * bce(s, ta) + (1.0 - lam) * bce(s, tb)).mean()
    n = s.size
    grads = (
        lam * ((1.0 - ta) / (1.0 - s) - ta / s)
        + (1.0 - lam) * ((1.0 - tb) / (1.0 - s) - tb / s)
    ) / n
    return float(value), grads


def mixed_entropy_loss(mixed_scores) -> tuple[float, np.ndarray]:
    """Mean of bce(s', s'), i.e. the binary entropy of the mixed predictions."""
    s = _check_scores(mixed_scores, "mixed_scores")
    if s.size == 0:
        raise ContractError("mixed_entropy_loss needs at least one score")
    value = bce(s, s).mean()
    grads = (np.log1p(-s) - np.log(s)) / s.size
    return float(value), grads


def naive_bce_risk(scores_l, scores_u) -> RiskTerm:
    """BCE treating every unlabeled example as negative and every labeled as positive."""
    scores_l = _check_scores(scores_l, "scores_l")
    scores_u = _check_scores(scores_u, "scores_u")
    if scores_u.size == 0:
        raise ContractError("scores_u must be non-empty")
    n = scores_l.size + scores_u.size
    value = (-np.log(scores_l).sum() - np.log1p(-scores_u).sum()) / n
    grad_l = -1.0 / (scores_l * n)
    grad_u = 1.0 / ((1.0 - scores_u) * n)
    return RiskTerm(float(value), grad_l, grad_u, wrt="scores")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_upu_inputs(logits_l, logits_u, prior, surrogate):
    if surrogate != "sigmoid-loss":
        raise ConfigError(f"unsupported surrogate {surrogate!r}")
    logits_l = np.asarray(logits_l, dtype=np.float64)
    logits_u = np.asarray(logits_u, dtype=np.float64)
    if logits_l.size == 0:
        raise ContractError("uPU/nnPU need at least one labeled positive")
    if logits_u.size == 0:
        raise ContractError("logits_u must be non-empty")
    if not (np.isfinite(logits_l).all() and np.isfinite(logits_u).all()):
        raise ContractError("logits contain NaN or Inf")
    prior = _check_prior(prior, lo_open=False)
    return logits_l, logits_u, prior


def upu_risk(logits_l, logits_u, prior: float, surrogate: str = "sigmoid-loss") -> RiskTerm:
    """Unbiased PU risk with the sigmoid surrogate l(z, y) = sigmoid(-y z).

    value = prior*mean_L[l(z,+1)] + mean_U[l(z,-1)] - prior*mean_L[l(z,-1)];
    may be negative. Gradients are with respect to the raw logits.
    """
    logits_l, logits_u, prior = _check_upu_inputs(logits_l, logits_u, prior, surrogate)
    s_l = _sigmoid(logits_l)
    s_u = _sigmoid(logits_u)
    value = prior * _sigmoid(-logits_l).mean() + s_u.mean() - prior * s_l.mean()
    # d sigmoid(-z)/dz = -s(1-s); d sigmoid(z)/dz = s(1-s)
    grad_l = -2.0 * prior * s_l * (1.0 - s_l) / logits_l.size
    grad_u = s_u * (1.0 - s_u) / logits_u.size
    return RiskTerm(float(value), grad_l, grad_u, wrt="logits")


def nnpu_risk(logits_l, logits_u, prior: float, surrogate: str = "sigmoid-loss") -> RiskTerm:
    """Non-negative PU risk: the unlabeled-side term is clamped at 0.

    When mean_U[l(z,-1)] - prior*mean_L[l(z,-1)] goes negative, the returned
    gradient descends the negated clamped term (pushing it back up) instead of
    the value, which is the standard training rule for this estimator.
    """
    logits_l, logits_u, prior = _check_upu_inputs(logits_l, logits_u, prior, surrogate)
    s_l = _sigmoid(logits_l)
    s_u = _sigmoid(logits_u)
    positive_part = prior * _sigmoid(-logits_l).mean()
    neg_term = s_u.mean() - prior * s_l.mean()
    grad_neg_l = -prior * s_l * (1.0 - s_l) / logits_l.size
    grad_neg_u = s_u * (1.0 - s_u) / logits_u.size
    if neg_term >= 0.0:
        value = positive_part + neg_term
        grad_l = -prior * s_l * (1.0 - s_l) / logits_l.size + grad_neg_l
        grad_u = grad_neg_u
    else:
        value = positive_part
        grad_l = -grad_neg_l
        grad_u = -grad_neg_u
    return RiskTerm(float(value), grad_l, grad_u, wrt="logits")


def total_loss(
    base: RiskTerm,
    weights: LossWeights,
    ent: tuple[float, np.ndarray] | None = None,
    mix: tuple[float, np.ndarray] | None = None,
    ent_mixed: tuple[float, np.ndarray] | None = None,
) -> LossBreakdown:
    """Combine base + mu*ent + nu*mix + gamma*ent_mixed, values and gradients alike.

    All supplied gradients must already live in the base term's space.
    `ent` differentiates over the unlabeled inputs; `mix`/`ent_mixed` over the
    mixed inputs.
    """
    for name, term in (("base", base.value), ("ent", ent), ("mix", mix), ("ent_mixed", ent_mixed)):
        v = term[0] if isinstance(term, tuple) else term
        if v is not None and not np.isfinite(v):
            raise ContractError(f"{name} term value is not finite")

    l_ent, grad_ent = ent if ent is not None else (0.0, None)
    l_mix, grad_mix = mix if mix is not None else (0.0, None)
    l_entm, grad_entm = ent_mixed if ent_mixed is not None else (0.0, None)

    grad_labeled = base.grad_labeled.copy()
    grad_unlabeled = base.grad_unlabeled.copy()
    if grad_ent is not None:
        grad_unlabeled = grad_unlabeled + weights.mu * grad_ent
    n_mixed = grad_mix.size if grad_mix is not None else (
        grad_entm.size if grad_entm is not None else 0
    )
    grad_mixed = np.zeros(n_mixed)
    if grad_mix is not None:
        grad_mixed = grad_mixed + weights.nu * grad_mix
    if grad_entm is not None:
        grad_mixed = grad_mixed + weights.gamma * grad_entm

    total = base.value + weights.mu * l_ent + weights.nu * l_mix + weights.gamma * l_entm
    return LossBreakdown(
        r_lab=base.value,
        r_l=base.r_labeled,
        r_u=base.r_unlabeled,
        l_ent=float(l_ent),
        l_mix=float(l_mix),
        l_ent_mixed=float(l_entm),
        total=float(total),
        grad_labeled=grad_labeled,
        grad_unlabeled=grad_unlabeled,
        grad_mixed=grad_mixed,
        wrt=base.wrt,
    )
