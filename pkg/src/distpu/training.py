"""Deterministic training loop.

Protocol: Adam with decoupled weight decay, learning rate cosine-annealed over
the whole run; a warm-up stage without Mixup, then a Mixup stage during which
the entropy weight mu is cosine-annealed to zero. Ablation switches select
which objective terms participate (Roman-numeral variants I..VIII).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import BatchPlan, PUDataset, batch_iter
from .errors import ConfigError, ContractError, TrainingDiverged
from .losses import (
    LossBreakdown,
    LossWeights,
    dist_alignment_risk,
    entropy_loss,
    mixed_entropy_loss,
    mixup_loss,
    naive_bce_risk,
    nnpu_risk,
    sample_mixup,
    total_loss,
    upu_risk,
)
from .metrics import predicted_prior
from .mlp import (
    MLPConfig,
    ParamSet,
    add_params,
    backward,
    forward,
    init_params,
    params_like,
    score,
    score_grad,
    zeros_like_params,
)
from .rng import TAG_MIXUP, derive_rng

OBJECTIVES = ("dist-pu", "upu", "nnpu", "naive")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class Ablation:
    """Objective-term switches; the (rlab, ent, mix) triple indexes Table-style variants."""

    use_rlab: bool = True
    use_ent: bool = True
    use_mix: bool = True


_VARIANTS = {
    (False, False, False): "I",
    (True, False, False): "II",
    (False, True, False): "III",
    (False, False, True): "IV",
    (True, True, False): "V",
    (True, False, True): "VI",
    (False, True, True): "VII",
    (True, True, True): "VIII",
}


@dataclass(frozen=True)
class VariantInfo:
    name: str
    ablation: Ablation
    description: str


def variant_objective(ablation: Ablation) -> VariantInfo:
    """Map the three switches to the variant name I..VIII.

    Variant I (all off) is the naive baseline that treats unlabeled data as
    negatives; the ent switch controls both entropy terms (mu and gamma).
    """
    key = (ablation.use_rlab, ablation.use_ent, ablation.use_mix)
    name = _VARIANTS[key]
    parts = []
    parts.append("alignment risk" if ablation.use_rlab else "naive BCE")
    if ablation.use_ent:
        parts.append("entropy")
    if ablation.use_mix:
        parts.append("mixup")
    return VariantInfo(name, ablation, " + ".join(parts))


def ablation_for_variant(name: str) -> Ablation:
    """Inverse of `variant_objective` for the harness."""
    for key, variant in _VARIANTS.items():
        if variant == name:
            return Ablation(*key)
    raise ConfigError(f"unknown variant {name!r}, expected one of I..VIII")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    weight_decay: float = 5e-3
    warmup_epochs: int = 10
    mixup_epochs: int = 60
    batch_size: int = 256
    weights: LossWeights = field(default_factory=LossWeights)
    objective: str = "dist-pu"
    ablation: Ablation = field(default_factory=Ablation)
    seed: int = 0
    prior_for_training: float | None = None
    mixup_per_pair: bool = False
    mixup_hard_positive_targets: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.warmup_epochs < 0 or self.mixup_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.prior_for_training is not None and not (0.0 < self.prior_for_training < 1.0):
            raise ConfigError("prior_for_training must lie in (0, 1)")
        self.weights.warn_if_out_of_range()


@dataclass(frozen=True)
class OptimizerState:
    """Adam first/second moments mirroring the parameter tree, plus step counter."""

    m: ParamSet
    v: ParamSet
    step_count: int = 0


def init_optimizer_state(params: ParamSet) -> OptimizerState:
    return OptimizerState(zeros_like_params(params), zeros_like_params(params), 0)


def cosine_value(initial: float, step: int, total_steps: int) -> float:
    """Cosine annealing from `initial` at step 0 to 0 at `total_steps`."""
    if total_steps < 1:
        raise ContractError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ContractError(f"step {step} outside [0, {total_steps}]")
    return initial * (1.0 + np.cos(np.pi * step / total_steps)) / 2.0


def adam_update(
    params: ParamSet,
    grads: ParamSet,
    state: OptimizerState,
    learning_rate: float,
    weight_decay: float,
) -> tuple[ParamSet, OptimizerState]:
    """One Adam step with bias correction and decoupled weight decay.

    Weight decay shrinks parameters by lr*wd before the moment update.
    """
    t = state.step_count + 1
    new_params, new_m, new_v = [], [], []
    for theta, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        if theta.shape != g.shape:
            raise ContractError("gradient shape does not match parameters")
        theta = theta * (1.0 - learning_rate * weight_decay)
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        new_params.append(theta - learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS))
        new_m.append(m)
        new_v.append(v)
    return (
        params_like(params, new_params),
        OptimizerState(params_like(params, new_m), params_like(params, new_v), t),
    )


@dataclass(frozen=True)
class EpochLog:
    """Per-epoch aggregates; wall-clock time is kept out of serialized logs."""

    epoch: int
    r_lab: float
    r_l: float
    r_u: float
    l_ent: float
    l_mix: float
    l_ent_mixed: float
    total: float
    learning_rate: float
    mu: float
    predicted_prior: float
    wall_clock_s: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "r_lab": self.r_lab,
            "r_l": self.r_l,
            "r_u": self.r_u,
            "l_ent": self.l_ent,
            "l_mix": self.l_mix,
            "l_ent_mixed": self.l_ent_mixed,
            "total": self.total,
            "learning_rate": self.learning_rate,
            "mu": self.mu,
            "predicted_prior": self.predicted_prior,
        }


def _chain_to_logits(term, logits):
    """Convert a (value, grad-wrt-scores) pair to logit space."""
    value, grads = term
    return value, grads * score_grad(logits)


def _step_breakdown(
    params: ParamSet,
    batch,
    prior: float,
    cfg: TrainConfig,
    mu_t: float,
    with_mixup: bool,
    mixup_rng,
) -> tuple[LossBreakdown, ParamSet]:
    """Loss breakdown and parameter gradients for one mini-batch."""
    ab = cfg.ablation
    n_l = batch.x_labeled.shape[0]

    if n_l:
        logits_l, cache_l = forward(params, batch.x_labeled)
        scores_l = score(logits_l)
    else:
        logits_l, cache_l = np.zeros(0), None
        scores_l = np.zeros(0)
    logits_u, cache_u = forward(params, batch.x_unlabeled)
    scores_u = score(logits_u)

    if cfg.objective == "dist-pu":
        if ab.use_rlab:
            base = dist_alignment_risk(scores_l, scores_u, prior)
        else:
            base = naive_bce_risk(scores_l, scores_u)
    elif cfg.objective == "naive":
        base = naive_bce_risk(scores_l, scores_u)
    elif cfg.objective == "upu":
        base = upu_risk(logits_l, logits_u, prior)
    else:
        base = nnpu_risk(logits_l, logits_u, prior)

    # Everything downstream works in logit space.
    if base.wrt == "scores":
        grad_labeled = base.grad_labeled * score_grad(logits_l) if n_l else base.grad_labeled
        grad_unlabeled = base.grad_unlabeled * score_grad(logits_u)
        base = replace(base, grad_labeled=grad_labeled, grad_unlabeled=grad_unlabeled, wrt="logits")

    ent = _chain_to_logits(entropy_loss(scores_u), logits_u) if ab.use_ent else None

    mix = ent_mixed = None
    cache_m = None
    if with_mixup and ab.use_mix and n_l + batch.x_unlabeled.shape[0] >= 2:
        features = np.vstack([batch.x_labeled, batch.x_unlabeled])
        targets = np.concatenate([scores_l, scores_u])
        if cfg.mixup_hard_positive_targets and n_l:
            targets = targets.copy()
            targets[:n_l] = 1.0
        mixed = sample_mixup(
            features, targets, cfg.weights.alpha, mixup_rng, per_pair=cfg.mixup_per_pair
        )
        logits_m, cache_m = forward(params, mixed.features)
        scores_m = score(logits_m)
        mix = _chain_to_logits(mixup_loss(scores_m, mixed), logits_m)
        if ab.use_ent:
            ent_mixed = _chain_to_logits(mixed_entropy_loss(scores_m), logits_m)

    weights_t = LossWeights(
        mu=mu_t if ab.use_ent else 0.0,
        nu=cfg.weights.nu if mix is not None else 0.0,
        gamma=cfg.weights.gamma if ent_mixed is not None else 0.0,
        alpha=cfg.weights.alpha,
    )
    bd = total_loss(base, weights_t, ent=ent, mix=mix, ent_mixed=ent_mixed)

    grads = backward(cache_u, bd.grad_unlabeled, params)
    if cache_l is not None:
        grads = add_params(grads, backward(cache_l, bd.grad_labeled, params))
    if cache_m is not None:
        grads = add_params(grads, backward(cache_m, bd.grad_mixed, params))
    return bd, grads


def _check_finite_breakdown(bd: LossBreakdown, step: int) -> None:
    for name, value in bd.to_record().items():
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite loss term {name!r} at step {step}")


def train(
    dataset: PUDataset,
    model_config: MLPConfig,
    config: TrainConfig,
    epoch_callback=None,
) -> tuple[ParamSet, list[EpochLog]]:
    """Run the two-stage protocol and return final parameters plus epoch logs.

    `epoch_callback(epoch_index, params)`, when given, runs after each epoch
    (periodic checkpointing hooks in here).
    """
    if model_config.feature_dim != dataset.feature_dim:
        raise ConfigError(
            f"model input width {model_config.feature_dim} does not match "
            f"feature dim {dataset.feature_dim}"
        )
    if config.objective in ("upu", "nnpu") and dataset.n_labeled == 0:
        raise ConfigError(f"objective {config.objective!r} requires labeled positives")
    prior = (
        config.prior_for_training
        if config.prior_for_training is not None
        else dataset.class_prior
    )

    params = init_params(model_config)
    opt_state = init_optimizer_state(params)
    logs: list[EpochLog] = []

    total_epochs = config.warmup_epochs + config.mixup_epochs
    if total_epochs == 0:
        return params, logs
    steps_per_epoch = -(-dataset.n_unlabeled // config.batch_size)
    total_steps = total_epochs * steps_per_epoch
    mixup_total_steps = max(1, config.mixup_epochs * steps_per_epoch)
    warmup_steps = config.warmup_epochs * steps_per_epoch
    mu0 = config.weights.mu

    global_step = 0
    for epoch in range(total_epochs):
        tic = time.perf_counter()
        in_mixup_stage = epoch >= config.warmup_epochs
        mixup_rng = derive_rng(config.seed, epoch, TAG_MIXUP)
        sums = {}
        lr_epoch = mu_epoch = None
        n_steps = 0
        plan = BatchPlan(config.batch_size, seed=config.seed, epoch_index=epoch)
        for batch in batch_iter(dataset, plan):
            lr_t = cosine_value(config.learning_rate, global_step, total_steps)
            if in_mixup_stage:
                mu_t = cosine_value(mu0, global_step - warmup_steps, mixup_total_steps)
            else:
                mu_t = mu0
            if lr_epoch is None:
                lr_epoch, mu_epoch = lr_t, mu_t

            bd, grads = _step_breakdown(
                params, batch, prior, config, mu_t, in_mixup_stage, mixup_rng
            )
            _check_finite_breakdown(bd, global_step)
            for key, value in bd.to_record().items():
                sums[key] = sums.get(key, 0.0) + value
            for g in grads.arrays():
                if not np.isfinite(g).all():
                    raise TrainingDiverged(f"non-finite gradient at step {global_step}")

            params, opt_state = adam_update(
                params, grads, opt_state, lr_t, config.weight_decay
            )
            global_step += 1
            n_steps += 1

        train_scores = score(forward(params, dataset.x_unlabeled)[0])
        logs.append(
            EpochLog(
                epoch=epoch,
                r_lab=sums["r_lab"] / n_steps,
                r_l=sums["r_l"] / n_steps,
                r_u=sums["r_u"] / n_steps,
                l_ent=sums["l_ent"] / n_steps,
                l_mix=sums["l_mix"] / n_steps,
                l_ent_mixed=sums["l_ent_mixed"] / n_steps,
                total=sums["total"] / n_steps,
                learning_rate=lr_epoch,
                mu=mu_epoch,
                predicted_prior=predicted_prior(train_scores, 0.5),
                wall_clock_s=time.perf_counter() - tic,
            )
        )
        if epoch_callback is not None:
            epoch_callback(epoch, params)
    return params, logs
