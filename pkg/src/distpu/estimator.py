"""Scikit-learn style front end.

`DistPUClassifier.fit(X, y)` consumes PU data: y = 1 marks a labeled positive,
y = 0 an unlabeled example. The class prior of the underlying distribution
must be supplied; prior estimation is out of scope.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .errors import ConfigError
from .losses import LossWeights
from .metrics import hard_labels
from .mlp import MLPConfig, forward, score
from .training import Ablation, TrainConfig, train
from .data import PUDataset


class DistPUClassifier(ClassifierMixin, BaseEstimator):
    """Binary PU classifier trained with label distribution alignment.

    Parameters mirror the training configuration: objective selects between
    the alignment risk ("dist-pu"), the cost-sensitive baselines ("upu",
    "nnpu"), and the unlabeled-as-negative baseline ("naive"). mu, nu, gamma
    weight the entropy, Mixup, and mixed-entropy terms; alpha shapes the
    Mixup Beta distribution.
    """

    def __init__(
        self,
        prior: float | None = None,
        hidden_layer_sizes: tuple[int, ...] = (100, 100),
        objective: str = "dist-pu",
        learning_rate: float = 5e-4,
        weight_decay: float = 5e-3,
        warmup_epochs: int = 10,
        mixup_epochs: int = 60,
        batch_size: int = 256,
        mu: float = 0.1,
        nu: float = 3.0,
        gamma: float = 0.1,
        alpha: float = 4.0,
        use_rlab: bool = True,
        use_ent: bool = True,
        use_mix: bool = True,
        threshold: float = 0.5,
        random_state: int = 0,
    ):
        self.prior = prior
        self.hidden_layer_sizes = hidden_layer_sizes
        self.objective = objective
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.warmup_epochs = warmup_epochs
        self.mixup_epochs = mixup_epochs
        self.batch_size = batch_size
        self.mu = mu
        self.nu = nu
        self.gamma = gamma
        self.alpha = alpha
        self.use_rlab = use_rlab
        self.use_ent = use_ent
        self.use_mix = use_mix
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, X, y):
        """Train on PU data; y=1 labeled positive, y=0 unlabeled."""
        X, y = validate_data(self, X, y, dtype=np.float64)
        y = np.asarray(y)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("y must contain only 0 (unlabeled) and 1 (labeled positive)")
        if self.prior is None:
            raise ConfigError("prior must be set: the class prior is required for PU training")
        dataset = PUDataset(
            x_labeled=X[y == 1],
            x_unlabeled=X[y == 0],
            class_prior=float(self.prior),
        )
        model_config = MLPConfig(
            layer_widths=(X.shape[1], *self.hidden_layer_sizes, 1),
            init_seed=int(self.random_state),
        )
        train_config = TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            warmup_epochs=self.warmup_epochs,
            mixup_epochs=self.mixup_epochs,
            batch_size=self.batch_size,
            weights=LossWeights(mu=self.mu, nu=self.nu, gamma=self.gamma, alpha=self.alpha),
            objective=self.objective,
            ablation=Ablation(self.use_rlab, self.use_ent, self.use_mix),
            seed=int(self.random_state),
        )
        self.params_, self.epoch_logs_ = train(dataset, model_config, train_config)
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X):
        """Raw logits; use these for ranking metrics."""
        check_is_fitted(self, "params_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return forward(self.params_, X)[0]

    def predict_proba(self, X):
        s = score(self.decision_function(X))
        return np.column_stack([1.0 - s, s])

    def predict(self, X):
        return hard_labels(self.predict_proba(X)[:, 1], self.threshold)
