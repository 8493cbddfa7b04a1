"""Experiment harness: structured config files, run orchestration, artifacts.

Every run is driven by an `ExperimentConfig` (YAML on disk) plus three named
seeds (data, init, train); no randomness comes from the environment. A run
writes its artifacts into one output directory and finishes by atomically
writing a manifest that lists every file produced, the config snapshot, and
the resolved seeds, which is sufficient to reproduce the run bitwise.
"""

from __future__ import annotations

import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from . import __version__
from .data import (
    LabeledDataset,
    PUDataset,
    binarize,
    empirical_prior,
    load_dataset,
    make_gaussian_mixture,
    normalize,
    scar_split,
)
from .errors import ConfigError
from .losses import ALPHA_RANGE, GAMMA_RANGE, MU_RANGE, NU_RANGE, LossWeights
from .metrics import (
    MetricReport,
    error_histogram,
    hard_labels,
    metric_report,
)
from .mlp import MLPConfig, forward, load_params, save_params, score
from .rng import derive_rng
from .training import (
    Ablation,
    EpochLog,
    TrainConfig,
    ablation_for_variant,
    train,
    variant_objective,
)

# Sub-seeds derived from the data seed.
_TAG_TRAIN_SAMPLE = 10
_TAG_TEST_SAMPLE = 11
_TAG_SCAR = 12

VARIANT_NAMES = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")

_METRIC_COLUMNS = ("acc", "precision", "recall", "f1", "auc", "ap")


def _take(block: dict, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class Seeds:
    data: int = 0
    init: int = 0
    train: int = 0


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "gaussian"
    n_train: int = 10000
    n_test: int = 10000
    prior: float = 0.5
    mean_pos: tuple = (1.0, 1.0)
    mean_neg: tuple = (-1.0, -1.0)
    stddev: float = 1.0
    n_labeled: int = 200
    prior_override: float | None = None
    format: str = "csv"
    train_features: str | None = None
    train_labels: str | None = None
    test_features: str | None = None
    test_labels: str | None = None
    has_header: bool = False
    positive_classes: tuple | None = None
    normalize_mean: tuple | float | None = None
    normalize_stddev: tuple | float | None = None

    def __post_init__(self):
        if self.source not in ("gaussian", "file"):
            raise ConfigError(f"dataset source must be 'gaussian' or 'file', got {self.source!r}")


@dataclass(frozen=True)
class ModelConfig:
    hidden: tuple = (32, 32)
    activation: str = "relu"


@dataclass(frozen=True)
class EvaluationConfig:
    threshold: float = 0.5
    histogram_bins: int = 20

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.histogram_bins < 1:
            raise ConfigError("histogram_bins must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    seeds: Seeds = field(default_factory=Seeds)
    output_dir: str = "runs/experiment"
    checkpoint_every: int = 0
    sweep: dict | None = None

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        _take(
            raw,
            {"dataset", "model", "training", "evaluation", "seeds", "output_dir",
             "checkpoint_every", "sweep"},
            "config",
        )
        ds = dict(raw.get("dataset", {}))
        _take(
            ds,
            {f.strip() for f in (
                "source n_train n_test prior mean_pos mean_neg stddev n_labeled "
                "prior_override format train_features train_labels test_features "
                "test_labels has_header positive_classes normalize_mean normalize_stddev"
            ).split()},
            "dataset",
        )
        for key in ("mean_pos", "mean_neg", "positive_classes"):
            if key in ds and ds[key] is not None:
                ds[key] = tuple(ds[key])
        model = dict(raw.get("model", {}))
        _take(model, {"hidden", "activation"}, "model")
        if "hidden" in model:
            model["hidden"] = tuple(model["hidden"])
        tr = dict(raw.get("training", {}))
        _take(
            tr,
            {f.strip() for f in (
                "learning_rate weight_decay warmup_epochs mixup_epochs batch_size "
                "objective mu nu gamma alpha ablation prior_for_training "
                "mixup_per_pair mixup_hard_positive_targets"
            ).split()},
            "training",
        )
        weights = LossWeights(
            mu=tr.pop("mu", 0.0),
            nu=tr.pop("nu", 0.0),
            gamma=tr.pop("gamma", 0.0),
            alpha=tr.pop("alpha", 1.0),
        )
        ablation_raw = dict(tr.pop("ablation", {}))
        _take(ablation_raw, {"use_rlab", "use_ent", "use_mix"}, "training.ablation")
        ablation = Ablation(
            use_rlab=bool(ablation_raw.get("use_rlab", True)),
            use_ent=bool(ablation_raw.get("use_ent", True)),
            use_mix=bool(ablation_raw.get("use_mix", True)),
        )
        ev = dict(raw.get("evaluation", {}))
        _take(ev, {"threshold", "histogram_bins"}, "evaluation")
        seeds_raw = dict(raw.get("seeds", {}))
        _take(seeds_raw, {"data", "init", "train"}, "seeds")
        sweep = raw.get("sweep")
        if sweep is not None:
            sweep = dict(sweep)
            _take(sweep, {"mu", "nu", "gamma", "alpha"}, "sweep")
            sweep = {k: [float(v) for v in vs] for k, vs in sweep.items()}
        return ExperimentConfig(
            dataset=DatasetConfig(**ds),
            model=ModelConfig(**model),
            training=TrainConfig(weights=weights, ablation=ablation, **tr),
            evaluation=EvaluationConfig(**ev),
            seeds=Seeds(**{k: int(v) for k, v in seeds_raw.items()}),
            output_dir=str(raw.get("output_dir", "runs/experiment")),
            checkpoint_every=int(raw.get("checkpoint_every", 0)),
            sweep=sweep,
        )

    def to_dict(self) -> dict:
        ds = asdict(self.dataset)
        for key in ("mean_pos", "mean_neg", "positive_classes"):
            if ds[key] is not None:
                ds[key] = list(ds[key])
        tr = {
            "learning_rate": self.training.learning_rate,
            "weight_decay": self.training.weight_decay,
            "warmup_epochs": self.training.warmup_epochs,
            "mixup_epochs": self.training.mixup_epochs,
            "batch_size": self.training.batch_size,
            "objective": self.training.objective,
            "mu": self.training.weights.mu,
            "nu": self.training.weights.nu,
            "gamma": self.training.weights.gamma,
            "alpha": self.training.weights.alpha,
            "ablation": asdict(self.training.ablation),
            "prior_for_training": self.training.prior_for_training,
            "mixup_per_pair": self.training.mixup_per_pair,
            "mixup_hard_positive_targets": self.training.mixup_hard_positive_targets,
        }
        return {
            "dataset": ds,
            "model": {"hidden": list(self.model.hidden), "activation": self.model.activation},
            "training": tr,
            "evaluation": asdict(self.evaluation),
            "seeds": asdict(self.seeds),
            "output_dir": self.output_dir,
            "checkpoint_every": self.checkpoint_every,
            "sweep": self.sweep,
        }


def load_config(path) -> ExperimentConfig:
    """Read a YAML config; a run manifest (with a `config` key) also works."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "config" in raw and "seeds" in raw.get("config", {}):
        raw = raw["config"]
    return ExperimentConfig.from_dict(raw)


def save_config(path, config: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)


def _build_file_dataset(cfg: DatasetConfig, features_path, labels_path) -> LabeledDataset:
    dataset = load_dataset(
        features_path, cfg.format, labels_path=labels_path, has_header=cfg.has_header
    )
    if cfg.positive_classes is not None:
        dataset = binarize(dataset, cfg.positive_classes)
    elif not dataset.is_binary():
        raise ConfigError("multi-class labels need dataset.positive_classes to binarize")
    if cfg.normalize_mean is not None or cfg.normalize_stddev is not None:
        mean = cfg.normalize_mean if cfg.normalize_mean is not None else 0.0
        stddev = cfg.normalize_stddev if cfg.normalize_stddev is not None else 1.0
        dataset = normalize(dataset, mean, stddev)
    return dataset


def build_datasets(cfg: ExperimentConfig) -> tuple[PUDataset, LabeledDataset]:
    """Materialize the PU training set and the held-out labeled test set."""
    ds = cfg.dataset
    if ds.source == "gaussian":
        train_full = make_gaussian_mixture(
            ds.n_train, ds.prior, ds.mean_pos, ds.mean_neg, ds.stddev,
            seed=int(derive_rng(cfg.seeds.data, _TAG_TRAIN_SAMPLE).integers(2**63)),
        )
        test = make_gaussian_mixture(
            ds.n_test, ds.prior, ds.mean_pos, ds.mean_neg, ds.stddev,
            seed=int(derive_rng(cfg.seeds.data, _TAG_TEST_SAMPLE).integers(2**63)),
        )
    else:
        if ds.train_features is None or ds.test_features is None:
            raise ConfigError("file datasets need train_features and test_features paths")
        train_full = _build_file_dataset(ds, ds.train_features, ds.train_labels)
        test = _build_file_dataset(ds, ds.test_features, ds.test_labels)
    pu = scar_split(
        train_full,
        ds.n_labeled,
        prior_override=ds.prior_override,
        seed=int(derive_rng(cfg.seeds.data, _TAG_SCAR).integers(2**63)),
    )
    return pu, test


@dataclass
class RunResult:
    out_dir: Path
    report: MetricReport
    epoch_logs: list[EpochLog]
    files: list[str]


def _write_jsonl(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_two_column_csv(path, header: tuple[str, str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"{header[0]},{header[1]}\n")
        for a, b in rows:
            fh.write(f"{a},{b}\n")


def _write_manifest(out_dir: Path, config: ExperimentConfig, files: list[str], extra: dict) -> None:
    manifest = {
        "config": config.to_dict(),
        "seeds": asdict(config.seeds),
        "version": __version__,
        "files": sorted(files),
        **extra,
    }
    tmp = out_dir / "manifest.json.tmp"
    _write_json(tmp, manifest)
    os.replace(tmp, out_dir / "manifest.json")


def _effective_train_config(cfg: ExperimentConfig) -> TrainConfig:
    return replace(cfg.training, seed=cfg.seeds.train)


def run_training(cfg: ExperimentConfig, out_dir) -> RunResult:
    """Train per config, evaluate on the held-out test set, write all artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tic = time.perf_counter()

    pu, test = build_datasets(cfg)
    model_config = MLPConfig(
        layer_widths=(pu.feature_dim, *cfg.model.hidden, 1),
        activation=cfg.model.activation,
        init_seed=cfg.seeds.init,
    )

    files: list[str] = []
    callback = None
    if cfg.checkpoint_every > 0:

        def callback(epoch, snapshot):
            if (epoch + 1) % cfg.checkpoint_every == 0:
                name = f"checkpoint_epoch_{epoch:04d}.ckpt"
                save_params(out_dir / name, snapshot)
                files.append(name)

    params, logs = train(pu, model_config, _effective_train_config(cfg), epoch_callback=callback)

    _write_jsonl(out_dir / "epochs.jsonl", [log.to_json_dict() for log in logs])
    files.append("epochs.jsonl")

    test_logits = forward(params, test.features)[0]
    test_scores = score(test_logits)
    report = metric_report(test_scores, test_logits, test.labels, cfg.evaluation.threshold)
    _write_json(out_dir / "metrics.json", report.to_json_dict())
    files.append("metrics.json")

    _write_two_column_csv(
        out_dir / "prior_trajectory.csv",
        ("epoch", "predicted_prior"),
        [(log.epoch, repr(log.predicted_prior)) for log in logs],
    )
    files.append("prior_trajectory.csv")

    if pu.y_unlabeled is not None:
        train_scores = score(forward(params, pu.x_unlabeled)[0])
        predicted = hard_labels(train_scores, cfg.evaluation.threshold)
        hist = error_histogram(
            train_scores, predicted, pu.y_unlabeled, cfg.evaluation.histogram_bins
        )
        _write_two_column_csv(
            out_dir / "error_histogram.csv",
            ("bin_left", "count"),
            [(repr(float(edge)), int(count)) for edge, count in zip(hist.edges[:-1], hist.counts)],
        )
        files.append("error_histogram.csv")

    save_params(out_dir / "checkpoint.ckpt", params)
    files.append("checkpoint.ckpt")

    variant = variant_objective(cfg.training.ablation)
    _write_manifest(
        out_dir,
        cfg,
        files,
        {
            "wall_clock_s": time.perf_counter() - tic,
            "variant": variant.name,
            "objective": cfg.training.objective,
        },
    )
    files.append("manifest.json")
    return RunResult(out_dir, report, logs, files)


def run_eval(cfg: ExperimentConfig, checkpoint_path, out_dir) -> RunResult:
    """Evaluate a saved checkpoint on the config's held-out test set."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tic = time.perf_counter()
    _, test = build_datasets(cfg)
    params = load_params(checkpoint_path)

    files: list[str] = []
    logits = forward(params, test.features)[0]
    scores = score(logits)
    report = metric_report(scores, logits, test.labels, cfg.evaluation.threshold)
    _write_json(out_dir / "metrics.json", report.to_json_dict())
    files.append("metrics.json")

    predicted = hard_labels(scores, cfg.evaluation.threshold)
    hist = error_histogram(scores, predicted, test.labels, cfg.evaluation.histogram_bins)
    _write_two_column_csv(
        out_dir / "error_histogram.csv",
        ("bin_left", "count"),
        [(repr(float(edge)), int(count)) for edge, count in zip(hist.edges[:-1], hist.counts)],
    )
    files.append("error_histogram.csv")

    _write_manifest(
        out_dir, cfg, files,
        {"wall_clock_s": time.perf_counter() - tic, "checkpoint": str(checkpoint_path)},
    )
    files.append("manifest.json")
    return RunResult(out_dir, report, [], files)


def gen_data(cfg: ExperimentConfig, out_dir) -> list[str]:
    """Write synthetic train/test CSVs plus a metadata record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = cfg.dataset
    if ds.source != "gaussian":
        raise ConfigError("gen-data only supports the gaussian synthetic source")
    train_full = make_gaussian_mixture(
        ds.n_train, ds.prior, ds.mean_pos, ds.mean_neg, ds.stddev,
        seed=int(derive_rng(cfg.seeds.data, _TAG_TRAIN_SAMPLE).integers(2**63)),
    )
    test = make_gaussian_mixture(
        ds.n_test, ds.prior, ds.mean_pos, ds.mean_neg, ds.stddev,
        seed=int(derive_rng(cfg.seeds.data, _TAG_TEST_SAMPLE).integers(2**63)),
    )
    files = []
    for name, dataset in (("train.csv", train_full), ("test.csv", test)):
        with open(out_dir / name, "w", encoding="utf-8", newline="") as fh:
            for row, label in zip(dataset.features, dataset.labels):
                fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
        files.append(name)
    meta = {
        "source": "gaussian",
        "n_train": ds.n_train,
        "n_test": ds.n_test,
        "requested_prior": ds.prior,
        "empirical_prior_train": empirical_prior(train_full),
        "empirical_prior_test": empirical_prior(test),
        "feature_dim": train_full.feature_dim,
        "seeds": asdict(cfg.seeds),
        "version": __version__,
    }
    _write_json(out_dir / "metadata.json", meta)
    files.append("metadata.json")
    return files


def run_ablation(cfg: ExperimentConfig, variants: list[str], out_dir) -> Path:
    """Run the requested Table-style variants with shared seeds; combine into a CSV."""
    if not variants:
        raise ConfigError("variant list must be non-empty")
    for name in variants:
        if name not in VARIANT_NAMES:
            raise ConfigError(f"unknown variant {name!r}, expected subset of I..VIII")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tic = time.perf_counter()
    rows = []
    files = []
    for name in variants:
        ablation = ablation_for_variant(name)
        sub_cfg = replace(
            cfg,
            training=replace(cfg.training, objective="dist-pu", ablation=ablation),
        )
        result = run_training(sub_cfg, out_dir / f"variant_{name}")
        files.extend(f"variant_{name}/{f}" for f in result.files)
        rows.append((name, ablation, result.report))
    table = out_dir / "ablation.csv"
    with open(table, "w", encoding="utf-8", newline="") as fh:
        fh.write("variant,use_rlab,use_ent,use_mix," + ",".join(_METRIC_COLUMNS) + "\n")
        for name, ablation, report in rows:
            metrics = ",".join(repr(getattr(report, c)) for c in _METRIC_COLUMNS)
            fh.write(
                f"{name},{int(ablation.use_rlab)},{int(ablation.use_ent)},"
                f"{int(ablation.use_mix)},{metrics}\n"
            )
    files.append("ablation.csv")
    _write_manifest(
        out_dir, cfg, files,
        {"wall_clock_s": time.perf_counter() - tic, "variants": list(variants)},
    )
    return table


_SWEEP_RANGES = {"mu": MU_RANGE, "nu": NU_RANGE, "gamma": GAMMA_RANGE, "alpha": ALPHA_RANGE}


def _sweep_point_config(cfg: ExperimentConfig, point: dict) -> ExperimentConfig:
    weights = LossWeights(
        mu=point.get("mu", cfg.training.weights.mu),
        nu=point.get("nu", cfg.training.weights.nu),
        gamma=point.get("gamma", cfg.training.weights.gamma),
        alpha=point.get("alpha", cfg.training.weights.alpha),
    )
    return replace(cfg, training=replace(cfg.training, weights=weights))


def _run_sweep_point(args):
    cfg, point, sub_dir = args
    result = run_training(_sweep_point_config(cfg, point), sub_dir)
    return point, result.report, result.files


def run_sweep(
    cfg: ExperimentConfig,
    out_dir,
    parallel: int = 1,
    allow_out_of_range: bool = False,
) -> Path:
    """One run per grid point over (mu, nu, gamma, alpha), shared seeds.

    Emits a long-format CSV of hyperparameter values and test metrics.
    """
    if not cfg.sweep:
        raise ConfigError("config has no sweep block")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tic = time.perf_counter()
    names = sorted(cfg.sweep)
    for name in names:
        lo, hi = _SWEEP_RANGES[name]
        for value in cfg.sweep[name]:
            if not (lo <= value <= hi) and not allow_out_of_range:
                raise ConfigError(
                    f"sweep value {name}={value} outside the declared range "
                    f"[{lo}, {hi}]; pass --allow-out-of-range to override"
                )
    points = [dict(zip(names, combo)) for combo in itertools.product(*(cfg.sweep[n] for n in names))]
    jobs = [(cfg, point, out_dir / f"point_{i:03d}") for i, point in enumerate(points)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(_run_sweep_point, jobs))
    else:
        outcomes = [_run_sweep_point(job) for job in jobs]

    files = []
    for i, (point, report, run_files) in enumerate(outcomes):
        files.extend(f"point_{i:03d}/{f}" for f in run_files)
    table = out_dir / "sweep.csv"
    with open(table, "w", encoding="utf-8", newline="") as fh:
        fh.write("mu,nu,gamma,alpha," + ",".join(_METRIC_COLUMNS) + "\n")
        for i, (point, report, _) in enumerate(outcomes):
            full = _sweep_point_config(cfg, point).training.weights
            values = [full.mu, full.nu, full.gamma, full.alpha]
            metrics = ",".join(repr(getattr(report, c)) for c in _METRIC_COLUMNS)
            fh.write(",".join(repr(v) for v in values) + "," + metrics + "\n")
    files.append("sweep.csv")
    _write_manifest(
        out_dir, cfg, files,
        {"wall_clock_s": time.perf_counter() - tic, "grid": cfg.sweep, "parallel": parallel},
    )
    return table
