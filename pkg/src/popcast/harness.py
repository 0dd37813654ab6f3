"""Training, evaluation, cross-validation, and prediction orchestration.

Everything here is deterministic given (config, seed, data): shuffles and
splits come from one seeded generator, and every artifact except wall-clock
timestamps is byte-reproducible.
"""

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import records as rec_mod
from .autodiff import backward
from .errors import ConfigError, DataError, NumericalError
from .loss import LossWeights, cgl
from .metrics import EvalReport, evaluate_forecast
from .model import FeatureBatch, Model, ModelConfig, SampleFeatures, Vocabulary
from .optim import AdamState, PlateauState, adam_step, plateau_update
from .packs import FeaturePack, read_pack
from .records import (
    TEXT_FIELDS,
    clean_outliers,
    derive_numeric,
    fit_normalizer,
    ingest,
    make_folds,
)

PACK_NAMES = ("visual",) + tuple(f"text_{f}" for f in TEXT_FIELDS)


@dataclass(frozen=True)
class RunConfig:
    data_path: str
    pack_dir: str
    out_dir: str
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    folds: int = 5
    val_fraction: float = 0.1
    drop_outliers: bool = True
    anneal_floor: float = 0.0
    epsilon: float = 1e-6
    beta: float = 0.1
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    l2: float = 1e-3
    plateau_patience: int = 2
    plateau_factor: float = 0.1
    plateau_threshold: float = 1e-4
    min_lr: float = 1e-6

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.folds < 2:
            raise ConfigError(f"fold count must be >= 2, got {self.folds}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")

    @classmethod
    def from_json_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        model = d.pop("model", {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = {"data_path", "pack_dir", "out_dir"} - set(d)
        if missing:
            raise ConfigError(f"config is missing required fields: {sorted(missing)}")
        return cls(model=ModelConfig.from_json_dict(model), **d)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_json_dict(data)

    def to_json_dict(self) -> dict:
        d = {name: getattr(self, name) for name in self.__dataclass_fields__}
        d["model"] = self.model.to_json_dict()
        return d

    def with_overrides(self, seed=None, no_ep=False, out_dir=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if no_ep:
            cfg = replace(cfg, model=replace(cfg.model, ep_mode=False))
        if out_dir is not None:
            cfg = replace(cfg, out_dir=str(out_dir))
        return cfg


def load_packs(pack_dir) -> dict[str, FeaturePack]:
    pack_dir = Path(pack_dir)
    packs = {}
    for name in PACK_NAMES:
        base = pack_dir / name
        if not base.with_name(name + ".idx.json").exists():
            raise ConfigError(f"feature pack {base}.idx.json does not exist")
        packs[name] = read_pack(base)
    return packs


def validate_inputs(cfg: RunConfig) -> None:
    """Referenced files must exist and pack dims must match the model config."""
    if not Path(cfg.data_path).exists():
        raise ConfigError(f"dataset {cfg.data_path} does not exist")
    packs = load_packs(cfg.pack_dir)
    if packs["visual"].dim != cfg.model.visual_dim:
        raise ConfigError(
            f"visual pack dim {packs['visual'].dim} != model visual_dim {cfg.model.visual_dim}"
        )
    for f in TEXT_FIELDS:
        dim = packs[f"text_{f}"].dim
        if dim != cfg.model.text_field_dim:
            raise ConfigError(
                f"text pack {f!r} dim {dim} != model text_field_dim {cfg.model.text_field_dim}"
            )


def build_sample(record, packs, normalizer, cat_vocab, lang_vocab, ep_mode) -> SampleFeatures:
    # missing rows fall back to zeros: the blank-image rule, applied uniformly
    visual = packs["visual"].lookup(record.id, zero_fill=True)
    text = np.stack(
        [packs[f"text_{f}"].lookup(record.id, zero_fill=True) for f in TEXT_FIELDS],
        axis=1,
    )
    numeric = normalizer.apply(derive_numeric(record, ep_mode=ep_mode))
    return SampleFeatures(
        sample_id=record.id,
        visual=visual,
        text_fields=text,
        numeric=numeric,
        category_token=cat_vocab.index(record.category),
        language_token=lang_vocab.index(record.language),
    )


def build_truth(records, first_day: int) -> np.ndarray:
    return np.array([r.popularity().p[first_day - 1 : 30] for r in records])


def _forward_in_chunks(model: Model, samples, chunk: int = 256) -> np.ndarray:
    outs = []
    for i in range(0, len(samples), chunk):
        batch = FeatureBatch.from_samples(samples[i : i + chunk], model.config)
        outs.append(model.forward(batch).data)
    return np.concatenate(outs, axis=0)


@dataclass
class TrainResult:
    checkpoint_path: Path
    log_path: Path
    best_val_amae: float
    best_epoch: int
    log_entries: list


def _load_training_data(cfg: RunConfig):
    records, report = ingest(cfg.data_path)
    if not records:
        raise DataError(f"dataset {cfg.data_path} yielded no valid records "
                        f"({report.total} rejected)")
    if cfg.drop_outliers:
        records, _ = clean_outliers(records)
    return records


def train(cfg: RunConfig, records=None, packs=None, train_ids=None) -> TrainResult:
    """Full training run; returns paths to the best checkpoint and the log.

    ``records``/``packs``/``train_ids`` let cross-validation reuse loaded
    data and restrict training to a fold complement.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if records is None:
        validate_inputs(cfg)
        records = _load_training_data(cfg)
    if packs is None:
        packs = load_packs(cfg.pack_dir)
    if train_ids is not None:
        keep = set(train_ids)
        records = [r for r in records if r.id in keep]
    if len(records) < 2:
        raise DataError(f"need at least 2 training records, got {len(records)}")

    ep = cfg.model.ep_mode
    rng = np.random.default_rng(cfg.seed)

    # seeded holdout; an empty holdout validates on the training set itself
    perm = rng.permutation(len(records))
    n_val = int(round(len(records) * cfg.val_fraction))
    if 0 < n_val < len(records):
        val_records = [records[i] for i in perm[:n_val]]
        fit_records = [records[i] for i in perm[n_val:]]
    else:
        val_records = list(records)
        fit_records = list(records)

    cat_vocab = Vocabulary.from_values(r.category for r in fit_records)
    lang_vocab = Vocabulary.from_values(r.language for r in fit_records)
    normalizer = fit_normalizer([derive_numeric(r, ep_mode=ep) for r in fit_records])

    model = Model.initialized(cfg.model, cat_vocab, lang_vocab, normalizer, seed=cfg.seed)
    config = model.config  # vocab sizes resolved

    def make(recs):
        return [build_sample(r, packs, normalizer, cat_vocab, lang_vocab, ep) for r in recs]

    train_samples = make(fit_records)
    train_truth = build_truth(fit_records, config.first_day)
    val_samples = make(val_records)
    val_truth = build_truth(val_records, config.first_day)

    adam = AdamState(model.params.tensors, lr=cfg.lr, beta1=cfg.beta1,
                     beta2=cfg.beta2, eps=cfg.adam_eps, l2=cfg.l2)
    plateau = PlateauState(lr=cfg.lr, patience=cfg.plateau_patience,
                           factor=cfg.plateau_factor, threshold=cfg.plateau_threshold,
                           min_lr=cfg.min_lr)

    ckpt_path = out_dir / "model.ckpt"
    log_path = out_dir / "training_log.jsonl"
    (out_dir / "run_config.json").write_text(
        json.dumps(cfg.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    best_amae = float("inf")
    best_epoch = -1
    entries = []
    n = len(train_samples)
    with open(log_path, "w", encoding="utf-8") as log:
        for epoch in range(cfg.epochs):
            started = time.perf_counter()
            weights = LossWeights.at_epoch(epoch, cfg.epochs, floor=cfg.anneal_floor,
                                           epsilon=cfg.epsilon, beta=cfg.beta)
            order = rng.permutation(n)
            sums = {"total": 0.0, "base": 0.0, "d1": 0.0, "d2": 0.0,
                    "peak": 0.0, "laplacian": 0.0}
            batches = 0
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                batch = FeatureBatch.from_samples([train_samples[i] for i in idx], config)
                model.params.zero_grads()
                report = cgl(model.forward(batch), train_truth[idx], weights)
                if not np.isfinite(report.total_value):
                    dump = {"epoch": epoch, "batch_ids": list(batch.ids)}
                    (out_dir / "nan_batch.json").write_text(
                        json.dumps(dump, indent=2) + "\n", encoding="utf-8"
                    )
                    raise NumericalError(
                        f"non-finite loss at epoch {epoch}; offending batch ids: "
                        f"{', '.join(batch.ids)}"
                    )
                backward(report.total)
                adam.lr = plateau.lr
                adam_step(model.params.tensors, adam)
                sums["total"] += report.total_value
                sums["base"] += report.base
                sums["d1"] += report.d1
                sums["d2"] += report.d2
                sums["peak"] += report.peak
                sums["laplacian"] += report.laplacian
                batches += 1

            val_pred = _forward_in_chunks(model, val_samples)
            val_report = evaluate_forecast(val_pred, val_truth, config.first_day)
            lr_next = plateau_update(plateau, val_report.amae)

            if val_report.amae < best_amae:
                best_amae = val_report.amae
                best_epoch = epoch
                model.save(ckpt_path)

            entry = {
                "epoch": epoch,
                "loss": {k: sums[k] / batches for k in sums},
                "weights": {"lambda1": weights.lambda1, "lambda2": weights.lambda2,
                            "alpha": weights.alpha},
                "val": {"amae": val_report.amae, "asrc": val_report.asrc,
                        "mae_day30": val_report.mae_day30,
                        "src_day30": val_report.src_day30},
                "lr": lr_next,
                "wall_s": round(time.perf_counter() - started, 6),
            }
            entries.append(entry)
            log.write(json.dumps(entry) + "\n")
            log.flush()

    return TrainResult(ckpt_path, log_path, best_amae, best_epoch, entries)


def _write_curves(report: EvalReport, out_dir: Path) -> None:
    for name, values in (("mae_curve.csv", report.mae_d), ("src_curve.csv", report.src_d)):
        lines = ["day,value"]
        for day, v in zip(report.days, values):
            lines.append(f"{day},{'' if np.isnan(v) else repr(float(v))}")
        (out_dir / name).write_text("\n".join(lines) + "\n", encoding="utf-8")


def evaluate(checkpoint_path, data_path, pack_dir, out_dir, oracle: bool = False) -> EvalReport:
    """Score a checkpoint on a dataset; writes report.json and curve files.

    ``oracle`` substitutes the ground truth for the model's predictions,
    exercising the full metric path with a known-perfect forecaster.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = Model.load(checkpoint_path)
    if model.normalizer is None:
        raise DataError(f"checkpoint {checkpoint_path} carries no feature normalizer")
    records, _ = ingest(data_path)
    if not records:
        raise DataError(f"dataset {data_path} yielded no valid records")
    packs = load_packs(pack_dir)
    config = model.config
    if packs["visual"].dim != config.visual_dim:
        raise ConfigError(
            f"visual pack dim {packs['visual'].dim} != checkpoint visual_dim {config.visual_dim}"
        )
    samples = [
        build_sample(r, packs, model.normalizer, model.cat_vocab, model.lang_vocab,
                     config.ep_mode)
        for r in records
    ]
    truth = build_truth(records, config.first_day)
    pred = truth.copy() if oracle else _forward_in_chunks(model, samples)
    report = evaluate_forecast(pred, truth, config.first_day)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_curves(report, out_dir)
    return report


@dataclass
class CVResult:
    fold_reports: list
    summary: dict


def cross_validate(cfg: RunConfig) -> CVResult:
    """k-fold protocol: train on each fold's complement, score the held-out fold.

    Partial fold reports are flushed to disk before any later fold can fail.
    """
    validate_inputs(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = _load_training_data(cfg)
    packs = load_packs(cfg.pack_dir)
    split = make_folds([r.id for r in records], k=cfg.folds, seed=cfg.seed)
    by_id = {r.id: r for r in records}

    reports = []
    summary_path = out_dir / "cv_summary.json"
    for fold in range(cfg.folds):
        fold_dir = out_dir / f"fold_{fold}"
        fold_cfg = replace(cfg, out_dir=str(fold_dir))
        try:
            result = train(fold_cfg, records=records, packs=packs,
                           train_ids=split.complement_ids(fold))
            model = Model.load(result.checkpoint_path)
            held_out = [by_id[i] for i in split.fold_ids(fold)]
            samples = [
                build_sample(r, packs, model.normalizer, model.cat_vocab,
                             model.lang_vocab, model.config.ep_mode)
                for r in held_out
            ]
            truth = build_truth(held_out, model.config.first_day)
            report = evaluate_forecast(
                _forward_in_chunks(model, samples), truth, model.config.first_day
            )
        except Exception:
            _write_cv_summary(summary_path, reports, cfg.folds, complete=False)
            raise
        reports.append(report)
        (fold_dir / "report.json").write_text(
            json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        _write_curves(report, fold_dir)

    summary = _write_cv_summary(summary_path, reports, cfg.folds, complete=True)
    return CVResult(reports, summary)


def _write_cv_summary(path: Path, reports, k: int, complete: bool) -> dict:
    amaes = [r.amae for r in reports]
    asrcs = [r.asrc for r in reports]
    summary = {
        "folds": k,
        "completed_folds": len(reports),
        "complete": complete,
        "fold_amae": amaes,
        "fold_asrc": asrcs,
        # population std: the folds are the whole population of interest
        "mean_amae": float(np.mean(amaes)) if amaes else None,
        "std_amae": float(np.std(amaes)) if amaes else None,
        "mean_asrc": float(np.mean(asrcs)) if asrcs else None,
        "std_asrc": float(np.std(asrcs)) if asrcs else None,
    }
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def predict(checkpoint_path, data_path, pack_dir, out_dir):
    """Emit per-sample popularity curves for records without known futures.

    Returns (ids, matrix, rejected) and writes predictions.csv; in EP mode
    a record must carry day-1 views, otherwise it lands in rejected.json.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = Model.load(checkpoint_path)
    if model.normalizer is None:
        raise DataError(f"checkpoint {checkpoint_path} carries no feature normalizer")
    config = model.config
    records, report = rec_mod.ingest(data_path, for_prediction=True)
    packs = load_packs(pack_dir)

    usable, rejected = [], list(report.rejected)
    for r in records:
        if config.ep_mode and len(r.views) < 1:
            rejected.append({"id": r.id, "reason": "missing_day1_views"})
        else:
            usable.append(r)

    matrix = np.zeros((0, config.num_steps))
    ids = [r.id for r in usable]
    if usable:
        samples = [
            build_sample(r, packs, model.normalizer, model.cat_vocab, model.lang_vocab,
                         config.ep_mode)
            for r in usable
        ]
        matrix = _forward_in_chunks(model, samples)

    header = "id," + ",".join(f"day{d}" for d in
                              range(config.first_day, config.first_day + config.num_steps))
    lines = [header]
    for sample_id, row in zip(ids, matrix):
        lines.append(sample_id + "," + ",".join(repr(float(v)) for v in row))
    (out_dir / "predictions.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out_dir / "rejected.json").write_text(
        json.dumps(rejected, indent=2) + "\n", encoding="utf-8"
    )
    return ids, matrix, rejected
