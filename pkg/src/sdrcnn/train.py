"""Training loop, loss smoothing, evaluation, and the ablation harness."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import classical, metrics, model
from .errors import ConfigError, NonFiniteValueError, TrainingDivergedError
from .raster import save_checkpoint
from .tensor import OptimizerState, Tensor4, adam_step, l1_loss
from .wald import DatasetSplit, SensorModel


@dataclass
class TrainConfig:
    model: model.SdrcnnConfig = field(default_factory=model.SdrcnnConfig)
    iterations: int = 2000
    batch_size: int = 4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    spectral_mapping: bool = True
    bn: bool = False
    extra_relu: bool = False
    budget: object = None     # parameter target; None keeps the configured width
    val_every: int = 100

    def validate(self) -> "TrainConfig":
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.val_every < 1:
            raise ConfigError(f"val_every must be >= 1, got {self.val_every}")
        self.model.validate()
        return self

    def resolved_model(self) -> model.SdrcnnConfig:
        """Model config with the width re-budgeted to the parameter target."""
        if self.budget is None:
            return self.model
        width = model.budget_width(int(self.budget), self.model.bands, self.model.expansion,
                                   self.model.n_residual_blocks, self.model.kernel, bn=self.bn)
        return replace(self.model, width=width)


@dataclass
class LossLog:
    raw: list = field(default_factory=list)
    smoothed: list = field(default_factory=list)
    val_iterations: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)


@dataclass
class TrainResult:
    params: model.SdrcnnParams
    log: LossLog
    checkpoints: list
    best_val: object = None


def smooth_loss(raw, window: int = 100):
    """Trailing-window mean: out[i] averages the last min(i+1, window) raws."""
    raw = np.asarray(list(raw), dtype=np.float64)
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    out = np.empty_like(raw)
    for i in range(raw.size):
        lo = max(0, i - window + 1)
        out[i] = np.mean(raw[lo:i + 1])
    return out


def _stack_batch(samples, ids):
    pan = np.stack([samples[i].pan for i in ids])
    lrms = np.stack([samples[i].lrms for i in ids])
    gt = np.stack([samples[i].gt for i in ids])
    return Tensor4(pan), Tensor4(lrms), Tensor4(gt)


def _forward_loss(pan_t, lrms_t, gt_t, params, config: TrainConfig, training: bool):
    trace = model.dense_forward(
        pan_t, lrms_t, params,
        spectral_mapping=config.spectral_mapping,
        extra_relu=config.extra_relu,
        training=training,
    )
    return l1_loss(trace.hrms, gt_t)


def train(config: TrainConfig, samples: dict, split: DatasetSplit, out_dir=None) -> TrainResult:
    """Minimize mean L1 between the network output and GT over the train split.

    The raw loss is logged before each update, so raw[0] is the loss of the
    freshly initialized network.  When the batch size covers the whole
    train split, batches are the full split in fixed order; otherwise they
    are sampled with replacement from a seeded generator.  Deterministic:
    identical configs and datasets give bit-identical logs.
    """
    config.validate()
    if not split.train:
        raise ConfigError("train split is empty")
    cfg = config.resolved_model()
    rng = np.random.default_rng(config.seed)
    params = model.init_params(cfg, rng, bn=config.bn)
    opt = OptimizerState(lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                        eps=config.adam_eps)
    named = params.named()
    log = LossLog()
    checkpoints = []
    best_val = None
    train_ids = list(split.train)
    full_batch = config.batch_size >= len(train_ids)

    meta = {
        "spectral_mapping": str(config.spectral_mapping).lower(),
        "extra_relu": str(config.extra_relu).lower(),
        "seed": config.seed,
    }

    def save(tag):
        if out_dir is None:
            return None
        path = os.path.join(os.fspath(out_dir), f"{tag}.ckpt")
        save_checkpoint(params, path, extra=meta)
        if path not in checkpoints:
            checkpoints.append(path)
        return path

    for it in range(config.iterations):
        if full_batch:
            batch_ids = train_ids
        else:
            batch_ids = [train_ids[k] for k in rng.integers(0, len(train_ids), config.batch_size)]
        pan_t, lrms_t, gt_t = _stack_batch(samples, batch_ids)
        last = it + 1 == config.iterations
        try:
            loss = _forward_loss(pan_t, lrms_t, gt_t, params, config, training=True)
            value = loss.item()
            log.raw.append(value)
            params.zero_grads()
            loss.backward()
            adam_step(named, opt)
            if split.val and ((it + 1) % config.val_every == 0 or last):
                val = evaluate_loss(params, samples, split.val, config)
                log.val_iterations.append(it)
                log.val_loss.append(val)
                if best_val is None or val < best_val:
                    best_val = val
                    save("best")
        except NonFiniteValueError as exc:
            raise TrainingDivergedError(f"non-finite loss at iteration {it}: {exc}") from exc
        if last:
            save("final")

    log.smoothed = list(smooth_loss(log.raw))
    return TrainResult(params=params, log=log, checkpoints=checkpoints, best_val=best_val)


def evaluate_loss(params, samples: dict, ids, config: TrainConfig) -> float:
    """Mean L1 over the given ids, inference mode."""
    total = 0.0
    for sid in sorted(ids):
        pan_t, lrms_t, gt_t = _stack_batch(samples, [sid])
        total += _forward_loss(pan_t, lrms_t, gt_t, params, config, training=False).item()
    return total / len(list(ids))


def _fuse(method: str, sample, params=None, forward_opts=None, classical_opts=None):
    opts = dict(classical_opts or {})
    if method == "sfim":
        return classical.sfim(sample.pan, sample.lrms, **opts)
    if method == "gs":
        return classical.gram_schmidt(sample.pan, sample.lrms, **opts)
    if method == "sdrcnn":
        if params is None:
            raise ConfigError("sdrcnn evaluation needs trained parameters")
        fw = dict(forward_opts or {})
        return model.sharpen(sample.pan, sample.lrms, params,
                             spectral_mapping=fw.get("spectral_mapping", True),
                             extra_relu=fw.get("extra_relu", False))
    raise ConfigError(f"unknown method {method!r}")


def evaluate(method: str, samples: dict, ids, mode: str = "reduced", params=None,
             sensor: SensorModel | None = None, forward_opts=None, classical_opts=None,
             block: int = 32, shift: int = 32) -> metrics.MetricReport:
    """Fuse every sample and score it.

    reduced mode scores the fusion against GT (SAM/ERGAS/SCC/Q2n); full
    mode treats each sample's PAN+LRMS as full-scale inputs and computes
    D_lambda/D_s/QNR with no reference.  Samples are processed in sorted id
    order.
    """
    ids = sorted(ids)
    if not ids:
        raise ConfigError("no sample ids to evaluate")
    if mode not in ("reduced", "full"):
        raise ConfigError(f"mode must be reduced or full, got {mode!r}")
    if mode == "reduced":
        names = ["sam", "ergas", "scc", "q2n"]
    else:
        names = ["d_lambda", "d_s", "qnr"]
    sensor = sensor or SensorModel()
    report = metrics.MetricReport(
        method=method, sample_ids=ids,
        values={n: [] for n in names},
        ideal={n: metrics.IDEALS[n] for n in names},
    )
    for sid in ids:
        sample = samples[sid]
        fused = _fuse(method, sample, params=params, forward_opts=forward_opts,
                      classical_opts=classical_opts)
        if mode == "reduced":
            report.values["sam"].append(metrics.sam(fused, sample.gt))
            report.values["ergas"].append(metrics.ergas(fused, sample.gt, ratio=sensor.ratio))
            report.values["scc"].append(metrics.scc(fused, sample.gt))
            report.values["q2n"].append(metrics.q2n(fused, sample.gt, block, shift))
        else:
            dl = metrics.d_lambda(fused, sample.lrms, block, shift)
            ds = metrics.d_s(fused, sample.lrms, sample.pan, pan_gain=sensor.pan_gain,
                             block=block, shift=shift)
            report.values["d_lambda"].append(dl)
            report.values["d_s"].append(ds)
            report.values["qnr"].append(metrics.qnr(dl, ds))
    return report


def run_ablation(base: TrainConfig, samples: dict, split: DatasetSplit, out_dir=None,
                 sensor: SensorModel | None = None):
    """Train and score the 2x2x2 toggle grid plus the three parameter budgets.

    Every variant shares the base seed and split.  Toggle variants are
    re-budgeted to the base model's parameter count so that turning batch
    norm on does not grow the model.  Returns [(name, TrainConfig,
    MetricReport)] with 11 entries.
    """
    base.validate()
    target = model.param_count(base.model, bn=False)
    eval_ids = split.test or split.val or split.train
    runs = []
    for sm in (True, False):
        for bn in (False, True):
            for xr in (False, True):
                name = f"sm{int(sm)}_bn{int(bn)}_relu{int(xr)}"
                runs.append((name, replace(base, spectral_mapping=sm, bn=bn,
                                           extra_relu=xr, budget=target)))
    for budget in (50_000, 100_000, 200_000):
        runs.append((f"budget{budget // 1000}k", replace(base, budget=budget)))

    results = []
    for name, cfg in runs:
        assert cfg.seed == base.seed, "ablation variants must share the seed"
        run_dir = None
        if out_dir is not None:
            run_dir = os.path.join(os.fspath(out_dir), name)
            os.makedirs(run_dir, exist_ok=True)
        outcome = train(cfg, samples, split, out_dir=run_dir)
        report = evaluate(
            "sdrcnn", samples, eval_ids, mode="reduced", params=outcome.params,
            sensor=sensor,
            forward_opts={"spectral_mapping": cfg.spectral_mapping,
                          "extra_relu": cfg.extra_relu},
        )
        report.method = name
        if run_dir is not None:
            report.to_csv(os.path.join(run_dir, "report.csv"))
        results.append((name, cfg, report))
    return results
