"""Training loop, sequence encoding, and grid search for the conditioned net."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np

from ..declare import AugmentedLog
from ..errors import DataError, TrainingDivergedError
from .model import (
    BOS, EOS, PAD,
    ConditionedNet, NetConfig, TimeNormalizer, Vocabulary,
    iter_params, zero_like_params,
)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    lam_time: float = 1.0
    clip_norm: float = 5.0
    patience: Optional[int] = None  # early stop on validation loss
    reduction: str = "mean"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise DataError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.lam_time < 0:
            raise DataError("lam_time must be >= 0")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class EncodedSequence:
    tokens_in: np.ndarray    # (L+1,) BOS followed by activity tokens
    times_in: np.ndarray     # (L+1,) normalized execution times, 0 at BOS
    targets_act: np.ndarray  # (L+1,) next activity, EOS terminal
    targets_time: np.ndarray # (L+1,) normalized remaining time of the target
    cond: np.ndarray         # (m,)


def fit_normalizers(aug: AugmentedLog, scale: float = 1.0):
    """Fit execution- and remaining-time normalizers on training data only."""
    exec_times = [e.execution_time for t in aug.log.traces for e in t.events]
    rem_times = [e.remaining_time for t in aug.log.traces for e in t.events]
    return TimeNormalizer.fit(exec_times, scale), TimeNormalizer.fit(rem_times, scale)


def encode_sequences(aug: AugmentedLog, net: ConditionedNet) -> list[EncodedSequence]:
    """Shift-by-one training pairs: input [BOS, e_0..e_{n-1}] predicts
    [e_0..e_{n-1}, EOS] with each target's remaining time (0 at EOS)."""
    out = []
    for trace, vec in aug.pairs():
        acts = [net.encode_activity(e.activity) for e in trace.events]
        exec_norm = net.exec_normalizer.normalize(
            [e.execution_time for e in trace.events])
        rem_norm = net.remaining_normalizer.normalize(
            [e.remaining_time for e in trace.events])
        zero_rem = float(net.remaining_normalizer.normalize(0.0))
        out.append(EncodedSequence(
            tokens_in=np.array([BOS] + acts),
            times_in=np.concatenate([[float(net.exec_normalizer.normalize(0.0))],
                                     exec_norm]),
            targets_act=np.array(acts + [EOS]),
            targets_time=np.concatenate([rem_norm, [zero_rem]]),
            cond=np.asarray(vec.bits, dtype=float),
        ))
    return out


def collate(seqs: Sequence[EncodedSequence]) -> dict:
    """Pad a list of sequences into batch arrays with a step mask."""
    T = max(len(s.tokens_in) for s in seqs)
    B = len(seqs)
    m = len(seqs[0].cond)
    batch = {
        "tokens": np.full((B, T), PAD, dtype=int),
        "times": np.zeros((B, T)),
        "cond": np.zeros((B, m)),
        "mask": np.zeros((B, T)),
        "targets_act": np.full((B, T), PAD, dtype=int),
        "targets_time": np.zeros((B, T)),
    }
    for i, s in enumerate(seqs):
        L = len(s.tokens_in)
        batch["tokens"][i, :L] = s.tokens_in
        batch["times"][i, :L] = s.times_in
        batch["cond"][i] = s.cond
        batch["mask"][i, :L] = 1.0
        batch["targets_act"][i, :L] = s.targets_act
        batch["targets_time"][i, :L] = s.targets_time
    return batch


def batch_loss_and_grads(net: ConditionedNet, batch: dict, config: TrainConfig):
    cache = net.forward(batch["tokens"], batch["times"], batch["cond"], batch["mask"])
    metrics = net.loss(cache, batch["targets_act"], batch["targets_time"],
                       config.lam_time, config.reduction)
    grads = net.backward(cache, batch["targets_act"], batch["targets_time"],
                         config.lam_time, config.reduction)
    return metrics, grads, cache


def _global_norm(grads: dict) -> float:
    return math.sqrt(sum(float((g ** 2).sum()) for _, g in iter_params(grads)))


def clip_gradients(grads: dict, clip_norm: float) -> float:
    norm = _global_norm(grads)
    if clip_norm and norm > clip_norm:
        factor = clip_norm / norm
        for _, g in iter_params(grads):
            g *= factor
    return norm


class AdamOptimizer:
    """Adaptive-moment gradient descent over the net's parameter dict."""

    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = zero_like_params(params)
        self.v = zero_like_params(params)

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for (path, p), (_, g), (_, m), (_, v) in zip(
            iter_params(params), iter_params(grads),
            iter_params(self.m), iter_params(self.v),
        ):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


def evaluate_net(net: ConditionedNet, seqs: Sequence[EncodedSequence],
                 config: TrainConfig, batch_size: int = 256) -> dict:
    """CE / MSE / next-activity accuracy over a dataset, mean per step."""
    total_ce = total_mse = total_steps = correct = 0.0
    for start in range(0, len(seqs), batch_size):
        batch = collate(seqs[start:start + batch_size])
        cache = net.forward(batch["tokens"], batch["times"], batch["cond"], batch["mask"])
        metrics = net.loss(cache, batch["targets_act"], batch["targets_time"],
                           config.lam_time, reduction="sum")
        total_ce += metrics["ce"]
        total_mse += metrics["mse"]
        total_steps += batch["mask"].sum()
        pred = cache["logits"].argmax(axis=-1)
        correct += ((pred == batch["targets_act"]) * batch["mask"]).sum()
    return {
        "ce": total_ce / total_steps,
        "mse": total_mse / total_steps,
        "acc": correct / total_steps,
        "loss": (total_ce + config.lam_time * total_mse) / total_steps,
    }


def train(
    net: ConditionedNet,
    aug_train: AugmentedLog,
    config: TrainConfig,
    aug_val: Optional[AugmentedLog] = None,
    progress: Optional[Callable[[int, dict], None]] = None,
) -> list[dict]:
    """Mini-batch training; returns per-epoch metrics and leaves the net at its
    best-validation parameters (or final parameters without a validation set)."""
    train_seqs = encode_sequences(aug_train, net)
    val_seqs = encode_sequences(aug_val, net) if aug_val is not None else None
    rng = np.random.default_rng(config.seed)
    opt = AdamOptimizer(net.params, config.learning_rate,
                        config.beta1, config.beta2, config.eps)
    history: list[dict] = []
    best_val = math.inf
    best_params = None
    bad_epochs = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_seqs))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = collate([train_seqs[i] for i in idx])
            metrics, grads, _ = batch_loss_and_grads(net, batch, config)
            if not math.isfinite(metrics["loss"]):
                raise TrainingDivergedError(epoch, epoch - 1)
            clip_gradients(grads, config.clip_norm)
            opt.step(net.params, grads)
        row = {"epoch": epoch}
        tr = evaluate_net(net, train_seqs, config)
        row.update(train_ce=tr["ce"], train_mse=tr["mse"])
        if val_seqs is not None:
            va = evaluate_net(net, val_seqs, config)
            row.update(val_ce=va["ce"], val_mse=va["mse"], val_acc=va["acc"])
            if va["loss"] < best_val:
                best_val = va["loss"]
                best_params = net.clone_params()
                bad_epochs = 0
            else:
                bad_epochs += 1
        history.append(row)
        if progress is not None:
            progress(epoch, row)
        if config.patience is not None and bad_epochs > config.patience:
            break
    if best_params is not None:
        net.params = best_params
    return history


def write_metrics_jsonl(history: Sequence[dict], path) -> None:
    with open(path, "w") as fh:
        for row in history:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# Hyperparameter grid used for tuning: learning rates, batch sizes, input
# (embedding) sizes, hidden sizes, and layer counts. 4*4*5*6*3 = 1440 combos.
DEFAULT_GRID = {
    "learning_rate": [5e-3, 1e-3, 5e-4, 1e-4],
    "batch_size": [16, 32, 256, 512],
    "embed_dim": [16, 32, 64, 128, 256],
    "hidden_dim": [32, 64, 128, 256, 512, 1024],
    "n_layers": [1, 2, 4],
}


def grid_configs(space: Optional[dict] = None) -> list[dict]:
    space = dict(DEFAULT_GRID if space is None else space)
    keys = sorted(space)
    return [dict(zip(keys, combo))
            for combo in itertools.product(*(space[k] for k in keys))]


def grid_search(
    aug_train: AugmentedLog,
    aug_val: AugmentedLog,
    space: Optional[dict] = None,
    epochs: int = 5,
    seed: int = 0,
    budget: Optional[int] = None,
    net_factory: Optional[Callable[[dict], ConditionedNet]] = None,
) -> tuple[dict, list[dict]]:
    """Evaluate configs by validation loss; returns (best, full leaderboard)."""
    configs = grid_configs(space)
    if budget is not None:
        configs = configs[:budget]
    vocab = Vocabulary(aug_train.log.activity_set)
    exec_norm, rem_norm = fit_normalizers(aug_train)
    leaderboard = []
    for entry in configs:
        net_cfg = NetConfig(
            embed_dim=entry.get("embed_dim", 32),
            hidden_dim=entry.get("hidden_dim", 128),
            n_layers=entry.get("n_layers", 1),
        )
        tc = TrainConfig(
            learning_rate=entry.get("learning_rate", 1e-3),
            batch_size=entry.get("batch_size", 32),
            epochs=epochs, seed=seed,
        )
        if net_factory is not None:
            net = net_factory(entry)
        else:
            net = ConditionedNet(
                net_cfg, vocab, len(aug_train.universe),
                aug_train.universe.fingerprint, exec_norm, rem_norm, seed=seed,
            )
        train(net, aug_train, tc, aug_val)
        val = evaluate_net(net, encode_sequences(aug_val, net), tc)
        leaderboard.append({**entry, "val_loss": val["loss"], "val_ce": val["ce"],
                            "val_mse": val["mse"], "val_acc": val["acc"]})
    leaderboard.sort(key=lambda r: r["val_loss"])
    return leaderboard[0], leaderboard
