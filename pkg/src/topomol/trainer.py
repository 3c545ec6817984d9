"""Deterministic desk-scale training loops: pre-training on topological
fingerprints, frozen-backbone probing, and full fine-tuning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .encoder import (
    EncoderConfig,
    augment,
    batch_graphs,
    encode_graphs,
    encode_graphs_tae,
    encode_nodes,
    init_encoder_params,
    init_head_params,
    lift_params,
    readout_mean,
)
from .errors import NonFiniteLoss
from .evalprobe import roc_auc
from .losses import (
    LossConfig,
    combined_loss_t,
    ntxent_loss_t,
    tae_loss_t,
    tdl_loss_t,
    tdl_views_loss_t,
)
from .molio import graph_to_obj


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    aug_kind: str = "node-drop"
    aug_ratio: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs >= 1 required")
        if self.loss.mode != "tae" and self.batch_size < 2:
            raise ValueError("contrastive modes need batch_size >= 2")


DESK_TRAIN = TrainConfig(batch_size=64)


class Adam:
    def __init__(self, params, config: TrainConfig):
        self.lr = config.learning_rate
        self.b1, self.b2, self.eps = config.beta1, config.beta2, config.adam_eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            m_hat = self.m[k] / (1 - self.b1**self.t)
            v_hat = self.v[k] / (1 - self.b2**self.t)
            params[k] = params[k] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _grads_of(lifted, params):
    return {
        k: lifted[k].grad
        for k in params
        if lifted[k].grad is not None
    }


def _batches(n, batch_size, rng):
    perm = rng.permutation(n)
    for at in range(0, n, batch_size):
        chunk = perm[at : at + batch_size]
        if len(chunk) >= 2:
            yield [int(i) for i in chunk]


@dataclass
class PretrainResult:
    params: dict
    best_params: dict
    best_epoch: int
    loss_curve: list[float]


def _dump_bad_batch(out_dir, graphs, epoch, value):
    if out_dir is None:
        return None
    path = f"{out_dir}/bad_batch_epoch{epoch}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"epoch": epoch, "loss": repr(value), "graphs": [graph_to_obj(g) for g in graphs]}, fh)
    return path


def pretrain(
    graphs,
    fingerprints,
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
    out_dir=None,
    view_fingerprint_fn=None,
):
    """Pre-train the encoder on `graphs` with precomputed per-graph
    fingerprint vectors. Returns final and best-epoch parameters plus the
    per-epoch loss curve; bit-reproducible for a fixed (config, seed, corpus).
    """
    I = np.stack([fp.values for fp in fingerprints]) if fingerprints else None
    mode = train_config.loss.mode
    tau, lam = train_config.loss.tau, train_config.loss.lam

    params = init_encoder_params(encoder_config, train_config.seed)
    if mode == "tae":
        params.update(
            init_head_params(encoder_config, I.shape[1], train_config.seed + 1, prefix="tae")
        )
    else:
        params.update(
            init_head_params(encoder_config, encoder_config.hidden, train_config.seed + 1)
        )
    opt = Adam(params, train_config)
    rng = np.random.default_rng(train_config.seed)

    curve = []
    best = (np.inf, 0, {k: v.copy() for k, v in params.items()})
    for epoch in range(train_config.epochs):
        epoch_losses = []
        for bi, idx in enumerate(_batches(len(graphs), train_config.batch_size, rng)):
            batch_graph_list = [graphs[i] for i in idx]
            tape = ad.Tape()
            lifted = lift_params(tape, params)
            aug_seed = train_config.seed * 7919 + epoch * 131 + bi

            if mode == "tae":
                batch = batch_graphs(batch_graph_list, encoder_config)
                H = encode_graphs_tae(tape, batch, encoder_config, lifted)
                loss = tae_loss_t(tape, H, I[idx])
            elif mode == "tdl":
                batch = batch_graphs(batch_graph_list, encoder_config)
                Z, _ = encode_graphs(tape, batch, encoder_config, lifted)
                loss = tdl_loss_t(tape, Z, I[idx], tau)
            else:
                views_a = [
                    augment(g, train_config.aug_kind, train_config.aug_ratio, aug_seed * 2 + i)[0]
                    for i, g in enumerate(batch_graph_list)
                ]
                views_b = [
                    augment(g, train_config.aug_kind, train_config.aug_ratio, aug_seed * 2 + 1 + 7 * i)[0]
                    for i, g in enumerate(batch_graph_list)
                ]
                # one forward pass over both views (and, for the combined
                # objective, the clean graphs) amortizes per-op overhead
                with_clean = mode == "combined" and lam != 0.0
                stacked = views_a + views_b + (batch_graph_list if with_clean else [])
                Z_all, _ = encode_graphs(
                    tape, batch_graphs(stacked, encoder_config), encoder_config, lifted
                )
                nb = len(batch_graph_list)
                Za = ad.gather_rows(tape, Z_all, np.arange(nb))
                Zb = ad.gather_rows(tape, Z_all, np.arange(nb, 2 * nb))
                if mode == "ntxent":
                    loss = ntxent_loss_t(tape, Za, Zb, tau)
                elif mode == "tdl-views":
                    if view_fingerprint_fn is not None:
                        Ia = np.stack([view_fingerprint_fn(g) for g in views_a])
                        Ib = np.stack([view_fingerprint_fn(g) for g in views_b])
                    else:
                        Ia = Ib = I[idx]
                    loss = tdl_views_loss_t(tape, Za, Zb, Ia, Ib, tau)
                else:  # combined: NT-Xent over views plus lambda * TDL on the samples
                    base = ntxent_loss_t(tape, Za, Zb, tau)
                    if with_clean:
                        Z = ad.gather_rows(tape, Z_all, np.arange(2 * nb, 3 * nb))
                        loss = combined_loss_t(tape, base, tdl_loss_t(tape, Z, I[idx], tau), lam)
                    else:
                        loss = base

            value = float(loss.data)
            if not np.isfinite(value):
                path = _dump_bad_batch(out_dir, batch_graph_list, epoch, value)
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}" + (f"; batch dumped to {path}" if path else ""))
            tape.backward(loss)
            opt.step(params, _grads_of(lifted, params))
            epoch_losses.append(value)

        epoch_mean = float(np.mean(epoch_losses))
        curve.append(epoch_mean)
        if epoch_mean < best[0]:
            best = (epoch_mean, epoch, {k: v.copy() for k, v in params.items()})

    return PretrainResult(params=params, best_params=best[2], best_epoch=best[1], loss_curve=curve)


# ---------------------------------------------------------------------------
# Probing and fine-tuning


def graph_embeddings(graphs, encoder_config, params):
    """Frozen-backbone graph embeddings h_G (pre-projection)."""
    tape = ad.Tape()
    lifted = lift_params(tape, params)
    batch = batch_graphs(graphs, encoder_config)
    h_nodes = encode_nodes(tape, batch, encoder_config, lifted)
    return readout_mean(tape, h_nodes, batch).data.copy()


def _head_forward(tape, X, p, mode, dropout_rate, rng):
    x = tape.tensor(X) if not isinstance(X, ad.Tensor) else X
    if dropout_rate > 0.0 and rng is not None:
        keep = 1.0 - dropout_rate
        mask = (rng.random(x.shape) < keep).astype(np.float64) / keep
        x = ad.mul(tape, x, mask)
    if mode == "mlp-probe":
        hidden = ad.relu(tape, ad.add(tape, ad.matmul(tape, x, p["probe.w1"]), p["probe.b1"]))
        return ad.add(tape, ad.matmul(tape, hidden, p["probe.w2"]), p["probe.b2"])
    return ad.add(tape, ad.matmul(tape, x, p["probe.w"]), p["probe.b"])


def _init_probe_params(in_dim, mode, seed):
    rng = np.random.default_rng(seed)
    if mode == "mlp-probe":
        h = max(in_dim // 2, 8)
        return {
            "probe.w1": _glorot_like(rng, in_dim, h),
            "probe.b1": np.zeros(h),
            "probe.w2": _glorot_like(rng, h, 1),
            "probe.b2": np.zeros(1),
        }
    return {"probe.w": _glorot_like(rng, in_dim, 1), "probe.b": np.zeros(1)}


def _glorot_like(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _task_loss_t(tape, logits, y, classification):
    if classification:
        # binary cross entropy with logits: mean(softplus(x) - y * x)
        softplus = ad.log(tape, ad.add_scalar(tape, ad.exp(tape, logits), 1.0))
        return ad.tmean(tape, ad.sub(tape, softplus, ad.mul(tape, logits, y)))
    return ad.tmean(tape, ad.pow_scalar(tape, ad.sub(tape, logits, y), 2.0))


def _metric(scores, y, classification):
    if classification:
        return roc_auc(scores, y)
    return float(np.sqrt(np.mean((scores - y) ** 2)))


def finetune_or_probe(
    params,
    graphs,
    labels,
    splits,
    mode: str,
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
    classification: bool = True,
):
    """Train a head on top of the encoder. `mode` is one of "linear-probe",
    "mlp-probe" (both frozen backbone) or "full" (fine-tunes everything).
    Reports the test metric at the best validation epoch (earlier epoch wins
    ties). Metric is ROC-AUC for classification, RMSE for regression."""
    if mode not in ("linear-probe", "mlp-probe", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    train_idx, valid_idx, test_idx = splits
    y = np.asarray(labels, dtype=np.float64)[:, None]

    backbone = {k: v.copy() for k, v in params.items()}
    head = _init_probe_params(encoder_config.hidden, "mlp-probe" if mode == "mlp-probe" else "linear", train_config.seed)
    head_mode = "mlp-probe" if mode == "mlp-probe" else "linear"

    frozen = mode != "full"
    if frozen:
        Z_all = graph_embeddings(graphs, encoder_config, backbone)

    trainable = dict(head)
    if not frozen:
        trainable.update(backbone)
    opt = Adam(trainable, train_config)
    rng = np.random.default_rng(train_config.seed)
    drop_rng = np.random.default_rng(train_config.seed + 99)

    def eval_scores(idx):
        tape = ad.Tape()
        p = lift_params(tape, trainable)
        if frozen:
            logits = _head_forward(tape, Z_all[idx], p, head_mode, 0.0, None)
        else:
            emb = graph_embeddings([graphs[i] for i in idx], encoder_config, trainable)
            logits = _head_forward(tape, emb, p, head_mode, 0.0, None)
        return logits.data[:, 0].copy()

    best = (None, -1, None)  # (val metric, epoch, test metric)
    for epoch in range(train_config.epochs):
        for idx in _batches(len(train_idx), train_config.batch_size, rng):
            sel = [train_idx[i] for i in idx]
            tape = ad.Tape()
            p = lift_params(tape, trainable)
            if frozen:
                logits = _head_forward(tape, Z_all[sel], p, head_mode, encoder_config.dropout, drop_rng)
            else:
                batch = batch_graphs([graphs[i] for i in sel], encoder_config)
                h_nodes = encode_nodes(tape, batch, encoder_config, p, dropout_rng=drop_rng)
                emb = readout_mean(tape, h_nodes, batch)
                logits = _head_forward(tape, emb, p, head_mode, 0.0, None)
            loss = _task_loss_t(tape, logits, y[sel], classification)
            if not np.isfinite(float(loss.data)):
                raise NonFiniteLoss(f"non-finite head loss at epoch {epoch}")
            tape.backward(loss)
            opt.step(trainable, _grads_of(p, trainable))

        val_metric = _metric(eval_scores(valid_idx), y[valid_idx, 0], classification)
        better = (
            best[0] is None
            or (classification and val_metric > best[0])
            or (not classification and val_metric < best[0])
        )
        if better:
            test_metric = _metric(eval_scores(test_idx), y[test_idx, 0], classification)
            best = (val_metric, epoch, test_metric)

    return {
        "mode": mode,
        "metric": "roc_auc" if classification else "rmse",
        "valid": best[0],
        "best_epoch": best[1],
        "test": best[2],
    }
