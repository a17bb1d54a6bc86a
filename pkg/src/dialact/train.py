"""Maximum-likelihood training with per-element adaptive steps.

The objective is the summed sequence negative log-likelihood plus an L2
penalty. Updates follow the diagonal adaptive rule: each element keeps a
running sum of squared gradients and steps by lr * g / sqrt(sum g^2).
Every parameter also carries an exponential-moving-average shadow; the
shadows, not the raw weights, are what validation and the saved
checkpoint use.

Batches contain only conversations with the same number of utterances
(so the chain layer never pads), at most ``max_batch`` each, reshuffled
every epoch from the run seed. Training stops when validation accuracy
has not improved for ``patience`` epochs, or at ``max_epochs``.

Config files are flat ``key = value`` text; keys must be TrainConfig
field names, unknown keys are an error. History records are one JSON
object per epoch: {"epoch", "train_loss", "val_accuracy", "seconds"}.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, fields

import numpy as np

from . import autograd as ag
from .corpus import TranscriptError, build_vocab, load_pretrained_embeddings
from .model import DialogueActModel


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; defaults follow the reference setup."""

    lr: float = 0.005
    l2: float = 1e-5
    dropout: float = 0.2
    max_batch: int = 48
    patience: int = 5
    ema_decay: float = 0.999
    hops: int = 1
    d: int = 128
    d_u: int = 64
    d_p: int = 16
    d_n: int = 16
    d_c: int = 16
    word_dim: int = 100
    char_out: int = 100
    attn_dim: int = 64
    emit_dim: int = 64
    seed: int = 42
    max_epochs: int = 50
    clip_norm: float = 5.0  # global-norm gradient clip; <= 0 disables
    boundary_potentials: bool = False
    min_count: int = 1

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 < self.ema_decay < 1.0:
            raise ValueError(f"ema_decay must be in (0, 1), got {self.ema_decay}")
        if self.l2 < 0.0:
            raise ValueError(f"l2 must be nonnegative, got {self.l2}")
        if self.d != 2 * self.d_u:
            raise ValueError(f"d={self.d} must equal 2*d_u={2 * self.d_u}")


_CASTS = {"int": int, "float": float, "bool": lambda v: v.strip().lower() in ("1", "true", "yes")}


def parse_config_file(path):
    """Flat key-value overrides onto TrainConfig defaults."""
    overrides = {}
    field_types = {f.name: str(f.type) for f in fields(TrainConfig)}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise TranscriptError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in field_types:
                raise TranscriptError(f"{path}:{lineno}: unknown config key {key!r}")
            overrides[key] = _CASTS[field_types[key]](value)
    return TrainConfig(**overrides)


@dataclass
class TrainState:
    """Progress counters; the gradient accumulators live in the registry."""

    epoch: int = 0
    best_val_accuracy: float = -1.0
    epochs_since_improvement: int = 0


def compute_loss(batch_conversations, model, train=True, rng=None):
    """Summed NLL of the gold sequences plus the L2 term; see model.loss."""
    return model.loss(batch_conversations, train=train, rng=rng)


def adagrad_step(registry, lr):
    """One diagonal adaptive update over every parameter with a gradient."""
    for name in registry.names():
        tensor = registry.params[name]
        g = tensor.grad
        if g is None:
            continue
        if np.isnan(g).any():
            raise FloatingPointError(f"NaN gradient in parameter {name!r}")
        acc = registry.sq_accum[name]
        acc += g * g
        denom = np.sqrt(np.maximum(acc, 1e-12))
        tensor.data -= lr * g / denom


def clip_gradients(registry, max_norm):
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    if max_norm <= 0:
        return 1.0
    total = 0.0
    for name in registry.names():
        g = registry.params[name].grad
        if g is not None:
            total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for name in registry.names():
            g = registry.params[name].grad
            if g is not None:
                g *= scale
        return scale
    return 1.0


def ema_update(registry, decay):
    """shadow <- decay * shadow + (1 - decay) * param, elementwise."""
    for name in registry.names():
        shadow = registry.ema[name]
        shadow *= decay
        shadow += (1.0 - decay) * registry.params[name].data


def make_batches(conversations, max_batch, rng):
    """Equal-length buckets chunked to size, then batch order shuffled."""
    buckets = {}
    for conv in conversations:
        buckets.setdefault(len(conv), []).append(conv)
    batches = []
    for length in sorted(buckets):
        bucket = list(buckets[length])
        order = rng.permutation(len(bucket))
        bucket = [bucket[i] for i in order]
        for i in range(0, len(bucket), max_batch):
            batches.append(bucket[i : i + max_batch])
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def train_loop(train_convs, valid_convs, cfg, embeddings_path=None, log=None):
    """Fit a model; returns (model, best_ema_state, history).

    The vocabulary is built from the training split only. After every
    epoch the EMA shadows are evaluated on the validation split; the
    best-scoring shadow set is what gets returned (and should be saved).
    """
    if not train_convs:
        raise TranscriptError("training corpus is empty")
    if not valid_convs:
        raise TranscriptError("validation corpus is empty")
    for conv in train_convs:
        if not conv.fully_labeled():
            raise TranscriptError(f"training conversation {conv.id!r} has unlabeled utterances")

    vocab = build_vocab(train_convs, min_count=cfg.min_count)
    rng = np.random.default_rng(cfg.seed)
    word_matrix = None
    if embeddings_path is not None:
        word_matrix = load_pretrained_embeddings(embeddings_path, vocab, cfg.word_dim, rng=rng)
    model = DialogueActModel(vocab, cfg, rng=rng, word_embeddings=word_matrix)

    state = TrainState()
    history = []
    best_state = model.registry.ema_dict()
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        state.epoch = epoch
        epoch_loss = 0.0
        for batch in make_batches(train_convs, cfg.max_batch, rng):
            model.registry.zero_grads()
            with ag.Tape() as tape:
                loss = model.loss(batch, train=True, rng=rng)
            tape.backward(loss)
            model.registry.mask_frozen_grads()
            clip_gradients(model.registry, cfg.clip_norm)
            adagrad_step(model.registry, cfg.lr)
            ema_update(model.registry, cfg.ema_decay)
            epoch_loss += float(loss.data)
        with model.registry.using_ema():
            val_acc = model.accuracy(valid_convs)
        seconds = time.perf_counter() - t0
        history.append(
            {"epoch": epoch, "train_loss": epoch_loss, "val_accuracy": val_acc, "seconds": seconds}
        )
        if log is not None:
            log(f"epoch {epoch:3d}  loss {epoch_loss:12.4f}  val_acc {val_acc:.4f}  {seconds:.1f}s")
        if val_acc > state.best_val_accuracy:
            state.best_val_accuracy = val_acc
            state.epochs_since_improvement = 0
            best_state = model.registry.ema_dict()
        else:
            state.epochs_since_improvement += 1
            if state.epochs_since_improvement >= cfg.patience:
                break
    return model, best_state, history


def write_history(path, history):
    with open(path, "w", encoding="utf-8") as f:
        for record in history:
            f.write(json.dumps(record) + "\n")
