"""End-to-end training: alternating adversarial steps over the combined loss.

Each outer epoch rebuilds the content network from the current parameters,
then runs N inner steps; every inner step samples once from both embedding
matrices and performs two updates, one for the discriminator and one for the
model (projection, scoring and shared convolution weights).  Both updates
optimize the combined objective

    L = L_classification + alpha * L_reconstruction + beta * L_adversarial

with the adversarial term being the discriminator loss in the first sub-step
and the generator loss in the second.  Adam drives all updates; validation
accuracy gates early stopping and checkpointing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import numerics as nm
from .adversarial import DiscriminatorParams, gan_losses_at, sample_indices
from .content_net import (ContentParams, build_content_network, content_forward,
                          reconstruction_loss_from_gram, softmax_gram)
from .errors import ConfigError, NumericalError
from .graph_io import Graph, normalize_adjacency
from .topo_gcn import SharedConvParams, accuracy, classification_loss, predict, \
    topology_forward

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    alpha: float = 0.4            # weight of the reconstruction loss
    beta: float = 0.8             # weight of the adversarial loss
    lr: float = 0.002
    dropout: float = 0.5
    weight_decay: float = 5e-4
    epochs: int = 1000            # outer epochs M
    inner_steps: int = 1          # adversarial steps N per epoch
    sample_n: int = 64            # rows sampled per branch per inner step
    d_dim: int = 70               # content projection size d
    h_dim: int = 30               # hidden convolution size h
    disc_hidden: int = 16
    patience: int = 200
    seed: int = 0
    saturating_gan: bool = False  # literal min log(1-D) generator loss
    decay_scope: str = "all"      # "all" weight matrices or "conv" only

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        for name in ("epochs", "inner_steps", "sample_n", "d_dim", "h_dim",
                     "disc_hidden", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.decay_scope not in ("all", "conv"):
            raise ConfigError(f"decay_scope must be 'all' or 'conv', got {self.decay_scope!r}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class EpochRecord:
    epoch: int
    l_gcn: float
    l_cont: float
    d_loss: float
    g_loss: float
    combined: float
    val_acc: float


@dataclass
class TrainReport:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0
    test_accuracy: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,l_gcn,l_cont,d_loss,g_loss,combined,val_acc\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.l_gcn:.17g},{r.l_cont:.17g},{r.d_loss:.17g},"
                         f"{r.g_loss:.17g},{r.combined:.17g},{r.val_acc:.17g}\n")

    def summary(self) -> dict:
        return {
            "epochs_run": len(self.records),
            "best_epoch": self.best_epoch,
            "best_val_accuracy": self.best_val_acc,
            "test_accuracy": self.test_accuracy,
        }


@dataclass
class ModelParams:
    """Every trainable weight, each with its own gradient slot."""

    content: ContentParams
    conv: SharedConvParams
    disc: DiscriminatorParams

    def model_params(self) -> list[nm.Matrix]:
        return [self.content.w_p, self.content.w_c, self.conv.w1, self.conv.w2]

    def disc_params(self) -> list[nm.Matrix]:
        return [self.disc.wd1, self.disc.bd1, self.disc.wd2, self.disc.bd2]

    def all_params(self) -> list[nm.Matrix]:
        return self.model_params() + self.disc_params()

    def snapshot(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.all_params()]

    def restore(self, snap: list[np.ndarray]) -> None:
        for p, saved in zip(self.all_params(), snap):
            p.value[...] = saved


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(n_features: int, n_classes: int, cfg: TrainConfig,
                rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights, zero biases, in a fixed draw order."""
    conv = SharedConvParams(
        w1=nm.parameter(glorot(rng, n_features, cfg.h_dim)),
        w2=nm.parameter(glorot(rng, cfg.h_dim, n_classes)),
    )
    content = ContentParams(
        w_p=nm.parameter(glorot(rng, n_features, cfg.d_dim)),
        w_c=nm.parameter(glorot(rng, cfg.d_dim, 1)),
    )
    disc = DiscriminatorParams(
        wd1=nm.parameter(glorot(rng, n_classes, cfg.disc_hidden)),
        bd1=nm.parameter(np.zeros((1, cfg.disc_hidden))),
        wd2=nm.parameter(glorot(rng, cfg.disc_hidden, 1)),
        bd2=nm.parameter(np.zeros((1, 1))),
    )
    return ModelParams(content, conv, disc)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              lr: float, weight_decay: float,
              decay_mask: Optional[list[bool]] = None) -> AdamState:
    """One Adam update, in place, with the L2 term added to the gradient."""
    state.t += 1
    corr1 = 1.0 - ADAM_BETA1 ** state.t
    corr2 = 1.0 - ADAM_BETA2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if weight_decay and (decay_mask is None or decay_mask[i]):
            g = g + weight_decay * p
        m, v = state.m[i], state.v[i]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        p -= lr * (m / corr1) / (np.sqrt(v / corr2) + ADAM_EPS)
    return state


class Adam:
    """Adam over a fixed list of Matrix parameters."""

    def __init__(self, params: list[nm.Matrix], lr: float, weight_decay: float,
                 decay_mask: Optional[list[bool]] = None):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.decay_mask = decay_mask
        self.state = AdamState(m=[np.zeros_like(p.value) for p in params],
                               v=[np.zeros_like(p.value) for p in params])

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.value)
                 for p in self.params]
        adam_step([p.value for p in self.params], grads, self.state,
                  self.lr, self.weight_decay, self.decay_mask)


def _decay_mask(params: list[nm.Matrix], model: ModelParams, scope: str) -> list[bool]:
    decayed = {id(model.conv.w1), id(model.conv.w2)}
    if scope == "all":
        decayed |= {id(model.content.w_p), id(model.content.w_c),
                    id(model.disc.wd1), id(model.disc.wd2)}
    return [id(p) in decayed for p in params]


# ---------------------------------------------------------------------------
# training


class _Run:
    """State shared by the per-epoch steps of one training run."""

    def __init__(self, graph: Graph, cfg: TrainConfig):
        self.graph = graph
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.params = init_params(graph.n_features, graph.n_classes, cfg, self.rng)
        self.adj = nm.constant(normalize_adjacency(graph).a_tilde)
        self.x = nm.constant(graph.features)
        self.use_content = cfg.alpha > 0 or cfg.beta > 0
        self.gram_x = nm.constant(softmax_gram(graph.features)) if self.use_content else None
        model = self.params.model_params() if self.use_content \
            else [self.params.conv.w1, self.params.conv.w2]
        self.opt_model = Adam(model, cfg.lr, cfg.weight_decay,
                              _decay_mask(model, self.params, cfg.decay_scope))
        disc = self.params.disc_params()
        self.opt_disc = Adam(disc, cfg.lr, cfg.weight_decay,
                             _decay_mask(disc, self.params, cfg.decay_scope))

    def _forward_losses(self, sample: Optional[tuple]) -> dict:
        cfg, g = self.cfg, self.graph
        out = {}
        if self.use_content:
            a_bar = build_content_network(self.x, self.params.content)
            x_bar2 = content_forward(a_bar, self.x, self.params.conv.w1,
                                     self.params.conv.w2, cfg.dropout, True, self.rng)
            out["l_cont"] = reconstruction_loss_from_gram(self.gram_x, x_bar2)
        o = topology_forward(None, self.x, self.params.conv, cfg.dropout, True,
                             self.rng, adj_node=self.adj)
        out["l_gcn"] = classification_loss(o, g.labels, g.train_mask)
        if sample is not None:
            real_idx, fake_idx = sample
            out["d_loss"], out["g_loss"] = gan_losses_at(
                x_bar2, o, self.params.disc, real_idx, fake_idx, cfg.saturating_gan)
        return out

    def _combine(self, losses: dict, gan_term: Optional[nm.Matrix]) -> nm.Matrix:
        cfg = self.cfg
        total = losses["l_gcn"]
        if cfg.alpha > 0:
            total = nm.add(total, nm.scale(losses["l_cont"], cfg.alpha))
        if gan_term is not None:
            total = nm.add(total, nm.scale(gan_term, cfg.beta))
        return total

    def _sub_step(self, sample: Optional[tuple], update: str) -> dict:
        with nm.Tape() as tape:
            losses = self._forward_losses(sample)
            gan_term = None
            if sample is not None:
                gan_term = losses["d_loss"] if update == "disc" else losses["g_loss"]
            total = self._combine(losses, gan_term)
        nm.backward(tape, total)
        optimizer = self.opt_disc if update == "disc" else self.opt_model
        optimizer.step()
        nm.zero_grads(self.params.all_params())
        values = {k: float(v.value[0, 0]) for k, v in losses.items()}
        values["combined"] = float(total.value[0, 0])
        return values

    def run_epoch(self, epoch: int) -> dict:
        cfg = self.cfg
        try:
            if cfg.beta > 0:
                for j in range(1, cfg.inner_steps + 1):
                    n = self.graph.n_nodes
                    sample = (sample_indices(self.rng, n, cfg.sample_n),
                              sample_indices(self.rng, n, cfg.sample_n))
                    self._sub_step(sample, update="disc")
                    values = self._sub_step(sample, update="model")
            else:
                values = self._sub_step(None, update="model")
        except NumericalError as exc:
            raise NumericalError(f"epoch {epoch}: {exc}") from None
        values.setdefault("l_cont", 0.0)
        values.setdefault("d_loss", 0.0)
        values.setdefault("g_loss", 0.0)
        return values

    def validation(self) -> tuple[float, float]:
        g = self.graph
        logits = topology_forward(None, self.x, self.params.conv, training=False,
                                  adj_node=self.adj)
        val_acc = accuracy(predict(logits), g.labels, g.val_mask)
        val_loss = float(classification_loss(logits, g.labels, g.val_mask).value[0, 0])
        return val_acc, val_loss


def train(graph: Graph, cfg: TrainConfig,
          verbose: bool = False) -> tuple[ModelParams, TrainReport]:
    """Train on ``graph``; returns final parameters and the epoch-by-epoch report.

    Early stopping restores the best-validation-accuracy checkpoint (ties
    break to the lower validation loss); test accuracy is evaluated exactly
    once, on that checkpoint.
    """
    cfg.validate()
    for name, mask in (("train", graph.train_mask), ("val", graph.val_mask),
                       ("test", graph.test_mask)):
        if not np.any(mask):
            raise ConfigError(f"{name} mask is empty")
    if cfg.beta > 0 and cfg.sample_n > graph.n_nodes:
        raise ConfigError(
            f"sample_n={cfg.sample_n} exceeds |V|={graph.n_nodes}")

    run = _Run(graph, cfg)
    report = TrainReport()
    best_snap = run.params.snapshot()
    best_acc, best_loss = -1.0, math.inf
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        values = run.run_epoch(epoch)
        val_acc, val_loss = run.validation()
        report.records.append(EpochRecord(
            epoch=epoch, l_gcn=values["l_gcn"], l_cont=values["l_cont"],
            d_loss=values["d_loss"], g_loss=values["g_loss"],
            combined=values["combined"], val_acc=val_acc))
        if val_acc > best_acc:
            best_acc, best_loss = val_acc, val_loss
            best_snap = run.params.snapshot()
            report.best_epoch = epoch
            stale = 0
        else:
            if val_acc == best_acc and val_loss < best_loss:
                best_loss = val_loss
                best_snap = run.params.snapshot()
                report.best_epoch = epoch
            stale += 1
            if stale >= cfg.patience:
                break
        if verbose and (epoch == 1 or epoch % 25 == 0):
            print(f"epoch {epoch:4d}  loss {values['combined']:.4f}  "
                  f"val_acc {val_acc:.4f}")

    run.params.restore(best_snap)
    report.best_val_acc = best_acc
    report.test_accuracy = evaluate(graph, run.params, graph.test_mask)
    return run.params, report


def evaluate(graph: Graph, params: ModelParams, mask: np.ndarray) -> float:
    """Accuracy of the topology branch on the masked nodes, dropout disabled."""
    logits = topology_forward(normalize_adjacency(graph), nm.constant(graph.features),
                              params.conv, training=False)
    return accuracy(predict(logits), graph.labels, mask)


# ---------------------------------------------------------------------------
# checkpoints

_CHECKPOINT_KEYS = ("w_p", "w_c", "w1", "w2", "wd1", "bd1", "wd2", "bd2")


def save_checkpoint(path, params: ModelParams, meta: Optional[dict] = None) -> None:
    arrays = dict(zip(_CHECKPOINT_KEYS, (p.value for p in params.all_params())))
    arrays["meta"] = np.frombuffer(
        json.dumps(meta or {}, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    blob = np.load(path)
    arrays = [np.ascontiguousarray(blob[k], dtype=np.float64) for k in _CHECKPOINT_KEYS]
    params = ModelParams(
        content=ContentParams(w_p=nm.parameter(arrays[0]), w_c=nm.parameter(arrays[1])),
        conv=SharedConvParams(w1=nm.parameter(arrays[2]), w2=nm.parameter(arrays[3])),
        disc=DiscriminatorParams(wd1=nm.parameter(arrays[4]), bd1=nm.parameter(arrays[5]),
                                 wd2=nm.parameter(arrays[6]), bd2=nm.parameter(arrays[7])),
    )
    meta = json.loads(bytes(blob["meta"]).decode("utf-8"))
    return params, meta
