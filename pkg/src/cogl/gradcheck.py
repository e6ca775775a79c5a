"""Finite-difference verification of every loss the model trains on.

Builds one small random instance (8 nodes, 5 features, 3-d projection,
4 hidden units, 3 classes), evaluates each loss in deterministic mode
(no dropout, fixed sample indices), and compares tape gradients against
central differences for every trainable entry of that loss.
"""

from __future__ import annotations

import numpy as np

from . import numerics as nm
from .adversarial import gan_losses_at
from .content_net import build_content_network, content_forward, reconstruction_loss
from .graph_io import Graph, normalize_adjacency
from .topo_gcn import classification_loss, topology_forward
from .trainer import TrainConfig, init_params

INSTANCE = dict(n=8, m=5, d=3, h=4, c=3, n_sample=4)
TOLERANCE = 1e-4
FD_STEP = 1e-5


def make_instance(seed: int):
    """Random graph, parameters and fixed GAN sample indices."""
    spec = INSTANCE
    rng = np.random.default_rng(seed)
    n, m, c = spec["n"], spec["m"], spec["c"]
    adj = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.4:
                adj[i, j] = adj[j, i] = 1.0
    labels = np.zeros((n, c))
    labels[np.arange(n), rng.integers(0, c, size=n)] = 1.0
    masks = np.zeros((3, n), dtype=bool)
    masks[rng.integers(0, 3, size=n), np.arange(n)] = True
    if not masks[0].any():
        masks[0, 0] = masks[1, 0] = masks[2, 0] = False
        masks[0, 0] = True
    graph = Graph(adj, rng.normal(size=(n, m)), labels, *masks)
    cfg = TrainConfig(d_dim=spec["d"], h_dim=spec["h"], dropout=0.0)
    params = init_params(m, c, cfg, rng)
    sample = (rng.choice(n, spec["n_sample"], replace=False),
              rng.choice(n, spec["n_sample"], replace=False))
    return graph, params, sample


def _loss_builders(graph: Graph, params, sample):
    x = nm.constant(graph.features)
    a_tilde = normalize_adjacency(graph)

    def l_cont():
        a_bar = build_content_network(x, params.content)
        emb = content_forward(a_bar, x, params.conv.w1, params.conv.w2)
        return reconstruction_loss(x, emb)

    def l_gcn():
        logits = topology_forward(a_tilde, x, params.conv)
        return classification_loss(logits, graph.labels, graph.train_mask)

    def both_gan():
        a_bar = build_content_network(x, params.content)
        emb = content_forward(a_bar, x, params.conv.w1, params.conv.w2)
        logits = topology_forward(a_tilde, x, params.conv)
        return gan_losses_at(emb, logits, params.disc, sample[0], sample[1])

    conv = [params.conv.w1, params.conv.w2]
    content = [params.content.w_p, params.content.w_c]
    disc = [params.disc.wd1, params.disc.bd1, params.disc.wd2, params.disc.bd2]
    return [
        ("L_cont", l_cont, content + conv),
        ("L_gcn", l_gcn, conv),
        ("d_loss", lambda: both_gan()[0], disc),
        ("g_loss", lambda: both_gan()[1], conv),
    ]


def check_loss(builder, wrt: list[nm.Matrix]) -> float:
    """Max relative error between tape and central-difference gradients."""
    nm.zero_grads(wrt)
    with nm.Tape() as tape:
        loss = builder()
    nm.backward(tape, loss)
    analytic = [np.zeros_like(p.value) if p.grad is None else p.grad.copy()
                for p in wrt]
    nm.zero_grads(wrt)
    numeric = nm.finite_difference(lambda: float(builder().value[0, 0]), wrt,
                                   step=FD_STEP)
    return max(nm.max_relative_error(a, f) for a, f in zip(analytic, numeric))


def run_gradient_checks(seed: int = 0) -> dict[str, float]:
    """Max relative FD error for each loss term, keyed by loss name."""
    graph, params, sample = make_instance(seed)
    results = {}
    for name, builder, wrt in _loss_builders(graph, params, sample):
        results[name] = check_loss(builder, wrt)
    return results
