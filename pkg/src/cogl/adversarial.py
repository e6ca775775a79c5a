"""Discriminator and the minimax losses aligning the two embedding branches.

Rows of the content embedding are the real samples, rows of the topology
embedding are the fake ones; the topology branch plays the generator.  The
discriminator is a one-hidden-layer perceptron over embedding rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import ConfigError, DimensionError


@dataclass
class DiscriminatorParams:
    """One-hidden-layer perceptron with a single-logit head."""

    wd1: nm.Matrix   # c x h_d
    bd1: nm.Matrix   # 1 x h_d
    wd2: nm.Matrix   # h_d x 1
    bd2: nm.Matrix   # 1 x 1

    def __post_init__(self):
        if self.wd2.shape[1] != 1 or self.bd2.shape != (1, 1):
            raise DimensionError("discriminator head must emit a single logit")

    def detached(self) -> "DiscriminatorParams":
        """A constant view used when optimizing the generator side."""
        return DiscriminatorParams(nm.detach(self.wd1), nm.detach(self.bd1),
                                   nm.detach(self.wd2), nm.detach(self.bd2))


def discriminate(rows: nm.Matrix, params: DiscriminatorParams) -> nm.Matrix:
    """Per-row probability of being a real (content) sample, in (0, 1)."""
    if rows.cols != params.wd1.rows:
        raise DimensionError(
            f"discriminate: rows {rows.shape} do not fit weights {params.wd1.shape}")
    hidden = nm.relu(nm.add_rowvec(nm.matmul(rows, params.wd1), params.bd1))
    return nm.sigmoid(nm.add_scalar(nm.matmul(hidden, params.wd2), params.bd2))


def _mean_log(probs: nm.Matrix) -> nm.Matrix:
    return nm.mean_all(nm.log(probs))


def _mean_log_one_minus(probs: nm.Matrix) -> nm.Matrix:
    ones = nm.constant(np.ones(probs.shape))
    return nm.mean_all(nm.log(nm.sub(ones, probs)))


def sample_indices(rng: np.random.Generator, n_rows: int, n: int) -> np.ndarray:
    """n distinct row indices, uniform without replacement."""
    if n > n_rows:
        raise ConfigError(f"sample count n={n} exceeds available rows {n_rows}")
    if n <= 0:
        raise ConfigError(f"sample count must be positive, got {n}")
    return rng.choice(n_rows, size=n, replace=False)


def gan_losses_at(real: nm.Matrix, fake: nm.Matrix, params: DiscriminatorParams,
                  real_idx: np.ndarray, fake_idx: np.ndarray,
                  saturating: bool = False):
    """Discriminator and generator losses on fixed row samples.

    d_loss treats both sampled batches as constants, so its gradient reaches
    only the discriminator.  g_loss freezes the discriminator instead and
    flows into the generator path; by default it is the non-saturating form
    -mean log D(fake), with the literal mean log(1 - D(fake)) behind the
    ``saturating`` switch.
    """
    d_real = discriminate(nm.gather_rows(nm.detach(real), real_idx), params)
    d_fake = discriminate(nm.gather_rows(nm.detach(fake), fake_idx), params)
    d_loss = nm.scale(nm.add(_mean_log(d_real), _mean_log_one_minus(d_fake)), -1.0)

    frozen = params.detached()
    d_fake_gen = discriminate(nm.gather_rows(fake, fake_idx), frozen)
    if saturating:
        g_loss = _mean_log_one_minus(d_fake_gen)
    else:
        g_loss = nm.scale(_mean_log(d_fake_gen), -1.0)
    return d_loss, g_loss


def gan_losses(real: nm.Matrix, fake: nm.Matrix, params: DiscriminatorParams,
               n: int, rng: np.random.Generator, saturating: bool = False):
    """Sample n rows from each branch, then compute both losses.

    Sampling is without replacement and deterministic for a given rng state.
    """
    real_idx = sample_indices(rng, real.rows, n)
    fake_idx = sample_indices(rng, fake.rows, n)
    return gan_losses_at(real, fake, params, real_idx, fake_idx, saturating)
