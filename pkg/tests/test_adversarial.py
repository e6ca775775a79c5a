import math

import numpy as np
import pytest

from cogl import numerics as nm
from cogl.adversarial import (DiscriminatorParams, discriminate, gan_losses,
                              gan_losses_at, sample_indices)
from cogl.errors import ConfigError

from _oracles import discriminator_oracle, gan_losses_oracle


def make_disc(rng, c=3, h_d=5):
    return DiscriminatorParams(
        wd1=nm.parameter(rng.normal(size=(c, h_d))),
        bd1=nm.parameter(rng.normal(size=(1, h_d))),
        wd2=nm.parameter(rng.normal(size=(h_d, 1))),
        bd2=nm.parameter(rng.normal(size=(1, 1))),
    )


def zero_disc(c=3, h_d=5):
    return DiscriminatorParams(
        wd1=nm.parameter(np.zeros((c, h_d))),
        bd1=nm.parameter(np.zeros((1, h_d))),
        wd2=nm.parameter(np.zeros((h_d, 1))),
        bd2=nm.parameter(np.zeros((1, 1))),
    )


def test_zero_weights_output_half(rng):
    probs = discriminate(nm.constant(rng.normal(size=(4, 3))), zero_disc())
    assert np.max(np.abs(probs.value - 0.5)) == 0.0


def test_large_positive_bias_saturates(rng):
    disc = zero_disc()
    disc.bd2.value[0, 0] = 50.0
    probs = discriminate(nm.constant(rng.normal(size=(4, 3))), disc)
    assert np.all(probs.value > 1.0 - 1e-9)


def test_discriminate_matches_per_row_oracle(rng):
    disc = make_disc(rng)
    rows = rng.normal(size=(6, 3))
    got = discriminate(nm.constant(rows), disc).value
    for i in range(6):
        want = discriminator_oracle(rows[i].tolist(), disc.wd1.value.tolist(),
                                    disc.bd1.value.tolist(), disc.wd2.value.tolist(),
                                    disc.bd2.value.tolist())
        assert got[i, 0] == pytest.approx(want, abs=1e-10)


def test_half_probability_loss_constants(rng):
    real = nm.constant(rng.normal(size=(8, 3)))
    fake = nm.constant(rng.normal(size=(8, 3)))
    d_loss, g_loss = gan_losses(real, fake, zero_disc(), 4, np.random.default_rng(0))
    assert d_loss.value[0, 0] == pytest.approx(2.0 * math.log(2.0))
    assert g_loss.value[0, 0] == pytest.approx(math.log(2.0))


def test_confident_discriminator_drives_d_loss_to_zero():
    # one feature, huge weight: real rows sit at +10, fake rows at -10
    disc = DiscriminatorParams(
        wd1=nm.parameter([[50.0]]),
        bd1=nm.parameter([[0.0]]),
        wd2=nm.parameter([[50.0]]),
        bd2=nm.parameter([[-10.0 * 50.0 * 50.0 / 2.0]]),
    )
    real = nm.constant(np.full((4, 1), 10.1))
    fake = nm.constant(np.full((4, 1), 0.0))
    d_loss, _ = gan_losses(real, fake, disc, 2, np.random.default_rng(0))
    assert d_loss.value[0, 0] == pytest.approx(0.0, abs=1e-6)


def test_losses_match_scalar_oracle(rng):
    disc = make_disc(rng)
    real = rng.normal(size=(9, 3))
    fake = rng.normal(size=(9, 3))
    ridx = np.array([1, 4, 7])
    fidx = np.array([0, 2, 8])
    d_loss, g_loss = gan_losses_at(nm.constant(real), nm.constant(fake), disc,
                                   ridx, fidx)
    want_d, want_g = gan_losses_oracle(
        real[ridx].tolist(), fake[fidx].tolist(), disc.wd1.value.tolist(),
        disc.bd1.value.tolist(), disc.wd2.value.tolist(), disc.bd2.value.tolist())
    assert d_loss.value[0, 0] == pytest.approx(want_d, abs=1e-10)
    assert g_loss.value[0, 0] == pytest.approx(want_g, abs=1e-10)


def test_losses_finite_under_saturation(rng):
    disc = zero_disc(c=1)
    disc.bd2.value[0, 0] = 1000.0  # sigmoid rounds to exactly 1.0
    real = nm.constant(rng.normal(size=(4, 1)))
    fake = nm.constant(rng.normal(size=(4, 1)))
    d_loss, g_loss = gan_losses(real, fake, disc, 2, np.random.default_rng(0))
    assert np.isfinite(d_loss.value[0, 0])
    assert np.isfinite(g_loss.value[0, 0])


def test_sampling_contract(rng):
    with pytest.raises(ConfigError):
        sample_indices(rng, 5, 6)
    with pytest.raises(ConfigError):
        sample_indices(rng, 5, 0)
    idx_a = sample_indices(np.random.default_rng(7), 10, 6)
    idx_b = sample_indices(np.random.default_rng(7), 10, 6)
    assert np.array_equal(idx_a, idx_b)
    assert len(set(idx_a.tolist())) == 6  # without replacement


def test_d_step_gradients_reach_only_discriminator(rng):
    disc = make_disc(rng)
    real = nm.parameter(rng.normal(size=(6, 3)))
    fake = nm.parameter(rng.normal(size=(6, 3)))
    with nm.Tape() as tape:
        d_loss, _ = gan_losses_at(real, fake, disc, np.arange(3), np.arange(3))
    nm.backward(tape, d_loss)
    assert real.grad is None and fake.grad is None
    assert all(p.grad is not None and np.any(p.grad != 0.0)
               for p in (disc.wd1, disc.bd1, disc.wd2, disc.bd2))


def test_g_step_gradients_reach_only_generator_side(rng):
    disc = make_disc(rng)
    real = nm.parameter(rng.normal(size=(6, 3)))
    fake = nm.parameter(rng.normal(size=(6, 3)))
    with nm.Tape() as tape:
        _, g_loss = gan_losses_at(real, fake, disc, np.arange(3), np.arange(3))
    nm.backward(tape, g_loss)
    assert all(p.grad is None for p in (disc.wd1, disc.bd1, disc.wd2, disc.bd2))
    assert real.grad is None
    assert fake.grad is not None and np.any(fake.grad != 0.0)
    assert np.all(fake.grad[3:] == 0.0)  # only sampled rows participate


def test_saturating_switch_changes_generator_loss(rng):
    disc = make_disc(rng)
    real = nm.constant(rng.normal(size=(5, 3)))
    fake = nm.constant(rng.normal(size=(5, 3)))
    idx = np.arange(3)
    _, g_ns = gan_losses_at(real, fake, disc, idx, idx, saturating=False)
    _, g_sat = gan_losses_at(real, fake, disc, idx, idx, saturating=True)
    probs = discriminate(nm.gather_rows(fake, idx), disc).value
    assert g_ns.value[0, 0] == pytest.approx(float(-np.mean(np.log(probs))))
    assert g_sat.value[0, 0] == pytest.approx(float(np.mean(np.log1p(-probs))))


def test_gan_gradients_pass_finite_differences(rng):
    disc = make_disc(rng)
    real = nm.constant(rng.normal(size=(7, 3)))
    fake_source = nm.parameter(rng.normal(size=(7, 3)))
    ridx = np.array([0, 3, 5])
    fidx = np.array([1, 2, 6])

    def d_loss_fn():
        return gan_losses_at(real, fake_source, disc, ridx, fidx)[0]

    def g_loss_fn():
        return gan_losses_at(real, fake_source, disc, ridx, fidx)[1]

    disc_params = [disc.wd1, disc.bd1, disc.wd2, disc.bd2]
    with nm.Tape() as tape:
        loss = d_loss_fn()
    nm.backward(tape, loss)
    analytic = [p.grad.copy() for p in disc_params]
    nm.zero_grads(disc_params)
    numeric = nm.finite_difference(lambda: float(d_loss_fn().value[0, 0]), disc_params)
    for got, want in zip(analytic, numeric):
        assert nm.max_relative_error(got, want) < 1e-4

    with nm.Tape() as tape:
        loss = g_loss_fn()
    nm.backward(tape, loss)
    analytic = fake_source.grad.copy()
    nm.zero_grads([fake_source])
    numeric = nm.finite_difference(lambda: float(g_loss_fn().value[0, 0]),
                                   [fake_source])[0]
    assert nm.max_relative_error(analytic, numeric) < 1e-4
