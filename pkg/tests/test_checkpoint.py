"""Checkpoint container: exact round-trips for every model kind."""

import numpy as np
import pytest

from mage.attention import mage_forward, mage_init
from mage.augment import (
    AutoencoderConfig,
    VaeConfig,
    reconstruct,
    train_autoencoder,
    train_vae,
)
from mage.checkpoint import load_model, save_model
from mage.classifiers import SoftmaxModel, lstm_forward, lstm_init
from mage.data import MinMaxScaler, generate_synthetic
from mage.errors import ParseError, UsageError
from mage.rng import Rng


@pytest.fixture
def trained_ae(tmp_path):
    raw = generate_synthetic(3, 6, 20, 4.0, Rng(0)).vectors()
    scaler = MinMaxScaler.fit(raw)
    config = AutoencoderConfig(input_dim=6, latent_dim=3, hidden_dims=(5,), epochs=4, batch_size=16)
    model, _ = train_autoencoder(scaler.apply(raw), config, scaler, Rng(1))
    return model, raw


def test_autoencoder_round_trip_is_exact(trained_ae, tmp_path):
    model, raw = trained_ae
    path = tmp_path / "ae.ckpt"
    save_model(model, path)
    loaded = load_model(path)
    np.testing.assert_array_equal(reconstruct(loaded, raw), reconstruct(model, raw))
    for name in model.net.params:
        np.testing.assert_array_equal(loaded.net.params[name], model.net.params[name])
    for name in model.net.stats:
        np.testing.assert_array_equal(loaded.net.stats[name], model.net.stats[name])


def test_vae_round_trip_is_exact(tmp_path):
    raw = generate_synthetic(3, 6, 20, 4.0, Rng(2)).vectors()
    scaler = MinMaxScaler.fit(raw)
    config = VaeConfig(input_dim=6, latent_dim=2, hidden_dim=5, epochs=4, batch_size=16)
    model, _ = train_vae(scaler.apply(raw), config, scaler, Rng(3))
    path = tmp_path / "vae.ckpt"
    save_model(model, path)
    loaded = load_model(path)
    np.testing.assert_array_equal(reconstruct(loaded, raw), reconstruct(model, raw))


def test_attention_round_trip_is_exact(tmp_path):
    params = mage_init(2, 8, Rng(4), temperature=1.5)
    path = tmp_path / "mage.ckpt"
    save_model(params, path)
    loaded = load_model(path)
    views = Rng(5).normal((3, 2, 8))
    out1, _, _ = mage_forward(params, views)
    out2, _, _ = mage_forward(loaded, views)
    np.testing.assert_array_equal(out1, out2)
    assert loaded.temperature == 1.5


def test_lstm_round_trip_is_exact(tmp_path):
    params = lstm_init(5, 4, 3, Rng(6))
    path = tmp_path / "lstm.ckpt"
    save_model(params, path)
    loaded = load_model(path)
    seqs = Rng(7).normal((2, 3, 5))
    logits1, _, _ = lstm_forward(params, seqs)
    logits2, _, _ = lstm_forward(loaded, seqs)
    np.testing.assert_array_equal(logits1, logits2)


def test_softmax_round_trip_is_exact(tmp_path):
    model = SoftmaxModel(weights=Rng(8).normal((3, 7)), bias=Rng(9).normal(3), l2=0.01)
    path = tmp_path / "softmax.ckpt"
    save_model(model, path)
    loaded = load_model(path)
    np.testing.assert_array_equal(loaded.weights, model.weights)
    np.testing.assert_array_equal(loaded.bias, model.bias)
    assert loaded.l2 == 0.01


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ParseError):
        load_model(path)


def test_unknown_model_rejected(tmp_path):
    with pytest.raises(UsageError):
        save_model(object(), tmp_path / "x.ckpt")
