import numpy as np
import pytest

from segfeat.autodiff import Tape
from segfeat.features import FeatureConfig
from segfeat.model import ModelConfig, SegmentalModel, context_from_hidden


def small_model(input_dim=8, hidden=4, layers=2, seed=3, inventory=(), with_bin=False,
                **kwargs):
    cfg = ModelConfig(input_dim=input_dim, hidden_size=hidden, num_layers=layers,
                      seed=seed, inventory=inventory, with_bin=with_bin, **kwargs)
    return SegmentalModel(cfg, FeatureConfig())


def random_context(model, n_frames, rng, scale=2.0):
    """Context with injected random hidden states: a random score instance."""
    hidden = rng.normal(size=(n_frames, 2 * model.cfg.hidden_size)) * scale
    tape = Tape()
    return context_from_hidden(tape, model, tape.tensor(hidden))


@pytest.fixture
def toy_model():
    """Hand-crafted scorer: u(t) = 1 everywhere; with hidden rows fixed at
    (1, 0), bigram spans of length 1 score 0 and the length-2 span scores 0.5."""
    model = small_model(input_dim=2, hidden=1, layers=1, seed=0)
    params = model.params
    for name in params.names():
        params[name].value[:] = 0.0
    params["unary.2.b"].value[:] = 1.0
    w = 0.5 / (np.tanh(2.0) - np.tanh(1.0))
    params["bigram.1.w"].value[:] = np.array([[1.0], [0.0]])
    params["bigram.2.w"].value[:] = np.array([[w]])
    params["bigram.2.b"].value[:] = -w * np.tanh(1.0)
    return model


def toy_context(model, n_frames=2):
    tape = Tape()
    hidden = tape.tensor(np.tile([1.0, 0.0], (n_frames, 1)))
    return context_from_hidden(tape, model, hidden)
