"""LSTM popularity forecaster.

Maps the sliding window of recent viewpoint requests to a probability
vector over all viewpoints for the next slot. Trained offline against the
simulator's ground-truth popularity (available only during pre-training);
at service time the frozen model only ever sees requests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Adam, Dense, Dropout, LstmLayer, mse_loss
from .tiling import TileGrid, fov_tiles, viewpoint_count


@dataclass(frozen=True)
class PredictorConfig:
    window: int = 20          # T_r, slots per input sequence
    lstm_hidden: int = 64
    learning_rate: float = 1e-5
    dropout: float = 0.35
    batch_size: int = 32      # X
    epochs: int = 30

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning_rate, batch_size, epochs must be positive")


def encode_request(grid: TileGrid, k: int) -> np.ndarray:
    """Binary tile-membership vector (length N) of viewpoint k's FoV."""
    vec = np.zeros(grid.n_tiles, dtype=np.float64)
    for tile in fov_tiles(grid, k):
        vec[tile - 1] = 1.0
    return vec


def encoding_matrix(grid: TileGrid) -> np.ndarray:
    """Row k-1 is encode_request(grid, k); shape (K, N)."""
    return np.stack([encode_request(grid, k)
                     for k in range(1, viewpoint_count(grid) + 1)])


@dataclass(frozen=True)
class PredictorSample:
    """One training pair: a request window and the next slot's true pmf."""

    requests: tuple
    label: np.ndarray


def build_dataset(trace, window: int) -> list:
    """Sliding-window samples from a trace of (request, true pmf) pairs.

    The window ending at slot t is labelled with the pmf of slot t+1, so a
    trace of length L yields L - window samples.
    """
    if len(trace) <= window:
        raise ValueError(f"trace of length {len(trace)} is too short for "
                         f"window {window}")
    requests = [k for k, _ in trace]
    samples = []
    for end in range(window - 1, len(trace) - 1):
        win = tuple(requests[end - window + 1:end + 1])
        samples.append(PredictorSample(win, np.asarray(trace[end + 1][1])))
    return samples


class PopularityPredictor:
    """Two LSTM layers plus a softmax dense head over the viewpoint space."""

    def __init__(self, grid: TileGrid, cfg: PredictorConfig = PredictorConfig(),
                 seed: int = 0):
        self.grid = grid
        self.cfg = cfg
        self.n_viewpoints = viewpoint_count(grid)
        init_rng, drop1_rng, drop2_rng, self._shuffle_rng = [
            np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
        h = cfg.lstm_hidden
        self.lstm1 = LstmLayer(grid.n_tiles, h, init_rng)
        self.drop1 = Dropout(cfg.dropout, drop1_rng)
        self.lstm2 = LstmLayer(h, h, init_rng)
        self.drop2 = Dropout(cfg.dropout, drop2_rng)
        self.head = Dense(h, self.n_viewpoints, "softmax", init_rng)
        self._encodings = encoding_matrix(grid)

    # -- inference -------------------------------------------------------

    def encode_windows(self, windows) -> np.ndarray:
        """(batch, T_r, N) input tensor from an iterable of request windows."""
        idx = np.asarray(windows, dtype=np.intp) - 1
        if idx.ndim != 2 or idx.shape[1] != self.cfg.window:
            raise ValueError(f"each window must hold {self.cfg.window} requests")
        return self._encodings[idx]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        h1 = self.drop1.forward(self.lstm1.forward(x, training), training)
        h2 = self.drop2.forward(self.lstm2.forward(h1, training), training)
        self._h2_shape = h2.shape
        return self.head.forward(h2[:, -1, :], training)

    def predict(self, window) -> np.ndarray:
        """Popularity forecast for the slot after the window's last request."""
        if len(window) != self.cfg.window:
            raise ValueError(f"recorder window must be full ({self.cfg.window} "
                             f"requests), got {len(window)}")
        return self.forward(self.encode_windows([window]))[0]

    # -- training ----------------------------------------------------------

    def backward(self, grad_out: np.ndarray) -> None:
        grad_last = self.head.backward(grad_out)
        grad_h2 = np.zeros(self._h2_shape)
        grad_h2[:, -1, :] = grad_last
        grad_h1 = self.lstm2.backward(self.drop2.backward(grad_h2))
        self.lstm1.backward(self.drop1.backward(grad_h1))

    def params(self):
        return (self.lstm1.params() + self.lstm2.params() + self.head.params())

    def grads(self):
        return (self.lstm1.grads() + self.lstm2.grads() + self.head.grads())

    def parameter_arrays(self) -> dict:
        names = ["lstm1.w", "lstm1.u", "lstm1.b", "lstm2.w", "lstm2.u", "lstm2.b",
                 "head.w", "head.b"]
        return dict(zip(names, self.params()))

    def load_parameter_arrays(self, arrays: dict) -> None:
        for name, param in self.parameter_arrays().items():
            param[...] = arrays[name]


def train_predictor(model: PopularityPredictor, dataset: list,
                    cfg: PredictorConfig = None):
    """Minimize the batch-mean MSE with Adam; returns (model, per-epoch losses)."""
    if not dataset:
        raise ValueError("dataset is empty")
    cfg = cfg or model.cfg
    optimizer = Adam(model.params(), cfg.learning_rate)
    windows = np.asarray([s.requests for s in dataset], dtype=np.intp)
    labels = np.stack([s.label for s in dataset])
    n = len(dataset)
    losses = []
    for _ in range(cfg.epochs):
        order = model._shuffle_rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            x = model._encodings[windows[sel] - 1]
            pred = model.forward(x, training=True)
            loss, grad = mse_loss(pred, labels[sel])
            model.backward(grad)
            optimizer.step(model.grads())
            epoch_loss += loss
            batches += 1
        losses.append(epoch_loss / batches)
    return model, losses
