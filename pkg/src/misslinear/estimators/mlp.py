"""One-hidden-layer ReLU network on (zero-imputed features, mask) inputs.

Training uses mini-batch Adam with decoupled weight decay; the decay strength
is chosen on a held-out validation split and the parameters giving the best
validation loss are kept. Weights live in plain arrays so models serialize to
JSON and so :func:`construct_bayes_mlp` can write an exact network directly:
under a full per-pattern coefficient table, one hidden unit per pattern can be
wired so that exactly that unit fires for inputs carrying its pattern and the
network output reproduces the table's linear form on every in-support row.
"""

from __future__ import annotations

import numpy as np

from ..bayes import ExpandedBayesCoefficients
from ..errors import NonFiniteLoss, UnboundedSupport
from ..rng import derive_rng
from .base import MaskedRegressor, Standardizer

DEFAULT_DECAY_GRID = (1e-1, 1e-2, 1e-4)
DEFAULT_BATCH_SIZE = 200


def mlp_param_count(d: int, hidden_width: int) -> int:
    """Parameters of the 2d-input, one-hidden-layer architecture."""
    if d < 1 or hidden_width < 1:
        raise ValueError("d and hidden_width must be >= 1")
    return 2 * (d + 1) * hidden_width + 1


def _relu(a):
    return np.maximum(a, 0.0)


class _AdamState:
    """Adam moments for one parameter array."""

    def __init__(self, shape):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)

    def step(self, grad, t, lr, beta1, beta2, eps=1e-8):
        self.m = beta1 * self.m + (1.0 - beta1) * grad
        self.v = beta2 * self.v + (1.0 - beta2) * grad**2
        mhat = self.m / (1.0 - beta1**t)
        vhat = self.v / (1.0 - beta2**t)
        return lr * mhat / (np.sqrt(vhat) + eps)


class MLPRegressor(MaskedRegressor):
    """ReLU network trained with Adam and decoupled weight decay.

    Parameters
    ----------
    hidden_width : hidden units.
    decay_grid : weight-decay values tried on the validation split.
    epochs : full passes over the training part.
    batch_size : mini-batch size.
    learning_rate, betas : Adam settings.
    val_fraction : share of the training data held out for decay selection
        and best-snapshot tracking.
    random_state : seed for the split, initialization and batch order.
    """

    def __init__(
        self,
        hidden_width=8,
        decay_grid=DEFAULT_DECAY_GRID,
        epochs=300,
        batch_size=DEFAULT_BATCH_SIZE,
        learning_rate=1e-3,
        betas=(0.9, 0.999),
        val_fraction=0.1,
        random_state=0,
    ):
        self.hidden_width = hidden_width
        self.decay_grid = tuple(decay_grid)
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.betas = betas
        self.val_fraction = val_fraction
        self.random_state = random_state

    # -- training ---------------------------------------------------------

    def _forward(self, inputs, w1, b1, w2, b2):
        hidden = _relu(inputs @ w1.T + b1)
        return hidden @ w2 + b2, hidden

    def _train_one(self, inputs, y, train_idx, val_idx, decay, rng):
        # overflow during divergence is detected via the explicit loss check
        with np.errstate(over="ignore", invalid="ignore"):
            return self._train_one_inner(inputs, y, train_idx, val_idx, decay, rng)

    def _train_one_inner(self, inputs, y, train_idx, val_idx, decay, rng):
        n_h = self.hidden_width
        n_in = inputs.shape[1]
        bound1 = 1.0 / np.sqrt(n_in)
        bound2 = 1.0 / np.sqrt(n_h)
        w1 = rng.uniform(-bound1, bound1, size=(n_h, n_in))
        b1 = rng.uniform(-bound1, bound1, size=n_h)
        w2 = rng.uniform(-bound2, bound2, size=n_h)
        b2 = float(rng.uniform(-bound2, bound2))

        states = {k: _AdamState(p.shape) for k, p in
                  (("w1", w1), ("b1", b1), ("w2", w2))}
        states["b2"] = _AdamState(())
        beta1, beta2 = self.betas
        lr = self.learning_rate
        t = 0
        best = None
        best_val = np.inf
        batch = max(1, min(self.batch_size, train_idx.size))
        for _ in range(self.epochs):
            order = rng.permutation(train_idx)
            for start in range(0, order.size, batch):
                rows = order[start : start + batch]
                xb, yb = inputs[rows], y[rows]
                pred, hidden = self._forward(xb, w1, b1, w2, b2)
                err = pred - yb
                loss = float(np.mean(err**2))
                if not np.isfinite(loss):
                    raise NonFiniteLoss(
                        f"training loss became {loss!r}; lower the learning rate"
                    )
                t += 1
                dpred = (2.0 / rows.size) * err
                gw2 = hidden.T @ dpred
                gb2 = dpred.sum()
                dhidden = np.outer(dpred, w2)
                dhidden[hidden <= 0.0] = 0.0
                gw1 = dhidden.T @ xb
                gb1 = dhidden.sum(axis=0)
                w1 -= states["w1"].step(gw1, t, lr, beta1, beta2) + lr * decay * w1
                b1 -= states["b1"].step(gb1, t, lr, beta1, beta2)
                w2 -= states["w2"].step(gw2, t, lr, beta1, beta2) + lr * decay * w2
                b2 -= states["b2"].step(gb2, t, lr, beta1, beta2)
            val_pred, _ = self._forward(inputs[val_idx], w1, b1, w2, b2)
            val_loss = float(np.mean((val_pred - y[val_idx]) ** 2))
            if not np.isfinite(val_loss):
                raise NonFiniteLoss("validation loss became non-finite")
            if val_loss < best_val:
                best_val = val_loss
                best = (w1.copy(), b1.copy(), w2.copy(), float(b2))
        return best, best_val

    def _fit(self, masked, y):
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")
        self.standardizer_ = Standardizer.fit(masked)
        inputs = np.hstack(
            [self.standardizer_.transform(masked), masked.mask.astype(np.float64)]
        )
        rng = derive_rng(self.random_state, "mlp-split")
        perm = rng.permutation(masked.n)
        n_val = max(1, int(round(self.val_fraction * masked.n)))
        n_val = min(n_val, masked.n - 1)
        val_idx, train_idx = perm[:n_val], perm[n_val:]

        best_overall = None
        best_val = np.inf
        best_decay = None
        for decay in self.decay_grid:
            child = derive_rng(self.random_state, "mlp-train", repr(float(decay)))
            params, val_loss = self._train_one(
                inputs, y, train_idx, val_idx, float(decay), child
            )
            if val_loss < best_val:
                best_val = val_loss
                best_overall = params
                best_decay = float(decay)
        w1, b1, w2, b2 = best_overall
        self.input_weights_ = w1
        self.input_bias_ = b1
        self.output_weights_ = w2
        self.output_bias_ = b2
        self.weight_decay_ = best_decay
        self.val_loss_ = best_val

    # -- prediction and construction --------------------------------------

    def _inputs(self, masked):
        return np.hstack(
            [self.standardizer_.transform(masked), masked.mask.astype(np.float64)]
        )

    def _predict(self, masked):
        pred, _ = self._forward(
            self._inputs(masked),
            self.input_weights_,
            self.input_bias_,
            self.output_weights_,
            self.output_bias_,
        )
        return pred

    def hidden_preactivations(self, z) -> np.ndarray:
        """Pre-ReLU hidden activations, exposed for activation audits."""
        self._check_fitted()
        from ..data import as_masked

        masked = as_masked(z)
        return self._inputs(masked) @ self.input_weights_.T + self.input_bias_

    @classmethod
    def from_weights(
        cls, input_weights, input_bias, output_weights, output_bias,
        standardizer=None, weight_decay=0.0,
    ) -> "MLPRegressor":
        """Build a ready-to-predict network from explicit weights."""
        w1 = np.asarray(input_weights, dtype=np.float64)
        n_h, n_in = w1.shape
        if n_in % 2 != 0:
            raise ValueError("input width must be 2d (features then mask)")
        d = n_in // 2
        est = cls(hidden_width=n_h)
        est.n_features_in_ = d
        est.standardizer_ = standardizer or Standardizer.identity(d)
        est.input_weights_ = w1
        est.input_bias_ = np.asarray(input_bias, dtype=np.float64)
        est.output_weights_ = np.asarray(output_weights, dtype=np.float64)
        est.output_bias_ = float(output_bias)
        est.weight_decay_ = float(weight_decay)
        return est

    def describe(self) -> str:
        return f"mlp_w{self.hidden_width}"

    def num_params(self) -> int:
        return mlp_param_count(self.n_features_in_, self.hidden_width)


def construct_bayes_mlp(coeffs: ExpandedBayesCoefficients, support_bound) -> MLPRegressor:
    """Wire a 2**d-unit network that reproduces the per-pattern linear form.

    Requires a coefficient entry for every pattern and a finite bound
    ``support_bound`` on the absolute feature values. Unit k is dedicated to
    pattern code k: its feature weights are the pattern's slopes rescaled to
    unit max magnitude (the output weight absorbs the scale), its mask weights
    take a large positive value on the pattern's missing coordinates and a
    large negative one elsewhere, and the shared output bias is chosen
    negative enough that every unit's activation margin stays at least 1/2.
    On any input with |x_j| <= support_bound exactly one hidden unit has a
    positive pre-activation: the one indexed by the input's pattern.
    """
    if not np.isfinite(support_bound) or support_bound <= 0:
        raise UnboundedSupport("a finite positive support bound is required")
    d = coeffs.dim
    size = 1 << d
    if len(coeffs.table) != size:
        raise ValueError(
            f"coefficient table covers {len(coeffs.table)} of {size} patterns"
        )
    wx = np.zeros((size, d))
    w2 = np.empty(size)
    alpha = np.empty(size)
    n_obs = np.empty(size)
    kk = np.empty(size)
    for code in range(size):
        delta0, delta = coeffs.table[code]
        bits = (code >> np.arange(d)) & 1
        obs = np.flatnonzero(bits == 0)
        mis = np.flatnonzero(bits == 1)
        wmax = np.abs(delta).max() if delta.size else 0.0
        if wmax > 0:
            # slopes normalized to unit max magnitude; output weight absorbs it
            wx[code, obs] = delta / wmax
            wx[code, mis] = 1.0
            w2[code] = wmax
            kk[code] = support_bound
        else:
            w2[code] = 1.0
            kk[code] = 0.0
        alpha[code] = delta0
        n_obs[code] = obs.size

    b2 = float(np.min(alpha - w2 * (n_obs * kk + 0.5)))
    eps = 2.0 * ((alpha - b2) / w2 - n_obs * kk)
    i1 = (1.0 + 2.0 * n_obs) * kk + eps
    i2 = (1.0 - 2.0 * n_obs) * kk - eps
    n_mis = d - n_obs
    b1 = n_obs * kk - n_mis * i1 + 0.5 * eps

    wm = np.empty((size, d))
    for code in range(size):
        bits = (code >> np.arange(d)) & 1
        wm[code] = np.where(bits == 1, i1[code], i2[code])

    return MLPRegressor.from_weights(
        input_weights=np.hstack([wx, wm]),
        input_bias=b1,
        output_weights=w2,
        output_bias=b2,
    )
