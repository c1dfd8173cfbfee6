"""Feed-forward autoencoders: unrolling, backprop fine-tuning, CG baseline.

Layer weights are stored ``(out, in)`` so a layer computes
``act(x @ W.T + b)`` on a row batch, matching the RBM layout where the
encoder half of an unrolled stack reuses ``W`` as is.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import line_search
from scipy.optimize._linesearch import LineSearchWarning

from .activations import sigmoid
from .errors import DimensionChainBroken, DimensionMismatch, Divergence
from .rbm import Rbm

SIGMOID = "sigmoid"
LINEAR = "linear"
DEEP_AE = "deep_ae"
MLP_AE = "mlp_ae"

SGD_MOMENTUM = "sgd_momentum"
CONJUGATE_GRADIENT = "conjugate_gradient"


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray   # (out,)
    activation: str = SIGMOID

    def __post_init__(self):
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DimensionMismatch(
                f"weights {self.weights.shape} incompatible with biases {self.biases.shape}"
            )
        if self.activation not in (SIGMOID, LINEAR):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        pre = x @ self.weights.T + self.biases
        return sigmoid(pre) if self.activation == SIGMOID else pre


@dataclass(frozen=True)
class Network:
    layers: tuple
    kind: str = DEEP_AE

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for lower, upper in zip(self.layers[:-1], self.layers[1:]):
            if lower.n_out != upper.n_in:
                raise DimensionChainBroken(f"layer of width {lower.n_out} feeds one expecting {upper.n_in}")
        if self.layers[0].n_in != self.layers[-1].n_out:
            raise DimensionMismatch(
                f"an autoencoder maps width {self.layers[0].n_in} back to itself, not to {self.layers[-1].n_out}"
            )

    @property
    def architecture(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def input_width(self) -> int:
        return self.layers[0].n_in

    @property
    def output_width(self) -> int:
        return self.layers[-1].n_out

    @property
    def n_params(self) -> int:
        return sum(layer.weights.size + layer.biases.size for layer in self.layers)


@dataclass(frozen=True)
class FineTuneConfig:
    epochs: int = 1000
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    optimizer: str = SGD_MOMENTUM

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.optimizer == SGD_MOMENTUM and self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.optimizer not in (SGD_MOMENTUM, CONJUGATE_GRADIENT):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


# -- parameter vectors ---------------------------------------------------------

def get_params(net: Network) -> np.ndarray:
    return np.concatenate([np.concatenate([l.weights.ravel(), l.biases]) for l in net.layers])


def set_params(net: Network, theta: np.ndarray) -> Network:
    layers, pos = [], 0
    for layer in net.layers:
        nw, nb = layer.weights.size, layer.biases.size
        w = theta[pos:pos + nw].reshape(layer.weights.shape).copy()
        b = theta[pos + nw:pos + nw + nb].copy()
        layers.append(Layer(w, b, layer.activation))
        pos += nw + nb
    if pos != theta.size:
        raise DimensionMismatch(f"parameter vector has {theta.size} entries, network needs {pos}")
    return Network(layers, net.kind)


def flatten_grads(grads) -> np.ndarray:
    return np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])


# -- forward / loss / backward ------------------------------------------------------

def forward(net: Network, x) -> list[np.ndarray]:
    """Activations of every layer in order; the last one is the reconstruction."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape[-1] != net.input_width:
        raise DimensionMismatch(f"input width {a.shape[-1]}, network expects {net.input_width}")
    acts = []
    for layer in net.layers:
        a = layer.apply(a)
        acts.append(a)
    return acts


def reconstruct(net: Network, x) -> np.ndarray:
    return forward(net, x)[-1]


def mse_loss(net: Network, batch) -> float:
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    return float(np.mean((batch - reconstruct(net, batch)) ** 2))


def backprop(net: Network, batch) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact gradient of :func:`mse_loss`; one ``(dW, db)`` pair per layer."""
    return _loss_and_grads(net, batch)[1]


def _loss_and_grads(net: Network, batch):
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    acts = forward(net, x)
    z = acts[-1]
    if z.shape != x.shape:
        raise DimensionMismatch("network output does not match its input shape")
    diff = z - x
    loss = float(np.mean(diff ** 2))
    delta = 2.0 * diff / diff.size  # dL/dz
    grads = []
    inputs = [x] + acts[:-1]
    for layer, a_in, a_out in zip(reversed(net.layers), reversed(inputs), reversed(acts)):
        if layer.activation == SIGMOID:
            delta = delta * a_out * (1.0 - a_out)
        grads.append((delta.T @ a_in, delta.sum(axis=0)))
        delta = delta @ layer.weights
    grads.reverse()
    return loss, grads


# -- construction ----------------------------------------------------------------

def unroll(stack) -> Network:
    """Encoder from the RBM stack, decoder from the transposed stack in reverse.

    The decoder receives copies, so the two halves are free to diverge
    during fine-tuning.
    """
    stack = list(stack)
    if not stack:
        raise ValueError("empty RBM stack")
    for lower, upper in zip(stack[:-1], stack[1:]):
        if lower.n != upper.m:
            raise DimensionChainBroken(f"RBM with {lower.n} hidden units feeds one with {upper.m} visible")
    encoder = [Layer(rbm.W.copy(), rbm.c.copy()) for rbm in stack]
    decoder = [Layer(rbm.W.T.copy(), rbm.b.copy()) for rbm in reversed(stack)]
    return Network(encoder + decoder, DEEP_AE)


def build_mlp_ae(input_width: int, hidden_width: int, seed: int = 0) -> Network:
    if input_width <= 0 or hidden_width <= 0:
        raise ValueError("widths must be positive")
    rng = np.random.default_rng(seed)

    def init(n_out, n_in):
        r = np.sqrt(6.0 / (n_in + n_out))
        return Layer(rng.uniform(-r, r, (n_out, n_in)), np.zeros(n_out))

    return Network([init(hidden_width, input_width), init(input_width, hidden_width)], MLP_AE)


# -- training ---------------------------------------------------------------------

def fine_tune(net: Network, batches, config: FineTuneConfig = FineTuneConfig(), callback=None) -> Network:
    """Mini-batch gradient descent with momentum on the reconstruction MSE.

    The batch order is reshuffled each epoch from ``config.seed``.
    ``callback(epoch, mean_batch_loss)`` receives the average of the
    pre-update losses seen during the epoch.
    """
    if config.optimizer == CONJUGATE_GRADIENT:
        return train_conjugate_gradient(net, np.vstack(batches), config.epochs, callback=callback)
    batches = [np.asarray(batch, dtype=np.float64) for batch in batches]
    rng = np.random.default_rng(config.seed)
    params = [[l.weights.copy(), l.biases.copy()] for l in net.layers]
    velocity = [[np.zeros_like(w), np.zeros_like(b)] for w, b in params]
    acts = [l.activation for l in net.layers]

    def current():
        return Network([Layer(w, b, a) for (w, b), a in zip(params, acts)], net.kind)

    for epoch in range(config.epochs):
        total = 0.0
        for idx in rng.permutation(len(batches)):
            loss, grads = _loss_and_grads(current(), batches[idx])
            if not np.isfinite(loss):
                raise Divergence(f"loss became {loss} in epoch {epoch}")
            total += loss
            for p, v, g in zip(params, velocity, grads):
                for k in range(2):
                    v[k] *= config.momentum
                    v[k] -= config.learning_rate * g[k]
                    p[k] += v[k]
        if callback is not None:
            callback(epoch, total / len(batches))
    return current()


def train_conjugate_gradient(net: Network, data, epochs: int, callback=None,
                             restart_every: int | None = None) -> Network:
    """Full-batch nonlinear conjugate gradient (Polak-Ribiere+).

    One epoch is one line-searched CG step over the whole data set. The
    direction restarts to steepest descent every ``restart_every`` steps
    (default: the parameter count) and whenever it stops being a descent
    direction. If the Wolfe line search fails, a backtracking step along
    the negative gradient is taken instead.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    p = restart_every or net.n_params

    cache = {}

    def fg(theta):
        key = theta.tobytes()
        if key not in cache:
            loss, grads = _loss_and_grads(set_params(net, theta), data)
            cache.clear()
            cache[key] = (loss, flatten_grads(grads))
        return cache[key]

    def f(theta):
        return fg(theta)[0]

    theta = get_params(net)
    loss, g = fg(theta)
    direction = -g
    since_restart = 0
    for epoch in range(epochs):
        if not np.isfinite(loss):
            raise Divergence(f"loss became {loss} in epoch {epoch}")
        if not g.any():
            break
        if g @ direction >= 0 or since_restart >= p:
            direction = -g
            since_restart = 0
        # unit-length search direction keeps the line search's step scale meaningful
        unit = direction / np.linalg.norm(direction)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LineSearchWarning)
            step = line_search(f, lambda t: fg(t)[1], theta, unit, gfk=g, old_fval=loss,
                               c2=0.1, maxiter=30)[0]
        if step is None:
            direction = -g
            since_restart = 0
            unit = direction / np.linalg.norm(direction)
            step = _backtrack(f, theta, unit, loss, g)
            if step is None:
                break
        theta = theta + step * unit
        new_loss, new_g = fg(theta)
        beta = max(0.0, new_g @ (new_g - g) / (g @ g))
        direction = -new_g + beta * direction
        loss, g = new_loss, new_g
        since_restart += 1
        if callback is not None:
            callback(epoch, loss)
    return set_params(net, theta)


def _backtrack(f, theta, direction, loss, g, shrink=0.5, tries=60):
    slope = g @ direction
    step = 1.0
    for _ in range(tries):
        if f(theta + step * direction) <= loss + 1e-4 * step * slope:
            return step
        step *= shrink
    return None
