"""Restricted Boltzmann machines trained with contrastive divergence.

Conventions: ``W`` has shape ``(n_hidden, n_visible)``, ``b`` holds the
visible biases and ``c`` the hidden biases, so the energy reads
``-h.W.v - b.v - c.h``. Visible values in [0, 1] are treated as Bernoulli
probabilities.

The ``exact_*`` functions enumerate every binary joint state. They are
oracles for tiny machines and are deliberately written without the
factorized conditionals they are used to check.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .activations import sigmoid
from .errors import DimensionMismatch, TooLargeToEnumerate

MAX_ENUMERATION_UNITS = 24


@dataclass(frozen=True)
class Rbm:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        n, m = self.W.shape
        if self.b.shape != (m,) or self.c.shape != (n,):
            raise DimensionMismatch(
                f"W {self.W.shape} incompatible with b {self.b.shape}, c {self.c.shape}"
            )
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.c))):
            raise ValueError("RBM parameters must be finite")

    @property
    def m(self) -> int:
        return self.W.shape[1]

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @classmethod
    def zeros(cls, visible: int, hidden: int) -> "Rbm":
        return cls(np.zeros((hidden, visible)), np.zeros(visible), np.zeros(hidden))

    @classmethod
    def random(cls, visible: int, hidden: int, rng, std: float = 0.01) -> "Rbm":
        return cls(std * rng.standard_normal((hidden, visible)), np.zeros(visible), np.zeros(hidden))


@dataclass(frozen=True)
class RbmGradient:
    dW: np.ndarray
    db: np.ndarray
    dc: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dW.ravel(), self.db, self.dc])


@dataclass(frozen=True)
class CdConfig:
    epochs: int = 50
    learning_rate: float = 0.1
    momentum_initial: float = 0.5
    momentum_final: float = 0.9
    momentum_switch_epoch: int = 5
    weight_cost: float = 0.0002
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.k < 1:
            raise ValueError("epochs must be >= 0 and k >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        for mu in (self.momentum_initial, self.momentum_final):
            if not 0.0 <= mu < 1.0:
                raise ValueError(f"momentum {mu} outside [0, 1)")
        if self.weight_cost < 0:
            raise ValueError("weight_cost must be non-negative")


def _check_width(x: np.ndarray, width: int, what: str):
    if x.shape[-1] != width:
        raise DimensionMismatch(f"{what} has width {x.shape[-1]}, expected {width}")


def energy(rbm: Rbm, v, h) -> float:
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    _check_width(v, rbm.m, "v")
    _check_width(h, rbm.n, "h")
    return -(h @ rbm.W @ v) - rbm.b @ v - rbm.c @ h


def prob_hidden_given_visible(rbm: Rbm, v) -> np.ndarray:
    """p(h_i = 1 | v) for each hidden unit; ``v`` may be a vector or a row batch."""
    v = np.asarray(v, dtype=np.float64)
    _check_width(v, rbm.m, "v")
    return sigmoid(v @ rbm.W.T + rbm.c)


def prob_visible_given_hidden(rbm: Rbm, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    _check_width(h, rbm.n, "h")
    return sigmoid(h @ rbm.W + rbm.b)


def _bernoulli(p: np.ndarray, rng) -> np.ndarray:
    return (rng.random(p.shape) < p).astype(np.float64)


def gibbs_chain(rbm: Rbm, v0, k: int, rng):
    """Run ``k`` alternating Gibbs steps from ``v0``.

    Hidden states are always sampled. Intermediate visible states are
    sampled too, but the returned ``vk`` is the conditional mean of the
    last step. Returns ``(vk, h0probs, hkprobs)``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    v = np.asarray(v0, dtype=np.float64)
    h0probs = prob_hidden_given_visible(rbm, v)
    hprobs = h0probs
    for step in range(k):
        h = _bernoulli(hprobs, rng)
        vprobs = prob_visible_given_hidden(rbm, h)
        v = vprobs if step == k - 1 else _bernoulli(vprobs, rng)
        hprobs = prob_hidden_given_visible(rbm, v)
    return v, h0probs, hprobs


def cd_k_gradient(rbm: Rbm, v0, k: int, rng) -> RbmGradient:
    """CD-k estimate of the log-likelihood ascent direction.

    A 2-D ``v0`` is treated as a batch and the statistics are averaged
    over its rows.
    """
    v0 = np.asarray(v0, dtype=np.float64)
    vk, h0, hk = gibbs_chain(rbm, v0, k, rng)
    if v0.ndim == 1:
        return RbmGradient(np.outer(h0, v0) - np.outer(hk, vk), v0 - vk, h0 - hk)
    rows = v0.shape[0]
    dW = (h0.T @ v0 - hk.T @ vk) / rows
    return RbmGradient(dW, (v0 - vk).mean(axis=0), (h0 - hk).mean(axis=0))


# -- exact enumeration oracles ---------------------------------------------

def binary_states(width: int) -> np.ndarray:
    """All 2**width binary vectors, one per row."""
    codes = np.arange(2 ** width)
    return ((codes[:, None] >> np.arange(width)) & 1).astype(np.float64)


def _guard(rbm: Rbm):
    if rbm.m + rbm.n > MAX_ENUMERATION_UNITS:
        raise TooLargeToEnumerate(
            f"{rbm.m}+{rbm.n} units exceed the enumeration limit of {MAX_ENUMERATION_UNITS}"
        )


def _joint_blocks(rbm: Rbm, block: int = 4096):
    """Yield (V, H, negative energies) over visible-state blocks."""
    _guard(rbm)
    H = binary_states(rbm.n)
    V_all = binary_states(rbm.m)
    for start in range(0, V_all.shape[0], block):
        V = V_all[start:start + block]
        neg_e = V @ rbm.W.T @ H.T + (V @ rbm.b)[:, None] + (H @ rbm.c)[None, :]
        yield V, H, neg_e


def _logsumexp(a) -> float:
    a = np.asarray(a)
    top = a.max()
    return float(top + np.log(np.exp(a - top).sum()))


def exact_log_partition(rbm: Rbm) -> float:
    parts = [_logsumexp(neg_e) for _, _, neg_e in _joint_blocks(rbm)]
    return _logsumexp(parts)


def exact_partition(rbm: Rbm) -> float:
    return float(np.exp(exact_log_partition(rbm)))


def exact_log_likelihood(rbm: Rbm, v0) -> float:
    """log p(v0), marginalizing h by enumeration."""
    _guard(rbm)
    v0 = np.asarray(v0, dtype=np.float64)
    H = binary_states(rbm.n)
    neg_e = H @ rbm.W @ v0 + rbm.b @ v0 + H @ rbm.c
    return _logsumexp(neg_e) - exact_log_partition(rbm)


def exact_gradient(rbm: Rbm, v0) -> RbmGradient:
    """Gradient of log p(v0): data expectation minus model expectation."""
    _guard(rbm)
    v0 = np.asarray(v0, dtype=np.float64)
    H = binary_states(rbm.n)
    neg_e = H @ rbm.W @ v0 + rbm.b @ v0 + H @ rbm.c
    post = np.exp(neg_e - neg_e.max())
    post /= post.sum()
    eh_data = post @ H

    log_z = exact_log_partition(rbm)
    e_hv = np.zeros_like(rbm.W)
    e_v = np.zeros(rbm.m)
    e_h = np.zeros(rbm.n)
    for V, H, neg_e in _joint_blocks(rbm):
        p = np.exp(neg_e - log_z)  # p[v, h]
        e_hv += H.T @ p.T @ V
        e_v += p.sum(axis=1) @ V
        e_h += p.sum(axis=0) @ H
    return RbmGradient(np.outer(eh_data, v0) - e_hv, v0 - e_v, eh_data - e_h)


# -- training ------------------------------------------------------------------

def train_rbm(batches, visible: int, hidden: int, config: CdConfig = CdConfig(),
              initial: Rbm | None = None, callback=None) -> Rbm:
    """Train one RBM with mini-batch CD-k, momentum and L2 weight cost.

    Parameters are updated after every batch. With ``initial`` given,
    training starts from it instead of a fresh Gaussian initialization
    (and the random stream is used for sampling only). ``callback`` is
    called as ``callback(epoch, mean_reconstruction_error)``.
    """
    batches = [np.asarray(batch, dtype=np.float64) for batch in batches]
    if not batches:
        raise ValueError("no batches to train on")
    for batch in batches:
        _check_width(batch, visible, "batch")
    rng = np.random.default_rng(config.seed)
    rbm = initial if initial is not None else Rbm.random(visible, hidden, rng)
    if rbm.m != visible or rbm.n != hidden:
        raise DimensionMismatch(f"initial RBM is {rbm.m}x{rbm.n}, expected {visible}x{hidden}")
    W, b, c = rbm.W.copy(), rbm.b.copy(), rbm.c.copy()
    dW, db, dc = np.zeros_like(W), np.zeros_like(b), np.zeros_like(c)

    for epoch in range(config.epochs):
        momentum = (config.momentum_initial if epoch < config.momentum_switch_epoch
                    else config.momentum_final)
        err = 0.0
        for batch in batches:
            current = Rbm(W, b, c)
            grad = cd_k_gradient(current, batch, config.k, rng)
            dW = momentum * dW + config.learning_rate * (grad.dW - config.weight_cost * W)
            db = momentum * db + config.learning_rate * grad.db
            dc = momentum * dc + config.learning_rate * grad.dc
            W = W + dW
            b = b + db
            c = c + dc
            if callback is not None:
                recon = prob_visible_given_hidden(current, prob_hidden_given_visible(current, batch))
                err += float(np.mean((batch - recon) ** 2))
        if callback is not None:
            callback(epoch, err / len(batches))
    return Rbm(W, b, c)


def propagate_up(rbm: Rbm, data) -> np.ndarray:
    """Hidden activation probabilities, used as the next RBM's input data."""
    return prob_hidden_given_visible(rbm, np.atleast_2d(data))


def train_stack(batches, layer_sizes, config: CdConfig = CdConfig(), callback=None) -> list[Rbm]:
    """Greedy layer-wise pretraining of ``len(layer_sizes) - 1`` RBMs.

    Layer ``i`` is trained with seed ``config.seed + i`` on the hidden
    probabilities of the layer below. ``callback(layer, epoch, error)``
    reports progress.
    """
    stack = []
    batches = [np.asarray(batch, dtype=np.float64) for batch in batches]
    for i, (visible, hidden) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        layer_cb = None if callback is None else (lambda e, err, i=i: callback(i, e, err))
        rbm = train_rbm(batches, visible, hidden, replace(config, seed=config.seed + i),
                        callback=layer_cb)
        stack.append(rbm)
        batches = [propagate_up(rbm, batch) for batch in batches]
    return stack
