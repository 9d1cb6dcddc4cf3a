"""Small feed-forward sigmoid networks: discriminators and autoencoders.

Parameters live in one flat vector.  Layer ``l`` stores its weight matrix
``W[l]`` (``widths[l] x widths[l+1]``, row-major) followed by its bias.
Hidden units are sigmoid; a discriminator has one sigmoid output unit and an
autoencoder an identity output layer.

Discriminators minimize the weighted binary cross-entropy with real rows
labelled 1 and simulated rows labelled 0, weighted so that the objective is
``-[mean log D(real) + mean log(1 - D(sim))]``.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import minimize
from scipy.special import expit

from .params import DomainError

log = logging.getLogger(__name__)

LOSS_AT_HALF = 2 * np.log(0.5)
_P_MAX = 1.0 - 2.0 ** -53


@dataclass(frozen=True)
class NetworkArch:
    widths: tuple
    role: str = "discriminator"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2 or min(widths) < 1:
            raise DomainError("an architecture needs an input and an output layer of positive width")
        if self.role == "discriminator":
            if widths[-1] != 1:
                raise DomainError("a discriminator has a single output unit")
            if len(widths) > 4:
                raise DomainError("discriminators have at most two hidden layers")
        elif self.role == "autoencoder":
            if widths[-1] != widths[0]:
                raise DomainError("an autoencoder reconstructs its input")
        else:
            raise DomainError(f"unknown role {self.role!r}")

    @property
    def identity_output(self) -> bool:
        return self.role == "autoencoder"

    @property
    def n_params(self) -> int:
        w = self.widths
        return sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))

    @classmethod
    def discriminator(cls, n_inputs: int, hidden=()) -> "NetworkArch":
        return cls((n_inputs, *hidden, 1), "discriminator")


@dataclass(frozen=True)
class TrainConfig:
    """Training settings.

    ``optimizer`` is ``"adam"`` (minibatch, trained to completion for
    ``epochs`` passes), ``"adam_full"`` (full-batch Adam for exactly
    ``epochs`` steps) or ``"lbfgs"`` (full batch, until ``max_iter`` or the
    gradient tolerance).  The two fixed-length schemes make the trained
    network a smooth function of the data, which keeps the adversarial
    objective smooth in the structural parameters.
    """

    batch_size: int = 120
    epochs: int = 2000
    seed: int = 0
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    standardize: bool = True
    dropout: float = 0.0
    max_iter: int = 1000
    gtol: float = 1e-7
    restarts: int = 5

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise DomainError("batch_size and epochs must be at least 1")
        if self.optimizer not in ("adam", "adam_full", "lbfgs"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")
        if not 0 <= self.dropout < 1:
            raise DomainError("dropout must lie in [0, 1)")
        if self.restarts < 1:
            raise DomainError("restarts must be at least 1")


@dataclass(frozen=True)
class Network:
    arch: NetworkArch
    params: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    seed: int = 0
    history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        params = np.asarray(self.params, float)
        if params.shape != (self.arch.n_params,):
            raise DomainError(f"expected {self.arch.n_params} parameters, got {params.shape}")
        if not np.all(np.isfinite(params)):
            raise DomainError("network weights must be finite")
        object.__setattr__(self, "params", params)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        out, off, w = [], 0, self.arch.widths
        for i in range(len(w) - 1):
            W = self.params[off:off + w[i] * w[i + 1]].reshape(w[i], w[i + 1])
            off += w[i] * w[i + 1]
            out.append((W, self.params[off:off + w[i + 1]]))
            off += w[i + 1]
        return out

    def to_json(self) -> str:
        return json.dumps({
            "widths": list(self.arch.widths), "role": self.arch.role,
            "activations": ["sigmoid"] * (len(self.arch.widths) - 2)
            + ["identity" if self.arch.identity_output else "sigmoid"],
            "params": self.params.tolist(), "mean": self.mean.tolist(),
            "scale": self.scale.tolist(), "seed": self.seed,
        })

    @classmethod
    def from_json(cls, text: str) -> "Network":
        d = json.loads(text)
        return cls(NetworkArch(tuple(d["widths"]), d["role"]), np.array(d["params"]),
                   np.array(d["mean"]), np.array(d["scale"]), d["seed"])


def init_params(arch: NetworkArch, seed: int) -> np.ndarray:
    """Uniform fan-in scaled weights, zero biases."""
    rng = np.random.default_rng(seed)
    parts, w = [], arch.widths
    for i in range(len(w) - 1):
        bound = 1.0 / np.sqrt(w[i])
        parts.append(rng.uniform(-bound, bound, w[i] * w[i + 1]))
        parts.append(np.zeros(w[i + 1]))
    return np.concatenate(parts)


def zero_network(arch: NetworkArch) -> Network:
    p = arch.widths[0]
    return Network(arch, np.zeros(arch.n_params), np.zeros(p), np.ones(p))


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True)
def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def _log_sigmoid(z):
    # log(sigmoid(z)) without overflow
    if z >= 0:
        return -np.log1p(np.exp(-z))
    return z - np.log1p(np.exp(z))


@njit(cache=True)
def _offsets(widths):
    nl = widths.shape[0] - 1
    w_off = np.empty(nl, np.int64)
    b_off = np.empty(nl, np.int64)
    a_off = np.empty(nl + 1, np.int64)
    off = 0
    for l in range(nl):
        w_off[l] = off
        off += widths[l] * widths[l + 1]
        b_off[l] = off
        off += widths[l + 1]
    acc = 0
    for l in range(nl + 1):
        a_off[l] = acc
        acc += widths[l]
    return w_off, b_off, a_off, acc


@njit(cache=True)
def _forward_row(params, widths, identity_out, x, acts, gain, w_off, b_off, a_off, drop):
    """Fill ``acts`` with layer outputs; returns nothing.  Output layer keeps
    its pre-activation when it is a sigmoid unit (the caller needs logits)."""
    nl = widths.shape[0] - 1
    for i in range(widths[0]):
        acts[i] = x[i]
        gain[i] = 1.0
    for l in range(nl):
        n_in, n_out = widths[l], widths[l + 1]
        last = l == nl - 1
        for j in range(n_out):
            z = params[b_off[l] + j]
            for i in range(n_in):
                z += acts[a_off[l] + i] * params[w_off[l] + i * n_out + j]
            k = a_off[l + 1] + j
            if last:
                acts[k] = z
                gain[k] = 1.0
            else:
                s = _sigmoid(z)
                g = 1.0
                if drop > 0.0:
                    g = 0.0 if np.random.random() < drop else 1.0 / (1.0 - drop)
                acts[k] = s * g
                gain[k] = g


@njit(cache=True)
def _backward_row(params, widths, acts, gain, delta, grad, w_off, b_off, a_off, scale):
    """Accumulate ``scale * d loss / d params``; ``delta`` holds d loss / d z for
    the output layer on entry."""
    nl = widths.shape[0] - 1
    for l in range(nl - 1, -1, -1):
        n_in, n_out = widths[l], widths[l + 1]
        for j in range(n_out):
            d = delta[a_off[l + 1] + j]
            grad[b_off[l] + j] += scale * d
            for i in range(n_in):
                grad[w_off[l] + i * n_out + j] += scale * acts[a_off[l] + i] * d
        if l > 0:
            for i in range(n_in):
                k = a_off[l] + i
                g = gain[k]
                if g == 0.0:
                    delta[k] = 0.0
                    continue
                acc = 0.0
                for j in range(n_out):
                    acc += params[w_off[l] + i * n_out + j] * delta[a_off[l + 1] + j]
                s = acts[k] / g
                delta[k] = acc * g * s * (1.0 - s)


@njit(cache=True)
def _loss_grad(params, widths, identity_out, X, Y, w, idx, grad, drop):
    """Weighted loss summed over rows ``idx``; gradient accumulated into ``grad``.

    Discriminator rows contribute ``-w [y log D + (1 - y) log(1 - D)]``;
    autoencoder rows ``w * mean_k (xhat_k - y_k)^2``.
    """
    w_off, b_off, a_off, n_act = _offsets(widths)
    acts = np.empty(n_act)
    gain = np.empty(n_act)
    delta = np.empty(n_act)
    nl = widths.shape[0] - 1
    n_out = widths[nl]
    out0 = a_off[nl]
    total = 0.0
    for r in range(idx.shape[0]):
        i = idx[r]
        _forward_row(params, widths, identity_out, X[i], acts, gain, w_off, b_off, a_off, drop)
        wi = w[i]
        if identity_out:
            for k in range(n_out):
                e = acts[out0 + k] - Y[i, k]
                total += wi * e * e / n_out
                delta[out0 + k] = 2.0 * e / n_out
        else:
            z = acts[out0]
            y = Y[i, 0]
            total -= wi * (y * _log_sigmoid(z) + (1.0 - y) * _log_sigmoid(-z))
            delta[out0] = _sigmoid(z) - y
        _backward_row(params, widths, acts, gain, delta, grad, w_off, b_off, a_off, wi)
    return total


@njit(cache=True)
def _predict(params, widths, identity_out, X):
    """Logits (discriminator) or reconstructions (autoencoder), row by row."""
    w_off, b_off, a_off, n_act = _offsets(widths)
    acts = np.empty(n_act)
    gain = np.empty(n_act)
    nl = widths.shape[0] - 1
    n_out = widths[nl]
    out = np.empty((X.shape[0], n_out))
    for i in range(X.shape[0]):
        _forward_row(params, widths, identity_out, X[i], acts, gain, w_off, b_off, a_off, 0.0)
        for k in range(n_out):
            out[i, k] = acts[a_off[nl] + k]
    return out


@njit(cache=True)
def _adam(params, widths, identity_out, X, Y, w, batch, epochs, lr, b1, b2, eps, seed, drop,
          trace):
    np.random.seed(seed)
    n = X.shape[0]
    n_par = params.shape[0]
    m1 = np.zeros(n_par)
    m2 = np.zeros(n_par)
    grad = np.empty(n_par)
    order = np.arange(n)
    step = 0
    for ep in range(epochs):
        np.random.shuffle(order)
        ep_loss = 0.0
        for start in range(0, n, batch):
            stop = min(start + batch, n)
            grad[:] = 0.0
            ep_loss += _loss_grad(params, widths, identity_out, X, Y, w, order[start:stop], grad, drop)
            step += 1
            inv = 1.0 / (stop - start)
            c1 = 1.0 - b1 ** step
            c2 = 1.0 - b2 ** step
            for k in range(n_par):
                g = grad[k] * inv
                m1[k] = b1 * m1[k] + (1.0 - b1) * g
                m2[k] = b2 * m2[k] + (1.0 - b2) * g * g
                params[k] -= lr * (m1[k] / c1) / (np.sqrt(m2[k] / c2) + eps)
        trace[ep] = ep_loss / n
    return params


# ---------------------------------------------------------------------------
# public API

def fit_standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and scales; zero-variance columns are only centered."""
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    flat = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if np.any(flat):
        warnings.warn(f"columns {np.flatnonzero(flat).tolist()} have zero variance; "
                      "they are centered but not scaled", stacklevel=3)
    return mean, np.where(flat, 1.0, sd)


def _standardized(net: Network, X) -> np.ndarray:
    X = np.asarray(X, float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != net.arch.widths[0]:
        raise DomainError(f"input width {X.shape[1]} does not match network width {net.arch.widths[0]}")
    return np.ascontiguousarray((X - net.mean) / net.scale)


def logits(net: Network, X) -> np.ndarray:
    if net.arch.identity_output:
        raise DomainError("autoencoders have no logits")
    Z = _standardized(net, X)
    return _predict(net.params, np.array(net.arch.widths, np.int64), False, Z)[:, 0]


def forward(net: Network, x):
    """Discriminator probabilities (strictly inside (0, 1)) or reconstructions.

    A single row returns a scalar (discriminator) or 1-d array (autoencoder).
    """
    single = np.ndim(x) == 1
    Z = _standardized(net, x)
    out = _predict(net.params, np.array(net.arch.widths, np.int64), net.arch.identity_output, Z)
    if net.arch.identity_output:
        out = out * net.scale + net.mean
        return out[0] if single else out
    p = np.clip(expit(out[:, 0]), np.finfo(float).tiny, _P_MAX)
    return float(p[0]) if single else p


def cross_entropy_from_probs(d_real, d_sim) -> float:
    """``mean log D(real) + mean log(1 - D(sim))``."""
    d_real, d_sim = np.asarray(d_real, float), np.asarray(d_sim, float)
    if d_real.size == 0 or d_sim.size == 0:
        raise DomainError("both samples must be nonempty")
    return float(np.mean(np.log(d_real)) + np.mean(np.log1p(-d_sim)))


def cross_entropy(net: Network, real, sim) -> float:
    """The adversarial objective ``(1/n) sum log D(X_i) + (1/m) sum log(1 - D(X_j))``.

    Computed from logits so that confident discriminators do not overflow.
    """
    real, sim = np.asarray(real, float), np.asarray(sim, float)
    if real.shape[0] == 0 or sim.shape[0] == 0:
        raise DomainError("both samples must be nonempty")
    zr, zs = logits(net, real), logits(net, sim)
    return float(np.mean(-np.logaddexp(0.0, -zr)) + np.mean(-np.logaddexp(0.0, zs)))


def _pooled(real, sim):
    real, sim = np.asarray(real, float), np.asarray(sim, float)
    if real.shape[0] == 0 or sim.shape[0] == 0:
        raise DomainError("both samples must be nonempty")
    if real.ndim != 2 or sim.ndim != 2 or real.shape[1] != sim.shape[1]:
        raise DomainError("real and simulated samples must be matrices of equal width")
    n, m = real.shape[0], sim.shape[0]
    X = np.concatenate([real, sim])
    y = np.concatenate([np.ones(n), np.zeros(m)])[:, None]
    # weights make the pooled mean loss equal to the average of the two sample means
    w = np.concatenate([np.full(n, (n + m) / (2.0 * n)), np.full(m, (n + m) / (2.0 * m))])
    return X, y, w


def _batch_loss_grad(params, arch: NetworkArch, X, Y, w):
    """Vectorized full-batch version of the row kernel (same loss, same gradient)."""
    widths = arch.widths
    Ws, bs, off = [], [], 0
    for i in range(len(widths) - 1):
        Ws.append(params[off:off + widths[i] * widths[i + 1]].reshape(widths[i], widths[i + 1]))
        off += widths[i] * widths[i + 1]
        bs.append(params[off:off + widths[i + 1]])
        off += widths[i + 1]
    acts = [X]
    for W, b in zip(Ws[:-1], bs[:-1]):
        acts.append(_np_sigmoid(acts[-1] @ W + b))
    z = acts[-1] @ Ws[-1] + bs[-1]
    if arch.identity_output:
        err = z - Y
        loss = np.sum(w[:, None] * err ** 2) / widths[-1]
        delta = 2.0 * err * w[:, None] / widths[-1]
    else:
        loss = -np.sum(w * (Y[:, 0] * -np.logaddexp(0.0, -z[:, 0]) + (1 - Y[:, 0]) * -np.logaddexp(0.0, z[:, 0])))
        delta = (_np_sigmoid(z) - Y) * w[:, None]
    grads = []
    for l in range(len(Ws) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append((acts[l].T @ delta).ravel())
        if l > 0:
            delta = (delta @ Ws[l].T) * acts[l] * (1.0 - acts[l])
    return loss, np.concatenate(grads[::-1])


def _np_sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _adam_full(params, arch, X, Y, w, cfg):
    n = X.shape[0]
    m1 = np.zeros_like(params)
    m2 = np.zeros_like(params)
    trace = np.empty(cfg.epochs)
    for step in range(1, cfg.epochs + 1):
        loss, grad = _batch_loss_grad(params, arch, X, Y, w)
        grad /= n
        trace[step - 1] = loss / n
        m1 = cfg.beta1 * m1 + (1 - cfg.beta1) * grad
        m2 = cfg.beta2 * m2 + (1 - cfg.beta2) * grad * grad
        params = params - cfg.learning_rate * (m1 / (1 - cfg.beta1 ** step)) / (
            np.sqrt(m2 / (1 - cfg.beta2 ** step)) + cfg.eps)
    return params, tuple(trace)


def _fit(arch, X, Y, w, cfg, seed):
    widths = np.array(arch.widths, np.int64)
    params = init_params(arch, seed)
    n = X.shape[0]
    if cfg.optimizer == "adam":
        trace = np.empty(cfg.epochs)
        params = _adam(params, widths, arch.identity_output, X, Y, w, cfg.batch_size, cfg.epochs,
                       cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, seed, cfg.dropout, trace)
        return params, tuple(trace)
    if cfg.optimizer == "adam_full":
        return _adam_full(params, arch, X, Y, w, cfg)
    trace = []

    def fun(p):
        loss, grad = _batch_loss_grad(p, arch, X, Y, w)
        trace.append(loss / n)
        return loss / n, grad / n

    res = minimize(fun, params, jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iter, "gtol": cfg.gtol, "ftol": 1e-15, "maxcor": 20})
    return res.x, tuple(trace)


def train_discriminator(real, sim, arch: NetworkArch, cfg: TrainConfig = TrainConfig()) -> Network:
    """Fit ``D`` to tell real rows (label 1) from simulated rows (label 0).

    Deterministic given ``cfg.seed``.  Standardization is fitted on the pooled
    sample and frozen into the returned network.
    """
    if arch.role != "discriminator":
        raise DomainError("train_discriminator needs a discriminator architecture")
    X, y, w = _pooled(real, sim)
    if X.shape[1] != arch.widths[0]:
        raise DomainError(f"features have {X.shape[1]} columns, network expects {arch.widths[0]}")
    if cfg.standardize:
        mean, scale = fit_standardization(X)
    else:
        mean, scale = np.zeros(X.shape[1]), np.ones(X.shape[1])
    Z = np.ascontiguousarray((X - mean) / scale)
    params, trace = _fit(arch, Z, y, w, cfg, cfg.seed)
    return Network(arch, params, mean, scale, cfg.seed, trace)


def gradient_check(net: Network, X, Y, w=None, step: float = 1e-4) -> float:
    """Largest relative gap between backprop and finite-difference gradients.

    The loss is the network's training loss on ``(X, Y)`` in standardized
    units.  Relative error is ``|a - n| / max(|a|, |n|, 1e-8)``.  The
    numerical side is a Richardson-extrapolated central difference (steps
    ``step`` and ``step / 2``) evaluated in extended precision, so it stays
    accurate for gradient components near zero.
    """
    Z = _standardized(net, X)
    Y = np.asarray(Y, float).reshape(Z.shape[0], -1)
    w = np.ones(Z.shape[0]) if w is None else np.asarray(w, float)
    widths = np.array(net.arch.widths, np.int64)
    analytic = np.zeros(net.arch.n_params)
    _loss_grad(net.params, widths, net.arch.identity_output, Z, Y, w, np.arange(Z.shape[0]), analytic, 0.0)

    ld = np.longdouble
    Zl, Yl, wl = Z.astype(ld), Y.astype(ld), w.astype(ld)
    p = net.params.astype(ld)

    def central(k, h):
        orig = p[k]
        p[k] = orig + h
        up = _batch_loss_grad(p, net.arch, Zl, Yl, wl)[0]
        p[k] = orig - h
        down = _batch_loss_grad(p, net.arch, Zl, Yl, wl)[0]
        p[k] = orig
        return (up - down) / (2 * h)

    h = ld(step)
    numeric = np.array([float((4 * central(k, h / 2) - central(k, h)) / 3) for k in range(p.size)])
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def loss_gradient(net: Network, X, Y, w=None) -> np.ndarray:
    """Backprop gradient of the summed training loss with respect to the parameters."""
    Z = _standardized(net, X)
    Y = np.asarray(Y, float).reshape(Z.shape[0], -1)
    w = np.ones(Z.shape[0]) if w is None else np.asarray(w, float)
    grad = np.zeros(net.arch.n_params)
    _loss_grad(net.params, np.array(net.arch.widths, np.int64), net.arch.identity_output, Z, Y, w,
               np.arange(Z.shape[0]), grad, 0.0)
    return grad


@dataclass(frozen=True)
class AutoencoderFit:
    network: Network
    mse: float
    correlation: np.ndarray
    restart_mse: tuple


def autoencoder_arch(n_inputs: int, bottleneck: int, hidden=()) -> NetworkArch:
    """Symmetric encoder/decoder: ``n, *hidden, d, *reversed(hidden), n``."""
    return NetworkArch((n_inputs, *hidden, bottleneck, *reversed(tuple(hidden)), n_inputs), "autoencoder")


def train_autoencoder(data, bottleneck: int, cfg: TrainConfig = TrainConfig(), hidden=()) -> AutoencoderFit:
    """Fit a bottleneck autoencoder, keeping the best of ``cfg.restarts`` seeds.

    MSE is the mean squared reconstruction error per entry in standardized
    units; ``correlation`` is each column's correlation with its reconstruction.
    """
    X = np.asarray(data, float)
    if not 1 <= bottleneck <= X.shape[1]:
        raise DomainError(f"bottleneck must lie in [1, {X.shape[1]}]")
    arch = autoencoder_arch(X.shape[1], bottleneck, hidden)
    if cfg.standardize:
        mean, scale = fit_standardization(X)
    else:
        mean, scale = np.zeros(X.shape[1]), np.ones(X.shape[1])
    Z = np.ascontiguousarray((X - mean) / scale)
    w = np.ones(X.shape[0])
    best, scores = None, []
    for k in range(cfg.restarts):
        seed = cfg.seed + k
        params, trace = _fit(arch, Z, Z, w, cfg, seed)
        rec = _predict(params, np.array(arch.widths, np.int64), True, Z)
        mse = float(np.mean((rec - Z) ** 2))
        scores.append(mse)
        if best is None or mse < best[0]:
            best = (mse, Network(arch, params, mean, scale, seed, trace), rec)
    mse, net, rec = best
    corr = np.array([_safe_corr(Z[:, j], rec[:, j]) for j in range(Z.shape[1])])
    return AutoencoderFit(net, mse, corr, tuple(scores))


def _safe_corr(a, b) -> float:
    if np.std(a) == 0 or np.std(b) == 0:
        return 1.0 if np.allclose(a, b) else 0.0
    return float(np.corrcoef(a, b)[0, 1])


def accuracy(net: Network, real, sim) -> float:
    """Share of rows classified correctly with a 0.5 threshold."""
    hits = np.sum(forward(net, real) > 0.5) + np.sum(forward(net, sim) <= 0.5)
    return float(hits / (len(real) + len(sim)))


def select_architecture(real, simulate, candidates, cfg: TrainConfig = TrainConfig(),
                        split: float = 0.8, seed: int = 0) -> NetworkArch:
    """Pick the candidate with the best held-out classification accuracy.

    ``simulate`` is a zero-argument callable returning simulated features at a
    preliminary parameter value.  Each candidate trains on a ``split`` share of
    the pooled sample; ties go to the candidate with fewer parameters.
    """
    candidates = list(candidates)
    if not candidates:
        raise DomainError("no candidate architectures")
    if len(candidates) == 1:
        return candidates[0]
    real = np.asarray(real, float)
    sim = np.asarray(simulate(), float)
    rng = np.random.default_rng(seed)
    r_idx, s_idx = rng.permutation(len(real)), rng.permutation(len(sim))
    nr, ns = int(round(split * len(real))), int(round(split * len(sim)))
    scored = []
    for arch in candidates:
        net = train_discriminator(real[r_idx[:nr]], sim[s_idx[:ns]], arch, cfg)
        acc = accuracy(net, real[r_idx[nr:]], sim[s_idx[ns:]])
        log.info("architecture %s held-out accuracy %.4f", arch.widths, acc)
        scored.append((-acc, arch.n_params, arch))
    scored.sort(key=lambda t: (t[0], t[1]))
    return scored[0][2]


__all__ = [
    "NetworkArch", "TrainConfig", "Network", "AutoencoderFit", "LOSS_AT_HALF", "init_params",
    "zero_network", "forward", "logits", "cross_entropy", "cross_entropy_from_probs",
    "train_discriminator", "gradient_check", "loss_gradient", "train_autoencoder",
    "autoencoder_arch", "accuracy", "select_architecture", "fit_standardization",
]
