"""Neural trading policies trained with REINFORCE and Adam.

Each policy is a 3 -> 32 -> 32 -> 1 multilayer perceptron with ReLU hidden
layers whose output is the mean of a unit-variance Gaussian.  Parameters live in
one flat float64 vector; the named arrays are views into it.  Flat ordering::

    W1 (3, 32) row-major, b1 (32,), W2 (32, 32), b2 (32,), W3 (32, 1), b3 (1,)

so that ``h1 = relu(x @ W1 + b1)``, ``h2 = relu(h1 @ W2 + b2)`` and
``mu = h2 @ W3 + b3``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

LAYER_SIZES = (3, 32, 32, 1)
LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def _layout(sizes=LAYER_SIZES):
    shapes = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        shapes.append((fan_in, fan_out))
        shapes.append((fan_out,))
    return shapes


PARAM_SHAPES = _layout()
N_PARAMS = sum(int(np.prod(s)) for s in PARAM_SHAPES)


class Observation(NamedTuple):
    cash: float
    stock: float
    prev_price: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cash, self.stock, self.prev_price], dtype=float)


def unflatten(flat: np.ndarray) -> list[np.ndarray]:
    """Split a flat vector into per-layer views (no copy)."""
    views, offset = [], 0
    for shape in PARAM_SHAPES:
        size = int(np.prod(shape))
        views.append(flat[offset:offset + size].reshape(shape))
        offset += size
    return views


class PolicyNet:
    """Feed-forward policy holding its parameters in a flat vector."""

    def __init__(self, params: np.ndarray | None = None):
        if params is None:
            params = np.zeros(N_PARAMS)
        params = np.array(params, dtype=float)
        if params.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} parameters, got shape {params.shape}")
        self.params = params

    @classmethod
    def initialize(cls, rng: np.random.Generator) -> "PolicyNet":
        """Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero."""
        net = cls()
        for (w, b) in zip(net.layers()[0::2], net.layers()[1::2]):
            bound = 1.0 / math.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = 0.0
        return net

    def layers(self) -> list[np.ndarray]:
        """Views [W1, b1, W2, b2, W3, b3] into the flat parameter vector."""
        return unflatten(self.params)

    def copy(self) -> "PolicyNet":
        return PolicyNet(self.params.copy())

    def save(self, path) -> None:
        np.savetxt(Path(path), self.params, fmt="%.17g")

    @classmethod
    def load(cls, path) -> "PolicyNet":
        return cls(np.loadtxt(Path(path), dtype=float).reshape(-1))

    def _forward(self, x: np.ndarray):
        w1, b1, w2, b2, w3, b3 = self.layers()
        z1 = x @ w1 + b1
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ w2 + b2
        h2 = np.maximum(z2, 0.0)
        mu = float(h2 @ w3[:, 0] + b3[0])
        return mu, (x, z1, h1, z2, h2)

    def mean_and_grad(self, obs) -> tuple[float, np.ndarray]:
        """Action mean and its gradient with respect to the flat parameters."""
        x = _as_input(obs)
        mu, (x, z1, h1, z2, h2) = self._forward(x)
        _, _, w2, _, w3, _ = self.layers()
        grad = np.empty(N_PARAMS)
        g = unflatten(grad)
        g[5][0] = 1.0
        g[4][:, 0] = h2
        d2 = w3[:, 0] * (z2 > 0)
        g[3][...] = d2
        g[2][...] = np.outer(h1, d2)
        d1 = (w2 @ d2) * (z1 > 0)
        g[1][...] = d1
        g[0][...] = np.outer(x, d1)
        return mu, grad


def _as_input(obs) -> np.ndarray:
    x = obs.as_array() if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
    if x.shape != (LAYER_SIZES[0],):
        raise ValueError(f"observation must have {LAYER_SIZES[0]} entries")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite observation {x!r}")
    return x


def forward(net: PolicyNet, obs) -> float:
    """Deterministic action mean mu for an observation."""
    return net._forward(_as_input(obs))[0]


@dataclass
class Adam:
    """Bias-corrected Adam on a flat parameter vector (gradient ascent)."""

    n_params: int = N_PARAMS
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)
    t: int = 0

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.n_params)
        if self.v is None:
            self.v = np.zeros(self.n_params)

    def ascend(self, params: np.ndarray, grad: np.ndarray) -> None:
        """In-place update ``params += lr * m_hat / (sqrt(v_hat) + eps)``."""
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        params += self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class NormalStream:
    """Standard normal variates by the Box-Muller transform over a uniform stream."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._spare = None

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.rng.random()  # (0, 1], keeps log finite
        u2 = self.rng.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2 * math.pi * u2)
        return r * math.cos(2 * math.pi * u2)


class ZeroStream:
    """Noise source that always returns 0; switches exploration off."""

    def normal(self) -> float:
        return 0.0


def gaussian_log_density(action: float, mu: float) -> float:
    return -0.5 * (action - mu) ** 2 - LOG_SQRT_2PI


def sample_action(mu: float, noise) -> tuple[float, float]:
    """Draw a = mu + eps with eps ~ N(0, 1); returns (a, log pi(a | mu))."""
    action = mu + noise.normal()
    return action, gaussian_log_density(action, mu)


def policy_gradient(net: PolicyNet, obs, action: float, reward: float) -> np.ndarray:
    """Gradient of reward * log pi(action | mu(obs)) for a unit-variance Gaussian."""
    mu, dmu = net.mean_and_grad(obs)
    return reward * (action - mu) * dmu


def reinforce_update(net: PolicyNet, opt: Adam, obs, action: float, reward: float) -> bool:
    """One REINFORCE step with Adam.  Returns False (and leaves state untouched) for non-finite rewards."""
    if not math.isfinite(reward):
        return False
    opt.ascend(net.params, policy_gradient(net, obs, action, reward))
    return True


BUY = "buy"
SELL = "sell"


def decode_order(raw_output: float) -> tuple[str, float]:
    """Sign picks the side (positive buys), magnitude is the valuation; 0 sells at 0."""
    if not math.isfinite(raw_output):
        raise ValueError(f"non-finite network output {raw_output!r}")
    return (BUY if raw_output > 0 else SELL), abs(raw_output)


class Agent:
    """A trader's policy, optimizer, exploration stream and pending decision."""

    def __init__(self, net: PolicyNet, noise, opt: Adam | None = None, baseline: bool = False):
        self.net = net
        self.opt = opt if opt is not None else Adam()
        self.noise = noise
        self.use_baseline = baseline
        self.baseline = 0.0
        self.n_updates = 0
        self._pending = None

    def act(self, obs) -> float:
        mu = forward(self.net, obs)
        action, _ = sample_action(mu, self.noise)
        self._pending = (obs, action)
        return action

    def learn(self, reward: float) -> bool:
        if self._pending is None:
            raise RuntimeError("learn() called before act()")
        obs, action = self._pending
        self._pending = None
        signal = reward
        if self.use_baseline:
            signal = reward - self.baseline
        applied = reinforce_update(self.net, self.opt, obs, action, signal)
        if applied and self.use_baseline:
            self.n_updates += 1
            self.baseline += (reward - self.baseline) / self.n_updates
        return applied
