"""Statevector simulation of the valuation-mediation circuit.

The circuit prepares ``J(gamma) |0...0>``, applies one local gate per qubit and
then ``J(gamma)^dagger``.  ``J(gamma) = exp(-i gamma/2 X x ... x X)`` reduces to
``cos(gamma/2) I - i sin(gamma/2) X x ... x X`` because the N-fold X product
squares to the identity, so it is applied as two axpy passes instead of a dense
matrix.

Amplitude layout: basis label ``b`` is stored at index ``b`` with qubit 1 as
the most significant bit.

The readout is the probability that a qubit is found in ``|1>``, i.e.
``(1 - <sigma_z>) / 2``.  This is the convention under which the two-player
closed forms in :func:`closed_form_pair` hold and under which ``gamma = 0``
reproduces the unmediated valuations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

MAX_QUBITS = 12
GAMMA_MAX = math.pi / 2
NORM_TOL = 1e-12
_ANGLE_SLACK = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class InputDomainError(ValueError):
    """Raised when an argument lies outside the documented domain."""


def _check_range(name: str, value, lo: float, hi: float) -> None:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputDomainError(f"{name} must be finite")
    if np.any(arr < lo - _ANGLE_SLACK) or np.any(arr > hi + _ANGLE_SLACK):
        raise InputDomainError(f"{name} must lie in [{lo:g}, {hi:g}], got {value!r}")


def _check_qubits(n: int) -> None:
    if isinstance(n, bool) or int(n) != n or not 1 <= n <= MAX_QUBITS:
        raise InputDomainError(f"qubit count must be an integer in [1, {MAX_QUBITS}], got {n!r}")


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_qubits(self.n_qubits)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise InputDomainError(
                f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n: int) -> "Statevector":
        _check_qubits(n)
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(n, amps)

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probability_one(self) -> np.ndarray:
        """Per-qubit probability of reading |1>, qubit 1 first."""
        return _probability_one(self.amplitudes[None, :], self.n_qubits)[0]


@dataclass(frozen=True)
class CircuitParams:
    """Entangling angle plus one (theta, phi, psi) triple per qubit."""

    gamma: float
    theta: tuple
    phi: tuple
    psi: tuple

    def __post_init__(self):
        theta, phi, psi = (tuple(float(x) for x in seq) for seq in (self.theta, self.phi, self.psi))
        if not (len(theta) == len(phi) == len(psi)):
            raise InputDomainError(
                f"angle sequences differ in length: theta={len(theta)}, phi={len(phi)}, psi={len(psi)}")
        _check_qubits(len(theta))
        _check_range("gamma", self.gamma, 0.0, GAMMA_MAX)
        _check_range("theta", theta, 0.0, math.pi)
        _check_range("phi", phi, 0.0, 2 * math.pi)
        _check_range("psi", psi, 0.0, 2 * math.pi)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @property
    def n_qubits(self) -> int:
        return len(self.theta)


def local_gate(theta: float, phi: float = 0.0, psi: float = 0.0) -> np.ndarray:
    """2x2 unitary encoding one raw valuation; U|0> = e^{i phi} cos(theta/2)|0> - e^{i psi} sin(theta/2)|1>."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[np.exp(1j * phi) * c, np.exp(-1j * psi) * s],
         [-np.exp(1j * psi) * s, np.exp(-1j * phi) * c]],
        dtype=complex,
    )


def entangler(gamma: float, n: int) -> np.ndarray:
    """Dense 2^n x 2^n matrix of J(gamma); for inspection and small checks only."""
    _check_range("gamma", gamma, 0.0, GAMMA_MAX)
    _check_qubits(n)
    dim = 2**n
    flip = np.eye(dim, dtype=complex)[::-1]
    return math.cos(gamma / 2) * np.eye(dim, dtype=complex) - 1j * math.sin(gamma / 2) * flip


def _apply_entangler(amps: np.ndarray, gamma, dagger: bool = False) -> np.ndarray:
    # X on every qubit maps label b to b XOR (2^n - 1), i.e. reverses the amplitude axis.
    gamma = np.asarray(gamma, dtype=float).reshape(-1, 1)
    c = np.cos(gamma / 2)
    s = np.sin(gamma / 2)
    sign = 1j if dagger else -1j
    return c * amps + sign * s * amps[:, ::-1]


def _apply_local(amps: np.ndarray, gates: np.ndarray, qubit: int, n: int) -> np.ndarray:
    # amps: (batch, 2^n); gates: (batch, 2, 2) acting on `qubit` (0-based, MSB first).
    batch = amps.shape[0]
    view = amps.reshape(batch, 2**qubit, 2, 2 ** (n - qubit - 1))
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    g = gates[:, :, :, None, None]
    out = np.empty_like(view)
    out[:, :, 0, :] = g[:, 0, 0] * a0 + g[:, 0, 1] * a1
    out[:, :, 1, :] = g[:, 1, 0] * a0 + g[:, 1, 1] * a1
    return out.reshape(batch, 2**n)


def _probability_one(amps: np.ndarray, n: int) -> np.ndarray:
    probs = (amps.real**2 + amps.imag**2).reshape((amps.shape[0],) + (2,) * n)
    out = np.empty((amps.shape[0], n))
    for q in range(n):
        axes = tuple(a for a in range(1, n + 1) if a != q + 1)
        out[:, q] = probs.sum(axis=axes)[:, 1]
    return out


def _check_norm(amps: np.ndarray) -> None:
    norms = np.sum(amps.real**2 + amps.imag**2, axis=1)
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise ArithmeticError(f"statevector lost normalization: {norms}")


def _gate_batch(theta: np.ndarray, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    gates = np.empty(theta.shape + (2, 2), dtype=complex)
    gates[..., 0, 0] = np.exp(1j * phi) * c
    gates[..., 0, 1] = np.exp(-1j * psi) * s
    gates[..., 1, 0] = -np.exp(1j * psi) * s
    gates[..., 1, 1] = np.exp(-1j * phi) * c
    return gates


def entangler_state(gamma: float, n: int) -> Statevector:
    """J(gamma)|0...0> = cos(gamma/2)|0...0> - i sin(gamma/2)|1...1>."""
    _check_range("gamma", gamma, 0.0, GAMMA_MAX)
    _check_qubits(n)
    amps = np.zeros((1, 2**n), dtype=complex)
    amps[0, 0] = 1.0
    amps = _apply_entangler(amps, gamma)
    _check_norm(amps)
    return Statevector(n, amps[0])


def final_states(gamma, theta, phi=None, psi=None) -> np.ndarray:
    """Batched |psi_f> = J^dagger (U_1 x ... x U_N) J |0...0>.

    ``theta``, ``phi`` and ``psi`` have shape (batch, N); ``gamma`` is a scalar
    or a length-batch array.  Returns amplitudes of shape (batch, 2^N).
    Angles are not range-checked here; use :class:`CircuitParams` for that.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    phi = np.zeros_like(theta) if phi is None else np.broadcast_to(np.asarray(phi, dtype=float), theta.shape)
    psi = np.zeros_like(theta) if psi is None else np.broadcast_to(np.asarray(psi, dtype=float), theta.shape)
    batch, n = theta.shape
    _check_qubits(n)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (batch,))

    amps = np.zeros((batch, 2**n), dtype=complex)
    amps[:, 0] = 1.0
    amps = _apply_entangler(amps, gamma)
    _check_norm(amps)
    gates = _gate_batch(theta, phi, psi)
    for q in range(n):
        amps = _apply_local(amps, gates[:, q], q, n)
        _check_norm(amps)
    amps = _apply_entangler(amps, gamma, dagger=True)
    _check_norm(amps)
    return amps


def adjusted_valuations_batch(gamma, theta, phi=None, psi=None) -> np.ndarray:
    """Per-qubit probability of |1> for a batch of circuits, shape (batch, N)."""
    amps = final_states(gamma, theta, phi, psi)
    out = _probability_one(amps, amps.shape[1].bit_length() - 1)
    return np.clip(out, 0.0, 1.0)


def adjusted_valuations(params: CircuitParams) -> np.ndarray:
    """Adjusted valuations in [0, 1] for one circuit evaluation."""
    return adjusted_valuations_batch(
        params.gamma, [params.theta], [params.phi], [params.psi])[0]


def closed_form_pair(theta1: float, theta2: float, gamma: float) -> tuple[float, float]:
    """Two-player adjusted valuations with all phases zero."""
    _check_range("theta1", theta1, 0.0, math.pi)
    _check_range("theta2", theta2, 0.0, math.pi)
    _check_range("gamma", gamma, 0.0, GAMMA_MAX)
    c2g, s2g = math.cos(gamma) ** 2, math.sin(gamma) ** 2
    c1, c2 = math.cos(theta1), math.cos(theta2)
    return (1 - c2g * c1 - s2g * c2) / 2, (1 - c2g * c2 - s2g * c1) / 2


class MarketScaling(NamedTuple):
    theta: np.ndarray
    vmax: float
    degenerate: bool


def rescale_to_market(raw: Sequence[float]) -> MarketScaling:
    """Map cash valuations to angles theta_i = pi * v_i / max(v).

    The inverse map multiplies an adjusted valuation by ``vmax``.  When every
    valuation is zero the scaling is undefined; angles are all zero and
    ``degenerate`` is set.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size == 0:
        raise InputDomainError("raw valuations must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(raw)) or np.any(raw < 0):
        raise InputDomainError("raw valuations must be finite and non-negative")
    vmax = float(raw.max())
    if vmax == 0.0:
        return MarketScaling(np.zeros_like(raw), 0.0, True)
    return MarketScaling(np.clip(math.pi * raw / vmax, 0.0, math.pi), vmax, False)
