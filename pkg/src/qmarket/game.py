"""Classical and quantum p-guessing games.

Every player picks a value and receives ``-(x_i - p/N * sum_j x_j)^2``.  In the
classical game values are in [0, 100].  In the quantum game a player picks an
angle theta in [0, pi]; the angles go through the mediation circuit and the
adjusted valuations (in [0, 1]) take the place of the x_i.

The analytic best responses (:func:`eq6_extremum`, :func:`best_response_p1`,
:func:`best_response_p2`) are for the two-player, p = 2/3, maximally entangled
game with phases (phi_1, phi_2) = (0, pi/3), available as ``MISMATCHED``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qcore
from .qcore import InputDomainError

CLASSICAL = "classical-0-100"
QUANTUM = "quantum-0-1"
CLASSICAL_MAX = 100.0
ARCCOS_SLACK = 1e-12
TIE_TOL = 1e-12


@dataclass(frozen=True)
class GameSpec:
    """A guessing game.

    ``phases`` holds one entry per player, either a bare phi or a (phi, psi)
    pair; it is only used for the quantum scale and defaults to all zeros.
    """

    n_players: int
    p: float
    gamma: float = math.pi / 2
    phases: tuple | None = None
    scale: str = QUANTUM

    def __post_init__(self):
        if int(self.n_players) != self.n_players or self.n_players < 2:
            raise InputDomainError("n_players must be an integer >= 2")
        if not 0 < self.p <= 1:
            raise InputDomainError("p must lie in (0, 1]")
        if self.scale not in (CLASSICAL, QUANTUM):
            raise InputDomainError(f"unknown scale {self.scale!r}")
        if self.scale == QUANTUM:
            if self.n_players > qcore.MAX_QUBITS:
                raise InputDomainError(f"quantum games support at most {qcore.MAX_QUBITS} players")
            qcore._check_range("gamma", self.gamma, 0.0, qcore.GAMMA_MAX)
            phases = self.phases
            if phases is None:
                phases = ((0.0, 0.0),) * self.n_players
            phases = tuple(
                (float(ph[0]), float(ph[1])) if isinstance(ph, (tuple, list)) else (float(ph), 0.0)
                for ph in phases
            )
            if len(phases) != self.n_players:
                raise InputDomainError("need one phase entry per player")
            qcore._check_range("phi", [ph[0] for ph in phases], 0.0, 2 * math.pi)
            qcore._check_range("psi", [ph[1] for ph in phases], 0.0, 2 * math.pi)
            object.__setattr__(self, "phases", phases)

    @property
    def is_quantum(self) -> bool:
        return self.scale == QUANTUM

    @property
    def strategy_max(self) -> float:
        return math.pi if self.is_quantum else CLASSICAL_MAX

    def grid(self, k: int) -> np.ndarray:
        """k + 1 equally spaced pure strategies from 0 to the upper bound."""
        if k < 1:
            raise InputDomainError("grid resolution k must be >= 1")
        return self.strategy_max * np.arange(k + 1) / k


MISMATCHED = GameSpec(2, 2 / 3, math.pi / 2, phases=(0.0, math.pi / 3))
MATCHED = GameSpec(2, 2 / 3, math.pi / 2, phases=(0.0, 0.0))


def _check_player(i: int, spec: GameSpec) -> None:
    if not 0 <= i < spec.n_players:
        raise IndexError(f"player index {i} out of range for {spec.n_players} players")


def _check_profile(values, spec: GameSpec) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != spec.n_players:
        raise InputDomainError(f"profile must have {spec.n_players} entries")
    qcore._check_range("strategy", values, 0.0, spec.strategy_max)
    return values


def guessing_utilities(x: np.ndarray, p: float) -> np.ndarray:
    """All players' utilities for value profiles ``x`` (last axis = players)."""
    x = np.asarray(x, dtype=float)
    target = p * x.mean(axis=-1, keepdims=True)
    return -((x - target) ** 2)


def classical_utility(profile: Sequence[float], spec: GameSpec, i: int) -> float:
    if spec.is_quantum:
        raise InputDomainError("classical_utility needs a classical-scale spec")
    _check_player(i, spec)
    x = _check_profile(profile, spec)
    return float(guessing_utilities(x, spec.p)[i])


def classical_best_response(others: Sequence[float], spec: GameSpec) -> float:
    """Unique maximizer p/(N - p) * sum(others), clamped to [0, 100]."""
    others = np.asarray(others, dtype=float)
    if others.shape != (spec.n_players - 1,):
        raise InputDomainError(f"expected {spec.n_players - 1} opponent values")
    qcore._check_range("others", others, 0.0, CLASSICAL_MAX)
    n, p = spec.n_players, spec.p
    return float(min(CLASSICAL_MAX, max(0.0, p / (n - p) * others.sum())))


def classical_pure_nash(spec: GameSpec) -> tuple:
    """The all-zero profile: the only solution of x_i = p/(N - p) sum_{j != i} x_j when p < 1."""
    if not 0 < spec.p < 1:
        raise InputDomainError("p = 1 has a continuum of equilibria; need 0 < p < 1")
    return (0.0,) * spec.n_players


def classical_grid_nash(spec: GameSpec, k: int = 100, tol: float = 1e-9, weak: bool = False) -> list[tuple]:
    """Every pure equilibrium of the classical game on the grid {100 n / k}.

    Exhaustive but organized by the total index sum T: a profile with total T
    is an equilibrium iff each entry n_i is a grid best response to T - n_i,
    so only multisets drawn from those admissible values need checking.
    Returns sorted index tuples (profiles up to permutation; the game is
    symmetric).
    """
    n = spec.n_players
    grid = spec.grid(k) if not spec.is_quantum else CLASSICAL_MAX * np.arange(k + 1) / k
    idx = np.arange(k + 1)
    # u[own, rest]: utility of own grid index against the others' index sum `rest`.
    rest = np.arange((n - 1) * k + 1)
    x_own = grid[:, None]
    x_rest = CLASSICAL_MAX * rest[None, :] / k
    util = -(x_own - spec.p / n * (x_own + x_rest)) ** 2
    best = util.max(axis=0)
    is_best = grid_best(util, 0, tol * np.maximum(1.0, np.abs(best)), weak)

    found = []
    for total in range(n * k + 1):
        own = idx[(total - idx >= 0) & (total - idx <= (n - 1) * k)]
        admissible = [int(v) for v in own if is_best[v, total - v]]
        for combo in itertools.combinations_with_replacement(admissible, n):
            if sum(combo) == total:
                found.append(combo)
    return sorted(found)


def quantum_valuations(thetas, spec: GameSpec) -> np.ndarray:
    """Adjusted valuations for angle profiles of shape (..., N)."""
    thetas = np.asarray(thetas, dtype=float)
    flat = thetas.reshape(-1, spec.n_players)
    phi = np.array([ph[0] for ph in spec.phases])
    psi = np.array([ph[1] for ph in spec.phases])
    vals = qcore.adjusted_valuations_batch(spec.gamma, flat, phi[None, :], psi[None, :])
    return vals.reshape(thetas.shape)


def quantum_utilities(thetas, spec: GameSpec) -> np.ndarray:
    """All players' utilities on the [0, 1] valuation scale, same shape as ``thetas``."""
    return guessing_utilities(quantum_valuations(thetas, spec), spec.p)


def quantum_utility(profile: Sequence[float], spec: GameSpec, i: int) -> float:
    if not spec.is_quantum:
        raise InputDomainError("quantum_utility needs a quantum-scale spec")
    _check_player(i, spec)
    thetas = _check_profile(profile, spec)
    return float(quantum_utilities(thetas, spec)[i])


def utility_matrices(spec: GameSpec, grid1, grid2=None) -> tuple[np.ndarray, np.ndarray]:
    """Two-player payoff tables u1[m, n], u2[m, n] for theta1 = grid1[m], theta2 = grid2[n]."""
    if spec.n_players != 2:
        raise InputDomainError("utility_matrices is for two-player games")
    grid1 = np.asarray(grid1, dtype=float)
    grid2 = grid1 if grid2 is None else np.asarray(grid2, dtype=float)
    t1, t2 = np.meshgrid(grid1, grid2, indexing="ij")
    profiles = np.stack([t1, t2], axis=-1)
    if spec.is_quantum:
        u = quantum_utilities(profiles, spec)
    else:
        u = guessing_utilities(profiles, spec.p)
    return u[..., 0], u[..., 1]


def _arccos(c: float) -> float:
    if c < -1 - ARCCOS_SLACK or c > 1 + ARCCOS_SLACK:
        raise ArithmeticError(f"cosine {c} outside [-1, 1]")
    return math.acos(min(1.0, max(-1.0, c)))


def eq6_extremum(theta2: float) -> float:
    """Interior stationary point of player 1's utility in the mismatched game.

    cos(theta1) = +-sqrt((1 - 6c + 9c^2) / (13 - 6c - 3c^2)), c = cos(theta2),
    negative below theta2 = arccos(1/3).  These points are minima of u1; the
    best responses sit on the boundary (see :func:`best_response_p1`).
    """
    qcore._check_range("theta2", theta2, 0.0, math.pi)
    c = math.cos(theta2)
    ratio = (1 - 6 * c + 9 * c * c) / (13 - 6 * c - 3 * c * c)
    root = math.sqrt(max(ratio, 0.0))
    sign = -1.0 if theta2 < math.acos(1 / 3) else 1.0
    return _arccos(sign * root)


def best_response_p1(theta2: float, spec: GameSpec = MISMATCHED) -> float:
    """0 or pi, whichever pays player 1 more; ties go to 0."""
    qcore._check_range("theta2", theta2, 0.0, math.pi)
    u_zero = quantum_utility((0.0, theta2), spec, 0)
    u_pi = quantum_utility((math.pi, theta2), spec, 0)
    return math.pi if u_pi > u_zero + TIE_TOL else 0.0


def eq7_candidates(theta1: float) -> dict[str, float | None]:
    """Both branches of player 2's maximizer, as cos(theta2), or None outside a branch's range.

    cos(theta2) = (1 + 4c - 12c^2 +- 8 sqrt(6) D sin(theta1)) / (12c^2 - 12c - 49),
    D = sqrt(5 + 2c - cos(2 theta1)), c = cos(theta1).  These are the exact roots
    of u2 = 0 for the mismatched game.  The minus branch holds on
    [0, 2pi/3] and the plus branch on [pi/2, pi].
    """
    qcore._check_range("theta1", theta1, 0.0, math.pi)
    c = math.cos(theta1)
    delta = math.sqrt(5 + 2 * c - math.cos(2 * theta1))
    spread = 8 * math.sqrt(6) * delta * math.sin(theta1)
    denom = 12 * c * c - 12 * c - 49
    out = {"minus": None, "plus": None}
    if theta1 <= 2 * math.pi / 3 + ARCCOS_SLACK:
        out["minus"] = (1 + 4 * c - 12 * c * c - spread) / denom
    if theta1 >= math.pi / 2 - ARCCOS_SLACK:
        out["plus"] = (1 + 4 * c - 12 * c * c + spread) / denom
    return out


def best_response_p2(theta1: float, spec: GameSpec = MISMATCHED) -> float:
    """Player 2's maximizing theta2; in the branch overlap the higher-paying candidate wins (minus on ties)."""
    best, best_u = None, -math.inf
    for branch in ("minus", "plus"):
        c2 = eq7_candidates(theta1)[branch]
        if c2 is None:
            continue
        theta2 = _arccos(c2)
        u = quantum_utility((theta1, theta2), spec, 1)
        if u > best_u + TIE_TOL:
            best, best_u = theta2, u
    return best


def grid_best(u: np.ndarray, axis: int, tol: float = TIE_TOL, weak: bool = False) -> np.ndarray:
    """Boolean mask of grid best responses along ``axis`` of a payoff table.

    By default each opponent strategy gets exactly one best response: the
    lowest index within ``tol`` of the maximum (ties go toward 0, as in
    :func:`best_response_p1`).  ``weak=True`` keeps every tied maximizer.
    """
    u = np.asarray(u, dtype=float)
    hit = u >= u.max(axis=axis, keepdims=True) - tol
    if weak:
        return hit
    first = np.argmax(hit, axis=axis)
    mask = np.zeros_like(hit)
    np.put_along_axis(mask, np.expand_dims(first, axis), True, axis=axis)
    return mask


def pure_nash_scan(spec: GameSpec, k: int, tol: float = TIE_TOL, weak: bool = False) -> list[tuple[float, float]]:
    """Grid cells on {n pi / k}^2 where both players grid-best-respond.

    An empty list certifies that the discretized game has no pure equilibrium.
    See :func:`grid_best` for the tie rule.
    """
    if spec.n_players != 2:
        raise InputDomainError("pure_nash_scan is for two-player games")
    if k < 2:
        raise InputDomainError("k must be >= 2")
    grid = spec.grid(k)
    u1, u2 = utility_matrices(spec, grid)
    cells = np.argwhere(grid_best(u1, 0, tol, weak) & grid_best(u2, 1, tol, weak))
    return [(float(grid[m]), float(grid[n])) for m, n in cells]


def best_response_sets(spec: GameSpec, k: int, tol: float = TIE_TOL, weak: bool = False):
    """Grid best responses: player 1 per column (theta2) and player 2 per row (theta1).

    Returns (grid, u1, u2, br1, br2) where ``br1[n]`` lists the theta1 indices
    maximizing u1 against grid[n] and ``br2[m]`` the theta2 indices maximizing
    u2 against grid[m].  Single entries unless ``weak``.
    """
    grid = spec.grid(k)
    u1, u2 = utility_matrices(spec, grid)
    b1, b2 = grid_best(u1, 0, tol, weak), grid_best(u2, 1, tol, weak)
    br1 = [np.flatnonzero(b1[:, n]).tolist() for n in range(len(grid))]
    br2 = [np.flatnonzero(b2[m, :]).tolist() for m in range(len(grid))]
    return grid, u1, u2, br1, br2
