"""Mixed Nash equilibria of discretized two-player games.

Two solvers:

* :func:`support_enumeration` -- solves the indifference system for every
  support pair and keeps the profiles with non-negative weights and no
  profitable pure deviation.  Complete for non-degenerate games; exponential in
  the number of strategies.
* :func:`lemke_howson` -- complementary pivoting from one dropped label; one
  equilibrium per start.  :func:`lemke_howson_all` runs every label.

:func:`enumerate_mixed` picks support enumeration up to ``SUPPORT_ENUM_LIMIT``
strategies per player and Lemke-Howson from all labels beyond that, and
records which completeness class applies.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import game as _game
from .game import GameSpec
from .qcore import InputDomainError

SUPPORT_ENUM_LIMIT = 13
AUDIT_EPS = 1e-8
SUPPORT_TOL = 1e-9
DEDUP_TOL = 1e-7
PERTURBATION = 1e-9
UNEQUAL_SUPPORT_BUDGET = 1 << 14


@dataclass(frozen=True)
class Bimatrix:
    a: np.ndarray
    b: np.ndarray
    grid: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        grid = np.asarray(self.grid, dtype=float)
        if a.ndim != 2 or a.shape != b.shape:
            raise InputDomainError(f"payoff matrices must share a 2-D shape, got {a.shape} and {b.shape}")
        if a.shape[0] != a.shape[1] or grid.shape != (a.shape[0],):
            raise InputDomainError("grid must label every row and column")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InputDomainError("payoffs must be finite")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise InputDomainError("grid must be strictly increasing")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def from_payoffs(cls, a, b) -> "Bimatrix":
        """Square payoffs labelled by strategy index."""
        a = np.asarray(a, dtype=float)
        return cls(a, b, np.arange(a.shape[0], dtype=float))

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape


@dataclass(frozen=True)
class MixedProfile:
    w1: np.ndarray
    w2: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        for name in ("w1", "w2"):
            w = np.asarray(getattr(self, name), dtype=float)
            if np.any(w < -SUPPORT_TOL) or abs(w.sum() - 1) > 1e-9:
                raise InputDomainError(f"{name} is not a probability vector: {w}")
            w = np.where(w > SUPPORT_TOL, w, 0.0)
            object.__setattr__(self, name, w / w.sum())

    @property
    def support1(self) -> tuple[int, ...]:
        return tuple(np.flatnonzero(self.w1).tolist())

    @property
    def support2(self) -> tuple[int, ...]:
        return tuple(np.flatnonzero(self.w2).tolist())

    def sort_key(self):
        return (len(self.support1), self.support1, len(self.support2), self.support2,
                tuple(np.round(self.w1, 12)), tuple(np.round(self.w2, 12)))


@dataclass
class EnumerationResult:
    profiles: list
    method: str
    complete: bool
    degenerate: bool = False
    notes: list = field(default_factory=list)

    @property
    def completeness(self) -> str:
        return "complete" if self.complete else "best-effort"


def build_bimatrix(spec: GameSpec, k: int) -> Bimatrix:
    """Payoff tables of the two-player game restricted to the grid {n * max / k}."""
    if int(k) != k or k < 1:
        raise InputDomainError("k must be an integer >= 1")
    if spec.n_players != 2:
        raise InputDomainError("bimatrix games need exactly two players")
    grid = spec.grid(int(k))
    a, b = _game.utility_matrices(spec, grid)
    return Bimatrix(a, b, grid)


def regret(profile: MixedProfile, a, b) -> tuple[float, float]:
    """Largest gain either player gets from a pure deviation."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, y = profile.w1, profile.w2
    row_payoffs = a @ y
    col_payoffs = x @ b
    return float(row_payoffs.max() - x @ row_payoffs), float(col_payoffs.max() - col_payoffs @ y)


def audit(profile: MixedProfile, a, b, eps: float = AUDIT_EPS) -> bool:
    """True when no pure deviation improves either player by more than ``eps``."""
    r1, r2 = regret(profile, a, b)
    return r1 <= eps and r2 <= eps


def _dedupe(profiles, tol: float = DEDUP_TOL) -> list:
    kept = []
    for prof in profiles:
        if not any(np.max(np.abs(prof.w1 - q.w1)) <= tol and np.max(np.abs(prof.w2 - q.w2)) <= tol
                   for q in kept):
            kept.append(prof)
    return sorted(kept, key=MixedProfile.sort_key)


def _solve_indifference(sub: np.ndarray):
    """Weights w (on columns of each sub[b]) making every row of sub[b] @ w equal.

    ``sub`` has shape (batch, r, c) with r == c.  Returns (weights, singular)
    where singular rows have NaN weights.
    """
    batch, s, _ = sub.shape
    system = np.zeros((batch, s + 1, s + 1))
    system[:, :s, :s] = sub
    system[:, :s, s] = -1.0
    system[:, s, :s] = 1.0
    rhs = np.zeros((batch, s + 1))
    rhs[:, s] = 1.0
    try:
        sol = np.linalg.solve(system, rhs[..., None])[..., 0]
        singular = np.zeros(batch, dtype=bool)
    except np.linalg.LinAlgError:
        sol = np.full((batch, s + 1), np.nan)
        singular = np.zeros(batch, dtype=bool)
        for i in range(batch):
            try:
                sol[i] = np.linalg.solve(system[i], rhs[i])
            except np.linalg.LinAlgError:
                singular[i] = True
    # near-singular systems produce huge weights; treat them like singular ones
    bad = ~np.all(np.isfinite(sol), axis=1) | (np.abs(sol[:, :s]).max(axis=1) > 1e9)
    singular |= bad
    sol[singular] = np.nan
    return sol[:, :s], singular


def _conditionally_dominated(payoff_rows: np.ndarray) -> np.ndarray:
    """Columns strictly dominated by another column on the given rows."""
    # payoff_rows: (r, n); dominated[j] if some j' beats j on every row
    diff = payoff_rows[:, :, None] - payoff_rows[:, None, :]  # [r, j', j]
    return np.any(np.all(diff > 0, axis=0), axis=0)


def _equal_support_pass(a: np.ndarray, b: np.ndarray, tol: float):
    m, n = a.shape
    scale = max(1.0, float(np.abs(a).max()), float(np.abs(b).max()))
    br_tol = 1e-10 * scale
    found = []
    degenerate = False
    for s in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), s):
            rows = list(rows)
            pruned = _conditionally_dominated(b[rows])
            candidates = [j for j in range(n) if not pruned[j]]
            if len(candidates) < s:
                continue
            col_sets = np.array(list(itertools.combinations(candidates, s)), dtype=int)
            # column weights y making the row player indifferent over `rows`
            a_sub = a[np.ix_(rows)][:, col_sets].transpose(1, 0, 2)  # (batch, s rows, s cols)
            y, sing_y = _solve_indifference(a_sub)
            # row weights x making the column player indifferent over the column set
            b_sub = b[rows][:, col_sets].transpose(1, 2, 0)  # (batch, s cols, s rows)
            x, sing_x = _solve_indifference(b_sub)
            if np.any(sing_x | sing_y):
                degenerate = True
            ok = ~(sing_x | sing_y)
            ok &= np.all(y > tol, axis=1) & np.all(x > tol, axis=1)
            for idx in np.flatnonzero(ok):
                cols = col_sets[idx]
                w1 = np.zeros(m)
                w1[rows] = x[idx]
                w2 = np.zeros(n)
                w2[cols] = y[idx]
                row_pay = a @ w2
                col_pay = w1 @ b
                v1 = w1 @ row_pay
                v2 = col_pay @ w2
                if row_pay.max() > v1 + br_tol or col_pay.max() > v2 + br_tol:
                    continue
                # more pure best responses than support size signals a degenerate game
                if (np.sum(row_pay >= v1 - br_tol) > s) or (np.sum(col_pay >= v2 - br_tol) > s):
                    degenerate = True
                found.append((w1, w2))
    return found, degenerate


def _unequal_support_pass(a: np.ndarray, b: np.ndarray, tol: float):
    """Support pairs of different sizes, solved in the least-squares sense (degenerate games only)."""
    m, n = a.shape
    scale = max(1.0, float(np.abs(a).max()), float(np.abs(b).max()))
    br_tol = 1e-10 * scale
    found = []

    def weights(sub):
        r, c = sub.shape
        system = np.zeros((r + 1, c + 1))
        system[:r, :c] = sub
        system[:r, c] = -1.0
        system[r, :c] = 1.0
        rhs = np.zeros(r + 1)
        rhs[r] = 1.0
        sol, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        if np.max(np.abs(system @ sol - rhs)) > 1e-9 * scale:
            return None
        return sol[:c]

    for s1 in range(1, m + 1):
        for s2 in range(1, n + 1):
            if s1 == s2:
                continue
            for rows in itertools.combinations(range(m), s1):
                for cols in itertools.combinations(range(n), s2):
                    y = weights(a[np.ix_(rows, cols)])
                    if y is None or np.any(y <= tol):
                        continue
                    x = weights(b[np.ix_(rows, cols)].T)
                    if x is None or np.any(x <= tol):
                        continue
                    w1 = np.zeros(m)
                    w1[list(rows)] = x
                    w2 = np.zeros(n)
                    w2[list(cols)] = y
                    row_pay, col_pay = a @ w2, w1 @ b
                    if row_pay.max() > w1 @ row_pay + br_tol or col_pay.max() > col_pay @ w2 + br_tol:
                        continue
                    found.append((w1, w2))
    return found


def lexicographic_perturbation(a, b, magnitude: float = PERTURBATION):
    """Tie-breaking payoff shifts: row i gains magnitude * 2^-i, column j gains magnitude * 2^-j."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    a2 = a + magnitude * (0.5 ** np.arange(1, m + 1))[:, None]
    b2 = b + magnitude * (0.5 ** np.arange(1, n + 1))[None, :]
    return a2, b2


def support_enumeration(a, b, tol: float = SUPPORT_TOL) -> EnumerationResult:
    """All equilibria reachable by support enumeration, audited on the original payoffs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    raw, degenerate = _equal_support_pass(a, b, tol)
    notes = []
    complete = True
    if degenerate:
        a2, b2 = lexicographic_perturbation(a, b)
        extra, _ = _equal_support_pass(a2, b2, tol)
        raw += extra
        notes.append("degenerate: added equilibria of the lexicographically perturbed game")
        pairs = (2 ** a.shape[0] - 1) * (2 ** a.shape[1] - 1)
        if pairs <= UNEQUAL_SUPPORT_BUDGET:
            raw += _unequal_support_pass(a, b, tol)
            notes.append("degenerate: unequal support sizes enumerated")
        else:
            notes.append("degenerate: unequal support sizes skipped (too many pairs)")
            complete = False
    profiles = []
    for w1, w2 in raw:
        prof = MixedProfile(w1 / w1.sum(), w2 / w2.sum(), degenerate=degenerate)
        if audit(prof, a, b):
            profiles.append(prof)
    return EnumerationResult(_dedupe(profiles), "support-enumeration", complete, degenerate, notes)


def _pivot(tableau: np.ndarray, basis: list, entering: int, max_ratio_tol: float = 1e-12) -> int:
    """Bring ``entering`` into the basis by the minimum-ratio rule; returns the leaving label."""
    col = tableau[:, entering]
    positive = col > max_ratio_tol
    if not np.any(positive):
        raise ArithmeticError("unbounded pivot column")
    ratios = np.full(col.shape, np.inf)
    ratios[positive] = tableau[positive, -1] / col[positive]
    best = ratios.min()
    ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
    row = min(ties, key=lambda r: basis[r])
    tableau[row] /= tableau[row, entering]
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, entering] != 0:
            tableau[r] -= tableau[r, entering] * tableau[row]
    leaving = basis[row]
    basis[row] = entering
    return leaving


def lemke_howson(a, b, initial_label: int = 0, max_pivots: int = 10_000) -> MixedProfile:
    """One equilibrium by complementary pivoting, dropping ``initial_label`` first.

    Labels 0..m-1 belong to row strategies and m..m+n-1 to columns.  Works on
    the polytopes {x >= 0 : B^T x <= 1} and {y >= 0 : A y <= 1} after shifting
    payoffs to be positive.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    if not 0 <= initial_label < m + n:
        raise InputDomainError(f"label must be in [0, {m + n})")
    a_pos = a - a.min() + 1.0
    b_pos = b - b.min() + 1.0
    # row-player polytope: variables x_i (label i) and slacks s_j (label m + j)
    p_tab = np.hstack([b_pos.T, np.eye(n), np.ones((n, 1))])
    p_basis = [m + j for j in range(n)]
    # column-player polytope: slacks r_i (label i) and variables y_j (label m + j)
    q_tab = np.hstack([np.eye(m), a_pos, np.ones((m, 1))])
    q_basis = list(range(m))

    entering = initial_label
    in_p = initial_label < m
    for _ in range(max_pivots):
        if in_p:
            leaving = _pivot(p_tab, p_basis, entering)
        else:
            leaving = _pivot(q_tab, q_basis, entering)
        if leaving == initial_label:
            break
        entering = leaving
        in_p = not in_p
    else:
        raise ArithmeticError("Lemke-Howson did not terminate")

    x = np.zeros(m)
    for row, label in enumerate(p_basis):
        if label < m:
            x[label] = p_tab[row, -1]
    y = np.zeros(n)
    for row, label in enumerate(q_basis):
        if label >= m:
            y[label - m] = q_tab[row, -1]
    x = np.clip(x, 0.0, None)
    y = np.clip(y, 0.0, None)
    return MixedProfile(x / x.sum(), y / y.sum())


def lemke_howson_all(a, b) -> EnumerationResult:
    """Lemke-Howson from every label; audited and deduplicated."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    profiles, notes = [], []
    for label in range(m + n):
        try:
            prof = lemke_howson(a, b, label)
        except ArithmeticError as exc:
            notes.append(f"label {label}: {exc}")
            continue
        if audit(prof, a, b):
            profiles.append(prof)
        else:
            notes.append(f"label {label}: result failed the audit")
    return EnumerationResult(_dedupe(profiles), "lemke-howson", False, False, notes)


def enumerate_mixed(game: Bimatrix, support_limit: int = SUPPORT_ENUM_LIMIT) -> EnumerationResult:
    """Equilibria of a bimatrix game, with the solver chosen by size."""
    if max(game.shape) <= support_limit:
        return support_enumeration(game.a, game.b)
    result = lemke_howson_all(game.a, game.b)
    result.notes.insert(0, "Lemke-Howson from all labels; other equilibria may exist")
    return result


def average_strategy(profile: MixedProfile, game: Bimatrix) -> tuple[float, float]:
    """Expected grid value for each player."""
    if profile.w1.shape != (game.shape[0],) or profile.w2.shape != (game.shape[1],):
        raise InputDomainError("profile does not match the game's dimensions")
    return float(profile.w1 @ game.grid), float(profile.w2 @ game.grid)
