"""Single-commodity exchange with optional quantum mediation of valuations.

Each round every trader observes (cash, stock, previous price), submits one
buy or sell order for a single unit, and buyers are paired with sellers whose
valuations lie within the bid-ask tolerance.  In quantum mode the valuations
pass through the entangling circuit in :mod:`qmarket.qcore` before matching.

Seeds: run ``r`` of an experiment with master seed ``s`` uses ``run_seed =
s + r``.  Every random stream is a PCG64 generator seeded from
``SeedSequence([run_seed, tag, trader_id])`` with tag 0 for weight
initialization, 1 for exploration noise and 2 for market-level draws (phases,
optional shuffling; trader_id is 0 there).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import qcore
from .agents import BUY, SELL, Agent, NormalStream, Observation, PolicyNet, decode_order

TAG_INIT, TAG_NOISE, TAG_MARKET = 0, 1, 2
MODES = ("classical", "quantum")
PHASE_POLICIES = ("random", "fixed")
REWARDS = ("net-worth", "delta")
MATCH_ORDERS = ("id", "shuffle")


@dataclass
class TraderAccount:
    id: int
    cash: float
    stock: int

    def net_worth(self, price: float) -> float:
        return self.cash + self.stock * price


@dataclass(frozen=True)
class MarketConfig:
    n_traders: int = 8
    initial_cash: float = 10.0
    initial_stock: int = 10
    initial_price: float = 10.0
    tolerance: float = 1.0
    rounds: int = 1000
    mode: str = "classical"
    gamma: float = math.pi / 2
    phase_policy: str = "random"
    fixed_phi: float = 0.0
    fixed_psi: float = 0.0
    seed: int = 0
    reward: str = "net-worth"
    baseline: bool = False
    normalize_obs: bool = False
    match_order: str = "id"
    allow_short: bool = False

    def __post_init__(self):
        if self.n_traders < 2 or self.n_traders > qcore.MAX_QUBITS:
            raise ValueError(f"n_traders must be in [2, {qcore.MAX_QUBITS}]")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.initial_cash < 0 or self.initial_stock < 0 or not self.initial_price > 0:
            raise ValueError("initial cash/stock must be non-negative and price positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.phase_policy not in PHASE_POLICIES:
            raise ValueError(f"phase_policy must be one of {PHASE_POLICIES}")
        if self.reward not in REWARDS:
            raise ValueError(f"reward must be one of {REWARDS}")
        if self.match_order not in MATCH_ORDERS:
            raise ValueError(f"match_order must be one of {MATCH_ORDERS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        qcore._check_range("gamma", self.gamma, 0.0, qcore.GAMMA_MAX)
        qcore._check_range("fixed_phi", self.fixed_phi, 0.0, 2 * math.pi)
        qcore._check_range("fixed_psi", self.fixed_psi, 0.0, 2 * math.pi)


class Order(NamedTuple):
    trader_id: int
    side: str
    valuation: float


class Trade(NamedTuple):
    buyer: int
    seller: int
    price: float


@dataclass
class RoundRecord:
    round: int
    avg_price: float
    volume: int
    cash: list = field(default_factory=list)
    stock: list = field(default_factory=list)
    net_worth: list = field(default_factory=list)


def stream(run_seed: int, tag: int, trader_id: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([run_seed, tag, trader_id])))


def collect_orders(agents: Sequence[Agent], observations: Sequence) -> list[Order]:
    """One order per agent, in trader-id order."""
    orders = []
    for i, (agent, obs) in enumerate(zip(agents, observations)):
        side, valuation = decode_order(agent.act(obs))
        orders.append(Order(i, side, valuation))
    return orders


class PhaseSource:
    """Per-qubit (phi, psi) for each round: uniform in [0, 2pi) or fixed."""

    def __init__(self, policy: str = "random", rng: np.random.Generator | None = None,
                 phi: float = 0.0, psi: float = 0.0):
        if policy not in PHASE_POLICIES:
            raise ValueError(f"unknown phase policy {policy!r}")
        if policy == "random" and rng is None:
            raise ValueError("random phases need a generator")
        self.policy = policy
        self.rng = rng
        self.phi = phi
        self.psi = psi

    def draw(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if self.policy == "fixed":
            return np.full(n, self.phi), np.full(n, self.psi)
        phases = self.rng.uniform(0.0, 2 * math.pi, size=(2, n))
        return phases[0], phases[1]


def quantum_mediate(orders: Sequence[Order], gamma: float, phases: PhaseSource) -> list[Order]:
    """Replace every valuation by its circuit-adjusted value; sides are kept."""
    if not orders:
        return []
    scaling = qcore.rescale_to_market([o.valuation for o in orders])
    if scaling.degenerate:
        return [o._replace(valuation=0.0) for o in orders]
    phi, psi = phases.draw(len(orders))
    params = qcore.CircuitParams(gamma, scaling.theta, phi, psi)
    adjusted = qcore.adjusted_valuations(params) * scaling.vmax
    return [o._replace(valuation=float(v)) for o, v in zip(orders, adjusted)]


def match_orders(orders: Sequence[Order], accounts: Sequence[TraderAccount], tolerance: float,
                 allow_short: bool = False, order: Sequence[int] | None = None):
    """First-come-first-served matching of buyers against sellers.

    ``order`` is the arrival sequence of trader ids (ascending ids by default).
    Each buyer, in arrival order, takes the first still-unmatched seller whose
    ask is within ``tolerance`` of the bid and for which the trade is feasible.
    Trades execute one unit at the bid-ask midpoint.  Returns the trades and a
    new list of accounts; the inputs are not modified.
    """
    accounts = [replace(a) for a in accounts]
    by_id = {o.trader_id: o for o in orders}
    sequence = sorted(by_id) if order is None else [i for i in order if i in by_id]
    buyers = [by_id[i] for i in sequence if by_id[i].side == BUY]
    sellers = [by_id[i] for i in sequence if by_id[i].side == SELL]
    matched = set()
    trades = []
    for bid in buyers:
        buyer = accounts[bid.trader_id]
        for ask in sellers:
            if ask.trader_id in matched or ask.trader_id == bid.trader_id:
                continue
            if abs(bid.valuation - ask.valuation) > tolerance:
                continue
            seller = accounts[ask.trader_id]
            price = (bid.valuation + ask.valuation) / 2
            if not allow_short and (seller.stock < 1 or buyer.cash < price):
                continue
            buyer.cash -= price
            buyer.stock += 1
            seller.cash += price
            seller.stock -= 1
            matched.add(ask.trader_id)
            trades.append(Trade(bid.trader_id, ask.trader_id, price))
            break
    return trades, accounts


class Market:
    """State of one simulation run."""

    def __init__(self, config: MarketConfig, run_index: int = 0, agents: Sequence[Agent] | None = None):
        self.config = config
        self.run_seed = (config.seed + run_index) % 2**64
        n = config.n_traders
        if agents is None:
            agents = [
                Agent(PolicyNet.initialize(stream(self.run_seed, TAG_INIT, i)),
                      NormalStream(stream(self.run_seed, TAG_NOISE, i)),
                      baseline=config.baseline)
                for i in range(n)
            ]
        if len(agents) != n:
            raise ValueError("need exactly one agent per trader")
        self.agents = list(agents)
        self.accounts = [TraderAccount(i, float(config.initial_cash), int(config.initial_stock)) for i in range(n)]
        self.price = float(config.initial_price)
        self.round = 0
        market_rng = stream(self.run_seed, TAG_MARKET)
        self.market_rng = market_rng
        self.phases = PhaseSource(config.phase_policy, market_rng, config.fixed_phi, config.fixed_psi)
        self._last_worth = [a.net_worth(self.price) for a in self.accounts]

    def observations(self) -> list[Observation]:
        c = self.config
        obs = []
        for a in self.accounts:
            if c.normalize_obs:
                obs.append(Observation(a.cash / c.initial_cash if c.initial_cash else a.cash,
                                       a.stock / c.initial_stock if c.initial_stock else a.stock,
                                       self.price / c.initial_price))
            else:
                obs.append(Observation(a.cash, float(a.stock), self.price))
        return obs

    def run_round(self) -> RoundRecord:
        c = self.config
        orders = collect_orders(self.agents, self.observations())
        if c.mode == "quantum":
            orders = quantum_mediate(orders, c.gamma, self.phases)
        arrival = None
        if c.match_order == "shuffle":
            arrival = [int(i) for i in self.market_rng.permutation(c.n_traders)]
        trades, self.accounts = match_orders(orders, self.accounts, c.tolerance, c.allow_short, arrival)
        if trades:
            self.price = sum(t.price for t in trades) / len(trades)
        worth = [a.net_worth(self.price) for a in self.accounts]
        for i, agent in enumerate(self.agents):
            reward = worth[i] if c.reward == "net-worth" else worth[i] - self._last_worth[i]
            agent.learn(reward)
        self._last_worth = worth
        record = RoundRecord(self.round, self.price, len(trades),
                             [a.cash for a in self.accounts], [a.stock for a in self.accounts], worth)
        self.round += 1
        return record


def run_simulation(config: MarketConfig, run_index: int = 0) -> list[RoundRecord]:
    """Run ``config.rounds`` rounds from fresh agents and accounts."""
    market = Market(config, run_index)
    return [market.run_round() for _ in range(config.rounds)]
