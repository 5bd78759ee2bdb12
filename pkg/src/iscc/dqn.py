"""Q-learning operator selection for the MOEA.

The network is a plain numpy MLP with hand-written backprop. ``TabularQ``
exposes the same interface so the TD machinery can be checked against
value iteration on a toy MDP.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import DQNSettings, MOEASettings
from .moea import (
    Evaluator,
    Population,
    PopulationState,
    apply_operator,
    environmental_selection,
    finish,
    init_population,
    log_row,
    population_state,
)


class QNetwork:
    """Fully connected ReLU network; ``params`` alternates weights and biases.

    ``zero_output`` starts the output layer at zero so every action begins
    with Q = 0 and only learned reward differences separate them.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None, zero: bool = False,
                 zero_output: bool = False):
        self.sizes = tuple(int(s) for s in sizes)
        self.params = []
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            last = i == len(self.sizes) - 2
            if zero or rng is None or (last and zero_output):
                w = np.zeros((fan_in, fan_out))
            else:
                scale = np.sqrt((1.0 if last else 2.0) / fan_in)
                w = rng.standard_normal((fan_in, fan_out)) * scale
            self.params += [w, np.zeros(fan_out)]

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def _layers(self):
        return list(zip(self.params[0::2], self.params[1::2]))

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("network input must be finite")
        h = x
        layers = self._layers()
        for i, (w, b) in enumerate(layers):
            h = h @ w + b
            if i < len(layers) - 1:
                h = np.maximum(h, 0.0)
        return h

    def loss_and_grad(self, states, actions, targets):
        """Mean squared TD error on the taken actions, with its parameter gradient."""
        x = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.asarray(actions, dtype=int)
        targets = np.asarray(targets, dtype=float)
        n = len(x)
        acts = [x]
        pre = []
        layers = self._layers()
        h = x
        for i, (w, b) in enumerate(layers):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
            acts.append(h)
        q = acts[-1]
        err = q[np.arange(n), actions] - targets
        loss = float(np.mean(err**2))
        delta = np.zeros_like(q)
        delta[np.arange(n), actions] = 2.0 * err / n
        grads = [None] * len(self.params)
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ w.T) * (pre[i - 1] > 0)
        return loss, grads

    def apply(self, grads, lr: float):
        for p, g in zip(self.params, grads):
            p -= lr * g

    def copy_from(self, other: "QNetwork"):
        self.params = [p.copy() for p in other.params]

    def clone(self) -> "QNetwork":
        net = QNetwork(self.sizes)
        net.copy_from(self)
        return net


class TabularQ:
    """Lookup-table Q function with the QNetwork interface (states are integers)."""

    def __init__(self, n_states: int, n_actions: int):
        self.table = np.zeros((n_states, n_actions))
        self.params = [self.table]

    def forward(self, s) -> np.ndarray:
        return self.table[np.asarray(s, dtype=int)]

    def loss_and_grad(self, states, actions, targets):
        s = np.atleast_1d(np.asarray(states, dtype=int))
        a = np.asarray(actions, dtype=int)
        err = self.table[s, a] - np.asarray(targets, dtype=float)
        grad = np.zeros_like(self.table)
        np.add.at(grad, (s, a), 2.0 * err / len(s))
        return float(np.mean(err**2)), [grad]

    def apply(self, grads, lr: float):
        self.table -= lr * grads[0]
        self.params = [self.table]

    def copy_from(self, other: "TabularQ"):
        self.table = other.table.copy()
        self.params = [self.table]

    def clone(self) -> "TabularQ":
        t = TabularQ(*self.table.shape)
        t.copy_from(self)
        return t


@dataclass(frozen=True)
class ReplayRecord:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: deque = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, rec: ReplayRecord):
        self._items.append(rec)

    @property
    def records(self) -> list[ReplayRecord]:
        return list(self._items)

    def sample(self, k: int, rng: np.random.Generator) -> list[ReplayRecord]:
        idx = rng.choice(len(self._items), size=min(k, len(self._items)), replace=False)
        return [self._items[i] for i in idx]


def select_action(qvals, eps: float, rng: np.random.Generator) -> int:
    q = np.asarray(qvals)
    if rng.random() < eps:
        return int(rng.integers(0, q.size))
    return int(np.argmax(q))  # first maximum wins ties


def td_target(rec: ReplayRecord, target_net, xi: float) -> float:
    return float(rec.reward + xi * np.max(target_net.forward(rec.next_state)))


def train_step(net, target_net, batch: list[ReplayRecord], lr: float, xi: float) -> float:
    if not batch:
        raise ValueError("empty batch")
    states = np.array([r.state for r in batch])
    actions = np.array([r.action for r in batch])
    rewards = np.array([r.reward for r in batch])
    nxt = np.array([r.next_state for r in batch])
    # batched form of td_target
    targets = rewards + xi * np.max(target_net.forward(nxt), axis=-1)
    loss, grads = net.loss_and_grad(states, actions, targets)
    net.apply(grads, lr)
    return loss


def reward(prev: PopulationState, nxt: PopulationState, weights=(1.0, 1.0, 1.0)) -> float:
    w_con, w_fea, w_div = weights
    return w_con * (prev.con - nxt.con) + w_fea * (prev.fea - nxt.fea) + w_div * (prev.div - nxt.div)


class StateNormalizer:
    """Each state component over its running maximum, clipped to [-1, 1] for con and [0, 1] otherwise.

    Only post-selection states update the maxima. The random initial
    population carries penalty values orders of magnitude above anything
    selection keeps, and would otherwise flatten every later reward. div is
    capped at ``div_clip`` first; unscaled, its swings on a converged
    population would drown the con and fea terms of the reward.
    """

    def __init__(self, div_clip: float = 1e3):
        self.div_clip = div_clip
        self.con_max = 0.0
        self.fea_max = 0.0
        self.div_max = 0.0

    def update(self, st: PopulationState):
        self.con_max = max(self.con_max, abs(st.con))
        self.fea_max = max(self.fea_max, st.fea)
        self.div_max = max(self.div_max, min(st.div, self.div_clip))

    def __call__(self, st: PopulationState) -> PopulationState:
        con = st.con / self.con_max if self.con_max > 0 else st.con
        fea = st.fea / self.fea_max if self.fea_max > 0 else st.fea
        div = min(st.div, self.div_clip)
        div = div / self.div_max if self.div_max > 0 else div
        return PopulationState(float(np.clip(con, -1.0, 1.0)), float(np.clip(fea, 0.0, 1.0)),
                               float(np.clip(div, 0.0, 1.0 if self.div_max > 0 else self.div_clip)))


def epsilon(evals: int, budget: int, h: DQNSettings) -> float:
    horizon = max(h.eps_decay_frac * budget, 1.0)
    frac = min(1.0, evals / horizon)
    return h.eps_start + (h.eps_end - h.eps_start) * frac


class FixedPolicy:
    """Always the same action; the plain single-operator MOEA."""

    def __init__(self, action: int = 0):
        self.action = action

    def act(self, state, evals, budget):
        return self.action

    def observe(self, prev, action, nxt):
        return None, None


class DQNPolicy:
    def __init__(self, n_actions: int, h: DQNSettings, rng: np.random.Generator):
        self.h = h
        self.rng = rng
        self.net = QNetwork((3, *h.hidden, n_actions), rng, zero_output=True)
        self.target = self.net.clone()
        self.buffer = ReplayBuffer(h.buffer)
        self.norm = StateNormalizer(h.div_clip)
        self.n_train = 0
        self.syncs = []

    def act(self, state: PopulationState, evals: int, budget: int) -> int:
        n = self.net.n_actions
        if len(self.buffer) < self.h.warmup:
            return int(self.rng.integers(0, n))
        q = self.net.forward(self.norm(state).as_array())
        return select_action(q, epsilon(evals, budget, self.h), self.rng)

    def observe(self, prev: PopulationState, action: int, nxt: PopulationState):
        self.norm.update(nxt)
        s0, s1 = self.norm(prev), self.norm(nxt)
        r = reward(s0, s1, self.h.reward_weights)
        self.buffer.push(ReplayRecord(s0.as_array(), action, r, s1.as_array()))
        if len(self.buffer) < self.h.batch:
            return r, None
        losses = []
        for _ in range(self.h.train_steps):
            batch = self.buffer.sample(self.h.batch, self.rng)
            losses.append(train_step(self.net, self.target, batch, self.h.lr, self.h.discount))
            self.n_train += 1
            if self.n_train % self.h.sync_every == 0:
                self.target.copy_from(self.net)
                self.syncs.append(self.n_train)
        return r, float(np.mean(losses))


def gradient_check(net: QNetwork, states, actions, targets, h: float = 1e-6) -> float:
    """Max relative error between backprop and central differences over every parameter."""
    _, grads = net.loss_and_grad(states, actions, targets)
    worst = 0.0
    for p, g in zip(net.params, grads):
        for idx in np.ndindex(p.shape):
            keep = p[idx]
            p[idx] = keep + h
            up, _ = net.loss_and_grad(states, actions, targets)
            p[idx] = keep - h
            down, _ = net.loss_and_grad(states, actions, targets)
            p[idx] = keep
            fd = (up - down) / (2 * h)
            worst = max(worst, abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-8))
    return worst


class ChainMDP:
    """Deterministic chain: action 1 steps right, 0 steps left; reward 1 on landing in the last state."""

    def __init__(self, n_states: int = 4):
        self.n_states = n_states
        self.n_actions = 2

    def step(self, s: int, a: int) -> tuple[int, float]:
        nxt = min(s + 1, self.n_states - 1) if a == 1 else max(s - 1, 0)
        return nxt, float(nxt == self.n_states - 1)


def value_iteration(mdp: ChainMDP, xi: float, tol: float = 1e-12) -> np.ndarray:
    q = np.zeros((mdp.n_states, mdp.n_actions))
    while True:
        new = np.empty_like(q)
        for s in range(mdp.n_states):
            for a in range(mdp.n_actions):
                nxt, r = mdp.step(s, a)
                new[s, a] = r + xi * q[nxt].max()
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new


def tabular_q_learning(mdp: ChainMDP, steps: int, eps: float, xi: float, rng: np.random.Generator,
                       lr: float = 0.25, episode: int = 10) -> TabularQ:
    """Online TD through ``train_step`` with a one-record batch and the table as its own target.

    Episodes of ``episode`` steps start in a uniform random state; the greedy
    walk otherwise parks at the right end and never revisits the left one.
    """
    q = TabularQ(mdp.n_states, mdp.n_actions)
    s = 0
    for i in range(steps):
        if i % episode == 0:
            s = int(rng.integers(0, mdp.n_states))
        a = select_action(q.forward(s), eps, rng)
        nxt, r = mdp.step(s, a)
        train_step(q, q, [ReplayRecord(np.array(s), a, r, np.array(nxt))], lr, xi)
        s = nxt
    return q


def run_moea(problem, budget: int, rng: np.random.Generator, s: MOEASettings, policy=None, algo: str = "moea",
             seed=None, policy_factory=None):
    """Generational loop: one operator per generation, chosen by ``policy``.

    The variation and agent streams are spawned from ``rng`` in a fixed
    order, so a policy never perturbs the variation stream.
    """
    t0 = time.perf_counter()
    var_rng, agent_rng = rng.spawn(2)
    enabled = [i for i, on in enumerate(s.operators) if on]
    if policy is None:
        policy = policy_factory(len(enabled), agent_rng) if policy_factory else FixedPolicy(0)
    ev = Evaluator(problem, s.archive_size)
    pop: Population = ev.fill(init_population(s.pop_size, problem.dim, var_rng))
    state = population_state(pop)
    log = [log_row(0, pop, ev)]
    gen = 0
    while ev.count < budget:
        gen += 1
        n_off = min(s.pop_size, budget - ev.count)
        a = policy.act(state, ev.count, budget)
        op = enabled[a]
        kids = ev.fill(apply_operator(pop, op, var_rng, s, n_off, archive=ev.archive))
        merged = pop + kids
        merged.generation = gen
        pop = environmental_selection(merged, s.pop_size)
        nxt = population_state(pop)
        r, loss = policy.observe(state, a, nxt)
        state = nxt
        log.append(log_row(gen, pop, ev, op=op, reward=r, loss=loss))
    extra = {}
    if isinstance(policy, DQNPolicy):
        extra = {"train_steps": policy.n_train, "syncs": len(policy.syncs)}
    return finish(algo, ev, pop, log, t0, seed, **extra)


def run_dqn_moea(problem, budget: int, h: DQNSettings, rng: np.random.Generator, s: MOEASettings | None = None,
                 seed=None):
    s = s or MOEASettings()
    return run_moea(problem, budget, rng, s, algo="dqn", seed=seed,
                    policy_factory=lambda n, r: DQNPolicy(n, h, r))
