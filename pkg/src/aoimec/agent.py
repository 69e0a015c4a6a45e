"""Per-MU deep learner: state encoding, action masking, epsilon-greedy choice,
bid construction from the post-decision network, replay memory and training
of the Q-network (with a target copy) and the post-decision network."""
from __future__ import annotations

from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import nn
from .auction import Bid
from .config import LearnConfig, WorldConfig
from .link import SERVER, UAV
from .system import Dynamics, MobileUser, Plan


class LocalState(NamedTuple):
    uav_cell: int
    cell: int
    has_task: bool
    assoc: int
    w_m: int
    w_v: float
    d: int
    aoi: float
    tau: float = 0.0     # conjecture: last payment
    chi: float = 0.0     # conjecture: last observed VM service rate


def local_state(mu: MobileUser, uav_cell: int) -> LocalState:
    return LocalState(uav_cell, mu.cell, mu.buffer > 0, mu.assoc, mu.w_m, mu.w_v, mu.d,
                      mu.aoi, mu.last_tau, mu.last_chi)


class Action(NamedTuple):
    z: int
    x: int
    r: int

    def index(self, d_max: int) -> int:
        if self.z not in (0, 1) or not 0 <= self.x <= 3 or not 0 <= self.r <= d_max:
            raise ValueError(f"action {tuple(self)} outside the action space")
        return (self.z * 4 + self.x) * (d_max + 1) + self.r

    @classmethod
    def from_index(cls, idx: int, d_max: int) -> "Action":
        if not 0 <= idx < num_actions(d_max):
            raise ValueError(f"action index {idx} out of range")
        zx, r = divmod(int(idx), d_max + 1)
        z, x = divmod(zx, 4)
        return cls(z, x, r)


def num_actions(d_max: int) -> int:
    return 2 * 4 * (d_max + 1)


def state_dim(cfg: WorldConfig) -> int:
    return 4 + 1 + (cfg.num_bs + 1) + 6


def encode_state(s: LocalState, dyn: Dynamics, payment_scale: float = 0.0) -> np.ndarray:
    """Fixed-length feature vector.

    Layout: UAV (x, y), MU (x, y) in [0, 1]; buffer flag; association one-hot
    over B+1; W_m/Delta; W_v/(D_max*mu); D/D_max; A/A_max; tau/payment_scale
    (raw tau when the scale is still 0); chi/chi0.
    """
    cfg, topo = dyn.cfg, dyn.topo
    span = max(topo.side - 1, 1)
    v = np.zeros(state_dim(cfg))
    v[0], v[1] = (s.uav_cell % topo.side) / span, (s.uav_cell // topo.side) / span
    v[2], v[3] = (s.cell % topo.side) / span, (s.cell // topo.side) / span
    v[4] = float(s.has_task)
    v[5 + s.assoc] = 1.0
    k = 6 + topo.num_bs
    v[k] = s.w_m / dyn.n_local
    v[k + 1] = s.w_v / (cfg.packets_per_task * cfg.bits_per_packet)
    v[k + 2] = s.d / cfg.packets_per_task
    v[k + 3] = s.aoi / cfg.aoi_max
    v[k + 4] = s.tau / payment_scale if payment_scale > 0 else s.tau
    v[k + 5] = s.chi / cfg.vm_rate
    return v


def feasible_actions(plans: list[Plan], d_max: int) -> np.ndarray:
    """Boolean mask over flat action indices.

    ``(0, X, 0)`` is allowed for every feasible X.  ``(1, X, R)`` requires a
    remote upload pending after scheduling and ``1 <= R <= R_max'`` (already
    capped by the backlog).
    """
    mask = np.zeros(num_actions(d_max), dtype=bool)
    for plan in plans:
        if not plan.feasible:
            continue
        mask[Action(0, plan.x, 0).index(d_max)] = True
        if plan.dest is not None:
            for r in range(1, plan.rmax + 1):
                mask[Action(1, plan.x, r).index(d_max)] = True
    return mask


def select_action(q_params: nn.NetworkParams, features, mask, eps: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over the masked Q outputs; greedy ties go to the lowest index."""
    allowed = np.flatnonzero(mask)
    if allowed.size == 0:
        raise ValueError("no feasible action")
    if rng.random() < eps:
        return int(allowed[rng.integers(allowed.size)])
    q = nn.forward(q_params, features)
    return int(allowed[np.argmax(q[allowed])])


def post_decision(s: LocalState, action: Action, phi: int, packets_per_task: int) -> LocalState:
    """State right after this epoch's transmission, before any randomness.

    The transmitter backlog is the one left after scheduling (a fresh task
    sent to the server or UAV adds ``packets_per_task`` packets) minus the
    ``phi * R`` packets sent.
    """
    backlog = packets_per_task if action.x in (SERVER, UAV) else s.d
    left = backlog - phi * action.r
    if left < 0:
        raise ValueError(f"cannot send {phi * action.r} packets from a backlog of {backlog}")
    return s._replace(d=left)


def construct_bid(mu: int, s: LocalState, action: Action, plan: Plan,
                  post_params: nn.NetworkParams, dyn: Dynamics, gamma: float,
                  payment_scale: float = 0.0) -> Bid | None:
    """True valuation of one channel: utility if it is won plus the discounted
    post-decision value of the resulting state.  ``None`` means no bid."""
    if action.z == 0 or plan.dest is None or action.r < 1:
        return None
    s_post = post_decision(s, action, 1, dyn.cfg.packets_per_task)
    q_post = nn.forward(post_params, encode_state(s_post, dyn, payment_scale))
    nu = dyn.hypothetical_utility(s.aoi, plan, action.r)
    nu += q_post[action.index(dyn.cfg.packets_per_task)] / (1.0 - gamma)
    nu = max(float(nu), 0.0)
    if plan.dest == dyn.topo.uav:
        return Bid(mu, nu, n_uav=1)
    return Bid(mu, nu, n_server=1, bs=plan.dest)


# --------------------------------------------------------------------------
# replay memory


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    post_states: np.ndarray
    next_masks: np.ndarray


class ReplayMemory:
    """Fixed-capacity FIFO of encoded experiences."""

    def __init__(self, capacity: int, dim: int, n_actions: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, dim))
        self.post_states = np.zeros((capacity, dim))
        self.next_masks = np.zeros((capacity, n_actions), dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action: int, reward: float, next_state, post_state, next_mask) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.post_states[i] = post_state
        self.next_masks[i] = next_mask
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _slots(self):
        """Physical slots from oldest to newest."""
        start = self._next - self.size
        return [(start + k) % self.capacity for k in range(self.size)]

    def get(self, k: int) -> Batch:
        """The ``k``-th oldest stored experience."""
        i = self._slots()[k]
        return Batch(self.states[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                     self.next_states[i].copy(), self.post_states[i].copy(),
                     self.next_masks[i].copy())

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n > self.size:
            raise ValueError(f"cannot draw {n} of {self.size} experiences")
        return rng.choice(self.size, size=n, replace=False)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(n, rng)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.post_states[idx], self.next_masks[idx])


# --------------------------------------------------------------------------
# training


def _masked_max(q: np.ndarray, masks: np.ndarray):
    masked = np.where(masks, q, -np.inf)
    best = np.argmax(masked, axis=1)
    return best, masked[np.arange(len(q)), best]


def td_targets(q: nn.NetworkParams, q_target: nn.NetworkParams, batch: Batch,
               gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Targets for the Q-network (double-DQN) and the post-decision network."""
    q_next = nn.forward(q, batch.next_states)
    best, best_val = _masked_max(q_next, batch.next_masks)
    q_eval = nn.forward(q_target, batch.next_states)[np.arange(len(best)), best]
    y_q = (1.0 - gamma) * batch.rewards + gamma * q_eval
    y_post = gamma * best_val
    return y_q, y_post


def regression_step(params: nn.NetworkParams, adam: nn.AdamState, inputs, actions,
                    targets) -> float:
    """One Adam step on the mean squared error of the chosen outputs."""
    out, cache = nn.forward(params, inputs, cache=True)
    rows = np.arange(len(actions))
    err = out[rows, actions] - targets
    grad = np.zeros_like(out)
    grad[rows, actions] = 2.0 * err / len(actions)
    nn.adam_step(params, nn.backward(params, cache, grad), adam)
    return float(np.mean(err * err))


def train_step(q, q_target, post, memory: ReplayMemory, batch_size: int, gamma: float,
               adam_q: nn.AdamState, adam_post: nn.AdamState, rng):
    """Returns ``(loss_q, loss_post)`` or ``None`` when memory is too small."""
    if len(memory) < batch_size:
        return None
    batch = memory.sample(batch_size, rng)
    y_q, y_post = td_targets(q, q_target, batch, gamma)
    loss_q = regression_step(q, adam_q, batch.states, batch.actions, y_q)
    loss_post = regression_step(post, adam_post, batch.post_states, batch.actions, y_post)
    return loss_q, loss_post


def sync_target(q: nn.NetworkParams, q_target: nn.NetworkParams, j: int, period: int) -> bool:
    if j % period == 0:
        q_target.copy_from(q)
        return True
    return False


def epsilon(j: int, total: int, learn: LearnConfig) -> float:
    """Linear decay over the first ``eps_decay_fraction`` of the run, then flat."""
    horizon = max(learn.eps_decay_fraction * total, 1.0)
    frac = min((j - 1) / horizon, 1.0)
    return learn.eps_start + (learn.eps_end - learn.eps_start) * frac


class DeepAgent:
    """One MU's networks, optimizers, replay memory and RNG."""

    NETWORKS = ("dqn1", "dqn1_target", "dqn2")

    def __init__(self, mu: int, dyn: Dynamics, learn: LearnConfig, gamma: float,
                 rng: np.random.Generator):
        self.mu = mu
        self.dyn = dyn
        self.learn = learn
        self.gamma = gamma
        self.rng = rng
        self.d_max = dyn.cfg.packets_per_task
        self.dim = state_dim(dyn.cfg)
        self.n_actions = num_actions(self.d_max)
        sizes = (self.dim, learn.hidden_units, learn.hidden_units, self.n_actions)
        self.q = nn.init(sizes, rng)
        self.q_target = self.q.copy()
        self.post = nn.init(sizes, rng)
        hyper = dict(lr=learn.learning_rate, beta1=learn.adam_beta1, beta2=learn.adam_beta2,
                     eps=learn.adam_eps)
        self.adam_q = nn.AdamState.for_params(self.q, **hyper)
        self.adam_post = nn.AdamState.for_params(self.post, **hyper)
        self.memory = ReplayMemory(learn.memory_size, self.dim, self.n_actions)
        self.max_payment = 0.0

    def encode(self, s: LocalState) -> np.ndarray:
        return encode_state(s, self.dyn, self.max_payment)

    def act(self, s: LocalState, plans: list[Plan], eps: float):
        """Returns ``(action, bid or None)``."""
        mask = feasible_actions(plans, self.d_max)
        idx = select_action(self.q, self.encode(s), mask, eps, self.rng)
        action = Action.from_index(idx, self.d_max)
        bid = construct_bid(self.mu, s, action, plans[action.x], self.post, self.dyn,
                            self.gamma, self.max_payment)
        return action, bid

    def remember(self, s: LocalState, action: Action, phi: int, payoff: float,
                 s_next: LocalState, next_plans: list[Plan]) -> None:
        realized = Action(phi, action.x, action.r if phi else 0)
        s_post = post_decision(s, realized, phi, self.d_max)
        self.memory.push(self.encode(s), realized.index(self.d_max), payoff,
                         self.encode(s_next), self.encode(s_post),
                         feasible_actions(next_plans, self.d_max))

    def observe_payment(self, tau: float) -> None:
        self.max_payment = max(self.max_payment, tau)

    def train(self):
        return train_step(self.q, self.q_target, self.post, self.memory, self.learn.batch_size,
                          self.gamma, self.adam_q, self.adam_post, self.rng)

    def sync(self, j: int) -> bool:
        return sync_target(self.q, self.q_target, j, self.learn.target_period)

    def save(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, params in zip(self.NETWORKS, (self.q, self.q_target, self.post)):
            path = directory / f"mu{self.mu}_{name}.txt"
            nn.save(params, path)
            paths.append(path)
        return paths

    def load(self, directory) -> None:
        directory = Path(directory)
        for name, params in zip(self.NETWORKS, (self.q, self.q_target, self.post)):
            params.copy_from(nn.load(directory / f"mu{self.mu}_{name}.txt", params.sizes))
