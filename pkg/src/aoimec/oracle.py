"""Exact and tabular reference solutions on tiny single-MU instances.

Values use the normalized discounted payoff, so for a finite MDP

    Q(s, a)  = (1 - gamma) * l(s, a) + Qp(post(s, a), a)
    Qp(p, a) = gamma * sum_s' P(s' | s, a) * max_a' Q(s', a')

where ``post(s, a)`` is the state right after the MU's own transmission.
:func:`value_iteration` solves these equations by Bellman backups;
:func:`tabular_update` learns ``Q`` and ``Qp`` from sampled transitions with
step size ``1 / (1 + visits)``.

The tiny instance has one MU, a 2x2 grid, one BS, a hovering UAV and one
channel, so the MU wins every channel it asks for and never pays.  Its state
space is enumerated by running the simulator's own epoch function from every
reachable state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .agent import Action, feasible_actions
from .auction import Bid, run_auction
from .config import WorldConfig
from .system import Decision, Dynamics, MobileUser, execute_epoch
from .world import MobilityModel, Topology


class NotEnumerable(ValueError):
    """The instance is too large for exact enumeration."""


@dataclass
class FiniteMDP:
    """Explicit model.  ``trans`` holds (row = s*A + a, next state, probability)."""

    n_states: int
    n_actions: int
    allowed: np.ndarray          # (S, A) bool
    reward: np.ndarray           # (S, A); 0 where not allowed
    rows: np.ndarray
    cols: np.ndarray
    probs: np.ndarray
    post: np.ndarray             # (S, A) post-decision state id, -1 where not allowed
    gamma: float
    labels: list = field(default_factory=list)

    @property
    def n_post(self) -> int:
        return int(self.post.max()) + 1 if self.post.size else 0

    def expected_next(self, v: np.ndarray) -> np.ndarray:
        """``sum_s' P(s'|s,a) v(s')`` as an (S, A) array."""
        flat = np.bincount(self.rows, weights=self.probs * v[self.cols],
                           minlength=self.n_states * self.n_actions)
        return flat.reshape(self.n_states, self.n_actions)

    def sampler(self):
        """Per (s, a): next states and their CDF, for trajectory sampling."""
        order = np.argsort(self.rows, kind="stable")
        rows, cols, probs = self.rows[order], self.cols[order], self.probs[order]
        bounds = np.searchsorted(rows, np.arange(self.n_states * self.n_actions + 1))
        table = {}
        for sa in range(self.n_states * self.n_actions):
            lo, hi = bounds[sa], bounds[sa + 1]
            if hi > lo:
                cdf = np.cumsum(probs[lo:hi])
                cdf[-1] = 1.0
                table[sa] = (cols[lo:hi], cdf)
        return table


def _masked_max(q: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    return np.where(allowed, q, -np.inf).max(axis=1)


def value_iteration(mdp: FiniteMDP, tol: float = 1e-9, max_iter: int = 100_000):
    """Bellman backups until successive ``V`` differ by less than ``tol``.

    Returns ``(V, Q, Qp)``; ``Qp`` is indexed ``[post id, action]`` and is NaN
    for pairs that never occur.
    """
    if not np.all(mdp.allowed.any(axis=1)):
        raise ValueError("every state needs at least one allowed action")
    g = mdp.gamma
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        q = np.where(mdp.allowed, (1.0 - g) * mdp.reward + g * mdp.expected_next(v), -np.inf)
        v_new = q.max(axis=1)
        diff = np.max(np.abs(v_new - v))
        v = v_new
        if diff < tol:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    cont = g * mdp.expected_next(v)
    q = np.where(mdp.allowed, (1.0 - g) * mdp.reward + cont, -np.inf)
    qp = np.full((mdp.n_post, mdp.n_actions), np.nan)
    s_idx, a_idx = np.nonzero(mdp.allowed)
    qp[mdp.post[s_idx, a_idx], a_idx] = cont[s_idx, a_idx]
    return q.max(axis=1), q, qp


@dataclass
class TabularQ:
    q: np.ndarray             # (S, A), -inf where not allowed
    qp: np.ndarray            # (n_post, A)
    visits: np.ndarray        # per (s, a)
    post_visits: np.ndarray   # per (post, a)
    allowed: np.ndarray

    @classmethod
    def for_mdp(cls, mdp: FiniteMDP) -> "TabularQ":
        q = np.where(mdp.allowed, 0.0, -np.inf)
        return cls(q, np.zeros((mdp.n_post, mdp.n_actions)),
                   np.zeros(mdp.allowed.shape, dtype=np.int64),
                   np.zeros((mdp.n_post, mdp.n_actions), dtype=np.int64), mdp.allowed)

    def greedy(self) -> np.ndarray:
        return np.argmax(self.q, axis=1)


def tabular_update(tables: TabularQ, s: int, a: int, reward: float, s_next: int,
                   post_id: int, gamma: float, alpha: float | None = None) -> TabularQ:
    """One sample update of both tables.

    ``Q(s,a)`` moves toward ``(1-gamma)*reward + gamma*max Q(s',.)`` and
    ``Qp(post,a)`` toward ``gamma*max Q(s',.)``, both computed from the table
    before this update.  ``alpha=None`` uses ``1/(1+visits)`` per table entry.
    """
    best_next = tables.q[s_next].max()
    a_q = 1.0 / (1.0 + tables.visits[s, a]) if alpha is None else alpha
    a_p = 1.0 / (1.0 + tables.post_visits[post_id, a]) if alpha is None else alpha
    tables.q[s, a] += a_q * ((1.0 - gamma) * reward + gamma * best_next - tables.q[s, a])
    tables.qp[post_id, a] += a_p * (gamma * best_next - tables.qp[post_id, a])
    tables.visits[s, a] += 1
    tables.post_visits[post_id, a] += 1
    return tables


def run_tabular(mdp: FiniteMDP, steps: int, rng: np.random.Generator, start: int = 0,
                tables: TabularQ | None = None) -> TabularQ:
    """Learn from one trajectory under the uniform policy over allowed actions."""
    tables = tables or TabularQ.for_mdp(mdp)
    sampler = mdp.sampler()
    choices = [np.flatnonzero(row) for row in mdp.allowed]
    s = start
    A = mdp.n_actions
    for _ in range(steps):
        acts = choices[s]
        a = int(acts[rng.integers(acts.size)])
        nxt, cdf = sampler[s * A + a]
        s_next = int(nxt[min(int(np.searchsorted(cdf, rng.random(), side="right")), cdf.size - 1)])
        tabular_update(tables, s, a, mdp.reward[s, a], s_next, int(mdp.post[s, a]), mdp.gamma)
        s = s_next
    return tables


def consistency_check(q: np.ndarray, qp: np.ndarray, mdp: FiniteMDP, mask=None) -> float:
    """``max |Q(s,a) - ((1-gamma) l(s,a) + Qp(post(s,a), a))|`` over ``mask`` (default: allowed)."""
    mask = mdp.allowed if mask is None else (mask & mdp.allowed)
    s_idx, a_idx = np.nonzero(mask)
    if s_idx.size == 0:
        return 0.0
    pred = (1.0 - mdp.gamma) * mdp.reward[s_idx, a_idx] + qp[mdp.post[s_idx, a_idx], a_idx]
    return float(np.max(np.abs(q[s_idx, a_idx] - pred)))


def policy_agreement(q_star: np.ndarray, policy: np.ndarray, tol: float = 1e-6,
                     states=None) -> float:
    """Fraction of states whose chosen action is optimal up to ``tol`` under ``q_star``."""
    states = np.arange(q_star.shape[0]) if states is None else np.asarray(states)
    v = q_star.max(axis=1)
    ok = q_star[states, policy[states]] >= v[states] - tol
    return float(ok.mean())


def random_mdp(n_states: int, n_actions: int, gamma: float, rng: np.random.Generator,
               branching: int = 3) -> FiniteMDP:
    """Random MDP with every action allowed; each (s, a) is its own post state."""
    rows, cols, probs = [], [], []
    for s in range(n_states):
        for a in range(n_actions):
            nxt = rng.choice(n_states, size=min(branching, n_states), replace=False)
            p = rng.dirichlet(np.ones(nxt.size))
            rows += [s * n_actions + a] * nxt.size
            cols += list(nxt)
            probs += list(p)
    allowed = np.ones((n_states, n_actions), dtype=bool)
    return FiniteMDP(n_states, n_actions, allowed, rng.uniform(0.0, 1.0, (n_states, n_actions)),
                     np.array(rows), np.array(cols), np.array(probs),
                     np.arange(n_states * n_actions).reshape(n_states, n_actions), gamma)


# --------------------------------------------------------------------------
# tiny single-MU instance


def tiny_config(**overrides) -> WorldConfig:
    """One MU on a 2x2 grid, one BS, hovering UAV, one channel, 2-packet tasks.

    A task is 2 packets of 5e5 bits at 1300 cycles/bit, which takes the local
    CPU 2 epochs.
    """
    base = dict(grid_cells=2, cell_size=10.0, num_bs=1, num_mus=1, num_channels=1,
                packets_per_task=2, arrival_prob=1.0, aoi_max=2.0, discount=0.5,
                uav_static=True, seed=0)
    base.update(overrides)
    cfg = WorldConfig(**base)
    cfg.validate()
    return cfg


class TinyInstance:
    """State enumeration for a single MU driven by the simulator's epoch function.

    A state key is the MU's full state with arrival epochs written as ages
    relative to the current epoch; ages are capped at a bound beyond which
    every completion lands on ``aoi_max`` anyway, so capping preserves the
    dynamics.
    """

    EPOCH = 10_000     # absolute epoch used when replaying a state

    def __init__(self, cfg: WorldConfig, max_states: int = 20_000):
        if cfg.num_mus != 1:
            raise NotEnumerable("tiny instances have exactly one MU")
        self.cfg = cfg
        self.topo = Topology(cfg)
        self.dyn = Dynamics(cfg, self.topo)
        rng = np.random.default_rng(cfg.seed)
        self.mobility = MobilityModel.random_walk(self.topo, rng)
        self.uav_cell = 0
        self.d_max = cfg.packets_per_task
        self.age_cap = int(math.ceil(cfg.aoi_max / cfg.delta)) + self.dyn.n_local + 1
        self.max_states = max_states

    # -- keys -------------------------------------------------------------

    def _age(self, t: int, j: int) -> int:
        return -1 if t == 0 else min(j - t, self.age_cap)

    def key(self, mu: MobileUser, j: int) -> tuple:
        return (mu.cell, mu.assoc, self._age(mu.buffer, j), mu.w_m, round(mu.w_v, 6), mu.d,
                round(mu.aoi, 9), self._age(mu.t_m, j), self._age(mu.t_s, j),
                self._age(mu.t_v, j), round(mu.last_chi, 6))

    def user(self, key: tuple, j: int) -> MobileUser:
        cell, assoc, b, w_m, w_v, d, aoi, a_m, a_s, a_v, chi = key

        def t(age):
            return 0 if age < 0 else j - age

        return MobileUser(cell=cell, assoc=assoc, buffer=t(b), w_m=w_m, w_v=w_v, d=d, aoi=aoi,
                          t_m=t(a_m), t_s=t(a_s), t_v=t(a_v), last_tau=0.0, last_chi=chi)

    def initial_key(self) -> tuple:
        mu = MobileUser(cell=0, assoc=self.topo.serving_bs(0), buffer=self.EPOCH)
        return self.key(mu, self.EPOCH)

    # -- one transition -----------------------------------------------------

    def step(self, key: tuple, action: Action):
        """Return ``(payoff, post key, [(probability, next key), ...])``."""
        j = self.EPOCH
        mu = self.user(key, j)
        plans = self.dyn.plans(mu, self.uav_cell)
        plan = plans[action.x]
        phi = 0
        if action.z:
            bid = (Bid(0, 1.0, n_uav=1) if plan.dest == self.topo.uav
                   else Bid(0, 1.0, n_server=1, bs=plan.dest))
            result = run_auction([bid], self.cfg.num_channels, self.topo.adjacency)
            phi = result.phi(0)
        post = list(key)
        post[5] = (plan.backlog if plan.feasible else mu.d) - phi * action.r
        outcome = execute_epoch(self.dyn, [mu], [Decision(plan, action.r, phi, 0.0)], j)[0][0]
        succ: dict[tuple, float] = {}
        lam = self.cfg.arrival_prob
        for cell, p_move in self.mobility.probabilities(mu.cell).items():
            for arrived, p_arr in ((True, lam), (False, 1.0 - lam)):
                if p_arr <= 0.0:
                    continue
                nxt = mu.copy()
                nxt.cell = cell
                if arrived:
                    nxt.buffer = j + 1
                k = self.key(nxt, j + 1)
                succ[k] = succ.get(k, 0.0) + p_move * p_arr
        return outcome.payoff, tuple(post), sorted(succ.items(), key=lambda kv: kv[0]), phi

    def mask(self, key: tuple) -> np.ndarray:
        mu = self.user(key, self.EPOCH)
        return feasible_actions(self.dyn.plans(mu, self.uav_cell), self.d_max)

    # -- enumeration ----------------------------------------------------------

    def build(self) -> FiniteMDP:
        A = 2 * 4 * (self.d_max + 1)
        index = {self.initial_key(): 0}
        order = [self.initial_key()]
        post_index: dict[tuple, int] = {}
        allowed, reward, post, rows, cols, probs = [], [], [], [], [], []
        i = 0
        while i < len(order):
            key = order[i]
            mask = self.mask(key)
            r_row = np.zeros(A)
            p_row = np.full(A, -1, dtype=np.int64)
            for a in np.flatnonzero(mask):
                ell, pkey, succ, _ = self.step(key, Action.from_index(int(a), self.d_max))
                r_row[a] = ell
                p_row[a] = post_index.setdefault(pkey, len(post_index))
                for nkey, p in succ:
                    if nkey not in index:
                        if len(order) >= self.max_states:
                            raise NotEnumerable(f"more than {self.max_states} states")
                        index[nkey] = len(order)
                        order.append(nkey)
                    rows.append(i * A + int(a))
                    cols.append(index[nkey])
                    probs.append(p)
            allowed.append(mask)
            reward.append(r_row)
            post.append(p_row)
            i += 1
        return FiniteMDP(len(order), A, np.array(allowed), np.array(reward), np.array(rows),
                         np.array(cols), np.array(probs), np.array(post), self.cfg.discount,
                         labels=order)


# --------------------------------------------------------------------------
# suite used by the command line


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def run_suite(steps: int = 200_000, seed: int = 0) -> list[CheckResult]:
    """Exact-vs-tabular cross-checks on the tiny instance and a random MDP."""
    results = []
    rng = np.random.default_rng(seed)

    mdp = TinyInstance(tiny_config()).build()
    v, q_star, qp_star = value_iteration(mdp)
    exact_res = consistency_check(q_star, qp_star, mdp)
    results.append(CheckResult("tiny: exact decomposition", exact_res < 1e-9,
                               f"residual {exact_res:.2e} over {mdp.n_states} states"))
    tables = run_tabular(mdp, steps, rng)
    visited = tables.visits > 0
    res = consistency_check(tables.q, tables.qp, mdp, visited)
    results.append(CheckResult("tiny: learned decomposition", res < 0.05, f"residual {res:.2e}"))
    seen = np.flatnonzero(visited.any(axis=1))
    match = policy_agreement(q_star, tables.greedy(), states=seen)
    results.append(CheckResult("tiny: greedy policy vs value iteration", match >= 0.95,
                               f"{match:.3f} of {seen.size} visited states"))

    rand = random_mdp(20, 4, 0.5, rng)
    _, q_r, _ = value_iteration(rand)
    tab = run_tabular(rand, steps, rng)
    agree = float(np.mean(np.argmax(q_r, axis=1) == tab.greedy()))
    results.append(CheckResult("random 20-state MDP: argmax agreement", agree >= 0.95,
                               f"{agree:.3f}"))
    return results
