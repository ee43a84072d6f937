"""Exact and sample-based maximum-entropy control for finite-horizon tabular MDPs.

Backward soft value iteration (log-sum-exp backups, temperature 1) gives
ground-truth optima; tabular soft Q-learning provides the sample-based
counterpart used inside training loops. Rewards may depend on the next state
and may be -inf; a probability-zero transition contributes nothing to a
backup regardless of its reward (0 * -inf := 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .mdp import StochasticPolicy, TabularMDP, Transition, occupancy_measure


@dataclass
class TransitionReward:
    """Total reward function on (t, s, a, s'), finite or -inf.

    vfn, when present, evaluates on index arrays; dense tables built from it
    may carry NaN on transitions outside every support, which the backup
    operators mask out along with their zero probabilities.
    """

    fn: Callable[[int, int, int, int], float]
    vfn: Callable | None = None
    depends_on_next: bool = True
    time_invariant: bool = True
    _cache: np.ndarray | None = None

    @classmethod
    def from_state_action(cls, reward_sa: np.ndarray) -> "TransitionReward":
        reward_sa = np.asarray(reward_sa, dtype=float)
        return cls(fn=lambda t, s, a, sn: float(reward_sa[s, a]),
                   vfn=lambda t, s, a, sn: reward_sa[s, a],
                   depends_on_next=False)

    @classmethod
    def from_array(cls, reward_sas: np.ndarray) -> "TransitionReward":
        reward_sas = np.asarray(reward_sas, dtype=float)
        tr = cls(fn=lambda t, s, a, sn: float(reward_sas[s, a, sn]),
                 vfn=lambda t, s, a, sn: reward_sas[s, a, sn])
        tr._cache = reward_sas
        return tr

    @classmethod
    def from_mdp(cls, mdp: TabularMDP) -> "TransitionReward":
        return cls.from_state_action(mdp.reward)

    def plus_correction(self, delta: Callable) -> "TransitionReward":
        """Add an (s, a, s')-dependent correction term to this reward."""
        base_fn, base_vfn = self.fn, self.vfn
        vfn = None
        if base_vfn is not None:
            vfn = lambda t, s, a, sn: base_vfn(t, s, a, sn) + delta(s, a, sn)
        return TransitionReward(fn=lambda t, s, a, sn: base_fn(t, s, a, sn) + delta(s, a, sn),
                                vfn=vfn)

    def table(self, num_states: int, num_actions: int, t: int) -> np.ndarray:
        """Dense (S, A, S) table of reward values at timestep t."""
        if self.time_invariant and self._cache is not None:
            return self._cache
        if self.vfn is not None:
            s, a, sn = np.meshgrid(np.arange(num_states), np.arange(num_actions),
                                   np.arange(num_states), indexing="ij")
            out = np.asarray(self.vfn(t, s, a, sn), dtype=float)
            out = np.broadcast_to(out, (num_states, num_actions, num_states)).copy()
        else:
            out = np.empty((num_states, num_actions, num_states))
            for s in range(num_states):
                for a in range(num_actions):
                    for sn in range(num_states):
                        out[s, a, sn] = self.fn(t, s, a, sn)
        if self.time_invariant:
            self._cache = out
        return out


@dataclass
class SoftQTable:
    """Per-timestep soft action values, q shape (H, S, A)."""

    q: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 3:
            raise ValueError(f"q must have shape (H, S, A), got {self.q.shape}")
        if np.any(np.isnan(self.q)) or np.any(self.q == np.inf):
            raise ValueError("soft Q values must be finite or -inf")

    @property
    def horizon(self) -> int:
        return self.q.shape[0]

    def values(self, t: int) -> np.ndarray:
        """State values at timestep t: V_t(s) = logsumexp_a Q_t(s, a)."""
        return logsumexp(self.q[t], axis=1)

    def copy(self) -> "SoftQTable":
        return SoftQTable(self.q.copy())

    def to_csv(self) -> str:
        lines = ["t,s,a,q"]
        H, S, A = self.q.shape
        for t in range(H):
            for s in range(S):
                for a in range(A):
                    lines.append(f"{t},{s},{a},{self.q[t, s, a]:.17g}")
        return "\n".join(lines) + "\n"


def _expected_backup(P: np.ndarray, values_next: np.ndarray) -> np.ndarray:
    """sum_{s'} P(s'|s,a) * values_next(s,a,s') with 0 * -inf treated as 0."""
    masked = np.where(P > 0, values_next, 0.0)
    return (P * masked).sum(axis=2)


def soft_value_iteration(mdp: TabularMDP, reward: TransitionReward | None = None) -> SoftQTable:
    """Exact backward recursion at temperature 1.

    V_H = 0; Q_t(s,a) = E_{s'}[reward(t,s,a,s') + V_{t+1}(s')];
    V_t(s) = logsumexp_a Q_t(s,a).
    """
    if reward is None:
        reward = TransitionReward.from_mdp(mdp)
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    q = np.zeros((H, S, A))
    v_next = np.zeros(S)
    for t in range(H - 1, -1, -1):
        R = reward.table(S, A, t)
        q[t] = _expected_backup(mdp.transition, R + v_next[None, None, :])
        v_next = logsumexp(q[t], axis=1)
    return SoftQTable(q)


def policy_from_soft_q(table: SoftQTable) -> StochasticPolicy:
    """Softmax of each Q row: pi(a | s, t) proportional to exp(Q_t(s, a))."""
    v = logsumexp(table.q, axis=2)
    bad = np.argwhere(~np.isfinite(v))
    if len(bad):
        t, s = (int(i) for i in bad[0])
        raise ValueError(f"state unreachable under any admissible action: t={t}, s={s}")
    return StochasticPolicy(np.exp(table.q - v[:, :, None]))


def expected_reward(mdp: TabularMDP, policy: StochasticPolicy,
                    reward: TransitionReward | None = None) -> float:
    """Occupancy-weighted expected total reward (exact, no sampling)."""
    if reward is None:
        reward = TransitionReward.from_mdp(mdp)
    occ = occupancy_measure(mdp, policy)
    S, A = mdp.num_states, mdp.num_actions
    total = 0.0
    for t in range(mdp.horizon):
        r_sa = _expected_backup(mdp.transition, reward.table(S, A, t))
        total += float((np.where(occ[t] > 0, r_sa, 0.0) * occ[t]).sum())
    return total


def expected_entropy(mdp: TabularMDP, policy: StochasticPolicy) -> float:
    """Occupancy-weighted total policy entropy, sum_t E[H(pi_t(. | s_t))]."""
    occ = occupancy_measure(mdp, policy)
    p = policy.probs
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    ent = -plogp.sum(axis=2)  # (H, S)
    return float((occ.sum(axis=2) * ent).sum())


def entropy_reg_return(mdp: TabularMDP, policy: StochasticPolicy,
                       reward: TransitionReward | None = None) -> float:
    """Exact entropy-regularized return E[sum_t reward + H(pi(. | s_t))]."""
    return expected_reward(mdp, policy, reward) + expected_entropy(mdp, policy)


def soft_bellman_target(table: SoftQTable, reward: TransitionReward, tr: Transition) -> float:
    """reward(t, s, a, s') + V_{t+1}(s'), with V_H = 0."""
    if tr.t + 1 < table.horizon:
        v_next = float(logsumexp(table.q[tr.t + 1, tr.s_next]))
    else:
        v_next = 0.0
    return reward.fn(tr.t, tr.s, tr.a, tr.s_next) + v_next


def soft_q_learning_update(table: SoftQTable, batch: Sequence[Transition],
                           reward: TransitionReward,
                           learning_rate: float | Sequence[float]) -> SoftQTable:
    """Apply soft Bellman updates for each transition in order.

    Q_t(s,a) <- (1 - a) Q_t(s,a) + a [reward(t,s,a,s') + V_{t+1}(s')], where V
    is evaluated on the table as it evolves through the batch. learning_rate
    is a scalar in (0, 1] or one value per transition.
    """
    if np.isscalar(learning_rate):
        rates = [float(learning_rate)] * len(batch)
    else:
        rates = [float(x) for x in learning_rate]
        if len(rates) != len(batch):
            raise ValueError("need one learning rate per transition")
    if any(not (0.0 <= a <= 1.0) for a in rates):
        raise ValueError("learning rates must lie in [0, 1]")
    out = table.copy()
    H, S, A = out.q.shape
    for tr, alpha in zip(batch, rates):
        if not (0 <= tr.t < H and 0 <= tr.s < S and 0 <= tr.a < A and 0 <= tr.s_next < S):
            raise ValueError(f"transition indices out of range: {tr}")
        if alpha == 0.0:
            continue
        target = soft_bellman_target(out, reward, tr)
        out.q[tr.t, tr.s, tr.a] = (1.0 - alpha) * out.q[tr.t, tr.s, tr.a] + alpha * target
    return out
