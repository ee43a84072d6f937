"""Finite-horizon tabular MDPs, trajectory sampling, and exact trajectory arithmetic."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

PROB_TOL = 1e-9


@dataclass(frozen=True)
class TabularMDP:
    """Finite MDP with dense transition and reward tables.

    transition has shape (S, A, S), reward (S, A), initial_dist (S,).
    Rewards are per (state, action); the horizon is the episode length in
    steps. discount is carried for completeness and defaults to 1.
    """

    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    horizon: int
    discount: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=float))
        object.__setattr__(self, "initial_dist", np.asarray(self.initial_dist, dtype=float))
        if self.transition.ndim != 3 or self.transition.shape[0] != self.transition.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {self.transition.shape}")
        if self.reward.shape != self.transition.shape[:2]:
            raise ValueError(f"reward must have shape (S, A), got {self.reward.shape}")
        if self.initial_dist.shape != (self.transition.shape[0],):
            raise ValueError(f"initial_dist must have shape (S,), got {self.initial_dist.shape}")
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError("discount must lie in (0, 1]")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def with_transition(self, transition: np.ndarray) -> "TabularMDP":
        return replace(self, transition=transition)


@dataclass
class DomainPair:
    """A source MDP and a target MDP that differ only in their dynamics."""

    source: TabularMDP
    target: TabularMDP
    support_ok: bool | None = None

    def __post_init__(self):
        s, t = self.source, self.target
        if s.num_states != t.num_states or s.num_actions != t.num_actions:
            raise ValueError("source and target must share state and action spaces")
        if s.horizon != t.horizon or s.discount != t.discount:
            raise ValueError("source and target must share horizon and discount")
        if not np.array_equal(s.reward, t.reward):
            raise ValueError("source and target must share the reward table")
        if not np.array_equal(s.initial_dist, t.initial_dist):
            raise ValueError("source and target must share the initial distribution")


@dataclass(frozen=True)
class Transition:
    s: int
    a: int
    s_next: int
    r: float
    t: int
    done: bool


@dataclass(frozen=True)
class Trajectory:
    """An ordered chain of transitions, at most `horizon` long."""

    steps: tuple[Transition, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    def total_reward(self) -> float:
        return float(sum(step.r for step in self.steps))

    def states(self) -> list[int]:
        """Visited states, including the final one (length len + 1)."""
        if not self.steps:
            return []
        return [self.steps[0].s] + [step.s_next for step in self.steps]


@dataclass(frozen=True)
class StochasticPolicy:
    """Time-indexed action distributions, probs shape (H, S, A)."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if self.probs.ndim != 3:
            raise ValueError(f"probs must have shape (H, S, A), got {self.probs.shape}")
        rows = self.probs.sum(axis=2)
        if np.any(self.probs < -PROB_TOL) or np.any(np.abs(rows - 1.0) > 1e-6):
            raise ValueError("policy rows must be distributions over actions")

    @property
    def horizon(self) -> int:
        return self.probs.shape[0]

    @property
    def num_states(self) -> int:
        return self.probs.shape[1]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[2]


def uniform_policy(mdp: TabularMDP) -> StochasticPolicy:
    probs = np.full((mdp.horizon, mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)
    return StochasticPolicy(probs)


def stationary_policy(mdp: TabularMDP, probs_sa: np.ndarray) -> StochasticPolicy:
    """Repeat a (S, A) table across all timesteps."""
    probs_sa = np.asarray(probs_sa, dtype=float)
    return StochasticPolicy(np.tile(probs_sa[None, :, :], (mdp.horizon, 1, 1)))


def mix_with_uniform(policy: StochasticPolicy, eps: float) -> StochasticPolicy:
    u = 1.0 / policy.num_actions
    return StochasticPolicy((1.0 - eps) * policy.probs + eps * u)


@dataclass(frozen=True)
class Violation:
    """One invariant violation, locating the offending entry and its size."""

    kind: str
    index: tuple
    magnitude: float

    def __str__(self) -> str:
        return f"{self.kind} at {self.index}: magnitude {self.magnitude:.3g}"


def validate_mdp(mdp: TabularMDP) -> list[Violation]:
    """Report every invariant violation; an empty list means the MDP is valid."""
    out: list[Violation] = []
    P = mdp.transition
    neg = np.argwhere(P < 0)
    for idx in neg:
        s, a, sn = (int(i) for i in idx)
        out.append(Violation("negative_probability", (s, a, sn), float(-P[s, a, sn])))
    over = np.argwhere(P > 1 + PROB_TOL)
    for idx in over:
        s, a, sn = (int(i) for i in idx)
        out.append(Violation("probability_above_one", (s, a, sn), float(P[s, a, sn] - 1.0)))
    row_sums = P.sum(axis=2)
    bad_rows = np.argwhere(np.abs(row_sums - 1.0) > PROB_TOL)
    for idx in bad_rows:
        s, a = (int(i) for i in idx)
        out.append(Violation("row_sum", (s, a), float(abs(row_sums[s, a] - 1.0))))
    init = mdp.initial_dist
    for (s,) in np.argwhere(init < 0):
        out.append(Violation("negative_initial_probability", (int(s),), float(-init[s])))
    if abs(init.sum() - 1.0) > PROB_TOL:
        out.append(Violation("initial_dist_sum", (), float(abs(init.sum() - 1.0))))
    for idx in np.argwhere(~np.isfinite(mdp.reward)):
        s, a = (int(i) for i in idx)
        out.append(Violation("nonfinite_reward", (s, a), float("inf")))
    return out


def check_support(pair: DomainPair) -> tuple[bool, list[tuple[int, int, int]]]:
    """True iff every transition possible in the target is possible in the source.

    Caches the boolean on pair.support_ok and returns the violating
    (s, a, s') triples.
    """
    bad = np.argwhere((pair.target.transition > 0) & (pair.source.transition == 0))
    violations = [(int(s), int(a), int(sn)) for s, a, sn in bad]
    ok = len(violations) == 0
    pair.support_ok = ok
    return ok, violations


def _sample_index(cdf: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cdf, u, side="right"))


def sample_trajectory(mdp: TabularMDP, policy: StochasticPolicy, rng: np.random.Generator) -> Trajectory:
    """Roll out exactly `horizon` steps; deterministic given the rng state."""
    if policy.horizon != mdp.horizon or policy.num_states != mdp.num_states \
            or policy.num_actions != mdp.num_actions:
        raise ValueError(
            f"policy shape {policy.probs.shape} does not match MDP "
            f"(H={mdp.horizon}, S={mdp.num_states}, A={mdp.num_actions})")
    init_cdf = np.cumsum(mdp.initial_dist)
    s = _sample_index(init_cdf, rng.random())
    steps = []
    for t in range(mdp.horizon):
        a = _sample_index(np.cumsum(policy.probs[t, s]), rng.random())
        s_next = _sample_index(np.cumsum(mdp.transition[s, a]), rng.random())
        steps.append(Transition(s=s, a=a, s_next=s_next, r=float(mdp.reward[s, a]),
                                t=t, done=(t == mdp.horizon - 1)))
        s = s_next
    return Trajectory(tuple(steps))


def trajectory_log_prob(mdp: TabularMDP, policy: StochasticPolicy, traj: Trajectory) -> float:
    """log of the trajectory probability under (initial_dist, policy, dynamics).

    Returns -inf when any factor is zero; no clamping.
    """
    if len(traj) > mdp.horizon:
        raise ValueError("trajectory longer than the MDP horizon")
    if not traj.steps:
        return 0.0
    with np.errstate(divide="ignore"):
        total = float(np.log(mdp.initial_dist[traj.steps[0].s]))
        for step in traj:
            if step.s >= mdp.num_states or step.a >= mdp.num_actions or step.s_next >= mdp.num_states:
                raise ValueError(f"transition indices out of range: {step}")
            total += float(np.log(policy.probs[step.t, step.s, step.a]))
            total += float(np.log(mdp.transition[step.s, step.a, step.s_next]))
    return total


def occupancy_measure(mdp: TabularMDP, policy: StochasticPolicy) -> np.ndarray:
    """Exact (t, s, a) visitation probabilities by forward recursion."""
    if policy.horizon != mdp.horizon or policy.num_states != mdp.num_states:
        raise ValueError("policy dimensions do not match the MDP")
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    occ = np.zeros((H, S, A))
    state_dist = mdp.initial_dist.copy()
    for t in range(H):
        occ[t] = state_dist[:, None] * policy.probs[t]
        # next state distribution: sum_{s,a} occ[t,s,a] P(s'|s,a)
        state_dist = np.einsum("sa,sax->x", occ[t], mdp.transition)
    return occ


def count_support_trajectories(mdp: TabularMDP, policy: StochasticPolicy) -> int:
    """Number of trajectories with positive probability, via a counting DP."""
    H, S = mdp.horizon, mdp.num_states
    f = np.ones(S, dtype=float)
    for t in range(H - 1, -1, -1):
        g = np.zeros(S)
        for s in range(S):
            total = 0.0
            for a in range(mdp.num_actions):
                if policy.probs[t, s, a] > 0:
                    total += f[mdp.transition[s, a] > 0].sum()
            g[s] = total
        f = g
    return int(round(f[mdp.initial_dist > 0].sum()))


def iter_support_trajectories(mdp: TabularMDP, policy: StochasticPolicy,
                              limit: int | None = None) -> Iterator[Trajectory]:
    """Enumerate every positive-probability trajectory (small instances only)."""
    if limit is not None:
        n = count_support_trajectories(mdp, policy)
        if n > limit:
            raise ValueError(f"enumeration refused: {n} trajectories exceeds limit {limit}")
    H = mdp.horizon

    def recurse(t: int, s: int, prefix: list[Transition]) -> Iterator[Trajectory]:
        if t == H:
            yield Trajectory(tuple(prefix))
            return
        for a in np.flatnonzero(policy.probs[t, s] > 0):
            for s_next in np.flatnonzero(mdp.transition[s, a] > 0):
                prefix.append(Transition(s=s, a=int(a), s_next=int(s_next),
                                         r=float(mdp.reward[s, a]), t=t, done=(t == H - 1)))
                yield from recurse(t + 1, int(s_next), prefix)
                prefix.pop()

    for s0 in np.flatnonzero(mdp.initial_dist > 0):
        yield from recurse(0, int(s0), [])


def mdp_to_text(mdp: TabularMDP) -> str:
    """Serialize to the plain-text tabular format (17 significant digits)."""
    lines = [f"mdp v1 S={mdp.num_states} A={mdp.num_actions} H={mdp.horizon} "
             f"gamma={mdp.discount:.17g}"]
    for s in range(mdp.num_states):
        for a in range(mdp.num_actions):
            nums = [f"{mdp.reward[s, a]:.17g}"]
            nums += [f"{p:.17g}" for p in mdp.transition[s, a]]
            lines.append(" ".join(nums))
    lines.append("init " + " ".join(f"{p:.17g}" for p in mdp.initial_dist))
    return "\n".join(lines) + "\n"


def mdp_from_text(text: str) -> TabularMDP:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("mdp v1 "):
        raise ValueError("missing 'mdp v1' header")
    header = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    S, A, H = int(header["S"]), int(header["A"]), int(header["H"])
    gamma = float(header["gamma"])
    if len(lines) != 1 + S * A + 1:
        raise ValueError(f"expected {1 + S * A + 1} lines, got {len(lines)}")
    transition = np.zeros((S, A, S))
    reward = np.zeros((S, A))
    for i, line in enumerate(lines[1:1 + S * A]):
        vals = [float(x) for x in line.split()]
        if len(vals) != 1 + S:
            raise ValueError(f"row {i}: expected {1 + S} numbers, got {len(vals)}")
        s, a = divmod(i, A)
        reward[s, a] = vals[0]
        transition[s, a] = vals[1:]
    init_line = lines[-1].split()
    if init_line[0] != "init":
        raise ValueError("missing 'init' line")
    initial_dist = np.array([float(x) for x in init_line[1:]])
    return TabularMDP(transition=transition, reward=reward, initial_dist=initial_dist,
                      horizon=H, discount=gamma)
