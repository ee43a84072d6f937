"""Training loops: the reward-correction algorithm and its desk-scale baselines.

Each iteration collects a source rollout, periodically collects a target
rollout, updates the domain classifiers on balanced batches, and runs tabular
soft Q-learning on source experience with the corrected reward. Target
transitions feed classifier training only; they never enter the policy or
value updates. All randomness flows through named per-component generator
streams spawned from one seed, so adding rollouts in one component never
perturbs another.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .classifiers import (DeltaR, NetClassifierTrainer, NetTrainConfig,
                          TabularClassifierPair, TabularFeaturizer, delta_r_fn)
from .mdp import (DomainPair, StochasticPolicy, TabularMDP, Transition,
                  check_support, occupancy_measure, sample_trajectory, uniform_policy)
from .solver import SoftQTable, TransitionReward, policy_from_soft_q


@dataclass
class ReplayBuffer:
    """Bounded FIFO transition store with uniform sampling.

    Index columns are kept alongside the transitions so classifier code can
    read the whole buffer as arrays without a Python pass.
    """

    capacity: int | None = None
    _data: list = field(default_factory=list)
    _s: list = field(default_factory=list)
    _a: list = field(default_factory=list)
    _sn: list = field(default_factory=list)
    insertions: int = 0
    sample_calls: int = 0

    def add(self, tr: Transition) -> None:
        if self.capacity is not None and len(self._data) >= self.capacity:
            i = self.insertions % self.capacity
            self._data[i] = tr
            self._s[i], self._a[i], self._sn[i] = tr.s, tr.a, tr.s_next
        else:
            self._data.append(tr)
            self._s.append(tr.s)
            self._a.append(tr.a)
            self._sn.append(tr.s_next)
        self.insertions += 1

    def extend(self, transitions) -> None:
        for tr in transitions:
            self.add(tr)

    def __len__(self) -> int:
        return len(self._data)

    def sample(self, rng: np.random.Generator, n: int) -> list[Transition]:
        if not self._data:
            raise ValueError("cannot sample from an empty buffer")
        self.sample_calls += 1
        idx = rng.integers(0, len(self._data), size=n)
        return [self._data[i] for i in idx]

    def transitions(self) -> list[Transition]:
        return list(self._data)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (np.array(self._s, dtype=int), np.array(self._a, dtype=int),
                np.array(self._sn, dtype=int))


@dataclass
class DarcConfig:
    num_iterations: int = 600
    target_collect_period: int = 10
    warmup_iters: int = 0
    classifier: str = "tabular"  # tabular | net
    smoothing: float = 0.5
    clamp_bound: float = 20.0
    delta_variant: str = "full"  # full | sas_only | marginal
    batch_size: int = 128
    rl_updates_per_iter: int = 2
    classifier_updates_per_iter: int = 1
    replay_fresh: bool = True  # backward pass over each fresh rollout
    alpha0: float = 0.5
    alpha_tau: float = 1000.0
    eval_every: int = 10
    eval_episodes: int = 100
    buffer_capacity: int | None = None
    rollout_policy: str = "current"  # current | uniform (source-domain collection)
    target_rollout_policy: str = "current"  # current | uniform
    update_multiplier: int = 1  # extra value updates for the RL-on-target 10x baseline
    net: NetTrainConfig = field(default_factory=NetTrainConfig)
    seed: int = 0

    def __post_init__(self):
        if self.num_iterations < 1 or self.target_collect_period < 1:
            raise ValueError("iteration counts must be positive")
        if self.warmup_iters < 0:
            raise ValueError("warmup_iters must be non-negative")
        if self.classifier not in ("tabular", "net"):
            raise ValueError(f"unknown classifier kind {self.classifier!r}")
        if self.delta_variant not in ("full", "sas_only", "marginal"):
            raise ValueError(f"unknown delta variant {self.delta_variant!r}")
        if self.rollout_policy not in ("current", "uniform") \
                or self.target_rollout_policy not in ("current", "uniform"):
            raise ValueError("rollout policies must be 'current' or 'uniform'")


@dataclass
class IterationRecord:
    iter: int
    mean_delta_r: float
    loss_sas: float
    loss_sa: float
    source_return: float
    target_return: float
    target_success: float
    wall_clock_ms: float


@dataclass
class TrainStats:
    records: list[IterationRecord] = field(default_factory=list)

    COLUMNS = ("iter", "mean_delta_r", "loss_sas", "loss_sa",
               "source_return", "target_return", "target_success", "wall_clock_ms")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, include_wall_clock: bool = True) -> str:
        cols = self.COLUMNS if include_wall_clock else self.COLUMNS[:-1]
        lines = [",".join(cols)]
        for r in self.records:
            vals = [str(r.iter)] + [f"{getattr(r, c):.17g}" for c in cols[1:]]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


@dataclass
class EvalResult:
    mean_return: float
    success_rate: float
    ci_halfwidth: float
    n_episodes: int


def _rollout_batch(mdp: TabularMDP, policy: StochasticPolicy, n_episodes: int,
                   rng: np.random.Generator, success_states: frozenset[int]):
    """All episodes advance in lockstep; per-episode return and success flags."""
    cum_init = np.cumsum(mdp.initial_dist)
    cum_pol = np.cumsum(policy.probs, axis=2)
    cum_dyn = np.cumsum(mdp.transition, axis=2)
    succ_mask = np.zeros(mdp.num_states, dtype=bool)
    if success_states:
        succ_mask[list(success_states)] = True
    states = np.searchsorted(cum_init, rng.random(n_episodes), side="right")
    returns = np.zeros(n_episodes)
    hit = succ_mask[states].copy()
    for t in range(mdp.horizon):
        u = rng.random((n_episodes, 1))
        actions = (cum_pol[t, states] < u).sum(axis=1)
        returns += mdp.reward[states, actions]
        u = rng.random((n_episodes, 1))
        states = (cum_dyn[states, actions] < u).sum(axis=1)
        hit |= succ_mask[states]
    return returns, hit


def evaluate_policy(mdp: TabularMDP, policy: StochasticPolicy, n_episodes: int,
                    rng: np.random.Generator,
                    success_states: frozenset[int] = frozenset()) -> EvalResult:
    """Monte Carlo rollout evaluation with a 95% CI on the mean return."""
    returns, hit = _rollout_batch(mdp, policy, n_episodes, rng, success_states)
    se = returns.std(ddof=1) / np.sqrt(n_episodes) if n_episodes > 1 else 0.0
    return EvalResult(mean_return=float(returns.mean()),
                      success_rate=float(hit.mean()),
                      ci_halfwidth=float(1.96 * se), n_episodes=n_episodes)


def exact_success_probability(mdp: TabularMDP, policy: StochasticPolicy,
                              success_states: frozenset[int]) -> float:
    """Probability of ever visiting a success state, by forward recursion.

    Assumes success states are visited at most once per episode (true for the
    gridworlds here, where the goal drains into the sink).
    """
    occ = occupancy_measure(mdp, policy)
    idx = sorted(success_states)
    return float(occ[:, idx, :].sum())


class _RateSchedule:
    """Per-(t, s, a) visit-count schedule: alpha0 / (1 + k / tau)."""

    def __init__(self, horizon: int, num_states: int, num_actions: int,
                 alpha0: float, tau: float):
        self.counts = np.zeros((horizon, num_states, num_actions), dtype=np.int64)
        self.alpha0 = alpha0
        self.tau = tau

    def rates_for(self, t: np.ndarray, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        out = np.empty(len(t))
        for i in range(len(t)):
            k = self.counts[t[i], s[i], a[i]]
            self.counts[t[i], s[i], a[i]] += 1
            out[i] = self.alpha0 / (1.0 + k / self.tau)
        return out


def _classifier_losses_tabular(clf: TabularClassifierPair, src: ReplayBuffer,
                               tgt: ReplayBuffer) -> tuple[float, float]:
    """Balanced cross-entropy of the counting classifiers over both buffers."""
    s_s, a_s, n_s = src.arrays()
    s_t, a_t, n_t = tgt.arrays()
    with np.errstate(divide="ignore"):
        l_sas = -0.5 * (np.mean(np.log(1.0 - clf.posterior_target_sas(s_s, a_s, n_s)))
                        + np.mean(np.log(clf.posterior_target_sas(s_t, a_t, n_t))))
        l_sa = -0.5 * (np.mean(np.log(1.0 - clf.posterior_target_sa(s_s, a_s)))
                       + np.mean(np.log(clf.posterior_target_sa(s_t, a_t))))
    return float(l_sas), float(l_sa)


def _batch_arrays(batch: list[Transition]):
    t = np.array([tr.t for tr in batch], dtype=int)
    s = np.array([tr.s for tr in batch], dtype=int)
    a = np.array([tr.a for tr in batch], dtype=int)
    sn = np.array([tr.s_next for tr in batch], dtype=int)
    return t, s, a, sn


def _soft_batch_update(q: SoftQTable, t, s, a, sn, reward_sa: np.ndarray,
                       delta_vals: np.ndarray | None, rates: np.ndarray,
                       sequential: bool) -> None:
    """Soft Bellman updates on index arrays.

    sequential=True recomputes V after every single update (used for the
    backward pass over a fresh rollout, where each step bootstraps on the one
    just updated); otherwise all targets are formed from the table as of the
    start of the batch.
    """
    H = q.horizon
    r = reward_sa[s, a].astype(float)
    if delta_vals is not None:
        r = r + delta_vals
    if sequential:
        for i in range(len(t)):
            v = float(logsumexp(q.q[t[i] + 1, sn[i]])) if t[i] + 1 < H else 0.0
            tgt = r[i] + v
            q.q[t[i], s[i], a[i]] = (1 - rates[i]) * q.q[t[i], s[i], a[i]] + rates[i] * tgt
        return
    v = np.zeros(len(t))
    mask = t + 1 < H
    if mask.any():
        v[mask] = logsumexp(q.q[t[mask] + 1, sn[mask]], axis=1)
    targets = r + v
    for i in range(len(t)):  # in order, so duplicate cells compose as sampled
        q.q[t[i], s[i], a[i]] = (1 - rates[i]) * q.q[t[i], s[i], a[i]] + rates[i] * targets[i]


def _run_loop(pair: DomainPair, cfg: DarcConfig, mode: str,
              success_states: frozenset[int] = frozenset(),
              return_internals: bool = False):
    """Shared engine for the main algorithm and the baselines.

    mode is one of 'darc', 'rl_source', 'rl_target', 'importance'. The rl_*
    modes never touch classifiers; 'importance' trains classifiers like
    'darc' but applies exp(delta_r) as an update weight instead of modifying
    the reward.
    """
    if mode not in ("darc", "rl_source", "rl_target", "importance"):
        raise ValueError(f"unknown mode {mode!r}")
    uses_classifier = mode in ("darc", "importance")
    if uses_classifier:
        ok, violations = check_support(pair)
        if not ok:
            warnings.warn(f"support assumption violated on {len(violations)} "
                          "transitions; corrections will be clamped", RuntimeWarning)

    streams = np.random.SeedSequence(cfg.seed).spawn(5)
    rng_src, rng_tgt, rng_clf, rng_rl, rng_eval = (np.random.default_rng(s) for s in streams)

    mdp_train = pair.target if mode == "rl_target" else pair.source
    H, S, A = mdp_train.horizon, mdp_train.num_states, mdp_train.num_actions
    q = SoftQTable(np.zeros((H, S, A)))
    policy = policy_from_soft_q(q)
    uniform = uniform_policy(mdp_train)
    schedule = _RateSchedule(H, S, A, cfg.alpha0, cfg.alpha_tau)

    src_buffer = ReplayBuffer(capacity=cfg.buffer_capacity)
    tgt_buffer = ReplayBuffer(capacity=cfg.buffer_capacity)
    train_buffer = tgt_buffer if mode == "rl_target" else src_buffer

    clf = None
    net_trainer = None
    if uses_classifier:
        if cfg.classifier == "tabular":
            clf = TabularClassifierPair.empty(S, A, cfg.smoothing)
        else:
            net_trainer = NetClassifierTrainer(TabularFeaturizer(S, A), cfg.net, rng_clf)
            clf = net_trainer.clf

    stats = TrainStats()
    target_rollouts = 0
    counted_src = counted_tgt = 0  # buffer prefixes already in the tabular counts
    last_eval = (0.0, 0.0)  # target_return, target_success
    updates_per_iter = cfg.rl_updates_per_iter * (cfg.update_multiplier
                                                  if mode == "rl_target" else 1)

    for it in range(1, cfg.num_iterations + 1):
        t0 = time.perf_counter()

        # -- data collection
        fresh = None
        if mode != "rl_target":
            pol = uniform if cfg.rollout_policy == "uniform" else policy
            fresh = sample_trajectory(pair.source, pol, rng_src)
            src_buffer.extend(fresh.steps)
        if mode == "rl_target":
            fresh = sample_trajectory(pair.target, policy, rng_tgt)
            tgt_buffer.extend(fresh.steps)
        elif uses_classifier and it % cfg.target_collect_period == 0:
            pol = uniform if cfg.target_rollout_policy == "uniform" else policy
            tgt_buffer.extend(sample_trajectory(pair.target, pol, rng_tgt).steps)
            target_rollouts += 1

        # -- classifier update
        loss_sas = loss_sa = 0.0
        classifier_ready = uses_classifier and len(src_buffer) and len(tgt_buffer)
        if classifier_ready:
            if cfg.classifier == "tabular":
                if cfg.buffer_capacity is None:
                    src_all = src_buffer.transitions()
                    tgt_all = tgt_buffer.transitions()
                    clf.add("source", src_all[counted_src:])
                    clf.add("target", tgt_all[counted_tgt:])
                    counted_src, counted_tgt = len(src_all), len(tgt_all)
                else:  # evictions invalidate incremental counts; recount
                    clf = TabularClassifierPair.empty(S, A, cfg.smoothing)
                    clf.add("source", src_buffer.transitions())
                    clf.add("target", tgt_buffer.transitions())
                loss_sas, loss_sa = _classifier_losses_tabular(clf, src_buffer, tgt_buffer)
            else:
                src_arr = src_buffer.arrays()
                tgt_arr = tgt_buffer.arrays()
                feat = net_trainer.clf.featurizer
                sa_s, sas_s = feat.sa(src_arr[0], src_arr[1]), feat.sas(*src_arr)
                sa_t, sas_t = feat.sa(tgt_arr[0], tgt_arr[1]), feat.sas(*tgt_arr)
                for _ in range(cfg.classifier_updates_per_iter):
                    net_trainer.step(sa_s, sas_s, sa_t, sas_t, rng_clf)
                loss_sas, loss_sa = net_trainer.last_loss_sas, net_trainer.last_loss_sa

        # clamped correction values on index arrays, None before data arrives
        if classifier_ready:
            d = delta_r_fn(clf, cfg.clamp_bound, cfg.delta_variant)
            if cfg.classifier == "tabular":
                lookup = d.table(S, A)
                delta_eval = lambda s_, a_, sn_: lookup[s_, a_, sn_]
            else:
                delta_eval = lambda s_, a_, sn_: np.atleast_1d(d(s_, a_, sn_))
        else:
            delta_eval = None
        delta_active = mode == "darc" and it > cfg.warmup_iters and delta_eval is not None
        weight_active = mode == "importance" and it > cfg.warmup_iters and delta_eval is not None
        update_delta = delta_eval if delta_active else None

        # -- value updates on training-domain experience only
        delta_sum, delta_n = 0.0, 0

        def apply(batch: list[Transition], sequential: bool) -> None:
            nonlocal delta_sum, delta_n
            t, s, a, sn = _batch_arrays(batch)
            rates = schedule.rates_for(t, s, a)
            d_vals = update_delta(s, a, sn) if update_delta is not None else None
            if weight_active:
                rates = np.minimum(rates * np.exp(delta_eval(s, a, sn)), 1.0)
            _soft_batch_update(q, t, s, a, sn, mdp_train.reward, d_vals, rates, sequential)
            if uses_classifier and delta_eval is not None:
                vals = delta_eval(s, a, sn)
                delta_sum += float(np.sum(vals))
                delta_n += len(batch)

        if cfg.replay_fresh and fresh is not None:
            apply(list(reversed(fresh.steps)), sequential=True)
        for _ in range(updates_per_iter):
            apply(train_buffer.sample(rng_rl, cfg.batch_size), sequential=False)
        policy = policy_from_soft_q(q)

        # -- bookkeeping
        if it == 1 or it % cfg.eval_every == 0 or it == cfg.num_iterations:
            res = evaluate_policy(pair.target, policy, cfg.eval_episodes, rng_eval,
                                  success_states=success_states)
            last_eval = (res.mean_return, res.success_rate)
        occ_src = occupancy_measure(pair.source, policy)
        source_return = float((occ_src * pair.source.reward[None, :, :]).sum())
        stats.records.append(IterationRecord(
            iter=it,
            mean_delta_r=delta_sum / delta_n if delta_n else 0.0,
            loss_sas=loss_sas, loss_sa=loss_sa,
            source_return=source_return,
            target_return=last_eval[0], target_success=last_eval[1],
            wall_clock_ms=(time.perf_counter() - t0) * 1e3))

    if return_internals:
        internals = dict(q=q, src_buffer=src_buffer, tgt_buffer=tgt_buffer,
                         classifier=clf, target_rollouts=target_rollouts)
        return policy, stats, internals
    return policy, stats


def run_darc(pair: DomainPair, cfg: DarcConfig,
             success_states: frozenset[int] = frozenset(), **kw):
    """Full algorithm: corrected reward on source experience."""
    return _run_loop(pair, cfg, "darc", success_states, **kw)


def run_rl_on_source(pair: DomainPair, cfg: DarcConfig,
                     success_states: frozenset[int] = frozenset(), **kw):
    """Baseline: plain reward, source experience only; evaluated on target."""
    return _run_loop(pair, cfg, "rl_source", success_states, **kw)


def run_rl_on_target(pair: DomainPair, cfg: DarcConfig,
                     success_states: frozenset[int] = frozenset(), **kw):
    """Reference: trains directly on target rollouts."""
    return _run_loop(pair, cfg, "rl_target", success_states, **kw)


def run_importance_weighting(pair: DomainPair, cfg: DarcConfig,
                             success_states: frozenset[int] = frozenset(), **kw):
    """Baseline: plain reward with exp(delta_r) update weights on source data."""
    return _run_loop(pair, cfg, "importance", success_states, **kw)


def run_finetune(pair: DomainPair, cfg: DarcConfig,
                 success_states: frozenset[int] = frozenset(),
                 source_fraction: float = 0.5):
    """Source training followed by target training warm-started from its table.

    Implemented as two half-budget runs; the second continues from the first
    run's value table.
    """
    n_src = max(1, int(cfg.num_iterations * source_fraction))
    cfg_src = replace(cfg, num_iterations=n_src)
    policy, stats_src, internals = _run_loop(pair, cfg_src, "rl_source",
                                             success_states, return_internals=True)
    cfg_tgt = replace(cfg, num_iterations=cfg.num_iterations - n_src, seed=cfg.seed + 1)
    policy, stats_tgt = _continue_on_target(pair, cfg_tgt, internals["q"], success_states)
    merged = TrainStats(records=stats_src.records
                        + [replace(r, iter=r.iter + n_src) for r in stats_tgt.records])
    return policy, merged


def _continue_on_target(pair: DomainPair, cfg: DarcConfig, q: SoftQTable,
                        success_states: frozenset[int]):
    """RL on target starting from an existing value table."""
    streams = np.random.SeedSequence(cfg.seed).spawn(5)
    _, rng_tgt, _, rng_rl, rng_eval = (np.random.default_rng(s) for s in streams)
    mdp = pair.target
    schedule = _RateSchedule(mdp.horizon, mdp.num_states, mdp.num_actions,
                             cfg.alpha0, cfg.alpha_tau)
    buffer = ReplayBuffer(capacity=cfg.buffer_capacity)
    policy = policy_from_soft_q(q)
    stats = TrainStats()
    last_eval = (0.0, 0.0)
    for it in range(1, cfg.num_iterations + 1):
        t0 = time.perf_counter()
        fresh = sample_trajectory(mdp, policy, rng_tgt)
        buffer.extend(fresh.steps)
        batches = []
        if cfg.replay_fresh:
            batches.append((list(reversed(fresh.steps)), True))
        for _ in range(cfg.rl_updates_per_iter * cfg.update_multiplier):
            batches.append((buffer.sample(rng_rl, cfg.batch_size), False))
        for batch, sequential in batches:
            t, s, a, sn = _batch_arrays(batch)
            rates = schedule.rates_for(t, s, a)
            _soft_batch_update(q, t, s, a, sn, mdp.reward, None, rates, sequential)
        policy = policy_from_soft_q(q)
        if it == 1 or it % cfg.eval_every == 0 or it == cfg.num_iterations:
            res = evaluate_policy(mdp, policy, cfg.eval_episodes, rng_eval,
                                  success_states=success_states)
            last_eval = (res.mean_return, res.success_rate)
        occ_src = occupancy_measure(pair.source, policy)
        stats.records.append(IterationRecord(
            iter=it, mean_delta_r=0.0, loss_sas=0.0, loss_sa=0.0,
            source_return=float((occ_src * pair.source.reward[None, :, :]).sum()),
            target_return=last_eval[0], target_success=last_eval[1],
            wall_clock_ms=(time.perf_counter() - t0) * 1e3))
    return policy, stats
