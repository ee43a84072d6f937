"""Reward corrections: the dynamics log-ratio, estimated three ways.

The correction for a transition (s, a, s') is the log-ratio of target to
source transition probability. It can be computed exactly from known
dynamics (oracle), from tabular classifiers fit by counting, or from trained
feed-forward classifiers. The classifier route evaluates

    delta_r = log p(target | s, a, s') - log p(target | s, a)
            - log p(source | s, a, s') + log p(source | s, a)

which recovers the true log-ratio when the classifiers are Bayes-optimal and
both domains share the (s, a) sampling distribution and a 50/50 prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .mdp import DomainPair, Transition
from .nets import MLP, Adam, cross_entropy, grads_flat, log_softmax


class ClassifierDivergenceError(RuntimeError):
    pass


@dataclass
class DeltaR:
    """Callable reward correction on (s, a, s'), optionally clamped."""

    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    clamp_bound: float | None = None
    provenance: str = "oracle"

    def __call__(self, s, a, s_next):
        val = np.asarray(self.fn(s, a, s_next), dtype=float)
        if self.clamp_bound is not None:
            val = np.clip(val, -self.clamp_bound, self.clamp_bound)
        return float(val) if val.ndim == 0 else val

    def table(self, num_states: int, num_actions: int) -> np.ndarray:
        s, a, sn = np.meshgrid(np.arange(num_states), np.arange(num_actions),
                               np.arange(num_states), indexing="ij")
        out = self(s.ravel(), a.ravel(), sn.ravel())
        return np.asarray(out, dtype=float).reshape(num_states, num_actions, num_states)

    @classmethod
    def zero(cls) -> "DeltaR":
        return cls(fn=lambda s, a, sn: np.zeros(np.broadcast(s, a, sn).shape),
                   clamp_bound=None, provenance="zero")


def true_delta_r(pair: DomainPair, s: int, a: int, s_prime: int,
                 clamp_bound: float | None = None) -> float:
    """log p_target - log p_source for one transition; -inf off target support."""
    pt = pair.target.transition[s, a, s_prime]
    ps = pair.source.transition[s, a, s_prime]
    if pt == 0.0 and ps == 0.0:
        raise ValueError(f"transition outside both supports: ({s}, {a}, {s_prime})")
    with np.errstate(divide="ignore"):
        val = float(np.log(pt) - np.log(ps))
    if clamp_bound is not None:
        val = float(np.clip(val, -clamp_bound, clamp_bound))
    return val


def oracle_delta_r(pair: DomainPair, clamp_bound: float | None = None) -> DeltaR:
    """Exact correction from the known dynamics tables.

    Point queries on transitions outside both supports raise; vectorized
    queries return NaN there, which downstream backups mask out because such
    transitions have probability zero wherever they are integrated.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.log(pair.target.transition) - np.log(pair.source.transition)
    both_zero = (pair.target.transition == 0.0) & (pair.source.transition == 0.0)

    def fn(s, a, sn):
        vals = table[s, a, sn]
        if np.ndim(vals) == 0:
            if both_zero[s, a, sn]:
                raise ValueError(f"transition outside both supports: ({s}, {a}, {sn})")
            return vals
        return vals

    return DeltaR(fn=fn, clamp_bound=clamp_bound, provenance="oracle")


def _posterior(n_target: np.ndarray, n_source: np.ndarray, smoothing: float) -> np.ndarray:
    """p(target | cell) from per-domain counts with a shared pseudo-count."""
    denom = n_target + n_source + 2.0 * smoothing
    with np.errstate(invalid="ignore", divide="ignore"):
        p = (n_target + smoothing) / denom
    return np.where(denom > 0, p, 0.5)


@dataclass
class TabularClassifierPair:
    """Counting classifiers over (s, a, s') and (s, a) cells.

    Counts may be real-valued: passing true probabilities as counts with zero
    smoothing yields the Bayes-optimal (infinite data) classifier.
    """

    counts_sas_source: np.ndarray
    counts_sas_target: np.ndarray
    counts_sa_source: np.ndarray
    counts_sa_target: np.ndarray
    smoothing: float = 0.5

    def __post_init__(self):
        if self.smoothing < 0:
            raise ValueError("smoothing must be non-negative")
        for c in (self.counts_sas_source, self.counts_sas_target,
                  self.counts_sa_source, self.counts_sa_target):
            if np.any(c < 0):
                raise ValueError("counts must be non-negative")

    @classmethod
    def empty(cls, num_states: int, num_actions: int, smoothing: float = 0.5):
        return cls(counts_sas_source=np.zeros((num_states, num_actions, num_states)),
                   counts_sas_target=np.zeros((num_states, num_actions, num_states)),
                   counts_sa_source=np.zeros((num_states, num_actions)),
                   counts_sa_target=np.zeros((num_states, num_actions)),
                   smoothing=smoothing)

    @property
    def fitted(self) -> bool:
        return self.counts_sas_source.sum() > 0 and self.counts_sas_target.sum() > 0

    def add(self, domain: str, transitions: Sequence[Transition]) -> None:
        sas = self.counts_sas_source if domain == "source" else self.counts_sas_target
        sa = self.counts_sa_source if domain == "source" else self.counts_sa_target
        for tr in transitions:
            sas[tr.s, tr.a, tr.s_next] += 1
            sa[tr.s, tr.a] += 1

    def posterior_target_sas(self, s, a, s_next):
        return _posterior(self.counts_sas_target[s, a, s_next],
                          self.counts_sas_source[s, a, s_next], self.smoothing)

    def posterior_target_sa(self, s, a):
        return _posterior(self.counts_sa_target[s, a],
                          self.counts_sa_source[s, a], self.smoothing)

    def delta_r(self, s, a, s_next):
        p_sas = self.posterior_target_sas(s, a, s_next)
        p_sa = self.posterior_target_sa(s, a)
        with np.errstate(divide="ignore"):
            return (np.log(p_sas) - np.log(p_sa)
                    - np.log(1.0 - p_sas) + np.log(1.0 - p_sa))

    def delta_r_sas_only(self, s, a, s_next):
        p_sas = self.posterior_target_sas(s, a, s_next)
        with np.errstate(divide="ignore"):
            return np.log(p_sas) - np.log(1.0 - p_sas)

    def delta_r_marginal(self, s, a, s_next):
        """Action-unconditioned variant: classifier sees only (s, s')."""
        n_ss_t = self.counts_sas_target.sum(axis=1)
        n_ss_s = self.counts_sas_source.sum(axis=1)
        n_s_t = self.counts_sa_target.sum(axis=1)
        n_s_s = self.counts_sa_source.sum(axis=1)
        p_ss = _posterior(n_ss_t[s, s_next], n_ss_s[s, s_next], self.smoothing)
        p_s = _posterior(n_s_t[s], n_s_s[s], self.smoothing)
        with np.errstate(divide="ignore"):
            return (np.log(p_ss) - np.log(p_s)
                    - np.log(1.0 - p_ss) + np.log(1.0 - p_s))


def fit_tabular(source_transitions: Sequence[Transition],
                target_transitions: Sequence[Transition],
                num_states: int, num_actions: int,
                smoothing: float = 0.5) -> TabularClassifierPair:
    """Fit by counting; counting is the exact cross-entropy minimizer here."""
    if not source_transitions or not target_transitions:
        raise ValueError("both buffers must be non-empty")
    clf = TabularClassifierPair.empty(num_states, num_actions, smoothing)
    clf.add("source", source_transitions)
    clf.add("target", target_transitions)
    return clf


def bayes_optimal_tabular(pair: DomainPair,
                          weights: np.ndarray | None = None) -> TabularClassifierPair:
    """Infinite-data limit: true conditionals as counts, no smoothing.

    weights is a shared nonnegative (s, a) sampling distribution (uniform by
    default); under it the classifier posteriors are exact and the classifier
    correction equals the true log-ratio on the common support.
    """
    S, A = pair.source.num_states, pair.source.num_actions
    w = np.ones((S, A)) if weights is None else np.asarray(weights, dtype=float)
    return TabularClassifierPair(
        counts_sas_source=w[:, :, None] * pair.source.transition,
        counts_sas_target=w[:, :, None] * pair.target.transition,
        counts_sa_source=w.copy(),
        counts_sa_target=w.copy(),
        smoothing=0.0)


def classifier_delta_r(clf, s, a, s_prime):
    """Four-term correction from a fitted classifier pair."""
    if isinstance(clf, TabularClassifierPair) and not clf.fitted:
        raise ValueError("classifier has no data from one or both domains")
    return clf.delta_r(s, a, s_prime)


def single_classifier_delta_r(clf, s, a, s_prime, variant: str = "sas_only"):
    """Ablated corrections: 'sas_only' drops the (s, a) terms; 'marginal' is
    the action-unconditioned variant used by the MATL-style baseline."""
    if isinstance(clf, TabularClassifierPair) and not clf.fitted:
        raise ValueError("classifier has no data from one or both domains")
    if variant == "sas_only":
        return clf.delta_r_sas_only(s, a, s_prime)
    if variant == "marginal":
        return clf.delta_r_marginal(s, a, s_prime)
    raise ValueError(f"unknown variant {variant!r}")


def delta_r_fn(clf, clamp_bound: float | None = 20.0, variant: str = "full") -> DeltaR:
    provenance = "tabular" if isinstance(clf, TabularClassifierPair) else "learned"
    if variant == "full":
        fn = clf.delta_r
    elif variant == "sas_only":
        fn = clf.delta_r_sas_only
    elif variant == "marginal":
        fn = clf.delta_r_marginal
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return DeltaR(fn=fn, clamp_bound=clamp_bound, provenance=provenance)


# ---------------------------------------------------------------------------
# feature maps for the network classifiers

class TabularFeaturizer:
    """One-hot state and action features."""

    def __init__(self, num_states: int, num_actions: int):
        self.num_states = num_states
        self.num_actions = num_actions
        self._eye_s = np.eye(num_states)
        self._eye_a = np.eye(num_actions)

    @property
    def sa_dim(self) -> int:
        return self.num_states + self.num_actions

    @property
    def sas_dim(self) -> int:
        return 2 * self.num_states + self.num_actions

    def sa(self, s, a) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=int))
        a = np.atleast_1d(np.asarray(a, dtype=int))
        return np.concatenate([self._eye_s[s], self._eye_a[a]], axis=1)

    def sas(self, s, a, s_next) -> np.ndarray:
        s_next = np.atleast_1d(np.asarray(s_next, dtype=int))
        return np.concatenate([self.sa(s, a), self._eye_s[s_next]], axis=1)


class ArcheryFeaturizer:
    """Raw scalar features: the shot angle, and the angle plus landing offset."""

    sa_dim = 1
    sas_dim = 2

    def sa(self, s, a) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return a[:, None]

    def sas(self, s, a, s_next) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        s_next = np.atleast_1d(np.asarray(s_next, dtype=float))
        return np.stack([a, s_next], axis=1)


# ---------------------------------------------------------------------------
# trained network classifiers

@dataclass
class NetTrainConfig:
    hidden_layers: tuple[int, ...] = (256, 256)
    noise_std: float = 1.0
    learning_rate: float = 3e-4
    batch_size: int = 128
    steps: int = 2000
    early_stop_patience: int | None = None  # epochs of rising validation loss
    validation_fraction: float = 0.1
    standardize: bool = False


def archery_net_config(**overrides) -> NetTrainConfig:
    cfg = dict(hidden_layers=(32,), learning_rate=3e-3, batch_size=1024,
               steps=2000, early_stop_patience=3, standardize=True)
    cfg.update(overrides)
    return NetTrainConfig(**cfg)


@dataclass
class NetClassifierPair:
    """Residual-parameterized classifier pair.

    The (s, a) head is softmax(f_sa); the (s, a, s') head is
    softmax(f_sas + f_sa), so the learned correction reduces to the logit
    difference of f_sas alone. Class 0 is source, class 1 is target.
    """

    f_sa: MLP
    f_sas: MLP
    featurizer: object
    noise_std: float = 1.0
    mean_sa: np.ndarray | None = None
    std_sa: np.ndarray | None = None
    mean_sas: np.ndarray | None = None
    std_sas: np.ndarray | None = None

    def _norm_sa(self, X: np.ndarray) -> np.ndarray:
        return X if self.mean_sa is None else (X - self.mean_sa) / self.std_sa

    def _norm_sas(self, X: np.ndarray) -> np.ndarray:
        return X if self.mean_sas is None else (X - self.mean_sas) / self.std_sas

    def logits(self, s, a, s_next) -> tuple[np.ndarray, np.ndarray]:
        """(sa_logits, sas_logits) without input noise."""
        X_sa = self._norm_sa(self.featurizer.sa(s, a))
        X_sas = self._norm_sas(self.featurizer.sas(s, a, s_next))
        sa_logits = self.f_sa(X_sa)
        sas_logits = self.f_sas(X_sas) + sa_logits
        return sa_logits, sas_logits

    def delta_r(self, s, a, s_next):
        sa_logits, sas_logits = self.logits(s, a, s_next)
        lp_sas = log_softmax(sas_logits)
        lp_sa = log_softmax(sa_logits)
        out = lp_sas[:, 1] - lp_sa[:, 1] - lp_sas[:, 0] + lp_sa[:, 0]
        return float(out[0]) if out.shape == (1,) and np.isscalar(s_next) else out

    def delta_r_sas_only(self, s, a, s_next):
        _, sas_logits = self.logits(s, a, s_next)
        lp = log_softmax(sas_logits)
        out = lp[:, 1] - lp[:, 0]
        return float(out[0]) if out.shape == (1,) and np.isscalar(s_next) else out

    def delta_r_marginal(self, s, a, s_next):
        raise NotImplementedError(
            "action-unconditioned corrections are only available for tabular "
            "classifiers; train with classifier kind 'tabular' for that baseline")


def _loss_and_grads(clf: NetClassifierPair, X_sa: np.ndarray, X_sas: np.ndarray,
                    labels: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Both cross-entropy losses and flat gradients for (f_sa, f_sas).

    The residual head couples the networks: gradients of the (s, a, s') loss
    flow into f_sa as well.
    """
    sa_logits, cache_sa = clf.f_sa.forward(X_sa)
    sas_out, cache_sas = clf.f_sas.forward(X_sas)
    loss_sas, d_sas = cross_entropy(sas_out + sa_logits, labels)
    loss_sa, d_sa = cross_entropy(sa_logits, labels)
    g_sas = clf.f_sas.backward(cache_sas, d_sas)
    g_sa = clf.f_sa.backward(cache_sa, d_sa + d_sas)
    return loss_sas, loss_sa, grads_flat(clf.f_sa, g_sa), grads_flat(clf.f_sas, g_sas)


class NetClassifierTrainer:
    """Holds optimizer state so classifiers can be updated incrementally."""

    def __init__(self, featurizer, cfg: NetTrainConfig, rng: np.random.Generator):
        sa_sizes = [featurizer.sa_dim, *cfg.hidden_layers, 2]
        sas_sizes = [featurizer.sas_dim, *cfg.hidden_layers, 2]
        self.cfg = cfg
        self.clf = NetClassifierPair(f_sa=MLP(sa_sizes, rng), f_sas=MLP(sas_sizes, rng),
                                     featurizer=featurizer, noise_std=cfg.noise_std)
        self.adam_sa = Adam(learning_rate=cfg.learning_rate)
        self.adam_sas = Adam(learning_rate=cfg.learning_rate)
        self.last_loss_sas = float("nan")
        self.last_loss_sa = float("nan")

    def set_standardization(self, X_sa: np.ndarray, X_sas: np.ndarray) -> None:
        """Fit feature scaling on source-domain features."""
        self.clf.mean_sa = X_sa.mean(axis=0)
        self.clf.std_sa = np.maximum(X_sa.std(axis=0), 1e-8)
        self.clf.mean_sas = X_sas.mean(axis=0)
        self.clf.std_sas = np.maximum(X_sas.std(axis=0), 1e-8)

    def step(self, sa_src, sas_src, sa_tgt, sas_tgt, rng: np.random.Generator) -> None:
        """One gradient step on a balanced batch (implied 50/50 domain prior)."""
        clf, cfg = self.clf, self.cfg
        half = max(1, cfg.batch_size // 2)
        i_src = rng.integers(0, len(sa_src), size=half)
        i_tgt = rng.integers(0, len(sa_tgt), size=half)
        X_sa = clf._norm_sa(np.concatenate([sa_src[i_src], sa_tgt[i_tgt]]))
        X_sas = clf._norm_sas(np.concatenate([sas_src[i_src], sas_tgt[i_tgt]]))
        labels = np.concatenate([np.zeros(half, dtype=int), np.ones(half, dtype=int)])
        if cfg.noise_std > 0:  # input noise during training only
            X_sa = X_sa + cfg.noise_std * rng.standard_normal(X_sa.shape)
            X_sas = X_sas + cfg.noise_std * rng.standard_normal(X_sas.shape)
        loss_sas, loss_sa, g_sa, g_sas = _loss_and_grads(clf, X_sa, X_sas, labels)
        if not (np.isfinite(loss_sas) and np.isfinite(loss_sa)):
            raise ClassifierDivergenceError(
                f"classifier loss diverged: loss_sas={loss_sas}, loss_sa={loss_sa}, "
                f"step={self.adam_sa.step_count}")
        clf.f_sa.set_params_flat(self.adam_sa.step(clf.f_sa.params_flat(), g_sa))
        clf.f_sas.set_params_flat(self.adam_sas.step(clf.f_sas.params_flat(), g_sas))
        self.last_loss_sas, self.last_loss_sa = loss_sas, loss_sa

    def evaluate_loss(self, sa_src, sas_src, sa_tgt, sas_tgt) -> float:
        """Noise-free total loss on the given feature sets."""
        clf = self.clf
        X_sa = clf._norm_sa(np.concatenate([sa_src, sa_tgt]))
        X_sas = clf._norm_sas(np.concatenate([sas_src, sas_tgt]))
        labels = np.concatenate([np.zeros(len(sa_src), dtype=int),
                                 np.ones(len(sa_tgt), dtype=int)])
        sa_logits = clf.f_sa(X_sa)
        sas_logits = clf.f_sas(X_sas) + sa_logits
        loss_sas, _ = cross_entropy(sas_logits, labels)
        loss_sa, _ = cross_entropy(sa_logits, labels)
        return loss_sas + loss_sa


def transitions_to_arrays(transitions: Sequence[Transition]):
    s = np.array([tr.s for tr in transitions])
    a = np.array([tr.a for tr in transitions])
    sn = np.array([tr.s_next for tr in transitions])
    return s, a, sn


def train_net_pair(source, target, featurizer, cfg: NetTrainConfig,
                   rng: np.random.Generator) -> NetClassifierPair:
    """Train the classifier pair on (s, a, s') arrays from each domain.

    source and target are (s, a, s_next) array triples. With
    early_stop_patience set, a validation split is held out and training
    stops once the validation loss rises for that many consecutive epochs.
    """
    if len(source[0]) == 0 or len(target[0]) == 0:
        raise ValueError("both buffers must be non-empty")
    trainer = NetClassifierTrainer(featurizer, cfg, rng)
    sa_src = featurizer.sa(source[0], source[1])
    sas_src = featurizer.sas(*source)
    sa_tgt = featurizer.sa(target[0], target[1])
    sas_tgt = featurizer.sas(*target)
    if cfg.standardize:
        trainer.set_standardization(sa_src, sas_src)

    if cfg.early_stop_patience is None:
        for _ in range(cfg.steps):
            trainer.step(sa_src, sas_src, sa_tgt, sas_tgt, rng)
        return trainer.clf

    n_val_src = max(1, int(len(sa_src) * cfg.validation_fraction))
    n_val_tgt = max(1, int(len(sa_tgt) * cfg.validation_fraction))
    perm_src = rng.permutation(len(sa_src))
    perm_tgt = rng.permutation(len(sa_tgt))
    vs, ts = perm_src[:n_val_src], perm_src[n_val_src:]
    vt, tt = perm_tgt[:n_val_tgt], perm_tgt[n_val_tgt:]
    steps_per_epoch = max(1, (len(ts) + len(tt)) // cfg.batch_size)
    best = prev = np.inf
    rises = 0
    steps_done = 0
    while steps_done < cfg.steps:
        for _ in range(steps_per_epoch):
            trainer.step(sa_src[ts], sas_src[ts], sa_tgt[tt], sas_tgt[tt], rng)
            steps_done += 1
            if steps_done >= cfg.steps:
                break
        val = trainer.evaluate_loss(sa_src[vs], sas_src[vs], sa_tgt[vt], sas_tgt[vt])
        rises = rises + 1 if val > prev else 0
        if val < best:
            best = val
        prev = val
        if rises >= cfg.early_stop_patience:
            break
    return trainer.clf


def finite_difference_check(clf: NetClassifierPair, X_sa: np.ndarray, X_sas: np.ndarray,
                            labels: np.ndarray, n_coords: int,
                            rng: np.random.Generator, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checked on the noise-free loss at the classifier's current parameters,
    over n_coords randomly chosen parameter coordinates across both networks.
    """
    _, _, g_sa, g_sas = _loss_and_grads(clf, X_sa, X_sas, labels)
    analytic = np.concatenate([g_sa, g_sas])
    n_sa = clf.f_sa.num_params()

    def loss_at(flat: np.ndarray) -> float:
        saved_sa = clf.f_sa.params_flat()
        saved_sas = clf.f_sas.params_flat()
        clf.f_sa.set_params_flat(flat[:n_sa])
        clf.f_sas.set_params_flat(flat[n_sa:])
        sa_logits = clf.f_sa(X_sa)
        sas_logits = clf.f_sas(X_sas) + sa_logits
        l_sas, _ = cross_entropy(sas_logits, labels)
        l_sa, _ = cross_entropy(sa_logits, labels)
        clf.f_sa.set_params_flat(saved_sa)
        clf.f_sas.set_params_flat(saved_sas)
        return l_sas + l_sa

    flat = np.concatenate([clf.f_sa.params_flat(), clf.f_sas.params_flat()])
    coords = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
    worst = 0.0
    for c in coords:
        bumped = flat.copy()
        bumped[c] = flat[c] + h
        up = loss_at(bumped)
        bumped[c] = flat[c] - h
        down = loss_at(bumped)
        fd = (up - down) / (2 * h)
        denom = max(abs(fd) + abs(analytic[c]), 1e-8)
        worst = max(worst, abs(fd - analytic[c]) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoint format: architecture descriptor plus flat parameters

def _fmt_array(arr: np.ndarray | None) -> str:
    return "none" if arr is None else " ".join(f"{x:.17g}" for x in np.ravel(arr))


def save_net_pair(clf: NetClassifierPair, featurizer_name: str) -> str:
    lines = ["netpair v1",
             f"featurizer {featurizer_name}",
             f"noise_std {clf.noise_std:.17g}",
             "sa_layers " + " ".join(str(n) for n in clf.f_sa.layer_sizes),
             "sas_layers " + " ".join(str(n) for n in clf.f_sas.layer_sizes),
             "mean_sa " + _fmt_array(clf.mean_sa),
             "std_sa " + _fmt_array(clf.std_sa),
             "mean_sas " + _fmt_array(clf.mean_sas),
             "std_sas " + _fmt_array(clf.std_sas),
             "params_sa " + _fmt_array(clf.f_sa.params_flat()),
             "params_sas " + _fmt_array(clf.f_sas.params_flat())]
    return "\n".join(lines) + "\n"


def load_net_pair(text: str, featurizer) -> NetClassifierPair:
    fields = {}
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines[0] != "netpair v1":
        raise ValueError("missing 'netpair v1' header")
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        fields[key] = rest

    def arr(key):
        return None if fields[key] == "none" else np.array([float(x) for x in fields[key].split()])

    rng = np.random.default_rng(0)  # placeholder init, overwritten below
    f_sa = MLP([int(x) for x in fields["sa_layers"].split()], rng)
    f_sas = MLP([int(x) for x in fields["sas_layers"].split()], rng)
    f_sa.set_params_flat(arr("params_sa"))
    f_sas.set_params_flat(arr("params_sas"))
    return NetClassifierPair(f_sa=f_sa, f_sas=f_sas, featurizer=featurizer,
                             noise_std=float(fields["noise_std"]),
                             mean_sa=arr("mean_sa"), std_sa=arr("std_sa"),
                             mean_sas=arr("mean_sas"), std_sas=arr("std_sas"))
