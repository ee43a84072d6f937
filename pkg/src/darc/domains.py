"""Desk-scale environments: slip gridworlds with domain shift, and an archery task.

The gridworld builders return a DomainPair whose source and target share the
state space, reward table, and initial distribution; only the dynamics differ.
The wall variant puts an obstacle in the target domain only; the action-flip
variant exchanges the effects of up and down at one cell in the target only.
The archery task is a one-shot continuous problem with analytic Gaussian
landing densities, kept separate from the tabular machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import DomainPair, TabularMDP

UP, DOWN, LEFT, RIGHT, STAY = range(5)
NUM_ACTIONS = 5
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1), STAY: (0, 0)}

Cell = tuple[int, int]  # (row, col), row 0 at the top


@dataclass(frozen=True)
class GridworldSpec:
    width: int = 6
    height: int = 6
    start: Cell = (0, 0)
    goal: Cell = (5, 0)
    wall_cells: frozenset[Cell] = frozenset()
    flip_cell: Cell | None = None
    slip_prob: float = 0.1
    goal_reward: float = 1.0
    step_reward: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "wall_cells", frozenset(self.wall_cells))
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if not self._in_bounds(cell):
                raise ValueError(f"{name} cell {cell} out of bounds")
        for cell in self.wall_cells:
            if not self._in_bounds(cell):
                raise ValueError(f"wall cell {cell} out of bounds")
        if self.start in self.wall_cells or self.goal in self.wall_cells:
            raise ValueError("start and goal must not be wall cells")
        if self.flip_cell is not None:
            if not self._in_bounds(self.flip_cell):
                raise ValueError(f"flip cell {self.flip_cell} out of bounds")
            if self.flip_cell in self.wall_cells:
                raise ValueError("flip cell must not be a wall cell")
        if not (0.0 <= self.slip_prob < 1.0):
            raise ValueError("slip_prob must lie in [0, 1)")

    def _in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width


def state_index(spec: GridworldSpec, cell: Cell) -> int:
    return cell[0] * spec.width + cell[1]


def cell_of_state(spec: GridworldSpec, state: int) -> Cell:
    return divmod(state, spec.width)


def num_grid_states(spec: GridworldSpec) -> int:
    # all cells plus one absorbing sink entered from the goal
    return spec.width * spec.height + 1


def sink_state(spec: GridworldSpec) -> int:
    return spec.width * spec.height


def goal_state(spec: GridworldSpec) -> int:
    return state_index(spec, spec.goal)


def parse_grid_map(text: str, **overrides) -> GridworldSpec:
    """Build a GridworldSpec from an ASCII map.

    Legend: S start, G goal, # wall, F flip cell, . empty. Rows may be
    separated by newlines or '|'.
    """
    rows = [r for r in text.replace("|", "\n").splitlines() if r.strip()]
    if not rows:
        raise ValueError("empty grid map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("grid map rows must all have the same length")
    start = goal = flip = None
    walls = set()
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "S":
                start = (r, c)
            elif ch == "G":
                goal = (r, c)
            elif ch == "#":
                walls.add((r, c))
            elif ch == "F":
                flip = (r, c)
            elif ch != ".":
                raise ValueError(f"unknown map character {ch!r} at row {r}, col {c}")
    if start is None or goal is None:
        raise ValueError("grid map needs exactly one S and one G")
    return GridworldSpec(width=width, height=len(rows), start=start, goal=goal,
                         wall_cells=frozenset(walls), flip_cell=flip, **overrides)


def default_wall_spec(**overrides) -> GridworldSpec:
    """Canonical 6x6 layout: start top left, goal bottom left, 4-cell wall at
    mid height spanning from the left edge, passable only on the right."""
    walls = frozenset({(3, 0), (3, 1), (3, 2), (3, 3)})
    kwargs = dict(width=6, height=6, start=(0, 0), goal=(5, 0), wall_cells=walls)
    kwargs.update(overrides)
    return GridworldSpec(**kwargs)


def default_flip_spec(**overrides) -> GridworldSpec:
    """Canonical 6x6 action-flip layout: flip cell on the direct path."""
    kwargs = dict(width=6, height=6, start=(0, 0), goal=(5, 0), wall_cells=frozenset(),
                  flip_cell=(2, 0))
    kwargs.update(overrides)
    return GridworldSpec(**kwargs)


def _resolve(spec: GridworldSpec, cell: Cell, move: tuple[int, int],
             blocked: frozenset[Cell]) -> Cell:
    r, c = cell[0] + move[0], cell[1] + move[1]
    if not (0 <= r < spec.height and 0 <= c < spec.width) or (r, c) in blocked:
        return cell
    return (r, c)


def _slip_row(spec: GridworldSpec, cell: Cell, intended: int,
              blocked: frozenset[Cell], num_states: int) -> np.ndarray:
    """Next-state distribution: intended effect w.p. 1 - slip, else uniform
    over all five effects. Blocked or off-grid effects resolve to staying."""
    row = np.zeros(num_states)
    eta = spec.slip_prob
    for effect, move in _MOVES.items():
        p = eta / NUM_ACTIONS + (1.0 - eta if effect == intended else 0.0)
        row[state_index(spec, _resolve(spec, cell, move, blocked))] += p
    return row


def _build_mdp(spec: GridworldSpec, blocked: frozenset[Cell], flip: bool,
               horizon: int) -> TabularMDP:
    S = num_grid_states(spec)
    sink = sink_state(spec)
    P = np.zeros((S, NUM_ACTIONS, S))
    R = np.full((S, NUM_ACTIONS), spec.step_reward)
    for r in range(spec.height):
        for c in range(spec.width):
            s = state_index(spec, (r, c))
            for a in range(NUM_ACTIONS):
                intended = a
                if flip and (r, c) == spec.flip_cell and a in (UP, DOWN):
                    intended = DOWN if a == UP else UP
                P[s, a] = _slip_row(spec, (r, c), intended, blocked, S)
    gs = goal_state(spec)
    P[gs, :, :] = 0.0
    P[gs, :, sink] = 1.0  # goal pays once, then absorbs
    R[gs, :] = spec.goal_reward
    P[sink, :, sink] = 1.0
    R[sink, :] = 0.0
    init = np.zeros(S)
    init[state_index(spec, spec.start)] = 1.0
    return TabularMDP(transition=P, reward=R, initial_dist=init, horizon=horizon)


def build_wall_gridworld(spec: GridworldSpec, horizon: int = 30) -> DomainPair:
    """Source ignores wall cells; in the target, moves into them resolve to stay.

    Rows out of wall cells are copied from the source: those states are
    unreachable in the target, and copying keeps the support check exact.
    """
    if spec.flip_cell is not None:
        raise ValueError("wall gridworld takes a spec without a flip cell")
    source = _build_mdp(spec, blocked=frozenset(), flip=False, horizon=horizon)
    target = _build_mdp(spec, blocked=spec.wall_cells, flip=False, horizon=horizon)
    P = target.transition.copy()
    for cell in spec.wall_cells:
        w = state_index(spec, cell)
        P[w] = source.transition[w]
    target = target.with_transition(P)
    return DomainPair(source=source, target=target)


def build_action_flip_gridworld(spec: GridworldSpec, horizon: int = 30) -> DomainPair:
    """Same slip model everywhere; at flip_cell the target swaps up and down."""
    if spec.flip_cell is None:
        raise ValueError("action-flip gridworld requires a flip cell")
    source = _build_mdp(spec, blocked=frozenset(), flip=False, horizon=horizon)
    target = _build_mdp(spec, blocked=frozenset(), flip=True, horizon=horizon)
    return DomainPair(source=source, target=target)


@dataclass(frozen=True)
class ArcherySpec:
    target_distance: float = 70.0
    source_wind_mean: float = 1.0
    source_wind_std: float = 1.0
    target_wind_mean: float = 0.0
    target_wind_std: float = 0.3
    angle_range: tuple[float, float] = (-2.0, 2.0)

    def __post_init__(self):
        if self.source_wind_std <= 0 or self.target_wind_std <= 0:
            raise ValueError("wind stds must be positive")
        lo, hi = self.angle_range
        if not (-90.0 < lo <= hi < 90.0):
            raise ValueError("angle_range must lie strictly inside (-90, 90) degrees")

    def wind(self, domain: str) -> tuple[float, float]:
        if domain == "source":
            return self.source_wind_mean, self.source_wind_std
        if domain == "target":
            return self.target_wind_mean, self.target_wind_std
        raise ValueError(f"domain must be 'source' or 'target', got {domain!r}")


def _landing_params(theta_deg: float, domain: str, spec: ArcherySpec) -> tuple[float, float]:
    mu_f, sigma_f = spec.wind(domain)
    theta = math.radians(theta_deg)
    scale = 1.0 / math.cos(theta) ** 2
    return spec.target_distance * math.sin(theta) + mu_f * scale, sigma_f * scale


def archery_sample(theta_deg: float, domain: str, spec: ArcherySpec,
                   rng: np.random.Generator, size: int | None = None):
    """Landing offset(s) in meters: distance * sin(theta) + wind / cos(theta)^2."""
    mean, std = _landing_params(theta_deg, domain, spec)
    return mean + std * rng.standard_normal() if size is None \
        else mean + std * rng.standard_normal(size)


def archery_log_density(theta_deg: float, s_prime, domain: str, spec: ArcherySpec):
    """Gaussian log density of the landing offset given the shot angle."""
    mean, std = _landing_params(theta_deg, domain, spec)
    s_prime = np.asarray(s_prime, dtype=float)
    out = -0.5 * ((s_prime - mean) / std) ** 2 - math.log(std) - 0.5 * math.log(2 * math.pi)
    return float(out) if out.ndim == 0 else out


def archery_true_delta_r(theta_deg: float, s_prime, spec: ArcherySpec):
    """Target minus source landing log density."""
    return (archery_log_density(theta_deg, s_prime, "target", spec)
            - archery_log_density(theta_deg, s_prime, "source", spec))


def archery_reward(s_prime):
    """Negative distance to the target line."""
    return -np.abs(s_prime)


def archery_objective(theta_deg: float, domain: str, reward_fn, spec: ArcherySpec,
                      n_samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo log-mean-exp aggregate of reward_fn over sampled landings.

    reward_fn maps (theta_deg, landings array) to an array of rewards; pass
    archery-plus-correction variants to score modified objectives.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    landings = archery_sample(theta_deg, domain, spec, rng, size=n_samples)
    vals = np.asarray(reward_fn(theta_deg, landings), dtype=float)
    m = vals.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.mean(np.exp(vals - m))))
