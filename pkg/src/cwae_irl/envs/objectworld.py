"""Objectworld: an N x N grid whose reward depends on nearby coloured objects.

Cells are ``(x, y)`` with state index ``y * N + x``; grid row ``y`` is a
heatmap row. Each object has an outer and an inner colour, red or green.
The four features of a cell are Euclidean distances to the nearest object
with outer red, outer green, inner red and inner green colour.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ParseError, ValidationError
from ..mdp import MdpModel

RED, GREEN = "red", "green"
COLORS = (RED, GREEN)

# up, down, left, right, stay
ACTIONS = ((0, -1), (0, 1), (-1, 0), (1, 0), (0, 0))
ACTION_NAMES = ("up", "down", "left", "right", "stay")
STAY = 4


@dataclass(frozen=True)
class ObjectworldSpec:
    grid_size: int = 10
    num_objects: int | None = None  # None -> N**2 // 8
    wind: float = 0.3
    placement_seed: int = 0
    discount: float = 0.9
    metric: str = "euclidean"  # how "within k cells" is measured for the true reward

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValidationError("grid_size must be positive")
        if not 0.0 <= self.wind < 1.0:
            raise ValidationError("wind must lie in [0, 1)")
        n = self.resolved_num_objects
        if n < 2:
            raise ValidationError("need at least two objects to cover both outer and inner colours")
        if n > self.grid_size**2:
            raise ValidationError(f"{n} objects do not fit on a {self.grid_size}x{self.grid_size} grid")
        if self.metric not in ("euclidean", "chebyshev"):
            raise ValidationError(f"unknown metric {self.metric!r}")

    @property
    def resolved_num_objects(self) -> int:
        return self.grid_size**2 // 8 if self.num_objects is None else self.num_objects


@dataclass(frozen=True)
class WorldObject:
    cell: tuple
    outer: str
    inner: str


@dataclass(frozen=True)
class ObjectPlacement:
    grid_size: int
    objects: tuple = field(default_factory=tuple)

    def __post_init__(self):
        cells = [o.cell for o in self.objects]
        if len(set(cells)) != len(cells):
            raise ValidationError("object cells must be distinct")
        for o in self.objects:
            x, y = o.cell
            if not (0 <= x < self.grid_size and 0 <= y < self.grid_size):
                raise ValidationError(f"object cell {o.cell} is off the grid")
            if o.outer not in COLORS or o.inner not in COLORS:
                raise ValidationError(f"unknown colour in {o}")

    def covers_all_colors(self) -> bool:
        outer = {o.outer for o in self.objects}
        inner = {o.inner for o in self.objects}
        return outer == set(COLORS) and inner == set(COLORS)

    def save(self, path):
        lines = [f"{o.cell[0]},{o.cell[1]},{o.outer},{o.inner}" for o in self.objects]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path, grid_size: int) -> "ObjectPlacement":
        objects = []
        for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != 4:
                raise ParseError(f"expected x,y,outer,inner, got {line!r}", i)
            try:
                x, y = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer cell in {line!r}", i) from None
            if parts[2] not in COLORS or parts[3] not in COLORS:
                raise ParseError(f"unknown colour in {line!r}", i)
            objects.append(WorldObject((x, y), parts[2], parts[3]))
        return cls(grid_size, tuple(objects))


def draw_placement(spec: ObjectworldSpec) -> ObjectPlacement:
    """Seeded object placement, redrawn until every colour appears inside and out."""
    rng = np.random.default_rng(spec.placement_seed)
    n, k = spec.grid_size, spec.resolved_num_objects
    while True:
        cells = rng.choice(n * n, size=k, replace=False)
        colors = rng.integers(0, 2, size=(k, 2))
        objects = tuple(
            WorldObject((int(c % n), int(c // n)), COLORS[o], COLORS[i])
            for c, (o, i) in zip(cells, colors)
        )
        placement = ObjectPlacement(n, objects)
        if placement.covers_all_colors():
            return placement


def _nearest(placement: ObjectPlacement, cell, attr: str, color: str, metric: str) -> float:
    x, y = cell
    best = np.inf
    for o in placement.objects:
        if getattr(o, attr) != color:
            continue
        dx, dy = abs(o.cell[0] - x), abs(o.cell[1] - y)
        d = np.hypot(dx, dy) if metric == "euclidean" else max(dx, dy)
        best = min(best, d)
    return float(best)


def objectworld_features(placement: ObjectPlacement, cell) -> np.ndarray:
    """Distances to the nearest (outer red, outer green, inner red, inner green) object."""
    x, y = cell
    if not (0 <= x < placement.grid_size and 0 <= y < placement.grid_size):
        raise ValidationError(f"cell {cell} is off the grid")
    return np.array([
        _nearest(placement, cell, "outer", RED, "euclidean"),
        _nearest(placement, cell, "outer", GREEN, "euclidean"),
        _nearest(placement, cell, "inner", RED, "euclidean"),
        _nearest(placement, cell, "inner", GREEN, "euclidean"),
    ])


def reward_from_distances(d_outer_red: float, d_outer_green: float) -> float:
    if d_outer_red <= 3:
        return 1.0 if d_outer_green <= 2 else -1.0
    return 0.0


def objectworld_true_reward(placement: ObjectPlacement, cell, metric: str = "euclidean") -> float:
    """+1 within 3 of outer red and 2 of outer green, -1 within 3 of outer red only, else 0."""
    d_red = _nearest(placement, cell, "outer", RED, metric)
    d_green = _nearest(placement, cell, "outer", GREEN, metric)
    return reward_from_distances(d_red, d_green)


def grid_transition(grid_size: int, wind: float) -> np.ndarray:
    """``(N*N, 5, N*N)`` transition tensor; off-grid moves stay in place."""
    n = grid_size
    num_states = n * n
    p = np.zeros((num_states, len(ACTIONS), num_states))
    for s in range(num_states):
        x, y = s % n, s // n
        for a in range(len(ACTIONS)):
            for b, (dx, dy) in enumerate(ACTIONS):
                prob = 1.0 - wind if b == a else wind / (len(ACTIONS) - 1)
                if prob == 0.0:
                    continue
                nx, ny = x + dx, y + dy
                s_next = ny * n + nx if (0 <= nx < n and 0 <= ny < n) else s
                p[s, a, s_next] += prob
    return p


@dataclass(frozen=True)
class Objectworld:
    """A built objectworld: model, features, ground truth and placement."""

    spec: ObjectworldSpec
    mdp: MdpModel
    features: np.ndarray
    reward: np.ndarray
    placement: ObjectPlacement

    name = "objectworld"

    @property
    def grid_size(self) -> int:
        return self.spec.grid_size

    @property
    def num_actions(self) -> int:
        return self.mdp.num_actions

    def cell(self, state: int) -> tuple:
        return state % self.grid_size, state // self.grid_size


def build_objectworld(spec: ObjectworldSpec, placement: ObjectPlacement | None = None) -> Objectworld:
    """Build the MDP, feature map and true reward for ``spec``.

    ``placement`` overrides the seeded draw, e.g. when reloading an export.
    """
    if placement is None:
        placement = draw_placement(spec)
    n = spec.grid_size
    cells = [(s % n, s // n) for s in range(n * n)]
    features = np.array([objectworld_features(placement, c) for c in cells])
    reward = np.array([objectworld_true_reward(placement, c, spec.metric) for c in cells])
    mdp = MdpModel(grid_transition(n, spec.wind), spec.discount)
    return Objectworld(spec, mdp, features, reward, placement)
