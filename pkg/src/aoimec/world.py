"""Grid geometry, base-station topology, Markov mobility, channel gains and
Bernoulli task arrivals.

Locations are plain integer cell indices in row-major order; the UAV's ground
projection and every MU live on the same grid.  Association/destination
indices are 0-based: ``0 .. B-1`` are the ground BSs and ``B`` is the UAV.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, WorldConfig


class Topology:
    """Cell geometry plus BS positions, coverage partition and adjacency."""

    def __init__(self, cfg: WorldConfig):
        self.side = cfg.grid_cells
        self.cell_size = cfg.cell_size
        self.n_cells = self.side * self.side
        idx = np.arange(self.n_cells)
        self.centers = np.stack([(idx % self.side + 0.5) * self.cell_size,
                                 (idx // self.side + 0.5) * self.cell_size], axis=1)
        self.num_bs = cfg.num_bs
        self.uav = cfg.num_bs
        self.bs_positions = (_parse_positions(cfg.bs_positions, cfg.num_bs)
                             if cfg.bs_positions else _block_centers(cfg))
        d2 = ((self.centers[:, None, :] - self.bs_positions[None, :, :]) ** 2).sum(-1)
        # argmin picks the lowest index on ties, so coverage is a partition
        self.coverage = np.argmin(d2, axis=1)
        self.bs_distance = np.sqrt(d2[idx, self.coverage])
        if cfg.bs_adjacency is not None:
            self.adjacency = _parse_adjacency(cfg.bs_adjacency, cfg.num_bs)
        else:
            self.adjacency = self._touching_coverage()
        self.edges = [(a, b) for a in range(self.num_bs) for b in range(a + 1, self.num_bs)
                      if self.adjacency[a, b]]

    def _touching_coverage(self) -> np.ndarray:
        adj = np.zeros((self.num_bs, self.num_bs), dtype=bool)
        grid = self.coverage.reshape(self.side, self.side)
        for a, b in ((grid[:, :-1], grid[:, 1:]), (grid[:-1, :], grid[1:, :])):
            diff = a != b
            adj[a[diff], b[diff]] = True
        return adj | adj.T

    def serving_bs(self, cell: int) -> int:
        return int(self.coverage[self._check(cell)])

    def cell_center(self, cell: int) -> tuple[float, float]:
        x, y = self.centers[self._check(cell)]
        return float(x), float(y)

    def cell_at(self, x: float, y: float) -> int:
        col = int(x // self.cell_size)
        row = int(y // self.cell_size)
        if not (0 <= col < self.side and 0 <= row < self.side):
            raise ConfigError(f"point ({x}, {y}) is outside the grid")
        return row * self.side + col

    def horizontal_distance(self, cell_a: int, cell_b: int) -> float:
        return float(np.hypot(*(self.centers[cell_a] - self.centers[cell_b])))

    def _check(self, cell: int) -> int:
        if not 0 <= cell < self.n_cells:
            raise ConfigError(f"cell index {cell} out of range [0, {self.n_cells})")
        return cell


def _block_centers(cfg: WorldConfig) -> np.ndarray:
    # near-square rows x cols factorization of B, one BS per block center
    rows = int(np.floor(np.sqrt(cfg.num_bs)))
    while cfg.num_bs % rows:
        rows -= 1
    cols = cfg.num_bs // rows
    extent = cfg.grid_cells * cfg.cell_size
    xs = (np.arange(cols) + 0.5) * extent / cols
    ys = (np.arange(rows) + 0.5) * extent / rows
    return np.array([(x, y) for y in ys for x in xs], dtype=float)


def _parse_positions(text: str, num_bs: int) -> np.ndarray:
    try:
        pts = [tuple(float(v) for v in item.split(",")) for item in text.split(";") if item.strip()]
    except ValueError:
        raise ConfigError(f"malformed bs_positions {text!r}") from None
    if len(pts) != num_bs or any(len(p) != 2 for p in pts):
        raise ConfigError(f"bs_positions must list {num_bs} 'x,y' pairs")
    return np.array(pts, dtype=float)


def _parse_adjacency(text: str, num_bs: int) -> np.ndarray:
    adj = np.zeros((num_bs, num_bs), dtype=bool)
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        try:
            a, b = (int(v) for v in item.split("-"))
        except ValueError:
            raise ConfigError(f"malformed adjacency edge {item!r}") from None
        if a == b or not (0 <= a < num_bs and 0 <= b < num_bs):
            raise ConfigError(f"invalid adjacency edge {item!r}")
        adj[a, b] = adj[b, a] = True
    return adj


@dataclass
class MobilityModel:
    """Sparse Markov chain over cells: per cell, reachable targets and their CDF."""

    targets: list
    cdf: list

    @property
    def n_cells(self) -> int:
        return len(self.targets)

    def probabilities(self, cell: int) -> dict[int, float]:
        cdf = self.cdf[cell]
        probs = np.diff(np.concatenate([[0.0], cdf]))
        return {int(t): float(p) for t, p in zip(self.targets[cell], probs)}

    @classmethod
    def from_rows(cls, rows: list[dict[int, float]]) -> "MobilityModel":
        targets, cdf = [], []
        for i, row in enumerate(rows):
            cells = np.array(sorted(row), dtype=np.int64)
            p = np.array([row[c] for c in cells], dtype=float)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ConfigError(f"mobility row {i} is not a probability vector")
            keep = p > 0
            c = np.cumsum(p[keep])
            c[-1] = 1.0
            targets.append(cells[keep])
            cdf.append(c)
        return cls(targets, cdf)

    @classmethod
    def random_walk(cls, topo: Topology, rng: np.random.Generator,
                    static: bool = False) -> "MobilityModel":
        """Stay or move to one of the (up to 8) surrounding cells.

        Row probabilities are Dirichlet(1) draws, one per cell.
        """
        side = topo.side
        rows = []
        for cell in range(topo.n_cells):
            if static:
                rows.append({cell: 1.0})
                continue
            r, c = divmod(cell, side)
            nbrs = [(r + dr) * side + (c + dc)
                    for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                    if 0 <= r + dr < side and 0 <= c + dc < side]
            p = rng.dirichlet(np.ones(len(nbrs)))
            rows.append(dict(zip(nbrs, p / p.sum())))
        return cls.from_rows(rows)


def step_mobility(model: MobilityModel, current: int, rng) -> int:
    """Inverse-CDF draw of the next cell from ``current``'s row."""
    if not 0 <= current < model.n_cells:
        raise ConfigError(f"cell index {current} out of range")
    cdf = model.cdf[current]
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    return int(model.targets[current][min(k, len(cdf) - 1)])


def channel_gain(cfg: WorldConfig, topo: Topology, mu_cell: int, dest: int,
                 uav_cell: int) -> float:
    """Average power gain from ``mu_cell`` to BS ``dest`` or to the UAV (``dest == B``)."""
    if dest == topo.uav:
        d = topo.horizontal_distance(mu_cell, uav_cell)
        return cfg.air_gain_ref * (cfg.uav_altitude ** 2 + d ** 2) ** (-cfg.air_exponent / 2.0)
    x, y = topo.cell_center(mu_cell)
    bx, by = topo.bs_positions[dest]
    d = max(float(np.hypot(x - bx, y - by)), 1.0)
    return cfg.ground_gain_ref * d ** (-cfg.ground_exponent)


def sample_arrival_and_admit(buffer_epoch: int, j: int, rng, lam: float) -> int:
    """Bernoulli(lam) arrival at epoch ``j``; a new task replaces any buffered one.

    Returns the arrival epoch index of the buffered task (0 means empty).  One
    uniform draw is consumed per call regardless of ``lam``.
    """
    if j < 1:
        raise ValueError("epoch index starts at 1")
    return j if rng.random() < lam else buffer_epoch
