"""Driving randomness: time grids, Brownian/stable increments, finite-activity events.

Every stream is keyed by (master_seed, path_index, stream kind, stream index)
through a ``SeedSequence`` spawn key, so generation is replayable per path and
independent of execution order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# stream-kind tags used in spawn keys
_KIND_BROWNIAN = 1
_KIND_STABLE = 2
_KIND_EVENTS = 3
_KIND_NESTED = 4


def stream_rng(master_seed: int, path_index: int, stream: Sequence[int]) -> np.random.Generator:
    """Deterministic generator for one (path, stream) pair.

    Distinct streams are statistically independent and may be drawn in any
    order; the same key always reproduces the same draws.
    """
    key = (int(path_index),) + tuple(int(s) for s in stream)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=key))


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times on [0, T], starting at 0."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if pts[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")

    @classmethod
    def uniform(cls, horizon: float, steps: int) -> "TimeGrid":
        if steps < 1 or horizon <= 0:
            raise ValueError("need steps >= 1 and horizon > 0")
        return cls(np.linspace(0.0, float(horizon), steps + 1))

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def mesh(self) -> float:
        return float(self.dt.max())

    def index_of(self, t: float) -> int:
        """Index of the largest grid point <= t."""
        if t < 0 or t > self.horizon:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        return int(np.searchsorted(self.points, t, side="right")) - 1

    def refine_with(self, extra: Sequence[float]) -> "TimeGrid":
        """Grid augmented with extra sample times (e.g. staircase breakpoints)."""
        merged = np.union1d(self.points, np.asarray(extra, dtype=float))
        merged = merged[(merged >= 0.0) & (merged <= self.horizon)]
        return TimeGrid(merged)


@dataclass(frozen=True)
class JumpEvent:
    """One atom of a finite-activity random measure."""

    time: float
    mark: object
    measure_id: str


@dataclass(frozen=True)
class MeasureSpec:
    """Finite-activity measure: total mass (event rate) plus a mark sampler.

    ``mark_sampler(rng, size)`` returns ``size`` marks (an array, or a
    sequence of tuples for product mark spaces).
    """

    measure_id: str
    rate: float
    mark_sampler: Callable[[np.random.Generator, int], Sequence]


@dataclass(frozen=True)
class NoiseLayout:
    """Which factors a bundle must carry.

    brownian_factors: sorted factor indices for B^0, B^1, ...
    stable_alphas:    {factor index: alpha} for the stable drivers Z^0, Z^1, ...
    measures:         finite-activity measures, keyed by measure_id.
    """

    brownian_factors: tuple = ()
    stable_alphas: dict = field(default_factory=dict)
    measures: tuple = ()


@dataclass(frozen=True)
class NoiseBundle:
    """All driving randomness for one trajectory."""

    grid: TimeGrid
    brownian: dict  # factor index -> (n_steps,) increments
    stable: dict  # factor index -> (n_steps,) increments
    jump_events: dict  # measure_id -> list[JumpEvent], sorted by time
    seed_lineage: tuple  # (master_seed, path_index)

    def coarsen(self, factor: int) -> "NoiseBundle":
        """Aggregate increments onto a grid that keeps every factor-th point.

        The coarse bundle is driven by the same realization: Brownian and
        stable increments add pathwise, and jump events carry over unchanged.
        """
        if factor < 1 or self.grid.n_steps % factor:
            raise ValueError("coarsening factor must divide the step count")
        pts = self.grid.points[::factor]
        agg = lambda a: a.reshape(-1, factor).sum(axis=1)
        return NoiseBundle(
            grid=TimeGrid(pts),
            brownian={f: agg(v) for f, v in self.brownian.items()},
            stable={f: agg(v) for f, v in self.stable.items()},
            jump_events=self.jump_events,
            seed_lineage=self.seed_lineage,
        )


def gen_brownian(grid: TimeGrid, n_factors: int, master_seed: int, path_index: int = 0,
                 factors: Sequence[int] | None = None) -> np.ndarray:
    """Independent Gaussian increments, one row per factor, N(0, dt) per step."""
    if n_factors < 1:
        raise ValueError("need at least one factor")
    if factors is None:
        factors = range(n_factors)
    sqrt_dt = np.sqrt(grid.dt)
    out = np.empty((n_factors, grid.n_steps))
    for row, fac in enumerate(factors):
        rng = stream_rng(master_seed, path_index, (_KIND_BROWNIAN, fac))
        out[row] = rng.standard_normal(grid.n_steps) * sqrt_dt
    return out


def _cms_standard(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Chambers-Mallows-Stuck draw of S_alpha(1, beta=1, 0), alpha in (1, 2)."""
    u = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size)
    w = rng.standard_exponential(size)
    zeta = math.tan(math.pi * alpha / 2.0)
    b = math.atan(zeta) / alpha
    s = (1.0 + zeta * zeta) ** (1.0 / (2.0 * alpha))
    return (s * np.sin(alpha * (u + b)) / np.cos(u) ** (1.0 / alpha)
            * (np.cos(u - alpha * (u + b)) / w) ** ((1.0 - alpha) / alpha))


def gen_stable_increments(grid: TimeGrid, alpha: float, master_seed: int, path_index: int = 0,
                          factor: int = 0) -> np.ndarray:
    """Spectrally positive compensated stable increments, scale dt^(1/alpha) per step.

    Standard S_alpha(scale, beta=1, 0) in the one-parametrization, so the law
    is centered for alpha in (1, 2] and reduces to N(0, 2*dt) at alpha = 2.
    """
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2] (compensation needs alpha > 1)")
    rng = stream_rng(master_seed, path_index, (_KIND_STABLE, factor))
    scale = grid.dt ** (1.0 / alpha)
    if alpha == 2.0:
        # 2-stable is exactly Gaussian with variance 2*dt
        return rng.standard_normal(grid.n_steps) * (np.sqrt(2.0) * scale)
    return _cms_standard(alpha, grid.n_steps, rng) * scale


def gen_finite_activity_events(rate: float, mark_sampler, grid: TimeGrid, master_seed: int,
                               path_index: int = 0, measure_id: str = "m0",
                               stream: int = 0) -> list[JumpEvent]:
    """Poisson(rate * T) events, times uniform on (0, T], marks i.i.d., sorted."""
    if not np.isfinite(rate) or rate < 0:
        raise ValueError("rate must be finite and non-negative")
    rng = stream_rng(master_seed, path_index, (_KIND_EVENTS, stream))
    count = int(rng.poisson(rate * grid.horizon))
    if count == 0:
        return []
    times = np.sort(rng.uniform(0.0, grid.horizon, count))
    marks = mark_sampler(rng, count)
    return [JumpEvent(float(t), m, measure_id) for t, m in zip(times, marks)]


def make_bundle(grid: TimeGrid, layout: NoiseLayout, master_seed: int,
                path_index: int = 0) -> NoiseBundle:
    """Build the full bundle for one trajectory; bit-exact replay per lineage."""
    brownian = {}
    for fac in layout.brownian_factors:
        brownian[fac] = gen_brownian(grid, 1, master_seed, path_index, factors=[fac])[0]
    stable = {}
    for fac, alpha in sorted(layout.stable_alphas.items()):
        stable[fac] = gen_stable_increments(grid, alpha, master_seed, path_index, factor=fac)
    events = {}
    for idx, ms in enumerate(layout.measures):
        events[ms.measure_id] = gen_finite_activity_events(
            ms.rate, ms.mark_sampler, grid, master_seed, path_index,
            measure_id=ms.measure_id, stream=idx)
    return NoiseBundle(grid=grid, brownian=brownian, stable=stable,
                       jump_events=events, seed_lineage=(master_seed, path_index))


@dataclass(frozen=True)
class NoiseBatch:
    """Per-path bundles stacked along a leading path axis.

    Row p holds exactly the draws of the single-path bundle with the same
    lineage, so batched and one-at-a-time solves agree bit for bit.
    """

    grid: TimeGrid
    brownian: dict  # factor -> (n_paths, n_steps)
    stable: dict  # factor -> (n_paths, n_steps)
    jump_events: list  # per path: measure_id -> list[JumpEvent]
    lineages: tuple

    @property
    def n_paths(self) -> int:
        return len(self.jump_events)

    @classmethod
    def from_bundles(cls, bundles: Sequence[NoiseBundle]) -> "NoiseBatch":
        grid = bundles[0].grid
        stack = lambda key: {f: np.stack([getattr(b, key)[f] for b in bundles])
                             for f in getattr(bundles[0], key)}
        return cls(grid=grid, brownian=stack("brownian"), stable=stack("stable"),
                   jump_events=[b.jump_events for b in bundles],
                   lineages=tuple(b.seed_lineage for b in bundles))

    def coarsen(self, factor: int) -> "NoiseBatch":
        if factor < 1 or self.grid.n_steps % factor:
            raise ValueError("coarsening factor must divide the step count")
        agg = lambda a: a.reshape(a.shape[0], -1, factor).sum(axis=2)
        return NoiseBatch(grid=TimeGrid(self.grid.points[::factor]),
                          brownian={f: agg(v) for f, v in self.brownian.items()},
                          stable={f: agg(v) for f, v in self.stable.items()},
                          jump_events=self.jump_events, lineages=self.lineages)


def make_batch(grid: TimeGrid, layout: NoiseLayout, master_seed: int,
               path_indices: Sequence[int]) -> NoiseBatch:
    return NoiseBatch.from_bundles(
        [make_bundle(grid, layout, master_seed, p) for p in path_indices])
