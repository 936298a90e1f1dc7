"""Cadlag sample paths on a grid, piecewise-constant staircases, CSV emission."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .noise import TimeGrid


@dataclass(frozen=True)
class CadlagPath:
    """Right-continuous path sampled on a grid, with a registry of jump events.

    Between grid points the path is treated as constant on [t_k, t_{k+1})
    (Euler semantics). ``jumps`` records (time, left_limit, right_value) for
    discontinuities, including ones that fall between grid points.
    """

    grid: TimeGrid
    values: np.ndarray
    jumps: tuple = ()

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.points.shape:
            raise ValueError("one value per grid point required")

    @property
    def horizon(self) -> float:
        return self.grid.horizon

    def evaluate(self, t: float) -> float:
        """Right-continuous value at t; consults the jump registry at exact jump times."""
        for time, _left, right in self.jumps:
            if time == t:
                return right
        return float(self.values[self.grid.index_of(t)])

    def left_limit(self, t: float) -> float:
        """Limit from the left at t on the grid (registry value at recorded jumps)."""
        for time, left, _right in self.jumps:
            if time == t:
                return left
        idx = int(np.searchsorted(self.grid.points, t, side="left"))
        if t < 0 or t > self.horizon:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        if idx < self.grid.points.size and self.grid.points[idx] == t:
            return float(self.values[max(idx - 1, 0)])
        return float(self.values[idx - 1])

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "CadlagPath":
        return cls(grid, np.full(grid.points.size, float(value)))

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "CadlagPath":
        return cls(grid, np.array([fn(t) for t in grid.points], dtype=float))


@dataclass(frozen=True)
class StaircasePath:
    """Piecewise-constant right-continuous path.

    ``levels[k]`` holds on [breakpoints[k], breakpoints[k+1]); the value at the
    final time equals the last level.
    """

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)
        if bp.size < 2 or bp[0] != 0.0 or not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must strictly increase from 0 to T")
        if lv.size != bp.size - 1:
            raise ValueError("need one level per interval")

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    def evaluate(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0) or np.any(t_arr > self.horizon):
            raise ValueError("time outside [0, T]")
        idx = np.searchsorted(self.breakpoints, t_arr, side="right") - 1
        idx = np.minimum(idx, self.levels.size - 1)
        out = self.levels[idx]
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def sample(self, grid: TimeGrid) -> CadlagPath:
        return CadlagPath(grid, self.evaluate(grid.points))


def evaluate(path, t: float) -> float:
    """Right-continuous evaluation for either path flavor."""
    return path.evaluate(t)


def pointwise_max(paths) -> StaircasePath:
    """Pointwise maximum of staircases; breakpoints are the union of inputs."""
    paths = list(paths)
    if not paths:
        raise ValueError("need at least one staircase")
    horizon = paths[0].horizon
    for p in paths:
        if p.horizon != horizon:
            raise ValueError("staircases must share the horizon")
    bp = paths[0].breakpoints
    for p in paths[1:]:
        bp = np.union1d(bp, p.breakpoints)
    starts = bp[:-1]
    levels = paths[0].evaluate(starts)
    for p in paths[1:]:
        levels = np.maximum(levels, p.evaluate(starts))
    return StaircasePath(bp, levels)


def write_path_csv(path: CadlagPath, fh, path_id=None) -> None:
    """Columns time, value, is_jump, left_limit (plus path_id in long format).

    Off-grid jumps get their own rows, so the file samples the path at every
    grid point and every recorded discontinuity.
    """
    writer = csv.writer(fh, lineterminator="\n")
    header = ["time", "value", "is_jump", "left_limit"]
    if path_id is not None:
        header = ["path_id"] + header
    writer.writerow(header)
    jump_times = {t for t, _l, _r in path.jumps}
    rows = {float(t): (path.evaluate(float(t)), float(t) in jump_times,
                       path.left_limit(float(t)))
            for t in path.grid.points}
    for t, left, right in path.jumps:
        rows[float(t)] = (float(right), True, float(left))
    for t in sorted(rows):
        v, is_jump, left = rows[t]
        out = [repr(t), repr(v), str(is_jump).lower(), repr(left)]
        if path_id is not None:
            out = [str(path_id)] + out
        writer.writerow(out)


def read_path_csv(fh) -> CadlagPath:
    """Rebuild a path from write_path_csv output.

    Row times become the grid (off-grid jump rows refine it), which preserves
    evaluation at every original grid point and jump time.
    """
    reader = csv.DictReader(fh)
    times, values, jumps = [], [], []
    for row in reader:
        t, v = float(row["time"]), float(row["value"])
        if row["is_jump"] == "true":
            jumps.append((t, float(row["left_limit"]), v))
        times.append(t)
        values.append(v)
    return CadlagPath(TimeGrid(np.array(times)), np.array(values), tuple(jumps))


def write_staircase_csv(stair: StaircasePath, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["interval_start", "interval_end", "level"])
    for lo, hi, lv in zip(stair.breakpoints[:-1], stair.breakpoints[1:], stair.levels):
        writer.writerow([repr(float(lo)), repr(float(hi)), repr(float(lv))])
