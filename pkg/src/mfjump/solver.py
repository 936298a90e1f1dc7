"""Euler-type schemes for the one-dimensional auxiliary SDE and the ordering
harness.

The stepping kernel is written so the drift update is c1*Y + c2*b with
non-negative c1, c2 (for admissible steps): floating-point monotonicity in
both arguments then holds exactly, which the comparison and monotone-level
checks rely on.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientSet, DriftSpec
from .noise import NoiseBatch, NoiseBundle, TimeGrid
from .paths import CadlagPath, StaircasePath

EXPLICIT = "explicit-euler-clipped"
IMPLICIT = "drift-implicit"


class NumericsError(RuntimeError):
    """Non-finite state reached during stepping."""

    def __init__(self, step: int, time: float, component: int, path_row: int):
        self.step, self.time, self.component, self.path_row = step, time, component, path_row
        super().__init__(
            f"non-finite value at step {step} (t={time:.6g}), "
            f"component {component}, path row {path_row}")


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = EXPLICIT
    clip_at_zero: bool = True

    def __post_init__(self):
        if self.scheme not in (EXPLICIT, IMPLICIT):
            raise ValueError(f"unknown scheme '{self.scheme}'")


@dataclass
class _Part:
    """Per-component prepared arrays for the step loop."""

    c1: np.ndarray  # (n_steps,)
    c2: np.ndarray
    sigma: object = None
    dw: np.ndarray = None  # (n_paths, n_steps) combined driving Brownian
    stable: list = field(default_factory=list)  # (coef, exponent, (P, K) array)
    compensator: object = None


@dataclass
class BatchResult:
    """Raw arrays from one batched solve."""

    grid: TimeGrid
    values: np.ndarray  # (n_components, n_paths, n_points)
    jumps: dict  # (path_row, component) -> [(time, left, right), ...]
    warnings: list

    def path(self, row: int, component: int = 0) -> CadlagPath:
        return CadlagPath(self.grid, self.values[component, row].copy(),
                          tuple(self.jumps.get((row, component), ())))

    def component_paths(self, row: int):
        return [self.path(row, i) for i in range(self.values.shape[0])]


def _prepare_parts(components, batch: NoiseBatch, cfg: SchemeConfig):
    dts = batch.grid.dt
    parts, warns = [], []
    for idx, comp in enumerate(components):
        if cfg.scheme == EXPLICIT:
            c2 = comp.a * dts
            c1 = 1.0 - c2
            if np.any(c2 > 1.0):
                warns.append(
                    f"component {idx}: a*dt = {c2.max():.4g} > 1 breaks the "
                    f"monotonicity precondition of the explicit scheme")
        else:
            c1 = np.exp(-comp.a * dts)
            c2 = 1.0 - c1
        dw = None
        if comp.brownian:
            dw = sum(term.weight * batch.brownian[term.factor] for term in comp.brownian)
        stable = [(term.coef, 1.0 / term.alpha, batch.stable[term.factor])
                  for term in comp.stable_terms if term.coef != 0.0]
        parts.append(_Part(c1=c1, c2=c2,
                           sigma=comp.sigma if dw is not None else None,
                           dw=dw, stable=stable,
                           compensator=comp.g0_finite.compensator
                           if comp.g0_finite is not None else None))
    return parts, warns


def _bin_events(components, batch: NoiseBatch):
    """events_by_step[k] = [(path_row, component, time, mark, kernel_fn), ...]."""
    points = batch.grid.points
    by_step = [[] for _ in range(batch.grid.n_steps)]
    for ci, comp in enumerate(components):
        kernels = []
        if comp.g0_finite is not None:
            kernels.append((comp.g0_finite.measure.measure_id, comp.g0_finite.fn))
        if comp.g1 is not None:
            kernels.append((comp.g1.measure.measure_id, comp.g1.fn))
        if not kernels:
            continue
        for row, per_path in enumerate(batch.jump_events):
            for measure_id, fn in kernels:
                for ev in per_path.get(measure_id, ()):
                    if ev.time <= 0.0 or ev.time > points[-1]:
                        continue
                    k = int(np.searchsorted(points, ev.time, side="left")) - 1
                    by_step[k].append((row, ci, ev.time, ev.mark, fn))
    for k in range(len(by_step)):
        by_step[k].sort(key=lambda e: (e[2], e[0], e[1]))
    return by_step


class _DriftEval:
    """Per-step drift targets, one entry per component (scalar or (P,) array)."""

    def __init__(self, drifts, grid: TimeGrid, forcing: np.ndarray = None):
        self.n = len(drifts)
        self.forcing = forcing  # (n_components, n_paths, n_steps) overrides drifts
        self.warnings = []
        if forcing is not None:
            if np.min(forcing) < 0:
                self.warnings.append("drift forcing takes negative values; the "
                                     "existence theory assumes b >= 0")
            return
        self.static = []  # per component: None (mean-field) or (n_steps,) values
        self.fns = []
        ts = grid.points[:-1]
        for drift in drifts:
            if drift.kind == "constant":
                vals = np.full(ts.size, drift.value)
            elif drift.kind == "time":
                vals = np.array([float(drift.fn(t)) for t in ts])
            elif drift.kind == "path":
                vals = _path_values_on_steps(drift.path, grid)
            elif drift.kind == "mean-field":
                self.static.append(None)
                self.fns.append(drift.fn)
                continue
            else:
                raise ValueError(f"unknown drift kind '{drift.kind}'")
            if np.min(vals) < 0:
                self.warnings.append("drift target takes negative values; the "
                                     "existence theory assumes b >= 0")
            self.static.append(vals)
            self.fns.append(None)

    def __call__(self, k: int, t: float, states: np.ndarray):
        if self.forcing is not None:
            return [self.forcing[i, :, k] for i in range(self.n)]
        out = []
        cache = {}
        for i in range(self.n):
            if self.static[i] is not None:
                out.append(self.static[i][k])
            else:
                fn = self.fns[i]
                key = id(fn)
                if key not in cache:
                    cache[key] = fn(t, states)
                out.append(cache[key])
        return out


def _path_values_on_steps(path, grid: TimeGrid) -> np.ndarray:
    """Right-continuous drift values at step starts; staircase breakpoints must
    land on grid points (refine the grid first if they do not)."""
    ts = grid.points[:-1]
    if isinstance(path, StaircasePath):
        if path.horizon != grid.horizon:
            raise ValueError("drift path horizon differs from the grid horizon")
        aligned = np.isin(path.breakpoints, grid.points)
        if not aligned.all():
            raise ValueError(
                "staircase breakpoints off the grid; build the grid with "
                "TimeGrid.refine_with(breakpoints) so discontinuities land on steps")
        return path.evaluate(ts)
    if isinstance(path, CadlagPath):
        if path.horizon != grid.horizon:
            raise ValueError("drift path horizon differs from the grid horizon")
        if path.grid.points.size == grid.points.size and \
                np.array_equal(path.grid.points, grid.points):
            return path.values[:-1]
        return np.array([path.evaluate(t) for t in ts])
    raise TypeError("drift path must be a CadlagPath or StaircasePath")


def solve_batch(components, drifts, batch: NoiseBatch, cfg: SchemeConfig,
                initial: np.ndarray, forcing: np.ndarray = None,
                k_start: int = 0, k_stop: int = None,
                record_jumps: bool = True) -> BatchResult:
    """Advance all paths of a batch jointly from step k_start to k_stop.

    ``initial`` has shape (n_components, n_paths) and seeds the state at
    ``k_start``; values outside the solved span are left as NaN sentinels.
    """
    grid = batch.grid
    n_steps = grid.n_steps
    k_stop = n_steps if k_stop is None else k_stop
    n_comp, n_paths = len(components), batch.n_paths

    parts, warns = _prepare_parts(components, batch, cfg)
    drift_eval = _DriftEval(drifts, grid, forcing=forcing)
    warns.extend(drift_eval.warnings)
    events_by_step = _bin_events(components, batch)

    values = np.full((n_comp, n_paths, n_steps + 1), np.nan)
    state = np.array(np.broadcast_to(np.asarray(initial, dtype=float),
                                     (n_comp, n_paths)), dtype=float)
    values[:, :, k_start] = state
    jumps: dict = {}

    pts = grid.points
    dts = grid.dt
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for k in range(k_start, k_stop):
            b = drift_eval(k, pts[k], state)
            new = np.empty_like(state)
            for i, part in enumerate(parts):
                y = state[i]
                acc = part.c1[k] * y + part.c2[k] * b[i]
                if part.dw is not None:
                    acc = acc + part.sigma(y) * part.dw[:, k]
                for coef, expo, dz in part.stable:
                    acc = acc + coef * np.power(np.maximum(y, 0.0), expo) * dz[:, k]
                if part.compensator is not None:
                    acc = acc - dts[k] * part.compensator(y)
                new[i] = acc
            for row, ci, t_ev, mark, fn in events_by_step[k]:
                left = float(new[ci, row])
                size = fn(left, mark)
                new[ci, row] = left + size
                if record_jumps and size != 0.0:
                    jumps.setdefault((row, ci), []).append((t_ev, left, left + size))
            if not np.isfinite(new).all():
                bad = np.argwhere(~np.isfinite(new))[0]
                raise NumericsError(step=k + 1, time=float(pts[k + 1]),
                                    component=int(bad[0]), path_row=int(bad[1]))
            if cfg.clip_at_zero:
                np.maximum(new, 0.0, out=new)
            state = new
            values[:, :, k + 1] = state

    for warn in warns:
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
    return BatchResult(grid=grid, values=values,
                       jumps={key: tuple(v) for key, v in jumps.items()},
                       warnings=warns)


def _as_drift_spec(drift) -> DriftSpec:
    if isinstance(drift, DriftSpec):
        return drift
    if isinstance(drift, (CadlagPath, StaircasePath)):
        return DriftSpec.external(drift)
    if np.isscalar(drift):
        return DriftSpec.constant(float(drift))
    raise TypeError("drift must be a DriftSpec, a path, or a constant")


def solve_onedim(coeffs: CoefficientSet, drift, noise: NoiseBundle,
                 cfg: SchemeConfig, initial: float) -> CadlagPath:
    """Solve the scalar auxiliary SDE driven by one noise bundle.

    ``drift`` is a DriftSpec (constant or deterministic-in-time), a cadlag or
    staircase path, or a bare number.
    """
    spec = _as_drift_spec(drift)
    if spec.kind == "mean-field":
        raise ValueError("mean-field drifts need the system solver")
    batch = NoiseBatch.from_bundles([noise])
    result = solve_batch([coeffs], [spec], batch, cfg,
                         initial=np.array([[float(initial)]]))
    return result.path(0, 0)


@dataclass(frozen=True)
class OrderingReport:
    """Ordering violations of a drift-ordered pair solved on shared noise."""

    max_violation: float
    violating_fraction: float
    n_points: int

    @property
    def ordered(self) -> bool:
        return self.max_violation == 0.0


def compare_ordered(coeffs: CoefficientSet, drift_low, drift_high,
                    noise: NoiseBundle, cfg: SchemeConfig,
                    initial_low: float, initial_high: float = None,
                    tolerance: float = 0.0) -> OrderingReport:
    """Solve the drift-ordered pair on one bundle and report (Y_low - Y_high)+."""
    initial_high = initial_low if initial_high is None else initial_high
    if initial_low > initial_high:
        raise ValueError("initial_low must not exceed initial_high")
    low_spec, high_spec = _as_drift_spec(drift_low), _as_drift_spec(drift_high)
    lo_vals = _DriftEval([low_spec], noise.grid).static[0]
    hi_vals = _DriftEval([high_spec], noise.grid).static[0]
    if lo_vals is not None and hi_vals is not None and np.any(lo_vals > hi_vals):
        raise ValueError("drift_low must be <= drift_high pointwise on the grid")
    y_low = solve_onedim(coeffs, low_spec, noise, cfg, initial_low)
    y_high = solve_onedim(coeffs, high_spec, noise, cfg, initial_high)
    gap = y_low.values - y_high.values
    return OrderingReport(
        max_violation=float(np.maximum(gap, 0.0).max()),
        violating_fraction=float(np.mean(gap > tolerance)),
        n_points=gap.size)
