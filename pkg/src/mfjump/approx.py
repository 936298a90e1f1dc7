"""Constructive approximation hierarchy: dyadic partitions, interval-infimum
drifts, the level recursion, and its diagnostics.

All levels of one hierarchy share a single noise realization; the infimum
drifts are minima over grid samples, so the subset inequality between
consecutive levels holds exactly whenever the level paths are ordered.
"""
from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .coeffs import SystemSpec
from .noise import (JumpEvent, NoiseBatch, NoiseBundle, TimeGrid, make_batch,
                    stream_rng, _cms_standard, _KIND_NESTED)
from .solver import SchemeConfig, solve_batch

MODES = ("realized", "nested-mc", "deterministic")


def dyadic_partition(n: int, horizon: float) -> TimeGrid:
    """Level-n halving grid: 2^(n-1) intervals, built by midpoint insertion so
    coarser partitions are exact subsets of finer ones."""
    if n < 1:
        raise ValueError("partition level must be at least 1")
    pts = np.array([0.0, float(horizon)])
    for _ in range(n - 1):
        out = np.empty(2 * pts.size - 1)
        out[0::2] = pts
        out[1::2] = (pts[:-1] + pts[1:]) / 2.0
        pts = out
    return TimeGrid(pts)


def _partition_indices(grid: TimeGrid, partition: TimeGrid) -> np.ndarray:
    idx = np.searchsorted(grid.points, partition.points)
    ok = bool(np.all(idx < grid.points.size)) and \
        np.array_equal(grid.points[np.minimum(idx, grid.points.size - 1)],
                       partition.points)
    if not ok:
        raise ValueError("partition points must coincide with grid points "
                         "(use a dyadic simulation grid)")
    return idx


def _drift_values(drifts, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    """b_i(t, state vector) at every grid point along the given paths: (N, P, K+1)."""
    n_comp, n_paths, n_pts = values.shape
    out = np.empty((n_comp, n_paths, n_pts))
    ts = grid.points
    for i, drift in enumerate(drifts):
        if drift.kind == "constant":
            out[i] = drift.value
        elif drift.kind == "time":
            out[i] = np.array([float(drift.fn(t)) for t in ts])[None, :]
        elif drift.kind == "path":
            out[i] = np.array([drift.path.evaluate(t) for t in ts])[None, :]
        elif drift.kind == "mean-field":
            for j in range(n_pts):
                out[i, :, j] = drift.fn(ts[j], values[:, :, j])
        else:
            raise ValueError(f"unknown drift kind '{drift.kind}'")
    return out


def _interval_min(drift_vals: np.ndarray, part_idx: np.ndarray) -> np.ndarray:
    """Min over the closed index span of each partition interval: (N, P, n_int)."""
    n_int = part_idx.size - 1
    out = np.empty(drift_vals.shape[:2] + (n_int,))
    for k in range(n_int):
        out[:, :, k] = drift_vals[:, :, part_idx[k]:part_idx[k + 1] + 1].min(axis=2)
    return out


def infimum_drift(paths, drifts, partition: TimeGrid) -> np.ndarray:
    """Per-component, per-interval infimum drifts b^{i,n}_k of one trajectory.

    ``paths`` holds the level's per-component CadlagPaths on a common grid
    refining the partition; the infimum runs over all grid samples in each
    closed interval.
    """
    grid = paths[0].grid
    values = np.stack([p.values for p in paths])[:, None, :]  # (N, 1, K+1)
    part_idx = _partition_indices(grid, partition)
    return _interval_min(_drift_values(drifts, grid, values), part_idx)[:, 0, :]


@dataclass
class LevelBatch:
    """One approximation level over a whole path batch."""

    n: int
    partition: TimeGrid
    part_idx: np.ndarray  # indices of partition points in the simulation grid
    inf_drifts: np.ndarray  # (N, P, 2^(n-1)) interval infima along this level's paths
    values: np.ndarray  # (N, P, K+1) level paths on the simulation grid
    forcing: np.ndarray  # (N, P, K) drift forcing used to build this level


@dataclass(frozen=True)
class ApproxLevel:
    """Single-trajectory view of one approximation level."""

    n: int
    partition: TimeGrid
    infimum_drifts: np.ndarray  # (N, 2^(n-1))
    paths: tuple  # per-component CadlagPath


def _forcing_from_intervals(per_interval: np.ndarray, grid: TimeGrid,
                            part_idx: np.ndarray) -> np.ndarray:
    """Expand per-interval values (N, P, n_int) to per-step forcing (N, P, K)."""
    step_interval = np.searchsorted(grid.points[part_idx],
                                    grid.points[:-1], side="right") - 1
    return per_interval[:, :, step_interval]


def _nested_forcing(spec, prev: LevelBatch, batch: NoiseBatch, cfg, n_inner: int,
                    drift_vals: np.ndarray) -> np.ndarray:
    """Adapted estimate of E[b^{i,n}_k | F_s] at every step s by branching
    n_inner fresh continuations of the level-n system at s."""
    if n_inner < 1:
        raise ValueError("nested-mc needs at least one inner branch")
    grid = batch.grid
    pts = grid.points
    n_comp, n_paths, _ = prev.values.shape
    forcing = np.empty((n_comp, n_paths, grid.n_steps))
    layout = spec.noise_layout()
    for p in range(n_paths):
        master_seed, path_index = batch.lineages[p]
        for k in range(prev.part_idx.size - 1):
            j0, j1 = prev.part_idx[k], prev.part_idx[k + 1]
            past_min = None
            for j in range(j0, j1):
                current = drift_vals[:, p, j]
                past_min = current if past_min is None else np.minimum(past_min, current)
                span = j1 - j
                inner = _branch_batch(grid, layout, master_seed, path_index,
                                      prev.n, k, j, span, n_inner)
                inner_forcing = np.broadcast_to(
                    prev.forcing[:, p:p + 1, j:j1], (n_comp, n_inner, span)).copy()
                res = solve_batch(spec.components, spec.drifts, inner, cfg,
                                  initial=np.broadcast_to(
                                      prev.values[:, p:p + 1, j], (n_comp, n_inner)),
                                  forcing=inner_forcing, record_jumps=False)
                dv = _drift_values_shifted(spec.drifts, res.values, pts[j:j1 + 1])
                future_min = dv.min(axis=2)  # (N, M)
                est = np.minimum(past_min[:, None], future_min).mean(axis=1)
                forcing[:, p, j] = est
    return forcing


def _drift_values_shifted(drifts, values: np.ndarray, true_times: np.ndarray) -> np.ndarray:
    """Drift values along inner continuations whose grid starts at 0 but whose
    physical times are ``true_times``."""
    n_comp, n_paths, n_pts = values.shape
    out = np.empty((n_comp, n_paths, n_pts))
    for i, drift in enumerate(drifts):
        if drift.kind == "constant":
            out[i] = drift.value
        elif drift.kind == "time":
            out[i] = np.array([float(drift.fn(t)) for t in true_times])[None, :]
        elif drift.kind == "path":
            out[i] = np.array([drift.path.evaluate(t) for t in true_times])[None, :]
        else:
            for j in range(n_pts):
                out[i, :, j] = drift.fn(true_times[j], values[:, :, j])
    return out


def _branch_batch(grid: TimeGrid, layout, master_seed, path_index, level, interval,
                  step, span, n_inner) -> NoiseBatch:
    """Fresh inner noise for nested branching, keyed under the parent lineage."""
    sub_pts = grid.points[step:step + span + 1] - grid.points[step]
    sub_pts[0] = 0.0
    sub = TimeGrid(sub_pts)
    sqrt_dt = np.sqrt(sub.dt)
    brownian = {}
    for fac in layout.brownian_factors:
        rng = stream_rng(master_seed, path_index,
                         (_KIND_NESTED, level, interval, step, 1, fac))
        brownian[fac] = rng.standard_normal((n_inner, span)) * sqrt_dt
    stable = {}
    for fac, alpha in sorted(layout.stable_alphas.items()):
        rng = stream_rng(master_seed, path_index,
                         (_KIND_NESTED, level, interval, step, 2, fac))
        scale = sub.dt ** (1.0 / alpha)
        if alpha == 2.0:
            stable[fac] = rng.standard_normal((n_inner, span)) * (np.sqrt(2.0) * scale)
        else:
            stable[fac] = _cms_standard(alpha, (n_inner, span), rng) * scale
    events = []
    for m in range(n_inner):
        per_path = {}
        for mi, ms in enumerate(layout.measures):
            rng = stream_rng(master_seed, path_index,
                             (_KIND_NESTED, level, interval, step, 3, mi, m))
            count = int(rng.poisson(ms.rate * sub.horizon))
            evs = []
            if count:
                times = np.sort(rng.uniform(0.0, sub.horizon, count))
                marks = ms.mark_sampler(rng, count)
                evs = [JumpEvent(float(t), mk, ms.measure_id)
                       for t, mk in zip(times, marks)]
            per_path[ms.measure_id] = evs
        events.append(per_path)
    return NoiseBatch(grid=sub, brownian=brownian, stable=stable,
                      jump_events=events,
                      lineages=tuple((master_seed, path_index) for _ in range(n_inner)))


def build_level_one(spec: SystemSpec, batch: NoiseBatch, cfg: SchemeConfig) -> LevelBatch:
    """Base level: zero drift target (pure decay plus noise)."""
    grid = batch.grid
    n_comp, n_paths = spec.n, batch.n_paths
    forcing = np.zeros((n_comp, n_paths, grid.n_steps))
    res = solve_batch(spec.components, spec.drifts, batch, cfg,
                      initial=spec.initial[:, None], forcing=forcing,
                      record_jumps=False)
    partition = dyadic_partition(1, grid.horizon)
    part_idx = _partition_indices(grid, partition)
    dv = _drift_values(spec.drifts, grid, res.values)
    return LevelBatch(n=1, partition=partition, part_idx=part_idx,
                      inf_drifts=_interval_min(dv, part_idx),
                      values=res.values, forcing=forcing)


def build_next_level(prev: LevelBatch, spec: SystemSpec, batch: NoiseBatch,
                     cfg: SchemeConfig, mode: str = "realized",
                     n_inner: int = 8) -> LevelBatch:
    """Solve the next-level recursion on the shared noise realization.

    Modes realize the conditional expectation of the interval infimum as:
    ``realized`` the pathwise infimum itself, ``nested-mc`` an adapted inner
    Monte Carlo estimate, ``deterministic`` the exact infimum when the drift
    depends on time only.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    grid = batch.grid
    if mode == "realized":
        forcing = _forcing_from_intervals(prev.inf_drifts, grid, prev.part_idx)
    elif mode == "deterministic":
        if any(d.kind == "mean-field" for d in spec.drifts):
            raise ValueError("deterministic mode needs state-independent drifts")
        forcing = _forcing_from_intervals(prev.inf_drifts, grid, prev.part_idx)
    else:
        dv = _drift_values(spec.drifts, grid, prev.values)
        forcing = _nested_forcing(spec, prev, batch, cfg, n_inner, dv)

    res = solve_batch(spec.components, spec.drifts, batch, cfg,
                      initial=spec.initial[:, None], forcing=forcing,
                      record_jumps=False)
    partition = dyadic_partition(prev.n + 1, grid.horizon)
    part_idx = _partition_indices(grid, partition)
    dv = _drift_values(spec.drifts, grid, res.values)
    return LevelBatch(n=prev.n + 1, partition=partition, part_idx=part_idx,
                      inf_drifts=_interval_min(dv, part_idx),
                      values=res.values, forcing=forcing)


@dataclass
class HierarchyResult:
    """Levels of one hierarchy run plus the limit estimate."""

    levels: list
    mode: str
    sup_gaps: np.ndarray  # (n_levels-1, N, P) sup_t |level_{n+1} - level_n|

    @property
    def limit_values(self) -> np.ndarray:
        return self.levels[-1].values

    def cauchy_gap(self) -> float:
        """Sup gap between the two highest levels (reported, not extrapolated)."""
        return float(self.sup_gaps[-1].max()) if len(self.levels) > 1 else 0.0


def run_hierarchy_batch(spec: SystemSpec, batch: NoiseBatch, cfg: SchemeConfig,
                        n_max: int, mode: str = "realized",
                        n_inner: int = 8) -> HierarchyResult:
    if n_max < 2:
        raise ValueError("need n_max >= 2")
    if mode == "realized" and all(d.deterministic for d in spec.drifts):
        mode = "deterministic"
    levels = [build_level_one(spec, batch, cfg)]
    while levels[-1].n < n_max:
        levels.append(build_next_level(levels[-1], spec, batch, cfg,
                                       mode=mode, n_inner=n_inner))
    gaps = np.stack([np.abs(b.values - a.values).max(axis=2)
                     for a, b in zip(levels, levels[1:])])
    return HierarchyResult(levels=levels, mode=mode, sup_gaps=gaps)


def run_hierarchy(spec: SystemSpec, noise: NoiseBundle, cfg: SchemeConfig,
                  n_max: int, mode: str = "realized", n_inner: int = 8):
    """Single-trajectory hierarchy: list of ApproxLevel plus the limit paths."""
    from .paths import CadlagPath
    batch = NoiseBatch.from_bundles([noise])
    result = run_hierarchy_batch(spec, batch, cfg, n_max, mode=mode, n_inner=n_inner)
    levels = [ApproxLevel(n=lv.n, partition=lv.partition,
                          infimum_drifts=lv.inf_drifts[:, 0, :],
                          paths=tuple(CadlagPath(batch.grid, lv.values[i, 0])
                                      for i in range(spec.n)))
              for lv in result.levels]
    limit = [CadlagPath(batch.grid, result.levels[-1].values[i, 0])
             for i in range(spec.n)]
    return levels, limit, result


@dataclass(frozen=True)
class MonotonicityRow:
    level_from: int
    level_to: int
    max_violation: float
    violating_fraction: float


def check_monotone(levels, tolerance: float = 0.0):
    """Per consecutive level pair: worst (lambda^n - lambda^{n+1})+ and the
    fraction of grid points violating beyond the tolerance."""
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    rows = []
    for a, b in zip(levels, levels[1:]):
        va = a.values if isinstance(a, LevelBatch) else np.stack(
            [p.values for p in a.paths])
        vb = b.values if isinstance(b, LevelBatch) else np.stack(
            [p.values for p in b.paths])
        gap = va - vb
        rows.append(MonotonicityRow(
            level_from=a.n, level_to=b.n,
            max_violation=float(np.maximum(gap, 0.0).max()),
            violating_fraction=float(np.mean(gap > tolerance))))
    return rows


@dataclass(frozen=True)
class MomentBoundReport:
    m_const: float
    b_prime: float
    l_prime: float
    k_const: float
    k_provenance: str
    max_violation: float  # worst (mean - 3se) - envelope over levels/times
    raw_max_violation: float  # worst mean - envelope, no CI adjustment
    n_checked: int
    passed: bool  # CI-adjusted
    passed_raw: bool
    curve_times: np.ndarray
    sup_mean: np.ndarray  # (n_levels, n_points) sup_i of the mean curves
    envelope: np.ndarray  # (n_points,) M * exp(L' t)


def moment_bound_check(levels, grid: TimeGrid, a_bar: float, growth_b: float,
                       growth_l: float, k_const: float,
                       k_provenance: str = "declared") -> MomentBoundReport:
    """Check the empirical sup-component mean curves against M*exp(L't).

    ``levels`` is a list of LevelBatch over an ensemble (>= 100 paths for a
    meaningful check); M is calibrated from the level-1 curve plus the
    initial-value requirement, with a 3*SE margin.
    """
    n_paths = levels[0].values.shape[1]
    means = np.stack([lv.values.mean(axis=1) for lv in levels])  # (L, N, K+1)
    ses = np.stack([lv.values.std(axis=1, ddof=1) / np.sqrt(n_paths)
                    for lv in levels])
    b_prime = a_bar * growth_b + k_const
    l_prime = a_bar * growth_l * means.shape[1] + k_const
    init_sup = float(means[0, :, 0].max())
    level1_sup = float(means[0].max())
    margin = 3.0 * float(ses[0].max()) + 1e-9
    m_const = max(init_sup, level1_sup, init_sup + b_prime * grid.horizon) + margin
    envelope = m_const * np.exp(l_prime * grid.points)
    sup_mean = means.max(axis=1)  # (L, K+1)
    adjusted = means - 3.0 * ses
    violation = float((adjusted.max(axis=1) - envelope[None, :]).max())
    raw_violation = float((sup_mean - envelope[None, :]).max())
    return MomentBoundReport(
        m_const=m_const, b_prime=b_prime, l_prime=l_prime, k_const=k_const,
        k_provenance=k_provenance,
        max_violation=violation, raw_max_violation=raw_violation,
        n_checked=int(means.size),
        passed=violation <= 0.0, passed_raw=raw_violation <= 0.0,
        curve_times=grid.points, sup_mean=sup_mean, envelope=envelope)


def _hierarchy_block(args):
    spec, cfg, grid, master_seed, lo, hi, n_max, mode, n_inner = args
    batch = make_batch(grid, spec.noise_layout(), master_seed, range(lo, hi))
    return run_hierarchy_batch(spec, batch, cfg, n_max, mode=mode, n_inner=n_inner)


@dataclass(frozen=True)
class RefinementRow:
    """Hierarchy ordering statistics at one grid resolution."""

    steps: int
    dt: float
    max_violation: float  # ensemble max over paths, level pairs, grid points
    mean_sup_violation: float  # ensemble mean of the per-path sup violation
    violating_fraction: float
    cauchy_gap: float


def _refinement_block(args):
    spec, cfg, horizon, ladder, master_seed, lo, hi, n_max, mode, n_inner = args
    finest = max(ladder)
    grid = dyadic_partition(finest.bit_length(), horizon)
    batch_fine = make_batch(grid, spec.noise_layout(), master_seed, range(lo, hi))
    out = []
    for steps in ladder:
        batch = batch_fine.coarsen(finest // steps)
        hier = run_hierarchy_batch(spec, batch, cfg, n_max, mode=mode,
                                   n_inner=n_inner)
        per_path = np.zeros(batch.n_paths)
        frac_num = frac_den = 0
        for a, b in zip(hier.levels, hier.levels[1:]):
            viol = np.maximum(a.values - b.values, 0.0)
            per_path = np.maximum(per_path, viol.max(axis=(0, 2)))
            frac_num += int((viol > 0).sum())
            frac_den += viol.size
        out.append((steps, per_path, frac_num, frac_den,
                    float(hier.sup_gaps[-1].max())))
    return out


def hierarchy_refinement_study(spec: SystemSpec, cfg: SchemeConfig, horizon: float,
                               steps_ladder, n_paths: int, master_seed: int,
                               n_max: int, mode: str = "realized",
                               n_inner: int = 8, jobs: int = 1,
                               block: int = 256):
    """Hierarchy ordering statistics across a step ladder under shared noise.

    Noise is generated once per path on the finest grid and aggregated onto
    the coarser rungs, so every rung sees the same realization; all ladder
    members must be powers of two dividing the finest.
    """
    ladder = sorted(int(s) for s in steps_ladder)
    for s in ladder:
        if s & (s - 1) or max(ladder) % s:
            raise ValueError("ladder entries must be powers of two dividing the finest")
    ranges = [(lo, min(lo + block, n_paths)) for lo in range(0, n_paths, block)]
    tasks = [(spec, cfg, horizon, ladder, master_seed, lo, hi, n_max, mode, n_inner)
             for lo, hi in ranges]
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(min(jobs, len(tasks))) as pool:
            parts = pool.map(_refinement_block, tasks)
    else:
        parts = [_refinement_block(t) for t in tasks]
    rows = []
    for ri, steps in enumerate(ladder):
        per_path = np.concatenate([p[ri][1] for p in parts])
        frac_num = sum(p[ri][2] for p in parts)
        frac_den = sum(p[ri][3] for p in parts)
        rows.append(RefinementRow(
            steps=steps, dt=horizon / steps,
            max_violation=float(per_path.max()),
            mean_sup_violation=float(per_path.mean()),
            violating_fraction=frac_num / frac_den,
            cauchy_gap=max(p[ri][4] for p in parts)))
    return rows


def run_hierarchy_ensemble(spec: SystemSpec, cfg: SchemeConfig, grid: TimeGrid,
                           n_paths: int, master_seed: int, n_max: int,
                           mode: str = "realized", n_inner: int = 8,
                           jobs: int = 1, block: int = 256) -> HierarchyResult:
    """Hierarchies over an ensemble of shared-noise trajectories, merged in
    path order (parallelism-independent)."""
    ranges = [(lo, min(lo + block, n_paths)) for lo in range(0, n_paths, block)]
    tasks = [(spec, cfg, grid, master_seed, lo, hi, n_max, mode, n_inner)
             for lo, hi in ranges]
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(min(jobs, len(tasks))) as pool:
            parts = pool.map(_hierarchy_block, tasks)
    else:
        parts = [_hierarchy_block(t) for t in tasks]
    merged_levels = []
    first = parts[0]
    for li in range(len(first.levels)):
        merged_levels.append(LevelBatch(
            n=first.levels[li].n,
            partition=first.levels[li].partition,
            part_idx=first.levels[li].part_idx,
            inf_drifts=np.concatenate([p.levels[li].inf_drifts for p in parts], axis=1),
            values=np.concatenate([p.levels[li].values for p in parts], axis=1),
            forcing=np.concatenate([p.levels[li].forcing for p in parts], axis=1)))
    gaps = np.concatenate([p.sup_gaps for p in parts], axis=2)
    return HierarchyResult(levels=merged_levels, mode=first.mode, sup_gaps=gaps)
