"""Joint simulation of the coupled system and Monte Carlo aggregation.

All components advance simultaneously off the pre-step state vector
(Jacobi-style), so component relabeling commutes with solving. Ensembles are
processed in fixed path-index blocks and reduced in block order, which makes
results independent of the parallelism degree.
"""
from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .coeffs import SystemSpec
from .noise import NoiseBatch, NoiseBundle, TimeGrid, make_batch
from .solver import SchemeConfig, solve_batch

_BLOCK = 512  # fixed ensemble block size; independent of --jobs


def solve_system(spec: SystemSpec, noise: NoiseBundle, cfg: SchemeConfig):
    """Solve the N-dimensional system on one noise bundle, one path per component."""
    batch = NoiseBatch.from_bundles([noise])
    result = solve_batch(spec.components, spec.drifts, batch, cfg,
                         initial=spec.initial[:, None])
    return result.component_paths(0)


@dataclass
class EnsembleResult:
    """Streaming Monte Carlo summary over an ensemble of trajectories."""

    grid: TimeGrid
    n_paths: int
    mean: np.ndarray  # (n_components, n_points)
    se: np.ndarray
    avg_mean: np.ndarray  # (n_points,) statistics of the component average
    avg_se: np.ndarray
    integral_mean: np.ndarray  # (n_components,) estimate of E[int lambda dt]
    integral_se: np.ndarray
    section_times: np.ndarray
    section_values: np.ndarray  # (n_paths, n_components, n_sections)
    warnings: list = field(default_factory=list)
    values: np.ndarray = None  # (n_components, n_paths, n_points) if retained

    def quantiles(self, qs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> np.ndarray:
        """(len(qs), n_components, n_sections) quantiles at the section times."""
        return np.quantile(self.section_values, qs, axis=0)


def _block_ranges(n_paths: int, block: int = _BLOCK):
    return [(lo, min(lo + block, n_paths)) for lo in range(0, n_paths, block)]


def _ensemble_block(args):
    spec, cfg, grid, master_seed, lo, hi, section_idx, keep_values = args
    batch = make_batch(grid, spec.noise_layout(), master_seed, range(lo, hi))
    result = solve_batch(spec.components, spec.drifts, batch, cfg,
                         initial=spec.initial[:, None])
    vals = result.values  # (N, P, K+1)
    avg = vals.mean(axis=0)  # (P, K+1)
    integ = np.trapezoid(vals, x=grid.points, axis=2)  # (N, P)
    return {
        "count": hi - lo,
        "sum": vals.sum(axis=1),
        "sumsq": (vals ** 2).sum(axis=1),
        "avg_sum": avg.sum(axis=0),
        "avg_sumsq": (avg ** 2).sum(axis=0),
        "integ_sum": integ.sum(axis=1),
        "integ_sumsq": (integ ** 2).sum(axis=1),
        "sections": vals[:, :, section_idx].transpose(1, 0, 2),
        "warnings": result.warnings,
        "values": vals if keep_values else None,
        "jumps": result.jumps if keep_values else None,
    }


def run_ensemble(spec: SystemSpec, cfg: SchemeConfig, grid: TimeGrid, n_paths: int,
                 master_seed: int, jobs: int = 1, section_times=None,
                 keep_values: bool = False) -> EnsembleResult:
    """Simulate n_paths independent trajectories of the system.

    Path p always uses the bundle with lineage (master_seed, p); blocks are
    merged in index order, so the output is byte-identical for any ``jobs``.
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    if section_times is None:
        section_times = grid.points[:: max(1, grid.n_steps // 8)]
    section_idx = np.array([grid.index_of(t) for t in section_times])
    section_times = grid.points[section_idx]

    tasks = [(spec, cfg, grid, master_seed, lo, hi, section_idx, keep_values)
             for lo, hi in _block_ranges(n_paths)]
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(min(jobs, len(tasks))) as pool:
            partials = pool.map(_ensemble_block, tasks)
    else:
        partials = [_ensemble_block(t) for t in tasks]

    n_comp, n_pts = spec.n, grid.points.size
    total = np.zeros((n_comp, n_pts))
    total_sq = np.zeros((n_comp, n_pts))
    avg_total = np.zeros(n_pts)
    avg_total_sq = np.zeros(n_pts)
    integ_total = np.zeros(n_comp)
    integ_total_sq = np.zeros(n_comp)
    sections, values, warns = [], [], []
    for part in partials:  # fixed block order
        total += part["sum"]
        total_sq += part["sumsq"]
        avg_total += part["avg_sum"]
        avg_total_sq += part["avg_sumsq"]
        integ_total += part["integ_sum"]
        integ_total_sq += part["integ_sumsq"]
        sections.append(part["sections"])
        warns.extend(w for w in part["warnings"] if w not in warns)
        if keep_values:
            values.append(part["values"])

    def _mean_se(s, ssq):
        mean = s / n_paths
        var = np.maximum(ssq / n_paths - mean ** 2, 0.0)
        se = np.sqrt(var / max(n_paths - 1, 1))
        return mean, se

    mean, se = _mean_se(total, total_sq)
    avg_mean, avg_se = _mean_se(avg_total, avg_total_sq)
    integ_mean, integ_se = _mean_se(integ_total, integ_total_sq)
    return EnsembleResult(
        grid=grid, n_paths=n_paths, mean=mean, se=se,
        avg_mean=avg_mean, avg_se=avg_se,
        integral_mean=integ_mean, integral_se=integ_se,
        section_times=section_times,
        section_values=np.concatenate(sections, axis=0),
        warnings=warns,
        values=np.concatenate(values, axis=1) if keep_values else None)


@dataclass(frozen=True)
class MomentRow:
    component: int
    time: float
    mean: float
    se: float
    quantiles: tuple  # ((q, value), ...)


@dataclass(frozen=True)
class MomentSummary:
    rows: tuple
    aggregate: tuple  # ((time, mean, se), ...) for the component average
    integral_mean: np.ndarray
    integral_se: np.ndarray
    n_paths: int


def estimate_moments(path_lists, times, qs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> MomentSummary:
    """Time-sectioned statistics from explicit path objects.

    ``path_lists`` holds one list of per-component CadlagPaths per trajectory;
    at least two trajectories are required for standard errors.
    """
    n_paths = len(path_lists)
    if n_paths < 2:
        raise ValueError("need at least two trajectories")
    n_comp = len(path_lists[0])
    times = np.asarray(times, dtype=float)
    vals = np.array([[[p.evaluate(t) for t in times] for p in comps]
                     for comps in path_lists])  # (P, N, T)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(n_paths)
    quant = np.quantile(vals, qs, axis=0)  # (Q, N, T)
    rows = []
    for i in range(n_comp):
        for j, t in enumerate(times):
            rows.append(MomentRow(
                component=i, time=float(t), mean=float(mean[i, j]), se=float(se[i, j]),
                quantiles=tuple((float(q), float(quant[qi, i, j]))
                                for qi, q in enumerate(qs))))
    avg = vals.mean(axis=1)  # (P, T)
    aggregate = tuple((float(t), float(avg[:, j].mean()),
                       float(avg[:, j].std(ddof=1) / np.sqrt(n_paths)))
                      for j, t in enumerate(times))
    integ = np.array([[np.trapezoid(p.values, x=p.grid.points) for p in comps]
                      for comps in path_lists])  # (P, N)
    return MomentSummary(rows=tuple(rows), aggregate=aggregate,
                         integral_mean=integ.mean(axis=0),
                         integral_se=integ.std(axis=0, ddof=1) / np.sqrt(n_paths),
                         n_paths=n_paths)
