"""Sampled validators for the coefficient assumptions.

These are finite-budget falsifiers, not proofs: each condition is probed on
sampled states/pairs/marks and reported pass, fail (with a witness), or
unchecked (divergence conditions for non-power-law moduli).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientSet, PowerModulus, SystemSpec

PASS, FAIL, UNCHECKED = "pass", "fail", "unchecked"

_REL_SLACK = 1e-9  # inequalities that are tight in exact arithmetic
_QUAD_SLACK = 1e-6  # checks whose sides come out of numeric quadrature


@dataclass(frozen=True)
class SamplingPlan:
    budget: int = 400
    x_max: float = 10.0
    truncations: tuple = (1.0, 5.0)
    n_marks: int = 24
    seed: int = 0


@dataclass(frozen=True)
class ConditionResult:
    name: str
    status: str
    detail: str = ""
    witness: object = None

    @property
    def ok(self) -> bool:
        return self.status != FAIL


@dataclass
class ValidationReport:
    subject: str
    conditions: list = field(default_factory=list)

    def add(self, name, status, detail="", witness=None):
        self.conditions.append(ConditionResult(name, status, detail, witness))

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.conditions)

    def failures(self):
        return [c for c in self.conditions if c.status == FAIL]

    def lines(self):
        out = [f"[{self.subject}]"]
        for c in self.conditions:
            line = f"  {c.status.upper():9s} {c.name}"
            if c.detail:
                line += f" - {c.detail}"
            if c.witness is not None:
                line += f" (witness: {c.witness})"
            out.append(line)
        return out


def _sample_marks(mu, rng, n):
    """Representative marks for sampled kernel checks, drawn from the measure
    geometry rather than its (possibly infinite-mass) law."""
    from .coeffs import (AxisSumMeasure, PointMassMeasure, ThinningMarkMeasure)
    if isinstance(mu, PointMassMeasure):
        return [u for u, _m in mu.atoms] * max(1, n // len(mu.atoms))
    if isinstance(mu, AxisSumMeasure):
        marks = []
        sizes = 10.0 ** rng.uniform(-2, 1, n)
        for k, u in enumerate(sizes):
            _measure, axis, dim = mu.terms[k % len(mu.terms)]
            mark = [0.0] * dim
            mark[axis] = float(u)
            marks.append(tuple(mark))
        return marks
    if isinstance(mu, ThinningMarkMeasure):
        v = rng.uniform(0.0, mu.v_max, n)
        if isinstance(mu.levy, PointMassMeasure):
            zetas = rng.choice([z for z, _m in mu.levy.atoms], size=n)
        else:
            zetas = 10.0 ** rng.uniform(-2, 1, n)
        return list(zip(v.tolist(), np.asarray(zetas, dtype=float).tolist()))
    # generic one-dimensional mark space
    return (10.0 ** rng.uniform(-2, 1, n)).tolist()


def _divergence_status(modulus, which: str):
    """(status, detail) for the divergence requirement on a modulus."""
    if isinstance(modulus, PowerModulus):
        diverges = (modulus.sq_integral_diverges if which == "sq"
                    else modulus.lin_integral_diverges)
        kind = "dz/rho^2" if which == "sq" else "dz/r"
        if diverges:
            return PASS, f"power law exponent {modulus.exponent}: integral {kind} diverges at 0"
        return FAIL, f"power law exponent {modulus.exponent}: integral {kind} converges at 0"
    declared = getattr(modulus,
                       "sq_integral_diverges" if which == "sq" else "lin_integral_diverges",
                       None)
    if declared is True:
        return PASS, "divergence declared by the supplied modulus"
    if declared is False:
        return FAIL, "supplied modulus declares a convergent integral"
    return UNCHECKED, "non-power-law modulus without a divergence declaration"


def validate_assum1(c: CoefficientSet, plan: SamplingPlan = SamplingPlan()) -> ValidationReport:
    """Regularity conditions on sigma, g0, g1 and their moduli."""
    if plan.budget < 1:
        raise ValueError("sample budget must be at least 1")
    rng = np.random.default_rng(plan.seed)
    report = ValidationReport("assumption-set-1")

    # sigma vanishes on the non-positive half line
    xs_neg = np.concatenate([[0.0], -(10.0 ** rng.uniform(-3, 1, plan.budget))])
    bad = np.flatnonzero(np.abs(c.sigma(xs_neg)) > 0)
    report.add("sigma vanishes for x <= 0", FAIL if bad.size else PASS,
               witness=None if not bad.size else float(xs_neg[bad[0]]))

    # |sigma(x) - sigma(y)| <= rho(|x - y|)
    xs = rng.uniform(0.0, plan.x_max, plan.budget)
    ys = rng.uniform(0.0, plan.x_max, plan.budget)
    lhs = np.abs(np.asarray(c.sigma(xs)) - np.asarray(c.sigma(ys)))
    rhs = np.asarray(c.rho(np.abs(xs - ys)))
    slack = _REL_SLACK * (1.0 + rhs)
    bad = np.flatnonzero(lhs > rhs + slack)
    report.add("sigma modulus |sigma(x)-sigma(y)| <= rho(|x-y|)",
               FAIL if bad.size else PASS,
               detail=f"{plan.budget} sampled pairs on [0, {plan.x_max}]",
               witness=None if not bad.size else (float(xs[bad[0]]), float(ys[bad[0]])))

    status, detail = _divergence_status(c.rho, "sq")
    report.add("integral dz/rho^2 diverges at 0", status, detail)

    # g0 block
    if c.g0 is not None and c.mu0 is not None:
        marks = _sample_marks(c.mu0, rng, plan.n_marks)
        pairs = np.sort(rng.uniform(0.0, plan.x_max, (plan.budget // 4, 2)), axis=1)
        witness = None
        for u in marks:
            lo = np.array([c.g0(x, u) for x in pairs[:, 0]])
            hi = np.array([c.g0(x, u) for x in pairs[:, 1]])
            bad = np.flatnonzero(lo > hi + _REL_SLACK * (1.0 + np.abs(hi)))
            if bad.size:
                witness = (float(pairs[bad[0], 0]), float(pairs[bad[0], 1]), u)
                break
        report.add("g0 increasing in the state", FAIL if witness else PASS, witness=witness)

        witness = None
        for u in marks:
            vals = np.array([c.g0(x, u) + x for x in pairs[:, 1]])
            bad = np.flatnonzero(vals < -_REL_SLACK)
            if bad.size:
                witness = (float(pairs[bad[0], 1]), u)
                break
        report.add("g0(x,u) + x >= 0 for x >= 0", FAIL if witness else PASS, witness=witness)

        witness = None
        for u in marks:
            vals = np.array([c.g0(x, u) for x in xs_neg[:: max(1, xs_neg.size // 32)]])
            bad = np.flatnonzero(np.abs(vals) > 0)
            if bad.size:
                witness = (float(xs_neg[bad[0]]), u)
                break
        report.add("g0(x,u) = 0 for x <= 0", FAIL if witness else PASS, witness=witness)

        # local boundedness of the (|g0| ^ |g0|^2)-integral
        states = np.linspace(0.0, plan.x_max, 9)[1:]
        vals = []
        for x in states:
            vals.append(c.mu0.integrate(lambda u: min(abs(c.g0(x, u)),
                                                      c.g0(x, u) ** 2)))
        vals = np.array(vals)
        finite = np.all(np.isfinite(vals))
        report.add("integral |g0| ^ |g0|^2 d(mu0) locally bounded",
                   PASS if finite else FAIL,
                   detail=f"max over sampled states: {vals.max():.4g}" if finite else "",
                   witness=None if finite else float(states[np.argmax(~np.isfinite(vals))]))

        # truncated L2 modulus bound
        if c.rho_m is None:
            report.add("g0 truncated L2 modulus", UNCHECKED, "no rho_m supplied")
        else:
            witness, checked = None, 0
            for m in plan.truncations:
                mod = c.rho_m(m)
                pts = rng.uniform(0.0, m, (12, 2))
                for x, y in pts:
                    val = c.mu0.integrate(
                        lambda u: (min(c.g0(x, u), m) - min(c.g0(y, u), m)) ** 2)
                    bound = float(mod(abs(x - y))) ** 2
                    checked += 1
                    if val > bound * (1 + _QUAD_SLACK) + _QUAD_SLACK * _QUAD_SLACK:
                        witness = (float(x), float(y), float(m), val, bound)
                        break
                if witness:
                    break
            report.add("g0 truncated L2 modulus <= rho_m^2", FAIL if witness else PASS,
                       detail=f"{checked} sampled (x, y, m) triples", witness=witness)
            status, detail = _divergence_status(c.rho_m(plan.truncations[0]), "sq")
            report.add("integral dz/rho_m^2 diverges at 0", status, detail)
    else:
        report.add("g0 conditions", PASS, "vacuous: component has no compensated jump kernel")

    # g1 block
    if c.g1 is not None:
        marks = _sample_marks(c.g1.mu, rng, plan.n_marks)
        states = rng.uniform(0.0, plan.x_max, plan.budget // 4)
        witness = None
        for u in marks:
            vals = np.array([c.g1.fn(x, u) + x for x in states])
            bad = np.flatnonzero(vals < -_REL_SLACK)
            if bad.size:
                witness = (float(states[bad[0]]), u)
                break
        report.add("g1(x,u) + x >= 0", FAIL if witness else PASS, witness=witness)

        growth = []
        for x in np.linspace(0.0, plan.x_max, 9)[1:]:
            growth.append((x, c.g1.mu.integrate(lambda u: abs(c.g1.fn(x, u)))))
        bad = [(x, v) for x, v in growth if v > c.growth_k * (1.0 + x) + _REL_SLACK]
        report.add("integral |g1| d(mu1) <= K(1+x) (declared K)",
                   FAIL if bad else PASS,
                   detail=f"K = {c.growth_k} (declared)", witness=bad[0] if bad else None)

        report.add("mu1 remainder mass finite",
                   PASS if math.isfinite(c.g1.remainder_mass) else FAIL,
                   detail=f"mu1(U1 \\ U2) = {c.g1.remainder_mass}")

        if c.r_m is None:
            report.add("g1 truncated L1 modulus", UNCHECKED, "no r_m supplied")
        else:
            witness, checked = None, 0
            for m in plan.truncations:
                mod = c.r_m(m)
                pts = rng.uniform(0.0, m, (12, 2))
                for x, y in pts:
                    val = c.g1.mu.integrate(
                        lambda u: abs(min(c.g1.fn(x, u), m) - min(c.g1.fn(y, u), m)))
                    bound = float(mod(abs(x - y)))
                    checked += 1
                    if val > bound * (1 + _QUAD_SLACK) + _QUAD_SLACK * _QUAD_SLACK:
                        witness = (float(x), float(y), float(m), val, bound)
                        break
                if witness:
                    break
            report.add("g1 truncated L1 modulus <= r_m", FAIL if witness else PASS,
                       detail=f"{checked} sampled (x, y, m) triples", witness=witness)
            status, detail = _divergence_status(c.r_m(plan.truncations[0]), "lin")
            report.add("integral dz/r_m diverges at 0", status, detail)
    else:
        report.add("g1 conditions", PASS, "vacuous: component has no uncompensated jump kernel")

    return report


def validate_assum2(c: CoefficientSet, plan: SamplingPlan = SamplingPlan()) -> ValidationReport:
    """Monotonicity/boundedness of sigma, left continuity of the kernels,
    monotonicity-or-domination of g1."""
    if plan.budget < 1:
        raise ValueError("sample budget must be at least 1")
    rng = np.random.default_rng(plan.seed + 1)
    report = ValidationReport("assumption-set-2")

    xs = np.sort(rng.uniform(0.0, plan.x_max, plan.budget))
    vals = np.asarray(c.sigma(xs), dtype=float)
    increasing = bool(np.all(np.diff(vals) >= -_REL_SLACK * (1.0 + np.abs(vals[:-1]))))
    if increasing:
        report.add("sigma bounded or increasing on R+", PASS, "increasing branch")
    else:
        # boundedness probe: the range on a 10x wider window must not grow
        # beyond sampling slack over the range seen on [0, x_max]
        wide = np.asarray(c.sigma(np.linspace(0.0, 10.0 * plan.x_max, 4 * plan.budget)))
        bounded = bool(np.max(np.abs(wide)) <= np.max(np.abs(vals)) * 1.05 + 1e-9)
        report.add("sigma bounded or increasing on R+",
                   PASS if bounded else FAIL,
                   "bounded branch (range stable on a 10x wider probe)" if bounded
                   else "neither increasing on samples nor bounded on a wider probe")

    def left_cont_probe(fn, mu, name):
        marks = _sample_marks(mu, rng, plan.n_marks)
        states = rng.uniform(1e-3, plan.x_max, 16)
        worst = 0.0
        for u in marks[:8]:
            for x in states:
                gap = abs(fn(x - 1e-9, u) - fn(x, u))
                worst = max(worst, gap)
        report.add(name, PASS if worst <= 1e-6 else FAIL,
                   detail=f"max |g(x-1e-9,u) - g(x,u)| = {worst:.3g} over sampled points")

    if c.g0 is not None and c.mu0 is not None:
        left_cont_probe(c.g0, c.mu0, "g0 left-continuous in x (probe)")
    if c.g1 is not None:
        left_cont_probe(c.g1.fn, c.g1.mu, "g1 left-continuous in x (probe)")
        marks = _sample_marks(c.g1.mu, rng, plan.n_marks)
        pairs = np.sort(rng.uniform(0.0, plan.x_max, (plan.budget // 4, 2)), axis=1)
        monotone = True
        for u in marks:
            lo = np.array([c.g1.fn(x, u) for x in pairs[:, 0]])
            hi = np.array([c.g1.fn(x, u) for x in pairs[:, 1]])
            if np.any(lo > hi + _REL_SLACK * (1.0 + np.abs(hi))):
                monotone = False
                break
        if monotone:
            report.add("g1 increasing or dominated", PASS, "increasing branch")
        elif c.g1.dominator is not None:
            m1 = c.g1.mu.integrate(lambda u: abs(c.g1.dominator(u)))
            m2 = c.g1.mu.integrate(lambda u: c.g1.dominator(u) ** 2)
            dominated = all(abs(c.g1.fn(x, u)) <= abs(c.g1.dominator(u)) + _REL_SLACK
                            for u in marks for x in pairs[:, 1][:16])
            ok = dominated and math.isfinite(m1) and math.isfinite(m2)
            report.add("g1 increasing or dominated", PASS if ok else FAIL,
                       f"domination branch: |G| moment {m1:.4g}, G^2 moment {m2:.4g}")
        else:
            report.add("g1 increasing or dominated", FAIL,
                       "not increasing on samples and no dominating G supplied")
    return report


def validate_assum_uniq(rho, rho_m, x_m: float, n_points: int = 512) -> ValidationReport:
    """rho_m <= rho on a dense sample of (0, x_m]."""
    if x_m <= 0:
        raise ValueError("x_m must be positive")
    report = ValidationReport("uniqueness-modulus")
    xs = np.concatenate([10.0 ** np.linspace(-9, 0, n_points // 2) * x_m,
                         np.linspace(x_m / n_points, x_m, n_points // 2)])
    lo = np.asarray(rho_m(xs), dtype=float)
    hi = np.asarray(rho(xs), dtype=float)
    bad = np.flatnonzero(lo > hi * (1 + _REL_SLACK))
    report.add(f"rho_m <= rho on (0, {x_m}]", FAIL if bad.size else PASS,
               detail=f"{xs.size} sample points",
               witness=None if not bad.size else
               (float(xs[bad[0]]), float(lo[bad[0]]), float(hi[bad[0]])))
    return report


def validate_drift(spec: SystemSpec, plan: SamplingPlan = SamplingPlan()) -> ValidationReport:
    """Mean-field drift conditions: non-negative, increasing per argument,
    within the declared linear-growth envelope B + L * sum(states)."""
    rng = np.random.default_rng(plan.seed + 2)
    report = ValidationReport("mean-field-drift")
    n = spec.n
    times = rng.uniform(0.0, 1.0, 8)
    states = rng.uniform(0.0, plan.x_max, (plan.budget // 4, n))

    for i, drift in enumerate(spec.drifts):
        if drift.kind != "mean-field":
            report.add(f"component {i}: drift kind '{drift.kind}'", PASS,
                       "state-independent drift; mean-field conditions vacuous")
            continue
        vals = np.array([[drift.fn(t, row[:, None])[0] for row in states] for t in times])
        neg = vals < -_REL_SLACK
        report.add(f"component {i}: b_i non-negative", FAIL if neg.any() else PASS,
                   witness=None if not neg.any() else float(vals[neg][0]))

        witness = None
        for t in times[:4]:
            for row in states[:32]:
                base = drift.fn(t, row[:, None])[0]
                for j in range(n):
                    bumped = row.copy()
                    bumped[j] += 1.0
                    if drift.fn(t, bumped[:, None])[0] < base - _REL_SLACK * (1 + abs(base)):
                        witness = (float(t), row.tolist(), j)
                        break
                if witness:
                    break
            if witness:
                break
        report.add(f"component {i}: b_i increasing in each state", FAIL if witness else PASS,
                   witness=witness)

        bound = drift.growth_bound + drift.growth_slope * states.sum(axis=1)
        over = vals > bound[None, :] + _REL_SLACK * (1.0 + np.abs(bound[None, :]))
        report.add(f"component {i}: b_i <= B + L*sum(x) "
                   f"(B={drift.growth_bound}, L={drift.growth_slope})",
                   FAIL if over.any() else PASS)
    return report


def validate_system(spec: SystemSpec, plan: SamplingPlan = SamplingPlan()):
    """All assumption reports for every component plus the drift conditions."""
    reports = []
    for i, comp in enumerate(spec.components):
        r1 = validate_assum1(comp, plan)
        r1.subject = f"component {i}: {r1.subject}"
        r2 = validate_assum2(comp, plan)
        r2.subject = f"component {i}: {r2.subject}"
        reports.extend([r1, r2])
    reports.append(validate_drift(spec, plan))
    return reports
