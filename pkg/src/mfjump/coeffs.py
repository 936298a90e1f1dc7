"""Coefficient descriptors: diffusion/jump functions, moduli, measures, drifts.

Callables are small frozen dataclasses rather than closures so that system
specifications pickle cleanly into worker processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .noise import MeasureSpec, NoiseLayout


# ---------------------------------------------------------------------------
# moduli


@dataclass(frozen=True)
class PowerModulus:
    """rho(z) = coef * z**exponent; divergence of the defining integrals is
    decidable symbolically for this family."""

    coef: float
    exponent: float

    def __call__(self, z):
        return self.coef * np.asarray(z, dtype=float) ** self.exponent

    @property
    def sq_integral_diverges(self) -> bool:
        """Whether the integral of 1/rho^2 over (0, x] diverges."""
        return self.exponent >= 0.5

    @property
    def lin_integral_diverges(self) -> bool:
        """Whether the integral of 1/rho over (0, x] diverges."""
        return self.exponent >= 1.0


@dataclass(frozen=True)
class CallableModulus:
    """User-supplied modulus; divergence must be declared, else 'unchecked'."""

    fn: Callable
    sq_integral_diverges: Optional[bool] = None
    lin_integral_diverges: Optional[bool] = None

    def __call__(self, z):
        return self.fn(z)


# ---------------------------------------------------------------------------
# measures (validation-side integrals; generation uses noise.MeasureSpec)


@dataclass(frozen=True)
class PointMassMeasure:
    atoms: tuple  # ((mark, mass), ...)

    @property
    def total_mass(self) -> float:
        return float(sum(m for _u, m in self.atoms))

    def first_moment(self) -> float:
        return float(sum(u * m for u, m in self.atoms))

    def integrate(self, fn) -> float:
        return float(sum(fn(u) * m for u, m in self.atoms))


@dataclass(frozen=True)
class DensityMeasure:
    density: Callable
    lo: float
    hi: float  # may be inf

    @property
    def total_mass(self) -> float:
        return self.integrate(lambda _u: 1.0)

    def first_moment(self) -> float:
        return self.integrate(lambda u: u)

    def integrate(self, fn, breakpoints: Sequence[float] = ()) -> float:
        f = lambda u: fn(u) * self.density(u)
        pts = sorted(p for p in breakpoints if self.lo < p < self.hi)
        total, lo = 0.0, self.lo
        for p in pts:
            total += integrate.quad(f, lo, p, limit=200)[0]
            lo = p
        total += integrate.quad(f, lo, self.hi, limit=200)[0]
        return float(total)


@dataclass(frozen=True)
class ExponentialMeasure:
    """Finite measure mass * Exp(mean) on (0, inf)."""

    mass: float
    mean: float

    @property
    def total_mass(self) -> float:
        return self.mass

    def density(self, u):
        return self.mass * np.exp(-u / self.mean) / self.mean

    def first_moment(self) -> float:
        return self.mass * self.mean

    def integrate(self, fn, breakpoints: Sequence[float] = ()) -> float:
        f = lambda u: fn(u) * self.density(u)
        pts = sorted(p for p in breakpoints if p > 0.0)
        total, lo = 0.0, 0.0
        for p in pts:
            total += integrate.quad(f, lo, p, limit=200)[0]
            lo = p
        total += integrate.quad(f, lo, np.inf, limit=200)[0]
        return float(total)


def stable_levy_constant(alpha: float) -> float:
    """Density constant c of the Levy measure c*u^(-1-alpha) du matching the
    standard one-parametrization S_alpha(1, beta=1, 0), alpha in (1, 2)."""
    return -alpha * (alpha - 1.0) / (math.gamma(2.0 - alpha) * math.cos(math.pi * alpha / 2.0))


@dataclass(frozen=True)
class StableJumpMeasure:
    """Levy measure of the spectrally positive alpha-stable driver (infinite mass)."""

    alpha: float

    @property
    def total_mass(self) -> float:
        return math.inf

    def density(self, u):
        return stable_levy_constant(self.alpha) * u ** (-1.0 - self.alpha)

    def integrate(self, fn, breakpoints: Sequence[float] = ()) -> float:
        f = lambda u: fn(u) * self.density(u)
        pts = sorted(p for p in breakpoints if p > 0.0) or [1.0]
        total, lo = 0.0, 0.0
        for p in pts:
            total += integrate.quad(f, lo, p, limit=200)[0]
            lo = p
        total += integrate.quad(f, lo, np.inf, limit=200)[0]
        return float(total)


@dataclass(frozen=True)
class AxisSumMeasure:
    """Measure concentrated on coordinate axes of a product mark space.

    Component j contributes measure_j on marks embed_j(u); used for the jump
    measure of a vector of independent drivers (their jumps never coincide).
    """

    terms: tuple  # ((measure, axis index, mark dimension), ...)

    @property
    def total_mass(self) -> float:
        return float(sum(m.total_mass for m, _a, _d in self.terms))

    def integrate(self, fn, breakpoints: Sequence[float] = ()) -> float:
        total = 0.0
        for measure, axis, dim in self.terms:
            def on_axis(u, axis=axis, dim=dim):
                mark = [0.0] * dim
                mark[axis] = u
                return fn(tuple(mark))
            if isinstance(measure, PointMassMeasure):
                total += measure.integrate(on_axis)
            else:
                total += measure.integrate(on_axis, breakpoints=breakpoints)
        return float(total)


@dataclass(frozen=True)
class ThinningMarkMeasure:
    """Product measure dv x levy(dzeta) on (0, v_max) x R+, total mass v_max * |levy|."""

    levy: object  # PointMassMeasure or DensityMeasure, finite mass
    v_max: float

    @property
    def total_mass(self) -> float:
        return self.v_max * self.levy.total_mass

    def integrate(self, fn) -> float:
        def over_v(zeta):
            return integrate.quad(lambda v: fn((v, zeta)), 0.0, self.v_max, limit=200)[0]
        if isinstance(self.levy, PointMassMeasure):
            return float(sum(over_v(z) * m for z, m in self.levy.atoms))
        return self.levy.integrate(over_v)


# ---------------------------------------------------------------------------
# picklable coefficient callables


@dataclass(frozen=True)
class SqrtDiffusion:
    """sigma(x) = coef * sqrt(max(x, 0))."""

    coef: float

    def __call__(self, x):
        return self.coef * np.sqrt(np.maximum(x, 0.0))


@dataclass(frozen=True)
class PowerDiffusion:
    """sigma(x) = coef * max(x, 0)**power."""

    coef: float
    power: float

    def __call__(self, x):
        return self.coef * np.maximum(x, 0.0) ** self.power


@dataclass(frozen=True)
class ZeroFn:
    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class StablePowerKernel:
    """Validation form of g0 for stable drivers: sum_j coef_j * u_j * max(x,0)^(1/alpha_j)."""

    coefs: tuple
    alphas: tuple

    def __call__(self, x, mark):
        x = max(float(x), 0.0) if np.isscalar(x) else np.maximum(x, 0.0)
        total = 0.0
        for coef, alpha, u in zip(self.coefs, self.alphas, mark):
            total = total + coef * u * x ** (1.0 / alpha)
        return total


@dataclass(frozen=True)
class ThinningKernel:
    """g0(x, (v, zeta)) = zeta * 1{v < x}."""

    def __call__(self, x, mark):
        v, zeta = mark
        return zeta if v < x else 0.0


@dataclass(frozen=True)
class ThinningCompensator:
    """Integral of the thinning kernel: min(max(x,0), v_max) * first_moment."""

    v_max: float
    first_moment: float

    def __call__(self, x):
        return np.minimum(np.maximum(x, 0.0), self.v_max) * self.first_moment


@dataclass(frozen=True)
class ThinningMarkSampler:
    """(v, zeta) marks: v uniform on (0, v_max), zeta from the normalized levy law."""

    v_max: float
    atoms: tuple = ()  # point-mass levy: ((zeta, mass), ...)
    exp_mean: float = 0.0  # exponential levy with this mean, if atoms empty

    def __call__(self, rng, size):
        v = rng.uniform(0.0, self.v_max, size)
        if self.atoms:
            zetas = np.array([z for z, _m in self.atoms])
            probs = np.array([m for _z, m in self.atoms], dtype=float)
            z = rng.choice(zetas, size=size, p=probs / probs.sum())
        else:
            z = rng.exponential(self.exp_mean, size)
        return list(zip(v.tolist(), z.tolist()))


# ---------------------------------------------------------------------------
# kernels and coefficient sets


@dataclass(frozen=True)
class BrownianTerm:
    """One Brownian factor loading; the component's driving W is the weighted sum."""

    factor: int
    weight: float


@dataclass(frozen=True)
class StableTerm:
    """Stable-driver contribution coef * max(Y,0)^(1/alpha) * dZ_factor per step."""

    factor: int
    coef: float
    alpha: float


@dataclass(frozen=True)
class CompensatedKernel:
    """Finite-activity compensated jump part: events plus a compensator drift."""

    fn: Callable  # (x, mark) -> jump size
    measure: MeasureSpec  # generation side
    mu: object  # validation-side measure over marks
    compensator: Callable  # vectorized x -> integral of fn(x, .) d(mu)


@dataclass(frozen=True)
class JumpKernel:
    """Uncompensated jump part g1 against a point-process measure."""

    fn: Callable
    measure: MeasureSpec
    mu: object
    remainder_mass: float = 0.0  # mu1(U1 \ U2)
    dominator: Optional[Callable] = None  # G(u) bound, if g1 is not increasing


@dataclass(frozen=True)
class CoefficientSet:
    """Everything one system component needs: simulation bindings plus the
    descriptors the assumption validators check."""

    a: float
    sigma: Callable
    brownian: tuple = ()  # BrownianTerm entries
    stable_terms: tuple = ()  # StableTerm entries
    g0: Optional[Callable] = None  # validation form over the mark space
    mu0: object = None
    g0_finite: Optional[CompensatedKernel] = None
    g1: Optional[JumpKernel] = None
    rho: object = PowerModulus(1.0, 0.5)
    rho_m: Optional[Callable] = None  # m -> modulus
    r_m: Optional[Callable] = None  # m -> modulus
    growth_k: float = 0.0  # declared linear-growth constant of x -> integral |g1| d(mu1)

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("mean-reversion speed must be non-negative")


@dataclass(frozen=True)
class MeanFieldAverage:
    """b_i(s, x) = (x_1 + ... + x_N) / N, summed in sorted order so the value
    is exactly invariant under component permutations."""

    n: int

    def __call__(self, t, states):
        states = np.asarray(states, dtype=float)
        return np.sort(states, axis=0).sum(axis=0) / self.n


@dataclass(frozen=True)
class LinearInTime:
    intercept: float
    slope: float

    def __call__(self, t):
        return self.intercept + self.slope * t


@dataclass(frozen=True)
class DriftSpec:
    """Drift target process b_i: constant, deterministic in time, mean-field,
    or an externally supplied path."""

    kind: str  # "constant" | "time" | "mean-field" | "path"
    value: float = 0.0
    fn: Optional[Callable] = None
    path: object = None
    growth_bound: float = 0.0  # B with b <= B + L * sum(states)
    growth_slope: float = 0.0  # L
    label: str = ""

    @classmethod
    def constant(cls, value: float) -> "DriftSpec":
        return cls(kind="constant", value=float(value),
                   growth_bound=float(value), growth_slope=0.0, label="constant")

    @classmethod
    def time_function(cls, fn, growth_bound: float, label: str = "time") -> "DriftSpec":
        return cls(kind="time", fn=fn, growth_bound=growth_bound, growth_slope=0.0, label=label)

    @classmethod
    def mean_field(cls, fn, growth_bound: float, growth_slope: float,
                   label: str = "mean-field") -> "DriftSpec":
        return cls(kind="mean-field", fn=fn, growth_bound=growth_bound,
                   growth_slope=growth_slope, label=label)

    @classmethod
    def mean_field_average(cls, n: int) -> "DriftSpec":
        return cls(kind="mean-field", fn=MeanFieldAverage(n), growth_bound=0.0,
                   growth_slope=1.0 / n, label="average")

    @classmethod
    def external(cls, path, growth_bound: float = 0.0) -> "DriftSpec":
        return cls(kind="path", path=path, growth_bound=growth_bound, label="path")

    @property
    def deterministic(self) -> bool:
        return self.kind in ("constant", "time", "path")


@dataclass(frozen=True)
class SystemSpec:
    """N coupled components: coefficients, drifts, initial values."""

    components: tuple
    drifts: tuple
    initial: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        init = np.asarray(self.initial, dtype=float)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "drifts", tuple(self.drifts))
        if len(self.components) != len(self.drifts) or init.size != len(self.components):
            raise ValueError("components, drifts and initial values must align")
        if np.any(init < 0):
            raise ValueError("initial values must be non-negative")

    @property
    def n(self) -> int:
        return len(self.components)

    def noise_layout(self) -> NoiseLayout:
        brownian, alphas, measures, seen = set(), {}, [], set()
        for comp in self.components:
            for term in comp.brownian:
                if term.weight != 0.0:
                    brownian.add(term.factor)
            for term in comp.stable_terms:
                if term.coef == 0.0:
                    continue
                if term.factor in alphas and alphas[term.factor] != term.alpha:
                    raise ValueError(
                        f"stable factor {term.factor} declared with two alphas")
                alphas[term.factor] = term.alpha
            for kernel in (comp.g0_finite, comp.g1):
                if kernel is not None and kernel.measure.measure_id not in seen:
                    seen.add(kernel.measure.measure_id)
                    measures.append(kernel.measure)
        return NoiseLayout(brownian_factors=tuple(sorted(brownian)),
                           stable_alphas=alphas, measures=tuple(measures))


def permute_system(spec: SystemSpec, perm: Sequence[int]) -> SystemSpec:
    """Relabel components by ``perm`` (drifts and initials move along)."""
    perm = list(perm)
    return SystemSpec(components=tuple(spec.components[p] for p in perm),
                      drifts=tuple(spec.drifts[p] for p in perm),
                      initial=spec.initial[perm],
                      meta=dict(spec.meta))
