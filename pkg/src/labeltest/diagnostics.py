"""Analytic quantities: FR consistency limits, KL^2 divergence, information spectrum,
mutual information, and finite-sample power lower bounds for the sequential test.

All logarithms are natural; information is in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from labeltest.core import LabelTestError

Density = Callable[[np.ndarray], np.ndarray]


class IntegrationFailure(LabelTestError, RuntimeError):
    pass


class SupportMismatch(LabelTestError, ValueError):
    pass


class DegenerateJoint(LabelTestError, ValueError):
    pass


class ZeroDenominator(LabelTestError, ValueError):
    pass


# -- integration ---------------------------------------------------------------


@dataclass(frozen=True)
class GridIntegrator:
    """Trapezoid rule on a box, doubling the grid until successive estimates agree to ``tol``.

    Intended for d <= 2.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    tol: float = 1e-6
    start: int = 16
    max_points: int = 2**20


@dataclass(frozen=True)
class MonteCarloIntegrator:
    """Uniform sampling over a box."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    draws: int = 10**6
    seed: int = 0


@dataclass(frozen=True)
class AtomIntegrator:
    """Weighted sum over atoms, i.e. integration against a discrete measure."""

    points: np.ndarray
    weights: np.ndarray


Integrator = GridIntegrator | MonteCarloIntegrator | AtomIntegrator


def gaussian_box(means, sigma: float, width: float = 8.0) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Bounding box reaching ``width`` sigmas past every mean."""
    m = np.atleast_2d(np.asarray(means, dtype=np.float64))
    lo = m.min(axis=0) - width * sigma
    hi = m.max(axis=0) + width * sigma
    return tuple(lo.tolist()), tuple(hi.tolist())


def default_integrator(lo, hi) -> Integrator:
    lo = tuple(float(v) for v in np.atleast_1d(lo))
    hi = tuple(float(v) for v in np.atleast_1d(hi))
    if len(lo) <= 2:
        return GridIntegrator(lo, hi)
    return MonteCarloIntegrator(lo, hi)


def _trapezoid(f: Density, lo: np.ndarray, hi: np.ndarray, m: int) -> float:
    axes = [np.linspace(a, b, m + 1) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    vals = np.asarray(f(pts), dtype=np.float64).reshape(mesh[0].shape)
    for ax, grid in enumerate(axes):
        vals = np.trapezoid(vals, grid, axis=0) if hasattr(np, "trapezoid") else np.trapz(vals, grid, axis=0)
    return float(vals)


def integrate(f: Density, integrator: Integrator) -> float:
    if isinstance(integrator, AtomIntegrator):
        pts = np.asarray(integrator.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(integrator.weights, dtype=np.float64)
        return math.fsum((np.asarray(f(pts), dtype=np.float64) * w).tolist())
    lo = np.asarray(integrator.lo, dtype=np.float64)
    hi = np.asarray(integrator.hi, dtype=np.float64)
    if isinstance(integrator, MonteCarloIntegrator):
        rng = np.random.default_rng(integrator.seed)
        pts = rng.uniform(lo, hi, size=(integrator.draws, lo.size))
        return float(np.prod(hi - lo) * np.mean(f(pts)))
    m = integrator.start
    prev = _trapezoid(f, lo, hi, m)
    while (2 * m + 1) ** lo.size <= integrator.max_points:
        m *= 2
        cur = _trapezoid(f, lo, hi, m)
        if abs(cur - prev) < integrator.tol:
            return cur
        prev = cur
    raise IntegrationFailure(f"grid refinement did not reach tol={integrator.tol}")


def gaussian_density(mean, sigma: float = 1.0) -> Density:
    """Isotropic normal density evaluated on rows of an (N, d) array."""
    mu = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    d = mu.size
    norm = (2.0 * math.pi * sigma**2) ** (-d / 2.0)

    def pdf(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        r2 = np.sum((x - mu) ** 2, axis=1)
        return norm * np.exp(-0.5 * r2 / sigma**2)

    return pdf


def mixture_density(components) -> Density:
    """``components`` is a sequence of (weight, density)."""
    comps = list(components)

    def pdf(x: np.ndarray) -> np.ndarray:
        return sum(w * f(x) for w, f in comps)

    return pdf


# -- FR limits --------------------------------------------------------------------


@dataclass(frozen=True)
class DensityPair:
    """Class-0 density ``p_x``, class-1 density ``p_y`` and class-0 share ``u``."""

    p_x: Density
    p_y: Density
    u: float

    def __post_init__(self):
        if not 0.0 < self.u < 1.0:
            raise ValueError(f"u must lie in (0, 1), got {self.u}")

    @property
    def v(self) -> float:
        return 1.0 - self.u


def henze_limit(dp: DensityPair, integrator: Integrator) -> float:
    """Almost-sure limit of R_n / n: 2uv * integral of p_x p_y / (u p_x + v p_y)."""
    u, v = dp.u, dp.v

    def integrand(s: np.ndarray) -> np.ndarray:
        px = dp.p_x(s)
        py = dp.p_y(s)
        den = u * px + v * py
        with np.errstate(invalid="ignore", divide="ignore"):
            out = px * py / den
        return np.where(den > 0, out, 0.0)

    return 2.0 * u * v * integrate(integrand, integrator)


def prop1_limit(posterior0: Density, density: Density, u: float, A_d: float, integrator: Integrator) -> float:
    """Limit of the normalized FR statistic W_n / n for i.i.d. draws from ``density``.

    ``A_d`` is a dimension-dependent constant that must be supplied.
    """
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    uv2 = 2.0 * u * (1.0 - u)

    def integrand(s: np.ndarray) -> np.ndarray:
        p0 = posterior0(s)
        return 2.0 * p0 * (1.0 - p0) * density(s)

    inner = uv2 * (uv2 + (A_d - 1.0) * (1.0 - 4.0 * u * (1.0 - u)))
    if inner <= 0:
        raise ValueError("non-positive variance term; check A_d")
    return (integrate(integrand, integrator) - uv2) / math.sqrt(inner)


# -- divergences and information ------------------------------------------------------


def kl2_divergence(p, q) -> float:
    """E_{X~p}[log^2(q(X)/p(X))] for distributions on a shared finite support."""
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise SupportMismatch("p and q are defined on different supports")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("probabilities must be nonnegative")
    on = p > 0
    if np.any(q[on] == 0):
        raise SupportMismatch("q vanishes where p is positive")
    lr = np.log(q[on] / p[on])
    return math.fsum((p[on] * lr * lr).tolist())


def kl2_divergence_sampled(p_values, q_values) -> float:
    """Monte Carlo KL^2 from p and q evaluated at draws from p."""
    p = np.asarray(p_values, dtype=np.float64)
    q = np.asarray(q_values, dtype=np.float64)
    if p.shape != q.shape:
        raise SupportMismatch("p and q values differ in shape")
    if np.any(p <= 0) or np.any(q <= 0):
        raise SupportMismatch("densities must be positive at the sample points")
    lr = np.log(q / p)
    return float(np.mean(lr * lr))


def joint_table(mass, posterior1, clip_eps: float | None = None) -> np.ndarray:
    """(m, 2) joint p(s, z) from atom masses and P(Z=1 | s)."""
    m = np.asarray(mass, dtype=np.float64)
    p1 = np.asarray(posterior1, dtype=np.float64)
    if m.shape != p1.shape:
        raise ValueError("mass and posterior differ in length")
    if clip_eps is not None:
        p1 = np.clip(p1, clip_eps, 1.0 - clip_eps)
    return np.stack([m * (1.0 - p1), m * p1], axis=1)


def _check_joint(joint) -> np.ndarray:
    j = np.asarray(joint, dtype=np.float64)
    if j.ndim != 2 or j.shape[1] != 2 or j.shape[0] == 0:
        raise DegenerateJoint("joint must have shape (m, 2)")
    if np.any(j < 0) or not np.all(np.isfinite(j)) or abs(j.sum() - 1.0) > 1e-9:
        raise DegenerateJoint("joint must be nonnegative and sum to 1")
    return j


def _pointwise_info(j: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cell masses and log(P(z|s)/P(z)) on cells of positive mass."""
    ps = j.sum(axis=1, keepdims=True)
    pz = j.sum(axis=0, keepdims=True)
    on = j > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        lr = np.log(j / ps / pz)
    return j[on], lr[on]


def info_spectrum_variance(joint) -> float:
    """Variance under p(s, z) of log(P(Z|S) / P(Z))."""
    w, lr = _pointwise_info(_check_joint(joint))
    mean = math.fsum((w * lr).tolist())
    return max(math.fsum((w * (lr - mean) ** 2).tolist()), 0.0)


def mutual_information(joint) -> float:
    """I(S; Z) = H(Z) - H(Z | S) for a discrete joint table."""
    w, lr = _pointwise_info(_check_joint(joint))
    return max(math.fsum((w * lr).tolist()), 0.0)


def _h(p1: np.ndarray) -> np.ndarray:
    p1 = np.asarray(p1, dtype=np.float64)
    out = np.zeros_like(p1)
    for p in (p1, 1.0 - p1):
        on = p > 0
        out[on] -= p[on] * np.log(p[on])
    return out


def mutual_information_continuous(density: Density, posterior1: Density, integrator: Integrator) -> float:
    """I(S; Z) for a feature density and posterior P(Z=1 | s), by numerical integration."""
    prior1 = integrate(lambda s: posterior1(s) * density(s), integrator)
    cond = integrate(lambda s: _h(posterior1(s)) * density(s), integrator)
    return max(float(_h(np.array([prior1]))[0]) - cond, 0.0)


# -- finite-sample power bounds -------------------------------------------------------


@dataclass(frozen=True)
class PowerBoundInputs:
    n_q: int
    alpha: float
    mi: float
    delta: float = 0.0
    eps1: float = 0.0
    eps2: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.n_q < 1:
            raise ValueError("n_q must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        for name in ("mi", "delta", "eps1", "eps2", "sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def power_lower_bounds(inp: PowerBoundInputs) -> tuple[float, float]:
    """Approximate power lower bounds (partition example, uniform baseline)."""
    den2 = inp.eps1 + inp.sigma**2 + 2.0 * inp.sigma * math.sqrt(inp.eps1)
    if not den2 > 0:
        raise ZeroDenominator("eps1 + sigma^2 + 2 sigma sqrt(eps1) must be positive")
    den = math.sqrt(den2)
    root_n = math.sqrt(inp.n_q)
    head = math.log(inp.alpha) / root_n
    se1, se2 = math.sqrt(inp.eps1), math.sqrt(inp.eps2)
    proposed = ndtr((head + root_n * (inp.mi + inp.delta - 2.0 * se1 - se2)) / den)
    baseline = ndtr((head + root_n * (inp.mi - se1)) / den)
    return float(proposed), float(baseline)
