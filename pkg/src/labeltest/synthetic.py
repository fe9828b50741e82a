"""Synthetic pools with known class-conditional structure."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from labeltest.core import LabelTestError, UnlabeledPool


class BadSpec(LabelTestError, ValueError):
    pass


@dataclass(frozen=True)
class NullIdentical:
    """Both classes N(0, I_d); labels independent of features."""

    d: int = 1


@dataclass(frozen=True)
class TwoGaussians:
    d: int = 1
    mu0: tuple[float, ...] = (0.0,)
    mu1: tuple[float, ...] = (1.0,)
    sigma: float = 1.0


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: tuple[float, ...]
    sigma: float = 1.0


@dataclass(frozen=True)
class GaussianVsMixture:
    """Class 0 is N(mu0, sigma0^2 I); class 1 is a Gaussian mixture."""

    d: int = 2
    components: tuple[MixtureComponent, ...] = ()
    mu0: tuple[float, ...] | None = None
    sigma0: float = 1.0


@dataclass(frozen=True)
class DiscreteAtoms:
    """Features on a finite set of atoms with a given P(Z=1 | atom); ``prior1`` is implied."""

    atoms: tuple[tuple[float, ...], ...]
    mass: tuple[float, ...]
    posterior1: tuple[float, ...]

    @property
    def d(self) -> int:
        return len(self.atoms[0])


DataKind = NullIdentical | TwoGaussians | GaussianVsMixture | DiscreteAtoms


@dataclass(frozen=True)
class SyntheticSpec:
    kind: DataKind = field(default_factory=NullIdentical)
    n: int = 100
    prior1: float = 0.5

    def __post_init__(self):
        if self.n < 10:
            raise BadSpec(f"pool size must be >= 10, got {self.n}")
        if not 0.0 < self.prior1 < 1.0:
            raise BadSpec(f"prior1 must lie in (0, 1), got {self.prior1}")
        k = self.kind
        if k.d < 1:
            raise BadSpec("dimension must be >= 1")
        if isinstance(k, TwoGaussians):
            if len(k.mu0) != k.d or len(k.mu1) != k.d or k.sigma <= 0:
                raise BadSpec("two_gaussians: means must have length d and sigma > 0")
        elif isinstance(k, GaussianVsMixture):
            if not k.components:
                raise BadSpec("gaussian_vs_mixture needs at least one component")
            w = np.array([c.weight for c in k.components])
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
                raise BadSpec("mixture weights must be positive and sum to 1")
            if any(len(c.mean) != k.d or c.sigma <= 0 for c in k.components):
                raise BadSpec("mixture components need length-d means and sigma > 0")
            if k.mu0 is not None and len(k.mu0) != k.d:
                raise BadSpec("mu0 must have length d")
        elif isinstance(k, DiscreteAtoms):
            m = np.asarray(k.mass, dtype=np.float64)
            p = np.asarray(k.posterior1, dtype=np.float64)
            if not (len(k.atoms) == m.size == p.size) or m.size == 0:
                raise BadSpec("atoms, mass and posterior1 must have equal nonzero length")
            if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-9 or np.any((p < 0) | (p > 1)):
                raise BadSpec("invalid atom masses or posteriors")
            if len({len(a) for a in k.atoms}) != 1:
                raise BadSpec("atoms must share one dimension")


def sample(spec: SyntheticSpec, rng: np.random.Generator, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` (default ``spec.n``) i.i.d. feature/label pairs."""
    n = spec.n if n is None else n
    k = spec.kind
    if isinstance(k, DiscreteAtoms):
        atoms = np.asarray(k.atoms, dtype=np.float64)
        which = rng.choice(len(k.atoms), size=n, p=np.asarray(k.mass) / np.sum(k.mass))
        z = (rng.random(n) < np.asarray(k.posterior1)[which]).astype(np.int8)
        return atoms[which], z
    z = (rng.random(n) < spec.prior1).astype(np.int8)
    X = np.empty((n, k.d))
    if isinstance(k, NullIdentical):
        X[:] = rng.standard_normal((n, k.d))
    elif isinstance(k, TwoGaussians):
        mu = np.where(z[:, None] == 1, np.asarray(k.mu1), np.asarray(k.mu0))
        X[:] = mu + k.sigma * rng.standard_normal((n, k.d))
    elif isinstance(k, GaussianVsMixture):
        mu0 = np.zeros(k.d) if k.mu0 is None else np.asarray(k.mu0)
        X[:] = mu0 + k.sigma0 * rng.standard_normal((n, k.d))
        ones = np.flatnonzero(z == 1)
        w = np.asarray([c.weight for c in k.components])
        comp = rng.choice(len(k.components), size=ones.size, p=w / w.sum())
        means = np.asarray([c.mean for c in k.components], dtype=np.float64)
        sig = np.asarray([c.sigma for c in k.components])
        X[ones] = means[comp] + sig[comp, None] * rng.standard_normal((ones.size, k.d))
    else:
        raise BadSpec(f"unknown data kind {k!r}")
    return X, z


def generate(spec: SyntheticSpec, rng: np.random.Generator) -> UnlabeledPool:
    X, z = sample(spec, rng)
    return UnlabeledPool(X, z)
