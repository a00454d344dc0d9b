"""Prior functions and compact parameter sets shared by the analysis modules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PriorFn:
    """A strictly positive, continuous (possibly improper) prior density.

    ``log_value`` is vectorized over theta.
    """

    log_value: Callable[[np.ndarray], np.ndarray]
    label: str

    def __call__(self, theta):
        out = self.log_value(np.asarray(theta, dtype=float))
        return float(out) if np.ndim(out) == 0 else out


def _flat(theta):
    return np.zeros_like(np.asarray(theta, dtype=float))


def _reciprocal(theta):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.log(theta)


def flat_prior() -> PriorFn:
    return PriorFn(_flat, "uniform")


def reciprocal_prior() -> PriorFn:
    """pi(theta) = 1/theta."""
    return PriorFn(_reciprocal, "reciprocal")


def beta_bump_prior(a: float = 2.0, b: float = 2.0, lo: float = 0.0, hi: float = 1.0) -> PriorFn:
    """Unnormalized Beta(a, b) shape stretched over (lo, hi); -inf outside."""
    def log_value(theta):
        z = (np.asarray(theta, dtype=float) - lo) / (hi - lo)
        inside = (z > 0) & (z < 1)
        safe = np.where(inside, z, 0.5)
        return np.where(inside, (a - 1) * np.log(safe) + (b - 1) * np.log1p(-safe), -np.inf)
    return PriorFn(log_value, f"beta({a},{b})")


PRIORS = {"uniform": flat_prior, "flat": flat_prior, "reciprocal": reciprocal_prior}


def get_prior(name: str) -> PriorFn:
    try:
        return PRIORS[name]()
    except KeyError:
        raise KeyError(f"unknown prior {name!r}; choose from {sorted(PRIORS)}") from None


@dataclass(frozen=True)
class CompactSet:
    """Closed interval [lo, hi], or the integer range {lo, ..., hi} when discrete."""

    lo: float
    hi: float
    discrete: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError("compact sets need finite endpoints")
        if self.discrete:
            if self.lo != int(self.lo) or self.hi != int(self.hi) or self.hi < self.lo:
                raise DomainError("discrete compact sets are nonempty integer ranges")
        elif not self.lo < self.hi:
            raise DomainError("compact set needs lo < hi")

    def points(self) -> np.ndarray:
        if not self.discrete:
            raise DomainError("points() is only defined for discrete sets")
        return np.arange(int(self.lo), int(self.hi) + 1, dtype=float)

    def contains(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        ok = (th >= self.lo) & (th <= self.hi)
        if self.discrete:
            ok &= th == np.floor(th)
        return ok

    def __contains__(self, theta):
        return bool(self.contains(theta))

    def subset_of(self, other: "CompactSet") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi


def _symmetric(i):
    return CompactSet(-float(i), float(i))


def _log_symmetric(i):
    return CompactSet(math.exp(-i), math.exp(i))


def _discrete(i):
    return CompactSet(1, int(i), discrete=True)


@dataclass(frozen=True)
class CompactSequence:
    """Increasing compact sets Theta_i, indexed by a positive number i."""

    generator: Callable[[float], CompactSet]
    kind: str

    def __call__(self, i) -> CompactSet:
        return self.generator(i)

    def validate(self, indices: Iterable[float], space=None) -> None:
        """Check nesting on a finite prefix and, optionally, containment in
        the parameter space."""
        sets = [self(i) for i in sorted(indices)]
        for a, b in zip(sets, sets[1:]):
            if not a.subset_of(b):
                raise DomainError(f"sequence is not increasing: {a} vs {b}")
        if space is not None:
            for s in sets:
                if not (space.contains(s.lo) and space.contains(s.hi)):
                    raise DomainError(f"{s} is not inside the parameter space")

    @classmethod
    def symmetric(cls):
        return cls(_symmetric, "symmetric")

    @classmethod
    def log_symmetric(cls):
        return cls(_log_symmetric, "log-symmetric")

    @classmethod
    def discrete(cls):
        return cls(_discrete, "discrete")

    @classmethod
    def shifted(cls, lo: float, hi: float):
        """[lo - (i - 1), hi + (i - 1)]: grows a base interval outward."""
        return cls(lambda i: CompactSet(lo - (i - 1), hi + (i - 1)), "custom")

    @classmethod
    def from_kind(cls, kind: str):
        table = {"symmetric": cls.symmetric, "log-symmetric": cls.log_symmetric,
                 "discrete": cls.discrete}
        try:
            return table[kind]()
        except KeyError:
            raise KeyError(f"unknown sequence kind {kind!r}") from None


def sample_prior(prior: PriorFn, region: CompactSet, u: np.ndarray,
                 grid_points: int = 4097) -> np.ndarray:
    """Map uniforms through the inverse cdf of ``prior`` restricted to ``region``.

    Flat and reciprocal priors are inverted exactly; other priors use a
    trapezoid cdf on a dense grid with linear interpolation.
    """
    u = np.asarray(u, dtype=float)
    lo, hi = region.lo, region.hi
    if region.discrete:
        pts = region.points()
        w = np.exp(prior(pts) - np.max(prior(pts)))
        cdf = np.cumsum(w) / w.sum()
        return pts[np.minimum(np.searchsorted(cdf, u, side="right"), pts.size - 1)]
    if prior.log_value is _flat:
        return lo + (hi - lo) * u
    if prior.log_value is _reciprocal and lo > 0:
        return lo * np.exp(u * math.log(hi / lo))
    t = np.linspace(lo, hi, grid_points)
    lv = prior(t)
    w = np.exp(lv - np.max(lv))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(t))])
    cdf /= cdf[-1]
    return np.interp(u, cdf, t)


def log_prior_mass(prior: PriorFn, region: CompactSet, settings=None) -> float:
    """log of the prior mass of ``region`` (sum over points when discrete)."""
    from .numerics import log_integrate
    if region.discrete:
        from scipy.special import logsumexp
        return float(logsumexp(prior(region.points())))
    if prior.log_value is _flat:
        return math.log(region.hi - region.lo)
    if prior.log_value is _reciprocal and region.lo > 0:
        return math.log(math.log(region.hi / region.lo))
    return log_integrate(prior.log_value, region.lo, region.hi, settings)


def as_prior(prior: Optional[PriorFn | str]) -> PriorFn:
    if prior is None:
        return flat_prior()
    if isinstance(prior, str):
        return get_prior(prior)
    return prior
