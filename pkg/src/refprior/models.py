"""One-parameter statistical models and the built-in model zoo.

Every model exposes a vectorized log density, an inverse-cdf sampler driven
by a ``numpy.random.Generator`` and a :class:`Likelihood` builder that turns a
sample into a vectorized function of theta together with the theta-range on
which it is positive.  Exact support boundaries follow the open-interval
convention: the log density is ``-inf`` there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import DomainError, InvariantViolation, UnsupportedOperationError
from .numerics import _Mapping

LOG_2PI = math.log(2.0 * math.pi)
LOG3 = math.log(3.0)
_TWO53 = 2.0 ** 53


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on the open interval (0, 1), 53-bit resolution."""
    return (rng.integers(0, 2 ** 53, size=size, dtype=np.int64) + 0.5) / _TWO53


@dataclass(frozen=True)
class ParameterSpace:
    """Interval (or integer range) of admissible parameter values."""

    lo: float
    hi: float
    open_lo: bool = True
    open_hi: bool = True
    discrete: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("parameter space needs lo < hi")
        if self.discrete and (self.lo < 1 or self.lo != math.floor(self.lo)):
            raise ValueError("discrete parameter spaces start at an integer >= 1")

    def contains(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        above = th > self.lo if self.open_lo else th >= self.lo
        below = th < self.hi if self.open_hi else th <= self.hi
        ok = above & below & np.isfinite(th)
        if self.discrete:
            ok &= th == np.floor(th)
        return ok

    def check(self, theta):
        if not np.all(self.contains(theta)):
            raise DomainError(f"theta={theta!r} outside parameter space "
                              f"({self.lo}, {self.hi})")

    @property
    def positive(self) -> bool:
        return self.lo >= 0.0


@dataclass
class Likelihood:
    """Log likelihood of a fixed sample as a vectorized function of theta.

    ``lo`` and ``hi`` bound the theta-range where the likelihood can be
    positive; ``peak`` and ``width`` (when known) locate its bulk so that
    quadrature panels can be placed around it.  For discrete parameter spaces
    ``points`` lists the parameter values with positive likelihood.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float
    peak: Optional[float] = None
    width: Optional[float] = None
    points: Optional[np.ndarray] = None

    def __call__(self, theta):
        out = self.fn(np.asarray(theta, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def restrict(self, lo: float, hi: float) -> tuple[float, float]:
        return max(lo, self.lo), min(hi, self.hi)

    def breakpoints(self, lo: float | None = None, hi: float | None = None,
                    extra: Callable | None = None) -> list[float]:
        """Panel breakpoints around the likelihood bulk inside (lo, hi).

        When the peak is unknown it is located on a 257-point scan, in mapped
        coordinates for infinite ranges.  ``extra`` is an optional additive
        log term (a prior) included in the scan.
        """
        lo = self.lo if lo is None else max(lo, self.lo)
        hi = self.hi if hi is None else min(hi, self.hi)
        if not lo < hi:
            return []
        if self.peak is not None and self.width is not None and self.width > 0:
            c, w = self.peak, self.width
            pts = [c] + [c + s * m * w for m in (1.0, 3.0, 8.0, 20.0) for s in (-1, 1)]
            return sorted(p for p in pts if lo < p < hi)
        mapping = _Mapping(lo, hi)
        u = np.linspace(mapping.u_lo, mapping.u_hi, 259)[1:-1]
        t, _ = mapping.forward(u)
        vals = np.asarray(self.fn(t), dtype=float)
        if extra is not None:
            vals = vals + extra(t)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        if not np.isfinite(vals.max()):
            return []
        j = int(np.argmax(vals))
        idx = range(max(j - 3, 0), min(j + 4, t.size))
        return [float(t[i]) for i in idx if lo < t[i] < hi]


@dataclass(frozen=True)
class SufficientStat:
    """Low-dimensional reduction of a k-sample with an exact density.

    ``from_uniform(q, theta, k)`` maps a point of the unit cube (``dim``
    coordinates) to a statistic value by successive conditional inverse cdfs,
    which serves both direct simulation and deterministic quadrature over
    the statistic's distribution.
    """

    reduce: Callable[[np.ndarray], np.ndarray]
    stat_logpdf: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    from_uniform: Callable[[np.ndarray, float, int], np.ndarray]
    likelihood: Callable[[np.ndarray, int], Likelihood]
    dim: int
    # optional exact map from iid Exp(1) coordinates, used by f_k quadrature
    from_exponential: Optional[Callable[[np.ndarray, float, int], np.ndarray]] = None


class Model:
    """Base class for one-parameter models p(x | theta).

    Subclasses implement ``_logpdf`` (vectorized, broadcasting over ``x`` and
    ``theta``, no argument checking), ``obs_support`` and ``_draw``.
    """

    name = "model"
    param_space = ParameterSpace(-math.inf, math.inf)
    discrete_obs = False
    family: Optional[str] = None          # "location", "scale" or None
    # how the support S(theta) moves under set inclusion as theta grows:
    # fixed | increasing (nested growing) | decreasing (nested shrinking) | both
    support_motion = "fixed"
    suffstat: Optional[SufficientStat] = None
    obs_dim = 1                            # components per observation

    # -- density -----------------------------------------------------------
    def _logpdf(self, x, theta):
        raise NotImplementedError

    def logpdf(self, x, theta):
        """Log density; ``-inf`` off the support, never NaN."""
        self.param_space.check(theta)
        out = np.asarray(self._logpdf(np.asarray(x, dtype=float),
                                      np.asarray(theta, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def obs_support(self, theta) -> tuple[float, float]:
        raise NotImplementedError

    def obs_breakpoints(self, theta) -> tuple:
        """Interior points where the density has a kink."""
        return ()

    def loglik_product(self, sample, theta) -> float:
        """Sum of log densities of the sample at ``theta``."""
        self.param_space.check(theta)
        x = np.asarray(sample, dtype=float)
        if x.size == 0:
            raise ValueError("sample must be nonempty")
        terms = self._logpdf(x, float(theta))
        if np.any(np.isneginf(terms)):
            return -math.inf
        return float(math.fsum(np.ravel(terms)))

    # -- simulation --------------------------------------------------------
    def _draw(self, theta: float, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def uniforms_per_draw(self) -> int:
        return 1

    def sample(self, theta, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` independent draws at ``theta``, deterministic given ``rng``."""
        self.param_space.check(theta)
        if n < 1:
            raise ValueError("n must be >= 1")
        d = self.uniforms_per_draw()
        u = open_uniform(rng, n * d)
        if d > 1:
            u = u.reshape(n, d)
        return self._draw(float(theta), u)

    # -- likelihood --------------------------------------------------------
    def theta_range(self, sample: np.ndarray) -> tuple[float, float]:
        """Theta-interval where the sample has positive likelihood."""
        return self.param_space.lo, self.param_space.hi

    def likelihood(self, sample) -> Likelihood:
        """Vectorized log likelihood of ``sample`` (generic summation)."""
        x = np.asarray(sample, dtype=float).reshape(-1)
        lo, hi = self.theta_range(x)

        def fn(theta):
            th = np.asarray(theta, dtype=float)
            flat = th.reshape(-1)
            total = np.zeros(flat.shape)
            for start in range(0, x.size, 512):
                chunk = x[start:start + 512]
                total += self._logpdf(chunk[:, None], flat[None, :]).sum(axis=0)
            total[~self.param_space.contains(flat)] = -np.inf
            return total.reshape(th.shape)

        return Likelihood(fn, lo, hi)

    def cdf(self, x, theta):
        raise UnsupportedOperationError(f"{self.name} has no closed-form cdf")

    def __repr__(self):
        return f"{type(self).__name__}()"


# ---------------------------------------------------------------------------
# location and scale families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseDensity:
    """Standardized density f on (lo, hi) used by location and scale models."""

    name: str
    logf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    ppf: Callable[[np.ndarray], np.ndarray]
    lo: float = -math.inf
    hi: float = math.inf
    sf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # optional cancellation-free P(a < T < b)
    mass_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def log_density(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > self.lo) & (t < self.hi)
        safe = np.where(inside, t, self._interior_point())
        return np.where(inside, self.logf(safe), -np.inf)

    def _interior_point(self) -> float:
        lo_fin, hi_fin = math.isfinite(self.lo), math.isfinite(self.hi)
        if lo_fin and hi_fin:
            return 0.5 * (self.lo + self.hi)
        if lo_fin:
            return self.lo + 1.0
        if hi_fin:
            return self.hi - 1.0
        return 0.0

    def mass(self, a, b):
        """P(a < T < b), using the survival function in the upper tail."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.mass_fn is not None:
            return self.mass_fn(a, b)
        if self.sf is None:
            return self.cdf(b) - self.cdf(a)
        upper = self.sf(a) - self.sf(b)
        lower = self.cdf(b) - self.cdf(a)
        return np.where(a > 0, upper, lower)


def _normal_base():
    return BaseDensity(
        "normal",
        logf=lambda t: -0.5 * t * t - 0.5 * LOG_2PI,
        cdf=special.ndtr,
        ppf=special.ndtri,
        sf=lambda t: special.ndtr(-t),
    )


def _expshift_base():
    return BaseDensity(
        "exponential",
        logf=lambda t: -t,
        cdf=lambda t: -np.expm1(-np.maximum(t, 0.0)),
        ppf=lambda u: -np.log1p(-u),
        lo=0.0,
        sf=lambda t: np.exp(-np.maximum(t, 0.0)),
    )


def _logtail_logf(t):
    lt = np.log(t)
    return -lt - 2.0 * np.log(lt)


def _logtail_cdf(t):
    t = np.asarray(t, dtype=float)
    return np.where(t > math.e, 1.0 - 1.0 / np.log(np.maximum(t, math.e)), 0.0)


def _logtail_sf(t):
    t = np.asarray(t, dtype=float)
    return np.where(t > math.e, 1.0 / np.log(np.maximum(t, math.e)), 1.0)


def _logtail_ppf(u):
    with np.errstate(over="ignore"):
        return np.exp(1.0 / (1.0 - np.asarray(u, dtype=float)))


def _logtail_mass(a, b):
    # 1/log(a) - 1/log(b) = log(b/a) / (log(a) log(b)), free of cancellation
    a = np.maximum(np.asarray(a, dtype=float), math.e)
    b = np.asarray(b, dtype=float)
    ok = b > a
    bb = np.where(ok, b, a + 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.log1p((bb - a) / a) / (np.log(a) * np.log(bb))
    return np.where(ok, val, 0.0)


def _logtail_base():
    return BaseDensity("logtail", logf=_logtail_logf, cdf=_logtail_cdf,
                       ppf=_logtail_ppf, lo=math.e, sf=_logtail_sf, mass_fn=_logtail_mass)


def _gumbel_min_base():
    # density of log(E) for E ~ Exp(1)
    return BaseDensity(
        "log-exponential",
        logf=lambda t: t - np.exp(t),
        cdf=lambda t: -np.expm1(-np.exp(t)),
        ppf=lambda u: np.log(-np.log1p(-u)),
        sf=lambda t: np.exp(-np.exp(t)),
    )


class LocationModel(Model):
    """p(x | theta) = f(x - theta) on the whole real line of theta."""

    family = "location"
    param_space = ParameterSpace(-math.inf, math.inf)

    def __init__(self, name: str, base: BaseDensity):
        self.name = name
        self.base = base

    def _logpdf(self, x, theta):
        return self.base.log_density(x - theta)

    def obs_support(self, theta):
        return theta + self.base.lo, theta + self.base.hi

    def _draw(self, theta, u):
        return theta + self.base.ppf(u)

    def cdf(self, x, theta):
        return self.base.cdf(np.asarray(x, dtype=float) - theta)

    def theta_range(self, sample):
        return float(sample.max() - self.base.hi), float(sample.min() - self.base.lo)

    def __repr__(self):
        return f"LocationModel({self.name!r})"


class NormalLocation(LocationModel):
    """N(x | theta, 1)."""

    def __init__(self):
        super().__init__("normal-location", _normal_base())
        self.suffstat = SufficientStat(
            reduce=lambda x: np.array([np.mean(x)]),
            stat_logpdf=self._stat_logpdf,
            from_uniform=lambda q, theta, k: np.array(
                [theta + special.ndtri(q[0]) / math.sqrt(k)]),
            likelihood=self._stat_likelihood,
            dim=1,
        )

    def likelihood(self, sample):
        x = np.asarray(sample, dtype=float).reshape(-1)
        n = x.size
        xbar = float(np.mean(x))
        ss = float(np.sum((x - xbar) ** 2))
        const = -0.5 * ss - 0.5 * n * LOG_2PI

        def fn(theta):
            d = theta - xbar
            return const - 0.5 * n * d * d

        return Likelihood(fn, -math.inf, math.inf, peak=xbar, width=1 / math.sqrt(n))

    @staticmethod
    def _stat_logpdf(t, theta, k):
        d = np.asarray(t, dtype=float)[0] - np.asarray(theta, dtype=float)
        return 0.5 * math.log(k) - 0.5 * LOG_2PI - 0.5 * k * d * d

    def _stat_likelihood(self, t, k):
        t = np.asarray(t, dtype=float)
        return Likelihood(lambda theta: self._stat_logpdf(t, theta, k),
                          -math.inf, math.inf, peak=float(t[0]), width=1 / math.sqrt(k))


class ExpShiftLocation(LocationModel):
    """Shifted exponential, density exp(-(x - theta)) for x > theta."""

    def __init__(self):
        super().__init__("expshift-location", _expshift_base())
        self.support_motion = "decreasing"
        self.suffstat = SufficientStat(
            reduce=lambda x: np.array([np.min(x)]),
            stat_logpdf=self._stat_logpdf,
            from_uniform=lambda q, theta, k: np.array([theta - math.log1p(-q[0]) / k]),
            likelihood=self._stat_likelihood,
            dim=1,
        )

    def likelihood(self, sample):
        x = np.asarray(sample, dtype=float).reshape(-1)
        n, s, xmin = x.size, float(np.sum(x)), float(x.min())

        def fn(theta):
            return np.where(theta < xmin, n * theta - s, -np.inf)

        return Likelihood(fn, -math.inf, xmin, peak=xmin, width=1.0 / n)

    @staticmethod
    def _stat_logpdf(t, theta, k):
        d = np.asarray(t, dtype=float)[0] - np.asarray(theta, dtype=float)
        return np.where(d > 0, math.log(k) - k * d, -np.inf)

    def _stat_likelihood(self, t, k):
        t = np.asarray(t, dtype=float)
        return Likelihood(lambda theta: self._stat_logpdf(t, theta, k),
                          -math.inf, float(t[0]), peak=float(t[0]), width=1.0 / k)


class LogTailLocation(LocationModel):
    """Location family with the heavy-tailed f(t) = 1 / (t log(t)^2), t > e.

    Draws beyond the double range overflow to ``+inf`` (probability about
    1/709 per draw, from the 1/log tail of the distribution).
    """

    def __init__(self):
        super().__init__("logtail-location", _logtail_base())
        self.support_motion = "decreasing"


class LogExpLocation(LocationModel):
    """Log of exponential data: y = log x with x ~ Exp(scale e^phi).

    Used to check consistency of scale and location constructions under the
    reparametrization phi = log theta.
    """

    def __init__(self):
        super().__init__("logexp-location", _gumbel_min_base())

    def likelihood(self, sample):
        y = np.asarray(sample, dtype=float).reshape(-1)
        n = y.size
        sy = float(np.sum(y))
        ls = float(special.logsumexp(y))
        peak = ls - math.log(n)

        def fn(phi):
            return sy - n * phi - np.exp(ls - phi)

        return Likelihood(fn, -math.inf, math.inf, peak=peak, width=1 / math.sqrt(n))


class ScaleModel(Model):
    """p(x | theta) = f(x / theta) / theta on theta > 0."""

    family = "scale"
    param_space = ParameterSpace(0.0, math.inf)

    def __init__(self, name: str, base: BaseDensity):
        self.name = name
        self.base = base

    def _logpdf(self, x, theta):
        return self.base.log_density(x / theta) - np.log(theta)

    def obs_support(self, theta):
        return theta * self.base.lo, theta * self.base.hi

    def _draw(self, theta, u):
        return theta * self.base.ppf(u)

    def cdf(self, x, theta):
        return self.base.cdf(np.asarray(x, dtype=float) / theta)

    def theta_range(self, sample):
        hi = math.inf if self.base.lo <= 0 else float(sample.min() / self.base.lo)
        return float(sample.max() / self.base.hi), hi


class ExponentialScale(ScaleModel):
    """(1/theta) exp(-x/theta) for x > 0."""

    def __init__(self):
        super().__init__("exponential-scale", _expshift_base())
        self.suffstat = SufficientStat(
            reduce=lambda x: np.array([np.sum(x)]),
            stat_logpdf=self._stat_logpdf,
            from_uniform=lambda q, theta, k: np.array([theta * special.gammaincinv(k, q[0])]),
            likelihood=self._stat_likelihood,
            dim=1,
        )

    def likelihood(self, sample):
        x = np.asarray(sample, dtype=float).reshape(-1)
        n, s = x.size, float(np.sum(x))

        def fn(theta):
            th = np.asarray(theta, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = -n * np.log(th) - s / th
            return np.where(th > 0, out, -np.inf)

        return Likelihood(fn, 0.0, math.inf, peak=s / n, width=s / n / math.sqrt(n))

    @staticmethod
    def _stat_logpdf(t, theta, k):
        s = np.asarray(t, dtype=float)[0]
        th = np.asarray(theta, dtype=float)
        return (k - 1) * math.log(s) - s / th - k * np.log(th) - special.gammaln(k)

    def _stat_likelihood(self, t, k):
        s = float(np.asarray(t)[0])
        return Likelihood(lambda theta: self._stat_logpdf(np.array([s]), theta, k),
                          0.0, math.inf, peak=s / k, width=s / k / math.sqrt(k))


class UniformScale(ScaleModel):
    """Un(x | 0, theta)."""

    support_motion = "increasing"

    def __init__(self):
        base = BaseDensity(
            "uniform",
            logf=lambda t: np.zeros_like(t),
            cdf=lambda t: np.clip(t, 0.0, 1.0),
            ppf=lambda u: u,
            lo=0.0,
            hi=1.0,
        )
        super().__init__("uniform-scale", base)
        self.suffstat = SufficientStat(
            reduce=lambda x: np.array([np.max(x)]),
            stat_logpdf=self._stat_logpdf,
            from_uniform=lambda q, theta, k: np.array([theta * q[0] ** (1.0 / k)]),
            likelihood=self._stat_likelihood,
            dim=1,
        )

    def likelihood(self, sample):
        x = np.asarray(sample, dtype=float).reshape(-1)
        n, xmax = x.size, float(x.max())

        def fn(theta):
            th = np.asarray(theta, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(th > xmax, -n * np.log(th), -np.inf)

        return Likelihood(fn, xmax, math.inf, peak=xmax, width=xmax / n)

    @staticmethod
    def _stat_logpdf(t, theta, k):
        m = np.asarray(t, dtype=float)[0]
        th = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = math.log(k) + (k - 1) * math.log(m) - k * np.log(th)
        return np.where(th > m, out, -np.inf)

    def _stat_likelihood(self, t, k):
        m = float(np.asarray(t)[0])
        return Likelihood(lambda theta: self._stat_logpdf(np.array([m]), theta, k),
                          m, math.inf, peak=m, width=m / k)


# ---------------------------------------------------------------------------
# uniform distribution with two moving endpoints
# ---------------------------------------------------------------------------

def _identity(t):
    return t


def _square(t):
    return t * t


def _one(t):
    return np.ones_like(np.asarray(t, dtype=float))


def _double(t):
    return 2.0 * np.asarray(t, dtype=float)


def _sqrt(t):
    return np.sqrt(t)


@dataclass(frozen=True)
class UniformPairSpec:
    """Endpoints a1(theta) < a2(theta) of Un(a1(theta), a2(theta)).

    Both endpoints must be increasing with 0 < a1' < a2'.  ``inv_a1`` and
    ``inv_a2`` are optional inverses; when omitted they are found by root
    bracketing above ``theta_floor``.
    """

    a1: Callable = _identity
    a2: Callable = _square
    d_a1: Callable = _one
    d_a2: Callable = _double
    theta_floor: float = 1.0
    inv_a1: Optional[Callable] = _identity
    inv_a2: Optional[Callable] = _sqrt
    theta_ceiling: float = math.inf

    def b(self, theta):
        """The pair (b1, b2) with b_j = (a2' - a1') / a_j'."""
        d1, d2 = float(self.d_a1(theta)), float(self.d_a2(theta))
        diff = d2 - d1
        return diff / d1, diff / d2

    def check(self, theta):
        theta = float(theta)
        if not theta > self.theta_floor:
            raise DomainError(f"theta={theta} must exceed theta_floor={self.theta_floor}")
        a1, a2 = float(self.a1(theta)), float(self.a2(theta))
        d1, d2 = float(self.d_a1(theta)), float(self.d_a2(theta))
        if not (0 < a1 < a2 and 0 < d1 < d2):
            raise DomainError(f"uniform-pair conditions fail at theta={theta}: "
                              f"a=({a1}, {a2}), a'=({d1}, {d2})")

    def invert(self, which: int, value: float) -> float:
        fn = self.inv_a1 if which == 1 else self.inv_a2
        if fn is not None:
            return float(fn(value))
        a = self.a1 if which == 1 else self.a2
        from scipy.optimize import brentq
        lo = self.theta_floor
        if a(lo) >= value:
            return lo
        hi = lo + 1.0
        while a(hi) < value:
            hi = lo + 2.0 * (hi - lo)
            if hi > 1e300:
                return math.inf
        return float(brentq(lambda th: a(th) - value, lo, hi, xtol=1e-15, rtol=4e-16))


class UniformPair(Model):
    """Un(x | a1(theta), a2(theta)) with increasing endpoints.

    The default endpoints (theta, theta^2) on theta > 1 give the model whose
    reference prior has the closed digamma form.
    """

    support_motion = "both"

    def __init__(self, spec: UniformPairSpec | None = None, name: str = "uniform-pair"):
        self.spec = spec or UniformPairSpec()
        self.name = name
        self.param_space = ParameterSpace(self.spec.theta_floor, self.spec.theta_ceiling)
        self.suffstat = SufficientStat(
            reduce=lambda x: np.array([np.min(x), np.max(x)]),
            stat_logpdf=self._stat_logpdf,
            from_uniform=self._stat_from_uniform,
            likelihood=self._stat_likelihood,
            dim=2,
            from_exponential=self._stat_from_exponential,
        )

    def _width(self, theta):
        return self.spec.a2(theta) - self.spec.a1(theta)

    def _logpdf(self, x, theta):
        a1, a2 = self.spec.a1(theta), self.spec.a2(theta)
        inside = (x > a1) & (x < a2)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -np.log(a2 - a1)
        return np.where(inside, val, -np.inf)

    def obs_support(self, theta):
        return float(self.spec.a1(theta)), float(self.spec.a2(theta))

    def _draw(self, theta, u):
        a1, a2 = self.obs_support(theta)
        return a1 + (a2 - a1) * u

    def cdf(self, x, theta):
        a1, a2 = self.obs_support(theta)
        return np.clip((np.asarray(x, dtype=float) - a1) / (a2 - a1), 0.0, 1.0)

    def theta_range(self, sample):
        t1, t2 = float(np.min(sample)), float(np.max(sample))
        return self._theta_range_stat(t1, t2)

    def _theta_range_stat(self, t1, t2):
        lo = max(self.spec.invert(2, t2), self.spec.theta_floor)
        hi = min(self.spec.invert(1, t1), self.spec.theta_ceiling)
        return lo, hi

    def _range_likelihood(self, t1, t2, const, k):
        lo, hi = self._theta_range_stat(t1, t2)

        def fn(theta):
            th = np.asarray(theta, dtype=float)
            inside = (th > lo) & (th < hi)
            safe = np.where(inside, th, 0.5 * (lo + hi) if hi > lo else lo)
            val = const - k * np.log(self._width(safe))
            return np.where(inside, val, -np.inf)

        width = (hi - lo) / k if math.isfinite(hi) else None
        return Likelihood(fn, lo, hi, peak=lo, width=width)

    def likelihood(self, sample):
        x = np.asarray(sample, dtype=float).reshape(-1)
        return self._range_likelihood(float(x.min()), float(x.max()), 0.0, x.size)

    def _stat_logpdf(self, t, theta, k):
        t1, t2 = float(t[0]), float(t[1])
        th = np.asarray(theta, dtype=float)
        a1, a2 = self.spec.a1(th), self.spec.a2(th)
        inside = (a1 < t1) & (t1 < t2) & (t2 < a2)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (math.log(k * (k - 1)) + (k - 2) * math.log(t2 - t1)
                   - k * np.log(a2 - a1))
        return np.where(inside, val, -np.inf)

    def _stat_likelihood(self, t, k):
        t1, t2 = float(t[0]), float(t[1])
        const = math.log(k * (k - 1)) + (k - 2) * math.log(t2 - t1)
        return self._range_likelihood(t1, t2, const, k)

    def _stat_from_uniform(self, q, theta, k):
        """(min, max) of k uniforms by conditional inversion.

        U_min = 1 - (1 - q1)^(1/k); given U_min, the maximum of the remaining
        k - 1 points uniform on (U_min, 1) is U_min + (1 - U_min) q2^(1/(k-1)).
        """
        if k < 2:
            raise DomainError("the (min, max) statistic needs k >= 2")
        a1, a2 = self.obs_support(theta)
        u_min = -math.expm1(math.log1p(-q[0]) / k)
        u_max = u_min + (1.0 - u_min) * math.exp(math.log(q[1]) / (k - 1))
        return np.array([a1 + (a2 - a1) * u_min, a1 + (a2 - a1) * u_max])

    def _stat_from_exponential(self, v, theta, k):
        """Same construction with q1 = 1 - exp(-v1) and q2 = exp(-v2)."""
        if k < 2:
            raise DomainError("the (min, max) statistic needs k >= 2")
        a1, a2 = self.obs_support(theta)
        u_min = -math.expm1(-v[0] / k)
        u_max = u_min + (1.0 - u_min) * math.exp(-v[1] / (k - 1))
        return np.array([a1 + (a2 - a1) * u_min, a1 + (a2 - a1) * u_max])

    def __repr__(self):
        return f"UniformPair({self.name!r})"


# ---------------------------------------------------------------------------
# triangular model
# ---------------------------------------------------------------------------

class Triangular(Model):
    """Triangular density on (0, 1) with mode theta.

    p(x | theta) = 2x/theta on (0, theta], 2(1-x)/(1-theta) on (theta, 1).
    """

    name = "triangular"
    param_space = ParameterSpace(0.0, 1.0)

    def _logpdf(self, x, theta):
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        x, theta = np.broadcast_arrays(x, theta)
        out = np.full(x.shape, -np.inf)
        left = (x > 0) & (x <= theta)
        right = (x > theta) & (x < 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(left, np.log(2 * x) - np.log(theta), out)
            out = np.where(right, np.log(2 * (1 - x)) - np.log1p(-theta), out)
        return out

    def obs_support(self, theta):
        return 0.0, 1.0

    def obs_breakpoints(self, theta):
        return (float(theta),)

    def _draw(self, theta, u):
        left = u <= theta
        out = np.empty_like(u)
        out[left] = np.sqrt(u[left] * theta)
        out[~left] = 1.0 - np.sqrt((1.0 - u[~left]) * (1.0 - theta))
        return out

    def cdf(self, x, theta):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return np.where(x <= theta, x * x / theta, 1.0 - (1.0 - x) ** 2 / (1.0 - theta))

    def likelihood(self, sample):
        """Log likelihood via prefix sums over the sorted sample.

        For theta between order statistics, points at or below theta use the
        left branch and the rest the right branch, so one ``searchsorted``
        per node replaces a pass over the sample.  The log likelihood has a
        derivative jump at every order statistic; with k in the thousands
        these are left to adaptive refinement rather than passed as
        breakpoints.
        """
        x = np.sort(np.asarray(sample, dtype=float).reshape(-1))
        n = x.size
        left_cum = np.concatenate([[0.0], np.cumsum(np.log(2 * x))])
        right_cum = np.concatenate([[0.0], np.cumsum(np.log(2 * (1 - x))[::-1])])[::-1]
        from .reference import triangular_root_estimator

        def fn(theta):
            th = np.asarray(theta, dtype=float)
            j = np.searchsorted(x, th, side="right")       # points <= theta
            inside = (th > 0) & (th < 1)
            safe = np.where(inside, th, 0.5)
            val = (left_cum[j] - j * np.log(safe)
                   + right_cum[j] - (n - j) * np.log1p(-safe))
            return np.where(inside, val, -np.inf)

        peak = triangular_root_estimator(x)
        width = max(math.sqrt(peak * (1 - peak) / n), 1.0 / n)
        return Likelihood(fn, 0.0, 1.0, peak=peak, width=width)


# ---------------------------------------------------------------------------
# normal mixture with an improper-posterior flat prior
# ---------------------------------------------------------------------------

class NormalMixture(Model):
    """Equal mixture of N(x | theta, 1) and N(x | 0, 1)."""

    name = "normal-mixture"
    param_space = ParameterSpace(-math.inf, math.inf)

    def _logpdf(self, x, theta):
        return (np.logaddexp(-0.5 * (x - theta) ** 2, -0.5 * x * x)
                - math.log(2.0) - 0.5 * LOG_2PI)

    def obs_support(self, theta):
        return -math.inf, math.inf

    def uniforms_per_draw(self):
        return 2

    def _draw(self, theta, u):
        shift = np.where(u[:, 0] < 0.5, theta, 0.0)
        return shift + special.ndtri(u[:, 1])

    def cdf(self, x, theta):
        x = np.asarray(x, dtype=float)
        return 0.5 * (special.ndtr(x - theta) + special.ndtr(x))


# ---------------------------------------------------------------------------
# discrete model with three equiprobable outcomes
# ---------------------------------------------------------------------------

def fmn_points(theta) -> np.ndarray:
    """Outcomes {floor(theta/2), 2 theta, 2 theta + 1}, with the first set to 1 at theta = 1."""
    th = np.asarray(theta, dtype=np.int64)
    low = np.maximum(th // 2, 1)
    return np.stack([low, 2 * th, 2 * th + 1], axis=-1)


def fmn_preimages(x: int) -> list[int]:
    """Parameter values that can produce the observation ``x``."""
    x = int(x)
    if x < 1:
        return []
    if x == 1:
        return [1, 2, 3]
    out = [2 * x, 2 * x + 1]
    if x % 2 == 0:
        out.append(x // 2)
    elif x >= 3:
        out.append((x - 1) // 2)
    return sorted(set(out))


class FMNDiscrete(Model):
    """Three equally likely outcomes floor(theta/2), 2 theta, 2 theta + 1.

    theta ranges over the positive integers; the low outcome for theta = 1 is
    defined as 1.
    """

    name = "fmn-discrete"
    param_space = ParameterSpace(1, math.inf, open_lo=False, discrete=True)
    discrete_obs = True

    def _logpdf(self, x, theta):
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        x, theta = np.broadcast_arrays(x, theta)
        th = theta.astype(np.int64)
        hit = (x == np.maximum(th // 2, 1)) | (x == 2 * th) | (x == 2 * th + 1)
        return np.where(hit, -LOG3, -np.inf)

    def obs_support(self, theta):
        pts = fmn_points(theta)
        return float(pts.min()), float(pts.max())

    def support_points(self, theta) -> np.ndarray:
        return fmn_points(theta)

    def sample(self, theta, rng, n):
        self.param_space.check(theta)
        pick = rng.integers(0, 3, size=n)
        return fmn_points(int(theta))[pick].astype(float)

    def candidates(self, sample) -> np.ndarray:
        xs = np.unique(np.asarray(sample, dtype=np.int64))
        common = set(fmn_preimages(xs[0]))
        for x in xs[1:]:
            common &= set(fmn_preimages(x))
        return np.array(sorted(common), dtype=float)

    def likelihood(self, sample):
        x = np.asarray(sample, dtype=float).reshape(-1)
        pts = self.candidates(x)
        n = x.size

        def fn(theta):
            th = np.asarray(theta, dtype=float)
            hit = np.isin(th, pts)
            return np.where(hit, -n * LOG3, -np.inf)

        lo = float(pts.min()) if pts.size else math.inf
        hi = float(pts.max()) if pts.size else -math.inf
        return Likelihood(fn, lo, hi, points=pts)


# ---------------------------------------------------------------------------
# iid replication
# ---------------------------------------------------------------------------

class IIDVector(Model):
    """Model whose single observation is an iid vector of ``n`` base draws."""

    def __init__(self, base: Model, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.base = base
        self.n = n
        self.name = f"{base.name}^{n}"
        self.param_space = base.param_space
        self.family = base.family
        self.support_motion = base.support_motion
        self.discrete_obs = base.discrete_obs
        self.obs_dim = n * base.obs_dim

    def _logpdf(self, x, theta):
        x = np.asarray(x, dtype=float)
        return np.sum(self.base._logpdf(x, np.asarray(theta)[..., None]), axis=-1)

    def logpdf(self, x, theta):
        self.param_space.check(theta)
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"observation must have {self.n} components")
        out = np.sum(self.base._logpdf(x, float(theta)), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def obs_support(self, theta):
        return self.base.obs_support(theta)

    def loglik_product(self, sample, theta):
        return self.base.loglik_product(np.asarray(sample).reshape(-1), theta)

    def sample(self, theta, rng, n):
        draws = self.base.sample(theta, rng, n * self.n)
        return draws.reshape(n, self.n)

    def likelihood(self, sample):
        return self.base.likelihood(np.asarray(sample).reshape(-1))

    def theta_range(self, sample):
        return self.base.theta_range(np.asarray(sample).reshape(-1))

    def __repr__(self):
        return f"IIDVector({self.base!r}, {self.n})"


def iid_replicate(model: Model, n: int) -> IIDVector:
    return IIDVector(model, n)


# ---------------------------------------------------------------------------
# registry and module-level operations
# ---------------------------------------------------------------------------

BUILTINS: dict[str, Callable[[], Model]] = {
    "normal-location": NormalLocation,
    "expshift-location": ExpShiftLocation,
    "logtail-location": LogTailLocation,
    "logexp-location": LogExpLocation,
    "exponential-scale": ExponentialScale,
    "uniform-scale": UniformScale,
    "uniform-pair": UniformPair,
    "triangular": Triangular,
    "normal-mixture": NormalMixture,
    "fmn-discrete": FMNDiscrete,
}


def get_model(name: str, **params) -> Model:
    """Instantiate a built-in model by name."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)


def logpdf(model: Model, x, theta):
    return model.logpdf(x, theta)


def loglik_product(model: Model, sample, theta) -> float:
    return model.loglik_product(sample, theta)


def sample(model: Model, theta, rng: np.random.Generator, n: int) -> np.ndarray:
    return model.sample(theta, rng, n)


@dataclass(frozen=True)
class ReducedSample:
    """A sufficient statistic together with its sample size."""

    model: Model
    t: np.ndarray
    k: int

    def logpdf(self, theta):
        out = self.model.suffstat.stat_logpdf(self.t, np.asarray(theta, dtype=float), self.k)
        return float(out) if np.ndim(out) == 0 else out


def sufficient_stat(model: Model, sample) -> ReducedSample:
    """Reduce a sample; raises for models without a sufficient statistic."""
    if model.suffstat is None:
        raise UnsupportedOperationError(f"{model.name} declares no sufficient statistic")
    x = np.asarray(sample, dtype=float).reshape(-1)
    return ReducedSample(model, model.suffstat.reduce(x), x.size)


def check_likelihood(like: Likelihood, theta: float):
    """Guard used by the Monte Carlo engine: data simulated at theta must
    have positive likelihood there."""
    val = like(theta)
    if not np.isfinite(val):
        raise InvariantViolation(f"likelihood vanishes at the simulating theta={theta}")
    return val
