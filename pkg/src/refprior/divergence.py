"""Logarithmic divergence, formal posteriors and permissibility diagnostics.

The expected logarithmic discrepancy between the formal posterior and the
posteriors obtained by truncating the prior to compact sets is computed
with the identity

    kappa{pi(.|x) | pi_i(.|x)} = log Z(x) - log Z_i(x),

where Z and Z_i are the posterior normalizers over the full parameter space
and over Theta_i.  Averaging over the truncated marginal p_i(x) then needs
one or two one-dimensional integrals per data value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import (DomainError, ImproperPosteriorError, InvariantViolation,
                     QuadratureError, UnsupportedOperationError)
from .models import BaseDensity, IIDVector, LocationModel, Model, ScaleModel
from .numerics import QuadratureSettings, integrate, log_integrate
from .priors import (CompactSequence, CompactSet, PriorFn, _flat, as_prior,
                     log_prior_mass, sample_prior)
from .streams import substream

__all__ = [
    "CompactSequence", "CompactSet", "PriorFn", "DiscrepancyEstimate", "Posterior",
    "ProprietyCheck", "TailCheck", "Verdict", "kl_divergence", "posterior_logpdf",
    "truncation_kl_identity", "expected_discrepancy", "fmn_discrepancy_exact",
    "tail_condition_check", "log_transform_base", "propriety_check",
    "discrepancy_monotonicity", "permissibility_verdict", "closed_form_location_discrepancy",
]

KL_BUDGET = 50.0
CLIP_TOL = 1e-8
DISCREPANCY_SETTINGS = QuadratureSettings(rel_tol=1e-9, abs_tol=1e-12)
# inner normalizers are computed more tightly than the outer average
_INNER_SETTINGS = QuadratureSettings(rel_tol=1e-11, abs_tol_log=1e-13)


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscrepancyEstimate:
    """Expected logarithmic discrepancy in nats.

    ``verdict`` describes the defining integral itself: ``converging`` when it
    is finite and stable, ``diverging`` when it exceeds the budget or keeps
    growing with the integration cutoff, ``undetermined`` otherwise.
    """

    value: float
    stderr: float = 0.0
    verdict: str = "converging"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.value >= 0:
            raise InvariantViolation(f"discrepancy must be nonnegative, got {self.value}")
        if self.verdict not in ("converging", "diverging", "undetermined"):
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def budget_exceeded(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class ProprietyCheck:
    status: str                      # proper | improper | undetermined
    log_normalizer: float
    log_partials: tuple = ()         # log normalizers over the doubling intervals


@dataclass(frozen=True)
class TailCheck:
    satisfied: bool
    probes: dict                     # tail name -> probe abscissae
    log_witness: dict                # tail name -> log of the probed sequence


@dataclass(frozen=True)
class Verdict:
    status: str                      # permissible-evidence | not-permissible-evidence | undetermined
    series: tuple
    indices: tuple
    propriety: Optional[ProprietyCheck]
    reason: str


# ---------------------------------------------------------------------------
# KL divergence
# ---------------------------------------------------------------------------

def _clip(value: float) -> float:
    if value < 0:
        if value < -CLIP_TOL:
            raise InvariantViolation(
                f"divergence {value:.3e} is negative beyond tolerance; "
                "are both densities normalized?")
        return 0.0
    return value


def kl_divergence(log_p, log_q, lo: float | None = None, hi: float | None = None,
                  settings: QuadratureSettings | None = None,
                  breakpoints: Sequence[float] = (), budget: float = KL_BUDGET) -> float:
    """kappa{q | p} = integral of p log(p / q).

    Parameters
    ----------
    log_p, log_q : array_like or callable
        Log probabilities on a common finite support (arrays), or vectorized
        log densities (callables) integrated over ``(lo, hi)``.
    budget : float
        Values above this many nats are reported as ``inf``.

    Returns
    -------
    float
        The divergence, clipped to 0 when it lies within 1e-8 below zero, or
        ``inf`` when q vanishes where p does not or the budget is exceeded.
    """
    if not callable(log_p):
        lp = np.asarray(log_p, dtype=float)
        lq = np.asarray(log_q, dtype=float)
        if lp.shape != lq.shape:
            raise DomainError("discrete densities must share their support")
        live = lp > -np.inf
        if np.any(lq[live] == -np.inf):
            return math.inf
        terms = np.exp(lp[live]) * (lp[live] - lq[live])
        value = math.fsum(terms)
        return math.inf if value > budget else _clip(value)

    if lo is None or hi is None:
        raise DomainError("integration limits are required for density functions")
    mismatch = []

    def integrand(t):
        a = np.asarray(log_p(t), dtype=float)
        b = np.asarray(log_q(t), dtype=float)
        live = a > -np.inf
        if np.any(live & (b == -np.inf)):
            mismatch.append(True)
        with np.errstate(invalid="ignore"):
            out = np.where(live & (b > -np.inf), np.exp(a) * (a - b), 0.0)
        return out

    try:
        value = integrate(integrand, lo, hi, settings or DISCREPANCY_SETTINGS, breakpoints)
    except QuadratureError as exc:
        if exc.estimate is not None and exc.estimate > budget:
            return math.inf
        raise
    if mismatch or value > budget:
        return math.inf
    return _clip(value)


# ---------------------------------------------------------------------------
# posterior normalizers
# ---------------------------------------------------------------------------

def _is_single_location(model: Model, prior: PriorFn, x: np.ndarray) -> bool:
    """Flat prior, one scalar observation, location family: Z(x) = 1."""
    return (isinstance(model, LocationModel) and prior.log_value is _flat
            and not isinstance(model, IIDVector) and np.asarray(x).size == 1)


def _log_norm(model: Model, prior: PriorFn, like, lo: float, hi: float,
              settings: QuadratureSettings) -> float:
    """log of the integral (or sum) of likelihood times prior over (lo, hi)."""
    if like.points is not None:
        pts = like.points[(like.points >= lo) & (like.points <= hi)]
        if pts.size == 0:
            return -math.inf
        return float(special.logsumexp(like(pts) + prior(pts)))
    lo, hi = like.restrict(lo, hi)
    if not lo < hi:
        return -math.inf

    def log_f(th):
        return like.fn(th) + prior.log_value(th)

    return log_integrate(log_f, lo, hi, settings,
                         breakpoints=like.breakpoints(lo, hi, extra=prior.log_value))


def _log_full_norm(model: Model, prior: PriorFn, like, x, settings) -> float:
    if _is_single_location(model, prior, x):
        return 0.0
    space = model.param_space
    return _log_norm(model, prior, like, space.lo, space.hi, settings)


@dataclass(frozen=True)
class Posterior:
    """Normalized formal posterior pi(theta | x) on (lo, hi).

    For discrete parameter spaces ``points`` lists the support.
    """

    like: object
    prior: PriorFn
    log_norm: float
    lo: float
    hi: float
    points: Optional[np.ndarray] = None

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        inside = (th >= self.lo) & (th <= self.hi)
        if self.points is not None:
            inside &= np.isin(th, self.points)
        with np.errstate(invalid="ignore"):
            val = self.like.fn(th) + self.prior.log_value(th) - self.log_norm
        out = np.where(inside, val, -np.inf)
        return float(out) if out.ndim == 0 else out

    def breakpoints(self) -> list[float]:
        return self.like.breakpoints(self.lo, self.hi, extra=self.prior.log_value)


def posterior_logpdf(model: Model, prior, x, working: CompactSet | None = None,
                     settings: QuadratureSettings | None = None) -> Posterior:
    """Formal posterior p(x | theta) pi(theta) / integral of the same.

    Parameters
    ----------
    working : CompactSet, optional
        Region to normalize over; the full parameter space by default.

    Raises
    ------
    ImproperPosteriorError
        When the normalizer is infinite or cannot be established.
    """
    prior = as_prior(prior)
    settings = settings or _INNER_SETTINGS
    x = np.asarray(x, dtype=float)
    like = model.likelihood(x)
    space = model.param_space
    lo, hi = (working.lo, working.hi) if working is not None else (space.lo, space.hi)
    unbounded = working is None and like.points is None and not (
        math.isfinite(like.lo) and math.isfinite(like.hi))
    if unbounded and not _is_single_location(model, prior, x):
        check = propriety_check(model, prior, x, settings)
        if check.status != "proper":
            raise ImproperPosteriorError(
                f"formal posterior under the {prior.label} prior is {check.status} "
                f"for {model.name}")
        log_norm = check.log_normalizer
    else:
        try:
            log_norm = (_log_full_norm(model, prior, like, x, settings) if working is None
                        else _log_norm(model, prior, like, lo, hi, settings))
        except QuadratureError as exc:
            raise ImproperPosteriorError(f"posterior normalizer failed: {exc}") from exc
    if not math.isfinite(log_norm):
        raise ImproperPosteriorError(f"posterior normalizer is {log_norm}")
    points = None
    if like.points is not None:
        points = like.points[(like.points >= lo) & (like.points <= hi)]
    lo, hi = like.restrict(lo, hi)
    return Posterior(like, prior, log_norm, lo, hi, points)


def truncation_kl_identity(model: Model, prior, x, region: CompactSet,
                           settings: QuadratureSettings | None = None) -> tuple[float, float]:
    """Both sides of kappa{pi(.|x) | pi_i(.|x)} = -log P(Theta_i | x).

    The left side integrates the divergence between the two normalized
    posteriors; the right side uses only the two normalizers.
    """
    full = posterior_logpdf(model, prior, x, None, settings)
    trunc = posterior_logpdf(model, prior, x, region, settings)
    if trunc.points is not None:
        pts = trunc.points
        lhs = kl_divergence(trunc(pts), full(pts))
    else:
        lhs = kl_divergence(trunc, full, trunc.lo, trunc.hi, settings or DISCREPANCY_SETTINGS,
                            breakpoints=trunc.breakpoints())
    rhs = full.log_norm - trunc.log_norm
    return lhs, rhs


# ---------------------------------------------------------------------------
# propriety
# ---------------------------------------------------------------------------

def propriety_check(model: Model, prior, x, settings: QuadratureSettings | None = None,
                    max_doublings: int = 60) -> ProprietyCheck:
    """Classify the formal posterior by normalizing over doubling intervals.

    Intervals grow around the likelihood bulk: by doubling the distance to
    an infinite end, and by halving the gap to a finite one.  The posterior
    is called proper once the increments decay geometrically with a
    negligible remaining tail, improper when they stop shrinking.
    """
    prior = as_prior(prior)
    settings = settings or _INNER_SETTINGS
    x = np.asarray(x, dtype=float)
    like = model.likelihood(x)
    if like.points is not None:
        val = _log_norm(model, prior, like, model.param_space.lo, model.param_space.hi, settings)
        return ProprietyCheck("proper" if math.isfinite(val) else "improper", val, (val,))
    if _is_single_location(model, prior, x):
        return ProprietyCheck("proper", 0.0, (0.0,))
    space = model.param_space
    lo_lim, hi_lim = like.restrict(space.lo, space.hi)
    bulk = like.breakpoints(lo_lim, hi_lim, extra=prior.log_value)
    if like.peak is not None:
        c = like.peak
    elif bulk:
        c = bulk[len(bulk) // 2]
    else:
        c = 0.5 * (lo_lim + hi_lim) if math.isfinite(lo_lim + hi_lim) else (
            lo_lim + 1.0 if math.isfinite(lo_lim) else (hi_lim - 1.0 if math.isfinite(hi_lim) else 0.0))
    w = like.width if like.width else 1.0

    def ends(j):
        a = lo_lim + (c - lo_lim) * 2.0 ** -j if math.isfinite(lo_lim) else c - w * 2.0 ** j
        b = hi_lim - (hi_lim - c) * 2.0 ** -j if math.isfinite(hi_lim) else c + w * 2.0 ** j
        return a, b

    logs = []
    for j in range(max_doublings):
        a, b = ends(j)
        logs.append(_log_norm(model, prior, like, a, b, settings))
        if len(logs) < 5 or not np.isfinite(logs[-1]):
            continue
        z = np.asarray(logs[-5:])
        # increments relative to the latest partial normalizer
        inc = np.exp(z[1:] - z[-1]) - np.exp(z[:-1] - z[-1])
        inc = np.maximum(inc, 0.0)
        if inc[-1] < 1e-13:
            return ProprietyCheck("proper", float(logs[-1]), tuple(logs))
        ratios = inc[1:] / np.maximum(inc[:-1], 1e-300)
        if np.all(ratios <= 0.75):
            rho = float(ratios.max())
            tail = inc[-1] * rho / (1.0 - rho)
            if tail < 1e-10:
                return ProprietyCheck("proper", float(logs[-1] + math.log1p(tail)), tuple(logs))
        if np.all(ratios >= 0.9) and inc[-1] > 1e-3:
            return ProprietyCheck("improper", math.inf, tuple(logs))
    return ProprietyCheck("undetermined", float(logs[-1]), tuple(logs))


# ---------------------------------------------------------------------------
# expected discrepancy
# ---------------------------------------------------------------------------

def _obs_domain(model: Model, region: CompactSet) -> tuple[float, float]:
    a = model.obs_support(region.lo)
    b = model.obs_support(region.hi)
    return min(a[0], b[0]), max(a[1], b[1])


def _pointwise_discrepancy(model, prior, x, region, inner) -> tuple[float, float]:
    """(log Z_i(x), log Z(x) - log Z_i(x)) for one data value."""
    like = model.likelihood(x)
    log_zi = _log_norm(model, prior, like, region.lo, region.hi, inner)
    if not math.isfinite(log_zi):
        return -math.inf, 0.0
    log_z = _log_full_norm(model, prior, like, x, inner)
    return log_zi, max(log_z - log_zi, 0.0)


def _discrete_discrepancy(model, prior, region: CompactSet) -> DiscrepancyEstimate:
    thetas = region.points()
    outcomes = np.unique(np.concatenate([model.support_points(int(t)) for t in thetas]))
    log_mass = log_prior_mass(prior, region)
    terms = []
    for x in outcomes:
        like = model.likelihood(np.array([x]))
        log_zi = _log_norm(model, prior, like, region.lo, region.hi, None)
        if not math.isfinite(log_zi):
            continue
        log_z = _log_norm(model, prior, like, model.param_space.lo, model.param_space.hi, None)
        terms.append(math.exp(log_zi - log_mass) * (log_z - log_zi))
    value = math.fsum(terms)
    return DiscrepancyEstimate(_clip(value), 0.0, "converging",
                               {"estimator": "exact", "outcomes": int(outcomes.size)})


def _support_ends(model) -> tuple:
    base = getattr(model, "base", None)
    if base is None:
        return ()
    return tuple(e for e in (base.lo, base.hi) if math.isfinite(e))


def _log_scaled_integral(f, x0: float, x1: float, settings, kinks=()) -> float:
    """Integral of f over (x0, x1) with x0 finite, in s = log(x - x0)."""
    s_hi = math.log(x1 - x0) if math.isfinite(x1) else 60.0
    s_lo = min(-40.0, s_hi - 80.0)

    def g(s):
        x = x0 + np.exp(s)
        return np.exp(s) * f(x)

    marks = [float(s) for s in np.arange(math.ceil(s_lo), s_hi, 2.0)]
    marks += [math.log(k - x0) for k in kinks if x0 < k < x1]
    return integrate(g, s_lo, s_hi, settings, breakpoints=marks)


def _quadrature_discrepancy(model, prior, region, settings, cutoff) -> float:
    inner = settings.with_(rel_tol=min(settings.rel_tol * 1e-2, 1e-11),
                           abs_tol_log=1e-13)
    log_mass = log_prior_mass(prior, region)
    x_lo, x_hi = _obs_domain(model, region)
    if cutoff is not None:
        x_lo, x_hi = max(x_lo, region.lo - cutoff), min(x_hi, region.hi + cutoff)

    def f(xs):
        out = np.empty(np.size(xs))
        for j, x in enumerate(np.ravel(xs)):
            log_zi, kl = _pointwise_discrepancy(model, prior, np.array([x]), region, inner)
            out[j] = math.exp(log_zi - log_mass) * kl if math.isfinite(log_zi) else 0.0
        return out

    if math.isfinite(x_lo) and (not math.isfinite(x_hi) or x_hi - x_lo > 1e3):
        kinks = [c + d for c in (region.lo, region.hi) for d in _support_ends(model)]
        value = _log_scaled_integral(f, x_lo, x_hi, settings, kinks)
    elif math.isfinite(x_hi) and not math.isfinite(x_lo):
        value = _log_scaled_integral(lambda y: f(-y), -x_hi, math.inf, settings)
    else:
        marks = [region.lo, region.hi] + [c + s * d for c in (region.lo, region.hi)
                                          for s in (-1, 1) for d in (1.0, 3.0, 8.0)]
        value = integrate(f, x_lo, x_hi, settings, breakpoints=marks)
    return math.inf if value > KL_BUDGET else value


def _mc_discrepancy(model, prior, region, n, seed, draws, batches, settings) -> DiscrepancyEstimate:
    if draws % batches:
        raise ValueError("draws must be a multiple of the batch count")
    inner = settings.with_(rel_tol=1e-10)
    vals = np.empty(draws)
    for j in range(draws):
        rng = substream(seed, "discrepancy", j)
        theta = float(sample_prior(prior, region, rng.random(1))[0])
        x = model.sample(theta, rng, n)
        if not np.all(np.isfinite(x)):
            vals[j] = math.inf
            continue
        _, vals[j] = _pointwise_discrepancy(model, prior, x, region, inner)
    if not np.all(np.isfinite(vals)) or vals.mean() > KL_BUDGET:
        return DiscrepancyEstimate(math.inf, math.inf, "diverging",
                                   {"estimator": "monte-carlo", "draws": draws, "n": n})
    means = vals.reshape(batches, -1).mean(axis=1)
    value = float(means.mean())
    stderr = float(means.std(ddof=1) / math.sqrt(batches))
    return DiscrepancyEstimate(max(value, 0.0), stderr, "converging",
                               {"estimator": "monte-carlo", "draws": draws, "n": n,
                                "batch_means": means.tolist()})


def expected_discrepancy(model: Model, prior, region: CompactSet,
                         settings: QuadratureSettings | None = None,
                         estimator: str = "quadrature", seed: int = 0, draws: int = 3200,
                         n: int = 1, cutoffs: Sequence[float] | None = None,
                         batches: int = 32) -> DiscrepancyEstimate:
    """Expected logarithmic discrepancy of the truncation to ``region``.

    Computes the integral over x of kappa{pi(.|x) | pi_i(.|x)} p_i(x), where
    p_i is the marginal of the prior restricted to ``region``.

    Parameters
    ----------
    estimator : {"quadrature", "monte-carlo"}
        Quadrature handles one observation (``n = 1``); discrete models are
        always enumerated exactly.  Monte Carlo draws theta from the
        truncated prior, then x, and reports a 32-batch-means stderr.
    cutoffs : sequence of float, optional
        Quadrature only: truncate the x-integral to within each cutoff of
        ``region``.  A value that keeps growing with the cutoff is reported
        as ``diverging``; the estimate is the one at the largest cutoff.
    """
    prior = as_prior(prior)
    settings = settings or DISCREPANCY_SETTINGS
    if region.discrete or model.param_space.discrete:
        if n != 1:
            raise UnsupportedOperationError("exact enumeration covers one observation")
        return _discrete_discrepancy(model, prior, region)
    if estimator == "monte-carlo":
        return _mc_discrepancy(model, prior, region, n, seed, draws, batches, settings)
    if estimator != "quadrature":
        raise ValueError(f"unknown estimator {estimator!r}")
    if n != 1:
        raise UnsupportedOperationError("quadrature covers one observation; use monte-carlo")
    if not cutoffs:
        value = _quadrature_discrepancy(model, prior, region, settings, None)
        verdict = "diverging" if math.isinf(value) else "converging"
        return DiscrepancyEstimate(_clip(value) if math.isfinite(value) else value, 0.0,
                                   verdict, {"estimator": "quadrature"})
    series = [_quadrature_discrepancy(model, prior, region, settings, c) for c in sorted(cutoffs)]
    if any(math.isinf(v) for v in series):
        return DiscrepancyEstimate(math.inf, 0.0, "diverging",
                                   {"estimator": "quadrature", "cutoff_values": series})
    steps = np.diff(series)
    tol = max(1e-7, 10 * settings.rel_tol * abs(series[-1]))
    if np.all(steps > tol):
        verdict = "diverging"
    elif np.all(np.abs(steps) <= tol):
        verdict = "converging"
    else:
        verdict = "undetermined"
    return DiscrepancyEstimate(_clip(series[-1]), 0.0, verdict,
                               {"estimator": "quadrature", "cutoffs": sorted(cutoffs),
                                "cutoff_values": series})


def closed_form_location_discrepancy(base: BaseDensity, i: float,
                                     settings: QuadratureSettings | None = None,
                                     cutoff: float | None = None) -> float:
    """-(1/2i) integral of G log G with G(x) = F(x + i) - F(x - i).

    The flat-prior discrepancy of a location model truncated to [-i, i],
    written through the cdf F of the standardized density.  ``cutoff``
    limits x to within that distance of the interval.
    """
    settings = settings or DISCREPANCY_SETTINGS

    def f(x):
        g = base.mass(x - i, x + i)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(g > 0, -g * np.log(g), 0.0)

    lo = -i + base.lo if math.isfinite(base.lo) else -math.inf
    hi = i + base.hi if math.isfinite(base.hi) else math.inf
    if cutoff is not None:
        lo, hi = max(lo, -i - cutoff), min(hi, i + cutoff)
    if math.isfinite(lo) and (not math.isfinite(hi) or hi - lo > 1e3):
        return _log_scaled_integral(f, lo, hi, settings, kinks=(i + base.lo,)) / (2.0 * i)
    marks = [c + s * d for c in (-i, i) for s in (-1, 1) for d in (0.0, 1.0, 3.0, 8.0)]
    return integrate(f, lo, hi, settings, breakpoints=marks) / (2.0 * i)


def fmn_discrepancy_exact(i: int, prior="uniform") -> float:
    """Expected discrepancy of the discrete three-outcome model on {1..i}.

    Exact finite enumeration over the reachable outcomes {1, ..., 2i + 1}.
    """
    from .models import FMNDiscrete
    if int(i) != i or i < 1:
        raise DomainError("i must be a positive integer")
    est = _discrete_discrepancy(FMNDiscrete(), as_prior(prior), CompactSet(1, int(i), discrete=True))
    return est.value


# ---------------------------------------------------------------------------
# tail condition
# ---------------------------------------------------------------------------

def log_transform_base(base: BaseDensity) -> BaseDensity:
    """Density of log(Y) for Y with density ``base`` on the positive axis."""
    if base.lo < 0:
        raise DomainError("log transform needs a density on the positive axis")

    def logf(t):
        with np.errstate(over="ignore"):
            return t + base.log_density(np.exp(t))

    lo = math.log(base.lo) if base.lo > 0 else -math.inf
    hi = math.log(base.hi) if math.isfinite(base.hi) else math.inf
    return BaseDensity(f"log-{base.name}", logf=logf,
                       cdf=lambda t: base.cdf(np.exp(t)),
                       ppf=lambda u: np.log(base.ppf(u)), lo=lo, hi=hi)


def _log_density_at_exp(base: BaseDensity, s: np.ndarray) -> np.ndarray:
    """log f(e^s), evaluated without forming e^s when the base allows it."""
    if base.name == "logtail":
        return np.where(s > 1.0, -s - 2.0 * np.log(np.maximum(s, 1.0)), -np.inf)
    with np.errstate(over="ignore", invalid="ignore"):
        out = base.log_density(np.exp(s))
    return np.where(np.isnan(out), -np.inf, out)


def tail_condition_check(base, kind: str = "location", eps: float = 1.0,
                         probes: Sequence[float] | None = None,
                         tol: float = 1e-8) -> TailCheck:
    """Probe the tail conditions on a standardized density.

    Location kind: |t|^(1+eps) f(t) -> 0 as |t| -> infinity.  Scale kind:
    |t|^(1+eps) e^t f(e^t) -> 0, which is the location condition for log Y.
    Both tails are probed; the check passes when, in each tail, the last
    three probe values are nonincreasing and the last one is below ``tol``.
    This is numerical evidence, not a proof.

    Parameters
    ----------
    base : BaseDensity or Model
        Standardized density, or a location or scale model carrying one.
    probes : sequence of float, optional
        Location kind: values of log|t|.  Scale kind: values of |t|.
    """
    if isinstance(base, (LocationModel, ScaleModel)):
        base = base.base
    if eps <= 0:
        raise DomainError("eps must be positive")
    log_w, probe_map = {}, {}
    if kind == "location":
        s = np.asarray(probes if probes is not None else np.geomspace(1.0, 1e5, 60), dtype=float)
        with np.errstate(over="ignore"):
            neg = base.log_density(-np.exp(s))
        log_w["+"] = (1.0 + eps) * s + _log_density_at_exp(base, s)
        log_w["-"] = (1.0 + eps) * s + np.where(np.isnan(neg), -np.inf, neg)
        probe_map = {"+": s, "-": s}
    elif kind == "scale":
        t = np.asarray(probes if probes is not None else np.geomspace(1.0, 700.0, 60), dtype=float)
        log_w["+"] = (1.0 + eps) * np.log(t) + t + _log_density_at_exp(base, t)
        log_w["-"] = (1.0 + eps) * np.log(t) - t + _log_density_at_exp(base, -t)
        probe_map = {"+": t, "-": -t}
    else:
        raise ValueError(f"unknown kind {kind!r}")
    ok = True
    for tail, w in log_w.items():
        if np.all(w == -np.inf):
            continue
        last = w[-3:]
        with np.errstate(invalid="ignore"):
            steady = bool(np.all((np.diff(last) <= 0) | (last[1:] == -np.inf)))
        ok &= steady and last[-1] < math.log(tol)
    return TailCheck(bool(ok), probe_map, log_w)


# ---------------------------------------------------------------------------
# monotonicity and verdicts
# ---------------------------------------------------------------------------

def discrepancy_monotonicity(model: Model, prior, region: CompactSet, sizes: tuple[int, int],
                             seed: int, settings: QuadratureSettings | None = None,
                             draws: int = 640, batches: int = 32):
    """Discrepancy estimates at two data sizes with common random numbers.

    Every draw simulates theta from the truncated prior and ``max(sizes)``
    observations; the smaller size uses the leading observations.  The
    stderr of the paired difference is stored as ``meta["paired_stderr"]``.
    """
    n1, n2 = sizes
    if not 1 <= n1 <= n2:
        raise ValueError("sizes must satisfy 1 <= n1 <= n2")
    if draws % batches:
        raise ValueError("draws must be a multiple of the batch count")
    prior = as_prior(prior)
    settings = settings or DISCREPANCY_SETTINGS
    inner = settings.with_(rel_tol=1e-10)
    vals = np.empty((2, draws))
    for j in range(draws):
        rng = substream(seed, "discrepancy", j)
        theta = float(sample_prior(prior, region, rng.random(1))[0])
        x = model.sample(theta, rng, n2)
        vals[0, j] = _pointwise_discrepancy(model, prior, x[:n1], region, inner)[1]
        vals[1, j] = (vals[0, j] if n2 == n1
                      else _pointwise_discrepancy(model, prior, x, region, inner)[1])
    means = vals.reshape(2, batches, -1).mean(axis=2)
    diff = means[1] - means[0]
    paired = float(diff.std(ddof=1) / math.sqrt(batches))
    out = []
    for r in range(2):
        se = float(means[r].std(ddof=1) / math.sqrt(batches))
        out.append(DiscrepancyEstimate(max(float(means[r].mean()), 0.0), se, "converging",
                                       {"estimator": "monte-carlo", "n": sizes[r],
                                        "draws": draws, "paired_stderr": paired}))
    return out[0], out[1]


# verdict calibration, see the decay of the location closed form (~0.9/i)
VERDICT_THRESHOLD = 0.05
DECAY_RATIO = 0.8
PLATEAU_RATIO = 0.95


def _series_verdict(values, stderrs) -> tuple[str, str]:
    v = np.asarray(values, dtype=float)
    se = np.asarray(stderrs, dtype=float)
    if np.any(np.isinf(v)):
        return "not-permissible-evidence", "discrepancy exceeds the budget"
    if v.size < 2:
        return "undetermined", "need at least two probes"
    steps = np.diff(v)
    noise = 2.0 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    if np.any(steps > np.maximum(noise, 1e-12)):
        return "not-permissible-evidence", "discrepancy increases with i"
    if v[-1] <= VERDICT_THRESHOLD:
        return "permissible-evidence", f"series decreases to {v[-1]:.4g} <= {VERDICT_THRESHOLD}"
    ratio = v[-1] / v[-2] if v[-2] > 0 else 0.0
    if ratio <= DECAY_RATIO:
        return "permissible-evidence", f"series decays with last ratio {ratio:.3f}"
    if ratio >= PLATEAU_RATIO:
        return "not-permissible-evidence", (f"series levels off near {v[-1]:.4g} "
                                            f"(last ratio {ratio:.3f})")
    return "undetermined", f"last ratio {ratio:.3f} is between decay and plateau"


def permissibility_verdict(model: Model, prior, sequence: CompactSequence,
                           indices: Sequence[float], settings: QuadratureSettings | None = None,
                           estimator: str = "quadrature", seed: int = 0, draws: int = 3200,
                           cutoffs: Sequence[float] | None = None,
                           probe_data=None) -> Verdict:
    """Numerical evidence on whether ``prior`` is permissible for ``model``.

    Combines a propriety check of the formal posterior (on ``probe_data``,
    or one observation simulated at an interior parameter value) with the
    trend of the expected discrepancy over ``sequence(i)`` for the probed
    indices.  A series that exceeds the budget or grows with the cutoff is
    evidence against permissibility.
    """
    prior = as_prior(prior)
    indices = tuple(sorted(indices))
    regions = [sequence(i) for i in indices]
    sequence.validate(indices)
    if probe_data is None:
        mid = regions[0]
        theta = (mid.lo + mid.hi) / 2.0
        if mid.discrete:
            theta = float(round(theta))
        probe_data = model.sample(theta, substream(seed, "diagnostic", 0), 1)
    try:
        prop = propriety_check(model, prior, probe_data, settings)
    except QuadratureError:
        prop = ProprietyCheck("undetermined", math.nan)
    if prop.status == "improper":
        return Verdict("not-permissible-evidence", (), indices, prop, "formal posterior is improper")
    series = []
    for k, region in enumerate(regions):
        est = expected_discrepancy(model, prior, region, settings, estimator,
                                   seed=seed + k, draws=draws, cutoffs=cutoffs)
        series.append(est)
        if est.verdict == "diverging":
            return Verdict("not-permissible-evidence", tuple(series), indices, prop,
                           f"discrepancy integral diverges on {region}")
    status, reason = _series_verdict([e.value for e in series], [e.stderr for e in series])
    if status == "permissible-evidence" and prop.status != "proper":
        status, reason = "undetermined", "propriety could not be established; " + reason
    return Verdict(status, tuple(series), indices, prop, reason)
