"""Reference priors: closed forms, deterministic f_k quadrature and the
Monte Carlo construction.

The Monte Carlo estimator follows the simulation recipe for
pi(theta) = lim f_k(theta) / f_k(theta0): for each grid point simulate ``m``
datasets of ``k`` observations at theta, compute

    r_j(theta) = log p(x_j | theta) + log pi*(theta) - log c_j,
    c_j = integral of p(x_j | theta') pi*(theta') over the working interval,

and average.  Tables store the mean of r_j normalized at the anchor, on the
log scale, together with Monte Carlo standard errors.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .errors import (DomainError, InvariantViolation, NonRegularModelError,
                     QuadratureError, UnsupportedOperationError)
from .models import Model, UniformPairSpec, open_uniform
from .numerics import (EULER_GAMMA, PriorTable, QuadratureSettings, digamma,
                       integrate, log_integrate, normalize_at)
from .priors import CompactSet, PriorFn, flat_prior
from .streams import substream

# ---------------------------------------------------------------------------
# Fisher information and the closed-form priors built from it
# ---------------------------------------------------------------------------

FISHER_SETTINGS = QuadratureSettings(rel_tol=1e-7, abs_tol=1e-10)


def _fd_step(theta: float) -> float:
    return max(1e-4, 1e-4 * abs(theta))


def _obs_expectation(model: Model, theta: float, fn, settings) -> float:
    """E[fn(x)] under p(x | theta) by quadrature (or a sum for discrete data)."""
    if model.discrete_obs:
        pts = np.unique(model.support_points(theta)).astype(float)
        w = np.exp(model._logpdf(pts, theta))
        return float(np.sum(w * fn(pts)))
    lo, hi = model.obs_support(theta)

    def integrand(x):
        lp = model._logpdf(x, theta)
        dens = np.exp(lp)
        val = np.where(dens > 0, fn(x), 0.0)
        return dens * val

    return integrate(integrand, lo, hi, settings, breakpoints=model.obs_breakpoints(theta))


def fisher_information(model: Model, theta: float, step: float | None = None,
                       settings: QuadratureSettings | None = None) -> float:
    """Expected information -E[d^2/dtheta^2 log p(x | theta)].

    The second derivative is a central second difference with one level of
    Richardson extrapolation (steps h and h/2, h = max(1e-4, 1e-4 |theta|)).

    Raises
    ------
    NonRegularModelError
        If the support moves with theta (the second difference is not finite
        on the support), or the formal information is negative, as for the
        triangular model.
    """
    model.param_space.check(theta)
    s = settings or FISHER_SETTINGS
    h = step or _fd_step(theta)
    lo_ok = model.param_space.contains(theta - 2 * h) and model.param_space.contains(theta + 2 * h)
    if not lo_ok:
        raise DomainError(f"theta={theta} is too close to the parameter boundary")

    def second_diff(x, hh):
        return (model._logpdf(x, theta + hh) - 2.0 * model._logpdf(x, theta)
                + model._logpdf(x, theta - hh)) / (hh * hh)

    def d2(x):
        with np.errstate(invalid="ignore"):
            return (4.0 * second_diff(x, h / 2) - second_diff(x, h)) / 3.0

    # regularity probe: the second difference must be finite across the support
    lo, hi = model.obs_support(theta)
    if model.discrete_obs:
        probe = np.unique(model.support_points(theta)).astype(float)
    else:
        a = lo if math.isfinite(lo) else -50.0 + (hi if math.isfinite(hi) else 0.0)
        b = hi if math.isfinite(hi) else a + 100.0
        probe = np.linspace(a, b, 203)[1:-1]
        probe = probe[np.isfinite(model._logpdf(probe, theta))]
    if model.support_motion != "fixed" or not np.all(np.isfinite(d2(probe))):
        raise NonRegularModelError(
            f"{model.name}: second difference of the log density is not finite "
            "on the support (support depends on theta)")
    info = -_obs_expectation(model, theta, d2, s)
    if not math.isfinite(info):
        raise NonRegularModelError(f"{model.name}: Fisher information diverges at theta={theta}")
    if info < -1e-6 * max(1.0, abs(info)):
        raise NonRegularModelError(
            f"{model.name}: formal Fisher information is negative ({info:.6g}) at theta={theta}")
    return max(info, 0.0)


def jeffreys_prior(model: Model, theta: float, settings: QuadratureSettings | None = None) -> float:
    """sqrt of the Fisher information at theta."""
    return math.sqrt(fisher_information(model, theta, settings=settings))


def nonregular_prior(model: Model, theta: float, settings: QuadratureSettings | None = None) -> float:
    """|E[d/dtheta log p(x | theta)]| for models whose support moves monotonically.

    The score is a second-order one-sided difference taken in the direction
    that keeps every x of S(theta) inside the shifted support: forward when
    the support grows with theta, backward when it shrinks.
    """
    motion = model.support_motion
    if motion not in ("increasing", "decreasing"):
        raise UnsupportedOperationError(
            f"{model.name}: support motion {motion!r} is not monotone")
    model.param_space.check(theta)
    s = settings or FISHER_SETTINGS
    h = _fd_step(theta)
    sign = 1.0 if motion == "increasing" else -1.0
    if not model.param_space.contains(theta + sign * 2 * h):
        raise DomainError(f"theta={theta} is too close to the parameter boundary")

    def score(x):
        l0 = model._logpdf(x, theta)
        l1 = model._logpdf(x, theta + sign * h)
        l2 = model._logpdf(x, theta + sign * 2 * h)
        return sign * (-3.0 * l0 + 4.0 * l1 - l2) / (2.0 * h)

    value = _obs_expectation(model, theta, score, s)
    if not math.isfinite(value):
        raise NonRegularModelError(f"{model.name}: score expectation is not finite")
    return abs(value)


# ---------------------------------------------------------------------------
# the uniform model with two increasing endpoints
# ---------------------------------------------------------------------------

def _g_bracket(b1: float, b2: float, shift: float = 0.0) -> float:
    """(h(b1) - h(b2)) / (b1 - b2) with h(b) = b psi(1/b + shift).

    When b1 and b2 nearly coincide the divided difference is replaced by its
    expansion about the midpoint, h'(m) + h'''(m) d^2 / 24, which avoids the
    cancellation.
    """
    d = b1 - b2
    if abs(d) >= 1e-6 * max(1.0, abs(b1)):
        return (b1 * digamma(1.0 / b1 + shift) - b2 * digamma(1.0 / b2 + shift)) / d
    m = 0.5 * (b1 + b2)
    z = 1.0 / m
    w = z + shift
    psi0 = digamma(w)
    psi1, psi2, psi3 = (float(special.polygamma(n, w)) for n in (1, 2, 3))
    # h(b) = b psi(1/b + s): derivatives in b with dz/db = -z^2
    h1 = psi0 - z * psi1
    h3 = -3.0 * z ** 4 * psi2 - z ** 5 * psi3
    return h1 + h3 * d * d / 24.0


def log_uniform_pair_prior(spec: UniformPairSpec, theta: float) -> float:
    """log of the closed-form reference prior for Un(a1(theta), a2(theta))."""
    spec.check(theta)
    a1, a2 = float(spec.a1(theta)), float(spec.a2(theta))
    d1, d2 = float(spec.d_a1(theta)), float(spec.d_a2(theta))
    diff = d2 - d1
    b1, b2 = diff / d1, diff / d2
    return math.log(diff) - math.log(a2 - a1) + b1 + _g_bracket(b1, b2)


def uniform_pair_prior(spec: UniformPairSpec, theta: float) -> float:
    """Reference prior (a2'-a1')/(a2-a1) exp{b1 + [b1 psi(1/b1) - b2 psi(1/b2)]/(b1-b2)}."""
    return math.exp(log_uniform_pair_prior(spec, theta))


def theta_theta2_prior(theta: float) -> float:
    """Unnormalized reference prior of Un(theta, theta^2):
    (2 theta - 1) / (theta (theta - 1)) exp{psi(2 theta / (2 theta - 1))}."""
    theta = float(theta)
    if not theta > 1.0:
        raise DomainError("theta must exceed 1")
    return (2 * theta - 1) / (theta * (theta - 1)) * math.exp(digamma(2 * theta / (2 * theta - 1)))


def j2_closed_form(b1: float, b2: float) -> float:
    """gamma + [b1 psi(1/b1 + 1) - b2 psi(1/b2 + 1)] / (b1 - b2)."""
    if not (b1 > 0 and b2 > 0):
        raise DomainError("b1 and b2 must be positive")
    return EULER_GAMMA + _g_bracket(b1, b2, shift=1.0)


def j2_series_oracle(b1: float, b2: float, tol: float = 1e-11) -> float:
    """Direct summation of sum_j 1 / (j (b1 j + 1)(b2 j + 1)).

    Terms are bounded by 1/(b1 b2 j^3), so stopping at
    N = ceil(sqrt(1 / (2 b1 b2 tol))) leaves a tail below ``tol``.
    Summation runs from the smallest terms upward in blocks.
    """
    if not (b1 > 0 and b2 > 0 and tol > 0):
        raise DomainError("b1, b2 and tol must be positive")
    n = int(math.ceil(math.sqrt(1.0 / (2.0 * b1 * b2 * tol))))
    partial = []
    block = 1_000_000
    for stop in range(n, 0, -block):
        j = np.arange(max(stop - block, 0) + 1, stop + 1, dtype=float)[::-1]
        partial.append(np.sum(1.0 / (j * (b1 * j + 1.0) * (b2 * j + 1.0))))
    return math.fsum(partial)


# ---------------------------------------------------------------------------
# deterministic f_k via quadrature over the sufficient statistic
# ---------------------------------------------------------------------------

FK_SETTINGS = QuadratureSettings(rel_tol=1e-7, abs_tol=1e-9, max_refinements=60)
_V_CUT = 25.0
# x = log R range for two-dimensional statistics; the weight R**2 exp(-R)
# is below 1e-16 outside it, and (min, max) stays resolvable inside it.
_LOG_R_RANGE = (-20.0, 4.6)


def _posterior_log_norm(like, log_prior, lo, hi, settings):
    lo, hi = like.restrict(lo, hi)
    if not lo < hi:
        return -math.inf
    return log_integrate(lambda th: like.fn(th) + log_prior(th), lo, hi, settings,
                         breakpoints=like.breakpoints(lo, hi))


def log_fk(model: Model, theta: float, k: int, settings: QuadratureSettings | None = None,
           pi_star: PriorFn | None = None, working: CompactSet | None = None) -> float:
    """log f_k(theta) = E[log pi*(theta | t_k)] by nested quadrature.

    One-dimensional statistics are integrated over their inverse-cdf
    coordinate q, mapped to the real line by a logistic change of variables
    so that both ends decay exponentially.  Two-dimensional statistics with
    an exponential-coordinate map use (v1, v2) = (R s, R (1 - s)), where R
    has density R exp(-R) and s is uniform; the only singularity of the
    integrand, logarithmic at v1 = v2 = 0, then sits at R = 0 where the
    weight vanishes; integrating over x = log R makes it analytic.
    """
    stat = model.suffstat
    if stat is None:
        raise UnsupportedOperationError(f"{model.name} has no sufficient statistic; "
                                        "use mc_reference_prior")
    model.param_space.check(theta)
    outer = settings or FK_SETTINGS
    inner = outer.with_(rel_tol=min(outer.rel_tol * 1e-2, 1e-9))
    prior = pi_star or flat_prior()
    lo = working.lo if working is not None else model.param_space.lo
    hi = working.hi if working is not None else model.param_space.hi
    log_prior_theta = prior(theta)

    def log_post(t):
        like = stat.likelihood(t, k)
        return like(theta) + log_prior_theta - _posterior_log_norm(like, prior, lo, hi, inner)

    if stat.dim == 1:
        def f1(v):
            q = special.expit(v)
            w = q * special.expit(-v)
            return np.array([w[i] * log_post(stat.from_uniform(np.array([q[i]]), theta, k))
                             for i in range(v.size)])
        return integrate(f1, -_V_CUT, _V_CUT, outer, breakpoints=(-4.0, 0.0, 4.0))

    if stat.dim == 2 and stat.from_exponential is not None:
        # both integrands are analytic here, so start from one panel per segment
        outer = outer.with_(initial_panels=1)

        def f_share(s):
            out = np.empty(s.size)
            for i, si in enumerate(s):
                def f_radius(x, si=si):
                    vals = np.empty(x.size)
                    for j, xj in enumerate(x):
                        r = math.exp(xj)
                        v = np.array([r * si, r * (1.0 - si)])
                        vals[j] = r * r * math.exp(-r) * log_post(stat.from_exponential(v, theta, k))
                    return vals
                out[i] = integrate(f_radius, _LOG_R_RANGE[0], _LOG_R_RANGE[1], outer,
                                   breakpoints=(-3.0, 0.0, 2.0))
            return out
        return integrate(f_share, 0.0, 1.0, outer)
    raise UnsupportedOperationError("f_k quadrature supports one-dimensional statistics and "
                                    "two-dimensional ones with an exponential map")


def fk_quadrature(model: Model, theta: float, theta0: float, k: int,
                  settings: QuadratureSettings | None = None, pi_star: PriorFn | None = None,
                  working: CompactSet | None = None) -> float:
    """log f_k(theta) - log f_k(theta0), with no Monte Carlo error."""
    return (log_fk(model, theta, k, settings, pi_star, working)
            - log_fk(model, theta0, k, settings, pi_star, working))


# ---------------------------------------------------------------------------
# Monte Carlo reference prior
# ---------------------------------------------------------------------------

# log c_j needs far less accuracy than the Monte Carlo noise of mean r_j
MC_SETTINGS = QuadratureSettings(rel_tol=1e-7, initial_panels=2)


@dataclass(frozen=True)
class MCConfig:
    """Settings of the Monte Carlo reference-prior construction.

    ``pi_star`` defaults to the uniform density on ``working_interval``.
    With ``use_suffstat`` the sufficient statistic is simulated directly and
    its exact density is the likelihood.
    """

    k: int
    m: int
    seed: int
    working_interval: CompactSet
    quadrature: QuadratureSettings = field(default_factory=lambda: MC_SETTINGS)
    pi_star: Optional[PriorFn] = None
    use_suffstat: bool = False
    chunk: int = 50

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m < 2:
            raise ValueError("m must be >= 2 for a standard error")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def log_pi_star(self) -> PriorFn:
        if self.pi_star is not None:
            return self.pi_star
        width = self.working_interval.hi - self.working_interval.lo
        const = -math.log(width)
        return PriorFn(lambda th: np.full(np.shape(th), const), "uniform-working")


class _MCJob:
    """All inputs of one Monte Carlo run; workers receive it once."""

    def __init__(self, model: Model, grid: np.ndarray, config: MCConfig):
        self.model = model
        self.grid = grid
        self.config = config
        self.prior = config.log_pi_star
        if config.use_suffstat and model.suffstat is None:
            raise UnsupportedOperationError(f"{model.name} has no sufficient statistic")

    def replicate(self, g: int, j: int) -> float:
        cfg, model = self.config, self.model
        theta = float(self.grid[g])
        rng = substream(cfg.seed, "reference", g, j)
        if cfg.use_suffstat:
            stat = model.suffstat
            t = stat.from_uniform(open_uniform(rng, stat.dim), theta, cfg.k)
            like = stat.likelihood(t, cfg.k)
        else:
            like = model.likelihood(model.sample(theta, rng, cfg.k))
        at_theta = like(theta)
        if not math.isfinite(at_theta):
            raise InvariantViolation(
                f"likelihood vanishes at the simulating theta={theta} (replicate {j})")
        w = cfg.working_interval
        lo, hi = like.restrict(w.lo, w.hi)
        try:
            log_c = log_integrate(lambda th: like.fn(th) + self.prior.log_value(th), lo, hi,
                                  cfg.quadrature, breakpoints=like.breakpoints(lo, hi))
        except QuadratureError as exc:
            raise QuadratureError(
                f"c_j quadrature failed at theta={theta}, replicate {j}: {exc}",
                estimate=exc.estimate, gap=exc.gap) from exc
        return at_theta + float(self.prior(theta)) - log_c

    def run(self, task):
        g, j0, j1 = task
        return g, j0, np.array([self.replicate(g, j) for j in range(j0, j1)])


_ACTIVE_JOB: Optional[_MCJob] = None


def _install_job(job):
    global _ACTIVE_JOB
    _ACTIVE_JOB = job


def _run_task(task):
    return _ACTIVE_JOB.run(task)


def default_workers() -> int:
    env = os.environ.get("REFPRIOR_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _execute(job, tasks, workers: int):
    """Run tasks serially or on a process pool; results come back keyed by task."""
    if workers <= 1 or len(tasks) <= 1:
        return [job.run(t) for t in tasks]
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else None)
    # with fork the job is inherited, so closures inside models need no pickling
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                             initializer=_install_job, initargs=(job,)) as pool:
        return list(pool.map(_run_task, tasks))


def mc_reference_prior(model: Model, grid: Sequence[float], anchor: float, config: MCConfig,
                       workers: int = 1) -> PriorTable:
    """Monte Carlo reference prior on ``grid``, normalized at ``anchor``.

    Replicate j at grid index g uses the substream (seed, g, j), so the
    table is bit-identical for any ``workers``.  ``stderr`` combines the
    standard errors of the mean r at theta and at the anchor, which use
    independent streams.

    Returns
    -------
    PriorTable
        ``meta`` records k, m, seed, the model name and the raw per-point
        mean and standard error of r.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a strictly increasing nonempty vector")
    if not np.any(grid == anchor):
        raise ValueError(f"anchor {anchor!r} is not a grid point")
    model.param_space.check(grid)
    w = config.working_interval
    if not (np.all(grid > w.lo) and np.all(grid < w.hi)):
        raise ValueError("every grid point must lie strictly inside the working interval")
    job = _MCJob(model, grid, config)
    tasks = [(g, j0, min(j0 + config.chunk, config.m))
             for g in range(grid.size) for j0 in range(0, config.m, config.chunk)]
    r = np.empty((grid.size, config.m))
    for g, j0, vals in _execute(job, tasks, workers):
        r[g, j0:j0 + vals.size] = vals
    mean = r.mean(axis=1)
    se = r.std(axis=1, ddof=1) / math.sqrt(config.m)
    a = int(np.flatnonzero(grid == anchor)[0])
    stderr = np.sqrt(se ** 2 + se[a] ** 2)
    stderr[a] = 0.0
    meta = {
        "k": config.k, "m": config.m, "seed": int(config.seed), "model": model.name,
        "use_suffstat": config.use_suffstat,
        "working_interval": [w.lo, w.hi],
        "pi_star": config.log_pi_star.label,
        "mean_r": mean.tolist(), "se_r": se.tolist(),
    }
    return normalize_at(grid, mean, anchor, stderr, meta)


# ---------------------------------------------------------------------------
# reparametrization and the triangular diagnostics
# ---------------------------------------------------------------------------

def pushforward_prior(table: PriorTable, phi: Callable, dphi: Callable) -> PriorTable:
    """Transport a tabulated prior through a monotone map phi.

    q(phi(theta)) = pi(theta) / |dphi/dtheta|, renormalized at phi(anchor).
    """
    d = np.asarray(dphi(table.grid), dtype=float)
    if np.any(d == 0) or not (np.all(d > 0) or np.all(d < 0)) or not np.all(np.isfinite(d)):
        raise DomainError("map derivative must be finite, nonzero and of one sign on the grid")
    new_grid = np.asarray(phi(table.grid), dtype=float)
    anchor = float(new_grid[table.anchor_index])
    log_vals = table.log_pi - np.log(np.abs(d))
    stderr = table.stderr.copy()
    if d[0] < 0:
        new_grid, log_vals, stderr = new_grid[::-1], log_vals[::-1], stderr[::-1]
    meta = dict(table.meta)
    meta["pushforward"] = True
    return normalize_at(new_grid, log_vals, anchor, stderr, meta)


def triangular_root_estimator(sample) -> float:
    """Solution of F_k(t) = t for the empirical cdf F_k of a sample in (0, 1).

    Bisection over order-statistic indices keeps lo with F_k(x_(lo)) < x_(lo)
    (index 0 stands for the origin) and hi with F_k(x_(hi)) >= x_(hi); on
    exit the empirical cdf jumps across the identity at x_(hi), which is
    returned (the left end of the crossing step).
    """
    x = np.sort(np.asarray(sample, dtype=float).reshape(-1))
    k = x.size
    if k == 0 or x[0] <= 0 or x[-1] >= 1:
        raise DomainError("sample values must lie in (0, 1)")
    lo, hi = 0, k
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid / k >= x[mid - 1]:
            hi = mid
        else:
            lo = mid
    return float(x[hi - 1])


def root_estimator_prior(model: Model, grid: Sequence[float], anchor: float, k: int,
                         reps: int, seed: int) -> PriorTable:
    """Heuristic prior proportional to 1 / sd of the root estimator.

    If the estimator is asymptotically normal with standard deviation
    s(theta)/sqrt(k) and nearly sufficient, the reference prior is
    proportional to 1/s(theta).  The spread is estimated by simulation at each
    grid point; stderr uses the normal-theory error of log sd,
    1/sqrt(2 (reps - 1)).
    """
    grid = np.asarray(grid, dtype=float)
    log_sd = np.empty(grid.size)
    for g, theta in enumerate(grid):
        est = np.empty(reps)
        for j in range(reps):
            rng = substream(seed, "diagnostic", g, j)
            est[j] = triangular_root_estimator(model.sample(theta, rng, k))
        log_sd[g] = math.log(np.std(est, ddof=1))
    a = int(np.flatnonzero(grid == anchor)[0])
    stderr = np.full(grid.size, 1.0 / math.sqrt(reps - 1))   # sqrt(2) * 1/sqrt(2(reps-1))
    stderr[a] = 0.0
    return normalize_at(grid, -log_sd, anchor, stderr,
                        {"k": k, "m": reps, "seed": seed, "model": model.name})


def beta_half_density(theta) -> np.ndarray:
    """Be(theta | 1/2, 1/2) = 1 / (pi sqrt(theta (1 - theta)))."""
    th = np.asarray(theta, dtype=float)
    return 1.0 / (math.pi * np.sqrt(th * (1.0 - th)))
