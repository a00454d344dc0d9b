"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
Seeds are fixed in the shipped configs and below; tolerances are the
criteria's own.
"""

import math

import numpy as np
import pytest

from refprior import cli
from refprior.divergence import (CompactSequence, closed_form_location_discrepancy,
                                 discrepancy_monotonicity, expected_discrepancy,
                                 fmn_discrepancy_exact, permissibility_verdict)
from refprior.errors import NonRegularModelError
from refprior.models import UniformPairSpec, get_model, iid_replicate
from refprior.numerics import digamma
from refprior.priors import CompactSet, flat_prior, reciprocal_prior
from refprior.reference import (MCConfig, beta_half_density, fisher_information, j2_closed_form,
                                j2_series_oracle, jeffreys_prior, mc_reference_prior,
                                nonregular_prior, pushforward_prior, theta_theta2_prior,
                                uniform_pair_prior)

RESULTS: list[str] = []
_TABLES: dict = {}


def report(label: str, passed: bool, detail: str):
    line = f"{label}: {'PASS' if passed else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    return passed


def compute_config(name: str, workers: int = 1):
    model, grid, anchor, config = cli._validate_compute(cli.builtin_config(name))
    return mc_reference_prior(model, grid, anchor, config, workers=workers)


def cached_table(name: str):
    if name not in _TABLES:
        _TABLES[name] = compute_config(name)
    return _TABLES[name]


def table_bytes(table) -> bytes:
    return cli.table_to_csv(table).encode("utf-8")


# ---------------------------------------------------------------------------


def test_criterion_1_uniform_pair_reproduction():
    tab = cached_table("example10")
    pts = np.geomspace(1.2, 8.0, 9)
    idx = [int(np.flatnonzero(tab.grid == t)[0]) for t in pts]
    oracle = np.array([theta_theta2_prior(t) / theta_theta2_prior(2.0) for t in pts])
    err = np.abs(tab.pi[idx] - oracle)
    ok = report("criterion 1 [uniform pair, k=500, m=1000, seed 42, tol 5e-3]",
                bool(np.all(err <= 5e-3)),
                f"max |pi - oracle| = {err.max():.4g} at theta={pts[np.argmax(err)]:.4g}; "
                f"max stderr(log) = {tab.stderr.max():.3g}")
    assert ok


def _triangular_check(name, tol, label):
    tab = cached_table(name)
    scaled = tab.pi * (2.0 / math.pi)
    err = np.abs(scaled - beta_half_density(tab.grid))
    ok = report(label, bool(np.all(err <= tol)),
                f"max |pi - Be(1/2,1/2)| = {err.max():.4g} at theta={tab.grid[np.argmax(err)]:.4g}; "
                f"max stderr(log) = {tab.stderr.max():.3g}")
    assert ok


def test_criterion_2_triangular_reduced():
    _triangular_check("example11_reduced", 0.05,
                      "criterion 2 reduced [triangular, k=500, m=500, tol 0.05]")


@pytest.mark.slow
def test_criterion_2_triangular_extended():
    _triangular_check("example11_extended", 0.02,
                      "criterion 2 extended [triangular, k=2000, m=2500, tol 0.02]")


def test_criterion_3_fmn_limit():
    vals = [fmn_discrepancy_exact(i) for i in (10, 100, 1000)]
    near = abs(vals[-1] - math.log(3.0)) <= 0.02
    nondecreasing = bool(np.all(np.diff(vals) >= 0))
    ok = report("criterion 3 [FMN uniform prior, |value(1000) - log 3| <= 0.02, nondecreasing]",
                near and nondecreasing,
                "values " + ", ".join(f"{v:.5f}" for v in vals) + f"; log 3 = {math.log(3):.5f}")
    assert ok


def test_criterion_4_location_decay():
    model = get_model("normal-location")
    rows = []
    for i in (1, 2, 4, 8):
        est = expected_discrepancy(model, flat_prior(), CompactSet(-i, i))
        ref = closed_form_location_discrepancy(model.base, i)
        rows.append((i, est.value, ref))
    agree = all(abs(v - r) <= 1e-4 for _, v, r in rows)
    small = rows[-1][1] < 0.05
    ok = report("criterion 4 [normal location, quadrature vs closed form 1e-4, < 0.05 by i=8]",
                agree and small,
                "; ".join(f"i={i}: {v:.6f} vs {r:.6f}" for i, v, r in rows)
                + f"; agreement {'holds' if agree else 'fails'}, value(8) < 0.05 "
                + ("holds" if small else "fails"))
    assert ok


def test_criterion_5_logtail_divergence():
    model = get_model("logtail-location")
    cutoffs = [1e3, 1e6, 1e9]
    est = expected_discrepancy(model, flat_prior(), CompactSet(-1, 1), cutoffs=cutoffs)
    series = est.meta["cutoff_values"]
    increasing = bool(np.all(np.diff(series) > 0))
    verdict = permissibility_verdict(model, flat_prior(), CompactSequence.symmetric(), [1, 2],
                                     cutoffs=cutoffs)
    ok = report("criterion 5 [logtail, increasing over cutoffs 1e3/1e6/1e9, not permissible]",
                increasing and verdict.status == "not-permissible-evidence",
                "cutoff values " + ", ".join(f"{v:.5f}" for v in series)
                + f"; verdict {verdict.status}")
    assert ok


def test_criterion_6_oracle_identities():
    spec = UniformPairSpec()
    grid = np.geomspace(1.2, 8.0, 20)
    lhs = np.array([uniform_pair_prior(spec, t) / uniform_pair_prior(spec, 2.0) for t in grid])
    rhs = np.array([theta_theta2_prior(t) / theta_theta2_prior(2.0) for t in grid])
    ratio_err = float(np.max(np.abs(lhs / rhs - 1.0)))
    rng = np.random.default_rng(6)
    pairs = rng.uniform(0.1, 10.0, size=(50, 2))
    j2_err = max(abs(j2_series_oracle(b1, b2) - j2_closed_form(b1, b2)) for b1, b2 in pairs)
    z = np.linspace(0.1, 50.0, 50)
    psi_err = float(np.max(np.abs(digamma(z + 1) - digamma(z) - 1 / z)))
    ok = report("criterion 6 [closed-form ratio, J2 series, digamma recurrence, each 1e-10]",
                ratio_err <= 1e-10 and j2_err <= 1e-10 and psi_err <= 1e-10,
                f"ratio {ratio_err:.2e}, J2 {j2_err:.2e}, recurrence {psi_err:.2e}")
    assert ok


def _within(a, b):
    """Largest |difference| in combined stderr units between two log tables."""
    diff = np.abs(a.log_pi - b.log_pi)
    se = np.sqrt(a.stderr ** 2 + b.stderr ** 2)
    z = np.where(diff == 0.0, 0.0, diff / np.maximum(se, 1e-300))
    return bool(np.all(z <= 2.0)), float(z.max())


def test_criterion_7_invariance_suite():
    lines, oks = [], []

    # sample-size independence: one observation vs an iid 3-vector
    grid = [-1.0, 0.0, 1.0]
    w = CompactSet(-6.0, 6.0)
    base = get_model("normal-location")
    t1 = mc_reference_prior(base, grid, 0.0, MCConfig(20, 400, 71, w))
    t3 = mc_reference_prior(iid_replicate(base, 3), grid, 0.0, MCConfig(20, 400, 72, w))
    ok, z = _within(t1, t3)
    oks.append(ok), lines.append(f"sample size max z {z:.2f}")

    # sufficient statistic path vs raw samples
    grid = [1.5, 2.0, 3.0]
    w = CompactSet(1.05, 12.0)
    pair = get_model("uniform-pair")
    raw = mc_reference_prior(pair, grid, 2.0, MCConfig(50, 400, 73, w))
    red = mc_reference_prior(pair, grid, 2.0, MCConfig(50, 400, 74, w, use_suffstat=True))
    ok, z = _within(raw, red)
    oks.append(ok), lines.append(f"suffstat max z {z:.2f}")

    # reparametrization: scale table through log vs the log-data location table
    theta = np.array([0.5, 1.0, 2.0])
    scale = mc_reference_prior(get_model("exponential-scale"), theta, 1.0,
                               MCConfig(20, 400, 75, CompactSet(0.05, 20.0)))
    pushed = pushforward_prior(scale, np.log, lambda t: 1.0 / t)
    loc = mc_reference_prior(get_model("logexp-location"), np.log(theta), 0.0,
                             MCConfig(20, 400, 76, CompactSet(math.log(0.05), math.log(20.0))))
    ok, z = _within(pushed, loc)
    oks.append(ok), lines.append(f"pushforward max z {z:.2f}")

    # monotone discrepancy, 20 seeded trials per model
    cases = [("normal-location", flat_prior(), CompactSet(-3.0, 3.0)),
             ("exponential-scale", reciprocal_prior(), CompactSet(0.5, 2.0))]
    for name, prior, region in cases:
        worst, bad = -math.inf, 0
        for trial in range(20):
            a, b = discrepancy_monotonicity(get_model(name), prior, region, (1, 2),
                                            seed=7000 + trial, draws=640)
            combined = math.hypot(a.stderr, b.stderr)
            excess = (b.value - a.value) / combined
            worst = max(worst, excess)
            bad += excess > 2.0
        oks.append(bad == 0)
        lines.append(f"monotone {name}: {bad}/20 violations, max excess {worst:.2f} se")

    ok = report("criterion 7 [invariance suite, 2 combined stderr]", all(oks), "; ".join(lines))
    assert ok


def test_criterion_8_closed_form_priors():
    grid = np.array([0.5, 1.0, 2.0, 4.0, 8.0])
    jeff = np.array([jeffreys_prior(get_model("exponential-scale"), t) for t in grid])
    nonreg = np.array([nonregular_prior(get_model("uniform-scale"), t) for t in grid])
    jeff_err = float(np.max(np.abs(jeff / jeff[1] * grid - 1.0)))
    nonreg_err = float(np.max(np.abs(nonreg / nonreg[1] * grid - 1.0)))
    try:
        fisher_information(get_model("triangular"), 0.5)
        raised = False
    except NonRegularModelError:
        raised = True
    ok = report("criterion 8 [Jeffreys and nonregular priors prop. to 1/theta within 1e-4, "
                "triangular nonregular]",
                jeff_err <= 1e-4 and nonreg_err <= 1e-4 and raised,
                f"Jeffreys ratio error {jeff_err:.2e}, nonregular ratio error {nonreg_err:.2e}, "
                f"triangular {'raises' if raised else 'does not raise'}")
    assert ok


def test_criterion_9_determinism():
    rows, same = [], True
    for name in ("example10", "example11_reduced"):
        one = table_bytes(cached_table(name))
        eight = table_bytes(compute_config(name, workers=8))
        same &= one == eight
        rows.append(f"{name}: {'identical' if one == eight else 'different'}")
    ok = report("criterion 9 [1 vs 8 workers, byte-identical tables]", same, "; ".join(rows))
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
