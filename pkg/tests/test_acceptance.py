"""End-to-end acceptance checks, one test per criterion.

Every test reports a single ``criterion N: PASS|FAIL`` line through the
``acceptance`` fixture (collected again in the terminal summary) and then
asserts.  Tolerances and runtime budgets are pinned as module constants.
"""

import itertools
import math
import time

import numpy as np
import pytest

from multransfer.box_calculus import (
    BoxSpec,
    box_p,
    box_q,
    clipped_geo_mean,
    dual_weights,
    geo_mean,
    hat_normalize,
    param_map,
    pseudocompound,
)
from multransfer.exponents import estimate_exponent, multiplicative_minimum, ordinary_minimum
from multransfer.instances import MULT_SHAPES, mahler_instances, mult_instances, preset
from multransfer.lattice_engine import (
    TargetMatrix,
    _floor_bounds,
    dual_basis,
    find_dual_point,
    find_primal_point,
    naive_points,
    primal_basis,
)
from multransfer.transference import (
    TransferenceConstants,
    check_exponent_transfer,
    check_mahler,
    check_mult_transference,
    check_proof_chain,
    mahler_constant,
)

ALGEBRA_REL = 1e-12
DOUBLE_PSEUDO_REL = 1e-10
HAT_REL = 1e-10
PARAM_REL = 1e-12
BASIS_ABS = 1e-12
PAIRING_ABS = 1e-9
ORACLE_PSI_ABS = 1e-12
ORACLE_VOLUME = 10**5
SQRT_ROW_RANGE = (1.7, 2.6)
SQRT_ROW_T_MAX = 1e4
SABOTAGE_C = 0.3
SEED = 7

SHAPES = [(2, 1), (1, 2), (2, 2), (3, 1), (1, 3), (3, 2), (2, 3)]


def random_shape(rng):
    while True:
        m, n = (int(v) for v in rng.integers(1, 5, 2))
        if m + n >= 3:
            return m, n


def test_criterion_1_algebra(acceptance):
    rng = np.random.default_rng([SEED, 1])
    start = time.perf_counter()
    worst_dual = worst_double = 0.0
    for _ in range(1000):
        m, n = random_shape(rng)
        eta = np.exp(rng.uniform(-3, 3, m + n))
        box = BoxSpec(eta[:m], eta[m:])
        pc = pseudocompound(box)
        lam_s, mu_s = dual_weights(box.lam, box.mu)
        ref = np.concatenate([lam_s, mu_s])
        worst_dual = max(worst_dual, float(np.max(np.abs(pc.eta - ref) / ref)))
        twice = pseudocompound(pc).eta
        expected = math.exp((box.d - 2) * float(np.sum(np.log(eta)))) * eta
        worst_double = max(worst_double, float(np.max(np.abs(twice - expected) / expected)))
    elapsed = time.perf_counter() - start
    ok = worst_dual <= ALGEBRA_REL and worst_double <= DOUBLE_PSEUDO_REL and elapsed < 5
    acceptance(1, ok, f"dual rel err {worst_dual:.1e}, double rel err {worst_double:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_hat(acceptance):
    rng = np.random.default_rng([SEED, 2])
    start = time.perf_counter()
    bad = []
    for k in range(1000):
        m = int(rng.integers(1, 7))
        logs = rng.uniform(-3, 3, m)
        logs += rng.uniform(0, 1.5) - logs.mean()
        lam = np.exp(logs)
        h = hat_normalize(lam)
        target = geo_mean(lam)
        again = hat_normalize(h.hat)
        checks = (
            h.hat.min() >= 1,
            math.isclose(geo_mean(h.hat), target, rel_tol=HAT_REL),
            math.isclose(clipped_geo_mean(h.hat), target, rel_tol=HAT_REL),
            again.pivot_p == 0 and np.array_equal(again.hat, h.hat),
            h.kappa >= 1,
        )
        if not all(checks):
            bad.append(k)
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 2
    acceptance(2, ok, f"{len(bad)} of 1000 tuples failed, {elapsed:.2f}s")
    assert ok


def test_criterion_3_lattice_transference(acceptance):
    start = time.perf_counter()
    specs = mahler_instances(300, SEED)
    reports = [check_mahler(s.theta, s.box) for s in specs]
    verdicts = [r.verdict for r in reports]
    dims = {s.theta.d for s in specs}
    nonvacuous = sum(v != "vacuous" for v in verdicts) / len(verdicts)
    violations = verdicts.count("VIOLATION")
    inconclusive = verdicts.count("inconclusive")
    sabotaged = [check_mahler(s.theta, s.box, c=SABOTAGE_C).verdict for s in specs]
    caught = sabotaged.count("VIOLATION")
    elapsed = time.perf_counter() - start
    ok = (
        dims == {3, 4, 5}
        and nonvacuous >= 0.8
        and violations == 0
        and inconclusive == 0
        and caught >= 1
        and elapsed < 120
    )
    acceptance(
        3,
        ok,
        f"300 instances d={sorted(dims)}, non-vacuous {nonvacuous:.0%}, violations {violations}, "
        f"inconclusive {inconclusive}, sabotage c={SABOTAGE_C} violations {caught}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_4_multiplicative_transference(acceptance):
    start = time.perf_counter()
    specs = mult_instances(300, SEED)
    assert {(s.theta.m, s.theta.n) for s in specs} == set(MULT_SHAPES)
    assert all(geo_mean(s.box.lam) >= 1 - 1e-12 for s in specs)
    verdicts = [check_mult_transference(s.theta, s.box.lam, s.box.mu).verdict for s in specs]
    violations = verdicts.count("VIOLATION")
    nontrivial = [s for s in specs if s.box.lam.min() < 1]
    chain_failures = []
    for s in nontrivial:
        r = check_proof_chain(s.theta, s.box.lam, s.box.mu)
        if len(r.steps) != 5 or not all(step.passed for step in r.steps):
            chain_failures.append((s.index, r.failed_step))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and not chain_failures and elapsed < 180
    acceptance(
        4,
        ok,
        f"300 instances, violations {violations}, verified {verdicts.count('verified')}; "
        f"proof chain on {len(nontrivial)} nontrivial instances failed at {chain_failures}, {elapsed:.1f}s",
    )
    assert violations == 0, "multiplicative transference violated"
    assert not chain_failures, f"proof chain failed (index, step): {chain_failures}"
    assert elapsed < 180


def test_criterion_5_parameter_mapping(acceptance):
    rng = np.random.default_rng([SEED, 5])
    start = time.perf_counter()
    worst = 0.0
    for m, n in SHAPES:
        for _ in range(100):
            s = math.exp(rng.uniform(0.01, math.log(1e4)))
            delta = rng.uniform(0.05, 6.0)
            pp = param_map(s, delta, m, n)
            got = pseudocompound(box_p(pp.t, pp.gamma, m, n)).eta
            want = box_q(s, delta, m, n).eta
            worst = max(worst, float(np.max(np.abs(got - want) / want)))
    elapsed = time.perf_counter() - start
    ok = worst <= PARAM_REL and elapsed < 1
    acceptance(5, ok, f"{100 * len(SHAPES)} points, max rel err {worst:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_6_duality(acceptance):
    rng = np.random.default_rng([SEED, 6])
    worst_basis = worst_pair = 0.0
    thetas = []
    for k in range(100):
        m, n = SHAPES[k % len(SHAPES)]
        th = TargetMatrix(rng.uniform(-2, 2, (n, m)))
        thetas.append(th)
        b, bs = primal_basis(th).columns, dual_basis(th).columns
        worst_basis = max(worst_basis, float(np.max(np.abs(b.T @ bs - np.eye(th.d)))))
    for k in range(1000):
        th = thetas[k % len(thetas)]
        z = primal_basis(th).point(rng.integers(-20, 21, th.d))
        w = dual_basis(th).point(rng.integers(-20, 21, th.d))
        v = float(z @ w)
        worst_pair = max(worst_pair, abs(v - round(v)))
    ok = worst_basis <= BASIS_ABS and worst_pair <= PAIRING_ABS
    acceptance(6, ok, f"max |B^T B* - I| {worst_basis:.1e}, max pairing distance to Z {worst_pair:.1e}")
    assert ok


def ordinary_oracle(theta, t):
    """Full-box scan |x|_inf <= t written independently of the library (m <= 2)."""
    r = math.floor(t)
    axis = np.arange(-r, r + 1)
    best = math.inf
    for x0 in axis:
        xs = np.stack(np.broadcast_arrays(x0, axis), axis=1) if theta.m == 2 else axis[:, None]
        vals = xs @ theta.theta.T
        err = np.max(np.abs(vals - np.rint(vals)), axis=1)
        err[~np.any(xs != 0, axis=1)] = math.inf
        best = min(best, float(err.min()))
        if theta.m == 1:
            break
    return best


def test_criterion_7_exponent_estimators(acceptance):
    start = time.perf_counter()
    details = []

    infinite = []
    for name in ("rational", "rational-col", "zero"):
        th = preset(name)
        for kind in ("ordinary", "multiplicative"):
            est = estimate_exponent(th, kind, 2, 2, 4, 2)
            infinite.append(est.infinite and est.trace[-1].t <= 16)
    details.append(f"infinity flags {sum(infinite)}/{len(infinite)}")

    row = preset("sqrt23-row")
    est = estimate_exponent(row, "ordinary", 2, 2, 13, 4)
    in_range = SQRT_ROW_RANGE[0] <= est.estimate <= SQRT_ROW_RANGE[1] and est.trace[-1].t <= SQRT_ROW_T_MAX
    oracle_err = max(abs(r.psi - ordinary_oracle(row, r.t)) for r in est.trace if r.t <= 1024)
    oracle_ok = oracle_err <= ORACLE_PSI_ABS
    details.append(f"sqrt row estimate {est.estimate:.3f} at t<={est.trace[-1].t:g}, oracle err {oracle_err:.0e}")

    rng = np.random.default_rng([SEED, 7])
    matrices = [row, preset("sqrt23-col"), preset("cbrt24-row")]
    matrices += [TargetMatrix(rng.random((n, m))) for m, n in MULT_SHAPES for _ in range(3)]
    evaluated = order_bad = 0
    for th in matrices:
        steps = 4 if th.m >= 3 else 6
        ords = estimate_exponent(th, "ordinary", 2, 2, steps, 2).trace
        mults = estimate_exponent(th, "multiplicative", 2, 2, steps, 2).trace
        for a, b in zip(ords, mults):
            evaluated += 1
            gamma_ord = math.inf if a.psi == 0 else a.gamma_t
            gamma_mul = math.inf if b.psi == 0 else b.gamma_t
            if not (b.psi <= a.psi and gamma_mul >= gamma_ord):
                order_bad += 1
    details.append(f"psi_x <= psi at {evaluated - order_bad}/{evaluated} scales")

    elapsed = time.perf_counter() - start
    ok = all(infinite) and in_range and oracle_ok and order_bad == 0 and elapsed < 120
    acceptance(7, ok, ", ".join(details) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_8_exponent_transfer(acceptance):
    rng = np.random.default_rng([SEED, 8])
    start = time.perf_counter()
    failures = incomplete = 0
    for k in range(20):
        m, n = MULT_SHAPES[k % len(MULT_SHAPES)]
        th = TargetMatrix(rng.random((n, m)))
        for kind in ("ordinary", "multiplicative"):
            rep = check_exponent_transfer(th, kind, scales=50, cap=4 * 10**7, informational=False)
            failures += rep.failures
            incomplete += 50 - rep.count("ok") - rep.count("infinite")
    elapsed = time.perf_counter() - start
    ok = failures == 0 and incomplete == 0
    acceptance(
        8, ok, f"20 matrices x 50 scales x 2 kinds, failures {failures}, unevaluated {incomplete}, {elapsed:.1f}s"
    )
    assert ok


def naive_volume(theta, box, side):
    """Number of integer tuples the unpruned oracle visits."""
    lam_r, mu_r = _floor_bounds(box.lam), _floor_bounds(box.mu)
    t_abs = np.abs(theta.theta)
    if side == "primal":
        radii = list(lam_r) + list(np.floor(t_abs @ lam_r + box.mu + 1).astype(int))
    else:
        radii = list(np.floor(t_abs.T @ mu_r + box.lam + 1).astype(int)) + list(mu_r)
    return math.prod(2 * int(r) + 1 for r in radii)


def brute_ordinary(theta, t):
    r = math.floor(t)
    best = math.inf
    for x in itertools.product(range(-r, r + 1), repeat=theta.m):
        if any(x):
            vals = [sum(row[j] * x[j] for j in range(theta.m)) for row in theta.theta]
            best = min(best, max(abs(v - round(v)) for v in vals))
    return best


def brute_multiplicative(theta, t):
    bound = t**theta.m
    r = math.floor(bound)
    best = math.inf
    for x in itertools.product(range(-r, r + 1), repeat=theta.m):
        if any(x) and math.prod(max(1, abs(v)) for v in x) <= bound:
            vals = [sum(row[j] * x[j] for j in range(theta.m)) for row in theta.theta]
            best = min(best, math.prod(abs(v - round(v)) for v in vals) ** (1 / theta.n))
    return best


def test_criterion_9_oracle_equivalence(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng([SEED, 9])
    cases = []
    for s in mahler_instances(300, SEED) + mult_instances(300, SEED):
        cases.append((s.theta, s.box))
        lam_s, mu_s = dual_weights(s.box.lam, s.box.mu)
        cases.append((s.theta, BoxSpec(lam_s, mu_s)))
    for k in range(200):
        m, n = SHAPES[k % len(SHAPES)]
        eta = np.exp(rng.uniform(-2.0, 1.5, m + n))
        cases.append((TargetMatrix(rng.random((n, m))), BoxSpec(eta[:m], eta[m:])))

    compared = mismatches = skipped = 0
    for theta, box in cases:
        for side, search in (("primal", find_primal_point), ("dual", find_dual_point)):
            if naive_volume(theta, box, side) > ORACLE_VOLUME:
                skipped += 1
                continue
            oracle = naive_points(theta, box, side)
            for flag in (False, True):
                allowed = {p.integer_coords for p in oracle if p.nonzero_x or not flag}
                got = search(theta, box, require_nonzero_x=flag)
                compared += 1
                if (got is None) != (not allowed) or (got is not None and got.integer_coords not in allowed):
                    mismatches += 1

    psi_worst = 0.0
    for k, (m, n) in enumerate([(2, 1), (1, 2), (2, 2), (3, 1)]):
        th = TargetMatrix(rng.random((n, m)))
        for t in (2, 3.5, 7) if m < 3 else (2, 3.5):
            psi_worst = max(psi_worst, abs(ordinary_minimum(th, t).psi - brute_ordinary(th, t)))
        for t in (2, 4) if m < 3 else (2,):
            psi_worst = max(psi_worst, abs(multiplicative_minimum(th, t).psi - brute_multiplicative(th, t)))

    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and psi_worst <= ORACLE_PSI_ABS and compared > 0
    acceptance(
        9,
        ok,
        f"{compared} searches compared, {mismatches} mismatches, {skipped} over volume cap; "
        f"exponent minima max err {psi_worst:.0e}, {elapsed:.1f}s",
    )
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
