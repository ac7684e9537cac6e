"""Empirical checks of the transference implications on concrete instances.

Every check searches the dual side first.  An instance without a dual point
is *vacuous*; otherwise the scaled primal box is searched and the instance is
*verified* or a *VIOLATION*.  Enumeration caps make an instance
*inconclusive*, which is never counted as a pass.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import exponents
from .box_calculus import (
    REL_TOL,
    BoxSpec,
    PreconditionError,
    as_weights,
    box_p,
    box_q,
    clipped_geo_mean,
    dual_weights,
    family_membership,
    geo_mean,
    hat_normalize,
    param_map,
    primal_weights,
    pseudocompound,
    rel_close,
)
from .lattice_engine import (
    DEFAULT_CAP,
    CapExceeded,
    LatticePoint,
    TargetMatrix,
    dual_basis,
    find_dual_point,
    find_primal_point,
    primal_basis,
    truncate,
    verify_projection,
    verify_sublattice_embedding,
)

Verdict = Literal["vacuous", "verified", "VIOLATION", "inconclusive"]


def mahler_constant(d: int) -> float:
    """``sqrt(d)^(1/(d-1))``, the scaling for a determinant-one lattice in ``R^d``."""
    return math.sqrt(d) ** (1.0 / (d - 1))


@dataclass(frozen=True)
class TransferenceConstants:
    c: float
    c1: float
    c2: float | None = None

    @classmethod
    def for_instance(cls, m: int, n: int, p: int | None = None) -> "TransferenceConstants":
        d = m + n
        c1 = math.sqrt(n + 1) ** (1.0 / n)
        c2 = None if p is None else mahler_constant(d - p)
        return cls(c=mahler_constant(d), c1=c1, c2=c2)

    def ordered(self) -> bool:
        ok = 1 < self.c <= self.c1
        if self.c2 is not None:
            ok = ok and 1 < self.c2 <= self.c1
        return ok


@dataclass
class Step:
    name: str
    passed: bool
    detail: str = ""
    witness: LatticePoint | None = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "witness": None if self.witness is None else self.witness.as_dict(),
        }


@dataclass
class VerificationReport:
    instance: dict
    verdict: Verdict = "vacuous"
    dual_hit: LatticePoint | None = None
    primal_hit: LatticePoint | None = None
    steps: list[Step] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def failed_step(self) -> str | None:
        for s in self.steps:
            if not s.passed:
                return s.name
        return None

    def as_dict(self, timing: bool = False) -> dict:
        out = {
            "instance": self.instance,
            "verdict": self.verdict,
            "dual_hit": None if self.dual_hit is None else self.dual_hit.as_dict(),
            "primal_hit": None if self.primal_hit is None else self.primal_hit.as_dict(),
            "steps": [s.as_dict() for s in self.steps],
        }
        if timing:
            out["elapsed_s"] = self.elapsed
        return out


def _describe(theta: TargetMatrix, **extra) -> dict:
    desc = {"m": theta.m, "n": theta.n, "theta": theta.theta.tolist()}
    for k, v in extra.items():
        desc[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return desc


# ----------------------------------------------------------- Theorem-level


def check_mahler(
    theta: TargetMatrix,
    box: BoxSpec,
    c: float | None = None,
    cap: int = DEFAULT_CAP,
    seed: int | None = None,
) -> VerificationReport:
    """Dual point in the pseudocompound of ``box`` implies a primal point in ``c * box``.

    ``c`` defaults to :func:`mahler_constant`; overriding it is for negative controls.
    """
    start = time.perf_counter()
    c = mahler_constant(theta.d) if c is None else c
    report = VerificationReport(_describe(theta, lam=box.lam, mu=box.mu, seed=seed, c=c))
    try:
        report.dual_hit = find_dual_point(theta, pseudocompound(box), cap=cap)
        if report.dual_hit is not None:
            report.primal_hit = find_primal_point(theta, box.scaled(c), cap=cap)
            report.verdict = "verified" if report.primal_hit is not None else "VIOLATION"
    except CapExceeded as exc:
        report.verdict = "inconclusive"
        report.steps.append(Step("search", False, str(exc)))
    report.elapsed = time.perf_counter() - start
    return report


def hat_properties(lam: np.ndarray, hat: np.ndarray, rel: float = REL_TOL) -> bool:
    """``min hat >= 1`` and ``Pi'(hat) = Pi(hat) = Pi(lam)``."""
    return (
        float(hat.min()) >= 1 - rel
        and rel_close(clipped_geo_mean(hat), geo_mean(hat), rel)
        and rel_close(geo_mean(hat), geo_mean(lam), rel)
    )


def _sorted_frame(theta: TargetMatrix, lam: np.ndarray, order: tuple[int, ...]):
    return theta.permute_columns(order), lam[list(order)]


def _off_prefix_dual_point(
    theta: TargetMatrix, box: BoxSpec, p: int, cap: int
) -> LatticePoint | None:
    """A dual point in ``box`` whose coordinates after the first ``p`` are not all zero.

    Points with ``b != 0`` qualify automatically; with ``b = 0`` a unit vector
    ``e_j``, ``j >= p``, is the only candidate shape.
    """
    unit = np.flatnonzero(np.floor(box.lam[p:] * (1 + 1e-12)) >= 1)
    if unit.size:
        a = np.zeros(theta.m, dtype=np.int64)
        a[p + int(unit[0])] = 1
        z = np.concatenate([a.astype(float), np.zeros(theta.n)])
        return LatticePoint(tuple(int(v) for v in np.concatenate([a, np.zeros(theta.n, dtype=np.int64)])),
                            tuple(float(v) for v in z), False)
    return find_dual_point(theta, box, require_nonzero_x=True, cap=cap)


def check_mult_transference(
    theta: TargetMatrix,
    lam,
    mu,
    c1: float | None = None,
    cap: int = DEFAULT_CAP,
    seed: int | None = None,
) -> VerificationReport:
    """Dual point in ``P(lam*, mu*)`` implies a primal point in ``c1 * P(hat lam, mu)``.

    Besides the verdict, the report says whether the dual hit has a nonzero
    projection past the pivot block.  When every dual hit projects to zero the
    implication can genuinely fail for small ``prod(lam) prod(mu)``; such
    reports carry a ``degenerate-dual-hit`` step so they can be told apart.

    Raises:
        PreconditionError: if ``Pi(lam) < 1``.
    """
    start = time.perf_counter()
    lam = as_weights(lam)
    mu = as_weights(mu)
    consts = TransferenceConstants.for_instance(theta.m, theta.n)
    c1 = consts.c1 if c1 is None else c1
    hat = hat_normalize(lam)
    report = VerificationReport(
        _describe(theta, lam=lam, mu=mu, seed=seed, c1=c1, hat=hat.hat, pivot_p=hat.pivot_p)
    )
    report.steps.append(Step("hat-properties", hat_properties(lam, hat.hat)))
    lam_s, mu_s = dual_weights(lam, mu)
    dual_box = BoxSpec(lam_s, mu_s)
    try:
        report.dual_hit = find_dual_point(theta, dual_box, cap=cap)
        if report.dual_hit is None:
            report.verdict = "vacuous"
        else:
            report.primal_hit = find_primal_point(theta, BoxSpec(hat.hat, mu).scaled(c1), cap=cap)
            report.verdict = "verified" if report.primal_hit is not None else "VIOLATION"
            if hat.pivot_p:
                th_s, _ = _sorted_frame(theta, lam, hat.sort_order)
                box_s = BoxSpec(lam_s[list(hat.sort_order)], mu_s)
                off = _off_prefix_dual_point(th_s, box_s, hat.pivot_p, cap)
                if off is None:
                    report.steps.append(
                        Step("degenerate-dual-hit", True, "every dual hit vanishes past the pivot block")
                    )
    except CapExceeded as exc:
        report.verdict = "inconclusive"
        report.steps.append(Step("search", False, str(exc)))
    if not report.steps[0].passed and report.verdict != "inconclusive":
        report.verdict = "VIOLATION"
    report.elapsed = time.perf_counter() - start
    return report


def truncated_inclusion_holds(lam_star_down, mu_star, kappa: float, rel: float = REL_TOL) -> bool:
    """``P(lam*_down, mu*)`` inside ``P(kappa lam*_down, mu*)``, compared bound by bound."""
    lam_star_down = np.asarray(lam_star_down, dtype=float)
    inner = np.concatenate([lam_star_down, np.asarray(mu_star, dtype=float)])
    outer = np.concatenate([kappa * lam_star_down, np.asarray(mu_star, dtype=float)])
    return bool(np.all(inner <= outer * (1 + rel)))


def check_proof_chain(
    theta: TargetMatrix,
    lam,
    mu,
    cap: int = DEFAULT_CAP,
    seed: int | None = None,
) -> VerificationReport:
    """Check each implication of the truncation argument separately.

    Works in the frame where ``lam`` is sorted ascending (columns of ``theta``
    permuted to match); witnesses are reported in that frame.  Steps:

    1. ``pivot``: ``p`` is well defined and ``p < m``.
    2. ``inclusion``: ``kappa > 1``, the pseudocompound of ``P(hat_down, mu)`` is
       ``P(kappa lam*_down, mu*)``, and ``P(lam*_down, mu*)`` sits inside it.
    3. ``projection``: projecting the dual lattice gives the truncated dual
       lattice, and a dual hit projects to a nonzero truncated dual hit.
    4. ``truncated-mahler``: the truncated primal lattice meets ``c2 P(hat_down, mu)``.
    5. ``embedding``: that point, padded with zeros, lies in the full lattice
       and in ``c2 P(hat, mu)``, a subset of ``c1 P(hat, mu)``.

    Raises:
        PreconditionError: unless ``Pi(lam) >= 1`` and ``min lam < 1``.
    """
    start = time.perf_counter()
    lam = as_weights(lam)
    mu = as_weights(mu)
    if float(lam.min()) >= 1:
        raise PreconditionError("proof chain needs min(lam) < 1")
    hat = hat_normalize(lam)
    p, kappa = hat.pivot_p, hat.kappa
    m, n = theta.m, theta.n
    consts = TransferenceConstants.for_instance(m, n, p)
    th_s, lam_sorted = _sorted_frame(theta, lam, hat.sort_order)
    hat_sorted = hat.sorted_hat
    report = VerificationReport(
        _describe(theta, lam=lam, mu=mu, seed=seed, sort_order=list(hat.sort_order),
                  pivot_p=p, kappa=kappa, c1=consts.c1, c2=consts.c2)
    )
    steps = report.steps

    prefix = np.cumprod(lam_sorted)
    pivot_ok = 1 <= p < m and prefix[p - 1] < 1 and bool(np.all(prefix[p:] >= 1 - REL_TOL))
    steps.append(Step("pivot", pivot_ok, f"p={p}, m={m}"))

    lam_star, mu_star = dual_weights(lam_sorted, mu)
    lam_star_down = lam_star[p:]
    compound = pseudocompound(BoxSpec(hat_sorted[p:], mu))
    kappa_form = BoxSpec(kappa * lam_star_down, mu_star)
    inclusion_ok = (
        kappa > 1
        and compound.allclose(kappa_form)
        and truncated_inclusion_holds(lam_star_down, mu_star, kappa)
        and consts.ordered()
    )
    steps.append(Step("inclusion", inclusion_ok, f"kappa={kappa!r}"))

    try:
        report.dual_hit = find_dual_point(th_s, BoxSpec(lam_star, mu_star), cap=cap)
        if report.dual_hit is None:
            report.verdict = "vacuous"
            for name in ("projection", "truncated-mahler", "embedding"):
                steps.append(Step(name, True, "vacuous: no dual hit"))
            report.elapsed = time.perf_counter() - start
            return report

        low = truncate(th_s, p)
        projection_ok = verify_projection(th_s, p)
        dual_down = dual_basis(low, kind="dual-truncated")
        off = _off_prefix_dual_point(th_s, BoxSpec(lam_star, mu_star), p, cap)
        if off is None:
            steps.append(Step("projection", False, "every dual hit vanishes past the pivot block",
                              report.dual_hit))
            report.verdict = "VIOLATION"
            report.elapsed = time.perf_counter() - start
            return report
        z_down = np.asarray(off.embedded[p:])
        down_box = BoxSpec(lam_star_down, mu_star)
        projected_ok = (
            projection_ok
            and bool(np.any(z_down != 0))
            and down_box.contains(z_down)
            and dual_down.contains(z_down)
        )
        coords = np.rint(dual_down.coordinates(z_down)).astype(np.int64)
        projected = LatticePoint(tuple(int(v) for v in coords), tuple(float(v) for v in z_down),
                                 bool(np.any(coords[m - p:] != 0)))
        steps.append(Step("projection", projected_ok, "", projected))

        # the projected point must also lie in the pseudocompound, by the inclusion
        in_compound = compound.contains(z_down)
        c2 = consts.c2
        low_hit = find_primal_point(low, BoxSpec(hat_sorted[p:], mu).scaled(c2), cap=cap)
        steps.append(Step("truncated-mahler", in_compound and low_hit is not None, f"c2={c2!r}", low_hit))
        if low_hit is None:
            report.verdict = "VIOLATION"
            report.elapsed = time.perf_counter() - start
            return report

        z_up = np.concatenate([np.zeros(p), low_hit.embedded])
        full = primal_basis(th_s)
        embed_ok = (
            verify_sublattice_embedding(th_s, p)
            and full.contains(z_up)
            and BoxSpec(hat_sorted, mu).scaled(c2).contains(z_up)
            and BoxSpec(hat_sorted, mu).scaled(consts.c1).contains(z_up)
        )
        up_coords = np.rint(full.coordinates(z_up)).astype(np.int64)
        report.primal_hit = LatticePoint(tuple(int(v) for v in up_coords), tuple(float(v) for v in z_up),
                                         bool(np.any(up_coords[:m] != 0)))
        steps.append(Step("embedding", embed_ok, "", report.primal_hit))
    except CapExceeded as exc:
        report.verdict = "inconclusive"
        steps.append(Step("search", False, str(exc)))
        report.elapsed = time.perf_counter() - start
        return report

    report.verdict = "verified" if all(s.passed for s in steps) else "VIOLATION"
    report.elapsed = time.perf_counter() - start
    return report


# ------------------------------------------------------------ exponent level


def dyson_rhs(omega: float, m: int, n: int) -> float:
    """Lower bound ``(n w + n - 1) / ((m - 1) w + m)`` for the transposed exponent.

    Serves both the ordinary and the multiplicative exponent.
    """
    if omega < m / n:
        warnings.warn(f"omega={omega} below the trivial value m/n={m / n}", stacklevel=2)
    if math.isinf(omega):
        return n / (m - 1) if m > 1 else math.inf
    return (n * omega + n - 1) / ((m - 1) * omega + m)


@dataclass
class ScaleCheck:
    s: float
    delta: float | None
    t: float | None = None
    gamma: float | None = None
    status: Literal["ok", "failure", "infinite", "skipped-cap"] = "ok"
    dual_witness: tuple[int, ...] = ()
    primal_witness: tuple[int, ...] | None = None

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "delta": self.delta,
            "t": self.t,
            "gamma": self.gamma,
            "status": self.status,
            "dual_witness": list(self.dual_witness),
            "primal_witness": None if self.primal_witness is None else list(self.primal_witness),
        }


@dataclass
class ExponentTransferReport:
    kind: str
    m: int
    n: int
    scales: list[ScaleCheck]
    informational: dict = field(default_factory=dict)

    def count(self, status: str) -> int:
        return sum(1 for s in self.scales if s.status == status)

    @property
    def failures(self) -> int:
        return self.count("failure")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "m": self.m,
            "n": self.n,
            "checked": self.count("ok") + self.failures,
            "failures": self.failures,
            "infinite": self.count("infinite"),
            "skipped_cap": self.count("skipped-cap"),
            "informational": self.informational,
            "scales": [s.as_dict() for s in self.scales],
        }



def _dual_multiplicative_box(z_err: np.ndarray, b: np.ndarray, s: float, delta: float) -> BoxSpec:
    """A member of ``G(s, delta)`` containing the dual point ``(z_err, b)``."""
    # rescaling every entry by r rescales the geometric mean by r
    mu_star = np.maximum(1.0, np.abs(b)) * (s / clipped_geo_mean(b))
    lam_star = np.abs(z_err) * (s ** (-delta) / geo_mean(z_err))
    return BoxSpec(lam_star, mu_star)


def check_exponent_transfer(
    theta: TargetMatrix,
    kind: exponents.Kind = "ordinary",
    s0: float = 2.0,
    ratio: float = 1.1,
    scales: int = 50,
    cap: int = DEFAULT_CAP,
    informational: bool = True,
) -> ExponentTransferReport:
    """Per-scale form of the exponent inequality.

    At each scale ``s`` the best approximation for the transposed matrix gives
    a dual point in ``Q(s, delta_s)`` (ordinary) or in a box of ``G(s, delta_s)``
    (multiplicative).  Mapping ``(s, delta_s)`` to ``(t, gamma)`` with
    :func:`param_map`, the scaled primal box ``c P(t, gamma)`` (ordinary) or
    ``c1 P(hat lam, mu)`` (multiplicative) must contain a nonzero primal point.
    """
    m, n = theta.m, theta.n
    consts = TransferenceConstants.for_instance(m, n)
    transpose = theta.T
    checks: list[ScaleCheck] = []
    for s in exponents.scale_grid(s0, ratio, scales):
        try:
            rec = exponents.minimum(transpose, s, kind, cap)
        except CapExceeded:
            checks.append(ScaleCheck(s, None, status="skipped-cap"))
            continue
        b = np.asarray(rec.witness.integer_coords[:n], dtype=np.int64)
        y = np.asarray(rec.witness.integer_coords[n:], dtype=np.int64)
        err = np.asarray(rec.witness.embedded[n:], dtype=float)
        dual_z = np.concatenate([-err, b.astype(float)])
        check = ScaleCheck(s, rec.gamma_t, dual_witness=tuple(int(v) for v in np.concatenate([-y, b])))
        checks.append(check)
        if rec.psi == 0:
            check.status = "infinite"
            continue
        pp = param_map(s, rec.gamma_t, m, n)
        check.t, check.gamma = pp.t, pp.gamma
        if kind == "ordinary":
            dual_box = box_q(s, pp.delta, m, n)
            primal_box = box_p(pp.t, pp.gamma, m, n)
            consistent = dual_box.contains(dual_z, tol=1e-9) and pseudocompound(primal_box).allclose(dual_box)
            target = primal_box.scaled(consts.c)
        else:
            dual_box = _dual_multiplicative_box(-err, b, s, pp.delta)
            lam, mu = primal_weights(dual_box.lam, dual_box.mu)
            hat = hat_normalize(lam)
            hat_box = BoxSpec(hat.hat, mu)
            consistent = (
                dual_box.contains(dual_z, tol=1e-9)
                and family_membership(dual_box, s, pp.delta, "G")
                and rel_close(geo_mean(lam), pp.t)
                and rel_close(geo_mean(mu), pp.t ** (-pp.gamma))
                and family_membership(hat_box, pp.t, pp.gamma, "F")
            )
            target = hat_box.scaled(consts.c1)
        try:
            hit = find_primal_point(theta, target, cap=cap)
        except CapExceeded:
            check.status = "skipped-cap"
            continue
        if hit is not None:
            check.primal_witness = hit.integer_coords
        check.status = "ok" if (hit is not None and consistent) else "failure"

    report = ExponentTransferReport(kind, m, n, checks)
    if informational:
        report.informational = _informational(theta, kind, checks, cap)
    return report


def _informational(theta: TargetMatrix, kind, checks: list[ScaleCheck], cap: int) -> dict:
    m, n = theta.m, theta.n
    deltas = [c.delta for c in checks if c.delta is not None]
    if any(c.status == "infinite" for c in checks):
        dual_est = math.inf
    else:
        dual_est = max(deltas[-4:]) if deltas else None
    try:
        est = exponents.estimate_exponent(theta, kind, 2.0, 2.0, 6, 2, cap).estimate
    except CapExceeded:
        est = None
    info = {
        "transpose_estimate": _json_float(dual_est),
        "theta_estimate": _json_float(est),
    }
    if est is not None and not math.isinf(est):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            info["bound_for_transpose"] = dyson_rhs(est, m, n)
    return info


def _json_float(x):
    if x is None or (isinstance(x, float) and math.isinf(x)):
        return None if x is None else "inf"
    return x
