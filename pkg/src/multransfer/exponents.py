"""Finite-scale estimates of the ordinary and multiplicative Diophantine exponents.

``psi(t)`` is the best sup-norm error ``min |theta x - y|`` over integer
``x != 0`` with ``|x| <= t``; ``psi_x(t)`` replaces both sup-norms by the
geometric-mean functionals (clipped at 1 on the ``x`` side).  Both minima
are computed by exhaustive enumeration of ``x``; ``y`` is always the
componentwise nearest integer, which is optimal for either functional.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from .box_calculus import BOUNDARY_TOL, DomainError
from .lattice_engine import (
    CHUNK,
    DEFAULT_CAP,
    CapExceeded,
    LatticePoint,
    TargetMatrix,
    _primal_point,
    iter_box_chunks,
)

Kind = Literal["ordinary", "multiplicative"]


@dataclass(frozen=True)
class ApproxRecord:
    t: float
    psi: float
    witness: LatticePoint

    @property
    def gamma_t(self) -> float | None:
        if self.psi == 0:
            return None
        return -math.log(self.psi) / math.log(self.t)


@dataclass
class ExponentEstimate:
    kind: Kind
    matrix_side: Literal["theta", "theta-transpose"]
    trace: list[ApproxRecord]
    tail_window: int
    grid: dict = field(default_factory=dict)

    @property
    def infinite(self) -> bool:
        return any(r.psi == 0 for r in self.trace)

    @property
    def estimate(self) -> float:
        if self.infinite:
            return math.inf
        tail = self.trace[-self.tail_window :]
        return max(r.gamma_t for r in tail)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "matrix_side": self.matrix_side,
            "infinite": self.infinite,
            "estimate": None if self.infinite else self.estimate,
            "tail_window": self.tail_window,
            "grid": self.grid,
            "trace": [
                {"t": r.t, "psi": r.psi, "gamma_t": r.gamma_t, "witness": list(r.witness.integer_coords)}
                for r in self.trace
            ],
        }


class EstimateCapExceeded(CapExceeded):
    """Cap hit during a grid sweep; ``partial`` holds the records computed so far."""


def _nearest(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    near = np.rint(r)
    return near, np.abs(r - near)


def _record(theta: TargetMatrix, t: float, x: np.ndarray, kind: Kind) -> ApproxRecord:
    # psi is recomputed from the witness by one formula for both kinds, so
    # psi_x <= psi holds bit-for-bit whenever the feasible sets are nested
    r = theta.theta @ x
    y = np.rint(r)
    err = np.abs(r - y)
    if kind == "ordinary" or theta.n == 1:
        psi = float(err.max())
    else:
        psi = min(float(np.prod(err)) ** (1.0 / theta.n), float(err.max()))
    return ApproxRecord(t=t, psi=psi, witness=_primal_point(theta, x, y.astype(np.int64)))


# ------------------------------------------------------------- ordinary


def ordinary_minimum(theta: TargetMatrix, t: float, cap: int = DEFAULT_CAP) -> ApproxRecord:
    """``psi(t) = min_{0 < |x| <= t} max_i ||(theta x)_i||`` by exhaustive search.

    For a single linear form (n = 1) the first coordinate of ``x`` is handled
    by a sorted nearest-neighbour lookup instead of a loop; otherwise every
    ``x`` in the box is evaluated.
    """
    if t < 1:
        raise DomainError(f"t must be at least 1, got {t}")
    r = int(math.floor(t * (1 + BOUNDARY_TOL)))
    if theta.n == 1 and theta.m >= 2:
        return _ordinary_single_form(theta, t, r, cap)
    return _ordinary_brute(theta, t, r, cap)


def _ordinary_brute(theta: TargetMatrix, t: float, r: int, cap: int) -> ApproxRecord:
    m = theta.m
    volume = (2 * r + 1) ** m
    if volume > cap:
        raise CapExceeded(volume, cap)
    best, best_x = math.inf, None
    for block in iter_box_chunks([r] * m):
        _, dist = _nearest(block @ theta.theta.T)
        err = dist.max(axis=1)
        err[~np.any(block != 0, axis=1)] = math.inf
        i = int(np.argmin(err))
        if err[i] < best:
            best, best_x = float(err[i]), block[i].copy()
    return _record(theta, t, best_x, "ordinary")


def _ordinary_single_form(theta: TargetMatrix, t: float, r: int, cap: int) -> ApproxRecord:
    m = theta.m
    row = theta.theta[0]
    outer = (2 * r + 1) ** (m - 1)
    if outer + 2 * r + 1 > cap:
        raise CapExceeded(outer + 2 * r + 1, cap)
    ks = np.arange(-r, r + 1, dtype=np.int64)
    frac = np.mod(ks * row[0], 1.0)
    order = np.argsort(frac, kind="stable")
    fs, ks_sorted = frac[order], ks[order]
    best, best_x = math.inf, None
    for rest in iter_box_chunks([r] * (m - 1)):
        shift = rest @ row[1:]
        target = np.mod(-shift, 1.0)
        pos = np.searchsorted(fs, target)
        cand = np.stack([(pos - 1) % fs.size, pos % fs.size], axis=1)
        k = ks_sorted[cand]
        vals = k * row[0] + shift[:, None]
        dist = np.abs(vals - np.rint(vals))
        origin = ~np.any(rest != 0, axis=1)
        if origin.any():
            # rest = 0 forces k != 0; handled by direct scan below
            dist[origin] = math.inf
        j = np.argmin(dist, axis=1)
        err = dist[np.arange(len(j)), j]
        i = int(np.argmin(err))
        if err[i] < best:
            best, best_x = float(err[i]), np.concatenate([[k[i, j[i]]], rest[i]])
    nz = ks[ks != 0]
    if nz.size:
        vals = nz * row[0]
        dist = np.abs(vals - np.rint(vals))
        i = int(np.argmin(dist))
        if dist[i] < best:
            best, best_x = float(dist[i]), np.concatenate([[nz[i]], np.zeros(m - 1, dtype=np.int64)])
    return _record(theta, t, best_x, "ordinary")


# ------------------------------------------------------- multiplicative


def hyperbolic_count(m: int, bound: float, limit: int | None = None) -> int:
    """Number of ``x in Z^m`` with ``prod max(1, |x_j|) <= bound``.

    With ``limit`` the count stops early and returns a value above ``limit``
    as soon as the region is known to be larger; every prefix extends to at
    least one point, so the prefix count is a lower bound.
    """
    prefixes = np.zeros((1, 0), dtype=np.int64)
    budgets = np.array([float(bound)])
    for _ in range(m - 1):
        if limit is not None:
            radii = np.floor(budgets * (1 + BOUNDARY_TOL)).astype(np.int64)
            size = int(np.sum(2 * radii + 1))
            if size > limit:
                return size
        prefixes, budgets = _expand(prefixes, budgets)
    radii = np.floor(budgets * (1 + BOUNDARY_TOL)).astype(np.int64)
    return int(np.sum(2 * radii + 1))


def iter_hyperbolic(m: int, bound: float, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Yield all ``x in Z^m`` with ``prod max(1, |x_j|) <= bound`` in chunks.

    Prefixes are expanded level by level with their remaining budget; the
    last coordinate is filled in per chunk of prefixes.
    """
    prefixes = np.zeros((1, 0), dtype=np.int64)
    budgets = np.array([float(bound)])
    for _ in range(m - 1):
        prefixes, budgets = _expand(prefixes, budgets)
    radii = np.floor(budgets * (1 + BOUNDARY_TOL)).astype(np.int64)
    counts = 2 * radii + 1
    start = 0
    while start < len(prefixes):
        stop = start
        size = 0
        while stop < len(prefixes) and (size == 0 or size + counts[stop] <= chunk):
            size += counts[stop]
            stop += 1
        sub, _ = _expand(prefixes[start:stop], budgets[start:stop])
        yield sub
        start = stop


def _expand(prefixes: np.ndarray, budgets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    radii = np.floor(budgets * (1 + BOUNDARY_TOL)).astype(np.int64)
    counts = 2 * radii + 1
    rows = np.repeat(np.arange(len(prefixes)), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    values = offsets - radii[rows]
    new_prefixes = np.concatenate([prefixes[rows], values[:, None]], axis=1)
    new_budgets = budgets[rows] / np.maximum(1, np.abs(values))
    return new_prefixes, new_budgets


def multiplicative_minimum(theta: TargetMatrix, t: float, cap: int = DEFAULT_CAP) -> ApproxRecord:
    """``psi_x(t) = min Pi(theta x - y)`` over ``x != 0`` with ``Pi'(x) <= t``.

    ``Pi'(x) <= t`` is ``prod max(1, |x_j|) <= t^m``; the enumeration walks
    exactly that hyperbolic region.
    """
    if t < 1:
        raise DomainError(f"t must be at least 1, got {t}")
    m, n = theta.m, theta.n
    bound = t**m
    count = hyperbolic_count(m, bound, limit=cap)
    if count > cap:
        raise CapExceeded(count, cap)
    best, best_x = math.inf, None
    for block in iter_hyperbolic(m, bound):
        _, dist = _nearest(block @ theta.theta.T)
        if n == 1:
            err = dist[:, 0]
        else:
            with np.errstate(divide="ignore"):
                err = np.exp(np.mean(np.log(dist), axis=1))
        err[~np.any(block != 0, axis=1)] = math.inf
        i = int(np.argmin(err))
        if err[i] < best:
            best, best_x = float(err[i]), block[i].copy()
            if best == 0:
                break
    return _record(theta, t, best_x, "multiplicative")


def minimum(theta: TargetMatrix, t: float, kind: Kind, cap: int = DEFAULT_CAP) -> ApproxRecord:
    if kind == "ordinary":
        return ordinary_minimum(theta, t, cap)
    if kind == "multiplicative":
        return multiplicative_minimum(theta, t, cap)
    raise ValueError(f"unknown kind {kind!r}")


def scale_grid(t0: float, ratio: float, steps: int) -> list[float]:
    return [t0 * ratio**k for k in range(steps)]


def estimate_exponent(
    theta: TargetMatrix,
    kind: Kind = "ordinary",
    t0: float = 2.0,
    ratio: float = 2.0,
    steps: int = 12,
    tail_window: int = 4,
    cap: int = DEFAULT_CAP,
    matrix_side: Literal["theta", "theta-transpose"] = "theta",
) -> ExponentEstimate:
    """Evaluate the minimum on ``t_k = t0 * ratio^k`` and take the tail maximum of ``gamma_t``.

    Raises:
        EstimateCapExceeded: carrying the records computed before the cap was hit.
    """
    if t0 <= 1 or ratio <= 1:
        raise DomainError("need t0 > 1 and ratio > 1")
    if not 1 <= tail_window <= steps:
        raise DomainError("need 1 <= tail_window <= steps")
    grid = {"t0": t0, "ratio": ratio, "steps": steps, "tail_window": tail_window}
    trace: list[ApproxRecord] = []
    for t in scale_grid(t0, ratio, steps):
        try:
            rec = minimum(theta, t, kind, cap)
        except CapExceeded as exc:
            partial = ExponentEstimate(kind, matrix_side, trace, min(tail_window, max(1, len(trace))), grid)
            raise EstimateCapExceeded(exc.volume, exc.cap, partial) from exc
        trace.append(rec)
    return ExponentEstimate(kind, matrix_side, trace, tail_window, grid)


def trace_csv(estimate: ExponentEstimate) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "matrix_side", "t", "psi", "gamma_t", "witness"])
    for r in estimate.trace:
        writer.writerow(
            [
                estimate.kind,
                estimate.matrix_side,
                repr(r.t),
                repr(r.psi),
                "" if r.gamma_t is None else repr(r.gamma_t),
                " ".join(str(v) for v in r.witness.integer_coords),
            ]
        )
    return buf.getvalue()
