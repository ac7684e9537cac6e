"""Scalar functionals and weight-tuple transforms for origin-centred boxes.

A box ``P(lam, mu)`` is the set of ``z`` in ``R^(m+n)`` with ``|z_j| <= lam_j``
for the first ``m`` coordinates and ``|z_{m+i}| <= mu_i`` for the last ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

REL_TOL = 1e-9
BOUNDARY_TOL = 1e-12


class DimensionError(ValueError):
    """Raised on empty vectors or mismatched block sizes."""


class DomainError(ValueError):
    """Raised when a parameter lies outside the domain of an operation."""


class PreconditionError(ValueError):
    """Raised when a theorem hypothesis required by an operation fails."""


def as_weights(values: Iterable[float]) -> np.ndarray:
    """Validate and freeze a weight tuple (strictly positive, finite, nonempty)."""
    arr = np.array(list(values) if not isinstance(values, np.ndarray) else values, dtype=float).ravel()
    if arr.size == 0:
        raise DimensionError("weight tuple must be nonempty")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"weights must be positive and finite, got {arr.tolist()}")
    arr.setflags(write=False)
    return arr


def _as_vector(z: Iterable[float]) -> np.ndarray:
    arr = np.asarray(list(z) if not isinstance(z, np.ndarray) else z, dtype=float).ravel()
    if arr.size == 0:
        raise DimensionError("vector must be nonempty")
    return arr


def sup_norm(z: Iterable[float]) -> float:
    return float(np.max(np.abs(_as_vector(z))))


def geo_mean(z: Iterable[float]) -> float:
    """``(prod |z_i|)^(1/k)``; exactly 0 when any entry vanishes.

    Computed in log space so long tuples of large weights do not overflow.
    """
    a = np.abs(_as_vector(z))
    if np.any(a == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(a))))


def clipped_geo_mean(z: Iterable[float]) -> float:
    """``(prod max(1, |z_i|))^(1/k)``, always at least 1."""
    a = np.maximum(1.0, np.abs(_as_vector(z)))
    return float(np.exp(np.mean(np.log(a))))


def rel_close(a: float, b: float, rel: float = REL_TOL) -> bool:
    return abs(a - b) <= rel * max(abs(a), abs(b))


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned box split into a ``lam`` block (size m) and a ``mu`` block (size n)."""

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", as_weights(self.lam))
        object.__setattr__(self, "mu", as_weights(self.mu))

    @classmethod
    def from_eta(cls, eta: Sequence[float], m: int) -> "BoxSpec":
        eta = np.asarray(eta, dtype=float)
        if not 0 < m < eta.size:
            raise DimensionError(f"cannot split {eta.size} weights at m={m}")
        return cls(eta[:m], eta[m:])

    @property
    def m(self) -> int:
        return self.lam.size

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def d(self) -> int:
        return self.m + self.n

    @property
    def eta(self) -> np.ndarray:
        return np.concatenate([self.lam, self.mu])

    def scaled(self, c: float) -> "BoxSpec":
        return BoxSpec(self.lam * c, self.mu * c)

    def contains(self, z: Sequence[float], tol: float = BOUNDARY_TOL) -> bool:
        z = np.asarray(z, dtype=float)
        if z.size != self.d:
            raise DimensionError(f"point of length {z.size} vs box dimension {self.d}")
        return bool(np.all(np.abs(z) <= self.eta * (1 + tol)))

    def log_volume(self) -> float:
        """log of prod(eta); the Euclidean volume is ``2^d`` times its exponential."""
        return float(np.sum(np.log(self.eta)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoxSpec):
            return NotImplemented
        return (
            self.lam.shape == other.lam.shape
            and self.mu.shape == other.mu.shape
            and bool(np.all(self.lam == other.lam))
            and bool(np.all(self.mu == other.mu))
        )

    def __hash__(self) -> int:
        return hash((self.lam.tobytes(), self.mu.tobytes()))

    def allclose(self, other: "BoxSpec", rel: float = REL_TOL) -> bool:
        if self.m != other.m or self.n != other.n:
            return False
        return bool(np.all(np.abs(self.eta - other.eta) <= rel * np.maximum(self.eta, other.eta)))


def pseudocompound(box: BoxSpec) -> BoxSpec:
    """Coordinate ``i`` gets ``prod(eta) / eta_i``; the (m, n) split is kept."""
    eta = box.eta
    total = float(np.prod(eta))
    return BoxSpec.from_eta(total / eta, box.m)


def dual_weights(lam: Sequence[float], mu: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``(lam*, mu*)`` with ``P(lam, mu)* = P(lam*, mu*)``.

    Deliberately written per block rather than through :func:`pseudocompound`
    so the two code paths can be cross-checked.
    """
    lam = as_weights(lam)
    mu = as_weights(mu)
    if lam.size + mu.size < 3:
        raise DimensionError("m + n must be at least 3")
    volume = float(np.prod(lam)) * float(np.prod(mu))
    return as_weights(volume / lam), as_weights(volume / mu)


def primal_weights(lam_star: Sequence[float], mu_star: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`dual_weights`.

    If ``w* = V / w`` then ``prod(w*) = V^(d-1)``, which recovers ``V``.
    """
    lam_star = as_weights(lam_star)
    mu_star = as_weights(mu_star)
    d = lam_star.size + mu_star.size
    log_v = (np.sum(np.log(lam_star)) + np.sum(np.log(mu_star))) / (d - 1)
    volume = math.exp(log_v)
    return as_weights(volume / lam_star), as_weights(volume / mu_star)


@dataclass(frozen=True)
class HatResult:
    hat: np.ndarray
    pivot_p: int
    kappa: float
    sort_order: tuple[int, ...] = field(default=())

    @property
    def sorted_hat(self) -> np.ndarray:
        """``hat`` listed in the ascending order of the input tuple."""
        return self.hat[list(self.sort_order)]


def hat_normalize(lam: Sequence[float], rel: float = REL_TOL) -> HatResult:
    """Raise the sub-unit prefix of ``lam`` to 1 while keeping its geometric mean.

    With the entries sorted ascending, ``p`` is the largest index whose prefix
    product is below 1.  The first ``p`` sorted entries become 1 and the
    remaining ``m - p`` are multiplied by ``prefix^(1/(m-p))``.

    Raises:
        PreconditionError: if the geometric mean of ``lam`` is below 1.
    """
    lam = as_weights(lam)
    m = lam.size
    if geo_mean(lam) < 1 and not rel_close(geo_mean(lam), 1.0, rel):
        raise PreconditionError(f"geometric mean {geo_mean(lam)!r} < 1")
    order = tuple(int(i) for i in np.argsort(lam, kind="stable"))
    ordered = lam[list(order)]
    if ordered[0] >= 1:
        return HatResult(hat=lam, pivot_p=0, kappa=1.0, sort_order=order)

    prefix = np.cumprod(ordered)
    below = np.nonzero(prefix < 1)[0]
    p = int(below[-1]) + 1
    if p >= m:
        # only reachable when the geometric mean is 1 up to rounding
        p = m - 1
    factor = float(prefix[p - 1]) ** (1.0 / (m - p))
    # entries past the pivot are >= 1 exactly; clamp away last-bit rounding
    hat_sorted = np.concatenate([np.ones(p), np.maximum(1.0, ordered[p:] * factor)])
    hat = np.empty(m)
    hat[list(order)] = hat_sorted
    return HatResult(hat=as_weights(hat), pivot_p=p, kappa=1.0 / factor, sort_order=order)


@dataclass(frozen=True)
class ParamPoint:
    t: float
    gamma: float
    s: float
    delta: float
    m: int
    n: int

    @property
    def d(self) -> int:
        return self.m + self.n


def param_map(s: float, delta: float, m: int, n: int) -> ParamPoint:
    """Map ``(s, delta)`` to the ``(t, gamma)`` for which ``Q(s, delta) = P(t, gamma)*``."""
    if s <= 1:
        raise DomainError(f"s must exceed 1, got {s}")
    if m < 1 or n < 1 or m + n < 3:
        raise DimensionError(f"need m, n >= 1 and m + n >= 3, got ({m}, {n})")
    denom = (n - 1) * delta + n
    if denom <= 0:
        raise DomainError(f"delta={delta} makes (n-1)*delta + n nonpositive")
    d = m + n
    t = s ** (denom / (d - 1))
    gamma = (m * delta + m - 1) / denom
    return ParamPoint(t=t, gamma=gamma, s=s, delta=delta, m=m, n=n)


def box_p(t: float, gamma: float, m: int, n: int) -> BoxSpec:
    """``P(t, gamma)``: ``t`` on the first m axes, ``t^-gamma`` on the last n."""
    return BoxSpec(np.full(m, t), np.full(n, t ** (-gamma)))


def box_q(s: float, delta: float, m: int, n: int) -> BoxSpec:
    """``Q(s, delta)``: ``s^-delta`` on the first m axes, ``s`` on the last n."""
    return BoxSpec(np.full(m, s ** (-delta)), np.full(n, s))


def family_membership(
    box: BoxSpec,
    t: float,
    gamma: float,
    kind: Literal["F", "G"] = "F",
    rel: float = REL_TOL,
) -> bool:
    """Membership of ``box`` in ``F(t, gamma)`` or ``G(t, gamma)``.

    ``F(t, g)``: Pi(lam) = t, Pi(mu) = t^-g, min lam >= 1.
    ``G(s, d)``: Pi(lam) = s^-d, Pi(mu) = s, min mu >= 1 (pass ``s``, ``d`` as ``t``, ``gamma``).
    """
    if t <= 0:
        raise DomainError("t must be positive")
    if kind == "F":
        return (
            rel_close(geo_mean(box.lam), t, rel)
            and rel_close(geo_mean(box.mu), t ** (-gamma), rel)
            and float(box.lam.min()) >= 1 - rel
        )
    if kind == "G":
        return (
            rel_close(geo_mean(box.lam), t ** (-gamma), rel)
            and rel_close(geo_mean(box.mu), t, rel)
            and float(box.mu.min()) >= 1 - rel
        )
    raise ValueError(f"unknown family {kind!r}")
