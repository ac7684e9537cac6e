"""The lattice pair attached to a target matrix, and exhaustive box searches.

For an ``n x m`` matrix ``theta`` the primal lattice is generated by the columns
of ``[[I_m, 0], [-theta, I_n]]`` and its dual by ``[[I_m, theta.T], [0, I_n]]``.
A primal point with integer preimage ``(a, b)`` is ``(a, b - theta a)``; a dual
point is ``(a + theta.T b, b)``.

Searches enumerate the free integer block inside the box and complete the
other block by nearest-integer rounding.  Coordinates of the completed block
decouple, so this is exhaustive: a point exists iff the search returns one.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .box_calculus import BOUNDARY_TOL, BoxSpec, DimensionError, DomainError

DEFAULT_CAP = int(os.environ.get("MULTRANSFER_CAP", 10**7))
CHUNK = 1 << 16
INTEGRAL_TOL = 1e-9

BasisKind = Literal["primal", "dual", "primal-truncated", "dual-truncated"]


class CapExceeded(RuntimeError):
    """The enumeration volume exceeds the configured cap (not the same as "no point")."""

    def __init__(self, volume: float, cap: int, partial=None):
        super().__init__(f"enumeration volume {volume:.3g} exceeds cap {cap}")
        self.volume = volume
        self.cap = cap
        self.partial = partial


@dataclass(frozen=True)
class TargetMatrix:
    """An ``n x m`` real matrix; rows index the linear forms, columns the variables."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2 or theta.size == 0:
            raise DimensionError(f"theta must be a nonempty 2-d array, got shape {theta.shape}")
        n, m = theta.shape
        if m + n < 3:
            raise DimensionError(f"m + n must be at least 3, got m={m}, n={n}")
        if not np.all(np.isfinite(theta)):
            raise DomainError("theta entries must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "TargetMatrix":
        return cls(np.array(rows, dtype=float))

    @property
    def m(self) -> int:
        return self.theta.shape[1]

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def d(self) -> int:
        return self.m + self.n

    @property
    def T(self) -> "TargetMatrix":
        return _raw_matrix(self.theta.T)

    def permute_columns(self, order: Sequence[int]) -> "TargetMatrix":
        return TargetMatrix(self.theta[:, list(order)])


@dataclass(frozen=True)
class LatticeBasis:
    columns: np.ndarray
    kind: BasisKind

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    def point(self, coords: Sequence[int]) -> np.ndarray:
        return self.columns @ np.asarray(coords, dtype=float)

    def coordinates(self, z: Sequence[float]) -> np.ndarray:
        """Real coordinates of ``z`` in this basis."""
        return np.linalg.solve(self.columns, np.asarray(z, dtype=float))

    def contains(self, z: Sequence[float], tol: float = INTEGRAL_TOL) -> bool:
        c = self.coordinates(z)
        return bool(np.all(np.abs(c - np.rint(c)) <= tol))


@dataclass(frozen=True)
class LatticePoint:
    """A nonzero lattice vector with its integer preimage ``(a, b)``.

    ``nonzero_x`` records whether the integer block that plays the role of
    ``x`` is nonzero: ``a`` for primal points, ``b`` for dual points (the dual
    lattice encodes the transposed system, whose free variable is ``b``).
    """

    integer_coords: tuple[int, ...]
    embedded: tuple[float, ...]
    nonzero_x: bool

    def as_dict(self) -> dict:
        return {
            "integer_coords": list(self.integer_coords),
            "embedded": list(self.embedded),
            "nonzero_x": self.nonzero_x,
        }


def primal_basis(theta: TargetMatrix, kind: BasisKind = "primal") -> LatticeBasis:
    m, n = theta.m, theta.n
    b = np.eye(m + n)
    b[m:, :m] = -theta.theta
    return LatticeBasis(b, kind)


def dual_basis(theta: TargetMatrix, kind: BasisKind = "dual") -> LatticeBasis:
    m, n = theta.m, theta.n
    b = np.eye(m + n)
    b[:m, m:] = theta.theta.T
    return LatticeBasis(b, kind)


def truncate(theta: TargetMatrix, p: int) -> TargetMatrix:
    """Delete the first ``p`` columns.

    Callers that work with unsorted weights permute the columns first, so that
    the deleted columns are those carrying the ``p`` smallest weights.  The
    result may have ``m + n = 2`` (e.g. m=2, n=1, p=1); the dimension check is
    waived for truncated matrices.
    """
    if not 0 <= p < theta.m:
        raise DomainError(f"need 0 <= p < m={theta.m}, got p={p}")
    return _raw_matrix(theta.theta[:, p:])


def _raw_matrix(theta: np.ndarray) -> TargetMatrix:
    obj = object.__new__(TargetMatrix)
    arr = np.array(theta, dtype=float)
    arr.setflags(write=False)
    object.__setattr__(obj, "theta", arr)
    return obj


# ---------------------------------------------------------------- enumeration


def _floor_bounds(weights: np.ndarray) -> np.ndarray:
    return np.floor(weights * (1 + BOUNDARY_TOL) + 1e-300).astype(np.int64)


def _zigzag(digits: np.ndarray) -> np.ndarray:
    # 0, 1, -1, 2, -2, ...
    half = (digits + 1) // 2
    return np.where(digits % 2 == 1, half, -half)


def enumeration_volume(bounds: Sequence[int]) -> int:
    vol = 1
    for r in bounds:
        vol *= 2 * int(r) + 1
    return vol


def iter_box_chunks(bounds: Sequence[int], chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Yield all integer vectors with ``|v_j| <= bounds[j]`` in chunks.

    Order: each coordinate runs through 0, 1, -1, 2, -2, ...; the first
    coordinate varies fastest.  The origin always comes first.
    """
    bounds = np.asarray(bounds, dtype=np.int64)
    radix = 2 * bounds + 1
    total = int(np.prod(radix)) if radix.size else 1
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk), dtype=np.int64)
        digits = np.stack(np.unravel_index(flat, tuple(radix), order="F"), axis=1)
        yield _zigzag(digits)


def _nearest_dist(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest integers to ``r`` and the distances to them.

    At an exact half the two neighbours are equally far, so the tie rule does
    not change membership.
    """
    near = np.rint(r)
    return near, np.abs(r - near)


def _first_hit(
    mat: np.ndarray,
    free_bounds: np.ndarray,
    fit_bounds: np.ndarray,
    cap: int,
) -> tuple[np.ndarray, np.ndarray] | None:
    """First free vector ``u != 0`` (enumeration order) with ``|mat u - round(mat u)| <= fit``.

    Returns ``(u, round(mat u))``.
    """
    volume = enumeration_volume(free_bounds)
    if volume > cap:
        raise CapExceeded(volume, cap)
    limit = fit_bounds * (1 + BOUNDARY_TOL)
    for block in iter_box_chunks(free_bounds):
        r = block @ mat.T
        near, dist = _nearest_dist(r)
        ok = np.all(dist <= limit, axis=1) & np.any(block != 0, axis=1)
        idx = np.flatnonzero(ok)
        if idx.size:
            i = int(idx[0])
            return block[i], near[i]
    return None


def _unit_hit(bounds: np.ndarray) -> int | None:
    idx = np.flatnonzero(bounds >= 1)
    return int(idx[0]) if idx.size else None


def find_primal_point(
    theta: TargetMatrix,
    box: BoxSpec,
    require_nonzero_x: bool = False,
    cap: int = DEFAULT_CAP,
) -> LatticePoint | None:
    """A nonzero point of the primal lattice inside ``box``, or None.

    Points with ``a != 0`` are preferred; the ``a = 0`` branch is the fallback.

    Raises:
        CapExceeded: if ``prod(2 floor(lam_j) + 1)`` exceeds ``cap``.
    """
    _check_dims(theta, box)
    m, n = theta.m, theta.n
    free = _floor_bounds(box.lam)
    fit = box.mu
    if enumeration_volume(free) > cap:
        raise CapExceeded(enumeration_volume(free), cap)
    hit = _first_hit(theta.theta, free, fit, cap)
    if hit is not None:
        return _primal_point(theta, *hit)
    if not require_nonzero_x:
        # a = 0 leaves b free: a unit vector is the only candidate shape
        i = _unit_hit(_floor_bounds(box.mu))
        if i is not None:
            b = np.zeros(n, dtype=np.int64)
            b[i] = 1
            return _primal_point(theta, np.zeros(m, dtype=np.int64), b)
    return None


def find_dual_point(
    theta: TargetMatrix,
    box: BoxSpec,
    require_nonzero_x: bool = False,
    cap: int = DEFAULT_CAP,
) -> LatticePoint | None:
    """A nonzero point of the dual lattice inside ``box``, or None.

    ``b`` (the last ``n`` integer coordinates) is enumerated over
    ``|b_i| <= floor(mu_i)`` and ``a`` completed by rounding.  Points with
    nonzero first block and ``b = 0`` are tried first.  With
    ``require_nonzero_x`` only points with ``b != 0`` are accepted.
    """
    _check_dims(theta, box)
    m, n = theta.m, theta.n
    free = _floor_bounds(box.mu)
    fit = box.lam
    if enumeration_volume(free) > cap:
        raise CapExceeded(enumeration_volume(free), cap)
    if not require_nonzero_x:
        i = _unit_hit(_floor_bounds(box.lam))
        if i is not None:
            a = np.zeros(m, dtype=np.int64)
            a[i] = 1
            return _dual_point(theta, a, np.zeros(n, dtype=np.int64))
    hit = _first_hit(theta.theta.T, free, fit, cap)
    if hit is None:
        return None
    b, near = hit
    return _dual_point(theta, -near.astype(np.int64), b)


def find_point(
    theta: TargetMatrix,
    box: BoxSpec,
    side: Literal["primal", "dual"],
    require_nonzero_x: bool = False,
    cap: int = DEFAULT_CAP,
) -> LatticePoint | None:
    search = find_primal_point if side == "primal" else find_dual_point
    return search(theta, box, require_nonzero_x=require_nonzero_x, cap=cap)


def _check_dims(theta: TargetMatrix, box: BoxSpec) -> None:
    if box.m != theta.m or box.n != theta.n:
        raise DimensionError(
            f"box split ({box.m}, {box.n}) does not match theta ({theta.m}, {theta.n})"
        )


def _primal_point(theta: TargetMatrix, a: np.ndarray, b: np.ndarray) -> LatticePoint:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    z = np.concatenate([a.astype(float), b - theta.theta @ a])
    return LatticePoint(
        integer_coords=tuple(int(v) for v in np.concatenate([a, b])),
        embedded=tuple(float(v) for v in z),
        nonzero_x=bool(np.any(a != 0)),
    )


def _dual_point(theta: TargetMatrix, a: np.ndarray, b: np.ndarray) -> LatticePoint:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    z = np.concatenate([a + theta.theta.T @ b, b.astype(float)])
    return LatticePoint(
        integer_coords=tuple(int(v) for v in np.concatenate([a, b])),
        embedded=tuple(float(v) for v in z),
        nonzero_x=bool(np.any(b != 0)),
    )


def naive_points(
    theta: TargetMatrix,
    box: BoxSpec,
    side: Literal["primal", "dual"],
    require_nonzero_x: bool = False,
) -> list[LatticePoint]:
    """Every nonzero lattice point in ``box``, by looping over both integer blocks.

    Unpruned reference used to cross-check the rounding searches; only
    suitable for small boxes.
    """
    basis = primal_basis(theta) if side == "primal" else dual_basis(theta)
    m = theta.m
    # a primal point has |a_j| <= lam_j and |b_i| <= |theta a|_i + mu_i; symmetric for dual
    lam_r = _floor_bounds(box.lam)
    mu_r = _floor_bounds(box.mu)
    t_abs = np.abs(theta.theta)
    if side == "primal":
        b_r = np.floor(t_abs @ lam_r + box.mu + 1).astype(int)
        ranges = [range(-r, r + 1) for r in lam_r] + [range(-r, r + 1) for r in b_r]
    else:
        a_r = np.floor(t_abs.T @ mu_r + box.lam + 1).astype(int)
        ranges = [range(-r, r + 1) for r in a_r] + [range(-r, r + 1) for r in mu_r]
    found = []
    for coords in itertools.product(*ranges):
        if not any(coords):
            continue
        z = basis.point(coords)
        if not box.contains(z):
            continue
        a, b = coords[:m], coords[m:]
        if side == "primal":
            pt = _primal_point(theta, np.array(a), np.array(b))
        else:
            pt = _dual_point(theta, np.array(a), np.array(b))
        if require_nonzero_x and not pt.nonzero_x:
            continue
        found.append(pt)
    return found


# ------------------------------------------------------ structural checks


def _is_integral(c: np.ndarray, tol: float = INTEGRAL_TOL) -> bool:
    return bool(np.all(np.abs(c - np.rint(c)) <= tol))


def verify_sublattice_embedding(
    theta: TargetMatrix, p: int, truncated: TargetMatrix | None = None
) -> bool:
    """Whether the truncated primal lattice, padded with ``p`` leading zeros, sits inside the full one.

    ``truncated`` defaults to ``truncate(theta, p)``; passing a different
    matrix is how negative controls are run.
    """
    if not 0 <= p < theta.m:
        raise DomainError(f"need 0 <= p < m={theta.m}, got p={p}")
    low = truncate(theta, p) if truncated is None else truncated
    full = primal_basis(theta)
    sub = primal_basis(low, kind="primal-truncated").columns
    padded = np.vstack([np.zeros((p, sub.shape[1])), sub])
    coeffs = np.linalg.solve(full.columns, padded)
    return _is_integral(coeffs)


def verify_projection(
    theta: TargetMatrix, p: int, truncated: TargetMatrix | None = None
) -> bool:
    """Whether dropping the first ``p`` coordinates maps the dual lattice onto the truncated dual lattice.

    Each projected dual basis vector must have integral coordinates in the
    truncated dual basis, and the resulting ``(d-p) x d`` integer matrix must
    have a maximal minor equal to +-1 so the projections generate the lattice.
    """
    if not 0 <= p < theta.m:
        raise DomainError(f"need 0 <= p < m={theta.m}, got p={p}")
    low = truncate(theta, p) if truncated is None else truncated
    full = dual_basis(theta).columns
    target = dual_basis(low, kind="dual-truncated").columns
    projected = full[p:, :]
    coeffs = np.linalg.solve(target, projected)
    if not _is_integral(coeffs):
        return False
    coeffs = np.rint(coeffs)
    k = coeffs.shape[0]
    for cols in itertools.combinations(range(coeffs.shape[1]), k):
        if abs(round(np.linalg.det(coeffs[:, cols]))) == 1:
            return True
    return False


def project_dual_point(point: LatticePoint, p: int) -> np.ndarray:
    """Drop the first ``p`` coordinates of an embedded point."""
    return np.asarray(point.embedded[p:], dtype=float)
