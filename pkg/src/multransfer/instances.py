"""Reproducible instance generation and matrix presets for the CLI and test suites."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .box_calculus import BoxSpec, DimensionError
from .lattice_engine import TargetMatrix

PRESETS = {
    "sqrt23-row": lambda: [[math.sqrt(2) - 1, math.sqrt(3) - 1]],
    "sqrt23-col": lambda: [[math.sqrt(2) - 1], [math.sqrt(3) - 1]],
    "cbrt24-row": lambda: [[2 ** (1 / 3) - 1, 4 ** (1 / 3) - 1]],
    "rational": lambda: [[1 / 2, 1 / 3]],
    "rational-col": lambda: [[1 / 3], [2 / 5]],
    "zero": lambda: [[0.0, 0.0]],
}

MAHLER_DIMS = ((2, 1), (1, 2), (3, 1), (2, 2), (1, 3), (4, 1), (3, 2), (2, 3), (1, 4))
MULT_SHAPES = ((2, 1), (1, 2), (2, 2), (3, 1))


def preset(name: str) -> TargetMatrix:
    try:
        return TargetMatrix.from_rows(PRESETS[name]())
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def load_matrix(path: str | Path) -> TargetMatrix:
    """Read ``{"m": int, "n": int, "theta": [[...], ...]}`` with ``n`` rows of length ``m``."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or "theta" not in payload:
        raise ValueError("matrix file must be a JSON object with a 'theta' key")
    theta = np.array(payload["theta"], dtype=float)
    if theta.ndim != 2:
        raise ValueError("'theta' must be a list of rows")
    n, m = theta.shape
    if payload.get("m", m) != m or payload.get("n", n) != n:
        raise ValueError(f"declared (m, n) = ({payload.get('m')}, {payload.get('n')}) but theta is {n}x{m}")
    return TargetMatrix(theta)


def dump_matrix(theta: TargetMatrix) -> dict:
    return {"m": theta.m, "n": theta.n, "theta": theta.theta.tolist()}


def rng_for(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def random_matrix(rng: np.random.Generator, m: int, n: int) -> TargetMatrix:
    if m < 1 or n < 1 or m + n < 3:
        raise DimensionError(f"need m + n >= 3, got ({m}, {n})")
    return TargetMatrix(rng.random((n, m)))


def random_weights(
    rng: np.random.Generator,
    m: int,
    n: int,
    target: float = 1.2,
    spread: float = 1.0,
    lam_geo_at_least_one: bool = False,
) -> BoxSpec:
    """Log-uniform weights rescaled so that ``prod(lam) prod(mu) = target``.

    Log-weights are drawn from ``[-spread, spread]``.  With
    ``lam_geo_at_least_one`` a negative mean of the ``lam`` logs is reflected
    to its absolute value, and only the ``mu`` block absorbs the rescaling.
    """
    logs = rng.uniform(-spread, spread, m + n)
    lam_l, mu_l = logs[:m], logs[m:]
    if lam_geo_at_least_one:
        mean = lam_l.mean()
        if mean < 0:
            lam_l = lam_l - 2 * mean
        mu_l = mu_l + (math.log(target) - lam_l.sum() - mu_l.sum()) / n
    else:
        shift = (math.log(target) - logs.sum()) / (m + n)
        lam_l, mu_l = lam_l + shift, mu_l + shift
    return BoxSpec(np.exp(lam_l), np.exp(mu_l))


@dataclass(frozen=True)
class InstanceSpec:
    """One generated instance; fully determined by ``(seed, index)`` and the generator options."""

    index: int
    seed: int
    theta: TargetMatrix
    box: BoxSpec

    def describe(self) -> dict:
        return {
            "index": self.index,
            "seed": self.seed,
            **dump_matrix(self.theta),
            "lam": self.box.lam.tolist(),
            "mu": self.box.mu.tolist(),
        }


def mahler_instances(count: int, seed: int, target: float = 1.2, spread: float = 1.0) -> list[InstanceSpec]:
    """Uniform ``[0, 1)`` matrices with ``d`` in {3, 4, 5}, cycling through the splits ``(m, n)``."""
    out = []
    for i in range(count):
        m, n = MAHLER_DIMS[i % len(MAHLER_DIMS)]
        rng = rng_for(seed, i)
        out.append(InstanceSpec(i, seed, random_matrix(rng, m, n), random_weights(rng, m, n, target, spread)))
    return out


def mult_instances(count: int, seed: int, target: float = 1.2, spread: float = 1.0) -> list[InstanceSpec]:
    """Instances with ``Pi(lam) >= 1`` over the shapes in :data:`MULT_SHAPES`."""
    out = []
    for i in range(count):
        m, n = MULT_SHAPES[i % len(MULT_SHAPES)]
        rng = rng_for(seed, i)
        box = random_weights(rng, m, n, target, spread, lam_geo_at_least_one=True)
        out.append(InstanceSpec(i, seed, random_matrix(rng, m, n), box))
    return out


def chain_instances(count: int, seed: int, target: float = 1.2, spread: float = 1.0) -> list[InstanceSpec]:
    """Like :func:`mult_instances` but restricted to ``m >= 2`` and redrawn until ``min lam < 1``."""
    shapes = [s for s in MULT_SHAPES if s[0] >= 2]
    out = []
    for i in range(count):
        m, n = shapes[i % len(shapes)]
        rng = rng_for(seed, i)
        while True:
            box = random_weights(rng, m, n, target, spread, lam_geo_at_least_one=True)
            if box.lam.min() < 1:
                break
        out.append(InstanceSpec(i, seed, random_matrix(rng, m, n), box))
    return out
