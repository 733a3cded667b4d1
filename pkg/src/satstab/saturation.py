"""Componentwise saturation, its deadzone, and the generalized sector test."""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class SaturationLevel:
    """Symmetric clamp bound; math.inf disables saturation."""

    ell: float

    def __post_init__(self):
        if not self.ell > 0.0:
            raise ValueError(f"saturation level must be positive, got {self.ell}")


UNSATURATED = SaturationLevel(math.inf)


def sat(s, level):
    """Clamp each component of s to [-ell, ell]."""
    ell = level.ell
    clipped = np.clip(np.asarray(s, dtype=float), -ell, ell)
    if np.isscalar(s) or np.ndim(s) == 0:
        return float(clipped)
    return clipped


def deadzone(u, level):
    """sat(u) - u; zero exactly where the clamp is inactive."""
    u_arr = np.asarray(u, dtype=float)
    out = np.clip(u_arr, -level.ell, level.ell) - u_arr
    if np.isscalar(u) or np.ndim(u) == 0:
        return float(out)
    return out


class SectorReport(NamedTuple):
    hypothesis_ok: bool
    weighted_value: float
    holds: bool


def sector_holds(z, K, C, D, level, tol=1e-12):
    """Weighted sector inequality phi(Kz)^T D (phi(Kz) + Cz) <= tol.

    The inequality is guaranteed when |((K - C) z)_j| <= ell for every
    channel; that hypothesis is checked and reported separately so callers
    can distinguish a violated premise from a violated conclusion.
    """
    z = np.asarray(z, dtype=float)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    phi = deadzone(K @ z, level)
    hypothesis_ok = bool(np.all(np.abs((K - C) @ z) <= level.ell))
    value = float(phi @ D @ (phi + C @ z))
    return SectorReport(hypothesis_ok=hypothesis_ok, weighted_value=value, holds=value <= tol)
