"""Penalty family beta_eps used to relax the gradient constraint.

beta_eps(z) = phi(z / eps) with the fixed bridge

    phi(s) = 0        for s <= 0
    phi(s) = s^2 / 4  for 0 <= s <= 2
    phi(s) = s - 1    for s >= 2

so beta_eps vanishes on z <= 0, equals (z - eps)/eps for z >= 2*eps, is
non-decreasing and convex, and satisfies beta(z) <= z * beta'(z). The
bridge is C^{1,1} rather than C-infinity; the solver only consumes beta
and beta', and every certified property is exactly checkable this way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PenaltyFamily", "ConcaveBridgeStub"]


@dataclass(frozen=True)
class PenaltyFamily:
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("penalty parameter epsilon must be positive")

    def beta(self, z):
        s = np.asarray(z, dtype=float) / self.epsilon
        out = np.where(s >= 2.0, s - 1.0, np.where(s > 0.0, s * s / 4.0, 0.0))
        return float(out) if np.isscalar(z) else out

    def beta_prime(self, z):
        s = np.asarray(z, dtype=float) / self.epsilon
        out = np.where(s >= 2.0, 1.0, np.where(s > 0.0, s / 2.0, 0.0))
        out = out / self.epsilon
        return float(out) if np.isscalar(z) else out


@dataclass(frozen=True)
class ConcaveBridgeStub:
    """Deliberately broken penalty (concave bridge). Test hook only.

    Used by the verify command's fault-injection path to prove the
    convexity check can fail; never used by the solver.
    """

    epsilon: float

    def beta(self, z):
        s = np.asarray(z, dtype=float) / self.epsilon
        out = np.where(s > 0.0, np.sqrt(np.maximum(s, 0.0)), 0.0)
        return float(out) if np.isscalar(z) else out

    def beta_prime(self, z):
        s = np.asarray(z, dtype=float) / self.epsilon
        out = np.where(s > 0.0, 0.5 / np.sqrt(np.maximum(s, 1e-300)), 0.0)
        out = out / self.epsilon
        return float(out) if np.isscalar(z) else out
