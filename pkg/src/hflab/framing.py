"""Framings (structure objects) and gauge fields on the S^3 grid.

Everything is stored in components relative to the left-invariant coframe
E*, so a framing is a field of 3x3 matrices ``A`` with w^(i) = A[i, s] E*^(s)
and a gauge transformation ``a`` acts at the source by pointwise matrix
product ``A @ a``.
"""

from dataclasses import dataclass, field

import numpy as np

from hflab import quaternion as quat
from hflab.grid import Grid

COND_LIMIT = 1e12


class DegenerateFramingError(ValueError):
    """A matrix field is numerically singular or not positive."""


def _as_matrix_field(grid, m):
    m = np.asarray(m, dtype=float)
    if m.shape != grid.shape + (3, 3):
        raise ValueError(f"expected matrix field of shape {grid.shape + (3, 3)}, got {m.shape}")
    return m


def _require_positive(m, what):
    det = np.linalg.det(m)
    if not np.all(det > 0):
        idx = np.unravel_index(np.argmin(det), det.shape)
        raise DegenerateFramingError(f"{what} has det <= 0 at node {idx} (det={det[idx]:.3e})")


def check_conditioning(m, what="matrix field"):
    cond = np.linalg.cond(m.reshape(-1, 3, 3))
    if not np.all(np.isfinite(cond)) or cond.max() > COND_LIMIT:
        raise DegenerateFramingError(f"{what} is numerically singular (condition {cond.max():.3e})")


@dataclass(frozen=True, eq=False)
class Framing:
    grid: Grid
    A: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix_field(self.grid, self.A))
        if self.validate:
            _require_positive(self.A, "framing")

    def scaled(self, lam):
        if lam <= 0:
            raise ValueError("only positive rescalings keep the framing positive")
        return Framing(self.grid, lam * self.A)

    def target_action(self, g):
        """g o w for a constant matrix g (change of target coordinates)."""
        g = np.asarray(g, dtype=float)
        return Framing(self.grid, np.einsum("ks,...sj->...kj", g, self.A))


@dataclass(frozen=True, eq=False)
class GaugeField:
    grid: Grid
    a: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "a", _as_matrix_field(self.grid, self.a))
        if self.validate:
            _require_positive(self.a, "gauge field")

    def inverse(self):
        return GaugeField(self.grid, np.linalg.inv(self.a))

    def transpose(self):
        return GaugeField(self.grid, np.swapaxes(self.a, -1, -2))

    def is_rotation(self, tol=1e-8):
        ata = np.einsum("...ki,...kj->...ij", self.a, self.a)
        return bool(np.max(np.abs(ata - np.eye(3))) <= tol)


@dataclass(frozen=True)
class Deformation:
    """Sampled path of gauge fields starting at the identity."""

    times: tuple
    fields: tuple

    def __post_init__(self):
        if not self.times or self.times[0] != 0:
            raise ValueError("a deformation starts at t = 0")
        if np.max(np.abs(self.fields[0].a - np.eye(3))) > 1e-12:
            raise ValueError("a deformation starts at the identity gauge")


def identity_gauge(grid):
    return GaugeField(grid, np.broadcast_to(np.eye(3), grid.shape + (3, 3)).copy())


def reference_left_framing(grid):
    """The left-invariant coframe itself: A = I everywhere."""
    return Framing(grid, np.broadcast_to(np.eye(3), grid.shape + (3, 3)).copy())


def reference_right_framing(grid):
    """Coframe dual to the right-invariant frame, A(q) = rho(q)."""
    return Framing(grid, quat.rotation_matrix(grid.nodes))


def gauge_apply(w, a):
    """Source action w o a, pointwise A @ a."""
    if w.grid is not a.grid:
        raise ValueError("framing and gauge field live on different grids")
    return Framing(w.grid, w.A @ a.a)


def relative_gauge(w, z):
    """The unique gauge field a with w o a = z."""
    if w.grid is not z.grid:
        raise ValueError("framings live on different grids")
    check_conditioning(w.A, "source framing")
    return GaugeField(w.grid, np.linalg.solve(w.A, z.A))


def compose(a, b):
    if a.grid is not b.grid:
        raise ValueError("gauge fields live on different grids")
    return GaugeField(a.grid, a.a @ b.a)


def polar_factor(m):
    """Orthogonal polar factor m (m^T m)^(-1/2) of an array of 3x3 matrices."""
    m = np.asarray(m, dtype=float)
    check_conditioning(m, "gauge field")
    mtm = np.einsum("...ki,...kj->...ij", m, m)
    evals, evecs = np.linalg.eigh(mtm)
    inv_sqrt = np.einsum("...ik,...k,...jk->...ij", evecs, 1.0 / np.sqrt(evals), evecs)
    return m @ inv_sqrt


def polar_project(a):
    """Retract a positive gauge field onto SO(3) pointwise."""
    r = polar_factor(a.a)
    if np.any(np.linalg.det(r) <= 0):
        raise DegenerateFramingError("polar factor is not orientation preserving")
    return GaugeField(a.grid, r)


def polar_path(a, s):
    """Point s in [0, 1] on the straight-line homotopy of the symmetric factor from a to its polar factor."""
    r = polar_factor(a.a)
    p = np.einsum("...ki,...kj->...ij", r, a.a)  # symmetric positive factor
    return GaugeField(a.grid, r @ ((1 - s) * p + s * np.eye(3)))
