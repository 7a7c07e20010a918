"""Degree of rotation-valued fields on S^3 and orbit bookkeeping for framings.

Homotopy classes of maps S^3 -> SO(3) are classified by an integer degree.
It is computed as a pullback volume: with m_a the axial vector of
R^T E_a(R), the density det[m_1 m_2 m_3] integrates to deg(R) times a
constant, and that constant is calibrated on the covering map rho so that
deg(rho) = 1 exactly on every grid.
"""

import enum
import functools
import logging
from dataclasses import dataclass

import numpy as np

from hflab import quaternion as quat
from hflab.framing import (
    GaugeField,
    compose,
    gauge_apply,
    polar_project,
    reference_left_framing,
    reference_right_framing,
    relative_gauge,
)
from hflab.grid import integrate

log = logging.getLogger(__name__)

MAX_TWIST = 8


class CalibrationUnstable(ValueError):
    """Raw degree is too far from an integer to round safely."""


class OrbitLabel(str, enum.Enum):
    LEFT_CANONICAL = "left_canonical"
    RIGHT_CANONICAL = "right_canonical"
    TWISTED = "twisted"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class OrbitClass:
    degree: int
    label: OrbitLabel
    twist: int = 0

    def __post_init__(self):
        if self.label is OrbitLabel.LEFT_CANONICAL and self.degree != 0:
            raise ValueError("the left canonical orbit is the base point, degree 0")

    def to_dict(self):
        return {"degree": self.degree, "label": self.label.value, "twist": self.twist}


@dataclass(frozen=True)
class DefectValue:
    value: int | None


@dataclass(frozen=True)
class DegreeResult:
    raw: float
    rounded: int
    calibration: float
    resolution: str

    def to_dict(self):
        return {
            "raw": self.raw,
            "rounded": self.rounded,
            "calibration": self.calibration,
            "grid": self.resolution,
        }


def covering_map_field(grid):
    """rho(q): v -> q v q^-1 at every node."""
    return GaugeField(grid, quat.rotation_matrix(grid.nodes))


def power_twist_field(grid, k):
    """rho(q^k), a representative of degree k."""
    k = int(k)
    if abs(k) > MAX_TWIST:
        raise ValueError(f"|twist| must be <= {MAX_TWIST} on these grids")
    if 2 * abs(k) > grid.bandlimit:
        # rho(q^k) is a polynomial of degree 2|k| in q
        log.warning("twist %d exceeds the %s grid's band limit; its degree will not resolve", k, grid.resolution)
    return GaugeField(grid, quat.rotation_matrix(quat.qpow(grid.nodes, k)))


def degree_density(grid, R):
    """det of the Maurer-Cartan axial vectors, per node."""
    dR = grid.gradient(R)  # [i, j, a] = E_a(R[i, j])
    M = np.einsum("...ki,...kja->...aij", R, dR)  # R^T E_a(R), antisymmetric in (i, j)
    m = np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1)  # [a, axial component]
    return np.linalg.det(np.swapaxes(m, -1, -2))


@functools.lru_cache(maxsize=8)
def _calibration(grid):
    return float(integrate(grid, degree_density(grid, covering_map_field(grid).a)))


def calibration_constant(grid):
    """Degree integral of the covering map on this grid (analytically 16 pi^2)."""
    return _calibration(grid)


def degree(R, tol=1e-8, strict=True):
    """(raw, rounded) degree of a rotation-valued gauge field."""
    grid = R.grid
    if not R.is_rotation(tol):
        raise ValueError("degree needs a rotation-valued field; polar_project it first")
    K = calibration_constant(grid)
    raw = float(integrate(grid, degree_density(grid, R.a))) / K
    rounded = int(np.rint(raw))
    if strict and abs(raw - rounded) > 0.25:
        raise CalibrationUnstable(f"raw degree {raw:.4f} is not near an integer")
    return DegreeResult(raw, rounded, K, grid.resolution)


def orbit_compose(a, b):
    """Pointwise product; degree is additive on rotation-valued fields."""
    return compose(a, b)


def orbit_degree(w, base=None):
    """Degree of the class of w relative to the left reference framing (or ``base``)."""
    base = reference_left_framing(w.grid) if base is None else base
    return degree(polar_project(relative_gauge(base, w)))


def canonical_framing(grid, side="left", twist=0):
    """Reference framing of the given side twisted by rho(q^twist), with its orbit class."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    twist = int(twist)
    base = reference_left_framing(grid) if side == "left" else reference_right_framing(grid)
    w = gauge_apply(base, power_twist_field(grid, twist))
    delta = 0
    if side == "right":
        delta = orbit_degree(base).rounded
    if twist != 0:
        label = OrbitLabel.TWISTED
    else:
        label = OrbitLabel.LEFT_CANONICAL if side == "left" else OrbitLabel.RIGHT_CANONICAL
    return w, OrbitClass(delta + twist, label, twist)


def defect_report(orbit, left_value=2):
    """Hirzebruch defect on the canonical orbits only.

    Which canonical orbit carries +2 and which -2 is not settled here;
    ``left_value`` picks the assignment and the right orbit gets its negative.
    """
    if left_value not in (2, -2):
        raise ValueError("canonical defects are +2 and -2")
    if orbit.label is OrbitLabel.LEFT_CANONICAL:
        return DefectValue(left_value)
    if orbit.label is OrbitLabel.RIGHT_CANONICAL:
        return DefectValue(-left_value)
    return DefectValue(None)
