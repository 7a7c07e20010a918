"""Local-Lie-group test for a framing and classification of the resulting Lie algebra."""

import enum
from dataclasses import dataclass

import numpy as np

from hflab.curvature import constancy_residual, structure_functions

TOL_KILLING = 1e-8


class LieClass(str, enum.Enum):
    SU2 = "su2"
    ABELIAN = "abelian"
    OTHER = "other"


@dataclass
class LieLimitReport:
    constancy_residual: float
    mean_constants: np.ndarray
    passed: bool
    globalizable: bool
    jacobi_residual: float | None = None
    killing_eigenvalues: np.ndarray | None = None
    classification: LieClass | None = None

    def to_dict(self):
        return {
            "constancy_residual": self.constancy_residual,
            "passed": self.passed,
            "globalizable": self.globalizable,
            "mean_constants": np.asarray(self.mean_constants).tolist(),
            "jacobi_residual": self.jacobi_residual,
            "killing_eigenvalues": None
            if self.killing_eigenvalues is None
            else np.asarray(self.killing_eigenvalues).tolist(),
            "classification": None if self.classification is None else self.classification.value,
        }


def llg_check(w, tol=1e-4):
    """Constancy of the structure functions over S^3.

    Passing also means globalizable: S^3 is compact and simply connected.
    """
    C = structure_functions(w)
    residual, cbar = constancy_residual(w.grid, C)
    passed = residual <= tol
    return LieLimitReport(residual, cbar, passed, passed)


def jacobi_residual(c):
    c = np.asarray(c, dtype=float)
    # J[i, j, k, m] = sum_l c[l, i, j] c[m, l, k] + cyclic(i, j, k)
    t = np.einsum("lij,mlk->ijkm", c, c)
    total = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
    return float(np.max(np.abs(total)))


def killing_form(c):
    """K[i, j] = sum_{a, b} c[a, i, b] c[b, j, a]."""
    return np.einsum("aib,bja->ij", c, c)


def lie_classify(c, tol_k=TOL_KILLING):
    """(jacobi residual, Killing eigenvalues, classification) for constants c[k, i, j]."""
    c = np.asarray(c, dtype=float)
    if c.shape != (3, 3, 3):
        raise ValueError("structure constants must have shape (3, 3, 3)")
    scale = max(1.0, float(np.max(np.abs(c))))
    if np.max(np.abs(c + np.swapaxes(c, 1, 2))) > 1e-10 * scale:
        raise ValueError("structure constants are not antisymmetric in the lower indices")
    eig = np.linalg.eigvalsh(killing_form(c))
    if np.sqrt(np.sum(c**2)) <= tol_k:
        cls = LieClass.ABELIAN
    elif np.all(eig < -tol_k):
        cls = LieClass.SU2
    else:
        cls = LieClass.OTHER
    return jacobi_residual(c), eig, cls


def analyze(w, tol=1e-4):
    """llg_check followed by lie_classify on the mean constants."""
    report = llg_check(w, tol)
    jac, eig, cls = lie_classify(report.mean_constants)
    report.jacobi_residual = jac
    report.killing_eigenvalues = eig
    report.classification = cls
    return report
