"""Structure functions, linear curvature and the H-tensor of a framing.

With B = A^-1 the dual frame of w is X_i = B[a, i] E_a and

    [X_i, X_j] = C[k, i, j] X_k.

The linear curvature is the frame derivative R[k, i, j, l] = X_l(C[k, i, j]),
which vanishes exactly when C is constant, and the H-tensor is a contraction
of R. All tensor indices are taken in the moving w-frame.
"""

import enum

import numpy as np

from hflab.framing import COND_LIMIT, DegenerateFramingError
from hflab.grid import integrate

EPS = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1.0
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1.0


class Contraction(str, enum.Enum):
    DIV_K = "div_k"
    TRACE_I = "trace_i"


def inverse3(m):
    """Closed-form inverse of a field of 3x3 matrices via the adjugate."""
    c0 = np.cross(m[..., 1, :], m[..., 2, :])
    c1 = np.cross(m[..., 2, :], m[..., 0, :])
    c2 = np.cross(m[..., 0, :], m[..., 1, :])
    det = np.sum(m[..., 0, :] * c0, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.stack([c0, c1, c2], axis=-1) / det[..., None, None]


def dual_frame(w):
    """B = A^-1, rejecting nodes whose condition number proxy |A|_F |B|_F exceeds the limit."""
    B = inverse3(w.A)
    cond = np.sqrt(np.sum(w.A**2, axis=(-1, -2)) * np.sum(B**2, axis=(-1, -2)))
    if not np.all(np.isfinite(cond)) or cond.max() > COND_LIMIT:
        raise DegenerateFramingError(f"framing is numerically singular (condition ~ {cond.max():.3e})")
    return B


PAIRS = ((1, 2), (2, 0), (0, 1))  # (i, j) for the axial index m = 0, 1, 2


def _cross(u, v):
    out = np.empty(np.broadcast_shapes(u.shape, v.shape))
    out[..., 0] = u[..., 1] * v[..., 2] - u[..., 2] * v[..., 1]
    out[..., 1] = u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2]
    out[..., 2] = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    return out


def axial_structure(w, B=None):
    """Independent structure functions c[k, m] with C[k, i, j] = eps[m, i, j] c[k, m]."""
    grid = w.grid
    if B is None:
        B = dual_frame(w)
    n = grid.shape
    dB = grid.gradient(B).reshape(n + (9, 3))  # [(c, j), a] = E_a(B[c, j])
    XB = (dB @ B).reshape(n + (3, 3, 3))  # [c, j, i] = X_i(B[c, j])
    inner = np.empty(n + (3, 3))  # [c, m]
    for m, (i, j) in enumerate(PAIRS):
        # 2 eps_abc B[a, i] B[b, j] is twice the cross product of columns i and j
        inner[..., m] = 2.0 * _cross(B[..., :, i], B[..., :, j]) + XB[..., :, j, i] - XB[..., :, i, j]
    return w.A @ inner


def expand_axial(cvec):
    C = np.zeros(cvec.shape[:-1] + (3, 3))
    for m, (i, j) in enumerate(PAIRS):
        C[..., i, j] = cvec[..., m]
        C[..., j, i] = -cvec[..., m]
    return C


def structure_functions(w, B=None):
    """C[k, i, j] per node, antisymmetric in (i, j) by construction."""
    return expand_axial(axial_structure(w, B))


def _axial_curvature(grid, cvec, B):
    n = grid.shape
    return (grid.gradient(cvec).reshape(n + (9, 3)) @ B).reshape(n + (3, 3, 3))  # [k, m, l]


def linear_curvature(w, C=None, B=None):
    """R[k, i, j, l] = X_l(C[k, i, j])."""
    if B is None:
        B = dual_frame(w)
    cvec = axial_structure(w, B) if C is None else np.stack([C[..., i, j] for i, j in PAIRS], axis=-1)
    full = expand_axial(np.swapaxes(_axial_curvature(w.grid, cvec, B), -1, -2))  # [k, l, i, j]
    return np.moveaxis(full, -3, -1)


def contract(R, contraction=Contraction.DIV_K):
    """H[k, j] from the full curvature array.

    div_k:   H[k, j] = sum_i R[k, j, i, i]   (divergence of C over its last lower index)
    trace_i: H[k, j] = sum_l R[l, l, j, k]

    The div_k sign makes the linearized flow about a Lie framing -curl curl,
    i.e. dissipative; the opposite sign is a backward heat equation.
    """
    contraction = Contraction(contraction)
    if contraction is Contraction.DIV_K:
        return np.einsum("...kjii->...kj", R)
    return np.einsum("...lljk->...kj", R)


def h_tensor(w, contraction=Contraction.DIV_K):
    return contract(linear_curvature(w), contraction)


def curvature_state(w, contraction=Contraction.DIV_K):
    """B, C, R and H in one pass; shared by the flow and the reports."""
    B = dual_frame(w)
    C = structure_functions(w, B)
    R = linear_curvature(w, C, B)
    return B, C, R, contract(R, contraction)


def field_norms(grid, f):
    """(sup, L2) of the per-node Frobenius norm of a tensor field."""
    f = grid.check(f)
    sq = np.sum(f.reshape(grid.shape + (-1,)) ** 2, axis=-1)
    return float(np.sqrt(sq.max())), float(np.sqrt(max(integrate(grid, sq), 0.0)))


def constancy_residual(grid, C):
    """sup over nodes of |C - mean(C)| (Frobenius) and the mean itself."""
    cbar = integrate(grid, C) / np.sum(grid.weights)
    dev = np.sqrt(np.sum((C - cbar) ** 2, axis=(-3, -2, -1)))
    return float(dev.max()), cbar
