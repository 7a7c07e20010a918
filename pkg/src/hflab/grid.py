"""Quadrature and differentiation grid on S^3 viewed as the unit quaternions.

Nodes come from the Euler parametrization

    q(alpha, beta, gamma) = exp(alpha/2 k) exp(beta/2 j) exp(gamma/2 k)

with alpha equispaced on [0, 2pi), gamma equispaced on [0, 4pi) and
mu = cos(beta) at Gauss-Legendre nodes, so the Haar element
(1/8) sin(beta) dalpha dbeta dgamma becomes (1/8) dalpha dmu dgamma.

Differentiation along the left-invariant frame E_a(q) = q e_a works on the
Fourier modes exp(i a alpha) exp(i c gamma) of a field (a, c half-integers
with a - c integer). For such a mode the beta profile of any polynomial on
S^3 has the form

    sin(beta/2)^|a-c| cos(beta/2)^|a+c| P(cos beta)

so each mode is projected onto Jacobi polynomials P^(|a-c|, |a+c|) with the
Gauss-Legendre weights and differentiated analytically in beta. Polynomials
of degree <= ``bandlimit`` are differentiated exactly; anything above the
band is filtered out, which keeps the derivative operators bounded near the
coordinate poles.
"""

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.special import eval_jacobi, roots_legendre

from hflab import quaternion as quat

VOLUME = 2.0 * np.pi**2


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable node set, weights and spectral operators for S^3.

    Scalar fields are arrays of shape ``grid.shape``; tensor fields carry their
    component axes after the three node axes, e.g. ``grid.shape + (3, 3)``.
    """

    n_alpha: int
    n_beta: int
    n_gamma: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    nodes: np.ndarray  # (na, nb, ng, 4)
    weights: np.ndarray  # (na, nb, ng)
    frame_change: np.ndarray  # (na, nb, ng, 3, 3): E_a = F[a, 0] d_alpha + F[a, 1] d_beta + F[a, 2] d_gamma
    bandlimit: int
    _ops: dict = field(repr=False)

    @property
    def shape(self):
        return (self.n_alpha, self.n_beta, self.n_gamma)

    @property
    def size(self):
        return self.n_alpha * self.n_beta * self.n_gamma

    @property
    def resolution(self):
        return f"{self.n_alpha}x{self.n_beta}x{self.n_gamma}"

    def check(self, f, comp=None):
        f = np.asarray(f, dtype=float)
        if f.shape[:3] != self.shape:
            raise GridError(f"field shape {f.shape} does not match grid {self.shape}")
        if comp is not None and f.shape[3:] != tuple(comp):
            raise GridError(f"expected component shape {comp}, got {f.shape[3:]}")
        return f

    def _flat(self, f):
        f = self.check(f)
        return f.reshape(self.shape + (-1,)), f.shape[3:]

    def partials(self, f):
        """Coordinate partials (d_alpha, d_beta, d_gamma) of the band-limited part of f.

        Returns an array of shape ``f.shape + (3,)``.
        """
        flat, comp = self._flat(f)
        out = _spectral_partials(self._ops, flat)  # (na, nb, ng, m, 3)
        return out.reshape(self.shape + comp + (3,))

    def gradient(self, f):
        """All three frame derivatives E_a(f), stacked on a trailing axis."""
        flat, comp = self._flat(f)
        d = _spectral_partials(self._ops, flat)
        out = d @ np.swapaxes(self.frame_change, -1, -2)
        return out.reshape(self.shape + comp + (3,))

    def filter(self, f, bandlimit=None):
        """Projection of f onto polynomials of degree <= bandlimit (default: the grid's own)."""
        flat, comp = self._flat(f)
        if bandlimit is None or bandlimit == self.bandlimit:
            ops = self._ops
        elif 0 <= bandlimit < self.bandlimit:
            ops = _filter_ops(self, int(bandlimit))
        else:
            raise GridError(f"filter band limit must lie in [0, {self.bandlimit}], got {bandlimit}")
        return _spectral_partials(ops, flat, projection_only=True).reshape(self.shape + comp)


def _jacobi_profile(u, v, p, beta):
    """beta-profile sin^u cos^v (half angles) * P_p^(u,v)(cos beta) and its beta derivative."""
    s = np.sin(beta / 2)
    c = np.cos(beta / 2)
    mu = np.cos(beta)
    pref = s**u * c**v
    dpref = np.zeros_like(beta)
    if u > 0:
        dpref = dpref + 0.5 * u * s ** (u - 1) * c ** (v + 1)
    if v > 0:
        dpref = dpref - 0.5 * v * s ** (u + 1) * c ** (v - 1)
    jac = eval_jacobi(p, u, v, mu)
    if p > 0:
        djac = 0.5 * (p + u + v + 1) * eval_jacobi(p - 1, u + 1, v + 1, mu)
    else:
        djac = np.zeros_like(beta)
    phi = pref * jac
    dphi = dpref * jac - pref * djac * np.sin(beta)
    return phi, dphi


def _beta_operators(beta, gl_weights, a, c, bandlimit):
    """Projection and d/dbeta matrices (nb x nb) for Fourier mode (a, c)."""
    nb = beta.size
    m = max(abs(a), abs(c))
    pmax = int(np.floor((bandlimit - 2 * m) / 2 + 1e-9))
    if pmax < 0:
        return np.zeros((nb, nb)), np.zeros((nb, nb))
    u = int(round(abs(a - c)))
    v = int(round(abs(a + c)))
    phi = np.empty((nb, pmax + 1))
    dphi = np.empty((nb, pmax + 1))
    for p in range(pmax + 1):
        phi[:, p], dphi[:, p] = _jacobi_profile(u, v, p, beta)
    wphi = phi * gl_weights[:, None]
    gram = phi.T @ wphi
    coef = np.linalg.solve(gram, wphi.T)  # (pmax+1, nb)
    return phi @ coef, dphi @ coef


def _build_operators(alpha, beta, gl_weights, na, nb, ng, bandlimit):
    # gamma has period 4pi: rFFT index k <-> frequency c = k/2
    kg = np.arange(ng // 2 + 1, dtype=float)
    ka = np.fft.fftfreq(na, d=1.0 / na)
    odd = (np.abs(kg) % 2).astype(bool)
    cfreq = kg / 2.0
    afreq = np.empty((na, kg.size))
    afreq[:, :] = ka[:, None]
    afreq[:, odd] += 0.5  # half-odd c pairs with half-odd a after the exp(-i alpha/2) shift
    nk = kg.size
    afreq = afreq[:, :nk]
    proj = np.zeros((na, nk, nb, nb))
    dbeta = np.zeros((na, nk, nb, nb))
    keep = np.ones((na, nk), dtype=bool)
    keep[:, kg == ng // 2] = False
    for ia in range(na):
        for ig in range(nk):
            a = afreq[ia, ig]
            if not odd[ig] and abs(ka[ia]) == na // 2:
                keep[ia, ig] = False
            if not keep[ia, ig]:
                continue
            proj[ia, ig], dbeta[ia, ig] = _beta_operators(beta, gl_weights, a, cfreq[ig], bandlimit)
    return {
        "i_afreq": (1j * afreq * keep)[:, :, None, None],
        "i_cfreq": (1j * cfreq[None, :] * keep)[:, :, None, None],
        "odd": odd,
        "shift": np.exp(-0.5j * alpha),
        "proj": proj.astype(complex),
        "dbeta": dbeta.astype(complex),
    }


@functools.lru_cache(maxsize=16)
def _filter_ops(grid, bandlimit):
    glw = roots_legendre(grid.n_beta)[1][::-1]
    return _build_operators(grid.alpha, grid.beta, glw, *grid.shape, bandlimit)


def _spectral_partials(ops, f, projection_only=False):
    """f: (na, nb, ng, m) real. Returns partials (na, nb, ng, m, 3) or the projection (na, nb, ng, m)."""
    odd = ops["odd"]
    shift = ops["shift"][:, None, None, None]
    ng = f.shape[2]
    g = sfft.rfft(f, axis=2, workers=-1)
    g[:, :, odd] *= shift
    h = sfft.fft(g, axis=0, workers=-1).transpose(0, 2, 1, 3)  # (na, nk, nb, m)
    hp = ops["proj"] @ h

    def back(spec):
        s = sfft.ifft(spec.transpose(0, 2, 1, 3), axis=0, workers=-1)
        s[:, :, odd] /= shift
        return sfft.irfft(s, n=ng, axis=2, workers=-1)

    if projection_only:
        return back(hp)
    na, nk, nb, m = h.shape
    spec = np.empty((na, nk, nb, m, 3), dtype=complex)
    spec[..., 0] = ops["i_afreq"] * hp
    spec[..., 1] = ops["dbeta"] @ h
    spec[..., 2] = ops["i_cfreq"] * hp
    return back(spec.reshape(na, nk, nb, 3 * m)).reshape(f.shape[:3] + (m, 3))


def euler_to_quaternion(alpha, beta, gamma):
    alpha, beta, gamma = np.broadcast_arrays(
        np.asarray(alpha, float), np.asarray(beta, float), np.asarray(gamma, float)
    )
    za = np.stack([np.cos(alpha / 2), 0 * alpha, 0 * alpha, np.sin(alpha / 2)], axis=-1)
    yb = np.stack([np.cos(beta / 2), 0 * beta, np.sin(beta / 2), 0 * beta], axis=-1)
    zg = np.stack([np.cos(gamma / 2), 0 * gamma, 0 * gamma, np.sin(gamma / 2)], axis=-1)
    return quat.qmul(quat.qmul(za, yb), zg)


def _coordinate_tangents(alpha, beta, gamma):
    """Imaginary parts of q^-1 dq/d(alpha, beta, gamma) in closed form; shape (..., 3, 3) columns."""
    za = np.stack([np.cos(alpha / 2), 0 * alpha, 0 * alpha, np.sin(alpha / 2)], axis=-1)
    yb = np.stack([np.cos(beta / 2), 0 * beta, np.sin(beta / 2), 0 * beta], axis=-1)
    zg = np.stack([np.cos(gamma / 2), 0 * gamma, 0 * gamma, np.sin(gamma / 2)], axis=-1)
    half_k = np.array([0.0, 0.0, 0.0, 0.5])
    half_j = np.array([0.0, 0.0, 0.5, 0.0])
    q = quat.qmul(quat.qmul(za, yb), zg)
    dq = [
        quat.qmul(quat.qmul(quat.qmul(za, half_k), yb), zg),
        quat.qmul(quat.qmul(quat.qmul(za, yb), half_j), zg),
        quat.qmul(quat.qmul(za, yb), quat.qmul(zg, half_k)),
    ]
    return q, dq


def build_grid(n_alpha, n_beta, n_gamma):
    """Construct the Euler-angle grid with Haar quadrature weights and frame-change matrices.

    Grids are cached, so equal counts give the same (immutable) object.
    """
    counts = (n_alpha, n_beta, n_gamma)
    if any(int(n) != n or n < 4 for n in counts):
        raise GridError(f"grid counts must be integers >= 4, got {counts}")
    if n_alpha % 2 or n_gamma % 4:
        raise GridError("n_alpha must be even and n_gamma divisible by 4")
    return _build_grid(*(int(n) for n in counts))


@functools.lru_cache(maxsize=8)
def _build_grid(na, nb, ng):
    alpha = 2 * np.pi * np.arange(na) / na
    gamma = 4 * np.pi * np.arange(ng) / ng
    mu, glw = roots_legendre(nb)
    mu, glw = mu[::-1], glw[::-1]  # beta increasing
    beta = np.arccos(mu)

    A, B, G = np.meshgrid(alpha, beta, gamma, indexing="ij")
    q, dq = _coordinate_tangents(A, B, G)
    nodes = q
    weights = (1.0 / 8.0) * (2 * np.pi / na) * (4 * np.pi / ng) * glw[None, :, None] * np.ones((na, nb, ng))

    # Solve q e_a = sum_m F[a, m] dq/dx_m; left-multiplying by q^-1 turns it into a 3x3 system.
    qc = quat.qconj(q)
    vec = np.stack([quat.qmul(qc, d)[..., 1:] for d in dq], axis=-1)  # (..., 3 comps, 3 coords)
    if np.min(np.abs(np.linalg.det(vec))) < 1e-10:
        raise GridError("coordinate frame is singular at some node")
    frame_change = np.swapaxes(np.linalg.inv(vec), -1, -2)  # row a holds the coordinate coefficients of E_a
    # residual check in R^4
    for a in range(3):
        target = quat.qmul(q, quat.unit_axis(a + 1))
        recon = sum(frame_change[..., a, m, None] * dq[m] for m in range(3))
        if np.max(np.abs(recon - target)) > 1e-9:
            raise GridError("frame_change residual exceeds 1e-9")

    bandlimit = min(na - 1, ng // 2 - 1, 2 * nb - 1)
    ops = _build_operators(alpha, beta, glw, na, nb, ng, bandlimit)
    for arr in (alpha, beta, gamma, nodes, weights, frame_change, *ops.values()):
        arr.flags.writeable = False
    return Grid(na, nb, ng, alpha, beta, gamma, nodes, weights, frame_change, bandlimit, ops)


def frame_derivative(grid, f, a):
    """E_a(f) for a in 1..3, where E_a(q) = q e_a."""
    if a not in (1, 2, 3):
        raise ValueError(f"axis index must be 1, 2 or 3, got {a}")
    return grid.gradient(f)[..., a - 1]


def integrate(grid, f):
    """Haar integral of a scalar (or componentwise tensor) field."""
    f = grid.check(f)
    w = grid.weights.reshape(grid.shape + (1,) * (f.ndim - 3))
    return np.sum(f * w, axis=(0, 1, 2))
