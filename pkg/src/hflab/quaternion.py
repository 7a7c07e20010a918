"""Unit-quaternion arithmetic on arrays of shape (..., 4) ordered (w, x, y, z)."""

import numpy as np


def qmul(p, q):
    """Hamilton product, broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def qconj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def qexp(v):
    """exp of a pure-imaginary quaternion given by its 3-vector ``v``."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1, keepdims=True)
    sinc = np.sinc(theta / np.pi)  # sin(theta)/theta, safe at 0
    return np.concatenate([np.cos(theta), sinc * v], axis=-1)


def unit_axis(a):
    """Imaginary unit e_a for a in 1..3 as a quaternion."""
    e = np.zeros(4)
    e[a] = 1.0
    return e


def rotation_matrix(q):
    """Rotation v -> q v q^-1 for unit quaternions, shape (..., 3, 3).

    Quadratic in q, so q and -q give the same matrix.
    """
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    r = np.empty(q.shape[:-1] + (3, 3))
    r[..., 0, 0] = w * w + x * x - y * y - z * z
    r[..., 0, 1] = 2 * (x * y - w * z)
    r[..., 0, 2] = 2 * (x * z + w * y)
    r[..., 1, 0] = 2 * (x * y + w * z)
    r[..., 1, 1] = w * w - x * x + y * y - z * z
    r[..., 1, 2] = 2 * (y * z - w * x)
    r[..., 2, 0] = 2 * (x * z - w * y)
    r[..., 2, 1] = 2 * (y * z + w * x)
    r[..., 2, 2] = w * w - x * x - y * y + z * z
    return r


def qpow(q, k):
    """Integer power by repeated products; q**-1 is the conjugate for unit q."""
    q = np.asarray(q, dtype=float)
    base = q if k >= 0 else qconj(q)
    out = np.zeros_like(q)
    out[..., 0] = 1.0
    for _ in range(abs(int(k))):
        out = qmul(out, base)
    return out


def random_unit(rng, size):
    """Haar-uniform unit quaternions."""
    return normalize(rng.standard_normal((size, 4)))
