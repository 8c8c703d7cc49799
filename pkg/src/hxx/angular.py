"""Angular algebra: Gaunt coefficients, real harmonics and their rotations.

Complex harmonics use the Condon-Shortley phase and are indexed by
``m = -l..l``.  Real harmonics are ordered as

* ``l = 1``: z, x, y
* ``l = 2``: 3z^2-r^2, xz, yz, x^2-y^2, xy
* ``l = 3``: z^3, x(5z^2-r^2), y(5z^2-r^2), z(x^2-y^2), xyz, x(x^2-3y^2), y(3x^2-y^2)

so that index 0 is the sigma orbital of a bond along z, indices 1-2 the pi
pair and, for ``l = 3``, indices 3-4 the delta pair.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y
from sympy.physics.wigner import wigner_3j

_S = np.sqrt
_PI = np.pi


@lru_cache(maxsize=None)
def _three_j(j1, j2, j3, m1, m2, m3) -> float:
    return float(wigner_3j(j1, j2, j3, m1, m2, m3))


@lru_cache(maxsize=None)
def gaunt_ck(l1: int, m1: int, l2: int, m2: int, k: int) -> float:
    """Angular coefficient ``c^k(l1 m1, l2 m2)``.

    Equal to ``sqrt(4 pi / (2k+1)) <l1 m1|Y_{k, m1-m2}|l2 m2>``.
    """
    if k < 0 or k > l1 + l2 or k < abs(l1 - l2) or (l1 + l2 + k) % 2:
        return 0.0
    q = m1 - m2
    if abs(q) > k:
        return 0.0
    pref = (-1) ** m1 * np.sqrt((2 * l1 + 1) * (2 * l2 + 1))
    return pref * _three_j(l1, k, l2, 0, 0, 0) * _three_j(l1, k, l2, -m1, q, m2)


def _real_harmonics(l: int, pts: np.ndarray) -> np.ndarray:
    """Orthonormal real harmonics at unit vectors ``pts`` (n, 3) -> (n, 2l+1)."""
    x, y, z = pts.T
    if l == 0:
        cols = [np.full_like(x, 0.5 / _S(_PI))]
    elif l == 1:
        c = _S(3 / (4 * _PI))
        cols = [c * z, c * x, c * y]
    elif l == 2:
        c = _S(15 / (4 * _PI))
        cols = [
            c / (2 * _S(3)) * (3 * z**2 - 1),
            c * x * z,
            c * y * z,
            c / 2 * (x**2 - y**2),
            c * x * y,
        ]
    elif l == 3:
        cols = [
            0.25 * _S(7 / _PI) * z * (5 * z**2 - 3),
            0.25 * _S(21 / (2 * _PI)) * x * (5 * z**2 - 1),
            0.25 * _S(21 / (2 * _PI)) * y * (5 * z**2 - 1),
            0.25 * _S(105 / _PI) * z * (x**2 - y**2),
            0.5 * _S(105 / _PI) * x * y * z,
            0.25 * _S(35 / (2 * _PI)) * x * (x**2 - 3 * y**2),
            0.25 * _S(35 / (2 * _PI)) * y * (3 * x**2 - y**2),
        ]
    else:
        raise ValueError(f"real harmonics implemented for l <= 3, got {l}")
    return np.stack(cols, axis=1)


def _sample_points(n: int = 64, seed: int = 7) -> np.ndarray:
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


@lru_cache(maxsize=None)
def complex_to_real(l: int) -> np.ndarray:
    """Unitary ``C`` with ``real_mu = sum_m C[m, mu] Y_lm`` (m = -l..l)."""
    pts = _sample_points()
    theta = np.arccos(np.clip(pts[:, 2], -1, 1))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    ylm = np.stack([sph_harm_y(l, m, theta, phi) for m in range(-l, l + 1)], axis=1)
    c, *_ = np.linalg.lstsq(ylm, _real_harmonics(l, pts).astype(complex), rcond=None)
    c[np.abs(c) < 1e-13] = 0
    c.flags.writeable = False
    return c


def bond_rotation(direction) -> np.ndarray:
    """Rotation taking the z axis onto ``direction`` (third Euler angle 0)."""
    d = np.asarray(direction, dtype=float)
    r = np.linalg.norm(d)
    if r == 0:
        raise ValueError("bond of zero length")
    d = d / r
    theta = np.arccos(np.clip(d[2], -1.0, 1.0))
    phi = np.arctan2(d[1], d[0])
    cp, sp, ct, st = np.cos(phi), np.sin(phi), np.cos(theta), np.sin(theta)
    rz = np.array([[cp, -sp, 0], [sp, cp, 0], [0, 0, 1]])
    ry = np.array([[ct, 0, st], [0, 1, 0], [-st, 0, ct]])
    return rz @ ry


def real_rotation(l: int, rot) -> np.ndarray:
    """Matrix ``M`` with ``real_nu(R^T r) = sum_mu M[mu, nu] real_mu(r)``.

    Column ``nu`` expresses the rotated orbital ``nu`` in the fixed frame.
    """
    rot = np.asarray(rot, dtype=float)
    pts = _sample_points()
    a = _real_harmonics(l, pts)
    b = _real_harmonics(l, pts @ rot)  # rows are (R^T r_k)^T
    m, *_ = np.linalg.lstsq(a, b, rcond=None)
    return m


def angular_momentum(l: int):
    """``(lz, lplus, lminus)`` in the complex basis ``m = -l..l``."""
    ms = np.arange(-l, l + 1)
    lz = np.diag(ms).astype(float)
    lp = np.zeros((2 * l + 1, 2 * l + 1))
    for i, m in enumerate(ms[:-1]):
        lp[i + 1, i] = np.sqrt(l * (l + 1) - m * (m + 1))
    return lz, lp, lp.T.copy()


def real_to_complex_matrix(l: int, h_real) -> np.ndarray:
    """Express a one-particle matrix given over real harmonics in the ``m`` basis."""
    c = complex_to_real(l)
    return c @ np.asarray(h_real) @ c.conj().T
