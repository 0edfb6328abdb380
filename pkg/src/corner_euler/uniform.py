"""Exact velocity of unit vorticity filling the sector.

The stream function is a particular solution of ``Lap psi = 1`` that vanishes
on both edges, minus the harmonic function with the same values on the arc.
Both parts are known in closed form except for the harmonic series, whose sine
coefficients are exact rationals in ``k * beta``::

    psi_p = r^2 (1 - cos(2 phi - theta) / cos(theta)) / 4          (beta != 2)
    psi_p = r^2 (1 - cos 2phi) / 4 + r^2 (log r sin 2phi + phi cos 2phi) / pi
                                                                    (beta == 2)
    psi   = psi_p - Im sum_k b_k w^k,   w = (z / R)^beta.

Transport subtracts the (time-invariant) corner vorticity from every cell and
adds this field back, so the Lagrangian quadrature only sees a remainder that
vanishes at the corner.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numba as nb
import numpy as np

from .conformal import SectorDomain, as_complex

TERMS = 4096


def _resonant(beta: float) -> bool:
    return abs(beta - 2.0) < 1e-12


@lru_cache(maxsize=32)
def series_coefficients(theta: float, radius: float, terms: int = TERMS) -> np.ndarray:
    """``k * b_k`` for ``k = 1 .. terms``."""
    beta = math.pi / theta
    k = np.arange(1, terms + 1, dtype=float)
    odd = (np.arange(1, terms + 1) % 2 == 1)
    if _resonant(beta):
        b = np.zeros(terms)
        kk = k[1:]
        b[1:] = np.where(odd[1:], -radius**2 / (math.pi * kk * (kk * kk - 1.0)), 0.0)
        b[0] = radius**2 * (math.log(radius) + 0.75) / math.pi
    else:
        a = k * beta
        b = np.where(odd, -4.0 * radius**2 / (theta * a * (a * a - 4.0)), 0.0)
    out = k * b
    out.flags.writeable = False
    return out


@nb.njit(cache=True, fastmath=False)
def _harmonic(z, kb, radius, beta, cut):
    out = np.empty(z.shape[0], dtype=np.complex128)
    n = kb.shape[0]
    for i in range(z.shape[0]):
        zi = z[i]
        r = abs(zi)
        if r == 0.0:
            out[i] = 0.0
            continue
        ph = math.atan2(zi.imag, zi.real)
        if ph < cut:
            ph += 2.0 * math.pi
        rho = (r / radius) ** beta
        w = complex(rho * math.cos(beta * ph), rho * math.sin(beta * ph))
        acc = complex(kb[n - 1], 0.0)
        for j in range(n - 2, -1, -1):
            acc = acc * w + kb[j]
        out[i] = beta * acc * w / zi
    return out


def _sector_angle(z: np.ndarray, theta: float) -> np.ndarray:
    cut = -(2.0 * math.pi - theta) / 2.0
    ph = np.angle(z)
    return np.where(ph < cut, ph + 2.0 * math.pi, ph)


def _particular_gradient(z: np.ndarray, theta: float, beta: float) -> np.ndarray:
    if _resonant(beta):
        r = np.abs(z)
        lg = np.log(np.where(r == 0, 1.0, r)) + 1j * _sector_angle(z, theta)
        return 0.5 * (z - np.conj(z)) + 1j * np.conj(2.0 * z * lg + z) / math.pi
    return 0.5 * z - np.exp(1j * theta) * np.conj(z) / (2.0 * math.cos(theta))


def uniform_velocity(points, dom: SectorDomain, terms: int = TERMS) -> np.ndarray:
    """Complex velocity ``u1 + i u2`` of unit vorticity at ``points``."""
    z = np.atleast_1d(np.asarray(as_complex(points), dtype=np.complex128))
    kb = series_coefficients(float(dom.theta), float(dom.radius), int(terms))
    cut = -(2.0 * math.pi - dom.theta) / 2.0
    grad_p = _particular_gradient(z, dom.theta, dom.beta)
    u = -1j * grad_p - np.conj(_harmonic(z, kb, float(dom.radius), float(dom.beta), cut))
    return np.where(z == 0, 0.0, u)


def uniform_stream(points, dom: SectorDomain, terms: int = TERMS) -> np.ndarray:
    """Stream function of unit vorticity (vanishes on the whole boundary)."""
    z = np.atleast_1d(np.asarray(as_complex(points), dtype=np.complex128))
    th, beta, R = dom.theta, dom.beta, dom.radius
    r = np.abs(z)
    ph = _sector_angle(z, th)
    if _resonant(beta):
        with np.errstate(divide="ignore"):
            lr = np.where(r == 0, 0.0, np.log(np.where(r == 0, 1.0, r)))
        psi = r**2 * (1 - np.cos(2 * ph)) / 4 + r**2 * (lr * np.sin(2 * ph) + ph * np.cos(2 * ph)) / math.pi
    else:
        psi = r**2 * (1 - np.cos(2 * ph - th) / math.cos(th)) / 4
    kb = series_coefficients(float(th), float(R), int(terms))
    k = np.arange(1, len(kb) + 1)
    b = kb / k
    w = (r / R) ** beta * np.exp(1j * beta * ph)
    h = np.zeros(z.shape, dtype=complex)
    for bk in b[::-1]:
        h = (h + bk) * w
    return psi - h.imag
