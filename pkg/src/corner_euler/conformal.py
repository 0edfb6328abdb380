"""Power map between a circular sector with a corner at the origin and the
closed unit upper half-disk.

Points are passed around as complex numbers (``x1 + 1j * x2``); every function
accepts scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# slack allowed when deciding whether a point belongs to a closed region
_MEMBERSHIP_TOL = 1e-12


class DomainError(ValueError):
    """A point lies outside the region an operation is defined on."""


class SingularDerivativeError(DomainError):
    """Map derivative requested at the corner of a reflex sector."""


@dataclass(frozen=True)
class SectorDomain:
    """Sector ``{z : 0 < arg z < theta, |z| < radius}`` with its corner at 0."""

    theta: float
    radius: float = 0.49

    def __post_init__(self):
        if not (0.0 < self.theta < TWO_PI):
            raise DomainError(f"theta={self.theta!r} must lie in (0, 2*pi)")
        if math.isclose(self.theta, math.pi, rel_tol=0.0, abs_tol=1e-12):
            raise DomainError("theta = pi is a straight boundary, not a corner")
        if not (0.0 < self.radius and 2.0 * self.radius < 1.0):
            raise DomainError(
                f"radius={self.radius!r} violates 0 < 2*radius < 1 (diam < 1)"
            )

    @property
    def beta(self) -> float:
        return math.pi / self.theta

    @property
    def area(self) -> float:
        return 0.5 * self.radius**2 * self.theta

    def reflect_bisector(self, z):
        """Mirror image across the line ``arg z = theta / 2``."""
        return np.exp(1j * self.theta) * np.conj(z)


def as_complex(p) -> np.ndarray | complex:
    """Accept complex values, ``(x1, x2)`` pairs or ``(n, 2)`` arrays."""
    if isinstance(p, (complex, float, int, np.number)):
        return complex(p)
    a = np.asarray(p)
    if np.iscomplexobj(a):
        return a if a.ndim else complex(a)
    a = a.astype(float)
    if a.shape == (2,):
        return complex(a[0], a[1])
    if a.ndim >= 1 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    raise ValueError(f"cannot interpret array of shape {a.shape} as points")


def sector_arg(z, theta: float):
    """Polar angle in the sector's branch.

    Angles are taken in [0, 2*pi), except that the exterior wedge is split at
    its bisector so that points a hair below the edge ``arg = 0`` get a small
    negative angle instead of one near 2*pi.
    """
    a = np.angle(z)
    cut = -(TWO_PI - theta) / 2.0
    return np.where(a < cut, a + TWO_PI, a)


def in_closed_sector(z, dom: SectorDomain, tol: float = _MEMBERSHIP_TOL):
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    a = sector_arg(z, dom.theta)
    # angular slack is measured as a distance from the edge lines
    ok_r = r <= dom.radius * (1.0 + tol)
    ok_a = (r * np.sin(np.minimum(np.maximum(-a, 0.0), math.pi / 2)) <= tol) & (
        r * np.sin(np.minimum(np.maximum(a - dom.theta, 0.0), math.pi / 2)) <= tol
    )
    return ok_r & (ok_a | (r == 0.0))


def in_closed_halfdisk(w, tol: float = _MEMBERSHIP_TOL):
    w = np.asarray(w, dtype=complex)
    return (w.imag >= -tol) & (np.abs(w) <= 1.0 + tol)


def _check(mask, pts, what: str):
    mask = np.asarray(mask)
    if not mask.all():
        bad = np.asarray(pts).ravel()[~mask.ravel()][0]
        raise DomainError(f"point ({bad.real:.17g}, {bad.imag:.17g}) is outside {what}")


def to_halfdisk(z, dom: SectorDomain, check: bool = True):
    """Map sector points to the half-disk: ``w = (z / R) ** beta``."""
    z = as_complex(z)
    if check:
        _check(in_closed_sector(z, dom), z, "the closed sector")
    rho = np.abs(z) / dom.radius
    ang = dom.beta * sector_arg(z, dom.theta)
    w = rho**dom.beta * np.exp(1j * ang)
    return complex(w) if np.ndim(w) == 0 else w


def from_halfdisk(w, dom: SectorDomain, check: bool = True):
    """Inverse map ``z = R * w ** (1 / beta)`` with arg w taken in [0, pi]."""
    w = as_complex(w)
    if check:
        _check(in_closed_halfdisk(w), w, "the closed upper half-disk")
    ang = np.angle(w)
    # the real segment [-1, 0) must land on the edge arg = theta
    ang = np.where(ang < -math.pi / 2, ang + TWO_PI, ang)
    z = dom.radius * np.abs(w) ** (1.0 / dom.beta) * np.exp(1j * ang / dom.beta)
    return complex(z) if np.ndim(z) == 0 else z


def map_derivative(z, dom: SectorDomain, check: bool = True):
    """Complex derivative ``f'(z) = (beta / R) (z / R) ** (beta - 1)`` and the
    real 2x2 Jacobian ``[[Re f', -Im f'], [Im f', Re f']]``.

    The Jacobian array has shape ``z.shape + (2, 2)``.
    """
    z = as_complex(z)
    if check:
        _check(in_closed_sector(z, dom), z, "the closed sector")
    beta = dom.beta
    r = np.abs(z)
    if beta < 1.0 and np.any(r == 0.0):
        raise SingularDerivativeError("f' is unbounded at the corner when beta < 1")
    rho = r / dom.radius
    ang = (beta - 1.0) * sector_arg(z, dom.theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        mod = (beta / dom.radius) * np.where(r > 0, rho ** (beta - 1.0), 0.0 if beta > 1 else 1.0)
    d = mod * np.exp(1j * ang)
    jac = np.stack(
        [np.stack([d.real, -d.imag], axis=-1), np.stack([d.imag, d.real], axis=-1)],
        axis=-2,
    )
    if np.ndim(d) == 0:
        return complex(d), jac
    return d, jac
