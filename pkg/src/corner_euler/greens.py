"""Dirichlet Green function of the unit upper half-disk (four images) and its
pullback to a sector through the power map."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .conformal import SectorDomain, as_complex, map_derivative, sector_arg, to_halfdisk

# sources mapped closer than this to the corner have no usable Kelvin image
SOURCE_FLOOR = 1e-14


class GreenError(ValueError):
    pass


class SingularityError(GreenError):
    """Evaluation point coincides with the source."""


class ImageUndefinedError(GreenError):
    """Source at the corner, where the Kelvin image is undefined."""


@dataclass(frozen=True)
class ImageSet:
    y: complex
    y_star: complex
    y_conj: complex
    y_conj_star: complex


def image_set(y) -> ImageSet:
    y = complex(as_complex(y))
    if abs(y) < SOURCE_FLOOR:
        raise ImageUndefinedError(f"source {y} is at the corner")
    ys = y / abs(y) ** 2
    return ImageSet(y, ys, y.conjugate(), ys.conjugate())


@dataclass(frozen=True)
class GreenParts:
    g_near: np.ndarray | float
    g_far: np.ndarray | float
    total: np.ndarray | float


def _validate_pair(x, y):
    if np.any(np.abs(y) < SOURCE_FLOOR):
        raise ImageUndefinedError("source at the corner: Kelvin image undefined")
    if np.any(x == y):
        raise SingularityError("evaluation point coincides with the source")


def green_halfdisk(x, y) -> GreenParts:
    """``G_U(x, y)`` split into the log-ratio part and the Kelvin part.

    ``total = (g_near + g_far) / (2 pi)``.
    """
    x = as_complex(x)
    y = as_complex(y)
    _validate_pair(x, y)
    ys = y / np.abs(y) ** 2
    xb = np.conj(x)
    g_near = np.log(np.abs(x - y) / np.abs(xb - y))
    g_far = np.log(np.abs(xb - ys) / np.abs(x - ys))
    total = (g_near + g_far) / (2.0 * math.pi)
    if np.ndim(total) == 0:
        return GreenParts(float(g_near), float(g_far), float(total))
    return GreenParts(g_near, g_far, total)


def grad_green_halfdisk(x, y):
    """Gradient of ``G_U`` in its first argument, as ``d/dx1 + 1j d/dx2``.

    Uses ``grad log|x - a| = 1 / conj(x - a)``; the Kelvin terms are written
    with ``y`` instead of ``y*`` so they stay finite for small ``|y|``.
    """
    x = as_complex(x)
    y = as_complex(y)
    _validate_pair(x, y)
    return np.conj(_kernel_sum(x, y)) / (2.0 * math.pi)


def _kernel_sum(w, eta):
    # 1/(w-eta) - 1/(w-eta*) - 1/(w-conj(eta)) + 1/(w-conj(eta*)),  eta* = 1/conj(eta)
    eb = np.conj(eta)
    return 1.0 / (w - eta) - eb / (w * eb - 1.0) - 1.0 / (w - eb) + eta / (w * eta - 1.0)


def green_domain(x, y, dom: SectorDomain):
    """``G_Omega(x, y) = G_U(f(x), f(y))``."""
    return green_halfdisk(to_halfdisk(x, dom), to_halfdisk(y, dom)).total


def green_domain_polar(x, y, dom: SectorDomain):
    """Same quantity as :func:`green_domain`, coded separately in real polar
    arithmetic; used as a cross-check."""
    x = np.asarray(as_complex(x), dtype=complex)
    y = np.asarray(as_complex(y), dtype=complex)
    b = dom.beta
    rx = (np.abs(x) / dom.radius) ** b
    ry = (np.abs(y) / dom.radius) ** b
    ax = b * sector_arg(x, dom.theta)
    ay = b * sector_arg(y, dom.theta)
    # |w - eta|^2 and |conj(w) - eta|^2 via the law of cosines
    d_direct = rx**2 + ry**2 - 2 * rx * ry * np.cos(ax - ay)
    d_mirror = rx**2 + ry**2 - 2 * rx * ry * np.cos(ax + ay)
    # Kelvin image has modulus 1/ry, same angle; multiply through by ry^2
    k_direct = (rx * ry) ** 2 + 1.0 - 2 * rx * ry * np.cos(ax - ay)
    k_mirror = (rx * ry) ** 2 + 1.0 - 2 * rx * ry * np.cos(ax + ay)
    out = np.log((d_direct * k_mirror) / (d_mirror * k_direct)) / (4.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def grad_green_domain(x, y, dom: SectorDomain):
    """``grad_x G_Omega(x, y) = J(x)^T grad G_U(f(x), f(y))`` as a real
    array with trailing dimension 2."""
    x = as_complex(x)
    y = as_complex(y)
    w = to_halfdisk(x, dom)
    eta = to_halfdisk(y, dom)
    d, _ = map_derivative(x, dom)
    g = np.conj(d) * grad_green_halfdisk(w, eta)
    return np.stack([np.real(g), np.imag(g)], axis=-1)


def _random_halfdisk(rng, n):
    r = np.sqrt(rng.uniform(0.0, 1.0, n))
    a = rng.uniform(0.0, math.pi, n)
    return r * np.exp(1j * a)


def _random_sector(rng, dom, n, rmin=0.0, rmax=1.0, margin=0.0):
    r = dom.radius * np.sqrt(rng.uniform(rmin**2, rmax**2, n))
    a = rng.uniform(margin, dom.theta - margin, n)
    return r * np.exp(1j * a)


def harmonicity_residual(dom: SectorDomain, x, y, h: float) -> float:
    """Max |5-point Laplacian of G_Omega(., y)| at the points ``x``."""
    g = lambda p: green_domain(p, y, dom)  # noqa: E731
    lap = (g(x + h) + g(x - h) + g(x + 1j * h) + g(x - 1j * h) - 4.0 * g(x)) / h**2
    return float(np.max(np.abs(lap)))


@dataclass
class SelfTestReport:
    boundary_residual: float
    symmetry_residual: float
    harmonicity_residual: float
    harmonicity_residual_coarse: float
    harmonicity_ratio: float
    pullback_residual: float
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def passed(self) -> bool:
        return (
            self.boundary_residual < 1e-10
            and self.symmetry_residual < 1e-10
            and self.pullback_residual < 1e-10
            and 3.0 <= self.harmonicity_ratio <= 5.0
        )


def green_selftest(dom: SectorDomain, samples: int = 1000, seed: int = 0,
                   steps=(1e-3, 5e-4)) -> SelfTestReport:
    """Check the closed-form Green function against its defining properties.

    Boundary vanishing and symmetry are checked on ``G_U``; harmonicity and
    the two-path pullback on ``G_Omega``.  The harmonicity residual is reported
    at both finite-difference steps; for an O(h^2) stencil their ratio is ~4.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    y = _random_halfdisk(rng, samples)
    y = np.where(np.abs(y) < 1e-3, 0.5j, y)
    n_diam = samples // 2
    t = rng.uniform(-1.0, 1.0, n_diam)
    phi = rng.uniform(0.0, math.pi, samples - n_diam)
    xb = np.concatenate([t + 0j, np.exp(1j * phi)])
    boundary = float(np.max(np.abs(green_halfdisk(xb, y).total)))

    x = _random_halfdisk(rng, samples)
    keep = np.abs(x - y) > 1e-6
    sym = float(np.max(np.abs(green_halfdisk(x[keep], y[keep]).total
                              - green_halfdisk(y[keep], x[keep]).total)))

    xs = _random_sector(rng, dom, samples, 0.2, 0.8, margin=0.1 * dom.theta)
    ys = _random_sector(rng, dom, samples, 0.2, 0.8, margin=0.1 * dom.theta)
    keep = np.abs(xs - ys) > 0.05 * dom.radius
    pull = float(np.max(np.abs(green_domain(xs[keep], ys[keep], dom)
                               - green_domain_polar(xs[keep], ys[keep], dom))))

    h1, h2 = steps
    coarse = harmonicity_residual(dom, xs[keep], ys[keep], h1)
    fine = harmonicity_residual(dom, xs[keep], ys[keep], h2)
    return SelfTestReport(
        boundary_residual=boundary,
        symmetry_residual=sym,
        harmonicity_residual=fine,
        harmonicity_residual_coarse=coarse,
        harmonicity_ratio=coarse / fine if fine > 0 else float("inf"),
        pullback_residual=pull,
        samples=samples,
    )
