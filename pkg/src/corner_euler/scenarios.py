"""Initial vorticity fields, the polar cell mesh and odd reflection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .biot_savart import CellSet
from .conformal import SectorDomain, as_complex, sector_arg

KINDS = ("A_abs_plus_one", "B_capped_ramp", "C_abs", "D_odd_reflection")
DEFAULT_LADDER = (0.02, 0.04, 0.08, 0.16)

# point constraint kinds, shared with the integrator
FREE, EDGE0, EDGE_THETA, ARC, FIXED = 0, 1, 2, 3, 4


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """One of the four initial data, with its mesh and boundary markers.

    ``theta`` is the target corner angle; for kind D the simulation runs on
    the half-sector of angle ``theta / 2``.  ``marker_starts`` are fractions
    of the sector radius.
    """

    kind: str
    theta: float
    epsilon: float = 0.05
    mesh: tuple = (32, 32)
    marker_starts: tuple = DEFAULT_LADDER
    radius: float = 0.49
    # innermost radial breakpoint as a fraction of the radius
    inner_fraction: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown scenario kind {self.kind!r}")
        th = self.theta
        hp = math.pi / 2
        tol = 1e-12
        if self.kind in ("A_abs_plus_one", "B_capped_ramp") and not (0 < th <= hp + tol):
            raise ConfigurationError(f"kind {self.kind} requires 0 < theta <= pi/2, got {th}")
        if self.kind == "C_abs" and not (hp + tol < th < math.pi):
            raise ConfigurationError(f"kind C_abs requires pi/2 < theta < pi, got {th}")
        if self.kind == "D_odd_reflection" and not (math.pi < th < 2 * math.pi):
            raise ConfigurationError(f"kind D_odd_reflection requires pi < theta < 2pi, got {th}")
        if self.kind == "B_capped_ramp" and not (0 < self.epsilon < 0.2 * self.radius):
            raise ConfigurationError(
                f"epsilon={self.epsilon} must satisfy 0 < epsilon < 0.2*R={0.2 * self.radius}")
        n_r, n_phi = self.mesh
        if n_r < 1 or n_phi < 1:
            raise ConfigurationError("mesh resolution must be >= 1 in both directions")
        if any(not (0 < m < 1) for m in self.marker_starts):
            raise ConfigurationError("marker_starts are fractions of R in (0, 1)")

    @property
    def sim_theta(self) -> float:
        return self.theta / 2 if self.kind == "D_odd_reflection" else self.theta

    def domain(self) -> SectorDomain:
        """Domain the simulation actually runs on."""
        return SectorDomain(self.sim_theta, self.radius)

    def full_domain(self) -> SectorDomain:
        return SectorDomain(self.theta, self.radius)

    def marker_positions(self) -> np.ndarray:
        return np.array(self.marker_starts, dtype=float) * self.radius


def make_initial_vorticity(spec: ScenarioSpec) -> Callable:
    """Closed-form initial vorticity for ``spec``.

    For kind D the returned field lives on the half-sector and equals the
    distance to the full sector's bisector, i.e. ``x1`` after rotating the
    bisector onto the vertical axis.
    """
    kind = spec.kind
    eps = spec.epsilon
    half_gap = (math.pi - spec.theta) / 2

    def omega0(x):
        z = as_complex(x)
        r = np.abs(z)
        if kind == "A_abs_plus_one":
            v = r + 1.0
        elif kind == "B_capped_ramp":
            v = np.minimum(r / eps + 1.0, 2.0)
        elif kind == "C_abs":
            v = r
        else:
            v = r * np.cos(sector_arg(z, spec.theta) + half_gap)
        return float(v) if np.ndim(v) == 0 else v

    return omega0


def radial_breakpoints(radius: float, n_r: int, inner_fraction: float,
                       switch_fraction: float = 0.25) -> np.ndarray:
    """``0 = r_0 < r_1 < ... < r_n = R`` with ``r_1 = inner_fraction * R``.

    Breakpoints are equispaced in the stretched coordinate
    ``s(r) = log(r / r_1)`` for ``r <= r_s`` and ``s(r_s) + (r - r_s) / r_s``
    beyond, with ``r_s = switch_fraction * R``: geometric toward the corner,
    uniform further out, and the spacing is continuous across ``r_s``.
    """
    if n_r == 1:
        return np.array([0.0, radius])
    r1 = inner_fraction * radius
    rs = max(switch_fraction * radius, r1)
    s_end = math.log(rs / r1) + (radius - rs) / rs
    s = np.linspace(0.0, s_end, n_r)
    s_sw = math.log(rs / r1)
    r = np.where(s <= s_sw, r1 * np.exp(np.minimum(s, s_sw)), rs + rs * (s - s_sw))
    r[-1] = radius
    return np.concatenate([[0.0], r])


def default_inner_fraction(theta: float, n_r: int) -> float:
    """Innermost breakpoint for the graded mesh.

    Small enough that the corner is resolved over several decades, large
    enough that the innermost centers keep ``|f(y)| > 1e-12``.
    """
    beta = math.pi / theta
    floor = 10.0 ** (-12.0 / beta)
    return min(max(1e-4, 2.0 * floor), 0.5 / max(n_r, 1)) if n_r > 1 else 1.0


def build_cells(dom: SectorDomain, n_r: int, n_phi: int, omega0: Callable,
                inner_fraction: float | None = None, uniform: bool = False) -> CellSet:
    """Polar tensor mesh over the sector.

    Cell ``(i, j)`` spans ``[r_i, r_{i+1}] x [phi_j, phi_{j+1}]``; its center
    is at radius ``sqrt((r_i^2 + r_{i+1}^2) / 2)`` and the midpoint angle, its
    area is ``(r_{i+1}^2 - r_i^2) dphi / 2``.  Radial breakpoints are graded
    geometrically toward the corner unless ``uniform`` is set.
    """
    if n_r < 1 or n_phi < 1:
        raise ValueError("n_r and n_phi must be >= 1")
    R = dom.radius
    if uniform:
        rb = np.linspace(0.0, R, n_r + 1)
    else:
        frac = default_inner_fraction(dom.theta, n_r) if inner_fraction is None else inner_fraction
        rb = radial_breakpoints(R, n_r, frac)
    pb = np.linspace(0.0, dom.theta, n_phi + 1)
    dphi = dom.theta / n_phi

    ii, jj = np.meshgrid(np.arange(n_r), np.arange(n_phi), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    r0, r1 = rb[ii], rb[ii + 1]
    rc = np.sqrt(0.5 * (r0**2 + r1**2))
    pc = 0.5 * (pb[jj] + pb[jj + 1])
    centers = rc * np.exp(1j * pc)
    area = 0.5 * (r1**2 - r0**2) * dphi

    p0, p1 = pb[jj], pb[jj + 1]
    # corner order (r0,p0), (r1,p0), (r0,p1), (r1,p1); exact on the edge arg = 0
    quads = np.stack([r0 * np.exp(1j * p0), r1 * np.exp(1j * p0),
                      r0 * np.exp(1j * p1), r1 * np.exp(1j * p1)], axis=1)
    quads[jj == 0, 0] = r0[jj == 0]
    quads[jj == 0, 1] = r1[jj == 0]

    omega = np.asarray(omega0(centers), dtype=float) * np.ones(len(centers))
    return CellSet(centers, omega, area, centers.copy(), quads, (n_r, n_phi))


def odd_extend(half_field: Callable, full_dom: SectorDomain) -> Callable:
    """Extend a field on the half-sector ``0 <= arg < theta/2`` to the full
    sector by ``omega(reflected x) = -omega(x)``; zero on the bisector."""
    if not (full_dom.theta > 0):
        raise ConfigurationError("full domain must be a sector symmetric about its bisector")
    half = full_dom.theta / 2

    def field(x):
        z = np.asarray(as_complex(x), dtype=complex)
        a = sector_arg(z, full_dom.theta)
        upper = a > half
        src = np.where(upper, full_dom.reflect_bisector(z), z)
        val = np.asarray(half_field(src), dtype=float) * np.ones(z.shape)
        val = np.where(upper, -val, val)
        val = np.where(np.isclose(a, half, rtol=0.0, atol=1e-15) & ~upper, 0.0, val)
        return float(val) if val.ndim == 0 else val

    return field
