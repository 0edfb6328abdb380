"""Velocity from vorticity by direct summation over Lagrangian cells.

Each cell is a quadrature point (its advected center) carrying a fixed
vorticity and area.  Cells close to the evaluation point are split
recursively (4-way, in the bilinear parameters of the cell's current
quadrilateral).  The current quadrilateral is the initial one pushed through
the local deformation gradient, which is estimated from the displacement of
neighboring cell centers.

Switching between the coarse and the split estimate is a smooth blend in
``distance / diameter``, and the finest sub-cell sitting on the evaluation
point is dropped with a smooth taper, so the discrete velocity is a smooth
function of all positions.  The velocity is the perpendicular gradient of the
correspondingly weighted stream function, including the gradient of the
weights, which keeps it exactly divergence-free.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .conformal import DomainError, SectorDomain, as_complex, in_closed_sector
from .uniform import uniform_velocity

THREADS_ENV = "CORNER_EULER_THREADS"
# default exclusion radius, in finest sub-cell diameters
EXCL_FACTOR = 2.0


@dataclass(frozen=True)
class QuadratureConfig:
    near_field_radius_factor: float = 2.0
    refinement_depth: int = 3
    # None: twice each finest sub-cell's own diameter
    exclusion_radius: float | None = None
    # blend runs from full refinement at factor*diam to none at band*factor*diam
    blend_band: float = 1.5

    def __post_init__(self):
        if self.refinement_depth < 0:
            raise ValueError("refinement_depth must be >= 0")
        if self.near_field_radius_factor <= 0 or self.blend_band <= 1.0:
            raise ValueError("need near_field_radius_factor > 0 and blend_band > 1")
        if self.exclusion_radius is not None and self.exclusion_radius <= 0:
            raise ValueError("exclusion_radius must be positive")


@dataclass(frozen=True)
class VortexCell:
    position: complex
    omega: float
    area: float
    initial_position: complex
    # corners ordered (s0,t0), (s1,t0), (s0,t1), (s1,t1); None -> axis square
    corners: tuple | None = None


def _square_corners(center: complex, area: float) -> np.ndarray:
    h = 0.5 * math.sqrt(area)
    return center + h * np.array([-1 - 1j, 1 - 1j, -1 + 1j, 1 + 1j])


@dataclass(frozen=True)
class CellSet:
    """Struct-of-arrays cell ensemble.

    ``omega``, ``area``, ``initial`` and ``initial_quads`` never change;
    moving the ensemble only replaces ``centers``.  ``grid_shape`` is
    ``(n_r, n_phi)`` when the cells come from the polar mesh in row-major
    order, which is what the deformation-gradient estimate needs.
    """

    centers: np.ndarray
    omega: np.ndarray
    area: np.ndarray
    initial: np.ndarray
    initial_quads: np.ndarray
    grid_shape: tuple | None = None

    def __len__(self):
        return len(self.centers)

    def __getitem__(self, j) -> VortexCell:
        return VortexCell(complex(self.centers[j]), float(self.omega[j]), float(self.area[j]),
                          complex(self.initial[j]),
                          tuple(complex(v) for v in self.current_quads()[j]))

    @property
    def strength(self) -> np.ndarray:
        return self.omega * self.area

    @property
    def circulation(self) -> float:
        return float(math.fsum(self.strength))

    def moved(self, centers) -> "CellSet":
        return CellSet(np.asarray(centers, dtype=complex), self.omega, self.area, self.initial,
                       self.initial_quads, self.grid_shape)

    def deformation_gradients(self) -> np.ndarray:
        """Per-cell 2x2 estimate of the flow-map Jacobian, shape ``(n, 2, 2)``."""
        n = len(self.centers)
        F = np.tile(np.eye(2), (n, 1, 1))
        if self.grid_shape is None:
            return F
        nr, nphi = self.grid_shape
        X = self.initial.reshape(nr, nphi)
        x = self.centers.reshape(nr, nphi)

        def diff(a, axis):
            m = a.shape[axis]
            if m == 1:
                return None
            d = np.empty_like(a)
            sl = lambda s: tuple(s if k == axis else slice(None) for k in range(2))  # noqa: E731
            d[sl(slice(1, -1))] = a[sl(slice(2, None))] - a[sl(slice(None, -2))]
            d[sl(0)] = a[sl(1)] - a[sl(0)]
            d[sl(-1)] = a[sl(-1)] - a[sl(-2)]
            return d

        dXr, dxr = diff(X, 0), diff(x, 0)
        dXp, dxp = diff(X, 1), diff(x, 1)
        if dXr is None:
            # no radial neighbours: keep that direction rigid
            dXr = 1j * dXp
            dxr = 1j * dxp
        if dXp is None:
            dXp = 1j * dXr
            dxp = 1j * dxr
        A = np.stack([np.stack([dXr.real, dXp.real], -1), np.stack([dXr.imag, dXp.imag], -1)], -2)
        B = np.stack([np.stack([dxr.real, dxp.real], -1), np.stack([dxr.imag, dxp.imag], -1)], -2)
        return (B @ np.linalg.inv(A)).reshape(n, 2, 2)

    def current_quads(self) -> np.ndarray:
        """Initial cell quadrilaterals mapped by the local deformation gradient
        about the current centers."""
        rel = self.initial_quads - self.initial[:, None]
        if self.grid_shape is None or np.array_equal(self.centers, self.initial):
            return self.centers[:, None] + rel
        F = self.deformation_gradients()
        rx, ry = rel.real, rel.imag
        nx = F[:, 0, 0, None] * rx + F[:, 0, 1, None] * ry
        ny = F[:, 1, 0, None] * rx + F[:, 1, 1, None] * ry
        return self.centers[:, None] + (nx + 1j * ny)

    @classmethod
    def from_cells(cls, cells) -> "CellSet":
        cells = list(cells)
        if not cells:
            raise ValueError("empty cell set")
        quads = [_square_corners(c.position, c.area) if c.corners is None else np.asarray(c.corners)
                 for c in cells]
        pos = np.array([c.position for c in cells], dtype=complex)
        return cls(
            pos,
            np.array([c.omega for c in cells], dtype=float),
            np.array([c.area for c in cells], dtype=float),
            pos.copy(),
            np.array(quads, dtype=complex),
        )


def _as_cellset(cells) -> CellSet:
    if isinstance(cells, CellSet):
        if len(cells) == 0:
            raise ValueError("empty cell set")
        return cells
    return CellSet.from_cells(cells)


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "0") or 0) or (os.cpu_count() or 1)
    return max(1, int(workers))


def _cut(theta):
    return -(2.0 * math.pi - theta) / 2.0


@dataclass(frozen=True)
class _Sources:
    centers: np.ndarray
    strength: np.ndarray
    diam2: np.ndarray
    a: np.ndarray
    b: np.ndarray
    m: np.ndarray
    s: np.ndarray
    tree: tuple


def prepare_sources(cells: CellSet, dom: SectorDomain, cfg: QuadratureConfig) -> _Sources:
    """Mapped centers, diameters and the sub-cell tree for one evaluation."""
    cut = _cut(dom.theta)
    centers = np.ascontiguousarray(cells.centers, dtype=np.complex128)
    strength = np.ascontiguousarray(cells.strength, dtype=np.float64)
    eta = _kernel.map_points(centers, dom.radius, dom.beta, cut)
    a, b, m, s = _kernel.source_params(eta, strength)
    quads = np.ascontiguousarray(cells.current_quads(), dtype=np.complex128)
    d1 = np.abs(quads[:, 3] - quads[:, 0])
    d2 = np.abs(quads[:, 1] - quads[:, 2])
    diam2 = 0.5 * (d1 * d1 + d2 * d2)
    tree = _kernel.build_tree(centers, strength, quads, int(cfg.refinement_depth),
                              dom.radius, dom.beta, cut)
    return _Sources(centers, strength, diam2, a, b, m, s, tree)


def _evaluate(points: np.ndarray, cells: CellSet, dom: SectorDomain,
              cfg: QuadratureConfig, workers: int | None = None,
              background: float = 0.0) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.complex128)
    out = np.empty(pts.shape[0], dtype=np.complex128)
    if pts.shape[0] == 0:
        return out
    if background != 0.0:
        # quadrature for omega - background, the uniform part exactly
        rest = CellSet(cells.centers, cells.omega - background, cells.area, cells.initial,
                       cells.initial_quads, cells.grid_shape)
        return _evaluate(pts, rest, dom, cfg, workers) + background * uniform_velocity(pts, dom)
    src = prepare_sources(cells, dom, cfg)
    excl = -EXCL_FACTOR if cfg.exclusion_radius is None else float(cfg.exclusion_radius)
    near = cfg.near_field_radius_factor
    far = near * cfg.blend_band
    args = (src.centers, src.strength, src.diam2, src.a, src.b, src.m, src.s, *src.tree,
            dom.radius, dom.beta, _cut(dom.theta), near, far, int(cfg.refinement_depth), excl)
    nw = min(worker_count(workers), pts.shape[0])
    if nw == 1:
        _kernel.velocity_range(pts, out, 0, pts.shape[0], *args)
        return out
    # contiguous chunks; each point's sum is independent of the partition
    bounds = np.linspace(0, pts.shape[0], nw + 1).astype(int)
    with ThreadPoolExecutor(max_workers=nw) as ex:
        futs = [ex.submit(_kernel.velocity_range, pts, out, int(lo), int(hi), *args)
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        for f in futs:
            f.result()
    return out


def velocity_batch(points, cells, dom: SectorDomain, cfg: QuadratureConfig | None = None,
                   workers: int | None = None, check: bool = True,
                   background: float = 0.0) -> np.ndarray:
    """Velocity at many points, returned as an ``(n, 2)`` array.

    A nonzero ``background`` splits off that constant vorticity: the cells
    contribute ``omega_j - background`` and the uniform part is added exactly.
    The result approximates the same field with a smaller quadrature error
    where omega is close to ``background``.
    """
    cfg = cfg or QuadratureConfig()
    cs = _as_cellset(cells)
    pts = np.atleast_1d(np.asarray(as_complex(points), dtype=complex))
    if check:
        ok = in_closed_sector(pts, dom, tol=1e-9)
        if not ok.all():
            bad = pts[~ok][0]
            raise DomainError(f"evaluation point ({bad.real}, {bad.imag}) outside the sector")
    u = _evaluate(pts, cs, dom, cfg, workers, background)
    return np.stack([u.real, u.imag], axis=-1)


def velocity_at(x, cells, dom: SectorDomain, cfg: QuadratureConfig | None = None) -> np.ndarray:
    """``u(x) = sum_j perp(grad_x G_Omega(x, y_j)) omega_j A_j`` with near-field
    refinement, where ``perp(g1, g2) = (g2, -g1)``."""
    return velocity_batch([as_complex(x)], cells, dom, cfg, workers=1)[0]
