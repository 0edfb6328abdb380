"""Lagrangian transport: RK4 for cell centers and boundary markers."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .biot_savart import CellSet, QuadratureConfig, _evaluate
from .conformal import SectorDomain, as_complex, in_closed_sector, sector_arg
from .scenarios import ScenarioSpec, build_cells, make_initial_vorticity

log = logging.getLogger(__name__)

FINITE_TIME_KINDS = ("C_abs", "D_odd_reflection")
AREA_TOLERANCE = 0.10


class IntegrationError(RuntimeError):
    def __init__(self, message, index=None, step=None):
        super().__init__(message)
        self.index = index
        self.step = step


@dataclass
class BoundaryMarker:
    """Tracer on the edge ``arg = 0``; ``x1`` is its distance to the corner."""

    x1: float
    omega0_value: float
    history: list = field(default_factory=list)
    arrival_time: float | None = None

    @property
    def x2(self) -> float:
        return 0.0


@dataclass(frozen=True)
class SimulationState:
    time: float
    cells: CellSet
    marker_x1: np.ndarray
    marker_omega: np.ndarray
    dom: SectorDomain
    step_count: int = 0
    omega_corner: float = 0.0
    projections: int = 0
    monotone_violations: int = 0

    @property
    def markers(self) -> list[BoundaryMarker]:
        return [BoundaryMarker(float(x), float(w)) for x, w in zip(self.marker_x1, self.marker_omega)]

    @property
    def marker_positions(self) -> np.ndarray:
        """Markers as ``(n, 2)`` points; the second column is identically 0."""
        return np.column_stack([self.marker_x1, np.zeros_like(self.marker_x1)])

    @property
    def circulation(self) -> float:
        return self.cells.circulation

    @property
    def omega_range(self) -> tuple[float, float]:
        return float(self.cells.omega.min()), float(self.cells.omega.max())


def initial_state(spec: ScenarioSpec, dom: SectorDomain | None = None) -> SimulationState:
    dom = dom or spec.domain()
    omega0 = make_initial_vorticity(spec)
    n_r, n_phi = spec.mesh
    cells = build_cells(dom, n_r, n_phi, omega0, inner_fraction=spec.inner_fraction)
    x1 = spec.marker_positions()
    return SimulationState(
        time=0.0,
        cells=cells,
        marker_x1=x1,
        marker_omega=np.asarray(omega0(x1 + 0j), dtype=float),
        dom=dom,
        omega_corner=float(omega0(0j)),
    )


def project_to_sector(z: np.ndarray, dom: SectorDomain) -> np.ndarray:
    """Nearest point of the closed sector (identity inside)."""
    z = np.asarray(z, dtype=complex)
    inside = in_closed_sector(z, dom, tol=0.0)
    if inside.all():
        return z
    R, th = dom.radius, dom.theta
    e = np.exp(1j * th)
    c0 = np.clip(z.real, 0.0, R) + 0j
    c1 = np.clip((z * np.conj(e)).real, 0.0, R) * e
    c2 = R * np.exp(1j * np.clip(sector_arg(z, th), 0.0, th))
    cands = np.stack([c0, c1, c2])
    best = cands[np.argmin(np.abs(cands - z), axis=0), np.arange(z.size)]
    return np.where(inside, z, best)


def _stage(zc, x1, base: CellSet, dom, cfg, workers, background=0.0):
    """Velocities of the cells (complex) and tangential marker speeds.

    ``background`` is the corner vorticity, handled exactly (see ``uniform``).
    """
    zc = project_to_sector(zc, dom)
    x1 = np.clip(x1, 0.0, dom.radius)
    cells = base.moved(zc)
    pts = np.concatenate([zc, x1 + 0j])
    u = _evaluate(pts, cells, dom, cfg, workers, background)
    bad = ~np.isfinite(u)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise IntegrationError(f"non-finite velocity at point {idx}", index=idx)
    nc = len(zc)
    return u[:nc], u[nc:].real


def rk4_step(state: SimulationState, dt: float, cfg: QuadratureConfig | None = None,
             workers: int | None = None, check_monotone: bool = False) -> SimulationState:
    """One classical four-stage step for every cell and marker.

    Markers move with the tangential velocity only, so their second
    coordinate stays exactly zero.  Returns a new state.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    cfg = cfg or QuadratureConfig()
    dom = state.dom
    base = state.cells
    z0, x0 = base.centers, state.marker_x1
    w0 = state.omega_corner
    try:
        k1z, k1x = _stage(z0, x0, base, dom, cfg, workers, w0)
        k2z, k2x = _stage(z0 + 0.5 * dt * k1z, x0 + 0.5 * dt * k1x, base, dom, cfg, workers, w0)
        k3z, k3x = _stage(z0 + 0.5 * dt * k2z, x0 + 0.5 * dt * k2x, base, dom, cfg, workers, w0)
        k4z, k4x = _stage(z0 + dt * k3z, x0 + dt * k3x, base, dom, cfg, workers, w0)
    except IntegrationError as exc:
        raise IntegrationError(str(exc), exc.index, state.step_count + 1) from exc
    z = z0 + (dt / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    x1 = np.clip(x0 + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x), 0.0, dom.radius)

    outside = ~in_closed_sector(z, dom, tol=0.0)
    n_proj = int(outside.sum())
    if n_proj:
        z = project_to_sector(z, dom)
        log.info("step %d: projected %d cell(s) back into the sector",
                 state.step_count + 1, n_proj)
    viol = int(np.sum(x1 > x0)) if check_monotone else 0
    if viol:
        log.warning("step %d: %d marker(s) moved away from the corner", state.step_count + 1, viol)
    return replace(
        state,
        time=state.time + dt,
        cells=base.moved(z),
        marker_x1=x1,
        step_count=state.step_count + 1,
        projections=state.projections + n_proj,
        monotone_violations=state.monotone_violations + viol,
    )


def vorticity_at(x, state: SimulationState, k: int = 4):
    """Inverse-distance-weighted vorticity over the ``k`` nearest cells.

    An exact hit on a cell position returns that cell's value; the corner
    returns the corner's initial value (it is a fixed point of the flow).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    zc = as_complex(x)
    scalar = np.ndim(zc) == 0
    z = np.atleast_1d(np.asarray(zc, dtype=complex))
    cells = state.cells
    k = min(k, len(cells))
    tree = cKDTree(np.column_stack([cells.centers.real, cells.centers.imag]))
    dist, idx = tree.query(np.column_stack([z.real, z.imag]), k=k)
    dist = dist.reshape(len(z), k)
    idx = idx.reshape(len(z), k)
    om = cells.omega[idx]
    hit = dist[:, 0] == 0.0
    with np.errstate(divide="ignore"):
        w = 1.0 / np.where(hit[:, None], 1.0, dist)
    val = np.sum(w * om, axis=1) / np.sum(w, axis=1)
    val = np.where(hit, om[:, 0], val)
    val = np.where(z == 0, state.omega_corner, val)
    return float(val[0]) if scalar else val


def cell_diameters(quads: np.ndarray) -> np.ndarray:
    d1 = np.abs(quads[:, 3] - quads[:, 0])
    d2 = np.abs(quads[:, 1] - quads[:, 2])
    return np.sqrt(0.5 * (d1 * d1 + d2 * d2))


def arrival_threshold(cells: CellSet, cfg: QuadratureConfig | None = None) -> float:
    """Diameter of the finest sub-cell of the smallest initial cell."""
    cfg = cfg or QuadratureConfig()
    return float(cell_diameters(cells.initial_quads).min() / 2 ** cfg.refinement_depth)


def _shoelace(a, b, c, d):
    p = np.stack([a, b, c, d])
    return 0.5 * np.abs(np.sum((p * np.conj(np.roll(p, -1, axis=0))).imag, axis=0))


def area_distortion(cells: CellSet) -> float:
    """Max relative change of the quadrilaterals spanned by initially
    adjacent cell centers (an incompressibility proxy)."""
    if cells.grid_shape is None:
        return 0.0
    nr, nphi = cells.grid_shape
    if nr < 2 or nphi < 2:
        return 0.0

    def quads(z):
        g = z.reshape(nr, nphi)
        return _shoelace(g[:-1, :-1], g[1:, :-1], g[1:, 1:], g[:-1, 1:])

    a0 = quads(cells.initial)
    a1 = quads(cells.centers)
    return float(np.max(np.abs(a1 / a0 - 1.0)))


# -- snapshots ----------------------------------------------------------------

def state_to_dict(state: SimulationState) -> dict:
    c = state.cells
    cplx = lambda a: [[float(v.real), float(v.imag)] for v in np.ravel(a)]  # noqa: E731
    return {
        "time": state.time,
        "step_count": state.step_count,
        "theta": state.dom.theta,
        "radius": state.dom.radius,
        "omega_corner": state.omega_corner,
        "projections": state.projections,
        "monotone_violations": state.monotone_violations,
        "marker_x1": [float(v) for v in state.marker_x1],
        "marker_omega": [float(v) for v in state.marker_omega],
        "grid_shape": list(c.grid_shape) if c.grid_shape is not None else None,
        "centers": cplx(c.centers),
        "initial": cplx(c.initial),
        "initial_quads": cplx(c.initial_quads),
        "omega": [float(v) for v in c.omega],
        "area": [float(v) for v in c.area],
    }


def state_from_dict(d: dict) -> SimulationState:
    def cplx(rows):
        a = np.asarray(rows, dtype=float).reshape(-1, 2)
        return a[:, 0] + 1j * a[:, 1]

    n = len(d["omega"])
    cells = CellSet(
        cplx(d["centers"]),
        np.asarray(d["omega"], dtype=float),
        np.asarray(d["area"], dtype=float),
        cplx(d["initial"]),
        cplx(d["initial_quads"]).reshape(n, 4),
        tuple(d["grid_shape"]) if d["grid_shape"] is not None else None,
    )
    return SimulationState(
        time=float(d["time"]),
        cells=cells,
        marker_x1=np.asarray(d["marker_x1"], dtype=float),
        marker_omega=np.asarray(d["marker_omega"], dtype=float),
        dom=SectorDomain(float(d["theta"]), float(d["radius"])),
        step_count=int(d["step_count"]),
        omega_corner=float(d["omega_corner"]),
        projections=int(d["projections"]),
        monotone_violations=int(d["monotone_violations"]),
    )


def save_state(state: SimulationState, path) -> None:
    # json writes floats with repr, so the round trip is exact
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_dict(state), fh)


def load_state(path) -> SimulationState:
    with open(path, encoding="utf-8") as fh:
        return state_from_dict(json.load(fh))


# -- driver ---------------------------------------------------------------------

@dataclass
class RunResult:
    state: SimulationState
    series: "object"
    histories: dict
    samples: list
    stop_time: float | None = None
    max_area_distortion: float = 0.0

    def __iter__(self):
        # unpacks as (final state, growth series, raw histories)
        return iter((self.state, self.series, self.histories))


def _check_invariants(state: SimulationState, circ0: float, rng0: tuple, step: int):
    if state.circulation != circ0 or state.omega_range != rng0:
        raise IntegrationError("circulation or vorticity range changed", step=step)


def run_simulation(scenario: ScenarioSpec, dom: SectorDomain | None = None, T: float = 1.0,
                   dt: float = 1e-2, sample_every: int = 1, cfg: QuadratureConfig | None = None,
                   workers: int | None = None, seed: int = 0, state: SimulationState | None = None,
                   threshold: float | None = None, on_sample=None) -> RunResult:
    """Step ``scenario`` from its initial state (or from ``state``) to time ``T``.

    Diagnostics are sampled every ``sample_every`` steps and at the end.  For
    the finite-time kinds each marker's first crossing below ``threshold``
    (default :func:`arrival_threshold`) is recorded and the run stops once
    every marker has arrived.
    """
    from .diagnostics import GrowthSeries, lipschitz_quotient, probe_points

    if not T >= 0:
        raise ValueError("T must be >= 0")
    if not dt > 0 or (T > 0 and dt > T):
        raise ValueError("need 0 < dt <= T")
    if state is not None and state.dom != (dom or scenario.domain()):
        raise ValueError("resume state lives on a different domain")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    cfg = cfg or QuadratureConfig()
    dom = dom or scenario.domain()
    st = state if state is not None else initial_state(scenario, dom)
    if threshold is None:
        threshold = arrival_threshold(st.cells, cfg)
    finite = scenario.kind in FINITE_TIME_KINDS
    probes = probe_points(st.dom, seed=seed)
    circ0, rng0 = st.circulation, st.omega_range
    n_steps = int(round((T - st.time) / dt))
    if n_steps < 0 or abs(n_steps * dt - (T - st.time)) > 1e-9 * max(1.0, T):
        raise ValueError("T - start time must be a non-negative multiple of dt")

    nm = len(st.marker_x1)
    histories = {f"marker_{k}": [] for k in range(nm)}
    arrivals: list = [None] * nm
    samples = []
    times, values = [], []
    max_dist = 0.0

    def sample(s: SimulationState):
        L = lipschitz_quotient(s, probes=probes)
        rec = {
            "time": s.time,
            "L": L,
            "marker_x1": [float(v) for v in s.marker_x1],
            "circulation": s.circulation,
            "omega_min": s.omega_range[0],
            "omega_max": s.omega_range[1],
        }
        samples.append(rec)
        times.append(s.time)
        values.append(L)
        if on_sample is not None:
            on_sample(rec, s)

    def record(s: SimulationState):
        for k in range(nm):
            histories[f"marker_{k}"].append((s.time, float(s.marker_x1[k])))
            if finite and arrivals[k] is None and s.marker_x1[k] < threshold:
                arrivals[k] = s.time

    record(st)
    sample(st)
    stop = None
    start = st.step_count
    last_sampled = st.step_count
    while st.step_count - start < n_steps:
        st = rk4_step(st, dt, cfg, workers, check_monotone=True)
        record(st)
        _check_invariants(st, circ0, rng0, st.step_count)
        if st.time <= 2.0 + 1e-12:
            dist = area_distortion(st.cells)
            if dist > AREA_TOLERANCE >= max_dist:
                log.warning("t=%.3g: cell-center quadrilaterals changed area by %.1f%% "
                            "(tolerance %.0f%%)", st.time, 100 * dist, 100 * AREA_TOLERANCE)
            max_dist = max(max_dist, dist)
        done = finite and all(a is not None for a in arrivals)
        if st.step_count % sample_every == 0 or done:
            sample(st)
            last_sampled = st.step_count
        if done:
            stop = st.time
            log.info("all markers reached the corner by t=%.6g", stop)
            break
    if last_sampled != st.step_count:
        sample(st)

    ids = [f"marker_{k}" for k in range(nm)]
    series = GrowthSeries(np.asarray(times), np.asarray(values), "markers+probes",
                          arrived=any(a is not None for a in arrivals))
    histories["arrival_times"] = arrivals
    histories["marker_ids"] = ids
    histories["threshold"] = threshold
    return RunResult(st, series, histories, samples, stop, max_dist)
