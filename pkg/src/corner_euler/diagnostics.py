"""Growth-rate, velocity-exponent, arrival-time and continuity diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .biot_savart import CellSet, QuadratureConfig, velocity_batch
from .conformal import SectorDomain
from .transport import SimulationState, vorticity_at

MODES = ("exponential", "double_exponential", "finite_time", "inconclusive")
R2_THRESHOLD = 0.98
TRAILING_FRACTION = 0.6


@dataclass(frozen=True)
class GrowthSeries:
    times: np.ndarray
    values: np.ndarray
    source: str = "markers"
    # set when the underlying marker(s) reached the arrival threshold
    arrived: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        if np.any(~(v > 0)):
            raise ValueError("values must be strictly positive")


@dataclass(frozen=True)
class GrowthClassification:
    mode: str
    rate: float
    r_squared: float
    window: tuple
    exp_fit: tuple = (math.nan, 0.0)
    dexp_fit: tuple = (math.nan, 0.0)
    slopes: tuple = ()
    increasing_run: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError("r_squared must lie in [0, 1]")


# -- Lipschitz quotient -------------------------------------------------------

def probe_points(dom: SectorDomain, n: int = 64, seed: int = 0) -> np.ndarray:
    """Fixed interior probe set, away from the corner, arc and edges."""
    rng = np.random.default_rng(seed)
    r = dom.radius * rng.uniform(0.05, 0.95, n)
    a = dom.theta * rng.uniform(0.05, 0.95, n)
    return r * np.exp(1j * a)


def lipschitz_quotient(state: SimulationState, probes=None, k: int = 4) -> float:
    """``max |omega - omega(0)| / |x|`` over the markers and the probe set.

    A marker sitting exactly on the corner with a different vorticity gives
    ``+inf``.
    """
    w0 = state.omega_corner
    dw = np.abs(state.marker_omega - w0)
    if not np.any(dw > 0):
        raise ValueError("need at least one marker whose vorticity differs from the corner value")
    x1 = state.marker_x1
    with np.errstate(divide="ignore"):
        q = np.where(dw > 0, dw / x1, 0.0)
    L = float(np.max(q))
    if probes is not None and len(probes):
        p = np.asarray(probes, dtype=complex)
        om = np.atleast_1d(vorticity_at(p, state, k=k))
        L = max(L, float(np.max(np.abs(om - w0) / np.abs(p))))
    return L


# -- classification ---------------------------------------------------------

@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r_squared: float
    slope_se: float


def _fit(t, y) -> LineFit:
    if len(t) < 3 or np.ptp(y) == 0 or np.ptp(t) == 0:
        return LineFit(0.0, float(np.mean(y)) if len(y) else 0.0, 0.0, math.inf)
    res = stats.linregress(t, y)
    return LineFit(float(res.slope), float(res.intercept),
                   float(min(1.0, max(0.0, res.rvalue ** 2))), float(res.stderr))


def windowed_slopes(times, values, n_windows: int = 5) -> list[LineFit]:
    """Least-squares slopes of ``log values`` on equal-length time windows."""
    t = np.asarray(times, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    edges = np.linspace(t[0], t[-1], n_windows + 1)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (t >= a) & (t <= b)
        out.append(_fit(t[m], y[m]))
    return out


def increasing_run(fits: list[LineFit], rel_margin: float = 0.02) -> int:
    """Length of the longest run of windows whose slopes increase
    significantly (by more than two combined standard errors plus a small
    relative margin)."""
    best = run = 1 if fits else 0
    for f0, f1 in zip(fits[:-1], fits[1:]):
        gap = 2.0 * math.hypot(f0.slope_se, f1.slope_se) + rel_margin * abs(f0.slope)
        if f1.slope - f0.slope > gap:
            run += 1
        else:
            run = 1
        best = max(best, run)
    return best


def classify_growth(series: GrowthSeries, trailing: float = TRAILING_FRACTION,
                    threshold: float = R2_THRESHOLD, n_windows: int = 5) -> GrowthClassification:
    """Exponential vs double-exponential vs finite-time.

    Fits ``log L`` and ``log log L`` against ``t`` on the trailing window and
    keeps the better one if it reaches ``threshold``.  Windowed slopes of
    ``log L`` that increase over three or more consecutive windows rule out
    the single-exponential class.
    """
    finite = np.isfinite(series.values)
    t_all = series.times[finite]
    v_all = series.values[finite]
    if t_all.size == 0:
        return GrowthClassification("finite_time" if series.arrived else "inconclusive",
                                    math.nan, 0.0, (math.nan, math.nan))
    k0 = int(math.floor((1.0 - trailing) * t_all.size))
    t, v = t_all[k0:], v_all[k0:]
    window = (float(t[0]), float(t[-1]))
    ly = np.log(v)
    ef = _fit(t, ly)
    if np.all(v > 1.0):
        df = _fit(t, np.log(ly))
    else:
        df = LineFit(math.nan, math.nan, 0.0, math.inf)
    slopes = windowed_slopes(t_all, v_all, n_windows) if t_all.size >= 3 * n_windows else []
    run = increasing_run(slopes)
    common = dict(window=window, exp_fit=(ef.slope, ef.r_squared),
                  dexp_fit=(df.slope, df.r_squared),
                  slopes=tuple(f.slope for f in slopes), increasing_run=run)

    if series.arrived:
        return GrowthClassification("finite_time", ef.slope, ef.r_squared, **common)
    if np.ptp(ly) == 0:
        return GrowthClassification("inconclusive", 0.0, 0.0, **common)
    super_exp = run >= 3
    cands = []
    if ef.r_squared >= threshold and ef.slope > 0 and not super_exp:
        cands.append(("exponential", ef))
    if df.r_squared >= threshold and df.slope > 0:
        cands.append(("double_exponential", df))
    if not cands:
        best = max(ef, df, key=lambda f: f.r_squared)
        return GrowthClassification("inconclusive", best.slope, best.r_squared, **common)
    mode, fit = max(cands, key=lambda c: c[1].r_squared)
    return GrowthClassification(mode, fit.slope, fit.r_squared, **common)


# -- velocity exponents -----------------------------------------------------

@dataclass(frozen=True)
class ExponentReport:
    slope: float
    intercept: float
    residuals: np.ndarray
    radii: np.ndarray
    speeds: np.ndarray
    velocities: np.ndarray
    # max/min of |u| / (r log(1/r)); meaningful for beta = 2
    compensated_range: float
    dropped: int = 0

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "compensated_range": self.compensated_range,
            "radii": self.radii.tolist(),
            "speeds": self.speeds.tolist(),
            "u1": self.velocities[:, 0].tolist(),
            "u2": self.velocities[:, 1].tolist(),
            "residuals": self.residuals.tolist(),
            "dropped": self.dropped,
        }


def velocity_exponent_probe(dom: SectorDomain, cells: CellSet, radii, direction: str = "edge",
                            cfg: QuadratureConfig | None = None, workers: int | None = None,
                            noise_floor: float = 1e-13) -> ExponentReport:
    """Slope of ``log |u|`` against ``log r`` along the edge ``arg = 0`` or the
    bisector."""
    r = np.asarray(radii, dtype=float)
    if direction == "edge":
        pts = r + 0j
    elif direction == "bisector":
        pts = r * np.exp(0.5j * dom.theta)
    else:
        raise ValueError("direction must be 'edge' or 'bisector'")
    u = velocity_batch(pts, cells, dom, cfg, workers=workers)
    speed = np.hypot(u[:, 0], u[:, 1])
    keep = speed > noise_floor * max(1.0, float(np.max(speed)))
    if keep.sum() < 4:
        raise ValueError("fewer than 4 probe radii above the noise floor")
    lr, ls = np.log(r[keep]), np.log(speed[keep])
    slope, icpt = np.polyfit(lr, ls, 1)
    resid = ls - (slope * lr + icpt)
    rr = r[keep] / dom.radius
    comp = speed[keep] / (r[keep] * np.log(1.0 / r[keep])) if np.all(r[keep] < 1) else np.full(rr.shape, np.nan)
    return ExponentReport(float(slope), float(icpt), resid, r, speed, u,
                          float(np.max(comp) / np.min(comp)), int((~keep).sum()))


# -- arrival ----------------------------------------------------------------

@dataclass(frozen=True)
class ArrivalResult:
    time: float | None
    closest_approach: float
    closest_time: float


def arrival_time(history, threshold: float) -> ArrivalResult:
    """First time ``x1`` falls below ``threshold``, linearly interpolated
    between samples; ``time is None`` if it never does."""
    h = np.asarray(history, dtype=float).reshape(-1, 2)
    t, x = h[:, 0], h[:, 1]
    i_min = int(np.argmin(x))
    below = np.flatnonzero(x < threshold)
    if below.size == 0:
        return ArrivalResult(None, float(x[i_min]), float(t[i_min]))
    i = int(below[0])
    if i == 0:
        return ArrivalResult(float(t[0]), float(x[i_min]), float(t[i_min]))
    t0, t1, x0, x1 = t[i - 1], t[i], x[i - 1], x[i]
    ta = t0 + (x0 - threshold) * (t1 - t0) / (x0 - x1)
    return ArrivalResult(float(ta), float(x[i_min]), float(t[i_min]))


@dataclass(frozen=True)
class ArrivalScaling:
    exponent: float
    r_squared: float
    strictly_increasing: bool


def arrival_scaling(starts, times) -> ArrivalScaling:
    """Fit ``T ~ X^p`` across the marker ladder."""
    x = np.asarray(starts, dtype=float)
    t = np.asarray(times, dtype=float)
    order = np.argsort(x)
    x, t = x[order], t[order]
    if x.size < 2 or np.any(~(t > 0)):
        raise ValueError("need at least two positive arrival times")
    f = _fit(np.log(x), np.log(t)) if x.size >= 3 else None
    if f is None:
        p = float(np.diff(np.log(t))[0] / np.diff(np.log(x))[0])
        return ArrivalScaling(p, 1.0, bool(np.all(np.diff(t) > 0)))
    return ArrivalScaling(f.slope, f.r_squared, bool(np.all(np.diff(t) > 0)))


# -- continuity -------------------------------------------------------------

def _lagrangian_points(state: SimulationState):
    z = np.concatenate([state.cells.centers, state.marker_x1 + 0j, [0j]])
    w = np.concatenate([state.cells.omega, state.marker_omega, [state.omega_corner]])
    return z, w


@dataclass(frozen=True)
class ModulusReport:
    exponent: float
    scales: np.ndarray
    max_differences: np.ndarray
    pair_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, int))


def continuity_modulus(state: SimulationState, pair_scales) -> ModulusReport:
    """Hölder exponent of the transported vorticity.

    For each scale ``s`` the largest ``|omega_i - omega_j|`` over Lagrangian
    points (cells, markers, corner) with separation in ``[s/sqrt2, s*sqrt2]``
    is recorded; the exponent is the slope of ``log max-difference`` against
    ``log s``.
    """
    s = np.asarray(pair_scales, dtype=float)
    z, w = _lagrangian_points(state)
    tree = cKDTree(np.column_stack([z.real, z.imag]))
    diffs = np.zeros(s.size)
    counts = np.zeros(s.size, dtype=int)
    for k, sc in enumerate(s):
        pairs = tree.query_pairs(sc * math.sqrt(2.0), output_type="ndarray")
        if pairs.size == 0:
            continue
        sep = np.abs(z[pairs[:, 0]] - z[pairs[:, 1]])
        m = sep >= sc / math.sqrt(2.0)
        counts[k] = int(m.sum())
        if counts[k]:
            diffs[k] = float(np.max(np.abs(w[pairs[m, 0]] - w[pairs[m, 1]])))
    ok = diffs > 0
    if ok.sum() >= 2:
        expo = float(np.polyfit(np.log(s[ok]), np.log(diffs[ok]), 1)[0])
    else:
        expo = math.nan
    return ModulusReport(expo, s, diffs, counts)


def corner_jump(state: SimulationState, scales) -> np.ndarray:
    """``max |omega(x) - omega(0)|`` over Lagrangian points with ``|x| <= s``.

    For continuous vorticity this tends to 0 with ``s``; a value bounded away
    from zero as ``s -> 0`` witnesses a discontinuity at the corner.
    """
    z, w = _lagrangian_points(state)
    r = np.abs(z)
    d = np.abs(w - state.omega_corner)
    return np.array([float(np.max(d[r <= sc])) for sc in np.asarray(scales, dtype=float)])
