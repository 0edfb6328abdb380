"""Command-line front end.

Subcommands: ``run``, ``sweep``, ``velocity-probe``, ``green-selftest`` and
``classify``.  Exit codes: 0 success, 1 failed self-test, 2 configuration or
usage error, 3 integration failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .biot_savart import QuadratureConfig
from .conformal import DomainError, SectorDomain
from .diagnostics import GrowthSeries, classify_growth, velocity_exponent_probe
from .greens import green_selftest
from .scenarios import DEFAULT_LADDER, ConfigurationError, ScenarioSpec, build_cells
from .transport import IntegrationError, RunResult, load_state, run_simulation, save_state

log = logging.getLogger("corner_euler")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INTEGRATION = 0, 1, 2, 3

SWEEP_THETAS = (math.pi / 4, math.pi / 3, 5 * math.pi / 12, math.pi / 2,
                7 * math.pi / 12, 2 * math.pi / 3, 3 * math.pi / 4, 4 * math.pi / 3)


def kind_for_theta(theta: float) -> str:
    hp = math.pi / 2
    if theta < hp - 1e-12:
        return "A_abs_plus_one"
    if abs(theta - hp) <= 1e-12:
        return "B_capped_ramp"
    if theta < math.pi:
        return "C_abs"
    return "D_odd_reflection"


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioSpec
    T: float = 5.0
    dt: float = 1e-2
    sample_every: int = 5
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    output_dir: str = "out"
    seed: int = 0
    snapshots: bool = False
    dump_cells: bool = False

    def __post_init__(self):
        if not self.T >= 0 or not self.dt > 0:
            raise ConfigurationError("need T >= 0 and dt > 0")
        if self.sample_every < 1:
            raise ConfigurationError("sample_every must be >= 1")

    @property
    def dom(self) -> SectorDomain:
        return self.scenario.domain()

    def to_dict(self) -> dict:
        sc = asdict(self.scenario)
        sc["mesh"] = list(sc["mesh"])
        sc["marker_starts"] = list(sc["marker_starts"])
        dom = self.dom
        return {
            "scenario": sc,
            "dom": {"theta": dom.theta, "radius": dom.radius},
            "T": self.T,
            "dt": self.dt,
            "sample_every": self.sample_every,
            "quad": asdict(self.quad),
            "output_dir": self.output_dir,
            "seed": self.seed,
            "snapshots": self.snapshots,
            "dump_cells": self.dump_cells,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"scenario", "dom", "T", "dt", "sample_every", "quad", "output_dir", "seed",
                 "snapshots", "dump_cells"}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        sc = dict(d.get("scenario") or {})
        if "theta" not in sc:
            raise ConfigurationError("scenario.theta is required")
        sc.setdefault("kind", kind_for_theta(float(sc["theta"])))
        if "mesh" in sc:
            sc["mesh"] = tuple(int(v) for v in sc["mesh"])
        if "marker_starts" in sc:
            sc["marker_starts"] = tuple(float(v) for v in sc["marker_starts"])
        try:
            spec = ScenarioSpec(**sc)
            quad = QuadratureConfig(**(d.get("quad") or {}))
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        cfg = cls(
            scenario=spec,
            T=float(d.get("T", 5.0)),
            dt=float(d.get("dt", 1e-2)),
            sample_every=int(d.get("sample_every", 5)),
            quad=quad,
            output_dir=str(d.get("output_dir", "out")),
            seed=int(d.get("seed", 0)),
            snapshots=bool(d.get("snapshots", False)),
            dump_cells=bool(d.get("dump_cells", False)),
        )
        if "dom" in d:
            dd = d["dom"]
            if (float(dd.get("theta", cfg.dom.theta)) != cfg.dom.theta
                    or float(dd.get("radius", cfg.dom.radius)) != cfg.dom.radius):
                raise ConfigurationError("dom does not match the scenario's simulation domain")
        return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return RunConfig.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc


# -- outputs --------------------------------------------------------------------

def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.generic):
        return _clean(v.item())
    return v


def summarize(cfg: RunConfig, result: RunResult) -> dict:
    cl = classify_growth(result.series)
    spec = cfg.scenario
    return {
        "theta": spec.theta,
        "beta": math.pi / spec.theta,
        "kind": spec.kind,
        "sim_theta": spec.sim_theta,
        "mode": cl.mode,
        "rate": cl.rate,
        "r_squared": cl.r_squared,
        "window": list(cl.window),
        "windowed_slopes": list(cl.slopes),
        "increasing_run": cl.increasing_run,
        "arrival_times": list(result.histories["arrival_times"]),
        "arrival_threshold": result.histories["threshold"],
        "marker_starts": [float(x) for x in spec.marker_positions()],
        "stop_time": result.stop_time,
        "final_time": result.state.time,
        "steps": result.state.step_count,
        "projections": result.state.projections,
        "monotone_violations": result.state.monotone_violations,
        "max_area_distortion": result.max_area_distortion,
    }


def write_outputs(result: RunResult, out_dir, cfg: RunConfig) -> dict:
    """Write ``series.csv``, ``summary.json``, ``state.json`` and, if enabled,
    ``snapshots.jsonl`` into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    if not out.is_dir():
        raise OSError(f"output directory {out} does not exist")
    paths = {"series": out / "series.csv", "summary": out / "summary.json",
             "state": out / "state.json"}
    nm = len(result.state.marker_x1)
    try:
        with open(paths["series"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "L"] + [f"marker_{k}_x1" for k in range(nm)]
                       + ["circulation", "omega_min", "omega_max"])
            for s in result.samples:
                w.writerow([repr(float(v)) for v in
                            [s["time"], s["L"], *s["marker_x1"], s["circulation"],
                             s["omega_min"], s["omega_max"]]])
        with open(paths["summary"], "w", encoding="utf-8") as fh:
            json.dump(_clean(summarize(cfg, result)), fh, indent=2, sort_keys=True)
            fh.write("\n")
        save_state(result.state, paths["state"])
        if cfg.snapshots:
            paths["snapshots"] = out / "snapshots.jsonl"
            with open(paths["snapshots"], "w", encoding="utf-8") as fh:
                for s in result.samples:
                    fh.write(json.dumps(_clean(s), sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"writing outputs to {out}: {exc}") from exc
    return paths


def read_series_csv(path) -> GrowthSeries:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "time" not in rows[0] or "L" not in rows[0]:
        raise ConfigurationError(f"{path}: expected columns time and L")
    t = np.array([float(r["time"]) for r in rows])
    v = np.array([float(r["L"]) for r in rows])
    return GrowthSeries(t, v, source=str(path))


# -- subcommands ------------------------------------------------------------------

def _apply_overrides(cfg: RunConfig | None, a) -> RunConfig:
    if cfg is None:
        theta = a.theta if a.theta is not None else math.pi / 3
        kind = a.kind or kind_for_theta(theta)
        extra = {"epsilon": a.epsilon} if a.epsilon is not None else {}
        cfg = RunConfig(ScenarioSpec(kind, theta, **extra))
    sc = cfg.scenario
    changes = {}
    if a.theta is not None and a.theta != sc.theta:
        changes["theta"] = a.theta
        if a.kind is None:
            changes["kind"] = kind_for_theta(a.theta)
    if a.kind is not None:
        changes["kind"] = a.kind
    if a.epsilon is not None:
        changes["epsilon"] = a.epsilon
    mesh = list(sc.mesh)
    if a.nr is not None:
        mesh[0] = a.nr
    if a.nphi is not None:
        mesh[1] = a.nphi
    changes["mesh"] = tuple(mesh)
    sc = replace(sc, **changes)
    top = {"scenario": sc}
    if a.T is not None:
        top["T"] = a.T
    if a.dt is not None:
        top["dt"] = a.dt
    if a.out is not None:
        top["output_dir"] = a.out
    return replace(cfg, **top)


def execute(cfg: RunConfig, resume=None, workers=None) -> tuple[RunResult, dict]:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = load_state(resume) if resume else None
    res = run_simulation(cfg.scenario, cfg.dom, T=cfg.T, dt=cfg.dt, sample_every=cfg.sample_every,
                         cfg=cfg.quad, workers=workers, seed=cfg.seed, state=state)
    paths = write_outputs(res, out, cfg)
    return res, paths


def _cmd_run(a) -> int:
    cfg = _apply_overrides(load_config(a.config) if a.config else None, a)
    res, paths = execute(cfg, resume=a.resume, workers=a.workers)
    with open(paths["summary"], encoding="utf-8") as fh:
        summary = json.load(fh)
    log.info("%s theta=%.6g: mode=%s rate=%s r2=%s", cfg.scenario.kind, cfg.scenario.theta,
             summary["mode"], summary["rate"], summary["r_squared"])
    if not a.quiet:
        print(json.dumps({k: summary[k] for k in ("theta", "beta", "mode", "rate", "r_squared",
                                                   "arrival_times")}))
    return EXIT_OK


def _cmd_sweep(a) -> int:
    base = load_config(a.config) if a.config else None
    thetas = [float(v) for v in a.thetas.split(",")] if a.thetas else list(SWEEP_THETAS)
    root = Path(a.out or "sweep")
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for th in thetas:
        kind = kind_for_theta(th)
        if base is None:
            spec = ScenarioSpec(kind, th)
            cfg = RunConfig(spec)
        else:
            cfg = replace(base, scenario=replace(base.scenario, theta=th, kind=kind))
        ns = argparse.Namespace(theta=None, kind=None, epsilon=None, nr=a.nr, nphi=a.nphi,
                                T=a.T, dt=a.dt, out=str(root / f"theta_{th:.6f}"))
        cfg = _apply_overrides(cfg, ns)
        _, paths = execute(cfg, workers=a.workers)
        with open(paths["summary"], encoding="utf-8") as fh:
            s = json.load(fh)
        rows.append([s["theta"], s["beta"], s["kind"], s["mode"], s["rate"], s["r_squared"]])
        if not a.quiet:
            print(f"theta={th:.6f} kind={kind} mode={s['mode']}")
    with open(root / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "beta", "kind", "mode", "rate", "r_squared"])
        w.writerows(rows)
    return EXIT_OK


def _cmd_probe(a) -> int:
    theta = a.theta if a.theta is not None else math.pi / 3
    dom = SectorDomain(theta)
    cells = build_cells(dom, a.nr or 64, a.nphi or 64, lambda z: np.ones(np.shape(z)))
    radii = dom.radius * np.logspace(-3, -1, a.points)
    rep = velocity_exponent_probe(dom, cells, radii, a.direction, workers=a.workers)
    d = {"theta": theta, "beta": dom.beta, "direction": a.direction, **rep.to_dict()}
    d["u_corner"] = [0.0, 0.0]
    d["edge_inflow"] = bool(np.all(rep.velocities[:, 0] < 0)) if a.direction == "edge" else None
    text = json.dumps(_clean(d), indent=2, sort_keys=True)
    if a.out:
        Path(a.out).write_text(text + "\n", encoding="utf-8")
    if not a.quiet:
        print(text)
    return EXIT_OK


def _cmd_selftest(a) -> int:
    theta = a.theta if a.theta is not None else math.pi / 2
    rep = green_selftest(SectorDomain(theta), samples=a.samples, seed=a.seed)
    d = {"theta": theta, "passed": rep.passed, **rep.to_dict()}
    if not a.quiet:
        print(json.dumps(d, indent=2, sort_keys=True))
    return EXIT_OK if rep.passed else EXIT_FAILED


def _cmd_classify(a) -> int:
    series = read_series_csv(a.csv)
    if a.arrived:
        series = GrowthSeries(series.times, series.values, series.source, arrived=True)
    cl = classify_growth(series)
    d = {"mode": cl.mode, "rate": cl.rate, "r_squared": cl.r_squared, "window": list(cl.window),
         "windowed_slopes": list(cl.slopes), "increasing_run": cl.increasing_run}
    if not a.quiet:
        print(json.dumps(_clean(d), sort_keys=True))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="corner-euler", description="Euler flow in a sector corner.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, mesh=True):
        sp.add_argument("--theta", type=float)
        if mesh:
            sp.add_argument("--nr", type=int)
            sp.add_argument("--nphi", type=int)
        sp.add_argument("--out")
        sp.add_argument("--quiet", action="store_true")
        sp.add_argument("--workers", type=int)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--config")
    common(r)
    r.add_argument("--kind")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--T", type=float)
    r.add_argument("--dt", type=float)
    r.add_argument("--resume", help="state.json written by an earlier run")

    s = sub.add_parser("sweep", help="run the preset angle sweep")
    s.add_argument("--config")
    common(s)
    s.add_argument("--thetas", help="comma-separated angles overriding the preset")
    s.add_argument("--T", type=float)
    s.add_argument("--dt", type=float)

    v = sub.add_parser("velocity-probe", help="near-corner velocity exponents at omega = 1")
    common(v)
    v.add_argument("--direction", choices=("edge", "bisector"), default="edge")
    v.add_argument("--points", type=int, default=9)

    g = sub.add_parser("green-selftest", help="check the Green function identities")
    common(g, mesh=False)
    g.add_argument("--samples", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("classify", help="re-fit an existing series.csv")
    c.add_argument("csv")
    c.add_argument("--arrived", action="store_true", help="the series ended by corner arrival")
    c.add_argument("--quiet", action="store_true")
    return p


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "velocity-probe": _cmd_probe,
            "green-selftest": _cmd_selftest, "classify": _cmd_classify}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING if getattr(a, "quiet", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.command](a)
    except IntegrationError as exc:
        print(f"integration failure at step {exc.step}, point {exc.index}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (ConfigurationError, DomainError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
