"""Config-driven verification harness behind the ``verify`` console script.

    verify run <config> [--report out.json] [--csv out.csv] [--trace out.csv]
                        [--seed n] [--dim 3|4|5] [--workers n]
    verify list

Exit codes: 0 when every identity passes, 1 on any failure, 2 on a
configuration error (unreadable file, unknown fixture or identity).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import angle_transport as at
from . import fixtures as fx
from . import tensor_core as tc
from .checks import IDENTITIES, evaluate
from .finsler_core import RiemannianSpace
from .finsleroid import FinsleroidSpace
from .riemann_base import RiemannField

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = "1.0"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    """Scenario file is unreadable or refers to something that does not exist."""


# scenario-level identities: the work is per scenario, not per sample point

@dataclass(frozen=True)
class ScenarioIdentity:
    name: str
    reference: str
    tolerance: float
    section: str                      # config table that must be present
    riemannian_only: bool = False


SCENARIO_IDENTITIES = {s.name: s for s in (
    ScenarioIdentity("angle.geodesic", "closed-form angle (1/H) arccos(a(U1, U2)) versus the "
                     "discrete indicatrix geodesic", 1e-4, "geodesic"),
    ScenarioIdentity("angle.geodesic_cauchy", "geodesic length change on the last segment doubling",
                     1e-5, "geodesic"),
    ScenarioIdentity("angle.great_circle", "discrete geodesic versus arccos of the normalized "
                     "Riemannian inner product", 1e-5, "geodesic", riemannian_only=True),
    ScenarioIdentity("transport.F", "F of each transported vector is constant", 1e-6, "transport"),
    ScenarioIdentity("transport.H_alpha", "H alpha is constant along horizontal transport",
                     1e-5, "transport"),
    ScenarioIdentity("transport.recurrence", "d alpha/ds = -(H_i xdot^i / H) alpha", 1e-4,
                     "transport"),
)}


@dataclass
class Scenario:
    name: str
    space: dict
    count: int = 64
    seed: int = 42
    retry_cap: int = 100
    box: float = 0.5
    identities: list = field(default_factory=lambda: ["all"])
    exclude: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    tolerance_cap: float | None = None          # tighten every default tolerance to this
    geodesic: dict | None = None
    transport: dict | None = None

    @property
    def dim(self) -> int:
        return int(self.space.get("dim", 3))


# building spaces from a config table

_BASES = {
    "flat": lambda n, t: fx.flat_metric(n),
    "conformal": lambda n, t: fx.conformal_metric(n, float(t.get("rate", 0.2))),
    "round": lambda n, t: fx.round_metric(n, float(t.get("kappa", 1.0))),
}


def _charge(spec):
    if spec is None:
        return fx.constant_charge(0.0)
    if isinstance(spec, (int, float)):
        return fx.constant_charge(float(spec))
    return fx.linear_charge(float(spec.get("g0", 0.0)), float(spec.get("slope", 0.0)),
                            int(spec.get("axis", 1)))


def build_space(spec: dict):
    n = int(spec.get("dim", 3))
    if "fixture" in spec:
        try:
            return fx.fixture(spec["fixture"], n)
        except KeyError as exc:
            raise ConfigError(f"unknown fixture {spec['fixture']!r}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    base = spec.get("base", "flat")
    if base not in _BASES:
        raise ConfigError(f"unknown base metric family {base!r}")
    if n not in (3, 4, 5):
        raise ConfigError("dimension must be 3, 4 or 5")
    metric = _BASES[base](n, spec)
    torsion = spec.get("torsion")
    field_ = RiemannField(n, metric, fx.first_axis(metric), _charge(spec.get("charge")),
                          fx.levi_civita_torsion(metric, n, float(torsion)) if torsion else None,
                          name=base)
    kind = spec.get("kind", "finsleroid")
    if kind == "finsleroid":
        return FinsleroidSpace(field_, name=spec.get("name", "custom"))
    if kind == "riemannian":
        return RiemannianSpace(field_, name=spec.get("name", "custom"))
    raise ConfigError(f"unknown space kind {kind!r}")


# loading

def builtin_scenarios() -> dict[str, Path]:
    root = resources.files("finsler_angle") / "scenarios"
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".toml")}


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        builtin = builtin_scenarios()
        if str(path) in builtin:
            path = builtin[str(path)]
        else:
            raise ConfigError(f"no such scenario file or built-in scenario: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(raw, default_name=path.stem)


def parse_scenario(raw: dict, default_name: str = "scenario") -> Scenario:
    if "space" not in raw:
        raise ConfigError("scenario needs a [space] table")
    sampling = raw.get("sampling", {})
    ids = raw.get("identities", {})
    include = ids.get("include", ["all"])
    include = [include] if isinstance(include, str) else list(include)
    exclude = list(ids.get("exclude", []))
    known = set(IDENTITIES) | set(SCENARIO_IDENTITIES)
    for name in include + exclude + list(raw.get("tolerances", {})):
        if name != "all" and name not in known:
            raise ConfigError(f"unknown identity {name!r}")
    return Scenario(
        name=raw.get("name", default_name), space=dict(raw["space"]),
        identities=include, exclude=exclude,
        count=int(sampling.get("count", 64)), seed=int(sampling.get("seed", 42)),
        retry_cap=int(sampling.get("retry_cap", 100)), box=float(sampling.get("box", 0.5)),
        tolerances={k: float(v) for k, v in raw.get("tolerances", {}).items()},
        tolerance_cap=float(raw["tolerance_cap"]) if "tolerance_cap" in raw else None,
        geodesic=raw.get("geodesic"), transport=raw.get("transport"),
    )


def resolve_identities(sc: Scenario, space) -> tuple[list[str], list[str]]:
    """Point identities and scenario identities that this scenario runs on ``space``."""
    exclude = set(sc.exclude)
    riemannian = isinstance(space, RiemannianSpace)

    def usable(s: ScenarioIdentity):
        return getattr(sc, s.section) is not None and (riemannian or not s.riemannian_only)

    if "all" in sc.identities:
        point = [n for n, i in IDENTITIES.items() if i.applies(space)]
        scen = [n for n, s in SCENARIO_IDENTITIES.items() if usable(s)]
    else:
        point = [n for n in sc.identities if n in IDENTITIES]
        scen = [n for n in sc.identities if n in SCENARIO_IDENTITIES]
        for n in point:
            if not IDENTITIES[n].applies(space):
                raise ConfigError(f"identity {n!r} does not apply to this space")
        for n in scen:
            if not usable(SCENARIO_IDENTITIES[n]):
                raise ConfigError(f"identity {n!r} needs a [{SCENARIO_IDENTITIES[n].section}] "
                                  "table suitable for this space")
    return [n for n in point if n not in exclude], [n for n in scen if n not in exclude]


# execution

def _chunk_worker(args):
    spec, points, names = args
    space = build_space(spec)
    return [evaluate(space, x, y, names) for x, y in points]


def _run_points(space, spec, points, names, workers: int):
    if workers <= 1 or len(points) < 2:
        return [evaluate(space, x, y, names) for x, y in points]
    chunks = [points[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(workers) as pool:
        parts = list(pool.map(_chunk_worker, [(spec, c, names) for c in chunks]))
    out = [None] * len(points)
    for i, part in enumerate(parts):
        out[i::workers] = part
    return out


def _pairs(space, points, k, max_fraction):
    """Up to k sample pairs (x, y1, y2) whose angle stays below max_fraction of the
    antipodal distance pi / H, keeping clear of the cut locus."""
    out = []
    for i in range(len(points) // 2):
        x, y1, y2 = points[2 * i][0], points[2 * i][1], points[2 * i + 1][1]
        H = float(tc.value(space.H(x)))
        if at.closed_angle(space, x, y1, y2) <= max_fraction * np.pi / H:
            out.append((x, y1, y2))
        if len(out) == k:
            break
    return out


def _run_geodesic(space, sc: Scenario, points, names) -> tuple[dict[str, float], int]:
    cfg = sc.geodesic
    segments = int(cfg.get("segments", 400))
    worst = dict.fromkeys(names, 0.0)
    pairs = _pairs(space, points, int(cfg.get("pairs", 1)), float(cfg.get("max_fraction", 0.6)))
    if not pairs:
        raise ConfigError("no sample pair is far enough from antipodal for the geodesic oracle")
    for x, y1, y2 in pairs:
        geo = at.geodesic_angle(space, x, y1, y2, segments=segments, strict=False)
        if not geo.converged:
            return dict.fromkeys(names, float("inf")), len(pairs)
        vals = {"angle.geodesic": abs(geo.angle - at.closed_angle(space, x, y1, y2)),
                "angle.geodesic_cauchy": geo.cauchy}
        if "angle.great_circle" in names:
            a = np.asarray(tc.value(space.field.a(x)))
            cos = y1 @ a @ y2 / np.sqrt((y1 @ a @ y1) * (y2 @ a @ y2))
            vals["angle.great_circle"] = abs(geo.angle - np.arccos(np.clip(cos, -1, 1)))
        for n in names:
            worst[n] = max(worst[n], vals[n])
    return worst, len(pairs)


def transport_curve(cfg: dict, n: int):
    start = np.asarray(cfg.get("start", [0.0] * n), float)[:n]
    direction = np.asarray(cfg.get("direction", [0.3, 0.4, -0.2, 0.1, 0.2][:n]), float)[:n]
    if cfg.get("curve", "bent") == "line":
        return at.line_curve(start, start + direction)
    return at.bent_curve(start, direction, float(cfg.get("bend", 0.2)))


def run_transport(space, cfg: dict) -> at.TransportState:
    n = space.dim
    pair = [np.asarray(cfg.get(k, d), float)[:n] for k, d in
            (("y1", [1.0, 0.3, -0.2, 0.1, 0.05]), ("y2", [0.2, 1.0, 0.4, -0.1, 0.1]))]
    return at.horizontal_transport(space, transport_curve(cfg, n), pair,
                                   steps=int(cfg.get("steps", 1000)))


def _transport_residuals(state: at.TransportState, names) -> dict[str, float]:
    d = state.drift()
    vals = {"transport.F": max(d["F1"], d["F2"]), "transport.H_alpha": d["H_alpha"],
            "transport.recurrence": d["recurrence"]}
    return {n: vals[n] for n in names}


def write_trace(state: at.TransportState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(at.TRACE_HEADER)
        for row in state.rows():
            w.writerow([repr(float(v)) for v in row])


@dataclass
class RunResult:
    report: dict
    per_sample: list
    points: list
    point_names: list
    trace: at.TransportState | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_PASS if self.report["passed"] else EXIT_FAIL


def run_scenario(sc: Scenario, workers: int = 1) -> RunResult:
    space = build_space(sc.space)
    point_names, scen_names = resolve_identities(sc, space)
    timings = {}
    t0 = time.perf_counter()
    try:
        points = fx.sample_points(space, sc.count, sc.seed, sc.box, sc.retry_cap)
    except RuntimeError as exc:
        raise ConfigError(str(exc)) from exc
    timings["sampling"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    per_sample = _run_points(space, sc.space, points, point_names, workers)
    timings["identities"] = time.perf_counter() - t0

    worst = {n: max(r[n] for r in per_sample) if per_sample else 0.0 for n in point_names}
    counts = dict.fromkeys(point_names, len(points))
    geo_names = [n for n in scen_names if n.startswith("angle.")]
    tr_names = [n for n in scen_names if n.startswith("transport.")]
    trace = None
    if geo_names:
        t0 = time.perf_counter()
        geo_worst, used = _run_geodesic(space, sc, points, geo_names)
        worst.update(geo_worst)
        counts.update(dict.fromkeys(geo_names, used))
        timings["geodesic"] = time.perf_counter() - t0
    if tr_names:
        t0 = time.perf_counter()
        trace = run_transport(space, sc.transport)
        worst.update(_transport_residuals(trace, tr_names))
        counts.update(dict.fromkeys(tr_names, len(trace.s)))
        timings["transport"] = time.perf_counter() - t0

    rows = []
    for n in point_names + scen_names:
        ident = IDENTITIES.get(n) or SCENARIO_IDENTITIES[n]
        tol = ident.tolerance if sc.tolerance_cap is None else min(ident.tolerance, sc.tolerance_cap)
        tol = sc.tolerances.get(n, tol)
        r = float(worst[n])
        rows.append({"name": n, "reference": ident.reference, "max_residual": r,
                     "tolerance": tol, "passed": bool(r <= tol), "samples": counts[n]})
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": sc.name,
        "passed": all(r["passed"] for r in rows),
        "environment": {"dim": space.dim, "fixture": sc.space.get("fixture", "custom"),
                        "seed": sc.seed, "samples": len(points),
                        "numpy": np.__version__},
        "identities": rows,
        "timings": {k: round(v, 3) for k, v in timings.items()},
    }
    return RunResult(report, per_sample, points, point_names, trace)


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def write_samples(result: RunResult, path) -> None:
    n = len(result.points[0][0]) if result.points else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample"] + [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)]
                   + result.point_names)
        for k, ((x, y), res) in enumerate(zip(result.points, result.per_sample)):
            w.writerow([k] + [repr(float(v)) for v in (*x, *y)]
                       + [repr(res[name]) for name in result.point_names])


# command line

def _summary(report: dict, out) -> None:
    for row in report["identities"]:
        mark = "PASS" if row["passed"] else "FAIL"
        print(f"{mark}  {row['name']:<36} {row['max_residual']:.3e}  (tol {row['tolerance']:.0e})",
              file=out)
    verdict = "all identities pass" if report["passed"] else "FAILURES present"
    print(f"{report['scenario']}: {verdict}", file=out)


def cmd_list(out=None) -> int:
    out = out or sys.stdout
    print("fixtures:", file=out)
    for name, (_, desc) in fx.FIXTURES.items():
        print(f"  {name:<12} {desc}", file=out)
    print("built-in scenarios:", file=out)
    for name in sorted(builtin_scenarios()):
        print(f"  {name}", file=out)
    print("identities:", file=out)
    for name, ident in {**IDENTITIES, **SCENARIO_IDENTITIES}.items():
        print(f"  {name:<36} tol {ident.tolerance:.0e}  {ident.reference}", file=out)
    return EXIT_PASS


def cmd_run(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        sc = load_scenario(args.config)
        if args.seed is not None:
            sc.seed = args.seed
        if args.dim is not None:
            sc.space["dim"] = args.dim
        result = run_scenario(sc, workers=args.workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=err)
        return EXIT_CONFIG
    _summary(result.report, out)
    if args.report:
        write_report(result.report, args.report)
    if args.csv:
        write_samples(result, args.csv)
    if args.trace:
        if result.trace is None:
            print("configuration error: --trace needs a [transport] table", file=err)
            return EXIT_CONFIG
        write_trace(result.trace, args.trace)
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verify", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or built-in scenario")
    run.add_argument("config")
    run.add_argument("--report", help="write the JSON report here")
    run.add_argument("--csv", help="write per-sample residuals here")
    run.add_argument("--trace", help="write the transport trace here")
    run.add_argument("--seed", type=int)
    run.add_argument("--dim", type=int, choices=(3, 4, 5))
    run.add_argument("--workers", type=int, default=1)
    sub.add_parser("list", help="list fixtures, scenarios and identities")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        return cmd_list()
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
