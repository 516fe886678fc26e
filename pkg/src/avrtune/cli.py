"""
Command-line entry point ``avrtune``.

Exit codes
----------
0 success; 2 configuration error; 3 runtime failure; 4 no gain crossover;
5 missing or malformed data file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .chaos import make_source
from .errors import AvrTuneError, ConfigError, DataFileError, NoGainCrossover
from .fractional import FopidParams, OustaloupConfig
from .margins import CROSSING_RULES, bode_data, find_margins
from .nsga2 import Nsga2Config, dominates, run
from .plant import TOPOLOGIES, AvrParams, exact_loop, oustaloup_loop
from .tables import dominated_pairs, format_rows, load_table, verify_matrix
from .timesim import DEFAULT_MULTIPLIERS, NEAR_UNSTABLE_DAMPING, robustness_sweep, simulate_closed_loop

logger = logging.getLogger("avrtune")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_NO_CROSSOVER = 4
EXIT_DATA = 5


@dataclass
class RunConfig:
    """Everything needed to reproduce one optimization run.

    JSON layout: the optimizer fields at top level, plus ``plant``,
    ``oustaloup`` and ``output_dir``.
    """

    optimizer: Nsga2Config = field(default_factory=Nsga2Config)
    plant: AvrParams = field(default_factory=AvrParams)
    oustaloup: OustaloupConfig = field(default_factory=OustaloupConfig)
    output_dir: str = "avrtune-out"

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        d = dict(d)
        plant = AvrParams.from_dict(d.pop("plant", {}) or {})
        ous = d.pop("oustaloup", {}) or {}
        unknown_ous = set(ous) - {f.name for f in fields(OustaloupConfig)}
        if unknown_ous:
            raise ConfigError(f"unknown oustaloup keys: {sorted(unknown_ous)}")
        try:
            ous_cfg = OustaloupConfig(**ous)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        out = d.pop("output_dir", "avrtune-out")
        opt = Nsga2Config.from_dict(d)
        return cls(opt.validate(), plant, ous_cfg, str(out))

    def to_dict(self) -> dict:
        return {
            **self.optimizer.to_dict(),
            "plant": self.plant.to_dict(),
            "oustaloup": asdict(self.oustaloup),
            "output_dir": self.output_dir,
        }


def load_config(path: str | None) -> dict:
    """Config dict from a JSON file; a run-metadata file is accepted too."""
    if path is None:
        return {}
    try:
        d = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in d and "history" in d:
        d = d["config"]
    return d


_OVERRIDES = {
    "controller": "controller",
    "pop_size": "pop_size",
    "generations": "generations",
    "elite_count": "elite_count",
    "crossover_fraction": "crossover_fraction",
    "mutation_sigma": "mutation_sigma",
    "source": "source",
    "seed": "seed",
    "workers": "workers",
    "crossing": "crossing",
    "output_dir": "output_dir",
}


DESK_SCALE = {"pop_size": 60, "generations": 40}


def build_run_config(args, defaults: dict | None = None) -> RunConfig:
    d = {**(defaults or {}), **load_config(getattr(args, "config", None))}
    for attr, key in _OVERRIDES.items():
        v = getattr(args, attr, None)
        if v is not None:
            d[key] = v
    if getattr(args, "controller", None) is not None:
        d.pop("bounds", None)
    try:
        return RunConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _front_rows(result):
    rows = []
    for ind in result.front:
        if not ind.feasible:
            continue
        rows.append((ind.objectives[0], ind.objectives[1], ind.params))
    return rows


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def run_and_export(rc: RunConfig, out_dir: Path, stem: str = "front") -> tuple[Path, dict]:
    source = make_source(rc.optimizer.source, rc.optimizer.seed)
    described = source.describe()
    t0 = time.perf_counter()
    result = run(rc.optimizer, rc.plant, source)
    wall = time.perf_counter() - t0
    csv_path = out_dir / f"{stem}.csv"
    _write(csv_path, format_rows(_front_rows(result)))
    meta = {
        "config": rc.to_dict(),
        "source": described,
        "wall_time_s": wall,
        "history": result.history,
    }
    _write(out_dir / f"{stem}.meta.json", json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
    return csv_path, {"result": result, "meta": meta}


def cmd_optimize(args) -> int:
    rc = build_run_config(args)
    out = Path(rc.output_dir)
    csv_path, info = run_and_export(rc, out)
    n = sum(1 for ind in info["result"].front if ind.feasible)
    print(f"wrote {n} front rows to {csv_path} ({info['meta']['wall_time_s']:.1f} s)")
    return 0


def _genome(args) -> FopidParams:
    p = FopidParams(args.kp, args.ki, args.kd, args.lam, args.mu)
    if not p.within_bounds():
        raise ConfigError("genome outside the search bounds")
    return p


def _plant(args) -> AvrParams:
    d = {}
    for item in getattr(args, "plant", None) or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--plant expects KEY=VALUE, got {item!r}")
        try:
            d[key] = float(val)
        except ValueError:
            raise ConfigError(f"--plant {key}: not a number") from None
    return AvrParams.from_dict(d)


def _oustaloup(args) -> OustaloupConfig:
    try:
        return OustaloupConfig(args.oustaloup_order, args.wb, args.wh)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _margins_dict(m) -> dict:
    return {"wgc": m.wgc, "pm": m.pm, "wpc": m.wpc, "gm_db": m.gm_db, "multiple_crossings": m.multiple_crossings}


def cmd_margins(args) -> int:
    g, plant, cfg = _genome(args), _plant(args), _oustaloup(args)
    report, missing = {}, []
    for rep, loop in (("exact", exact_loop(g, plant, args.topology)), ("oustaloup", oustaloup_loop(g, plant, cfg, args.topology))):
        try:
            report[rep] = _margins_dict(find_margins(loop, crossing=args.crossing))
        except NoGainCrossover as exc:
            report[rep] = {"error": str(exc)}
            missing.append(rep)
    for rep, m in report.items():
        if "error" in m:
            print(f"{rep:10s} no gain crossover: {m['error']}")
        else:
            wpc = "none" if m["wpc"] is None else f"{m['wpc']:.6g}"
            print(f"{rep:10s} wgc={m['wgc']:.6g} rad/s  pm={m['pm']:.4f} deg  wpc={wpc}  gm={m['gm_db']:.4g} dB")
    print(json.dumps(_jsonable(report), sort_keys=True))
    return EXIT_NO_CROSSOVER if "exact" in missing else 0


def cmd_bode(args) -> int:
    g, plant, cfg = _genome(args), _plant(args), _oustaloup(args)
    loop = exact_loop(g, plant, args.topology) if args.representation == "exact" else oustaloup_loop(g, plant, cfg, args.topology)
    rows = bode_data(loop, args.wmin, args.wmax, args.points_per_decade)
    lines = ["omega_rad_s,mag_db,phase_deg"] + [f"{w!r},{m!r},{p!r}" for w, m, p in rows]
    path = Path(args.output_dir) / "bode.csv"
    _write(path, "\n".join(lines) + "\n")
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _step_csv(res, every: int) -> str:
    lines = ["t_s,y_pu"] + [f"{t!r},{y!r}" for t, y in zip(res.t[::every].tolist(), res.y[::every].tolist())]
    return "\n".join(lines) + "\n"


def _step_summary(m, res) -> dict:
    if isinstance(res, AvrTuneError):
        return {"multiplier": m, "error": str(res)}
    return {
        "multiplier": m,
        "stable": res.stable,
        "pole_stable": res.pole_stable,
        "trajectory_stable": res.trajectory_stable,
        "overshoot": res.overshoot,
        "settling_time_2pct": res.settling_time_2pct,
        "min_damping": res.min_damping,
        "near_unstable": res.min_damping is not None and res.min_damping < NEAR_UNSTABLE_DAMPING,
    }


def cmd_step(args) -> int:
    g, plant, cfg = _genome(args), _plant(args), _oustaloup(args)
    res = simulate_closed_loop(g, plant, cfg, args.t_end, args.dt)
    path = Path(args.output_dir) / "step.csv"
    _write(path, _step_csv(res, args.every))
    print(json.dumps(_jsonable(_step_summary(1.0, res)), sort_keys=True))
    return 0


def cmd_robustness(args) -> int:
    g, plant, cfg = _genome(args), _plant(args), _oustaloup(args)
    mults = args.multipliers or list(DEFAULT_MULTIPLIERS)
    out = Path(args.output_dir)
    summary = []
    print(f"{'mult':>6} {'stable':>7} {'overshoot':>10} {'settle_s':>9} {'min_zeta':>9}")
    for m, res in robustness_sweep(g, plant, mults, cfg, args.t_end, args.dt):
        s = _step_summary(m, res)
        summary.append(s)
        if "error" in s:
            print(f"{m:6g} error: {s['error']}")
            continue
        _write(out / f"step_x{m:g}.csv", _step_csv(res, args.every))
        ov = "-" if s["overshoot"] is None else f"{s['overshoot']:.3f}"
        st = "-" if s["settling_time_2pct"] is None else f"{s['settling_time_2pct']:.3f}"
        print(f"{m:6g} {str(s['stable']):>7} {ov:>10} {st:>9} {s['min_damping']:9.4f}")
    _write(out / "robustness.json", json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return 0


_TABLE_TOLERANCES = {"table3": (0.02, 1.0), "table4": (0.05, 2.0)}


def cmd_verify_tables(args) -> int:
    names = args.tables or ["table3", "table4"]
    best = {}
    for name in names:
        rows = load_table(name, args.data_dir)
        rtol, atol = _TABLE_TOLERANCES.get(name, (0.05, 2.0))
        bad = dominated_pairs(rows)
        print(f"{name}: {len(rows)} distinct rows, dominated pairs: {len(bad)}")
        results = verify_matrix(rows, rtol, atol, crossing=args.crossing)
        for (topo, rep), (rate, checks) in results.items():
            worst = max((c.rel_err_wgc for c in checks), default=0.0)
            worst_pm = max((c.abs_err_pm for c in checks), default=0.0)
            print(
                f"  {topo:7s} {rep:9s} pass {sum(c.passed for c in checks)}/{len(checks)}"
                f" ({rate:.1%})  max rel err J1 {worst:.3g}  max abs err J2 {worst_pm:.3g}"
            )
            if args.verbose:
                for c in checks:
                    print(
                        f"    J1 {c.row.wgc:10.5f} -> {c.wgc if c.wgc is not None else float('nan'):10.5f}"
                        f"  J2 {c.row.pm:7.2f} -> {c.pm if c.pm is not None else float('nan'):7.2f}"
                        f"  {'ok' if c.passed else 'MISS'}"
                    )
        exact = {t: results[(t, "exact")][0] for t in TOPOLOGIES}
        best[name] = max(exact, key=exact.get)
        print(f"  best matching topology: {best[name]}")
    return 0


def _extent(rows, threshold: float) -> float:
    return max((w for w, p, _ in rows if p >= threshold), default=0.0)


def cmd_compare_sources(args) -> int:
    base = build_run_config(args, DESK_SCALE)
    sources = args.sources or ["henon", "logistic", "uniform"]
    crs = args.cr or [base.optimizer.crossover_fraction]
    out = Path(base.output_dir)
    fronts: dict[tuple[str, float, int], list] = {}
    for src in sources:
        for cr in crs:
            for seed in range(args.seeds):
                d = base.to_dict()
                d.update(source=src, crossover_fraction=cr, seed=seed, output_dir=str(out))
                rc = RunConfig.from_dict(d)
                _, info = run_and_export(rc, out, f"front_{src}_cr{cr:g}_seed{seed}")
                fronts[(src, cr, seed)] = _front_rows(info["result"])
    arms = [(s, c) for s in sources for c in crs]
    summary = {"threshold_deg": args.threshold, "arms": {}, "dominance": {}}
    print(f"front extent: max J1 at J2 >= {args.threshold:g} deg")
    for s, c in arms:
        ext = [_extent(fronts[(s, c, k)], args.threshold) for k in range(args.seeds)]
        summary["arms"][f"{s}/cr{c:g}"] = ext
        print(f"  {s:8s} Cr={c:<4g} " + " ".join(f"{e:8.2f}" for e in ext))
    # fraction of arm B's points dominated by some point of arm A, per seed, summed
    for a in arms:
        for b in arms:
            if a == b:
                continue
            count = 0
            for k in range(args.seeds):
                pa = [(w, p) for w, p, _ in fronts[(*a, k)]]
                count += sum(any(dominates(x, (w, p)) for x in pa) for w, p, _ in fronts[(*b, k)])
            summary["dominance"][f"{a[0]}/cr{a[1]:g} > {b[0]}/cr{b[1]:g}"] = count
    for key, v in summary["dominance"].items():
        print(f"  {key}: {v} dominated points")
    if "henon" in sources and "uniform" in sources:
        for c in crs:
            wins = sum(
                _extent(fronts[("henon", c, k)], args.threshold) >= _extent(fronts[("uniform", c, k)], args.threshold)
                for k in range(args.seeds)
            )
            verdict = "majority" if wins * 2 > args.seeds else "minority"
            print(f"  henon >= uniform extent at Cr={c:g}: {wins}/{args.seeds} seeds ({verdict})")
            summary.setdefault("henon_vs_uniform", {})[f"cr{c:g}"] = wins
    _write(out / "compare_summary.json", json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return 0


def _add_genome(p):
    p.add_argument("--kp", type=float, required=True)
    p.add_argument("--ki", type=float, required=True)
    p.add_argument("--kd", type=float, required=True)
    p.add_argument("--lam", type=float, default=1.0, help="integral order (default 1)")
    p.add_argument("--mu", type=float, default=1.0, help="derivative order (default 1)")
    p.add_argument("--plant", action="append", metavar="KEY=VALUE", help="override a plant parameter")
    p.add_argument("--topology", choices=TOPOLOGIES, default="sensor")
    p.add_argument("--crossing", choices=CROSSING_RULES, default="highest")
    p.add_argument("--oustaloup-order", type=int, default=5)
    p.add_argument("--wb", type=float, default=1e-2)
    p.add_argument("--wh", type=float, default=1e2)
    p.add_argument("--output-dir", default="avrtune-out")


def _add_run(p):
    p.add_argument("--config", help="JSON run config (or a run-metadata file to replay)")
    p.add_argument("--controller", choices=("fopid", "pid"))
    p.add_argument("--pop-size", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--elite-count", type=int)
    p.add_argument("--crossover-fraction", type=float)
    p.add_argument("--mutation-sigma", type=float)
    p.add_argument("--source", choices=("henon", "logistic", "uniform"))
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--crossing", choices=CROSSING_RULES, help="which unity crossing defines the objectives")
    p.add_argument("--output-dir")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avrtune", description="FOPID/PID design for an AVR loop by chaotic NSGA-II")
    ap.add_argument("-v", "--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the optimizer and export the front")
    _add_run(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("margins", help="gain/phase margins of one controller")
    _add_genome(p)
    p.set_defaults(func=cmd_margins)

    p = sub.add_parser("bode", help="Bode data of the effective open loop")
    _add_genome(p)
    p.add_argument("--representation", choices=("exact", "oustaloup"), default="exact")
    p.add_argument("--wmin", type=float, default=1e-2)
    p.add_argument("--wmax", type=float, default=1e2)
    p.add_argument("--points-per-decade", type=int, default=50)
    p.set_defaults(func=cmd_bode)

    for name, func, helptext in (
        ("step", cmd_step, "closed-loop unit step response"),
        ("robustness", cmd_robustness, "step responses under exciter gain multipliers"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_genome(p)
        p.add_argument("--t-end", type=float, default=8.0)
        p.add_argument("--dt", type=float, default=1e-4)
        p.add_argument("--every", type=int, default=10, help="write every N-th sample")
        if name == "robustness":
            p.add_argument("--multipliers", type=float, nargs="+")
        p.set_defaults(func=func)

    p = sub.add_parser("verify-tables", help="re-evaluate the bundled design tables")
    p.add_argument("--tables", nargs="+", choices=("table3", "table4"))
    p.add_argument("--data-dir", help="directory holding the table CSVs")
    p.add_argument("--crossing", choices=CROSSING_RULES, default="highest")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_verify_tables)

    p = sub.add_parser("compare-sources", help="matched runs across random sources and Cr values")
    _add_run(p)
    p.add_argument("--sources", nargs="+", choices=("henon", "logistic", "uniform"))
    p.add_argument("--cr", type=float, nargs="+")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--threshold", type=float, default=70.0, help="phase margin for the extent metric")
    p.set_defaults(func=cmd_compare_sources)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFileError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NoGainCrossover as exc:
        print(f"no gain crossover: {exc}", file=sys.stderr)
        return EXIT_NO_CROSSOVER
    except (AvrTuneError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
