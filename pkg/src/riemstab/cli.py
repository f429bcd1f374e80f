"""Command-line driver: ``riemstab {simulate,verify,doa,injectivity}``.

Exit codes: 0 success, 1 invalid input (config, flags, r >= r0, no
injectivity clause applies), 2 integration failure, 3 a claimed check did
not pass.  Human-readable messages go to stderr; stdout gets a one-line
summary on success.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

from . import __version__
from .curvature import CurvatureBounds, injectivity_interval
from .errors import ConfigError, InapplicableError, IntegrationError, RangeError, UsageError
from .lyapunov import estimate_doa
from .scenarios import evaluate_claims, load_scenario, simulate

EXIT_OK, EXIT_INPUT, EXIT_INTEGRATION, EXIT_CLAIM = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fmt(v):
    return format(float(v), ".17g")


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=False, default=_json_value)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _write_manifest(out, args, scenario, outputs, config_bytes, extra=None):
    entry = {
        "scenario": scenario,
        "config_file": Path(args.config).name if getattr(args, "config", None) else None,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest() if config_bytes is not None else None,
        "grid": {"radii": args.grid_radii, "dirs": args.grid_dirs, "times": args.grid_times},
        "outputs": sorted(outputs),
    }
    if extra:
        entry.update(extra)
    # One entry per subcommand so simulate and verify can share a directory.
    path = out / "run_manifest.json"
    runs = {}
    if path.exists():
        try:
            runs = json.loads(path.read_text(encoding="utf-8")).get("runs", {})
        except (ValueError, AttributeError):
            runs = {}
    runs[args.command] = entry
    manifest = {"tool": "riemstab", "version": __version__, "runs": dict(sorted(runs.items()))}
    _dump_json(manifest, path)


def _load(args):
    data = Path(args.config).read_bytes()
    scn = load_scenario(data.decode("utf-8"))
    for w in scn.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return scn, data


def _grid(args, scn):
    for flag in ("grid_radii", "grid_dirs", "grid_times"):
        if getattr(args, flag) < 1:
            raise UsageError(f"--{flag.replace('_', '-')} must be >= 1")
    return scn.grid(args.grid_radii, args.grid_dirs, args.grid_times)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    scn, data = _load(args)
    if args.every < 1:
        raise UsageError("--every must be >= 1")
    out = _out_dir(args)
    trajs = simulate(scn, every=args.every)
    n_x = len(scn.run.x0_list)
    outputs = []
    rows = ["t,rho,run"]
    x_star = scn.field.equilibrium
    for k, tr in enumerate(trajs):
        i, j = divmod(k, n_x)
        name = f"traj_t{i}_x{j}.csv"
        tr.to_csv(out / name)
        outputs.append(name)
        rho = tr.distances(scn.manifold, x_star)
        rows.extend(f"{_fmt(t)},{_fmt(r)},t{i}_x{j}" for t, r in zip(tr.times, rho))
    (out / "distances.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    outputs.append("distances.csv")
    _write_manifest(out, args, scn.name, outputs, data, {"every": args.every})
    print(f"simulate: {len(trajs)} trajectories of {scn.name} written to {args.out}")
    return EXIT_OK


def cmd_verify(args):
    scn, data = _load(args)
    grid = _grid(args, scn)
    out = _out_dir(args)
    reports = evaluate_claims(scn, grid)
    report = {
        "scenario": scn.name,
        "warnings": list(scn.warnings),
        "checks": {k: r.to_dict() for k, r in reports.items()},
    }
    _dump_json(report, out / "report.json")
    _write_manifest(out, args, scn.name, ["report.json"], data)
    failed = [k for k, r in reports.items() if not r.passed]
    if failed:
        for k in failed:
            r = reports[k]
            print(f"claim {k}: {r.verdict.value} ({r.details})", file=sys.stderr)
        return EXIT_CLAIM
    print(f"verify: {len(reports)} claims pass for {scn.name}")
    return EXIT_OK


def cmd_doa(args):
    scn, data = _load(args)
    if args.grid_dirs < 64:
        raise UsageError("--grid-dirs must be >= 64 for the ring minimum")
    est = estimate_doa(scn.candidate, scn.field, args.r, n_ring=args.grid_dirs)
    out = _out_dir(args)
    vf = scn.field
    doa = {
        "scenario": scn.name,
        "r": est.r,
        "r0": _json_value(float(vf.domain_radius)),
        "c": est.c,
        "ring_min": est.ring_min,
        "argmin_direction": [float(v) for v in est.argmin_direction],
        "equilibrium": [float(v) for v in vf.equilibrium],
    }
    _dump_json(doa, out / "doa.json")
    n = scn.manifold.coord_dim
    lines = [",".join(f"coord_{i}" for i in range(n))]
    lines.extend(",".join(_fmt(v) for v in p) for p in est.boundary)
    (out / "doa_boundary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(out, args, scn.name, ["doa.json", "doa_boundary.csv"], data, {"r": args.r})
    print(f"doa: r={est.r!r} c={est.c!r} for {scn.name}")
    return EXIT_OK


def cmd_injectivity(args):
    b = CurvatureBounds(args.sigma, args.delta, args.nonpositive, args.compact, args.loop)
    print(injectivity_interval(b))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="riemstab", description="Simulate ODEs on Riemannian manifolds and check Lyapunov conditions.")
    p.add_argument("--version", action="version", version=f"riemstab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="scenario JSON file")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--grid-radii", type=int, default=32)
        s.add_argument("--grid-dirs", type=int, default=64)
        s.add_argument("--grid-times", type=int, default=8)
        return s

    s = scenario_cmd("simulate", "integrate every (t0, x0) pair and write CSV trajectories")
    s.add_argument("--every", type=int, default=100, help="record every N-th grid step (default 100)")
    s.set_defaults(func=cmd_simulate)
    scenario_cmd("verify", "check the scenario's claims and write report.json").set_defaults(func=cmd_verify)
    s = scenario_cmd("doa", "sublevel attraction estimate for radius r")
    s.add_argument("--r", type=float, required=True)
    s.set_defaults(func=cmd_doa)

    s = sub.add_parser("injectivity", help="injectivity-radius bounds from curvature information")
    s.add_argument("--sigma", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--nonpositive", action="store_true")
    s.add_argument("--compact", action="store_true")
    s.add_argument("--loop", type=float, help="length of the shortest geodesic loop")
    s.set_defaults(func=cmd_injectivity, grid_radii=None, grid_dirs=None, grid_times=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IntegrationError as exc:
        print(f"error: integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (ConfigError, UsageError, RangeError, InapplicableError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
