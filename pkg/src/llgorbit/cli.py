"""Command line entry point: ``llgorbit <subcommand> [options]``.

Exit codes: 0 success, 1 computation failure (non-convergence, blow-up),
2 configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .checks import format_report, run_check_suite
from .config import ConfigErrors, RunConfig, config_hash, parse_config, serialize_config
from .demag import build_kernel, demag_tensor, shape_condition
from .energy import ConfigError, ExternalFieldSpec, SimParams, energy_parts
from .grid import ShapeError, ShapeSpec, SnapshotError, build_grid, read_snapshot, write_snapshot
from .linop import spectrum
from .llg import IntegrationError, StepSizeError, evolve, norm_drift
from .minimize import minimize, regularity_report
from .periodic import (
    ShapeConditionError,
    ShootingError,
    ShootOptions,
    continuation,
    monodromy_eigs,
)

log = logging.getLogger("llgorbit")


class ComputationError(RuntimeError):
    pass


def _shape_arg(text: str) -> ShapeSpec:
    """``kind[:a,b,c]``, e.g. ``ellipsoid:2,1,1``."""
    kind, _, rest = text.partition(":")
    aspect = tuple(float(x) for x in rest.split(",")) if rest else (1.0, 1.0, 1.0)
    return ShapeSpec(kind, aspect)


def _field_arg(text: str, period: float) -> ExternalFieldSpec:
    """``rotating:ux,uy,uz:vx,vy,vz[@amp]`` or ``oscillating:ux,uy,uz[@amp]``."""
    body, _, amp = text.partition("@")
    parts = body.split(":")
    kind = {"rotating": "uniform_rotating", "oscillating": "uniform_oscillating"}.get(parts[0], parts[0])
    vecs = [tuple(float(x) for x in s.split(",")) for s in parts[1:]]
    kw = {"u": vecs[0]} if vecs else {}
    if len(vecs) > 1:
        kw["v"] = vecs[1]
    return ExternalFieldSpec(kind, period=period, amplitude=float(amp) if amp else 1.0, **kw)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def load_config(args) -> RunConfig:
    if args.config:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    else:
        cfg = RunConfig(ShapeSpec("ellipsoid", (2.0, 1.0, 1.0)), (8, 8, 8), SimParams(0.1))
    p = cfg.params
    if args.shape:
        cfg = replace(cfg, shape=_shape_arg(args.shape))
    if args.resolution:
        res = [int(x) for x in args.resolution.split(",")]
        cfg = replace(cfg, resolution=tuple(res * 3 if len(res) == 1 else res))
    changes = {}
    for name, key in (("eta", "eta"), ("alpha", "alpha"), ("lam", "lam"), ("period", "period")):
        val = getattr(args, name, None)
        if val is not None:
            changes[key] = val
    if changes:
        p = p.with_(**changes)
    if getattr(args, "field", None):
        p = p.with_(field_spec=_field_arg(args.field, p.period))
    elif p.field_spec.period != p.period:
        p = p.with_(field_spec=replace(p.field_spec, period=p.period))
    cfg = replace(cfg, params=p)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    if getattr(args, "out_dir", None):
        cfg = replace(cfg, output_dir=args.out_dir)
    return cfg


def _setup(cfg: RunConfig):
    g = build_grid(cfg.shape, cfg.resolution)
    return g, build_kernel(g)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _kv(pairs) -> str:
    return "\n".join(f"{k}={v}" for k, v in pairs)


def _vec(v) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(v))


def _load_field(path, g):
    mask, values = read_snapshot(path, g)
    return values


def cmd_demag_tensor(cfg, args, out: Path):
    g, k = _setup(cfg)
    d = demag_tensor(k)
    v = shape_condition(d, cfg.tolerances.gap)
    report = [
        ("tensor", _vec(d.tensor)),
        ("eigvals", _vec(d.eigvals)),
        ("eigvecs", _vec(d.eigvecs.T)),
        ("trace_defect", repr(d.trace_defect)),
        ("shape_condition", v.verdict),
        ("margin", repr(v.margin)),
        ("long_axis", _vec(v.long_axis)),
    ]
    text = _kv(report)
    print(text)
    (out / "demag_tensor.txt").write_text(text + "\n")
    _write_csv(
        out / "demag_tensor.csv",
        ["l1", "l2", "l3", "trace_defect", "margin", "verdict"],
        [[*d.eigvals, d.trace_defect, v.margin, v.verdict]],
    )
    return 0


def cmd_minimize(cfg, args, out: Path):
    g, k = _setup(cfg)
    res = minimize(cfg.params, g, k, tol=cfg.tolerances.minimize)
    path = Path(args.out) if args.out else out / "minimizer.magf"
    write_snapshot(path, res.m, g)
    print(_kv([("energy", repr(res.energy)), ("el_residual", repr(res.el_residual_norm)),
               ("iterations", res.iterations), ("converged", res.converged),
               ("snapshot", path)]))
    if not res.converged:
        raise ComputationError("minimization did not converge")
    return 0


def cmd_scaling(cfg, args, out: Path):
    g, k = _setup(cfg)
    runs = [minimize(cfg.params.with_(eta=e), g, k, tol=cfg.tolerances.minimize)
            for e in _floats(args.etas)]
    rep = regularity_report(runs, g)
    _write_csv(out / "scaling.csv", ["eta", "grad_l2", "grad_linf", "dev_linf", "el_residual"],
               [[r["eta"], r["grad_l2"], r["grad_linf"], r["dev_linf"], run.el_residual_norm]
                for r, run in zip(rep.rows(), runs)])
    _write_csv(out / "scaling_fit.csv", ["quantity", "slope", "prefactor"],
               [[n, rep.slopes[n], rep.prefactors[n]] for n in rep.slopes])
    print(_kv([(f"slope_{n}", repr(s)) for n, s in rep.slopes.items()]))
    if not all(r.converged for r in runs):
        raise ComputationError("some minimizations did not converge")
    return 0


def cmd_energy(cfg, args, out: Path):
    g, k = _setup(cfg)
    m = _load_field(args.input, g)
    e = energy_parts(m, cfg.params, args.t, k)
    text = _kv([("exchange", repr(e.exchange)), ("stray", repr(e.stray)),
                ("zeeman", repr(e.zeeman)), ("total", repr(e.total))])
    print(text)
    (out / "energy.txt").write_text(text + "\n")
    return 0


def cmd_evolve(cfg, args, out: Path):
    g, k = _setup(cfg)
    m0 = _load_field(args.input, g)
    dt = args.dt or cfg.tolerances.dt or None
    traj = evolve(m0, args.t0, args.t1, cfg.params, k, dt=dt, sample_every=args.sample_every,
                  keep_snapshots=args.snapshots)
    _write_csv(out / "trajectory.csv",
               ["t", "energy", "mx", "my", "mz", "raw_drift", "post_drift"], traj.rows())
    for i, m in enumerate(traj.snapshots):
        write_snapshot(out / f"snapshot_{i:05d}.magf", m, g)
    raw, post = norm_drift(traj)
    print(_kv([("samples", len(traj.times)), ("final_energy", repr(traj.energy_series[-1])),
               ("raw_drift", repr(raw)), ("post_drift", repr(post))]))
    return 0


def cmd_spectrum(cfg, args, out: Path):
    g, k = _setup(cfg)
    m = _load_field(args.input, g)
    rep = spectrum(m, cfg.params.with_(lam=0.0), k)
    _write_csv(out / "spectrum.csv", ["re", "im"], ([z.real, z.imag] for z in rep.eigenvalues))
    verdict = "clear" if rep.clear else "not_clear"
    line = (f"clearance={verdict} min_abs_real={rep.min_abs_real!r} "
            f"min_abs={rep.min_abs!r} dimension={rep.dimension}")
    print(line)
    (out / "spectrum_verdict.txt").write_text(line + "\n")
    return 0


def cmd_periodic(cfg, args, out: Path):
    g, k = _setup(cfg)
    p = cfg.params
    lambdas = _floats(args.lambda_list) if args.lambda_list else [0.0, p.lam]
    if lambdas[0] != 0.0:
        lambdas = [0.0] + lambdas
    res = minimize(p.with_(lam=0.0), g, k, tol=cfg.tolerances.minimize)
    if not res.converged:
        raise ComputationError("no stationary state: minimization did not converge")
    opts = ShootOptions(tol=cfg.tolerances.shoot, gap_tol=cfg.tolerances.gap,
                        dt=cfg.tolerances.dt or None)
    branch = continuation(lambdas, p, k, res.m, opts)
    rows = []
    for i, o in enumerate(branch.orbits):
        write_snapshot(out / f"orbit_{i:03d}.magf", o.initial, g)
        rows.append([o.lam, o.residual, o.newton_iters, o.motion, o.energy_min, o.energy_max])
    _write_csv(out / "branch.csv",
               ["lambda", "residual", "iterations", "motion", "energy_min", "energy_max"], rows)
    if args.verify_monodromy:
        ev = monodromy_eigs(res.m, p, k, n_eigs=6, dt=opts.dt)
        ev = ev[np.lexsort((ev.imag, ev.real))]
        _write_csv(out / "monodromy.csv", ["re", "im", "dist_to_one"],
                   ([z.real, z.imag, abs(z - 1)] for z in ev))
        print(f"monodromy_min_dist_to_one={float(np.min(np.abs(ev - 1)))!r}")
    print(_kv([("orbits", len(branch.orbits)),
               ("failed_lambda", branch.failed_lambda if branch.failed_lambda is not None else "none")]))
    if branch.failed_lambda is not None:
        raise ComputationError(f"branch lost at lambda = {branch.failed_lambda}: {branch.failure}")
    return 0


def cmd_check(cfg, args, out: Path):
    items = run_check_suite(cfg)
    text = format_report(items)
    print(text)
    (out / "check.txt").write_text(text + "\n")
    _write_csv(out / "check.csv", ["name", "status", "value", "threshold"],
               ([it.name, it.status, it.value, it.threshold] for it in items))
    if not all(it.ok for it in items):
        raise ComputationError("invariant checks failed")
    return 0


COMMANDS = {
    "demag-tensor": cmd_demag_tensor,
    "minimize": cmd_minimize,
    "scaling": cmd_scaling,
    "energy": cmd_energy,
    "evolve": cmd_evolve,
    "spectrum": cmd_spectrum,
    "periodic": cmd_periodic,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="sectioned key = value run configuration")
    common.add_argument("--shape", help="kind[:a,b,c], e.g. ellipsoid:2,1,1")
    common.add_argument("--resolution", help="cells per axis, one or three integers")
    common.add_argument("--eta", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--period", type=float)
    common.add_argument("--field", help="rotating:u:v[@amp] or oscillating:u[@amp]")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="llgorbit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("demag-tensor", parents=[common], help="demagnetizing tensor report")
    s = sub.add_parser("minimize", parents=[common], help="compute a regular minimizer")
    s.add_argument("--out", help="snapshot path (default <out-dir>/minimizer.magf)")
    s = sub.add_parser("scaling", parents=[common], help="eta-ladder scaling report")
    s.add_argument("--etas", default="0.05,0.1,0.2,0.4")
    s = sub.add_parser("energy", parents=[common], help="energy decomposition of a snapshot")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--t", type=float, default=0.0)
    s = sub.add_parser("evolve", parents=[common], help="integrate LLG from a snapshot")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--t1", type=float, required=True)
    s.add_argument("--dt", type=float)
    s.add_argument("--sample-every", type=int, default=1)
    s.add_argument("--snapshots", action="store_true", help="write a snapshot per sample")
    s = sub.add_parser("spectrum", parents=[common], help="spectrum of the linearization")
    s.add_argument("--in", dest="input", required=True)
    s = sub.add_parser("periodic", parents=[common], help="periodic orbits by shooting")
    s.add_argument("--lambda-list", help="comma separated, increasing, starting at 0")
    s.add_argument("--verify-monodromy", action="store_true")
    sub.add_parser("check", parents=[common], help="run the invariant battery")
    return parser


def _manifest(cfg: RunConfig, command: str, argv, elapsed: float) -> dict:
    import scipy

    return {
        "command": command,
        "argv": list(argv),
        "config_hash": config_hash(cfg),
        "config": serialize_config(cfg),
        "versions": {
            "llgorbit": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timings": {"total_seconds": elapsed},
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigErrors, ConfigError, ShapeError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    from threadpoolctl import threadpool_limits

    start = time.perf_counter()
    try:
        with threadpool_limits(limits=cfg.threads):
            code = COMMANDS[args.command](cfg, args, out)
    except (SnapshotError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ShapeConditionError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ShapeError, StepSizeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ComputationError, ShootingError, IntegrationError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        code = 1
    manifest = _manifest(cfg, args.command, argv, time.perf_counter() - start)
    (out / f"manifest_{args.command}.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
