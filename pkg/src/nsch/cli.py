"""Command-line entry point: ``nsch <subcommand> ...``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .diagnostics import (
    fit_exponential_attraction, hausdorff_semidist, integrate, separation_gap, smoothing_ratio,
)
from .errors import NSCHError
from .io import build_initial_state, load_config, load_snapshot_dir, read_ledger, run
from .stepper import audit_tolerance

log = logging.getLogger("nsch")


def _meta_for(ledger_path) -> dict:
    meta = Path(ledger_path).parent / "run.json"
    return json.loads(meta.read_text()) if meta.exists() else {}


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    rep = run(cfg)
    status = "ok" if rep.exit_code == 0 else ("audit failures" if rep.exit_code == 1 else "aborted")
    print(f"{status}: {rep.steps} steps, output in {rep.output_dir}")
    for f in rep.failures[:10]:
        print(f"  {f}")
    if rep.error:
        print(f"  {rep.error}")
    return rep.exit_code


def cmd_audit_energy(args) -> int:
    led = read_ledger(args.ledger)
    meta = _meta_for(args.ledger)
    if args.tol is not None:
        tol = args.tol
    elif args.tau is not None and args.h is not None:
        tol = audit_tolerance(args.tau, args.h)
    elif "bel_tol" in meta:
        tol = meta["bel_tol"]
    else:
        print("need --tol, or --tau and --h, or run.json next to the ledger", file=sys.stderr)
        return 2
    r = led["bel_residual"]
    worst = float(np.max(r)) if r.size else float("nan")
    n_bad = int(np.sum(r > tol))
    print(f"rows={r.size} max_residual={worst:.6e} tol={tol:.6e} violations={n_bad}")
    return 0 if n_bad == 0 else 1


def cmd_mass_decay(args) -> int:
    led = read_ledger(args.ledger)
    meta = _meta_for(args.ledger)
    alpha = args.alpha if args.alpha is not None else meta.get("alpha")
    c0 = args.c0 if args.c0 is not None else meta.get("c0", 0.0)
    tau = args.tau if args.tau is not None else meta.get("tau")
    dev = np.abs(led["mean_phi"] - c0)
    keep = dev > 1e-13
    if keep.sum() < 2:
        print("mean already at c0; nothing to fit")
        return 0
    rate = float(-np.polyfit(led["t"][keep], np.log(dev[keep]), 1)[0])
    line = f"fitted_rate={rate:.8f}"
    if alpha is not None and tau is not None:
        line += f" discrete_law={math.log1p(alpha * tau) / tau:.8f} alpha={alpha:.8f}"
    print(line)
    return 0


def cmd_separation(args) -> int:
    states = load_snapshot_dir(args.snapshot_dir)
    gap = separation_gap(states, args.t_min)
    print(f"snapshots={len(states)} t_min={args.t_min} gap={gap:.6e}")
    return 0 if gap > 0 else 1


def cmd_smoothing(args) -> int:
    cfg = load_config(args.config)
    s0 = build_initial_state(cfg)
    r = smoothing_ratio(s0, args.eps, args.t, cfg.params, cfg.ch_config())
    print(f"eps={args.eps:g} t={args.t:g} ratio={r:.8e}")
    return 0 if math.isfinite(r) else 1


def cmd_attract(args) -> int:
    cfg = load_config(args.config)
    p, ch = cfg.params, cfg.ch_config()
    t_end = cfg.time.t_end
    if t_end <= 1.0:
        print("attract needs t_end > 1 (reference set is t in [t_end - 1, t_end])", file=sys.stderr)
        return 2
    every = max(1, int(round(args.cadence / cfg.time.tau)))
    ref = integrate(build_initial_state(cfg), t_end, p, ch, every)
    M = [s for s in ref if s.t >= t_end - 1.0 - 1e-12]
    ok = True
    for k in range(1, args.ensemble + 1):
        init = dataclasses.replace(cfg.init, seed=cfg.init.seed + k,
                                   mean_phi=p.c0 + (p.m1 - abs(p.c0)) * k / (args.ensemble + 1))
        member = dataclasses.replace(cfg, init=init)
        tr = integrate(build_initial_state(member), t_end - 1.0, p, ch, every)
        t = np.array([s.t for s in tr])
        d = np.array([hausdorff_semidist([s], M) for s in tr])
        sel = t >= args.t_fit - 1e-12
        fit = fit_exponential_attraction(t[sel], d[sel])
        good = fit.omega > 0 and fit.rms_log_residual < 0.5
        ok &= good
        print(f"member={k} J={fit.J:.4e} omega={fit.omega:.4e} rms={fit.rms_log_residual:.3e} "
              f"{'pass' if good else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsch", description="Navier-Stokes / Cahn-Hilliard-Oono / nutrient solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate a configuration")
    r.add_argument("config")
    r.add_argument("--output-dir")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit-energy", help="check bel_residual column against tol")
    a.add_argument("ledger")
    a.add_argument("--tol", type=float)
    a.add_argument("--tau", type=float)
    a.add_argument("--h", type=float)
    a.set_defaults(func=cmd_audit_energy)

    m = sub.add_parser("mass-decay", help="fit the decay rate of mean(phi) - c0")
    m.add_argument("ledger")
    m.add_argument("--alpha", type=float)
    m.add_argument("--c0", type=float)
    m.add_argument("--tau", type=float)
    m.set_defaults(func=cmd_mass_decay)

    s = sub.add_parser("separation", help="min of 1 - max|phi| over snapshots")
    s.add_argument("snapshot_dir")
    s.add_argument("--t-min", type=float, default=0.0)
    s.set_defaults(func=cmd_separation)

    sm = sub.add_parser("smoothing", help="empirical smoothing constant")
    sm.add_argument("config")
    sm.add_argument("--eps", type=float, required=True)
    sm.add_argument("--t", type=float, required=True)
    sm.set_defaults(func=cmd_smoothing)

    at = sub.add_parser("attract", help="exponential attraction fit for an ensemble")
    at.add_argument("config")
    at.add_argument("--ensemble", type=int, default=5)
    at.add_argument("--cadence", type=float, default=0.1)
    at.add_argument("--t-fit", type=float, default=0.5, help="start of the fit window")
    at.set_defaults(func=cmd_attract)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NSCHError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
