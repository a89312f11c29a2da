"""Run configuration, snapshots, ledger CSV and the run driver."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import struct
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .cahn_hilliard import CHStepConfig
from .errors import ConfigError, ContractError, SnapshotError, StepError
from .grid import Grid, VectorField
from .initial import GENERATORS, initial_state
from .operators import mean
from .physics import PhysParams, chemical_potential
from .stepper import C_AUDIT, State, audit_tolerance, bel_audit, check_state, energy, step_with_report

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "NSCH_OUTPUT_ROOT"
LEDGER_COLUMNS = ("t", "E", "D", "source", "bel_residual", "E_tilde", "lambda1", "mean_phi",
                  "mean_sigma", "max_abs_phi", "div_residual", "newton_iters")
AUDITS = ("bel", "mass", "separation", "divergence")
MASS_TOL = 1e-11

MAGIC = b"NSCH"
VERSION = 1
_HEADER = struct.Struct("<4sIIIddd")


# --- configuration ----------------------------------------------------------

@dataclass
class TimeConfig:
    tau: float = 1e-3
    t_end: float = 1.0
    snapshot_every: int = 100
    ledger_every: int = 1


@dataclass
class InitConfig:
    kind: str = "spinodal"
    seed: int = 0
    amplitude: float = 0.05
    mean_phi: float | None = None
    sigma0: float | None = None
    velocity_amplitude: float = 0.0
    radius: float = 0.25
    path: str | None = None     # snapshot to restart from


@dataclass
class SolverConfig:
    newton_tol: float = 1e-11
    newton_max: int = 50
    clip_margin: float = 1e-12


@dataclass
class RunConfig:
    grid: Grid = field(default_factory=lambda: Grid(64, 64))
    params: PhysParams = field(default_factory=PhysParams)
    time: TimeConfig = field(default_factory=TimeConfig)
    init: InitConfig = field(default_factory=InitConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    diagnostics: list = field(default_factory=lambda: list(AUDITS))
    output_dir: str = "runs/default"

    def ch_config(self) -> CHStepConfig:
        s = self.solver
        return CHStepConfig(self.time.tau, s.newton_tol, s.newton_max, s.clip_margin)

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.time.t_end / self.time.tau + 1e-9)) if self.time.t_end >= self.time.tau else 0

    def resolved_output_dir(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out


def _take(section: dict, cls, name: str):
    known = {f.name for f in fields(cls)}
    for key in section:
        if key not in known:
            warnings.warn(f"[{name}] unknown key {key!r} ignored", stacklevel=3)
    try:
        return cls(**{k: v for k, v in section.items() if k in known})
    except (TypeError, ContractError) as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    sections = {"grid", "params", "time", "init", "solver", "diagnostics", "output"}
    for key in doc:
        if key not in sections:
            warnings.warn(f"unknown section [{key}] ignored", stacklevel=2)
    grid = _take(doc.get("grid", {}), Grid, "grid") if "grid" in doc else Grid(64, 64)
    params = _take(doc.get("params", {}), PhysParams, "params")
    bad = params.violations()
    if bad:
        raise ConfigError("; ".join(bad))
    time = _take(doc.get("time", {}), TimeConfig, "time")
    init = _take(doc.get("init", {}), InitConfig, "init")
    solver = _take(doc.get("solver", {}), SolverConfig, "solver")
    diag = doc.get("diagnostics", {})
    enabled = list(diag.get("enabled", AUDITS))
    for key in diag:
        if key != "enabled":
            warnings.warn(f"[diagnostics] unknown key {key!r} ignored", stacklevel=2)
    out = doc.get("output", {})
    for key in out:
        if key != "dir":
            warnings.warn(f"[output] unknown key {key!r} ignored", stacklevel=2)
    cfg = RunConfig(grid, params, time, init, solver, enabled, str(out.get("dir", "runs/default")))
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> RunConfig:
    t, i, p = cfg.time, cfg.init, cfg.params
    if not (t.tau > 0 and math.isfinite(t.tau)):
        raise ConfigError("[time] tau must be positive")
    if not t.t_end >= 0:
        raise ConfigError("[time] t_end must be >= 0")
    if t.snapshot_every < 1 or t.ledger_every < 1:
        raise ConfigError("[time] snapshot_every and ledger_every must be >= 1")
    if i.kind not in GENERATORS + ("snapshot",):
        raise ConfigError(f"[init] kind must be one of {GENERATORS + ('snapshot',)}")
    if i.kind == "snapshot" and not i.path:
        raise ConfigError("[init] kind = 'snapshot' needs a path")
    m = p.c0 if i.mean_phi is None else i.mean_phi
    if abs(m) > p.m1:
        raise ConfigError("phase space: initial mean of phi must lie in [-m1, m1]")
    s0 = 0.5 * p.m2 if i.sigma0 is None else i.sigma0
    if abs(s0) > p.m2:
        raise ConfigError("phase space: initial mean of sigma must lie in [-m2, m2]")
    if i.kind == "spinodal" and abs(m) + i.amplitude >= 1:
        raise ConfigError("phase space: spinodal data must satisfy |phi| < 1")
    unknown = [a for a in cfg.diagnostics if a not in AUDITS]
    if unknown:
        raise ConfigError(f"[diagnostics] unknown audits {unknown}; choose from {AUDITS}")
    try:
        cfg.ch_config()
    except ContractError as exc:
        raise ConfigError(f"[solver] {exc}") from exc
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # message carries "(at line L, column C)"
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc)


# --- snapshots --------------------------------------------------------------

def write_snapshot(s: State, path) -> None:
    g = s.grid
    header = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.hx, g.hy, s.t)
    parts = [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in (s.phi, s.sigma, s.p, s.v.u, s.v.w)]
    tmp = Path(str(path) + ".part")
    with open(tmp, "wb") as fh:
        fh.write(header)
        for b in parts:
            fh.write(b)
    os.replace(tmp, path)


def read_snapshot(path, params: PhysParams | None = None, grid: Grid | None = None) -> State:
    """Read a snapshot; mu is recomputed from (phi, sigma) with ``params``.

    When ``grid`` is given the file must match it.  Lx and Ly are rebuilt
    from the stored spacings.
    """
    params = PhysParams() if params is None else params
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if len(data) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header")
    magic, version, nx, ny, hx, hy, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"{path}: format version {version}, expected {VERSION}")
    if grid is not None and (grid.nx, grid.ny) != (nx, ny):
        raise SnapshotError(f"{path}: grid mismatch, file is {nx}x{ny}, run is {grid.nx}x{grid.ny}")
    n_expected = 3 * nx * ny + (nx + 1) * ny + nx * (ny + 1)
    body = data[_HEADER.size:]
    if len(body) != 8 * n_expected:
        raise SnapshotError(f"{path}: corrupt payload ({len(body)} bytes, expected {8 * n_expected})")
    if grid is not None and (grid.hx != hx or grid.hy != hy):
        raise SnapshotError(f"{path}: grid spacing mismatch")
    g = grid if grid is not None else Grid(nx, ny, nx * hx, ny * hy)
    arr = np.frombuffer(body, dtype="<f8").astype(float)
    k = nx * ny
    phi = arr[:k].reshape(nx, ny)
    sigma = arr[k:2 * k].reshape(nx, ny)
    pres = arr[2 * k:3 * k].reshape(nx, ny)
    ku = (nx + 1) * ny
    u = arr[3 * k:3 * k + ku].reshape(nx + 1, ny)
    w = arr[3 * k + ku:].reshape(nx, ny + 1)
    mu = chemical_potential(g, phi, sigma, params)
    return State(g, t, VectorField(u, w), phi, sigma, mu, pres)


# --- ledger ----------------------------------------------------------------

def ledger_row(s: State, led, report) -> list:
    g = s.grid
    return [s.t, led.E, led.D, led.source, led.residual, led.E_tilde, led.lambda1, mean(g, s.phi),
            mean(g, s.sigma), float(np.max(np.abs(s.phi))), report.div_residual, report.newton_iters]


def _fmt(x) -> str:
    return str(x) if isinstance(x, (int, np.integer)) else repr(float(x))


def read_ledger(path) -> dict:
    """Ledger CSV as a dict of float arrays keyed by column name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != LEDGER_COLUMNS:
        raise ContractError(f"{path}: not a ledger (header {rows[0] if rows else None})")
    body = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(LEDGER_COLUMNS))
    return {c: body[:, i] for i, c in enumerate(LEDGER_COLUMNS)}


# --- run driver -------------------------------------------------------------

@dataclass
class RunReport:
    exit_code: int
    steps: int
    output_dir: Path
    failures: list = field(default_factory=list)
    error: str | None = None


def _snap_name(k: int) -> str:
    return f"snap_{k:07d}.nsch"


def build_initial_state(cfg: RunConfig) -> State:
    i = cfg.init
    if i.kind == "snapshot":
        s = read_snapshot(i.path, cfg.params, cfg.grid)
    else:
        s = initial_state(cfg.grid, cfg.params, i.kind, i.seed, i.amplitude, i.mean_phi, i.sigma0,
                          i.velocity_amplitude, i.radius)
    check_state(s, cfg.params, initial=True)
    return s


def run(cfg: RunConfig) -> RunReport:
    """Integrate to t_end, writing the ledger, snapshots and run metadata."""
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    p, tau, g = cfg.params, cfg.time.tau, cfg.grid
    h = max(g.hx, g.hy)
    tol = audit_tolerance(tau, h)
    meta = {"tau": tau, "hx": g.hx, "hy": g.hy, "nx": g.nx, "ny": g.ny, "alpha": p.alpha, "c0": p.c0,
            "c_audit": C_AUDIT, "bel_tol": tol, "params": asdict(p)}
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    s = build_initial_state(cfg)
    t0 = s.t
    write_snapshot(s, out / _snap_name(0))
    ch_cfg = cfg.ch_config()
    enabled = set(cfg.diagnostics)
    failures = []
    prev = energy(s, p)
    k = 0
    with open(out / "ledger.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LEDGER_COLUMNS)
        for k in range(1, cfg.n_steps + 1):
            try:
                nxt, rep = step_with_report(s, tau, p, ch_cfg)
                nxt.t = t0 + k * tau
            except StepError as exc:
                write_snapshot(s, out / "last_valid.nsch")
                log.error("%s", exc)
                return RunReport(2, k - 1, out, failures, str(exc))
            led = energy(nxt, p)
            led.residual = bel_audit(prev, led, tau)
            if "bel" in enabled and led.residual > tol:
                failures.append(f"bel: step {k} residual {led.residual:.3e} > {tol:.3e}")
            if "mass" in enabled and (rep.mass_residual > MASS_TOL or rep.sigma_drift > MASS_TOL):
                failures.append(f"mass: step {k} residual {max(rep.mass_residual, rep.sigma_drift):.3e}")
            if "separation" in enabled and not np.max(np.abs(nxt.phi)) < 1.0:
                failures.append(f"separation: step {k} max|phi| reached 1")
            if "divergence" in enabled and rep.div_residual > 1e-10:
                failures.append(f"divergence: step {k} residual {rep.div_residual:.3e}")
            if k % cfg.time.ledger_every == 0:
                writer.writerow([_fmt(x) for x in ledger_row(nxt, led, rep)])
            if k % cfg.time.snapshot_every == 0:
                write_snapshot(nxt, out / _snap_name(k))
            s, prev = nxt, led
    if cfg.n_steps and cfg.n_steps % cfg.time.snapshot_every:
        write_snapshot(s, out / _snap_name(cfg.n_steps))
    for f in failures[:20]:
        log.warning("audit failure: %s", f)
    return RunReport(1 if failures else 0, cfg.n_steps, out, failures)


def load_snapshot_dir(path, params: PhysParams | None = None) -> list:
    files = sorted(Path(path).glob("snap_*.nsch"))
    if not files:
        raise ContractError(f"no snapshots in {path}")
    return [read_snapshot(f, params) for f in files]

