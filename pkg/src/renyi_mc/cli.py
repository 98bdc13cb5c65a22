"""Command-line driver: c-function scans, beta scans, fits and validation.

Configuration is a flat ``key = value`` file; any key can be overridden with
``--set key=value``.  Outputs are CSV (data) and JSON (manifests, fits);
every file carries the hash of the configuration that produced it.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .fit import FitError, exclusion_mask, weighted_fit
from .jarzynski import (DEFAULT_THERM, direct_reverse_check, estimate_log_ratio, estimate_staged,
                        run_ensemble)
from .lattice import (BETA_C_2D, BETA_C_3D, CutSpec, Direction, GeometryError, LatticeSpec,
                      build_replica_lattice, dual_beta)
from .observables import (ConvergenceError, delta_renyi, entropic_cfunction, iterate_systematics,
                          reconstruct_entropy, zero_temperature_check)
from .schedule import Protocol, ScheduleError, make_schedule
from .special import ModelId

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
POINTS_HEADER = ["x", "l", "beta", "c_value", "stat_err", "sys_err", "direction"]
ENTROPY_HEADER = ["l", "S", "err"]


class ConfigError(ValueError):
    pass


def _fmt(v: float) -> str:
    return repr(float(v))


def _parse_overrides(text: str) -> dict[int, int]:
    out = {}
    for item in filter(None, (s.strip() for s in str(text).split(","))):
        try:
            k, v = item.split(":")
            out[int(k)] = int(v)
        except ValueError:
            raise ConfigError(f"bad per-l override {item!r}; expected l:value") from None
    return out


def _parse_list(text, conv=str) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(conv(t) for t in text)
    return tuple(conv(t.strip()) for t in str(text).split(",") if t.strip())


@dataclass
class RunConfig:
    D: int = 2
    L: int = 16
    Ltau: int | None = None
    ltau_ratio: int | None = None
    n_replicas: int = 2
    beta: float | None = None
    l_min: int = 1
    l_max: int | None = None
    N: int = 1000
    n_traj: int = 100
    N_per_l: str = ""
    n_traj_per_l: str = ""
    protocol: str = "P1"
    p2_equilibrium_stages: bool = False  # restart every P2 stage from equilibrium
    directions: tuple = ("direct", "reverse")
    seed: int = 12345
    therm_sweeps: int = DEFAULT_THERM
    sweeps_per_step: int = 1
    out: str = "run"
    fit_models: tuple = ()
    sys_model: str = ""
    exclude_first: int = 0
    exclude_last: int = 0
    betas: tuple = ()
    scan_l: int = 1
    dual: bool = False
    workers: int = 1

    # keys that do not influence any number written to disk
    _NON_PHYSICAL = ("out", "workers")

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            if key not in names:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = value
        cfg = cls(**kwargs)
        cfg._coerce()
        cfg.validate()
        return cfg

    def _coerce(self):
        try:
            for name in ("D", "L", "n_replicas", "l_min", "N", "n_traj", "seed", "therm_sweeps",
                         "sweeps_per_step", "exclude_first", "exclude_last", "scan_l", "workers"):
                setattr(self, name, int(getattr(self, name)))
            for name in ("Ltau", "ltau_ratio", "l_max"):
                v = getattr(self, name)
                setattr(self, name, None if v in (None, "", "none") else int(v))
            self.beta = None if self.beta in (None, "", "critical") else float(self.beta)
            self.directions = _parse_list(self.directions, lambda s: Direction.parse(s).value)
            self.fit_models = _parse_list(self.fit_models, lambda s: ModelId.parse(s).value)
            self.betas = _parse_list(self.betas, float)
            for name in ("dual", "p2_equilibrium_stages"):
                v = getattr(self, name)
                if isinstance(v, str):
                    setattr(self, name, v.strip().lower() in ("1", "true", "yes"))
            self.protocol = Protocol(str(self.protocol).upper()).value
            if self.sys_model:
                self.sys_model = ModelId.parse(self.sys_model).value
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.ltau_ratio is None:
            self.ltau_ratio = 8 if self.D == 2 else 4
        if self.Ltau is None:
            self.Ltau = self.ltau_ratio * self.L
        if self.beta is None:
            self.beta = BETA_C_2D if self.D == 2 else BETA_C_3D
        if self.l_max is None:
            self.l_max = self.L
        if not self.fit_models:
            self.fit_models = (ModelId.FIT2D_CORRECTED.value,) if self.D == 2 else (
                ModelId.F2D.value, ModelId.FRVB.value, ModelId.FADS.value)
        if not self.sys_model:
            self.sys_model = (ModelId.FIT2D_CORRECTED if self.D == 2 else ModelId.FRVB).value

    def validate(self):
        try:
            self.spec()
        except GeometryError as exc:
            raise ConfigError(str(exc)) from None
        if self.n_replicas < 2:
            raise ConfigError("n_replicas must be >= 2")
        if not 1 <= self.l_min <= self.l_max <= self.L:
            raise ConfigError(f"need 1 <= l_min <= l_max <= L, got {self.l_min}..{self.l_max}")
        if self.N < 1 or self.n_traj < 2:
            raise ConfigError("need N >= 1 and n_traj >= 2")
        if not self.directions:
            raise ConfigError("no directions selected")
        if self.therm_sweeps < 0 or self.sweeps_per_step < 1 or self.workers < 1:
            raise ConfigError("therm_sweeps >= 0, sweeps_per_step >= 1 and workers >= 1 required")
        if any(v < 1 for v in _parse_overrides(self.N_per_l).values()):
            raise ConfigError("every N must be >= 1")
        for l in range(self.l_min, self.l_max + 1):
            if self.protocol == "P2" and self.N_for(l) % (self.L ** (self.D - 2)):
                raise ConfigError(f"P2 needs N divisible by L^(D-2) (l={l})")
        if self.n_traj_for(self.l_min) < 2 or any(v < 2 for v in _parse_overrides(self.n_traj_per_l).values()):
            raise ConfigError("every n_traj must be >= 2")
        if not 1 <= self.scan_l <= self.L:
            raise ConfigError(f"scan_l={self.scan_l} outside [1, {self.L}]")
        if any(b < 0 for b in self.betas):
            raise ConfigError("betas must be non-negative")

    def spec(self, beta: float | None = None) -> LatticeSpec:
        return LatticeSpec(self.D, self.L, self.Ltau, self.n_replicas,
                           self.beta if beta is None else beta)

    def N_for(self, l: int) -> int:
        return _parse_overrides(self.N_per_l).get(l, self.N)

    def n_traj_for(self, l: int) -> int:
        return _parse_overrides(self.n_traj_per_l).get(l, self.n_traj)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def config_hash(self) -> str:
        d = {k: v for k, v in self.as_dict().items() if k not in self._NON_PHYSICAL}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def read_config_file(path) -> dict:
    raw = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        raw[k.strip()] = v.strip()
    return raw


@dataclass
class RunManifest:
    command: str
    config: dict
    config_hash: str
    version: str = __version__
    points: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    def write(self, path: Path):
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    return str(o)


# measurement -------------------------------------------------------------------

_DIR_CODE = {Direction.DIRECT: 0, Direction.REVERSE: 1}


def measure_step(cfg: RunConfig, l: int, beta: float, beta_index: int = 0):
    """Estimate the step ``l - 1 -> l`` in every configured direction.

    Returns ``{direction: (JarzynskiEstimate, seed tuple)}``.
    """
    spec = cfg.spec(beta)
    N, n_traj = cfg.N_for(l), cfg.n_traj_for(l)
    out = {}
    for name in cfg.directions:
        d = Direction(name)
        lat = build_replica_lattice(spec, CutSpec(l - 1 if d is Direction.DIRECT else l))
        edge = lat.edge_links(d)
        seed = (cfg.seed, beta_index, l, _DIR_CODE[d])
        if cfg.protocol == "P2" and cfg.p2_equilibrium_stages:
            out[d] = (estimate_staged(lat, N, d, n_traj, seed, therm_sweeps=cfg.therm_sweeps,
                                      workers=cfg.workers), seed)
            continue
        sched = make_schedule(cfg.protocol, beta, N, d, edge.n_subsets)
        recs = run_ensemble(lat, sched, n_traj, seed, therm_sweeps=cfg.therm_sweeps,
                            sweeps_per_step=cfg.sweeps_per_step, workers=cfg.workers)
        out[d] = (estimate_log_ratio(recs), seed)
    return out


def _points_for_step(cfg: RunConfig, l: int, beta: float, results: dict, manifest_row: dict):
    pts = []
    for d, (est, seed) in results.items():
        inc = delta_renyi(est, cfg.n_replicas)
        pts.append(entropic_cfunction(inc, l, cfg.L, cfg.D, cfg.n_replicas, beta=beta, direction=d.value))
        manifest_row[d.value] = {"seed": list(seed), "log_ratio": est.log_ratio,
                                 "stat_err": est.stat_err, "N": est.N, "n_traj": est.n_traj,
                                 "delta_S": inc.value, "delta_S_err": inc.err}
    if Direction.DIRECT in results and Direction.REVERSE in results:
        rep = direct_reverse_check(results[Direction.DIRECT][0], results[Direction.REVERSE][0])
        inc = delta_renyi(rep.combined, cfg.n_replicas)
        pts.append(entropic_cfunction(inc, l, cfg.L, cfg.D, cfg.n_replicas, beta=beta, direction="combined"))
        manifest_row["consistency"] = {"difference": rep.difference, "sigma": rep.sigma,
                                       "pull": rep.pull, "flagged": rep.flagged}
        manifest_row["combined"] = {"delta_S": inc.value, "delta_S_err": inc.err}
    return pts


def primary_points(points) -> list:
    """The combined points if present, else the points of the single direction."""
    comb = [p for p in points if p.direction == "combined"]
    if comb:
        return comb
    dirs = sorted({p.direction for p in points})
    return [p for p in points if p.direction == dirs[0]] if dirs else []


def _write_points(path: Path, points, cfg_hash: str, cfg: RunConfig):
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash: {cfg_hash}\n")
        fh.write(f"# lattice: D={cfg.D} L={cfg.L} Ltau={cfg.Ltau} n={cfg.n_replicas}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POINTS_HEADER)
        for p in points:
            w.writerow([_fmt(p.x), p.l, _fmt(p.beta), _fmt(p.c_value), _fmt(p.stat_err),
                        _fmt(p.sys_err), p.direction])


def _write_entropy(path: Path, curve, cfg_hash: str):
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash: {cfg_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENTROPY_HEADER)
        for l, S, e in zip(curve.l, curve.S, curve.err):
            w.writerow([int(l), _fmt(S), _fmt(e)])


def _fit_mask(cfg: RunConfig, n: int):
    if cfg.exclude_first or cfg.exclude_last:
        return exclusion_mask(n, cfg.exclude_first, cfg.exclude_last)
    return None


def cmd_cfun(cfg: RunConfig, log=print) -> RunManifest:
    t0 = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    man = RunManifest("cfun", cfg.as_dict(), h)
    points = []
    for l in range(cfg.l_min, cfg.l_max + 1):
        row = {"l": l, "x": (l - 0.5) / cfg.L}
        try:
            res = measure_step(cfg, l, cfg.beta)
            points.extend(_points_for_step(cfg, l, cfg.beta, res, row))
        except (ValueError, ScheduleError, GeometryError) as exc:
            man.errors.append({"l": l, "error": f"{type(exc).__name__}: {exc}"})
            log(f"l={l}: failed ({exc})")
            continue
        man.points.append(row)
        log(f"l={l} x={row['x']:.4f} done")

    main = primary_points(points)
    if len(main) > ModelId.parse(cfg.sys_model).arity:
        try:
            sysres = iterate_systematics(main, cfg.sys_model, mask=_fit_mask(cfg, len(main)),
                                         n=cfg.n_replicas)
            sys_by_l = {p.l: p.sys_err for p in sysres.points}
            points = [dataclasses.replace(p, sys_err=sys_by_l.get(p.l, 0.0)) for p in points]
            man.extra["systematics"] = {"model": cfg.sys_model, "iterations": sysres.iterations,
                                        "fit": sysres.fit.as_dict()}
        except (ConvergenceError, FitError) as exc:
            man.errors.append({"stage": "systematics", "error": f"{type(exc).__name__}: {exc}"})
    points.sort(key=lambda p: (p.l, p.direction))
    _write_points(out / "points.csv", points, h, cfg)

    main = primary_points(points)
    if main and len({p.l for p in main}) == len(main):
        inc = []
        by_l = {r["l"]: r for r in man.points}
        for p in main:
            r = by_l[p.l]
            src = r.get("combined") or r[p.direction]
            inc.append((p.l, src["delta_S"], src["delta_S_err"]))
        try:
            _write_entropy(out / "entropy.csv", reconstruct_entropy(inc), h)
        except ValueError as exc:
            man.errors.append({"stage": "entropy", "error": str(exc)})
    if main:
        rep = zero_temperature_check(main)
        man.extra["zero_temperature"] = {"max_pull": rep.max_pull, "passed": rep.passed,
                                         "pairs": rep.pairs}
    man.wall_clock_s = time.perf_counter() - t0
    man.write(out / "manifest.json")
    return man


def cmd_beta_scan(cfg: RunConfig, log=print) -> RunManifest:
    t0 = time.perf_counter()
    if not cfg.betas:
        raise ConfigError("beta-scan needs a non-empty 'betas' list")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    man = RunManifest("beta-scan", cfg.as_dict(), h)
    l = cfg.scan_l
    points = []
    by_beta = {}
    betas = list(cfg.betas)
    if cfg.dual:
        if cfg.D != 2:
            raise ConfigError("duality comparison is only defined in D=2")
        betas += [dual_beta(b) for b in cfg.betas if b > 0]
    for i, beta in enumerate(betas):
        row = {"beta": beta, "l": l, "beta_index": i}
        try:
            res = measure_step(cfg, l, beta, beta_index=i)
            pts = _points_for_step(cfg, l, beta, res, row)
        except (ValueError, ScheduleError, GeometryError) as exc:
            man.errors.append({"beta": beta, "error": f"{type(exc).__name__}: {exc}"})
            continue
        points.extend(pts)
        by_beta[i] = primary_points(pts)[0]
        man.points.append(row)
        log(f"beta={beta:.6f} done")
    _write_points(out / "points.csv", points, h, cfg)
    if cfg.dual:
        k = len(cfg.betas)
        with (out / "duality.csv").open("w", newline="") as fh:
            fh.write(f"# config_hash: {h}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["beta", "dual_beta", "c_beta", "err_beta", "c_dual", "err_dual"])
            j = k
            for i, b in enumerate(cfg.betas):
                if b <= 0:
                    continue
                if i in by_beta and j in by_beta:
                    p, q = by_beta[i], by_beta[j]
                    w.writerow([_fmt(b), _fmt(betas[j]), _fmt(p.c_value), _fmt(p.stat_err),
                                _fmt(q.c_value), _fmt(q.stat_err)])
                j += 1
    man.wall_clock_s = time.perf_counter() - t0
    man.write(out / "manifest.json")
    return man


# fitting -----------------------------------------------------------------------

def read_points_csv(path) -> tuple[str | None, dict, list[dict]]:
    """Parse a points file; returns ``(config_hash, lattice_info, rows)``."""
    h, info, rows = None, {}, []
    header = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("config_hash:"):
                h = body.split(":", 1)[1].strip()
            elif body.startswith("lattice:"):
                for tok in body.split(":", 1)[1].split():
                    k, v = tok.split("=")
                    info[k] = int(v)
            continue
        if not line.strip():
            continue
        cells = next(csv.reader([line]))
        if header is None:
            if cells != POINTS_HEADER:
                raise ConfigError(f"{path}:{lineno}: expected header {','.join(POINTS_HEADER)}")
            header = cells
            continue
        if len(cells) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} columns, got {len(cells)}")
        try:
            rows.append({"x": float(cells[0]), "l": int(cells[1]), "beta": float(cells[2]),
                         "c_value": float(cells[3]), "stat_err": float(cells[4]),
                         "sys_err": float(cells[5]), "direction": cells[6]})
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: non-numeric value") from None
    if header is None:
        raise ConfigError(f"{path}: no header line")
    return h, info, rows


def cmd_fit(paths, models, out: Path | None = None, *, L: int | None = None, n: int = 2,
            exclude_first: int = 0, exclude_last: int = 0, direction: str | None = None,
            allow_mixed: bool = False, log=print) -> dict:
    hashes, rows, info = set(), [], {}
    for p in paths:
        h, inf, r = read_points_csv(p)
        hashes.add(h)
        info.update(inf)
        rows.extend(r)
    if len(hashes) > 1 and not allow_mixed:
        raise ConfigError(f"inputs come from different configurations {sorted(map(str, hashes))}; "
                          "pass --allow-mixed to fit them together")
    L = L or info.get("L")
    dirs = sorted({r["direction"] for r in rows})
    use = direction or ("combined" if "combined" in dirs else (dirs[0] if dirs else None))
    sel = sorted((r for r in rows if r["direction"] == use), key=lambda r: r["x"])
    data = [(r["x"], r["c_value"], math.hypot(r["stat_err"], r["sys_err"])) for r in sel]
    mask = exclusion_mask(len(data), exclude_first, exclude_last) if (exclude_first or exclude_last) else None
    report = {"config_hashes": sorted(map(str, hashes)), "direction": use, "L": L,
              "n_points": len(data), "exclude_first": exclude_first, "exclude_last": exclude_last,
              "fits": []}
    for m in models:
        m = ModelId.parse(m)
        if m.is_entropy:
            report["fits"].append({"model": m.value, "error": "entropy models need entropy.csv data"})
            continue
        try:
            report["fits"].append(weighted_fit(data, m, L=L, n=n, mask=mask).as_dict())
        except (FitError, ValueError) as exc:
            report["fits"].append({"model": m.value, "error": str(exc)})
    log(format_fit_table(report))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "fit.json").write_text(json.dumps(report, indent=2) + "\n")
        (out / "fit.txt").write_text(format_fit_table(report) + "\n")
    return report


def format_fit_table(report: dict) -> str:
    lines = [f"L={report['L']}  points={report['n_points']}  direction={report['direction']}",
             f"{'model':<16} {'chi2/ndof':>10} {'ndof':>5}  parameters"]
    for f in report["fits"]:
        if "error" in f:
            lines.append(f"{f['model']:<16} {'-':>10} {'-':>5}  {f['error']}")
            continue
        par = "  ".join(f"{k}={v:.6g}({f['errors'][k]:.2g})" for k, v in f["params"].items())
        lines.append(f"{f['model']:<16} {f['chi2_reduced']:>10.3f} {f['ndof']:>5}  {par}")
    return "\n".join(lines)


# validation ----------------------------------------------------------------------

def _check(name, fn):
    t = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"check": name, "passed": bool(ok), "detail": detail, "seconds": time.perf_counter() - t}


def validation_checks(golden_dir: Path | None = None) -> list[dict]:
    from . import oracle, special
    from .observables import cfunction_prefactor

    golden_dir = oracle.GOLDEN_DIR if golden_dir is None else Path(golden_dir)
    results = []
    files = sorted(golden_dir.glob("*.json"))
    if not files:
        results.append({"check": "golden", "passed": False, "detail": f"no golden files in {golden_dir}",
                        "seconds": 0.0})
    for f in files:
        def g(f=f):
            probs = oracle.check_golden(f)
            return not probs, "; ".join(probs) or "all values reproduced"
        results.append(_check(f"golden:{f.name}", g))

    def eta_theta():
        e = abs(special.dedekind_eta(1.0) - math.gamma(0.25) / (2 * math.pi ** 0.75))
        t = abs(special.jacobi_theta3(1.0) - math.pi ** 0.25 / math.gamma(0.75))
        m1 = abs(special.dedekind_eta(0.5) - math.sqrt(2) * special.dedekind_eta(2.0))
        m2 = abs(special.jacobi_theta3(0.5) - math.sqrt(2) * special.jacobi_theta3(2.0))
        worst = max(e, t, m1, m2)
        return worst < 1e-10, f"max deviation {worst:.2e}"
    results.append(_check("special:eta_theta", eta_theta))

    def ads_round_trip():
        worst = max(abs(special.ads_x_of_chi(special.ads_chi_of_x(x)) - x) for x in (0.05, 0.25, 0.45))
        return worst < 1e-8, f"max |x(chi(x)) - x| = {worst:.2e}"
    results.append(_check("special:ads_round_trip", ads_round_trip))

    def f_g_consistency():
        worst = 0.0
        h = 1e-5
        for gm, fm in ((ModelId.GRVB, ModelId.FRVB), (ModelId.GADS, ModelId.FADS)):
            for x in (0.1, 0.3, 0.45):
                fd = (special.model_eval(gm, x + h, [1, 0]) - special.model_eval(gm, x - h, [1, 0])) / (2 * h)
                fd *= math.sin(math.pi * x) ** 2 / (2 * math.pi ** 2)
                worst = max(worst, abs(fd / special.model_eval(fm, x, [1.0]) - 1))
        return worst < 1e-6, f"max relative deviation {worst:.2e}"
    results.append(_check("special:f_g_consistency", f_g_consistency))

    def cft_pipeline():
        L, n, c = 64, 2, 0.5
        x = np.linspace(0.05, 0.95, 19)
        dS = c / 6 * (1 + 1 / n) * np.pi / L / np.tan(np.pi * x)
        got = cfunction_prefactor(x, L, 2) * dS
        want = special.model_eval(ModelId.CFT2D_CYLINDER, x, [c], n=n)
        worst = float(np.max(np.abs(got - want)))
        return worst < 1e-12, f"max deviation {worst:.2e}"
    results.append(_check("observables:cft_pipeline", cft_pipeline))

    def estimator():
        spec = LatticeSpec(2, 3, 4, 2, 0.44)
        pulls = []
        for d in (Direction.DIRECT, Direction.REVERSE):
            lat = build_replica_lattice(spec, CutSpec(1 if d is Direction.DIRECT else 2))
            sched = make_schedule("P1", spec.beta, 200, d, 1)
            est = estimate_log_ratio(run_ensemble(lat, sched, 200, (7, _DIR_CODE[d]), therm_sweeps=100))
            exact = oracle.exact_log_ratio(spec, lat.cut.l, lat.cut.l + d.sign)
            pulls.append((est.log_ratio - exact) / est.stat_err)
        ok = all(abs(p) < 3.0 for p in pulls)
        return ok, "pulls " + ", ".join(f"{p:+.2f}" for p in pulls)
    results.append(_check("jarzynski:oracle_agreement", estimator))
    return results


def cmd_validate(golden_dir=None, log=print) -> int:
    t0 = time.perf_counter()
    results = validation_checks(golden_dir)
    for r in results:
        log(json.dumps(r))
    total = time.perf_counter() - t0
    if total > 600:
        log(f"warning: validation took {total:.0f} s (budget 600 s)")
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_FAIL


# entry point -------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="renyi-mc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def run_args(sp):
        sp.add_argument("config", nargs="?", help="key = value configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, help="trajectory worker threads")
        sp.add_argument("--quiet", action="store_true", help="suppress progress lines")

    run_args(sub.add_parser("cfun", help="c-function scan over the cut position"))
    run_args(sub.add_parser("beta-scan", help="c-function at fixed l over a list of betas"))

    f = sub.add_parser("fit", help="fit points.csv files to model curves")
    f.add_argument("points", nargs="+", type=Path, help="points.csv files from cfun or beta-scan")
    f.add_argument("--models", default="Fit2D_corrected", help="comma-separated model names")
    f.add_argument("--L", type=int, help="lattice size (default: from the CSV header)")
    f.add_argument("--n", type=int, default=2, help="replica number")
    f.add_argument("--exclude-first", type=int, default=0, help="drop this many smallest-x points")
    f.add_argument("--exclude-last", type=int, default=0, help="drop this many largest-x points")
    f.add_argument("--direction", help="direct, reverse or combined (default: combined if present)")
    f.add_argument("--allow-mixed", action="store_true", help="accept files with different config hashes")
    f.add_argument("--out", type=Path, help="directory for fit.json and fit.txt")

    v = sub.add_parser("validate", help="oracle, special-function and estimator checks")
    v.add_argument("--golden-dir", type=Path, help="directory of golden oracle files")

    g = sub.add_parser("golden", help="regenerate the golden oracle file")
    g.add_argument("--out", type=Path, help="output JSON path")
    return p


def _load_config(args) -> RunConfig:
    raw = read_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    if args.out:
        raw["out"] = args.out
    if args.workers:
        raw["workers"] = args.workers
    return RunConfig.from_mapping(raw)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command in ("cfun", "beta-scan"):
            cfg = _load_config(args)
            log = (lambda *a, **k: None) if args.quiet else print
            man = (cmd_cfun if args.command == "cfun" else cmd_beta_scan)(cfg, log=log)
            return EXIT_FAIL if man.errors else EXIT_OK
        if args.command == "fit":
            rep = cmd_fit(args.points, _parse_list(args.models), args.out, L=args.L, n=args.n,
                          exclude_first=args.exclude_first, exclude_last=args.exclude_last,
                          direction=args.direction, allow_mixed=args.allow_mixed)
            return EXIT_FAIL if any("error" in f for f in rep["fits"]) else EXIT_OK
        if args.command == "validate":
            return cmd_validate(args.golden_dir)
        if args.command == "golden":
            from . import oracle
            path = args.out or oracle.GOLDEN_DIR / "d2_L3_Ltau4_n2_b0.44.json"
            oracle.write_golden(path, LatticeSpec(2, 3, 4, 2, 0.44))
            print(f"wrote {path}")
            return EXIT_OK
    except (ConfigError, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
