"""Batch experiment driver.

    lab run <config> [--jobs K] [--out DIR]
    lab sweep <config> --axis N|epsilon|dt --values a,b,c [--jobs K] [--out DIR]
    lab export-frame <trajectory.bin> --index K [--which X|Y]

Configs are strict ``key = value`` files with one ``[section]`` named after
the experiment.  Exit status: 0 when every check passes, 1 when a check
fails, 2 on configuration or usage errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import LabError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

class ConfigParseError(Exception):
    def __init__(self, line, col, msg, path="<config>"):
        self.line, self.col, self.msg, self.path = line, col, msg, path
        where = f"{path}:{line}:{col}" if line else path
        super().__init__(f"{where}: {msg}")


def _int(s):
    if not re.fullmatch(r"[+-]?\d+", s):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(s)


def _float(s):
    return float(s)


def _ints(s):
    s = s.strip().strip("[]")
    return [] if not s.strip() else [_int(v.strip()) for v in s.split(",")]


def _law(s):
    from .measures import parse_law
    parse_law(s)
    return s


def _choice(*opts):
    def conv(s):
        if s not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}, got {s!r}")
        return s
    return conv


TOP = {"experiment": (str, None), "seed": (_int, 0), "output": (str, "")}

SCHEMAS = {
    "concentration-sweep": {
        "law": (_law, "gaussian(mean=0, std=1)"), "p": (_float, 1.0),
        "N": (_ints, [50, 100, 200, 400, 800]), "epsilon": (_float, 0.2), "trials": (_int, 1000),
        "lam": (_float, 1.0), "lam_prime": (_float, 0.5), "d_prime": (_float, 1.5),
    },
    "covering-demo": {
        "dim": (_int, 2), "radius": (_float, 1.0), "delta": (_float, 0.4), "p": (_float, 1.0),
        "measures": (_int, 50), "atoms": (_int, 6),
    },
    "mckean-run": {
        "N": (_int, 256), "dt": (_float, 0.01), "T": (_float, 5.0), "beta": (_float, 1.0),
        "gamma": (_float, 0.5), "initial": (_law, "gaussian(mean=0, std=1)"),
        "save_stride": (_int, 10), "force": (_choice("auto", "pairwise", "moments"), "auto"),
    },
    "coupling-check": {
        "N": (_int, 256), "dt": (_float, 0.001), "T": (_float, 2.0), "beta": (_float, 1.0),
        "gamma": (_float, 0.5), "initial": (_law, "gaussian(mean=0, std=1)"),
        "seeds": (_int, 20), "h": (_float, 0.02), "save_stride": (_int, 10),
    },
    "reconstruct": {
        "law": (_law, "gaussian-mixture(weights=[0.4, 0.6], means=[-1.5, 1.0], stds=[0.6, 0.8])"),
        "N": (_int, 500), "epsilon": (_float, 0.3), "trials": (_int, 1000),
        "kernel": (_choice("triangular", "smooth-bump"), "triangular"),
    },
    "pde-solve": {
        "beta": (_float, 1.0), "gamma": (_float, 0.0), "initial": (_law, "gaussian(mean=0, std=0.3)"),
        "T": (_float, 5.0), "dt": (_float, 0.001), "h": (_float, 0.02), "save_every": (_int, 100),
        "eta_bar": (_float, math.nan),
    },
}

# sweep axis -> parameter name, per experiment
AXES = {
    "concentration-sweep": {"N": "N", "epsilon": "epsilon"},
    "covering-demo": {"N": "atoms", "epsilon": "delta"},
    "mckean-run": {"N": "N", "dt": "dt"},
    "coupling-check": {"N": "N", "dt": "dt"},
    "reconstruct": {"N": "N", "epsilon": "epsilon"},
    "pde-solve": {"dt": "dt"},
}

_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    output: str
    params: dict
    seed_source: str = "config"

    def resolved(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "seed_source": self.seed_source,
                "output": self.output, "params": self.params}


def parse_config(text: str, path="<config>") -> ExperimentConfig:
    """Strict parser: unknown sections or keys, duplicates and bad values
    raise ConfigParseError carrying the line and column."""
    top, sections, where = {}, {}, {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        col = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            m = re.fullmatch(r"\[([a-z][a-z\-]*)\]", stripped)
            if not m:
                raise ConfigParseError(ln, col, "malformed section header", path)
            name = m.group(1)
            if name not in SCHEMAS:
                raise ConfigParseError(ln, col + 1, f"unknown section [{name}]", path)
            if name in sections:
                raise ConfigParseError(ln, col, f"duplicate section [{name}]", path)
            sections[name] = {}
            current = name
            continue
        if "=" not in stripped:
            raise ConfigParseError(ln, col, "expected 'key = value'", path)
        key_part, _, value = line.partition("=")
        key = key_part.strip()
        if not _KEY_RE.fullmatch(key):
            raise ConfigParseError(ln, col, f"malformed key {key!r}", path)
        value = value.strip()
        vcol = line.index("=") + 2 + (len(line.partition("=")[2]) - len(line.partition("=")[2].lstrip()))
        schema = TOP if current is None else SCHEMAS[current]
        target = top if current is None else sections[current]
        if key not in schema:
            raise ConfigParseError(ln, col, f"unknown key {key!r}" +
                                   (f" in [{current}]" if current else ""), path)
        if key in target:
            raise ConfigParseError(ln, col, f"duplicate key {key!r}", path)
        conv = schema[key][0]
        try:
            target[key] = conv(value)
        except (ValueError, LabError) as exc:
            raise ConfigParseError(ln, vcol, f"bad value for {key!r}: {exc}", path) from None
        where[(current, key)] = (ln, col)
    if "experiment" not in top:
        raise ConfigParseError(1, 1, "missing required key 'experiment'", path)
    exp = top["experiment"]
    if exp not in SCHEMAS:
        ln, col = where[(None, "experiment")]
        raise ConfigParseError(ln, col, f"unknown experiment {exp!r}", path)
    for name in sections:
        if name != exp:
            raise ConfigParseError(1, 1, f"section [{name}] does not belong to experiment {exp}", path)
    params = {k: v[1] for k, v in SCHEMAS[exp].items()}
    params.update(sections.get(exp, {}))
    return ExperimentConfig(exp, top.get("seed", 0), top.get("output", ""), params)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return out.getvalue()


@dataclass
class Result:
    files: dict
    checks: list
    results: dict
    row: dict

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def _check(name, ok, detail=""):
    return {"name": name, "passed": bool(ok), "detail": detail}


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _rng(seed, *keys):
    from .measures import RngSpec
    return RngSpec(seed, keys)


def exp_concentration(p, seed, jobs=1) -> Result:
    from . import concentration as conc
    from .measures import parse_law
    params = conc.TpParams(p=min(max(p["p"], 1.0), 2.0), lam=p["lam"], lam_prime=p["lam_prime"],
                           d_prime=p["d_prime"], alpha=min(0.25, p["lam"] / 4))
    reps = []
    for N in p["N"]:
        r = conc.mc_deviation(p["law"], p["p"], N, p["epsilon"], p["trials"], _rng(seed, 1, N),
                              params=params)
        reps.append(r)
    est = [r.estimate for r in reps]
    by_n = [est[k] for k in np.argsort(p["N"], kind="stable")]
    mono = all(b <= a for a, b in zip(by_n, by_n[1:]))
    checks = [_check("estimate nonincreasing in N", mono, f"estimates {est}")]
    fit = conc.fit_log_linear(p["N"], est) if len(est) >= 3 else None
    files = {
        "deviation.csv": csv_text(conc.CSV_HEADER, [r.csv_row() for r in reps]),
        "reports.jsonl": "".join(r.to_json() + "\n" for r in reps),
    }
    results = {"law": parse_law(p["law"]).spec(), "estimates": est,
               "fit": None if fit is None else {"slope": fit.slope, "intercept": fit.intercept,
                                                "r2": fit.r2, "ok": fit.ok, "reason": fit.reason}}
    last = reps[-1] if reps else None
    row = {"estimate": last.estimate if last else math.nan,
           "ci_lo": last.ci_low if last else math.nan, "ci_hi": last.ci_high if last else math.nan,
           "bound": last.bound if last else math.nan}
    return Result(files, checks, results, row)


def exp_covering(p, seed, jobs=1) -> Result:
    from . import covering as cov
    from .measures import DiscreteMeasure, UniformBall
    d, R, delta, pp = p["dim"], p["radius"], p["delta"], p["p"]
    r = delta / 2
    cover = cov.cover_ball_lattice(R, r, d)
    frac, maxd, _ = cov.probe_coverage(cover)
    law = UniformBall(R, d)
    rows, ok_all, cert_all = [], True, True
    for k in range(p["measures"]):
        gen = _rng(seed, 2, k).generator()
        pts = law.sample(p["atoms"], gen)
        w = gen.dirichlet(np.ones(p["atoms"]))
        mu = DiscreteMeasure(pts, w / math.fsum(w))
        res = cov.nearest_net_point(mu, cover, p=pp)
        ok = res.distance <= delta * (1 + 1e-12)
        ok_all &= ok
        cert_all &= res.distance <= res.certificate * (1 + 1e-12)
        rows.append([k, cover.size, res.K, res.certificate, res.distance, ok])
    checks = [
        _check("probe grid fully covered", frac == 1.0, f"fraction {frac}, max distance {maxd}"),
        _check("exact distance within delta", ok_all),
        _check("exact distance within certificate", cert_all),
    ]
    files = {"certificates.csv": csv_text(["index", "n_centers", "K", "certificate", "distance",
                                           "within_delta"], rows)}
    dmax = max((r[4] for r in rows), default=math.nan)
    return Result(files, checks, {"n_centers": cover.size, "max_distance": dmax},
                  {"n_centers": cover.size, "max_distance": dmax,
                   "violations": sum(not r[5] for r in rows)})


def _sim_config(p, seed, **kw):
    from .mckean import SimConfig
    from .measures import PotentialSpec, parse_law
    pot = PotentialSpec.quadratic(p["beta"], p["gamma"])
    return SimConfig(p["N"], p["dt"], p["T"], pot, parse_law(p["initial"]), _rng(seed, 3),
                     save_stride=p["save_stride"], **kw)


def exp_mckean(p, seed, jobs=1) -> Result:
    from . import mckean as mk
    cfg = _sim_config(p, seed, force=p["force"])
    b = mk.simulate_interacting(cfg)
    x = b.X
    mean = x.mean(axis=1)[:, 0]
    e = np.mean(np.sum(x * x, axis=2), axis=1)
    var = x[:, :, 0].var(axis=1)
    rows = [[t, m, ee, v] for t, m, ee, v in zip(b.times, mean, e, var)]
    checks = [_check("trajectories finite", np.all(np.isfinite(x)))]
    if cfg.potential.uniformly_convex and cfg.T >= 10:
        k10 = b.index_of(min(b.times, key=lambda t: abs(t - 10.0)))
        ok = float(e.max()) < 2 * float(e[k10]) or float(e[0]) > float(e.max()) - 1e-12
        checks.append(_check("second moment uniformly bounded", ok))
    files = {"moments.csv": csv_text(["t", "mean", "second_moment", "variance"], rows),
             "trajectory.bin": mk.bundle_to_bytes(b)}
    return Result(files, checks, {"final_variance": float(var[-1]), "final_mean": float(mean[-1])},
                  {"final_variance": float(var[-1]), "final_mean": float(mean[-1])})


def exp_coupling(p, seed, jobs=1) -> Result:
    from . import mckean as mk
    cfg = _sim_config(p, seed)
    st = mk.coupling_study(cfg, p["seeds"], h=p["h"], jobs=jobs)
    rows = []
    for s, r in zip(st.seeds, st.reports):
        for k, t in enumerate(r.times):
            rows.append([s, t, r.w1_x_mu[k], r.w1_y_mu[k], r.w1_x_y[k], r.rhs[k], r.residual[k]])
    cal = st.calibration
    checks = [_check("coupling residual above calibrated tolerance", st.violations == 0,
                     f"{st.violations} violations, tolerance {cal.tolerance!r}")]
    files = {"residuals.csv": csv_text(["seed", "t", "w1_x_mu", "w1_y_mu", "w1_x_y", "rhs", "residual"], rows)}
    res = {"tolerance": cal.tolerance, "discretization": cal.discretization,
           "grid_error": cal.grid_error, "min_residual": st.min_residual, "violations": st.violations}
    return Result(files, checks, res, dict(res))


def exp_reconstruct(p, seed, jobs=1) -> Result:
    from . import reconstruct as rc
    from .measures import Kernel, parse_law, sample_iid
    law = parse_law(p["law"])
    ker = Kernel(p["kernel"], 1)
    rows, first = [], None
    for k in range(p["trials"]):
        mu = sample_iid(law, p["N"], _rng(seed, 4, k))
        r = rc.reconstruction_check(mu, law, ker, p["epsilon"])
        if first is None:
            first = (mu, r)
        rows.append([k, r.w1, r.sup_error, r.sup_error_upper, r.bound, r.event, r.budget_event,
                     r.inequality_holds, r.implication_holds])
    n_ineq = sum(not r[7] for r in rows)
    n_impl = sum(not r[8] for r in rows)
    freq = sum(r[5] for r in rows) / max(len(rows), 1)
    checks = [_check("sup error within bound", n_ineq == 0, f"{n_ineq} violations"),
              _check("deviation implies budget event", n_impl == 0, f"{n_impl} violations")]
    files = {"trials.csv": csv_text(["trial", "w1", "sup_error", "sup_error_upper", "bound", "event",
                                     "budget_event", "inequality_holds", "implication_holds"], rows)}
    if first is not None:
        mu, r = first
        mol = rc.mollify(mu, ker, r.alpha)
        grid = np.linspace(mu.points.min() - r.alpha, mu.points.max() + r.alpha, 801)
        files["density.csv"] = mol.to_csv(grid)
    res = {"frequency": freq, "inequality_violations": n_ineq, "implication_violations": n_impl}
    return Result(files, checks, res, dict(res))


def exp_pde(p, seed, jobs=1) -> Result:
    from . import pde
    from .measures import PotentialSpec, parse_law
    pot = PotentialSpec.quadratic(p["beta"], p["gamma"])
    law = parse_law(p["initial"])
    init = pde.grid_for(law, p["T"], pot, h=p["h"])
    ser = pde.solve_mckean_1d(pot, init, p["T"], p["dt"], save_every=p["save_every"])
    eta = None if math.isnan(p["eta_bar"]) else p["eta_bar"]
    gw = pde.energy_gronwall_check(pde.moment_trace(ser), pot, eta)
    rows = [[t, m, e, b, r] for t, m, e, b, r in zip(ser.times, [d.mean for d in ser], gw.e, gw.bound,
                                                      gw.residual)]
    checks = [
        _check("mass drift per run below 1e-7", ser.mass_drift < 1e-7, repr(ser.mass_drift)),
        _check("mass drift per step below 1e-10", ser.max_step_drift < 1e-10, repr(ser.max_step_drift)),
        _check("clipped mass below 1e-8", ser.clipped_mass < 1e-8, repr(ser.clipped_mass)),
        _check("energy bound residual above -1e-6", gw.min_residual >= -1e-6, repr(gw.min_residual)),
    ]
    files = {"density.csv": ser.final.to_csv(pot.tag),
             "moments.csv": csv_text(["t", "mean", "second_moment", "bound", "residual"], rows)}
    res = {"final_variance": ser.final.variance, "min_residual": gw.min_residual,
           "mass_drift": ser.mass_drift, "a": gw.a, "G": gw.G, "eta_bar": gw.eta_bar}
    return Result(files, checks, res, {"final_variance": ser.final.variance,
                                       "min_residual": gw.min_residual, "mass_drift": ser.mass_drift})


EXPERIMENTS = {
    "concentration-sweep": exp_concentration,
    "covering-demo": exp_covering,
    "mckean-run": exp_mckean,
    "coupling-check": exp_coupling,
    "reconstruct": exp_reconstruct,
    "pde-solve": exp_pde,
}

ROW_FIELDS = {
    "concentration-sweep": ["estimate", "ci_lo", "ci_hi", "bound"],
    "covering-demo": ["n_centers", "max_distance", "violations"],
    "mckean-run": ["final_variance", "final_mean"],
    "coupling-check": ["tolerance", "discretization", "grid_error", "min_residual", "violations"],
    "reconstruct": ["frequency", "inequality_violations", "implication_violations"],
    "pde-solve": ["final_variance", "min_residual", "mass_drift"],
}


# ---------------------------------------------------------------------------
# run and sweep
# ---------------------------------------------------------------------------

def _apply_env(cfg: ExperimentConfig):
    env = os.environ.get("LAB_SEED")
    if env is not None and env.strip() != "":
        try:
            cfg.seed = _int(env.strip())
        except ValueError:
            raise ConfigParseError(0, 0, f"LAB_SEED is not an integer: {env!r}", "LAB_SEED") from None
        cfg.seed_source = "LAB_SEED"
    return cfg


def _out_dir(cfg, out):
    return out or cfg.output or os.path.join("runs", f"{cfg.experiment}-{cfg.seed}")


def _write(dirpath, name, data):
    path = os.path.join(dirpath, name)
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
        fh.write(data)


def execute(cfg: ExperimentConfig, out_dir: str, jobs: int = 1) -> Result:
    """Run one experiment and write its artifacts into ``out_dir``."""
    res = EXPERIMENTS[cfg.experiment](cfg.params, cfg.seed, jobs)
    os.makedirs(out_dir, exist_ok=True)
    for name in sorted(res.files):
        _write(out_dir, name, res.files[name])
    manifest = dict(cfg.resolved())
    manifest["version"] = __version__
    manifest["outputs"] = sorted(res.files) + ["summary.json"]
    _write(out_dir, "manifest.json", dumps_json(manifest))
    summary = {"experiment": cfg.experiment, "seed": cfg.seed, "passed": res.passed,
               "checks": res.checks, "results": res.results}
    _write(out_dir, "summary.json", dumps_json(summary))
    return res


def _sweep_point(args):
    cfg, out_dir, jobs = args
    return execute(cfg, out_dir, jobs)


def _parse_values(axis, text):
    vals = [v.strip() for v in text.split(",") if v.strip()] if text else []
    conv = _int if axis == "N" else _float
    return [conv(v) for v in vals]


def cmd_run(args) -> int:
    cfg = _load(args.config)
    out = _out_dir(cfg, args.out)
    res = execute(cfg, out, args.jobs)
    return _report(res.checks, out)


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    axes = AXES[cfg.experiment]
    if args.axis not in axes:
        raise ConfigParseError(0, 0, f"axis {args.axis!r} is not valid for {cfg.experiment}; "
                               f"choose from {sorted(axes)}", args.config)
    try:
        values = _parse_values(args.axis, args.values)
    except ValueError as exc:
        raise ConfigParseError(0, 0, f"bad --values: {exc}", "--values") from None
    key = axes[args.axis]
    out = _out_dir(cfg, args.out)
    os.makedirs(out, exist_ok=True)
    tasks = []
    for k, v in enumerate(values):
        params = dict(cfg.params)
        params[key] = [v] if isinstance(cfg.params[key], list) else v
        sub = ExperimentConfig(cfg.experiment, cfg.seed, cfg.output, params, cfg.seed_source)
        tasks.append((sub, os.path.join(out, f"point-{k:03d}"), 1))
    if args.jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    fields = ROW_FIELDS[cfg.experiment]
    rows = [[v] + [r.row.get(f, math.nan) for f in fields] + [r.passed] for v, r in zip(values, results)]
    _write(out, "sweep.csv", csv_text([args.axis] + fields + ["passed"], rows))
    checks = [_check(f"point {v}: {c['name']}", c["passed"], c["detail"])
              for v, r in zip(values, results) for c in r.checks]
    checks += _sweep_checks(cfg.experiment, args.axis, values, results)
    manifest = dict(cfg.resolved())
    manifest.update({"version": __version__, "axis": args.axis, "values": values,
                     "outputs": ["sweep.csv", "summary.json"]})
    _write(out, "manifest.json", dumps_json(manifest))
    _write(out, "summary.json", dumps_json({"experiment": cfg.experiment, "seed": cfg.seed,
                                            "axis": args.axis, "values": values,
                                            "passed": all(c["passed"] for c in checks),
                                            "checks": checks}))
    return _report(checks, out)


def _sweep_checks(exp, axis, values, results):
    order = np.argsort(values, kind="stable")
    if exp == "concentration-sweep" and axis == "N" and len(values) > 1:
        est = [results[k].row["estimate"] for k in order]
        ok = all(b <= a for a, b in zip(est, est[1:]))
        return [_check("estimate column nonincreasing in N", ok, f"{est}")]
    if exp == "coupling-check" and axis == "dt" and len(values) > 1:
        tol = [results[k].row["tolerance"] for k in order]
        ok = all(a <= b for a, b in zip(tol, tol[1:]))
        return [_check("calibrated residual tolerance shrinks with dt", ok, f"{tol}")]
    return []


def cmd_export(args) -> int:
    from .mckean import export_frame, load_bundle
    b = load_bundle(args.trajectory)
    if not 0 <= args.index < len(b.times):
        raise ConfigParseError(0, 0, f"frame index {args.index} outside 0..{len(b.times) - 1}",
                               args.trajectory)
    text = export_frame(b, args.index, args.which)
    if args.out:
        _write(os.path.dirname(args.out) or ".", os.path.basename(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(0, 0, f"cannot read config: {exc.strerror}", path) from None
    return _apply_env(parse_config(text, path))


def _report(checks, out) -> int:
    failed = [c for c in checks if not c["passed"]]
    if failed:
        print(f"FAILED checks ({len(failed)}), artifacts in {out}:", file=sys.stderr)
        for c in failed:
            print(f"  - {c['name']}: {c['detail']}", file=sys.stderr)
        return EXIT_FAIL
    print(f"all {len(checks)} checks passed; artifacts in {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description="Mean-field concentration laboratory")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out")
    s = sub.add_parser("sweep", help="run an experiment over a parameter axis")
    s.add_argument("config")
    s.add_argument("--axis", required=True, choices=["N", "epsilon", "dt"])
    s.add_argument("--values", default="")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    e = sub.add_parser("export-frame", help="print one trajectory frame as a measure")
    e.add_argument("trajectory")
    e.add_argument("--index", type=int, required=True)
    e.add_argument("--which", choices=["X", "Y"], default="X")
    e.add_argument("--out")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "jobs", 1) < 1:
        print("lab: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_export(args)
    except ConfigParseError as exc:
        print(f"lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LabError as exc:
        print(f"lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
