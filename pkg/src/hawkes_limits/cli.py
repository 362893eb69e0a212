"""Command-line front end: ``hawkes-limits <subcommand> ...``.

Exit codes: 0 success, 1 domain/regime/numerical errors, 2 configuration
errors.  Failures print one ``code: message`` line on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, calibrate, ldp, mc
from .core import (
    ConfigError,
    Empirical,
    EventStream,
    Exponential,
    ExponentialKernel,
    Gamma,
    HawkesError,
    Linear,
    LogRate,
    MarkModel,
    Point,
    Power,
    PowerLaw,
    ScaledLinear,
    ShiftedPower,
    SubPower,
    SumExp,
    Tabulated,
)
from .simulate import METHODS, SimConfig, simulate

SCHEMA_VERSION = 1
log = logging.getLogger("hawkes_limits")


# ---------------------------------------------------------------------------
# JSON output


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with sorted keys and floats at 17 significant digits.

    Non-finite floats are written as the strings "inf", "-inf", "nan".
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(obj[k], indent, _level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _write(text: str, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _report(payload: dict, config: dict, command: str) -> str:
    doc = dict(payload)
    doc["schema_version"] = SCHEMA_VERSION
    doc["config"] = config
    doc["command"] = command
    doc["version"] = __version__
    return to_json(doc) + "\n"


# ---------------------------------------------------------------------------
# config parsing (strict: unknown keys are errors)


def _take(d: dict, where: str, required=(), optional=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    allowed = set(required) | set(optional)
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{where}: missing key(s) {missing}")
    return d


def _num(d, key, where, default=None):
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number")
    return float(v)


KERNEL_KEYS = {
    "Exponential": ("a", "b"),
    "SumExp": ("terms",),
    "PowerLaw": ("c", "p"),
    "Tabulated": ("grid", "values"),
}


def parse_kernel(d, where="kernel"):
    fam = d.get("family") if isinstance(d, dict) else None
    if fam not in KERNEL_KEYS:
        raise ConfigError(f"{where}.family must be one of {sorted(KERNEL_KEYS)}")
    opt = ("tail_exponent",) if fam == "Tabulated" else ()
    _take(d, where, ("family",) + KERNEL_KEYS[fam], opt)
    if fam == "Exponential":
        return ExponentialKernel(_num(d, "a", where), _num(d, "b", where))
    if fam == "SumExp":
        terms = d["terms"]
        if not isinstance(terms, list) or not all(isinstance(t, list) and len(t) == 2 for t in terms):
            raise ConfigError(f"{where}.terms: expected a list of [a, b] pairs")
        return SumExp.from_terms([(float(a), float(b)) for a, b in terms])
    if fam == "PowerLaw":
        return PowerLaw(_num(d, "c", where), _num(d, "p", where))
    return Tabulated(np.asarray(d["grid"], float), np.asarray(d["values"], float), _num(d, "tail_exponent", where))


RATE_KEYS = {
    "Linear": ("nu",),
    "ScaledLinear": ("alpha", "nu"),
    "Power": ("gamma", "k", "delta"),
    "SubPower": ("gamma", "beta", "c"),
    "ShiftedPower": ("gamma", "c", "k"),
    "LogRate": ("c",),
}
RATE_TYPES = {"Linear": Linear, "ScaledLinear": ScaledLinear, "Power": Power, "SubPower": SubPower,
              "ShiftedPower": ShiftedPower, "LogRate": LogRate}


def parse_rate(d, where="rate"):
    fam = d.get("family") if isinstance(d, dict) else None
    if fam not in RATE_KEYS:
        raise ConfigError(f"{where}.family must be one of {sorted(RATE_KEYS)}")
    _take(d, where, ("family",) + RATE_KEYS[fam])
    return RATE_TYPES[fam](*[_num(d, k, where) for k in RATE_KEYS[fam]])


LAW_KEYS = {
    "Point": (("value",), ()),
    "Exponential": (("rate",), ()),
    "Gamma": (("shape", "scale"), ()),
    "Empirical": (("values",), ("weights",)),
    "RegularlyVarying": (("alpha",), ("scale",)),
    "Gumbel": (("shape",), ("scale",)),
}


def parse_law(d, where="law"):
    fam = d.get("family") if isinstance(d, dict) else None
    if fam not in LAW_KEYS:
        raise ConfigError(f"{where}.family must be one of {sorted(LAW_KEYS)}")
    req, opt = LAW_KEYS[fam]
    _take(d, where, ("family",) + req, opt)
    if fam == "Point":
        return Point(_num(d, "value", where))
    if fam == "Exponential":
        return Exponential(_num(d, "rate", where))
    if fam == "Gamma":
        return Gamma(_num(d, "shape", where), _num(d, "scale", where))
    if fam == "Empirical":
        w = d.get("weights")
        return Empirical(np.asarray(d["values"], float), None if w is None else np.asarray(w, float))
    if fam == "RegularlyVarying":
        return ldp.RegularlyVarying(_num(d, "alpha", where), _num(d, "scale", where, 1.0))
    return ldp.Gumbel(_num(d, "shape", where), _num(d, "scale", where, 1.0))


def parse_marks(d, where="marks"):
    fam = d.get("family") if isinstance(d, dict) else None
    kinds = {"Deterministic": ("a0",), "ExponentialH": ("rate",), "ScaledBase": ("base", "scale_law")}
    if fam not in kinds:
        raise ConfigError(f"{where}.family must be one of {sorted(kinds)}")
    opt = ("claim_law",) if fam == "ScaledBase" else ("base", "claim_law")
    _take(d, where, ("family",) + kinds[fam], opt)
    claim = parse_law(d["claim_law"], where + ".claim_law") if "claim_law" in d else None
    base = parse_kernel(d["base"], where + ".base") if "base" in d else None
    if fam == "Deterministic":
        return MarkModel.deterministic(_num(d, "a0", where), base, claim)
    if fam == "ExponentialH":
        return MarkModel.exponential_h(_num(d, "rate", where), base, claim)
    return MarkModel.scaled_base(base, parse_law(d["scale_law"], where + ".scale_law"), claim)


SIM_KEYS = ("rate", "kernel", "marks", "horizon", "seed", "max_events", "method", "band_width")


def parse_sim(d, where="sim"):
    _take(d, where, ("rate", "horizon"), SIM_KEYS)
    if "kernel" not in d and "marks" not in d:
        raise ConfigError(f"{where}: needs a kernel or marks")
    method = d.get("method", "auto")
    if method not in METHODS:
        raise ConfigError(f"{where}.method must be one of {list(METHODS)}")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"{where}.seed must be a nonnegative integer")
    return SimConfig(
        rate=parse_rate(d["rate"], where + ".rate"),
        kernel=parse_kernel(d["kernel"], where + ".kernel") if "kernel" in d else None,
        horizon=_num(d, "horizon", where),
        marks=parse_marks(d["marks"], where + ".marks") if "marks" in d else None,
        seed=seed,
        max_events=int(d.get("max_events", 10_000_000)),
        method=method,
        band_width=_num(d, "band_width", where, 1.0),
    )


RISK_KEYS = ("rho", "nu", "h_law", "claim_law", "u", "z", "T", "tail")


def parse_risk(d, where="risk"):
    _take(d, where, ("rho", "nu", "h_law", "claim_law"), ("u", "z", "T", "tail"))
    return ldp.RiskSpec(_num(d, "rho", where), _num(d, "nu", where), parse_law(d["h_law"], where + ".h_law"),
                        parse_law(d["claim_law"], where + ".claim_law"), _num(d, "u", where, 0.0),
                        _num(d, "z", where))


def load_config(path) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    raw = load_config(args.config)
    if args.seed is not None:
        raw = {**raw, "seed": args.seed}
    cfg = parse_sim(raw, "config")
    if args.replicas:
        counts = np.array(mc.run_replicas(lambda r: simulate(cfg, r).n_events, args.replicas), float)
        s = mc.MonteCarloSummary.from_values(counts / cfg.horizon, cfg.seed)
        payload = {"statistic": "N_T/T", "summary": s.as_dict(), "counts": counts}
        if args.csv:
            Path(args.csv).write_text("replica,count\n" + "".join(f"{i},{int(c)}\n" for i, c in enumerate(counts)))
        _write(_report(payload, raw, "simulate"), args.out)
    else:
        stream = simulate(cfg, args.replica)
        if stream.truncated:
            log.warning("max_events reached: stream truncated")
        _write(stream.to_csv(), args.out)
    return 0


def _functionals(k):
    out = {"l1_norm": analysis.l1_norm(k), "first_moment": analysis.first_moment(k),
           "h0": float(k.h0), "is_decreasing": bool(getattr(k, "is_decreasing", False))}
    if out["l1_norm"] > 1 and np.isfinite(out["l1_norm"]):
        out["malthusian"] = analysis.malthusian(k)
    return out


def cmd_analyze(args):
    raw = load_config(args.config)
    _take(raw, "config", ("rate", "kernel"), ("omega_max", "n_omega", "tau_max", "n_tau", "nu"))
    r = parse_rate(raw["rate"], "config.rate")
    k = parse_kernel(raw["kernel"], "config.kernel")
    rep = analysis.classify(r, k)
    payload = {"regime": rep.as_dict(), "functionals": _functionals(k)}
    nu = _num(raw, "nu", "config", getattr(r, "nu", 1.0))
    if args.spectrum:
        wmax = _num(raw, "omega_max", "config", 20.0)
        n = int(raw.get("n_omega", 201))
        om = np.linspace(0.0, wmax, n)
        dens = [analysis.bartlett_density(k, nu, float(w)) for w in om]
        Path(args.spectrum).write_text("omega,density\n" + "".join(f"{w:.17g},{d:.17g}\n" for w, d in zip(om, dens)))
    if args.covariance:
        if not (isinstance(k, SumExp) and k.a.size == 1):
            raise ConfigError("covariance output needs a single exponential kernel")
        tmax = _num(raw, "tau_max", "config", 5.0)
        n = int(raw.get("n_tau", 101))
        taus = np.linspace(0.0, tmax, n)
        a, b = float(k.a[0]), float(k.b[0])
        cov = [analysis.exp_covariance_density(a, b, nu, float(t)) for t in taus]
        Path(args.covariance).write_text("tau,covariance\n" + "".join(f"{t:.17g},{c:.17g}\n" for t, c in zip(taus, cov)))
    _write(_report(payload, raw, "analyze"), args.out)
    return 0


def _mark_law_from_args(args):
    chosen = [x is not None for x in (args.mark_exp, args.mark_det)]
    if sum(chosen) != 1:
        raise ConfigError("give exactly one of --mark-exp or --mark-det")
    return Exponential(args.mark_exp) if args.mark_exp is not None else Point(args.mark_det)


def _csv_rows(header, xs, ys):
    lines = [header]
    for x, y in zip(xs, ys):
        ys_ = "inf" if np.isinf(y) else f"{y:.17g}"
        lines.append(f"{x:.17g},{ys_}")
    return "\n".join(lines) + "\n"


def cmd_ldp(args):
    if args.what == "gamma":
        law = _mark_law_from_args(args)
        th = np.linspace(args.theta_min, args.theta_max, args.n)
        curve = ldp.gamma_curve(args.nu, law, th)
        text = _csv_rows("theta,gamma", curve.theta_grid, curve.gamma_values)
        log.info("theta_c=%.17g x_c=%.17g", curve.theta_c, curve.x_c)
    elif args.what == "rate":
        law = _mark_law_from_args(args)
        xs = np.linspace(0.0, args.x_max, args.n)
        crit = ldp.critical_point(law)
        vals = [ldp.rate_marked(args.nu, law, float(x), crit).value for x in xs]
        text = _csv_rows("x,rate", xs, vals)
    else:
        raw = load_config(args.config)
        _take(raw, "config", ("nu", "kernel", "theta", "t"), ("grid_step",))
        k = parse_kernel(raw["kernel"], "config.kernel")
        val = ldp.mgf_renewal(_num(raw, "nu", "config"), k, _num(raw, "theta", "config"), _num(raw, "t", "config"),
                              _num(raw, "grid_step", "config", 0.01))
        text = _report({"log_mgf": val, "scaled_log_mgf": val / _num(raw, "t", "config")}, raw, "ldp mgf")
    _write(text, args.out)
    return 0


def cmd_risk(args):
    raw = load_config(args.config)
    rs = parse_risk(raw, "config")
    payload = {"net_profit_bound": rs.net_profit_bound}
    if "tail" in raw:
        tail = raw["tail"]
        if tail not in ("claim_law",):
            raise ConfigError("config.tail must be \"claim_law\" (the heavy-tailed claim law)")
        T = _num(raw, "T", "config", math.inf)
        payload["heavy_tail"] = ldp.ruin_heavy_tail(rs, rs.u, T)
    else:
        lo, hi = ldp.sandwich_bounds(rs)
        td = ldp.ruin_exponent(rs)
        payload.update(sandwich=[lo, hi], theta_dagger=td,
                       breakpoint=ldp.finite_horizon_breakpoint(rs, td),
                       psi_log_asymptote=-td * rs.u)
        if rs.z is not None:
            payload["w_z"] = ldp.ruin_finite_horizon(rs)
    _write(_report(payload, raw, "risk"), args.out)
    return 0


def _exp_sim(raw, seed):
    d = dict(raw["sim"])
    if seed is not None:
        d["seed"] = seed
    return parse_sim(d, "config.sim")


EXPERIMENTS = {
    "lln": (("sim", "replicas"), ("tol",)),
    "clt": (("sim", "replicas"), ("tol",)),
    "method_equivalence": (("sim", "replicas"), ("level",)),
    "likelihood_ratio": (("sim", "replicas", "tilt_rate"), ()),
    "critical": (("nu", "kernel", "T", "replicas"), ("s", "tol")),
    "heavy_critical": (("nu", "kernel", "alpha", "T", "replicas"), ("tol",)),
    "supercritical": (("nu", "kernel", "T", "replicas"), ("tol",)),
    "explosion": (("rate", "kernel", "eps_grid", "n_small", "t_grid", "n_large"), ("tol",)),
    "ruin": (("risk", "u_grid", "replicas"), ("tol",)),
    "mgf": (("nu", "kernel", "theta", "t", "replicas"), ("tol", "grid_step")),
    "covariance": (("a", "b", "nu", "T"), ("lags", "delta", "burn_in", "tol")),
}


def run_experiment(raw: dict, seed=None, replicas=None) -> mc.Report:
    name = raw.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"config.experiment must be one of {sorted(EXPERIMENTS)}")
    req, opt = EXPERIMENTS[name]
    _take(raw, "config", ("experiment",) + req, opt + ("seed",))
    seed = raw.get("seed", 0) if seed is None else seed
    reps = int(raw["replicas"]) if "replicas" in raw else None
    if replicas is not None:
        reps = replicas
    kw = {k: raw[k] for k in ("tol",) if k in raw}
    if name in ("lln", "clt"):
        cfg = _exp_sim(raw, seed)
        fn = mc.lln_experiment if name == "lln" else mc.clt_experiment
        return fn(cfg, reps, **kw)
    if name == "method_equivalence":
        return mc.method_equivalence(_exp_sim(raw, seed), reps, raw.get("level", 0.01))
    if name == "likelihood_ratio":
        return mc.likelihood_ratio_mean(_exp_sim(raw, seed), parse_rate(raw["tilt_rate"], "config.tilt_rate"), reps)
    if name == "critical":
        return mc.critical_experiment(raw["nu"], parse_kernel(raw["kernel"], "config.kernel"), raw["T"], reps,
                                      raw.get("s", 1.0), seed, **kw)
    if name == "heavy_critical":
        return mc.heavy_critical_experiment(raw["nu"], parse_kernel(raw["kernel"], "config.kernel"), raw["alpha"],
                                            raw["T"], reps, seed, **kw)
    if name == "supercritical":
        return mc.supercritical_experiment(raw["nu"], parse_kernel(raw["kernel"], "config.kernel"), raw["T"], reps,
                                           seed, tol=raw.get("tol", 0.10))
    if name == "explosion":
        return mc.explosion_experiment(parse_rate(raw["rate"], "config.rate"), parse_kernel(raw["kernel"], "config.kernel"),
                                       raw["eps_grid"], raw["n_small"], raw["t_grid"], raw["n_large"], seed,
                                       **({"tol": raw["tol"]} if "tol" in raw else {}))
    if name == "ruin":
        return mc.ruin_experiment(parse_risk(raw["risk"], "config.risk"), raw["u_grid"], reps, seed, **kw)
    if name == "mgf":
        return mc.mgf_experiment(raw["nu"], parse_kernel(raw["kernel"], "config.kernel"), raw["theta"], raw["t"], reps,
                                 seed, grid_step=raw.get("grid_step", 0.01), **kw)
    return mc.covariance_experiment(raw["a"], raw["b"], raw["nu"], raw["T"], tuple(raw.get("lags", (0.5, 1.0, 2.0))),
                                    raw.get("delta", 0.25), raw.get("burn_in", 50.0), seed, **kw)


def cmd_mc(args):
    raw = load_config(args.config)
    rep = run_experiment(raw, args.seed, args.replicas)
    if args.csv:
        cols = {k: np.asarray(v) for k, v in rep.per_replica.items() if np.ndim(v) == 1}
        if cols:
            n = max(c.size for c in cols.values())
            names = sorted(cols)
            lines = ["replica," + ",".join(names)]
            for i in range(n):
                lines.append(str(i) + "," + ",".join(f"{cols[c][i]:.17g}" if i < cols[c].size else "" for c in names))
            Path(args.csv).write_text("\n".join(lines) + "\n")
    resolved = dict(raw)
    if args.seed is not None:
        resolved["seed"] = args.seed
    if args.replicas is not None:
        resolved["replicas"] = args.replicas
    _write(_report(rep.as_dict(), resolved, "mc"), args.out)
    return 0


def cmd_calibrate(args):
    if args.events is None:
        raise ConfigError("--events is required")
    p = Path(args.events)
    if not p.is_file():
        raise ConfigError(f"event file not found: {args.events}")
    stream = EventStream.from_csv(p.read_text(encoding="utf-8"), args.horizon)
    init = tuple(args.init) if args.init else None
    fit = calibrate.fit_exp(stream, init)
    cfg = {"events": str(args.events), "horizon": stream.horizon, "init": list(init) if init else None}
    _write(_report(fit.as_dict(), cfg, "calibrate"), args.out)
    return 0


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hawkes-limits", description="Hawkes process simulation and limit-theorem checks.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--seed", type=int, help="override the master seed")

    s = sub.add_parser("simulate", help="simulate an event stream (CSV) or replica summary (JSON)")
    common(s)
    s.add_argument("--replicas", type=int, help="write a summary over this many replicas")
    s.add_argument("--replica", type=int, default=0, help="replica index of the single stream")
    s.add_argument("--csv", help="per-replica counts (with --replicas)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="regime report and kernel functionals")
    common(a)
    a.add_argument("--spectrum", help="write omega,density CSV")
    a.add_argument("--covariance", help="write tau,covariance CSV (exponential kernels)")
    a.set_defaults(func=cmd_analyze)

    l = sub.add_parser("ldp", help="log-MGF curves, rate functions, renewal MGF")
    l.add_argument("what", choices=["gamma", "rate", "mgf"])
    common(l)
    l.add_argument("--nu", type=float, default=1.0)
    l.add_argument("--mark-exp", type=float, help="H(a) ~ Exponential(rate)")
    l.add_argument("--mark-det", type=float, help="H(a) = constant")
    l.add_argument("--theta-min", type=float, default=-1.0)
    l.add_argument("--theta-max", type=float, default=0.2)
    l.add_argument("--x-max", type=float, default=5.0)
    l.add_argument("--n", type=int, default=101)
    l.set_defaults(func=cmd_ldp)

    m = sub.add_parser("mc", help="run a Monte Carlo experiment")
    common(m)
    m.add_argument("--replicas", type=int)
    m.add_argument("--csv", help="per-replica statistics")
    m.set_defaults(func=cmd_mc)

    c = sub.add_parser("calibrate", help="fit an exponential kernel by maximum likelihood")
    c.add_argument("--events", help="event CSV (time[,mark])")
    c.add_argument("--horizon", type=float, help="observation horizon (default: just past the last event)")
    c.add_argument("--init", type=float, nargs=3, metavar=("NU", "A", "B"))
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("risk", help="ruin exponent, finite-horizon and heavy-tail constants")
    common(r)
    r.set_defaults(func=cmd_risk)
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
        return int(args.func(args) or 0)
    except ConfigError as exc:
        msg = str(exc)
        print(msg if msg.startswith("config: ") else f"config: {msg}", file=sys.stderr)
        return 2
    except HawkesError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError) as exc:
        # malformed values inside otherwise well-formed configs
        print(f"config: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
