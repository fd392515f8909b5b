"""Command-line front end.

Every table is written as CSV (or JSON with ``--format json``). The first CSV
line is a ``#`` comment holding the full run configuration as JSON; numbers use
17 significant digits so identical runs produce byte-identical files.
Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, fit as fitmod, metrics, model, sim, specfun
from .errors import NumericError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# parser construction
# ---------------------------------------------------------------------------

_DEFAULTS: dict[str, dict] = {}


def _add(sub, cmd: str, *flags, default=None, **kw):
    """Register a flag whose default lives outside argparse (for --config merging)."""
    action = sub.add_argument(*flags, default=argparse.SUPPRESS, **kw)
    _DEFAULTS.setdefault(cmd, {})[action.dest] = default
    return action


def _model_flags(sub, cmd):
    _add(sub, cmd, "--K", type=float, default=0.0, help="specular-to-diffuse power ratio")
    _add(sub, cmd, "--delta", type=float, action="append", default=[],
         help="asymmetry of one two-wave cluster (repeat per cluster)")
    _add(sub, cmd, "--mu", type=float, default=1.0, help="number of clusters")
    _add(sub, cmd, "--gbar", "--mean-snr", dest="gbar", type=float, default=1.0, help="mean SNR")
    _add(sub, cmd, "--method", choices=("auto", "series", "integral"), default="auto")
    _add(sub, cmd, "--quad-nodes", type=int, default=model.DEFAULT_POLICY.quad_nodes_per_dim)
    _add(sub, cmd, "--kmax", type=int, default=model.DEFAULT_POLICY.series_kmax,
         help="hard cap on series terms")


def _io_flags(sub, cmd):
    _add(sub, cmd, "--out", default=None, help="output file (default stdout)")
    _add(sub, cmd, "--format", dest="fmt", choices=("csv", "json"), default="csv")


def _grid_flags(sub, cmd, lo_name, hi_name, lo, hi, points):
    _add(sub, cmd, f"--{lo_name}", type=float, default=lo)
    _add(sub, cmd, f"--{hi_name}", type=float, default=hi)
    _add(sub, cmd, "--points", type=int, default=points)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mtw", description="Multi-cluster two-wave fading toolkit")
    parser.add_argument("--version", action="version", version=f"mtw {__version__}")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def command(name, help, **kw):
        sub = subs.add_parser(name, help=help, **kw)
        sub.add_argument("--config", default=None, help="JSON file mirroring the flags")
        return sub

    for name, what in (("pdf", "SNR density"), ("cdf", "SNR distribution function")):
        sub = command(name, f"{what} on a grid")
        _model_flags(sub, name)
        _grid_flags(sub, name, "xmin", "xmax", 0.0, 5.0, 200)
        _io_flags(sub, name)

    sub = command("moments", "raw moments E[gamma^n]")
    _model_flags(sub, "moments")
    _add(sub, "moments", "--nmax", type=int, default=4)
    _io_flags(sub, "moments")

    sub = command("aof", "amount of fading")
    _model_flags(sub, "aof")
    _io_flags(sub, "aof")

    sub = command("mgf", "(generalized) moment generating function on an s grid")
    _model_flags(sub, "mgf")
    _grid_flags(sub, "mgf", "smin", "smax", -5.0, 0.0, 101)
    _add(sub, "mgf", "--order", type=int, default=0, help="n in E[gamma^n e^{s gamma}]")
    _io_flags(sub, "mgf")

    sub = command("outage", "outage probability versus mean SNR")
    _model_flags(sub, "outage")
    _add(sub, "outage", "--rate", type=float, default=1.0, help="target rate in bit/s/Hz")
    _add(sub, "outage", "--db-min", type=float, default=None)
    _add(sub, "outage", "--db-max", type=float, default=None)
    _add(sub, "outage", "--points", type=int, default=21)
    _io_flags(sub, "outage")

    sub = command("sir-outage", "interference-limited outage with MRC")
    _model_flags(sub, "sir-outage")
    _add(sub, "sir-outage", "--branches", type=int, default=1)
    _add(sub, "sir-outage", "--interferers", type=int, default=1)
    _add(sub, "sir-outage", "--beta", type=float, default=10.0, help="SIR threshold")
    _add(sub, "sir-outage", "--interferer-power", type=float, default=1.0, help="average power per interferer")
    _grid_flags(sub, "sir-outage", "sir-db-min", "sir-db-max", 0.0, 30.0, 31)
    _io_flags(sub, "sir-outage")

    sub = command("roc", "energy-detection ROC curve")
    _model_flags(sub, "roc")
    _add(sub, "roc", "--u", type=int, default=1)
    _add(sub, "roc", "--branches", type=int, default=1)
    _grid_flags(sub, "roc", "eta-min", "eta-max", 1e-3, 100.0, 200)
    _io_flags(sub, "roc")

    sub = command("auc", "area under the energy-detection ROC")
    _model_flags(sub, "auc")
    _add(sub, "auc", "--u", type=int, default=1)
    _add(sub, "auc", "--branches", type=int, default=1)
    _io_flags(sub, "auc")

    sub = command("composite", "inverse-gamma shadowed MTW fading")
    _model_flags(sub, "composite")
    _add(sub, "composite", "--lam", type=int, default=2, help="inverse-gamma shape")
    _add(sub, "composite", "--qbar", type=float, default=1.0, help="mean received power")
    _add(sub, "composite", "--gbar-q", type=float, default=1.0, help="mean SNR of the composite link")
    _add(sub, "composite", "--kind", choices=("outage", "pdf", "cdf"), default="outage")
    _grid_flags(sub, "composite", "xmin", "xmax", 0.01, 10.0, 50)
    _io_flags(sub, "composite")

    sub = command("simulate", "draw samples from the physical model")
    _model_flags(sub, "simulate")
    _add(sub, "simulate", "--n", type=int, default=100000)
    _add(sub, "simulate", "--seed", type=int, default=0)
    _add(sub, "simulate", "--kind", choices=("snr", "envelope"), default="snr")
    _add(sub, "simulate", "--threads", type=int, default=None)
    _add(sub, "simulate", "--out", default=None, help="sample file (a .json sidecar is added)")

    sub = command("fit", "fit (K, delta, mu) to envelope samples")
    _add(sub, "fit", "--input", default=None)
    _add(sub, "fit", "--format", dest="fmt", choices=("plain", "csv"), default="plain")
    _add(sub, "fit", "--column", default="0", help="csv column index or header name")
    _add(sub, "fit", "--bins", default="auto")
    _add(sub, "fit", "--n-two-spec", type=int, default=1)
    _add(sub, "fit", "--restarts", type=int, default=8)
    _add(sub, "fit", "--out", default=None, help="report.json path (default stdout)")

    command("selftest", "run reduced-scale oracle cross-checks")

    sub = subs.add_parser("specfun-probe")  # undocumented test hook
    sub.add_argument("--config", default=None)
    _add(sub, "specfun-probe", "--func", required=True,
         choices=("besseli", "besseli-scaled", "log-besseli", "marcumq", "gammainc", "gammaincc", "lngamma"))
    _add(sub, "specfun-probe", "--order", type=float, default=0.0)
    _add(sub, "specfun-probe", "--x", type=float, default=0.0)
    _add(sub, "specfun-probe", "--a", type=float, default=0.0)
    _add(sub, "specfun-probe", "--b", type=float, default=0.0)
    return parser


def _merge(args: argparse.Namespace) -> dict:
    """Built-in defaults < config file < explicit flags."""
    cmd = args.command
    known = _DEFAULTS.get(cmd, {})
    merged = dict(known)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object")
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            dest = {"format": "fmt", "mean_snr": "gbar"}.get(dest, dest)
            if dest not in known:
                raise ValidationError(f"unknown config key {key!r} for {cmd}")
            merged[dest] = value
    for key, value in vars(args).items():
        if key in known:
            merged[key] = value
    merged["command"] = cmd
    merged["config"] = args.config
    return merged


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _emit(cfg: dict, columns: list[str], rows, extra: dict | None = None):
    meta = {"mtw_version": __version__, "config": cfg, "columns": columns}
    if extra:
        meta.update(extra)
    if cfg.get("fmt") == "json":
        body = json.dumps({"meta": meta, "rows": [[float(v) for v in row] for row in rows]},
                          indent=2, sort_keys=True) + "\n"
    else:
        lines = ["# " + json.dumps(meta, sort_keys=True), ",".join(columns)]
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        body = "\n".join(lines) + "\n"
    _write(cfg.get("out"), body)


def _write(path, text: str):
    if path:
        Path(path).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)


def _grid(lo: float, hi: float, points: int) -> np.ndarray:
    if points < 1:
        raise ValidationError("points must be at least 1")
    if hi < lo:
        raise ValidationError("grid upper bound is below the lower bound")
    return np.linspace(lo, hi, points)


def _params(cfg: dict) -> tuple[model.MtwParams, model.NumericPolicy]:
    params = model.MtwParams(cfg["K"], tuple(cfg["delta"] or ()), cfg["mu"], cfg["gbar"])
    model.validate(params)
    policy = model.NumericPolicy(quad_nodes_per_dim=cfg["quad_nodes"], series_kmax=cfg["kmax"])
    return params, policy


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_density(cfg):
    params, policy = _params(cfg)
    x = _grid(cfg["xmin"], cfg["xmax"], cfg["points"])
    fn = model.pdf if cfg["command"] == "pdf" else model.cdf
    y = fn(params, x, policy, cfg["method"])
    _emit(cfg, ["x", cfg["command"]], zip(x, np.atleast_1d(y)))


def _cmd_moments(cfg):
    params, _ = _params(cfg)
    if cfg["nmax"] < 0:
        raise ValidationError("nmax must be non-negative")
    _emit(cfg, ["n", "moment"], [(n, model.moment(params, n)) for n in range(cfg["nmax"] + 1)])


def _cmd_aof(cfg):
    params, _ = _params(cfg)
    _emit(cfg, ["aof"], [(model.aof(params),)])


def _cmd_mgf(cfg):
    params, _ = _params(cfg)
    if cfg["order"] < 0:
        raise ValidationError("order must be non-negative")
    s = _grid(cfg["smin"], cfg["smax"], cfg["points"])
    rows = [(si, model.gmgf(params, cfg["order"], si)) for si in s]
    _emit(cfg, ["s", "gmgf"], rows)


def _cmd_outage(cfg):
    params, policy = _params(cfg)
    if cfg["db_min"] is None and cfg["db_max"] is None:
        db = np.array([10.0 * math.log10(params.mean_snr)])
    else:
        lo = cfg["db_min"] if cfg["db_min"] is not None else cfg["db_max"]
        hi = cfg["db_max"] if cfg["db_max"] is not None else lo
        db = _grid(lo, hi, cfg["points"])
    rows = [(d, metrics.outage(params.with_mean_snr(10.0 ** (d / 10.0)), policy, cfg["rate"], cfg["method"]))
            for d in db]
    _emit(cfg, ["mean_snr_db", "outage"], rows)


def _cmd_sir_outage(cfg):
    params, policy = _params(cfg)
    scen = metrics.InterferenceScenario(cfg["branches"], cfg["interferers"],
                                        cfg["interferer_power"], cfg["beta"])
    db = _grid(cfg["sir_db_min"], cfg["sir_db_max"], cfg["points"])
    rows = []
    for d in db:
        # average SIR per branch is W / (L P_I)
        w = 10.0 ** (d / 10.0) * scen.interferers * scen.interferer_power
        rows.append((d, metrics.sir_outage(scen, params.with_mean_snr(w), policy)))
    _emit(cfg, ["sir_db", "outage"], rows)


def _cmd_roc(cfg):
    params, policy = _params(cfg)
    if not 0 < cfg["eta_min"] <= cfg["eta_max"]:
        raise ValidationError("need 0 < eta-min <= eta-max")
    if cfg["points"] < 1:
        raise ValidationError("points must be at least 1")
    eta = np.geomspace(cfg["eta_min"], cfg["eta_max"], cfg["points"])
    pf, pd = metrics.roc(params, cfg["u"], eta, policy, cfg["branches"])
    _emit(cfg, ["eta", "pf", "pd"], zip(eta, pf, pd))


def _cmd_auc(cfg):
    params, policy = _params(cfg)
    _emit(cfg, ["auc"], [(metrics.auc(params, cfg["u"], policy, cfg["branches"]),)])


def _cmd_composite(cfg):
    params, _ = _params(cfg)
    ig = metrics.IgParams(cfg["lam"], cfg["qbar"], cfg["gbar_q"])
    x = _grid(cfg["xmin"], cfg["xmax"], cfg["points"])
    if np.any(x <= 0):
        raise ValidationError("composite grid must be positive")
    fn = {"outage": metrics.ig_outage, "pdf": metrics.ig_pdf, "cdf": metrics.ig_cdf}[cfg["kind"]]
    _emit(cfg, ["gamma_th" if cfg["kind"] == "outage" else "q", cfg["kind"]],
          [(xi, fn(ig, params, xi)) for xi in x])


def _cmd_simulate(cfg):
    params, _ = _params(cfg)
    samples = sim.sample_params(params, cfg["n"], cfg["seed"], cfg["threads"])
    if cfg["kind"] == "envelope":
        samples = samples.as_envelope()
    if cfg["out"]:
        sim.save_samples(cfg["out"], samples, params)
        sys.stdout.write(f"wrote {samples.count} {samples.kind} samples to {cfg['out']}\n")
    else:
        sys.stdout.write("".join(f"{v:.17g}\n" for v in samples.values))


def _cmd_fit(cfg):
    if not cfg["input"]:
        raise ValidationError("--input is required")
    column = cfg["column"]
    column = int(column) if str(column).lstrip("-").isdigit() else column
    samples = fitmod.load_samples(cfg["input"], cfg["fmt"], column)
    bins = cfg["bins"]
    if bins != "auto":
        try:
            bins = int(bins)
        except (TypeError, ValueError):
            raise ValidationError("--bins must be an integer or 'auto'") from None
    hist = fitmod.empirical_pdf(samples, bins)
    report = fitmod.fit(hist, cfg["n_two_spec"], cfg["restarts"],
                        normalization_scale=samples.meta["normalization_scale"])
    _write(cfg["out"], json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")


def _cmd_probe(cfg):
    f = cfg["func"]
    if f == "besseli":
        v = specfun.bessel_i_scaled(cfg["order"], cfg["x"]).value
    elif f == "besseli-scaled":
        v = specfun.bessel_i_scaled(cfg["order"], cfg["x"]).scaled_value
    elif f == "log-besseli":
        v = specfun.log_bessel_i(cfg["order"], cfg["x"])
    elif f == "marcumq":
        v = specfun.marcum_q(cfg["order"], cfg["a"], cfg["b"])
    elif f == "gammainc":
        v = specfun.reg_lower_gamma(cfg["a"], cfg["x"])
    elif f == "gammaincc":
        v = specfun.reg_upper_gamma(cfg["a"], cfg["x"])
    else:
        v = specfun.ln_gamma(cfg["a"])
    sys.stdout.write(format(float(v), ".17g") + "\n")


def _cmd_selftest(cfg):
    from .selftest import run_checks

    failed = 0
    for name, ok, detail in run_checks():
        sys.stdout.write(f"{name}: {'ok' if ok else 'FAIL'}{'' if ok else ' (' + detail + ')'}\n")
        failed += not ok
    if failed:
        raise NumericError(f"{failed} self-test check(s) failed")


_COMMANDS = {
    "pdf": _cmd_density, "cdf": _cmd_density, "moments": _cmd_moments, "aof": _cmd_aof,
    "mgf": _cmd_mgf, "outage": _cmd_outage, "sir-outage": _cmd_sir_outage, "roc": _cmd_roc,
    "auc": _cmd_auc, "composite": _cmd_composite, "simulate": _cmd_simulate, "fit": _cmd_fit,
    "selftest": _cmd_selftest, "specfun-probe": _cmd_probe,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_INVALID
        cfg = _merge(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            _COMMANDS[args.command](cfg)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INVALID
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except (NumericError, ArithmeticError) as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
