"""Command-line entry point: ``nuczeno {povm,g2,sawtooth,zeno,validity}``.

Exit codes: 0 success, 1 configuration error, 2 numerical error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import copy
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..errors import ConfigError, NuczenoError
from ..optics import channel_coefficients, phase_shift, validity_report
from ..trajectory import ensemble_g2
from ..zeno import ZenoContext, low_power_g2, sawtooth_trajectory, zeno_time
from . import config as C
from .output import ResultTable, render

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


# ------------------------------------------------------------------- commands


def cmd_povm(cfg: dict) -> ResultTable:
    p = C.optics(cfg)
    s = cfg["povm"]
    if s["n_points"] < 1:
        raise ConfigError("must be positive", key="povm.n_points")
    deltas = np.linspace(float(s["delta_min"]), float(s["delta_max"]), s["n_points"])
    c = channel_coefficients(p, deltas)
    return ResultTable(
        "povm",
        ["delta_ueV", "p_co", "p_cr", "phase_rad"],
        {
            "delta_ueV": deltas,
            "p_co": np.abs(c.r_co) ** 2,
            "p_cr": np.abs(c.r_cr) ** 2,
            "phase_rad": np.atleast_1d(phase_shift(p, deltas)),
        },
        {"config": cfg},
    )


def cmd_g2(cfg: dict, threads: int = 1):
    """Combined table plus one table per rate."""
    runs = C.run_configs(cfg, threads=threads)
    per_rate, rows = [], {"rate": [], "tau_ns": [], "g2": [], "stderr": []}
    metas = []
    for run in runs:
        s = ensemble_g2(run)
        meta = dict(s.meta)
        meta.pop("backend", None)
        metas.append(meta)
        per_rate.append(
            ResultTable(
                "g2",
                ["tau_ns", "g2", "stderr"],
                {"tau_ns": s.taus, "g2": s.g2, "stderr": s.stderr},
                {"config": cfg, "seed": run.seed, "rate": run.rate, "run": meta},
            )
        )
        rows["rate"] += [run.rate] * len(s.taus)
        rows["tau_ns"] += list(s.taus)
        rows["g2"] += list(s.g2)
        rows["stderr"] += list(s.stderr)
    combined = ResultTable(
        "g2", ["rate", "tau_ns", "g2", "stderr"], rows, {"config": cfg, "seed": cfg["run"]["seed"], "runs": metas}
    )
    return combined, per_rate


def _context(cfg: dict) -> ZenoContext:
    spec = C.bath_spec(cfg)
    if spec is None:
        raise ConfigError("a [bath] section is required", key="bath")
    return ZenoContext.from_bath(spec, C.optics(cfg), C.noise(cfg))


def cmd_sawtooth(cfg: dict) -> ResultTable:
    ctx = _context(cfg)
    s = cfg["sawtooth"]
    for key in ("i", "j"):
        if not 0 <= s[key] < ctx.channel.dim:
            raise ConfigError(f"index outside 0..{ctx.channel.dim - 1}", key=f"sawtooth.{key}")
    cols = {k: [] for k in ("dt_event_ns", "time_ns", "event", "coherence_re", "coherence_im", "bloch_y", "bloch_z", "p_value")}
    for dt in s["dt_events"]:
        dt_val = None if dt == "none" else float(dt)
        if dt_val is not None and dt_val <= 0:
            raise ConfigError("event spacings must be positive", key="sawtooth.dt_events")
        tr = sawtooth_trajectory((s["i"], s["j"], ctx), dt_val, float(s["t_max"]), s["steps"])
        n = len(tr.times)
        cols["dt_event_ns"] += [float("inf") if dt_val is None else dt_val] * n
        cols["time_ns"] += list(tr.times)
        cols["event"] += [int(e) for e in tr.event]
        cols["coherence_re"] += list(tr.coherence.real)
        cols["coherence_im"] += list(tr.coherence.imag)
        cols["bloch_y"] += list(tr.bloch_y)
        cols["bloch_z"] += list(tr.bloch_z)
        cols["p_value"] += list(tr.p_value)
    return ResultTable("sawtooth", list(cols), cols, {"config": cfg, "deltas": list(ctx.channel.deltas)})


def cmd_zeno(cfg: dict) -> ResultTable:
    ctx = _context(cfg)
    tz = zeno_time(ctx)
    z = cfg["zeno"]
    taus = np.linspace(0.0, float(z["tau_max"]), z["tau_points"])
    s = low_power_g2(ctx, taus)
    quad = s.g2[0] - taus**2 / (2 * tz**2 * ctx.p_v**2)
    return ResultTable(
        "zeno",
        ["tau_ns", "g2", "g2_quadratic"],
        {"tau_ns": taus, "g2": s.g2, "g2_quadratic": quad},
        {"config": cfg, "tau_z_ns": tz, "p_v": ctx.p_v},
    )


def cmd_validity(cfg: dict) -> ResultTable:
    v = cfg["validity"]
    rep = validity_report(C.optics(cfg), float(v["t_fluc"]), float(v["threshold"]))
    cols = ["linewidth_ueV", "phase_slope_per_ueV", "t_delta_min_ns", "t_fluc_ns", "threshold", "ok"]
    vals = [rep.linewidth, rep.phase_slope, rep.t_delta_min, rep.t_fluc, rep.threshold, rep.ok]
    return ResultTable("validity", cols, {c: [x] for c, x in zip(cols, vals)}, {"config": cfg})


# --------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, key="<command line>")


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _dt(text):
    return "none" if text.lower() == "none" else float(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="TOML config or earlier result file")
    common.add_argument("--seed", type=_u64, default=argparse.SUPPRESS)
    common.add_argument("--output", type=Path, default=argparse.SUPPRESS, help="output path (stdout if omitted)")
    common.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS)
    common.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS)

    parser = _Parser(prog="nuczeno", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("povm", parents=[common], help="POVM weights and phase versus Overhauser shift")
    p.add_argument("--delta-min", type=float, dest="povm.delta_min")
    p.add_argument("--delta-max", type=float, dest="povm.delta_max")
    p.add_argument("--n-points", type=int, dest="povm.n_points")

    p = sub.add_parser("g2", parents=[common], help="Monte-Carlo cross-polarised g2")
    p.add_argument("--rate", type=float, nargs="+", dest="run.rates")
    p.add_argument("--tau-max", type=float, dest="run.tau_max")
    p.add_argument("--tau-points", type=int, dest="run.tau_points")
    p.add_argument("--n-trajectories", type=int, dest="run.n_trajectories")
    p.add_argument("--n-bath-draws", type=int, dest="run.n_bath_draws")
    p.add_argument("--estimator", choices=["nonselective", "selective"], dest="run.estimator")
    p.add_argument("--method", choices=["density", "wavefunction"], dest="run.method")
    p.add_argument("--normalization", choices=["pooled", "per_bath"], dest="run.normalization")
    p.add_argument("--record-factor", type=float, dest="run.record_factor")

    p = sub.add_parser("sawtooth", parents=[common], help="perturbative two-level trajectories")
    p.add_argument("--i", type=int, dest="sawtooth.i")
    p.add_argument("--j", type=int, dest="sawtooth.j")
    p.add_argument("--dt-event", type=_dt, nargs="+", dest="sawtooth.dt_events", help="spacings in ns or 'none'")
    p.add_argument("--t-max", type=float, dest="sawtooth.t_max")
    p.add_argument("--steps", type=int, dest="sawtooth.steps")

    p = sub.add_parser("zeno", parents=[common], help="Zeno time and low-power g2")
    p.add_argument("--tau-max", type=float, dest="zeno.tau_max")
    p.add_argument("--tau-points", type=int, dest="zeno.tau_points")

    p = sub.add_parser("validity", parents=[common], help="check the slow-fluctuation condition")
    p.add_argument("--t-fluc", type=float, dest="validity.t_fluc")
    p.add_argument("--threshold", type=float, dest="validity.threshold")
    return parser


def _resolved_config(args) -> dict:
    path = getattr(args, "config", None)
    cfg = C.load(path) if path is not None else C.default_config()
    cfg = copy.deepcopy(cfg)
    for dest, value in vars(args).items():
        if "." in dest and value is not None:
            C.set_value(cfg, dest, value)
    if getattr(args, "seed", None) is not None:
        C.set_value(cfg, "run.seed", args.seed)
    return cfg


def _write(text: str, path: Optional[Path]):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _rate_path(path: Path, rate: float) -> Path:
    tag = format(rate, ".17g").replace(".", "p").replace("-", "m")
    return path.with_name(f"{path.stem}_rate{tag}{path.suffix}")


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fmt = getattr(args, "format", "csv")
    out = getattr(args, "output", None)
    threads = getattr(args, "threads", 1)
    cfg = _resolved_config(args)
    if args.command == "g2":
        combined, per_rate = cmd_g2(cfg, threads=threads)
        if out is not None:
            for table in per_rate:
                _write(render(table, fmt, __version__), _rate_path(out, table.metadata["rate"]))
        _write(render(combined, fmt, __version__), out)
        return EXIT_OK
    table = {
        "povm": cmd_povm,
        "sawtooth": cmd_sawtooth,
        "zeno": cmd_zeno,
        "validity": cmd_validity,
    }[args.command](cfg)
    _write(render(table, fmt, __version__), out)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NuczenoError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
