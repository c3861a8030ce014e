"""Command-line front end.

Exit status: 0 on success, 1 for unreadable or malformed input, 2 when the
input parses but violates a precondition.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from typing import Optional

import numpy as np

from . import __version__
from .asymptotics import (
    bhattacharyya_tv_bound,
    key_length_threshold,
    nonac_throughput_bound,
    rate_threshold,
    sparse_input_for,
    tv_product_mixture_estimate,
)
from .bounds import (
    KL_SYMMETRY_TOL,
    MaskingProblem,
    inner_bound_numeric_oracle,
    optimality_verdict,
    outer_bound_grid_oracle,
    radius,
)
from .channel import OFF_TOL, CompoundChannel, channel_from_dict, feasibility_gap
from .errors import DimensionMismatch, DomainError, InvalidDistribution, InvalidSweepSpec, MaskingError
from .gaussian import GaussianSetup, gaussian_closed_form, gaussian_optimal_throughput
from .probdist import (
    adversary_moments,
    as_probs,
    bhattacharyya,
    chi_squared,
    conditional_kl,
    divergence_profile,
    kl_divergence,
    omega,
    total_variation,
)
from .simulator import SimConfig, run_experiment

CSV_DIGITS = 12


class InputError(Exception):
    """Raised for unreadable or unparsable input; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), f".{CSV_DIGITS}g")
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _channel_from_data(data, tol: float) -> CompoundChannel:
    if not isinstance(data, dict):
        raise InputError("channel file must hold a JSON object with fields 'w1' and 'w2'")
    try:
        return channel_from_dict(data, tol)
    except (InvalidDistribution, DimensionMismatch) as exc:
        raise InputError(str(exc)) from exc


def _load_channel(path: str, tol: float) -> CompoundChannel:
    return _channel_from_data(_read_json(path), tol)


def _parse_vector(text: Optional[str], name: str):
    if text is None:
        return None
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"--{name}: expected a JSON list of numbers") from exc
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
        raise InputError(f"--{name}: expected a JSON list of numbers")
    return values


def _manifest(args, inputs) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "handler")}
    return {
        "subcommand": args.command,
        "inputs": inputs,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "format": getattr(args, "format", "json"),
    }


def _emit(out, args, inputs, result, rows=None, columns=None):
    """Write the manifest and the result in the requested format."""
    manifest = _manifest(args, inputs)
    if getattr(args, "format", "json") == "csv" and rows is not None:
        out.write("# manifest " + json.dumps(_jsonable(manifest), sort_keys=True) + "\n")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
        out.write(buf.getvalue())
    else:
        payload = {"manifest": manifest, "result": result}
        out.write(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


# Subcommands ------------------------------------------------------------------

def cmd_divergence(args, out):
    if args.channel:
        ch = _load_channel(args.channel, args.off_tol)
        q1t, q2t = ch.active_rows()
        pr = divergence_profile(q1t, q2t, ch.q0)
        result = dataclasses.asdict(pr)
        result["tv_active"] = total_variation(q1t, q2t)
        result["bhattacharyya_active"] = bhattacharyya(q1t, q2t)
        _emit(out, args, {"channel": args.channel}, result, [result], list(result))
        return
    p, q = _parse_vector(args.p, "p"), _parse_vector(args.q, "q")
    if p is None or q is None:
        raise InputError("give a channel file or both --p and --q")
    result = {
        "kl": kl_divergence(p, q),
        "chi2": chi_squared(p, q),
        "tv": total_variation(p, q),
        "bhattacharyya": bhattacharyya(p, q),
    }
    _emit(out, args, {"p": p, "q": q}, result, [result], list(result))


def cmd_feasibility(args, out):
    data = _read_json(args.channel)
    if not isinstance(data, dict) or "w1" not in data or "w2" not in data:
        raise InputError("missing field 'w1' or 'w2'")
    from .channel import Dmc
    try:
        w1, w2 = Dmc(data["w1"]), Dmc(data["w2"])
    except (InvalidDistribution, DimensionMismatch, TypeError) as exc:
        raise InputError(str(exc)) from exc
    res = feasibility_gap(w1, w2)
    result = {"gap": res.gap, "feasible": res.feasible, "verdict": res.verdict,
              "p1": res.p1.probs.tolist(), "p2": res.p2.probs.tolist(),
              "surrogate": res.surrogate, "iterations": res.iterations}
    row = {k: result[k] for k in ("gap", "feasible", "verdict", "surrogate", "iterations")}
    _emit(out, args, {"channel": args.channel}, result, [row], list(row))


def _bounds_row(prob: MaskingProblem, kl_tol: float, grid: bool) -> dict:
    rep = optimality_verdict(prob, kl_tol)
    result = rep.to_dict()
    if grid:
        u_grid, phi_star = outer_bound_grid_oracle(prob)
        result["oracles"] = {"inner_grid": inner_bound_numeric_oracle(prob),
                             "outer_grid": u_grid, "outer_grid_phi": phi_star}
    return result


def cmd_bounds(args, out):
    ch = _load_channel(args.channel, args.off_tol)
    prob = MaskingProblem(ch, args.delta)
    result = _bounds_row(prob, args.kl_tol, args.grid)
    row = {k: result[k] for k in ("delta", "inner_L", "inner_branch", "outer_U", "outer_branch",
                                  "optimal", "optimal_branch")}
    _emit(out, args, {"channel": args.channel}, result, [row], list(row))


def parse_sweep_spec(spec: str):
    """``name:start:stop:steps`` with name ``w1.ROW.COL`` or ``w2.ROW.COL``."""
    parts = spec.split(":")
    if len(parts) != 4:
        raise InvalidSweepSpec(f"sweep spec {spec!r} must look like name:start:stop:steps")
    name, start, stop, steps = parts
    target = name.split(".")
    if len(target) != 3 or target[0] not in ("w1", "w2"):
        raise InvalidSweepSpec(f"sweep parameter {name!r} must look like w1.ROW.COL or w2.ROW.COL")
    try:
        row, col = int(target[1]), int(target[2])
        lo, hi, n_steps = float(start), float(stop), int(steps)
    except ValueError as exc:
        raise InvalidSweepSpec(f"sweep spec {spec!r} has a non-numeric field") from exc
    if n_steps < 0 or not (math.isfinite(lo) and math.isfinite(hi)):
        raise InvalidSweepSpec("sweep range must be finite with a non-negative step count")
    if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
        raise InvalidSweepSpec("swept entries are probabilities and must stay in [0, 1]")
    values = [lo] if n_steps == 0 else np.linspace(lo, hi, n_steps + 1).tolist()
    return target[0], row, col, values


def set_entry(data: dict, matrix: str, row: int, col: int, value: float) -> dict:
    """Copy of ``data`` with one entry set and the rest of its row rescaled to sum to 1."""
    rows = [list(map(float, r)) for r in data[matrix]]
    if not (0 <= row < len(rows) and 0 <= col < len(rows[row])):
        raise InvalidSweepSpec(f"entry {matrix}[{row}][{col}] is outside the channel")
    rest = math.fsum(v for j, v in enumerate(rows[row]) if j != col)
    new = list(rows[row])
    if rest > 0:
        scale = (1.0 - value) / rest
        new = [v * scale for v in new]
    elif value < 1.0:
        raise InvalidSweepSpec(f"row {matrix}[{row}] has no other mass to rescale")
    new[col] = value
    rows[row] = new
    out = dict(data)
    out[matrix] = rows
    return out


def cmd_sweep(args, out):
    data = _read_json(args.channel)
    _channel_from_data(data, args.off_tol)
    matrix, row, col, values = parse_sweep_spec(args.param)
    rows = []
    for v in values:
        rec = {"param": v, "inner_L": None, "outer_U": None, "gap": None, "optimal": None, "flag": ""}
        try:
            ch = channel_from_dict(set_entry(data, matrix, row, col, v), args.off_tol)
            rep = optimality_verdict(MaskingProblem(ch, args.delta), args.kl_tol)
            rec.update(inner_L=rep.inner_L, outer_U=rep.outer_U, optimal=rep.optimal,
                       gap=rep.outer_U - rep.inner_L if math.isfinite(rep.outer_U) else math.inf)
        except MaskingError as exc:
            rec["flag"] = f"{type(exc).__name__}: {exc}"
        rows.append(rec)
    columns = ["param", "inner_L", "outer_U", "gap", "optimal", "flag"]
    _emit(out, args, {"channel": args.channel}, {"rows": rows}, rows, columns)


def cmd_gaussian(args, out):
    if args.sweep:
        try:
            lo, hi, steps = (float(x) for x in args.sweep.split(":"))
        except ValueError as exc:
            raise InvalidSweepSpec("--sweep must look like start:stop:steps") from exc
        grid = [lo] if int(steps) == 0 else np.linspace(lo, hi, int(steps) + 1).tolist()
    else:
        grid = [args.sigma2]
    rows = []
    for s2 in grid:
        setup = GaussianSetup(s2)
        q = gaussian_closed_form(setup)
        rows.append({"sigma2": s2, "L": gaussian_optimal_throughput(setup, args.delta),
                     "chi2": q.chi2, "rho": q.rho, "kl": q.kl, "psi": q.psi})
    result = rows[0] if len(rows) == 1 else {"rows": rows}
    _emit(out, args, {}, result, rows, ["sigma2", "L", "chi2", "rho", "kl", "psi"])


def _default_pbar(ch: CompoundChannel, s: int, given):
    if given is not None:
        return as_probs(given)
    if not ch.is_binary:
        raise DomainError("--pbar1/--pbar2 are required for channels with more than two inputs")
    p = np.zeros(2)
    p[1 - ch.off(s)] = 1.0
    return p


def _design_gammas(ch: CompoundChannel, delta: float, pbar1, pbar2):
    """Equal weights placed on the boundary of the masking ellipse."""
    q0 = ch.q0.probs
    q1b = pbar1 @ ch.w1.matrix
    q2b = pbar2 @ ch.w2.matrix
    om = omega(1.0, 1.0, q0, q1b, q2b)
    g = radius(delta) / math.sqrt(om)
    return g, g


def cmd_asymptotics(args, out):
    ch = _load_channel(args.channel, args.off_tol)
    prob = MaskingProblem(ch, args.delta)
    pbar1 = _default_pbar(ch, 1, _parse_vector(args.pbar1, "pbar1"))
    pbar2 = _default_pbar(ch, 2, _parse_vector(args.pbar2, "pbar2"))
    g1, g2 = args.gamma1, args.gamma2
    if g1 is None or g2 is None:
        d1, d2 = _design_gammas(ch, args.delta, pbar1, pbar2)
        g1, g2 = g1 or d1, g2 or d2
    q0 = ch.q0.probs
    q1b = pbar1 @ ch.w1.matrix
    q2b = pbar2 @ ch.w2.matrix
    mom = adversary_moments(args.phi, q1b, q2b, q0)
    n = args.n
    p1 = sparse_input_for(prob, 1, g1, n, pbar1)
    p2 = sparse_input_for(prob, 2, g2, n, pbar2)
    q1n = p1.distribution().probs @ ch.w1.matrix
    q2n = p2.distribution().probs @ ch.w2.matrix
    result = {
        "gamma1": g1,
        "gamma2": g2,
        "n": n,
        "omega": omega(g1, g2, q0, q1b, q2b),
        "tv_estimate": tv_product_mixture_estimate(g1, g2, q0, q1b, q2b, n),
        "conditional_kl_1": conditional_kl(ch.w1, q0, pbar1),
        "conditional_kl_2": conditional_kl(ch.w2, q0, pbar2),
        "throughput_1": g1 * conditional_kl(ch.w1, q0, pbar1),
        "throughput_2": g2 * conditional_kl(ch.w2, q0, pbar2),
        "key_length_threshold": key_length_threshold(prob, g1, g2, pbar1, pbar2, args.kappa, n),
        "rate_threshold_1": rate_threshold(n, p1, ch.w1),
        "rate_threshold_2": rate_threshold(n, p2, ch.w2),
        "bhattacharyya_tv_bound": bhattacharyya_tv_bound(q1n, q2n, n),
        "moments": dataclasses.asdict(mom),
        "threshold_tau": 0.5 * n * (g1 / math.sqrt(n)) * (mom.d1 + mom.d2),
        "nonac_throughput_bound": nonac_throughput_bound(args.delta, n) if n >= 2 else None,
    }
    _emit(out, args, {"channel": args.channel}, result)


def _parse_n_list(text: str):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError("--n expects an integer or a comma-separated list") from exc
    if not values:
        raise InputError("--n expects at least one blocklength")
    return values


def cmd_simulate(args, out):
    ch = _load_channel(args.channel, args.off_tol)
    pbar1 = _default_pbar(ch, 1, _parse_vector(args.pbar1, "pbar1"))
    pbar2 = _default_pbar(ch, 2, _parse_vector(args.pbar2, "pbar2"))
    g1, g2 = args.gamma1, args.gamma2
    if g1 is None or g2 is None:
        d1, d2 = _design_gammas(ch, args.delta, pbar1, pbar2)
        g1, g2 = g1 or d1, g2 or d2
    mode = "monte_carlo" if args.mode == "mc" else "exact"
    reports = []
    for n in _parse_n_list(args.n):
        cfg = SimConfig(ch=ch, gamma1=g1, gamma2=g2, pbar1=list(pbar1), pbar2=list(pbar2), n=n,
                        m_count=args.messages, k_count=args.keys, trials=args.trials,
                        seed=args.seed, mode=mode, phi=args.phi, max_ci=args.max_ci)
        reports.append(run_experiment(cfg).to_dict())
    result = reports[0] if len(reports) == 1 else {"reports": reports}
    columns = ["n", "m_count", "k_count", "mode", "pe_max", "pe_avg", "tv_induced", "tv_ci",
               "alpha", "beta", "test_lower", "bound_holds", "mu_low", "mu_high", "tau"]
    _emit(out, args, {"channel": args.channel}, result, reports, columns)


# Parser -------------------------------------------------------------------------

def _add_channel_flags(p, need_channel=True):
    if need_channel:
        p.add_argument("channel", help="channel JSON file with fields w1, w2 (and optionally off1, off2)")
    p.add_argument("--off-tol", type=float, default=OFF_TOL,
                   help="tolerance for matching the off-symbol rows (default %(default)g)")


def _add_format(p):
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="maskbound", description="Throughput bounds for state masking.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("divergence", help="divergences between two laws or of a channel's active rows")
    p.add_argument("channel", nargs="?", help="optional channel JSON file")
    p.add_argument("--p", help="JSON list")
    p.add_argument("--q", help="JSON list")
    _add_channel_flags(p, need_channel=False)
    _add_format(p)
    p.set_defaults(handler=cmd_divergence)

    p = sub.add_parser("feasibility", help="smallest L1 gap between the two output hulls")
    p.add_argument("channel")
    _add_format(p)
    p.set_defaults(handler=cmd_feasibility)

    p = sub.add_parser("bounds", help="inner, outer and optimal throughput")
    _add_channel_flags(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--kl-tol", type=float, default=KL_SYMMETRY_TOL)
    p.add_argument("--grid", action="store_true", help="also run the grid oracles")
    _add_format(p)
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("sweep", help="bounds while one channel entry varies")
    _add_channel_flags(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--param", required=True, help="w1.ROW.COL:start:stop:steps or w2.ROW.COL:...")
    p.add_argument("--kl-tol", type=float, default=KL_SYMMETRY_TOL)
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("gaussian", help="optimal throughput for antipodal inputs in Gaussian noise")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--sigma2", type=float)
    g.add_argument("--sweep", help="start:stop:steps over the noise variance")
    p.add_argument("--delta", type=float, required=True)
    _add_format(p)
    p.set_defaults(handler=cmd_gaussian)

    p = sub.add_parser("asymptotics", help="normal-approximation quantities for one design")
    _add_channel_flags(p)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--pbar1")
    p.add_argument("--pbar2")
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--phi", type=float, default=0.5)
    p.set_defaults(handler=cmd_asymptotics)

    p = sub.add_parser("simulate", help="finite-n codebook simulation")
    _add_channel_flags(p)
    p.add_argument("--n", required=True, help="blocklength or comma-separated list")
    p.add_argument("--delta", type=float, default=0.2, help="budget used to design default weights")
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--pbar1")
    p.add_argument("--pbar2")
    p.add_argument("--messages", type=int, default=2)
    p.add_argument("--keys", type=int, default=1)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--phi", type=float, default=0.5)
    p.add_argument("--max-ci", type=float)
    _add_format(p)
    p.set_defaults(handler=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.handler(args, sys.stdout)
    except (InputError, InvalidSweepSpec) as exc:
        print(f"maskbound: {exc}", file=sys.stderr)
        return 1
    except MaskingError as exc:
        print(f"maskbound: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
