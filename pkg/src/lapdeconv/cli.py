"""Command-line front end: deconvolution runs, benchmark batches, kernels.

Subcommands
-----------
deconvolve      read a t,y sample CSV, estimate f, write t,f_hat plus a
                JSON sidecar with bandwidths and the kernel decomposition
simulate        run benchmark cells (single --cell or the --full grid) and
                write the report as CSV and optional JSON
make-kernel     print a smoothing kernel's coefficients, optionally with a
                sampled CSV profile
inspect-kernel  print the inversion constants of a convolution kernel

Exit codes: 0 success, 2 malformed input, 3 kernel-spec violation,
4 estimator failure. Every failure prints a one-line diagnostic naming the
violated precondition. All numeric output uses 17 significant digits so
files round-trip losslessly, and every output is a pure function of
(input bytes, flags, seed). The environment variable LAPDECONV_THREADS
caps internal parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .deconv import EstimatorConfig, deconvolve
from .kernels import make_boundary_kernel
from .resolvent import (
    RationalLaplaceKernel,
    decompose,
    exp_poly_kernel,
    rational_kernel,
)
from .sim import (
    BUILTIN_F_NAMES,
    BUILTIN_G_NAMES,
    builtin_f,
    builtin_g,
    forward_convolve,
    ladder_sigma,
    run_table,
    table_cells,
    write_report_csv,
    write_report_json,
)
from .smoother import (
    EstimationError,
    LepskiConfig,
    NoisySample,
    estimate_sigma,
)
from .special import standard_normals

__all__ = ["main"]

EXIT_BAD_INPUT = 2
EXIT_BAD_KERNEL = 3
EXIT_ESTIMATOR = 4

_SCHEMA_PATH = Path(__file__).resolve().parent / "schema" / "sidecar.schema.json"


class CliError(Exception):
    """Failure with a process exit code and a one-line diagnostic."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _resolve_threads(requested: int | None) -> int:
    """Requested thread count clipped by the LAPDECONV_THREADS cap."""
    raw = os.environ.get("LAPDECONV_THREADS", "").strip()
    cap = 0
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise CliError(
                EXIT_BAD_INPUT, "LAPDECONV_THREADS must be an integer"
            ) from None
    if requested is None:
        return cap if cap else 1
    requested = max(1, requested)
    return min(requested, cap) if cap else requested


def parse_kernel_spec(text: str) -> RationalLaplaceKernel:
    """Kernel from an inline JSON object or a path to a JSON file.

    Forms: {"form":"rational","num":[...],"den":[...]},
    {"form":"exp-poly","a":...,"r":...,"rho":[...]}, or
    {"form":"builtin","name":"g1".."g5","params":{...}}.
    """
    raw = text.strip()
    if not raw.startswith("{"):
        try:
            raw = Path(text).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(
                EXIT_BAD_KERNEL, f"kernel spec: cannot read file {text!r} ({exc})"
            ) from None
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_BAD_KERNEL, f"kernel spec: invalid JSON ({exc})") from None
    if not isinstance(obj, dict) or "form" not in obj:
        raise CliError(EXIT_BAD_KERNEL, 'kernel spec: missing "form" member')
    form = obj["form"]
    try:
        if form == "builtin":
            name = obj.get("name")
            if not isinstance(name, str):
                raise ValueError('builtin form needs a "name" string')
            return builtin_g(name, obj.get("params"))
        if form == "rational":
            return rational_kernel(
                _number_list(obj, "num"), _number_list(obj, "den")
            )
        if form == "exp-poly":
            for key in ("a", "r", "rho"):
                if key not in obj:
                    raise ValueError(f'exp-poly form needs a "{key}" member')
            return exp_poly_kernel(float(obj["a"]), _number_list(obj, "rho"),
                                   int(obj["r"]))
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_BAD_KERNEL, f"kernel spec: {exc}") from None
    raise CliError(EXIT_BAD_KERNEL, f"kernel spec: unknown form {form!r}")


def _number_list(obj: dict, key: str) -> list[float]:
    val = obj.get(key)
    if not isinstance(val, list) or not val or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in val
    ):
        raise ValueError(f'"{key}" must be a nonempty list of numbers')
    return [float(v) for v in val]


def load_samples(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read a t,y CSV; any structural defect exits with the input code."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(EXIT_BAD_INPUT, f"cannot read input: {exc}") from None
    if not rows or [c.strip() for c in rows[0][:2]] != ["t", "y"]:
        raise CliError(EXIT_BAD_INPUT, "input must be a CSV with header t,y")
    times, values = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) < 2:
            raise CliError(EXIT_BAD_INPUT, f"input line {ln}: expected two columns")
        try:
            times.append(float(row[0]))
            values.append(float(row[1]))
        except ValueError:
            raise CliError(
                EXIT_BAD_INPUT, f"input line {ln}: non-numeric value"
            ) from None
    if len(times) < 2:
        raise CliError(EXIT_BAD_INPUT, "input needs at least two data rows")
    return np.asarray(times), np.asarray(values)


def _parse_bandwidths(text: str | None):
    if text is None:
        return None
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise CliError(
            EXIT_BAD_INPUT, "--bandwidth must be a float or comma-separated floats"
        ) from None
    if not vals:
        raise CliError(EXIT_BAD_INPUT, "--bandwidth must not be empty")
    return vals[0] if len(vals) == 1 else tuple(vals)


def _estimator_config(args, threads: int) -> EstimatorConfig:
    lepski = LepskiConfig(
        a=args.a, C=args.C, threshold_mult=args.threshold_mult
    )
    return EstimatorConfig(
        L=args.L,
        lepski=lepski,
        grid_size=args.grid_size,
        trim=getattr(args, "trim", 0.1),
        fixed_bandwidths=_parse_bandwidths(getattr(args, "bandwidth", None)),
        threads=threads,
    )


# ---------------------------------------------------------------------------
# JSON sidecar and its shipped schema


def load_sidecar_schema() -> dict:
    return json.loads(_SCHEMA_PATH.read_text(encoding="utf-8"))


def _type_ok(value, t: str) -> bool:
    if t == "object":
        return isinstance(value, dict)
    if t == "array":
        return isinstance(value, list)
    if t == "string":
        return isinstance(value, str)
    if t == "boolean":
        return isinstance(value, bool)
    if t == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if t == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if t == "null":
        return value is None
    return False


def check_schema(value, schema: dict, path: str = "$") -> list[str]:
    """Minimal JSON-schema checker: type/required/properties/items/enum.

    Covers exactly the vocabulary the shipped sidecar schema uses, so the
    sidecar can be validated without a third-party dependency.
    """
    errors: list[str] = []
    t = schema.get("type")
    if t is not None:
        types = t if isinstance(t, list) else [t]
        if not any(_type_ok(value, tt) for tt in types):
            errors.append(f"{path}: expected type {t}")
            return errors
    if "enum" in schema and value not in schema["enum"]:
        errors.append(f"{path}: value not in enum")
    if isinstance(value, dict):
        props = schema.get("properties", {})
        for req in schema.get("required", []):
            if req not in value:
                errors.append(f"{path}: missing required member {req!r}")
        for key, sub in props.items():
            if key in value:
                errors.extend(check_schema(value[key], sub, f"{path}.{key}"))
        extra = schema.get("additionalProperties")
        if extra is False:
            for key in value:
                if key not in props:
                    errors.append(f"{path}: unexpected member {key!r}")
        elif isinstance(extra, dict):
            for key in value:
                if key not in props:
                    errors.extend(check_schema(value[key], extra, f"{path}.{key}"))
    if isinstance(value, list) and "items" in schema:
        for idx, item in enumerate(value):
            errors.extend(check_schema(item, schema["items"], f"{path}[{idx}]"))
    return errors


def _sidecar_document(args, data: NoisySample, g, result, sigma_estimated: bool):
    d = result.decomposition
    cfg = result.config
    return {
        "n": int(data.n),
        "T": float(data.T),
        "sigma": float(data.sigma),
        "sigma_estimated": sigma_estimated,
        "input": str(args.input),
        "output": str(args.output),
        "kernel": {
            "num": [float(c) for c in g.num.real_coeffs()],
            "den": [float(c) for c in g.den.real_coeffs()],
            "r": int(g.r),
            "B_r": float(g.B_r),
            "stable": bool(g.stable),
        },
        "decomposition": {
            "r": int(d.r),
            "B_r": float(d.B_r),
            "b": [float(v) for v in d.b],
            "a0": [float(v) for v in d.a0],
            "poles": [
                {
                    "re": float(t.s.real),
                    "im": float(t.s.imag),
                    "alpha": int(t.alpha),
                    "a": [[float(c.real), float(c.imag)] for c in t.a],
                }
                for t in d.poles
            ],
        },
        "bandwidths": {
            str(j): float(lam) for j, lam in enumerate(result.bandwidths)
        },
        "config": {
            "L": int(cfg.L),
            "a": float(cfg.lepski.a),
            "C": None if cfg.lepski.C is None else float(cfg.lepski.C),
            "mu": float(cfg.lepski.mu),
            "threshold_mult": float(cfg.lepski.threshold_mult),
            "grid_size": int(cfg.grid_size),
            "threads": int(cfg.threads),
        },
    }


# ---------------------------------------------------------------------------
# Subcommands


def cmd_deconvolve(args) -> int:
    times, values = load_samples(args.input)
    g = parse_kernel_spec(args.kernel)
    if args.L <= g.r:
        raise CliError(
            EXIT_BAD_KERNEL,
            f"kernel order L={args.L} must exceed the inversion order r={g.r}",
        )
    T = float(times[-1]) if times.size else 0.0
    try:
        probe = NoisySample(times=times, values=values, T=T, sigma=0.0)
    except ValueError as exc:
        raise CliError(EXIT_BAD_INPUT, f"input: {exc}") from None
    if args.sigma is not None:
        if args.sigma < 0.0:
            raise CliError(EXIT_BAD_INPUT, "--sigma must be nonnegative")
        sigma = float(args.sigma)
    else:
        sigma = estimate_sigma(probe)
    data = NoisySample(times=times, values=values, T=T, sigma=sigma)

    threads = _resolve_threads(args.threads)
    cfg = _estimator_config(args, threads)
    try:
        result = deconvolve(data, g, cfg)
    except EstimationError as exc:
        raise CliError(EXIT_ESTIMATOR, f"estimator: {exc}") from None
    except ValueError as exc:
        raise CliError(EXIT_BAD_INPUT, f"invalid parameter: {exc}") from None

    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "f_hat"])
        for t, v in zip(result.grid, result.f_hat):
            writer.writerow([_fmt(t), _fmt(v)])

    sidecar = _sidecar_document(args, data, g, result,
                                sigma_estimated=args.sigma is None)
    problems = check_schema(sidecar, load_sidecar_schema())
    if problems:
        raise RuntimeError("sidecar does not match its schema: " + problems[0])
    sidecar_path = args.sidecar or (args.output + ".json")
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _parse_cell(text: str) -> tuple[str, str, int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise CliError(
            EXIT_BAD_INPUT, "--cell must look like g2,f1,100,0 (kernel,target,n,i)"
        )
    gn, fn, n_str, i_str = parts
    try:
        n = int(n_str)
        i = int(i_str)
    except ValueError:
        raise CliError(EXIT_BAD_INPUT, "--cell n and i must be integers") from None
    if gn not in BUILTIN_G_NAMES or fn not in BUILTIN_F_NAMES:
        raise CliError(EXIT_BAD_KERNEL, f"unknown builtin pair {gn},{fn}")
    if not 0 <= i <= 4:
        raise CliError(EXIT_BAD_INPUT, "--cell noise index i must be in 0..4")
    if n < 10:
        raise CliError(EXIT_BAD_INPUT, "--cell n must be at least 10")
    return gn, fn, n, i


def _emit_data(path: str, cell: tuple[str, str, int, int], seed: int, T: float):
    """First-replication synthetic sample of a cell as a t,y CSV."""
    gn, fn, n, i = cell
    times = np.arange(1, n + 1) * (T / n)
    q = forward_convolve(builtin_g(gn), builtin_f(fn), times)
    y = q + ladder_sigma(gn, i) * standard_normals(seed, 0, n)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "y"])
        for t, v in zip(times, y):
            writer.writerow([_fmt(t), _fmt(v)])


def cmd_simulate(args) -> int:
    threads = _resolve_threads(args.threads)
    if args.runs < 1:
        raise CliError(EXIT_BAD_INPUT, "--runs must be at least 1")
    if args.cell is not None:
        cells = [_parse_cell(args.cell)]
    else:
        cells = table_cells()
    if args.emit_data and args.cell is None:
        raise CliError(EXIT_BAD_INPUT, "--emit-data requires --cell")

    config = _estimator_config(args, threads if len(cells) == 1 else 1)
    results = run_table(cells, runs=args.runs, seed=args.seed,
                        config=config, threads=threads)
    write_report_csv(args.output if args.output else sys.stdout, results)
    if args.json:
        write_report_json(args.json, results,
                          extra={"runs": args.runs, "seed": args.seed})
    if args.emit_data:
        _emit_data(args.emit_data, cells[0], args.seed, 10.0)
    return 0


def cmd_make_kernel(args) -> int:
    try:
        kern = make_boundary_kernel(args.L, args.j, args.rho)
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_BAD_KERNEL, f"kernel order: {exc}") from None
    payload = {
        "L": int(kern.L),
        "j": int(kern.j),
        "rho": float(args.rho),
        "support": [float(kern.support[0]), float(kern.support[1])],
        "degree": int(kern.degree),
        "coeffs": [float(c) for c in kern.coeffs],
        "norm2": float(kern.norm2),
    }
    if args.output:
        lo, hi = kern.support
        ts = np.linspace(lo, hi, 1001)
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "K"])
            for t, v in zip(ts, kern(ts)):
                writer.writerow([_fmt(t), _fmt(v)])
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0


def cmd_inspect_kernel(args) -> int:
    g = parse_kernel_spec(args.kernel)
    try:
        d = decompose(g)
    except ValueError as exc:
        raise CliError(EXIT_BAD_KERNEL, f"kernel spec: {exc}") from None
    out = sys.stdout
    out.write(f"r: {d.r}\n")
    out.write(f"B_r: {'%.12g' % d.B_r}\n")
    out.write(f"stable: {'yes' if g.stable else 'no'}\n")
    out.write("b: " + " ".join(
        f"b_{j}={'%.12g' % v}" for j, v in enumerate(d.b)
    ) + "\n")
    if d.poles:
        parts = [
            f"{'%.12g' % t.s.real}{'%+.12g' % t.s.imag}i (mult {t.alpha})"
            for t in d.poles
        ]
        out.write("poles: " + "; ".join(parts) + "\n")
    else:
        out.write("poles: none (no convolution term)\n")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_estimator_flags(sub, with_bandwidth: bool, with_trim: bool) -> None:
    sub.add_argument("--L", type=int, default=8,
                     help="kernel order (default 8)")
    sub.add_argument("--a", type=float, default=1.2,
                     help="bandwidth grid ratio (default 1.2)")
    sub.add_argument("--C", type=float, default=None,
                     help="override the adaptation constant (default: "
                          "kernel-norm scaled)")
    sub.add_argument("--threshold-mult", type=float, default=3.0,
                     dest="threshold_mult",
                     help="comparison threshold multiplier (default 3)")
    sub.add_argument("--grid-size", type=int, default=1024, dest="grid_size",
                     help="evaluation grid size (default 1024)")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: LAPDECONV_THREADS or 1)")
    if with_bandwidth:
        sub.add_argument("--bandwidth", default=None,
                         help="fixed bandwidth(s), scalar or comma list per "
                              "derivative order (skips adaptation)")
    if with_trim:
        sub.add_argument("--trim", type=float, default=0.1,
                         help="boundary trim fraction for risk summaries "
                              "(default 0.1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lapdeconv",
        description="Noisy convolution inversion with adaptive smoothing",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_dec = subs.add_parser("deconvolve", help="estimate f from a t,y sample")
    p_dec.add_argument("--input", required=True, help="sample CSV with header t,y")
    p_dec.add_argument("--kernel", required=True,
                       help="kernel spec: inline JSON or path to a JSON file")
    p_dec.add_argument("--output", required=True, help="output CSV path (t,f_hat)")
    p_dec.add_argument("--sidecar", default=None,
                       help="JSON sidecar path (default: <output>.json)")
    group = p_dec.add_mutually_exclusive_group(required=True)
    group.add_argument("--sigma", type=float, default=None,
                       help="known noise standard deviation")
    group.add_argument("--estimate-sigma", action="store_true",
                       dest="estimate_sigma",
                       help="estimate sigma from first differences")
    _add_estimator_flags(p_dec, with_bandwidth=True, with_trim=False)
    p_dec.set_defaults(func=cmd_deconvolve)

    p_sim = subs.add_parser("simulate", help="run benchmark cells")
    pick = p_sim.add_mutually_exclusive_group(required=True)
    pick.add_argument("--cell", default=None,
                      help="single cell g,f,n,i (e.g. g2,f1,100,0)")
    pick.add_argument("--full", action="store_true",
                      help="run the full benchmark grid")
    p_sim.add_argument("--runs", type=int, default=100,
                       help="replications per cell (default 100)")
    p_sim.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p_sim.add_argument("--output", default=None,
                       help="report CSV path (default: stdout)")
    p_sim.add_argument("--json", default=None, help="report JSON path")
    p_sim.add_argument("--emit-data", default=None, dest="emit_data",
                       help="write the first replication's t,y CSV "
                            "(requires --cell)")
    _add_estimator_flags(p_sim, with_bandwidth=True, with_trim=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_mk = subs.add_parser("make-kernel", help="construct a smoothing kernel")
    p_mk.add_argument("--L", type=int, required=True, help="kernel order")
    p_mk.add_argument("--j", type=int, required=True, help="derivative order")
    p_mk.add_argument("--rho", type=float, default=1.0,
                      help="boundary support parameter in (0, 1] (default 1)")
    p_mk.add_argument("--output", default=None,
                      help="CSV path for a 1001-point t,K profile")
    p_mk.add_argument("--json", default=None,
                      help="JSON path for the coefficients (default: stdout)")
    p_mk.set_defaults(func=cmd_make_kernel)

    p_ins = subs.add_parser("inspect-kernel",
                            help="print inversion constants of a kernel")
    p_ins.add_argument("--kernel", required=True,
                       help="kernel spec: inline JSON or path to a JSON file")
    p_ins.set_defaults(func=cmd_inspect_kernel)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"lapdeconv: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
