"""Command-line front end.

Subcommands: ``bounds`` (the sandwich for one instance), ``region`` (simplex
sweep to CSV), ``compare`` (reference-bound chains), ``verify`` (Monte-Carlo
check of the sandwich), ``qubit`` (closed form vs. solver cross-check), and
``lattice`` (meet/join/flatten on raw vectors).

Outputs are deterministic byte for byte: floats are serialized with 12
significant digits in JSON and 9 in CSV, keys are sorted, and random draws
derive per-index seeds, so the parallelism degree never changes a byte.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cip, quantum, regions, sdp
from .majorization import (direct_product, direct_sum, flatten, join, meet,
                           prob_vector, sort_descending, weakly_majorized_by,
                           InvalidVectorError)
from .measures import parse_measure
from .quantum import MeasurementBasis

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

JSON_DIGITS = 12
CSV_DIGITS = 9


class CliInputError(Exception):
    """Invalid instance file, flag value, or missing field (exit 2)."""


# ---------------------------------------------------------------------------
# instance files
# ---------------------------------------------------------------------------

@dataclass
class Instance:
    dimension: int
    pre: MeasurementBasis
    posts: list[MeasurementBasis]
    p: np.ndarray | None
    rho: np.ndarray | None
    spectrum: np.ndarray | None
    labels: dict


def _complex_array(data, what: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CliInputError(f"field {what!r} is not numeric: {exc}") from None
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise CliInputError(f"field {what!r} must hold [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def load_instance(path: str | Path) -> Instance:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliInputError(f"cannot read instance file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliInputError(f"instance file is not valid JSON: {exc}") from None
    for key in ("dimension", "M"):
        if key not in raw:
            raise CliInputError(f"instance is missing the field {key!r}")
    if "N" not in raw and "N_list" not in raw:
        raise CliInputError("instance is missing the field 'N' (or 'N_list')")
    n = int(raw["dimension"])
    labels = raw.get("labels", {})

    def build_basis(data, name):
        vecs = _complex_array(data, name)
        if vecs.shape != (n, n):
            raise CliInputError(f"field {name!r} must hold {n} vectors of {n} amplitudes")
        try:
            return quantum.basis(vecs, label=str(labels.get(name, name)))
        except quantum.QuantumError as exc:
            raise CliInputError(f"field {name!r}: {exc}") from None

    pre = build_basis(raw["M"], "M")
    if "N_list" in raw:
        posts = [build_basis(d, f"N_list[{i}]") for i, d in enumerate(raw["N_list"])]
        if not posts:
            raise CliInputError("field 'N_list' must not be empty")
    else:
        posts = [build_basis(raw["N"], "N")]

    p = None
    if "p" in raw:
        try:
            p = prob_vector(raw["p"])
        except InvalidVectorError as exc:
            raise CliInputError(f"field 'p': {exc}") from None
        if p.size != n:
            raise CliInputError(f"field 'p' has length {p.size}, expected {n}")
    rho = None
    if "rho" in raw:
        try:
            rho = quantum.density_matrix(_complex_array(raw["rho"], "rho"))
        except quantum.QuantumError as exc:
            raise CliInputError(f"field 'rho': {exc}") from None
        if rho.shape != (n, n):
            raise CliInputError(f"field 'rho' has shape {rho.shape}, expected ({n}, {n})")
    spectrum = None
    if "spectrum" in raw:
        spectrum = np.asarray(raw["spectrum"], dtype=np.float64)
        if spectrum.shape != (n,):
            raise CliInputError(f"field 'spectrum' has length {spectrum.size}, expected {n}")
    return Instance(dimension=n, pre=pre, posts=posts, p=p, rho=rho,
                    spectrum=spectrum, labels=labels)


# ---------------------------------------------------------------------------
# deterministic emission
# ---------------------------------------------------------------------------

def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.{JSON_DIGITS}g}") + 0.0  # +0.0 drops negative zero
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(_round_floats(payload), sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def emit_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt_csv(x: float) -> str:
    return f"{x + 0.0:.{CSV_DIGITS}g}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _solver_options(args) -> cip.SolverOptions:
    return cip.SolverOptions(tol_gap=args.tol_gap, tol_feas=args.tol_feas)


def _pick_post(inst: Instance, args) -> MeasurementBasis:
    idx = getattr(args, "post", 0)
    if not 0 <= idx < len(inst.posts):
        raise CliInputError(f"--post {idx} out of range; instance has {len(inst.posts)} post tests")
    return inst.posts[idx]


def cmd_bounds(args) -> int:
    inst = load_instance(args.input)
    if inst.p is None:
        raise CliInputError("instance is missing the field 'p' (required by 'bounds')")
    post = _pick_post(inst, args)
    bs = cip.bounds(inst.pre, inst.p, post, options=_solver_options(args))
    payload = bs.to_json_dict()
    if inst.labels:
        payload["labels"] = inst.labels
    emit_json(payload, args.out)
    return EXIT_OK


def cmd_region(args) -> int:
    inst = load_instance(args.input)
    post = _pick_post(inst, args)
    f = parse_measure(args.f)
    g = parse_measure(args.g)
    grid = regions.SimplexGrid(dimension=inst.dimension, resolution=args.grid)
    result = regions.sweep_region(inst.pre, post, f, g, grid,
                                  method=args.method, options=_solver_options(args),
                                  parallel=args.parallel)
    if result.failures:
        raise sdp.SdpError(f"{len(result.failures)} sweep point(s) failed; "
                           f"first: index {result.failures[0][0]}: {result.failures[0][1]}")
    n = inst.dimension
    header = ",".join([f"p_{i + 1}" for i in range(n)] + ["f_value", "g_low", "g_high"])
    lines = [header]
    for s in result.samples:
        cols = [_fmt_csv(v) for v in s.p] + [_fmt_csv(s.f_value), _fmt_csv(s.g_low),
                                             _fmt_csv(s.g_high)]
        lines.append(",".join(cols))
    emit_text("\n".join(lines) + "\n", args.out)
    return EXIT_OK


_CHAIN_TOL = 1e-8


def _chain_verdicts(named: list[tuple[str, np.ndarray]]) -> list[dict]:
    out = []
    for (name_a, vec_a), (name_b, vec_b) in zip(named, named[1:]):
        out.append({"left": name_a, "right": name_b,
                    "holds": weakly_majorized_by(vec_a, vec_b, tol=_CHAIN_TOL)})
    return out


def cmd_compare(args) -> int:
    inst = load_instance(args.input)
    if inst.p is None:
        raise CliInputError("instance is missing the field 'p' (required by 'compare')")
    post = _pick_post(inst, args)
    spectrum = inst.spectrum
    if spectrum is None and inst.rho is not None:
        spectrum = np.sort(np.linalg.eigvalsh(inst.rho).real)[::-1]
        np.clip(spectrum, 0.0, None, out=spectrum)
        spectrum /= spectrum.sum()
    if args.spectrum and spectrum is None:
        raise CliInputError("spectrum comparison requested but the instance has "
                            "neither 'spectrum' nor 'rho'")
    base = cip.baselines(inst.pre, post, spectrum=spectrum)
    bs = cip.bounds(inst.pre, inst.p, post, options=_solver_options(args))
    n = inst.dimension
    u, ell = cip.trivial_bounds(n)

    sum_chain = [("u(+)u", direct_sum(u, u)), ("p(+)r", direct_sum(bs.p, bs.r))]
    prod_chain = [("u(x)u", direct_product(u, u)), ("p(x)r", direct_product(bs.p, bs.r))]
    q = None
    if inst.rho is not None:
        q = quantum.born_probabilities(inst.rho, post)
        sum_chain.append(("p(+)q", direct_sum(bs.p, q)))
        prod_chain.append(("p(x)q", direct_product(bs.p, q)))
    sum_chain += [("p(+)t", direct_sum(bs.p, bs.t)), ("w_plus", base.w_plus),
                  ("l(+)l", direct_sum(ell, ell))]
    prod_chain += [("p(x)t", direct_product(bs.p, bs.t)), ("w_times", base.w_times),
                   ("l(x)l", direct_product(ell, ell))]
    verdicts = _chain_verdicts(sum_chain) + _chain_verdicts(prod_chain)
    if base.w_plus_rho is not None:
        verdicts.append({"left": "p(+)t", "right": "w_plus_rho",
                         "holds": weakly_majorized_by(direct_sum(bs.p, bs.t),
                                                      base.w_plus_rho, tol=_CHAIN_TOL)})
    payload = {
        "p": bs.p.tolist(),
        "r": bs.r.tolist(),
        "t": bs.t.tolist(),
        "q": None if q is None else q.tolist(),
        "w_plus": base.w_plus.tolist(),
        "w_times": base.w_times.tolist(),
        "w_plus_rho": None if base.w_plus_rho is None else base.w_plus_rho.tolist(),
        "mu_constant": base.mu_constant,
        "p_plus_t": direct_sum(bs.p, bs.t).tolist(),
        "verdicts": verdicts,
        "all_hold": all(v["holds"] for v in verdicts),
    }
    emit_json(payload, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = load_instance(args.input)
    if inst.p is None:
        raise CliInputError("instance is missing the field 'p' (required by 'verify')")
    if args.samples < 1:
        raise CliInputError(f"--samples must be >= 1, got {args.samples}")
    post = _pick_post(inst, args)
    bs = cip.bounds(inst.pre, inst.p, post, options=_solver_options(args))
    spec = quantum.FeasibleSetSpec(inst.pre, inst.p)
    cum_r = np.cumsum(bs.r)
    cum_t = np.cumsum(bs.t)
    violations = 0
    worst_low = math.inf   # min over samples of cum(q) - cum(r)
    worst_high = math.inf  # min over samples of cum(t) - cum(q)
    for i in range(args.samples):
        rho = quantum.sample_feasible_state(spec, np.random.SeedSequence(args.seed, spawn_key=(i,)))
        q = quantum.born_probabilities(rho, post)
        cq = np.cumsum(sort_descending(q))
        low = float((cq - cum_r).min())
        high = float((cum_t - cq).min())
        worst_low = min(worst_low, low)
        worst_high = min(worst_high, high)
        if low < -1e-8 or high < -1e-8:
            violations += 1
    payload = {
        "samples": args.samples,
        "seed": args.seed,
        "violations": violations,
        "worst_margin_lower": worst_low,
        "worst_margin_upper": worst_high,
        "r": bs.r.tolist(),
        "t": bs.t.tolist(),
    }
    emit_json(payload, args.out)
    return EXIT_OK


def cmd_qubit(args) -> int:
    lam, theta = args.lam, args.theta
    try:
        r1, s1 = cip.qubit_closed_form(lam, theta)
    except ValueError as exc:
        raise CliInputError(str(exc)) from None
    pre = quantum.basis(np.eye(2), label="computational")
    post = quantum.basis(np.array([[math.cos(theta), -math.sin(theta)],
                                   [math.sin(theta), math.cos(theta)]]), label="rotated")
    spec = quantum.FeasibleSetSpec(pre, np.array([lam, 1.0 - lam]))
    opts = cip.SolverOptions(tol_gap=args.tol_gap, tol_feas=args.tol_feas)
    s1_sdp = max(sdp.max_expectation(spec, post.projector(0), **opts.kwargs()).value,
                 sdp.max_expectation(spec, post.projector(1), **opts.kwargs()).value)
    r1_sdp = sdp.min_max_gamma(spec, post, 1, **opts.kwargs()).value
    payload = {
        "lam": lam,
        "theta": theta,
        "closed_form": {"r1": r1, "s1": s1},
        "sdp": {"r1": r1_sdp, "s1": s1_sdp},
        "abs_difference": {"r1": abs(r1 - r1_sdp), "s1": abs(s1 - s1_sdp)},
    }
    emit_json(payload, args.out)
    return EXIT_OK


def _parse_vector(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError:
        raise CliInputError(f"cannot parse {what!r} as a comma-separated vector") from None


def cmd_lattice(args) -> int:
    x = _parse_vector(args.x, "--x")
    result: np.ndarray
    try:
        if args.op == "flatten":
            result = flatten(x)
        else:
            if args.y is None:
                raise CliInputError(f"--y is required for op {args.op!r}")
            y = _parse_vector(args.y, "--y")
            result = meet(x, y) if args.op == "meet" else join(x, y)
    except InvalidVectorError as exc:
        raise CliInputError(str(exc)) from None
    payload = {"op": args.op, "x": x.tolist(),
               "y": None if args.y is None else _parse_vector(args.y, "--y").tolist(),
               "result": result.tolist()}
    emit_json(payload, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=42, help="base random seed")
    common.add_argument("--grid", type=int, default=200, help="simplex grid resolution")
    common.add_argument("--tol-gap", dest="tol_gap", type=float, default=sdp.TOL_GAP)
    common.add_argument("--tol-feas", dest="tol_feas", type=float, default=sdp.TOL_FEAS)
    common.add_argument("--parallel", type=int, default=1, help="worker threads for sweeps")

    parser = argparse.ArgumentParser(
        prog="cip",
        description="Majorization bounds and uncertainty regions for "
                    "conditioned measurement statistics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", parents=[common],
                              help="lower/upper bound vectors for one instance")
    p_bounds.add_argument("--input", required=True)
    p_bounds.add_argument("--post", type=int, default=0, help="index into N_list")
    p_bounds.set_defaults(func=cmd_bounds)

    p_region = sub.add_parser("region", parents=[common], help="simplex sweep to CSV")
    p_region.add_argument("--input", required=True)
    p_region.add_argument("--post", type=int, default=0)
    p_region.add_argument("--f", default="renyi:1", help="pre-test measure spec")
    p_region.add_argument("--g", default="renyi:1", help="post-test measure spec")
    p_region.add_argument("--method", choices=("auto", "closed", "sdp"), default="auto")
    p_region.set_defaults(func=cmd_region)

    p_compare = sub.add_parser("compare", parents=[common],
                               help="reference bounds and majorization chains")
    p_compare.add_argument("--input", required=True)
    p_compare.add_argument("--post", type=int, default=0)
    p_compare.add_argument("--spectrum", action="store_true",
                           help="require the spectrum-aware baseline")
    p_compare.set_defaults(func=cmd_compare)

    p_verify = sub.add_parser("verify", parents=[common],
                              help="Monte-Carlo check of the sandwich")
    p_verify.add_argument("--input", required=True)
    p_verify.add_argument("--post", type=int, default=0)
    p_verify.add_argument("--samples", type=int, default=1000)
    p_verify.set_defaults(func=cmd_verify)

    p_qubit = sub.add_parser("qubit", parents=[common],
                             help="closed form vs. solver on the canonical qubit pair")
    p_qubit.add_argument("--lam", type=float, required=True)
    p_qubit.add_argument("--theta", type=float, required=True)
    p_qubit.set_defaults(func=cmd_qubit)

    p_lattice = sub.add_parser("lattice", parents=[common],
                               help="meet/join/flatten on raw vectors")
    p_lattice.add_argument("--op", choices=("meet", "join", "flatten"), required=True)
    p_lattice.add_argument("--x", required=True, help="comma-separated vector")
    p_lattice.add_argument("--y", default=None, help="comma-separated vector")
    p_lattice.set_defaults(func=cmd_lattice)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (quantum.QuantumError, InvalidVectorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (sdp.SdpError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
