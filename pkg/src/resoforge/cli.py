"""Command-line front end.

Subcommands: sample, check-generic, cover classify|measure|raster, bezout,
normalize, standardize, report.  Reports are JSON (CSV for bulk samples and
rasters) with the invoking configuration echoed, so a run is reproducible
from its report.  Exit codes: 0 all hard checks passed, 1 an invariant
failed, 2 configuration/input error.  RESOFORGE_THREADS caps the Monte-Carlo
worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import __version__
from .cover import (
    CoveringParams,
    classify_batch,
    classify_point,
    derive_params,
    free_params,
    measure_R2,
    _sample_ball,
)
from .fourier import NotAGeneratorError, lacunary_potential, load_potential, save_potential, two_mode_potential
from .genericity import GenericityParams, check_membership, sample_product_measure
from .lieseries import NaturalHam, SmallDivisorError, lie_step_nonres, lie_step_res
from .standard_form import standardize, verify_standard
from .unimodular import NotAGeneratorError as UmNotAGenerator
from .unimodular import complete_to_sl, decoupling_matrix

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


def _parse_vector(text: str, dtype=float):
    try:
        return [dtype(part) for part in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc


def _load_params(path: str) -> CoveringParams:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read params file {path}: {exc}") from exc
    mode = doc.get("mode", "free")
    try:
        if mode == "paper-preset":
            return derive_params(
                int(doc["n"]), float(doc["s"]), float(doc["epsilon"]),
                int(doc["K0"]), int(doc["K"]),
            )
        if mode == "free":
            return free_params(
                int(doc["n"]), float(doc["s"]), float(doc["alpha"]),
                int(doc["K0"]), int(doc["K"]),
            )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid params file {path}: {exc}") from exc
    raise ConfigError(f"unknown params mode {mode!r}")


def _load_potential_arg(source: str):
    """A potential source: a JSON path or a preset name
    lacunary:n=2,s=1.0[,kmax=40] / two-mode:s=1.0 / random:n=2,s=1.0,kmax=20,seed=7."""
    if ":" in source and not source.endswith(".json"):
        name, _, rest = source.partition(":")
        kv = dict(part.split("=") for part in rest.split(",") if part)
        if name == "lacunary":
            s = float(kv.get("s", 1.0))
            f = lacunary_potential(int(kv.get("n", 2)), s, float(kv.get("kmax", 40)))
            return f, s
        if name == "two-mode":
            s = float(kv.get("s", 1.0))
            return two_mode_potential(s), s
        if name == "random":
            s = float(kv.get("s", 1.0))
            f = sample_product_measure(
                int(kv.get("n", 2)), s, float(kv.get("kmax", 20)),
                int(kv.get("seed", 0)),
            )
            return f, s
        raise ConfigError(f"unknown potential preset {name!r}")
    try:
        return load_potential(source)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load potential {source}: {exc}") from exc


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=1, default=str, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _report_skeleton(args: argparse.Namespace) -> dict:
    return {
        "version": __version__,
        "command": args.command,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }


# -- subcommand handlers ------------------------------------------------------

def cmd_sample(args) -> int:
    f = sample_product_measure(args.n, args.s, args.kmax, args.seed)
    save_potential(f, args.s, args.out)
    print(f"wrote {args.out} ({len(f.coeffs)} modes)")
    return EXIT_OK


def cmd_check_generic(args) -> int:
    f, s = _load_potential_arg(args.potential)
    params = GenericityParams(n=f.n, s=s, delta=args.delta, beta=args.beta,
                              K_max=args.kmax)
    report = check_membership(f, params, tol=args.tol)
    doc = _report_skeleton(args)
    doc["report"] = report.to_dict()
    _emit(doc, args.out)
    return EXIT_OK if report.in_class else EXIT_INVARIANT


def cmd_cover_classify(args) -> int:
    params = _load_params(args.params)
    y = _parse_vector(args.y)
    labels = classify_point(np.array(y), params)
    doc = _report_skeleton(args)
    doc["labels"] = [lab.to_dict() for lab in labels]
    doc["params"] = params.to_dict()
    _emit(doc, args.out)
    return EXIT_OK if labels else EXIT_INVARIANT


def cmd_cover_measure(args) -> int:
    params = _load_params(args.params)
    est = measure_R2(params, args.samples, args.seed)
    if args.csv:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
        m = min(args.samples, args.csv_rows)
        Y = _sample_ball(rng, m, params.n)
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["sample_index"] + [f"y{i+1}" for i in range(params.n)]
                + ["label_kind", "k", "l"]
            )
            for i in range(m):
                lab = classify_point(Y[i], params, all_pairs=False)[0]
                writer.writerow([
                    i, *Y[i], lab.kind,
                    " ".join(map(str, lab.k)) if lab.k else "",
                    " ".join(map(str, lab.l)) if lab.l else "",
                ])
    doc = _report_skeleton(args)
    doc["estimate"] = est.to_dict()
    _emit(doc, args.out)
    return EXIT_OK


def cmd_cover_raster(args) -> int:
    params = _load_params(args.params)
    if params.n != 2:
        raise ConfigError("raster export is two-dimensional")
    g = args.grid
    axis = np.linspace(-0.99, 0.99, g)
    with open(args.csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y1", "y2", "region_code"])
        for y1 in axis:
            row_pts = np.column_stack([np.full(g, y1), axis])
            inside = np.linalg.norm(row_pts, axis=1) < 1.0
            codes = np.full(g, -1, dtype=int)
            if np.any(inside):
                batch = classify_batch(row_pts[inside], params)
                codes[inside] = batch.codes
            for y2, code in zip(axis, codes):
                if code >= 0:
                    writer.writerow([f"{y1:.6f}", f"{y2:.6f}", int(code)])
    print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_bezout(args) -> int:
    k = tuple(_parse_vector(args.k, int))
    um = complete_to_sl(k)
    dm = decoupling_matrix(um)
    doc = _report_skeleton(args)
    doc.update(um.to_dict())
    doc["U"] = dm.to_dict()
    _emit(doc, args.out)
    return EXIT_OK if um.bounds_report()["bounds_ok"] else EXIT_INVARIANT


def cmd_normalize(args) -> int:
    f, s = _load_potential_arg(args.potential)
    if args.alpha is not None:
        params = free_params(f.n, s, args.alpha, args.k0, args.K)
    else:
        params = derive_params(f.n, s, args.eps, args.k0, args.K)
    y0 = np.array(_parse_vector(args.base_point))
    ham = NaturalHam(f.n, args.eps, f)
    if args.resonant_k:
        k = tuple(_parse_vector(args.resonant_k, int))
        nf = lie_step_res(ham, k, params, y0, order=args.order,
                          max_degree=args.degree)
    else:
        nf = lie_step_nonres(ham, params, y0, order=args.order,
                             max_degree=args.degree)
    doc = _report_skeleton(args)
    doc["normal_form"] = nf.to_dict()
    doc["params"] = params.to_dict()
    band_max = nf.band_coefficient_maxima()
    doc["band_coefficient_max"] = band_max
    _emit(doc, args.out)
    return EXIT_OK if band_max == 0.0 else EXIT_INVARIANT


def cmd_standardize(args) -> int:
    f, s = _load_potential_arg(args.potential)
    params = _load_params(args.params)
    k = tuple(_parse_vector(args.k, int))
    y0 = np.array(_parse_vector(args.y0))
    sf = standardize(f, s, args.eps, k, params, y0, beta=args.beta,
                     delta=args.delta, order=args.order)
    phat0 = sf.fp.base_phat
    rng = np.random.default_rng(0)
    samples = phat0[None, :] + rng.uniform(-sf.chars.r, sf.chars.r,
                                           (8, f.n - 1))
    report = verify_standard(sf, samples)
    theta = np.linspace(0.0, 2 * np.pi, 65)[:-1]
    doc = _report_skeleton(args)
    doc["characteristics"] = sf.chars.to_dict()
    doc["kappa"] = sf.chars.kappa
    doc["flags"] = report.flags
    doc["fixed_point"] = {
        "residual": sf.fp.residual,
        "contraction": sf.fp.contraction,
        "hypothesis_ok": sf.fp.hypothesis_ok,
        "p_bound_ok": sf.fp.pitale_ok,
    }
    doc["grids"] = {
        "q1": theta.tolist(),
        "G_bar": [sf.G_bar.evaluate(t).real for t in theta],
        "G": [sf.G(phat0, t) for t in theta],
        "nu": [sf.nu(0.0, phat0, t) for t in theta],
    }
    # hard invariant: the Taylor reduction identity at a sample point
    ident = sf.check_reduction_identity(
        [np.concatenate([[0.5 * sf.chars.r], phat0])], [1.0]
    )
    doc["reduction_identity_residual"] = ident
    _emit(doc, args.out)
    return EXIT_OK if ident < 1e-8 else EXIT_INVARIANT


def cmd_report(args) -> int:
    from .acceptance import run_all

    results = run_all(quick=args.quick)
    doc = _report_skeleton(args)
    doc["results"] = [r.to_dict() for r in results]
    doc["all_passed"] = all(r.passed for r in results)
    if args.out:
        _emit(doc, args.out)
    print()
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return EXIT_OK if doc["all_passed"] else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resoforge",
        description="genericity certificates, resonance coverings and "
                    "standard-form reductions for natural Hamiltonians",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a potential from the product measure")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--kmax", type=float, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="potential.json")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("check-generic", help="class membership over a finite window")
    p.add_argument("--potential", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--kmax", type=float, default=80)
    p.add_argument("--tol", type=float, default=1e-12,
                   help="critical-point root tolerance override")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_generic)

    p = sub.add_parser("cover", help="resonance-zone covering")
    cover_sub = p.add_subparsers(dest="cover_command", required=True)
    pc = cover_sub.add_parser("classify")
    pc.add_argument("--y", required=True)
    pc.add_argument("--params", required=True)
    pc.add_argument("--out", default=None)
    pc.set_defaults(func=cmd_cover_classify)
    pm = cover_sub.add_parser("measure")
    pm.add_argument("--params", required=True)
    pm.add_argument("--samples", type=int, default=10 ** 6)
    pm.add_argument("--seed", type=int, default=1)
    pm.add_argument("--csv", default=None, help="per-sample label CSV")
    pm.add_argument("--csv-rows", type=int, default=10 ** 4)
    pm.add_argument("--out", default=None)
    pm.set_defaults(func=cmd_cover_measure)
    pr = cover_sub.add_parser("raster")
    pr.add_argument("--params", required=True)
    pr.add_argument("--grid", type=int, default=256)
    pr.add_argument("--csv", required=True)
    pr.set_defaults(func=cmd_cover_raster)

    p = sub.add_parser("bezout", help="SL(n,Z) completion and decoupling matrix")
    p.add_argument("--k", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bezout)

    p = sub.add_parser("normalize", help="finite-order averaging normal form")
    p.add_argument("--potential", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--k0", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--alpha", type=float, default=None,
                   help="free-mode divisor threshold (omit for paper preset)")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--base-point", required=True)
    p.add_argument("--resonant-k", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("standardize", help="reduce a secular Hamiltonian to standard form")
    p.add_argument("--potential", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--k", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--y0", required=True, help="averaging base point on the resonance")
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_standardize)

    p = sub.add_parser("report", help="run the acceptance battery")
    p.add_argument("--quick", action="store_true",
                   help="10x smaller Monte-Carlo sizes, widened ratio bands")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SmallDivisorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, NotAGeneratorError, UmNotAGenerator, ValueError) as exc:
        # malformed inputs, non-generator vectors, cutoff ordering, points
        # outside the domain: all configuration-level failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
