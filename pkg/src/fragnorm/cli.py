"""Scenario runner: ``fragnorm run | list-scenarios | validate``.

Exit codes: 0 every verdict PASS, 1 some FAIL, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import scenarios
from .calculus import (
    essential_claim_check,
    homogenized_psi,
    psi_integral,
    relative_defect_audit,
    stable_norm_report,
)
from .dynamics import (
    BallMap,
    MapWord,
    TubeTwist,
    bell,
    bell_shear,
    make_push_map,
    trajectory,
    y0_solve,
)
from .fragmentation import FragmentationInfeasible, fragment_tube_twist, verify_fragmentation
from .plane import GeometryError, loop_class

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
Y0_CLOSED_FORM = math.sqrt(2 - math.sqrt(3))


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "PASS" if x else "FAIL"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


@dataclasses.dataclass
class Outcome:
    passed: bool
    columns: list
    rows: list
    summary: list  # lines for stdout
    header: dict  # tolerances and constants written as CSV comments


def write_csv(path: Path, out: Outcome) -> None:
    buf = io.StringIO()
    for k, v in out.header.items():
        buf.write(f"# {k}: {fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(out.columns)
    for row in out.rows:
        w.writerow([fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------- experiments


def _psi_header(sc):
    return {
        "pattern": str(sc.psi.pattern),
        "defect_bound": sc.psi.defect_bound,
        "integrand": "homogenized" if sc.quad.homogenized_integrand else "raw",
        "quadrature": f"{sc.quad.mode} resolution={sc.quad.resolution} samples={sc.quad.samples} seed={sc.quad.seed}",
    }


def _single_twist(f: MapWord):
    if len(f) != 1 or not isinstance(f.factors[0][0], TubeTwist):
        raise ValueError("this experiment needs a map made of one tube twist")
    return f.factors[0]


def run_push_value(sc) -> Outcome:
    f = sc.maps[sc.params["map"]]
    twist, e = _single_twist(f)
    # loop class of a core point gives the expected integrand value
    lo, hi = twist.core_radii
    x = twist.center + 0.5 * (lo + hi) * np.array([math.cos(1.0), math.sin(1.0)])
    tr = trajectory(f, x, sc.plane)
    cls = loop_class(sc.plane, x, tr, tr[-1])
    per_core = sc.psi.stable_value(cls)
    val = psi_integral(f, sc.psi, sc.plane, sc.quad)
    expected = per_core * twist.core_measure
    slack = abs(per_core) * twist.peripheral_measure + 2 * val.statistical_error
    dev = abs(val.value - expected)
    ok = dev <= slack
    rows = [
        ["psi", val.value],
        ["quadrature_error", val.statistical_error],
        ["core_class", str(cls)],
        ["core_value", per_core],
        ["core_measure", twist.core_measure],
        ["peripheral_measure", twist.peripheral_measure],
        ["expected", expected],
        ["deviation", dev],
        ["allowed", slack],
        ["nudged_loops", val.nudges],
        ["verdict", ok],
    ]
    summary = [
        f"Psi(f) = {fmt(val.value)} +- {fmt(val.statistical_error)}  ({val.note})",
        f"core class {cls}, value {fmt(per_core)} x core measure {fmt(twist.core_measure)} = {fmt(expected)}",
        f"|deviation| {fmt(dev)} <= {fmt(slack)}: {fmt(ok)}",
    ]
    return Outcome(ok, ["quantity", "value"], rows, summary, _psi_header(sc))


def run_stable_norm(sc) -> Outcome:
    f = sc.maps[sc.params["map"]]
    rep = stable_norm_report(f, sc.psi, sc.plane, sc.params["k_max"], sc.quad)
    rows = [[r.k, r.psi_power, r.psi_power / r.k, r.lower_bound, r.upper_bound, r.ratio] for r in rep.rows]
    ok = rep.consistent and rep.rate > 0
    header = _psi_header(sc) | {
        "stable_lower_rate": rep.rate,
        "homogenized_psi": rep.psi_bar.value,
        "quadrature_error": rep.psi_bar.statistical_error,
        "truncation_error": rep.psi_bar.truncation_error,
        "upper_bounds": rep.upper_note,
    }
    summary = [
        f"homogenized Psi = {fmt(rep.psi_bar.value)} (quadrature err {fmt(rep.psi_bar.statistical_error)}, truncation {fmt(rep.psi_bar.truncation_error)})",
        f"certified stable-norm rate >= {fmt(rep.rate)} (fitted slope {fmt(rep.fitted_slope())})",
        f"upper bounds: {rep.upper_note}",
        f"lower <= upper where certified, rate > 0: {fmt(ok)}",
    ]
    return Outcome(ok, ["k", "psi_power", "psi_power_over_k", "lower", "upper", "ratio"], rows, summary, header)


def _random_factor(rng, M):
    kind = rng.integers(4)
    turns = int(rng.choice([-1, 1]))
    if M.rank >= 2 and kind < 3:
        enclose = [[1], [2], [1, 2]][kind]
    elif kind < 3:
        enclose = [1]
    else:
        c = M.punctures.mean(axis=0) + [rng.uniform(-2, 2), rng.uniform(1.5, 3.0)]
        return BallMap(c, rng.uniform(0.2, 0.5), rng.uniform(-1, 1))
    for _ in range(20):
        try:
            return make_push_map(M, enclose, rng.uniform(1.0, 6.0), rng.uniform(0.6, 0.95), turns=turns)
        except (GeometryError, ValueError):
            continue
    return make_push_map(M, [1], 1.0, 0.9, turns=turns)


def random_composition(rng, M, max_factors=3) -> MapWord:
    n = int(rng.integers(1, max_factors + 1))
    return MapWord(tuple((_random_factor(rng, M), int(rng.choice([1, -1]))) for _ in range(n)))


def run_defect_audit(sc) -> Outcome:
    pairs = [(a, sc.maps[a], b, sc.maps[b]) for a, b in sc.params.get("pairs", [])]
    rng = np.random.default_rng(sc.params.get("seed", sc.quad.seed))
    for i in range(sc.params.get("random_pairs", 0)):
        mf = sc.params.get("max_factors", 3)
        pairs.append((f"random{i}f", random_composition(rng, sc.plane, mf), f"random{i}g", random_composition(rng, sc.plane, mf)))
    rows, ok = [], True
    for nf, f, ng, g in pairs:
        a = relative_defect_audit(f, g, sc.psi, sc.plane, sc.quad)
        ok &= a.passed
        rows.append([nf, ng, a.delta, a.mu_U, a.quadrature_error, a.bound, a.margin, a.upper_f, a.upper_g, a.passed])
    summary = [f"{sum(r[-1] for r in rows)}/{len(rows)} pairs within D*mu(U) + 3*error"]
    header = _psi_header(sc) | {"tolerance": "|delta| <= defect_bound*mu_U + 3*quadrature_error"}
    cols = ["f", "g", "delta", "mu_U", "quadrature_error", "bound", "margin", "upper_f", "upper_g", "verdict"]
    return Outcome(ok, cols, rows, summary, header)


def run_essential_claim(sc) -> Outcome:
    fa, fb = sc.maps[sc.params["alpha"]], sc.maps[sc.params["beta"]]
    r = essential_claim_check(fa, fb, sc.psi, sc.plane, sc.quad, k_max=sc.params.get("k_max", 8))
    ha, hab, hb = r.values if r.values else (None, None, None)
    rows = [
        ["hpsi_alpha", ha.value if ha else 0.0],
        ["hpsi_alpha_beta", hab.value if hab else 0.0],
        ["hpsi_beta", hb.value if hb else 0.0],
        ["combination", r.combination],
        ["gap", r.gap],
        ["support_overlap", r.overlap],
        ["delta_hat", r.delta_hat],
        ["threshold", r.threshold],
        ["quadrature_error", r.error],
        ["margin", r.margin],
        ["verdict", r.passed],
    ]
    summary = [
        f"combination {fmt(r.combination)} vs gap*overlap {fmt(r.gap * r.overlap)} (delta_hat {fmt(r.delta_hat)})",
        f"margin over quadrature error {fmt(r.margin)}: {fmt(r.passed)}",
    ]
    if r.degenerate:
        summary.append("degenerate: one of the maps is the identity")
    return Outcome(r.passed, ["quantity", "value"], rows, summary, _psi_header(sc))


def run_hamiltonian_profile(sc) -> Outcome:
    tol = sc.params.get("tolerance", 1e-10)
    n = sc.params.get("samples", 21)
    y0 = y0_solve(tol)
    ok = abs(y0 - Y0_CLOSED_FORM) <= tol
    ys = np.linspace(-1, 1, n)
    rows = [[y, bell(y), bell_shear(y), int(abs(y) < y0)] for y in ys]
    summary = [f"y0 = {y0:.10f} (closed form {Y0_CLOSED_FORM:.10f}, |diff| {fmt(abs(y0 - Y0_CLOSED_FORM))} <= {tol:g}: {fmt(ok)})"]
    summary += [f"  y={fmt(y):>16}  f+y f'={fmt(bell_shear(y))}" for y in ys]
    header = {"y0": y0, "closed_form": Y0_CLOSED_FORM, "tolerance": tol}
    return Outcome(ok, ["y", "f", "f_plus_y_fprime", "inside"], rows, summary, header)


def run_fragment_verify(sc) -> Outcome:
    f = sc.maps[sc.params["map"]]
    if len(f) != 1:
        raise ValueError("fragment-verify needs a map made of one primitive")
    prim = f.factors[0][0]
    budget = sc.params.get("max_piece_measure", 1.0)
    tol = sc.params.get("tolerance", 1e-9)
    header = {"max_piece_measure": budget, "tolerance": tol}
    try:
        pieces = fragment_tube_twist(prim, budget, sc.plane)
    except FragmentationInfeasible as exc:
        rows = [["pieces", None], ["infeasible", str(exc)], ["verdict", False]]
        return Outcome(False, ["quantity", "value"], rows, [f"no fragmentation: {exc}"], header)
    chk = verify_fragmentation(prim, pieces, sc.params.get("samples", 10_000), sc.quad.seed, tol, budget)
    ok = chk.passed
    rows = [["pieces", chk.n_pieces], ["max_deviation", chk.max_deviation], ["max_piece_measure", chk.max_piece_measure]]
    summary = [f"{chk.n_pieces} pieces, sup deviation {fmt(chk.max_deviation)}, largest piece {fmt(chk.max_piece_measure)}"]
    if sc.params.get("check_pieces", False) and sc.psi is not None:
        k = sc.params.get("k_max", 8)
        worst = 0.0
        distinct = list({id(p): p for p in pieces}.values())
        for p in distinct:
            hp = homogenized_psi(MapWord.of(p), sc.psi, sc.plane, k, sc.quad)
            good = abs(hp.value) <= 2 * hp.statistical_error
            worst = max(worst, abs(hp.value))
            ok &= good
        rows.append(["distinct_pieces_checked", len(distinct)])
        rows.append(["max_abs_hpsi_piece", worst])
        summary.append(f"homogenized Psi of {len(distinct)} distinct pieces: max |value| {fmt(worst)}")
        header |= _psi_header(sc)
    rows.append(["verdict", ok])
    summary.append(f"verdict: {fmt(ok)}")
    return Outcome(ok, ["quantity", "value"], rows, summary, header)


RUNNERS = {
    "push-value": run_push_value,
    "stable-norm": run_stable_norm,
    "defect-audit": run_defect_audit,
    "essential-claim": run_essential_claim,
    "hamiltonian-profile": run_hamiltonian_profile,
    "fragment-verify": run_fragment_verify,
}


def apply_overrides(sc, seed=None, threads=None, resolution=None):
    q = sc.quad
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if threads is not None:
        changes["threads"] = threads
    if resolution is not None:
        changes["resolution"] = resolution
    if changes:
        sc.quad = dataclasses.replace(q, **changes)
    return sc


def run_scenario(sc, out_dir: Path) -> tuple[Outcome, Path]:
    out = RUNNERS[sc.kind](sc)
    path = Path(out_dir) / sc.output
    write_csv(path, out)
    return out, path


# ---------------------------------------------------------------- argparse


def _resolve(arg: str) -> str:
    p = Path(arg)
    if p.exists():
        return str(p)
    names = dict(scenarios.bundled())
    if arg in names:
        return names[arg]
    raise FileNotFoundError(f"no scenario file or bundled scenario named {arg!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fragnorm", description="Reproducible fragmentation-norm experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run scenario files or bundled scenario names")
    run.add_argument("scenarios", nargs="+")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int)
    run.add_argument("--out-dir", default="out")
    run.add_argument("--resolution-override", type=int)
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    val = sub.add_parser("validate", help="parse and validate scenario files")
    val.add_argument("scenarios", nargs="+")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS

    if args.command == "list-scenarios":
        for name, path in scenarios.bundled():
            sc = scenarios.load(path)
            print(f"{name}\t{sc.kind}\t{sc.description}")
        return EXIT_PASS

    loaded = []
    for arg in args.scenarios:
        try:
            loaded.append(scenarios.load(_resolve(arg)))
        except (scenarios.ScenarioError, FileNotFoundError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if args.command == "validate":
        for sc in loaded:
            print(f"{sc.source}: ok ({sc.kind})")
        return EXIT_PASS

    if args.threads is not None and args.threads < 1 or args.resolution_override is not None and args.resolution_override < 1:
        print("error: --threads and --resolution-override must be positive", file=sys.stderr)
        return EXIT_USAGE
    status = EXIT_PASS
    for sc in loaded:
        apply_overrides(sc, args.seed, args.threads, args.resolution_override)
        try:
            out, path = run_scenario(sc, Path(args.out_dir))
        except ValueError as exc:
            print(f"error: {sc.source}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"== {sc.name} ({sc.kind})")
        for k, v in out.header.items():
            print(f"   {k}: {fmt(v)}")
        for line in out.summary:
            print(line)
        print(f"-> {path}  [{fmt(out.passed)}]")
        if not out.passed:
            status = EXIT_FAIL
    return status


if __name__ == "__main__":
    sys.exit(main())
