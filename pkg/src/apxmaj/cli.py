"""Command-line entry point.

Subcommands: compile (formula -> recipe + ledger + error table), synth
(plan/synthesize approximate-majority circuits), verify (certify a netlist
against majority), degree (exhaustive approximate-degree oracle), check
(inequality / lemma / gamma / tail sweeps).

Every command is deterministic given its arguments and --seed; all emitted
JSON is byte-stable across reruns (run timestamps live in `.meta.json`
sidecars).  Exit codes: 0 success/pass, 1 verification failure, 2 usage or
parse error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import compiler, gf2poly, verify as verify_mod
from . import synthesis as synth_mod
from .circuits import parse_formula, parse_netlist, serialize_netlist
from .errors import ParseError, ResourceLimitError
from .rng import rng_for

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


@dataclass
class RunConfig:
    seed: int = 0
    trials: int = 2000
    threads: int = 1
    out: str = "out"
    format: str = "json"
    max_n: int = 20
    max_width: int = synth_mod.DEFAULT_WIDTH_CAP
    overrides: dict = field(default_factory=dict)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse uses code 2 for usage errors already
        return int(e.code or 0)
    if not hasattr(args, "func"):
        parser.print_help()
        return EXIT_USAGE
    try:
        cfg = _config_from(args)
        return args.func(args, cfg)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as e:
        print(f"resource cap: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="apxmaj", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="JSON file with default flag values")
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--trials", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=["json", "csv"], default=None)
        sp.add_argument("--max-n", type=int, default=None)
        sp.add_argument("--max-width", type=int, default=None)

    sp = sub.add_parser("compile", help="formula -> probabilistic polynomial recipe")
    sp.add_argument("formula", help="path to an s-expression formula file")
    common(sp)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("synth", help="plan/synthesize an approximate-majority circuit")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--override", default="",
                    help="comma list, e.g. A=3,M=16384,Mtop=16384,stop=4.85")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("verify", help="certify a netlist as an approximate majority")
    sp.add_argument("netlist", help="path to a netlist file")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--mode", choices=["exact", "mc"], default="exact")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("degree", help="exhaustive minimum approximate degree")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--hex", dest="hex_table", help="truth table as 2^n bits of hex")
    src.add_argument("--netlist", help="netlist file (single output)")
    sp.add_argument("--n", type=int, help="variable count (required with --hex)")
    sp.add_argument("--eps", type=float, required=True)
    common(sp)
    sp.set_defaults(func=cmd_degree)

    sp = sub.add_parser("check", help="numeric sweeps of the analytical bounds")
    sp.add_argument("kind", choices=["inequality", "lemma", "gamma", "tails"])
    sp.add_argument("--grid", help="JSON grid file (defaults are built in)")
    common(sp)
    sp.set_defaults(func=cmd_check)
    return p


def _config_from(args) -> RunConfig:
    cfg = RunConfig()
    config_path = getattr(args, "config", None)
    if config_path:
        loaded = json.loads(Path(config_path).read_text())
        for key, value in loaded.items():
            if not hasattr(cfg, key):
                raise ParseError(f"unknown config key '{key}'")
            setattr(cfg, key, value)
    for key in ("seed", "trials", "threads", "out", "format"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "max_n", None) is not None:
        cfg.max_n = args.max_n
    if getattr(args, "max_width", None) is not None:
        cfg.max_width = args.max_width
    if getattr(args, "override", None):
        cfg.overrides = _parse_overrides(args.override)
    return cfg


def _parse_overrides(text: str) -> dict:
    keymap = {"a": ("A", int), "m": ("M", int), "logm": ("logM", float),
              "mtop": ("M_top", int), "m_top": ("M_top", int),
              "logmtop": ("logM_top", float), "logm_top": ("logM_top", float),
              "stop": ("s_top", float), "s_top": ("s_top", float)}
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ParseError(f"override '{item}' is not key=value")
        key, value = item.split("=", 1)
        norm = key.strip().lower()
        if norm not in keymap:
            raise ParseError(f"unknown override key '{key}'")
        name, cast = keymap[norm]
        out[name] = cast(value)
    return out


def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------

def cmd_compile(args, cfg: RunConfig) -> int:
    text = Path(args.formula).read_text()
    formula = parse_formula(text)
    recipe = compiler.compile_formula(formula)
    out = _outdir(cfg)
    doc = compiler.recipe_to_json(recipe)
    doc["seed"] = cfg.seed
    doc["trials"] = cfg.trials
    verify_mod.emit_report(doc, out / "recipe.json", "json", meta={"seed": cfg.seed})
    with (out / "ledger.csv").open("w", newline="") as fh:
        import csv as _csv
        w = _csv.writer(fh)
        w.writerows(compiler.ledger_csv_rows(recipe))

    rows = []
    if recipe.n <= 16:
        tables = compiler.sample_tables(recipe, cfg.trials, cfg.seed)
        bits = np.unpackbits(tables, axis=-1, bitorder="little", count=1 << recipe.n)
        truth = _formula_truth_bits(formula, recipe.n)
        errs = (bits != truth[None, :]).mean(axis=0)
        degrees = compiler.table_degrees(tables, recipe.n)
        for j in range(1 << recipe.n):
            rows.append({"input": j, "empirical_error": float(errs[j])})
        max_deg = int(degrees.max())
    else:
        max_deg = None  # error table needs the full-table sampler
    verify_mod.emit_report(rows, out / "errors.csv", "csv", meta={"seed": cfg.seed})

    print(f"compiled: size={recipe.formula_size} depth={recipe.formula_depth} "
          f"degree_bound={recipe.degree_bound} err_bound={recipe.err_bound:.6f} "
          f"theoretical={recipe.theoretical_bound:.1f}"
          + (f" max_sampled_degree={max_deg}" if max_deg is not None else ""))
    return EXIT_OK


def _formula_truth_bits(formula, n: int) -> np.ndarray:
    from .circuits import formula_to_dag
    table = verify_mod.TruthTable.from_circuit(formula_to_dag(formula, n))
    raw = np.frombuffer(table.bits.to_bytes(max(1, (1 << n) // 8), "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little", count=1 << n)


def cmd_synth(args, cfg: RunConfig) -> int:
    p = synth_mod.plan(args.n, args.d, args.eps, cfg.overrides or None,
                       width_cap=cfg.max_width)
    out = _outdir(cfg)
    doc = _plan_json(p)
    doc["seed"] = cfg.seed
    verify_mod.emit_report(doc, out / "plan.json", "json", meta={"seed": cfg.seed})
    if not p.synthesizable:
        print("NOTSYNTH: " + "; ".join(p.synth_blockers()))
        print(f"plan written to {out / 'plan.json'} (analysis only)")
        return EXIT_OK
    result = synth_mod.synth(p, cfg.seed)
    (out / "circuit.netlist").write_text(serialize_netlist(result.dag))
    band_rows = []
    for w in sorted({int(0.4 * p.n), p.n // 2, math.ceil(0.6 * p.n)}):
        x = _random_weighted_input(p.n, w, cfg.seed)
        for obs in synth_mod.empirical_level_check(result, x):
            band_rows.append({
                "weight": w, "level": obs.index, "kind": obs.kind.value,
                "ones_fraction": obs.ones_fraction, "predicted": obs.predicted,
                "sigma": obs.sigma, "band_lo": obs.band_lo,
                "band_hi": obs.band_hi, "pass": obs.within_3_sigma,
            })
    verify_mod.emit_report(band_rows, out / "bands.csv", "csv", meta={"seed": cfg.seed})
    print(f"synthesized: depth={result.dag.depth} gates={result.dag.size} "
          f"monotone={result.dag.is_monotone()}")
    return EXIT_OK


def _random_weighted_input(n: int, w: int, seed: int) -> int:
    rng = rng_for(seed, "witness", w)
    idx = rng.permutation(n)[:w]
    mask = 0
    for i in idx:
        mask |= 1 << int(i)
    return mask


def _plan_json(p) -> dict:
    return {
        "n": p.n, "d": p.d, "eps": p.eps, "mode": p.mode, "A": p.a,
        "log_M": p.log_m, "M": p.m, "log_M_top": p.log_m_top, "M_top": p.m_top,
        "s_top": p.s_top, "delta": p.delta, "eps0": p.eps0,
        "gamma": list(p.gamma),
        "levels": [{
            "index": s.index, "kind": s.kind.value,
            "width": s.width, "log_width": s.log_width,
            "fan_in": s.fan_in, "log_fan_in": s.log_fan_in,
        } for s in p.levels],
        "side_conditions": p.side_conditions,
        "side_values": p.side_values,
        "synthesizable": p.synthesizable,
        "synth_blockers": p.synth_blockers(),
    }


def cmd_verify(args, cfg: RunConfig) -> int:
    dag = parse_netlist(Path(args.netlist).read_text())
    if args.mode == "exact" and dag.n_inputs > cfg.max_n:
        raise ResourceLimitError(
            f"exact mode capped at n <= {cfg.max_n} (circuit has {dag.n_inputs}); "
            f"use --mode mc or raise --max-n")
    if args.mode == "mc":
        report = verify_mod.certify_approx_majority(
            dag, args.eps, "mc", trials=max(cfg.trials, 1), seed=cfg.seed)
    else:
        report = verify_mod.certify_approx_majority(dag, args.eps, "exact")
    out = _outdir(cfg)
    doc = {
        "n": report.n, "eps": report.eps, "mode": report.mode,
        "disagreement": report.disagreement, "ci_lo": report.ci_lo,
        "ci_hi": report.ci_hi, "trials": report.trials,
        "seed": cfg.seed, "passed": report.passed,
    }
    verify_mod.emit_report(doc, out / "certification.json", "json", meta={"seed": cfg.seed})
    print(f"{'PASS' if report.passed else 'FAIL'}: disagreement={report.disagreement:.6f} "
          f"ci=[{report.ci_lo:.6f}, {report.ci_hi:.6f}] trials={report.trials} seed={cfg.seed}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_degree(args, cfg: RunConfig) -> int:
    if args.hex_table is not None:
        if args.n is None:
            raise ParseError("--hex needs --n")
        table = verify_mod.TruthTable.from_hex(args.hex_table, args.n)
    else:
        dag = parse_netlist(Path(args.netlist).read_text())
        table = verify_mod.TruthTable.from_circuit(dag)
    cert = verify_mod.min_approx_degree(table, args.eps, threads=cfg.threads)
    out = _outdir(cfg)
    doc = {
        "n": cert.n, "eps": cert.eps, "degree": cert.degree,
        "witness": gf2poly.format_poly(cert.witness),
        "distance": cert.distance, "allowed": cert.allowed,
        "exhausted": cert.exhausted, "scanned": list(cert.scanned),
        "seed": cfg.seed,
    }
    verify_mod.emit_report(doc, out / "degree.json", "json", meta={"seed": cfg.seed})
    print(f"degree={cert.degree} distance={cert.distance} (allowed {cert.allowed}) "
          f"witness={gf2poly.format_poly(cert.witness)}")
    return EXIT_OK


def cmd_check(args, cfg: RunConfig) -> int:
    grid = json.loads(Path(args.grid).read_text()) if args.grid else None
    if args.kind == "inequality":
        summary = _check_inequality(grid)
    elif args.kind == "gamma":
        summary = _check_gamma(grid)
    elif args.kind == "tails":
        summary = _check_tails(grid)
    else:
        summary = _check_lemma(grid, cfg)
    out = _outdir(cfg)
    summary["seed"] = cfg.seed
    verify_mod.emit_report(summary, out / f"check_{args.kind}.json", "json",
                           meta={"seed": cfg.seed})
    ok = summary["violations"] == 0
    print(f"{args.kind}: checked={summary['checked']} violations={summary['violations']}"
          + (f" hypothesis_skips={summary['hypothesis_skips']}" if "hypothesis_skips" in summary else "")
          + ("" if ok else f" first={summary['first_violation']}"))
    return EXIT_OK if ok else EXIT_FAIL


def _frange(values, default):
    return [float(v) for v in (values if values is not None else default)]


def _check_inequality(grid) -> dict:
    grid = grid or {}
    avals = _frange(grid.get("a"), [v / 2 for v in range(0, 129)])
    bvals = _frange(grid.get("b"), [v / 2 for v in range(0, 129)])
    dvals = [int(v) for v in grid.get("d", range(1, 9))]
    checked = violations = 0
    first = None
    for d in dvals:
        for a in avals:
            for b in bvals:
                holds, gap = compiler.check_key_inequality(a, b, d)
                checked += 1
                if not holds:
                    violations += 1
                    first = first or {"a": a, "b": b, "d": d, "gap": gap}
    return {"checked": checked, "violations": violations, "first_violation": first}


def _check_gamma(grid) -> dict:
    grid = grid or {}
    avals = [int(v) for v in grid.get("A", range(2, 33))]
    g0vals = _frange(grid.get("gamma0"), np.geomspace(1e-4, 1e-1, 13))
    imax = int(grid.get("i_max", 8))
    checked = violations = 0
    first = None
    for a in avals:
        for g0 in g0vals:
            gs = synth_mod.gamma_sequence(a, g0, imax)
            for i in range(1, imax + 1):
                lo, hi = synth_mod.gamma_envelope(a, g0, i)
                checked += 1
                if not lo <= gs[i] <= hi:
                    violations += 1
                    first = first or {"A": a, "gamma0": g0, "i": i,
                                      "gamma_i": gs[i], "lo": lo, "hi": hi}
    return {"checked": checked, "violations": violations, "first_violation": first}


def _check_tails(grid) -> dict:
    grid = grid or {}
    ns = [int(v) for v in grid.get("n", range(51, 502, 50))]
    epss = _frange(grid.get("eps"), [0.05, 0.1, 0.25])
    checked = violations = 0
    first = None
    rows = []
    for n in ns:
        for eps in epss:
            mass = synth_mod.tail_mass(n, eps)
            rows.append({"n": n, "eps": eps, "mass": mass, "bound": 2 * eps})
            checked += 1
            if mass > 2 * eps:
                violations += 1
                first = first or {"n": n, "eps": eps, "mass": mass, "bound": 2 * eps}
    return {"checked": checked, "violations": violations, "first_violation": first,
            "rows": rows}


def _check_lemma(grid, cfg: RunConfig) -> dict:
    checked = violations = skips = 0
    first = None
    if grid and "tuples" in grid:
        tuples = [(t["A"], t["s"], t["M"], t["n"], t["gamma"], t["k"]) for t in grid["tuples"]]
    else:
        tuples = list(_lemma_tuples(cfg.trials if cfg.trials else 1000, cfg.seed))
    for a, s, m, n, gamma, k in tuples:
        rep = synth_mod.check_technical_lemma(a, s, m, n, gamma, k)
        if not rep.hypotheses_ok:
            skips += 1
            continue
        checked += 1
        if not rep.ok:
            violations += 1
            first = first or {"A": a, "s": s, "M": m, "n": n, "gamma": gamma, "k": k}
    return {"checked": checked, "violations": violations,
            "hypothesis_skips": skips, "first_violation": first}


def _lemma_tuples(count: int, seed: int):
    """Random tuples satisfying the lemma hypotheses (s >= 1 included; the
    refined lower bound is not provable below that)."""
    rng = rng_for(seed, "lemma-tuples")
    made = 0
    while made < count:
        n = int(rng.integers(11, 201))
        a = 3.0 * math.log(n) * (1.0 + rng.random())
        gamma = math.exp(rng.uniform(math.log(1.0 / n), math.log(0.1)))
        s_hi = min(n, 0.5 / gamma) if made % 2 == 0 else n  # half the draws hit s*gamma <= 1/2
        if s_hi < 1.0:
            continue
        s = rng.uniform(1.0, s_hi)
        m = int(math.ceil(math.exp(a) * math.exp(rng.uniform(math.log(2.0), math.log(1e4)))))
        center = m * math.exp(-a)
        if rng.random() < 0.5:
            hi = math.floor(center * (1 - gamma))
            if hi < 0:
                continue
            k = int(rng.integers(0, hi + 1))
        else:
            lo = math.ceil(center * (1 + gamma))
            if lo > m:
                continue
            k = int(rng.integers(lo, m + 1))
        made += 1
        yield a, s, m, n, gamma, k


if __name__ == "__main__":
    sys.exit(main())
