"""Exact and statistical verification: brute-force minimum approximate degree
(distance to the span of low-degree monomials), approximate-majority
certification, triangle-inequality checks, and report emission.

The degree oracle is exhaustive and therefore tiny: n <= 5 and at most 26
basis monomials (2^26 candidates).  Candidate truth tables are enumerated by
doubling over the basis, so each block is a single XOR + popcount sweep; the
first within-budget candidate in basis-subset index order wins, which makes
witnesses deterministic.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circuits import CircuitDag, PackedEvaluator, exhaustive_table, random_input_words
from .errors import DimensionError, ParseError, ResourceLimitError
from .gf2poly import SparsePolyF2, from_truth_table, to_truth_table
from .rng import rng_for

DEGREE_ORACLE_MAX_N = 5
DEGREE_ORACLE_MAX_MONOMIALS = 26
EXACT_AGREEMENT_MAX_N = 20
WILSON_Z99 = 2.5758293035489004


@dataclass(frozen=True)
class TruthTable:
    """2^n packed bits; bit j of `bits` is f at assignment j (bit i of j = x_i)."""

    n: int
    bits: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("negative n")
        if self.bits < 0 or self.bits >> (1 << self.n):
            raise DimensionError(f"table does not fit 2^{self.n} bits")

    @classmethod
    def from_hex(cls, text: str, n: int) -> "TruthTable":
        text = text.strip().lower().removeprefix("0x")
        expected = max(1, (1 << n) // 4)
        if len(text) != expected:
            raise ParseError(f"expected {expected} hex digits for n={n}, got {len(text)}")
        try:
            bits = int(text, 16)
        except ValueError:
            raise ParseError(f"invalid hex string '{text}'") from None
        return cls(n, bits)

    def to_hex(self) -> str:
        width = max(1, (1 << self.n) // 4)
        return format(self.bits, f"0{width}x")

    @classmethod
    def from_circuit(cls, c: CircuitDag, output: int = 0) -> "TruthTable":
        return cls(c.n_inputs, exhaustive_table(c, output, max_n=EXACT_AGREEMENT_MAX_N))

    @classmethod
    def from_poly(cls, p: SparsePolyF2) -> "TruthTable":
        return cls(p.n, to_truth_table(p))

    def value(self, j: int) -> int:
        return (self.bits >> j) & 1

    def distance(self, other: "TruthTable") -> int:
        if self.n != other.n:
            raise DimensionError("tables over different n")
        return (self.bits ^ other.bits).bit_count()


def majority_truth_table(n: int) -> TruthTable:
    if n > EXACT_AGREEMENT_MAX_N:
        raise ResourceLimitError(f"majority table capped at n <= {EXACT_AGREEMENT_MAX_N}")
    idx = np.arange(1 << n, dtype=np.uint32)
    bits = (np.bitwise_count(idx) * 2 > n).astype(np.uint8)
    return TruthTable(n, int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little"))


# ---------------------------------------------------------------------------
# minimum approximate degree

@dataclass(frozen=True)
class DegreeCertificate:
    n: int
    eps: float
    degree: int
    witness: SparsePolyF2
    distance: int
    allowed: int
    exhausted: bool           # every smaller degree exhaustively refuted
    scanned: tuple[int, ...]  # candidates scanned per degree level


def degree_basis(n: int, degree: int) -> list[int]:
    """Monomial masks of degree <= `degree`, sorted by (degree, index tuple)."""
    monos = [m for m in range(1 << n) if m.bit_count() <= degree]
    return sorted(monos, key=lambda m: (m.bit_count(), _mask_indices(m)))


def _mask_indices(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def monomial_table(n: int, mask: int) -> int:
    idx = np.arange(1 << n, dtype=np.uint32)
    bits = ((idx & mask) == mask).astype(np.uint8)
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def span_tables(n: int, degree: int) -> np.ndarray:
    """All truth tables (as uint32) spanned by monomials of degree <= degree."""
    if n > DEGREE_ORACLE_MAX_N:
        raise ResourceLimitError(f"span enumeration capped at n <= {DEGREE_ORACLE_MAX_N}")
    basis = degree_basis(n, degree)
    if len(basis) > DEGREE_ORACLE_MAX_MONOMIALS:
        raise ResourceLimitError(
            f"{len(basis)} monomials of degree <= {degree} exceeds cap "
            f"{DEGREE_ORACLE_MAX_MONOMIALS}")
    tables = np.zeros(1, dtype=np.uint32)
    for mask in basis:
        t = np.uint32(monomial_table(n, mask))
        tables = np.concatenate([tables, tables ^ t])
    return tables


def min_approx_degree(f: TruthTable, eps: float, threads: int = 1) -> DegreeCertificate:
    """Least D such that some polynomial of degree <= D is within Hamming
    distance floor(eps * 2^n) of f, with an explicit witness.

    Scans every degree level below the answer exhaustively (2^#monomials
    candidates, XOR + popcount per candidate).  At eps = 0 the witness at the
    answer level is the ANF itself; the refutation of smaller degrees is
    still done by scanning.
    """
    n = f.n
    if n > DEGREE_ORACLE_MAX_N:
        raise ResourceLimitError(f"degree oracle capped at n <= {DEGREE_ORACLE_MAX_N}, got {n}")
    if not 0 <= eps < 1:
        raise ValueError("eps must be in [0, 1)")
    allowed = math.floor(eps * (1 << n))
    anf = from_truth_table(f.bits, n)
    scanned: list[int] = []
    for d in range(n + 1):
        if eps == 0 and anf.degree == d:
            return DegreeCertificate(n, eps, d, anf, 0, allowed, True, tuple(scanned))
        basis = degree_basis(n, d)
        if len(basis) > DEGREE_ORACLE_MAX_MONOMIALS:
            raise ResourceLimitError(
                f"{len(basis)} monomials of degree <= {d} exceeds cap "
                f"{DEGREE_ORACLE_MAX_MONOMIALS}")
        hit, dist = _scan_level(n, basis, f.bits, allowed, threads)
        scanned.append(1 << len(basis))
        if hit is not None:
            witness = SparsePolyF2(n, frozenset(
                basis[j] for j in range(len(basis)) if hit >> j & 1))
            return DegreeCertificate(n, eps, d, witness, dist, allowed, True, tuple(scanned))
    raise AssertionError("degree n span contains every function")  # pragma: no cover


def _scan_level(n: int, basis: list[int], f_bits: int, allowed: int,
                threads: int) -> tuple[int | None, int]:
    """First candidate index within `allowed` of f, scanning the whole span.

    Candidates are indexed by basis subsets (bit j = basis[j] included); the
    span is materialized by doubling over the first 20 basis elements and
    XOR-offsetting per block of the remaining ones.  Returns
    (index, distance) or (None, min_distance_seen).
    """
    m = len(basis)
    low = min(m, 20)
    tables = np.zeros(1, dtype=np.uint32)
    for mask in basis[:low]:
        t = np.uint32(monomial_table(n, mask))
        tables = np.concatenate([tables, tables ^ t])
    high_masks = [np.uint32(monomial_table(n, mask)) for mask in basis[low:]]
    n_blocks = 1 << (m - low)
    f_word = np.uint32(f_bits & 0xFFFFFFFF)

    def scan_block(h: int) -> tuple[int | None, int]:
        offset = f_word
        for j in range(m - low):
            if h >> j & 1:
                offset ^= high_masks[j]
        dist = np.bitwise_count(tables ^ offset)
        hits = np.nonzero(dist <= allowed)[0]
        if hits.size:
            first = int(hits[0])
            return first, int(dist[first])
        return None, int(dist.min())

    best = 1 << n
    if threads <= 1 or n_blocks == 1:
        block_results = map(scan_block, range(n_blocks))
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        block_results = pool.map(scan_block, range(n_blocks))
    for h, (first, d) in enumerate(block_results):
        if first is not None:
            return (h << low) | first, d
        best = min(best, d)
    return None, best


def smolensky_table(ns: Sequence[int], eps: float, threads: int = 1) -> list[tuple[int, int]]:
    """(n, minimum approximate degree of MAJ_n at eps) for each n."""
    return [(n, min_approx_degree(majority_truth_table(n), eps, threads).degree) for n in ns]


# ---------------------------------------------------------------------------
# agreement / certification

@dataclass(frozen=True)
class AgreementReport:
    estimate: float        # fraction of inputs where f == g
    ci_lo: float
    ci_hi: float
    trials: int
    seed: int | None
    exact: bool


def wilson_interval(k: int, n: int, z: float = WILSON_Z99) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _as_table_or_circuit(f) -> tuple[TruthTable | None, CircuitDag | None]:
    if isinstance(f, TruthTable):
        return f, None
    if isinstance(f, CircuitDag):
        return None, f
    raise TypeError(f"expected TruthTable or CircuitDag, got {type(f)}")


def _n_of(f) -> int:
    return f.n if isinstance(f, TruthTable) else f.n_inputs


def agreement(f, g, mode: str = "exact", trials: int = 100_000,
              seed: int | None = None) -> AgreementReport:
    """Pr_x[f(x) = g(x)], exactly (n <= 20) or by Monte Carlo with a Wilson
    99% confidence interval."""
    n = _n_of(f)
    if _n_of(g) != n:
        raise DimensionError("operands over different variable counts")
    if mode == "exact":
        if n > EXACT_AGREEMENT_MAX_N:
            raise ResourceLimitError(f"exact agreement capped at n <= {EXACT_AGREEMENT_MAX_N}")
        tf = f if isinstance(f, TruthTable) else TruthTable.from_circuit(f)
        tg = g if isinstance(g, TruthTable) else TruthTable.from_circuit(g)
        eq = (1 << n) - tf.distance(tg)
        est = eq / (1 << n)
        return AgreementReport(est, est, est, 1 << n, None, True)
    if mode != "mc":
        raise ValueError(f"unknown mode '{mode}'")
    if seed is None:
        raise ValueError("mc mode needs a seed")
    eq = trials - _mc_disagreements(f, g, trials, seed)
    lo, hi = wilson_interval(eq, trials)
    return AgreementReport(eq / trials, lo, hi, trials, seed, False)


def _mc_disagreements(f, g, trials: int, seed: int, chunk_words: int = 256) -> int:
    n = _n_of(f)
    rng = rng_for(seed, "mc-agreement")
    words, n_words = random_input_words(n, trials, rng)
    # padding lanes in the last word would evaluate both sides at 0..0
    lane_mask = np.full(n_words, ~np.uint64(0), dtype=np.uint64)
    tail = trials - (n_words - 1) * 64
    if tail < 64:
        lane_mask[-1] = np.uint64((1 << tail) - 1)
    evf = _make_word_evaluator(f)
    evg = _make_word_evaluator(g)
    bad = 0
    for start in range(0, n_words, chunk_words):
        chunk = words[:, start:start + chunk_words]
        diff = (evf(chunk) ^ evg(chunk)) & lane_mask[start:start + chunk_words]
        bad += int(np.bitwise_count(diff).sum())
    return bad


def _make_word_evaluator(f):
    """(n, w) uint64 input words -> (w,) uint64 output words."""
    if isinstance(f, _MajWords):
        return lambda words: _majority_words(f.n, words)
    tab, circ = _as_table_or_circuit(f)
    if circ is not None:
        pe = PackedEvaluator(circ)
        return lambda words: pe.outputs(words)[0]
    n = tab.n
    bits = np.unpackbits(
        np.frombuffer(tab.bits.to_bytes(max(1, (1 << n) // 8), "little"), dtype=np.uint8),
        bitorder="little", count=1 << n).astype(np.uint64)

    def run(words: np.ndarray) -> np.ndarray:
        idx = np.zeros(words.shape[1] * 64, dtype=np.uint32)
        for i in range(n):
            lanes = np.unpackbits(words[i].view(np.uint8), bitorder="little")
            idx |= lanes.astype(np.uint32) << i
        vals = bits[idx]
        return np.packbits(vals.astype(np.uint8), bitorder="little").view(np.uint64)

    return run


@dataclass(frozen=True)
class CertificationReport:
    n: int
    eps: float
    mode: str
    disagreement: float
    ci_lo: float
    ci_hi: float
    trials: int
    seed: int | None
    passed: bool


def certify_approx_majority(c, eps: float, mode: str = "exact",
                            trials: int = 100_000, seed: int | None = None) -> CertificationReport:
    """Pass iff disagreement with MAJ_n is <= eps (exact mode) or the Wilson
    99% upper bound on disagreement is <= eps (mc mode)."""
    n = _n_of(c)
    if mode == "exact":
        rep = agreement(c, majority_truth_table(n), "exact")
        dis = 1.0 - rep.estimate
        return CertificationReport(n, eps, mode, dis, dis, dis, rep.trials, None, dis <= eps)
    bad = _mc_disagreements(c, _maj_evaluator_stub(n), trials, seed)
    lo, hi = wilson_interval(bad, trials)
    return CertificationReport(n, eps, mode, bad / trials, lo, hi, trials, seed, hi <= eps)


class _MajWords:
    """Majority as a word evaluator (popcount over variable words per lane)."""

    def __init__(self, n: int):
        self.n = n


def _maj_evaluator_stub(n: int) -> "_MajWords":
    return _MajWords(n)


def _majority_words(n: int, words: np.ndarray) -> np.ndarray:
    counts = np.zeros(words.shape[1] * 64, dtype=np.uint16)
    for i in range(n):
        counts += np.unpackbits(words[i].view(np.uint8), bitorder="little")
    maj = (counts.astype(np.uint32) * 2 > n).astype(np.uint8)
    return np.packbits(maj, bitorder="little").view(np.uint64)


@dataclass(frozen=True)
class TriangleReport:
    dist_p_maj: float
    dist_p_f: float
    dist_f_maj: float
    triangle_holds: bool
    corollary_applies: bool
    corollary_holds: bool


def triangle_corollary_check(f: TruthTable, p: SparsePolyF2, eps: float) -> TriangleReport:
    """dist(P, MAJ) <= dist(P, f) + dist(f, MAJ) on exact counts; and when f
    is a (1/4, n)-approximate majority and P (1/4 - eps)-approximates f, P
    must (1/2 - eps)-approximate MAJ."""
    n = f.n
    if p.n != n:
        raise DimensionError("polynomial and table over different n")
    size = 1 << n
    tp = TruthTable.from_poly(p)
    maj = majority_truth_table(n)
    d_pm = tp.distance(maj) / size
    d_pf = tp.distance(f) / size
    d_fm = f.distance(maj) / size
    applies = d_fm <= 0.25 and d_pf <= 0.25 - eps
    return TriangleReport(
        dist_p_maj=d_pm, dist_p_f=d_pf, dist_f_maj=d_fm,
        triangle_holds=d_pm <= d_pf + d_fm + 1e-12,
        corollary_applies=applies,
        corollary_holds=(not applies) or d_pm <= 0.5 - eps + 1e-12,
    )


# ---------------------------------------------------------------------------
# reports

def emit_report(results, out_path: str | Path, fmt: str = "json",
                meta: dict | None = None) -> None:
    """Write results deterministically; run metadata (timestamps etc.) goes to
    a sidecar `<out>.meta.json` so reruns are byte-identical."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        out_path.write_text(json.dumps(results, indent=2, sort_keys=True, default=_json_default) + "\n")
    elif fmt == "csv":
        with out_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            for row in _csv_rows(results):
                writer.writerow(row)
    else:
        raise ValueError(f"unknown format '{fmt}'")
    sidecar = dict(meta or {})
    sidecar["written_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    sidecar_path = out_path.with_name(out_path.name + ".meta.json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def _csv_rows(results) -> Iterable[list]:
    if isinstance(results, dict):
        yield ["key", "value"]
        for k in sorted(results):
            yield [k, results[k]]
        return
    rows = list(results)
    if not rows:
        return
    if isinstance(rows[0], dict):
        header = list(rows[0].keys())
        yield header
        for r in rows:
            yield [r.get(h) for h in header]
    else:
        yield from rows


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, SparsePolyF2):
        from .gf2poly import format_poly
        return format_poly(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")
