"""Circuit and formula IR: parsing, metrics, and bit-parallel evaluation.

Two representations are used throughout the package:

* :class:`CircuitDag` -- a topologically ordered gate list with shared
  subterms and any number of outputs.  Size counts non-input, non-constant
  gates; depth counts gates along the longest leaf-to-output path.
* :class:`FormulaNode` -- a tree.  Size counts leaves (variable/constant
  occurrences), matching the usual formula-size convention.

Evaluation comes in three speeds: scalar (`eval_circuit`), word-parallel over
a packed :class:`InputBlock` (`eval_block`, up to ``WORD_BITS`` assignments at
once), and :class:`PackedEvaluator`, which batches gates level-by-level into
numpy index matrices for Monte Carlo workloads on wide circuits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ParseError, ResourceLimitError

WORD_BITS = 64

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


class GateKind(Enum):
    INPUT = "INPUT"
    CONST0 = "CONST0"
    CONST1 = "CONST1"
    AND = "AND"
    OR = "OR"
    NOT = "NOT"
    XOR = "XOR"


LEAF_KINDS = frozenset({GateKind.INPUT, GateKind.CONST0, GateKind.CONST1})
MONOTONE_KINDS = frozenset({GateKind.AND, GateKind.OR})


def _check_arity(kind: GateKind, n_args: int) -> None:
    if kind in LEAF_KINDS:
        if n_args != 0:
            raise ParseError(f"{kind.value} takes no operands, got {n_args}")
    elif kind is GateKind.NOT:
        if n_args != 1:
            raise ParseError(f"NOT takes exactly 1 operand, got {n_args}")
    elif n_args < 1:
        raise ParseError(f"{kind.value} needs at least 1 operand")


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    args: tuple[int, ...] = ()


@dataclass(frozen=True)
class CircuitDag:
    """Gate list in topological order; ids 0..n_inputs-1 are the inputs."""

    n_inputs: int
    gates: tuple[Gate, ...]
    outputs: tuple[int, ...]

    def __post_init__(self):
        if self.n_inputs < 0:
            raise ValueError("negative input count")
        for i, g in enumerate(self.gates):
            if i < self.n_inputs:
                if g.kind is not GateKind.INPUT:
                    raise ValueError(f"gate {i} must be INPUT")
            elif g.kind is GateKind.INPUT:
                raise ValueError(f"INPUT gate {i} after internal gates")
            _check_arity(g.kind, len(g.args))
            for a in g.args:
                if not 0 <= a < i:
                    raise ValueError(f"gate {i} references {a}, not topological")
        for o in self.outputs:
            if not 0 <= o < len(self.gates):
                raise ValueError(f"output {o} out of range")

    @property
    def size(self) -> int:
        return sum(1 for g in self.gates if g.kind not in LEAF_KINDS)

    @property
    def depth(self) -> int:
        d = self._gate_depths()
        return max((d[o] for o in self.outputs), default=0)

    def _gate_depths(self) -> list[int]:
        d = [0] * len(self.gates)
        for i, g in enumerate(self.gates):
            if g.kind not in LEAF_KINDS:
                d[i] = 1 + max((d[a] for a in g.args), default=0)
        return d

    def is_monotone(self) -> bool:
        """True iff every internal gate is AND/OR (no NOT, no XOR)."""
        return all(g.kind in MONOTONE_KINDS or g.kind in LEAF_KINDS for g in self.gates)


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class FormulaNode:
    kind: GateKind
    children: tuple["FormulaNode", ...] = ()
    var: int | None = None  # for INPUT leaves

    def __post_init__(self):
        if self.kind is GateKind.INPUT:
            if self.var is None or self.var < 0 or self.children:
                raise ValueError("leaf must carry a variable index and no children")
        else:
            _check_arity(self.kind, len(self.children))
            # fan-in-1 AND/OR/XOR may appear only at the root; children of any
            # gate must not be such nodes
            for c in self.children:
                if c.kind in (GateKind.AND, GateKind.OR, GateKind.XOR) and len(c.children) == 1:
                    raise ValueError("fan-in-1 gate feeding another gate")

    @property
    def size(self) -> int:
        """Leaf count (variables and constants, with multiplicity)."""
        if not self.children:
            return 1
        return sum(c.size for c in self.children)

    @property
    def depth(self) -> int:
        if not self.children:
            return 0
        return 1 + max(c.depth for c in self.children)

    @property
    def gate_count(self) -> int:
        if not self.children:
            return 0
        return 1 + sum(c.gate_count for c in self.children)

    @property
    def n_vars(self) -> int:
        """1 + highest referenced variable index (0 for constant formulas)."""
        if self.kind is GateKind.INPUT:
            return self.var + 1
        return max((c.n_vars for c in self.children), default=0)


def var(i: int) -> FormulaNode:
    return FormulaNode(GateKind.INPUT, var=i)


# ---------------------------------------------------------------------------
# netlist grammar:  input NAME | NAME = KIND NAME... | output NAME

def parse_netlist(text: str) -> CircuitDag:
    input_names: list[str] = []
    gate_rows: list[tuple[str, GateKind, list[str]]] = []
    output_names: list[tuple[str, int]] = []
    seen: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] == "input":
            if len(toks) != 2:
                raise ParseError("expected 'input <name>'", lineno)
            name = toks[1]
            _check_name(name, lineno)
            if name in seen:
                raise ParseError(f"duplicate definition of '{name}'", lineno)
            seen.add(name)
            input_names.append(name)
        elif toks[0] == "output":
            if len(toks) != 2:
                raise ParseError("expected 'output <name>'", lineno)
            output_names.append((toks[1], lineno))
        elif len(toks) >= 3 and toks[1] == "=":
            name = toks[0]
            _check_name(name, lineno)
            if name in seen:
                raise ParseError(f"duplicate definition of '{name}'", lineno)
            try:
                kind = GateKind[toks[2]]
            except KeyError:
                raise ParseError(f"unknown gate kind '{toks[2]}'", lineno, line.find(toks[2]) + 1)
            if kind is GateKind.INPUT:
                raise ParseError("INPUT is declared with 'input <name>'", lineno)
            args = toks[3:]
            try:
                _check_arity(kind, len(args))
            except ParseError as e:
                raise ParseError(str(e), lineno) from None
            for a in args:
                _check_name(a, lineno)
            seen.add(name)
            gate_rows.append((name, kind, args))
        else:
            raise ParseError("expected 'input', 'output' or '<name> = <KIND> <operands>'", lineno)

    ids: dict[str, int] = {name: i for i, name in enumerate(input_names)}
    gates: list[Gate] = [Gate(GateKind.INPUT)] * len(input_names)
    for name, kind, args in gate_rows:
        arg_ids = []
        for a in args:
            if a not in ids:
                raise ParseError(f"undefined gate reference '{a}' (must be declared earlier)")
            arg_ids.append(ids[a])
        ids[name] = len(gates)
        gates.append(Gate(kind, tuple(arg_ids)))
    outputs = []
    for name, lineno in output_names:
        if name not in ids:
            raise ParseError(f"undefined output '{name}'", lineno)
        outputs.append(ids[name])
    return CircuitDag(len(input_names), tuple(gates), tuple(outputs))


def _check_name(name: str, lineno: int) -> None:
    if not _NAME_RE.match(name):
        raise ParseError(f"invalid name '{name}'", lineno)


def serialize_netlist(c: CircuitDag) -> str:
    """Canonical form: inputs x0..x{n-1}, gates g0.. in id order, sorted operands."""
    names = [f"x{i}" for i in range(c.n_inputs)]
    lines = [f"input x{i}" for i in range(c.n_inputs)]
    for i in range(c.n_inputs, len(c.gates)):
        g = c.gates[i]
        name = f"g{i - c.n_inputs}"
        names.append(name)
        ops = " ".join(names[a] for a in sorted(g.args))
        lines.append(f"{name} = {g.kind.value}" + (f" {ops}" if ops else ""))
    for o in c.outputs:
        lines.append(f"output {names[o]}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# s-expression formulas:  expr := var | (and expr+) | (or expr+) | (xor expr+) | (not expr)

_SEXPR_KINDS = {"and": GateKind.AND, "or": GateKind.OR, "xor": GateKind.XOR, "not": GateKind.NOT}


def parse_formula(text: str) -> FormulaNode:
    toks = _tokenize_sexpr(text)
    pos = 0

    def parse_expr(root: bool) -> FormulaNode:
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input")
        tok, line, col = toks[pos]
        pos += 1
        if tok == "(":
            if pos >= len(toks):
                raise ParseError("unexpected end of input after '('", line, col)
            op, oline, ocol = toks[pos]
            pos += 1
            if op not in _SEXPR_KINDS:
                raise ParseError(f"unknown operator '{op}'", oline, ocol)
            kind = _SEXPR_KINDS[op]
            children = []
            while pos < len(toks) and toks[pos][0] != ")":
                children.append(parse_expr(False))
            if pos >= len(toks):
                raise ParseError("missing ')'", line, col)
            pos += 1  # consume ')'
            if kind is GateKind.NOT and len(children) != 1:
                raise ParseError("not takes exactly one argument", oline, ocol)
            if kind is not GateKind.NOT and not children:
                raise ParseError(f"{op} needs at least one argument", oline, ocol)
            if not root and kind is not GateKind.NOT and len(children) == 1:
                raise ParseError("fan-in-1 gate feeding another gate", oline, ocol)
            try:
                return FormulaNode(kind, tuple(children))
            except ValueError as e:
                raise ParseError(str(e), oline, ocol) from None
        elif tok == ")":
            raise ParseError("unexpected ')'", line, col)
        else:
            m = re.match(r"x(\d+)$", tok)
            if not m:
                raise ParseError(f"expected variable 'x<k>', got '{tok}'", line, col)
            return FormulaNode(GateKind.INPUT, var=int(m.group(1)))

    node = parse_expr(True)
    if pos != len(toks):
        line, col = toks[pos][1], toks[pos][2]
        raise ParseError("trailing input after formula", line, col)
    return node


def _tokenize_sexpr(text: str) -> list[tuple[str, int, int]]:
    toks = []
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split(";", 1)[0]
        col = 0
        while col < len(line):
            ch = line[col]
            if ch.isspace():
                col += 1
            elif ch in "()":
                toks.append((ch, lineno, col + 1))
                col += 1
            else:
                m = re.match(r"[^\s()]+", line[col:])
                toks.append((m.group(0), lineno, col + 1))
                col += len(m.group(0))
    return toks


def serialize_formula(f: FormulaNode) -> str:
    if f.kind is GateKind.INPUT:
        return f"x{f.var}"
    if f.kind in (GateKind.CONST0, GateKind.CONST1):
        raise ValueError("constants are not representable in the formula grammar")
    op = f.kind.value.lower()
    return "(" + " ".join([op] + [serialize_formula(c) for c in f.children]) + ")"


# ---------------------------------------------------------------------------
# evaluation

def eval_circuit(c: CircuitDag, x: Sequence[int]) -> tuple[int, ...]:
    if len(x) != c.n_inputs:
        raise DimensionError(f"expected {c.n_inputs} input bits, got {len(x)}")
    vals = [0] * len(c.gates)
    for i, g in enumerate(c.gates):
        k = g.kind
        if k is GateKind.INPUT:
            vals[i] = x[i] & 1
        elif k is GateKind.CONST0:
            vals[i] = 0
        elif k is GateKind.CONST1:
            vals[i] = 1
        elif k is GateKind.NOT:
            vals[i] = vals[g.args[0]] ^ 1
        elif k is GateKind.AND:
            v = 1
            for a in g.args:
                v &= vals[a]
            vals[i] = v
        elif k is GateKind.OR:
            v = 0
            for a in g.args:
                v |= vals[a]
            vals[i] = v
        else:  # XOR
            v = 0
            for a in g.args:
                v ^= vals[a]
            vals[i] = v
    return tuple(vals[o] for o in c.outputs)


def eval_formula(f: FormulaNode, x: Sequence[int]) -> int:
    k = f.kind
    if k is GateKind.INPUT:
        return x[f.var] & 1
    if k is GateKind.CONST0:
        return 0
    if k is GateKind.CONST1:
        return 1
    vals = [eval_formula(c, x) for c in f.children]
    if k is GateKind.NOT:
        return vals[0] ^ 1
    if k is GateKind.AND:
        v = 1
        for b in vals:
            v &= b
        return v
    if k is GateKind.OR:
        v = 0
        for b in vals:
            v |= b
        return v
    v = 0
    for b in vals:
        v ^= b
    return v


@dataclass(frozen=True)
class InputBlock:
    """Up to WORD_BITS assignments, one word per variable (bit j = lane j)."""

    n_vars: int
    width: int
    words: tuple[int, ...]
    ones: tuple[int, ...] = field(default=())   # |y|_1 per assignment
    zeros: tuple[int, ...] = field(default=())  # |y|_0 per assignment

    def __post_init__(self):
        if not 0 < self.width <= WORD_BITS:
            raise ValueError(f"block width must be in 1..{WORD_BITS}")
        if len(self.words) != self.n_vars:
            raise ValueError("one word per variable required")

    @classmethod
    def pack(cls, assignments: Sequence[Sequence[int]]) -> "InputBlock":
        width = len(assignments)
        if width == 0:
            raise ValueError("empty block")
        n = len(assignments[0])
        words = [0] * n
        ones = []
        for lane, a in enumerate(assignments):
            if len(a) != n:
                raise DimensionError("ragged assignment batch")
            w = 0
            for i, b in enumerate(a):
                if b & 1:
                    words[i] |= 1 << lane
                    w += 1
            ones.append(w)
        return cls(n, width, tuple(words), tuple(ones), tuple(n - w for w in ones))

    def unpack(self) -> list[list[int]]:
        return [[(self.words[i] >> lane) & 1 for i in range(self.n_vars)]
                for lane in range(self.width)]


def eval_block(c: CircuitDag, block: InputBlock) -> tuple[int, ...]:
    """Word-parallel evaluation; bit j of each output equals eval on lane j."""
    if block.n_vars != c.n_inputs:
        raise DimensionError(f"expected {c.n_inputs} variables, got {block.n_vars}")
    mask = (1 << block.width) - 1
    vals = [0] * len(c.gates)
    for i, g in enumerate(c.gates):
        k = g.kind
        if k is GateKind.INPUT:
            vals[i] = block.words[i] & mask
        elif k is GateKind.CONST0:
            vals[i] = 0
        elif k is GateKind.CONST1:
            vals[i] = mask
        elif k is GateKind.NOT:
            vals[i] = ~vals[g.args[0]] & mask
        elif k is GateKind.AND:
            v = mask
            for a in g.args:
                v &= vals[a]
            vals[i] = v
        elif k is GateKind.OR:
            v = 0
            for a in g.args:
                v |= vals[a]
            vals[i] = v
        else:
            v = 0
            for a in g.args:
                v ^= vals[a]
            vals[i] = v
    return tuple(vals[o] for o in c.outputs)


def exhaustive_table(c: CircuitDag, output: int = 0, max_n: int = 20) -> int:
    """Truth table of one output as an integer (bit j = value at assignment j,
    where bit i of j is the value of x_i).  Word-parallel over 64-lane blocks."""
    n = c.n_inputs
    if n > max_n:
        raise ResourceLimitError(f"exhaustive evaluation capped at n <= {max_n}, got {n}")
    total = 1 << n
    table = 0
    lanes = min(WORD_BITS, total)
    if n <= 6:
        base_words = [_var_pattern(i, total) for i in range(n)]
        blk = InputBlock(n, total, tuple(base_words))
        return eval_block(c, blk)[_output_index(c, output)]
    low_words = [_var_pattern(i, WORD_BITS) for i in range(6)]
    full = (1 << WORD_BITS) - 1
    idx = _output_index(c, output)
    for b in range(total // WORD_BITS):
        words = list(low_words)
        for i in range(6, n):
            words.append(full if (b >> (i - 6)) & 1 else 0)
        blk = InputBlock(n, lanes, tuple(words))
        table |= eval_block(c, blk)[idx] << (b * WORD_BITS)
    return table


def _output_index(c: CircuitDag, output: int) -> int:
    if not 0 <= output < len(c.outputs):
        raise IndexError(f"circuit has {len(c.outputs)} outputs")
    return output


def _var_pattern(i: int, width: int) -> int:
    """Word whose bit j equals bit i of j."""
    period = 1 << (i + 1)
    ones = ((1 << (1 << i)) - 1) << (1 << i)
    w = 0
    for start in range(0, width, period):
        w |= ones << start
    return w & ((1 << width) - 1)


# ---------------------------------------------------------------------------
# transformations

def unfold_to_formula(c: CircuitDag) -> FormulaNode:
    """Expand a single-output DAG into a tree, duplicating shared gates.

    Fan-in-1 AND/OR/XOR gates are identity functions and are collapsed so the
    result satisfies the formula fan-in rule; this never increases gate count
    or depth.
    """
    if len(c.outputs) != 1:
        raise ValueError("unfold requires a single-output circuit")

    def build(i: int) -> FormulaNode:
        g = c.gates[i]
        if g.kind is GateKind.INPUT:
            return FormulaNode(GateKind.INPUT, var=i)
        if g.kind in (GateKind.CONST0, GateKind.CONST1):
            return FormulaNode(g.kind)
        children = tuple(build(a) for a in g.args)
        if g.kind in (GateKind.AND, GateKind.OR, GateKind.XOR) and len(children) == 1:
            return children[0]
        return FormulaNode(g.kind, children)

    return build(c.outputs[0])


def formula_to_dag(f: FormulaNode, n_vars: int | None = None) -> CircuitDag:
    n = f.n_vars if n_vars is None else n_vars
    gates: list[Gate] = [Gate(GateKind.INPUT)] * n

    def build(node: FormulaNode) -> int:
        if node.kind is GateKind.INPUT:
            if node.var >= n:
                raise DimensionError(f"variable x{node.var} out of range for n={n}")
            return node.var
        args = tuple(build(ch) for ch in node.children)
        gates.append(Gate(node.kind, args))
        return len(gates) - 1

    out = build(f)
    return CircuitDag(n, tuple(gates), (out,))


def majority(x: Sequence[int]) -> int:
    """1 iff strictly more than half the bits are 1 (ties go to 0)."""
    ones = sum(b & 1 for b in x)
    return 1 if 2 * ones > len(x) else 0


def majority_table(n: int) -> int:
    t = 0
    for j in range(1 << n):
        if 2 * _popcount(j) > n:
            t |= 1 << j
    return t


def _popcount(x: int) -> int:
    return bin(x).count("1")


# ---------------------------------------------------------------------------
# batched evaluator for wide circuits

class PackedEvaluator:
    """Levelized numpy evaluator: gates grouped by (depth, kind) and padded to
    a common fan-in so each level is a gather + reduction over uint64 lanes.

    Produces bit-for-bit the same outputs as `eval_block`; exists because the
    synthesized approximate-majority circuits have ~2^15 gates and Monte Carlo
    certification runs 10^5 assignments.
    """

    _IDENT = {GateKind.AND: 1, GateKind.OR: 0, GateKind.XOR: 0, GateKind.NOT: 0}

    def __init__(self, c: CircuitDag):
        self.circuit = c
        self.n_rows = len(c.gates) + 2  # two extra rows: const0, const1
        self._const0_row = len(c.gates)
        self._const1_row = len(c.gates) + 1
        depths = c._gate_depths()
        groups: dict[tuple[int, GateKind], list[int]] = {}
        for i, g in enumerate(c.gates):
            if g.kind in LEAF_KINDS:
                continue
            groups.setdefault((depths[i], g.kind), []).append(i)
        self.const_rows = [
            (i, g.kind) for i, g in enumerate(c.gates) if g.kind in (GateKind.CONST0, GateKind.CONST1)
        ]
        self.levels = []
        for (_, kind), members in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
            t = max(len(c.gates[i].args) for i in members)
            pad = self._const1_row if kind is GateKind.AND else self._const0_row
            idx = np.full((len(members), t), pad, dtype=np.int64)
            for r, i in enumerate(members):
                a = c.gates[i].args
                idx[r, : len(a)] = a
            self.levels.append((kind, np.asarray(members, dtype=np.int64), idx))

    def run(self, input_words: np.ndarray) -> np.ndarray:
        """input_words: (n_inputs, n_words) uint64.  Returns (n_gates+2, n_words)."""
        n_words = input_words.shape[1]
        v = np.zeros((self.n_rows, n_words), dtype=np.uint64)
        v[: self.circuit.n_inputs] = input_words
        v[self._const1_row] = ~np.uint64(0)
        for i, kind in self.const_rows:
            v[i] = 0 if kind is GateKind.CONST0 else ~np.uint64(0)
        for kind, members, idx in self.levels:
            if kind is GateKind.NOT:
                v[members] = ~v[idx[:, 0]]
                continue
            acc = v[idx[:, 0]].copy()
            op = {GateKind.AND: np.bitwise_and, GateKind.OR: np.bitwise_or, GateKind.XOR: np.bitwise_xor}[kind]
            for col in range(1, idx.shape[1]):
                op(acc, v[idx[:, col]], out=acc)
            v[members] = acc
        return v

    def outputs(self, input_words: np.ndarray) -> np.ndarray:
        v = self.run(input_words)
        return v[np.asarray(self.circuit.outputs, dtype=np.int64)]


def random_input_words(n_vars: int, n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """(n_vars, ceil(n_samples/64)) uint64 of uniform bits; returns (words, n_words).

    Lanes beyond n_samples in the last word are zeroed.
    """
    n_words = (n_samples + WORD_BITS - 1) // WORD_BITS
    words = rng.integers(0, 1 << 63, size=(n_vars, n_words), dtype=np.uint64)
    words |= rng.integers(0, 2, size=(n_vars, n_words), dtype=np.uint64) << np.uint64(63)
    tail = n_samples - (n_words - 1) * WORD_BITS
    if tail < WORD_BITS:
        words[:, -1] &= np.uint64((1 << tail) - 1)
    return words, n_words


def popcount_words(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words)
