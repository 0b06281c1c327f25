"""Gate-level simulation and stimulus/response table generation.

Two evaluation routes are provided: ``evaluate`` walks gates one stimulus at
a time with plain integer logic, while ``evaluate_batch`` packs 64 stimuli
per machine word per signal and applies each gate once per word column. The
two must agree bit-exactly; the test suite additionally checks both against
a third, independently written reference evaluator.

Brute-force key enumeration (``brute_force_keys``) is the exact ground-truth
oracle used to validate learned key-recovery attacks at desk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .netlist import GateKind, Netlist, NetlistError, topo_order

BRUTE_FORCE_MAX_KEY_BITS = 24


@dataclass(frozen=True, eq=False)
class IOTable:
    """Ordered stimulus/response samples with their pin ordering.

    ``stimuli`` is a (rows, inputs) uint8 array, ``responses`` a matching
    (rows, outputs) array. Duplicate stimuli are allowed and preserved.
    """

    input_names: tuple[str, ...]
    output_names: tuple[str, ...]
    stimuli: np.ndarray
    responses: np.ndarray
    seed: int | None = None
    source: str = ""

    def __post_init__(self):
        if self.stimuli.ndim != 2 or self.responses.ndim != 2:
            raise ValueError("stimuli and responses must be 2-D arrays")
        if len(self.stimuli) != len(self.responses):
            raise ValueError("stimulus and response row counts differ")
        if self.stimuli.shape[1] != len(self.input_names):
            raise ValueError("stimulus width does not match input names")
        if self.responses.shape[1] != len(self.output_names):
            raise ValueError("response width does not match output names")

    def __len__(self) -> int:
        return len(self.stimuli)

    def rows(self):
        """Iterate (stimulus, response) pairs in order."""
        return zip(self.stimuli, self.responses)

    def subset(self, idx) -> "IOTable":
        return IOTable(self.input_names, self.output_names,
                       self.stimuli[idx], self.responses[idx],
                       seed=self.seed, source=self.source)


def _as_bits(x, width: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.uint8)
    if arr.ndim != 1 or arr.shape[0] != width:
        raise ValueError(f"stimulus width {arr.shape} does not match netlist width {width}")
    return arr


def evaluate(n: Netlist, x) -> np.ndarray:
    """Response of ``n`` for one stimulus, one topo-order pass per gate."""
    bits = _as_bits(x, n.input_count)
    val = {s: int(b) for s, b in zip(n.inputs, bits)}
    order = topo_order(n)
    for gi in order:
        g = n.gates[gi]
        ins = [val[s] for s in g.fanins]
        val[g.output] = _scalar_gate(g.kind, ins)
    return np.array([val[s] for s in n.outputs], dtype=np.uint8)


def _scalar_gate(kind: GateKind, ins: list[int]) -> int:
    if kind is GateKind.AND:
        return int(all(ins))
    if kind is GateKind.NAND:
        return int(not all(ins))
    if kind is GateKind.OR:
        return int(any(ins))
    if kind is GateKind.NOR:
        return int(not any(ins))
    if kind is GateKind.XOR:
        return ins[0] ^ ins[1]
    if kind is GateKind.XNOR:
        return 1 - (ins[0] ^ ins[1])
    if kind is GateKind.NOT:
        return 1 - ins[0]
    return ins[0]  # BUF


def evaluate_batch(n: Netlist, xs) -> np.ndarray:
    """Responses for many stimuli, 64 per word lane.

    ``xs`` is a (rows, inputs) array of 0/1. Results equal mapping
    ``evaluate`` over the rows.
    """
    xs = np.asarray(xs, dtype=np.uint8)
    if xs.ndim != 2 or xs.shape[1] != n.input_count:
        raise ValueError(f"stimulus block {xs.shape} does not match input count {n.input_count}")
    rows = xs.shape[0]
    words = max(1, (rows + 63) // 64)
    padded = words * 64

    val: dict[str, np.ndarray] = {}
    col = np.zeros(padded, dtype=np.uint8)
    for i, s in enumerate(n.inputs):
        col[:rows] = xs[:, i]
        val[s] = np.packbits(col, bitorder="little").view(np.uint64)

    for gi in topo_order(n):
        g = n.gates[gi]
        ins = [val[s] for s in g.fanins]
        val[g.output] = _word_gate(g.kind, ins)

    out = np.empty((rows, n.output_count), dtype=np.uint8)
    for j, s in enumerate(n.outputs):
        out[:, j] = np.unpackbits(val[s].view(np.uint8), bitorder="little")[:rows]
    return out


def _word_gate(kind: GateKind, ins: list[np.ndarray]) -> np.ndarray:
    if kind is GateKind.AND or kind is GateKind.NAND:
        acc = ins[0] & ins[1]
        for v in ins[2:]:
            acc = acc & v
        return ~acc if kind is GateKind.NAND else acc
    if kind is GateKind.OR or kind is GateKind.NOR:
        acc = ins[0] | ins[1]
        for v in ins[2:]:
            acc = acc | v
        return ~acc if kind is GateKind.NOR else acc
    if kind is GateKind.XOR:
        return ins[0] ^ ins[1]
    if kind is GateKind.XNOR:
        return ~(ins[0] ^ ins[1])
    if kind is GateKind.NOT:
        return ~ins[0]
    return ins[0].copy()  # BUF


def all_stimuli(width: int, start: int = 0, count: int | None = None) -> np.ndarray:
    """Exhaustive stimulus block: rows are the binary digits of start..start+count-1.

    Bit i of the integer maps to input column i, so row order follows the
    natural integer enumeration.
    """
    total = 1 << width
    if count is None:
        count = total - start
    codes = np.arange(start, start + count, dtype=np.uint64)
    return ((codes[:, None] >> np.arange(width, dtype=np.uint64)[None, :]) & 1).astype(np.uint8)


def gen_io_table(n: Netlist, count: int, seed: int) -> IOTable:
    """``count`` uniformly random stimuli with simulated responses."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, 2, size=(count, n.input_count), dtype=np.uint8)
    ys = evaluate_batch(n, xs)
    return IOTable(n.inputs, n.outputs, xs, ys, seed=seed, source=n.name)


def write_io_csv(table: IOTable, path) -> None:
    """CSV of '0'/'1' strings plus a sibling ``.json`` metadata file."""
    p = Path(path)
    lines = ["inputs,outputs"]
    for x, y in table.rows():
        lines.append("".join(map(str, x)) + "," + "".join(map(str, y)))
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {
        "seed": table.seed,
        "source": table.source,
        "input_names": list(table.input_names),
        "output_names": list(table.output_names),
    }
    p.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def read_io_csv(path) -> IOTable:
    p = Path(path)
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "inputs,outputs":
        raise ValueError(f"{p}: expected 'inputs,outputs' header")
    xs, ys = [], []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        a, b = ln.strip().split(",")
        xs.append([int(c) for c in a])
        ys.append([int(c) for c in b])
    stimuli = np.array(xs, dtype=np.uint8)
    responses = np.array(ys, dtype=np.uint8)
    meta_path = p.with_suffix(".json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        return IOTable(tuple(meta["input_names"]), tuple(meta["output_names"]),
                       stimuli, responses, seed=meta.get("seed"),
                       source=meta.get("source", ""))
    in_names = tuple(f"x{i}" for i in range(stimuli.shape[1]))
    out_names = tuple(f"y{i}" for i in range(responses.shape[1]))
    return IOTable(in_names, out_names, stimuli, responses)


def brute_force_keys(locked, oracle: IOTable):
    """Score every possible key by exact output-match rate over ``oracle``.

    Returns [(Key, rate)] sorted by rate descending, ties broken by key
    value ascending. The correct key always scores 1.0. Guarded to key
    widths of at most 24 bits.
    """
    from .locking import Key, apply_key

    k = locked.key_input_count
    if k > BRUTE_FORCE_MAX_KEY_BITS:
        raise NetlistError(
            f"key width {k} exceeds brute-force enumeration guard "
            f"({BRUTE_FORCE_MAX_KEY_BITS} bits)")
    scored = []
    for code in range(1 << k):
        key = Key.from_int(code, k)
        ys = evaluate_batch(apply_key(locked, key), oracle.stimuli)
        rate = float(np.all(ys == oracle.responses, axis=1).mean())
        scored.append((key, rate))
    scored.sort(key=lambda kr: (-kr[1], kr[0].as_int()))
    return scored
