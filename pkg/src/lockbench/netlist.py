"""Combinational gate-level netlists in the ISCAS-85 ``.bench`` text format.

A netlist is an immutable DAG of named signals: primary inputs, primary
outputs (taps on existing signals), and gates. The accepted grammar is the
de-facto ISCAS-85 distribution format::

    # comment to end of line
    INPUT(name)
    OUTPUT(name)
    name = KIND(arg1, arg2, ...)

Signal names match ``[A-Za-z0-9_]+``, gate kinds are case-insensitive, and
whitespace is insignificant. ``serialize_bench`` additionally emits a
``# bench <name>`` header comment so that the netlist name survives a
parse/serialize roundtrip; files without the header parse with a caller
supplied default name.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass
from enum import Enum


class GateKind(Enum):
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUF = "BUF"


# arity rules: NOT/BUF exactly 1, XOR/XNOR exactly 2 (wider forms are
# ambiguous between parity and one-hot conventions), the rest take >= 2.
_UNARY = {GateKind.NOT, GateKind.BUF}
_BINARY_ONLY = {GateKind.XOR, GateKind.XNOR}


class NetlistError(ValueError):
    """Structural violation: bad arity, undriven output, duplicate driver, cycle."""


class BenchParseError(NetlistError):
    """Malformed ``.bench`` text, with 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Gate:
    output: str
    kind: GateKind
    fanins: tuple[str, ...]


@dataclass(frozen=True)
class Netlist:
    """A validated combinational netlist.

    Declaration order of ``inputs``, ``outputs`` and ``gates`` is significant
    and preserved by parsing and serialization. Instances are immutable and
    safe to share across threads.
    """

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    gates: tuple[Gate, ...]

    @property
    def input_count(self) -> int:
        return len(self.inputs)

    @property
    def output_count(self) -> int:
        return len(self.outputs)

    def driver_of(self, signal: str) -> Gate | None:
        """The gate driving ``signal``, or None for a primary input."""
        return {g.output: g for g in self.gates}.get(signal)


_NAME_RE = re.compile(r"[A-Za-z0-9_]+")


def _check_arity(kind: GateKind, n: int, output: str) -> None:
    if kind in _UNARY:
        if n != 1:
            raise NetlistError(f"gate '{output}': {kind.value} takes exactly 1 fan-in, got {n}")
    elif kind in _BINARY_ONLY:
        if n != 2:
            raise NetlistError(f"gate '{output}': {kind.value} takes exactly 2 fan-ins, got {n}")
    elif n < 2:
        raise NetlistError(f"gate '{output}': {kind.value} takes at least 2 fan-ins, got {n}")


def validate(n: Netlist) -> Netlist:
    """Check all structural invariants, returning ``n`` unchanged.

    Raises NetlistError on: duplicate drivers or declarations, undeclared
    fan-in signals, arity violations, undriven primary outputs, or cycles.
    """
    drivers: dict[str, str] = {}
    for name in n.inputs:
        if name in drivers:
            raise NetlistError(f"duplicate input declaration '{name}'")
        drivers[name] = "input"
    for g in n.gates:
        if g.output in drivers:
            raise NetlistError(f"duplicate driver for signal '{g.output}'")
        drivers[g.output] = "gate"
        _check_arity(g.kind, len(g.fanins), g.output)
    for g in n.gates:
        for s in g.fanins:
            if s not in drivers:
                raise NetlistError(f"gate '{g.output}': undeclared fan-in signal '{s}'")
    seen_out = set()
    for name in n.outputs:
        if name in seen_out:
            raise NetlistError(f"duplicate output declaration '{name}'")
        seen_out.add(name)
        if name not in drivers:
            raise NetlistError(f"primary output '{name}' is not driven")
    topo_order(n)  # raises on cycles
    return n


def parse_bench(text: str, name: str = "top") -> Netlist:
    """Parse ``.bench`` text into a validated Netlist.

    ``name`` is used unless the text carries a ``# bench <name>`` header.
    Accepts LF or CRLF line endings.
    """
    inputs: list[str] = []
    outputs: list[str] = []
    gates: list[Gate] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0] if "#" in raw else raw
        if "#" in raw:
            comment = raw.split("#", 1)[1].strip()
            if comment.startswith("bench ") and lineno == 1:
                m = _NAME_RE.fullmatch(comment[6:].strip())
                if m:
                    name = m.group(0)
        if not line.strip():
            continue
        stripped = line.strip()
        col = raw.index(stripped[0]) + 1

        m = re.fullmatch(r"(INPUT|OUTPUT)\s*\(\s*([^)]*?)\s*\)", stripped, re.IGNORECASE)
        if m:
            sig = m.group(2)
            if not _NAME_RE.fullmatch(sig):
                raise BenchParseError(f"bad signal name '{sig}'", lineno, col + len(m.group(1)) + 1)
            (inputs if m.group(1).upper() == "INPUT" else outputs).append(sig)
            continue

        m = re.fullmatch(r"([^=]+?)\s*=\s*([A-Za-z]+)\s*\(\s*([^)]*?)\s*\)", stripped)
        if m:
            out, kind_txt, args_txt = m.group(1).strip(), m.group(2), m.group(3)
            if not _NAME_RE.fullmatch(out):
                raise BenchParseError(f"bad signal name '{out}'", lineno, col)
            try:
                kind = GateKind[kind_txt.upper()]
            except KeyError:
                raise BenchParseError(
                    f"unknown gate kind '{kind_txt}' for signal '{out}'",
                    lineno, col + stripped.index(kind_txt),
                ) from None
            args = [a.strip() for a in args_txt.split(",")] if args_txt.strip() else []
            for a in args:
                if not _NAME_RE.fullmatch(a):
                    raise BenchParseError(
                        f"bad fan-in name '{a}' for signal '{out}'", lineno, col)
            gates.append(Gate(out, kind, tuple(args)))
            continue

        raise BenchParseError(f"unrecognized statement '{stripped}'", lineno, col)

    return validate(Netlist(name, tuple(inputs), tuple(outputs), tuple(gates)))


def load_bench(path) -> Netlist:
    from pathlib import Path
    p = Path(path)
    return parse_bench(p.read_text(encoding="utf-8"), name=p.stem)


def serialize_bench(n: Netlist) -> str:
    """Render ``n`` as ``.bench`` text (LF line endings).

    ``parse_bench(serialize_bench(n))`` is structurally equal to ``n``.
    """
    lines = [f"# bench {n.name}"]
    lines += [f"INPUT({s})" for s in n.inputs]
    lines += [f"OUTPUT({s})" for s in n.outputs]
    lines += [f"{g.output} = {g.kind.value}({', '.join(g.fanins)})" for g in n.gates]
    return "\n".join(lines) + "\n"


def save_bench(n: Netlist, path) -> None:
    from pathlib import Path
    Path(path).write_text(serialize_bench(n), encoding="utf-8")


def topo_order(n: Netlist) -> tuple[int, ...]:
    """A dependency-respecting permutation of gate indices.

    Kahn's algorithm with a min-heap on declaration index, so the result is
    deterministic for a fixed netlist: among ready gates the one declared
    first comes first. Raises NetlistError listing one cycle if the gate
    graph is cyclic.
    """
    index_of = {g.output: i for i, g in enumerate(n.gates)}
    input_set = set(n.inputs)
    deps: list[list[int]] = [[] for _ in n.gates]  # gate deps as gate indices
    consumers: list[list[int]] = [[] for _ in n.gates]
    for i, g in enumerate(n.gates):
        for s in g.fanins:
            if s in input_set:
                continue
            j = index_of.get(s)
            if j is None:
                raise NetlistError(f"gate '{g.output}': undeclared fan-in signal '{s}'")
            deps[i].append(j)
            consumers[j].append(i)

    pending = [len(d) for d in deps]
    ready = [i for i, p in enumerate(pending) if p == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in consumers[i]:
            pending[j] -= 1
            if pending[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != len(n.gates):
        raise NetlistError("cycle detected: " + " -> ".join(_find_cycle(n, deps, pending)))
    return tuple(order)


def _find_cycle(n: Netlist, deps, pending) -> list[str]:
    # walk dep edges among the unresolved gates until a gate repeats
    stuck = [i for i, p in enumerate(pending) if p > 0]
    at = stuck[0]
    seen: dict[int, int] = {}
    path: list[int] = []
    while at not in seen:
        seen[at] = len(path)
        path.append(at)
        at = next(j for j in deps[at] if pending[j] > 0)
    cycle = path[seen[at]:] + [at]
    return [n.gates[i].output for i in cycle]
