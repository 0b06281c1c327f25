"""Logic encryption: splice key-controlled XOR/XNOR gates into a netlist.

A key gate replaces a wire ``w`` with ``w = XOR(w_enc, keyinput_i)`` (or the
XNOR dual), where ``w_enc`` is the renamed original driver output. The
correct key bit is the one that makes the gate a pass-through: 0 for XOR,
1 for XNOR. Key inputs are ordinary primary inputs named ``keyinput0..k-1``,
declared after all functional inputs.

Every inserted key gate is certified observable at lock time: flipping its
key bit must corrupt at least one output for at least one functional input.
Unobservable insertions are re-drawn, so downstream success metrics never
silently count redundant key bits.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .netlist import Gate, GateKind, Netlist, NetlistError, validate

KEY_INPUT_PREFIX = "keyinput"
EXHAUSTIVE_INPUT_LIMIT = 20
CERT_SAMPLE_COUNT = 4096
CERT_RETRIES_PER_BIT = 32


@dataclass(frozen=True)
class Key:
    """An ordered key bit vector; bit i binds to ``keyinput{i}``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("key bits must be 0 or 1")

    @property
    def width(self) -> int:
        return len(self.bits)

    @classmethod
    def from_string(cls, text: str) -> "Key":
        text = text.strip()
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"key string must be nonempty '0'/'1' characters, got {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_int(cls, code: int, width: int) -> "Key":
        return cls(tuple((code >> i) & 1 for i in range(width)))

    def as_string(self) -> str:
        return "".join(map(str, self.bits))

    def as_int(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    def flipped(self, i: int) -> "Key":
        bits = list(self.bits)
        bits[i] ^= 1
        return Key(tuple(bits))


def read_key(path) -> Key:
    return Key.from_string(Path(path).read_text(encoding="utf-8"))


def write_key(key: Key, path) -> None:
    Path(path).write_text(key.as_string() + "\n", encoding="utf-8")


@dataclass(frozen=True)
class LockedNetlist:
    """A locked design: functional inputs first, then ``key_input_count`` key inputs.

    ``correct_key`` is present only in evaluation mode; attack code must not
    read it.
    """

    netlist: Netlist
    key_input_count: int
    correct_key: Key | None = None

    @property
    def functional_inputs(self) -> tuple[str, ...]:
        return self.netlist.inputs[: len(self.netlist.inputs) - self.key_input_count]

    @property
    def key_inputs(self) -> tuple[str, ...]:
        return self.netlist.inputs[len(self.netlist.inputs) - self.key_input_count:]

    def without_key(self) -> "LockedNetlist":
        """Attack-visible view: structure only, hidden key stripped."""
        return replace(self, correct_key=None)

    @classmethod
    def from_netlist(cls, n: Netlist, correct_key: Key | None = None) -> "LockedNetlist":
        """Recognize key inputs in a parsed netlist by the ``keyinput`` prefix."""
        key_names = [s for s in n.inputs if s.startswith(KEY_INPUT_PREFIX)]
        expected = tuple(f"{KEY_INPUT_PREFIX}{i}" for i in range(len(key_names)))
        if tuple(n.inputs[len(n.inputs) - len(key_names):]) != expected:
            raise NetlistError(
                "key inputs must be keyinput0..keyinput{k-1} declared after all functional inputs")
        if correct_key is not None and correct_key.width != len(key_names):
            raise NetlistError(
                f"key width {correct_key.width} does not match {len(key_names)} key inputs")
        return cls(n, len(key_names), correct_key)


def lock_random(n: Netlist, key_width: int, seed: int) -> tuple[LockedNetlist, Key]:
    """Insert ``key_width`` key gates on random distinct wires.

    Sites are gate outputs, preferring internal wires over primary outputs;
    XOR vs XNOR is chosen uniformly, which forces the correct key bit.
    Deterministic for a fixed (netlist, key_width, seed) triple.
    """
    if key_width < 1:
        raise ValueError("key_width must be >= 1")
    rng = np.random.default_rng(seed)

    internal = [g.output for g in n.gates if g.output not in set(n.outputs)]
    pool = internal if len(internal) >= key_width else [g.output for g in n.gates]
    if len(pool) < key_width:
        raise NetlistError(
            f"insufficient distinct insertable wires: {len(pool)} < {key_width}")

    sites = list(rng.choice(len(pool), size=key_width, replace=False))
    use_xnor = [bool(rng.integers(0, 2)) for _ in range(key_width)]
    taken = {pool[s] for s in sites}

    def build(wires: list[str]) -> tuple[LockedNetlist, Key]:
        gates: list[Gate] = []
        enc_name = {w: _fresh_name(n, f"{w}_enc{i}") for i, w in enumerate(wires)}
        wire_bit = {w: i for i, w in enumerate(wires)}
        for g in n.gates:
            if g.output in wire_bit:
                i = wire_bit[g.output]
                kind = GateKind.XNOR if use_xnor[i] else GateKind.XOR
                gates.append(Gate(enc_name[g.output], g.kind, g.fanins))
                gates.append(Gate(g.output, kind, (enc_name[g.output], f"{KEY_INPUT_PREFIX}{i}")))
            else:
                gates.append(g)
        inputs = n.inputs + tuple(f"{KEY_INPUT_PREFIX}{i}" for i in range(key_width))
        locked_net = validate(Netlist(n.name, inputs, n.outputs, tuple(gates)))
        key = Key(tuple(1 if x else 0 for x in use_xnor))
        return LockedNetlist(locked_net, key_width, key), key

    wires = [pool[s] for s in sites]
    locked, key = build(wires)
    for i in range(key_width):
        retries = 0
        while not _bit_observable(locked, key, i, rng):
            retries += 1
            if retries > CERT_RETRIES_PER_BIT:
                raise NetlistError(
                    f"non-redundancy certification failed for key bit {i} "
                    f"after {CERT_RETRIES_PER_BIT} retries")
            free = [w for w in pool if w not in taken]
            if not free:
                raise NetlistError("insufficient distinct insertable wires for re-draw")
            taken.discard(wires[i])
            wires[i] = free[int(rng.integers(0, len(free)))]
            taken.add(wires[i])
            locked, key = build(wires)
    return locked, key


def _fresh_name(n: Netlist, base: str) -> str:
    used = set(n.inputs) | {g.output for g in n.gates}
    name = base
    while name in used:
        name += "_"
    return name


def _bit_observable(locked: LockedNetlist, key: Key, i: int, rng) -> bool:
    """True if flipping key bit i changes some output for some stimulus."""
    from .simulator import all_stimuli, evaluate_batch

    good = apply_key(locked, key)
    bad = apply_key(locked, key.flipped(i))
    width = len(locked.functional_inputs)
    if width <= EXHAUSTIVE_INPUT_LIMIT:
        for start in range(0, 1 << width, 1 << 16):
            xs = all_stimuli(width, start, min(1 << 16, (1 << width) - start))
            if np.any(evaluate_batch(good, xs) != evaluate_batch(bad, xs)):
                return True
        return False
    xs = rng.integers(0, 2, size=(CERT_SAMPLE_COUNT, width), dtype=np.uint8)
    return bool(np.any(evaluate_batch(good, xs) != evaluate_batch(bad, xs)))


def apply_key(l: LockedNetlist, k: Key) -> Netlist:
    """Bind key bits as constants, folding each key gate to BUF or NOT.

    XOR with 0 and XNOR with 1 become pass-throughs; the opposite bits
    become inverters. Key inputs may only feed 2-input XOR/XNOR gates.
    """
    if k.width != l.key_input_count:
        raise NetlistError(
            f"key width {k.width} does not match {l.key_input_count} key inputs")
    key_bit = {name: k.bits[i] for i, name in enumerate(l.key_inputs)}
    gates: list[Gate] = []
    for g in l.netlist.gates:
        keyed = [s for s in g.fanins if s in key_bit]
        if not keyed:
            gates.append(g)
            continue
        if g.kind not in (GateKind.XOR, GateKind.XNOR) or len(g.fanins) != 2 or len(keyed) != 1:
            raise NetlistError(
                f"gate '{g.output}': key inputs may only feed 2-input XOR/XNOR key gates")
        bit = key_bit[keyed[0]]
        other = g.fanins[0] if g.fanins[1] == keyed[0] else g.fanins[1]
        inverting = (bit == 1) if g.kind is GateKind.XOR else (bit == 0)
        gates.append(Gate(g.output, GateKind.NOT if inverting else GateKind.BUF, (other,)))
    return validate(Netlist(l.netlist.name, l.functional_inputs,
                            l.netlist.outputs, tuple(gates)))


@dataclass(frozen=True)
class EquivVerdict:
    """Result of an equivalence check.

    ``kind`` is one of 'exhaustive-equal', 'sampled-equal', 'counterexample'.
    ``samples`` is the number of stimuli compared; ``counterexample`` holds a
    differing stimulus when kind is 'counterexample'.
    """

    kind: str
    samples: int
    counterexample: tuple[int, ...] | None = None

    @property
    def equivalent(self) -> bool:
        return self.kind != "counterexample"


def equiv_check(a: Netlist, b: Netlist, budget: int = 4096, seed: int = 0) -> EquivVerdict:
    """Compare two netlists: exhaustive up to 20 inputs, sampled beyond.

    A counterexample verdict carries one concrete differing stimulus.
    """
    from .simulator import all_stimuli

    if a.inputs != b.inputs or a.outputs != b.outputs:
        raise NetlistError("netlists do not share input/output signatures")
    width = a.input_count
    if width <= EXHAUSTIVE_INPUT_LIMIT:
        total = 1 << width
        for start in range(0, total, 1 << 16):
            xs = all_stimuli(width, start, min(1 << 16, total - start))
            cex = _first_difference(a, b, xs)
            if cex is not None:
                return EquivVerdict("counterexample", total, cex)
        return EquivVerdict("exhaustive-equal", total)
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, 2, size=(budget, width), dtype=np.uint8)
    cex = _first_difference(a, b, xs)
    if cex is not None:
        return EquivVerdict("counterexample", budget, cex)
    return EquivVerdict("sampled-equal", budget)


def _first_difference(a: Netlist, b: Netlist, xs: np.ndarray):
    from .simulator import evaluate_batch

    ya = evaluate_batch(a, xs)
    yb = evaluate_batch(b, xs)
    diff = np.nonzero(np.any(ya != yb, axis=1))[0]
    if diff.size == 0:
        return None
    return tuple(int(v) for v in xs[diff[0]])
