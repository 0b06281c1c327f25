"""Built-in benchmark circuits for tests, demos, and desk-scale experiments.

Real ISCAS-85 netlists are deliberately not vendored; ``scale_model`` builds
random DAGs with the same pin counts and similar gate counts as the classic
suite so that pipelines exercise realistic shapes. Any user-supplied
``.bench`` file works everywhere a fixture does.
"""

from __future__ import annotations

import numpy as np

from .netlist import Gate, GateKind, Netlist, validate

# pin/gate counts of the classic circuits these stand-ins imitate
_SCALE_SHAPES = {
    "c432": (36, 7, 160),
    "c1355": (41, 32, 546),
    "c1908": (33, 25, 880),
    "c7552": (207, 108, 3512),
}


def c17() -> Netlist:
    """The classic 6-NAND, 5-input, 2-output circuit."""
    g = GateKind.NAND
    return validate(Netlist(
        "c17",
        inputs=("G1", "G2", "G3", "G6", "G7"),
        outputs=("G22", "G23"),
        gates=(
            Gate("G10", g, ("G1", "G3")),
            Gate("G11", g, ("G3", "G6")),
            Gate("G16", g, ("G2", "G11")),
            Gate("G19", g, ("G11", "G7")),
            Gate("G22", g, ("G10", "G16")),
            Gate("G23", g, ("G16", "G19")),
        ),
    ))


def identity(width: int = 8) -> Netlist:
    """y_i = x_i through buffers; the easiest learnable map."""
    return validate(Netlist(
        f"identity{width}",
        inputs=tuple(f"x{i}" for i in range(width)),
        outputs=tuple(f"y{i}" for i in range(width)),
        gates=tuple(Gate(f"y{i}", GateKind.BUF, (f"x{i}",)) for i in range(width)),
    ))


def inverter_bank(width: int = 8) -> Netlist:
    """y_i = NOT(x_i); bijective, so input guessing has a unique answer."""
    return validate(Netlist(
        f"inverters{width}",
        inputs=tuple(f"x{i}" for i in range(width)),
        outputs=tuple(f"y{i}" for i in range(width)),
        gates=tuple(Gate(f"y{i}", GateKind.NOT, (f"x{i}",)) for i in range(width)),
    ))


_KIND_POOL = (
    [GateKind.AND] * 5 + [GateKind.OR] * 5 + [GateKind.NAND] * 5
    + [GateKind.NOR] * 5 + [GateKind.XOR] * 2 + [GateKind.XNOR] * 1
    + [GateKind.NOT] * 2
)


def random_dag(n_inputs: int, n_outputs: int, n_gates: int, seed: int,
               name: str | None = None) -> Netlist:
    """A random acyclic circuit; the last ``n_outputs`` gates drive the outputs.

    Fan-ins are drawn from all earlier signals with a bias toward recent
    gates, which yields moderately deep cones rather than a flat layer.
    Deterministic per (shape, seed).
    """
    if n_gates < n_outputs:
        raise ValueError("need at least as many gates as outputs")
    rng = np.random.default_rng(seed)
    inputs = tuple(f"x{i}" for i in range(n_inputs))
    signals = list(inputs)
    gates: list[Gate] = []
    for gi in range(n_gates):
        kind = _KIND_POOL[int(rng.integers(0, len(_KIND_POOL)))]
        arity = 1 if kind in (GateKind.NOT, GateKind.BUF) else 2
        picks: list[str] = []
        while len(picks) < arity:
            # mix uniform draws with recency-biased draws for depth
            if rng.random() < 0.5 and len(signals) > n_inputs:
                lo = max(0, len(signals) - 24)
                s = signals[int(rng.integers(lo, len(signals)))]
            else:
                s = signals[int(rng.integers(0, len(signals)))]
            if s not in picks:
                picks.append(s)
        out = f"g{gi}"
        gates.append(Gate(out, kind, tuple(picks)))
        signals.append(out)
    outputs = tuple(f"g{gi}" for gi in range(n_gates - n_outputs, n_gates))
    return validate(Netlist(name or f"rand{n_gates}", inputs, outputs, tuple(gates)))


def scale_model(which: str, seed: int = 0) -> Netlist:
    """Random stand-in with the pin and gate counts of a classic benchmark."""
    if which not in _SCALE_SHAPES:
        raise ValueError(f"unknown scale model '{which}', choose from {sorted(_SCALE_SHAPES)}")
    n_in, n_out, n_gates = _SCALE_SHAPES[which]
    return random_dag(n_in, n_out, n_gates, seed, name=f"{which}_scale")


def attack_fixture(seed: int = 0) -> Netlist:
    """The ~200-gate desk-scale circuit used by the key-attack experiments."""
    return random_dag(16, 8, 200, seed, name="rand200")
