"""Oracle-guided attacks on locked netlists.

Three modes share a threat model: the attacker holds the locked netlist
structure (key width readable, key value hidden) and a limited table of
stimulus/response pairs probed from an activated chip.

* key reconstruction: train a differentiable surrogate of the locked
  circuit on self-simulated (stimulus, key) pairs, then freeze it and run
  gradient descent from the oracle pairs back to a continuous key vector,
  with random restarts; candidates are thresholded and validated against
  the real locked netlist on a held-out oracle slice.
* output guessing: train stimulus -> response on an oracle slice, predict
  the rest; no key involved.
* input guessing: the same with roles swapped, response -> stimulus.

Reports carry exact config echoes so any run can be reproduced bit-for-bit.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .drnn import (LstmNetwork, TrainConfig, TrainerState, forward,
                   grad_wrt_inputs, mse, train)
from .locking import Key, LockedNetlist, apply_key
from .netlist import NetlistError
from .simulator import IOTable, evaluate_batch

KEY_PROCEDURE = "surrogate-gradient-v1"


@dataclass(frozen=True)
class ThreatModel:
    """Attack-visible data: locked structure, oracle table, budget bookkeeping.

    ``locked.correct_key`` is always None here; evaluation-mode comparisons
    take the true key as an explicit argument after the attack finishes.
    """

    locked: LockedNetlist
    oracle: IOTable
    budget_fraction: float

    @classmethod
    def build(cls, locked: LockedNetlist, oracle: IOTable) -> "ThreatModel":
        n_func = len(locked.functional_inputs)
        if oracle.stimuli.shape[1] != n_func:
            raise NetlistError(
                f"oracle stimuli carry {oracle.stimuli.shape[1]} bits but the "
                f"design has {n_func} functional inputs (key bits must not appear)")
        if oracle.responses.shape[1] != locked.netlist.output_count:
            raise NetlistError("oracle response width does not match design outputs")
        try:
            fraction = len(oracle) / float(2 ** n_func)
        except OverflowError:
            fraction = 0.0
        return cls(locked.without_key(), oracle, fraction)


@dataclass
class KeyAttackConfig:
    """Knobs for key reconstruction; every field is echoed into the report."""

    surrogate_rows: int = 8192
    hidden: tuple = (96,)
    chunk_width: int = 8
    epochs: int = 40
    batch_size: int = 64
    eta: float = 0.01
    momentum: float = 0.9
    dev_fraction: float = 0.15
    patience: int = 10
    key_eta: float = 0.05
    key_momentum: float = 0.9
    key_epochs: int = 200
    key_batch: int = 128
    restarts: int = 8
    holdout_fraction: float = 0.25
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KeyAttackConfig":
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass
class PredictAttackConfig:
    """Knobs for output/input guessing."""

    hidden: tuple = (128,)
    chunk_width: int = 8
    epochs: int = 150
    batch_size: int = 32
    eta: float = 0.01
    momentum: float = 0.9
    dev_fraction: float = 0.15
    patience: int = 15
    train_fraction: float = 0.75
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PredictAttackConfig":
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass
class AttackReport:
    """Outcome of one attack run.

    ``match_rate`` is the exact held-out row match; ``per_pin`` holds one
    (real average, predicted average) pair per pin for curve plotting.
    All metric fields are reproducible from ``config`` alone; only
    ``wall_seconds`` varies between identical runs.
    """

    mode: str
    procedure: str
    match_rate: float
    bit_accuracy: float
    per_pin: list
    config: dict
    key: str | None = None
    key_bit_accuracy: float | None = None
    wall_seconds: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AttackReport":
        return cls(**json.loads(text))

    def metric_fields(self) -> dict:
        """Everything except wall-clock, for reproducibility comparisons."""
        d = asdict(self)
        d.pop("wall_seconds")
        return d


def write_per_pin_csv(report: AttackReport, path) -> None:
    lines = ["pin_index,real_avg,predicted_avg"]
    for row in report.per_pin:
        lines.append(f"{row['pin']},{row['real_avg']:.10g},{row['predicted_avg']:.10g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def score_key(locked: LockedNetlist, key: Key, holdout: IOTable) -> float:
    """Fraction of holdout rows the candidate key reproduces exactly."""
    if key.width != locked.key_input_count:
        raise NetlistError(
            f"key width {key.width} does not match {locked.key_input_count} key inputs")
    ys = evaluate_batch(apply_key(locked, key), holdout.stimuli)
    return float(np.all(ys == holdout.responses, axis=1).mean())


def _seed_for(base: int, *tags: int) -> int:
    return int(np.random.SeedSequence([base, *tags]).generate_state(1)[0])


def attack_key(tm: ThreatModel, cfg: KeyAttackConfig,
               true_key: Key | None = None) -> AttackReport:
    """Recover a key from the oracle table; never reads the hidden key.

    Stage A trains a surrogate of the locked circuit on self-simulated
    random (stimulus, key) rows. Stage B freezes it and, per restart, runs
    momentum descent on a continuous key vector in [0,1]^k against the
    oracle pairs, clamping after every update. Stage C thresholds each
    restart at 0.5 and keeps the candidate with the best exact match rate on
    a held-out oracle slice (ties go to the earlier restart). If
    ``true_key`` is supplied, the report also carries the key-bit match rate
    of the final candidate; the attack itself never consults it.
    """
    t0 = time.perf_counter()
    locked = tm.locked.without_key()
    n_func = len(locked.functional_inputs)
    kw = locked.key_input_count
    n_out = locked.netlist.output_count

    rows = len(tm.oracle)
    n_hold = int(round(cfg.holdout_fraction * rows))
    if n_hold < 1 or rows - n_hold < 1:
        raise ValueError(
            f"oracle with {rows} rows is too small for holdout fraction "
            f"{cfg.holdout_fraction}")
    split_rng = np.random.default_rng(_seed_for(cfg.seed, 0))
    perm = split_rng.permutation(rows)
    hold_idx, opt_idx = perm[:n_hold], perm[n_hold:]
    holdout = tm.oracle.subset(hold_idx)

    # stage A: self-simulated surrogate training table over (x, k)
    data_rng = np.random.default_rng(_seed_for(cfg.seed, 1))
    xs = data_rng.integers(0, 2, size=(cfg.surrogate_rows, n_func), dtype=np.uint8)
    ks = data_rng.integers(0, 2, size=(cfg.surrogate_rows, kw), dtype=np.uint8)
    xk = np.concatenate([xs, ks], axis=1)
    ys = evaluate_batch(locked.netlist, xk)
    synth = IOTable(locked.netlist.inputs, locked.netlist.outputs, xk, ys,
                    seed=cfg.seed, source=f"{locked.netlist.name}+selfsim")
    net = LstmNetwork(n_func + kw, n_out, cfg.hidden, cfg.chunk_width,
                      seed=_seed_for(cfg.seed, 2))
    state = TrainerState(eta=cfg.eta, momentum=cfg.momentum, batch_size=cfg.batch_size)
    fit = train(net, synth, TrainConfig(
        max_epochs=cfg.epochs, patience=cfg.patience, dev_fraction=cfg.dev_fraction,
        seed=_seed_for(cfg.seed, 3)), state)

    # stage B: gradient descent on the key vector through the frozen surrogate
    x_opt = tm.oracle.stimuli[opt_idx].astype(np.float64)
    y_opt = tm.oracle.responses[opt_idx].astype(np.float64)
    candidates: list[Key] = []
    for r in range(cfg.restarts):
        rr = np.random.default_rng(_seed_for(cfg.seed, 4, r))
        k_vec = rr.uniform(0.0, 1.0, kw)
        vel = np.zeros(kw)
        for _ in range(cfg.key_epochs):
            order = rr.permutation(len(x_opt))
            for lo in range(0, len(order), cfg.key_batch):
                idx = order[lo: lo + cfg.key_batch]
                xb = np.concatenate(
                    [x_opt[idx], np.tile(k_vec, (len(idx), 1))], axis=1)
                gk = grad_wrt_inputs(net, xb, y_opt[idx])[:, n_func:].sum(axis=0)
                vel = cfg.key_eta * (-gk) + cfg.key_momentum * vel
                k_vec = np.clip(k_vec + vel, 0.0, 1.0)
        candidates.append(Key(tuple(int(b) for b in (k_vec >= 0.5))))

    # stage C: validate candidates against the real locked netlist
    scores = [score_key(locked, cand, holdout) for cand in candidates]
    best_r = max(range(len(candidates)), key=lambda r: (scores[r], -r))
    best = candidates[best_r]

    unlocked = apply_key(locked, best)
    pred = evaluate_batch(unlocked, holdout.stimuli)
    bit_acc = float((pred == holdout.responses).mean())
    per_pin = [
        {"pin": j, "name": locked.netlist.outputs[j],
         "real_avg": float(holdout.responses[:, j].mean()),
         "predicted_avg": float(pred[:, j].mean())}
        for j in range(n_out)
    ]

    report = AttackReport(
        mode="key",
        procedure=KEY_PROCEDURE,
        match_rate=scores[best_r],
        bit_accuracy=bit_acc,
        per_pin=per_pin,
        key=best.as_string(),
        config={"attack": "key", "oracle_rows": rows, "functional_inputs": n_func,
                "key_width": kw, "netlist": locked.netlist.name, **cfg.to_dict()},
        extras={"restart_scores": scores, "best_restart": best_r,
                "surrogate_best_dev_mse": fit.best_dev_mse,
                "surrogate_epochs_run": fit.stopped_epoch},
    )
    if true_key is not None:
        matches = sum(a == b for a, b in zip(best.bits, true_key.bits))
        report.key_bit_accuracy = matches / kw
    report.wall_seconds = time.perf_counter() - t0
    return report


def _predict_attack(mode: str, oracle: IOTable, cfg: PredictAttackConfig,
                    source: str) -> AttackReport:
    t0 = time.perf_counter()
    if mode == "output":
        X, Y = oracle.stimuli, oracle.responses
        pin_names = oracle.output_names
    else:
        X, Y = oracle.responses, oracle.stimuli
        pin_names = oracle.input_names

    rows = len(X)
    n_train = int(round(cfg.train_fraction * rows))
    if n_train < 1 or rows - n_train < 1:
        raise ValueError(f"cannot split {rows} rows into non-empty "
                         f"train/test at fraction {cfg.train_fraction}")
    rng = np.random.default_rng(_seed_for(cfg.seed, 10))
    perm = rng.permutation(rows)
    train_idx, test_idx = perm[:n_train], perm[n_train:]

    table = IOTable(tuple(f"in{i}" for i in range(X.shape[1])),
                    tuple(f"out{i}" for i in range(Y.shape[1])),
                    X[train_idx], Y[train_idx], seed=cfg.seed, source=source)
    net = LstmNetwork(X.shape[1], Y.shape[1], cfg.hidden, cfg.chunk_width,
                      seed=_seed_for(cfg.seed, 11))
    state = TrainerState(eta=cfg.eta, momentum=cfg.momentum, batch_size=cfg.batch_size)
    fit = train(net, table, TrainConfig(
        max_epochs=cfg.epochs, patience=cfg.patience, dev_fraction=cfg.dev_fraction,
        seed=_seed_for(cfg.seed, 12)), state)

    preds = np.atleast_2d(forward(net, X[test_idx].astype(np.float64)))
    truth = Y[test_idx]
    hard = (preds >= 0.5).astype(np.uint8)
    bit_acc = float((hard == truth).mean())
    row_match = float(np.all(hard == truth, axis=1).mean())
    per_pin = [
        {"pin": j, "name": pin_names[j],
         "real_avg": float(truth[:, j].mean()),
         "predicted_avg": float(preds[:, j].mean())}
        for j in range(truth.shape[1])
    ]
    return AttackReport(
        mode=mode,
        procedure="held-out-prediction",
        match_rate=row_match,
        bit_accuracy=bit_acc,
        per_pin=per_pin,
        config={"attack": mode, "oracle_rows": rows, "netlist": source,
                **cfg.to_dict()},
        extras={"test_rows": int(rows - n_train),
                "model_best_dev_mse": fit.best_dev_mse,
                "model_epochs_run": fit.stopped_epoch,
                "test_mse": mse(preds, truth.astype(np.float64))},
        wall_seconds=time.perf_counter() - t0,
    )


def attack_output(tm: ThreatModel, cfg: PredictAttackConfig) -> AttackReport:
    """Predict responses for unseen stimuli from oracle pairs alone."""
    return _predict_attack("output", tm.oracle, cfg, tm.locked.netlist.name)


def attack_input(tm: ThreatModel, cfg: PredictAttackConfig) -> AttackReport:
    """Predict stimuli from desired responses; roles of attack_output swapped."""
    return _predict_attack("input", tm.oracle, cfg, tm.locked.netlist.name)
