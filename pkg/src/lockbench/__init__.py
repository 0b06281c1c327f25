"""Logic-locking workbench.

Lock combinational bench-format netlists with key gates, simulate them to
build stimulus/response tables, and mount recurrent-network attacks (key
reconstruction, output guessing, input guessing) validated against exact
brute-force oracles at desk scale.
"""

from .netlist import (BenchParseError, Gate, GateKind, Netlist, NetlistError,
                      load_bench, parse_bench, save_bench, serialize_bench,
                      topo_order, validate)
from .locking import (EquivVerdict, Key, LockedNetlist, apply_key, equiv_check,
                      lock_random, read_key, write_key)
from .simulator import (IOTable, all_stimuli, brute_force_keys, evaluate,
                        evaluate_batch, gen_io_table, read_io_csv, write_io_csv)
from .drnn import (LstmNetwork, ModelFormatError, TrainConfig, TrainerState,
                   TrainingDiverged, TrainResult, backward, forward,
                   grad_wrt_inputs, load_model, loss, mse, save_model, step,
                   train)
from .attacks import (AttackReport, KeyAttackConfig, PredictAttackConfig,
                      ThreatModel, attack_input, attack_key, attack_output,
                      score_key)
from . import fixtures

__all__ = [
    "AttackReport", "BenchParseError", "EquivVerdict", "Gate", "GateKind",
    "IOTable", "Key", "KeyAttackConfig", "LockedNetlist", "LstmNetwork",
    "ModelFormatError", "Netlist", "NetlistError", "PredictAttackConfig",
    "ThreatModel", "TrainConfig", "TrainerState", "TrainingDiverged",
    "TrainResult", "all_stimuli", "apply_key", "attack_input", "attack_key",
    "attack_output", "backward", "brute_force_keys", "equiv_check",
    "evaluate", "evaluate_batch", "fixtures", "forward", "gen_io_table",
    "grad_wrt_inputs", "load_bench", "load_model", "lock_random", "loss",
    "mse", "parse_bench", "read_io_csv", "read_key", "save_bench",
    "save_model", "score_key", "serialize_bench", "step", "topo_order",
    "train", "validate", "write_io_csv", "write_key",
]
