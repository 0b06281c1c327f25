"""Deep recurrent network built from scratch on numpy.

The recurrent cell is a peephole LSTM: each of the forget/input/output gates
reads the concatenation [h_{t-1}, x_t] through its weight matrix, plus the
previous cell state through an elementwise peephole vector, plus a bias::

    f_t = sigmoid(W_f [h_{t-1}, x_t] + V_f * c_{t-1} + b_f)
    i_t = sigmoid(W_i [h_{t-1}, x_t] + V_i * c_{t-1} + b_i)
    o_t = sigmoid(W_o [h_{t-1}, x_t] + V_o * c_{t-1} + b_o)
    c_t = f_t * c_{t-1} + i_t * tanh(W_c [h_{t-1}, x_t] + b_c)
    h_t = o_t * tanh(c_t)

Note the output gate peeks at c_{t-1}, not c_t. A bit vector becomes a
sequence by splitting it into chunks of ``chunk_width`` bits (zero-padded),
one chunk per timestep; a linear readout maps the final hidden state of the
last layer to the outputs. Training is plain momentum gradient descent on
the summed squared error, with exact backpropagation through time including
the peephole paths. All arithmetic is 64-bit.
"""

from __future__ import annotations

import copy
import io
import json
import math
import zipfile
from dataclasses import dataclass, field

import numpy as np

DEFAULT_ETA = 0.01
DEFAULT_MOMENTUM = 0.9
INIT_RANGE = 0.05
MODEL_FORMAT_VERSION = 1

_GATES = ("f", "i", "o", "c")


class DrnnError(RuntimeError):
    pass


class TrainingDiverged(DrnnError):
    """Raised when the loss goes non-finite; carries the finite history so far."""

    def __init__(self, epoch: int, history: list):
        super().__init__(f"non-finite loss at epoch {epoch}; "
                         f"last finite epoch {history[-1][0] if history else 'none'}")
        self.epoch = epoch
        self.history = history


class ModelFormatError(DrnnError):
    pass


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


class LstmLayer:
    """One peephole LSTM layer; weights drawn uniformly from [-0.05, 0.05].

    The four gate weight matrices live stacked in one (4H, H+in) array in
    row blocks ordered f, i, o, c, so a timestep costs a single matmul; the
    per-gate views in ``w``/``v``/``b`` index into the stacked storage.
    """

    def __init__(self, input_width: int, hidden_width: int, rng: np.random.Generator):
        self.input_width = input_width
        self.hidden_width = hidden_width
        H = hidden_width
        cat = hidden_width + input_width
        self.w_all = rng.uniform(-INIT_RANGE, INIT_RANGE, (4 * H, cat))
        self.v_all = rng.uniform(-INIT_RANGE, INIT_RANGE, 3 * H)
        self.b_all = rng.uniform(-INIT_RANGE, INIT_RANGE, 4 * H)
        self.w = {g: self.w_all[j * H:(j + 1) * H] for j, g in enumerate(_GATES)}
        self.v = {g: self.v_all[j * H:(j + 1) * H] for j, g in enumerate(("f", "i", "o"))}
        self.b = {g: self.b_all[j * H:(j + 1) * H] for j, g in enumerate(_GATES)}


class LstmNetwork:
    """Stacked peephole LSTM layers (one or two) plus a linear readout.

    ``in_bits`` is the widest input the network accepts; shorter inputs are
    zero-padded. The input is consumed ``chunk_width`` bits per timestep.
    """

    def __init__(self, in_bits: int, out_bits: int, hidden=(128,),
                 chunk_width: int = 8, seed: int = 0):
        hidden = tuple(int(h) for h in (hidden if hasattr(hidden, "__len__") else (hidden,)))
        if len(hidden) not in (1, 2):
            raise ValueError("network depth is one or two recurrent layers")
        if in_bits < 1 or out_bits < 1 or chunk_width < 1:
            raise ValueError("widths must be positive")
        self.in_bits = in_bits
        self.out_bits = out_bits
        self.chunk_width = chunk_width
        self.steps = math.ceil(in_bits / chunk_width)
        self.hidden = hidden
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.layers = []
        prev = chunk_width
        for h in hidden:
            self.layers.append(LstmLayer(prev, h, rng))
            prev = h
        self.w_out = rng.uniform(-INIT_RANGE, INIT_RANGE, (out_bits, prev))
        self.b_out = rng.uniform(-INIT_RANGE, INIT_RANGE, out_bits)
        self._cache = None

    def parameters(self) -> dict[str, np.ndarray]:
        """Live views of every parameter array, in a fixed order."""
        params: dict[str, np.ndarray] = {}
        for li, layer in enumerate(self.layers):
            for g in _GATES:
                params[f"l{li}.w_{g}"] = layer.w[g]
            for g in ("f", "i", "o"):
                params[f"l{li}.v_{g}"] = layer.v[g]
            for g in _GATES:
                params[f"l{li}.b_{g}"] = layer.b[g]
        params["w_out"] = self.w_out
        params["b_out"] = self.b_out
        return params

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.parameters().items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, v in self.parameters().items():
            v[...] = snap[k]

    def clone(self) -> "LstmNetwork":
        return copy.deepcopy(self)


def _chunk(net: LstmNetwork, xb: np.ndarray) -> np.ndarray:
    """(B, width<=in_bits) floats -> (T, B, chunk_width), zero-padded."""
    xb = np.atleast_2d(np.asarray(xb, dtype=np.float64))
    if xb.shape[1] > net.in_bits:
        raise ValueError(f"input width {xb.shape[1]} exceeds configured {net.in_bits}")
    padded = np.zeros((xb.shape[0], net.steps * net.chunk_width))
    padded[:, : xb.shape[1]] = xb
    return padded.reshape(xb.shape[0], net.steps, net.chunk_width).transpose(1, 0, 2)


def forward(net: LstmNetwork, x, remember: bool = False) -> np.ndarray:
    """Network output for one bit vector (or a (B, width) batch of them).

    With ``remember=True`` the activations are cached on the network for a
    following ``backward`` call.
    """
    single = np.asarray(x).ndim == 1
    chunks = _chunk(net, x)
    T, B = chunks.shape[0], chunks.shape[1]
    cache = {"chunks": chunks, "layers": []}
    seq = chunks
    for layer in net.layers:
        H = layer.hidden_width
        h = np.zeros((T + 1, B, H))
        c = np.zeros((T + 1, B, H))
        cats = np.empty((T, B, H + layer.input_width))
        gates = np.empty((T, B, 4 * H))  # f, i, o sigmoided; last block tanh'd
        tanh_c = np.empty((T, B, H))
        for t in range(T):
            cat = cats[t]
            cat[:, :H] = h[t]
            cat[:, H:] = seq[t]
            a = cat @ layer.w_all.T + layer.b_all
            a[:, 0:H] += layer.v["f"] * c[t]
            a[:, H:2 * H] += layer.v["i"] * c[t]
            a[:, 2 * H:3 * H] += layer.v["o"] * c[t]
            g_t = gates[t]
            g_t[:, :3 * H] = _sigmoid(a[:, :3 * H])
            g_t[:, 3 * H:] = np.tanh(a[:, 3 * H:])
            c[t + 1] = g_t[:, :H] * c[t] + g_t[:, H:2 * H] * g_t[:, 3 * H:]
            tanh_c[t] = np.tanh(c[t + 1])
            h[t + 1] = g_t[:, 2 * H:3 * H] * tanh_c[t]
        cache["layers"].append({"cats": cats, "h": h, "c": c, "gates": gates,
                                "tanh_c": tanh_c})
        seq = h[1:]
    z = h[-1] @ net.w_out.T + net.b_out
    if remember:
        cache["h_last"] = h[-1]
        net._cache = cache
    return z[0] if single else z


def loss(predictions, targets) -> float:
    """Summed squared error over all patterns and output pins."""
    z = np.asarray(predictions, dtype=np.float64)
    d = np.asarray(targets, dtype=np.float64)
    if z.shape != d.shape:
        raise ValueError(f"prediction shape {z.shape} != target shape {d.shape}")
    return float(np.sum((z - d) ** 2))


def mse(predictions, targets) -> float:
    """Mean of the squared errors (the loss averaged over every element)."""
    z = np.asarray(predictions, dtype=np.float64)
    return loss(predictions, targets) / z.size


def backward(net: LstmNetwork, targets, input_grads: bool = False):
    """Exact gradients of the summed squared error for the cached batch.

    Requires a preceding ``forward(..., remember=True)``. Returns a dict
    keyed like ``net.parameters()``; with ``input_grads=True`` also returns
    the (B, steps*chunk_width) gradient with respect to the flattened input.
    """
    if net._cache is None:
        raise DrnnError("no cached forward pass; call forward(net, x, remember=True) first")
    cache = net._cache
    d = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    h_last = cache["h_last"]
    z = h_last @ net.w_out.T + net.b_out
    if z.shape != d.shape:
        raise ValueError(f"target shape {d.shape} does not match predictions {z.shape}")
    T, B = cache["chunks"].shape[0], cache["chunks"].shape[1]

    grads = {k: np.zeros_like(v) for k, v in net.parameters().items()}
    dz = 2.0 * (z - d)
    grads["w_out"][...] = dz.T @ h_last
    grads["b_out"][...] = dz.sum(axis=0)

    # gradient arriving at each timestep's hidden output, top layer first
    dh_seq = np.zeros((T, B, net.layers[-1].hidden_width))
    dh_seq[T - 1] = dz @ net.w_out
    for li in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[li]
        lc = cache["layers"][li]
        H = layer.hidden_width
        dw_all = np.zeros_like(layer.w_all)
        dv_all = np.zeros_like(layer.v_all)
        db_all = np.zeros_like(layer.b_all)
        dx_seq = np.empty((T, B, layer.input_width))
        dh_carry = np.zeros((B, H))
        dc_carry = np.zeros((B, H))
        da = np.empty((B, 4 * H))
        for t in range(T - 1, -1, -1):
            g_t = lc["gates"][t]
            f, i, o, g = (g_t[:, j * H:(j + 1) * H] for j in range(4))
            tc = lc["tanh_c"][t]
            c_prev = lc["c"][t]
            cat = lc["cats"][t]

            dh = dh_seq[t] + dh_carry
            do = dh * tc
            dc = dc_carry + dh * o * (1.0 - tc * tc)
            da[:, 0:H] = (dc * c_prev) * f * (1.0 - f)
            da[:, H:2 * H] = (dc * g) * i * (1.0 - i)
            da[:, 2 * H:3 * H] = do * o * (1.0 - o)
            da[:, 3 * H:] = (dc * i) * (1.0 - g * g)

            dw_all += da.T @ cat
            db_all += da.sum(axis=0)
            dv_all[0:H] += (da[:, 0:H] * c_prev).sum(axis=0)
            dv_all[H:2 * H] += (da[:, H:2 * H] * c_prev).sum(axis=0)
            dv_all[2 * H:] += (da[:, 2 * H:3 * H] * c_prev).sum(axis=0)

            dcat = da @ layer.w_all
            dh_carry = dcat[:, :H]
            dx_seq[t] = dcat[:, H:]
            dc_carry = dc * f + da[:, 0:H] * layer.v["f"] \
                + da[:, H:2 * H] * layer.v["i"] + da[:, 2 * H:3 * H] * layer.v["o"]
        for j, gname in enumerate(_GATES):
            grads[f"l{li}.w_{gname}"] = dw_all[j * H:(j + 1) * H]
            grads[f"l{li}.b_{gname}"] = db_all[j * H:(j + 1) * H]
        for j, gname in enumerate(("f", "i", "o")):
            grads[f"l{li}.v_{gname}"] = dv_all[j * H:(j + 1) * H]
        dh_seq = dx_seq
    if input_grads:
        return grads, dx_seq.transpose(1, 0, 2).reshape(B, T * net.chunk_width)
    return grads


def grad_wrt_inputs(net: LstmNetwork, xb, targets) -> np.ndarray:
    """d(loss)/d(input bits) for a batch; used to steer candidate key bits."""
    forward(net, xb, remember=True)
    _, dx = backward(net, targets, input_grads=True)
    net._cache = None
    width = np.atleast_2d(np.asarray(xb)).shape[1]
    return dx[:, :width]


@dataclass
class TrainerState:
    """Momentum optimizer state; update rule dW = eta*step + momentum*dW."""

    eta: float = DEFAULT_ETA
    momentum: float = DEFAULT_MOMENTUM
    batch_size: int = 32
    epoch: int = 0
    velocity: dict = field(default_factory=dict)
    best_dev_mse: float = math.inf
    best_epoch: int = -1

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


def step(net: LstmNetwork, state: TrainerState, direction: dict) -> None:
    """One momentum update. ``direction`` is the descent direction, i.e. the
    negated loss gradients; accumulators persist on ``state`` across calls."""
    params = net.parameters()
    for name, p in params.items():
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
        v = state.eta * direction[name] + state.momentum * v
        state.velocity[name] = v
        p += v


@dataclass
class TrainConfig:
    max_epochs: int = 200
    patience: int = 10
    dev_fraction: float = 0.2
    schedule: str = "constant"  # constant | decay
    decay: float = 0.98
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.dev_fraction <= 0.5:
            raise ValueError("dev_fraction must lie in (0, 0.5]")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.schedule not in ("constant", "decay"):
            raise ValueError("schedule is 'constant' or 'decay'")

    def eta_at(self, epoch: int, eta0: float) -> float:
        if self.schedule == "decay":
            return eta0 * self.decay ** max(0, epoch - 1)
        return eta0


@dataclass
class TrainResult:
    history: list  # (epoch, train_mse, dev_mse, eta) rows; epoch 0 = pre-training
    best_epoch: int
    best_dev_mse: float
    stopped_epoch: int


def train(net: LstmNetwork, table, cfg: TrainConfig,
          state: TrainerState | None = None) -> TrainResult:
    """Momentum-SGD training with a seeded dev split and early stopping.

    Batches are re-shuffled every epoch; the dev MSE is evaluated once per
    epoch and the parameters from the best dev epoch are restored before
    returning. Raises TrainingDiverged if the loss goes non-finite.
    """
    state = state or TrainerState()
    X = np.asarray(table.stimuli, dtype=np.float64)
    D = np.asarray(table.responses, dtype=np.float64)
    rows = len(X)
    if rows < 2 * state.batch_size:
        raise ValueError(f"need at least {2 * state.batch_size} rows to train, got {rows}")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(rows)
    n_dev = max(1, int(round(cfg.dev_fraction * rows)))
    dev_idx, train_idx = perm[:n_dev], perm[n_dev:]
    Xd, Dd = X[dev_idx], D[dev_idx]
    Xt, Dt = X[train_idx], D[train_idx]

    eta0 = state.eta
    history: list[tuple[int, float, float, float]] = []

    def dev_mse() -> float:
        return mse(forward(net, Xd), Dd)

    history.append((0, mse(forward(net, Xt), Dt), dev_mse(), eta0))
    best = history[0][2]
    best_snap = net.snapshot()
    best_epoch = 0
    bad_epochs = 0
    stopped = 0

    for epoch in range(1, cfg.max_epochs + 1):
        state.eta = cfg.eta_at(epoch, eta0)
        state.epoch = epoch
        order = rng.permutation(len(Xt))
        sse = 0.0
        for lo in range(0, len(order), state.batch_size):
            idx = order[lo: lo + state.batch_size]
            z = forward(net, Xt[idx], remember=True)
            batch_loss = loss(z, Dt[idx])
            if not math.isfinite(batch_loss):
                raise TrainingDiverged(epoch, history)
            sse += batch_loss
            grads = backward(net, Dt[idx])
            step(net, state, {k: -g for k, g in grads.items()})
        train_mse = sse / Dt.size
        dm = dev_mse()
        if not math.isfinite(dm):
            raise TrainingDiverged(epoch, history)
        history.append((epoch, train_mse, dm, state.eta))
        stopped = epoch
        if dm < best:
            best = dm
            best_snap = net.snapshot()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break

    net.restore(best_snap)
    net._cache = None
    state.best_dev_mse = best
    state.best_epoch = best_epoch
    state.eta = eta0
    return TrainResult(history, best_epoch, best, stopped)


def write_history_csv(history, path) -> None:
    from pathlib import Path
    lines = ["epoch,train_mse,dev_mse,eta"]
    lines += [f"{e},{tm:.12g},{dm:.12g},{eta:.12g}" for e, tm, dm, eta in history]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_model(net: LstmNetwork) -> bytes:
    """Self-describing snapshot: shapes, dims, and every parameter array."""
    meta = {
        "version": MODEL_FORMAT_VERSION,
        "in_bits": net.in_bits,
        "out_bits": net.out_bits,
        "chunk_width": net.chunk_width,
        "hidden": list(net.hidden),
        "seed": net.seed,
    }
    buf = io.BytesIO()
    arrays = dict(net.parameters())
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(buf, **arrays)
    return buf.getvalue()


def load_model(data: bytes) -> LstmNetwork:
    """Rebuild a network saved by ``save_model``; forward outputs are bit-exact."""
    try:
        archive = np.load(io.BytesIO(data), allow_pickle=False)
        meta = json.loads(bytes(archive["__meta__"]).decode("utf-8"))
    except (zipfile.BadZipFile, OSError, ValueError, KeyError) as exc:
        raise ModelFormatError(f"corrupt or truncated model stream: {exc}") from exc
    if meta.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {meta.get('version')}")
    net = LstmNetwork(meta["in_bits"], meta["out_bits"], tuple(meta["hidden"]),
                      meta["chunk_width"], meta["seed"])
    try:
        for name, param in net.parameters().items():
            stored = archive[name]
            if stored.shape != param.shape:
                raise ModelFormatError(
                    f"shape mismatch for '{name}': {stored.shape} vs {param.shape}")
            param[...] = stored
    except KeyError as exc:
        raise ModelFormatError(f"missing parameter array: {exc}") from exc
    return net
