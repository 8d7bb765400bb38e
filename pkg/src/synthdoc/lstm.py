"""Character-level multi-layer LSTM language model, built on numpy.

The model embeds each character, runs it through L stacked LSTM layers
(gate order: input i, forget f, output o, candidate g) and projects the
top hidden vector to next-character logits. Training is truncated
backpropagation through time over fixed-length windows with the recurrent
state carried between consecutive windows of the same stream and reset
wherever the document separator appears. Updates use adaptive-moment
estimation with elementwise gradient clipping.

Everything here is hand-written; the analytic gradients are verified
against central finite differences (see :func:`gradient_check`).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .windowing import CharVocab, TrainingSequence, build_char_vocab

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Non-finite loss or gradient during training."""


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------


def sigmoid(x: np.ndarray) -> np.ndarray:
    # branch on sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# Parameters and state
# ---------------------------------------------------------------------------


class LstmParams:
    """All learnable weights.

    embedding [V, D]; per layer: W [4H, in], U [4H, H], b [4H] with the
    gate blocks ordered i, f, o, g; output projection proj_w [V, H] and
    proj_b [V].
    """

    def __init__(self, embedding, layers, proj_w, proj_b):
        vocab_size, embed_dim = embedding.shape
        hidden = layers[0][1].shape[1]
        for ell, (w, u, b) in enumerate(layers):
            in_dim = embed_dim if ell == 0 else hidden
            if w.shape != (4 * hidden, in_dim) or u.shape != (4 * hidden, hidden) \
                    or b.shape != (4 * hidden,):
                raise ValueError("layer %d weight shapes inconsistent" % ell)
        if proj_w.shape != (vocab_size, hidden) or proj_b.shape != (vocab_size,):
            raise ValueError("projection shapes inconsistent")
        self.embedding = embedding
        self.layers = [(w, u, b) for w, u, b in layers]
        self.proj_w = proj_w
        self.proj_b = proj_b

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def hidden(self) -> int:
        return self.layers[0][1].shape[1]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def dtype(self):
        return self.embedding.dtype

    @classmethod
    def init(cls, vocab_size, num_layers, hidden, embed_dim=None, scale=0.08,
             rng=None, dtype=np.float32) -> "LstmParams":
        """Uniform(-scale, scale) weights, zero biases."""
        if vocab_size < 2 or num_layers < 1 or hidden < 1:
            raise ValueError("vocab_size >= 2, num_layers >= 1, hidden >= 1 required")
        embed_dim = hidden if embed_dim is None else embed_dim
        rng = np.random.default_rng(rng)

        def u(*shape):
            return rng.uniform(-scale, scale, size=shape).astype(dtype)

        layers = []
        for ell in range(num_layers):
            in_dim = embed_dim if ell == 0 else hidden
            layers.append((u(4 * hidden, in_dim), u(4 * hidden, hidden),
                           np.zeros(4 * hidden, dtype=dtype)))
        return cls(u(vocab_size, embed_dim), layers, u(vocab_size, hidden),
                   np.zeros(vocab_size, dtype=dtype))

    @classmethod
    def zeros(cls, vocab_size, num_layers, hidden, embed_dim=None,
              dtype=np.float32) -> "LstmParams":
        embed_dim = hidden if embed_dim is None else embed_dim
        layers = []
        for ell in range(num_layers):
            in_dim = embed_dim if ell == 0 else hidden
            layers.append((np.zeros((4 * hidden, in_dim), dtype=dtype),
                           np.zeros((4 * hidden, hidden), dtype=dtype),
                           np.zeros(4 * hidden, dtype=dtype)))
        return cls(np.zeros((vocab_size, embed_dim), dtype=dtype), layers,
                   np.zeros((vocab_size, hidden), dtype=dtype),
                   np.zeros(vocab_size, dtype=dtype))

    def blocks(self) -> dict[str, np.ndarray]:
        """Named parameter blocks, shared references (not copies)."""
        out = {"embedding": self.embedding}
        for ell, (w, u, b) in enumerate(self.layers):
            out["layer%d.W" % ell] = w
            out["layer%d.U" % ell] = u
            out["layer%d.b" % ell] = b
        out["proj.W"] = self.proj_w
        out["proj.b"] = self.proj_b
        return out

    def astype(self, dtype) -> "LstmParams":
        return LstmParams(
            self.embedding.astype(dtype),
            [(w.astype(dtype), u.astype(dtype), b.astype(dtype))
             for w, u, b in self.layers],
            self.proj_w.astype(dtype), self.proj_b.astype(dtype))

    def copy(self) -> "LstmParams":
        return self.astype(self.dtype)


@dataclass
class LstmState:
    """Per-layer recurrent state: h and c, each [num_layers, hidden]."""

    h: np.ndarray
    c: np.ndarray


def zero_state(params: LstmParams) -> LstmState:
    shape = (params.num_layers, params.hidden)
    return LstmState(np.zeros(shape, dtype=params.dtype),
                     np.zeros(shape, dtype=params.dtype))


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


def forward_step(params: LstmParams, char_index: int,
                 state: LstmState) -> tuple[np.ndarray, LstmState]:
    """One recurrence step: next-character logits and the new state.

    Pure: the given state is never mutated.
    """
    if not 0 <= char_index < params.vocab_size:
        raise ValueError("char index %d out of range [0, %d)"
                         % (char_index, params.vocab_size))
    if state.h.shape != (params.num_layers, params.hidden):
        raise ValueError("state shape %s does not match params" % (state.h.shape,))
    hsz = params.hidden
    h_new = np.empty_like(state.h)
    c_new = np.empty_like(state.c)
    x = params.embedding[char_index]
    for ell, (w, u, b) in enumerate(params.layers):
        a = w @ x + u @ state.h[ell] + b
        i = sigmoid(a[:hsz])
        f = sigmoid(a[hsz:2 * hsz])
        o = sigmoid(a[2 * hsz:3 * hsz])
        g = np.tanh(a[3 * hsz:])
        c_new[ell] = f * state.c[ell] + i * g
        h_new[ell] = o * np.tanh(c_new[ell])
        x = h_new[ell]
    logits = params.proj_w @ x + params.proj_b
    return logits, LstmState(h_new, c_new)


def _run_window(params, inputs, targets, h0, c0, eof_index, need_cache):
    """Batched forward over a [T, B] window.

    The state entering step t is zeroed (per stream) wherever the input
    character at t is the document separator, so no state leaks across
    document boundaries. Returns (mean loss, cache or None, hT, cT).
    """
    T, B = inputs.shape
    L, hsz = params.num_layers, params.hidden
    h = h0.copy()
    c = c0.copy()
    cache = None
    if need_cache:
        cache = {
            "inputs": inputs,
            "M": np.empty((T, B, 1), dtype=params.dtype),
            "X": np.empty((T, B, params.embed_dim), dtype=params.dtype),
            "HP": np.empty((T, L, B, hsz), dtype=params.dtype),
            "CP": np.empty((T, L, B, hsz), dtype=params.dtype),
            "I": np.empty((T, L, B, hsz), dtype=params.dtype),
            "F": np.empty((T, L, B, hsz), dtype=params.dtype),
            "O": np.empty((T, L, B, hsz), dtype=params.dtype),
            "G": np.empty((T, L, B, hsz), dtype=params.dtype),
            "TC": np.empty((T, L, B, hsz), dtype=params.dtype),
            "HOUT": np.empty((T, L, B, hsz), dtype=params.dtype),
            "LOGITS": np.empty((T, B, params.vocab_size), dtype=params.dtype),
        }
    loss_sum = 0.0
    for t in range(T):
        if eof_index is None:
            m = np.ones((B, 1), dtype=params.dtype)
        else:
            m = (inputs[t] != eof_index).astype(params.dtype)[:, None]
        x = params.embedding[inputs[t]]
        if need_cache:
            cache["M"][t] = m
            cache["X"][t] = x
        for ell, (w, u, b) in enumerate(params.layers):
            hp = h[ell] * m
            cp = c[ell] * m
            a = x @ w.T + hp @ u.T + b
            i = sigmoid(a[:, :hsz])
            f = sigmoid(a[:, hsz:2 * hsz])
            o = sigmoid(a[:, 2 * hsz:3 * hsz])
            g = np.tanh(a[:, 3 * hsz:])
            c_new = f * cp + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            if need_cache:
                cache["HP"][t, ell] = hp
                cache["CP"][t, ell] = cp
                cache["I"][t, ell] = i
                cache["F"][t, ell] = f
                cache["O"][t, ell] = o
                cache["G"][t, ell] = g
                cache["TC"][t, ell] = tc
                cache["HOUT"][t, ell] = h_new
            h[ell] = h_new
            c[ell] = c_new
            x = h_new
        logits = x @ params.proj_w.T + params.proj_b
        if need_cache:
            cache["LOGITS"][t] = logits
        shifted = logits - logits.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1))
        loss_sum += float((lse - shifted[np.arange(B), targets[t]]).sum())
    return loss_sum / (T * B), cache, h, c


def _backward_window(params, cache, targets):
    """BPTT over a cached window; returns gradients per parameter block."""
    inputs = cache["inputs"]
    T, B = inputs.shape
    L, hsz = params.num_layers, params.hidden
    grads = {name: np.zeros_like(arr) for name, arr in params.blocks().items()}
    d_emb = grads["embedding"]
    probs = softmax(cache["LOGITS"], axis=2)
    dlogits = probs
    t_idx = np.arange(T)[:, None]
    b_idx = np.arange(B)[None, :]
    dlogits[t_idx, b_idx, targets] -= 1.0
    dlogits /= T * B

    dh_next = np.zeros((L, B, hsz), dtype=params.dtype)
    dc_next = np.zeros((L, B, hsz), dtype=params.dtype)
    for t in range(T - 1, -1, -1):
        m = cache["M"][t]
        grads["proj.W"] += dlogits[t].T @ cache["HOUT"][t, L - 1]
        grads["proj.b"] += dlogits[t].sum(axis=0)
        d_from_above = dlogits[t] @ params.proj_w
        for ell in range(L - 1, -1, -1):
            w, u, _ = params.layers[ell]
            i = cache["I"][t, ell]
            f = cache["F"][t, ell]
            o = cache["O"][t, ell]
            g = cache["G"][t, ell]
            tc = cache["TC"][t, ell]
            dh = d_from_above + dh_next[ell]
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next[ell]
            df = dc * cache["CP"][t, ell]
            di = dc * g
            dg = dc * i
            da = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g * g),
            ], axis=1)
            x_in = cache["X"][t] if ell == 0 else cache["HOUT"][t, ell - 1]
            grads["layer%d.W" % ell] += da.T @ x_in
            grads["layer%d.U" % ell] += da.T @ cache["HP"][t, ell]
            grads["layer%d.b" % ell] += da.sum(axis=0)
            d_from_above = da @ w
            dh_next[ell] = (da @ u) * m
            dc_next[ell] = (dc * f) * m
        np.add.at(d_emb, inputs[t], d_from_above)
    return grads


def loss(params: LstmParams, char_sequence: Sequence[int],
         eof_index: int | None = None) -> float:
    """Mean next-character cross-entropy over the sequence, in nats."""
    idx = np.asarray(char_sequence, dtype=np.int64)
    if idx.size < 2:
        raise ValueError("sequence must have length >= 2")
    inputs = idx[:-1][:, None]
    targets = idx[1:][:, None]
    shape = (params.num_layers, 1, params.hidden)
    value, _, _, _ = _run_window(params, inputs, targets,
                                 np.zeros(shape, dtype=params.dtype),
                                 np.zeros(shape, dtype=params.dtype),
                                 eof_index, need_cache=False)
    return value


def _loss_and_grads(params, char_sequence, eof_index=None):
    """Loss plus analytic gradients for a single full-sequence window."""
    idx = np.asarray(char_sequence, dtype=np.int64)
    if idx.size < 2:
        raise ValueError("sequence must have length >= 2")
    inputs = idx[:-1][:, None]
    targets = idx[1:][:, None]
    shape = (params.num_layers, 1, params.hidden)
    value, cache, _, _ = _run_window(params, inputs, targets,
                                     np.zeros(shape, dtype=params.dtype),
                                     np.zeros(shape, dtype=params.dtype),
                                     eof_index, need_cache=True)
    return value, _backward_window(params, cache, targets)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Adaptive-moment estimation with bias correction."""

    def __init__(self, blocks: dict[str, np.ndarray], lr=2e-3, beta1=0.9,
                 beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in blocks.items()}
        self.v = {k: np.zeros_like(v) for k, v in blocks.items()}

    def update(self, blocks: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in blocks.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    layers: int = 3
    hidden: int = 512
    embed_dim: int | None = None  # None -> hidden
    seq_length: int = 50
    batch_size: int = 50
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    grad_clip: float = 5.0
    epochs: int = 50
    rng_seed: int = 0
    init_scale: float = 0.08
    dtype: str = "float32"

    def __post_init__(self):
        numeric = (self.layers, self.hidden, self.seq_length, self.batch_size,
                   self.learning_rate, self.grad_clip, self.epochs)
        if any(v <= 0 for v in numeric):
            raise ValueError("all training dimensions must be positive")


@dataclass
class SampleConfig:
    temperature: float = 1.0
    max_len: int = 20000
    rng_seed: int = 0
    greedy: bool = False

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


@dataclass
class TrainResult:
    params: LstmParams
    vocab: CharVocab
    losses: list[float]
    steps: int
    epochs: int
    config: TrainConfig


def train_step(params: LstmParams, inputs: np.ndarray, targets: np.ndarray,
               opt: Adam, carry: tuple[np.ndarray, np.ndarray],
               eof_index: int | None, grad_clip: float = 5.0):
    """One truncated-BPTT update on a [T, B] window.

    Params and optimizer state are updated in place; the reported loss is
    the pre-update loss of the window. Returns (batch_loss, new_carry),
    the carry being the detached final recurrent state.
    """
    h0, c0 = carry
    value, cache, hT, cT = _run_window(params, inputs, targets, h0, c0,
                                       eof_index, need_cache=True)
    if not np.isfinite(value):
        raise TrainingDivergedError("non-finite loss at optimizer step %d" % (opt.t + 1))
    grads = _backward_window(params, cache, targets)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(
                "non-finite gradient in %s at optimizer step %d" % (name, opt.t + 1))
        np.clip(g, -grad_clip, grad_clip, out=g)
    opt.update(params.blocks(), grads)
    return value, (hT, cT)


def _arrange_streams(data: np.ndarray, batch_size: int, seq_length: int):
    """Split the encoded corpus into parallel streams of full windows.

    Requested batch size shrinks automatically when the data cannot fill
    one window per stream.
    """
    total = data.size - 1
    if total < 1:
        raise ValueError("training data must have at least 2 characters")
    seq_length = min(seq_length, total)
    batch = min(batch_size, max(1, total // seq_length))
    stream_len = total // batch
    n_windows = stream_len // seq_length
    used = batch * stream_len
    x = data[:used].reshape(batch, stream_len)
    y = data[1:used + 1].reshape(batch, stream_len)
    return x, y, batch, seq_length, n_windows


def train(seq: TrainingSequence, cfg: TrainConfig,
          checkpoint_path: str | Path | None = None,
          checkpoint_every: int = 0,
          resume: "Checkpoint | None" = None) -> TrainResult:
    """Full training loop over one query's character sequence.

    Deterministic for a fixed config and data. When ``checkpoint_path`` is
    given, a checkpoint is written every ``checkpoint_every`` epochs (and at
    the end); ``resume`` continues from a loaded checkpoint and yields the
    same parameters as an uninterrupted run with the same step count.
    """
    dtype = np.dtype(cfg.dtype)
    vocab = build_char_vocab(seq)
    data = np.asarray(vocab.encode(seq.chars), dtype=np.int64)
    x, y, batch, seq_len, n_windows = _arrange_streams(
        data, cfg.batch_size, cfg.seq_length)
    if batch < cfg.batch_size:
        log.info("query %d: batch size reduced %d -> %d for %d training chars",
                 seq.query_id, cfg.batch_size, batch, data.size)

    if resume is not None:
        params = resume.params
        opt = resume.make_optimizer()
        start_epoch = resume.epoch
        losses = list(resume.losses)
    else:
        params = LstmParams.init(vocab.size, cfg.layers, cfg.hidden,
                                 cfg.embed_dim, scale=cfg.init_scale,
                                 rng=cfg.rng_seed, dtype=dtype)
        opt = Adam(params.blocks(), lr=cfg.learning_rate, beta1=cfg.beta1,
                   beta2=cfg.beta2, eps=cfg.epsilon)
        start_epoch = 0
        losses = []

    eof = vocab.eof_index
    state_shape = (cfg.layers, batch, cfg.hidden)
    for epoch in range(start_epoch, cfg.epochs):
        carry = (np.zeros(state_shape, dtype=dtype),
                 np.zeros(state_shape, dtype=dtype))
        epoch_losses = []
        for k in range(n_windows):
            sl = slice(k * seq_len, (k + 1) * seq_len)
            inputs = np.ascontiguousarray(x[:, sl].T)
            targets = np.ascontiguousarray(y[:, sl].T)
            value, carry = train_step(params, inputs, targets, opt, carry,
                                      eof, cfg.grad_clip)
            losses.append(value)
            epoch_losses.append(value)
        log.info("query %d epoch %d/%d: mean loss %.4f",
                 seq.query_id, epoch + 1, cfg.epochs,
                 float(np.mean(epoch_losses)))
        done = epoch + 1
        if checkpoint_path and (done == cfg.epochs or (
                checkpoint_every and done % checkpoint_every == 0)):
            save_checkpoint(checkpoint_path, params, vocab, opt=opt,
                            step=opt.t, epoch=done, losses=losses, config=cfg)
    return TrainResult(params=params, vocab=vocab, losses=losses,
                       steps=opt.t, epochs=cfg.epochs, config=cfg)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample(params: LstmParams, vocab: CharVocab, cfg: SampleConfig) -> str:
    """Generate text until the EOF symbol is drawn or max_len is reached.

    The first character is drawn uniformly over the non-EOF vocabulary;
    each following character is drawn from softmax(logits / temperature),
    or by argmax when greedy. The EOF symbol never appears in the output.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    state = zero_state(params)
    current = int(rng.integers(0, vocab.size - 1))
    out = [current]
    while len(out) < cfg.max_len:
        logits, state = forward_step(params, current, state)
        if cfg.greedy:
            nxt = int(np.argmax(logits))
        else:
            probs = softmax(logits.astype(np.float64) / cfg.temperature)
            nxt = int(rng.choice(vocab.size, p=probs))
        if nxt == vocab.eof_index:
            break
        out.append(nxt)
        current = nxt
    return vocab.decode(out)


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def _numeric_grads(params, char_sequence, eps=1e-5, eof_index=None):
    """Central-difference gradients over every parameter entry."""
    grads = {}
    for name, arr in params.blocks().items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up = loss(params, char_sequence, eof_index)
            flat[j] = orig - eps
            down = loss(params, char_sequence, eof_index)
            flat[j] = orig
            gflat[j] = (up - down) / (2.0 * eps)
        grads[name] = g
    return grads


def max_relative_error(analytic: dict[str, np.ndarray],
                       numeric: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for name in analytic:
        ga = analytic[name]
        gn = numeric[name]
        denom = np.maximum(np.maximum(np.abs(ga), np.abs(gn)), 1e-8)
        worst = max(worst, float((np.abs(ga - gn) / denom).max()))
    return worst


def gradient_check(params: LstmParams, char_sequence: Sequence[int],
                   eps: float = 1e-5, eof_index: int | None = None) -> float:
    """Max relative error between analytic BPTT and finite differences.

    Requires double precision; meant for small models (the cost is two
    full forward passes per parameter entry).
    """
    if params.dtype != np.float64:
        params = params.astype(np.float64)
    _, analytic = _loss_and_grads(params, char_sequence, eof_index)
    numeric = _numeric_grads(params, char_sequence, eps, eof_index)
    return max_relative_error(analytic, numeric)


def make_gradcheck_instance(num_layers: int, hidden: int = 8,
                            vocab_size: int = 12, scale: float = 0.7,
                            min_grad: float = 1e-6, start_seed: int = 0,
                            max_seeds: int = 1000):
    """A (params, sequence) pair on which finite differences are conclusive.

    Central differences with a fixed step cannot resolve gradient entries
    near zero: the difference quotient bottoms out around 1e-10 in double
    precision, so an entry of magnitude 1e-8 shows a large relative error
    on a perfectly correct implementation. Default-scale initialization
    with zero biases produces many such entries. This scans seeds for a
    random instance (O(1)-scale weights and biases, every character used,
    one separator mid-sequence) whose smallest nonzero analytic gradient
    entry clears ``min_grad``; correctness is still judged against the
    numeric gradient by :func:`gradient_check`.

    Returns (params, sequence, seed), all float64.
    """
    if vocab_size < 3:
        raise ValueError("vocab_size must be >= 3")
    base = list(range(vocab_size - 1))
    seq = base + [vocab_size - 1] + base[::-1]
    for seed in range(start_seed, start_seed + max_seeds):
        rng = np.random.default_rng(seed)
        params = LstmParams.init(vocab_size, num_layers, hidden, scale=scale,
                                 rng=seed, dtype=np.float64)
        for name, arr in params.blocks().items():
            if name.endswith(".b"):
                arr += rng.uniform(-scale, scale, size=arr.shape)
        _, grads = _loss_and_grads(params, seq, eof_index=vocab_size - 1)
        smallest = min(np.abs(g[g != 0.0]).min() for g in grads.values())
        if smallest >= min_grad:
            return params, list(seq), seed
    raise RuntimeError(
        "no well-conditioned instance in %d seeds; lower min_grad" % max_seeds)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    params: LstmParams
    vocab: CharVocab
    step: int
    epoch: int
    losses: list[float]
    config: TrainConfig | None
    adam_hyper: dict | None = None
    adam_m: dict[str, np.ndarray] | None = None
    adam_v: dict[str, np.ndarray] | None = None

    def make_optimizer(self) -> Adam:
        if self.adam_hyper is None:
            raise ValueError("checkpoint holds no optimizer state")
        opt = Adam(self.params.blocks(), **{
            k: self.adam_hyper[k] for k in ("lr", "beta1", "beta2", "eps")})
        opt.t = self.adam_hyper["t"]
        opt.m = dict(self.adam_m)
        opt.v = dict(self.adam_v)
        return opt


def save_checkpoint(path, params: LstmParams, vocab: CharVocab, opt: Adam | None = None,
                    step: int = 0, epoch: int = 0, losses: Iterable[float] = (),
                    config: TrainConfig | None = None) -> None:
    """Self-describing npz container: dimensions, vocabulary, row-major
    weights with their precision, optimizer state, and step counts."""
    meta = {
        "format": "synthdoc-lstm-checkpoint-v1",
        "vocab_chars": vocab.chars,
        "num_layers": params.num_layers,
        "hidden": params.hidden,
        "embed_dim": params.embed_dim,
        "vocab_size": params.vocab_size,
        "dtype": str(params.dtype),
        "step": step,
        "epoch": epoch,
        "losses": [float(v) for v in losses],
        "config": None if config is None else {
            k: getattr(config, k) for k in config.__dataclass_fields__},
    }
    arrays = dict(params.blocks())
    if opt is not None:
        meta["adam"] = {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
                        "eps": opt.eps, "t": opt.t}
        for k, v in opt.m.items():
            arrays["adam_m.%s" % k] = v
        for k, v in opt.v.items():
            arrays["adam_v.%s" % k] = v
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, meta=json.dumps(meta), **arrays)


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as npz:
        meta = json.loads(str(npz["meta"][()]))
        if meta.get("format") != "synthdoc-lstm-checkpoint-v1":
            raise ValueError("not a synthdoc checkpoint: %s" % path)
        num_layers = meta["num_layers"]
        layers = [(npz["layer%d.W" % ell], npz["layer%d.U" % ell],
                   npz["layer%d.b" % ell]) for ell in range(num_layers)]
        params = LstmParams(npz["embedding"], layers, npz["proj.W"], npz["proj.b"])
        for name, arr in params.blocks().items():
            if not np.all(np.isfinite(arr)):
                raise ValueError("checkpoint block %s contains non-finite values" % name)
        vocab = CharVocab(meta["vocab_chars"])
        adam_hyper = meta.get("adam")
        adam_m = adam_v = None
        if adam_hyper is not None:
            adam_m = {k: npz["adam_m.%s" % k] for k in params.blocks()}
            adam_v = {k: npz["adam_v.%s" % k] for k in params.blocks()}
        cfg = None
        if meta.get("config"):
            cfg = TrainConfig(**meta["config"])
    return Checkpoint(params=params, vocab=vocab, step=meta["step"],
                      epoch=meta["epoch"], losses=meta["losses"], config=cfg,
                      adam_hyper=adam_hyper, adam_m=adam_m, adam_v=adam_v)
