"""LSTM encoder-decoder over cell tokens, trained with the proximity-weighted
negative log-likelihood, with hand-written backpropagation through time.

All arithmetic is float64. Batches are ``(B, T)`` integer arrays plus a
``(B, T)`` mask; masked steps carry the recurrent state through unchanged
and contribute neither loss nor gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, TrainingError

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LstmWeights:
    """Gate weights for ``z = [x, h] @ W + b`` with gate blocks ordered input, forget, output, candidate."""

    W: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.b.shape[0] // 4


@dataclass(frozen=True)
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray


@dataclass
class ModelParams:
    embeddings: np.ndarray  # (|C|, d_emb)
    bos: np.ndarray         # (d_emb,)
    enc_W: np.ndarray       # (d_emb + n, 4n)
    enc_b: np.ndarray       # (4n,)
    dec_W: np.ndarray
    dec_b: np.ndarray
    proj_W: np.ndarray      # (|C|, n), row u projects onto cell u
    proj_b: np.ndarray      # (|C|,)
    projection_bias: bool = True

    TENSORS = ("embeddings", "bos", "enc_W", "enc_b", "dec_W", "dec_b", "proj_W", "proj_b")

    @property
    def vocab_size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d_emb(self) -> int:
        return self.embeddings.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.proj_W.shape[1]

    @property
    def encoder(self) -> LstmWeights:
        return LstmWeights(self.enc_W, self.enc_b)

    @property
    def decoder(self) -> LstmWeights:
        return LstmWeights(self.dec_W, self.dec_b)

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.TENSORS}

    def copy(self) -> ModelParams:
        return replace(self, **{k: v.copy() for k, v in self.tensors().items()})

    def zeros_like(self) -> ModelParams:
        return replace(self, **{k: np.zeros_like(v) for k, v in self.tensors().items()})

    def validate(self) -> None:
        V, d, n = self.vocab_size, self.d_emb, self.hidden_size
        expected = {"embeddings": (V, d), "bos": (d,), "enc_W": (d + n, 4 * n), "enc_b": (4 * n,),
                    "dec_W": (d + n, 4 * n), "dec_b": (4 * n,), "proj_W": (V, n), "proj_b": (V,)}
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DataError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")

    def equals(self, other: ModelParams) -> bool:
        return (self.projection_bias == other.projection_bias
                and all(np.array_equal(a, b) for a, b in zip(self.tensors().values(),
                                                             other.tensors().values())))


def init_params(vocab_size: int, d_emb: int, n: int, seed: int,
                projection_bias: bool = True) -> ModelParams:
    """Weights uniform in ``(-r, r)``, ``r = 1/sqrt(n)``; biases zero except forget gates at 1."""
    if min(vocab_size, d_emb, n) < 1:
        raise DataError("vocab_size, d_emb and n must be >= 1")
    rng = np.random.default_rng(seed)
    r = 1.0 / np.sqrt(n)

    def u(*shape):
        return rng.uniform(-r, r, size=shape)

    def gate_bias():
        b = np.zeros(4 * n)
        b[n:2 * n] = 1.0
        return b

    params = ModelParams(
        embeddings=u(vocab_size, d_emb),
        bos=u(d_emb),
        enc_W=u(d_emb + n, 4 * n),
        enc_b=gate_bias(),
        dec_W=u(d_emb + n, 4 * n),
        dec_b=gate_bias(),
        proj_W=u(vocab_size, n),
        proj_b=np.zeros(vocab_size),
        projection_bias=projection_bias,
    )
    return params


# --------------------------------------------------------------------------
# LSTM cell

def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _step(W, b, x, h, c):
    n = h.shape[-1]
    xh = np.concatenate([x, h], axis=-1)
    z = xh @ W + b
    i = _sigmoid(z[..., :n])
    f = _sigmoid(z[..., n:2 * n])
    o = _sigmoid(z[..., 2 * n:3 * n])
    g = np.tanh(z[..., 3 * n:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (xh, c, i, f, o, g, tc)


def _step_backward(W, cache, dh, dc):
    """Gradients of one cell step given upstream ``dh``, ``dc`` on its outputs.

    Returns ``(dz, dxh, dc_prev)``; parameter gradients are ``xh.T @ dz`` and ``dz.sum(0)``.
    """
    xh, c_prev, i, f, o, g, tc = cache
    dc_total = dc + dh * o * (1.0 - tc * tc)
    do = dh * tc
    di = dc_total * g
    dg = dc_total * i
    df = dc_total * c_prev
    dz = np.concatenate([di * i * (1.0 - i), df * f * (1.0 - f),
                         do * o * (1.0 - o), dg * (1.0 - g * g)], axis=-1)
    dxh = dz @ W.T
    return dz, dxh, dc_total * f


def lstm_step(weights: LstmWeights, input_vec, state: LstmState) -> LstmState:
    h, c, _ = _step(weights.W, weights.b, np.asarray(input_vec, dtype=np.float64),
                    state.hidden, state.cell)
    return LstmState(h, c)


def zero_state(n: int, batch: int | None = None) -> LstmState:
    shape = (n,) if batch is None else (batch, n)
    return LstmState(np.zeros(shape), np.zeros(shape))


# --------------------------------------------------------------------------
# encoder

def _tokens(seq) -> np.ndarray:
    tokens = getattr(seq, "tokens", seq)
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or len(tokens) == 0:
        raise DataError("token sequence must be non-empty and 1-d")
    return tokens


def encode(params: ModelParams, tokens) -> tuple[LstmState, list[LstmState]]:
    """Run the encoder from a zero state; returns the final state and every per-step state."""
    tokens = _tokens(tokens)
    n = params.hidden_size
    h, c = np.zeros(n), np.zeros(n)
    states = []
    for tok in tokens:
        h, c, _ = _step(params.enc_W, params.enc_b, params.embeddings[tok], h, c)
        states.append(LstmState(h, c))
    return states[-1], states


def encode_batch(params: ModelParams, src: np.ndarray, mask: np.ndarray | None = None):
    """Final encoder ``(hidden, cell)`` for a padded ``(B, T)`` batch."""
    B, T = src.shape
    if mask is None:
        mask = np.ones((B, T))
    n = params.hidden_size
    h, c = np.zeros((B, n)), np.zeros((B, n))
    for t in range(T):
        m = mask[:, t:t + 1]
        hn, cn, _ = _step(params.enc_W, params.enc_b, params.embeddings[src[:, t]], h, c)
        h = m * hn + (1.0 - m) * h
        c = m * cn + (1.0 - m) * c
    return h, c


# --------------------------------------------------------------------------
# loss

@dataclass
class ForwardTrace:
    src: np.ndarray
    tgt: np.ndarray
    mask: np.ndarray
    scale: float
    enc_caches: list = field(default_factory=list)
    dec_caches: list = field(default_factory=list)
    dec_hidden: list = field(default_factory=list)
    probs: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.tgt.shape[1]


def pad_batch(pairs):
    """Stack ``(corrupted, clean)`` token sequence pairs into ``src, tgt, mask`` arrays."""
    lengths = []
    for corrupted, clean in pairs:
        a, b = _tokens(corrupted), _tokens(clean)
        if len(a) != len(b):
            raise DataError(f"corrupted and clean sequences differ in length ({len(a)} vs {len(b)})")
        lengths.append(len(a))
    B, T = len(pairs), max(lengths)
    src = np.zeros((B, T), dtype=np.int64)
    tgt = np.zeros((B, T), dtype=np.int64)
    mask = np.zeros((B, T))
    for k, ((corrupted, clean), L) in enumerate(zip(pairs, lengths)):
        src[k, :L] = _tokens(corrupted)
        tgt[k, :L] = _tokens(clean)
        mask[k, :L] = 1.0
    return src, tgt, mask


def _log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return shifted - lse


def batch_forward(params: ModelParams, src, tgt, mask, weights_provider):
    """Per-sequence summed loss averaged over the batch, plus the trace for :func:`backward`."""
    src = np.asarray(src, dtype=np.int64)
    tgt = np.asarray(tgt, dtype=np.int64)
    mask = np.asarray(mask, dtype=np.float64)
    if src.shape != tgt.shape or src.shape != mask.shape:
        raise DataError("src, tgt and mask must share a (B, T) shape")
    B, T = tgt.shape
    n = params.hidden_size
    trace = ForwardTrace(src, tgt, mask, 1.0 / B)

    h, c = np.zeros((B, n)), np.zeros((B, n))
    for t in range(T):
        m = mask[:, t:t + 1]
        hn, cn, cache = _step(params.enc_W, params.enc_b, params.embeddings[src[:, t]], h, c)
        trace.enc_caches.append(cache)
        h = m * hn + (1.0 - m) * h
        c = m * cn + (1.0 - m) * c

    proj_b = params.proj_b if params.projection_bias else 0.0
    total = 0.0
    for t in range(T):
        m = mask[:, t:t + 1]
        x = np.broadcast_to(params.bos, (B, params.d_emb)) if t == 0 else params.embeddings[tgt[:, t - 1]]
        hn, cn, cache = _step(params.dec_W, params.dec_b, x, h, c)
        trace.dec_caches.append(cache)
        h = m * hn + (1.0 - m) * h
        c = m * cn + (1.0 - m) * c
        logp = _log_softmax(h @ params.proj_W.T + proj_b)
        w = weights_provider.rows(tgt[:, t])
        total += float(-(w * logp).sum(axis=-1) @ mask[:, t])
        trace.dec_hidden.append(h)
        trace.probs.append(np.exp(logp))
        trace.weights.append(w)
    loss = total / B
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}")
    return loss, trace


def forward_loss(params: ModelParams, corrupted, clean, weights_provider):
    """Loss of reconstructing ``clean`` from ``corrupted`` (teacher forcing, BOS first)."""
    src, tgt, mask = pad_batch([(corrupted, clean)])
    return batch_forward(params, src, tgt, mask, weights_provider)


def backward(trace: ForwardTrace, params: ModelParams) -> ModelParams:
    """Exact gradients of the traced loss with respect to every parameter tensor."""
    grads = params.zeros_like()
    B, T = trace.tgt.shape
    d = params.d_emb
    mask = trace.mask
    dh = np.zeros((B, params.hidden_size))
    dc = np.zeros_like(dh)
    for t in range(T - 1, -1, -1):
        m = mask[:, t:t + 1]
        w = trace.weights[t]
        dlogits = (trace.probs[t] * w.sum(axis=-1, keepdims=True) - w) * (m * trace.scale)
        h = trace.dec_hidden[t]
        grads.proj_W += dlogits.T @ h
        if params.projection_bias:
            grads.proj_b += dlogits.sum(axis=0)
        dh = dh + dlogits @ params.proj_W
        # h_t = m * h_new + (1 - m) * h_{t-1}
        dz, dxh, dc_prev = _step_backward(params.dec_W, trace.dec_caches[t], m * dh, m * dc)
        grads.dec_W += trace.dec_caches[t][0].T @ dz
        grads.dec_b += dz.sum(axis=0)
        dx = dxh[:, :d]
        if t == 0:
            grads.bos += dx.sum(axis=0)
        else:
            np.add.at(grads.embeddings, trace.tgt[:, t - 1], dx)
        dh = dxh[:, d:] + (1.0 - m) * dh
        dc = dc_prev + (1.0 - m) * dc
    for t in range(T - 1, -1, -1):
        m = mask[:, t:t + 1]
        cache = trace.enc_caches[t]
        dz, dxh, dc_prev = _step_backward(params.enc_W, cache, m * dh, m * dc)
        grads.enc_W += cache[0].T @ dz
        grads.enc_b += dz.sum(axis=0)
        np.add.at(grads.embeddings, trace.src[:, t], dxh[:, :d])
        dh = dxh[:, d:] + (1.0 - m) * dh
        dc = dc_prev + (1.0 - m) * dc
    return grads


# --------------------------------------------------------------------------
# optimizer

def global_norm(grads: ModelParams) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.tensors().values())))


def sgd_step(params: ModelParams, grads: ModelParams, lr: float, clip_norm: float | None = None) -> ModelParams:
    """``params - lr * grads`` after rescaling grads to ``clip_norm`` if their global norm exceeds it."""
    if not lr > 0:
        raise DataError("learning rate must be positive")
    norm = global_norm(grads)
    if not np.isfinite(norm):
        bad = [k for k, g in grads.tensors().items() if not np.all(np.isfinite(g))]
        raise TrainingError(f"non-finite gradient in {', '.join(bad)}")
    scale = 1.0
    if clip_norm is not None and norm > clip_norm:
        scale = clip_norm / norm
    step = lr * scale
    return replace(params, **{k: v - step * getattr(grads, k) for k, v in params.tensors().items()})


# --------------------------------------------------------------------------
# checkpoints

def save_params(params: ModelParams, path) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, format_version=np.int64(CHECKPOINT_VERSION),
                 projection_bias=np.bool_(params.projection_bias), **params.tensors())


def load_params(path) -> ModelParams:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        params = ModelParams(**{k: data[k].astype(np.float64) for k in ModelParams.TENSORS},
                             projection_bias=bool(data["projection_bias"]))
    params.validate()
    return params
