"""Multi-encoder-decoder recurrent network with spatial attention fusion.

One RNN encoder per input station summarises that station's window into its
last hidden state ``e_i``.  For every output station ``j`` a small scoring
network rates each ``e_i``, the scores go through a masked softmax, and the
weighted (optionally averaged) sum ``c_j`` seeds the hidden state of decoder
``j``.  Decoders run autoregressively, feeding back their previous output.

Public functions take one sample (``X`` of shape ``[E, T_enc, F_enc]``) or a
stack of samples (``[B, E, T_enc, F_enc]``); outputs follow the same
convention.  Internally everything is laid out group-first (``[E, B, ...]``
for encoders, ``[D, B, ...]`` for decoders) so each step is one grouped
product per weight matrix.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields

import numpy as np

from .nn import (FfnParams, RnnCellParams, ffn_backward, ffn_forward,
                 rnn_step_backward, rnn_step_forward)
from .tensor import ContractError, Rng, bmm, check_finite, softmax, softmax_backward


@dataclass(frozen=True)
class ModelConfig:
    E: int
    D: int
    T_enc: int
    T_dec: int
    F_enc: int
    F_dec: int
    h: int = 32
    p_att: int = 16
    mean_scale: bool = True
    share_attention: bool = False
    teacher_forcing: bool = True

    def __post_init__(self):
        for name in ("E", "D", "T_enc", "T_dec", "F_enc", "F_dec", "h", "p_att"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ContractError(f"ModelConfig.{name} must be an integer >= 1, got {v!r}")

    @property
    def n_att(self) -> int:
        return 1 if self.share_attention else self.D

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"ModelConfig: unknown fields {sorted(unknown)}")
        return cls(**d)


def param_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    E, D, h, p = cfg.E, cfg.D, cfg.h, cfg.p_att
    G = cfg.n_att
    return [
        ("enc.W_x", (E, h, cfg.F_enc)),
        ("enc.W_h", (E, h, h)),
        ("enc.b", (E, h)),
        ("att.W1", (G, p, h)),
        ("att.b1", (G, p)),
        ("att.W2", (G, 1, p)),
        ("att.b2", (G, 1)),
        ("dec.W_x", (D, h, cfg.F_dec)),
        ("dec.W_h", (D, h, h)),
        ("dec.b", (D, h)),
        ("dec.W_out", (D, cfg.F_dec, h)),
        ("dec.b_out", (D, cfg.F_dec)),
    ]


class ParameterStore:
    """Named float64 arrays in a fixed global order.

    Per-station parameters are stacked along axis 0, so ``enc.W_x[i]`` is the
    input matrix of encoder ``i``.  The same class doubles as the gradient
    buffer.
    """

    def __init__(self, arrays: dict[str, np.ndarray]):
        self.arrays = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}

    @classmethod
    def zeros(cls, cfg: ModelConfig) -> "ParameterStore":
        return cls({name: np.zeros(shape) for name, shape in param_shapes(cfg)})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def names(self) -> list[str]:
        return list(self.arrays)

    def items(self):
        return self.arrays.items()

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays.values())

    @property
    def enc(self) -> RnnCellParams:
        a = self.arrays
        return RnnCellParams(a["enc.W_x"], a["enc.W_h"], a["enc.b"])

    @property
    def att(self) -> FfnParams:
        a = self.arrays
        return FfnParams(a["att.W1"], a["att.b1"], a["att.W2"], a["att.b2"])

    @property
    def dec(self) -> RnnCellParams:
        a = self.arrays
        return RnnCellParams(a["dec.W_x"], a["dec.W_h"], a["dec.b"])

    def encoder(self, i: int) -> RnnCellParams:
        a = self.arrays
        return RnnCellParams(a["enc.W_x"][i], a["enc.W_h"][i], a["enc.b"][i])

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays.values()])

    def with_flat(self, flat: np.ndarray) -> "ParameterStore":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.size:
            raise ContractError(f"with_flat: expected {self.size} values, got {flat.size}")
        out, k = {}, 0
        for name, a in self.arrays.items():
            out[name] = flat[k:k + a.size].reshape(a.shape).copy()
            k += a.size
        return ParameterStore(out)

    def copy(self) -> "ParameterStore":
        return ParameterStore({k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> "ParameterStore":
        return ParameterStore({k: np.zeros_like(v) for k, v in self.arrays.items()})

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name, a in self.arrays.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()

    def equals(self, other: "ParameterStore") -> bool:
        """Bitwise equality of names, shapes and values."""
        if self.names() != other.names():
            return False
        return all(a.shape == b.shape and a.tobytes() == b.tobytes()
                   for a, b in zip(self.arrays.values(), other.arrays.values()))


def init_params(cfg: ModelConfig, seed: int) -> ParameterStore:
    """Glorot-uniform weights, zero biases, drawn in parameter-name order."""
    rng = Rng(seed)
    arrays = {}
    for name, shape in param_shapes(cfg):
        if len(shape) == 3:
            fan_out, fan_in = shape[1], shape[2]
            r = np.sqrt(6.0 / (fan_in + fan_out))
            arrays[name] = rng.uniform(-r, r, size=shape)
        else:
            arrays[name] = np.zeros(shape)
    return ParameterStore(arrays)


@dataclass
class EncoderState:
    e: np.ndarray  # [E, h] or [B, E, h]


@dataclass
class AttentionTrace:
    z: np.ndarray  # [D, E] or [B, D, E]
    w: np.ndarray
    mask: np.ndarray  # [E] or [B, E]


@dataclass
class Forecast:
    y_hat: np.ndarray  # [D, T_dec, F_dec] or [B, D, T_dec, F_dec]
    trace: AttentionTrace


# ---------------------------------------------------------------- helpers

def _batch_x(X, cfg: ModelConfig):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 3
    if single:
        X = X[None]
    if X.ndim != 4 or X.shape[1:] != (cfg.E, cfg.T_enc, cfg.F_enc):
        raise ContractError(
            f"X has shape {X.shape if not single else X.shape[1:]}, expected "
            f"[E={cfg.E}, T_enc={cfg.T_enc}, F_enc={cfg.F_enc}] (optionally batched)")
    check_finite(X, "X")
    return X, single


def _batch_y(Y, cfg: ModelConfig, B: int, name: str = "Y"):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 3:
        Y = Y[None]
    if Y.shape != (B, cfg.D, cfg.T_dec, cfg.F_dec):
        raise ContractError(
            f"{name} has shape {Y.shape}, expected [B={B}, D={cfg.D}, "
            f"T_dec={cfg.T_dec}, F_dec={cfg.F_dec}]")
    return Y


def _batch_mask(mask, cfg: ModelConfig, B: int) -> np.ndarray:
    if mask is None:
        return np.ones((B, cfg.E), dtype=bool)
    m = np.asarray(mask, dtype=bool)
    if m.shape == (cfg.E,):
        m = np.broadcast_to(m, (B, cfg.E))
    if m.shape != (B, cfg.E):
        raise ContractError(f"mask has shape {m.shape}, expected [{cfg.E}] or [{B}, {cfg.E}]")
    if not np.all(m.any(axis=1)):
        raise ContractError("empty attention support")
    return np.array(m)


def _scale(mask: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    if cfg.mean_scale:
        return 1.0 / mask.sum(axis=1).astype(np.float64)
    return np.ones(mask.shape[0])


# ------------------------------------------------------ grouped internals

def _encode(Xg: np.ndarray, params: ParameterStore):
    """Xg: [E, T_enc, B, F]. Returns e [E, B, h] and the step caches."""
    enc = params.enc
    E, T, B, _ = Xg.shape
    h = np.zeros((E, B, enc.hidden))
    caches = []
    for t in range(T):
        h, cache = rnn_step_forward(Xg[:, t], h, enc)
        caches.append(cache)
    return h, caches


def _encode_backward(de: np.ndarray, caches, grads: ParameterStore):
    g = grads.enc
    dh = de
    for cache in reversed(caches):
        _, dh, _, _, _ = rnn_step_backward(cache, dh, g)


def _attend(e: np.ndarray, params: ParameterStore, cfg: ModelConfig, mask: np.ndarray):
    """e: [E, B, h]; mask: [B, E]. Returns c [D, B, h], z, w [D, B, E], cache."""
    E, B, hdim = e.shape
    zg, fcache = ffn_forward(e.reshape(E * B, hdim), params.att)
    zg = zg.reshape(cfg.n_att, E, B).transpose(0, 2, 1)
    z = np.broadcast_to(zg, (cfg.D, B, E)).copy()
    w = softmax(z, mask[None, :, :], axis=-1)
    scale = _scale(mask, cfg)
    acc = w[:, :, 0, None] * e[0][None]
    for i in range(1, E):
        acc = acc + w[:, :, i, None] * e[i][None]
    c = acc * scale[None, :, None]
    return c, z, w, (fcache, w, scale)


def _attend_backward(dc: np.ndarray, e: np.ndarray, cache, cfg: ModelConfig,
                     grads: ParameterStore) -> np.ndarray:
    fcache, w, scale = cache
    E, B, hdim = e.shape
    dacc = dc * scale[None, :, None]
    de = np.einsum("jbi,jbh->ibh", w, dacc)
    dw = np.einsum("jbh,ibh->jbi", dacc, e)
    dz = softmax_backward(w, dw, axis=-1)
    if cfg.share_attention:
        dz = dz.sum(axis=0, keepdims=True)
    dzg = dz.transpose(0, 2, 1).reshape(cfg.n_att, E * B)
    de_flat = ffn_backward(fcache, dzg, grads.att)
    de += de_flat.sum(axis=0).reshape(E, B, hdim)
    return de


def _decode_steps(c, dec, W_out, b_out, teacher, T, D, B, F):
    """c: [D, B, h]; teacher: [D, T, B, F] or None. Returns [D, T, B, F], caches."""
    h = c
    u = np.zeros((D, B, F))
    outs, caches = [], []
    for t in range(T):
        h, cache = rnn_step_forward(u, h, dec)
        y = bmm(h, W_out.transpose(0, 2, 1)) + b_out[:, None, :]
        outs.append(y)
        caches.append(cache)
        u = teacher[:, t] if teacher is not None else y
    return np.stack(outs, axis=1), caches


def _decode_backward(dY: np.ndarray, caches, params: ParameterStore,
                     grads: ParameterStore, free_running: bool) -> np.ndarray:
    """dY: [D, T_dec, B, F]. Returns the gradient w.r.t. the initial state."""
    W_out = params["dec.W_out"]
    gW_out, gb_out = grads["dec.W_out"], grads["dec.b_out"]
    g = grads.dec
    T = dY.shape[1]
    dh_next = np.zeros_like(caches[0].h)
    dy_fb = 0.0
    for t in range(T - 1, -1, -1):
        cache = caches[t]
        dy = dY[:, t] + dy_fb
        gW_out += bmm(dy.transpose(0, 2, 1), cache.h)
        gb_out += dy.sum(axis=1)
        dh = dh_next + bmm(dy, W_out)
        du, dh_next, _, _, _ = rnn_step_backward(cache, dh, g)
        dy_fb = du if free_running else 0.0
    return dh_next


def _run(X, params, cfg, mask, teacher):
    """Shared forward over a batch; returns everything backward needs."""
    Xb, single = _batch_x(X, cfg)
    B = Xb.shape[0]
    m = _batch_mask(mask, cfg, B)
    tg = None
    if teacher is not None:
        tg = _batch_y(teacher, cfg, B, "teacher").transpose(1, 2, 0, 3)
    e, enc_caches = _encode(np.ascontiguousarray(Xb.transpose(1, 2, 0, 3)), params)
    c, z, w, att_cache = _attend(e, params, cfg, m)
    yg, dec_caches = _decode_steps(c, params.dec, params["dec.W_out"], params["dec.b_out"],
                                   tg, cfg.T_dec, cfg.D, B, cfg.F_dec)
    y_hat = yg.transpose(2, 0, 1, 3)
    return single, m, e, c, z, w, y_hat, (enc_caches, att_cache, dec_caches)


# ------------------------------------------------------------ public API

def encode(X, params: ParameterStore, cfg: ModelConfig) -> EncoderState:
    """Last hidden state of every station's encoder."""
    Xb, single = _batch_x(X, cfg)
    e, _ = _encode(np.ascontiguousarray(Xb.transpose(1, 2, 0, 3)), params)
    e = e.transpose(1, 0, 2)
    return EncoderState(e[0] if single else e)


def attend(state: EncoderState, j: int, params: ParameterStore, cfg: ModelConfig,
           mask=None):
    """Fused representation for decoder ``j``: ``(c_j, z_row, w_row)``."""
    if not 0 <= j < cfg.D:
        raise ContractError(f"decoder index {j} out of range [0, {cfg.D})")
    e = np.asarray(state.e, dtype=np.float64)
    single = e.ndim == 2
    eb = e[None] if single else e
    m = _batch_mask(mask, cfg, eb.shape[0])
    c, z, w, _ = _attend(np.ascontiguousarray(eb.transpose(1, 0, 2)), params, cfg, m)
    c, z, w = c[j], z[j], w[j]
    if single:
        return c[0], z[0], w[0]
    return c, z, w


def decode(c_j, j: int, params: ParameterStore, cfg: ModelConfig, teacher=None) -> np.ndarray:
    """Roll decoder ``j`` forward from initial state ``c_j``."""
    if not 0 <= j < cfg.D:
        raise ContractError(f"decoder index {j} out of range [0, {cfg.D})")
    c = np.asarray(c_j, dtype=np.float64)
    single = c.ndim == 1
    cb = c[None] if single else c
    if cb.shape[-1] != cfg.h:
        raise ContractError(f"c_j has size {cb.shape[-1]}, expected h={cfg.h}")
    B = cb.shape[0]
    dec = params.dec
    dj = RnnCellParams(dec.W_x[j:j + 1], dec.W_h[j:j + 1], dec.b[j:j + 1])
    W_out = params["dec.W_out"][j:j + 1]
    b_out = params["dec.b_out"][j:j + 1]
    tg = None
    if teacher is not None:
        t = np.asarray(teacher, dtype=np.float64)
        t = t[None] if t.ndim == 2 else t
        if t.shape != (B, cfg.T_dec, cfg.F_dec):
            raise ContractError(f"teacher has shape {t.shape}, expected [T_dec, F_dec]")
        tg = t.transpose(1, 0, 2)[None]
    y, _ = _decode_steps(cb[None], dj, W_out, b_out, tg, cfg.T_dec, 1, B, cfg.F_dec)
    y = y[0].transpose(1, 0, 2)
    return y[0] if single else y


def forward(X, params: ParameterStore, cfg: ModelConfig, mask=None, teacher=None) -> Forecast:
    single, m, _, _, z, w, y_hat, _ = _run(X, params, cfg, mask, teacher)
    if single:
        return Forecast(y_hat[0], AttentionTrace(z[:, 0], w[:, 0], m[0]))
    return Forecast(y_hat, AttentionTrace(z.transpose(1, 0, 2), w.transpose(1, 0, 2), m))


def plain_seq2seq(X, params: ParameterStore, cfg: ModelConfig, teacher=None) -> np.ndarray:
    """Encoder straight into decoder, no interconnection layer.

    Only defined for one encoder and one decoder.
    """
    if cfg.E != 1 or cfg.D != 1:
        raise ContractError("plain_seq2seq needs E = D = 1")
    Xb, single = _batch_x(X, cfg)
    B = Xb.shape[0]
    e, _ = _encode(np.ascontiguousarray(Xb.transpose(1, 2, 0, 3)), params)
    tg = None if teacher is None else _batch_y(teacher, cfg, B, "teacher").transpose(1, 2, 0, 3)
    yg, _ = _decode_steps(e, params.dec, params["dec.W_out"], params["dec.b_out"],
                          tg, cfg.T_dec, 1, B, cfg.F_dec)
    y = yg.transpose(2, 0, 1, 3)
    return y[0] if single else y


def loss(y_hat, y) -> float:
    """Mean squared error; for a stack of samples, the mean of per-sample means."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise ContractError(f"loss: shape mismatch {y_hat.shape} vs {y.shape}")
    r = (y_hat - y) ** 2
    if r.ndim == 4:
        return float(np.mean(r.reshape(r.shape[0], -1).mean(axis=1)))
    return float(r.mean())


def backward(X, Y, params: ParameterStore, cfg: ModelConfig, mask=None,
             teacher_forcing: bool | None = None, scale: float = 1.0):
    """Loss and exact gradients w.r.t. every parameter.

    ``teacher_forcing`` defaults to ``cfg.teacher_forcing``.  ``scale``
    multiplies the loss (and hence every gradient).
    """
    tf = cfg.teacher_forcing if teacher_forcing is None else teacher_forcing
    Xb, _ = _batch_x(X, cfg)
    B = Xb.shape[0]
    Yb = _batch_y(Y, cfg, B)
    _, m, e, _, _, _, y_hat, (enc_c, att_c, dec_c) = _run(
        Xb, params, cfg, mask, Yb if tf else None)
    L = scale * loss(y_hat, Yb)

    n = cfg.D * cfg.T_dec * cfg.F_dec
    dy = (2.0 * scale / (n * B)) * (y_hat - Yb)
    grads = params.zeros_like()
    dc = _decode_backward(dy.transpose(1, 2, 0, 3), dec_c, params, grads, not tf)
    de = _attend_backward(dc, e, att_c, cfg, grads)
    _encode_backward(de, enc_c, grads)
    return L, grads
