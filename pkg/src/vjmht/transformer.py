"""Post-norm Transformer encoder built on :mod:`vjmht.autodiff`."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def sinusoidal_positional_encoding(n: int, d: int) -> np.ndarray:
    """Fixed sin/cos table of shape ``(n, d)``; position 0 is the first row."""
    if d % 2:
        raise ValueError(f"positional encoding dimension must be even, got {d}")
    if n < 1:
        raise ValueError("need at least one position")
    pos = np.arange(n, dtype=np.float64)[:, None]
    freq = np.power(10000.0, np.arange(0, d, 2, dtype=np.float64) / d)
    pe = np.empty((n, d))
    pe[:, 0::2] = np.sin(pos / freq)
    pe[:, 1::2] = np.cos(pos / freq)
    return pe


def check_mask(allowed: np.ndarray) -> np.ndarray:
    """Validate a boolean attention mask; ``allowed[i, j]`` lets token i see token j."""
    allowed = np.asarray(allowed, dtype=bool)
    if allowed.ndim != 2 or allowed.shape[0] != allowed.shape[1]:
        raise ValueError(f"attention mask must be square, got {allowed.shape}")
    if not np.all(np.diag(allowed)):
        raise ValueError("attention mask must let every token attend to itself")
    return allowed


def full_mask(n: int) -> np.ndarray:
    return np.ones((n, n), dtype=bool)


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class EncoderLayerParams:
    wq: list[Tensor]
    wk: list[Tensor]
    wv: list[Tensor]
    wo: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor

    @property
    def d(self) -> int:
        return self.wo.shape[0]

    @property
    def heads(self) -> int:
        return len(self.wq)

    @property
    def d_ff(self) -> int:
        return self.w1.shape[1]

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = []
        for i in range(self.heads):
            out += [(f"{prefix}wq.{i}", self.wq[i]), (f"{prefix}wk.{i}", self.wk[i]),
                    (f"{prefix}wv.{i}", self.wv[i])]
        for name in ("wo", "w1", "b1", "w2", "b2", "ln1_gain", "ln1_bias", "ln2_gain", "ln2_bias"):
            out.append((prefix + name, getattr(self, name)))
        return out


def init_encoder_layer(rng: np.random.Generator, d: int, heads: int, d_ff: int) -> EncoderLayerParams:
    if heads < 1 or d % heads:
        raise ValueError(f"number of heads ({heads}) must divide the model dimension ({d})")
    d_h = d // heads

    def w(fi, fo):
        return Tensor(xavier_uniform(rng, fi, fo), requires_grad=True)

    def const(value, n):
        return Tensor(np.full((1, n), value), requires_grad=True)

    return EncoderLayerParams(
        wq=[w(d, d_h) for _ in range(heads)],
        wk=[w(d, d_h) for _ in range(heads)],
        wv=[w(d, d_h) for _ in range(heads)],
        wo=w(d, d),
        w1=w(d, d_ff),
        b1=const(0.0, d_ff),
        w2=w(d_ff, d),
        b2=const(0.0, d),
        ln1_gain=const(1.0, d),
        ln1_bias=const(0.0, d),
        ln2_gain=const(1.0, d),
        ln2_bias=const(0.0, d),
    )


@dataclass
class EncoderStackParams:
    layers: list[EncoderLayerParams] = field(default_factory=list)

    def __post_init__(self):
        if self.layers:
            sig = {(l.d, l.heads, l.d_ff) for l in self.layers}
            if len(sig) != 1:
                raise ValueError(f"encoder layers disagree on (d, heads, d_ff): {sorted(sig)}")

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = []
        for i, layer in enumerate(self.layers):
            out += layer.named_parameters(f"{prefix}layers.{i}.")
        return out


def init_encoder_stack(rng: np.random.Generator, n_layers: int, d: int, heads: int,
                       d_ff: int) -> EncoderStackParams:
    return EncoderStackParams([init_encoder_layer(rng, d, heads, d_ff) for _ in range(n_layers)])


def multi_head_attention(x: Tensor, mask: np.ndarray, p: EncoderLayerParams,
                         record: list | None = None) -> Tensor:
    """Masked scaled dot-product self-attention over ``h`` heads.

    When ``record`` is a list, the attention weight matrix of every head is
    appended to it as a plain array.
    """
    n = x.shape[0]
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n, n):
        raise ValueError(f"mask shape {mask.shape} does not match {n} tokens")
    d_h = p.wq[0].shape[1]
    inv_sqrt = 1.0 / np.sqrt(d_h)
    heads = []
    for wq, wk, wv in zip(p.wq, p.wk, p.wv):
        q = ad.matmul(x, wq)
        k = ad.matmul(x, wk)
        v = ad.matmul(x, wv)
        logits = ad.scale(ad.matmul(q, ad.transpose(k)), inv_sqrt)
        att = ad.softmax(logits, mask)
        if record is not None:
            record.append(att.data.copy())
        heads.append(ad.matmul(att, v))
    h = heads[0] if len(heads) == 1 else ad.concat_cols(heads)
    return ad.matmul(h, p.wo)


def feed_forward(x: Tensor, p: EncoderLayerParams) -> Tensor:
    hidden = ad.relu(ad.add_row(ad.matmul(x, p.w1), p.b1))
    return ad.add_row(ad.matmul(hidden, p.w2), p.b2)


def encoder_layer(x: Tensor, mask: np.ndarray, p: EncoderLayerParams,
                  record: list | None = None, eps: float = 1e-5) -> Tensor:
    x1 = ad.layer_norm(ad.add(multi_head_attention(x, mask, p, record), x),
                       p.ln1_gain, p.ln1_bias, eps)
    return ad.layer_norm(ad.add(feed_forward(x1, p), x1), p.ln2_gain, p.ln2_bias, eps)


def encoder_stack(x: Tensor, mask: np.ndarray, stack: EncoderStackParams,
                  record: list | None = None) -> Tensor:
    """Apply every layer in turn under the same mask.

    ``record``, if given, receives one list of per-head attention matrices
    per layer.
    """
    mask = check_mask(mask)
    for layer in stack.layers:
        per_layer = None
        if record is not None:
            per_layer = []
            record.append(per_layer)
        x = encoder_layer(x, mask, layer, per_layer)
    return x
