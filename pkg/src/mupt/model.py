"""Probabilistic transformer: a CRF over token labels, head links, and topics.

Each position i carries a label variable Z_i with N values, one head-selection
variable H_i^(c) per channel c pointing at another position, and a topic
variable G_i with M values. Inference is synchronous mean-field: every sweep
recomputes head and topic posteriors from the current label posteriors, then
recomputes the label posteriors from those.

All update formulas below are the temperature-cancelled closed forms, written
in terms of the quasi-distributions

    Nz = N * Q_z        (rows mean exactly 1)
    Ng = M * Q_g

so every message stays width-stable by construction:

    head logits      F_c[i,j] = (1/r) (Nz[i] U_c) . (Nz[j] V_c)  (+ position bias)
    topic logits     (M/N) Nz[i] . B[g,:]
    label logits     w_u S[w_i] + w_b Ng[i] B
                     + w_dep  sum_c sum_j Q_h[c,i,j] (U_c (V_c^T Nz[j]))
                     + w_head sum_c sum_j Q_h[c,j,i] (V_c (U_c^T Nz[j]))

The low-rank factors U_c V_c^T are never materialized here; dense-product
oracles live with the diagnostics.

Shapes: single sequences use (n, N) / (C, n, n) / (n, M); batched calls add a
leading batch axis to tokens and to every posterior. token_mask marks real
positions; masked-out positions neither attend nor get attended to.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from . import autodiff as ad
from . import mup
from .autodiff import Var, val
from .config import PTConfig, InfoWeights
from .errors import ConfigError
from .rng import SeededRng

__all__ = [
    "ModelParams", "MFVIState", "tensor_shapes", "tensor_order", "param_count",
    "param_group_report", "position_buckets", "init_mfvi", "attention_logits",
    "update_heads", "topic_logits", "update_topics", "z_logits", "update_z",
    "run_mfvi", "quasi", "mlm_logits", "masked_ce_loss", "uniform_posteriors",
]

ParamsLike = Mapping[str, Union[Var, np.ndarray]]


def tensor_order(config: PTConfig) -> tuple[str, ...]:
    """Canonical tensor ordering used by init, checkpoints, and reports."""
    names = ["S", "U", "V", "B", "gamma", "W_out", "b_out"]
    if config.pos_bias:
        names.append("P_rel")
    return tuple(names)


def tensor_shapes(config: PTConfig) -> dict[str, tuple[int, ...]]:
    n, r, c, m, v = (config.width, config.rank, config.channels,
                     config.topics, config.vocab_size)
    shapes: dict[str, tuple[int, ...]] = {
        "S": (v, n),
        "U": (c, n, r),
        "V": (c, n, r),
        "B": (m, n),
        "gamma": (n,),
        "W_out": (n, v),
        "b_out": (v,),
    }
    if config.pos_bias:
        shapes["P_rel"] = (c, config.pos_buckets)
    return {k: shapes[k] for k in tensor_order(config)}


def param_count(config: PTConfig) -> int:
    return sum(int(np.prod(s)) for s in tensor_shapes(config).values())


def param_group_report(config: PTConfig, eta: float,
                       output_lr_variant: str = "scaled") -> dict[str, dict]:
    """Tensor name -> {group, shape, init_sigma, lr} for one geometry."""
    report = {}
    for name, shape in tensor_shapes(config).items():
        group = mup.classify_param(name)
        sigma = 0.0 if name in mup.ZERO_INIT_NAMES else mup.init_sigma(group, config.width)
        report[name] = {
            "group": group,
            "shape": list(shape),
            "init_sigma": sigma,
            "lr": mup.group_lr(group, eta, config.width, output_lr_variant),
        }
    return report


@dataclass
class ModelParams:
    """All trainable tensors of one model plus its geometry."""

    config: PTConfig
    tensors: dict[str, np.ndarray] = field(repr=False)

    @classmethod
    def init(cls, config: PTConfig, rng: SeededRng, dtype=np.float64) -> "ModelParams":
        """Group-scaled Gaussian init; the position table and biases start 0.

        Each tensor is drawn from its own child stream, so adding or removing
        a tensor never shifts any other tensor's draw.
        """
        tensors = {}
        for name, shape in tensor_shapes(config).items():
            group = mup.classify_param(name)
            if name in mup.ZERO_INIT_NAMES:
                value = np.zeros(shape, dtype=np.float64)
            else:
                value = mup.init_param(group, shape, config.width, rng.spawn(f"init/{name}"))
            tensors[name] = value.astype(dtype, copy=False)
        return cls(config=config, tensors=tensors)

    @property
    def n_params(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def as_vars(self) -> dict[str, Var]:
        """Leaf Vars sharing this instance's storage, for one backward pass."""
        return {k: Var(v) for k, v in self.tensors.items()}

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})


@dataclass
class MFVIState:
    """Posteriors after some number of sweeps, plus what produced them.

    q_z: (n, N) labels; q_h: (C, n, n) head selections, row [c, i, :] is
    position i's distribution over heads j != i; q_g: (n, M) topics. Batched
    states carry a leading batch axis on all three and on tokens/token_mask.
    """

    tokens: np.ndarray
    q_z: Union[Var, np.ndarray]
    q_h: Union[Var, np.ndarray]
    q_g: Union[Var, np.ndarray]
    token_mask: np.ndarray | None = None
    sweeps: int = 0

    def with_posteriors(self, q_z=None, q_h=None, q_g=None, sweeps=None) -> "MFVIState":
        return MFVIState(
            tokens=self.tokens,
            q_z=self.q_z if q_z is None else q_z,
            q_h=self.q_h if q_h is None else q_h,
            q_g=self.q_g if q_g is None else q_g,
            token_mask=self.token_mask,
            sweeps=self.sweeps if sweeps is None else sweeps,
        )


def position_buckets(n: int, n_buckets: int, clip: int) -> np.ndarray:
    """Bucket index of the clipped signed offset i - j, shape (n, n).

    Offsets are clipped to [-clip, clip]; negatives fill buckets 0..clip-1,
    positives fill clip..2clip-1. The diagonal never reaches the logits (it is
    masked) and is assigned bucket 0 arbitrarily.
    """
    if n_buckets != 2 * clip:
        raise ConfigError(f"pos_buckets ({n_buckets}) must equal 2 * pos_clip ({2 * clip})")
    idx = np.arange(n)
    d = np.clip(idx[:, None] - idx[None, :], -clip, clip)
    buckets = np.where(d < 0, d + clip, clip - 1 + d)
    buckets[d == 0] = 0
    return buckets.astype(np.int64)


def _attn_mask(n: int, token_mask: np.ndarray | None, batched: bool) -> np.ndarray:
    """Boolean support of the head distributions: j != i and j is real."""
    off_diag = ~np.eye(n, dtype=bool)
    if token_mask is None:
        return off_diag[None] if not batched else off_diag[None, None]
    tm = np.asarray(token_mask, dtype=bool)
    if batched:
        return off_diag[None, None] & tm[:, None, None, :]
    return off_diag[None] & tm[None, None, :]


def _valid_rows(token_mask: np.ndarray | None, batched: bool):
    """Multiplier zeroing head rows of padding positions, or None."""
    if token_mask is None:
        return None
    tm = np.asarray(token_mask, dtype=np.float64)
    return tm[:, None, :, None] if batched else tm[None, :, None]


def quasi(q, count: int):
    """Quasi-distribution count * q; rows then average to exactly 1."""
    return ad.mul(q, float(count)) if isinstance(q, Var) else q * float(count)


def init_mfvi(config: PTConfig, params: ParamsLike, tokens, iw: InfoWeights,
              token_mask: np.ndarray | None = None) -> MFVIState:
    """Sweep-0 posteriors: unary-only labels, uniform heads and topics."""
    tokens = np.asarray(tokens)
    if not np.issubdtype(tokens.dtype, np.integer):
        raise ConfigError("tokens must be integers")
    if tokens.ndim not in (1, 2):
        raise ConfigError(f"tokens must be 1-D or 2-D, got ndim {tokens.ndim}")
    n = tokens.shape[-1]
    if n < 2:
        raise ConfigError("head selection undefined for single-token sequence")
    if tokens.min() < 0 or tokens.max() >= config.vocab_size:
        raise ConfigError("token id out of range")
    batched = tokens.ndim == 2

    s_rows = ad.take(ad.as_var(params["S"]), tokens)
    q_z = ad.softmax_rows(ad.mul(s_rows, iw.w_unary))

    support = _attn_mask(n, token_mask, batched)
    counts = support.sum(axis=-1, keepdims=True)
    rows_valid = _valid_rows(token_mask, batched)
    if token_mask is not None:
        tm = np.asarray(token_mask, dtype=bool)
        valid_counts = counts[..., 0][tm[:, None, :]] if batched else counts[..., 0][tm[None, :]]
        if (valid_counts == 0).any():
            raise ConfigError("degenerate distribution support: a position has no head candidates")
    uniform_h = np.where(support, 1.0, 0.0) / np.maximum(counts, 1)
    if rows_valid is not None:
        uniform_h = uniform_h * rows_valid
    # broadcast per-channel (and per-batch) to full shape
    target = ((tokens.shape[0], config.channels, n, n) if batched
              else (config.channels, n, n))
    q_h = np.broadcast_to(uniform_h, target).copy()

    g_shape = tokens.shape + (config.topics,)
    q_g = np.full(g_shape, 1.0 / config.topics, dtype=np.float64)
    return MFVIState(tokens=tokens, q_z=q_z, q_h=Var(q_h), q_g=Var(q_g),
                     token_mask=token_mask, sweeps=0)


def _channel_batched(x, batched: bool):
    """Insert the channel broadcast axis before (n, feature) dims."""
    if not batched:
        return x
    shp = val(x).shape
    return ad.reshape(x, (shp[0], 1) + shp[1:]) if isinstance(x, Var) else x.reshape((shp[0], 1) + shp[1:])


def attention_logits(config: PTConfig, params: ParamsLike, state: MFVIState,
                     channel: int | None = None):
    """Bilinear head logits F, all channels stacked: (..., C, n, n).

    F[c, i, j] = (1/r) (Nz[i] U_c) . (Nz[j] V_c), plus the learned
    relative-position bias when the geometry enables it. Pass channel to get
    one (..., n, n) slice.
    """
    batched = state.tokens.ndim == 2
    n = state.tokens.shape[-1]
    nz = quasi(state.q_z, config.width)
    nz_b = _channel_batched(nz, batched)
    q = ad.matmul(nz_b, ad.as_var(params["U"]))
    k = ad.matmul(nz_b, ad.as_var(params["V"]))
    f = ad.mul(ad.matmul(q, ad.swapaxes(k, -1, -2)), 1.0 / config.rank)
    if config.pos_bias:
        buckets = position_buckets(n, config.pos_buckets, config.pos_clip)
        prel = ad.take(ad.swapaxes(ad.as_var(params["P_rel"]), 0, 1), buckets)
        f = ad.add(f, ad.transpose(prel, (2, 0, 1)))
    if channel is None:
        return f
    if not 0 <= channel < config.channels:
        raise ConfigError(f"channel {channel} out of range for {config.channels} channels")
    if batched:
        f = ad.swapaxes(f, 0, 1)
    return ad.take(f, np.asarray(channel))


def update_heads(config: PTConfig, params: ParamsLike, state: MFVIState,
                 iw: InfoWeights):
    """New head posteriors: softmax of w_attn * F over j != i (exact zeros off-support)."""
    batched = state.tokens.ndim == 2
    f = attention_logits(config, params, state)
    mask = _attn_mask(state.tokens.shape[-1], state.token_mask, batched)
    q_h = ad.softmax_rows(ad.mul(f, iw.w_attn), mask)
    rows_valid = _valid_rows(state.token_mask, batched)
    if rows_valid is not None:
        q_h = ad.mul(q_h, rows_valid)
    return q_h


def topic_logits(config: PTConfig, params: ParamsLike, state: MFVIState,
                 iw: InfoWeights):
    """Pre-softmax topic logits w_topic * (M/N) * Nz B^T, shape (..., n, M)."""
    nz = quasi(state.q_z, config.width)
    return ad.mul(ad.matmul(nz, ad.swapaxes(ad.as_var(params["B"]), 0, 1)),
                  iw.w_topic * (config.topics / config.width))


def update_topics(config: PTConfig, params: ParamsLike, state: MFVIState,
                  iw: InfoWeights):
    """New topic posteriors: softmax of the topic logits."""
    return ad.softmax_rows(topic_logits(config, params, state, iw))


def z_logits(config: PTConfig, params: ParamsLike, state: MFVIState,
             iw: InfoWeights):
    """Pre-softmax label logits: unary + topic message + both ternary messages.

    The head posteriors in `state` weight messages in both directions: as the
    dependent (row i of Q_h selects heads j, low-rank direction U_c V_c^T) and
    as somebody's head (column i of Q_h, direction V_c U_c^T).
    """
    batched = state.tokens.ndim == 2
    nz = quasi(state.q_z, config.width)
    nz_b = _channel_batched(nz, batched)
    u = ad.as_var(params["U"])
    v = ad.as_var(params["V"])

    a_dep = ad.matmul(nz_b, v)                       # (.., C, n, r) = Nz V_c
    a_head = ad.matmul(nz_b, u)                      # (.., C, n, r) = Nz U_c
    dep = ad.matmul(ad.matmul(state.q_h, a_dep), ad.swapaxes(u, -1, -2))
    head = ad.matmul(ad.matmul(ad.swapaxes(state.q_h, -1, -2), a_head),
                     ad.swapaxes(v, -1, -2))
    dep = ad.reduce_sum(dep, axis=-3)                # sum channels -> (.., n, N)
    head = ad.reduce_sum(head, axis=-3)

    s_rows = ad.take(ad.as_var(params["S"]), state.tokens)
    ng = quasi(state.q_g, config.topics)
    binary = ad.matmul(ng, ad.as_var(params["B"]))

    return ad.add(
        ad.add(ad.mul(s_rows, iw.w_unary), ad.mul(binary, iw.w_binary)),
        ad.add(ad.mul(dep, iw.w_tern_dep), ad.mul(head, iw.w_tern_head)),
    )


def update_z(config: PTConfig, params: ParamsLike, state: MFVIState,
             iw: InfoWeights):
    """New label posteriors: softmax of the label logits."""
    return ad.softmax_rows(z_logits(config, params, state, iw))


def run_mfvi(config: PTConfig, params: ParamsLike, tokens, iw: InfoWeights,
             token_mask: np.ndarray | None = None,
             iters: int | None = None) -> MFVIState:
    """Full inference: init, then `iters` synchronous sweeps.

    Each sweep computes Q_h and Q_g from the incoming Q_z, then Q_z from the
    refreshed Q_h, Q_g and the incoming Q_z's messages.
    """
    if iters is None:
        iters = config.mfvi_iters
    if iters < 0:
        raise ConfigError(f"iters must be >= 0, got {iters}")
    state = init_mfvi(config, params, tokens, iw, token_mask)
    for t in range(iters):
        q_h = update_heads(config, params, state, iw)
        q_g = update_topics(config, params, state, iw)
        refreshed = state.with_posteriors(q_h=q_h, q_g=q_g)
        q_z = update_z(config, params, refreshed, iw)
        state = refreshed.with_posteriors(q_z=q_z, sweeps=t + 1)
    return state


def mlm_logits(config: PTConfig, params: ParamsLike, state: MFVIState):
    """Vocabulary logits: rms-normalized quasi-labels through the output map."""
    nz = quasi(state.q_z, config.width)
    feature = ad.rms_norm(nz, ad.as_var(params["gamma"]), config.rms_eps)
    return ad.add(ad.matmul(feature, ad.as_var(params["W_out"])),
                  ad.as_var(params["b_out"]))


def masked_ce_loss(logits, targets, positions):
    """Mean cross-entropy over the selected positions.

    targets holds the original token at every selected position (values at
    unselected positions are ignored); positions is boolean with at least one
    True entry.
    """
    positions = np.asarray(positions, dtype=bool)
    count = int(positions.sum())
    if count == 0:
        raise ConfigError("masked_ce_loss: no positions selected")
    targets = np.asarray(targets)
    safe_targets = np.where(positions, targets, 0)
    lsm = ad.log_softmax_rows(logits)
    picked = ad.take_along(lsm, safe_targets[..., None], axis=-1)
    picked = ad.reshape(picked, positions.shape)
    total = ad.reduce_sum(ad.mul(picked, positions.astype(np.float64)))
    return ad.mul(total, -1.0 / count)


def uniform_posteriors(config: PTConfig, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exactly uniform (q_z, q_h, q_g) for an n-token sequence (plain arrays)."""
    if n < 2:
        raise ConfigError("head selection undefined for single-token sequence")
    q_z = np.full((n, config.width), 1.0 / config.width)
    off = ~np.eye(n, dtype=bool)
    q_h = np.broadcast_to(np.where(off, 1.0 / (n - 1), 0.0), (config.channels, n, n)).copy()
    q_g = np.full((n, config.topics), 1.0 / config.topics)
    return q_z, q_h, q_g
