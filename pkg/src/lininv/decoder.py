"""Shallow decoder: linear lift to a token grid, pre-norm transformer blocks,
and a final linear head whose overlapping output blocks are stitched into the
map by averaging.

Forward and backward passes are written directly against the fixed graph; no
autodiff tape. Parameters live in a flat dict keyed by dotted path, which is
also the checkpoint section layout.
"""

import math
from dataclasses import dataclass

import numpy as np

_LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715

# token grid downsamples the output map by this factor
BLOCK_BASE = 32


def block_offsets(dim, block, n_blocks):
    """Evenly spaced integer block offsets covering [0, dim - block]."""
    if n_blocks == 1:
        return [0]
    return [round(i * (dim - block) / (n_blocks - 1)) for i in range(n_blocks)]


@dataclass
class DecoderConfig:
    m_in: int
    out_h: int
    out_w: int
    k: int = 64
    heads: int = 4
    mlp_ratio: int = 4
    depth: int = 1
    overlap: int = 8  # block size is BLOCK_BASE + overlap
    shared_head: bool = True

    def __post_init__(self):
        if self.k % self.heads != 0:
            raise ValueError(f"k={self.k} not divisible by heads={self.heads}")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.m_in < 1:
            raise ValueError("m_in must be >= 1")
        b = self.block
        if b < 1:
            raise ValueError(f"block size {b} must be >= 1")
        for dim, n_blk, axis in ((self.out_h, self.grid_h, "H"), (self.out_w, self.grid_w, "W")):
            if n_blk == 1:
                if b != dim:
                    raise ValueError(f"single-block axis {axis}: block {b} must equal map dim {dim}")
            else:
                if b > dim:
                    raise ValueError(f"block {b} exceeds map dim {dim} along {axis}")
                offs = block_offsets(dim, b, n_blk)
                gaps = np.diff(offs)
                if np.any(gaps > b):
                    raise ValueError(f"blocks leave uncovered cells along {axis}")

    @property
    def grid_h(self):
        return math.ceil(self.out_h / BLOCK_BASE)

    @property
    def grid_w(self):
        return math.ceil(self.out_w / BLOCK_BASE)

    @property
    def n_tokens(self):
        return self.grid_h * self.grid_w

    @property
    def block(self):
        return BLOCK_BASE + self.overlap

    @property
    def head_dim(self):
        return self.k // self.heads

    def offsets(self):
        b = self.block
        return (
            block_offsets(self.out_h, b, self.grid_h),
            block_offsets(self.out_w, b, self.grid_w),
        )

    def overlap_counts(self):
        """Per-pixel number of blocks covering each output cell."""
        counts = np.zeros((self.out_h, self.out_w))
        z_off, x_off = self.offsets()
        b = self.block
        for zo in z_off:
            for xo in x_off:
                counts[zo:zo + b, xo:xo + b] += 1.0
        return counts


def param_init(seed, config, dtype=np.float32):
    """Uniform(-1/sqrt(fan_in), ..) weights, zero biases and positional table,
    unit layernorm scales. Deterministic in seed."""
    rng = np.random.default_rng(seed)
    k, nt, bb = config.k, config.n_tokens, config.block ** 2
    r = config.mlp_ratio

    def lin(fan_in, shape):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params = {
        "l1.weight": lin(config.m_in, (config.m_in, nt * k)),
        "l1.bias": np.zeros(nt * k),
        "pos": np.zeros((nt, k)),
    }
    for i in range(config.depth):
        p = f"block{i}"
        params[f"{p}.ln1.gamma"] = np.ones(k)
        params[f"{p}.ln1.beta"] = np.zeros(k)
        for proj in ("wq", "wk", "wv", "wo"):
            params[f"{p}.attn.{proj}"] = lin(k, (k, k))
        for bias in ("bq", "bk", "bv", "bo"):
            params[f"{p}.attn.{bias}"] = np.zeros(k)
        params[f"{p}.ln2.gamma"] = np.ones(k)
        params[f"{p}.ln2.beta"] = np.zeros(k)
        params[f"{p}.mlp.w1"] = lin(k, (k, r * k))
        params[f"{p}.mlp.b1"] = np.zeros(r * k)
        params[f"{p}.mlp.w2"] = lin(r * k, (r * k, k))
        params[f"{p}.mlp.b2"] = np.zeros(k)
    if config.shared_head:
        params["head.weight"] = lin(k, (k, bb))
        params["head.bias"] = np.zeros(bb)
    else:
        params["head.weight"] = lin(k, (nt, k, bb))
        params["head.bias"] = np.zeros((nt, bb))
    return {name: np.asarray(arr, dtype=dtype) for name, arr in params.items()}


def _layernorm(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return gamma * xhat + beta, (xhat, inv)

def _layernorm_back(dout, cache, gamma):
    xhat, inv = cache
    dgamma = np.sum(dout * xhat, axis=tuple(range(dout.ndim - 1)))
    dbeta = np.sum(dout, axis=tuple(range(dout.ndim - 1)))
    dxhat = dout * gamma
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dgamma, dbeta


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _gelu(x):
    u = _GELU_C * (x + _GELU_A * x**3)
    return 0.5 * x * (1.0 + np.tanh(u))

def _gelu_grad(x):
    u = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(u)
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x**2)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du


def _split_heads(x, heads):
    b, n, k = x.shape
    return x.reshape(b, n, heads, k // heads).transpose(0, 2, 1, 3)

def _merge_heads(x):
    b, h, n, d = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * d)


def _attention(tokens, params, prefix, heads):
    """Multi-head softmax self-attention over all tokens, with cache."""
    wq, wk, wv, wo = (params[f"{prefix}.attn.{n}"] for n in ("wq", "wk", "wv", "wo"))
    bq, bk, bv, bo = (params[f"{prefix}.attn.{n}"] for n in ("bq", "bk", "bv", "bo"))
    q = _split_heads(tokens @ wq + bq, heads)
    k = _split_heads(tokens @ wk + bk, heads)
    v = _split_heads(tokens @ wv + bv, heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    attn = _softmax(np.einsum("bhnd,bhmd->bhnm", q, k) * scale)
    ctx = _merge_heads(np.einsum("bhnm,bhmd->bhnd", attn, v))
    out = ctx @ wo + bo
    cache = {"tokens": tokens, "q": q, "k": k, "v": v, "attn": attn, "ctx": ctx, "scale": scale}
    return out, cache

def _attention_back(dout, cache, params, prefix, heads):
    tokens, q, k, v = cache["tokens"], cache["q"], cache["k"], cache["v"]
    attn, ctx, scale = cache["attn"], cache["ctx"], cache["scale"]
    wq, wk, wv, wo = (params[f"{prefix}.attn.{n}"] for n in ("wq", "wk", "wv", "wo"))

    grads = {}
    grads[f"{prefix}.attn.wo"] = np.einsum("bnk,bnm->km", ctx, dout)
    grads[f"{prefix}.attn.bo"] = dout.sum(axis=(0, 1))
    dctx = _split_heads(dout @ wo.T, heads)

    dattn = np.einsum("bhnd,bhmd->bhnm", dctx, v)
    dv = np.einsum("bhnm,bhnd->bhmd", attn, dctx)
    dlogits = attn * (dattn - np.sum(dattn * attn, axis=-1, keepdims=True))
    dq = np.einsum("bhnm,bhmd->bhnd", dlogits, k) * scale
    dk = np.einsum("bhnm,bhnd->bhmd", dlogits, q) * scale

    dtok = np.zeros_like(tokens)
    for dh, w_name, b_name in ((dq, "wq", "bq"), (dk, "wk", "bk"), (dv, "wv", "bv")):
        dflat = _merge_heads(dh)
        grads[f"{prefix}.attn.{w_name}"] = np.einsum("bnk,bnm->km", tokens, dflat)
        grads[f"{prefix}.attn.{b_name}"] = dflat.sum(axis=(0, 1))
        dtok = dtok + dflat @ params[f"{prefix}.attn.{w_name}"].T
    return dtok, grads


def attention_forward(tokens, params, heads, prefix="block0"):
    """Standalone n x k attention op used by the decoder blocks."""
    tokens = np.asarray(tokens)
    out, _ = _attention(tokens[None], params, prefix, heads)
    return out[0]


def decoder_forward(y, params, config):
    """Map embeddings to output grids.

    y: (M,) or (B, M). Returns (maps, cache) where maps is (H, W) or
    (B, H, W); pass the cache to decoder_backward.
    """
    y = np.asarray(y)
    single = y.ndim == 1
    yb = y[None] if single else y
    if yb.ndim != 2 or yb.shape[1] != config.m_in:
        raise ValueError(f"embedding batch must be (B, {config.m_in}), got {y.shape}")

    nt, k = config.n_tokens, config.k
    cache = {"y": yb, "blocks": [], "single": single}

    x = (yb @ params["l1.weight"] + params["l1.bias"]).reshape(-1, nt, k)
    x = x + params["pos"]
    for i in range(config.depth):
        p = f"block{i}"
        blk = {"x_in": x}
        h1, blk["ln1"] = _layernorm(x, params[f"{p}.ln1.gamma"], params[f"{p}.ln1.beta"])
        blk["h1"] = h1
        attn_out, blk["attn"] = _attention(h1, params, p, config.heads)
        x = x + attn_out
        blk["x_mid"] = x
        h2, blk["ln2"] = _layernorm(x, params[f"{p}.ln2.gamma"], params[f"{p}.ln2.beta"])
        blk["h2"] = h2
        u1 = h2 @ params[f"{p}.mlp.w1"] + params[f"{p}.mlp.b1"]
        blk["u1"] = u1
        a1 = _gelu(u1)
        blk["a1"] = a1
        x = x + a1 @ params[f"{p}.mlp.w2"] + params[f"{p}.mlp.b2"]
        cache["blocks"].append(blk)
    cache["x_final"] = x

    if config.shared_head:
        blocks = x @ params["head.weight"] + params["head.bias"]
    else:
        blocks = np.einsum("bnk,nkp->bnp", x, params["head.weight"]) + params["head.bias"]

    b = config.block
    z_off, x_off = config.offsets()
    counts = config.overlap_counts()
    out = np.zeros((yb.shape[0], config.out_h, config.out_w), dtype=blocks.dtype)
    n = 0
    for zo in z_off:
        for xo in x_off:
            out[:, zo:zo + b, xo:xo + b] += blocks[:, n].reshape(-1, b, b)
            n += 1
    out = out / counts
    cache["counts"] = counts
    return (out[0], cache) if single else (out, cache)


def decoder_backward(dout, cache, params, config):
    """Exact reverse-mode gradients for all parameters and the input embedding.

    dout matches the forward output shape. Returns (grads dict, dinput).
    """
    if not isinstance(cache, dict) or "x_final" not in cache:
        raise ValueError("missing forward cache; run decoder_forward first")
    dout = np.asarray(dout)
    single = cache["single"]
    db_out = (dout[None] if single else dout) / cache["counts"]

    b = config.block
    z_off, x_off = config.offsets()
    nblocks = np.empty((db_out.shape[0], config.n_tokens, b * b), dtype=db_out.dtype)
    n = 0
    for zo in z_off:
        for xo in x_off:
            nblocks[:, n] = db_out[:, zo:zo + b, xo:xo + b].reshape(db_out.shape[0], -1)
            n += 1

    grads = {}
    x_final = cache["x_final"]
    if config.shared_head:
        grads["head.weight"] = np.einsum("bnk,bnp->kp", x_final, nblocks)
        grads["head.bias"] = nblocks.sum(axis=(0, 1))
        dx = nblocks @ params["head.weight"].T
    else:
        grads["head.weight"] = np.einsum("bnk,bnp->nkp", x_final, nblocks)
        grads["head.bias"] = nblocks.sum(axis=0)
        dx = np.einsum("bnp,nkp->bnk", nblocks, params["head.weight"])

    for i in reversed(range(config.depth)):
        p = f"block{i}"
        blk = cache["blocks"][i]
        # mlp branch
        da1 = dx @ params[f"{p}.mlp.w2"].T
        grads[f"{p}.mlp.w2"] = np.einsum("bnr,bnk->rk", blk["a1"], dx)
        grads[f"{p}.mlp.b2"] = dx.sum(axis=(0, 1))
        du1 = da1 * _gelu_grad(blk["u1"])
        grads[f"{p}.mlp.w1"] = np.einsum("bnk,bnr->kr", blk["h2"], du1)
        grads[f"{p}.mlp.b1"] = du1.sum(axis=(0, 1))
        dh2 = du1 @ params[f"{p}.mlp.w1"].T
        dx_mid, dg2, db2 = _layernorm_back(dh2, blk["ln2"], params[f"{p}.ln2.gamma"])
        grads[f"{p}.ln2.gamma"] = dg2
        grads[f"{p}.ln2.beta"] = db2
        dx = dx + dx_mid  # residual
        # attention branch
        dh1, attn_grads = _attention_back(dx, blk["attn"], params, p, config.heads)
        grads.update(attn_grads)
        dx_in, dg1, db1 = _layernorm_back(dh1, blk["ln1"], params[f"{p}.ln1.gamma"])
        grads[f"{p}.ln1.gamma"] = dg1
        grads[f"{p}.ln1.beta"] = db1
        dx = dx + dx_in

    grads["pos"] = dx.sum(axis=0)
    dflat = dx.reshape(dx.shape[0], -1)
    grads["l1.weight"] = cache["y"].T @ dflat
    grads["l1.bias"] = dflat.sum(axis=0)
    dinput = dflat @ params["l1.weight"].T
    return grads, (dinput[0] if single else dinput)
