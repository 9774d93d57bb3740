"""Local graph attention over keypoint neighbourhoods and the global
sequence aggregator (category token + stacked twin selective-scan blocks)."""
from __future__ import annotations

import numpy as np

from .errors import DataError
from .geometry import knn
from .nn import layer_norm, linear, mlp, ones, run_graph, zeros
from .serialization import serialize_keypoints
from .tensor import Graph

N_CATEGORIES = 6
BLOCK_KINDS = ("twinmamba", "bimamba", "attention")
BACKWARD_KINDS = ("CF", "TF", "RA")


# --------------------------------------------------------------------------
# local aggregation


def build_lgfa(g: Graph, feats, coords, K: int = 16, slope: float = 0.2, prefix: str = "lgfa"):
    """Graph attention over the K nearest keypoints with displacement encodings."""
    n, d = feats.shape
    if n <= K:
        raise DataError(f"local aggregation needs more than K={K} keypoints, got {n}")
    nbr = g.indices(lambda c: knn(c, K), [coords], (n, K), label="knn")
    q = linear(g, feats, f"{prefix}.q", d, d)
    k = linear(g, feats, f"{prefix}.k", d, d)
    v = linear(g, feats, f"{prefix}.v", d, d)
    rel = g.gather(coords, nbr) - g.reshape(coords, (n, 1, 3))
    e = mlp(g, rel, f"{prefix}.geo", (3, d, d))                      # (n, K, d)
    a = g.param(f"{prefix}.a", (3 * d,))
    # a^T [q_m; k_j; e_mj] split into its three blocks
    sq = g.reshape(g.matmul(q, g.slice(a, 0, d)), (n, 1))
    sk = g.gather(g.matmul(k, g.slice(a, d, 2 * d)), nbr)             # (n, K)
    se = g.matmul(e, g.slice(a, 2 * d, 3 * d))                        # (n, K)
    alpha = g.softmax(g.leaky_relu(sq + sk + se, slope), axis=-1)
    msg = g.gather(v, nbr) + e
    local = g.sum(msg * g.reshape(alpha, (n, K, 1)), axis=1)
    return g.relu(local + feats)


def lgfa(feats, coords, params=None, K: int = 16, slope: float = 0.2, seed: int = 0):
    out, _ = run_graph(
        lambda g, F, C: build_lgfa(g, F, C, K, slope),
        {"F": np.asarray(feats, float), "C": np.asarray(coords, float)}, params, seed,
    )
    return out


# --------------------------------------------------------------------------
# selective scan block


def _a_log_init(rng, shape):
    di, ds = shape
    return np.log(np.tile(np.arange(1, ds + 1, dtype=np.float64), (di, 1)))


def _dt_bias_init(rng, shape):
    # softplus^-1 of step sizes log-uniform in [1e-3, 1e-1]
    dt = np.exp(rng.uniform(np.log(1e-3), np.log(1e-1), shape))
    return dt + np.log(-np.expm1(-dt))


def _conv_init(rng, shape):
    return rng.uniform(-0.5, 0.5, shape)


CONV_WIDTH = 4


def build_mamba(g: Graph, x, name: str, d_inner: int, d_state: int):
    """One selective-scan block on a (L, d) sequence; causal in L."""
    L, d = x.shape
    xz = linear(g, x, f"{name}.in_proj", d, 2 * d_inner, bias=False)
    xs = g.slice(xz, 0, d_inner)
    z = g.slice(xz, d_inner, 2 * d_inner)

    # depthwise causal convolution: tap CONV_WIDTH-1 is the current token
    w = g.param(f"{name}.conv.w", (CONV_WIDTH, d_inner), _conv_init)
    padded = g.concat([g.const(np.zeros((CONV_WIDTH - 1, d_inner))), xs], axis=0)
    conv = g.param(f"{name}.conv.b", (d_inner,), zeros)
    for tap in range(CONV_WIDTH):
        conv = conv + g.slice(padded, tap, tap + L, axis=0) * g.slice(w, tap, tap + 1, axis=0)
    u = g.silu(conv)

    dt = g.softplus(linear(g, u, f"{name}.dt", d_inner, d_inner, bias_init=_dt_bias_init))
    B = linear(g, u, f"{name}.B", d_inner, d_state, bias=False)
    C = linear(g, u, f"{name}.C", d_inner, d_state, bias=False)
    A = -g.exp(g.param(f"{name}.A_log", (d_inner, d_state), _a_log_init))

    dt3 = g.reshape(dt, (L, d_inner, 1))
    decay = g.exp(dt3 * A)                                            # (L, di, ds)
    drive = g.reshape(dt * u, (L, d_inner, 1)) * g.reshape(B, (L, 1, d_state))
    h = g.scan(decay, drive)
    y = g.sum(h * g.reshape(C, (L, 1, d_state)), axis=-1)
    y = y + u * g.param(f"{name}.D", (d_inner,), ones)
    y = y * g.silu(z)
    return linear(g, y, f"{name}.out_proj", d_inner, d, bias=False)


def channel_flip(g: Graph, x):
    return g.reverse(x)


def token_flip(g: Graph, x):
    return g.transpose(g.reverse(g.transpose(x)))


def random_arrangement(d: int, seed: int = 0) -> np.ndarray:
    """Fixed channel permutation matrix used by the RA backward branch."""
    perm = np.random.default_rng([seed, 0xA11]).permutation(d)
    return np.eye(d)[perm].T  # x @ M reorders columns by perm


def _attention_mixer(g: Graph, x, name: str):
    L, d = x.shape
    q = linear(g, x, f"{name}.q", d, d, bias=False)
    k = linear(g, x, f"{name}.k", d, d, bias=False)
    v = linear(g, x, f"{name}.v", d, d, bias=False)
    att = g.softmax(g.matmul(q, g.transpose(k)) * (1.0 / np.sqrt(d)), axis=-1)
    return linear(g, g.matmul(att, v), f"{name}.o", d, d, bias=False)


def build_block(
    g: Graph, x, name: str, d_inner: int, d_state: int,
    kind: str = "twinmamba", backward: str = "CF", seed: int = 0,
):
    """Two-branch residual block: h + fuse([forward(h) | backward(h)]).

    twinmamba: both branches share one scan block; the backward branch wraps
    it in a channel flip (CF), token flip (TF) or fixed channel permutation
    (RA). bimamba: token-flipped backward branch with its own weights.
    attention: a single self-attention mixer replaces both branches.
    """
    L, d = x.shape
    hn = layer_norm(g, x, f"{name}.norm", d)
    if kind == "attention":
        return x + _attention_mixer(g, hn, f"{name}.attn")
    if kind == "twinmamba":
        fwd = build_mamba(g, hn, f"{name}.mamba", d_inner, d_state)
        if backward == "CF":
            bwd = channel_flip(g, build_mamba(g, channel_flip(g, hn), f"{name}.mamba", d_inner, d_state))
        elif backward == "TF":
            bwd = token_flip(g, build_mamba(g, token_flip(g, hn), f"{name}.mamba", d_inner, d_state))
        elif backward == "RA":
            M = random_arrangement(d, seed)
            mixed = build_mamba(g, g.matmul(hn, g.const(M)), f"{name}.mamba", d_inner, d_state)
            bwd = g.matmul(mixed, g.const(M.T))
        else:
            raise ValueError(f"unknown backward branch {backward!r}")
    elif kind == "bimamba":
        fwd = build_mamba(g, hn, f"{name}.mamba_f", d_inner, d_state)
        bwd = token_flip(g, build_mamba(g, token_flip(g, hn), f"{name}.mamba_b", d_inner, d_state))
    else:
        raise ValueError(f"unknown block kind {kind!r}")
    return x + linear(g, g.concat([fwd, bwd], axis=-1), f"{name}.fuse", 2 * d, d)


# --------------------------------------------------------------------------
# global aggregation


def build_cat_token(g: Graph, onehot, d: int, prefix: str = "mgsa.cat_embed"):
    return mlp(g, onehot, prefix, (N_CATEGORIES, d, d))


def one_hot(n: int) -> np.ndarray:
    if not 0 <= int(n) < N_CATEGORIES:
        raise DataError(f"category must be in [0, {N_CATEGORIES - 1}], got {n}")
    v = np.zeros(N_CATEGORIES)
    v[int(n)] = 1.0
    return v


def semantic_inject(g: Graph, seq, token):
    """Prepend the category token: (L, d) -> (L+1, d)."""
    return g.concat([g.reshape(token, (1, seq.shape[1])), seq], axis=0)


def build_mgsa(
    g: Graph, feats, coords, onehot, n_blocks: int, d_inner: int, d_state: int,
    method: str = "hilbert", bits: int = 10, kind: str = "twinmamba", backward: str = "CF",
    prefix: str = "mgsa", seed: int = 0,
):
    """Serialize, inject the category token, run the blocks, strip, un-permute."""
    n, d = feats.shape
    if n_blocks == 0:
        return feats
    order = g.indices(lambda c: serialize_keypoints(c, method, bits), [coords], (n,), label="order")
    inverse = g.indices(lambda c: np.argsort(serialize_keypoints(c, method, bits)), [coords], (n,), label="unorder")
    h = semantic_inject(g, g.gather(feats, order), build_cat_token(g, onehot, d, f"{prefix}.cat_embed"))
    for i in range(n_blocks):
        h = build_block(g, h, f"{prefix}.block{i}", d_inner, d_state, kind, backward, seed + i)
    return g.gather(g.slice(h, 1, n + 1, axis=0), inverse)


def mamba_scan(seq, params=None, d_inner: int = 16, d_state: int = 4, seed: int = 0):
    return run_graph(lambda g, x: build_mamba(g, x, "m", d_inner, d_state), {"x": np.asarray(seq, float)}, params, seed)
