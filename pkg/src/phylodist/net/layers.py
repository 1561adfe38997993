"""Network building blocks.

Layouts: sequence tensors are (taxa, channel, site); pair tensors are
(pair, channel, site) with the two members of a pair stacked as the first
and second half of the channel axis.  Site-axis reductions use ordered_sum
so site permutations are bit-neutral; cross-taxa information flows only
through attention or explicit mean-context terms.
"""

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError


def _act(name):
    if name not in ad.ACTIVATIONS:
        raise ConfigError(f"unknown activation {name!r}")
    return ad.ACTIVATIONS[name]


class Layer:
    """Common surface: forward(tensor), named parameter list."""

    def params(self):
        return [(name, getattr(self, name)) for name in self.param_names]

    def load(self, arrays):
        for (name, p), arr in zip(self.params(), arrays):
            if p.data.shape != arr.shape:
                raise ConfigError(
                    f"{type(self).__name__}.{name}: shape {arr.shape} != {p.data.shape}"
                )
            p.data = np.array(arr, dtype=float)


class EquivariantPair(Layer):
    """Pair layer with the five-term structured weights, one set per head.

    Per head (w1..w5): out_x = w1*x + w2*y + w3*sum_sites(x) + w4*sum_sites(y)
    + w5, and symmetrically for out_y.  Heads concatenate along the channel
    axis within each member block.  Exactly equivariant under joint site
    permutations and member swap.
    """

    param_names = ("weights",)

    def __init__(self, weights, activation="relu"):
        self.weights = ad.Tensor(np.atleast_2d(np.asarray(weights, float)), requires_grad=True)
        if self.weights.shape[1] != 5:
            raise ConfigError("each equivariant head needs 5 weights")
        self.activation = activation

    @classmethod
    def random(cls, heads, rng, activation="elu"):
        return cls(rng.normal(0.0, 0.5, size=(heads, 5)), activation)

    def forward(self, t):
        p, c2, length = t.shape
        if c2 % 2:
            raise ConfigError("pair tensor channel axis must be even")
        c = c2 // 2
        pair = ad.reshape(t, (p, 2, c, length))
        x, y = pair[:, 0], pair[:, 1]
        sx = ad.ordered_sum(x, axis=-1, keepdims=True)
        sy = ad.ordered_sum(y, axis=-1, keepdims=True)
        act = _act(self.activation)
        blocks_x, blocks_y = [], []
        n_heads = self.weights.shape[0]
        for h in range(n_heads):
            w = self.weights[h]
            w1, w2, w3, w4, w5 = (w[k] for k in range(5))
            blocks_x.append(act(w1 * x + w2 * y + w3 * sx + w4 * sy + w5))
            blocks_y.append(act(w1 * y + w2 * x + w3 * sy + w4 * sx + w5))
        out_x = blocks_x[0] if n_heads == 1 else ad.concat(blocks_x, axis=1)
        out_y = blocks_y[0] if n_heads == 1 else ad.concat(blocks_y, axis=1)
        both = ad.stack([out_x, out_y], axis=1)
        return ad.reshape(both, (p, 2 * n_heads * c, length))


class InvariantPair(Layer):
    """Final invariant collapse: w1 * sum over members and sites + w2."""

    param_names = ("weights",)

    def __init__(self, w1, w2):
        self.weights = ad.Tensor(np.array([w1, w2], float), requires_grad=True)

    @classmethod
    def random(cls, rng):
        return cls(rng.normal(0.0, 0.5), rng.normal(0.0, 0.5))

    def forward(self, t):
        p, c2, length = t.shape
        c = c2 // 2
        pair = ad.reshape(t, (p, 2, c, length))
        per_member = ad.ordered_sum(pair, axis=3)  # (p, 2, c)
        total = ad.tensor_sum(per_member, axis=1)  # member order is fixed
        return self.weights[0] * total + self.weights[1]


class ChannelConv(Layer):
    """Per-site linear map across channels (kernel size 1 along sites)."""

    param_names = ("weight", "bias")

    def __init__(self, weight, bias, activation="identity"):
        self.weight = ad.Tensor(np.asarray(weight, float), requires_grad=True)
        self.bias = ad.Tensor(np.asarray(bias, float), requires_grad=True)
        self.activation = activation

    @classmethod
    def random(cls, c_in, c_out, rng, activation="elu"):
        scale = 1.0 / np.sqrt(c_in)
        return cls(rng.normal(0.0, scale, size=(c_out, c_in)), np.zeros(c_out), activation)

    def forward(self, t):
        moved = ad.moveaxis(t, 1, 2)  # (batch, site, c_in)
        out = ad.moveaxis(moved @ ad.moveaxis(self.weight, 0, 1), 2, 1)
        out = out + ad.reshape(self.bias, (1, -1, 1))
        return _act(self.activation)(out)


class PerMemberConv(ChannelConv):
    """ChannelConv applied separately (with shared weights) to each member
    block of a pair tensor, preserving the pair block structure."""

    def forward(self, t):
        p, c2, length = t.shape
        c = c2 // 2
        folded = ad.reshape(t, (p * 2, c, length))
        out = super().forward(folded)
        return ad.reshape(out, (p, 2 * out.shape[1], length))


class DeepSetsMix(Layer):
    """Exchangeable-context channel mix: self term plus mean-pooled context
    terms along the site axis and (optionally) the taxa axis."""

    param_names = ("w_self", "w_site", "w_taxa", "bias")

    def __init__(self, w_self, w_site, w_taxa, bias, use_taxa, activation="elu"):
        self.w_self = ad.Tensor(np.asarray(w_self, float), requires_grad=True)
        self.w_site = ad.Tensor(np.asarray(w_site, float), requires_grad=True)
        self.w_taxa = ad.Tensor(np.asarray(w_taxa, float), requires_grad=True)
        self.bias = ad.Tensor(np.asarray(bias, float), requires_grad=True)
        self.use_taxa = use_taxa
        self.activation = activation

    @classmethod
    def random(cls, c_in, c_out, rng, use_taxa, activation="elu"):
        s = 1.0 / np.sqrt(c_in)
        return cls(
            rng.normal(0.0, s, size=(c_out, c_in)),
            rng.normal(0.0, s, size=(c_out, c_in)),
            rng.normal(0.0, s, size=(c_out, c_in)),
            np.zeros(c_out),
            use_taxa,
            activation,
        )

    def _mix(self, w, t):
        moved = ad.moveaxis(t, 1, 2)
        return ad.moveaxis(moved @ ad.moveaxis(w, 0, 1), 2, 1)

    def forward(self, t):
        length = t.shape[2]
        out = self._mix(self.w_self, t)
        site_ctx = ad.ordered_sum(t, axis=2, keepdims=True) * (1.0 / length)
        out = out + self._mix(self.w_site, site_ctx)
        if self.use_taxa:
            taxa_ctx = ad.ordered_sum(t, axis=0, keepdims=True) * (1.0 / t.shape[0])
            out = out + self._mix(self.w_taxa, taxa_ctx)
        out = out + ad.reshape(self.bias, (1, -1, 1))
        return _act(self.activation)(out)


class Attention(Layer):
    """Multi-head scaled dot-product self-attention with a residual update.

    axis="site" attends across sites within each row; axis="taxa" attends
    across rows at each site.  Channels d split into H heads of width d/H;
    scores are scaled by 1/sqrt(d).
    """

    param_names = ("w_q", "w_k", "w_v")

    def __init__(self, w_q, w_k, w_v, axis):
        self.w_q = ad.Tensor(np.asarray(w_q, float), requires_grad=True)
        self.w_k = ad.Tensor(np.asarray(w_k, float), requires_grad=True)
        self.w_v = ad.Tensor(np.asarray(w_v, float), requires_grad=True)
        if axis not in ("site", "taxa"):
            raise ConfigError(f"unknown attention axis {axis!r}")
        self.axis = axis

    @classmethod
    def random(cls, channels, heads, rng, axis="site"):
        if channels % heads:
            raise ConfigError(f"{heads} heads do not divide {channels} channels")
        dh = channels // heads
        s = 1.0 / np.sqrt(channels)
        size = (heads, channels, dh)
        return cls(
            rng.normal(0.0, s, size=size),
            rng.normal(0.0, s, size=size),
            rng.normal(0.0, s, size=size),
            axis,
        )

    @property
    def heads(self):
        return self.w_q.shape[0]

    def forward(self, t):
        d = t.shape[1]
        if self.axis == "site":
            x = ad.moveaxis(t, 1, 2)  # (rows, site, d): tokens = sites
        else:
            x = ad.moveaxis(t, 2, 0)  # (site, rows, d): tokens = rows
        scale = 1.0 / np.sqrt(d)
        outs = []
        for h in range(self.heads):
            q = x @ self.w_q[h]
            k = x @ self.w_k[h]
            v = x @ self.w_v[h]
            scores = (q @ ad.moveaxis(k, -1, -2)) * scale
            attn = ad.softmax(scores, axis=-1)
            outs.append(attn @ v)
        update = outs[0] if self.heads == 1 else ad.concat(outs, axis=-1)
        x = x + update
        if self.axis == "site":
            return ad.moveaxis(x, 2, 1)
        return ad.moveaxis(x, 0, 2)

    def attention_weights(self, t):
        """Softmax matrices per head (numpy), for diagnostics."""
        d = t.shape[1]
        x = ad.moveaxis(t, 1, 2) if self.axis == "site" else ad.moveaxis(t, 2, 0)
        out = []
        for h in range(self.heads):
            q = (x @ self.w_q[h]).data
            k = (x @ self.w_k[h]).data
            scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(d)
            z = scores - scores.max(axis=-1, keepdims=True)
            e = np.exp(z)
            out.append(e / e.sum(axis=-1, keepdims=True))
        return out


class MeanPoolSites(Layer):
    """(batch, channel, site) -> (batch, channel), invariant to site order."""

    param_names = ()

    def forward(self, t):
        return ad.ordered_sum(t, axis=2) * (1.0 / t.shape[2])


class Dense(Layer):
    param_names = ("weight", "bias")

    def __init__(self, weight, bias, activation="identity"):
        self.weight = ad.Tensor(np.asarray(weight, float), requires_grad=True)
        self.bias = ad.Tensor(np.asarray(bias, float), requires_grad=True)
        self.activation = activation

    @classmethod
    def random(cls, f_in, f_out, rng, activation="elu"):
        s = np.sqrt(2.0 / f_in)
        return cls(rng.normal(0.0, s, size=(f_in, f_out)), np.zeros(f_out), activation)

    def forward(self, t):
        return _act(self.activation)(t @ self.weight + self.bias)


class ScalarMLP(Layer):
    """Dense stack mapping (..., features) to a scalar per row."""

    def __init__(self, dense_layers):
        self.dense = list(dense_layers)

    @classmethod
    def random(cls, f_in, hidden, rng, activation="elu"):
        sizes = [f_in] + list(hidden) + [1]
        layers = []
        for i in range(len(sizes) - 1):
            act = activation if i < len(sizes) - 2 else "identity"
            layers.append(Dense.random(sizes[i], sizes[i + 1], rng, act))
        return cls(layers)

    def params(self):
        out = []
        for i, layer in enumerate(self.dense):
            for name, p in layer.params():
                out.append((f"dense{i}.{name}", p))
        return out

    def load(self, arrays):
        it = iter(arrays)
        for layer in self.dense:
            layer.load([next(it) for _ in layer.param_names])

    def forward(self, t):
        for layer in self.dense:
            t = layer.forward(t)
        return ad.reshape(t, t.shape[:-1])

    def n_params(self):
        return sum(p.data.size for _, p in self.params())
