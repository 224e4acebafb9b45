"""GNN layers over the shared message-list representation.

Node features are row matrices H (num_nodes x d). Every layer consumes the
graph's (src, dst) message index — one entry per ordered pair
(v, u in N(v)), self included — and produces the next H.

Two layer families implement the same mathematics by different routes and
are used to certify each other:

  * attention layers: the per-head form (softmax-weighted neighbor sums,
    heads averaged) and the expanded form (per-edge coefficient vectors
    outer-multiplied into features, aggregated once, then mixed by the
    interleaved head-weight matrix);
  * expanding convolution: the per-neighbor MLP-before-sum form and the
    three-stage form that aggregates per output dimension over the
    ReLU-active neighbor subsets.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np

from . import tensor as T
from .graphs import neighborhood

__all__ = [
    "LayerSpec", "Model", "init_layer_params", "layer_forward",
    "gcn_forward", "gin0_forward", "gat_default_forward",
    "gat_expanding_forward", "expc_forward", "expc_three_stage_forward",
    "combc_forward", "readout", "layer_param_count", "model_param_count",
    "expc_local_blocks", "save_model", "load_model",
]

LAYER_KINDS = ("GCN", "GIN0", "GAT_DEFAULT", "GAT_EXPANDING", "EXPC",
               "COMBC", "EXPC_THREE_STAGE", "EXPC_MULTIAGG")


@dataclass
class LayerSpec:
    kind: str
    d_in: int
    d_out: int
    s: int = 1              # expansion factor (EXPC family)
    heads: int = 1          # attention head count (GAT family)
    re_sum: bool = True     # per-neighbor MLP before the sum
    mlp_depth: int = 2
    append: str = "one"     # EXPC_MULTIAGG constant rows: "one" | "one_and_invdeg"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind.startswith("GAT"):
            if self.d_in != self.d_out:
                raise ValueError("attention layers use square per-head weights: d_in == d_out")
            if self.heads < 1:
                raise ValueError("heads must be >= 1")
        if self.kind.startswith("EXPC") and self.s < 1:
            raise ValueError("expansion factor s must be >= 1")
        if self.kind == "EXPC_THREE_STAGE":
            self.mlp_depth = 1  # the dimension-wise rearrangement assumes one layer
        if self.mlp_depth not in (1, 2):
            raise ValueError("mlp_depth must be 1 or 2")
        if self.append not in ("one", "one_and_invdeg"):
            raise ValueError(f"unknown append mode {self.append!r}")


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def _coeff_width(spec):
    """Effective number of coefficient rows after any appended constants."""
    if spec.kind == "EXPC_MULTIAGG":
        return spec.s + (1 if spec.append == "one" else 2)
    if spec.kind == "COMBC":
        return spec.d_in
    return spec.s


def init_layer_params(spec, rng):
    """Parameter tensors with the shapes the layer equations dictate.

    Weights that multiply column vectors in the equations are stored that
    way (e.g. the coefficient generator is (s, 2*d_in)); forwards
    transpose as needed for the row-major feature convention.
    """
    p = {}
    if spec.kind == "GCN":
        p["W"] = T.Tensor(_uniform(rng, (spec.d_in, spec.d_out), spec.d_in))
        p["b"] = T.Tensor(np.zeros((1, spec.d_out)))
    elif spec.kind == "GIN0":
        p["W1"] = T.Tensor(_uniform(rng, (spec.d_out, spec.d_in), spec.d_in))
        p["b1"] = T.Tensor(np.zeros((spec.d_out, 1)))
        p["W2"] = T.Tensor(_uniform(rng, (spec.d_out, spec.d_out), spec.d_out))
        p["b2"] = T.Tensor(np.zeros((spec.d_out, 1)))
    elif spec.kind in ("GAT_DEFAULT", "GAT_EXPANDING"):
        d = spec.d_in
        for k in range(spec.heads):
            p[f"W{k}"] = T.Tensor(_uniform(rng, (d, d), d))
            p[f"a{k}"] = T.Tensor(_uniform(rng, (2 * d, 1), 2 * d))
    elif spec.kind in ("EXPC", "EXPC_THREE_STAGE", "EXPC_MULTIAGG"):
        p["Wc"] = T.Tensor(_uniform(rng, (spec.s, 2 * spec.d_in), 2 * spec.d_in))
        p["bc"] = T.Tensor(np.zeros((spec.s, 1)))
        mlp_in = _coeff_width(spec) * spec.d_in
        p["W1"] = T.Tensor(_uniform(rng, (spec.d_out, mlp_in), mlp_in))
        p["b1"] = T.Tensor(np.zeros((spec.d_out, 1)))
        if spec.mlp_depth == 2:
            p["W2"] = T.Tensor(_uniform(rng, (spec.d_out, spec.d_out), spec.d_out))
            p["b2"] = T.Tensor(np.zeros((spec.d_out, 1)))
    elif spec.kind == "COMBC":
        p["Wc"] = T.Tensor(_uniform(rng, (spec.d_in, 2 * spec.d_in), 2 * spec.d_in))
        p["bc"] = T.Tensor(np.zeros((spec.d_in, 1)))
        p["W1"] = T.Tensor(_uniform(rng, (spec.d_out, spec.d_in), spec.d_in))
        p["b1"] = T.Tensor(np.zeros((spec.d_out, 1)))
        if spec.mlp_depth == 2:
            p["W2"] = T.Tensor(_uniform(rng, (spec.d_out, spec.d_out), spec.d_out))
            p["b2"] = T.Tensor(np.zeros((spec.d_out, 1)))
    return p


def layer_param_count(spec):
    rng = np.random.default_rng(0)
    return sum(t.data.size for t in init_layer_params(spec, rng).values())


def _mlp(params, x, depth):
    """Row-major MLP with equation-shaped weights: depth 1 is affine+ReLU
    (the form the dimension-wise rearrangement analyses), depth 2 is
    linear-ReLU-linear."""
    h = T.add_bias(T.matmul(x, T.transpose(params["W1"])), T.transpose(params["b1"]))
    h = T.activation(h, "relu")
    if depth == 1:
        return h
    return T.add_bias(T.matmul(h, T.transpose(params["W2"])), T.transpose(params["b2"]))


def gcn_forward(params, graph, H):
    """Symmetric degree-normalized convolution with self-loops, ReLU output."""
    src, dst = graph.message_index()
    dhat = graph.degrees() + 1.0
    coeff = 1.0 / np.sqrt(dhat[src] * dhat[dst])
    msgs = T.row_scale(T.gather_rows(H, src), coeff)
    agg = T.scatter_add_rows(msgs, dst, graph.num_nodes)
    return T.activation(T.add_bias(T.matmul(agg, params["W"]), params["b"]), "relu")


def gin0_forward(params, graph, H):
    """MLP applied to the plain neighbor sum (self included)."""
    src, dst = graph.message_index()
    summed = T.scatter_add_rows(T.gather_rows(H, src), dst, graph.num_nodes)
    return _mlp(params, summed, depth=2)


def _head_projections(params, H, heads):
    return [T.matmul(H, T.transpose(params[f"W{k}"])) for k in range(heads)]


def gat_default_forward(params, graph, H, heads):
    """Per-head attention: softmax over the neighborhood of
    LeakyReLU(a_k . [W_k h_v || W_k h_u]), heads averaged, then ReLU."""
    src, dst = graph.message_index()
    n = graph.num_nodes
    total = None
    for k, HW in enumerate(_head_projections(params, H, heads)):
        pair = T.concat([T.gather_rows(HW, dst), T.gather_rows(HW, src)], axis=1)
        logits = T.activation(T.matmul(pair, params[f"a{k}"]), "leakyrelu", alpha=0.2)
        alpha = T.segment_softmax(logits, dst, n)
        head_out = T.scatter_add_rows(T.colvec_mul(T.gather_rows(HW, src), alpha), dst, n)
        total = head_out if total is None else T.add(total, head_out)
    return T.activation(T.scale(total, 1.0 / heads), "relu")


def gat_expanding_forward(params, graph, H, heads):
    """The same attention layer written as an expanding convolution.

    Identical tensors, different route: per-edge K-vector coefficients
    from the split attention vectors, vec(alpha h_u^T) expansion summed
    over the neighborhood, then one multiplication by the heads' weight
    columns interleaved feature-major.
    """
    src, dst = graph.message_index()
    n = graph.num_nodes
    d = H.data.shape[1] if isinstance(H, T.Tensor) else H.shape[1]
    Hs = T.gather_rows(H, src)
    logit_cols = []
    for k, HW in enumerate(_head_projections(params, H, heads)):
        a_self = T.slice_rows(params[f"a{k}"], 0, d)
        a_nbr = T.slice_rows(params[f"a{k}"], d, 2 * d)
        lt = T.add(T.matmul(T.gather_rows(HW, dst), a_self),
                   T.matmul(T.gather_rows(HW, src), a_nbr))
        logit_cols.append(lt)
    logits = T.concat(logit_cols, axis=1)                      # (msgs, K)
    alpha = T.segment_softmax(T.activation(logits, "leakyrelu", alpha=0.2), dst, n)
    expanded = T.expand_outer(alpha, Hs)                       # (msgs, d*K), j*K+k layout
    agg = T.scatter_add_rows(expanded, dst, n)
    # W_cat column j*K+k must be column j of W_k: interleave the stacked
    # transposed head weights from k-major to j-major row order.
    stacked = T.concat([T.transpose(params[f"W{k}"]) for k in range(heads)], axis=0)
    perm = np.array([k * d + j for j in range(d) for k in range(heads)])
    w_cat_t = T.gather_rows(stacked, perm)                     # (K*d, d)
    return T.activation(T.scale(T.matmul(agg, w_cat_t), 1.0 / heads), "relu")


def _edge_coefficients(params, Hd, Hs, bypass, inv_count):
    if bypass is None:
        pair = T.concat([Hd, Hs], axis=1)
        pre = T.add_bias(T.matmul(pair, T.transpose(params["Wc"])), T.transpose(params["bc"]))
        return T.activation(pre, "tanh")
    # fixed non-trainable coefficients; test plumbing for degenerate reductions
    k = Hd.data.shape[0]
    s = params["Wc"].data.shape[0]
    if bypass == "ones":
        return T.Tensor(np.ones((k, s)))
    if bypass == "zeros":
        return T.Tensor(np.zeros((k, s)))
    if bypass == "inv_deg":
        return T.Tensor(np.tile(inv_count[:, None], (1, s)))
    raise ValueError(f"unknown bypass {bypass!r}")


def expc_forward(params, graph, H, spec, bypass=None):
    """Expanding convolution: per-edge coefficient vectors m_uv expand the
    neighbor features as vec(m_uv h_u^T) before aggregation.

    re_sum=True applies the MLP per neighbor and sums the results (the
    nonlinearity acts ahead of the sum); re_sum=False sums the expansions
    first and applies the MLP once. bypass substitutes fixed coefficients
    ("ones" or "inv_deg") for the tanh generator — test plumbing only.
    """
    src, dst = graph.message_index()
    n = graph.num_nodes
    Hd, Hs = T.gather_rows(H, dst), T.gather_rows(H, src)
    counts = np.bincount(dst, minlength=n).astype(np.float64)
    C = _edge_coefficients(params, Hd, Hs, bypass, 1.0 / counts[dst])
    if spec.kind == "EXPC_MULTIAGG":
        k = C.data.shape[0]
        extra = [T.Tensor(np.ones((k, 1)))]
        if spec.append == "one_and_invdeg":
            extra.append(T.Tensor((1.0 / counts[dst])[:, None]))
        C = T.concat([C] + extra, axis=1)
    expanded = T.expand_outer(C, Hs)
    if spec.re_sum:
        return T.scatter_add_rows(_mlp(params, expanded, spec.mlp_depth), dst, n)
    return _mlp(params, T.scatter_add_rows(expanded, dst, n), spec.mlp_depth)


def combc_forward(params, graph, H, spec, bypass=None):
    """Elementwise-coefficient convolution: m_uv ⊙ h_u per edge, with the
    same re_sum semantics as expc_forward."""
    src, dst = graph.message_index()
    n = graph.num_nodes
    Hd, Hs = T.gather_rows(H, dst), T.gather_rows(H, src)
    counts = np.bincount(dst, minlength=n).astype(np.float64)
    C = _edge_coefficients(params, Hd, Hs, bypass, 1.0 / counts[dst])
    msgs = T.elementwise_mul(C, Hs)
    if spec.re_sum:
        return T.scatter_add_rows(_mlp(params, msgs, spec.mlp_depth), dst, n)
    return _mlp(params, T.scatter_add_rows(msgs, dst, n), spec.mlp_depth)


def expc_three_stage_forward(params, graph, H, spec):
    """Dimension-wise route to the re_sum expanding convolution (1-layer MLP).

    For output dimension i, the active subset N_i(v) collects the
    neighbors whose pre-activation W1[i] vec(m_uv h_u^T) + b1[i] is
    positive. Aggregation runs per dimension over that subset only:
    the coefficient block M_vi times the local feature block, then the
    matching W1 row, plus |N_i(v)| times the bias.

    Pure numpy (no autodiff); returns (H_next, report) where the report
    exposes the per-node coefficient matrices and active subsets:
    report["coeff"][v] is the s x |N(v)| matrix, report["active"][(v, i)]
    the tuple of active neighbors.
    """
    Hd = H.data if isinstance(H, T.Tensor) else np.asarray(H, dtype=np.float64)
    Wc, bc = params["Wc"].data, params["bc"].data
    W1, b1 = params["W1"].data, params["b1"].data
    s, d_out = Wc.shape[0], W1.shape[0]
    out = np.zeros((graph.num_nodes, d_out))
    report = {"coeff": {}, "active": {}}
    for v in range(graph.num_nodes):
        nbrs = neighborhood(graph, v)
        hv = Hd[v]
        M_v = np.empty((s, len(nbrs)))
        pre = np.empty((len(nbrs), d_out))
        for j, u in enumerate(nbrs):
            m_uv = np.tanh(Wc @ np.concatenate([hv, Hd[u]]) + bc[:, 0])
            M_v[:, j] = m_uv
            expanded = np.outer(m_uv, Hd[u]).reshape(-1, order="F")
            pre[j] = W1 @ expanded + b1[:, 0]
        report["coeff"][v] = M_v
        for i in range(d_out):
            active = [j for j in range(len(nbrs)) if pre[j, i] > 0.0]
            report["active"][(v, i)] = tuple(nbrs[j] for j in active)
            if not active:
                continue
            M_vi = M_v[:, active]                    # s x |N_i(v)|
            H_vi = Hd[[nbrs[j] for j in active]]     # |N_i(v)| x d_in
            r_vi = M_vi @ H_vi                       # aggregate first,
            out[v, i] = W1[i] @ r_vi.reshape(-1, order="F") + len(active) * b1[i, 0]
    return out, report


def expc_local_blocks(params, graph, H):
    """Per-node (coefficient matrix, local feature block) from the tanh
    generator: M_v is s x |N(v)| with one column per neighbor, H_v is
    |N(v)| x d. Their product is the node's aggregated block
    sum_u m_uv h_u^T, the object whose rank the layer preserves."""
    Hd = H.data if isinstance(H, T.Tensor) else np.asarray(H, dtype=np.float64)
    Wc, bc = params["Wc"].data, params["bc"].data
    blocks = {}
    for v in range(graph.num_nodes):
        nbrs = neighborhood(graph, v)
        pair = np.concatenate([np.tile(Hd[v], (len(nbrs), 1)), Hd[nbrs]], axis=1)
        M_v = np.tanh(pair @ Wc.T + bc.T).T
        blocks[v] = (M_v, Hd[nbrs])
    return blocks


def layer_forward(spec, params, graph, H, bypass=None):
    """Dispatch a layer forward pass; returns a Tensor of node features."""
    if spec.kind == "GCN":
        return gcn_forward(params, graph, H)
    if spec.kind == "GIN0":
        return gin0_forward(params, graph, H)
    if spec.kind == "GAT_DEFAULT":
        return gat_default_forward(params, graph, H, spec.heads)
    if spec.kind == "GAT_EXPANDING":
        return gat_expanding_forward(params, graph, H, spec.heads)
    if spec.kind in ("EXPC", "EXPC_MULTIAGG"):
        return expc_forward(params, graph, H, spec, bypass=bypass)
    if spec.kind == "COMBC":
        return combc_forward(params, graph, H, spec, bypass=bypass)
    if spec.kind == "EXPC_THREE_STAGE":
        out, _ = expc_three_stage_forward(params, graph, H, spec)
        return T.Tensor(out)  # inspection route: no gradients through it
    raise ValueError(f"unknown layer kind {spec.kind!r}")


def readout(H_list, mode="SUM"):
    """Concatenate per-layer node features, then pool over nodes."""
    if not H_list:
        raise ValueError("readout needs at least one layer output")
    stacked = H_list[0] if len(H_list) == 1 else T.concat(H_list, axis=1)
    if mode == "SUM":
        return T.sum_rows(stacked)
    if mode == "MEAN":
        return T.mean_rows(stacked)
    raise ValueError(f"unknown readout mode {mode!r}")


class Model:
    """A stack of layers, layer-concatenated readout, and a linear head."""

    def __init__(self, specs, seed=0, head_dim=1, readout_mode="SUM"):
        self.specs = list(specs)
        self.seed = seed
        self.head_dim = head_dim
        self.readout_mode = readout_mode
        rng = np.random.default_rng(seed)
        self.layer_params = [init_layer_params(sp, rng) for sp in self.specs]
        feat = sum(sp.d_out for sp in self.specs)
        self.head_W = T.Tensor(_uniform(rng, (feat, head_dim), feat))
        self.head_b = T.Tensor(np.zeros((1, head_dim)))

    def named_params(self):
        out = []
        for i, params in enumerate(self.layer_params):
            for name in sorted(params):
                out.append((f"layer{i}.{name}", params[name]))
        out.append(("head.W", self.head_W))
        out.append(("head.b", self.head_b))
        return out

    def params(self):
        return [t for _, t in self.named_params()]

    def watch(self, tape):
        for t in self.params():
            tape.watch(t)

    def zero_grad(self):
        for t in self.params():
            t.zero_grad()

    def forward(self, graph):
        """Graph-level prediction: (1, head_dim) tensor."""
        H = T.Tensor(graph.node_features)
        outputs = []
        for spec, params in zip(self.specs, self.layer_params):
            H = layer_forward(spec, params, graph, H)
            outputs.append(H)
        pooled = readout(outputs, self.readout_mode)
        return T.add_bias(T.matmul(pooled, self.head_W), self.head_b)


def model_param_count(model):
    return sum(t.data.size for t in model.params())


def save_model(model, path):
    """JSON manifest + flat little-endian float64 blob with declared ordering."""
    names = model.named_params()
    manifest = {
        "seed": model.seed,
        "head_dim": model.head_dim,
        "readout_mode": model.readout_mode,
        "layers": [asdict(sp) for sp in model.specs],
        "params": [{"name": n, "shape": list(t.data.shape)} for n, t in names],
        "dtype": "<f8",
        "order": "C",
    }
    with open(f"{path}.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    blob = b"".join(np.ascontiguousarray(t.data, dtype="<f8").tobytes() for _, t in names)
    with open(f"{path}.bin", "wb") as fh:
        fh.write(blob)


def load_model(path):
    with open(f"{path}.json") as fh:
        manifest = json.load(fh)
    specs = [LayerSpec(**sp) for sp in manifest["layers"]]
    model = Model(specs, seed=manifest["seed"], head_dim=manifest["head_dim"],
                  readout_mode=manifest["readout_mode"])
    raw = np.fromfile(f"{path}.bin", dtype="<f8")
    offset = 0
    by_name = dict(model.named_params())
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape))
        by_name[entry["name"]].data = raw[offset:offset + size].reshape(shape).copy()
        offset += size
    if offset != raw.size:
        raise ValueError(f"parameter blob size mismatch: read {offset}, file has {raw.size}")
    return model
