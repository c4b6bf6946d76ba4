"""Attentive multi-encoder network.

One model per vulnerability type. Inputs are the three encoded expert
patterns and the normalized semantic graph of a function; outputs are a
logit, a hard label and one interpretability weight per fused feature.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import nn
from .graph import EDGE_TYPES, FEATURE_DIM, NormalizedGraph
from .nn import checkpoint
from .nn.tensor import Tensor
from .patterns import PATTERN_NAMES, Vulnerability

AME = "AME"
AME_RG = "AME-RG"  # no graph branch
AME_RP = "AME-RP"  # no pattern branches
VARIANTS = (AME, AME_RG, AME_RP)


class CheckpointMismatch(checkpoint.LoadError):
    pass


@dataclass
class ModelConfig:
    vulnerability: str = Vulnerability.REENTRANCY.value
    variant: str = AME
    d: int = 200
    F: int = FEATURE_DIM
    k: int = 3
    self_attn_hidden: int = 200
    encoder_hidden: int = 100
    pattern_hidden: int = 100
    fuse_hidden: int = 100
    edge_embed: int = 8

    def __post_init__(self):
        self.vulnerability = Vulnerability.parse(self.vulnerability).value
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.d <= 0 or self.k != 3:
            raise ValueError("need d > 0 and k == 3")

    @property
    def uses_graph(self) -> bool:
        return self.variant != AME_RG

    @property
    def uses_patterns(self) -> bool:
        return self.variant != AME_RP

    def feature_names(self) -> list[str]:
        names = ["graph"] if self.uses_graph else []
        if self.uses_patterns:
            names += list(PATTERN_NAMES[Vulnerability(self.vulnerability)])
        return names


@dataclass
class ModelInput:
    """Pattern encodings (3, 4) plus the normalized graph, or None to bypass the graph branch."""

    patterns: np.ndarray
    graph: Optional[NormalizedGraph] = None


@dataclass
class Batch:
    size: int
    patterns: np.ndarray          # (G, 3, 4)
    features: np.ndarray          # (N, F) node features of all graphs, stacked
    node_graph: np.ndarray        # (N,) owning graph of each node row
    has_graph: np.ndarray         # (G, 1) 1.0 when the graph has at least one node
    steps: list = field(default_factory=list)  # per step j: (start rows, end rows, edge type ids)


def make_batch(inputs: Sequence[ModelInput]) -> Batch:
    feats, owner, edges = [], [], []
    n = 0
    for gi, item in enumerate(inputs):
        g = item.graph
        if g is None or not g.nodes:
            edges.append([])
            continue
        row = {node.id: n + r for r, node in enumerate(g.nodes)}
        feats.append(g.features())
        owner += [gi] * len(g.nodes)
        n += len(g.nodes)
        ordered = sorted(g.edges, key=lambda e: e.t)
        edges.append([(row[e.start], row[e.end], EDGE_TYPES.index(e.etype)) for e in ordered])
    n_steps = max((len(e) for e in edges), default=0)
    steps = []
    for j in range(n_steps):
        col = [e[j] for e in edges if len(e) > j]
        steps.append(tuple(np.array(x, dtype=np.int64) for x in zip(*col)))
    has = np.zeros((len(inputs), 1))
    for gi in set(owner):
        has[gi] = 1.0
    return Batch(
        size=len(inputs),
        patterns=np.stack([np.asarray(i.patterns, dtype=np.float64) for i in inputs]) if inputs else np.zeros((0, 3, 4)),
        features=np.concatenate(feats) if feats else np.zeros((0, FEATURE_DIM)),
        node_graph=np.array(owner, dtype=np.int64),
        has_graph=has,
        steps=steps,
    )


@dataclass
class Forward:
    """Tensors of one batched forward pass (row i belongs to example i)."""

    logits: Tensor
    weights: Tensor
    g: Optional[Tensor] = None
    p: list = field(default_factory=list)
    g_att: Optional[Tensor] = None
    p_att: list = field(default_factory=list)
    g_enc: Optional[Tensor] = None
    p_enc: list = field(default_factory=list)
    v: Optional[Tensor] = None


@dataclass
class ForwardTrace:
    """Per-example numpy view of a forward pass."""

    logit: float
    confidence: float
    label: int
    weights: dict
    v: np.ndarray
    g: Optional[np.ndarray] = None
    p: list = field(default_factory=list)
    g_att: Optional[np.ndarray] = None
    p_att: list = field(default_factory=list)
    g_enc: Optional[np.ndarray] = None
    p_enc: list = field(default_factory=list)


def _glorot(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def label_of(logit) -> np.ndarray:
    """Hard label: sigmoid(logit) rounded half-up, i.e. logit >= 0."""
    return (np.asarray(logit) >= 0).astype(np.int64)


def attention_weights(features: Sequence[Tensor], v: Tensor) -> Tensor:
    """Softmax over the inner products <feature_i, v>, one row per example."""
    scores = nn.concat([nn.inner_product(f, v) for f in features], axis=1)
    return nn.softmax(scores, axis=1)


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


class AMEModel:
    def __init__(self, config: Optional[ModelConfig] = None, seed: int = 0):
        self.config = config or ModelConfig()
        self.params = nn.ParameterStore()
        self.digest: Optional[str] = None
        self._init(np.random.default_rng(seed))

    # -- parameters

    def _linear(self, rng, name, fan_in, fan_out):
        self.params.add(f"{name}.W", _glorot(rng, fan_in, fan_out))
        self.params.add(f"{name}.b", np.zeros(fan_out))

    def _init(self, rng):
        c = self.config
        d = c.d
        if c.uses_patterns:
            for i in range(c.k):
                self._linear(rng, f"pattern{i}.0", 4, c.pattern_hidden)
                self._linear(rng, f"pattern{i}.1", c.pattern_hidden, d)
        if c.uses_graph:
            self._linear(rng, "fc_in", c.F, d)
            self.params.add("edge_embed", rng.normal(0.0, 1.0, size=(len(EDGE_TYPES), c.edge_embed)))
            self._linear(rng, "tmp.msg", 2 * d + c.edge_embed, d)
            self._linear(rng, "tmp.gate", 2 * d, d)
            self._linear(rng, "tmp.cand", 2 * d, d)
            for name in ("agg.gate", "agg.out"):
                self._linear(rng, f"{name}.0", 2 * d, d)
                self._linear(rng, f"{name}.1", d, d)
            self._linear(rng, "agg.fc", d, d)
        for f in self._branches():
            self._linear(rng, f"attn.{f}.0", d, c.self_attn_hidden)
            self._linear(rng, f"attn.{f}.1", c.self_attn_hidden, d)
            self._linear(rng, f"enc.{f}.0", d, c.encoder_hidden)
            self._linear(rng, f"enc.{f}.1", c.encoder_hidden, c.encoder_hidden)
            self._linear(rng, f"enc.{f}.2", c.encoder_hidden, d)
        n = len(self._branches())
        self._linear(rng, "fuse.0", n * d, c.fuse_hidden)
        self._linear(rng, "fuse.1", c.fuse_hidden, d)
        self._linear(rng, "out", d, 1)

    def _branches(self) -> list[str]:
        out = ["g"] if self.config.uses_graph else []
        if self.config.uses_patterns:
            out += [f"p{i}" for i in range(self.config.k)]
        return out

    def _apply(self, name, x) -> Tensor:
        return nn.matmul(x, self.params[f"{name}.W"]) + self.params[f"{name}.b"]

    # -- components

    def encode_pattern(self, x, i: int) -> Tensor:
        """(B, 4) encodings of pattern ``i`` -> (B, d) via that pattern's own MLP."""
        x = nn.tensor.as_tensor(x)
        if x.data.ndim == 1:
            x = Tensor(x.data[None, :])
        if x.shape[-1] != 4:
            raise nn.ShapeMismatch(f"pattern encoding must have width 4, got shape {x.shape}")
        return self._apply(f"pattern{i}.1", nn.relu(self._apply(f"pattern{i}.0", x)))

    def tmp_propagate(self, batch: Batch) -> tuple[Tensor, Tensor]:
        """Initial and final node states after edge-by-edge gated updates."""
        h0 = self._apply("fc_in", Tensor(batch.features))
        h = h0
        emb = self.params["edge_embed"]
        for starts, ends, etypes in batch.steps:
            hs = nn.gather(h, starts)
            he = nn.gather(h, ends)
            m = nn.relu(self._apply("tmp.msg", nn.concat([hs, he, nn.gather(emb, etypes)], axis=1)))
            hm = nn.concat([he, m], axis=1)
            z = nn.sigmoid(self._apply("tmp.gate", hm))
            cand = nn.tanh(self._apply("tmp.cand", hm))
            delta = nn.mul(z, cand - he)  # (1 - z) * he + z * cand - he
            h = nn.scatter_add(h, ends, delta)
        return h0, h

    def aggregate(self, h0: Tensor, hT: Tensor, batch: Batch) -> Tensor:
        """Gated readout of node states into one (G, d) graph feature; empty graphs give 0."""
        h = nn.concat([h0, hT], axis=1)
        gate = nn.softmax(self._apply("agg.gate.1", nn.relu(self._apply("agg.gate.0", h))), axis=1)
        out = nn.softmax(self._apply("agg.out.1", nn.relu(self._apply("agg.out.0", h))), axis=1)
        pooled = nn.segment_sum(nn.mul(gate, out), batch.node_graph, batch.size)
        return nn.mul(self._apply("agg.fc", pooled), batch.has_graph)

    def graph_feature(self, batch: Batch) -> Tensor:
        if batch.features.shape[0] == 0:
            return Tensor(np.zeros((batch.size, self.config.d)))
        h0, hT = self.tmp_propagate(batch)
        return self.aggregate(h0, hT, batch)

    def self_attention(self, x: Tensor, branch: str) -> Tensor:
        """Scale ``x`` elementwise by coefficients in (0, 1) computed from ``x``."""
        if x.shape[-1] != self.config.d:
            raise nn.ShapeMismatch(f"feature width {x.shape[-1]} != d={self.config.d}")
        c = nn.sigmoid(self._apply(f"attn.{branch}.1", nn.relu(self._apply(f"attn.{branch}.0", x))))
        return nn.mul(c, x)

    def encode(self, x: Tensor, branch: str) -> Tensor:
        x = nn.relu(self._apply(f"enc.{branch}.0", x))
        x = nn.relu(self._apply(f"enc.{branch}.1", x))
        return self._apply(f"enc.{branch}.2", x)

    def fuse(self, encoded: list) -> tuple[Tensor, Tensor, Tensor]:
        """Fused vector v, scalar logit and softmax weights over <feature, v>."""
        v = self._apply("fuse.1", nn.relu(self._apply("fuse.0", nn.concat(encoded, axis=1))))
        logits = self._apply("out", v)
        return v, logits, attention_weights(encoded, v)

    # -- full pass

    def forward(self, batch: Batch) -> Forward:
        c = self.config
        fw = Forward(logits=None, weights=None)  # type: ignore[arg-type]
        raw = []
        if c.uses_graph:
            fw.g = self.graph_feature(batch)
            raw.append(("g", fw.g))
        if c.uses_patterns:
            fw.p = [self.encode_pattern(Tensor(batch.patterns[:, i, :]), i) for i in range(c.k)]
            raw += [(f"p{i}", p) for i, p in enumerate(fw.p)]
        encoded = []
        for branch, x in raw:
            att = self.self_attention(x, branch)
            enc = self.encode(att, branch)
            encoded.append(enc)
            if branch == "g":
                fw.g_att, fw.g_enc = att, enc
            else:
                fw.p_att.append(att)
                fw.p_enc.append(enc)
        fw.v, fw.logits, fw.weights = self.fuse(encoded)
        return fw

    def loss(self, batch: Batch, labels) -> Tensor:
        return nn.bce_with_logits(self.forward(batch).logits, labels)

    def predict(self, inputs: Sequence[ModelInput]) -> list[ForwardTrace]:
        if not inputs:
            return []
        fw = self.forward(make_batch(inputs))
        names = self.config.feature_names()
        logits = fw.logits.data[:, 0]
        conf = _sigmoid(logits)
        labels = label_of(logits)

        def row(t, i):
            return None if t is None else t.data[i].copy()

        out = []
        for i in range(len(inputs)):
            out.append(ForwardTrace(
                logit=float(logits[i]),
                confidence=float(conf[i]),
                label=int(labels[i]),
                weights={n: float(w) for n, w in zip(names, fw.weights.data[i])},
                v=fw.v.data[i].copy(),
                g=row(fw.g, i),
                p=[row(t, i) for t in fw.p],
                g_att=row(fw.g_att, i),
                p_att=[row(t, i) for t in fw.p_att],
                g_enc=row(fw.g_enc, i),
                p_enc=[row(t, i) for t in fw.p_enc],
            ))
        return out

    # -- persistence

    def header(self) -> dict:
        return {"format": "amedet-model", **asdict(self.config)}

    def save(self, path) -> str:
        return checkpoint.save(path, self.header(), self.params.snapshot())

    @classmethod
    def load(cls, path, vulnerability=None) -> "AMEModel":
        header, tensors, digest = checkpoint.load(path)
        if header.get("format") != "amedet-model":
            raise checkpoint.LoadError("checkpoint does not hold an amedet model")
        fields = {k: header[k] for k in ModelConfig.__dataclass_fields__ if k in header}
        config = ModelConfig(**fields)
        if vulnerability is not None and Vulnerability.parse(vulnerability).value != config.vulnerability:
            raise CheckpointMismatch(
                f"checkpoint is for {config.vulnerability!r}, requested {Vulnerability.parse(vulnerability).value!r}"
            )
        if config.F != FEATURE_DIM:
            raise CheckpointMismatch(f"checkpoint node-feature width {config.F} != {FEATURE_DIM}")
        model = cls(config)
        if set(tensors) != set(model.params.names()):
            raise CheckpointMismatch("checkpoint parameter names do not match the model layout")
        model.params.load(tensors)
        model.digest = digest
        return model
