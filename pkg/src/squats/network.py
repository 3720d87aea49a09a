"""Distributed encoding over single- and multi-hop OR-forwarding networks.

Every encoder owns a contiguous block of ``T`` bins of one shared codebook
over ``n T`` bins.  Relays forward the OR of their intact incoming words and
the decoder ORs whatever reaches it; since OR is associative the decoder sees
the register a single encoder would have produced for the whole ensemble, as
long as each encoder keeps a path to it.
"""
import graphlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codebook import Codebook, generate
from .codec import Register, decode_coma, decode_ml, encode
from .rates import Overall, Structured

ENCODER, RELAY, DECODER = "encoder", "relay", "decoder"


@dataclass
class NetworkGraph:
    """Directed acyclic graph of encoders, relays and exactly one decoder.

    ``nodes`` is a list of ``{"id": ..., "kind": ...}`` dicts; encoder ``m``
    is the ``m``-th encoder in list order unless the node carries an explicit
    ``"m"``.  ``edges`` are ``(from_id, to_id)`` pairs and ``failures`` holds
    indices into ``edges`` of broken links.
    """

    nodes: list
    edges: list
    failures: set = field(default_factory=set)

    def __post_init__(self):
        self.edges = [tuple(e) for e in self.edges]
        self.failures = set(self.failures)
        ids = [nd["id"] for nd in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        known = set(ids)
        for a, c in self.edges:
            if a not in known or c not in known:
                raise ValueError(f"edge ({a}, {c}) references an unknown node")
        for f in self.failures:
            if not 0 <= f < len(self.edges):
                raise ValueError(f"failure index {f} outside 0..{len(self.edges) - 1}")

    @property
    def kinds(self):
        return {nd["id"]: nd["kind"] for nd in self.nodes}

    @property
    def decoder(self):
        dec = [nd["id"] for nd in self.nodes if nd["kind"] == DECODER]
        if len(dec) != 1:
            raise ValueError(f"network needs exactly one decoder node, found {len(dec)}")
        return dec[0]

    @property
    def encoders(self):
        """Encoder node ids ordered by encoder index ``m``."""
        enc = [nd for nd in self.nodes if nd["kind"] == ENCODER]
        enc = sorted(enumerate(enc), key=lambda t: t[1].get("m", t[0]))
        return [nd["id"] for _, nd in enc]

    def topological_order(self):
        ts = graphlib.TopologicalSorter({nd["id"]: set() for nd in self.nodes})
        for a, c in self.edges:
            ts.add(c, a)
        try:
            return list(ts.static_order())
        except graphlib.CycleError as exc:
            raise ValueError(f"network graph has a cycle: {exc.args[1]}") from None

    def live_edges(self, failures=None):
        failures = self.failures if failures is None else set(failures)
        return [e for idx, e in enumerate(self.edges) if idx not in failures]

    def to_dict(self):
        return {"nodes": list(self.nodes), "edges": [{"from": a, "to": c} for a, c in self.edges],
                "failures": sorted(self.failures)}

    @classmethod
    def from_dict(cls, d):
        edges = [(e["from"], e["to"]) if isinstance(e, dict) else tuple(e) for e in d["edges"]]
        return cls(list(d["nodes"]), edges, set(d.get("failures", ())))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def single_hop(n):
    """Every encoder linked straight to the decoder."""
    nodes = [{"id": f"e{m}", "kind": ENCODER} for m in range(n)] + [{"id": "d", "kind": DECODER}]
    return NetworkGraph(nodes, [(f"e{m}", "d") for m in range(n)])


def random_layered_dag(n, layers=2, width=4, edge_prob=0.5, rng=None):
    """Encoders, ``layers`` relay layers of ``width`` nodes, then the decoder.

    Links go from each layer to the next with probability ``edge_prob``;
    every node gets at least one outgoing and every relay at least one
    incoming link.
    """
    rng = np.random.default_rng(rng)
    tiers = [[f"e{m}" for m in range(n)]]
    tiers += [[f"r{t}_{w}" for w in range(width)] for t in range(layers)]
    tiers.append(["d"])
    nodes = [{"id": x, "kind": ENCODER} for x in tiers[0]]
    nodes += [{"id": x, "kind": RELAY} for tier in tiers[1:-1] for x in tier]
    nodes.append({"id": "d", "kind": DECODER})
    edges = []
    for src, dst in zip(tiers[:-1], tiers[1:]):
        links = rng.random((len(src), len(dst))) < edge_prob
        for a in range(len(src)):
            if not links[a].any():
                links[a, rng.integers(len(dst))] = True
        for c in range(len(dst)):
            if not links[:, c].any():
                links[rng.integers(len(src)), c] = True
        edges += [(src[a], dst[c]) for a, c in zip(*np.nonzero(links))]
    return NetworkGraph(nodes, edges)


def reachability(graph, failures=None):
    """For each encoder (by index ``m``), whether a path of live links reaches the decoder."""
    live = graph.live_edges(failures)
    back = {}
    for a, c in live:
        back.setdefault(c, []).append(a)
    seen, stack = {graph.decoder}, [graph.decoder]
    while stack:
        x = stack.pop()
        for a in back.get(x, ()):
            if a not in seen:
                seen.add(a)
                stack.append(a)
    return [e in seen for e in graph.encoders]


def random_failures(graph, rate, rng=None, keep_connected=True):
    """Break each link with probability ``rate``; with ``keep_connected`` a link is
    only broken if every encoder can still reach the decoder afterwards."""
    rng = np.random.default_rng(rng)
    failures = set()
    for idx in rng.permutation(len(graph.edges)):
        if rng.random() >= rate:
            continue
        trial = failures | {int(idx)}
        if not keep_connected or all(reachability(graph, trial)):
            failures = trial
    return failures


def cut_encoder(graph, m):
    """Failure set breaking every outgoing link of encoder ``m``."""
    node = graph.encoders[m]
    return {idx for idx, (a, _) in enumerate(graph.edges) if a == node}


def simulate(graph, inputs, failures=None):
    """One synchronized round: relays OR their live inputs, the decoder ORs what arrives.

    ``inputs[m]`` is encoder ``m``'s register.  Broken links carry nothing.
    """
    dec = graph.decoder
    order = graph.topological_order()
    encoders = graph.encoders
    if len(inputs) != len(encoders):
        raise ValueError(f"{len(inputs)} inputs for {len(encoders)} encoders")
    b = inputs[0].b
    out = {x: Register(b) for x in order}
    for m, x in enumerate(encoders):
        out[x] = inputs[m].copy()
    incoming = {}
    for a, c in graph.live_edges(failures):
        incoming.setdefault(c, []).append(a)
    for x in order:
        for a in incoming.get(x, ()):
            out[x] |= out[a]
    return out[dec]


@dataclass(frozen=True)
class DistributedCodebook:
    """A codebook over ``n T`` bins; encoder ``m`` owns bins ``m T .. (m+1) T - 1``."""

    base: Codebook
    n: int

    @property
    def T(self):
        return self.base.T // self.n

    def encoder_codebook(self, m):
        T = self.T
        b = self.base
        return Codebook(T, b.l, b.k, b.b, b.seed, b.words[m * T:(m + 1) * T])

    @classmethod
    def generate(cls, n, T, l, k, b, seed=None, reject_duplicates=False):
        return cls(generate(n * T, l, k, b, seed=seed, reject_duplicates=reject_duplicates), n)


def gen_joint_sparse(n, T, model, rng=None):
    """``(n, T)`` array of jointly sparse signals with standard Gaussian nonzeros.

    Overall: ``k`` positions uniform over the whole grid.  Structured: a block
    of ``k_s`` signals by ``k_t`` time instants, so each signal has ``k_t``
    nonzeros and each time column ``k_s``.
    """
    rng = np.random.default_rng(rng)
    out = np.zeros((n, T))
    if isinstance(model, Overall):
        if not 0 <= model.k <= n * T:
            raise ValueError(f"cannot place k={model.k} nonzeros in {n}x{T}")
        pos = rng.choice(n * T, size=model.k, replace=False)
        out.reshape(-1)[pos] = rng.standard_normal(model.k)
    elif isinstance(model, Structured):
        if model.k_s > n or model.k_t > T:
            raise ValueError(f"structured model {model} does not fit {n}x{T}")
        rows = rng.choice(n, size=model.k_s, replace=False)
        cols = rng.choice(T, size=model.k_t, replace=False)
        out[np.ix_(rows, cols)] = rng.standard_normal((model.k_s, model.k_t))
    else:
        raise TypeError(f"unknown sparsity model {model!r}")
    return out


def encode_distributed(signals, dcb, quantizer):
    """Each encoder codes its own signal with its own bins; no cross-signal information."""
    signals = np.asarray(signals, dtype=float)
    if signals.shape != (dcb.n, dcb.T):
        raise ValueError(f"signals shape {signals.shape} != ({dcb.n}, {dcb.T})")
    return [encode(signals[m], dcb.encoder_codebook(m), quantizer) for m in range(dcb.n)]


def decode_distributed(y, dcb, quantizer, decoder="ml", k=None, rng=None, **kw):
    """Decode the ensemble register; the result's ``signal`` has shape ``(n, T)``."""
    if decoder == "ml":
        res = decode_ml(y, dcb.base, quantizer, k=k, **kw)
    elif decoder == "coma":
        res = decode_coma(y, dcb.base, quantizer, rng)
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    res.signal = res.signal.reshape(dcb.n, dcb.T)
    return res
