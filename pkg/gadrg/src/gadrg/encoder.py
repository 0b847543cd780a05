"""Graph encoder: attention-based message passing over sense-graph nodes.

Node features start as the mean of the frozen LM's input-token embeddings
over each node label, linearly mapped to the encoder width. A stack of
multi-head graph attention layers with LayerNorm refines them (each node
attends over its neighbourhood plus itself); mean pooling and a feed-forward
projector turn the node matrix into one soft-prompt vector sized to the LM's
embedding width. Edge labels are carried but not embedded into messages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

from .lm import TinyCausalLM
from .tokenizer import encode


class EmptyLabel(ValueError):
    pass


@dataclass
class GraphBatch:
    node_labels: list[str]
    node_features: torch.Tensor  # (n_nodes, feature_dim)
    edge_index: list[tuple[int, int]]
    edge_labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.node_labels)
        if self.node_features.shape[0] != n:
            raise ValueError("node_features rows must match node_labels")
        for src, dst in self.edge_index:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"edge ({src}, {dst}) out of range for {n} nodes")


@dataclass(frozen=True)
class EncoderConfig:
    d: int = 64
    layers: int = 2
    heads: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError("d must be divisible by heads")


@dataclass(frozen=True)
class SoftPrompt:
    h_graph: torch.Tensor  # (lm_embedding_width,)

    def __post_init__(self):
        if not torch.isfinite(self.h_graph).all():
            raise ValueError("soft prompt has non-finite entries")


def embed_nodes(lm: TinyCausalLM, labels: list[str]) -> torch.Tensor:
    """Mean frozen-LM token embedding per label, shape (len(labels), width)."""
    if not labels:
        raise EmptyLabel("no node labels")
    rows = []
    for label in labels:
        ids = encode(label)
        if not ids:
            raise EmptyLabel(f"empty node label {label!r}")
        rows.append(lm.embed_tokens(ids).mean(dim=0))
    return torch.stack(rows)


class GraphAttentionLayer(nn.Module):
    """Multi-head attention over the (self-looped) adjacency, then LayerNorm."""

    def __init__(self, d: int, heads: int):
        super().__init__()
        self.heads = heads
        self.d_head = d // heads
        self.w_q = nn.Linear(d, d)
        self.w_k = nn.Linear(d, d)
        self.w_v = nn.Linear(d, d)
        self.w_skip = nn.Linear(d, d)
        self.norm = nn.LayerNorm(d)

    def forward(self, h: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
        n, d = h.shape

        def split(z):
            return z.view(n, self.heads, self.d_head).transpose(0, 1)  # (heads, n, d_head)

        q, k, v = split(self.w_q(h)), split(self.w_k(h)), split(self.w_v(h))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        scores = scores.masked_fill(~adjacency[None, :, :], float("-inf"))
        messages = torch.softmax(scores, dim=-1) @ v  # (heads, n, d_head)
        merged = messages.transpose(0, 1).reshape(n, d)
        return self.norm(self.w_skip(h) + merged)


class GraphEncoder(nn.Module):
    """Input projection, stacked attention layers, mean pool, projector."""

    def __init__(self, cfg: EncoderConfig, lm_width: int):
        super().__init__()
        self.cfg = cfg
        torch.manual_seed(cfg.seed)
        self.input_proj = nn.Linear(lm_width, cfg.d)
        self.layers = nn.ModuleList(
            GraphAttentionLayer(cfg.d, cfg.heads) for _ in range(cfg.layers)
        )
        self.projector = nn.Sequential(
            nn.Linear(cfg.d, cfg.d), nn.ReLU(), nn.Linear(cfg.d, lm_width)
        )

    def projector_parameters(self):
        return list(self.projector.parameters())

    def _adjacency(self, batch: GraphBatch) -> torch.Tensor:
        n = len(batch.node_labels)
        adj = torch.eye(n, dtype=torch.bool)
        for src, dst in batch.edge_index:
            adj[src, dst] = True
            adj[dst, src] = True
        return adj

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        h = self.input_proj(batch.node_features)
        adjacency = self._adjacency(batch)
        for layer in self.layers:
            h = layer(h, adjacency)
        h_mean = h.mean(dim=0)
        return self.projector(h_mean)


def encode_graph(encoder: GraphEncoder, batch: GraphBatch) -> SoftPrompt:
    return SoftPrompt(h_graph=encoder(batch))


def encode_graphs(encoder: GraphEncoder, batches: list[GraphBatch]) -> torch.Tensor:
    """B graphs -> (B, lm_width) stacked soft prompts."""
    return torch.stack([encoder(b) for b in batches])
