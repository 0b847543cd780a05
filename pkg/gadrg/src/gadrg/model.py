"""Soft-prompted generation: one graph vector prepended to the text embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .encoder import EncoderConfig, GraphBatch, GraphEncoder, SoftPrompt, embed_nodes, encode_graph
from .lm import LmConfig, TinyCausalLM
from .tokenizer import BOS_ID, decode, encode

METHOD_TAG = "ga-drg"


@dataclass(frozen=True)
class GeneratedResponse:
    dialogue_id: str
    method: str
    text: str


class GaDrgModel:
    """Frozen LM + trainable graph encoder, projector, and adapters."""

    def __init__(self, lm: TinyCausalLM, encoder: GraphEncoder):
        self.lm = lm
        self.encoder = encoder

    @classmethod
    def build(cls, seed: int = 0, encoder_cfg: EncoderConfig | None = None,
              lm_cfg: LmConfig | None = None) -> "GaDrgModel":
        lm = TinyCausalLM(lm_cfg or LmConfig(seed=seed))
        cfg = encoder_cfg or EncoderConfig(seed=seed)
        return cls(lm=lm, encoder=GraphEncoder(cfg, lm_width=lm.embedding_width))

    def trainable_parameters(self):
        return list(self.encoder.parameters()) + self.lm.adapter_parameters()

    def graph_batch(self, node_labels: list[str], edges: list[tuple[int, int]],
                    edge_labels: list[str] | None = None) -> GraphBatch:
        return GraphBatch(
            node_labels=node_labels,
            node_features=embed_nodes(self.lm, node_labels),
            edge_index=edges,
            edge_labels=edge_labels or [],
        )

    def soft_prompt(self, batch: GraphBatch) -> SoftPrompt:
        return encode_graph(self.encoder, batch)

    def _prefix_embeddings(self, soft_prompt: SoftPrompt | None, dialogue_text: str) -> torch.Tensor:
        token_ids = encode(dialogue_text, add_bos=True)
        text_embeds = self.lm.embed_tokens(token_ids)
        if soft_prompt is None:
            virtual = torch.zeros(1, self.lm.embedding_width)
        else:
            virtual = soft_prompt.h_graph[None, :]
        return torch.cat([virtual, text_embeds], dim=0)

    def generate(
        self,
        soft_prompt: SoftPrompt | None,
        dialogue_text: str,
        dialogue_id: str = "",
        max_new_tokens: int = 64,
    ) -> GeneratedResponse:
        """Greedy decode with the graph vector as one virtual token ahead of
        the dialogue embedding; None means the zero-vector baseline."""
        prefix = self._prefix_embeddings(soft_prompt, dialogue_text)
        ids = self.lm.greedy_decode(prefix, max_new_tokens=max_new_tokens)
        return GeneratedResponse(dialogue_id=dialogue_id, method=METHOD_TAG, text=decode(ids))
