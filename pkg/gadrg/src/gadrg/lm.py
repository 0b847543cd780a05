"""A tiny byte-level causal transformer LM with low-rank adapters.

The base weights are randomly initialized from a seed and then frozen;
training touches only the adapter factors (rank 8, alpha 16, attached to
every block linear and the output head), the graph encoder, and the
projector. Small enough (~0.2M parameters) that overfit-style property
tests run in seconds on CPU.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .tokenizer import BOS_ID, EOS_ID, VOCAB_SIZE

LORA_RANK = 8
LORA_ALPHA = 16


@dataclass(frozen=True)
class LmConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 2
    d_ff: int = 256
    max_seq: int = 512
    vocab_size: int = VOCAB_SIZE
    seed: int = 0


class LoraLinear(nn.Module):
    """Frozen linear layer plus a trainable low-rank delta."""

    def __init__(self, base: nn.Linear, rank: int = LORA_RANK, alpha: int = LORA_ALPHA):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.scaling = alpha / rank
        self.lora_a = nn.Parameter(torch.randn(rank, base.in_features) * 0.01)
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))

    def forward(self, x):
        return self.base(x) + (x @ self.lora_a.T @ self.lora_b.T) * self.scaling


class CausalSelfAttention(nn.Module):
    def __init__(self, cfg: LmConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.d_head = cfg.d_model // cfg.n_heads
        self.q = LoraLinear(nn.Linear(cfg.d_model, cfg.d_model))
        self.k = LoraLinear(nn.Linear(cfg.d_model, cfg.d_model))
        self.v = LoraLinear(nn.Linear(cfg.d_model, cfg.d_model))
        self.out = LoraLinear(nn.Linear(cfg.d_model, cfg.d_model))

    def forward(self, x):
        b, t, d = x.shape
        def split(z):
            return z.view(b, t, self.n_heads, self.d_head).transpose(1, 2)

        q, k, v = split(self.q(x)), split(self.k(x)), split(self.v(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool, device=x.device), diagonal=1)
        scores = scores.masked_fill(mask, float("-inf"))
        attended = torch.softmax(scores, dim=-1) @ v
        return self.out(attended.transpose(1, 2).reshape(b, t, d))


class Block(nn.Module):
    def __init__(self, cfg: LmConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn = CausalSelfAttention(cfg)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.mlp = nn.Sequential(
            LoraLinear(nn.Linear(cfg.d_model, cfg.d_ff)),
            nn.GELU(),
            LoraLinear(nn.Linear(cfg.d_ff, cfg.d_model)),
        )

    def forward(self, x):
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class TinyCausalLM(nn.Module):
    """Byte-level decoder-only transformer; base weights frozen after init."""

    def __init__(self, cfg: LmConfig | None = None):
        super().__init__()
        self.cfg = cfg or LmConfig()
        torch.manual_seed(self.cfg.seed)
        self.tok_emb = nn.Embedding(self.cfg.vocab_size, self.cfg.d_model)
        self.pos_emb = nn.Embedding(self.cfg.max_seq, self.cfg.d_model)
        self.blocks = nn.ModuleList(Block(self.cfg) for _ in range(self.cfg.n_layers))
        self.ln_f = nn.LayerNorm(self.cfg.d_model)
        self.head = LoraLinear(nn.Linear(self.cfg.d_model, self.cfg.vocab_size, bias=False))
        self._freeze_base()

    def _freeze_base(self):
        for name, p in self.named_parameters():
            if "lora_" not in name:
                p.requires_grad_(False)

    @property
    def embedding_width(self) -> int:
        return self.cfg.d_model

    def adapter_parameters(self):
        return [p for n, p in self.named_parameters() if "lora_" in n]

    def zero_adapters(self):
        """Null out every adapter delta (the frozen base is then all that acts)."""
        with torch.no_grad():
            for p in self.adapter_parameters():
                p.zero_()

    def embed_tokens(self, token_ids: list[int]) -> torch.Tensor:
        """Frozen input-token embeddings, shape (len(ids), d_model)."""
        ids = torch.tensor(token_ids, dtype=torch.long)
        with torch.no_grad():
            return self.tok_emb(ids).clone()

    def forward_embeddings(self, embeds: torch.Tensor) -> torch.Tensor:
        """Run the stack over pre-built input embeddings (b, t, d) -> logits."""
        b, t, _ = embeds.shape
        if t > self.cfg.max_seq:
            raise ValueError(f"sequence of {t} exceeds max_seq {self.cfg.max_seq}")
        positions = torch.arange(t, device=embeds.device)
        x = embeds + self.pos_emb(positions)[None, :, :]
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))

    @torch.no_grad()
    def greedy_decode(
        self, prefix_embeds: torch.Tensor, max_new_tokens: int, stop_at_eos: bool = True
    ) -> list[int]:
        """Greedy continuation after the given prefix embeddings (t, d)."""
        generated: list[int] = []
        embeds = prefix_embeds[None, :, :]
        for _ in range(max_new_tokens):
            logits = self.forward_embeddings(embeds)
            next_id = int(torch.argmax(logits[0, -1]).item())
            if stop_at_eos and next_id == EOS_ID:
                break
            generated.append(next_id)
            next_emb = self.tok_emb(torch.tensor([next_id]))
            embeds = torch.cat([embeds, next_emb[None, :, :]], dim=1)
        return generated


def build_lm(seed: int = 0, **overrides) -> TinyCausalLM:
    return TinyCausalLM(LmConfig(seed=seed, **overrides))
