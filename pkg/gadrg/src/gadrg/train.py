"""Cross-entropy training of the graph encoder, projector, and adapters.

The base LM stays frozen; one ``train_step`` computes token-level
cross-entropy of the target utterance conditioned on
[graph vector, dialogue tokens], backpropagates into the trainable
parameters only, and applies one optimizer step. A non-finite loss aborts
the step and rolls the parameters back.
"""

from __future__ import annotations

import copy
import io
from dataclasses import asdict, dataclass, field

import torch
from torch import nn

from .encoder import EncoderConfig, GraphBatch
from .lm import LmConfig
from .model import GaDrgModel
from .tokenizer import EOS_ID, encode


class NonFiniteLoss(RuntimeError):
    pass


@dataclass
class TrainState:
    model: GaDrgModel
    optimizer: torch.optim.Optimizer
    step: int = 0
    loss_history: list[float] = field(default_factory=list)
    seed: int = 0


def init_train_state(seed: int = 0, lr: float = 2e-2,
                     encoder_cfg: EncoderConfig | None = None,
                     lm_cfg: LmConfig | None = None) -> TrainState:
    model = GaDrgModel.build(seed=seed, encoder_cfg=encoder_cfg, lm_cfg=lm_cfg)
    optimizer = torch.optim.Adam(model.trainable_parameters(), lr=lr)
    return TrainState(model=model, optimizer=optimizer, seed=seed)


def sequence_loss(model: GaDrgModel, batch: GraphBatch, dialogue_text: str,
                  target_tokens: list[int]) -> torch.Tensor:
    """Cross-entropy of the target tokens under the soft-prompted model."""
    if not target_tokens:
        raise ValueError("target_tokens must be non-empty")
    h_graph = model.encoder(batch)
    context_ids = encode(dialogue_text, add_bos=True)
    context_embeds = model.lm.embed_tokens(context_ids)
    target = torch.tensor(target_tokens, dtype=torch.long)
    target_embeds = model.lm.tok_emb(target)
    embeds = torch.cat([h_graph[None, :], context_embeds, target_embeds], dim=0)
    logits = model.lm.forward_embeddings(embeds[None, :, :])[0]
    # positions predicting each target token: the one just before it
    first = 1 + len(context_ids) - 1
    predicting = logits[first : first + len(target_tokens)]
    return nn.functional.cross_entropy(predicting, target)


def train_step(state: TrainState, batch: GraphBatch, dialogue_text: str,
               target_tokens: list[int]) -> tuple[TrainState, float]:
    return joint_train_step(state, [(batch, dialogue_text, target_tokens)])


def joint_train_step(state: TrainState, items) -> tuple[TrainState, float]:
    """One optimizer step on the summed loss of several (batch, dialogue,
    target) items. Summing matters when items share dialogue text: only the
    graph vector can then tell the targets apart."""
    snapshot = [p.detach().clone() for p in state.model.trainable_parameters()]
    state.optimizer.zero_grad()
    loss = sum(
        sequence_loss(state.model, batch, dialogue_text, target_tokens)
        for batch, dialogue_text, target_tokens in items
    )
    if not torch.isfinite(loss):
        with torch.no_grad():
            for p, saved in zip(state.model.trainable_parameters(), snapshot):
                p.copy_(saved)
        raise NonFiniteLoss(f"loss is {loss.item()!r} at step {state.step}")
    loss.backward()
    state.optimizer.step()
    state.step += 1
    state.loss_history.append(float(loss.item()))
    return state, float(loss.item())


def target_ids(text: str) -> list[int]:
    return encode(text, add_eos=True)


def save_checkpoint(state: TrainState, path) -> None:
    """Single-file checkpoint embedding configs, seed, and progress."""
    torch.save(
        {
            "seed": state.seed,
            "step": state.step,
            "loss_history": state.loss_history,
            "lm_config": asdict(state.model.lm.cfg),
            "encoder_config": asdict(state.model.encoder.cfg),
            "lm_state": state.model.lm.state_dict(),
            "encoder_state": state.model.encoder.state_dict(),
            "optimizer_state": state.optimizer.state_dict(),
        },
        path,
    )


def load_checkpoint(path, lr: float = 2e-2) -> TrainState:
    blob = torch.load(path, weights_only=False)
    state = init_train_state(
        seed=blob["seed"],
        lr=lr,
        encoder_cfg=EncoderConfig(**blob["encoder_config"]),
        lm_cfg=LmConfig(**blob["lm_config"]),
    )
    state.model.lm.load_state_dict(blob["lm_state"])
    state.model.encoder.load_state_dict(blob["encoder_state"])
    state.optimizer.load_state_dict(blob["optimizer_state"])
    state.step = blob["step"]
    state.loss_history = list(blob["loss_history"])
    return state
