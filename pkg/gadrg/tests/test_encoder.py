import random

import pytest
import torch

from conftest import small_batch
from gadrg.encoder import (
    EmptyLabel,
    EncoderConfig,
    GraphBatch,
    GraphEncoder,
    embed_nodes,
    encode_graph,
    encode_graphs,
)
from gadrg.model import GaDrgModel


def test_embed_nodes_identical_labels_identical_rows(model):
    feats = embed_nodes(model.lm, ["same label", "same label"])
    assert torch.equal(feats[0], feats[1])


def test_embed_nodes_single_byte_label(model):
    feats = embed_nodes(model.lm, ["A"])
    direct = model.lm.embed_tokens([ord("A")])[0]
    assert torch.allclose(feats[0], direct)


def test_embed_nodes_rejects_empty(model):
    with pytest.raises(EmptyLabel):
        embed_nodes(model.lm, [])
    with pytest.raises(EmptyLabel):
        embed_nodes(model.lm, [""])


def test_encoder_config_head_divisibility():
    with pytest.raises(ValueError):
        EncoderConfig(d=10, heads=3)


def test_graph_batch_validates_edges(model):
    feats = embed_nodes(model.lm, ["a", "b"])
    with pytest.raises(ValueError):
        GraphBatch(node_labels=["a", "b"], node_features=feats, edge_index=[(0, 5)])


def test_single_node_graph_shape(model):
    batch = model.graph_batch(["lonely"], [])
    prompt = encode_graph(model.encoder, batch)
    assert prompt.h_graph.shape == (model.lm.embedding_width,)
    assert torch.isfinite(prompt.h_graph).all()


def test_soft_prompt_width_matches_lm(model):
    prompt = model.soft_prompt(small_batch(model))
    assert prompt.h_graph.shape == (model.lm.embedding_width,)


def test_batch_of_graphs_gives_stacked_prompts(model):
    batches = [small_batch(model), model.graph_batch(["x", "y"], [(0, 1)])]
    stacked = encode_graphs(model.encoder, batches)
    assert stacked.shape == (2, model.lm.embedding_width)


def _permuted(batch: GraphBatch, perm: list[int]) -> GraphBatch:
    inverse = [0] * len(perm)
    for new_pos, old in enumerate(perm):
        inverse[old] = new_pos
    return GraphBatch(
        node_labels=[batch.node_labels[old] for old in perm],
        node_features=batch.node_features[perm],
        edge_index=[(inverse[s], inverse[d]) for s, d in batch.edge_index],
        edge_labels=list(batch.edge_labels),
    )


def test_permutation_invariance_50_random_graphs(model):
    rng = random.Random(7)
    failures = 0
    for trial in range(50):
        n = rng.randrange(1, 7)
        labels = [f"node {trial}-{i}" for i in range(n)]
        edges = [
            (i, j)
            for i in range(n)
            for j in range(n)
            if i != j and rng.random() < 0.4
        ]
        batch = model.graph_batch(labels, edges)
        base = model.encoder(batch)
        perm = list(range(n))
        rng.shuffle(perm)
        permuted = model.encoder(_permuted(batch, perm))
        if not torch.allclose(base, permuted, atol=1e-5):
            failures += 1
    assert failures == 0


def test_encoder_deterministic_at_fixed_seed():
    a = GaDrgModel.build(seed=3)
    b = GaDrgModel.build(seed=3)
    batch_a = small_batch(a)
    batch_b = small_batch(b)
    assert torch.equal(a.encoder(batch_a), b.encoder(batch_b))
