import math

import pytest
import torch

from fewshot_ed.corpus import EventMention, EventType, Sentence, Token
from fewshot_ed.embedding import InstanceEmbedder, MentionBatch, make_batch
from fewshot_ed.encoders import (CNNEncoder, EncoderConfig, GCNEncoder, build_encoder,
                                 normalized_adjacency)

from conftest import finite_difference_check

TOY = dict(output_dim=6, kernel_sizes=(2, 3), filters_per_size=3, local_window=1, lstm_hidden=3,
           gcn_layers=2, gcn_hidden=5, dropout=0.0)


def mention(words, anchor, heads):
    s = Sentence("d", "s", tuple(Token(w, h) for w, h in zip(words, heads)))
    return EventMention(s, anchor, EventType("X", "P"))


def toy_mentions():
    return [
        mention(["w1", "w2", "w3", "w4", "w5"], 2, [1, -1, 1, 2, 3]),
        mention(["w6", "w7", "w8"], 0, [-1, 0, 0]),
        mention(["w9", "w10", "w11", "w12", "w13", "w14"], 5, [-1, 0, 1, 2, 3, 4]),
        mention(["w15"], 0, [-1]),
    ]


def setup(kind, tiny_vocab, seed=0, **kw):
    torch.manual_seed(seed)
    cfg = EncoderConfig(kind=kind, **{**TOY, **kw})
    emb = InstanceEmbedder(tiny_vocab, position_dim=2, max_dist=6).double()
    enc = build_encoder(emb.dim, cfg).double().eval()
    return cfg, emb, enc


@pytest.mark.parametrize("kind", ["cnn", "lstm", "gcn"])
def test_gradients_match_finite_differences(kind, tiny_vocab):
    cfg, emb, enc = setup(kind, tiny_vocab, activation="tanh" if kind == "gcn" else "relu")
    batch = make_batch(toy_mentions(), tiny_vocab, max_len=6, min_width=3)
    weights = torch.randn(len(batch), cfg.out_dim, dtype=torch.float64)
    params = [p for p in list(enc.parameters()) + list(emb.parameters())]

    def loss():
        return (enc(emb(batch), batch) * weights).sum()

    assert finite_difference_check(loss, params) <= 1e-4


@pytest.mark.parametrize("kind", ["cnn", "lstm", "gcn"])
def test_padding_invariance(kind, tiny_vocab):
    cfg, emb, enc = setup(kind, tiny_vocab)
    ms = toy_mentions()
    with torch.no_grad():
        tight = make_batch(ms[1:2], tiny_vocab, min_width=1)
        loose = make_batch(ms[1:2], tiny_vocab, min_width=12)
        mixed = make_batch(ms, tiny_vocab)
        a = enc(emb(tight), tight)[0]
        b = enc(emb(loose), loose)[0]
        c = enc(emb(mixed), mixed)[1]
    torch.testing.assert_close(a, b, rtol=0, atol=1e-12)
    torch.testing.assert_close(a, c, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind", ["cnn", "lstm", "gcn"])
def test_deterministic_and_shape(kind, tiny_vocab):
    cfg, emb, enc = setup(kind, tiny_vocab)
    batch = make_batch(toy_mentions(), tiny_vocab)
    with torch.no_grad():
        a, b = enc(emb(batch), batch), enc(emb(batch), batch)
    assert a.shape == (4, cfg.out_dim)
    assert torch.equal(a, b) and torch.isfinite(a).all()


def test_default_dims():
    assert EncoderConfig("cnn").out_dim == 300
    assert EncoderConfig("lstm").out_dim == 300
    assert EncoderConfig("gcn").out_dim == 300


@pytest.mark.parametrize("length", [5, 80])
def test_cnn_output_length(length, tiny_vocab):
    cfg, emb, enc = setup("cnn", tiny_vocab, kernel_sizes=(2, 3, 4, 5))
    words = [f"w{i % 40}" for i in range(length)]
    batch = make_batch([mention(words, length // 2, [-1] + list(range(length - 1)))], tiny_vocab, max_len=80)
    assert enc(emb(batch), batch).shape == (1, cfg.output_dim)


def test_cnn_zero_input_pools_bias():
    cfg = EncoderConfig("cnn", **TOY)
    enc = CNNEncoder(4, cfg).double()
    batch = MentionBatch(torch.zeros(1, 4, dtype=torch.long), torch.tensor([4]), torch.tensor([1]),
                         torch.tensor([[-1, 0, 1, 2]]))
    pooled = enc.pooled(torch.zeros(1, 4, 4, dtype=torch.float64), batch.lengths)
    expected = torch.cat([c.bias for c in enc.convs]).detach()
    torch.testing.assert_close(pooled[0], expected)


def test_cnn_max_pool_hand_trace():
    cfg = EncoderConfig("cnn", **{**TOY, "kernel_sizes": (2,), "filters_per_size": 1})
    enc = CNNEncoder(2, cfg).double()
    with torch.no_grad():
        # conv weight (out=1, in=2, k=2): position 0 weights (1, 0), position 1 weights (0, 2)
        enc.convs[0].weight.copy_(torch.tensor([[[1.0, 0.0], [0.0, 2.0]]]))
        enc.convs[0].bias.zero_()
    x = torch.zeros(1, 4, 2, dtype=torch.float64)
    x[0, 2] = torch.tensor([3.0, 1.0])
    # windows: s=0 -> 0; s=1 -> row2 at offset 1 -> 2*1 = 2; s=2 -> row2 at offset 0 -> 3; max 3
    assert enc.pooled(x, torch.tensor([4])).item() == pytest.approx(3.0)
    # with length 3 the window starting at 2 is masked out, leaving 2
    assert enc.pooled(x, torch.tensor([3])).item() == pytest.approx(2.0)


def test_lstm_single_step(tiny_vocab):
    cfg, emb, enc = setup("lstm", tiny_vocab)
    x = torch.randn(1, 1, emb.dim, dtype=torch.float64)
    batch = MentionBatch(torch.zeros(1, 1, dtype=torch.long), torch.tensor([1]), torch.tensor([0]),
                         torch.tensor([[-1]]))
    v = enc(x, batch)[0]
    h = cfg.lstm_hidden
    ref_f, _ = enc.forward_lstm(x)
    ref_b, _ = enc.backward_lstm(x)
    torch.testing.assert_close(v[:h], ref_f[0, 0])
    torch.testing.assert_close(v[h:], ref_b[0, 0])


def test_lstm_reversal_swaps_directions(tiny_vocab):
    cfg, emb, enc = setup("lstm", tiny_vocab)
    enc.backward_lstm.load_state_dict(enc.forward_lstm.state_dict())
    n, a = 5, 1
    x = torch.randn(1, n, emb.dim, dtype=torch.float64)
    mk = lambda anchor: MentionBatch(torch.zeros(1, n, dtype=torch.long), torch.tensor([n]),
                                     torch.tensor([anchor]), torch.full((1, n), -1))
    v = enc(x, mk(a))[0]
    v_rev = enc(x.flip(1), mk(n - 1 - a))[0]
    h = cfg.lstm_hidden
    torch.testing.assert_close(v[:h], v_rev[h:])
    torch.testing.assert_close(v[h:], v_rev[:h])


def test_lstm_output_length():
    assert EncoderConfig("lstm", lstm_hidden=7).out_dim == 14


def test_gcn_single_token():
    adj = normalized_adjacency(torch.tensor([[-1]]), torch.float64)
    assert adj.tolist() == [[[1.0]]]
    cfg = EncoderConfig("gcn", **TOY)
    enc = GCNEncoder(3, cfg).double()
    x = torch.randn(1, 1, 3, dtype=torch.float64)
    batch = MentionBatch(torch.zeros(1, 1, dtype=torch.long), torch.tensor([1]), torch.tensor([0]),
                         torch.tensor([[-1]]))
    expected = torch.relu(torch.relu(x[0, 0] @ enc.layers[0].weight.T) @ enc.layers[1].weight.T)
    torch.testing.assert_close(enc(x, batch)[0], expected)


def test_gcn_star_adjacency():
    adj = normalized_adjacency(torch.tensor([[-1, 0, 0]]), torch.float64)[0]
    r = 1 / math.sqrt(6)
    expected = torch.tensor([[1 / 3, r, r], [r, 0.5, 0.0], [r, 0.0, 0.5]], dtype=torch.float64)
    torch.testing.assert_close(adj, expected)


def test_gcn_pad_nodes_excluded():
    adj = normalized_adjacency(torch.tensor([[-1, 0, -2, -2]]), torch.float64)[0]
    assert torch.all(adj[2:] == 0) and torch.all(adj[:, 2:] == 0)


def test_gcn_permutation_invariance(tiny_vocab):
    cfg = EncoderConfig("gcn", **TOY)
    torch.manual_seed(1)
    enc = GCNEncoder(4, cfg).double()
    heads = [2, 2, -1, 2, 3]
    x = torch.randn(1, 5, 4, dtype=torch.float64)
    perm = [3, 0, 4, 2, 1]  # new position i holds old token perm[i]
    inv = {old: new for new, old in enumerate(perm)}
    new_heads = [-1 if heads[old] == -1 else inv[heads[old]] for old in perm]
    anchor = 3
    mk = lambda hs, a: MentionBatch(torch.zeros(1, 5, dtype=torch.long), torch.tensor([5]), torch.tensor([a]),
                                    torch.tensor([hs]))
    v = enc(x, mk(heads, anchor))
    v_perm = enc(x[:, perm], mk(new_heads, inv[anchor]))
    torch.testing.assert_close(v, v_perm)
