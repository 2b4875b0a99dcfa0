import numpy as np
import pytest
import torch

from fewshot_ed.corpus import EventMention, EventType, Sentence, Token
from fewshot_ed.embedding import (EmbeddingFileError, InstanceEmbedder, PositionTable, Vocabulary, embed_sentence,
                                  load_pretrained_embeddings, make_batch, truncation_window)


@pytest.fixture
def emb_file(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("the 1.0 2.0 3.0\nhired -1.0 0.0 5.0\n")
    return p


def test_load_two_tokens(emb_file):
    vocab = load_pretrained_embeddings(emb_file, 3)
    assert len(vocab) == 4
    assert vocab.lookup("zebra") == vocab.unk_id
    np.testing.assert_array_equal(vocab.vectors[vocab.lookup("hired")], [-1.0, 0.0, 5.0])


def test_unk_is_mean_and_pad_is_zero(emb_file):
    vocab = load_pretrained_embeddings(emb_file, 3)
    np.testing.assert_allclose(vocab.vectors[vocab.unk_id], [0.0, 1.0, 4.0])
    np.testing.assert_array_equal(vocab.vectors[vocab.pad_id], [0.0, 0.0, 0.0])


def test_header_line_skipped(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("2 3\nthe 1 2 3\nhired 4 5 6\n")
    assert len(load_pretrained_embeddings(p, 3)) == 4


def test_dimension_mismatch_reports_line(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("the 1 2 3\nhired 4 5\n")
    with pytest.raises(EmbeddingFileError, match="line 2"):
        load_pretrained_embeddings(p, 3)


def test_lowercase_fallback(emb_file):
    vocab = load_pretrained_embeddings(emb_file, 3)
    assert vocab.lookup("Hired") == vocab.lookup("hired") != vocab.unk_id


def _toy_tables():
    vocab = Vocabulary(["<pad>", "<unk>", "a", "b", "c"],
                       np.array([[0, 0, 0], [9, 9, 9], [1, 2, 3], [4, 5, 6], [7, 8, 9]], dtype=float))
    pos = PositionTable(max_dist=2, dim=2)
    with torch.no_grad():
        pos.table.weight.copy_(torch.tensor([[-2.0, -2.5], [-1.0, -1.5], [0.0, 0.5], [1.0, 1.5], [2.0, 2.5]]))
    return vocab, pos


def test_embed_sentence_hand_concatenation():
    vocab, pos = _toy_tables()
    out = embed_sentence(["a", "b", "c"], 1, vocab, pos)
    expected = torch.tensor([[1, 2, 3, -1.0, -1.5], [4, 5, 6, 0.0, 0.5], [7, 8, 9, 1.0, 1.5]])
    assert out.shape == (3, 5)
    torch.testing.assert_close(out, expected.to(out.dtype))


def test_anchor_row_and_clamping():
    vocab, pos = _toy_tables()
    words = ["a"] * 7
    out = embed_sentence(words, 0, vocab, pos)
    torch.testing.assert_close(out[0, 3:], pos.table.weight[2])
    # distances 3..6 clamp to +2
    for i in range(2, 7):
        torch.testing.assert_close(out[i, 3:], pos.table.weight[4])


def test_anchor_shift_shifts_positions():
    pos = PositionTable(10, 3)
    vocab = Vocabulary(["<pad>", "<unk>"], np.zeros((2, 2)))
    words = ["x"] * 8
    a = embed_sentence(words, 2, vocab, pos)
    b = embed_sentence(words, 5, vocab, pos)
    # position of token i under anchor 5 equals that of token i-3 under anchor 2
    torch.testing.assert_close(b[3:, 2:], a[:5, 2:])


def test_in_vocab_rows_match_file(emb_file):
    vocab = load_pretrained_embeddings(emb_file, 3)
    emb = InstanceEmbedder(vocab, position_dim=2).double()
    torch.testing.assert_close(emb.words.weight[vocab.lookup("the")].detach(),
                               torch.tensor([1.0, 2.0, 3.0], dtype=torch.float64))


def _mention(words, anchor, heads=None):
    heads = heads if heads is not None else [-1] + list(range(len(words) - 1))
    s = Sentence("d", "s", tuple(Token(w, h) for w, h in zip(words, heads)))
    return EventMention(s, anchor, EventType("X", "P"))


def test_batch_padding_zeroes_rows(tiny_vocab):
    batch = make_batch([_mention(["w1", "w2"], 0), _mention(["w3", "w4", "w5", "w6"], 2)], tiny_vocab)
    emb = InstanceEmbedder(tiny_vocab, position_dim=3)
    out = emb(batch)
    assert out.shape == (2, 4, 7)
    assert torch.all(out[0, 2:] == 0)
    assert batch.heads[0].tolist() == [-1, 0, -2, -2]


def test_embeddings_receive_gradients(tiny_vocab):
    batch = make_batch([_mention(["w1", "w2", "w3"], 1)], tiny_vocab)
    emb = InstanceEmbedder(tiny_vocab, position_dim=3)
    emb(batch).sum().backward()
    assert emb.words.weight.grad.abs().sum() > 0
    assert emb.positions.table.weight.grad.abs().sum() > 0


def test_truncation_centered_on_anchor(tiny_vocab):
    words = [f"w{i}" for i in range(30)]
    heads = [-1] + list(range(29))
    m = _mention(words, 25, heads)
    start, end = truncation_window(30, 25, 10)
    assert (start, end) == (20, 30)
    assert truncation_window(30, 3, 10) == (0, 10)
    assert truncation_window(30, 15, 10) == (10, 20)
    batch = make_batch([m], tiny_vocab, max_len=10)
    assert batch.lengths.item() == 10 and batch.anchors.item() == 5
    assert batch.heads[0, 0].item() == -1  # head fell outside the window
    assert batch.token_ids[0, 5].item() == tiny_vocab.lookup("w25")
