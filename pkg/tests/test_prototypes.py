import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from fewshot_ed.prototypes import PrototypeError, attention_prototypes, attention_weights, mean_prototypes

from conftest import finite_difference_check
from oracles import brute_attention, brute_mean


def test_mean_hand_example():
    support = torch.tensor([[[1.0, 2.0], [3.0, 4.0]], [[0.0, 0.0], [2.0, -2.0]]])
    assert mean_prototypes(support).tolist() == [[2.0, 3.0], [1.0, -1.0]]


def test_mean_k1_is_identity():
    support = torch.randn(4, 1, 3)
    assert torch.equal(mean_prototypes(support), support[:, 0])


def test_mean_ragged_list():
    clusters = [torch.tensor([[1.0], [3.0]]), torch.tensor([[5.0]])]
    assert mean_prototypes(clusters).tolist() == [[2.0], [5.0]]


def test_empty_class_rejected():
    with pytest.raises(PrototypeError):
        mean_prototypes([torch.ones(2, 3), torch.zeros(0, 3)])
    with pytest.raises(PrototypeError):
        attention_prototypes(torch.zeros(2, 0, 3), torch.ones(3))


def test_attention_hand_example():
    support = torch.tensor([[[1.0, 0.0], [0.0, 1.0]]], dtype=torch.float64)
    q = torch.tensor([2.0, 0.0], dtype=torch.float64)
    s = lambda x: 1 / (1 + math.exp(-x))
    b0, b1 = s(2.0) + s(0.0), s(0.0) + s(0.0)
    a0 = math.exp(b0) / (math.exp(b0) + math.exp(b1))
    proto = attention_prototypes(support, q)
    assert proto.shape == (1, 2)
    assert proto[0].tolist() == pytest.approx([a0, 1 - a0], abs=1e-12)


def test_attention_equal_vectors_returns_vector():
    v = torch.randn(5, dtype=torch.float64)
    support = v.expand(3, 4, 5).clone()
    protos = attention_prototypes(support, torch.randn(2, 5, dtype=torch.float64))
    torch.testing.assert_close(protos, v.expand(2, 3, 5))


def test_attention_zero_query_is_mean():
    support = torch.randn(3, 4, 5, dtype=torch.float64)
    torch.testing.assert_close(attention_prototypes(support, torch.zeros(5, dtype=torch.float64)),
                               mean_prototypes(support))


def test_attention_list_and_tensor_agree():
    support = torch.randn(3, 4, 5, dtype=torch.float64)
    q = torch.randn(2, 5, dtype=torch.float64)
    torch.testing.assert_close(attention_prototypes(list(support), q), attention_prototypes(support, q))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), c=st.integers(1, 4), k=st.integers(1, 5), d=st.integers(1, 6))
def test_prototypes_match_oracles(seed, c, k, d):
    rng = np.random.default_rng(seed)
    support = rng.normal(size=(c, k, d)) * 2
    query = rng.normal(size=d) * 2
    s, q = torch.from_numpy(support), torch.from_numpy(query)
    np.testing.assert_allclose(mean_prototypes(s).numpy(), brute_mean(support), atol=1e-12)
    protos, alphas = brute_attention(support, query)
    np.testing.assert_allclose(attention_prototypes(s, q).numpy(), protos, atol=1e-10)
    alpha = attention_weights(s, q[None])[0]
    np.testing.assert_allclose(alpha.numpy(), alphas, atol=1e-10)
    assert torch.all(alpha >= 0)
    assert torch.allclose(alpha.sum(-1), torch.ones(c, dtype=torch.float64), atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_prototypes_permutation_invariant(seed):
    g = torch.Generator().manual_seed(seed)
    support = torch.randn(3, 5, 4, generator=g, dtype=torch.float64)
    q = torch.randn(4, generator=g, dtype=torch.float64)
    perm = torch.randperm(5, generator=g)
    torch.testing.assert_close(mean_prototypes(support[:, perm]), mean_prototypes(support))
    torch.testing.assert_close(attention_prototypes(support[:, perm], q), attention_prototypes(support, q))


@pytest.mark.parametrize("mode", ["mean", "attention"])
def test_prototype_gradients(mode):
    torch.manual_seed(0)
    support = torch.randn(3, 4, 6, dtype=torch.float64, requires_grad=True)
    queries = torch.randn(2, 6, dtype=torch.float64, requires_grad=True)
    w = torch.randn(2, 3, 6, dtype=torch.float64)

    def loss():
        if mode == "mean":
            return (mean_prototypes(support) * w[0]).sum() + (queries * 0).sum()
        return (attention_prototypes(support, queries) * w).sum()

    assert finite_difference_check(loss, [support, queries]) <= 1e-4
