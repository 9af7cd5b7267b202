import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnbisim import fixtures
from nnbisim.errors import ContractError
from nnbisim.network import Valuation
from nnbisim.partition import (
    LayerPartition,
    NetPartition,
    coarsest_layer,
    concretize,
    identity_partition,
    is_consistent,
    is_eps_consistent,
    is_finer,
)

labels_st = st.lists(st.integers(0, 4), min_size=1, max_size=9)


def layer_from(labels, layer=0):
    return LayerPartition.from_labels(layer, labels)


def net_partition(*label_lists):
    return NetPartition(layer_from(lab, i) for i, lab in enumerate(label_lists))


class TestLayerPartition:
    def test_canonical_order(self):
        p = LayerPartition(1, [[3, 2], [1], [0, 4]])
        assert p.blocks == ((0, 4), (1,), (2, 3))
        assert p.representatives.tolist() == [0, 1, 2]
        assert p.labels.tolist() == [0, 1, 2, 2, 0]
        assert p.order.tolist() == [0, 4, 1, 2, 3]
        assert p.starts.tolist() == [0, 2, 3]

    def test_equal_regardless_of_input_order(self):
        assert LayerPartition(0, [[1, 0], [2]]) == LayerPartition(0, [[2], [0, 1]])

    @pytest.mark.parametrize(
        "blocks",
        [[[0], [0, 1]], [[0], [2]], [[]], [[1]]],
    )
    def test_invalid(self, blocks):
        with pytest.raises(ContractError):
            LayerPartition(0, blocks)

    def test_size_mismatch(self):
        with pytest.raises(ContractError):
            LayerPartition(0, [[0, 1]], size=3)

    def test_block_of(self):
        p = LayerPartition(0, [[0, 2], [1]])
        assert p.block_of(2) == (0, 2)
        assert not p.is_singleton()
        assert LayerPartition(0, [[0], [1]]).is_singleton()

    @given(labels_st)
    def test_from_labels_round_trip(self, labels):
        p = layer_from(labels)
        assert LayerPartition.from_labels(0, p.labels) == p
        assert sorted(p.order.tolist()) == list(range(len(labels)))


class TestNetPartition:
    def test_layer_label_must_match_position(self):
        with pytest.raises(ContractError):
            NetPartition([LayerPartition(1, [[0]]), LayerPartition(1, [[0]])])

    def test_needs_two_layers(self):
        with pytest.raises(ContractError):
            NetPartition([[[0]]])

    def test_accessors(self):
        p = fixtures.exact_example_partition()
        assert p.k == 3
        assert p.layer_sizes == (2, 3, 3, 1)
        assert p.block_counts == (2, 2, 2, 1)
        assert p.as_lists()[1] == [[0, 1], [2]]

    def test_replace(self):
        p = fixtures.exact_example_partition().replace(1, [[0], [1], [2]])
        assert p.block_counts == (2, 3, 2, 1)
        with pytest.raises(ContractError):
            p.replace(1, [[0]])

    def test_identity(self):
        p = identity_partition(fixtures.exact_example_network())
        assert all(layer.is_singleton() for layer in p)

    def test_check_sizes(self):
        with pytest.raises(ContractError):
            fixtures.exact_example_partition().check_sizes((2, 3, 3, 2))


class TestRefinementOrder:
    @given(labels_st)
    def test_reflexive(self, lab):
        p = net_partition(lab, lab)
        assert is_finer(p, p)

    @given(st.data())
    def test_antisymmetric_and_transitive(self, data):
        n = data.draw(st.integers(1, 7))
        draw = lambda: data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
        a, b, c = (net_partition(draw(), [0]) for _ in range(3))
        if is_finer(a, b) and is_finer(b, a):
            assert a == b
        if is_finer(a, b) and is_finer(b, c):
            assert is_finer(a, c)

    @given(labels_st)
    def test_bounds(self, lab):
        n = len(lab)
        p = net_partition(lab, [0])
        finest = NetPartition([LayerPartition(0, [[s] for s in range(n)]), [[0]]])
        coarse = NetPartition([coarsest_layer(0, n), [[0]]])
        assert is_finer(finest, p) and is_finer(p, coarse)

    def test_size_mismatch(self):
        with pytest.raises(ContractError):
            is_finer(net_partition([0, 1], [0]), net_partition([0], [0]))

    @given(st.data())
    def test_matches_definition(self, data):
        n = data.draw(st.integers(1, 7))
        a = data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
        b = data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
        p, q = net_partition(a, [0]), net_partition(b, [0])
        want = all(b[s] == b[t] for s in range(n) for t in range(n) if a[s] == a[t])
        assert is_finer(p, q) == want


class TestConsistency:
    def test_exact(self):
        p = LayerPartition(1, [[0, 2], [1]])
        assert is_consistent(Valuation(1, [1.0, 5.0, 1.0]), p)
        assert not is_consistent(Valuation(1, [1.0, 5.0, 1.5]), p)

    def test_layer_mismatch(self):
        with pytest.raises(ContractError):
            is_consistent(Valuation(0, [1.0, 2.0, 3.0]), LayerPartition(1, [[0, 1, 2]]))
        with pytest.raises(ContractError):
            is_consistent(Valuation(1, [1.0, 2.0]), LayerPartition(1, [[0, 1, 2]]))

    def test_eps_boundary_inclusive(self):
        p = LayerPartition(0, [[0, 1]])
        assert is_eps_consistent(Valuation(0, [0.0, 0.25]), p, 0.25)
        assert not is_eps_consistent(Valuation(0, [0.0, 0.25]), p, 0.125)

    def test_negative_eps(self):
        with pytest.raises(ContractError):
            is_eps_consistent(Valuation(0, [0.0]), LayerPartition(0, [[0]]), -1.0)

    @settings(max_examples=50)
    @given(labels_st, st.floats(0, 1))
    def test_eps_zero_is_exact(self, lab, scale):
        p = layer_from(lab)
        rng = np.random.default_rng(len(lab))
        vals = np.round(rng.uniform(0, 1, size=len(lab)) * scale, 1)
        v = Valuation(0, vals)
        assert is_eps_consistent(v, p, 0.0) == is_consistent(v, p)

    @given(labels_st)
    def test_concretize_is_consistent(self, lab):
        p = layer_from(lab)
        vals = concretize(np.arange(len(p), dtype=float), p)
        assert is_consistent(Valuation(0, vals), p)
        assert vals[p.representatives].tolist() == list(range(len(p)))

    def test_concretize_length(self):
        with pytest.raises(ContractError):
            concretize([1.0], LayerPartition(0, [[0], [1]]))
