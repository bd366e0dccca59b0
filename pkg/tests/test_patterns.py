import numpy as np
import pytest

from hetsleep.errors import CapacityError, ConfigError
from hetsleep.netmodel import LayoutParams, RadioConfig, generate_scenario
from hetsleep.patterns import (ClusterMap, PatternSet, cluster_patterns,
                               enumerate_all, feature_patterns, reuse1)


class TestEnumerateAll:
    def test_three_cells_gives_seven(self):
        assert enumerate_all(3).n_patterns == 7

    def test_single_cell(self):
        assert enumerate_all(1).rows() == [(1,)]

    def test_four_cells_distinct_nonzero(self):
        ps = enumerate_all(4)
        assert ps.n_patterns == 15
        rows = ps.rows()
        assert len(set(rows)) == 15
        assert all(any(r) for r in rows)

    def test_lexicographic_order(self):
        rows = enumerate_all(3).rows()
        assert rows == sorted(rows)

    def test_cap(self):
        with pytest.raises(CapacityError):
            enumerate_all(16)
        assert enumerate_all(15, cap=15).n_patterns == 2 ** 15 - 1


class TestReuse1:
    def test_three_cells(self):
        assert reuse1(3).rows() == [(1, 1, 1)]

    def test_single(self):
        assert reuse1(1).rows() == [(1,)]

    def test_shape(self):
        assert reuse1(9).a.shape == (1, 9)


class TestClusterPatterns:
    def test_fifteen_cells_six_clusters(self):
        assignment = {b: (b % 6) for b in range(15)}
        assert cluster_patterns(ClusterMap(assignment)).n_patterns == 63

    def test_singleton_clusters_match_full_enumeration(self):
        cmap = ClusterMap({b: b for b in range(4)})
        assert set(cluster_patterns(cmap).rows()) == set(enumerate_all(4).rows())

    def test_one_cluster_is_reuse1(self):
        cmap = ClusterMap({b: 0 for b in range(5)})
        assert cluster_patterns(cmap).rows() == reuse1(5).rows()

    def test_requires_full_assignment(self):
        with pytest.raises(ValueError):
            ClusterMap({0: 0, 2: 1})


@pytest.fixture(scope="module")
def standard_topology():
    layout = LayoutParams(n_macro=3, picos_per_macro=4, n_points=1)
    topo, _, _ = generate_scenario(1, layout, RadioConfig())
    return topo


class TestFeaturePatterns:
    def test_nineteen_patterns(self, standard_topology):
        assert feature_patterns(standard_topology).n_patterns == 19

    def test_macro_plus_other_picos_has_nine_ones(self, standard_topology):
        ps = feature_patterns(standard_topology)
        nine = [r for r in ps.rows() if sum(r) == 9]
        assert len(nine) == 3
        for row in nine:
            macro_on = [b for b in range(3) if row[b]]
            assert len(macro_on) == 1
            # the 8 picos on belong to the other two macros
            m = macro_on[0]
            own_picos = range(3 + 4 * m, 3 + 4 * (m + 1))
            assert all(row[b] == 0 for b in own_picos)

    def test_rows_distinct_and_subset_of_enumeration(self, standard_topology):
        ps = feature_patterns(standard_topology)
        rows = ps.rows()
        assert len(set(rows)) == 19
        assert set(rows) <= set(enumerate_all(15).rows())

    def test_rejects_wrong_shape(self):
        layout = LayoutParams(n_macro=2, picos_per_macro=4, n_points=1)
        topo, _, _ = generate_scenario(1, layout, RadioConfig())
        with pytest.raises(ConfigError):
            feature_patterns(topo)


class TestPatternSetInvariants:
    def test_rejects_all_zero_row(self):
        with pytest.raises(ValueError):
            PatternSet(np.array([[0, 0], [1, 0]]))

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            PatternSet(np.array([[1, 0], [1, 0]]))

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            PatternSet(np.array([[2, 0]]))
