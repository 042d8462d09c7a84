import numpy as np
import pytest

from soficmix.construction import extract_cycles, partition_paths
from soficmix.errors import ValidationError
from soficmix.groups import GroupPresentation, coset_decompose
from soficmix.metric import (
    build_metric,
    good_vertices,
    sampled_orders,
    separated_set_greedy,
    verify_covering,
    verify_separated,
)
from soficmix.sofic import SoficMap, build_cycle_sofic, build_torus_sofic

import oracles


def identity_sofic(n):
    pres = GroupPresentation.free_abelian(1)
    return SoficMap(pres, [list(range(n))])


class TestBuildMetric:
    def test_zero_on_diagonal(self):
        met = build_metric(build_cycle_sofic(8), 2)
        assert met.distance(3, 3) == 0.0

    def test_cycle_distance(self):
        met = build_metric(build_cycle_sofic(10), 2)
        assert met.distance(0, 3) == pytest.approx(3.0)
        assert met.distance(0, 7) == pytest.approx(3.0)

    def test_disconnected_identity_model(self):
        met = build_metric(identity_sofic(2), 1.5)
        assert met.n_components == 2
        assert met.max_finite_distance == 0.0
        assert met.sentinel == 1.0
        assert met.distance(0, 1) == 1.0

    def test_sentinel_exceeds_intra_distances(self):
        met = build_metric(build_cycle_sofic(30), 3)
        assert met.max_finite_is_exact
        assert met.sentinel > met.max_finite_distance
        assert met.sentinel == 1.0 + 2.0 * met.max_finite_distance

    def test_edge_weights_are_minimal_witnesses(self):
        sig = build_cycle_sofic(12)
        met = build_metric(sig, 3)
        # v -> v+2 is reachable by h^2 (weight 2); the stored edge must be 2.
        assert met.edges[(0, 2)] == pytest.approx(2.0)
        assert met.edges[(0, 1)] == pytest.approx(1.0)

    def test_radius_beyond_budget_rejected(self):
        sig = build_cycle_sofic(8, budget=2)
        with pytest.raises(ValidationError):
            build_metric(sig, 3)


class TestClosedForms:
    def test_cycles_and_tori_seeded(self):
        rng = np.random.default_rng(20)
        for instance in range(50):
            if instance % 2 == 0:
                n = int(rng.integers(6, 60))
                weight = float(rng.uniform(0.5, 2.0))
                sig = build_cycle_sofic(n, weight=weight)
                edge_radius = weight * float(rng.integers(1, 4))
                met = build_metric(sig, edge_radius)
                dist = lambda v, w: oracles.cycle_distance(n, weight, v, w)
                size = n
            else:
                dims = [int(d) for d in rng.integers(2, 9, size=2)]
                weights = [float(w) for w in rng.uniform(0.5, 2.0, size=2)]
                sig = build_torus_sofic(dims, weights=weights)
                edge_radius = max(weights) * float(rng.integers(1, 3))
                met = build_metric(sig, edge_radius)
                dist = lambda v, w: oracles.torus_distance(dims, weights, v, w)
                size = dims[0] * dims[1]
            pairs = rng.integers(0, size, size=(40, 2))
            for v, w in pairs:
                assert met.distance(int(v), int(w)) == pytest.approx(
                    dist(int(v), int(w)), abs=1e-9
                ), (instance, v, w)

    def test_metric_axioms_sampled_triples(self):
        rng = np.random.default_rng(21)
        configs = [
            build_metric(build_cycle_sofic(40), 3),
            build_metric(build_torus_sofic([6, 7]), 2),
            build_metric(identity_sofic(5), 1),
        ]
        for met in configs:
            n = met.n
            rows = np.vstack([met.distance_row(v) for v in range(n)])
            triples = rng.integers(0, n, size=(10_000, 3))
            u, v, w = triples[:, 0], triples[:, 1], triples[:, 2]
            assert np.all(np.abs(rows[u, v] - rows[v, u]) < 1e-9)
            assert np.all(rows[u, v] <= rows[u, w] + rows[w, v] + 1e-9)
            assert np.all(np.diag(rows) == 0.0)

    def test_orbit_embedding_bound(self):
        # Distances to orbit points never exceed the word metric of the word.
        sig = build_torus_sofic([5, 5])
        met = build_metric(sig, 2)
        pres = sig.presentation
        for word in ([1, 0], [0, 1], [1, 1], [2, 0]):
            g = pres.word(word)
            img = sig.evaluate(g)
            for v in range(sig.n):
                assert met.distance(v, int(img[v])) <= g.metric() + 1e-9

    def test_weighted_3d_torus_closed_form(self):
        dims, weights = [3, 4, 5], [1.0, 0.7, 1.3]
        sig = build_torus_sofic(dims, weights=weights)
        met = build_metric(sig, max(weights))
        rng = np.random.default_rng(14)
        for _ in range(200):
            v, w = int(rng.integers(0, 60)), int(rng.integers(0, 60))
            assert met.distance(v, w) == pytest.approx(
                oracles.torus_distance(dims, weights, v, w), abs=1e-9
            )

    def test_random_free_model_axioms(self):
        from soficmix.groups import GroupPresentation
        from soficmix.sofic import build_random_sofic

        pres = GroupPresentation.free(2, (1.0, 2.0))
        sig = build_random_sofic(pres, 60, seed=8)
        met = build_metric(sig, 3)
        rng = np.random.default_rng(9)
        rows = np.vstack([met.distance_row(v) for v in range(60)])
        triples = rng.integers(0, 60, size=(2000, 3))
        u, v, w = triples[:, 0], triples[:, 1], triples[:, 2]
        assert np.all(np.abs(rows[u, v] - rows[v, u]) < 1e-9)
        assert np.all(rows[u, v] <= rows[u, w] + rows[w, v] + 1e-9)


class TestSeparatedSets:
    def test_c12_r3(self):
        met = build_metric(build_cycle_sofic(12), 4)
        got = separated_set_greedy(met, range(12), 3)
        assert got.vertices == (0, 3, 6, 9)
        assert got.pairwise_ok and got.maximal_ok and got.covering_ok
        rows = {v: met.distance_row(v) for v in range(12)}
        brute = oracles.max_separated_size(lambda a, b: rows[a][b], range(12), 3)
        assert brute == 4 == len(got.vertices)

    def test_small_r_keeps_everything(self):
        met = build_metric(build_cycle_sofic(9), 2)
        got = separated_set_greedy(met, range(9), 1)
        assert got.vertices == tuple(range(9))

    def test_huge_r_one_per_component(self):
        sig = identity_sofic(4)
        met = build_metric(sig, 1)
        got = separated_set_greedy(met, range(4), 10)
        assert got.vertices == (0, 1, 2, 3)  # four singleton components

    def test_rechecks_on_random_instances(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            n = int(rng.integers(10, 50))
            sig = build_cycle_sofic(n)
            met = build_metric(sig, 3)
            r = float(rng.integers(2, 6))
            pool = sorted(rng.choice(n, size=max(4, n // 2), replace=False).tolist())
            order = list(pool)
            rng.shuffle(order)
            got = separated_set_greedy(met, pool, r, order=order, label="shuffled")
            assert got.pairwise_ok and got.maximal_ok and got.covering_ok
            assert verify_separated(met, got.vertices, r)
            assert verify_covering(met, got.vertices, pool, r)

    def test_order_must_match_pool(self):
        met = build_metric(build_cycle_sofic(6), 2)
        with pytest.raises(ValidationError):
            separated_set_greedy(met, [0, 1, 2], 1.5, order=[0, 1])

    def test_sampled_orders_deterministic(self):
        a = sampled_orders(range(10), 5, seed=3)
        b = sampled_orders(range(10), 5, seed=3)
        assert a == b
        assert [label for label, _ in a] == [
            "greedy-ascending",
            "greedy-descending",
            "greedy-shuffle-0",
            "greedy-shuffle-1",
            "greedy-shuffle-2",
        ]


class TestGoodVertices:
    def test_identity_window_counts_covered(self):
        sig = build_cycle_sofic(10)
        pres = sig.presentation
        h = pres.generator(0)
        part = partition_paths(extract_cycles(sig, h), 3)  # 3 paths, 1 leftover
        dec = coset_decompose([pres.identity()], h)
        gv = good_vertices(sig, dec, part)
        assert len(gv) == 9

    def test_hundred_cycle_pairs(self):
        sig = build_cycle_sofic(100)
        pres = sig.presentation
        h = pres.generator(0)
        part = partition_paths(extract_cycles(sig, h), 10)
        dec = coset_decompose([pres.word([0]), pres.word([1])], h)
        gv = good_vertices(sig, dec, part)
        assert len(gv) == 90
        last_positions = {path[-1] for path in part.paths}
        assert set(gv.tolist()) == set(range(100)) - last_positions

    def test_monotone_in_window(self):
        sig = build_torus_sofic([8, 8])
        pres = sig.presentation
        h = pres.word([1, 0])
        part = partition_paths(extract_cycles(sig, h), 4)
        small = coset_decompose([pres.word([0, 0]), pres.word([1, 0])], h)
        large = coset_decompose(
            [pres.word([0, 0]), pres.word([1, 0]), pres.word([0, 1])], h
        )
        gv_small = set(good_vertices(sig, small, part).tolist())
        gv_large = set(good_vertices(sig, large, part).tolist())
        assert gv_large <= gv_small

    def test_homomorphic_power_condition_holds(self):
        # With an override breaking the power identity, vertices drop out.
        pres = GroupPresentation.free_abelian(1)
        n = 8
        base = (np.arange(n) + 1) % n
        broken = (np.arange(n) + 3) % n
        h = pres.generator(0)
        sig = SoficMap(pres, [base], budget=4, overrides={h.pow(2): broken})
        part = partition_paths(extract_cycles(sig, h), 4)
        dec = coset_decompose([pres.word([0]), pres.word([1]), pres.word([2])], h)
        gv = good_vertices(sig, dec, part)
        assert len(gv) == 0


class TestExports:
    def test_component_summary_and_csv(self, tmp_path):
        met = build_metric(build_cycle_sofic(12), 2)
        summary = met.component_summary()
        assert summary["n_components"] == 1
        assert summary["component_sizes"] == [12]
        out = tmp_path / "edges.csv"
        met.export_edges_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "v,w,weight"
        assert len(lines) == 1 + len(met.edges)
