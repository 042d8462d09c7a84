import itertools
import math

import numpy as np
import pytest

from soficmix.errors import CapExceededError, ValidationError
from soficmix.measures import (
    Block,
    BlockProductMeasure,
    ExplicitMeasure,
    MarkovPathLaw,
    binary_entropy,
    conditional_entropy,
    joint_observable,
    markov_subset_marginal,
    measure_from_json,
    measure_to_json,
    observable_entropy,
    pattern_entropy,
    rokhlin_distance,
    shannon_entropy,
)
from soficmix.suites import (
    random_block_product,
    random_explicit_measure,
    random_observable,
)

import oracles

LOG2 = math.log(2)


def fair_bits(n):
    atoms = {c: 2.0 ** -n for c in itertools.product((0, 1), repeat=n)}
    return ExplicitMeasure((0, 1), tuple(range(n)), atoms)


class TestExplicitBasics:
    def test_entropy_values(self):
        assert fair_bits(2).entropy() == pytest.approx(2 * LOG2, abs=1e-12)
        point = ExplicitMeasure((0, 1), (0,), {(1,): 1.0})
        assert point.entropy() == 0.0
        mu = ExplicitMeasure((0, 1), (0, 1), {(0, 0): 0.5, (0, 1): 0.25, (1, 0): 0.25})
        assert mu.entropy() == pytest.approx(1.0397207708399179, abs=1e-9)

    def test_entropy_bounds_and_relabeling(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            mu = random_explicit_measure(rng, 3, (0, 1), max_atoms=8)
            assert -1e-12 <= mu.entropy() <= 3 * LOG2 + 1e-12
            swapped = ExplicitMeasure(
                ("x", "y"),
                mu.sites,
                {tuple("x" if s == 0 else "y" for s in c): p for c, p in mu.atoms.items()},
            )
            assert swapped.entropy() == pytest.approx(mu.entropy(), abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValidationError):
            ExplicitMeasure((0, 1), (0,), {(0,): 0.5, (1,): 0.6})
        with pytest.raises(ValidationError):
            ExplicitMeasure((0, 1), (0,), {(2,): 1.0})
        with pytest.raises(ValidationError):
            ExplicitMeasure((0, 1), (0, 0), {(0, 0): 1.0})

    def test_binary_entropy(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == pytest.approx(LOG2, abs=1e-15)
        assert binary_entropy(0.25) == pytest.approx(0.5623351446188083, abs=1e-9)
        with pytest.raises(ValidationError):
            binary_entropy(1.5)


class TestMarginal:
    def test_empty_marginal_is_point(self):
        mu = fair_bits(3)
        empty = mu.marginal(())
        assert empty.entropy() == 0.0
        assert len(empty) == 1

    def test_product_factorizes(self):
        mu = fair_bits(3)
        m = mu.marginal((0, 2))
        assert m.atoms == {c: pytest.approx(0.25) for c in itertools.product((0, 1), repeat=2)}

    def test_marginal_matches_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            mu = random_explicit_measure(rng, 4, (0, 1, 2), max_atoms=10)
            sub = sorted(rng.choice(4, size=2, replace=False).tolist())
            ours = mu.marginal(sub).atoms
            oracle = oracles.marginalize(mu.atoms, sub)
            assert set(ours) == set(oracle)
            for k in ours:
                assert ours[k] == pytest.approx(oracle[k], abs=1e-12)

    def test_unknown_site(self):
        with pytest.raises(ValidationError):
            fair_bits(2).marginal((5,))


class TestCov:
    def test_point_mass(self):
        point = ExplicitMeasure((0,), (0,), {(0,): 1.0})
        assert point.cov_epsilon(0.5) == 1

    def test_uniform_four(self):
        mu = ExplicitMeasure((0, 1), (0, 1), {c: 0.25 for c in itertools.product((0, 1), repeat=2)})
        assert mu.cov_epsilon(0.3) == 3

    def test_all_atoms_needed(self):
        mu = ExplicitMeasure((0, 1, 2), (0,), {(0,): 1 / 3, (1,): 1 / 3, (2,): 1 / 3})
        assert mu.cov_epsilon(0.2) == 3

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            mu = random_explicit_measure(rng, 3, (0, 1), max_atoms=8)
            eps = float(rng.uniform(0.05, 0.9))
            assert mu.cov_epsilon(eps) == oracles.exhaustive_cov(mu.atoms, eps)


class TestConditionalAndRokhlin:
    def test_self_conditioning(self):
        rng = np.random.default_rng(3)
        mu = random_explicit_measure(rng, 3, (0, 1))
        alpha = random_observable(rng, 3, (0, 1))
        assert conditional_entropy(mu, alpha, alpha) == pytest.approx(0.0, abs=1e-12)
        assert rokhlin_distance(mu, alpha, alpha) == pytest.approx(0.0, abs=1e-12)

    def test_independent_fair_bits(self):
        mu = fair_bits(2)
        alpha = lambda c: c[0]
        beta = lambda c: c[1]
        assert conditional_entropy(mu, alpha, beta) == pytest.approx(LOG2, abs=1e-12)
        assert rokhlin_distance(mu, alpha, beta) == pytest.approx(2 * LOG2, abs=1e-12)

    def test_constant_conditioner(self):
        mu = fair_bits(2)
        alpha = lambda c: c[0]
        const = lambda c: 0
        assert conditional_entropy(mu, alpha, const) == pytest.approx(
            observable_entropy(mu, alpha), abs=1e-12
        )

    def test_negation_gives_zero_distance(self):
        mu = fair_bits(1)
        alpha = lambda c: c[0]
        beta = lambda c: 1 - c[0]
        assert rokhlin_distance(mu, alpha, beta) == pytest.approx(0.0, abs=1e-12)

    def test_table_missing_support_point(self):
        from soficmix.errors import MissingPatternError

        mu = fair_bits(2)
        partial = {(0, 0): "a"}  # three support configs missing
        with pytest.raises(MissingPatternError):
            conditional_entropy(mu, partial, lambda c: 0)

    def test_chain_rule(self):
        rng = np.random.default_rng(4)
        for _ in range(40):
            mu = random_explicit_measure(rng, 4, (0, 1), max_atoms=10)
            alpha = random_observable(rng, 4, (0, 1))
            beta = random_observable(rng, 4, (0, 1))
            joint = observable_entropy(mu, joint_observable(alpha, beta))
            assert joint == pytest.approx(
                observable_entropy(mu, beta) + conditional_entropy(mu, alpha, beta),
                abs=1e-9,
            )


class TestMarkovLaw:
    def test_entropy_matches_enumeration(self):
        rng = np.random.default_rng(5)
        for length in (1, 2, 4, 6):
            initial = rng.random(2) + 0.1
            initial /= initial.sum()
            mats = []
            for _ in range(length - 1):
                m = rng.random((2, 2)) + 0.1
                m /= m.sum(axis=1, keepdims=True)
                mats.append(m)
            law = MarkovPathLaw((0, 1), initial, mats)
            oracle = oracles.entropy(
                oracles.markov_joint(initial.tolist(), [m.tolist() for m in mats], (0, 1))
            )
            assert law.entropy() == pytest.approx(oracle, abs=1e-9)

    def test_stationary_singleton(self):
        law = MarkovPathLaw.homogeneous((0, 1), [0.5, 0.5], [[0.75, 0.25], [0.25, 0.75]], 6)
        m = markov_subset_marginal(law, [3])
        assert m.atoms[(0,)] == pytest.approx(0.5, abs=1e-12)

    def test_iid_rows(self):
        law = MarkovPathLaw.iid((0, 1), [0.25, 0.75], 4)
        m = markov_subset_marginal(law, [0, 2])
        assert m.atoms[(1, 1)] == pytest.approx(0.75 * 0.75, abs=1e-12)

    def test_bridge_is_matrix_power(self):
        # 2-state symmetric chain, flip .25, positions {0, 2} of a length-3
        # path: the bridge is P^2, checked against full enumeration.
        P = [[0.75, 0.25], [0.25, 0.75]]
        law = MarkovPathLaw.homogeneous((0, 1), [0.5, 0.5], P, 3)
        sub = markov_subset_marginal(law, [0, 2])
        joint = oracles.markov_joint([0.5, 0.5], [P, P], (0, 1))
        oracle = oracles.marginalize(joint, [0, 2])
        for key, p in oracle.items():
            assert sub.atoms[key] == pytest.approx(p, abs=1e-12)
        P2 = np.array(P) @ np.array(P)
        bridged = law.marginal_positions([0, 2])
        assert np.allclose(bridged.transitions[0], P2, atol=1e-15)

    def test_subset_marginal_matches_enumeration_random(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            length = int(rng.integers(2, 7))
            initial = rng.random(2) + 0.1
            initial /= initial.sum()
            mats = [rng.random((2, 2)) + 0.1 for _ in range(length - 1)]
            mats = [m / m.sum(axis=1, keepdims=True) for m in mats]
            law = MarkovPathLaw((0, 1), initial, mats)
            size = int(rng.integers(1, length + 1))
            positions = sorted(rng.choice(length, size=size, replace=False).tolist())
            ours = markov_subset_marginal(law, positions)
            joint = oracles.markov_joint(initial.tolist(), [m.tolist() for m in mats], (0, 1))
            oracle = oracles.marginalize(joint, positions)
            for key in set(ours.atoms) | set(oracle):
                assert ours.atoms.get(key, 0.0) == pytest.approx(
                    oracle.get(key, 0.0), abs=1e-9
                )

    def test_enumeration_cap(self):
        law = MarkovPathLaw.iid((0, 1), [0.5, 0.5], 30)
        with pytest.raises(CapExceededError):
            law.to_explicit(cap=1000)


class TestBlockProduct:
    def _oracle_atoms(self, mu, cap=100000):
        specs = []
        for block in mu.blocks:
            if isinstance(block.law, MarkovPathLaw):
                atoms = oracles.markov_joint(
                    block.law.initial.tolist(),
                    [m.tolist() for m in block.law.transitions],
                    mu.alphabet,
                )
            else:
                atoms = dict(block.law.atoms)
            specs.append((block.sites, atoms))
        return oracles.block_joint(mu.sites, specs, mu.filler)

    def test_entropy_vs_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            mu = random_block_product(rng, int(rng.integers(3, 9)), (0, 1))
            oracle = oracles.entropy(self._oracle_atoms(mu))
            assert mu.entropy() == pytest.approx(oracle, abs=1e-9)

    def test_explicit_conversion_matches_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            mu = random_block_product(rng, int(rng.integers(3, 8)), (0, 1))
            ours = mu.to_explicit().atoms
            oracle = self._oracle_atoms(mu)
            for key in set(ours) | set(oracle):
                assert ours.get(key, 0.0) == pytest.approx(oracle.get(key, 0.0), abs=1e-9)

    def test_marginal_stays_block_product_and_matches(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            n = int(rng.integers(4, 9))
            mu = random_block_product(rng, n, (0, 1))
            size = int(rng.integers(1, n + 1))
            sub = sorted(rng.choice(n, size=size, replace=False).tolist())
            marg = mu.marginal(sub)
            assert isinstance(marg, BlockProductMeasure)
            ours = marg.to_explicit().atoms
            oracle = oracles.marginalize(
                self._oracle_atoms(mu), [list(mu.sites).index(s) for s in sub]
            )
            for key in set(ours) | set(oracle):
                assert ours.get(key, 0.0) == pytest.approx(oracle.get(key, 0.0), abs=1e-9)

    def test_pattern_entropy_matches(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            n = int(rng.integers(4, 9))
            mu = random_block_product(rng, n, (0, 1))
            size = int(rng.integers(1, n + 1))
            sub = sorted(rng.choice(n, size=size, replace=False).tolist())
            oracle = oracles.entropy(
                oracles.marginalize(self._oracle_atoms(mu), sub)
            )
            assert pattern_entropy(mu, sub) == pytest.approx(oracle, abs=1e-9)

    def test_correlated_pair_blocks_cross_marginal(self):
        # Blocks {0,1} and {2,3}, each a perfectly correlated pair; the
        # {1, 2} marginal is a product of two independent fair bits.
        pair = ExplicitMeasure((0, 1), (0, 1), {(0, 0): 0.5, (1, 1): 0.5})
        mu = BlockProductMeasure(
            (0, 1), (0, 1, 2, 3), [Block((0, 1), pair), Block((2, 3), pair)], {}
        )
        cross = mu.marginal([1, 2]).to_explicit()
        assert cross.atoms == {
            c: pytest.approx(0.25) for c in itertools.product((0, 1), repeat=2)
        }
        brute = oracles.marginalize(self._oracle_atoms(mu), [1, 2])
        for key, p in brute.items():
            assert cross.atoms[key] == pytest.approx(p, abs=1e-12)

    def test_filler_carries_no_entropy(self):
        law = MarkovPathLaw.iid((0, 1), [0.5, 0.5], 2)
        mu = BlockProductMeasure((0, 1), (0, 1, 2), [Block((0, 1), law)], {2: 1})
        assert mu.entropy() == pytest.approx(2 * LOG2, abs=1e-12)
        assert shannon_entropy(mu) == mu.entropy()

    def test_validation(self):
        law = MarkovPathLaw.iid((0, 1), [0.5, 0.5], 2)
        with pytest.raises(ValidationError):
            BlockProductMeasure((0, 1), (0, 1, 2), [Block((0, 1), law)], {})
        with pytest.raises(ValidationError):
            BlockProductMeasure(
                (0, 1), (0, 1, 2), [Block((0, 1), law), Block((1, 2), law)], {}
            )


class TestSerialization:
    def test_explicit_roundtrip(self):
        mu = fair_bits(2)
        back = measure_from_json(measure_to_json(mu))
        assert back.atoms == mu.atoms

    def test_block_product_roundtrip(self):
        law = MarkovPathLaw.homogeneous((0, 1), [0.5, 0.5], [[0.75, 0.25], [0.25, 0.75]], 3)
        mu = BlockProductMeasure(
            (0, 1), tuple(range(7)), [Block((0, 1, 2), law), Block((3, 4, 5), law)], {6: 0}
        )
        back = measure_from_json(measure_to_json(mu))
        assert isinstance(back, BlockProductMeasure)
        assert back.entropy() == pytest.approx(mu.entropy(), abs=1e-12)
        assert back.to_explicit().atoms == mu.to_explicit().atoms
