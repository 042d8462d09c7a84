"""Seeded random instances and the theorem-backed inequality batteries.

Every inequality exercised here holds exactly (it is a theorem about finite
probability spaces), so any failure is an implementation bug. The CLI
exposes the batteries as ``check-lemmas``; the test suite reuses the same
instance generators against independent brute-force oracles.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .measures import (
    Block,
    BlockProductMeasure,
    ExplicitMeasure,
    MarkovPathLaw,
    conditional_entropy,
    joint_observable,
    observable_entropy,
    rokhlin_distance,
)
from .sofic import LocalObservable, build_cycle_sofic
from .verify import (
    ENTROPY_TOL,
    check_chain_inequality,
    conditioning_bound,
)

FORMAT_VERSION = 1


def random_distribution(rng: np.random.Generator, size: int) -> np.ndarray:
    raw = rng.random(size) + 1e-3
    return raw / raw.sum()


def random_explicit_measure(
    rng: np.random.Generator,
    n_sites: int,
    alphabet: Sequence,
    max_atoms: int = 16,
) -> ExplicitMeasure:
    """A sparse random measure on A^{n_sites} with a few atoms."""
    space = len(alphabet) ** n_sites
    count = min(int(rng.integers(2, max_atoms + 1)), space)
    configs = set()
    while len(configs) < count:
        configs.add(tuple(alphabet[int(i)] for i in rng.integers(0, len(alphabet), n_sites)))
    configs = sorted(configs)
    probs = random_distribution(rng, len(configs))
    return ExplicitMeasure(alphabet, tuple(range(n_sites)), dict(zip(configs, probs)))


def random_observable(rng: np.random.Generator, n_sites: int, alphabet: Sequence, n_values: int = 2):
    """A random local-collapse observable on full configurations."""
    arity = int(rng.integers(1, min(3, n_sites) + 1))
    coords = sorted(rng.choice(n_sites, size=arity, replace=False).tolist())
    table = {
        pattern: int(rng.integers(0, n_values))
        for pattern in itertools.product(alphabet, repeat=arity)
    }

    def obs(config, _coords=tuple(coords), _table=table):
        return _table[tuple(config[c] for c in _coords)]

    return obs


def random_markov_law(
    rng: np.random.Generator, alphabet: Sequence, length: int
) -> MarkovPathLaw:
    k = len(alphabet)
    initial = random_distribution(rng, k)
    transitions = [
        np.vstack([random_distribution(rng, k) for _ in range(k)])
        for _ in range(length - 1)
    ]
    return MarkovPathLaw(alphabet, initial, transitions)


def random_block_product(
    rng: np.random.Generator,
    n_sites: int,
    alphabet: Sequence,
    markov: bool | None = None,
) -> BlockProductMeasure:
    """Random blocks over a prefix of the sites, deterministic filler after."""
    sites = list(range(n_sites))
    rng.shuffle(sites)
    blocks = []
    cursor = 0
    while cursor < n_sites:
        remaining = n_sites - cursor
        if len(blocks) >= 3 or (blocks and rng.random() < 0.3):
            break
        length = int(rng.integers(1, min(4, remaining) + 1))
        block_sites = tuple(sites[cursor : cursor + length])
        cursor += length
        use_markov = markov if markov is not None else bool(rng.random() < 0.5)
        if use_markov:
            law = random_markov_law(rng, alphabet, length)
        else:
            law = random_explicit_measure(rng, length, alphabet, max_atoms=6)
        blocks.append(Block(block_sites, law))
    filler = {s: alphabet[int(rng.integers(0, len(alphabet)))] for s in sites[cursor:]}
    return BlockProductMeasure(alphabet, tuple(range(n_sites)), blocks, filler)


@dataclass
class SuiteResult:
    name: str
    count: int
    failures: int
    worst_violation: float

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "count": self.count,
            "failures": self.failures,
            "worst_violation": self.worst_violation,
        }


@dataclass
class SuiteReport:
    seed: int
    instances: int
    suites: list[SuiteResult]

    @property
    def verdict(self) -> str:
        return "PASS" if all(s.failures == 0 for s in self.suites) else "FAIL"

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "lemma-suite-report",
            "seed": self.seed,
            "instances": self.instances,
            "suites": [s.to_json_dict() for s in self.suites],
            "verdict": self.verdict,
        }


def chain_inequality_suite(count: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    alphabet = (0, 1)
    failures = 0
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(5, 10))
        sigma = build_cycle_sofic(n)
        pres = sigma.presentation
        window = [pres.word([-1]), pres.word([0]), pres.word([1])]
        window = window[: int(rng.integers(2, 4))]
        mu = random_explicit_measure(rng, n, alphabet, max_atoms=12)
        table = {
            pattern: int(rng.integers(0, 2))
            for pattern in itertools.product(alphabet, repeat=len(window))
        }
        obs = LocalObservable(tuple(window), table)
        size = int(rng.integers(1, n // 2 + 1))
        vertices = sorted(rng.choice(n, size=size, replace=False).tolist())
        report = check_chain_inequality(mu, sigma, obs, vertices)
        if not report.passed:
            failures += 1
        worst = max(worst, -report.slack)
    return SuiteResult("chain-inequality", count, failures, worst)


def conditioning_bound_suite(count: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 6))
        alphabet = (0, 1) if rng.random() < 0.7 else (0, 1, 2)
        mu = random_explicit_measure(rng, n, alphabet, max_atoms=10)
        support = sorted(mu.atoms)
        extras = [
            tuple(alphabet[int(i)] for i in rng.integers(0, len(alphabet), n))
            for _ in range(int(rng.integers(0, 3)))
        ]
        pick = max(1, int(rng.integers(1, len(support) + 1)))
        event = [support[i] for i in rng.choice(len(support), size=pick, replace=False)]
        event = sorted(set(event) | set(extras))
        lhs, rhs = conditioning_bound(mu, event)
        if lhs > rhs + ENTROPY_TOL:
            failures += 1
        worst = max(worst, lhs - rhs)
    return SuiteResult("conditioning-bound", count, failures, worst)


def rokhlin_subadditivity_suite(count: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(3, 7))
        alphabet = (0, 1)
        mu = random_explicit_measure(rng, n, alphabet, max_atoms=12)
        k = int(rng.integers(2, 4))
        alphas = [random_observable(rng, n, alphabet) for _ in range(k)]
        betas = [random_observable(rng, n, alphabet) for _ in range(k)]
        lhs = rokhlin_distance(mu, joint_observable(*alphas), joint_observable(*betas))
        rhs = sum(rokhlin_distance(mu, a, b) for a, b in zip(alphas, betas))
        if lhs > rhs + ENTROPY_TOL:
            failures += 1
        worst = max(worst, lhs - rhs)
    return SuiteResult("rokhlin-subadditivity", count, failures, worst)


def chain_rule_suite(count: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(3, 7))
        alphabet = (0, 1)
        mu = random_explicit_measure(rng, n, alphabet, max_atoms=12)
        alpha = random_observable(rng, n, alphabet)
        beta = random_observable(rng, n, alphabet)
        joint = observable_entropy(mu, joint_observable(alpha, beta))
        split = observable_entropy(mu, beta) + conditional_entropy(mu, alpha, beta)
        gap = abs(joint - split)
        if gap > ENTROPY_TOL:
            failures += 1
        worst = max(worst, gap)
    return SuiteResult("chain-rule", count, failures, worst)


def run_inequality_suites(instances: int = 100, seed: int = 0) -> SuiteReport:
    """Run every battery at the given instance count; all must pass."""
    if instances < 1:
        raise ValidationError("need at least one instance")
    return SuiteReport(
        seed=seed,
        instances=instances,
        suites=[
            chain_inequality_suite(instances, seed),
            conditioning_bound_suite(instances, seed + 1),
            rokhlin_subadditivity_suite(instances, seed + 2),
            chain_rule_suite(instances, seed + 3),
        ],
    )
