"""Probability measures on finite configuration spaces.

Two storage forms. ``ExplicitMeasure`` is a sparse atom list over labelled
sites, suitable for brute-force scale. ``BlockProductMeasure`` is a product
of independent blocks, each carrying either an explicit law or a (possibly
inhomogeneous) Markov path law, with a deterministic filler configuration on
the remaining sites; marginals, entropies and pattern entropies factor
across blocks and never enumerate more than they must.

Entropies are in nats throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapExceededError, MissingPatternError, ValidationError

SUM_TOL = 1e-12
DROP_TOL = 1e-15
DEFAULT_ENUM_CAP = 2_000_000


def entropy_of(probs: Iterable[float]) -> float:
    """Shannon entropy (nats) of a probability vector; 0 log 0 = 0."""
    total = 0.0
    for p in probs:
        if p > 0.0:
            total -= p * math.log(p)
    return total


def binary_entropy(p: float) -> float:
    """H(p) = -p log p - (1-p) log(1-p), with the 0 log 0 = 0 convention."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"binary entropy argument {p} outside [0, 1]")
    return entropy_of((p, 1.0 - p))


def _as_observable(obs):
    if callable(obs):
        return obs
    if isinstance(obs, Mapping):
        def lookup(config, _table=obs):
            try:
                return _table[config]
            except KeyError:
                raise MissingPatternError(f"observable table missing {config!r}")
        return lookup
    raise ValidationError("observable must be callable or a mapping")


def joint_observable(*parts):
    fns = [_as_observable(p) for p in parts]
    return lambda config: tuple(fn(config) for fn in fns)


class ExplicitMeasure:
    """A sparse atom list over an ordered tuple of sites.

    Atom keys are configuration tuples aligned with ``sites``. Construction
    checks positivity and total mass within 1e-12, then drops atoms below
    1e-15 after renormalization.
    """

    def __init__(
        self,
        alphabet: Sequence,
        sites: Sequence,
        atoms: Mapping[tuple, float],
    ) -> None:
        self.alphabet = tuple(alphabet)
        self.sites = tuple(sites)
        if len(set(self.sites)) != len(self.sites):
            raise ValidationError("measure sites must be distinct")
        symbols = set(self.alphabet)
        total = 0.0
        clean: dict[tuple, float] = {}
        for config, p in atoms.items():
            config = tuple(config)
            if len(config) != len(self.sites):
                raise ValidationError(
                    f"configuration {config!r} does not match {len(self.sites)} sites"
                )
            if any(sym not in symbols for sym in config):
                raise ValidationError(f"configuration {config!r} uses unknown symbols")
            p = float(p)
            if p < 0.0:
                raise ValidationError("atom probabilities must be nonnegative")
            if p == 0.0:
                continue
            if config in clean:
                raise ValidationError(f"duplicate configuration {config!r}")
            clean[config] = p
            total += p
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(f"atom probabilities sum to {total!r}, not 1")
        if total != 1.0:
            clean = {c: p / total for c, p in clean.items()}
        self.atoms = {c: p for c, p in clean.items() if p >= DROP_TOL}
        rest = sum(self.atoms.values())
        if rest != 1.0:
            self.atoms = {c: p / rest for c, p in self.atoms.items()}

    def __len__(self) -> int:
        return len(self.atoms)

    def entropy(self) -> float:
        return entropy_of(self.atoms.values())

    def marginal(self, sub_sites: Sequence) -> "ExplicitMeasure":
        """Exact marginal; coordinate order follows ``sub_sites``."""
        positions = []
        index = {s: i for i, s in enumerate(self.sites)}
        for s in sub_sites:
            if s not in index:
                raise ValidationError(f"site {s!r} not in the measure's index set")
            positions.append(index[s])
        out: dict[tuple, float] = {}
        for config, p in self.atoms.items():
            key = tuple(config[i] for i in positions)
            out[key] = out.get(key, 0.0) + p
        return ExplicitMeasure(self.alphabet, tuple(sub_sites), out)

    def tuple_distribution(self, site_seq: Sequence) -> dict[tuple, float]:
        """Distribution of the tuple read along ``site_seq`` (repeats allowed)."""
        unique = list(dict.fromkeys(site_seq))
        base = self.marginal(unique)
        pos = {s: i for i, s in enumerate(unique)}
        out: dict[tuple, float] = {}
        for config, p in base.atoms.items():
            key = tuple(config[pos[s]] for s in site_seq)
            out[key] = out.get(key, 0.0) + p
        return out

    def cov_epsilon(self, epsilon: float) -> int:
        """Least atom count whose mass strictly exceeds 1 - epsilon."""
        if not 0.0 < epsilon < 1.0:
            raise ValidationError("epsilon must lie in (0, 1)")
        mass = 0.0
        for count, p in enumerate(sorted(self.atoms.values(), reverse=True), start=1):
            mass += p
            if mass > 1.0 - epsilon:
                return count
        return len(self.atoms)

    def top_event(self, epsilon: float) -> tuple[list[tuple], float]:
        """The configurations realizing cov_epsilon, with their total mass."""
        count = self.cov_epsilon(epsilon)
        ranked = sorted(self.atoms.items(), key=lambda kv: (-kv[1], kv[0]))[:count]
        return [c for c, _ in ranked], sum(p for _, p in ranked)

    def pushforward(self, obs) -> dict:
        fn = _as_observable(obs)
        out: dict = {}
        for config, p in self.atoms.items():
            val = fn(config)
            out[val] = out.get(val, 0.0) + p
        return out

    def sample(self, rng: np.random.Generator) -> tuple:
        configs = sorted(self.atoms)
        probs = np.array([self.atoms[c] for c in configs])
        probs = probs / probs.sum()
        return configs[int(rng.choice(len(configs), p=probs))]

    def relabel_sites(self, new_sites: Sequence) -> "ExplicitMeasure":
        if len(new_sites) != len(self.sites):
            raise ValidationError("site relabeling must preserve arity")
        return ExplicitMeasure(self.alphabet, tuple(new_sites), self.atoms)

    def to_json(self) -> dict:
        return {
            "type": "explicit",
            "alphabet": list(self.alphabet),
            "sites": list(self.sites),
            "atoms": [[list(c), p] for c, p in sorted(self.atoms.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExplicitMeasure":
        return cls(
            data["alphabet"],
            data["sites"],
            {tuple(c): p for c, p in data["atoms"]},
        )


def observable_entropy(mu: ExplicitMeasure, obs) -> float:
    return entropy_of(mu.pushforward(obs).values())


def conditional_entropy(mu: ExplicitMeasure, alpha, beta) -> float:
    """H(alpha | beta) = H(alpha, beta) - H(beta); nonnegative."""
    joint = observable_entropy(mu, joint_observable(alpha, beta))
    return max(joint - observable_entropy(mu, beta), 0.0)


def rokhlin_distance(mu: ExplicitMeasure, alpha, beta) -> float:
    """H(alpha|beta) + H(beta|alpha): a pseudometric on observables."""
    return conditional_entropy(mu, alpha, beta) + conditional_entropy(mu, beta, alpha)


class MarkovPathLaw:
    """Law of a finite Markov path, allowing per-step transition matrices.

    ``initial`` is the distribution at position 0 and ``transitions[t]``
    carries position t to t+1. Subset marginals stay Markov via bridging
    matrix products, so their entropies come from the chain rule without
    enumeration.
    """

    def __init__(
        self,
        alphabet: Sequence,
        initial: Sequence[float],
        transitions: Sequence[np.ndarray],
    ) -> None:
        self.alphabet = tuple(alphabet)
        k = len(self.alphabet)
        self.initial = np.asarray(initial, dtype=float)
        if self.initial.shape != (k,) or np.any(self.initial < 0):
            raise ValidationError("initial distribution malformed")
        if abs(self.initial.sum() - 1.0) > SUM_TOL:
            raise ValidationError("initial distribution does not sum to 1")
        mats = []
        for t, m in enumerate(transitions):
            m = np.asarray(m, dtype=float)
            if m.shape != (k, k) or np.any(m < 0):
                raise ValidationError(f"transition {t} malformed")
            if np.max(np.abs(m.sum(axis=1) - 1.0)) > SUM_TOL:
                raise ValidationError(f"transition {t} rows do not sum to 1")
            mats.append(m)
        self.transitions = tuple(mats)
        self.length = len(mats) + 1

    @classmethod
    def homogeneous(
        cls,
        alphabet: Sequence,
        initial: Sequence[float],
        transition: Sequence[Sequence[float]],
        length: int,
    ) -> "MarkovPathLaw":
        if length < 1:
            raise ValidationError("path length must be at least 1")
        matrix = np.asarray(transition, dtype=float)
        return cls(alphabet, initial, (matrix,) * (length - 1))

    @classmethod
    def iid(cls, alphabet: Sequence, probs: Sequence[float], length: int) -> "MarkovPathLaw":
        row = np.asarray(probs, dtype=float)
        matrix = np.tile(row, (len(row), 1))
        return cls.homogeneous(alphabet, row, matrix, length)

    def entropy(self) -> float:
        """Chain rule: H(initial) plus stepwise conditional entropies."""
        dist = self.initial
        total = entropy_of(dist)
        for m in self.transitions:
            total += float(sum(p * entropy_of(row) for p, row in zip(dist, m) if p > 0))
            dist = dist @ m
        return total

    def position_distribution(self, t: int) -> np.ndarray:
        dist = self.initial
        for step in range(t):
            dist = dist @ self.transitions[step]
        return dist

    def marginal_positions(self, positions: Sequence[int]) -> "MarkovPathLaw":
        """The (again Markov) law of the path restricted to ``positions``."""
        pos = sorted(set(int(p) for p in positions))
        if not pos:
            raise ValidationError("need at least one position")
        if pos[0] < 0 or pos[-1] >= self.length:
            raise ValidationError("positions outside the path")
        dist = self.position_distribution(pos[0])
        bridges = []
        for a, b in zip(pos, pos[1:]):
            bridge = self.transitions[a]
            for t in range(a + 1, b):
                bridge = bridge @ self.transitions[t]
            bridges.append(bridge)
        return MarkovPathLaw(self.alphabet, dist, bridges)

    def to_explicit(self, cap: int = DEFAULT_ENUM_CAP, sites: Sequence | None = None) -> ExplicitMeasure:
        k = len(self.alphabet)
        if k ** self.length > cap:
            raise CapExceededError(
                f"enumerating {k}^{self.length} path configurations exceeds cap {cap}"
            )
        if sites is None:
            sites = tuple(range(self.length))
        atoms: dict[tuple, float] = {}
        for states in itertools.product(range(k), repeat=self.length):
            p = self.initial[states[0]]
            for t, (a, b) in enumerate(zip(states, states[1:])):
                if p == 0.0:
                    break
                p = p * self.transitions[t][a, b]
            if p > 0.0:
                atoms[tuple(self.alphabet[s] for s in states)] = float(p)
        return ExplicitMeasure(self.alphabet, sites, atoms)

    def sample(self, rng: np.random.Generator) -> tuple:
        k = len(self.alphabet)
        state = int(rng.choice(k, p=self.initial / self.initial.sum()))
        path = [state]
        for m in self.transitions:
            row = m[state]
            state = int(rng.choice(k, p=row / row.sum()))
            path.append(state)
        return tuple(self.alphabet[s] for s in path)


def markov_subset_marginal(
    law: MarkovPathLaw, positions: Sequence[int], cap: int = DEFAULT_ENUM_CAP
) -> ExplicitMeasure:
    """Exact marginal of a Markov path law on a position subset.

    Positions are 0-based; the result's sites are the sorted positions.
    """
    pos = sorted(set(int(p) for p in positions))
    return law.marginal_positions(pos).to_explicit(cap, sites=tuple(pos))


BlockLaw = ExplicitMeasure | MarkovPathLaw


def _law_length(law: BlockLaw) -> int:
    return law.length if isinstance(law, MarkovPathLaw) else len(law.sites)


@dataclass(frozen=True)
class Block:
    """An ordered site sequence carrying a law over positions 0..len-1."""

    sites: tuple
    law: BlockLaw

    def __post_init__(self) -> None:
        if _law_length(self.law) != len(self.sites):
            raise ValidationError("block law arity does not match its sites")


class BlockProductMeasure:
    """Independent blocks plus a deterministic filler configuration.

    Blocks are pairwise disjoint ordered site sequences; sites not covered
    by any block must appear in ``filler`` with a fixed symbol. The filler
    carries zero entropy and factors out of every marginal.
    """

    def __init__(
        self,
        alphabet: Sequence,
        sites: Sequence,
        blocks: Sequence[Block],
        filler: Mapping,
    ) -> None:
        self.alphabet = tuple(alphabet)
        self.sites = tuple(sites)
        self.blocks = tuple(blocks)
        self.filler = dict(filler)
        symbols = set(self.alphabet)
        locate: dict = {}
        for b, block in enumerate(self.blocks):
            if tuple(block.law.alphabet) != self.alphabet:
                raise ValidationError("block law alphabet mismatch")
            for j, site in enumerate(block.sites):
                if site in locate:
                    raise ValidationError(f"site {site!r} lies in two blocks")
                locate[site] = (b, j)
        for site, symbol in self.filler.items():
            if site in locate:
                raise ValidationError(f"filler covers block site {site!r}")
            if symbol not in symbols:
                raise ValidationError(f"filler symbol {symbol!r} not in the alphabet")
            locate[site] = None
        if set(locate) != set(self.sites) or len(locate) != len(self.sites):
            raise ValidationError("blocks plus filler must cover the sites exactly")
        self._locate = locate

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def block_index_of(self, site) -> int | None:
        """Index of the block holding ``site``; None for filler sites."""
        loc = self._locate[site]
        return None if loc is None else loc[0]

    def entropy(self) -> float:
        return float(sum(block.law.entropy() for block in self.blocks))

    def _block_positions(self, sub_sites: Sequence) -> tuple[dict[int, list[int]], list]:
        by_block: dict[int, list[int]] = {}
        fill_sites = []
        for s in sub_sites:
            loc = self._locate.get(s)
            if loc is None:
                if s not in self._locate:
                    raise ValidationError(f"site {s!r} not in the measure's index set")
                fill_sites.append(s)
            else:
                by_block.setdefault(loc[0], []).append(loc[1])
        return by_block, fill_sites

    def marginal(self, sub_sites: Sequence) -> "BlockProductMeasure":
        """Marginal in block-product form: per-block sub-laws plus filler."""
        sub_sites = tuple(sub_sites)
        by_block, fill_sites = self._block_positions(sub_sites)
        new_blocks = []
        for b in sorted(by_block):
            block = self.blocks[b]
            positions = sorted(by_block[b])
            kept = tuple(block.sites[j] for j in positions)
            if isinstance(block.law, MarkovPathLaw):
                if positions == list(range(len(block.sites))):
                    law: BlockLaw = block.law
                else:
                    law = block.law.marginal_positions(positions)
            else:
                law = block.law.marginal(positions).relabel_sites(range(len(positions)))
            new_blocks.append(Block(kept, law))
        filler = {s: self.filler[s] for s in fill_sites}
        return BlockProductMeasure(self.alphabet, sub_sites, new_blocks, filler)

    def pattern_entropy(self, sub_sites: Sequence) -> float:
        """Entropy of the marginal on ``sub_sites``, via block factorization."""
        by_block, _ = self._block_positions(sub_sites)
        total = 0.0
        for b, positions in by_block.items():
            law = self.blocks[b].law
            positions = sorted(positions)
            if isinstance(law, MarkovPathLaw):
                total += law.marginal_positions(positions).entropy()
            else:
                total += law.marginal(positions).entropy()
        return total

    def _block_explicit(self, block: Block, cap: int) -> ExplicitMeasure:
        if isinstance(block.law, MarkovPathLaw):
            return block.law.to_explicit(cap, sites=block.sites)
        return block.law.relabel_sites(block.sites)

    def to_explicit(self, cap: int = DEFAULT_ENUM_CAP) -> ExplicitMeasure:
        """Full joint as an explicit measure; guarded by the support size."""
        supports = []
        total = 1
        for block in self.blocks:
            exp = self._block_explicit(block, cap)
            supports.append(exp)
            total *= max(len(exp), 1)
            if total > cap:
                raise CapExceededError(f"joint support exceeds enumeration cap {cap}")
        site_index = {s: i for i, s in enumerate(self.sites)}
        template: list = [None] * len(self.sites)
        for s, sym in self.filler.items():
            template[site_index[s]] = sym
        atoms: dict[tuple, float] = {}
        for combo in itertools.product(*(sorted(m.atoms.items()) for m in supports)):
            config = list(template)
            p = 1.0
            for (block_config, bp), exp in zip(combo, supports):
                p *= bp
                for site, sym in zip(exp.sites, block_config):
                    config[site_index[site]] = sym
            atoms[tuple(config)] = p
        if not atoms:
            atoms[tuple(template)] = 1.0
        return ExplicitMeasure(self.alphabet, self.sites, atoms)

    def tuple_distribution(self, site_seq: Sequence, cap: int = DEFAULT_ENUM_CAP) -> dict[tuple, float]:
        """Distribution of the tuple read along ``site_seq`` (repeats allowed)."""
        unique = list(dict.fromkeys(site_seq))
        joint = self.marginal(unique).to_explicit(cap)
        return joint.tuple_distribution(site_seq)

    def cov_epsilon(self, epsilon: float, cap: int = DEFAULT_ENUM_CAP) -> int:
        return self.to_explicit(cap).cov_epsilon(epsilon)

    def sample(self, rng: np.random.Generator) -> tuple:
        site_index = {s: i for i, s in enumerate(self.sites)}
        config: list = [None] * len(self.sites)
        for s, sym in self.filler.items():
            config[site_index[s]] = sym
        for block in self.blocks:
            drawn = block.law.sample(rng)
            for site, sym in zip(block.sites, drawn):
                config[site_index[site]] = sym
        return tuple(config)

    def to_json(self) -> dict:
        laws = {id(b.law): b.law for b in self.blocks}
        if len(laws) > 1:
            raise ValidationError(
                "only block-product measures with one shared law are serializable"
            )
        law_json: dict
        if not self.blocks:
            law_json = {}
        else:
            law = self.blocks[0].law
            if isinstance(law, MarkovPathLaw):
                first = law.transitions[0] if law.transitions else None
                if any(m is not first for m in law.transitions):
                    raise ValidationError("only homogeneous Markov laws are serializable")
                law_json = {
                    "type": "markov",
                    "initial": law.initial.tolist(),
                    "transition": first.tolist() if first is not None else [],
                    "length": law.length,
                }
            else:
                law_json = law.to_json()
        filler_sites = sorted(self.filler)
        return {
            "type": "block-product",
            "alphabet": list(self.alphabet),
            "sites": list(self.sites),
            "blocks": [list(b.sites) for b in self.blocks],
            "law": law_json,
            "filler": {
                "sites": list(filler_sites),
                "values": [self.filler[s] for s in filler_sites],
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "BlockProductMeasure":
        alphabet = tuple(data["alphabet"])
        law_json = data.get("law", {})
        law: BlockLaw | None = None
        if law_json:
            if law_json.get("type") == "markov":
                law = MarkovPathLaw.homogeneous(
                    alphabet, law_json["initial"], law_json["transition"], law_json["length"]
                )
            else:
                law = ExplicitMeasure.from_json(law_json)
        blocks = [Block(tuple(sites), law) for sites in data.get("blocks", [])]
        filler_json = data.get("filler", {"sites": [], "values": []})
        filler = dict(zip(filler_json["sites"], filler_json["values"]))
        return cls(alphabet, data["sites"], blocks, filler)


Measure = ExplicitMeasure | BlockProductMeasure


def shannon_entropy(mu: Measure) -> float:
    return mu.entropy()


def pattern_entropy(mu: Measure, sub_sites: Sequence) -> float:
    """Entropy of the marginal of ``mu`` on ``sub_sites``."""
    if isinstance(mu, BlockProductMeasure):
        return mu.pattern_entropy(sub_sites)
    return mu.marginal(sub_sites).entropy()


def measure_to_json(mu: Measure) -> dict:
    data = mu.to_json()
    data["format_version"] = 1
    data["kind"] = "measure"
    return data


def measure_from_json(data: dict) -> Measure:
    if data.get("kind") != "measure":
        raise ValidationError("not a measure file")
    if data.get("type") == "explicit":
        return ExplicitMeasure.from_json(data)
    if data.get("type") == "block-product":
        return BlockProductMeasure.from_json(data)
    raise ValidationError(f"unknown measure type {data.get('type')!r}")
