"""Certification engines for model measures over permutation models.

Everything here evaluates finite, exactly checkable statements: the
uniform model-mixing inequality on sampled maximal separated sets, the
covering-number entropy bound, the chain inequality relating pattern
entropies to observable pushforwards, local weak* convergence diagnostics,
and the assembled entropy-lower-bound pipeline. Verdicts are explicitly
scoped to the tested families; passing is evidence, not proof, while any
failure of a theorem-backed inequality is an implementation bug.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapExceededError, ValidationError
from .groups import GroupWord, metric_ball
from .measures import (
    DEFAULT_ENUM_CAP,
    BlockProductMeasure,
    ExplicitMeasure,
    Measure,
    binary_entropy,
    conditional_entropy,
    entropy_of,
    joint_observable,
    observable_entropy,
    pattern_entropy,
)
from .metric import ModelMetric, sampled_orders, separated_set_greedy, verify_separated
from .processes import ProcessOracle, uniform_mixing_radius
from .sofic import LocalObservable, SoficMap, orbit_image

FORMAT_VERSION = 1
ENTROPY_TOL = 1e-9


def _window_json(window: Sequence[GroupWord]) -> list[str]:
    return [w.key() for w in window]


@dataclass
class SetRecord:
    label: str
    vertices: tuple[int, ...]
    pattern_size: int
    entropy: float
    per_site: float
    threshold: float
    passed: bool
    separated_verified: bool
    maximal: bool
    covering: bool

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "size": len(self.vertices),
            "vertices": list(self.vertices),
            "pattern_size": self.pattern_size,
            "entropy": self.entropy,
            "per_site": self.per_site,
            "threshold": self.threshold,
            "pass": self.passed,
            "separated_verified": self.separated_verified,
            "maximal": self.maximal,
            "covering": self.covering,
        }


@dataclass
class MixingCertificate:
    """Per-set verdicts for the uniform model-mixing inequality.

    PASS means every tested maximal separated set S satisfied
    H(pattern on sigma^F(S)) >= |S| * (H(window marginal) - epsilon);
    the quantifier is over the recorded family only.
    """

    window: tuple[GroupWord, ...]
    epsilon: float
    r: float
    window_entropy: float
    w_set_label: str
    w_set_size: int
    inputs: dict
    sets: list[SetRecord] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "PASS" if all(s.passed for s in self.sets) else "FAIL"

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "mixing-certificate",
            "window": _window_json(self.window),
            "epsilon": self.epsilon,
            "r": self.r,
            "window_entropy": self.window_entropy,
            "w_set": {"label": self.w_set_label, "size": self.w_set_size},
            "inputs": self.inputs,
            "sets": [s.to_json_dict() for s in self.sets],
            "verdict": self.verdict,
        }


def certify_uniform_model_mixing(
    mu: Measure,
    sigma: SoficMap,
    metric: ModelMetric,
    process: ProcessOracle,
    window: Sequence[GroupWord],
    epsilon: float,
    r: float,
    w_set: Sequence[int] | None = None,
    w_set_label: str = "all-vertices",
    orders: int = 5,
    seed: int = 0,
    user_sets: Sequence[Sequence[int]] = (),
    cap: int = DEFAULT_ENUM_CAP,
) -> MixingCertificate:
    """Evaluate the mixing inequality on sampled maximal r-separated sets.

    Sets come from greedy passes over several vertex orders plus any
    user-supplied sets; each is re-verified r-separated before its pattern
    entropy is computed (block factorization when the measure is a block
    product, exact enumeration otherwise).
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if not r > 0:
        raise ValidationError("r must be positive")
    if r >= metric.edge_radius:
        raise ValidationError(
            f"r={r:g} must be below the metric's edge radius {metric.edge_radius:g}"
        )
    window = list(window)
    pool = sorted(set(int(v) for v in w_set)) if w_set is not None else list(range(sigma.n))
    if not pool:
        raise ValidationError("empty candidate vertex set; nothing to certify")
    window_entropy = process.marginal_entropy(window)

    jobs: list[tuple[str, tuple[int, ...], bool, bool, bool]] = []
    for label, order in sampled_orders(pool, orders, seed):
        found = separated_set_greedy(metric, pool, r, order=order, label=label)
        jobs.append((label, found.vertices, found.pairwise_ok, found.maximal_ok, found.covering_ok))
    for idx, user in enumerate(user_sets):
        vertices = tuple(sorted(set(int(v) for v in user)))
        if not set(vertices) <= set(pool):
            raise ValidationError(f"user set {idx} leaves the candidate vertex set")
        jobs.append((f"user-{idx}", vertices, verify_separated(metric, vertices, r), False, False))

    cert = MixingCertificate(
        window=tuple(window),
        epsilon=float(epsilon),
        r=float(r),
        window_entropy=float(window_entropy),
        w_set_label=w_set_label,
        w_set_size=len(pool),
        inputs={
            "n": sigma.n,
            "edge_radius": metric.edge_radius,
            "presentation": sigma.presentation.to_json(),
            "orders": orders,
            "seed": seed,
        },
    )
    for label, vertices, separated, maximal, covering in jobs:
        if not separated:
            raise ValidationError(f"set {label!r} failed the r-separation recheck")
        if not vertices:
            continue
        image = orbit_image(sigma, window, vertices)
        entropy = pattern_entropy(mu, image)
        threshold = len(vertices) * (window_entropy - epsilon)
        cert.sets.append(
            SetRecord(
                label=label,
                vertices=vertices,
                pattern_size=len(image),
                entropy=float(entropy),
                per_site=float(entropy / len(vertices)),
                threshold=float(threshold),
                passed=bool(entropy >= threshold - ENTROPY_TOL),
                separated_verified=separated,
                maximal=maximal,
                covering=covering,
            )
        )
    return cert


def inflate_separation_radius(
    r0: int, h: GroupWord, window: Sequence[GroupWord]
) -> float:
    """Vertex-metric radius guaranteeing integer gap r0 between window images.

    By right-invariance, vertices at distance >= r0*rho(h) + 2*max rho(f)
    have all their window images at distance >= r0*rho(h), hence at index
    gap >= r0 inside a shared path.
    """
    if r0 < 1:
        raise ValidationError("r0 must be at least 1")
    reach = max(w.metric() for w in window)
    return r0 * h.metric() + 2.0 * reach


def derive_mixing_parameters(
    base: ProcessOracle,
    decomposition,
    epsilon: float,
    q_max: int = 4,
    gap_cap: int = 64,
) -> dict:
    """The certification radius recipe for a path-partition construction.

    Finds the integer mixing gap of the base process at per-coset slack
    epsilon/m over the decomposition's interval length, then inflates it to
    a vertex-metric radius for the enlarged window.
    """
    m = decomposition.coset_count
    span = decomposition.span
    r0 = uniform_mixing_radius(base, span, epsilon / m, q_max=q_max, gap_cap=gap_cap)
    if r0 is None:
        raise ValidationError(
            f"no mixing gap up to {gap_cap} reaches slack {epsilon}/{m} at length {span}"
        )
    window = decomposition.enlarged()
    r = inflate_separation_radius(r0, decomposition.h, window)
    return {"r0": int(r0), "r": float(r), "interval_length": span, "cosets": m}


@dataclass
class BoundInstance:
    size: int
    alphabet_size: int
    entropy: float
    cov: int
    event_mass: float
    exact_rhs: float
    loose_rhs: float
    exact_ok: bool
    loose_ok: bool

    def to_json_dict(self) -> dict:
        return {
            "size": self.size,
            "alphabet_size": self.alphabet_size,
            "entropy": self.entropy,
            "cov": self.cov,
            "event_mass": self.event_mass,
            "exact_rhs": self.exact_rhs,
            "loose_rhs": self.loose_rhs,
            "exact_ok": self.exact_ok,
            "loose_ok": self.loose_ok,
        }


@dataclass
class CoveringBoundReport:
    """Entropy vs covering-number bound, per instance and tabulated."""

    epsilon: float
    instances: list[BoundInstance]

    @property
    def verdict(self) -> str:
        return "PASS" if all(i.exact_ok and i.loose_ok for i in self.instances) else "FAIL"

    def table(self) -> list[dict]:
        return [
            {
                "size": inst.size,
                "entropy_per_site": inst.entropy / inst.size,
                "log_cov_per_site": math.log(inst.cov) / inst.size,
            }
            for inst in self.instances
        ]

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "covering-bound-report",
            "epsilon": self.epsilon,
            "instances": [i.to_json_dict() for i in self.instances],
            "table": self.table(),
            "verdict": self.verdict,
        }


def conditioning_bound(mu: ExplicitMeasure, event: Sequence[tuple]) -> tuple[float, float]:
    """Both sides of the two-part conditioning bound for an arbitrary event.

    H(mu) <= mu(E) log|E| + (1 - mu(E)) log|full space \\ E| + H(mu(E));
    entropy is maximized by uniform distributions on each part.
    """
    event_set = set(tuple(c) for c in event)
    full = len(mu.alphabet) ** len(mu.sites)
    if not event_set or len(event_set) > full:
        raise ValidationError("event must be a nonempty subset of the configuration space")
    mass = sum(p for c, p in mu.atoms.items() if c in event_set)
    outside = full - len(event_set)
    rhs = binary_entropy(min(max(mass, 0.0), 1.0))
    if mass > 0:
        rhs += mass * math.log(len(event_set))
    if mass < 1.0 and outside > 0:
        rhs += (1.0 - mass) * math.log(outside)
    return mu.entropy(), rhs


def check_covering_bound(
    measures: Sequence[ExplicitMeasure], epsilon: float
) -> CoveringBoundReport:
    """Per-instance covering-number bound plus the per-site sequence table.

    Checks, with E the greedy covering event: the exact conditioning bound,
    and the looser H <= log cov + epsilon * log|A^V| + H(epsilon) form
    (which needs epsilon <= 1/2 so that H(mu(E)) <= H(epsilon)).
    """
    if not 0.0 < epsilon <= 0.5:
        raise ValidationError("epsilon must lie in (0, 1/2] for the loose bound")
    report = CoveringBoundReport(float(epsilon), [])
    for mu in measures:
        event, mass = mu.top_event(epsilon)
        entropy, exact_rhs = conditioning_bound(mu, event)
        full_log = len(mu.sites) * math.log(len(mu.alphabet))
        loose_rhs = math.log(len(event)) + epsilon * full_log + binary_entropy(epsilon)
        report.instances.append(
            BoundInstance(
                size=len(mu.sites),
                alphabet_size=len(mu.alphabet),
                entropy=float(entropy),
                cov=len(event),
                event_mass=float(mass),
                exact_rhs=float(exact_rhs),
                loose_rhs=float(loose_rhs),
                exact_ok=bool(entropy <= exact_rhs + ENTROPY_TOL),
                loose_ok=bool(entropy <= loose_rhs + ENTROPY_TOL),
            )
        )
    return report


@dataclass
class ChainInequalityReport:
    """The exact chain inequality H(alpha) <= H(beta) + sum H(alpha_s | beta_s)."""

    set_size: int
    pattern_entropy: float
    pushforward_entropy: float
    conditional_sum: float
    slack: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "chain-inequality-report",
            "set_size": self.set_size,
            "pattern_entropy": self.pattern_entropy,
            "pushforward_entropy": self.pushforward_entropy,
            "conditional_sum": self.conditional_sum,
            "slack": self.slack,
            "pass": self.passed,
        }


def check_chain_inequality(
    mu: ExplicitMeasure,
    sigma: SoficMap,
    observable: LocalObservable,
    vertices: Sequence[int],
) -> ChainInequalityReport:
    """Compare a pattern entropy against its observable pushforward.

    With alpha the pattern on the orbit image of the vertex set, beta the
    observable outputs on the set, and alpha_s / beta_s the per-vertex local
    name and its output, the chain rule plus monotonicity give
    H(alpha) <= H(beta) + sum_s H(alpha_s | beta_s) exactly.
    """
    window = list(observable.window)
    vertices = sorted(set(int(v) for v in vertices))
    image = orbit_image(sigma, window, vertices)
    h_alpha = pattern_entropy(mu, image)

    img_arrays = [sigma.evaluate(g) for g in window]

    def name_at(s):
        cols = [int(arr[s]) for arr in img_arrays]
        return lambda config: tuple(config[c] for c in cols)

    alphas = {s: name_at(s) for s in vertices}
    betas = {s: (lambda config, fn=alphas[s]: observable(fn(config))) for s in vertices}
    beta = joint_observable(*(betas[s] for s in vertices))

    h_beta = observable_entropy(mu, beta)
    cond_sum = float(sum(conditional_entropy(mu, alphas[s], betas[s]) for s in vertices))
    rhs = h_beta + cond_sum
    return ChainInequalityReport(
        set_size=len(vertices),
        pattern_entropy=float(h_alpha),
        pushforward_entropy=float(h_beta),
        conditional_sum=cond_sum,
        slack=float(rhs - h_alpha),
        passed=bool(h_alpha <= rhs + ENTROPY_TOL),
    )


def tuple_distribution_of(mu: Measure, site_seq: Sequence, cap: int) -> dict[tuple, float]:
    if isinstance(mu, BlockProductMeasure):
        return mu.tuple_distribution(site_seq, cap)
    return mu.tuple_distribution(site_seq)


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class ConvergenceReport:
    """Per-vertex total-variation distances of local names to the target."""

    window: tuple[GroupWord, ...]
    delta: float
    fraction_within_delta: float
    tv_zero_fraction: float
    per_vertex_tv: list[float]
    vertices: list[int]
    exact: bool
    histogram_edges: list[float]
    histogram_counts: list[int]

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "convergence-report",
            "window": _window_json(self.window),
            "delta": self.delta,
            "fraction_within_delta": self.fraction_within_delta,
            "tv_zero_fraction": self.tv_zero_fraction,
            "exact": self.exact,
            "vertices": self.vertices,
            "per_vertex_tv": self.per_vertex_tv,
            "histogram": {"edges": self.histogram_edges, "counts": self.histogram_counts},
        }


def diagnose_local_convergence(
    mu: Measure,
    process: ProcessOracle,
    sigma: SoficMap,
    window: Sequence[GroupWord],
    delta: float,
    vertices: Sequence[int] | None = None,
    sample_budget: int = 0,
    seed: int = 0,
    cap: int = DEFAULT_ENUM_CAP,
) -> ConvergenceReport:
    """Fraction of vertices whose pulled-back window marginal is delta-close.

    Marginals are exact (block factorization or direct enumeration); when an
    instance is too large to enumerate, a seeded empirical estimate over
    ``sample_budget`` draws is used instead and the report is flagged as an
    estimate.
    """
    if not 0.0 < delta < 1.0:
        raise ValidationError("delta must lie in (0, 1)")
    window = list(window)
    target = process.marginal(window).atoms
    verts = list(range(sigma.n)) if vertices is None else sorted(set(int(v) for v in vertices))
    img_arrays = [sigma.evaluate(g) for g in window]

    tvs: list[float] = []
    exact = True
    try:
        for v in verts:
            seq = [int(arr[v]) for arr in img_arrays]
            local = tuple_distribution_of(mu, seq, cap)
            tvs.append(total_variation(local, target))
    except CapExceededError:
        if sample_budget <= 0:
            raise ValidationError(
                "exact pullback marginals exceed the cap and the sample budget is zero"
            )
        exact = False
        rng = np.random.default_rng(seed)
        counts: list[dict[tuple, int]] = [dict() for _ in verts]
        for _ in range(sample_budget):
            config = mu.sample(rng)
            for i, v in enumerate(verts):
                name = tuple(config[int(arr[v])] for arr in img_arrays)
                counts[i][name] = counts[i].get(name, 0) + 1
        tvs = [
            total_variation({k: c / sample_budget for k, c in cnt.items()}, target)
            for cnt in counts
        ]

    tvs = [float(t) for t in tvs]
    edges = [i / 20.0 for i in range(21)]
    counts_hist = [0] * 20
    for t in tvs:
        idx = min(int(t * 20.0), 19)
        counts_hist[idx] += 1
    within = sum(1 for t in tvs if t <= delta + ENTROPY_TOL)
    zero = sum(1 for t in tvs if t <= 1e-12)
    return ConvergenceReport(
        window=tuple(window),
        delta=float(delta),
        fraction_within_delta=within / len(verts),
        tv_zero_fraction=zero / len(verts),
        per_vertex_tv=tvs,
        vertices=verts,
        exact=exact,
        histogram_edges=edges,
        histogram_counts=counts_hist,
    )


def pushforward_entropy(
    mu: Measure,
    sigma: SoficMap,
    observable: LocalObservable,
    outputs: Sequence[int] | None = None,
    cap: int = DEFAULT_ENUM_CAP,
    sample_budget: int = 0,
    seed: int = 0,
) -> tuple[float, bool]:
    """Entropy of the vertexwise observable pushforward, exact when possible.

    Exact paths: explicit measures enumerate their atoms; block products
    factor when every output vertex reads from at most one block. Otherwise
    a seeded plug-in estimate over ``sample_budget`` samples is returned,
    flagged by the second component being False.
    """
    window = list(observable.window)
    img_arrays = [sigma.evaluate(g) for g in window]
    outs = list(range(sigma.n)) if outputs is None else sorted(set(int(v) for v in outputs))

    def estimate() -> tuple[float, bool]:
        if sample_budget <= 0:
            raise CapExceededError(
                "pushforward entropy not exactly computable and sample budget is zero"
            )
        rng = np.random.default_rng(seed)
        counts: dict[tuple, int] = {}
        for _ in range(sample_budget):
            config = mu.sample(rng)
            key = tuple(
                observable(tuple(config[int(arr[v])] for arr in img_arrays))
                for v in outs
            )
            counts[key] = counts.get(key, 0) + 1
        return entropy_of(c / sample_budget for c in counts.values()), False

    if isinstance(mu, ExplicitMeasure):
        dist: dict[tuple, float] = {}
        for config, p in mu.atoms.items():
            key = tuple(
                observable(tuple(config[int(arr[v])] for arr in img_arrays))
                for v in outs
            )
            dist[key] = dist.get(key, 0.0) + p
        return entropy_of(dist.values()), True

    # Block product: group outputs by the single block they read from.
    # Sites of model measures are the vertex indices themselves.
    by_block: dict[int, list[int]] = {}
    for v in outs:
        touched = set()
        for arr in img_arrays:
            b = mu.block_index_of(int(arr[v]))
            if b is not None:
                touched.add(b)
        if len(touched) > 1:
            return estimate()
        if touched:
            by_block.setdefault(touched.pop(), []).append(v)

    total = 0.0
    try:
        for b, block_outs in sorted(by_block.items()):
            block = mu.blocks[b]
            exp = mu._block_explicit(block, cap)
            col = {s: i for i, s in enumerate(exp.sites)}
            dist: dict[tuple, float] = {}
            for config, p in exp.atoms.items():
                key = tuple(
                    observable(
                        tuple(
                            config[col[int(arr[v])]]
                            if int(arr[v]) in col
                            else mu.filler[int(arr[v])]
                            for arr in img_arrays
                        )
                    )
                    for v in block_outs
                )
                dist[key] = dist.get(key, 0.0) + p
            total += entropy_of(dist.values())
    except CapExceededError:
        return estimate()
    return total, True


@dataclass
class LowerBoundReport:
    """Assembled finite-size entropy lower-bound pipeline quantities."""

    r: float
    ball_count: int
    w_size: int
    w_prime_size: int
    y_size: int
    set_size: int
    counting_ok: bool
    observable_entropy: float
    pushforward_entropy: float
    pushforward_exact: bool
    per_vertex: float
    target_factor: float
    set_pattern_per_site: float | None
    inputs: dict

    def to_json_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "lower-bound-report",
            "r": self.r,
            "ball_count": self.ball_count,
            "w_size": self.w_size,
            "w_prime_size": self.w_prime_size,
            "y_size": self.y_size,
            "set_size": self.set_size,
            "counting_ok": self.counting_ok,
            "observable_entropy": self.observable_entropy,
            "pushforward_entropy": self.pushforward_entropy,
            "pushforward_exact": self.pushforward_exact,
            "per_vertex": self.per_vertex,
            "target_factor": self.target_factor,
            "set_pattern_per_site": self.set_pattern_per_site,
            "inputs": self.inputs,
        }


def entropy_lower_bound_report(
    mu: Measure,
    sigma: SoficMap,
    metric: ModelMetric,
    process: ProcessOracle,
    observable: LocalObservable,
    r: float,
    w_set: Sequence[int] | None = None,
    cap: int = DEFAULT_ENUM_CAP,
    sample_budget: int = 0,
    seed: int = 0,
    ball_cap: int = 1_000_000,
) -> LowerBoundReport:
    """Assemble the finite-size quantities of the entropy lower-bound proof.

    K counts the group ball of radius r; W' keeps vertices whose metric
    r-ball has at most K elements; a greedy maximal r-separated subset S of
    Y = W intersect W' must satisfy |S| * K >= |Y| exactly (asserted every
    run). Entropies of the observable pushforward are exact when the
    observable respects block boundaries and labelled estimates otherwise.
    """
    K = len(metric_ball(sigma.presentation, r, cap=ball_cap))
    pool_w = list(range(sigma.n)) if w_set is None else sorted(set(int(v) for v in w_set))
    w_prime = [v for v in range(sigma.n) if metric.ball_size(v, r) <= K]
    y = sorted(set(pool_w) & set(w_prime))
    if not y:
        raise ValidationError("empty candidate set Y; nothing to report")
    found = separated_set_greedy(metric, y, r)
    if not (found.pairwise_ok and found.maximal_ok and found.covering_ok):
        raise ValidationError("greedy separated set failed its own recheck")
    counting_ok = len(found.vertices) * K >= len(y)

    h_obs = entropy_of(
        process.marginal(list(observable.window)).pushforward(observable).values()
    )
    h_push, exact = pushforward_entropy(
        mu, sigma, observable, cap=cap, sample_budget=sample_budget, seed=seed
    )
    set_per_site: float | None
    try:
        h_set, set_exact = pushforward_entropy(
            mu, sigma, observable, outputs=found.vertices, cap=cap,
            sample_budget=sample_budget, seed=seed,
        )
        set_per_site = float(h_set / len(found.vertices)) if set_exact else None
    except CapExceededError:
        set_per_site = None

    return LowerBoundReport(
        r=float(r),
        ball_count=K,
        w_size=len(pool_w),
        w_prime_size=len(w_prime),
        y_size=len(y),
        set_size=len(found.vertices),
        counting_ok=bool(counting_ok),
        observable_entropy=float(h_obs),
        pushforward_entropy=float(h_push),
        pushforward_exact=bool(exact),
        per_vertex=float(h_push / sigma.n),
        target_factor=float(h_obs / (8 * K + 1)),
        set_pattern_per_site=set_per_site,
        inputs={"n": sigma.n, "edge_radius": metric.edge_radius},
    )
