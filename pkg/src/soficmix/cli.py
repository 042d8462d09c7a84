"""Batch orchestration: build artifacts from configs, certify, report.

Stages compose through files only. ``run`` executes the whole pipeline
(build model -> construct measure -> certify -> report); the stage
subcommands expose each step against the same JSON schemas. Exit codes:
0 all checks passed, 2 a certification FAILed, 1 invalid input or error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .construction import (
    PathPartition,
    build_bernoulli_model,
    build_model_measure,
    check_condition_b,
    distinct_coset_pairs,
    extract_cycles,
    partition_paths,
    schedule_l,
)
from .errors import SoficmixError, ValidationError
from .groups import GroupPresentation, coset_decompose, distance
from .measures import measure_from_json, measure_to_json
from .metric import build_metric, good_vertices
from .plots import render_report_figures
from .processes import BernoulliProcess, CoinducedProcess, process_from_json
from .sofic import (
    build_cycle_sofic,
    build_random_sofic,
    build_torus_sofic,
    sofic_from_json,
    sofic_to_json,
)
from .suites import run_inequality_suites
from .verify import (
    certify_uniform_model_mixing,
    derive_mixing_parameters,
    diagnose_local_convergence,
)

DEFAULT_CAPS = {"enum": 2_000_000, "ball": 2_000_000}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(data: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"missing input file {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"file {path} is not valid JSON: {exc}")


def report_csv(report: dict, path: Path) -> None:
    """Flat delimited summary of a report, one row per tested item."""
    kind = report.get("kind")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if kind == "mixing-certificate":
            writer.writerow(
                ["label", "size", "pattern_size", "entropy", "per_site", "threshold", "pass"]
            )
            for s in report["sets"]:
                writer.writerow(
                    [s["label"], s["size"], s["pattern_size"], repr(s["entropy"]),
                     repr(s["per_site"]), repr(s["threshold"]), s["pass"]]
                )
        elif kind == "convergence-report":
            writer.writerow(["vertex", "tv"])
            for v, tv in zip(report["vertices"], report["per_vertex_tv"]):
                writer.writerow([v, repr(tv)])
        elif kind == "covering-bound-report":
            writer.writerow(
                ["size", "entropy", "cov", "event_mass", "exact_rhs", "loose_rhs",
                 "exact_ok", "loose_ok"]
            )
            for inst in report["instances"]:
                writer.writerow(
                    [inst["size"], repr(inst["entropy"]), inst["cov"],
                     repr(inst["event_mass"]), repr(inst["exact_rhs"]),
                     repr(inst["loose_rhs"]), inst["exact_ok"], inst["loose_ok"]]
                )
        elif kind == "lemma-suite-report":
            writer.writerow(["suite", "count", "failures", "worst_violation"])
            for s in report["suites"]:
                writer.writerow([s["name"], s["count"], s["failures"], repr(s["worst_violation"])])
        else:
            writer.writerow(sorted(k for k, v in report.items() if not isinstance(v, (dict, list))))
            writer.writerow(
                [report[k] for k in sorted(k for k, v in report.items() if not isinstance(v, (dict, list)))]
            )


def _field(cfg: dict, name: str, expected=None):
    node = cfg
    for part in name.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ValidationError(f"config field {name!r} is missing")
        node = node[part]
    if expected is not None and not isinstance(node, expected):
        raise ValidationError(f"config field {name!r} has the wrong type")
    return node


def _build_sigma(config: dict, pres: GroupPresentation, budget: float):
    spec = _field(config, "sofic", dict)
    builder = spec.get("builder")
    if "file" in spec:
        sigma = sofic_from_json(read_json(spec["file"]))
        if sigma.presentation != pres:
            raise ValidationError("sofic.file presentation does not match config group")
        if sigma.budget + 1e-9 < budget:
            raise ValidationError(
                f"sofic.file budget {sigma.budget:g} below the required {budget:g}"
            )
        return sigma
    if builder == "cycle":
        if pres.kind != "free-abelian" or pres.rank != 1:
            raise ValidationError("sofic.builder cycle needs a rank-1 free-abelian group")
        return build_cycle_sofic(int(_field(spec, "n")), weight=pres.weights[0], budget=budget)
    if builder == "torus":
        dims = _field(spec, "dims", list)
        if pres.kind != "free-abelian" or pres.rank != len(dims):
            raise ValidationError("sofic.builder torus needs rank == len(dims)")
        return build_torus_sofic(dims, weights=pres.weights, budget=budget)
    if builder == "random":
        return build_random_sofic(pres, int(_field(spec, "n")), int(_field(spec, "seed")), budget=budget)
    raise ValidationError(f"unknown sofic.builder {builder!r}")


def run_experiment(config: dict, out_dir: Path, figures: bool | None = None) -> dict:
    """Execute build -> construct -> certify -> report; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    pres = GroupPresentation.from_json(_field(config, "group", dict))
    caps = dict(DEFAULT_CAPS)
    caps.update(config.get("caps", {}))
    if any(int(v) <= 0 for v in caps.values()):
        raise ValidationError("caps entries must be positive")

    certify_cfg = _field(config, "certify", dict)
    epsilon = float(_field(certify_cfg, "epsilon"))
    if epsilon <= 0:
        raise ValidationError("certify.epsilon must be positive")
    window = [pres.word(w) for w in _field(certify_cfg, "window", list)]
    orders = int(certify_cfg.get("orders", 5))
    seed = int(certify_cfg.get("seed", 0))

    measure_cfg = _field(config, "measure", dict)
    measure_kind = _field(measure_cfg, "kind")

    base = None
    target = None
    decomp = None
    h = None
    derived = None

    if measure_kind == "path-construction":
        base = process_from_json(_field(config, "process", dict))
        if base.presentation.rank != 1:
            raise ValidationError("process must be a rank-1 (Z) oracle for path constructions")
        h = pres.word(_field(measure_cfg, "h"))
        if h.is_identity():
            raise ValidationError("measure.h must be a nonidentity element")
        target = CoinducedProcess(base, h, pres)
        decomp = coset_decompose(window, h)
        cert_window = decomp.enlarged()
    elif measure_kind in ("bernoulli", "file"):
        proc_cfg = _field(config, "process", dict)
        if measure_kind == "bernoulli" and proc_cfg.get("type") != "bernoulli":
            raise ValidationError("measure.kind bernoulli needs process.type bernoulli")
        if proc_cfg.get("type") == "bernoulli":
            target = BernoulliProcess(proc_cfg["alphabet"], proc_cfg["probs"], pres)
        else:
            target = process_from_json(proc_cfg)
        cert_window = list(window)
    else:
        raise ValidationError(f"unknown measure.kind {measure_kind!r}")

    radius_cfg = certify_cfg.get("radius", "auto")
    if radius_cfg == "auto":
        if decomp is None:
            raise ValidationError("certify.radius auto needs a path-construction measure")
        derived = derive_mixing_parameters(
            base,
            decomp,
            epsilon,
            q_max=int(certify_cfg.get("q_max", 4)),
            gap_cap=int(certify_cfg.get("gap_cap", 64)),
        )
        r = derived["r"]
    else:
        r = float(radius_cfg)
        if r <= 0:
            raise ValidationError("certify.radius must be positive")

    edge_cfg = config.get("edge_radius", "auto")
    edge_radius = r + min(pres.weights) if edge_cfg == "auto" else float(edge_cfg)
    if edge_radius <= r:
        raise ValidationError("edge_radius must strictly exceed the certification radius")

    diameter = max(
        (distance(a, b) for a in cert_window for b in cert_window), default=0.0
    )
    needed = [edge_radius, 2 * r + diameter] + [w.metric() for w in cert_window]
    if h is not None:
        needed.append(h.metric())
    budget = max(needed)

    sigma = _build_sigma(config, pres, budget)
    artifacts = {}
    write_json(sofic_to_json(sigma), out_dir / "sofic.json")
    artifacts["sofic"] = "sofic.json"

    conditions = None
    partition = None
    if measure_kind == "path-construction":
        cycles = extract_cycles(sigma, h)
        length_cfg = _field(measure_cfg, "l")
        if isinstance(length_cfg, dict):
            lengths = schedule_l(
                [sigma],
                h,
                float(_field(length_cfg, "threshold_a")),
                float(_field(length_cfg, "threshold_b")),
                pairs=distinct_coset_pairs(cert_window, h),
                l_cap=int(length_cfg.get("l_cap", 64)),
                cut_offset=int(measure_cfg.get("cut_offset", 0)),
            )
            length = lengths[0]
        else:
            length = int(length_cfg)
        partition = partition_paths(cycles, length, int(measure_cfg.get("cut_offset", 0)))
        pairs = distinct_coset_pairs(cert_window, h)
        pair_fractions = check_condition_b(sigma, h, pairs, length)
        conditions = {
            "l": length,
            "coverage": partition.coverage(),
            "pair_fractions": {
                f"{g.key()} | {gp.key()}": frac for (g, gp), frac in sorted(
                    pair_fractions.items(), key=lambda kv: (kv[0][0].key(), kv[0][1].key())
                )
            },
        }
        measure = build_model_measure(base, partition, measure_cfg.get("filler_symbol"))
        write_json(partition.to_json(), out_dir / "partition.json")
        artifacts["partition"] = "partition.json"
    elif measure_kind == "bernoulli":
        measure = build_bernoulli_model(target, sigma.n)
    else:
        measure = measure_from_json(read_json(_field(measure_cfg, "path")))
        if getattr(measure, "sites", None) is not None and len(measure.sites) != sigma.n:
            raise ValidationError("measure.file sites do not match the model size")
    write_json(measure_to_json(measure), out_dir / "measure.json")
    artifacts["measure"] = "measure.json"

    metric = build_metric(sigma, edge_radius, ball_cap=int(caps["ball"]))

    w_mode = certify_cfg.get("w_set", "good-vertices" if partition is not None else "all")
    if w_mode == "good-vertices":
        if partition is None or decomp is None:
            raise ValidationError("certify.w_set good-vertices needs a path construction")
        w_vertices = good_vertices(sigma, decomp, partition)
        w_label = "good-vertices"
    elif w_mode == "all":
        w_vertices = None
        w_label = "all-vertices"
    else:
        raise ValidationError(f"unknown certify.w_set {w_mode!r}")

    certificate = certify_uniform_model_mixing(
        measure,
        sigma,
        metric,
        target,
        cert_window,
        epsilon,
        r,
        w_set=w_vertices,
        w_set_label=w_label,
        orders=orders,
        seed=seed,
        cap=int(caps["enum"]),
    )
    cert_dict = certificate.to_json_dict()
    if derived is not None:
        cert_dict["derived_radius"] = derived
    if conditions is not None:
        cert_dict["construction"] = conditions
    write_json(cert_dict, out_dir / "certificate.json")
    report_csv(cert_dict, out_dir / "certificate.csv")
    artifacts["certificate"] = "certificate.json"

    convergence_dict = None
    diag_cfg = config.get("diagnose")
    if diag_cfg is not None:
        report = diagnose_local_convergence(
            measure,
            target,
            sigma,
            cert_window,
            float(_field(diag_cfg, "delta")),
            sample_budget=int(diag_cfg.get("sample_budget", 0)),
            seed=seed,
            cap=int(caps["enum"]),
        )
        convergence_dict = report.to_json_dict()
        write_json(convergence_dict, out_dir / "convergence.json")
        report_csv(convergence_dict, out_dir / "convergence.csv")
        artifacts["convergence"] = "convergence.json"

    want_figures = bool(config.get("figures", True)) if figures is None else figures
    if want_figures:
        render_report_figures(cert_dict, out_dir, "certificate")
        if convergence_dict is not None:
            render_report_figures(convergence_dict, out_dir, "convergence")

    exit_code = 0 if certificate.verdict == "PASS" else 2
    manifest = {
        "format_version": 1,
        "kind": "experiment-manifest",
        "exit_code": exit_code,
        "verdict": certificate.verdict,
        "radius": r,
        "edge_radius": edge_radius,
        "budget": budget,
        "derived_radius": derived,
        "construction": conditions,
        "window": [w.key() for w in window],
        "certification_window": [w.key() for w in cert_window],
        "artifacts": artifacts,
    }
    write_json(manifest, out_dir / "manifest.json")
    return manifest


def _cmd_run(args) -> int:
    config = read_json(args.config)
    if args.seed is not None:
        config.setdefault("certify", {})["seed"] = args.seed
    if args.cap_enum is not None:
        config.setdefault("caps", {})["enum"] = args.cap_enum
    manifest = run_experiment(config, Path(args.out), figures=None if args.figures else False)
    return int(manifest["exit_code"])


def _cmd_build_sofic(args) -> int:
    budget = math.inf if args.budget is None else float(args.budget)
    if args.kind == "cycle":
        sigma = build_cycle_sofic(args.n, weight=args.weight, budget=budget)
    elif args.kind == "torus":
        dims = [int(d) for d in args.dims.split(",")]
        sigma = build_torus_sofic(dims, budget=budget)
    elif args.kind == "random":
        pres = GroupPresentation.free(args.rank)
        sigma = build_random_sofic(pres, args.n, args.seed, budget=budget)
    else:
        raise ValidationError(f"unknown builder kind {args.kind!r}")
    write_json(sofic_to_json(sigma), Path(args.out))
    return 0


def _cmd_build_measure(args) -> int:
    sigma = sofic_from_json(read_json(args.sofic))
    process = process_from_json(read_json(args.process))
    h = sigma.presentation.word(json.loads(args.h))
    partition = partition_paths(extract_cycles(sigma, h), args.l, args.cut_offset)
    measure = build_model_measure(process, partition, None)
    write_json(partition.to_json(), Path(args.partition_out))
    write_json(measure_to_json(measure), Path(args.out))
    return 0


def _cmd_certify(args) -> int:
    sigma = sofic_from_json(read_json(args.sofic))
    measure = measure_from_json(read_json(args.measure))
    process = process_from_json(read_json(args.process))
    pres = sigma.presentation
    window = [pres.word(w) for w in json.loads(args.window)]
    metric = build_metric(sigma, args.edge_radius)
    w_vertices = None
    w_label = "all-vertices"
    if args.partition is not None:
        if args.h is None:
            raise ValidationError("--partition requires --h")
        partition = PathPartition.from_json(read_json(args.partition))
        h = pres.word(json.loads(args.h))
        decomp = coset_decompose(window, h)
        w_vertices = good_vertices(sigma, decomp, partition)
        w_label = "good-vertices"
    certificate = certify_uniform_model_mixing(
        measure, sigma, metric, process, window, args.epsilon, args.radius,
        w_set=w_vertices, w_set_label=w_label, orders=args.orders, seed=args.seed,
    )
    report = certificate.to_json_dict()
    write_json(report, Path(args.out))
    return 0 if certificate.verdict == "PASS" else 2


def _cmd_diagnose(args) -> int:
    sigma = sofic_from_json(read_json(args.sofic))
    measure = measure_from_json(read_json(args.measure))
    process = process_from_json(read_json(args.process))
    window = [sigma.presentation.word(w) for w in json.loads(args.window)]
    report = diagnose_local_convergence(
        measure, process, sigma, window, args.delta,
        sample_budget=args.sample_budget, seed=args.seed,
    )
    write_json(report.to_json_dict(), Path(args.out))
    return 0


def _cmd_check_lemmas(args) -> int:
    report = run_inequality_suites(args.instances, args.seed)
    write_json(report.to_json_dict(), Path(args.out))
    return 0 if report.verdict == "PASS" else 2


def _cmd_report(args) -> int:
    report = read_json(args.input)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    if args.format == "csv":
        report_csv(report, out_dir / f"{stem}.csv")
    else:
        write_json(report, out_dir / f"{stem}.json")
    if args.figures:
        render_report_figures(report, out_dir, stem)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soficmix",
        description="Finite permutation models, model measures, and entropy certification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Run a full experiment from a config file.")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="Override certify.seed.")
    p.add_argument("--cap-enum", type=int, default=None, help="Override caps.enum.")
    p.add_argument("--threads", type=int, default=1,
                   help="Accepted for forward compatibility; kernels are vectorized.")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("build-sofic", help="Build a permutation model file.")
    p.add_argument("--kind", required=True, choices=["cycle", "torus", "random"])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dims", type=str, default=None, help="Comma-separated torus sizes.")
    p.add_argument("--rank", type=int, default=2, help="Free rank for random models.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight", type=float, default=1.0)
    p.add_argument("--budget", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_sofic)

    p = sub.add_parser("build-measure", help="Build a path-partition model measure.")
    p.add_argument("--sofic", required=True)
    p.add_argument("--process", required=True)
    p.add_argument("--h", required=True, help="JSON word, e.g. [1] or [1,0].")
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--cut-offset", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--partition-out", required=True)
    p.set_defaults(func=_cmd_build_measure)

    p = sub.add_parser("certify-mixing", help="Certify uniform model-mixing on files.")
    p.add_argument("--sofic", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--process", required=True)
    p.add_argument("--window", required=True, help="JSON list of words.")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--edge-radius", type=float, required=True)
    p.add_argument("--orders", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partition", default=None, help="Partition file for good-vertices W.")
    p.add_argument("--h", default=None, help="JSON word; required with --partition.")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("diagnose-convergence", help="Local weak* convergence diagnostics.")
    p.add_argument("--sofic", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--process", required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--sample-budget", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("check-lemmas", help="Run the theorem-backed inequality suites.")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_check_lemmas)

    p = sub.add_parser("report", help="Convert a report to CSV and render figures.")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SoficmixError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
