"""Figure rendering for report artifacts.

Each renderer takes a report's JSON dictionary and writes a PNG next to the
delimited output. Rendering is headless (Agg) and optional: reports remain
fully usable without figures.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def certificate_figure(report: dict, path) -> None:
    """Per-set entropy-per-site bars against the certification target."""
    sets = report.get("sets", [])
    labels = [s["label"] for s in sets]
    values = [s["per_site"] for s in sets]
    target = report["window_entropy"] - report["epsilon"]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(sets)), 3.2))
    colors = ["tab:blue" if s["pass"] else "tab:red" for s in sets]
    ax.bar(range(len(sets)), values, color=colors)
    ax.axhline(target, color="black", linestyle="--", linewidth=1, label="target")
    ax.axhline(report["window_entropy"], color="gray", linestyle=":", linewidth=1,
               label="window entropy")
    ax.set_xticks(range(len(sets)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("entropy per site (nats)")
    ax.set_title(f"mixing certificate: {report['verdict']}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def convergence_figure(report: dict, path) -> None:
    """Histogram of per-vertex total-variation distances with the delta line."""
    hist = report["histogram"]
    edges, counts = hist["edges"], hist["counts"]
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.bar(edges[:-1], counts, width=[b - a for a, b in zip(edges, edges[1:])],
           align="edge", color="tab:blue")
    ax.axvline(report["delta"], color="black", linestyle="--", linewidth=1,
               label=f"delta = {report['delta']:g}")
    ax.set_xlabel("total variation to the target marginal")
    ax.set_ylabel("vertices")
    ax.set_yscale("symlog")
    ax.set_title(f"local convergence: {report['fraction_within_delta']:.4f} within delta")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def covering_bound_figure(report: dict, path) -> None:
    """Per-site entropy against per-site log covering number."""
    table = report["table"]
    xs = list(range(len(table)))
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.plot(xs, [row["entropy_per_site"] for row in table], "o-", label="entropy / site")
    ax.plot(xs, [row["log_cov_per_site"] for row in table], "s-", label="log cov / site")
    ax.set_xlabel("instance")
    ax.set_ylabel("nats per site")
    ax.set_title(f"covering bound: {report['verdict']}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


_RENDERERS = {
    "mixing-certificate": certificate_figure,
    "convergence-report": convergence_figure,
    "covering-bound-report": covering_bound_figure,
}


def render_report_figures(report: dict, out_dir, stem: str) -> list[str]:
    """Render the figures a report supports; returns the written paths."""
    import os

    renderer = _RENDERERS.get(report.get("kind"))
    if renderer is None:
        return []
    path = os.path.join(out_dir, f"{stem}.png")
    renderer(report, path)
    return [path]
