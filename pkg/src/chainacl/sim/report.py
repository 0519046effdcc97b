"""Conformance text dump of the policy tables, and run figures."""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Sequence

from ..policy import (
    Action,
    CommTarget,
    ResourceKind,
    Role,
    SecurityEvent,
    communication_allowed,
    response_for,
    static_permission,
)


def dump_policy_matrix() -> str:
    """All 48 permission cells, 9 communication cells and 5 responses, in enum order."""
    lines = []
    for role in Role:
        for resource in ResourceKind:
            for action in Action:
                decision = static_permission(role, resource, action)
                lines.append(f"permission {role.value} {resource.value} {action.value} {decision.value}")
    for role in Role:
        for target in CommTarget:
            lines.append(f"communication {role.value} {target.value} {communication_allowed(role, target).value}")
    for event in SecurityEvent:
        spec = response_for(event)
        lines.append(
            f"response {event.value} {spec.severity.value} {spec.cia_impact.value} "
            f"{spec.stride_impact.value} {spec.penalty.label()}"
        )
    return "\n".join(lines) + "\n"


_DECISIONS = ("Granted", "DeniedStatic", "DeniedDynamic", "DeniedPenalty")
_COLORS = {"Granted": "#4c956c", "DeniedStatic": "#f4a259", "DeniedDynamic": "#bc4b51", "DeniedPenalty": "#6d597a"}


def render_figures(result, out_dir: Path) -> list[Path]:
    """Write PNG figures for a finished run into ``out_dir``; return their paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    access = [t for t in result.trace if t.operation == "AccessRequest"]
    counts = Counter(t.outcome.split(":", 1)[0] for t in access)

    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    values = [counts.get(d, 0) for d in _DECISIONS]
    ax.bar(_DECISIONS, values, color=[_COLORS[d] for d in _DECISIONS])
    for x, v in enumerate(values):
        ax.annotate(str(v), (x, v), ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("requests")
    ax.set_title(f"Access outcomes: {result.scenario.name}")
    fig.tight_layout()
    path = out_dir / "access_outcomes.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for row, decision in enumerate(_DECISIONS):
        times = [t.time for t in access if t.outcome.startswith(decision)]
        ax.scatter(times, [row] * len(times), s=12, color=_COLORS[decision], label=decision)
    penalties = sorted(result.metrics.penalties_by_kind.items())
    ax.set_yticks(range(len(_DECISIONS)), _DECISIONS)
    ax.set_xlabel("simulated time (s)")
    if penalties:
        ax.set_title("Penalties: " + ", ".join(f"{k} x{v}" for k, v in penalties), fontsize=9)
    fig.tight_layout()
    path = out_dir / "access_timeline.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    hops: Sequence[int] = result.metrics.route_hops
    if hops:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        top = max(hops)
        ax.hist(hops, bins=range(0, top + 2), align="left", rwidth=0.8, color="#3d5a80")
        ax.set_xlabel("route hops")
        ax.set_ylabel("lookups")
        ax.set_xticks(range(0, top + 1))
        fig.tight_layout()
        path = out_dir / "route_hops.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
