"""Human-readable views of a QS memory: rule table export and summaries."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from qsagent import qs
from qsagent.checkpoint import Checkpoint

RULE_COLUMNS = (["node_id"] + [f"d{i}" for i in range(8)] + ["value", "hits", "hub"])


def rule_rows(memory: qs.TransitionMemory, alpha: float) -> list[list]:
    """One row per node, highest value first (ties by node id)."""
    if len(memory) == 0:
        raise ValueError("memory is empty; nothing to export")
    hubs = qs.hub_mask(memory, qs.HubConfig(alpha))
    order = sorted(range(len(memory)), key=lambda k: (-memory.values[k], memory.ids[k]))
    rows = []
    for k in order:
        rows.append([int(memory.ids[k])] + [float(v) for v in memory.raw[k]]
                    + [float(memory.values[k]), int(memory.hits[k]), int(hubs[k])])
    return rows


def format_rules(memory: qs.TransitionMemory, alpha: float) -> str:
    lines = ["\t".join(RULE_COLUMNS)]
    for row in rule_rows(memory, alpha):
        lines.append("\t".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def export_rules(ck: Checkpoint, path, alpha: float | None = None) -> Path:
    """Write the rule table, hub flags computed at the checkpoint's alpha."""
    alpha = ck.config.alpha if alpha is None else alpha
    path = Path(path)
    path.write_text(format_rules(ck.memory, alpha))
    return path


def read_rules(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split("\t")
    out = []
    for ln in lines[1:]:
        parts = ln.split("\t")
        row = dict(zip(header, parts))
        out.append({"node_id": int(row["node_id"]),
                    "delta": np.array([float(row[f"d{i}"]) for i in range(8)]),
                    "value": float(row["value"]), "hits": int(row["hits"]),
                    "hub": row["hub"] == "1"})
    return out


def summary(ck: Checkpoint, top: int = 10) -> str:
    mem = ck.memory
    cfg = qs.HubConfig(ck.config.alpha)
    lines = [f"episode: {ck.episode_index}",
             f"match threshold: {mem.match_threshold}",
             f"nodes: {len(mem)}"]
    if len(mem) == 0:
        lines.append("memory is empty")
        return "\n".join(lines) + "\n"
    hubs = sorted(qs.hub_set(mem, cfg))
    v = mem.values
    lines += [f"alpha: {cfg.alpha}",
              f"hub threshold: {qs.hub_threshold(mem, cfg):.6g}",
              f"value mean/std: {v.mean():.6g} / {v.std():.6g}",
              f"hubs ({len(hubs)}): {' '.join(str(h) for h in hubs)}",
              f"top {min(top, len(mem))} nodes by value:"]
    np_opts = dict(precision=4, suppress_small=True, max_line_width=200)
    for row in rule_rows(mem, cfg.alpha)[:top]:
        delta = np.array2string(np.array(row[1:9]), **np_opts)
        hub = " hub" if row[11] else ""
        lines.append(f"  node {row[0]:>5}  value {row[9]:>12.4f}  hits {row[10]:>7}  dS {delta}{hub}")
    return "\n".join(lines) + "\n"
