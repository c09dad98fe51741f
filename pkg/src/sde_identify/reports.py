"""CSV emission and deterministic SVG plotting for experiment runs."""

from __future__ import annotations

import csv
import os
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import InvalidParam, IoError

# stable SVG ids + no embedded timestamp -> byte-identical output per input
matplotlib.rcParams["svg.hashsalt"] = "sde-identify"


def write_csv(path: str, fieldnames: Sequence[str], rows: Sequence[dict]) -> None:
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(fieldnames))
            w.writeheader()
            for row in rows:
                w.writerow(row)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}")


def summarize(rows: Sequence[dict], group_keys: Sequence[str],
              value_keys: Sequence[str]) -> List[dict]:
    """Per-group mean +/- sample std rows, in first-seen group order."""
    import numpy as np

    groups: Dict[tuple, List[dict]] = {}
    order = []
    for row in rows:
        key = tuple(row[k] for k in group_keys)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for key in order:
        rec = dict(zip(group_keys, key))
        vals = groups[key]
        for vk in value_keys:
            xs = np.asarray([float(v[vk]) for v in vals])
            std = xs.std(ddof=1) if xs.size > 1 else 0.0
            rec[vk] = f"{xs.mean():.6g} ± {std:.3g}"
        out.append(rec)
    return out


def emit_plot(series: Sequence[Tuple[str, Sequence, Sequence, Sequence]],
              path: str, xlabel: str = "", ylabel: str = "",
              title: str = "", logy: bool = False) -> str:
    """Error-bar line chart; series = [(label, x, y, yerr or None), ...].

    Output is a self-contained SVG whose bytes depend only on the input
    (fixed hashsalt, no creation date).
    """
    if not series:
        raise InvalidParam("emit_plot needs at least one series")
    for label, x, y, yerr in series:
        if len(x) != len(y) or (yerr is not None and len(yerr) != len(y)):
            raise InvalidParam(f"series {label!r} has mismatched lengths")
        if len(x) == 0:
            raise InvalidParam(f"series {label!r} is empty")
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, x, y, yerr in series:
        ax.errorbar(x, y, yerr=yerr, marker="o", capsize=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if logy:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}")
    finally:
        plt.close(fig)
    return path
