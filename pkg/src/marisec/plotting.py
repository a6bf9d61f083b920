"""Figures from metrics, evaluation, sweep and trace CSV files."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


class PlotError(ValueError):
    pass


def read_csv(path) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    """Return (header tags from the leading comment, rows)."""
    tags: Dict[str, str] = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    k, v = part.split("=", 1)
                    tags[k] = v
        elif line.strip():
            body.append(line)
    if not body:
        raise PlotError(f"{path}: no header row")
    rows = list(csv.DictReader(body))
    if not rows:
        raise PlotError(f"{path}: no data rows")
    return tags, rows


def kind_of(rows) -> str:
    cols = set(rows[0])
    if {"step", "ep_secrecy_mean"} <= cols:
        return "metrics"
    if {"axis", "value", "secrecy_mean"} <= cols:
        return "sweep"
    if {"t", "R_sec", "R_opt"} <= cols:
        return "oracle_trace"
    if {"policy", "secrecy_mean", "energy_j_mean"} <= cols:
        return "summary"
    raise PlotError(f"unrecognised columns: {sorted(cols)}")


def _col(rows, name) -> np.ndarray:
    try:
        return np.array([float(r[name]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise PlotError(f"bad column {name!r}: {exc}") from exc


def _label(tags, path) -> str:
    h = tags.get("config_hash", "?")
    s = tags.get("seed")
    return f"{h}" + (f" s{s}" if s is not None else "") if tags else Path(path).stem


def _stamp(fig, tags_list) -> dict:
    hashes = sorted({t.get("config_hash", "?") for t in tags_list})
    seeds = sorted({t.get("seed", "?") for t in tags_list})
    text = f"config_hash={','.join(hashes)} seed={','.join(seeds)}"
    fig.text(0.01, 0.005, text, fontsize=6, color="0.4")
    return {"Description": text}


def _smooth(y: np.ndarray, k: int) -> np.ndarray:
    ok = np.isfinite(y)
    if ok.sum() == 0 or k <= 1:
        return y
    y = np.where(ok, y, np.interp(np.arange(len(y)), np.flatnonzero(ok), y[ok]))
    k = min(k, len(y))
    return np.convolve(y, np.ones(k) / k, mode="valid")


def plot_files(paths: Sequence, out_dir, smooth: int = 25) -> List[Path]:
    """Group inputs by kind and write one figure per kind."""
    if not paths:
        raise PlotError("no input files")
    groups: Dict[str, list] = {}
    for p in paths:
        tags, rows = read_csv(p)
        groups.setdefault(kind_of(rows), []).append((p, tags, rows))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, items in groups.items():
        fig = _PLOTTERS[kind](items, smooth)
        meta = _stamp(fig, [t for _, t, _ in items])
        path = out_dir / f"{kind}.png"
        fig.savefig(path, dpi=120, metadata=meta)
        plt.close(fig)
        written.append(path)
    return written


def _plot_metrics(items, smooth):
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
    for p, tags, rows in items:
        step = _col(rows, "step")
        for ax, name in zip(axes, ("ep_secrecy_mean", "ep_energy_mean")):
            y = _smooth(_col(rows, name), smooth)
            ax.plot(step[len(step) - len(y):], y, label=_label(tags, p))
    axes[0].set_ylabel("episode-average secrecy rate (bit/s/Hz)")
    axes[1].set_ylabel("average UAV energy per slot (J)")
    for ax in axes:
        ax.set_xlabel("environment step")
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _plot_sweep(items, smooth):
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
    for p, tags, rows in items:
        x = _col(rows, "value")
        order = np.argsort(x)
        lab = f"{rows[0]['axis']} ({rows[0].get('mode', '')}) {_label(tags, p)}"
        axes[0].plot(x[order], _col(rows, "secrecy_mean")[order], "o-", label=lab)
        axes[1].plot(x[order], _col(rows, "energy_j_mean")[order], "o-", label=lab)
    axes[0].set_ylabel("secrecy rate (bit/s/Hz)")
    axes[1].set_ylabel("episode energy (J)")
    for ax in axes:
        ax.set_xlabel("sweep value (dBm)")
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _plot_oracle(items, smooth):
    fig, ax = plt.subplots(figsize=(6, 3.8))
    for p, tags, rows in items:
        t = _col(rows, "t")
        ax.plot(t, _col(rows, "R_sec"), label=f"achieved {_label(tags, p)}")
        ax.plot(t, _col(rows, "R_opt"), "--", label=f"upper bound {_label(tags, p)}")
    ax.set_xlabel("time slot")
    ax.set_ylabel("secrecy rate (bit/s/Hz)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _plot_summary(items, smooth):
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
    names, sec, sec_sd, en, en_sd = [], [], [], [], []
    for p, tags, rows in items:
        for r in rows:
            names.append(f"{r['policy']}\n{tags.get('config_hash', '')[:6]}")
            sec.append(float(r["secrecy_mean"]))
            sec_sd.append(float(r["secrecy_std"]))
            en.append(float(r["energy_j_mean"]))
            en_sd.append(float(r["energy_j_std"]))
    x = np.arange(len(names))
    axes[0].bar(x, sec, yerr=sec_sd)
    axes[1].bar(x, en, yerr=en_sd)
    axes[0].set_ylabel("secrecy rate (bit/s/Hz)")
    axes[1].set_ylabel("episode energy (J)")
    for ax in axes:
        ax.set_xticks(x, names, fontsize=7)
    fig.tight_layout()
    return fig


_PLOTTERS = {
    "metrics": _plot_metrics,
    "sweep": _plot_sweep,
    "oracle_trace": _plot_oracle,
    "summary": _plot_summary,
}
