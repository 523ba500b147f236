"""SVG renders of loops, curves and domains, and matplotlib figures of
experiment tables."""
from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = ["render_svg", "svg_loop_vertex_counts", "plot_outcome", "STYLE"]

STYLE = {
    "ccw": "#1f5fbf",
    "cw": "#d9822b",
    "curve": "#222222",
    "domain": "#000000",
    "width": 0.004,
    "margin": 0.05,
    "size": 600,
}


def _fmt(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _pts(z: np.ndarray) -> str:
    # SVG y runs downwards
    return " ".join(f"{_fmt(p.real)},{_fmt(-p.imag)}" for p in z)


def render_svg(loops: Iterable = (), curves: Iterable = (), domain=None, style: dict | None = None,
               path: str | Path | None = None) -> str:
    """SVG text (written to ``path`` when given).

    ``loops`` are :class:`OrientedLoop` objects or ``(points, orientation)``
    pairs; counterclockwise and clockwise loops get different colours.
    ``curves`` are complex point arrays drawn as polylines; ``domain`` is a
    :class:`DomainSpec` or a complex array drawn as the outline.
    """
    st = {**STYLE, **(style or {})}
    items = []
    for l in loops:
        if isinstance(l, tuple):
            z, o = np.asarray(l[0], dtype=complex), l[1]
        else:
            z, o = l.points(), l.orientation
        items.append((z, o))
    curves = [np.asarray(getattr(c, "vertices", c), dtype=complex) for c in curves]
    outline = None
    if domain is not None:
        outline = np.asarray(getattr(domain, "boundary", domain), dtype=complex)
    allz = [z for z, _ in items] + curves + ([outline] if outline is not None else [])
    allz = np.concatenate(allz) if allz else np.zeros(1, dtype=complex)
    x0, x1 = allz.real.min(), allz.real.max()
    y0, y1 = allz.imag.min(), allz.imag.max()
    span = max(x1 - x0, y1 - y0, 1e-12)
    m = st["margin"] * span
    w = st["width"] * span
    vb = f"{_fmt(x0 - m)} {_fmt(-y1 - m)} {_fmt(x1 - x0 + 2 * m)} {_fmt(y1 - y0 + 2 * m)}"
    aspect = (y1 - y0 + 2 * m) / (x1 - x0 + 2 * m)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{st["size"]}" height="{int(round(st["size"] * aspect))}" '
        f'viewBox="{vb}">',
    ]
    if outline is not None:
        lines.append(f'<polygon class="domain" fill="none" stroke="{st["domain"]}" stroke-width="{_fmt(w)}" '
                     f'points="{_pts(outline)}"/>')
    for z, o in items:
        lines.append(f'<polygon class="loop {o}" fill="none" stroke="{st[o]}" stroke-width="{_fmt(w)}" '
                     f'points="{_pts(z)}"/>')
    for z in curves:
        lines.append(f'<polyline class="curve" fill="none" stroke="{st["curve"]}" stroke-width="{_fmt(w)}" '
                     f'points="{_pts(z)}"/>')
    lines.append("</svg>")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def svg_loop_vertex_counts(text: str) -> list[int]:
    """Number of points in each loop polygon of an SVG produced here."""
    return [len(m.split()) for m in re.findall(r'<polygon class="loop [^"]*"[^>]*points="([^"]*)"', text)]


# --------------------------------------------------------------------------
# figures


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    return path


def plot_outcome(kind: str, tables: dict, out: Path) -> list[Path]:
    """Figures for the tables of one experiment, written next to its CSVs."""
    plt = _figure()
    out = Path(out)
    paths = []
    if "cardy_rectangle" in tables and tables["cardy_rectangle"]:
        rows = tables["cardy_rectangle"]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        d = np.array([r["delta"] for r in rows])
        e = np.array([r["abs_error"] for r in rows])
        s = np.array([r["stderr"] for r in rows])
        ax.errorbar(d, e, yerr=s, marker="o", capsize=3)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("mesh")
        ax.set_ylabel("|estimate - Cardy|")
        ax.set_title("2:1 rectangle crossing")
        paths.append(_save(fig, out / "cardy_trend.png"))
        plt.close(fig)
    for name in sorted(k for k in tables if k.startswith("exit_cdf")):
        rows = tables[name]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        t = np.array([r["theta"] for r in rows])
        for key, lab in (("lattice", "exploration"), ("sle", "SLE(6)"), ("cardy", "Cardy")):
            ax.step(t, [r[key] for r in rows], where="post", label=lab)
        ax.set_xlabel("exit angle")
        ax.set_ylabel("CDF")
        ax.legend()
        paths.append(_save(fig, out / f"{name}.png"))
        plt.close(fig)
    if "loop_census" in tables and tables["loop_census"]:
        rows = tables["loop_census"]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for d in sorted({r["delta"] for r in rows}, reverse=True):
            k = [r["K"] for r in rows if r["delta"] == d]
            ax.hist(k, bins=30, histtype="step", label=f"mesh {d:g}")
        ax.set_xlabel("steps K")
        ax.legend()
        paths.append(_save(fig, out / "loop_census.png"))
        plt.close(fig)
    if "mushroom" in tables and tables["mushroom"]:
        rows = tables["mushroom"]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.errorbar([r["delta"] for r in rows], [r["frequency"] for r in rows], yerr=[r["stderr"] for r in rows],
                    marker="o", capsize=3)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("mesh")
        ax.set_ylabel("mushroom frequency")
        paths.append(_save(fig, out / "mushroom.png"))
        plt.close(fig)
    if "conformal_diameters" in tables and tables["conformal_diameters"]:
        rows = tables["conformal_diameters"]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        x = np.arange(len(rows))
        ax.bar(x - 0.2, [r["mapped"] for r in rows], 0.4, label="mapped from disk")
        ax.bar(x + 0.2, [r["direct"] for r in rows], 0.4, label="square")
        ax.set_xticks(x, [f"{r['band_lo']:g}-{r['band_hi']:g}" for r in rows])
        ax.set_xlabel("loop diameter")
        ax.legend()
        paths.append(_save(fig, out / "conformal_diameters.png"))
        plt.close(fig)
    return paths
