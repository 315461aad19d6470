"""Result bundles: CSV tables, JSON manifest, optional SVG plots."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class EmitError(RuntimeError):
    pass


@dataclass
class Table:
    name: str
    columns: dict                  # ordered name -> 1D array
    plot: str = "line"             # line | heatmap | none
    grid: tuple | None = None      # (row axis, col axis, value column) for heat maps


@dataclass
class Results:
    task: str
    tables: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _fmt(x: float) -> str:
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def write_csv(path: Path, columns: dict) -> None:
    names = list(columns)
    cols = [np.asarray(columns[n], dtype=float).ravel() for n in names]
    n = cols[0].size if cols else 0
    if any(c.size != n for c in cols):
        raise EmitError(f"{path}: columns differ in length")
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc


def _svg(path: Path, table: Table, kind: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "probespec"
    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(table.columns)
    if kind == "heatmap":
        if table.grid is None:
            raise EmitError(f"heat map requested for {table.name}, which is not 2D data")
        rows, cols, val = table.grid
        r = np.unique(table.columns[rows])
        c = np.unique(table.columns[cols])
        z = np.asarray(table.columns[val], dtype=float).reshape(r.size, c.size)
        mesh = ax.pcolormesh(c, r, z, shading="nearest")
        fig.colorbar(mesh, ax=ax, label=val)
        ax.set_xlabel(cols)
        ax.set_ylabel(rows)
    else:
        x = np.asarray(table.columns[names[0]], dtype=float)
        for n in names[1:]:
            ax.plot(x, np.asarray(table.columns[n], dtype=float), ".", ms=3, label=n)
        ax.set_xlabel(names[0])
        ax.legend(fontsize=7)
    ax.set_title(table.name)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "probespec"})
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit(results: Results, formats, directory, manifest: dict, plot: str = "auto") -> dict:
    """Write the bundle; returns the manifest that was written (if json requested)."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise EmitError(f"cannot create {out}: {exc}") from exc
    formats = list(dict.fromkeys(formats))
    files = {}
    for table in results.tables:
        if "csv" in formats:
            p = out / f"{table.name}.csv"
            write_csv(p, table.columns)
            files[p.name] = sha256_file(p)
        if "svg" in formats:
            kind = table.plot if plot == "auto" else plot
            if kind == "none":
                continue
            p = out / f"{table.name}.svg"
            _svg(p, table, kind)
            files[p.name] = sha256_file(p)
    man = {**manifest, "task": results.task, "summary": results.summary,
           "warnings": list(results.warnings), "files": files}
    if "json" in formats:
        p = out / "manifest.json"
        try:
            p.write_text(json.dumps(man, indent=2, sort_keys=True, default=_jsonable) + "\n")
        except OSError as exc:
            raise EmitError(f"cannot write {p}: {exc}") from exc
    return man


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")
