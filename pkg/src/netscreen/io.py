"""File formats: headered CSVs for nodes and edges, JSON for everything else.

nodes.csv   node_id,y,x1,...,xp with integer level codes (floats allowed on
            read; they are quantile-binned on request)
edges.csv   src,dst ordered pairs, 1-based node ids
metadata.json   level counts, names, composite column map, generator echo

All files are UTF-8 and written deterministically: same content in, same
bytes out.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dataset import NodeDataset, validate
from .errors import ValidationError
from .screening import discretize


def write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_dataset(out_dir, dataset: NodeDataset, extras: dict | None = None,
                  generator: dict | None = None) -> dict:
    """Write nodes.csv, edges.csv, metadata.json (and continuous.csv when
    raw continuous columns are supplied). Returns the path map."""
    dataset = validate(dataset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"nodes": out / "nodes.csv", "edges": out / "edges.csv",
             "metadata": out / "metadata.json"}

    header = "node_id,y," + ",".join(f"x{j}" for j in range(1, dataset.p + 1))
    table = np.column_stack([
        np.arange(1, dataset.n + 1, dtype=np.int64),
        dataset.y.astype(np.int64),
        dataset.x.astype(np.int64)])
    np.savetxt(paths["nodes"], table, fmt="%d", delimiter=",",
               header=header, comments="")
    np.savetxt(paths["edges"], dataset.edges, fmt="%d", delimiter=",",
               header="src,dst", comments="")

    meta = {
        "format": 1,
        "n": dataset.n, "p": dataset.p,
        "r_levels": int(dataset.r_levels),
        "k_levels": [int(k) for k in dataset.k_levels],
        "feature_names": (list(dataset.feature_names)
                          if dataset.feature_names else None),
        "composite_pairs": {str(col): list(pair) for col, pair
                            in sorted(dataset.composite_pairs.items())},
    }
    if generator is not None:
        meta["generator"] = generator
    write_json(paths["metadata"], meta)

    raw = (extras or {}).get("raw") or {}
    if raw:
        cols = sorted(raw)
        mat = np.column_stack(
            [np.arange(1, dataset.n + 1, dtype=np.float64)]
            + [np.asarray(raw[j], dtype=np.float64) for j in cols])
        np.savetxt(out / "continuous.csv", mat,
                   fmt=["%d"] + ["%.17g"] * len(cols), delimiter=",",
                   header="node_id," + ",".join(f"x{j}" for j in cols),
                   comments="")
        paths["continuous"] = out / "continuous.csv"
    return paths


def _read_csv_columns(path):
    """(header, columns) where each column is int64, float64, or a mapped
    string column. Returns (header, list of arrays, level_maps dict)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows) < 2:
        raise ValidationError(f"{path}: need a header row and data rows")
    header, data = rows[0], rows[1:]
    width = len(header)
    for i, row in enumerate(data):
        if len(row) != width:
            raise ValidationError(
                f"{path}: row {i + 2} has {len(row)} fields, header has {width}")
    columns, level_maps = [], {}
    for c, name in enumerate(header):
        values = [row[c].strip() for row in data]
        try:
            columns.append(np.asarray([int(v) for v in values], np.int64))
            continue
        except ValueError:
            pass
        try:
            columns.append(np.asarray([float(v) for v in values], np.float64))
            continue
        except ValueError:
            pass
        levels = sorted(set(values))
        code = {v: i + 1 for i, v in enumerate(levels)}
        level_maps[name] = code
        columns.append(np.asarray([code[v] for v in values], np.int64))
    return header, columns, level_maps


def read_dataset(nodes_path, edges_path, metadata_path=None,
                 bins: int | None = None,
                 bin_scheme: str = "normal_quantile"):
    """(validated NodeDataset, info dict).

    Non-integer feature columns are quantile-binned into `bins` levels
    (error if bins is None). Non-numeric label columns are mapped to level
    codes in sorted order; the maps land in info["level_maps"]. Metadata,
    when given, supplies declared level counts, names, and composite pairs.
    """
    header, columns, level_maps = _read_csv_columns(nodes_path)
    if len(header) < 2 or header[0] != "node_id" or header[1] != "y":
        raise ValidationError(
            f"{nodes_path}: header must start with node_id,y")
    info = {"level_maps": level_maps, "binned_columns": []}
    y = columns[1]
    if not np.issubdtype(y.dtype, np.integer):
        raise ValidationError("response column must be integer or labeled")
    x_cols = []
    for c in range(2, len(header)):
        col = columns[c]
        if np.issubdtype(col.dtype, np.floating):
            if np.allclose(col, np.round(col)):
                col = np.round(col).astype(np.int64)
            elif bins is None:
                raise ValidationError(
                    f"column {header[c]} is continuous; pass a bin count")
            else:
                col = discretize(col, bins, bin_scheme).astype(np.int64)
                info["binned_columns"].append(header[c])
        x_cols.append(col)
    x = (np.column_stack(x_cols) if x_cols
         else np.empty((y.size, 0), dtype=np.int64))

    eheader, ecols, _ = _read_edges(edges_path)
    edges = (np.column_stack(ecols) if ecols[0].size
             else np.empty((0, 2), dtype=np.int64))

    r_levels = k_levels = names = None
    composite = {}
    if metadata_path is not None:
        meta = read_json(metadata_path)
        r_levels = meta.get("r_levels")
        k_levels = meta.get("k_levels")
        names = meta.get("feature_names")
        composite = {int(c): tuple(pair) for c, pair
                     in meta.get("composite_pairs", {}).items()}
        info["metadata"] = meta
    dataset = validate(NodeDataset(y, x, edges, names, r_levels, k_levels,
                                   composite))
    return dataset, info


def _read_edges(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty edge file; a header is required")
    header, data = rows[0], rows[1:]
    if len(header) < 2:
        raise ValidationError(f"{path}: header must name src,dst")
    try:
        src = np.asarray([int(r[0]) for r in data], np.int64)
        dst = np.asarray([int(r[1]) for r in data], np.int64)
    except (ValueError, IndexError) as err:
        raise ValidationError(f"{path}: edge rows must be integer pairs") \
            from err
    return header, [src, dst], None


def experiment_long_csv(report) -> str:
    """Per-replication rows for external plotting, one line per method."""
    lines = ["rep,method,d_hat,degenerate,selected,acc,auc"]

    def fmt(v):
        return "" if v is None else (repr(v) if isinstance(v, float) else str(v))

    for rec in report.replications:
        for method in sorted(k for k in rec
                             if isinstance(rec[k], dict) and "selected" in rec[k]):
            e = rec[method]
            lines.append(",".join([
                str(rec["rep"]), method, str(e["d_hat"]),
                str(int(e["degenerate"])), "|".join(e["selected"]),
                fmt(e.get("acc")), fmt(e.get("auc"))]))
        for kind, e in (rec.get("true_fit") or {}).items():
            lines.append(",".join([
                str(rec["rep"]), f"true_{kind}", "", "", "",
                fmt(e.get("acc")), fmt(e.get("auc"))]))
    return "\n".join(lines) + "\n"


def experiment_table(report) -> str:
    """Human-readable summary in the screening-table layout."""
    out = [f"{report.name} ({report.model})  n={report.n} p={report.p} "
           f"M={report.m_reps} seed={report.seed}", ""]
    cp_keys = None
    for method, m in report.metrics.items():
        if cp_keys is None:
            cp_keys = list(m["cp"])
            out.append("method  " + "CMF".rjust(6) + "IMF".rjust(7)
                       + "".join(f"CP({k})".rjust(10) for k in cp_keys)
                       + "Acc".rjust(8))
        row = (f"{method:<8}" + f"{m['cmf']:6.2f}" + f"{m['imf']:7.2f}"
               + "".join(f"{m['cp'][k]:10.2f}" for k in cp_keys))
        if "acc_mean" in m:
            row += f"{m['acc_mean']:8.3f}"
        out.append(row)
    if report.true_fit:
        parts = [f"{kind} {e['acc_mean']:.3f}"
                 for kind, e in report.true_fit.items()]
        out.append("")
        out.append("accuracy with the true feature sets: " + "  ".join(parts))
    return "\n".join(out) + "\n"
