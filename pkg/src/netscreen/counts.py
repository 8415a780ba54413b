"""Count tables for response/feature/adjacency tallies.

Every statistic in the package is a function of these tables. Pair counts
come from a closed-form product identity, never from iterating node pairs,
so the per-feature cost is O(|E| + n + R^2 K_j^2). All tables use 64-bit
integers (ordered-pair totals reach n(n-1), which overflows 32 bits beyond
n of about 65k). Table axes are 0-based: entry [r-1, k-1] holds the tally
of response level r with feature level k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import NodeDataset, validate


@dataclass(frozen=True)
class CountsBundle:
    """All tallies needed for one feature's statistic.

    n_y[r]: nodes at response level r+1; n_j[k]: nodes at feature level k+1;
    n_yj[r, k]: joint node tally; n_pairs_y / n_pairs_yj: ordered node pairs
    stratified by response (and feature) levels of both endpoints;
    n_edges_y / n_edges_yj: linked ordered pairs, same stratification.
    """

    n: int
    n_y: np.ndarray
    n_j: np.ndarray
    n_yj: np.ndarray
    n_pairs_y: np.ndarray
    n_pairs_yj: np.ndarray
    n_edges_y: np.ndarray
    n_edges_yj: np.ndarray


def marginal_counts(dataset: NodeDataset, j: int):
    """Exact tallies (n_y, n_j, n_yj) for column j (1-based)."""
    dataset = validate(dataset)
    if not 1 <= j <= dataset.p:
        raise IndexError(f"column {j} outside 1..{dataset.p}")
    r = dataset.r_levels
    k = int(dataset.k_levels[j - 1])
    x0 = dataset.column(j).astype(np.int64) - 1
    n_yj = np.bincount(dataset._y0 * k + x0, minlength=r * k).reshape(r, k)
    return n_yj.sum(axis=1), n_yj.sum(axis=0), n_yj


def pair_counts(n_yj: np.ndarray):
    """Ordered-pair tables (n_pairs_y, n_pairs_yj) from the joint marginals.

    n_pairs_yj[r1, r2, k1, k2] = n_yj[r1, k1] * n_yj[r2, k2], minus
    n_yj[r1, k1] on the diagonal cells (r1, k1) = (r2, k2) because a node
    cannot pair with itself.
    """
    n_yj = np.asarray(n_yj, dtype=np.int64)
    r, k = n_yj.shape
    n_y = n_yj.sum(axis=1)
    n_pairs_y = np.outer(n_y, n_y) - np.diag(n_y)
    n_pairs_yj = np.einsum("rk,sl->rskl", n_yj, n_yj)
    rr = np.repeat(np.arange(r), k)
    kk = np.tile(np.arange(k), r)
    n_pairs_yj[rr, rr, kk, kk] -= n_yj[rr, kk]
    return n_pairs_y, n_pairs_yj


def edge_counts(dataset: NodeDataset, j: int):
    """Linked-pair tables (n_edges_y, n_edges_yj) in one pass over edges."""
    dataset = validate(dataset)
    if not 1 <= j <= dataset.p:
        raise IndexError(f"column {j} outside 1..{dataset.p}")
    r = dataset.r_levels
    k = int(dataset.k_levels[j - 1])
    ys = dataset._y0[dataset._src0]
    yt = dataset._y0[dataset._dst0]
    n_edges_y = np.bincount(ys * r + yt, minlength=r * r).reshape(r, r)
    col = dataset.column(j).astype(np.int64) - 1
    code = ((ys * r + yt) * k + col[dataset._src0]) * k + col[dataset._dst0]
    n_edges_yj = np.bincount(code, minlength=r * r * k * k).reshape(r, r, k, k)
    return n_edges_y, n_edges_yj


def counts_bundle(dataset: NodeDataset, j: int) -> CountsBundle:
    """All tables of one feature in a single object."""
    n_y, n_j, n_yj = marginal_counts(dataset, j)
    n_pairs_y, n_pairs_yj = pair_counts(n_yj)
    n_edges_y, n_edges_yj = edge_counts(dataset, j)
    return CountsBundle(dataset.n, n_y, n_j, n_yj, n_pairs_y, n_pairs_yj,
                        n_edges_y, n_edges_yj)


# ---- blocked tallies over groups of same-width columns ----
# These feed the vectorized screening path: one bincount covers a whole block
# of columns, with per-column offsets into a flat tally vector. xb0 holds
# 0-based level codes, one column per feature in the block.

def tally_marginals(y0: np.ndarray, xb0: np.ndarray, r: int, k: int) -> np.ndarray:
    """Joint (response, level) tallies, shape (B, R, k), from 0-based codes."""
    b = xb0.shape[1]
    codes = y0[:, None] * k + xb0
    codes = codes + np.arange(b, dtype=np.int64) * (r * k)
    flat = np.bincount(codes.ravel(), minlength=b * r * k)
    return flat.reshape(b, r, k)


def tally_edges(y0: np.ndarray, src0: np.ndarray, dst0: np.ndarray,
                xb0: np.ndarray, r: int, k: int) -> np.ndarray:
    """Linked-pair tallies, shape (B, R, R, k, k), from 0-based codes."""
    b = xb0.shape[1]
    base = (y0[src0] * r + y0[dst0]) * (k * k)
    codes = base[:, None] + xb0[src0] * k + xb0[dst0]
    cells = r * r * k * k
    codes = codes + np.arange(b, dtype=np.int64) * cells
    flat = np.bincount(codes.ravel(), minlength=b * cells)
    return flat.reshape(b, r, r, k, k)


def block_pair_tables(n_yj_block: np.ndarray) -> np.ndarray:
    """Ordered-pair tables for a block, from its joint marginals."""
    b, r, k = n_yj_block.shape
    out = np.einsum("brk,bsl->brskl", n_yj_block, n_yj_block)
    rr = np.repeat(np.arange(r), k)
    kk = np.tile(np.arange(k), r)
    out[:, rr, rr, kk, kk] -= n_yj_block[:, rr, kk]
    return out


def response_pair_tables(dataset: NodeDataset):
    """(n_y, n_pairs_y, n_edges_y): the feature-free tables, computed once."""
    r = dataset.r_levels
    n_y = np.bincount(dataset._y0, minlength=r)
    n_pairs_y = np.outer(n_y, n_y) - np.diag(n_y)
    ys = dataset._y0[dataset._src0]
    yt = dataset._y0[dataset._dst0]
    n_edges_y = np.bincount(ys * r + yt, minlength=r * r).reshape(r, r)
    return n_y, n_pairs_y, n_edges_y
