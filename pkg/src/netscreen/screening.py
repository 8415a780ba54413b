"""Feature screening: rank columns by the network statistic and cut the list.

Ranking scale. When every screened column has the same level count the raw
statistic values are compared directly. With mixed level counts the raw
values are not comparable (wider columns have larger null means), so columns
are ranked by the upper tail of the combined chi-square reference instead:
score = -log10 of the joint tail probability, ties broken by the larger raw
statistic, then by the smaller column index. A permutation ranking is
available for small column sets via perms > 0.

Cutoffs. "max_ratio" walks the sorted scores and keeps the prefix in front
of the largest consecutive ratio; "hard" keeps a fixed count, by default
floor(n / log n); "pvalue" keeps features whose tail probability is at most
alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import chdtrc, ndtri

from .counts import tally_marginals
from .dataset import FeatureSet, NodeDataset, validate
from .errors import ValidationError
from .plr import batch_statistics, degrees_of_freedom, permutation_pvalue

DEGENERATE_TOL = 1e-8   # top score below this means nothing separates
RATIO_EPS = 1e-12       # relative floor for max-ratio denominators
P_FLOOR = 1e-300        # tail probabilities are clipped here before log10
EXPANSION_LIMIT = 200_000  # refuse interaction expansions beyond this width


@dataclass(frozen=True)
class ScreeningResult:
    """Ranked screen of one dataset.

    Per-column arrays are aligned with feature_keys (the canonical "j" or
    "j&k" key of each screened column). ranking holds screened column ids,
    best first; selected is the leading d_hat of them as a FeatureSet.
    c_star_hat sits between the last kept and the first dropped score when
    those differ.
    """

    method: str
    feature_keys: tuple[str, ...]
    scores: np.ndarray
    ranking: np.ndarray
    d_hat: int
    c_star_hat: float
    selected: FeatureSet
    rank_by: str
    cutoff: str
    degenerate: bool
    seed: int
    lam: np.ndarray | None = None
    lam_self: np.ndarray | None = None
    lam_network: np.ndarray | None = None
    df_self: np.ndarray | None = None
    df_network: np.ndarray | None = None
    p_value: np.ndarray | None = None
    p_perm: np.ndarray | None = None
    stage1: dict | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        def arr(a, cast=float):
            return None if a is None else [cast(v) for v in a]

        return {
            "method": self.method,
            "feature_keys": list(self.feature_keys),
            "scores": arr(self.scores),
            "ranking": arr(self.ranking, int),
            "d_hat": int(self.d_hat),
            "c_star_hat": float(self.c_star_hat),
            "selected": list(self.selected.keys()),
            "rank_by": self.rank_by,
            "cutoff": self.cutoff,
            "degenerate": bool(self.degenerate),
            "seed": int(self.seed),
            "lam": arr(self.lam),
            "lam_self": arr(self.lam_self),
            "lam_network": arr(self.lam_network),
            "df_self": arr(self.df_self, int),
            "df_network": arr(self.df_network, int),
            "p_value": arr(self.p_value),
            "p_perm": arr(self.p_perm),
        }


def hard_cutoff(n: int, mode: str = "n_over_log_n") -> int:
    """Model-size budget from the node count: floor(n/log n), or n - 1."""
    if n < 2:
        raise ValidationError("hard cutoff needs at least 2 nodes")
    if mode == "n_over_log_n":
        return int(math.floor(n / math.log(n)))
    if mode == "n_minus_1":
        return n - 1
    raise ValidationError(f"unknown hard cutoff mode {mode!r}")


def max_ratio_cutoff(sorted_scores, search_cap: int | None = None) -> int:
    """Keep the prefix in front of the largest ratio of consecutive scores.

    sorted_scores must be non-increasing with a positive leading value.
    Ratio j compares position j to j+1 (1-based); a denominator at or below
    RATIO_EPS times the top score counts as an infinite ratio. The earliest
    maximal ratio wins. search_cap limits how deep the ratios are scanned.
    """
    s = np.asarray(sorted_scores, dtype=np.float64)
    if s.size < 2:
        raise ValidationError("max-ratio cutoff needs at least 2 scores")
    if np.any(s[:-1] < s[1:] - 1e-12):
        raise ValidationError("scores must be sorted in decreasing order")
    if not s[0] > 0:
        raise ValidationError("top score must be positive")
    m = s.size - 1
    if search_cap is not None:
        m = max(1, min(m, int(search_cap)))
    num, den = s[:m], s[1:m + 1]
    ratios = np.full(m, np.inf)
    ok = den > RATIO_EPS * s[0]
    ratios[ok] = num[ok] / den[ok]
    return int(np.argmax(ratios)) + 1


def discretize(values, k: int, scheme: str = "normal_quantile") -> np.ndarray:
    """Bin continuous values into levels 1..k, boundaries going to the lower bin.

    normal_quantile cuts at standard normal quantiles i/k; empirical_quantile
    cuts at the sample quantiles of the values themselves.
    """
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValidationError("cannot discretize non-finite values")
    if k < 2:
        raise ValidationError("need at least 2 bins")
    qs = np.arange(1, k) / k
    if scheme == "normal_quantile":
        edges = ndtri(qs)
    elif scheme == "empirical_quantile":
        edges = np.quantile(v, qs)
    else:
        raise ValidationError(f"unknown discretization scheme {scheme!r}")
    return (np.searchsorted(edges, v, side="left") + 1).astype(np.int32)


def interaction_expand(dataset: NodeDataset, pairs) -> NodeDataset:
    """Append one composite column per (j, k) pair, coding levels jointly.

    The composite of columns with widths K_j and K_k has width K_j * K_k and
    level (x_j - 1) * K_k + x_k. Pairs must name original (non-composite)
    columns with j < k and no duplicates. composite_pairs on the result maps
    each new column id back to its source pair.
    """
    dataset = validate(dataset)
    pairs = [(int(a), int(b)) for a, b in pairs]
    if not pairs:
        return dataset
    if len(set(pairs)) != len(pairs):
        raise ValidationError("duplicate interaction pair")
    p = dataset.p
    if p + len(pairs) > EXPANSION_LIMIT:
        raise ValidationError(
            f"expansion to {p + len(pairs)} columns exceeds the "
            f"{EXPANSION_LIMIT} limit")
    for a, b in pairs:
        if not (1 <= a < b <= p):
            raise ValidationError(f"interaction pair ({a},{b}) needs 1 <= j < k <= p")
        if a in dataset.composite_pairs or b in dataset.composite_pairs:
            raise ValidationError(
                f"pair ({a},{b}) references a composite column")
    k_levels = dataset.k_levels
    new_x = np.empty((dataset.n, len(pairs)), dtype=np.int32, order="F")
    new_k = np.empty(len(pairs), dtype=np.int64)
    composite = dict(dataset.composite_pairs)
    names = list(dataset.feature_names) if dataset.feature_names else None
    for i, (a, b) in enumerate(pairs):
        kb = int(k_levels[b - 1])
        new_x[:, i] = (dataset.column(a) - 1) * kb + dataset.column(b)
        new_k[i] = int(k_levels[a - 1]) * kb
        composite[p + i + 1] = (a, b)
        if names is not None:
            names.append(f"{names[a - 1]}&{names[b - 1]}")
    return validate(NodeDataset(
        dataset.y, np.concatenate([dataset.x, new_x], axis=1), dataset.edges,
        names, dataset.r_levels, np.concatenate([k_levels, new_k]), composite))


def feature_key(dataset: NodeDataset, j: int) -> str:
    """Canonical key of column j: "a&b" for composites, else "j"."""
    if j in dataset.composite_pairs:
        a, b = dataset.composite_pairs[j]
        return f"{a}&{b}"
    return str(j)


def _pearson_batch(dataset: NodeDataset, cols0: np.ndarray) -> np.ndarray:
    """Pearson chi-square of response against each column, network ignored."""
    r = dataset.r_levels
    n_y = np.bincount(dataset._y0, minlength=r).astype(np.float64)
    out = np.zeros(cols0.size)
    widths = dataset.k_levels[cols0]
    for k in np.unique(widths):
        k = int(k)
        sel = np.flatnonzero(widths == k)
        for lo in range(0, sel.size, 64):
            part = sel[lo:lo + 64]
            xb0 = dataset.x[:, cols0[part]].astype(np.int64) - 1
            nyj = tally_marginals(dataset._y0, xb0, r, k).astype(np.float64)
            nj = nyj.sum(axis=1)
            expected = n_y[None, :, None] * nj[:, None, :] / dataset.n
            dev = np.zeros(nyj.shape)
            np.divide((nyj - expected) ** 2, expected, out=dev,
                      where=expected > 0)
            out[part] = dev.sum(axis=(1, 2))
    return out


def _ranking(scores, lam):
    # primary: score desc; then raw statistic desc; then column position asc
    idx = np.arange(scores.size)
    return np.lexsort((idx, -np.asarray(lam), -np.asarray(scores)))


def _c_star(sorted_scores: np.ndarray, d: int) -> float:
    if d == 0:
        return float(sorted_scores[0]) + 1.0 if sorted_scores.size else 1.0
    if d >= sorted_scores.size:
        return float(sorted_scores[-1]) - 1.0
    return float(0.5 * (sorted_scores[d - 1] + sorted_scores[d]))


def _apply_cutoff(sorted_scores, p_sorted, cutoff, d, alpha, search_cap, n):
    """(d_hat, degenerate flag, cutoff description)."""
    if cutoff == "max_ratio":
        if sorted_scores[0] < DEGENERATE_TOL:
            return 0, True, "max_ratio"
        if sorted_scores.size == 1:
            return 1, False, "max_ratio"
        return (max_ratio_cutoff(sorted_scores, search_cap), False,
                "max_ratio")
    if cutoff == "hard":
        want = hard_cutoff(n) if d is None else int(d)
        if want < 1:
            raise ValidationError("hard cutoff must keep at least 1 feature")
        return min(want, sorted_scores.size), False, f"hard:{want}"
    if cutoff == "pvalue":
        if p_sorted is None:
            raise ValidationError("p-value cutoff needs tail probabilities")
        return (int(np.sum(p_sorted <= alpha)), False, f"pvalue:{alpha:g}")
    raise ValidationError(f"unknown cutoff {cutoff!r}")


def _screen_plr(dataset, cols, cutoff, d, alpha, perms, seed, search_cap):
    cols = np.asarray(cols, dtype=np.int64)
    lam, lam_self, lam_net = batch_statistics(dataset, cols)
    widths = dataset.k_levels[cols - 1]
    df_pairs = [degrees_of_freedom(dataset.r_levels, int(k)) for k in widths]
    df_self = np.asarray([a for a, _ in df_pairs], dtype=np.int64)
    df_net = np.asarray([b for _, b in df_pairs], dtype=np.int64)
    with np.errstate(invalid="ignore"):
        p_asym = chdtrc(df_self + df_net,
                        np.maximum(2.0 * dataset.n * lam, 0.0))
    p_asym = np.where(df_self + df_net == 0, 1.0, p_asym)

    p_perm = None
    if perms > 0:
        p_perm = np.empty(cols.size)
        for i, j in enumerate(cols):
            p_perm[i], _ = permutation_pvalue(dataset, int(j), perms, seed)
        scores = -np.log10(np.maximum(p_perm, P_FLOOR))
        rank_by, p_used = "permutation", p_perm
    elif np.unique(widths).size <= 1:
        scores, rank_by, p_used = lam, "lambda", p_asym
    else:
        scores = -np.log10(np.maximum(p_asym, P_FLOOR))
        rank_by, p_used = "pvalue", p_asym

    order = _ranking(scores, lam)
    sorted_scores = scores[order]
    d_hat, degenerate, cut_desc = _apply_cutoff(
        sorted_scores, p_used[order], cutoff, d, alpha, search_cap, dataset.n)
    kept = cols[order[:d_hat]]
    selected = FeatureSet.from_keys(
        [feature_key(dataset, int(j)) for j in kept])
    return ScreeningResult(
        method="plr",
        feature_keys=tuple(feature_key(dataset, int(j)) for j in cols),
        scores=scores,
        ranking=cols[order],
        d_hat=int(d_hat),
        c_star_hat=_c_star(sorted_scores, d_hat),
        selected=selected,
        rank_by=rank_by,
        cutoff=cut_desc,
        degenerate=degenerate,
        seed=seed,
        lam=lam, lam_self=lam_self, lam_network=lam_net,
        df_self=df_self, df_network=df_net,
        p_value=p_asym, p_perm=p_perm)


def _candidate_pairs(dataset, interactions, top_m, columns):
    if columns is not None:
        raise ValidationError(
            "interaction expansion screens every column; drop columns=")
    if interactions == "all":
        return list(combinations(range(1, dataset.p + 1), 2))
    # stage 1: rank main effects, pair up the leaders
    lam, _, _ = batch_statistics(dataset)
    widths = dataset.k_levels
    if np.unique(widths).size <= 1:
        scores = lam
    else:
        df = np.asarray([sum(degrees_of_freedom(dataset.r_levels, int(k)))
                         for k in widths])
        with np.errstate(invalid="ignore"):
            p_asym = chdtrc(df, np.maximum(2.0 * dataset.n * lam, 0.0))
        scores = -np.log10(np.maximum(np.where(df == 0, 1.0, p_asym), P_FLOOR))
    order = _ranking(scores, lam)
    m = min(top_m if top_m is not None else hard_cutoff(dataset.n), dataset.p)
    leaders = sorted(int(j) + 1 for j in order[:m])
    return list(combinations(leaders, 2))


def plr_sis(dataset: NodeDataset, *, cutoff: str = "max_ratio",
            d: int | None = None, alpha: float = 0.05, perms: int = 0,
            seed: int = 0, interactions: str = "none",
            top_m: int | None = None, search_cap: int | None = None,
            columns=None) -> ScreeningResult:
    """Screen features by the network pseudo-likelihood statistic.

    interactions="top" first ranks main effects, then adds composite columns
    for every pair among the leading top_m (default floor(n/log n)) and
    screens mains and composites jointly; "all" expands every pair. perms > 0
    replaces the asymptotic ranking with permutation tail probabilities
    (costly; meant for small column sets). columns restricts the screen to a
    subset of 1-based column ids.
    """
    dataset = validate(dataset)
    if interactions not in ("none", "top", "all"):
        raise ValidationError(f"unknown interactions mode {interactions!r}")
    stage1 = None
    if interactions != "none":
        pairs = _candidate_pairs(dataset, interactions, top_m, columns)
        stage1 = {"pairs_screened": len(pairs)}
        dataset = interaction_expand(dataset, pairs)
    if columns is None:
        columns = range(1, dataset.p + 1)
    result = _screen_plr(dataset, columns, cutoff, d, alpha, perms, seed,
                         search_cap)
    if stage1 is not None:
        object.__setattr__(result, "stage1", stage1)
    return result


def pc_sis(dataset: NodeDataset, *, cutoff: str = "max_ratio",
           d: int | None = None, alpha: float = 0.05, seed: int = 0,
           interactions: str = "none", top_m: int | None = None,
           search_cap: int | None = None, columns=None) -> ScreeningResult:
    """Baseline screen: Pearson chi-square of response against each column.

    Ignores the adjacency entirely. Options mirror plr_sis minus the
    permutation ranking.
    """
    dataset = validate(dataset)
    if interactions not in ("none", "top", "all"):
        raise ValidationError(f"unknown interactions mode {interactions!r}")
    if interactions != "none":
        if columns is not None:
            raise ValidationError(
                "interaction expansion screens every column; drop columns=")
        if interactions == "all":
            pairs = list(combinations(range(1, dataset.p + 1), 2))
        else:
            chi = _pearson_batch(dataset,
                                 np.arange(dataset.p, dtype=np.int64))
            widths = dataset.k_levels
            if np.unique(widths).size <= 1:
                scores = chi
            else:
                df = (dataset.r_levels - 1) * (widths - 1)
                with np.errstate(invalid="ignore"):
                    p_asym = chdtrc(df, chi)
                scores = -np.log10(
                    np.maximum(np.where(df == 0, 1.0, p_asym), P_FLOOR))
            order = _ranking(scores, chi)
            m = min(top_m if top_m is not None else hard_cutoff(dataset.n),
                    dataset.p)
            leaders = sorted(int(j) + 1 for j in order[:m])
            pairs = list(combinations(leaders, 2))
        dataset = interaction_expand(dataset, pairs)

    if columns is None:
        columns = range(1, dataset.p + 1)
    cols = np.asarray(list(columns), dtype=np.int64)
    if cols.size and (cols.min() < 1 or cols.max() > dataset.p):
        raise IndexError(f"column index outside 1..{dataset.p}")
    chi = _pearson_batch(dataset, cols - 1)
    widths = dataset.k_levels[cols - 1]
    df = (dataset.r_levels - 1) * (widths - 1)
    with np.errstate(invalid="ignore"):
        p_asym = chdtrc(df, chi)
    p_asym = np.where(df == 0, 1.0, p_asym)
    if np.unique(widths).size <= 1:
        scores, rank_by = chi, "chi2"
    else:
        scores, rank_by = -np.log10(np.maximum(p_asym, P_FLOOR)), "pvalue"
    order = _ranking(scores, chi)
    sorted_scores = scores[order]
    d_hat, degenerate, cut_desc = _apply_cutoff(
        sorted_scores, p_asym[order], cutoff, d, alpha, search_cap, dataset.n)
    kept = cols[order[:d_hat]]
    return ScreeningResult(
        method="pc",
        feature_keys=tuple(feature_key(dataset, int(j)) for j in cols),
        scores=scores,
        ranking=cols[order],
        d_hat=int(d_hat),
        c_star_hat=_c_star(sorted_scores, d_hat),
        selected=FeatureSet.from_keys(
            [feature_key(dataset, int(j)) for j in kept]),
        rank_by=rank_by,
        cutoff=cut_desc,
        degenerate=degenerate,
        seed=seed,
        lam=chi,
        df_self=df.astype(np.int64), p_value=p_asym)
