"""Exact integrated complete-data likelihood and incremental deltas.

Every quantity is in log space. The per-cell factorial constant is part of
reported totals but never of deltas, since it does not depend on labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import (
    AXES,
    BlockStats,
    ContractError,
    CountTensor,
    Hyperparams,
    TriPartition,
    axis_index,
    block_stats,
)

NEW = -1  # target sentinel: move the element into a fresh singleton cluster


@dataclass(frozen=True)
class IclValue:
    total: float
    likelihood_term: float
    prior_term: float

    def as_dict(self) -> dict:
        return {"total": self.total, "likelihood_term": self.likelihood_term, "prior_term": self.prior_term}


def log_gp_block(S, R, h: Hyperparams):
    """Log of the Gamma-Poisson integrated likelihood of one block (or an
    array of blocks), without the within-block factorials."""
    S = np.asarray(S, dtype=float)
    R = np.asarray(R, dtype=float)
    if np.any(R < 1):
        raise ContractError("block capacity R must be >= 1")
    if np.any(S < 0):
        raise ContractError("block count S must be >= 0")
    a, b, dt = h.a, h.b, h.delta_t
    out = a * math.log(b) - math.lgamma(a) + S * math.log(dt) + gammaln(S + a) - (S + a) * np.log(dt * R + b)
    return float(out) if out.ndim == 0 else out


def _gp_terms(S, R, h: Hyperparams):
    # unchecked variant for the hot loops; R >= 1 guaranteed by callers
    a, b, dt = h.a, h.b, h.delta_t
    return a * math.log(b) - math.lgamma(a) + S * math.log(dt) + gammaln(S + a) - (S + a) * np.log(dt * R + b)


def log_dirichlet_multinomial(sizes, conc: float) -> float:
    sizes = np.asarray(sizes, dtype=float).ravel()
    if sizes.size == 0:
        raise ContractError("sizes must be non-empty")
    if np.any(sizes < 1):
        raise ContractError("cluster sizes must be >= 1")
    if not conc > 0:
        raise ContractError("concentration must be > 0")
    q = len(sizes)
    return float(
        math.lgamma(conc * q) - q * math.lgamma(conc) + gammaln(sizes + conc).sum() - math.lgamma(sizes.sum() + conc * q)
    )


def icl_from_stats(stats: BlockStats, h: Hyperparams, log_factorial_constant: float) -> IclValue:
    lik = float(np.sum(_gp_terms(stats.S, stats.R, h))) - log_factorial_constant
    prior = sum(log_dirichlet_multinomial(stats.sizes[ax], h.concentration(ax)) for ax in AXES)
    return IclValue(lik + prior, lik, prior)


def icl_exact(tensor: CountTensor, part: TriPartition, h: Hyperparams) -> IclValue:
    return icl_from_stats(block_stats(tensor, part), h, tensor.log_factorial_constant)


def _oriented(stats: BlockStats, axis: int):
    """View of S with ``axis`` first, plus the (Q1, Q2) capacity of the other axes."""
    o1, o2 = (ax for ax in AXES if ax != axis)
    Sm = np.moveaxis(stats.S, axis, 0)
    cap = np.outer(stats.sizes[o1], stats.sizes[o2])
    return Sm, cap


def _slice_sum(S, n, cap, h):
    n = np.asarray(n)
    return _gp_terms(S, n[..., None, None] * cap, h).sum(axis=(-2, -1))


def _count_term(q: int, total: int, conc: float) -> float:
    # part of the Dirichlet-multinomial that depends on the cluster count only
    return math.lgamma(conc * q) - q * math.lgamma(conc) - math.lgamma(total + conc * q)


def move_deltas(axis, src: int, profile, stats: BlockStats, h: Hyperparams, allow_new: bool = True) -> np.ndarray:
    """ICL change for moving one element out of cluster ``src`` to every target.

    Returns an array of length Q + 1: entries 0..Q-1 are existing clusters,
    the last entry is a new singleton cluster. Non-candidates (the source
    itself, NEW when disallowed or when the source is already a singleton)
    are -inf.
    """
    axis = axis_index(axis)
    Sm, cap = _oriented(stats, axis)
    n = stats.sizes[axis]
    q = len(n)
    if not 0 <= src < q:
        raise ContractError(f"source cluster {src} out of range [0, {q})")
    p = np.asarray(profile, dtype=np.int64)
    if p.shape != cap.shape:
        raise ContractError(f"profile shape {p.shape} does not match {cap.shape}")
    ns = int(n[src])
    if q == 1 and ns == 1:
        return np.full(2, -np.inf)  # a lone element has nowhere to go
    conc = h.concentration(axis)
    total = int(n.sum())

    old_src = _slice_sum(Sm[src], ns, cap, h)
    new_src = _slice_sum(Sm[src] - p, ns - 1, cap, h) if ns > 1 else 0.0
    lik_src = new_src - old_src
    lik_tgt = _slice_sum(Sm + p, n + 1, cap, h) - _slice_sum(Sm, n, cap, h)

    if ns > 1:
        prior_src = math.lgamma(ns - 1 + conc) - math.lgamma(ns + conc)
        q_after = q
    else:
        prior_src = -math.lgamma(1 + conc)
        q_after = q - 1
    base_count = _count_term(q, total, conc)
    prior_tgt = gammaln(n + 1 + conc) - gammaln(n + conc)

    out = np.empty(q + 1)
    out[:q] = lik_src + lik_tgt + prior_src + prior_tgt + (_count_term(q_after, total, conc) - base_count)
    out[src] = -np.inf
    if allow_new and ns > 1:
        lik_new = float(_slice_sum(p, 1, cap, h))
        out[q] = (
            lik_src + lik_new + prior_src + math.lgamma(1 + conc) + (_count_term(q_after + 1, total, conc) - base_count)
        )
    else:
        out[q] = -np.inf
    return out


def delta_move(dim, idx: int, target: int, stats: BlockStats, profile, part: TriPartition, h: Hyperparams) -> float:
    """ICL change for moving element ``idx`` of ``dim`` to ``target`` (or NEW).

    ``profile`` is the element's counts aggregated by the other two
    partitions. Moving to the current cluster, or moving the sole member
    of a cluster to NEW, leaves the partition unchanged and returns 0.
    """
    axis = axis_index(dim)
    labels = part.labels[axis]
    if not 0 <= idx < len(labels):
        raise ContractError(f"{dim} index {idx} out of range [0, {len(labels)})")
    q = len(stats.sizes[axis])
    src = int(labels[idx])
    if target != NEW and not 0 <= target < q:
        raise ContractError(f"target cluster {target} out of range [0, {q})")
    if target == src or (target == NEW and stats.sizes[axis][src] == 1):
        return 0.0
    deltas = move_deltas(axis, src, profile, stats, h, allow_new=True)
    return float(deltas[q if target == NEW else target])


def merge_deltas(axis, stats: BlockStats, h: Hyperparams) -> np.ndarray:
    """Q x Q matrix of ICL changes for merging each pair of clusters.

    Only the strict upper triangle is meaningful; everything else is -inf.
    """
    axis = axis_index(axis)
    Sm, cap = _oriented(stats, axis)
    n = stats.sizes[axis]
    q = len(n)
    out = np.full((q, q), -np.inf)
    if q < 2:
        return out
    conc = h.concentration(axis)
    total = int(n.sum())
    iu, ju = np.triu_indices(q, k=1)
    single = _slice_sum(Sm, n, cap, h)
    merged = _slice_sum(Sm[iu] + Sm[ju], n[iu] + n[ju], cap, h)
    lik = merged - single[iu] - single[ju]
    prior = (
        gammaln(n[iu] + n[ju] + conc)
        - gammaln(n[iu] + conc)
        - gammaln(n[ju] + conc)
        + _count_term(q - 1, total, conc)
        - _count_term(q, total, conc)
    )
    out[iu, ju] = lik + prior
    return out


def delta_merge(dim, c1: int, c2: int, stats: BlockStats, part: TriPartition, h: Hyperparams) -> float:
    axis = axis_index(dim)
    q = len(stats.sizes[axis])
    if c1 == c2:
        raise ContractError("cannot merge a cluster with itself")
    for c in (c1, c2):
        if not 0 <= c < q:
            raise ContractError(f"cluster {c} out of range [0, {q})")
    i, j = min(c1, c2), max(c1, c2)
    Sm, cap = _oriented(stats, axis)
    n = stats.sizes[axis]
    conc = h.concentration(axis)
    total = int(n.sum())
    lik = (
        _slice_sum(Sm[i] + Sm[j], n[i] + n[j], cap, h)
        - _slice_sum(Sm[i], n[i], cap, h)
        - _slice_sum(Sm[j], n[j], cap, h)
    )
    prior = (
        math.lgamma(n[i] + n[j] + conc)
        - math.lgamma(n[i] + conc)
        - math.lgamma(n[j] + conc)
        + _count_term(q - 1, total, conc)
        - _count_term(q, total, conc)
    )
    return float(lik + prior)
