"""Greedy ICL maximization over row, column and time labels."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import (
    AXES,
    AXIS_NAMES,
    BlockStats,
    ContractError,
    CountTensor,
    Hyperparams,
    TriPartition,
    all_profiles,
    axis_index,
    block_stats,
)
from .icl import IclValue, icl_exact, icl_from_stats, merge_deltas, move_deltas

log = logging.getLogger(__name__)

DEFAULT_INIT_CAP = 10


@dataclass(frozen=True)
class SearchConfig:
    """Search settings. ``None`` init counts mean min(dimension size, 10).

    ``fixed`` holds the cluster count of an axis at its initial value: no
    new clusters, no emptying moves and no merges on that axis.
    """

    init_K: Optional[int] = None
    init_G: Optional[int] = None
    init_D: Optional[int] = None
    max_sweeps: int = 100
    restarts: int = 1
    seed: int = 0
    allow_new_clusters: bool = True
    hyper: Hyperparams = field(default_factory=Hyperparams)
    fixed: tuple[bool, bool, bool] = (False, False, False)

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ContractError("max_sweeps must be >= 1")
        if self.restarts < 1:
            raise ContractError("restarts must be >= 1")
        for v in (self.init_K, self.init_G, self.init_D):
            if v is not None and v < 1:
                raise ContractError("initial cluster counts must be positive")

    def init_counts(self, shape) -> tuple[int, int, int]:
        out = []
        for q, n, name in zip((self.init_K, self.init_G, self.init_D), shape, AXIS_NAMES):
            if q is None:
                q = min(n, DEFAULT_INIT_CAP)
            if q > n:
                raise ContractError(f"initial {name} cluster count {q} exceeds dimension size {n}")
            out.append(int(q))
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "init_K": self.init_K,
            "init_G": self.init_G,
            "init_D": self.init_D,
            "max_sweeps": self.max_sweeps,
            "restarts": self.restarts,
            "seed": self.seed,
            "allow_new_clusters": self.allow_new_clusters,
            "fixed": list(self.fixed),
            "hyper": {k: getattr(self.hyper, k) for k in ("a", "b", "alpha", "delta", "gamma", "delta_t")},
        }


@dataclass
class FitResult:
    partition: TriPartition
    icl: IclValue
    trace: list[tuple[int, float]]
    n_sweeps: int
    restart_index: int
    stats: BlockStats
    converged: bool = True


class FitState:
    """Mutable search state: labels, cluster sizes and block totals kept in sync.

    With ``verify=True`` every applied move or merge is checked against a
    full recomputation of the ICL and logged in ``audit`` as
    (predicted delta, realized delta) pairs.
    """

    def __init__(self, tensor: CountTensor, part: TriPartition, hyper: Hyperparams,
                 allow_new=(True, True, True), fixed=(False, False, False), verify=False):
        part.check()
        self.tensor = tensor
        self.part = part
        self.hyper = hyper
        self.stats = block_stats(tensor, part)
        # the partition and the stats share the same size vectors
        self.stats.sizes = part.sizes
        self.allow_new = tuple(bool(a) and not f for a, f in zip(allow_new, fixed))
        self.fixed = tuple(bool(f) for f in fixed)
        self.verify = verify
        self.audit: list[tuple[float, float]] = []
        self._last_icl = self.icl().total if verify else None

    def icl(self) -> IclValue:
        return icl_from_stats(self.stats, self.hyper, self.tensor.log_factorial_constant)

    def _check(self, predicted: float) -> None:
        if not self.verify:
            return
        now = icl_exact(self.tensor, self.part, self.hyper).total
        realized = now - self._last_icl
        self.audit.append((predicted, realized))
        if not math.isclose(predicted, realized, rel_tol=1e-9, abs_tol=1e-12 * abs(now)):
            raise AssertionError(f"delta mismatch: predicted {predicted!r}, realized {realized!r}")
        self._last_icl = now

    def apply_move(self, axis: int, idx: int, target: int, profile, predicted: float = math.nan) -> None:
        part, stats = self.part, self.stats
        labels = part.labels[axis]
        src = int(labels[idx])
        q = len(part.sizes[axis])
        if target >= q or target < 0:
            shape = list(stats.S.shape)
            shape[axis] = 1
            stats.S = np.concatenate([stats.S, np.zeros(shape, dtype=np.int64)], axis=axis)
            part.sizes[axis] = np.append(part.sizes[axis], 0)
            target = q
        Sm = np.moveaxis(stats.S, axis, 0)
        Sm[src] -= profile
        Sm[target] += profile
        sizes = part.sizes[axis]
        sizes[src] -= 1
        sizes[target] += 1
        labels[idx] = target
        if sizes[src] == 0:
            self._drop_cluster(axis, src)
        self._check(predicted)

    def apply_merge(self, axis: int, c1: int, c2: int, predicted: float = math.nan) -> None:
        keep, gone = min(c1, c2), max(c1, c2)
        part, stats = self.part, self.stats
        Sm = np.moveaxis(stats.S, axis, 0)
        Sm[keep] += Sm[gone]
        part.sizes[axis][keep] += part.sizes[axis][gone]
        labels = part.labels[axis]
        labels[labels == gone] = keep
        part.sizes[axis][gone] = 0
        self._drop_cluster(axis, gone)
        self._check(predicted)

    def _drop_cluster(self, axis: int, k: int) -> None:
        part, stats = self.part, self.stats
        stats.S = np.delete(stats.S, k, axis=axis)
        part.sizes[axis] = np.delete(part.sizes[axis], k)
        labels = part.labels[axis]
        labels[labels > k] -= 1


def greedy_sweep(dim, state: FitState, rng: np.random.Generator) -> bool:
    """Visit every element of ``dim`` once in random order, moving each to
    its best target when that strictly increases the ICL."""
    axis = axis_index(dim)
    # profiles depend on the other two partitions only, which this sweep leaves untouched
    profiles = all_profiles(state.tensor, state.part, axis)
    labels = state.part.labels[axis]
    fixed = state.fixed[axis]
    allow_new = state.allow_new[axis]
    improved = False
    for idx in rng.permutation(len(labels)):
        src = int(labels[idx])
        if fixed and state.part.sizes[axis][src] == 1:
            continue
        deltas = move_deltas(axis, src, profiles[idx], state.stats, state.hyper, allow_new)
        best = int(np.argmax(deltas))
        if deltas[best] > 0:
            state.apply_move(axis, int(idx), best, profiles[idx], float(deltas[best]))
            improved = True
    return improved


def merge_pass(state: FitState) -> bool:
    """Repeatedly apply the best strictly improving merge on each axis."""
    improved = False
    for axis in AXES:
        if state.fixed[axis]:
            continue
        while len(state.part.sizes[axis]) > 1:
            deltas = merge_deltas(axis, state.stats, state.hyper)
            i, j = np.unravel_index(int(np.argmax(deltas)), deltas.shape)
            if not deltas[i, j] > 0:
                break
            state.apply_merge(axis, int(i), int(j), float(deltas[i, j]))
            improved = True
    return improved


def random_partition(shape, counts, rng: np.random.Generator) -> TriPartition:
    """Uniform random labels with every one of the requested clusters non-empty."""
    labels = []
    for n, q in zip(shape, counts):
        base = np.concatenate([np.arange(q), rng.integers(q, size=n - q)])
        labels.append(rng.permutation(base))
    return TriPartition(*labels)


def fit(tensor: CountTensor, cfg: SearchConfig, *, seed: Optional[int] = None,
        restart_index: int = 0, init: Optional[TriPartition] = None, verify: bool = False) -> FitResult:
    """Single greedy run from a random (or given) initial partition."""
    if min(tensor.shape) < 1:
        raise ContractError("tensor dimensions must be positive")
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    if init is None:
        part = random_partition(tensor.shape, cfg.init_counts(tensor.shape), rng)
    else:
        part = init.copy()
    allow = (cfg.allow_new_clusters,) * 3
    state = FitState(tensor, part, cfg.hyper, allow_new=allow, fixed=cfg.fixed, verify=verify)

    trace = [(0, state.icl().total)]
    converged = False
    rounds = 0
    for rounds in range(1, cfg.max_sweeps + 1):
        moved = False
        for axis in AXES:
            moved |= greedy_sweep(axis, state, rng)
        if not moved:
            moved = merge_pass(state)
        if not moved:
            converged = True
            break
        trace.append((rounds, state.icl().total))
        log.debug("seed %d round %d: ICL %.4f K,G,D=%s", seed, rounds, trace[-1][1], state.part.counts)

    final = state.part.copy()
    return FitResult(
        partition=final,
        icl=icl_exact(tensor, final, cfg.hyper),
        trace=trace,
        n_sweeps=rounds,
        restart_index=restart_index,
        stats=state.stats.copy(),
        converged=converged,
    )


def _fit_restart(args):
    tensor, cfg, r = args
    return fit(tensor, cfg, seed=cfg.seed + r, restart_index=r)


def multi_restart(tensor: CountTensor, cfg: SearchConfig, n_jobs: int = 1) -> FitResult:
    """Best of ``cfg.restarts`` fits seeded seed, seed+1, ...; ties go to the lowest index."""
    jobs = [(tensor, cfg, r) for r in range(cfg.restarts)]
    if n_jobs > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_fit_restart, jobs))
    else:
        results = [_fit_restart(j) for j in jobs]
    best = results[0]
    for res in results[1:]:
        if res.icl.total > best.icl.total:
            best = res
    return best


def with_fixed_counts(cfg: SearchConfig, K=None, G=None, D=None) -> SearchConfig:
    """Copy of ``cfg`` with the given cluster counts held fixed."""
    init = [cfg.init_K, cfg.init_G, cfg.init_D]
    fixed = list(cfg.fixed)
    for ax, v in enumerate((K, G, D)):
        if v is not None:
            init[ax] = v
            fixed[ax] = True
    return replace(cfg, init_K=init[0], init_G=init[1], init_D=init[2], fixed=tuple(fixed))
