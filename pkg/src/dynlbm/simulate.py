"""Sampling from the non-stationary Poisson LBM and partition-recovery scores."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import ContractError, CountTensor, TriPartition

MAX_LABEL_ATTEMPTS = 100


@dataclass(frozen=True)
class GenSpec:
    N: int
    M: int
    U: int
    proportions: tuple  # (omega, rho, beta)
    lam: np.ndarray  # K x G x D rates
    delta_t: float = 1.0
    seed: int = 0

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        object.__setattr__(self, "lam", lam)
        if lam.ndim != 3:
            raise ContractError("lambda must be a K x G x D array")
        if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
            raise ContractError("all rates must be positive")
        if len(self.proportions) != 3:
            raise ContractError("need three proportion vectors (rows, cols, time)")
        props = tuple(np.asarray(p, dtype=float) for p in self.proportions)
        object.__setattr__(self, "proportions", props)
        for p, q, n, name in zip(props, lam.shape, (self.N, self.M, self.U), ("K", "G", "D")):
            if len(p) != q:
                raise ContractError(f"proportion vector for {name} has length {len(p)}, expected {q}")
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ContractError(f"proportions for {name} must be non-negative and sum to 1")
            if q > n:
                raise ContractError(f"{name}={q} exceeds dimension size {n}")
        if not self.delta_t > 0:
            raise ContractError("delta_t must be positive")

    @property
    def K(self) -> int:
        return self.lam.shape[0]

    @property
    def G(self) -> int:
        return self.lam.shape[1]

    @property
    def D(self) -> int:
        return self.lam.shape[2]

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        """Build from a JSON-style mapping.

        Rates come either as ``lambda`` (nested K x G x D list) or as an
        additive ``s1``/``s2``/``s3`` triple. Proportions default to uniform.
        """
        try:
            if "lambda" in d:
                lam = np.asarray(d["lambda"], dtype=float)
            else:
                lam = lambda_additive(d["s1"], d["s2"], d["s3"])
            props = d.get("proportions")
            if props is None:
                props = [np.full(q, 1.0 / q) for q in lam.shape]
            return cls(
                N=int(d["N"]),
                M=int(d["M"]),
                U=int(d["U"]),
                proportions=tuple(props),
                lam=lam,
                delta_t=float(d.get("delta_t", 1.0)),
                seed=int(d.get("seed", 0)),
            )
        except KeyError as e:
            raise ContractError(f"missing field {e.args[0]!r} in generator spec") from None

    @classmethod
    def from_json(cls, path) -> "GenSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "U": self.U,
            "proportions": [p.tolist() for p in self.proportions],
            "lambda": self.lam.tolist(),
            "delta_t": self.delta_t,
            "seed": self.seed,
        }


def lambda_additive(s1, s2, s3) -> np.ndarray:
    """Rates lam[k, g, l] = s1[k] + s2[g] + s3[l]."""
    s1, s2, s3 = (np.asarray(s, dtype=float).ravel() for s in (s1, s2, s3))
    lam = s1[:, None, None] + s2[None, :, None] + s3[None, None, :]
    if lam.size == 0 or np.any(lam <= 0):
        raise ContractError("additive construction produced a non-positive rate")
    return lam


def benchmark_spec(s1=(0.0, 2.0, 4.0), s2=(0.5, 1.0, 1.5), s3=(0.5, 1.0, 1.5), seed: int = 0) -> GenSpec:
    """The 50 x 50 x 24 three-cluster benchmark with additive rates."""
    lam = lambda_additive(s1, s2, s3)
    props = tuple(np.full(q, 1.0 / q) for q in lam.shape)
    return GenSpec(N=50, M=50, U=24, proportions=props, lam=lam, delta_t=1.0, seed=seed)


def _draw_labels(rng, n, p):
    for _ in range(MAX_LABEL_ATTEMPTS):
        labels = rng.choice(len(p), size=n, p=p)
        if len(np.unique(labels)) == len(p):
            return labels
    raise ContractError(f"could not draw {len(p)} non-empty clusters from {n} elements in {MAX_LABEL_ATTEMPTS} attempts")


def sample(spec: GenSpec) -> tuple[CountTensor, TriPartition]:
    rng = np.random.default_rng(spec.seed)
    c = _draw_labels(rng, spec.N, spec.proportions[0])
    w = _draw_labels(rng, spec.M, spec.proportions[1])
    y = _draw_labels(rng, spec.U, spec.proportions[2])
    rows, cols, ints, counts = [], [], [], []
    # one row at a time keeps memory at M x U
    for i in range(spec.N):
        means = spec.delta_t * spec.lam[c[i]][np.ix_(w, y)]
        draws = rng.poisson(means)
        j, u = np.nonzero(draws)
        rows.append(np.full(len(j), i))
        cols.append(j)
        ints.append(u)
        counts.append(draws[j, u])
    tensor = CountTensor(
        (spec.N, spec.M, spec.U),
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(ints),
        np.concatenate(counts),
    )
    # labels are already 0..Q-1 with every cluster used, so compaction keeps them as drawn
    return tensor, TriPartition(c, w, y)


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return (x * (x - 1.0) / 2.0).sum()


def adjusted_rand_index(p, q) -> float:
    p = np.asarray(p).ravel()
    q = np.asarray(q).ravel()
    if len(p) != len(q):
        raise ContractError(f"label vectors differ in length: {len(p)} vs {len(q)}")
    n = len(p)
    if n < 2:
        return 1.0
    _, pi = np.unique(p, return_inverse=True)
    _, qi = np.unique(q, return_inverse=True)
    table = np.zeros((pi.max() + 1, qi.max() + 1), dtype=np.int64)
    np.add.at(table, (pi, qi), 1)
    index = _comb2(table)
    a = _comb2(table.sum(axis=1))
    b = _comb2(table.sum(axis=0))
    expected = a * b / _comb2([n])
    maximum = 0.5 * (a + b)
    if maximum == expected:
        # both partitions trivial in the same way (all-singletons or all-one-cluster)
        return 1.0
    return float((index - expected) / (maximum - expected))
