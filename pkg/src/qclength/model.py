"""Chain specifications and reproducible disorder realizations."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, TextIO

import numpy as np

BOUNDARIES = ("periodic", "open")
MODEL_KINDS = ("XY", "XYZ")
DISORDER_TARGETS = ("coupling", "field", "none")


@dataclass(frozen=True)
class ChainSpec:
    """Geometry and uniform parameters of a spin-1/2 chain.

    ``kappa`` is the overall energy scale and is always 1; couplings and
    fields are measured in its units.
    """

    n_sites: int
    gamma: float = 0.5
    delta: float = 0.0
    kappa: float = 1.0
    boundary: str = "periodic"
    model_kind: str = "XY"

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"n_sites must be an integer >= 2, got {self.n_sites}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.kappa != 1.0:
            raise ValueError("kappa is fixed to 1")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.model_kind == "XYZ" and self.boundary != "open":
            raise ValueError("XYZ chains are open-boundary only")
        if self.model_kind == "XY" and self.delta != 0.0:
            raise ValueError("XY chains carry no zz coupling; use model_kind='XYZ'")

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour bonds ``(i, i+1)``; the wrap-around bond is last."""
        n = self.n_sites
        out = [(i, i + 1) for i in range(n - 1)]
        if self.periodic:
            out.append((n - 1, 0))
        return out


@dataclass(frozen=True)
class DisorderSpec:
    """Which parameter is random and how it is distributed.

    ``mean`` is the configured value of the targeted parameter.  With
    ``target='none'`` the realization is ordered and ``std_dev`` is ignored.
    """

    target: str = "none"
    mean: float = 0.5
    std_dev: float = 1.0
    distribution: str = "gaussian"

    def __post_init__(self):
        if self.target not in DISORDER_TARGETS:
            raise ValueError(f"target must be one of {DISORDER_TARGETS}, got {self.target!r}")
        if self.std_dev < 0:
            raise ValueError(f"std_dev must be >= 0, got {self.std_dev}")


@dataclass(frozen=True)
class Realization:
    spec: ChainSpec
    couplings: np.ndarray
    fields: np.ndarray
    realization_index: int = 0
    seed_trace: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.spec.n_sites
        j = np.asarray(self.couplings, dtype=float)
        h = np.asarray(self.fields, dtype=float)
        if j.shape != (n,) or h.shape != (n,):
            raise ValueError(f"couplings and fields must have length {n}")
        object.__setattr__(self, "couplings", j)
        object.__setattr__(self, "fields", h)

    def with_spec(self, **changes) -> "Realization":
        return replace(self, spec=replace(self.spec, **changes))


def realization_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for realization ``index``.

    The stream depends only on ``(master_seed, index)`` so any evaluation
    order or worker count reproduces the same draws.
    """
    if index < 0:
        raise ValueError(f"realization index must be >= 0, got {index}")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def sample_realization(
    spec: ChainSpec,
    dis: DisorderSpec,
    master_seed: int,
    index: int,
    *,
    j: float | None = None,
    h: float | None = None,
) -> Realization:
    """Draw the ``index``-th disorder realization.

    Parameters
    ----------
    spec, dis
        Chain and disorder specification.  The disordered parameter has mean
        ``dis.mean``.
    master_seed, index
        Determine the random stream.
    j, h
        Values of the non-disordered parameters.  Defaults: ``h = 1`` for a
        random-coupling chain, ``j = 1`` for a random-field chain.
    """
    if index < 0:
        raise ValueError(f"realization index must be >= 0, got {index}")
    if dis.distribution != "gaussian":
        raise ValueError(f"unsupported distribution {dis.distribution!r}")
    n = spec.n_sites
    trace = {"master_seed": int(master_seed), "index": int(index), "generator": "PCG64/SeedSequence"}
    if dis.target == "coupling":
        couplings = realization_rng(master_seed, index).normal(dis.mean, dis.std_dev, size=n)
        fields = np.full(n, 1.0 if h is None else float(h))
    elif dis.target == "field":
        fields = realization_rng(master_seed, index).normal(dis.mean, dis.std_dev, size=n)
        couplings = np.full(n, 1.0 if j is None else float(j))
    else:
        couplings = np.full(n, dis.mean if j is None else float(j))
        fields = np.full(n, 1.0 if h is None else float(h))
    return Realization(spec, couplings, fields, int(index), trace)


def ordered_realization(spec: ChainSpec, j: float, h: float) -> Realization:
    n = spec.n_sites
    return Realization(spec, np.full(n, float(j)), np.full(n, float(h)), 0, {"ordered": True})


def write_realizations(realizations: Iterable[Realization], stream: TextIO) -> None:
    """One line per realization: ``index | J_0 ... J_{N-1} | h_0 ... h_{N-1}``."""
    for r in realizations:
        js = " ".join(repr(float(x)) for x in r.couplings)
        hs = " ".join(repr(float(x)) for x in r.fields)
        stream.write(f"{r.realization_index} | {js} | {hs}\n")


def read_realizations(stream: TextIO, spec: ChainSpec) -> list[Realization]:
    out = []
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        idx, js, hs = (part.strip() for part in line.split("|"))
        out.append(
            Realization(
                spec,
                np.array([float(x) for x in js.split()]),
                np.array([float(x) for x in hs.split()]),
                int(idx),
                {"replayed": True},
            )
        )
    return out
