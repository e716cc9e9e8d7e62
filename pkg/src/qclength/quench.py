"""Quenched disorder averaging of pairwise correlation measures."""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence, TextIO

import numpy as np

from . import ed, freefermion, mps
from .model import ChainSpec, DisorderSpec, Realization, ordered_realization, sample_realization
from .qcorr import TwoSiteState, concurrence, discord, mutual_information

log = logging.getLogger(__name__)

MEASURES = ("concurrence", "discord", "mutual_information", "classical_correlation")
SOLVERS = ("freefermion", "ed", "mps")
PAIR_SCHEMES = ("fixed_i_all_j", "central_site_distance_r")


class QuenchFailure(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"realization {index} failed: {cause!r}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class QuenchPlan:
    """Everything that determines a quenched run.

    ``fixed_value`` is the value of the parameter that is not disordered:
    the field ``h`` for a random-coupling chain, the coupling ``J`` for a
    random-field chain.
    """

    spec: ChainSpec
    dis: DisorderSpec
    n_realizations: int = 10_000
    master_seed: int = 0
    measure: str = "discord"
    pair_scheme: str = "fixed_i_all_j"
    solver: str = "freefermion"
    fixed_value: float = 1.0
    site: int = 0
    r_max: int | None = None
    margin: int | None = None
    dmrg: mps.DmrgConfig = field(default_factory=mps.DmrgConfig)
    discord_method: str = "auto"
    measured_party: str = "first"
    on_failure: str = "abort"

    def problems(self) -> list[str]:
        out = []
        if self.n_realizations < 1:
            out.append(f"n_realizations must be >= 1, got {self.n_realizations}")
        if self.measure not in MEASURES:
            out.append(f"measure must be one of {MEASURES}, got {self.measure!r}")
        out.extend(solver_problems(self.spec, self.solver))
        if self.pair_scheme not in PAIR_SCHEMES:
            out.append(f"pair_scheme must be one of {PAIR_SCHEMES}, got {self.pair_scheme!r}")
        if self.on_failure not in ("abort", "skip"):
            out.append(f"on_failure must be 'abort' or 'skip', got {self.on_failure!r}")
        return out

    def realization(self, index: int) -> Realization:
        if self.dis.target == "coupling":
            return sample_realization(self.spec, self.dis, self.master_seed, index, h=self.fixed_value)
        if self.dis.target == "field":
            return sample_realization(self.spec, self.dis, self.master_seed, index, j=self.fixed_value)
        return sample_realization(
            self.spec, self.dis, self.master_seed, index, j=self.dis.mean, h=self.fixed_value
        )

    def pairs(self) -> list[tuple[int, int]]:
        return pair_list(self.spec, self.pair_scheme, self.site, self.r_max, self.margin)


def solver_problems(spec: ChainSpec, solver: str) -> list[str]:
    if solver not in SOLVERS:
        return [f"solver must be one of {SOLVERS}, got {solver!r}"]
    if solver == "freefermion" and spec.model_kind != "XY":
        return ["solver 'freefermion' only handles XY chains"]
    if solver == "mps" and (spec.model_kind != "XYZ" or spec.boundary != "open"):
        return ["solver 'mps' needs an open-boundary XYZ chain"]
    if solver == "ed" and spec.n_sites > ed.MAX_SITES:
        return [f"solver 'ed' limited to N <= {ed.MAX_SITES}"]
    return []


def pair_list(spec: ChainSpec, scheme: str, site: int = 0, r_max: int | None = None, margin: int | None = None):
    n = spec.n_sites
    if scheme == "fixed_i_all_j":
        if r_max is None:
            r_max = n // 2 if spec.periodic else n - 1 - site
        r_max = min(r_max, n - 1 - site)
        return [(site, site + r) for r in range(1, r_max + 1)]
    if scheme == "central_site_distance_r":
        pairs = mps.central_pairs(n, margin)
        return pairs if r_max is None else pairs[:r_max]
    raise ValueError(f"unknown pair scheme {scheme!r}")


@dataclass
class QuenchSeries:
    distances: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    n_realizations: int
    measure: str = "discord"
    metadata: dict = field(default_factory=dict)

    def write_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["r", "mean", "std_error", "n_realizations"])
        for r, m, s in zip(self.distances, self.mean, self.std_error):
            w.writerow([int(r), repr(float(m)), repr(float(s)), self.n_realizations])

    def write_metadata(self, stream: TextIO) -> None:
        json.dump(self.metadata, stream, indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def read_csv(cls, stream: TextIO, measure: str = "discord") -> "QuenchSeries":
        rows = list(csv.DictReader(stream))
        return cls(
            np.array([int(r["r"]) for r in rows]),
            np.array([float(r["mean"]) for r in rows]),
            np.array([float(r["std_error"]) for r in rows]),
            int(rows[0]["n_realizations"]) if rows else 0,
            measure,
        )


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def ground_states(r: Realization, solver: str, pairs, dmrg_cfg=None, margin=None) -> list[TwoSiteState]:
    """Two-site states of ``pairs`` in the ground state of ``r``."""
    if solver == "freefermion":
        sol = freefermion.solve_realization(r)
        table = freefermion.correlators(sol, pairs)
        return [freefermion.two_site_rdm(table, k) for k in range(len(pairs))]
    if solver == "ed":
        s = ed.ed_ground_state(r)
        return [ed.ed_two_site_rdm(s, i, j) for i, j in pairs]
    if solver == "mps":
        s = mps.dmrg_ground_state(r, dmrg_cfg)
        return [mps.mps_two_site_rdm(s, i, j, margin=margin) for i, j in pairs]
    raise ValueError(f"unknown solver {solver!r}")


def evaluate_measures(
    states: Sequence[TwoSiteState],
    measures: Sequence[str],
    discord_method: str = "auto",
    measured_party: str = "first",
) -> np.ndarray:
    """Array ``(len(measures), len(states))`` of measure values."""
    out = np.zeros((len(measures), len(states)))
    need_discord = any(m in ("discord", "classical_correlation") for m in measures)
    for k, st in enumerate(states):
        res = None
        if need_discord:
            res = discord(st, measured_party, discord_method)
        for m, name in enumerate(measures):
            if name == "concurrence":
                out[m, k] = concurrence(st)
            elif name == "discord":
                out[m, k] = res.discord
            elif name == "classical_correlation":
                out[m, k] = res.classical_correlation
            elif name == "mutual_information":
                out[m, k] = res.mutual_information if res is not None else mutual_information(st)
            else:
                raise ValueError(f"unknown measure {name!r}")
    return out


def _evaluate_index(plan: QuenchPlan, measures: tuple[str, ...], index: int) -> np.ndarray:
    r = plan.realization(index)
    states = ground_states(r, plan.solver, plan.pairs(), plan.dmrg, plan.margin)
    return evaluate_measures(states, measures, plan.discord_method, plan.measured_party)


def _evaluate_chunk(args):
    plan, measures, indices = args
    out = []
    for k in indices:
        try:
            out.append((k, _evaluate_index(plan, measures, k), None))
        except Exception as exc:  # reported to the reducer, which applies the policy
            out.append((k, None, exc))
    return out


def pairwise_sum(x: np.ndarray) -> np.ndarray:
    """Sum over the first axis by a fixed binary tree in index order."""
    x = np.asarray(x, dtype=float)
    while x.shape[0] > 1:
        if x.shape[0] % 2:
            x = np.concatenate([x[:-1:2] + x[1::2], x[-1:]], axis=0)
        else:
            x = x[0::2] + x[1::2]
    return x[0]


def reduce_samples(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error along axis 0, independent of how ``values`` was produced."""
    n = values.shape[0]
    mean = pairwise_sum(values) / n
    if n < 2:
        return mean, np.zeros_like(mean)
    var = pairwise_sum((values - mean) ** 2) / (n - 1)
    return mean, np.sqrt(var / n)


def run_quench_measures(
    plan: QuenchPlan, measures: Sequence[str] | None = None, workers: int = 1, chunk_size: int | None = None
) -> dict[str, QuenchSeries]:
    """Quenched averages of several measures over the same realizations."""
    measures = tuple(measures or (plan.measure,))
    problems = plan.problems()
    for m in measures:
        if m not in MEASURES:
            problems.append(f"unknown measure {m!r}")
    if problems:
        raise ValueError("; ".join(problems))
    pairs = plan.pairs()
    n_r = plan.n_realizations
    t0 = time.time()
    values = np.full((n_r, len(measures), len(pairs)), np.nan)
    ok = np.zeros(n_r, dtype=bool)
    skipped = []

    if chunk_size is None:
        chunk_size = max(1, min(64, n_r // (4 * max(1, workers)) or 1))
    chunks = [(plan, measures, range(s, min(s + chunk_size, n_r))) for s in range(0, n_r, chunk_size)]

    def consume(results):
        for k, val, exc in results:
            if exc is None:
                values[k] = val
                ok[k] = True
            elif plan.on_failure == "skip":
                log.warning("skipping realization %d: %r", k, exc)
                skipped.append(int(k))
            else:
                raise QuenchFailure(k, exc)

    if workers <= 1:
        for c in chunks:
            consume(_evaluate_chunk(c))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_evaluate_chunk, chunks):
                consume(res)

    kept = values[ok]
    if kept.shape[0] == 0:
        raise RuntimeError("no realization succeeded")
    distances = np.array([j - i for i, j in pairs])
    meta = {
        "plan": plan_to_dict(plan),
        "measures": list(measures),
        "pairs": [list(p) for p in pairs],
        "skipped_indices": sorted(skipped),
        "wall_time_s": time.time() - t0,
        "workers": workers,
    }
    out = {}
    for m, name in enumerate(measures):
        mean, se = reduce_samples(kept[:, m, :])
        out[name] = QuenchSeries(distances, mean, se, int(kept.shape[0]), name, dict(meta))
    return out


def run_quench(plan: QuenchPlan, workers: int = 1) -> QuenchSeries:
    """Quenched average of ``plan.measure`` at each distance."""
    return run_quench_measures(plan, (plan.measure,), workers)[plan.measure]


def ordered_series(
    spec: ChainSpec,
    j: float,
    h: float,
    measures: Sequence[str] | str = "discord",
    pairs: Sequence[tuple[int, int]] | None = None,
    solver: str = "freefermion",
    *,
    pair_scheme: str = "fixed_i_all_j",
    r_max: int | None = None,
    margin: int | None = None,
    dmrg_cfg: mps.DmrgConfig | None = None,
    discord_method: str = "auto",
    measured_party: str = "first",
):
    """Measure(s) versus distance for the ordered chain; ``std_error`` is zero.

    Returns one :class:`QuenchSeries` when ``measures`` is a string, else a
    dict keyed by measure.
    """
    single = isinstance(measures, str)
    names = (measures,) if single else tuple(measures)
    problems = solver_problems(spec, solver)
    if problems:
        raise ValueError("; ".join(problems))
    if pairs is None:
        pairs = pair_list(spec, pair_scheme, 0, r_max, margin)
    r = ordered_realization(spec, j, h)
    states = ground_states(r, solver, pairs, dmrg_cfg, margin)
    vals = evaluate_measures(states, names, discord_method, measured_party)
    distances = np.array([b - a for a, b in pairs])
    meta = {"ordered": True, "spec": asdict(spec), "j": j, "h": h, "solver": solver, "pairs": [list(p) for p in pairs]}
    out = {
        name: QuenchSeries(distances, vals[m], np.zeros(len(pairs)), 1, name, dict(meta))
        for m, name in enumerate(names)
    }
    return out[names[0]] if single else out


def plan_to_dict(plan: QuenchPlan) -> dict:
    d = asdict(plan)
    return d
