"""Free-fermion solution of the XY chain.

The Jordan-Wigner map ``sigma^z_i = 2 n_i - 1``, ``sigma^+_i = c_i^dag
prod_{l<i} (1 - 2 n_l)`` turns the XY chain into

    H = sum_ij c_i^dag A_ij c_j + 1/2 sum_ij (c_i^dag B_ij c_j^dag + h.c.) + const

with ``A`` symmetric and ``B`` antisymmetric.  On a ring the wrap-around bond
picks up a factor ``-P`` where ``P = (-1)^{N_f}`` is the fermion parity, so
the even and odd sectors are separate quadratic problems.

Ground-state contractions use ``A_m = c_m^dag + c_m`` and
``B_m = c_m^dag - c_m``: ``G_mn = <B_m A_n>``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from .model import Realization
from .qcorr import TwoSiteState, x_state

DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class QuadraticForm:
    """Fermionic quadratic Hamiltonian for one parity sector.

    ``parity_sector`` is ``'even'``/``'odd'`` on a ring and ``'both'`` on an
    open chain.  ``wrap`` holds the wrap-bond coupling and pairing amplitudes
    so the other sector can be rebuilt with :meth:`for_sector`.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    parity_sector: str
    constant_offset: float
    wrap: tuple[float, float] | None = None

    @property
    def n_sites(self) -> int:
        return self.a_matrix.shape[0]

    def for_sector(self, sector: str) -> "QuadraticForm":
        if self.wrap is None:
            return replace(self, parity_sector="both")
        if sector not in ("even", "odd"):
            raise ValueError(f"sector must be 'even' or 'odd' on a ring, got {sector!r}")
        if sector == self.parity_sector:
            return self
        n = self.n_sites
        a = self.a_matrix.copy()
        b = self.b_matrix.copy()
        hop, pair = self.wrap
        # undo the current corner sign and apply the new one: change is -2x old
        old = -_parity_value(self.parity_sector)
        new = -_parity_value(sector)
        a[n - 1, 0] += (new - old) * hop
        a[0, n - 1] += (new - old) * hop
        b[n - 1, 0] += (new - old) * pair
        b[0, n - 1] -= (new - old) * pair
        return replace(self, a_matrix=a, b_matrix=b, parity_sector=sector)


def _parity_value(sector: str) -> int:
    return {"even": 1, "odd": -1}[sector]


@dataclass(frozen=True)
class GroundSolution:
    """Ground-state contraction matrix and energy.

    When the lowest states of the two parity sectors are degenerate,
    ``sector_g`` holds both contraction matrices; correlators are then those
    of the equal superposition (averaged over sectors).
    """

    g_matrix: np.ndarray
    energy: float
    degenerate: bool
    sector_g: tuple[np.ndarray, ...] = field(default=())
    sector_energies: dict = field(default_factory=dict)

    @property
    def n_sites(self) -> int:
        return self.g_matrix.shape[0]


@dataclass(frozen=True)
class CorrelatorTable:
    site_pairs: list[tuple[int, int]]
    mz: np.ndarray
    txx: np.ndarray
    tyy: np.ndarray
    tzz: np.ndarray

    def entry(self, k: int) -> tuple[tuple[int, int], float, float, float, float, float]:
        i, j = self.site_pairs[k]
        return (i, j), self.mz[i], self.mz[j], self.txx[k], self.tyy[k], self.tzz[k]

    def __len__(self) -> int:
        return len(self.site_pairs)


def build_quadratic_form(r: Realization, sector: str | None = None) -> QuadraticForm:
    """Quadratic fermion form of the XY Hamiltonian of ``r``.

    ``sector`` picks the fermion-parity sector on a ring (default ``'even'``);
    it is ignored for open chains.
    """
    spec = r.spec
    if spec.model_kind != "XY":
        raise ValueError("the free-fermion route only handles XY chains")
    n = spec.n_sites
    g = spec.gamma
    jj = r.couplings
    a = np.diag(-r.fields.astype(float))
    b = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] += 0.5 * jj[i]
        a[i + 1, i] += 0.5 * jj[i]
        b[i, i + 1] += 0.5 * g * jj[i]
        b[i + 1, i] -= 0.5 * g * jj[i]
    offset = 0.5 * float(np.sum(r.fields))
    if not spec.periodic:
        return QuadraticForm(a, b, "both", offset)
    sector = sector or "even"
    sign = -_parity_value(sector)
    hop, pair = 0.5 * jj[n - 1], 0.5 * g * jj[n - 1]
    a[n - 1, 0] += sign * hop
    a[0, n - 1] += sign * hop
    b[n - 1, 0] += sign * pair
    b[0, n - 1] -= sign * pair
    return QuadraticForm(a, b, sector, offset, (hop, pair))


def _sector_state(q: QuadraticForm, parity: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Lowest state of fermion parity ``parity`` for the matrices of ``q``.

    Returns energy, contraction matrix and single-particle energies.
    """
    m = q.a_matrix + q.b_matrix
    try:
        u, lam, vt = np.linalg.svd(m)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("singular value decomposition did not converge") from exc
    energy = 0.5 * (np.trace(q.a_matrix) - lam.sum()) + q.constant_offset
    signs = np.ones_like(lam)
    # vacuum parity: (-1)^N det G with G = -U V^T reduces to det U det V
    vac_parity = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    if vac_parity != parity:
        k = int(np.argmin(lam))
        signs[k] = -1.0
        energy += lam[k]
    g = -(u * signs) @ vt
    return float(energy), g, lam


def solve_ground(q: QuadraticForm, degeneracy_tol: float = DEGENERACY_TOL) -> GroundSolution:
    """Ground state over both fermion-parity sectors.

    Sector energies within ``degeneracy_tol * N`` count as degenerate.
    """
    n = q.n_sites
    cands = []
    for parity, name in ((1, "even"), (-1, "odd")):
        form = q.for_sector(name) if q.wrap is not None else q
        e, g, _ = _sector_state(form, parity)
        cands.append((e, name, g))
    cands.sort(key=lambda c: c[0])
    (e0, s0, g0), (e1, s1, g1) = cands
    energies = {s0: e0, s1: e1}
    if abs(e1 - e0) <= degeneracy_tol * n:
        return GroundSolution(g0, e0, True, (g0, g1), energies)
    return GroundSolution(g0, e0, False, (g0,), energies)


def solve_realization(r: Realization) -> GroundSolution:
    return solve_ground(build_quadratic_form(r))


def fermion_parity(g: np.ndarray) -> float:
    """Expectation of ``(-1)^{N_f}`` in the Gaussian state with contractions ``g``."""
    n = g.shape[0]
    return float((-1) ** n * np.linalg.det(g))


def _string_correlators(g: np.ndarray, i: int, j: int) -> tuple[float, float, float]:
    r = j - i
    txx = np.linalg.det(g[i:j, i + 1 : j + 1]) if r > 1 else g[i, j]
    tyy = np.linalg.det(g[i + 1 : j + 1, i:j]) if r > 1 else g[j, i]
    tzz = g[i, i] * g[j, j] - g[i, j] * g[j, i]
    return float(txx), float(tyy), float(tzz)


def correlators(sol: GroundSolution, pairs: Sequence[tuple[int, int]]) -> CorrelatorTable:
    """Magnetizations and diagonal two-point correlators for ``pairs``."""
    n = sol.n_sites
    pairs = [(int(i), int(j)) for i, j in pairs]
    for i, j in pairs:
        if not 0 <= i < j < n:
            raise ValueError(f"pair ({i}, {j}) out of range for N={n}")
    gs = sol.sector_g or (sol.g_matrix,)
    mz = np.mean([np.diag(g) for g in gs], axis=0)
    vals = np.zeros((len(pairs), 3))
    for g in gs:
        for k, (i, j) in enumerate(pairs):
            vals[k] += _string_correlators(g, i, j)
    vals /= len(gs)
    return CorrelatorTable(pairs, mz, vals[:, 0], vals[:, 1], vals[:, 2])


def two_site_rdm(table: CorrelatorTable, k: int) -> TwoSiteState:
    """Two-site density matrix of the ``k``-th pair of ``table``."""
    (i, j), mzi, mzj, txx, tyy, tzz = table.entry(k)
    return x_state(mzi, mzj, txx, tyy, tzz, (i, j))


def write_correlator_csv(table: CorrelatorTable, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["i", "j", "mz_i", "mz_j", "txx", "tyy", "tzz"])
    for k in range(len(table)):
        (i, j), mzi, mzj, txx, tyy, tzz = table.entry(k)
        w.writerow([i, j, repr(float(mzi)), repr(float(mzj)), repr(txx), repr(tyy), repr(tzz)])


def write_g_csv(sol: GroundSolution, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    for row in sol.g_matrix:
        w.writerow([repr(float(x)) for x in row])
