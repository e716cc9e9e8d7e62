"""Exact diagonalization oracle for small XY/XYZ chains.

Basis states are integers whose bit ``N-1-i`` is the state of site ``i``
(0 = up), so site 0 is the leftmost Kronecker factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as sla

from .model import Realization
from .qcorr import TwoSiteState

MAX_SITES = 14
DENSE_SITES = 12
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class ManyBodyState:
    amplitudes: np.ndarray
    energy: float
    degeneracy_multiplicity: int
    n_sites: int


def _bits(n: int) -> np.ndarray:
    states = np.arange(2**n, dtype=np.int64)
    return (states[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


def hamiltonian(r: Realization) -> sparse.csr_matrix:
    """Sparse Hamiltonian of the chain in the sigma^z basis."""
    spec = r.spec
    n = spec.n_sites
    dim = 2**n
    bits = _bits(n)
    spin_z = 1 - 2 * bits
    diag = -0.5 * (spin_z @ r.fields)
    rows, cols, vals = [], [], []
    states = np.arange(dim, dtype=np.int64)
    g = spec.gamma
    for k, (i, j) in enumerate(spec.bonds()):
        jk = r.couplings[k]
        same = bits[:, i] == bits[:, j]
        # (1+g) XX + (1-g) YY flips both spins: amplitude 2g if aligned, 2 if not
        amp = 0.25 * jk * np.where(same, 2.0 * g, 2.0)
        flipped = states ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
        rows.append(flipped)
        cols.append(states)
        vals.append(amp)
        if spec.delta != 0.0:
            diag = diag + 0.25 * spec.delta * spin_z[:, i] * spin_z[:, j]
    rows.append(states)
    cols.append(states)
    vals.append(diag)
    h = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    return h.tocsr()


def parity_of_states(n: int) -> np.ndarray:
    """Eigenvalue of prod_i sigma^z_i for each basis state."""
    return 1 - 2 * (_bits(n).sum(axis=1) % 2)


def _lowest(hblock: sparse.csr_matrix, n: int, k: int = 1):
    if n <= DENSE_SITES or hblock.shape[0] <= k + 1:
        k = min(k, hblock.shape[0])
        return linalg.eigh(hblock.toarray(), subset_by_index=[0, k - 1])
    w, v = sla.eigsh(hblock, k=k, which="SA", tol=1e-13, maxiter=20000)
    order = np.argsort(w)
    return w[order], v[:, order]


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = np.argmax(np.abs(v))
    return v * (np.conj(v[k]) / abs(v[k]))


def ed_ground_state(r: Realization, degeneracy_tol: float = DEGENERACY_TOL) -> ManyBodyState:
    """Ground state of the chain, resolved by spin-flip parity.

    The Hamiltonian commutes with ``prod sigma^z``.  The lowest state of each
    parity block is found; if the two agree within ``degeneracy_tol`` the
    equal-weight superposition is returned, each vector made real-positive
    at its largest-magnitude amplitude first.
    """
    n = r.spec.n_sites
    if n > MAX_SITES:
        raise ValueError(f"exact diagonalization limited to N <= {MAX_SITES}, got {n}")
    h = hamiltonian(r)
    par = parity_of_states(n)
    cands = []
    for p in (1, -1):
        idx = np.flatnonzero(par == p)
        w, v = _lowest(h[idx][:, idx], n)
        full = np.zeros(2**n, dtype=complex)
        full[idx] = v[:, 0]
        cands.append((float(w[0]), _fix_phase(full)))
    cands.sort(key=lambda c: c[0])
    (e0, v0), (e1, v1) = cands
    if not np.isfinite(e0):
        raise RuntimeError("eigensolver failure")
    if abs(e1 - e0) <= degeneracy_tol:
        psi = (v0 + v1) / np.sqrt(2.0)
        return ManyBodyState(psi / np.linalg.norm(psi), e0, 2, n)
    return ManyBodyState(v0 / np.linalg.norm(v0), e0, 1, n)


def ed_spectrum(r: Realization) -> np.ndarray:
    """All many-body energies (dense, small N only)."""
    if r.spec.n_sites > DENSE_SITES:
        raise ValueError("full spectrum only for N <= 12")
    return np.linalg.eigvalsh(hamiltonian(r).toarray())


def expectation(s: ManyBodyState, op: sparse.spmatrix) -> complex:
    return complex(np.vdot(s.amplitudes, op @ s.amplitudes))


def ed_two_site_rdm(s: ManyBodyState, i: int, j: int) -> TwoSiteState:
    """Reduced density matrix of sites ``i < j`` by direct partial trace."""
    n = s.n_sites
    if not 0 <= i < j < n:
        raise ValueError(f"need 0 <= i < j < {n}, got ({i}, {j})")
    psi = s.amplitudes.reshape((2,) * n)
    rest = [k for k in range(n) if k not in (i, j)]
    m = np.transpose(psi, [i, j] + rest).reshape(4, -1)
    return TwoSiteState(m @ m.conj().T, (i, j))


def ed_one_site_rdm(s: ManyBodyState, i: int) -> np.ndarray:
    n = s.n_sites
    psi = s.amplitudes.reshape((2,) * n)
    m = np.moveaxis(psi, i, 0).reshape(2, -1)
    return m @ m.conj().T
