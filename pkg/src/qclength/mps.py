"""Two-site finite DMRG for the open XYZ chain.

Tensor conventions: MPS site tensors ``(left, phys, right)``; MPO tensors
``(left, right, bra, ket)``; environments ``(ket, mpo, bra)``.  Everything is
real since the Hamiltonian is.
"""
from __future__ import annotations

import io
import logging
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import linalg as sla

from .model import Realization
from .qcorr import TwoSiteState, _OFF_X

log = logging.getLogger(__name__)

_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_IY = np.array([[0.0, 1.0], [-1.0, 0.0]])  # i * sigma^y, real
_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
_ID = np.eye(2)

CHECKPOINT_MAGIC = b"QCLMPS"
CHECKPOINT_VERSION = 1


class DmrgError(RuntimeError):
    pass


class DmrgConvergenceError(DmrgError):
    def __init__(self, message, last_energies):
        super().__init__(f"{message}; last sweep energies {last_energies}")
        self.last_energies = last_energies


@dataclass(frozen=True)
class DmrgConfig:
    chi_max: int = 64
    n_sweeps: int = 8
    energy_tol: float = 1e-9
    warmup: str = "infinite"
    svd_cutoff: float = 1e-14
    max_truncation: float = 1e-6
    strict: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.chi_max < 2:
            raise ValueError("chi_max must be >= 2")
        if self.n_sweeps < 1:
            raise ValueError("n_sweeps must be >= 1")
        if self.warmup not in ("infinite", "random"):
            raise ValueError(f"warmup must be 'infinite' or 'random', got {self.warmup!r}")


@dataclass(frozen=True)
class MpsState:
    site_tensors: tuple[np.ndarray, ...]
    canonical_center: int
    energy: float
    truncation_error: float
    sweep_energies: tuple[float, ...] = ()
    converged: bool = True
    metadata: dict = field(default_factory=dict)

    @property
    def n_sites(self) -> int:
        return len(self.site_tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.site_tensors[:-1]]


def xyz_mpo(r: Realization) -> list[np.ndarray]:
    """MPO of the open XYZ chain with bond couplings ``r.couplings[:-1]``."""
    spec = r.spec
    n = spec.n_sites
    g, delta = spec.gamma, spec.delta
    ws = []
    for i in range(n):
        w = np.zeros((5, 5, 2, 2))
        w[0, 0] = _ID
        w[1, 0] = _X
        w[2, 0] = _IY
        w[3, 0] = _Z
        w[4, 4] = _ID
        w[4, 0] = -0.5 * r.fields[i] * _Z
        if i < n - 1:
            jj = r.couplings[i]
            w[4, 1] = 0.25 * jj * (1 + g) * _X
            # sigma^y sigma^y = -(i sigma^y)(i sigma^y)
            w[4, 2] = -0.25 * jj * (1 - g) * _IY
            w[4, 3] = 0.25 * delta * _Z
        ws.append(w)
    ws[0] = ws[0][4:5]
    ws[-1] = ws[-1][:, 0:1]
    return ws


def _left_env(env, a, w):
    t = np.tensordot(env, a, axes=(0, 0))  # (w, y, s, X)
    t = np.tensordot(t, w, axes=([0, 2], [0, 3]))  # (y, X, W, t)
    return np.tensordot(t, a, axes=([0, 3], [0, 1]))  # (X, W, Y)


def _right_env(env, b, w):
    t = np.tensordot(b, env, axes=(2, 0))  # (x, s, W, Y)
    t = np.tensordot(t, w, axes=([1, 2], [3, 1]))  # (x, Y, w, t)
    return np.tensordot(t, b, axes=([3, 1], [1, 2]))  # (x, w, y)


class _TwoSiteOperator(sla.LinearOperator):
    def __init__(self, lenv, w1, w2, renv):
        self.lenv, self.w1, self.w2, self.renv = lenv, w1, w2, renv
        self.tshape = (lenv.shape[0], w1.shape[3], w2.shape[3], renv.shape[0])
        n = int(np.prod(self.tshape))
        super().__init__(dtype=np.float64, shape=(n, n))

    def _matvec(self, v):
        th = v.reshape(self.tshape)
        t = np.tensordot(self.lenv, th, axes=(0, 0))  # (w, y, s1, s2, X)
        t = np.tensordot(t, self.w1, axes=([0, 2], [0, 3]))  # (y, s2, X, m, t1)
        t = np.tensordot(t, self.w2, axes=([3, 1], [0, 3]))  # (y, X, t1, W, t2)
        t = np.tensordot(t, self.renv, axes=([1, 3], [0, 1]))  # (y, t1, t2, Y)
        return t.reshape(-1)


def _ground(op: _TwoSiteOperator, v0: np.ndarray | None):
    n = op.shape[0]
    if n <= 256:
        h = op.matmat(np.eye(n))
        h = 0.5 * (h + h.T)
        w, v = np.linalg.eigh(h)
        return float(w[0]), v[:, 0]
    if v0 is not None and np.linalg.norm(v0) == 0:
        v0 = None
    w, v = sla.eigsh(op, k=1, which="SA", v0=v0, tol=1e-13, ncv=min(n, 24), maxiter=5000)
    return float(w[0]), v[:, 0]


def _split(theta, chi_max, cutoff):
    """SVD of a two-site tensor with truncation; returns U, S, V, discarded weight."""
    cl, d1, d2, cr = theta.shape
    u, s, vt = np.linalg.svd(theta.reshape(cl * d1, d2 * cr), full_matrices=False)
    w = s**2
    total = w.sum()
    # smallest kept set whose discarded weight is below cutoff
    tail = np.cumsum(w[::-1])[::-1] / total
    keep = int(np.sum(tail > cutoff))
    keep = max(1, min(keep, chi_max))
    discarded = float(w[keep:].sum() / total)
    s = s[:keep] / np.linalg.norm(s[:keep])
    return u[:, :keep].reshape(cl, d1, keep), s, vt[:keep].reshape(keep, d2, cr), discarded


def _random_mps(n, chi, rng):
    dims = [1]
    for i in range(1, n):
        dims.append(min(chi, 2**i, 2 ** (n - i)))
    dims.append(1)
    ms = [rng.standard_normal((dims[i], 2, dims[i + 1])) for i in range(n)]
    return _right_canonicalize(ms)


def _right_canonicalize(ms):
    ms = list(ms)
    for i in range(len(ms) - 1, 0, -1):
        cl, d, cr = ms[i].shape
        q, r = np.linalg.qr(ms[i].reshape(cl, d * cr).T)
        ms[i] = q.T.reshape(-1, d, cr)
        ms[i - 1] = np.tensordot(ms[i - 1], r.T, axes=(2, 0))
    ms[0] = ms[0] / np.linalg.norm(ms[0])
    return ms


def _infinite_warmup(ws, cfg, rng):
    """Grow the chain from both ends inward, two sites per step."""
    n = len(ws)
    lenv = np.ones((1, 1, 1))
    renv = np.ones((1, 1, 1))
    left, right = [], []
    trunc = 0.0
    energy = np.nan
    for k in range(n // 2):
        lsite, rsite = k, n - 1 - k
        op = _TwoSiteOperator(lenv, ws[lsite], ws[rsite], renv)
        v0 = rng.standard_normal(op.shape[0])
        energy, v = _ground(op, v0)
        u, s, vt, disc = _split(v.reshape(op.tshape), cfg.chi_max, cfg.svd_cutoff)
        trunc += disc
        if k == n // 2 - 1:
            left.append(u * s[None, None, :])
            right.append(vt)
            break
        left.append(u)
        right.append(vt)
        lenv = _left_env(lenv, u, ws[lsite])
        renv = _right_env(renv, vt, ws[rsite])
    ms = left + right[::-1]
    return _right_canonicalize(ms), energy, trunc


def dmrg_ground_state(r: Realization, cfg: DmrgConfig | None = None) -> MpsState:
    """Variational ground state of the open XYZ chain ``r``.

    Sweeps stop once the energy changes by less than ``cfg.energy_tol``
    between consecutive sweeps.
    """
    cfg = cfg or DmrgConfig()
    spec = r.spec
    if spec.model_kind != "XYZ" or spec.boundary != "open":
        raise ValueError("DMRG handles open XYZ chains only")
    n = spec.n_sites
    ws = xyz_mpo(r)
    rng = np.random.default_rng(cfg.seed)
    trunc = 0.0
    warm = cfg.warmup
    if warm == "infinite" and n % 2 == 0:
        try:
            ms, _, trunc = _infinite_warmup(ws, cfg, rng)
        except (np.linalg.LinAlgError, sla.ArpackNoConvergence) as exc:
            log.warning("infinite-size warmup failed (%s); using random start", exc)
            warm = "random"
    else:
        warm = "random"
    if warm == "random":
        ms = _random_mps(n, cfg.chi_max, rng)

    # right environments for a center at site 0
    renvs = [None] * n
    renvs[n - 1] = np.ones((1, 1, 1))
    for i in range(n - 1, 0, -1):
        renvs[i - 1] = _right_env(renvs[i], ms[i], ws[i])
    lenvs = [None] * n
    lenvs[0] = np.ones((1, 1, 1))

    sweep_energies = []
    energy = np.nan
    converged = False
    for sweep in range(cfg.n_sweeps):
        for i in range(n - 1):
            theta = np.tensordot(ms[i], ms[i + 1], axes=(2, 0))
            op = _TwoSiteOperator(lenvs[i], ws[i], ws[i + 1], renvs[i + 1])
            energy, v = _ground(op, theta.reshape(-1))
            u, s, vt, disc = _split(v.reshape(op.tshape), cfg.chi_max, cfg.svd_cutoff)
            trunc += disc
            ms[i] = u
            ms[i + 1] = s[:, None, None] * vt
            lenvs[i + 1] = _left_env(lenvs[i], u, ws[i])
        for i in range(n - 2, -1, -1):
            theta = np.tensordot(ms[i], ms[i + 1], axes=(2, 0))
            op = _TwoSiteOperator(lenvs[i], ws[i], ws[i + 1], renvs[i + 1])
            energy, v = _ground(op, theta.reshape(-1))
            u, s, vt, disc = _split(v.reshape(op.tshape), cfg.chi_max, cfg.svd_cutoff)
            trunc += disc
            ms[i] = u * s[None, None, :]
            ms[i + 1] = vt
            renvs[i] = _right_env(renvs[i + 1], vt, ws[i + 1])
        sweep_energies.append(energy)
        if len(sweep_energies) >= 2 and abs(sweep_energies[-1] - sweep_energies[-2]) < cfg.energy_tol:
            converged = True
            break
    if not converged and cfg.strict:
        raise DmrgConvergenceError(
            f"no convergence within {cfg.n_sweeps} sweeps", tuple(sweep_energies[-2:])
        )
    if trunc > cfg.max_truncation and max(t.shape[2] for t in ms) >= cfg.chi_max:
        raise DmrgError(f"chi_max={cfg.chi_max} exhausted: truncation error {trunc:.2e}")
    return MpsState(
        tuple(np.array(t) for t in ms),
        0,
        float(energy),
        float(trunc),
        tuple(float(e) for e in sweep_energies),
        converged,
        {"warmup": warm, "chi_max": cfg.chi_max},
    )


def norm(s: MpsState) -> float:
    env = np.ones((1, 1))
    for t in s.site_tensors:
        env = np.einsum("xy,xsa,ysb->ab", env, t, t)
    return float(np.sqrt(env[0, 0]))


def mpo_expectation(s: MpsState, ws: list[np.ndarray]) -> float:
    env = np.ones((1, 1, 1))
    for t, w in zip(s.site_tensors, ws):
        env = _left_env(env, t, w)
    return float(env[0, 0, 0])


def move_center(s: MpsState, site: int) -> MpsState:
    """Re-gauge so that ``site`` holds the orthogonality center."""
    ms = list(s.site_tensors)
    c = s.canonical_center
    while c < site:
        cl, d, cr = ms[c].shape
        q, rr = np.linalg.qr(ms[c].reshape(cl * d, cr))
        ms[c] = q.reshape(cl, d, -1)
        ms[c + 1] = np.tensordot(rr, ms[c + 1], axes=(1, 0))
        c += 1
    while c > site:
        cl, d, cr = ms[c].shape
        q, rr = np.linalg.qr(ms[c].reshape(cl, d * cr).T)
        ms[c] = q.T.reshape(-1, d, cr)
        ms[c - 1] = np.tensordot(ms[c - 1], rr.T, axes=(2, 0))
        c -= 1
    return MpsState(tuple(ms), c, s.energy, s.truncation_error, s.sweep_energies, s.converged, dict(s.metadata))


def gauge_violation(s: MpsState) -> float:
    """Largest deviation from left (right) orthonormality left (right) of the center."""
    worst = 0.0
    for i, t in enumerate(s.site_tensors):
        if i < s.canonical_center:
            m = np.tensordot(t, t, axes=([0, 1], [0, 1]))
        elif i > s.canonical_center:
            m = np.tensordot(t, t, axes=([1, 2], [1, 2]))
        else:
            continue
        worst = max(worst, float(np.abs(m - np.eye(m.shape[0])).max()))
    return worst


def _raw_two_site_rdm(s: MpsState, i: int, j: int) -> np.ndarray:
    s = move_center(s, i)
    ms = s.site_tensors
    e = np.einsum("asb,atc->stbc", ms[i], ms[i])
    for k in range(i + 1, j):
        e = np.einsum("stbc,bud,cue->stde", e, ms[k], ms[k])
    rho = np.einsum("stbc,bud,cvd->sutv", e, ms[j], ms[j])
    return rho.reshape(4, 4)


def mps_two_site_rdm(
    s: MpsState, i: int, j: int, margin: int | None = None, off_x_tol: float = 1e-6
) -> TwoSiteState:
    """Two-site density matrix of sites ``i < j`` away from the chain ends.

    Parity-odd (off-X) entries are removed; a warning is issued when they
    exceed ``off_x_tol``, which signals a symmetry-broken MPS.
    """
    n = s.n_sites
    if margin is None:
        margin = n // 4
    if not 0 <= i < j < n:
        raise ValueError(f"need 0 <= i < j < {n}, got ({i}, {j})")
    if min(i, n - 1 - j) < margin:
        raise ValueError(f"sites ({i}, {j}) closer than {margin} to the boundary")
    rho = _raw_two_site_rdm(s, i, j)
    off = max(abs(rho[a, b]) for a, b in _OFF_X)
    if off > off_x_tol:
        warnings.warn(
            f"two-site RDM ({i},{j}) has parity-odd weight {off:.2e}; symmetrizing",
            RuntimeWarning,
            stacklevel=2,
        )
    for a, b in _OFF_X:
        rho[a, b] = 0.0
    return TwoSiteState(rho, (i, j))


def central_pairs(n: int, margin: int | None = None) -> list[tuple[int, int]]:
    """Pairs (c, c + r) with ``c`` the central site (N/2-th, 1-based)."""
    margin = n // 4 if margin is None else margin
    c = n // 2 - 1
    return [(c, c + r) for r in range(1, n - margin - c)]


def save_checkpoint(s: MpsState, path) -> None:
    buf = io.BytesIO()
    arrays = {f"site_{k}": t for k, t in enumerate(s.site_tensors)}
    np.savez(
        buf,
        canonical_center=s.canonical_center,
        energy=s.energy,
        truncation_error=s.truncation_error,
        sweep_energies=np.array(s.sweep_energies),
        converged=s.converged,
        **arrays,
    )
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + struct.pack("<HI", CHECKPOINT_VERSION, len(s.site_tensors)))
        fh.write(buf.getvalue())


def load_checkpoint(path) -> MpsState:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not an MPS checkpoint")
    off = len(CHECKPOINT_MAGIC)
    version, n = struct.unpack("<HI", data[off : off + 6])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    z = np.load(io.BytesIO(data[off + 6 :]))
    return MpsState(
        tuple(z[f"site_{k}"] for k in range(n)),
        int(z["canonical_center"]),
        float(z["energy"]),
        float(z["truncation_error"]),
        tuple(float(e) for e in z["sweep_energies"]),
        bool(z["converged"]),
    )
