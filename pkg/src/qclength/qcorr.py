"""Two-qubit quantum correlation measures.

Conventions: computational basis ``|0> = |up>`` (sigma^z = +1), the first
tensor factor is the first site of the pair, entropies in bits.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (I2, SX, SY, SZ)
SYSY = np.kron(SY, SY)
# PAULI_BASIS[mu, nu] = sigma_mu (x) sigma_nu
PAULI_BASIS = np.array([[np.kron(a, b) for b in PAULI] for a in PAULI])

EIG_FLOOR = 1e-12
PSD_TOL = 1e-9
XFORM_TOL = 1e-8

# (row, col) positions of a 4x4 matrix outside the diagonal and anti-diagonal
_OFF_X = [(r, c) for r in range(4) for c in range(4) if r != c and r + c != 3]


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class TwoSiteState:
    """Validated two-qubit density matrix of sites ``labels``."""

    rho: np.ndarray
    labels: tuple[int, int] = (0, 1)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise InvalidStateError(f"expected a 4x4 matrix, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise InvalidStateError("density matrix has non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise InvalidStateError("density matrix is not Hermitian")
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-10:
            raise InvalidStateError(f"trace {tr!r} differs from 1")
        lam_min = np.linalg.eigvalsh(rho)[0]
        if lam_min < -PSD_TOL:
            raise InvalidStateError(f"negative eigenvalue {lam_min:.3e}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "labels", tuple(self.labels))

    @cached_property
    def _pauli(self) -> np.ndarray:
        return pauli_components(self.rho)

    def pauli_matrix(self) -> np.ndarray:
        """Real 4x4 array ``R[mu, nu] = Tr(rho sigma_mu x sigma_nu)``."""
        return self._pauli.copy()

    def is_x_form(self, tol: float = XFORM_TOL) -> bool:
        return max(abs(self.rho[r, c]) for r, c in _OFF_X) <= tol

    def reduced(self, which: int) -> np.ndarray:
        t = self.rho.reshape(2, 2, 2, 2)
        if which == 0:
            return np.einsum("ajbj->ab", t)
        return np.einsum("jajb->ab", t)


def pauli_components(rho: np.ndarray) -> np.ndarray:
    return np.einsum("mnab,ba->mn", PAULI_BASIS, rho).real


def from_pauli_components(r: np.ndarray) -> np.ndarray:
    return np.einsum("mn,mnab->ab", r, PAULI_BASIS) / 4.0


def x_state(mz_i, mz_j, txx, tyy, tzz, labels=(0, 1)) -> TwoSiteState:
    """Density matrix built from the z magnetizations and diagonal correlators."""
    r = np.zeros((4, 4))
    r[0, 0] = 1.0
    r[3, 0] = mz_i
    r[0, 3] = mz_j
    r[1, 1], r[2, 2], r[3, 3] = txx, tyy, tzz
    return TwoSiteState(from_pauli_components(r), labels)


def binary_entropy(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return np.where((x <= 0) | (x >= 1), 0.0, h)


def von_neumann_entropy(rho: np.ndarray) -> float:
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > EIG_FLOOR]
    return float(-np.sum(lam * np.log2(lam)))


def concurrence(state: TwoSiteState) -> float:
    """Wootters concurrence in ebits."""
    rho = state.rho
    rho_tilde = SYSY @ rho.conj() @ SYSY
    ev = np.linalg.eigvals(rho @ rho_tilde).real
    lam = np.sort(np.sqrt(np.clip(ev, 0.0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def mutual_information(state: TwoSiteState) -> float:
    return (
        von_neumann_entropy(state.reduced(0))
        + von_neumann_entropy(state.reduced(1))
        - von_neumann_entropy(state.rho)
    )


@dataclass(frozen=True)
class DiscordResult:
    mutual_information: float
    classical_correlation: float
    discord: float
    optimal_measurement: tuple[float, float]
    method: str


def _bloch_direction(theta, phi):
    return np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)],
        axis=-1,
    )


def conditional_entropy(r: np.ndarray, theta, phi):
    """Post-measurement entropy of the unmeasured qubit.

    ``r`` is the Pauli matrix oriented so that the measured qubit is the row
    index.  Works on arrays of angles.
    """
    n = _bloch_direction(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    a = r[1:, 0]
    b = r[0, 1:]
    t = r[1:, 1:]
    na = n @ a
    tn = n @ t
    total = np.zeros(np.shape(na))
    for sign in (1.0, -1.0):
        p = 0.5 * (1.0 + sign * na)
        safe = np.where(p > 1e-15, p, 1.0)
        v = (b + sign * tn) / (2.0 * safe)[..., None]
        norm = np.linalg.norm(v, axis=-1)
        total = total + np.where(p > 1e-15, p * binary_entropy(0.5 * (1.0 + norm)), 0.0)
    return total


def _oriented(state: TwoSiteState, measured_party: str) -> np.ndarray:
    r = state.pauli_matrix()
    if measured_party == "first":
        return r
    if measured_party == "second":
        return r.T
    raise ValueError(f"measured_party must be 'first' or 'second', got {measured_party!r}")


def closed_form_applicable(state: TwoSiteState, measured_party: str = "first", tol: float = XFORM_TOL) -> bool:
    """Whether the sigma^x measurement is optimal for ``state``.

    Requires an X state with ``|T^xx| >= |T^yy|`` in which sigma^x leaves no
    more conditional entropy than sigma^z; the optimum of such states lies at
    one of these two axes.
    """
    if not state.is_x_form(tol):
        return False
    r = state._pauli
    if abs(r[1, 2]) > tol or abs(r[2, 1]) > tol:
        return False
    if abs(r[1, 1]) < abs(r[2, 2]) - tol:
        return False
    ro = _oriented(state, measured_party)
    s_x, s_z = conditional_entropy(ro, np.array([np.pi / 2, 0.0]), np.zeros(2))
    return bool(s_x <= s_z + tol)


def discord(
    state: TwoSiteState,
    measured_party: str = "first",
    method: str = "xstate_closed_form",
    *,
    grid: tuple[int, int] = (60, 120),
    refine_tol: float = 1e-8,
) -> DiscordResult:
    """Quantum discord with a projective measurement on ``measured_party``.

    ``method='xstate_closed_form'`` uses the sigma^x measurement, valid when
    :func:`closed_form_applicable` holds.  ``method='numeric_minimization'``
    scans the Bloch sphere on a ``grid`` of (theta, phi) points and polishes
    the best point with Nelder-Mead.  ``method='auto'`` picks the closed
    form where it applies and the numeric search otherwise.
    """
    r = _oriented(state, measured_party)
    if method == "auto":
        method = "xstate_closed_form" if closed_form_applicable(state, measured_party) else "numeric_minimization"
    unmeasured = state.reduced(1 if measured_party == "first" else 0)
    s_unmeasured = von_neumann_entropy(unmeasured)
    mi = mutual_information(state)

    if method == "xstate_closed_form":
        if not closed_form_applicable(state, measured_party):
            raise ValueError("closed form requires an X state whose optimal measurement is sigma^x")
        m = r[0, 3]
        p = np.hypot(m, r[1, 1])
        j_cl = float(binary_entropy((1 + m) / 2) - binary_entropy((1 + p) / 2))
        angles = (np.pi / 2, 0.0)
    elif method == "numeric_minimization":
        n_theta, n_phi = grid
        # theta in [0, pi/2] suffices: n and -n give the same measurement
        th = np.linspace(0.0, np.pi / 2, n_theta)
        ph = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
        tt, pp = np.meshgrid(th, ph, indexing="ij")
        vals = conditional_entropy(r, tt, pp)
        k = np.unravel_index(np.argmin(vals), vals.shape)
        x0 = np.array([tt[k], pp[k]])
        res = optimize.minimize(
            lambda x: float(conditional_entropy(r, x[0], x[1])),
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": refine_tol * 1e-2, "maxiter": 2000},
        )
        best = min(float(res.fun), float(vals[k]))
        angles = (float(res.x[0]), float(res.x[1])) if res.fun <= vals[k] else (float(x0[0]), float(x0[1]))
        j_cl = s_unmeasured - best
    else:
        raise ValueError(f"unknown discord method {method!r}")

    return DiscordResult(
        mutual_information=mi,
        classical_correlation=j_cl,
        discord=mi - j_cl,
        optimal_measurement=angles,
        method=method,
    )


def classical_correlation(state: TwoSiteState, measured_party: str = "first", method: str = "xstate_closed_form") -> float:
    return discord(state, measured_party, method).classical_correlation


@dataclass(frozen=True)
class MonogamyReport:
    nodal_site: int
    pairwise_discords: np.ndarray
    sum: float
    witness_violated: bool


def monogamy_witness(discords, nodal_site: int = 0) -> MonogamyReport:
    """Sum the pairwise discords of a qubit nodal party with all others.

    A sum above 1 bit is incompatible with monogamy, because the discord
    between one qubit and the rest can not exceed 1.
    """
    d = np.asarray(discords, dtype=float)
    if d.size == 0:
        raise ValueError("no pairwise discords given")
    if np.any(d < -1e-9) or np.any(d > 1 + 1e-9):
        raise ValueError("pairwise discords of a qubit must lie in [0, 1]")
    total = float(np.sum(d))
    return MonogamyReport(nodal_site, d, total, total > 1.0)
