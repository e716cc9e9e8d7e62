import numpy as np
import pytest

from oracles import dense_hamiltonian
from qclength import ed, freefermion as ff
from qclength.model import ChainSpec, DisorderSpec, ordered_realization, sample_realization
from qclength.mps import (
    DmrgConfig,
    DmrgConvergenceError,
    MpsState,
    central_pairs,
    dmrg_ground_state,
    gauge_violation,
    load_checkpoint,
    mpo_expectation,
    move_center,
    mps_two_site_rdm,
    norm,
    save_checkpoint,
    xyz_mpo,
)
from qclength.qcorr import concurrence


def _xyz(n, delta):
    return ChainSpec(n, gamma=0.5, delta=delta, boundary="open", model_kind="XYZ")


def _random_xyz(n, delta, seed=3):
    return sample_realization(_xyz(n, delta), DisorderSpec("coupling", 0.5, 1.0), seed, 0)


def test_mpo_reproduces_hamiltonian():
    r = _random_xyz(5, 0.3)
    ws = xyz_mpo(r)
    full = ws[0][0]
    for w in ws[1:]:
        full = np.einsum("aij,abkl->bikjl", full, w).reshape(w.shape[1], full.shape[1] * 2, -1)
    H = full[-1] if full.shape[0] > 1 else full[0]
    ref = dense_hamiltonian(r.couplings, r.fields, 0.5, 0.3, periodic=False)
    assert np.allclose(H, ref.real, atol=1e-12)


def test_ordered_energy_matches_ed():
    r = ordered_realization(_xyz(8, 0.0), 0.5, 1.0)
    s = dmrg_ground_state(r, DmrgConfig(chi_max=32))
    assert s.energy == pytest.approx(ed.ed_ground_state(r).energy, abs=1e-8)


@pytest.mark.parametrize("delta", [0.1, 0.5])
def test_disordered_energy_and_rdms_match_ed(delta):
    r = _random_xyz(8, delta)
    s = dmrg_ground_state(r)
    e = ed.ed_ground_state(r)
    assert s.energy == pytest.approx(e.energy, abs=1e-8)
    for i, j in [(2, 3), (2, 5), (3, 5)]:
        d = np.abs(mps_two_site_rdm(s, i, j, margin=2).rho - ed.ed_two_site_rdm(e, i, j).rho).max()
        assert d < 1e-6


def test_free_fermion_limit_correlators():
    r = ordered_realization(_xyz(24, 0.0), 0.5, 1.0)
    s = dmrg_ground_state(r)
    pairs = central_pairs(24)
    t = ff.correlators(ff.solve_realization(r.with_spec(model_kind="XY")), pairs)
    for k, (i, j) in enumerate(pairs):
        assert np.abs(mps_two_site_rdm(s, i, j).rho - ff.two_site_rdm(t, k).rho).max() < 1e-5


def test_state_invariants():
    r = _random_xyz(12, 0.5, seed=8)
    s = dmrg_ground_state(r)
    assert norm(s) == pytest.approx(1.0, abs=1e-10)
    assert gauge_violation(s) < 1e-10
    assert mpo_expectation(s, xyz_mpo(r)) == pytest.approx(s.energy, abs=1e-10)
    e = np.array(s.sweep_energies)
    assert np.all(np.diff(e) <= 1e-12)


def test_regauging_preserves_observables():
    r = _random_xyz(10, 0.1, seed=4)
    s = dmrg_ground_state(r)
    moved = move_center(s, 7)
    assert moved.canonical_center == 7
    assert gauge_violation(moved) < 1e-10
    a = mps_two_site_rdm(s, 3, 6, margin=0).rho
    b = mps_two_site_rdm(moved, 3, 6, margin=0).rho
    assert np.abs(a - b).max() < 1e-10


def test_bond_dimension_convergence():
    r = _random_xyz(16, 0.5, seed=2)
    s1 = dmrg_ground_state(r, DmrgConfig(chi_max=16))
    s2 = dmrg_ground_state(r, DmrgConfig(chi_max=32))
    budget = max(np.sqrt(s1.truncation_error), 1e-6)
    for i, j in [(7, 8), (7, 10)]:
        d = np.abs(mps_two_site_rdm(s1, i, j).rho - mps_two_site_rdm(s2, i, j).rho).max()
        assert d < budget


def test_product_mps_gives_product_rdm():
    up = np.array([1.0, 0.0]).reshape(1, 2, 1)
    tilt = (np.array([np.cos(0.3), np.sin(0.3)])).reshape(1, 2, 1)
    s = MpsState((up, tilt, up, tilt), 0, 0.0, 0.0)
    with pytest.warns(RuntimeWarning):
        st = mps_two_site_rdm(s, 1, 2, margin=0)
    assert concurrence(st) == 0.0
    assert np.allclose(st.rho, np.kron(st.reduced(0), st.reduced(1)))


def test_margin_enforced():
    s = dmrg_ground_state(ordered_realization(_xyz(8, 0.1), 0.5, 1.0))
    with pytest.raises(ValueError):
        mps_two_site_rdm(s, 0, 3)
    assert central_pairs(24) == [(11, 11 + r) for r in range(1, 7)]


def test_strict_convergence_failure():
    with pytest.raises(DmrgConvergenceError):
        dmrg_ground_state(_random_xyz(8, 0.1), DmrgConfig(n_sweeps=1))
    s = dmrg_ground_state(_random_xyz(8, 0.1), DmrgConfig(n_sweeps=1, strict=False))
    assert not s.converged


def test_random_warmup_agrees():
    r = _random_xyz(10, 0.5, seed=6)
    a = dmrg_ground_state(r, DmrgConfig(warmup="random"))
    b = dmrg_ground_state(r)
    assert a.energy == pytest.approx(b.energy, abs=1e-8)


def test_rejects_periodic_or_xy():
    with pytest.raises(ValueError):
        dmrg_ground_state(ordered_realization(ChainSpec(8), 0.5, 1.0))


def test_checkpoint_round_trip(tmp_path):
    s = dmrg_ground_state(_random_xyz(8, 0.5))
    path = tmp_path / "state.qmps"
    save_checkpoint(s, path)
    back = load_checkpoint(path)
    assert back.energy == s.energy and back.canonical_center == s.canonical_center
    for a, b in zip(s.site_tensors, back.site_tensors):
        assert np.array_equal(a, b)
    bad = tmp_path / "bad"
    bad.write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_checkpoint(bad)
