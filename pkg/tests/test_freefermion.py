import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import dense_hamiltonian
from qclength import ed, freefermion as ff
from qclength.model import ChainSpec, DisorderSpec, ordered_realization, sample_realization


def _random(n, boundary, target, seed, gamma=0.5):
    mean = 1.0 if target == "field" else 0.7
    return sample_realization(ChainSpec(n, gamma=gamma, boundary=boundary), DisorderSpec(target, mean, 1.0), seed, 0)


def test_decoupled_spins_form():
    q = ff.build_quadratic_form(ordered_realization(ChainSpec(6), 0.0, 1.0))
    assert np.allclose(q.a_matrix, np.diag(np.diag(q.a_matrix)))
    assert not q.b_matrix.any()


def test_xx_chain_has_no_pairing():
    r = _random(6, "periodic", "coupling", 0, gamma=0.0)
    assert not ff.build_quadratic_form(r).b_matrix.any()


@pytest.mark.parametrize("boundary", ["periodic", "open"])
def test_form_symmetries(boundary):
    q = ff.build_quadratic_form(_random(7, boundary, "coupling", 3))
    assert np.allclose(q.a_matrix, q.a_matrix.T)
    assert np.allclose(q.b_matrix, -q.b_matrix.T)
    band = np.abs(np.subtract.outer(np.arange(7), np.arange(7))) > 1
    band[0, -1] = band[-1, 0] = False
    assert not q.a_matrix[band].any() and not q.b_matrix[band].any()


def test_quasiparticle_gaps_match_ed():
    r = _random(4, "open", "coupling", 5)
    q = ff.build_quadratic_form(r)
    lam = np.linalg.svd(q.a_matrix + q.b_matrix, compute_uv=False)
    spec = ed.ed_spectrum(r)
    # every single-quasiparticle excitation appears in the many-body spectrum
    e0 = spec[0]
    for l in lam:
        assert np.min(np.abs(spec - e0 - l)) < 1e-10


def test_polarized_chain():
    sol = ff.solve_realization(ordered_realization(ChainSpec(6), 0.0, 1.0))
    assert sol.energy == pytest.approx(-3.0)
    assert np.allclose(np.abs(sol.g_matrix), np.eye(6))
    t = ff.correlators(sol, [(0, 1), (1, 4)])
    assert np.allclose(t.mz, 1.0)
    assert np.allclose(t.tzz, 1.0)
    assert np.allclose(t.txx, 0.0) and np.allclose(t.tyy, 0.0)


def test_ising_energy_matches_ed():
    r = ordered_realization(ChainSpec(8, gamma=1.0), 0.5, 1.0)
    assert ff.solve_realization(r).energy == pytest.approx(ed.ed_ground_state(r).energy, abs=1e-10)


def test_factorization_point():
    g = 0.5
    sol = ff.solve_realization(ordered_realization(ChainSpec(50, gamma=g), 1 / np.sqrt(1 - g**2), 1.0))
    assert sol.degenerate
    pairs = [(0, r) for r in range(1, 26)]
    t = ff.correlators(sol, pairs)
    assert np.allclose(t.tzz, t.mz[0] * t.mz[1:26], atol=1e-9)


@pytest.mark.parametrize("boundary", ["periodic", "open"])
@pytest.mark.parametrize("target", ["coupling", "field", "none"])
def test_correlators_match_ed(boundary, target):
    n = 8
    for seed in range(4):
        r = _random(n, boundary, target, seed)
        sol = ff.solve_realization(r)
        s = ed.ed_ground_state(r)
        assert sol.energy == pytest.approx(s.energy, abs=1e-9)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        t = ff.correlators(sol, pairs)
        for k, (i, j) in enumerate(pairs):
            assert np.allclose(ff.two_site_rdm(t, k).rho, ed.ed_two_site_rdm(s, i, j).rho, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(3, 7),
    gamma=st.floats(0.0, 1.0),
    seed=st.integers(0, 2**32 - 1),
    periodic=st.booleans(),
)
def test_energy_matches_dense_oracle(n, gamma, seed, periodic):
    spec = ChainSpec(n, gamma=gamma, boundary="periodic" if periodic else "open")
    r = sample_realization(spec, DisorderSpec("coupling", 0.5, 1.0), seed, 0)
    e0 = np.linalg.eigvalsh(dense_hamiltonian(r.couplings, r.fields, gamma, periodic=periodic))[0]
    assert ff.solve_realization(r).energy == pytest.approx(e0, abs=1e-9)


def test_g_bounded_and_toeplitz():
    sol = ff.solve_realization(ordered_realization(ChainSpec(20, gamma=0.5), 0.8, 1.0))
    g = sol.g_matrix
    assert np.all(np.abs(g) <= 1 + 1e-12)
    for d in range(-5, 6):
        diag = np.diag(g, d)
        assert np.ptp(diag[2:-2]) < 1e-10


def test_translation_invariance_on_ring():
    sol = ff.solve_realization(ordered_realization(ChainSpec(16, gamma=0.5), 0.8, 1.0))
    for r in (1, 3, 6):
        t = ff.correlators(sol, [(i, i + r) for i in range(16 - r)])
        for arr in (t.txx, t.tyy, t.tzz):
            assert np.ptp(arr) < 1e-10


def test_string_formula_at_unit_distance():
    sol = ff.solve_realization(_random(10, "periodic", "coupling", 2))
    t = ff.correlators(sol, [(3, 4)])
    assert t.txx[0] == pytest.approx(sol.g_matrix[3, 4])
    assert t.tyy[0] == pytest.approx(sol.g_matrix[4, 3])


def test_zero_correlators_give_maximally_mixed():
    t = ff.CorrelatorTable([(0, 1)], np.zeros(2), np.zeros(1), np.zeros(1), np.zeros(1))
    assert np.allclose(ff.two_site_rdm(t, 0).rho, np.eye(4) / 4)


def test_up_up_state():
    t = ff.CorrelatorTable([(0, 1)], np.ones(2), np.zeros(1), np.zeros(1), np.ones(1))
    rho = ff.two_site_rdm(t, 0).rho
    assert rho[0, 0] == pytest.approx(1.0)
    assert np.allclose(rho[1:, 1:], 0)


def test_pair_validation():
    sol = ff.solve_realization(ordered_realization(ChainSpec(6), 0.5, 1.0))
    with pytest.raises(ValueError):
        ff.correlators(sol, [(3, 3)])


def test_csv_dumps():
    sol = ff.solve_realization(ordered_realization(ChainSpec(6), 0.5, 1.0))
    buf = io.StringIO()
    ff.write_correlator_csv(ff.correlators(sol, [(0, 1), (0, 2)]), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "i,j,mz_i,mz_j,txx,tyy,tzz"
    assert len(lines) == 3
    buf = io.StringIO()
    ff.write_g_csv(sol, buf)
    back = np.loadtxt(io.StringIO(buf.getvalue()), delimiter=",")
    assert np.array_equal(back, sol.g_matrix)


def test_parity_of_ground_state():
    sol = ff.solve_realization(ordered_realization(ChainSpec(8), 0.5, 1.0))
    assert abs(ff.fermion_parity(sol.g_matrix)) == pytest.approx(1.0)
