import io

import numpy as np
import pytest

from qclength.model import (
    ChainSpec,
    DisorderSpec,
    ordered_realization,
    read_realizations,
    realization_rng,
    sample_realization,
    write_realizations,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        ChainSpec(1)
    with pytest.raises(ValueError):
        ChainSpec(8, delta=0.1, model_kind="XYZ", boundary="periodic")
    with pytest.raises(ValueError):
        ChainSpec(8, delta=0.1)
    with pytest.raises(ValueError):
        ChainSpec(8, kappa=2.0)
    assert ChainSpec(4).periodic
    assert ChainSpec(4).bonds()[-1] == (3, 0)
    assert len(ChainSpec(4, boundary="open").bonds()) == 3


def test_zero_width_disorder_is_exact():
    r = sample_realization(ChainSpec(10), DisorderSpec("coupling", 0.5, 0.0), 7, 3)
    assert np.all(r.couplings == 0.5)
    assert np.all(r.fields == 1.0)


def test_same_seed_and_index_bitwise_identical():
    spec, dis = ChainSpec(50), DisorderSpec("field", 1.0, 1.0)
    a = sample_realization(spec, dis, 123, 17)
    b = sample_realization(spec, dis, 123, 17)
    assert a.fields.tobytes() == b.fields.tobytes()
    c = sample_realization(spec, dis, 123, 18)
    assert not np.array_equal(a.fields, c.fields)


def test_sample_mean_converges():
    n, R = 50, 10_000
    spec, dis = ChainSpec(n), DisorderSpec("coupling", 0.5, 1.0)
    total = sum(sample_realization(spec, dis, 99, k).couplings.sum() for k in range(R))
    assert abs(total / (n * R) - 0.5) < 3 / np.sqrt(R * n)


def test_negative_values_kept():
    r = sample_realization(ChainSpec(200), DisorderSpec("coupling", 0.0, 1.0), 1, 0)
    assert np.any(r.couplings < 0)


def test_ordered_realization():
    r = ordered_realization(ChainSpec(50), 0.5, 1.0)
    assert np.all(r.couplings == 0.5) and np.all(r.fields == 1.0)
    d = ordered_realization(ChainSpec(2), 0.0, 1.0)
    assert np.all(d.couplings == 0.0)
    for target, kw in (("coupling", {"h": 1.0}), ("field", {"j": 0.5})):
        mean = 0.5 if target == "coupling" else 1.0
        s = sample_realization(ChainSpec(6), DisorderSpec(target, mean, 0.0), 0, 0, **kw)
        assert np.array_equal(s.couplings, r.couplings[:6])
        assert np.array_equal(s.fields, r.fields[:6])


def test_target_none_ignores_std():
    r = sample_realization(ChainSpec(6), DisorderSpec("none", 0.8, 5.0), 0, 0)
    assert np.all(r.couplings == 0.8)


def test_rng_streams_independent_of_order():
    draws_fwd = [realization_rng(5, k).normal() for k in range(5)]
    draws_rev = [realization_rng(5, k).normal() for k in reversed(range(5))][::-1]
    assert draws_fwd == draws_rev
    with pytest.raises(ValueError):
        realization_rng(5, -1)


def test_realization_text_round_trip():
    spec = ChainSpec(5)
    rs = [sample_realization(spec, DisorderSpec("coupling", 0.5, 1.0), 3, k) for k in range(4)]
    buf = io.StringIO()
    write_realizations(rs, buf)
    back = read_realizations(io.StringIO(buf.getvalue()), spec)
    for a, b in zip(rs, back):
        assert a.realization_index == b.realization_index
        assert np.array_equal(a.couplings, b.couplings)
        assert np.array_equal(a.fields, b.fields)
