import numpy as np
import pytest

from tripflow.ingest import Trip
from tripflow.tensor import (
    FactorSet,
    MobilityTensor,
    NtfOptions,
    build_tensor,
    load_factors,
    ntf_decompose,
    reconstruction_error,
    save_factors,
)

from conftest import best_match_min_cosine, cosine, planted_rank3


class TestBuildTensor:
    def test_single_trip(self):
        x = build_tensor([Trip(9, 3, 7)], 10)
        assert x.entries == {(9, 3, 7): 1.0}
        assert x.dims == (168, 10, 10)

    def test_duplicates_accumulate(self):
        x = build_tensor([Trip(9, 3, 7), Trip(9, 3, 7)], 10)
        assert x.entries[(9, 3, 7)] == 2.0

    def test_entry_sum_conservation(self):
        rng = np.random.default_rng(1)
        trips = [Trip(int(rng.integers(0, 168)), int(rng.integers(0, 5)),
                      int(rng.integers(0, 5))) for _ in range(512)]
        assert build_tensor(trips, 5).entry_sum() == 512

    def test_bounds(self):
        with pytest.raises(IndexError):
            build_tensor([Trip(168, 0, 0)], 5)
        with pytest.raises(IndexError):
            build_tensor([Trip(0, 5, 0)], 5)


def rank1_tensor():
    """Brute-force outer product of three known non-negative vectors."""
    rng = np.random.default_rng(7)
    t = rng.uniform(0.5, 2.0, 12)
    p = rng.uniform(0.5, 2.0, 8)
    d = rng.uniform(0.5, 2.0, 9)
    entries = {}
    for i in range(12):
        for j in range(8):
            for k in range(9):
                entries[(i, j, k)] = float(t[i] * p[j] * d[k])
    return MobilityTensor(dims=(12, 8, 9), entries=entries), (t, p, d)


def exact_factor_set(t, p, d):
    scale = np.array([t.sum() * p.sum() * d.sum()])
    return FactorSet(r=1, time=(t / t.sum())[:, None], pickup=(p / p.sum())[:, None],
                     dropoff=(d / d.sum())[:, None], scale=scale)


class TestDecompose:
    def test_rank1_recovery(self):
        x, (t, p, d) = rank1_tensor()
        f, trace = ntf_decompose(x, 1)
        assert reconstruction_error(x, f) / x.frobenius_norm() < 1e-6
        assert cosine(f.time[:, 0], t) >= 0.999
        assert cosine(f.pickup[:, 0], p) >= 0.999
        assert cosine(f.dropoff[:, 0], d) >= 0.999
        assert trace.converged

    def test_fixed_seed_bit_identical(self):
        x, _ = rank1_tensor()
        f1, _ = ntf_decompose(x, 1, NtfOptions(seed=42))
        f2, _ = ntf_decompose(x, 1, NtfOptions(seed=42))
        assert np.array_equal(f1.time, f2.time)
        assert np.array_equal(f1.pickup, f2.pickup)
        assert np.array_equal(f1.dropoff, f2.dropoff)
        assert np.array_equal(f1.scale, f2.scale)

    def test_planted_three_components(self):
        x, generators = planted_rank3()
        f, trace = ntf_decompose(x, 3, NtfOptions(seed=42))
        assert best_match_min_cosine(f, generators) >= 0.95
        errors = np.asarray(trace.errors)
        assert (np.diff(errors) <= 1e-12).all()

    def test_trace_monotone_and_bounded_by_init(self):
        x, _ = rank1_tensor()
        _, trace = ntf_decompose(x, 2, NtfOptions(seed=11, max_iters=50, rel_tol=0.0))
        errors = np.asarray(trace.errors)
        assert (np.diff(errors) <= 1e-12).all()
        assert errors[-1] <= errors[0]

    def test_all_zero_tensor_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            ntf_decompose(MobilityTensor(dims=(4, 4, 4), entries={}), 1)

    def test_overcomplete_flagged(self):
        x, _ = rank1_tensor()
        _, trace = ntf_decompose(x, 9, NtfOptions(seed=1, max_iters=5))
        assert trace.overcomplete

    def test_bad_arguments(self):
        x, _ = rank1_tensor()
        with pytest.raises(ValueError):
            ntf_decompose(x, 0)
        with pytest.raises(ValueError):
            ntf_decompose(x, 1, NtfOptions(max_iters=0))

    def test_scale_identity_on_exact_fit(self):
        x, _ = rank1_tensor()
        f, _ = ntf_decompose(x, 1)
        # L1-normalized columns make the reconstruction mass equal sum(scale)
        assert f.scale.sum() == pytest.approx(x.entry_sum(), rel=1e-9)

    def test_factor_invariants(self):
        x, _ = rank1_tensor()
        f, _ = ntf_decompose(x, 2, NtfOptions(seed=3, max_iters=20))
        for m in f.factors():
            assert (m >= 0).all() and np.isfinite(m).all()
            np.testing.assert_allclose(m.sum(axis=0), 1.0, atol=1e-9)


class TestReconstructionError:
    def test_exact_fit_is_zero(self):
        x, (t, p, d) = rank1_tensor()
        assert reconstruction_error(x, exact_factor_set(t, p, d)) < 1e-9

    def test_zero_reconstruction_gives_tensor_norm(self):
        x, _ = rank1_tensor()
        zero = FactorSet(r=1, time=np.full((12, 1), 1 / 12), pickup=np.full((8, 1), 1 / 8),
                         dropoff=np.full((9, 1), 1 / 9), scale=np.zeros(1))
        assert reconstruction_error(x, zero) == pytest.approx(x.frobenius_norm(), rel=1e-12)

    def test_shape_mismatch(self):
        x, _ = rank1_tensor()
        bad = FactorSet(r=1, time=np.full((5, 1), 0.2), pickup=np.full((8, 1), 1 / 8),
                        dropoff=np.full((9, 1), 1 / 9), scale=np.ones(1))
        with pytest.raises(ValueError):
            reconstruction_error(x, bad)


def test_save_load_roundtrip(tmp_path):
    x, _ = rank1_tensor()
    f, trace = ntf_decompose(x, 2, NtfOptions(seed=5, max_iters=30))
    save_factors(tmp_path, f, seed=5, trace=trace)
    loaded = load_factors(tmp_path)
    assert loaded.r == f.r
    assert np.array_equal(loaded.time, f.time)
    assert np.array_equal(loaded.pickup, f.pickup)
    assert np.array_equal(loaded.dropoff, f.dropoff)
    assert np.array_equal(loaded.scale, f.scale)
