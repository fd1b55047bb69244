import math

import numpy as np
import pytest

from tripflow.evidence import (
    DEFAULT_K_GRID,
    PriorMatrix,
    elicit_prior,
    k_sweep,
    log_evidence,
    rank_hypotheses,
)
from tripflow.hypotheses import (
    HypothesisMatrix,
    WeightVector,
    build_inverse_distance,
    build_mass,
    build_uniform,
)
from tripflow.ingest import TransitionCounts
from tripflow.synth import generate_from_hypothesis
from tripflow.ingest import transition_counts


def counts_of(matrix) -> TransitionCounts:
    counts = np.asarray(matrix, dtype=np.int64)
    return TransitionCounts(counts=counts, total=int(counts.sum()))


def polya_log_evidence(counts: np.ndarray, alpha: np.ndarray) -> float:
    """Sequential predictive oracle: one transition at a time, urn-style."""
    total = 0.0
    n = counts.shape[0]
    for i in range(n):
        seen = np.zeros(n)
        row = alpha[i].astype(float)
        for j in range(n):
            for _ in range(int(counts[i, j])):
                total += math.log((row[j] + seen[j]) / (row.sum() + seen.sum()))
                seen[j] += 1
    return total


class TestElicit:
    def test_k_zero_gives_flat_prior(self):
        q = build_uniform(4)
        assert (elicit_prior(q, 0.0).alpha == 1.0).all()

    def test_row_arithmetic(self):
        q = HypothesisMatrix("x", np.array([[0.0, 0.5, 0.5],
                                            [1.0, 0.0, 1.0],
                                            [1.0, 1.0, 0.0]]))
        alpha = elicit_prior(q, 2.0).alpha
        np.testing.assert_array_equal(alpha[0], [1.0, 4.0, 4.0])

    def test_row_scale_invariant(self):
        base = np.array([[0.0, 0.5, 0.5], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        scaled = base.copy()
        scaled[0] *= 10.0
        a1 = elicit_prior(HypothesisMatrix("a", base), 2.0).alpha
        a2 = elicit_prior(HypothesisMatrix("b", scaled), 2.0).alpha
        np.testing.assert_array_equal(a1, a2)

    def test_zero_rows_elicit_flat_row(self):
        q = HypothesisMatrix("x", np.array([[0.0, 0.0, 0.0],
                                            [1.0, 0.0, 1.0],
                                            [1.0, 1.0, 0.0]]))
        alpha = elicit_prior(q, 5.0).alpha
        np.testing.assert_array_equal(alpha[0], [1.0, 1.0, 1.0])
        assert alpha[1].sum() == pytest.approx(3 + 5 * 3)

    def test_negative_k(self):
        with pytest.raises(ValueError):
            elicit_prior(build_uniform(3), -1.0)


class TestLogEvidence:
    def test_closed_form_fixture(self):
        # 2 states, two observed 0->1 transitions, flat prior: G(2)/G(4)*G(3)/G(1) = 1/3
        n = counts_of([[0, 2], [0, 0]])
        prior = PriorMatrix(alpha=np.ones((2, 2)), k=0.0)
        assert log_evidence(n, prior) == pytest.approx(math.log(1 / 3), abs=1e-9)

    def test_zero_counts_give_zero(self):
        n = counts_of(np.zeros((3, 3)))
        for k in (0.0, 1.0, 10.0):
            assert log_evidence(n, elicit_prior(build_uniform(3), k)) == 0.0

    def test_negative_for_positive_counts(self):
        n = counts_of([[0, 3], [1, 0]])
        assert log_evidence(n, PriorMatrix(alpha=np.ones((2, 2)) * 2.0, k=1.0)) < 0.0

    def test_row_additivity(self):
        full = counts_of([[0, 3], [4, 0]])
        first = counts_of([[0, 3], [0, 0]])
        second = counts_of([[0, 0], [4, 0]])
        prior = PriorMatrix(alpha=1.0 + np.array([[0.0, 2.0], [3.0, 1.0]]), k=1.0)
        lhs = log_evidence(full, prior)
        rhs = log_evidence(first, prior) + log_evidence(second, prior)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            log_evidence(counts_of(np.zeros((2, 2))), PriorMatrix(alpha=np.ones((3, 3)), k=0.0))

    def test_polya_oracle_agreement(self):
        rng = np.random.default_rng(404)
        for _ in range(50):
            s = int(rng.integers(2, 5))
            counts = np.zeros((s, s), dtype=np.int64)
            for _ in range(int(rng.integers(0, 21))):
                counts[rng.integers(0, s), rng.integers(0, s)] += 1
            alpha = 1.0 + 5.0 * rng.random((s, s))
            lhs = log_evidence(counts_of(counts), PriorMatrix(alpha=alpha, k=1.0))
            assert lhs == pytest.approx(polya_log_evidence(counts, alpha), abs=1e-9)

    def test_extra_transition_favors_stronger_belief(self):
        # at two zero-diagonal states the only way beliefs in 0 -> 1 can
        # differ is a committed row versus an all-zero (flat-prior) row
        strong = HypothesisMatrix("strong", np.array([[0.0, 2.0], [1.0, 0.0]]))
        agnostic = HypothesisMatrix("agnostic", np.array([[0.0, 0.0], [1.0, 0.0]]))
        base = np.array([[0, 4], [3, 0]], dtype=np.int64)
        more = base.copy()
        more[0, 1] += 1

        def gap(counts):
            n = counts_of(counts)
            return (log_evidence(n, elicit_prior(strong, 10.0))
                    - log_evidence(n, elicit_prior(agnostic, 10.0)))

        assert gap(more) > gap(base)


class TestRanking:
    def test_k_zero_all_tied_name_order(self, grid_space):
        w = WeightVector("venues_all", grid_space.property_vector("venues_all"))
        catalog = [build_uniform(len(grid_space)), build_inverse_distance(grid_space),
                   build_mass(grid_space, w, "density")]
        n = counts_of(np.ones((len(grid_space), len(grid_space)), dtype=np.int64)
                      - np.eye(len(grid_space), dtype=np.int64))
        results = rank_hypotheses(n, catalog, 0.0)
        values = [r.log_evidence for r in results]
        assert max(values) - min(values) < 1e-9
        assert [r.hypothesis for r in results] == sorted(h.name for h in catalog)
        assert [r.rank for r in results] == [1, 2, 3]

    def test_true_hypothesis_recovered(self, grid_space):
        w = WeightVector("venues_all", grid_space.property_vector("venues_all"))
        q_true = build_mass(grid_space, w, "gravitational_target")
        trips = generate_from_hypothesis(q_true, np.ones(len(grid_space)), 5000, seed=9)
        n = transition_counts(trips, len(grid_space))
        catalog = [q_true, build_uniform(len(grid_space)), build_inverse_distance(grid_space)]
        results = rank_hypotheses(n, catalog, 10.0)
        assert results[0].hypothesis == q_true.name
        assert results[0].rank == 1

    def test_gravitational_pair_equal_evidence(self, grid_space):
        w = WeightVector("venues_all", grid_space.property_vector("venues_all"))
        target = build_mass(grid_space, w, "gravitational_target")
        mass = build_mass(grid_space, w, "gravitational_mass")
        trips = generate_from_hypothesis(target, np.ones(len(grid_space)), 3000, seed=12)
        n = transition_counts(trips, len(grid_space))
        lhs = log_evidence(n, elicit_prior(target, 10.0))
        rhs = log_evidence(n, elicit_prior(mass, 10.0))
        assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_empty_catalog(self):
        with pytest.raises(ValueError):
            rank_hypotheses(counts_of(np.zeros((2, 2))), [], 1.0)

    def test_ranks_are_permutation(self, grid_space):
        w = WeightVector("checkins", grid_space.property_vector("checkins"))
        catalog = [build_uniform(len(grid_space)), build_inverse_distance(grid_space),
                   build_mass(grid_space, w, "popularity")]
        rng = np.random.default_rng(77)
        counts = rng.integers(0, 5, size=(len(grid_space), len(grid_space)))
        np.fill_diagonal(counts, 0)
        results = rank_hypotheses(counts_of(counts), catalog, 10.0)
        assert sorted(r.rank for r in results) == [1, 2, 3]
        values = [r.log_evidence for r in results]
        assert values == sorted(values, reverse=True)


class TestKSweep:
    def test_row_count(self, grid_space):
        catalog = [build_uniform(len(grid_space)), build_inverse_distance(grid_space)]
        n = counts_of(np.eye(len(grid_space), k=1, dtype=np.int64))
        results = k_sweep(n, catalog, (0.0, 10.0, 50.0))
        assert len(results) == 3 * len(catalog)

    def test_single_k_matches_rank_hypotheses(self, grid_space):
        catalog = [build_uniform(len(grid_space)), build_inverse_distance(grid_space)]
        n = counts_of(np.eye(len(grid_space), k=1, dtype=np.int64))
        assert k_sweep(n, catalog, (10.0,)) == rank_hypotheses(n, catalog, 10.0)

    def test_default_grid(self):
        assert DEFAULT_K_GRID == (0.0, 1.0, 5.0, 10.0, 50.0, 100.0)

    def test_empty_grid(self, grid_space):
        with pytest.raises(ValueError):
            k_sweep(counts_of(np.zeros((2, 2))), [build_uniform(2)], ())
