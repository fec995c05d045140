"""Tests for reference-distribution construction and the loss functions."""

import math

import numpy as np
import pytest

from gradcheck import check_instance
from taxex.errors import TaxexWarning
from taxex.oracle import (
    EPS,
    LossKind,
    aml_loss,
    build_oracle,
    cl_distill_loss,
    naive_ce_loss,
    oracle_distributions,
    plm_kl_loss,
    plm_loss,
    restrict_distribution,
    softmax,
)
from taxex.taxonomy import RelationKind, TagSpace, Taxonomy


def per_org_taxonomy():
    return Taxonomy.disjoint(["Per"], ["Org"])


def person_actor_taxonomy():
    return Taxonomy.build(["Person"], ["Actor", "Politician"],
                          [("Person", RelationKind.SUPERTYPE, "Actor"),
                           ("Person", RelationKind.SUPERTYPE, "Politician")])


class TestBuildOracle:
    def test_observed_entity_is_one_hot(self):
        tax = per_org_taxonomy()
        aux = tax.side_tag_space("B")
        dist, provenance = build_oracle("B-Per", "A", np.zeros(len(aux)), aux, tax)
        assert provenance == "observed"
        idx = tax.space.tag_space.tag_id("B-A:Per")
        np.testing.assert_allclose(dist[idx], 1.0)
        assert dist.sum() == pytest.approx(1.0)

    def test_observed_o_takes_aux_distribution(self):
        # opposite model scores (O 0.3, B-Org 0.7): that mass lands on the
        # corresponding combined tags, with zero on the observing side
        tax = per_org_taxonomy()
        aux = tax.side_tag_space("B")  # tags: O, B-Org, I-Org
        logits = np.array([math.log(0.3), math.log(0.7), -40.0])
        dist, provenance = build_oracle("O", "A", logits, aux, tax)
        assert provenance == "model-filled"
        ts = tax.space.tag_space
        assert dist[ts.tag_id("O")] == pytest.approx(0.3, abs=1e-9)
        assert dist[ts.tag_id("B-B:Org")] == pytest.approx(0.7, abs=1e-9)
        assert dist[ts.tag_id("B-A:Per")] == 0.0
        assert dist[ts.tag_id("I-A:Per")] == 0.0

    def test_equal_logits_give_uniform_over_allowed(self):
        # observed entity with three consistent combined labels and equal
        # opposite-model logits: one third each
        tax = person_actor_taxonomy()
        aux = tax.side_tag_space("B")
        dist, provenance = build_oracle("B-Person", "A", np.ones(len(aux)), aux, tax)
        assert provenance == "model-filled"
        ts = tax.space.tag_space
        for name in ("B-A:Person", "B-A:Person|B:Actor", "B-A:Person|B:Politician"):
            assert dist[ts.tag_id(name)] == pytest.approx(1 / 3)
        assert dist.sum() == pytest.approx(1.0)

    def test_support_restricted_to_allowed(self):
        tax = person_actor_taxonomy()
        aux = tax.side_tag_space("B")
        rng = np.random.default_rng(0)
        for observed in ("O", "B-Person", "I-Person"):
            dist, _ = build_oracle(observed, "A", rng.normal(size=len(aux)), aux, tax)
            allowed = tax.allowed(observed, "A")
            names = {lab.name for lab in allowed.labels}
            ts = tax.space.tag_space
            for i, tag in enumerate(ts.tags):
                if tag == "O":
                    ok = allowed.includes_o
                else:
                    ok = tag[2:] in names and (observed == "O" or tag[0] == observed[0])
                if not ok:
                    assert dist[i] <= 1e-12

    def test_sentence_level_stacking(self):
        tax = per_org_taxonomy()
        aux = tax.side_tag_space("B")
        logits = np.zeros((2, len(aux)))
        dists = oracle_distributions(["B-Per", "O"], "A", logits, aux, tax)
        assert dists.shape == (2, len(tax.space.tag_space))
        np.testing.assert_allclose(dists.sum(axis=1), 1.0)


class TestPlmLoss:
    def test_one_hot_reference_equals_cross_entropy(self):
        rng = np.random.default_rng(1)
        f = rng.dirichlet(np.ones(5), size=8)
        tags = rng.integers(0, 5, size=8)
        g = np.zeros_like(f)
        g[np.arange(8), tags] = 1.0
        loss_plm, grad_plm = plm_loss(f, g)
        loss_ce, grad_ce = naive_ce_loss(f, tags)
        assert loss_plm == pytest.approx(loss_ce, abs=1e-10)
        np.testing.assert_allclose(grad_plm, grad_ce, atol=1e-12)

    def test_hand_computed_value(self):
        # one token, model uniform over 4 tags, reference uniform over 2:
        # agreement = 2 * (1/4) * (1/2) = 1/4
        f = np.full((1, 4), 0.25)
        g = np.array([[0.5, 0.5, 0.0, 0.0]])
        loss, _ = plm_loss(f, g)
        assert loss == pytest.approx(-math.log(0.25), abs=1e-12)
        assert loss == pytest.approx(1.3862943611198906, abs=1e-12)

    def test_degenerate_support_clamps_with_warning(self):
        f = np.array([[1.0, 0.0, 0.0]])
        g = np.array([[0.0, 1.0, 0.0]])
        with pytest.warns(TaxexWarning):
            loss, _ = plm_loss(f, g)
        assert loss == pytest.approx(-math.log(EPS))

    def test_loss_nonnegative_and_finite(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            t = int(rng.integers(2, 12))
            f = rng.dirichlet(np.ones(t), size=6)
            g = rng.dirichlet(np.ones(t), size=6)
            loss, grad = plm_loss(f, g)
            assert np.isfinite(loss) and loss >= 0
            assert np.isfinite(grad).all()


class TestPlmKlLoss:
    def test_one_hot_reference_equals_cross_entropy(self):
        rng = np.random.default_rng(3)
        f = rng.dirichlet(np.ones(6), size=5)
        tags = rng.integers(0, 6, size=5)
        g = np.zeros_like(f)
        g[np.arange(5), tags] = 1.0
        loss, grad = plm_kl_loss(f, g)
        ce, ce_grad = naive_ce_loss(f, tags)
        assert loss == pytest.approx(ce, abs=1e-10)
        np.testing.assert_allclose(grad, ce_grad, atol=1e-12)

    def test_upper_bounds_agreement_form(self):
        """The distillation form dominates the agreement form pointwise
        (Jensen's inequality applied to the log of the expectation)."""
        rng = np.random.default_rng(4)
        for _ in range(2000):
            t = int(rng.integers(2, 21))
            f = rng.dirichlet(np.full(t, float(rng.uniform(0.2, 3.0))), size=1)
            g = rng.dirichlet(np.full(t, float(rng.uniform(0.2, 3.0))), size=1)
            lo, _ = plm_loss(f, g)
            hi, _ = plm_kl_loss(f, g)
            assert hi - lo >= -1e-9

    def test_gradient_is_difference_of_distributions(self):
        rng = np.random.default_rng(5)
        f = rng.dirichlet(np.ones(4), size=3)
        g = rng.dirichlet(np.ones(4), size=3)
        _, grad = plm_kl_loss(f, g)
        np.testing.assert_allclose(grad, f - g, atol=1e-12)


class TestNaiveCe:
    def test_perfect_prediction_is_zero(self):
        f = np.eye(3)[[0, 2]]
        loss, _ = naive_ce_loss(f, np.array([0, 2]))
        assert loss == pytest.approx(-2 * math.log(1.0 - 0.0), abs=1e-9)
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_uniform_prediction_is_log_k(self):
        for k in (2, 5, 9):
            f = np.full((3, k), 1.0 / k)
            loss, _ = naive_ce_loss(f, np.zeros(3, dtype=int))
            assert loss == pytest.approx(3 * math.log(k), abs=1e-10)

    def test_two_token_hand_computation(self):
        f = np.array([[0.7, 0.2, 0.1], [0.1, 0.6, 0.3]])
        tags = np.array([0, 2])
        loss, _ = naive_ce_loss(f, tags)
        assert loss == pytest.approx(-(math.log(0.7) + math.log(0.3)), abs=1e-12)


class TestClDistill:
    def test_teacher_equal_student_gives_zero_distillation(self):
        rng = np.random.default_rng(6)
        f = rng.dirichlet(np.ones(5), size=4)
        ce_ids = np.full(4, -1)
        loss, grad = cl_distill_loss(f, ce_ids, f.copy(), variant="cl")
        assert loss == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_entity_tokens_use_cross_entropy_only(self):
        f = np.array([[0.5, 0.25, 0.25], [0.2, 0.5, 0.3]])
        ce_ids = np.array([1, -1])
        teacher = np.array([[0.9, 0.05, 0.05], [0.2, 0.5, 0.3]])
        loss, _ = cl_distill_loss(f, ce_ids, teacher, variant="cl")
        # token 0: CE against tag 1; token 1: teacher equals student, zero
        assert loss == pytest.approx(-math.log(0.25), abs=1e-9)

    def test_clpp_singleton_allowed_reduces_to_ce(self):
        f = np.array([[0.6, 0.3, 0.1]])
        ce_ids = np.array([-1])
        teacher = np.array([[0.2, 0.5, 0.3]])
        mask = np.array([[False, True, False]])
        loss, grad = cl_distill_loss(f, ce_ids, teacher, mask, variant="cl++")
        assert loss == pytest.approx(-math.log(0.3), abs=1e-9)
        expected_teacher = np.array([[0.0, 1.0, 0.0]])
        np.testing.assert_allclose(grad, f - expected_teacher, atol=1e-12)

    def test_clpp_restricts_and_renormalizes(self):
        f = np.array([[0.25, 0.25, 0.25, 0.25]])
        teacher = np.array([[0.4, 0.4, 0.1, 0.1]])
        mask = np.array([[True, False, True, False]])
        _, grad = cl_distill_loss(f, np.array([-1]), teacher, mask, variant="cl++")
        restricted = np.array([[0.8, 0.0, 0.2, 0.0]])
        np.testing.assert_allclose(grad, f - restricted, atol=1e-12)

    def test_restrict_empty_mass_warns_uniform(self):
        with pytest.warns(TaxexWarning):
            out = restrict_distribution(np.array([0.0, 0.0, 1.0]),
                                        np.array([True, True, False]))
        np.testing.assert_allclose(out, [0.5, 0.5, 0.0])


class TestAml:
    def test_singleton_allowed_with_saturated_score_is_zero(self):
        logits = np.array([[40.0, 0.0, 0.0]])
        mask = np.array([[True, False, False]])
        loss, _ = aml_loss(logits, mask)
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_loss_covers_only_allowed_tags(self):
        logits = np.array([[3.0, -2.0, 5.0]])
        mask = np.array([[True, True, False]])
        targets = np.array([[1.0, 0.0, 0.0]])
        loss, grad = aml_loss(logits, mask, targets)
        by_hand = (math.log(1 + math.exp(-3.0))      # target 1 at logit 3
                   + math.log(1 + math.exp(-2.0)))   # target 0 at logit -2
        assert loss == pytest.approx(by_hand, abs=1e-10)
        assert grad[0, 2] == 0.0

    def test_two_tag_hand_computation(self):
        z = np.array([[0.5, -1.0]])
        t = np.array([[1.0, 1.0]])
        mask = np.ones((1, 2), dtype=bool)
        loss, _ = aml_loss(z, mask, t)
        sig = lambda x: 1 / (1 + math.exp(-x))
        expected = -(math.log(sig(0.5)) + math.log(sig(-1.0)))
        assert loss == pytest.approx(expected, abs=1e-10)

    def test_default_targets_positive_only_on_singletons(self):
        logits = np.zeros((2, 3))
        mask = np.array([[True, False, False], [True, True, False]])
        loss, grad = aml_loss(logits, mask)
        # row 0 is a singleton: target 1 at tag 0; row 1: all-zero targets
        assert grad[0, 0] == pytest.approx(0.5 - 1.0)
        assert grad[1, 0] == pytest.approx(0.5)
        assert grad[1, 1] == pytest.approx(0.5)


class TestOneHotReduction:
    def test_three_losses_agree_on_one_hot_references(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            t = int(rng.integers(2, 10))
            n = int(rng.integers(1, 6))
            f = rng.dirichlet(np.ones(t), size=n)
            tags = rng.integers(0, t, size=n)
            g = np.zeros_like(f)
            g[np.arange(n), tags] = 1.0
            a, _ = plm_loss(f, g)
            b, _ = plm_kl_loss(f, g)
            c, _ = naive_ce_loss(f, tags)
            assert abs(a - b) < 1e-10
            assert abs(a - c) < 1e-10


class TestGradients:
    @pytest.mark.parametrize("kind", list(LossKind))
    def test_analytic_matches_finite_differences(self, kind):
        for seed in range(4):
            frac = check_instance(seed, kind)
            assert frac >= 0.99, f"{kind} seed={seed}: only {frac:.3f} coords match"


class TestSoftmax:
    def test_rows_normalized(self):
        rng = np.random.default_rng(8)
        z = rng.normal(scale=20, size=(50, 7))
        p = softmax(z)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert (p >= 0).all()
