"""Analytic mixture-world tests: marginals, posteriors, oracle, toy labeler."""

import numpy as np
import pytest

from negsteer.errors import DegenerateAnchor, DomainError, UnknownCategory
from negsteer.world import (
    Component,
    MixtureWorld,
    anchor_embedding,
    condition_from_prompt,
    forward_sample,
    marginal_params,
    mc_posterior_oracle,
    mock_vlm,
    posterior_x0,
    responsibilities,
    velocity,
)


class TestConstruction:
    def test_presets_load(self, pet_world, two_mode_world, three_mode_world):
        assert pet_world.dimension == 2
        assert len(pet_world.components) == 6
        assert set(pet_world.taxonomy) == {"pet", "pet_known"}
        assert len(two_mode_world.components) == 2
        assert len(three_mode_world.components) == 3

    def test_scalar_cov_expands(self):
        w = MixtureWorld.from_dict(
            {
                "dimension": 2,
                "components": [{"label": "a", "weight": 1.0, "mean": [0, 0], "cov": 0.25}],
                "taxonomy": {"all": ["a"]},
            }
        )
        assert np.array_equal(w.components[0].cov, 0.25 * np.eye(2))

    def test_invalid_component(self):
        with pytest.raises(DomainError):
            Component("a", -0.5, np.zeros(2), np.eye(2))
        with pytest.raises(DomainError):
            Component("a", 1.0, np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(DomainError):
            Component("a", 1.0, np.zeros(2), -np.eye(2))

    def test_category_indices(self, pet_world):
        known = pet_world.category_indices("pet_known")
        full = pet_world.category_indices("pet")
        assert known < full
        assert pet_world.index_of("exotic") in full - known
        with pytest.raises(UnknownCategory):
            pet_world.category_indices("vehicles")


class TestMarginal:
    def test_endpoints(self, three_mode_world):
        c = three_mode_world.components[1]
        m0, s0 = marginal_params(c, 0.0)
        assert np.allclose(m0, c.mean) and np.allclose(s0, c.cov)
        m1, s1 = marginal_params(c, 1.0)
        assert np.allclose(m1, 0.0) and np.allclose(s1, np.eye(2))

    def test_midpoint(self, three_mode_world):
        c = three_mode_world.components[0]
        m, s = marginal_params(c, 0.5)
        assert np.allclose(m, 0.5 * c.mean)
        assert np.allclose(s, 0.25 * c.cov + 0.25 * np.eye(2))

    def test_domain(self, three_mode_world):
        with pytest.raises(DomainError):
            marginal_params(three_mode_world.components[0], -0.1)


class TestPosterior:
    def test_responsibilities_simplex(self, three_mode_world, rng):
        for _ in range(20):
            x = rng.normal(0, 3, size=2)
            t = rng.uniform(0.01, 0.99)
            g = responsibilities(three_mode_world, x, t)
            assert g.shape == (3,)
            assert np.all(g >= 0) and np.isclose(g.sum(), 1.0)

    def test_condition_restricts_support(self, three_mode_world, rng):
        x = rng.normal(size=2)
        g = responsibilities(three_mode_world, x, 0.5, cond=frozenset({0, 2}))
        assert g.shape == (2,) and np.isclose(g.sum(), 1.0)

    def test_t1_posterior_is_prior_mean(self, three_mode_world, rng):
        # At t=1 the observation is pure noise and carries no information.
        x = rng.normal(size=2)
        w = three_mode_world.weights
        prior_mean = (w[:, None] * three_mode_world.means).sum(axis=0)
        assert np.allclose(posterior_x0(three_mode_world, x, 1.0), prior_mean)

    def test_t0_posterior_is_observation(self, three_mode_world, rng):
        x = rng.normal(size=2)
        assert np.allclose(posterior_x0(three_mode_world, x, 1e-9), x, atol=1e-6)

    def test_underflow_falls_back_to_uniform(self):
        w = MixtureWorld.from_dict(
            {
                "dimension": 1,
                "components": [
                    {"label": "a", "weight": 0.5, "mean": [0.0], "cov": 1e-4},
                    {"label": "b", "weight": 0.5, "mean": [1.0], "cov": 1e-4},
                ],
                "taxonomy": {"all": ["a", "b"]},
            }
        )
        g, flag = responsibilities(w, np.array([1e200]), 0.001, return_flag=True)
        assert flag is True
        assert np.allclose(g, [0.5, 0.5])

    def test_batched_matches_scalar(self, pet_world, rng):
        X = rng.normal(5, 3, size=(15, 2))
        for t in (0.9, 0.4, 0.05):
            vb = velocity(pet_world, X, t)
            pb = posterior_x0(pet_world, X, t)
            for i, x in enumerate(X):
                assert np.allclose(vb[i], velocity(pet_world, x, t))
                assert np.allclose(pb[i], posterior_x0(pet_world, x, t))

    def test_velocity_identity(self, three_mode_world, rng):
        # x - t * v(x, t) is exactly the posterior mean.
        x = rng.normal(size=2)
        for t in (0.2, 0.5, 0.8):
            v = velocity(three_mode_world, x, t)
            assert np.allclose(
                x - t * v, posterior_x0(three_mode_world, x, t), atol=1e-12
            )

    def test_velocity_floor(self, three_mode_world):
        with pytest.raises(DomainError):
            velocity(three_mode_world, np.zeros(2), 1e-6)


class TestMonteCarloOracle:
    def test_agrees_with_closed_form(self, three_mode_world, rng):
        for t in (0.2, 0.5, 0.8):
            # Probe at a typical x_t: (1-t) x0 + t eps for an in-support x0.
            x0, _ = forward_sample(three_mode_world, 1, seed=int(t * 100))
            x = (1 - t) * x0[0] + t * rng.standard_normal(2)
            closed = posterior_x0(three_mode_world, x, t)
            mc = mc_posterior_oracle(three_mode_world, x, t, n=100_000, seed=7)
            assert np.max(np.abs(closed - mc)) < 0.02

    def test_conditioned(self, three_mode_world):
        x = np.array([1.0, 1.0])
        cond = frozenset({0, 1})
        closed = posterior_x0(three_mode_world, x, 0.5, cond=cond)
        mc = mc_posterior_oracle(three_mode_world, x, 0.5, cond=cond, n=100_000, seed=3)
        assert np.max(np.abs(closed - mc)) < 0.02

    def test_domain(self, three_mode_world):
        with pytest.raises(DomainError):
            mc_posterior_oracle(three_mode_world, np.zeros(2), 0.5, n=100)


class TestMockVlm:
    def test_labels_mode_centers(self, pet_world):
        for label in pet_world.taxonomy["pet_known"]:
            mu = pet_world.components[pet_world.index_of(label)].mean
            assert mock_vlm(mu, "subcategory", pet_world, category="pet_known") == label

    def test_unknown_far_away(self, pet_world):
        assert (
            mock_vlm(np.array([50.0, 50.0]), "subcategory", pet_world, category="pet_known")
            == "unknown"
        )

    def test_infinite_threshold_always_names(self, pet_world):
        out = mock_vlm(
            np.array([50.0, 50.0]), "subcategory", pet_world,
            category="pet_known", threshold=np.inf,
        )
        assert out in pet_world.taxonomy["pet_known"]

    def test_tie_breaks_to_lowest_index(self, two_mode_world):
        # Equidistant between the two equal-covariance modes; alpha has the
        # larger weight so it wins, but with equal weights the lower index does.
        mid = two_mode_world.means.mean(axis=0)
        assert mock_vlm(mid, "subcategory", two_mode_world, threshold=np.inf) == "alpha"

    def test_unsupported_question(self, pet_world):
        with pytest.raises(DomainError):
            mock_vlm(np.zeros(2), "color", pet_world)


class TestPromptConditioning:
    def test_matched_tokens(self, pet_world):
        pos, neg = condition_from_prompt("pet", "cat, dog", pet_world)
        assert pos == pet_world.category_indices("pet")
        assert neg == frozenset({pet_world.index_of("cat"), pet_world.index_of("dog")})

    def test_case_and_spacing(self, pet_world):
        _, neg = condition_from_prompt("pet", "  CAT ,Dog  ", pet_world)
        assert neg == frozenset({pet_world.index_of("cat"), pet_world.index_of("dog")})

    def test_unmatched_and_empty_are_null(self, pet_world):
        assert condition_from_prompt("pet", "zebra, spaceship", pet_world)[1] is None
        assert condition_from_prompt("pet", "", pet_world)[1] is None

    def test_unconditional_positive(self, pet_world):
        pos, _ = condition_from_prompt(None, "", pet_world)
        assert pos is None


class TestAnchors:
    def test_label_anchor_unit_norm(self, pet_world):
        a = anchor_embedding("cat", pet_world)
        assert np.isclose(np.linalg.norm(a), 1.0)

    def test_category_anchor_is_mean_of_members(self, pet_world):
        members = [
            pet_world.components[i].mean
            for i in sorted(pet_world.category_indices("pet_known"))
        ]
        vec = np.mean(members, axis=0)
        assert np.allclose(
            anchor_embedding("pet_known", pet_world), vec / np.linalg.norm(vec)
        )

    def test_degenerate_anchor(self):
        w = MixtureWorld.from_dict(
            {
                "dimension": 2,
                "components": [{"label": "origin", "weight": 1.0, "mean": [0, 0], "cov": 1.0}],
                "taxonomy": {"all": ["origin"]},
            }
        )
        with pytest.raises(DegenerateAnchor):
            anchor_embedding("origin", w)


class TestForwardSample:
    def test_weights_respected(self, two_mode_world):
        _, ks = forward_sample(two_mode_world, 4000, seed=1)
        assert abs(np.mean(ks == 0) - 0.7) < 0.03

    def test_condition(self, three_mode_world):
        x0, ks = forward_sample(three_mode_world, 500, seed=2, cond=frozenset({2}))
        assert set(ks) == {2}
        assert np.allclose(x0.mean(axis=0), three_mode_world.components[2].mean, atol=0.2)


class TestGuidanceDirection:
    """Sign checks for negative-prompt guidance in the analytic field."""

    def _terminal_modes(self, world, w, neg_tokens, n=500):
        from negsteer.sampler import TimeGrid, euler_step, guided_velocity

        grid = TimeGrid.uniform(28)
        pos, neg = condition_from_prompt(None, ", ".join(neg_tokens), world)
        X = np.vstack(
            [np.random.default_rng(s).standard_normal(2) for s in range(n)]
        )
        for i in range(grid.total_steps):
            t, tn = grid.times[i], grid.times[i + 1]
            v = guided_velocity(
                velocity(world, X, t, pos), velocity(world, X, t, neg), w
            )
            X = euler_step(X, t, tn, v)
        d = np.linalg.norm(X[:, None, :] - world.means[None], axis=2)
        return np.argmin(d, axis=1)

    def test_suppressing_and_inducing(self, two_mode_world):
        baseline = np.mean(self._terminal_modes(two_mode_world, 1.0, ()) == 0)
        suppressed = np.mean(self._terminal_modes(two_mode_world, 2.0, ("alpha",)) == 0)
        induced = np.mean(self._terminal_modes(two_mode_world, 0.5, ("alpha",)) == 0)
        # w>1 pushes mass away from the negated mode; w<1 pulls it toward it.
        assert suppressed < baseline < induced
