"""Token-space search: candidates, rewards, and the three optimizers."""

import numpy as np
import pytest

from detaug import builtin_coco_policy
from detaug.policy import OpKind
from detaug.search import (
    DEFAULT_SPACE,
    AveragedReward,
    Candidate,
    ExternalReward,
    RewardEvaluationError,
    SearchAbortError,
    SearchSpace,
    TokenMatchReward,
    clipped_surrogate,
    evolution_search,
    masked_softmax,
    ppo_search,
    random_search,
    sample_actions,
)

from oracles import central_difference_gradient, token_match_tail


class TestSearchSpace:
    def test_shape_of_default_space(self):
        assert DEFAULT_SPACE.num_steps == 30
        sizes = DEFAULT_SPACE.vocab_sizes()
        assert len(sizes) == 30
        assert sizes[0::3] == (22,) * 10
        assert sizes[1::3] == (6,) * 10
        assert sizes[2::3] == (6,) * 10

    def test_cardinality_matches_closed_form(self):
        assert DEFAULT_SPACE.cardinality() == (22 * 6 * 6) ** 10

    def test_sampled_candidates_are_valid(self):
        rng = np.random.default_rng(101)
        for _ in range(200):
            c = DEFAULT_SPACE.sample(rng)
            DEFAULT_SPACE.validate(c)

    def test_decode_encode_round_trip(self):
        rng = np.random.default_rng(102)
        for _ in range(200):
            c = DEFAULT_SPACE.sample(rng)
            assert DEFAULT_SPACE.encode(DEFAULT_SPACE.decode(c)) == c

    def test_decoded_policies_never_contain_noop(self):
        rng = np.random.default_rng(103)
        for _ in range(50):
            p = DEFAULT_SPACE.decode(DEFAULT_SPACE.sample(rng))
            for sp in p.sub_policies:
                for op in sp.ops:
                    assert op.kind is not OpKind.NO_OP

    def test_encode_rejects_noop(self):
        with pytest.raises(ValueError):
            DEFAULT_SPACE.encode(builtin_coco_policy())  # last sub-policy is NoOp/NoOp

    def test_mutation_changes_exactly_one_token(self):
        rng = np.random.default_rng(104)
        sizes = DEFAULT_SPACE.vocab_sizes()
        position_hits = np.zeros(30, dtype=np.int64)
        c = DEFAULT_SPACE.sample(rng)
        for _ in range(3000):
            m = DEFAULT_SPACE.mutate(c, rng)
            DEFAULT_SPACE.validate(m)
            diffs = [i for i in range(30) if m.tokens[i] != c.tokens[i]]
            assert len(diffs) == 1
            i = diffs[0]
            assert 0 <= m.tokens[i] < sizes[i]
            position_hits[i] += 1
            c = m
        assert np.all(position_hits > 0)  # every position is reachable

    def test_validate_rejects_out_of_range_tokens(self):
        good = DEFAULT_SPACE.sample(np.random.default_rng(105))
        bad = Candidate(good.tokens[:-1] + (6,))  # magnitude vocab is 6
        with pytest.raises(ValueError):
            DEFAULT_SPACE.validate(bad)

    def test_custom_space_shape(self):
        space = SearchSpace(num_sub_policies=2, ops_per_sub_policy=1)
        assert space.num_steps == 6
        assert space.cardinality() == (22 * 6 * 6) ** 2


class TestRewards:
    def test_token_match_full_and_partial(self):
        rng = np.random.default_rng(106)
        target = DEFAULT_SPACE.sample(rng)
        fn = TokenMatchReward(target)
        assert fn(target) == 1.0
        other = DEFAULT_SPACE.mutate(target, rng)
        assert fn(other) == pytest.approx(29 / 30)

    def test_token_match_expected_value_under_uniform_sampling(self):
        rng = np.random.default_rng(107)
        target = DEFAULT_SPACE.sample(rng)
        fn = TokenMatchReward(target)
        n = 20_000
        total = sum(fn(DEFAULT_SPACE.sample(rng)) for _ in range(n))
        expected = (10 * (1 / 22) + 20 * (1 / 6)) / 30
        assert total / n == pytest.approx(expected, rel=0.02)

    def test_external_reward_reads_final_stdout_line(self, tmp_path):
        fn = ExternalReward("cat {policy} > /dev/null && printf 'noise\\n0.5\\n'")
        c = DEFAULT_SPACE.sample(np.random.default_rng(108))
        assert fn(c) == 0.5

    def test_external_reward_requires_placeholder(self):
        with pytest.raises(ValueError):
            ExternalReward("echo 0.5")

    def test_external_reward_substitutes_policy_path(self, tmp_path):
        out = tmp_path / "seen.json"
        fn = ExternalReward(f"cp {{policy}} {out} && echo 1.0")
        c = DEFAULT_SPACE.sample(np.random.default_rng(109))
        assert fn(c) == 1.0
        from detaug import parse_policy

        assert parse_policy(out.read_text()) == DEFAULT_SPACE.decode(c)

    def test_external_reward_failures_raise(self):
        c = DEFAULT_SPACE.sample(np.random.default_rng(110))
        with pytest.raises(RewardEvaluationError):
            ExternalReward("test -f {policy} && exit 3")(c)
        with pytest.raises(RewardEvaluationError):
            ExternalReward("test -f {policy} && echo not-a-number")(c)
        with pytest.raises(RewardEvaluationError):
            ExternalReward("test -f {policy} && echo 1.5")(c)  # outside [0, 1]
        with pytest.raises(RewardEvaluationError):
            ExternalReward("test -f {policy}")(c)  # empty stdout

    def test_averaged_reward_means_repeats(self):
        calls = []

        def noisy(c):
            calls.append(c)
            return [0.2, 0.4, 0.9][len(calls) - 1]

        fn = AveragedReward(noisy, repeats=3)
        c = DEFAULT_SPACE.sample(np.random.default_rng(111))
        assert fn(c) == pytest.approx(0.5)
        assert len(calls) == 3


class TestRandomSearch:
    def test_history_and_monotone_best(self):
        rng = np.random.default_rng(112)
        target = DEFAULT_SPACE.sample(rng)
        res = random_search(TokenMatchReward(target), 200, np.random.default_rng(1))
        assert len(res.history) == 200
        best = 0.0
        for i, rec in enumerate(res.history):
            assert rec.index == i
            best = max(best, rec.reward)
            assert rec.best_so_far == best
        assert res.best_reward == best
        assert TokenMatchReward(target)(res.best_candidate) == res.best_reward

    def test_seeded_runs_are_identical(self):
        target = DEFAULT_SPACE.sample(np.random.default_rng(113))
        fn = TokenMatchReward(target)
        a = random_search(fn, 100, np.random.default_rng(5))
        b = random_search(fn, 100, np.random.default_rng(5))
        assert a.best_candidate == b.best_candidate
        assert [r.reward for r in a.history] == [r.reward for r in b.history]

    def test_budget_5000_crosses_match_threshold(self):
        # The chance a single uniform candidate matches >= 10 of 30 tokens is
        # small but the 5000-draw maximum exceeds it with probability
        # 1 - (1 - p)^5000 > 0.999 (exact tail from the independent DP).
        from fractions import Fraction

        step_probs = [Fraction(1, 22)] * 10 + [Fraction(1, 6)] * 20
        tail = token_match_tail(step_probs, 10)
        assert float(1 - (1 - tail) ** 5000) > 0.999
        target = DEFAULT_SPACE.sample(np.random.default_rng(114))
        res = random_search(TokenMatchReward(target), 5000, np.random.default_rng(2))
        assert res.best_reward >= 10 / 30

    def test_rejects_bad_budget(self):
        with pytest.raises(ValueError):
            random_search(lambda c: 0.0, 0, np.random.default_rng(0))


class TestEvolutionSearch:
    def test_budget_equal_to_population_is_pure_random_init(self):
        target = DEFAULT_SPACE.sample(np.random.default_rng(115))
        fn = TokenMatchReward(target)
        evo = evolution_search(fn, population=64, sample=16, budget=64, rng=np.random.default_rng(3))
        rand = random_search(fn, 64, np.random.default_rng(3))
        assert [r.tokens for r in evo.history] == [r.tokens for r in rand.history]

    def test_improves_over_initial_population(self):
        target = DEFAULT_SPACE.sample(np.random.default_rng(116))
        fn = TokenMatchReward(target)
        res = evolution_search(fn, population=64, sample=16, budget=2000, rng=np.random.default_rng(4))
        init_best = max(r.reward for r in res.history[:64])
        assert res.best_reward > init_best
        assert res.best_reward >= 0.5

    def test_history_best_is_monotone(self):
        target = DEFAULT_SPACE.sample(np.random.default_rng(117))
        res = evolution_search(
            TokenMatchReward(target), population=16, sample=4, budget=300, rng=np.random.default_rng(5)
        )
        bests = [r.best_so_far for r in res.history]
        assert bests == sorted(bests)

    def test_rejects_bad_parameters(self):
        fn = TokenMatchReward(DEFAULT_SPACE.sample(np.random.default_rng(118)))
        with pytest.raises(ValueError):
            evolution_search(fn, population=4, sample=5, budget=10, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            evolution_search(fn, population=4, sample=0, budget=10, rng=np.random.default_rng(0))


class TestMaskedSoftmax:
    def test_masks_padding_and_normalizes(self):
        logits = np.zeros((2, 5))
        probs = masked_softmax(logits, (3, 5))
        assert probs[0, :3] == pytest.approx([1 / 3] * 3)
        assert probs[0, 3:] == pytest.approx([0.0, 0.0])
        assert probs[1] == pytest.approx([0.2] * 5)

    def test_shift_invariance(self):
        rng = np.random.default_rng(119)
        logits = rng.normal(size=(4, 6))
        a = masked_softmax(logits, (6, 4, 2, 6))
        b = masked_softmax(logits + 100.0, (6, 4, 2, 6))
        assert np.allclose(a, b)

    def test_extreme_logits_stay_finite(self):
        logits = np.array([[1000.0, -1000.0, 0.0]])
        probs = masked_softmax(logits, (3,))
        assert np.isfinite(probs).all()
        assert probs[0, 0] == pytest.approx(1.0)


class TestClippedSurrogate:
    @staticmethod
    def _random_config(rng, steps, vocab, batch):
        sizes = tuple(int(rng.integers(2, vocab + 1)) for _ in range(steps))
        logits = rng.normal(scale=0.5, size=(steps, vocab))
        probs = masked_softmax(logits, sizes)
        actions = sample_actions(probs, sizes, batch, rng)
        old_probs = probs[np.arange(steps)[None, :], actions]
        # Nudge old_probs so ratios are spread on both sides of 1.
        old_probs = old_probs * rng.uniform(0.7, 1.3, size=old_probs.shape)
        advantages = rng.normal(size=batch)
        return logits, sizes, actions, advantages, old_probs

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(120)
        checked = 0
        while checked < 20:
            logits, sizes, actions, advantages, old_probs = self._random_config(rng, steps=4, vocab=5, batch=6)
            probs = masked_softmax(logits, sizes)
            rho = probs[np.arange(4)[None, :], actions] / old_probs
            # Skip configurations with a ratio near a clip corner, where the
            # objective is non-differentiable and FD is meaningless.
            if np.min(np.abs(rho - 0.8)) < 1e-3 or np.min(np.abs(rho - 1.2)) < 1e-3:
                continue
            value, grad = clipped_surrogate(logits, sizes, actions, advantages, old_probs, 0.2)

            def objective(flat):
                v, _ = clipped_surrogate(flat.reshape(logits.shape), sizes, actions, advantages, old_probs, 0.2)
                return v

            fd = central_difference_gradient(objective, logits.ravel().copy()).reshape(logits.shape)
            denom = max(np.linalg.norm(fd), 1e-12)
            assert np.linalg.norm(grad - fd) / denom < 1e-4
            checked += 1

    def test_ratio_one_equals_vanilla_policy_gradient(self):
        rng = np.random.default_rng(121)
        steps, vocab, batch = 5, 6, 8
        sizes = (6,) * steps
        logits = rng.normal(size=(steps, vocab))
        probs = masked_softmax(logits, sizes)
        actions = sample_actions(probs, sizes, batch, rng)
        old_probs = probs[np.arange(steps)[None, :], actions]
        advantages = rng.normal(size=batch)
        _, grad = clipped_surrogate(logits, sizes, actions, advantages, old_probs, 0.2)
        pg = np.zeros_like(logits)
        for b in range(batch):
            for s in range(steps):
                one_hot = np.zeros(vocab)
                one_hot[actions[b, s]] = 1.0
                pg[s] += advantages[b] * (one_hot - probs[s])
        pg /= batch
        assert np.allclose(grad, pg, atol=1e-12)

    def test_clipped_steps_contribute_zero_gradient(self):
        sizes = (2,)
        logits = np.array([[0.0, 0.0]])
        actions = np.array([[0]])
        # rho = 0.5/old; make old tiny so rho is far above 1 + eps with A > 0.
        value, grad = clipped_surrogate(logits, sizes, actions, np.array([1.0]), np.array([[0.05]]), 0.2)
        assert value == pytest.approx(1.2)  # clipped branch: 1.2 * A
        assert np.allclose(grad, 0.0)


class TestPPOSearch:
    def test_constant_reward_leaves_logits_unchanged(self):
        res = ppo_search(lambda c: 0.5, iterations=3, batch=8, rng=np.random.default_rng(6))
        assert np.allclose(res.params.logits, 0.0)
        assert res.params.baseline == pytest.approx(0.5)

    def test_seeded_runs_are_identical(self):
        target = DEFAULT_SPACE.sample(np.random.default_rng(122))
        fn = TokenMatchReward(target)
        a = ppo_search(fn, iterations=5, batch=16, rng=np.random.default_rng(7))
        b = ppo_search(fn, iterations=5, batch=16, rng=np.random.default_rng(7))
        assert np.array_equal(a.params.logits, b.params.logits)
        assert [r.reward for r in a.history] == [r.reward for r in b.history]

    def test_learning_concentrates_probability_on_target(self):
        target = DEFAULT_SPACE.sample(np.random.default_rng(123))
        fn = TokenMatchReward(target)
        res = ppo_search(fn, iterations=60, batch=64, rng=np.random.default_rng(8))
        last = [r.reward for r in res.history[-64:]]
        assert sum(last) / len(last) > 0.8
        probs = res.params.probabilities()
        hit = np.mean([probs[s, target.tokens[s]] for s in range(30)])
        assert hit > 0.5

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergent_settings_abort_cleanly(self):
        target = DEFAULT_SPACE.sample(np.random.default_rng(124))
        with pytest.raises(SearchAbortError, match="non-finite"):
            ppo_search(
                TokenMatchReward(target),
                iterations=50,
                batch=8,
                rng=np.random.default_rng(9),
                lr=float("inf"),
                epochs=4,
            )

    def test_rejects_bad_parameters(self):
        fn = TokenMatchReward(DEFAULT_SPACE.sample(np.random.default_rng(125)))
        with pytest.raises(ValueError):
            ppo_search(fn, iterations=0, batch=8, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            ppo_search(fn, iterations=1, batch=1, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            ppo_search(fn, iterations=1, batch=8, clip_eps=0.0, rng=np.random.default_rng(0))


class TestEvaluationErrors:
    def test_reward_errors_are_recorded_not_fatal(self):
        bad = ExternalReward("test -f {policy} && exit 2")
        res = random_search(bad, 5, np.random.default_rng(10))
        assert len(res.history) == 5
        for rec in res.history:
            assert rec.reward == 0.0
            assert rec.error is not None

    def test_out_of_range_reward_is_rejected(self):
        with pytest.raises(ValueError):
            random_search(lambda c: 1.5, 2, np.random.default_rng(11))
