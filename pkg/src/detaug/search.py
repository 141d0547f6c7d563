"""Discrete optimization over the policy space.

A policy is encoded as a flat token vector (kind, probability level,
magnitude level, repeated per op slot) and searched with one of three
optimizers: plain random sampling, regularized evolution, or PPO over a
controller of per-step independent categorical distributions.  Rewards are
pluggable callables mapping a candidate to [0, 1].
"""

from __future__ import annotations

import subprocess
import tempfile
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .policy import (
    DEFAULT_LEVELS,
    SEARCHABLE_KINDS,
    LevelConfig,
    OpKind,
    OpSpec,
    Policy,
    SubPolicy,
    search_space_cardinality,
    serialize_policy,
)

TOKENS_PER_OP = 3  # kind, probability level, magnitude level


@dataclass(frozen=True)
class Candidate:
    """A flat vector of search tokens; meaning is given by a SearchSpace."""

    tokens: tuple[int, ...]

    def __post_init__(self):
        toks = tuple(int(t) for t in self.tokens)
        if any(t < 0 for t in toks):
            raise ValueError(f"negative token in {toks}")
        object.__setattr__(self, "tokens", toks)


@dataclass(frozen=True)
class SearchSpace:
    """Token layout for policies of K sub-policies x N ops."""

    cfg: LevelConfig = DEFAULT_LEVELS
    num_sub_policies: int = 5
    ops_per_sub_policy: int = 2

    def __post_init__(self):
        if self.num_sub_policies < 1 or self.ops_per_sub_policy < 1:
            raise ValueError("search space needs at least one sub-policy of one op")

    @property
    def num_steps(self) -> int:
        return self.num_sub_policies * self.ops_per_sub_policy * TOKENS_PER_OP

    def vocab_sizes(self) -> tuple[int, ...]:
        per_op = (len(SEARCHABLE_KINDS), self.cfg.M, self.cfg.L)
        return per_op * (self.num_sub_policies * self.ops_per_sub_policy)

    def cardinality(self) -> int:
        return search_space_cardinality(
            len(SEARCHABLE_KINDS),
            self.cfg.L,
            self.cfg.M,
            self.ops_per_sub_policy,
            self.num_sub_policies,
        )

    def validate(self, c: Candidate) -> None:
        sizes = self.vocab_sizes()
        if len(c.tokens) != len(sizes):
            raise ValueError(f"expected {len(sizes)} tokens, got {len(c.tokens)}")
        for i, (t, v) in enumerate(zip(c.tokens, sizes)):
            if t >= v:
                raise ValueError(f"token {i} is {t}, beyond vocabulary size {v}")

    def sample(self, rng: np.random.Generator) -> Candidate:
        highs = np.asarray(self.vocab_sizes(), dtype=np.int64)
        return Candidate(tuple(int(t) for t in rng.integers(0, highs)))

    def mutate(self, c: Candidate, rng: np.random.Generator) -> Candidate:
        """Replace one uniformly-chosen token with a different in-vocabulary value."""
        self.validate(c)
        sizes = self.vocab_sizes()
        pos = int(rng.integers(0, len(sizes)))
        if sizes[pos] < 2:
            return Candidate(c.tokens)
        new = int(rng.integers(0, sizes[pos] - 1))
        if new >= c.tokens[pos]:
            new += 1
        toks = list(c.tokens)
        toks[pos] = new
        return Candidate(tuple(toks))

    def decode(self, c: Candidate) -> Policy:
        self.validate(c)
        subs = []
        it = iter(c.tokens)
        for _ in range(self.num_sub_policies):
            ops = []
            for _ in range(self.ops_per_sub_policy):
                kind_idx, prob_level, mag_level = next(it), next(it), next(it)
                ops.append(OpSpec(SEARCHABLE_KINDS[kind_idx], prob_level, mag_level))
            subs.append(SubPolicy(tuple(ops)))
        return Policy(tuple(subs))

    def encode(self, p: Policy) -> Candidate:
        if len(p.sub_policies) != self.num_sub_policies:
            raise ValueError(
                f"expected {self.num_sub_policies} sub-policies, got {len(p.sub_policies)}"
            )
        kind_index = {k: i for i, k in enumerate(SEARCHABLE_KINDS)}
        tokens: list[int] = []
        for sp in p.sub_policies:
            if len(sp.ops) != self.ops_per_sub_policy:
                raise ValueError(
                    f"expected {self.ops_per_sub_policy} ops per sub-policy, got {len(sp.ops)}"
                )
            for op in sp.ops:
                if op.kind is OpKind.NO_OP:
                    raise ValueError("NoOp is not representable in the search vocabulary")
                if op.prob_level >= self.cfg.M or op.mag_level >= self.cfg.L:
                    raise ValueError(f"levels of {op} exceed the configured grid")
                tokens.extend((kind_index[op.kind], op.prob_level, op.mag_level))
        return Candidate(tuple(tokens))


DEFAULT_SPACE = SearchSpace()


class RewardEvaluationError(RuntimeError):
    """An individual reward evaluation failed; the optimizer records reward 0."""


class SearchAbortError(RuntimeError):
    """The optimizer reached an unrecoverable state (non-finite controller)."""


class TokenMatchReward:
    """Fraction of tokens equal to a hidden target; 1.0 uniquely at the target."""

    deterministic = True

    def __init__(self, target: Candidate):
        self.target = target

    def __call__(self, c: Candidate) -> float:
        t = self.target.tokens
        if len(c.tokens) != len(t):
            raise RewardEvaluationError(
                f"candidate has {len(c.tokens)} tokens, target has {len(t)}"
            )
        return sum(a == b for a, b in zip(c.tokens, t)) / len(t)


def token_match_reward(target: Candidate) -> TokenMatchReward:
    return TokenMatchReward(target)


class ExternalReward:
    """Reward from a shell command that scores a serialized policy file.

    The command template must contain ``{policy}``, replaced by the path of
    a temporary policy JSON.  The final nonempty stdout line must parse as a
    decimal in [0, 1]; any other outcome raises RewardEvaluationError.
    """

    def __init__(
        self,
        command: str,
        space: SearchSpace = DEFAULT_SPACE,
        deterministic: bool = False,
        timeout: float | None = None,
    ):
        if "{policy}" not in command:
            raise ValueError("command template must contain the {policy} placeholder")
        self.command = command
        self.space = space
        self.deterministic = deterministic
        self.timeout = timeout

    def __call__(self, c: Candidate) -> float:
        text = serialize_policy(self.space.decode(c), self.space.cfg)
        with tempfile.TemporaryDirectory(prefix="detaug-reward-") as tmp:
            policy_path = Path(tmp) / "policy.json"
            policy_path.write_text(text)
            cmd = self.command.replace("{policy}", str(policy_path))
            try:
                proc = subprocess.run(
                    cmd, shell=True, capture_output=True, text=True, timeout=self.timeout
                )
            except subprocess.TimeoutExpired as e:
                raise RewardEvaluationError(f"command timed out after {e.timeout}s") from e
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1:] or proc.stdout.strip().splitlines()[-1:]
            raise RewardEvaluationError(
                f"command exited {proc.returncode}" + (f": {tail[0]}" if tail else "")
            )
        lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
        if not lines:
            raise RewardEvaluationError("command produced no output")
        try:
            value = float(lines[-1])
        except ValueError as e:
            raise RewardEvaluationError(f"final output line is not a number: {lines[-1]!r}") from e
        if not 0.0 <= value <= 1.0:
            raise RewardEvaluationError(f"reward {value} outside [0, 1]")
        return value


class AveragedReward:
    """Mean of ``repeats`` evaluations, for smoothing stochastic rewards."""

    def __init__(self, fn, repeats: int = 1):
        if repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {repeats}")
        self.fn = fn
        self.repeats = repeats
        self.deterministic = bool(getattr(fn, "deterministic", False))

    def __call__(self, c: Candidate) -> float:
        return sum(self.fn(c) for _ in range(self.repeats)) / self.repeats


@dataclass(frozen=True)
class EvalRecord:
    """One reward evaluation, in submission order."""

    index: int
    tokens: tuple[int, ...]
    reward: float
    best_so_far: float
    error: str | None = None
    wall_ms: float = 0.0


@dataclass
class ControllerParams:
    """Per-step categorical logits over a padded common vocabulary."""

    logits: np.ndarray
    vocab_sizes: tuple[int, ...]
    baseline: float | None = None

    @staticmethod
    def initial(space: SearchSpace) -> "ControllerParams":
        sizes = space.vocab_sizes()
        return ControllerParams(
            logits=np.zeros((len(sizes), max(sizes)), dtype=np.float64),
            vocab_sizes=sizes,
        )

    def mask(self) -> np.ndarray:
        cols = np.arange(self.logits.shape[1])
        return cols[None, :] < np.asarray(self.vocab_sizes)[:, None]

    def probabilities(self) -> np.ndarray:
        """Per-step softmax over the valid vocabulary; padded slots are 0."""
        mask = self.mask()
        shifted = self.logits - np.where(mask, self.logits, -np.inf).max(axis=1, keepdims=True)
        expd = np.exp(shifted) * mask
        return expd / expd.sum(axis=1, keepdims=True)


@dataclass
class SearchResult:
    best_candidate: Candidate
    best_reward: float
    history: list[EvalRecord]
    params: ControllerParams | None = None


def _evaluate(reward_fn, c: Candidate) -> tuple[float, str | None]:
    try:
        r = float(reward_fn(c))
    except RewardEvaluationError as e:
        return 0.0, str(e)
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"reward function returned {r}, outside [0, 1]")
    return r, None


class _HistoryTracker:
    def __init__(self):
        self.records: list[EvalRecord] = []
        self.best_candidate: Candidate | None = None
        self.best_reward = -1.0

    def record(self, c: Candidate, reward_fn) -> float:
        start = time.perf_counter()
        r, err = _evaluate(reward_fn, c)
        wall_ms = (time.perf_counter() - start) * 1000.0
        if r > self.best_reward:
            self.best_reward = r
            self.best_candidate = c
        self.records.append(
            EvalRecord(len(self.records), c.tokens, r, self.best_reward, err, wall_ms)
        )
        return r

    def result(self, params: ControllerParams | None = None) -> SearchResult:
        assert self.best_candidate is not None
        return SearchResult(self.best_candidate, self.best_reward, self.records, params)


def random_search(
    reward_fn,
    budget: int,
    rng: np.random.Generator,
    space: SearchSpace = DEFAULT_SPACE,
) -> SearchResult:
    """Evaluate ``budget`` uniform candidates and keep the best."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    tracker = _HistoryTracker()
    for _ in range(budget):
        tracker.record(space.sample(rng), reward_fn)
    return tracker.result()


def evolution_search(
    reward_fn,
    population: int,
    sample: int,
    budget: int,
    rng: np.random.Generator,
    space: SearchSpace = DEFAULT_SPACE,
) -> SearchResult:
    """Regularized evolution: tournament selection, single-token mutation, age-based eviction."""
    if not 1 <= sample <= population:
        raise ValueError(f"need population >= sample >= 1, got {population}, {sample}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    tracker = _HistoryTracker()
    pop: deque[tuple[Candidate, float]] = deque()
    for _ in range(min(population, budget)):
        c = space.sample(rng)
        pop.append((c, tracker.record(c, reward_fn)))
    while len(tracker.records) < budget:
        picks = rng.integers(0, len(pop), size=sample)
        winner, winner_r = pop[int(picks[0])]
        for i in picks[1:]:
            cand, r = pop[int(i)]
            if r > winner_r:
                winner, winner_r = cand, r
        child = space.mutate(winner, rng)
        pop.append((child, tracker.record(child, reward_fn)))
        pop.popleft()
    return tracker.result()


def masked_softmax(logits: np.ndarray, vocab_sizes) -> np.ndarray:
    cols = np.arange(logits.shape[1])
    mask = cols[None, :] < np.asarray(vocab_sizes)[:, None]
    shifted = logits - np.where(mask, logits, -np.inf).max(axis=1, keepdims=True)
    expd = np.exp(shifted) * mask
    return expd / expd.sum(axis=1, keepdims=True)


def clipped_surrogate(
    logits: np.ndarray,
    vocab_sizes,
    actions: np.ndarray,
    advantages: np.ndarray,
    old_probs: np.ndarray,
    clip_eps: float,
) -> tuple[float, np.ndarray]:
    """Mean clipped-surrogate objective and its exact gradient w.r.t. logits.

    The objective for each sampled candidate is the sum over steps of
    min(rho*A, clip(rho, 1-eps, 1+eps)*A) with rho the new/old probability
    ratio of the taken action; the batch mean is ascended.  The gradient is
    zero at steps where the clipped branch is active.
    """
    probs = masked_softmax(logits, vocab_sizes)
    batch, steps = actions.shape
    step_idx = np.arange(steps)
    p_new = probs[step_idx[None, :], actions]
    rho = p_new / old_probs
    adv = advantages[:, None]
    clipped = np.clip(rho, 1.0 - clip_eps, 1.0 + clip_eps)
    value = float(np.minimum(rho * adv, clipped * adv).sum(axis=1).mean())
    active = np.where(adv >= 0, rho <= 1.0 + clip_eps, rho >= 1.0 - clip_eps)
    coeff = adv * rho * active
    grad = np.zeros_like(probs)
    for s in range(steps):
        np.add.at(grad[s], actions[:, s], coeff[:, s])
    grad -= coeff.sum(axis=0)[:, None] * probs
    grad /= batch
    cols = np.arange(logits.shape[1])
    grad *= cols[None, :] < np.asarray(vocab_sizes)[:, None]
    return value, grad


def sample_actions(
    probs: np.ndarray, vocab_sizes, batch: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``batch`` action rows from per-step categoricals (one uniform per step)."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random((batch, probs.shape[0]))
    actions = (u[:, :, None] > cdf[None, :, :]).sum(axis=2)
    return np.minimum(actions, np.asarray(vocab_sizes)[None, :] - 1)


def ppo_search(
    reward_fn,
    iterations: int,
    batch: int,
    rng: np.random.Generator,
    clip_eps: float = 0.2,
    lr: float = 6.0,
    epochs: int = 4,
    baseline_decay: float = 0.9,
    space: SearchSpace = DEFAULT_SPACE,
) -> SearchResult:
    """Train per-step categorical logits with the PPO clipped surrogate.

    Each iteration samples ``batch`` candidates, computes advantages against
    an EMA baseline (seeded with the first batch mean), takes ``epochs``
    ascent steps on the clipped surrogate, then updates the baseline.  With
    one epoch the ratios are identically 1 and the update equals a vanilla
    policy gradient step.
    """
    if batch < 2:
        raise ValueError(f"batch must be >= 2, got {batch}")
    if clip_eps <= 0:
        raise ValueError(f"clip_eps must be > 0, got {clip_eps}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    params = ControllerParams.initial(space)
    sizes = params.vocab_sizes
    tracker = _HistoryTracker()
    for it in range(iterations):
        probs = params.probabilities()
        actions = sample_actions(probs, sizes, batch, rng)
        step_idx = np.arange(actions.shape[1])
        old_probs = probs[step_idx[None, :], actions]
        rewards = np.array(
            [tracker.record(Candidate(tuple(row)), reward_fn) for row in actions],
            dtype=np.float64,
        )
        if params.baseline is None:
            params.baseline = float(rewards.mean())
        advantages = rewards - params.baseline
        for _ in range(epochs):
            _, grad = clipped_surrogate(
                params.logits, sizes, actions, advantages, old_probs, clip_eps
            )
            params.logits = params.logits + lr * grad
        if not np.isfinite(params.logits).all():
            raise SearchAbortError(
                f"controller logits became non-finite at iteration {it} "
                f"(lr={lr}, epochs={epochs}); lower the learning rate"
            )
        params.baseline = baseline_decay * params.baseline + (
            1.0 - baseline_decay
        ) * float(rewards.mean())
    return tracker.result(params)
