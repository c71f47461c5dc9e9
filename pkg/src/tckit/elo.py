"""Pairwise answer comparisons aggregated into permutation-averaged Elo.

Every cross-configuration answer pair within a topic is judged for
preference; ratings start at 1500 and update with a small k so no single
match dominates. Because replay order changes the final ratings, the
tournament replays the judgment sequence under many seeded shuffles and
reports the mean rating per answer, then per configuration.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import combinations
from random import Random

from .errors import ValidationError
from .gateway import ChatRequest, Gateway, user_message
from .prompts import render_template
from .records import PairJudgment, RagAnswer, Topic

K_FACTOR = 8.0
PERMUTATIONS = 100
INITIAL_RATING = 1500.0

_VERDICT = re.compile(r"\b([AB])\b")


@dataclass(frozen=True)
class EloConfig:
    k_factor: float = K_FACTOR
    permutations: int = PERMUTATIONS
    rng_seed: int = 0

    def __post_init__(self):
        if self.k_factor <= 0:
            raise ValidationError(f"k_factor: must be > 0, got {self.k_factor}")
        if self.permutations < 1:
            raise ValidationError(
                f"permutations: must be >= 1, got {self.permutations}")


@dataclass(frozen=True)
class EloRating:
    entity: str
    rating: float
    games: int


@dataclass
class EloReport:
    config: EloConfig
    answer_ratings: dict[str, EloRating] = field(default_factory=dict)
    config_ratings: dict[str, float] = field(default_factory=dict)
    judged_pairs: int = 0
    skipped_pairs: int = 0

    def to_json(self) -> dict:
        return {
            "k_factor": self.config.k_factor,
            "permutations": self.config.permutations,
            "rng_seed": self.config.rng_seed,
            "judged_pairs": self.judged_pairs,
            "skipped_pairs": self.skipped_pairs,
            "answers": {e: {"rating": r.rating, "games": r.games}
                        for e, r in sorted(self.answer_ratings.items())},
            "configs": dict(sorted(self.config_ratings.items())),
        }


def elo_expected(r1: float, r2: float) -> float:
    """Expected probability that the first side is judged superior."""
    return 1.0 / (1.0 + 10.0 ** ((r2 - r1) / 400.0))


def elo_update(r1: float, r2: float, s1: int,
               k: float = K_FACTOR) -> tuple[float, float]:
    """One match update; s1 is 1 when the first side prevails, else 0.

    Both sides update from their pre-match ratings, so the total rating
    mass is conserved exactly.
    """
    if s1 not in (0, 1):
        raise ValidationError(f"s1: must be 0 or 1, got {s1}")
    new_r1 = r1 + k * (s1 - elo_expected(r1, r2))
    new_r2 = r2 + k * ((1 - s1) - elo_expected(r2, r1))
    return new_r1, new_r2


def schedule_pairs(answers: list[RagAnswer]) -> list[tuple[str, str, str]]:
    """All cross-configuration answer pairs per topic.

    Intra-configuration pairs are excluded (samples from one setup carry
    no preference signal about the setup itself). Deterministic order:
    topic, then lexicographic answer ids. Returns (topic_id, answer_a,
    answer_b) triples with answer_a < answer_b.
    """
    by_topic: dict[str, list[RagAnswer]] = {}
    for a in answers:
        by_topic.setdefault(a.topic_id, []).append(a)
    pairs = []
    for topic_id in sorted(by_topic):
        group = sorted(by_topic[topic_id], key=lambda a: a.answer_id)
        for left, right in combinations(group, 2):
            if left.config_tag == right.config_tag:
                continue
            pairs.append((topic_id, left.answer_id, right.answer_id))
    return pairs


def judge_pair(topic: Topic, answer_a: RagAnswer, answer_b: RagAnswer,
               gateway: Gateway, model_tag: str, seed: int = 0,
               template_dir=None) -> PairJudgment | None:
    """LLM preference for one pair, with position-bias control.

    The presentation order of the two answers is randomized per call from
    the seed (pairwise judging is order-sensitive); the parsed verdict is
    mapped back to the canonical pair. An unparseable verdict gets one
    retry, then the pair is skipped (None). The protocol has no tie
    outcome.
    """
    rng = Random(f"{seed}:pair:{topic.topic_id}:{answer_a.answer_id}"
                 f":{answer_b.answer_id}")
    flipped = rng.random() < 0.5
    first, second = (answer_b, answer_a) if flipped else (answer_a, answer_b)
    prompt = render_template("pair_judge", template_dir,
                             topic=topic.query_text(),
                             answer_a=first.text, answer_b=second.text)

    def ask(suffix: str = "") -> str | None:
        response = gateway.chat(
            ChatRequest(model_tag=model_tag,
                        messages=user_message(prompt + suffix)),
            purpose="pair_judge")
        matches = _VERDICT.findall(response.text)
        return matches[-1] if matches else None

    verdict = ask()
    if verdict is None:
        verdict = ask('\nAnswer with exactly "Verdict: A" or "Verdict: B".')
    if verdict is None:
        return None
    presented_winner_is_first = verdict == "A"
    winner_answer = first if presented_winner_is_first else second
    return PairJudgment(topic_id=topic.topic_id,
                        answer_a=answer_a.answer_id,
                        answer_b=answer_b.answer_id,
                        winner="a" if winner_answer is answer_a else "b",
                        judge=model_tag)


def run_tournament(judgments: list[PairJudgment], config: EloConfig,
                   answers: list[RagAnswer] | None = None) -> EloReport:
    """Replay the judgments under seeded shuffles and average the ratings.

    Each permutation replays every update from the 1500 baseline; an
    answer's final rating is its mean over permutations, and a
    configuration's rating is the mean over its answers. Averaging over
    shuffles removes the match-order dependency of a single replay.
    """
    if not judgments:
        raise ValidationError("judgments: tournament needs at least one")
    config_of: dict[str, str] = {}
    entities: list[str] = []
    if answers:
        for a in answers:
            config_of[a.answer_id] = a.config_tag
            entities.append(a.answer_id)
    for j in judgments:
        for entity in (j.answer_a, j.answer_b):
            if entity not in config_of:
                config_of[entity] = entity.rsplit("/", 2)[-2] \
                    if entity.count("/") >= 2 else "unknown"
                entities.append(entity)

    games: dict[str, int] = {e: 0 for e in entities}
    for j in judgments:
        games[j.answer_a] += 1
        games[j.answer_b] += 1

    totals = {e: 0.0 for e in entities}
    sequence = list(judgments)
    for p in range(config.permutations):
        rng = Random(f"{config.rng_seed}:perm:{p}")
        shuffled = list(sequence)
        rng.shuffle(shuffled)
        ratings = {e: INITIAL_RATING for e in entities}
        for j in shuffled:
            s1 = 1 if j.winner == "a" else 0
            ratings[j.answer_a], ratings[j.answer_b] = elo_update(
                ratings[j.answer_a], ratings[j.answer_b], s1,
                k=config.k_factor)
        for e in entities:
            totals[e] += ratings[e]

    report = EloReport(config=config, judged_pairs=len(judgments))
    for e in entities:
        report.answer_ratings[e] = EloRating(
            entity=e, rating=totals[e] / config.permutations, games=games[e])

    by_config: dict[str, list[float]] = {}
    for e in entities:
        by_config.setdefault(config_of[e], []).append(
            report.answer_ratings[e].rating)
    report.config_ratings = {tag: sum(vals) / len(vals)
                             for tag, vals in by_config.items()}
    return report
