import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tckit.assessment import (assign_human_tasks, majority_vote, parse_level,
                              select_human_sample, surrogate_label, to_binary,
                              umbrela_judge)
from tckit.errors import ValidationError
from tckit.gateway import Gateway, ScriptedProvider
from tckit.records import Passage, TableArtifact, Topic


def topic():
    return Topic(topic_id="t1", title="hand hygiene",
                 description="infection rates", narrative="clinical settings")


def passage():
    return Passage(passage_id="p1", doc_id="d1", char_start=0, char_end=26,
                   text="hand hygiene lowers rates.")


def test_parse_level_final_integer():
    assert parse_level("Reasoning about it...\nFinal score: 3") == 3
    assert parse_level("M is 2, T is 1, so overall 0") == 0
    assert parse_level("two") is None
    assert parse_level("score 5") is None  # out of range never matches
    assert parse_level("19 items reviewed, verdict 2") == 2


def test_umbrela_judge_parses_mock_response():
    provider = ScriptedProvider(["The passage matches.\nFinal score: 3"])
    judgment = umbrela_judge(topic(), passage(),
                             Gateway(default_provider=provider), "judge-x")
    assert judgment.level == 3
    assert judgment.judge == "judge-x"
    assert judgment.modality == "passage"
    assert judgment.error is None
    assert "Final score" in judgment.raw_response


def test_umbrela_judge_retry_then_parse():
    provider = ScriptedProvider(["two", "2"])
    judgment = umbrela_judge(topic(), passage(),
                             Gateway(default_provider=provider), "judge-x")
    assert judgment.level == 2
    assert judgment.error is None


def test_umbrela_judge_unparseable_flagged():
    provider = ScriptedProvider(["score 5", "still score 5"])
    judgment = umbrela_judge(topic(), passage(),
                             Gateway(default_provider=provider), "judge-x")
    assert judgment.level is None
    assert judgment.error == "unparseable level"
    assert judgment.raw_response == "still score 5"


def test_umbrela_judge_table_prompt_includes_context():
    table = TableArtifact.from_grid(
        "d1/t0", "d1", [["group", "rate"], ["control", "14.2"]],
        caption="Table 1: Rates", intext_refs=("see Table 1 for rates",))
    seen = []

    class SpyProvider(ScriptedProvider):
        def chat(self, request):
            seen.append(request.prompt_text())
            return super().chat(request)

    provider = SpyProvider(["Final score: 1"])
    umbrela_judge(topic(), table, Gateway(default_provider=provider), "j")
    prompt = seen[0]
    assert "Table 1: Rates" in prompt
    assert "control | 14.2" in prompt
    assert "see Table 1 for rates" in prompt
    assert "hand hygiene" in prompt and "clinical settings" in prompt


def test_majority_vote_cases():
    assert majority_vote([2, 2, 3]) == 2
    assert majority_vote([0, 3, 3]) == 3
    assert majority_vote([0, 1, 3]) == 1  # all differ: median
    with pytest.raises(ValidationError):
        majority_vote([1, 2])


@settings(max_examples=100, deadline=None)
@given(levels=st.lists(st.integers(0, 3), min_size=3, max_size=3),
       perm=st.permutations([0, 1, 2]))
def test_majority_vote_permutation_invariant(levels, perm):
    shuffled = [levels[i] for i in perm]
    assert majority_vote(levels) == majority_vote(shuffled)


def test_to_binary_table():
    assert [to_binary(v) for v in (0, 1, 2, 3)] == [0, 0, 1, 1]
    with pytest.raises(ValidationError):
        to_binary(4)


@settings(max_examples=50, deadline=None)
@given(a=st.integers(0, 3), b=st.integers(0, 3))
def test_to_binary_monotone(a, b):
    if a <= b:
        assert to_binary(a) <= to_binary(b)


def test_surrogate_mapping():
    table = TableArtifact.from_grid("d1/t0", "d1", [["a", "b"]])
    assert surrogate_label("t1", table, 2).level == 1
    assert surrogate_label("t1", table, 1).level == 1
    assert surrogate_label("t1", table, 0).level == 0
    assert surrogate_label("t1", table, None) is None
    assert surrogate_label("t1", table, 2).judge == "surrogate"


def test_select_human_sample_ends_of_pool():
    pool = [f"item{i:03d}" for i in range(1, 201)]
    sampled = select_human_sample(pool, top_n=5, bottom_n=5)
    assert sampled == pool[:5] + pool[195:]


def test_select_human_sample_short_pool_warns():
    pool = [f"i{i}" for i in range(8)]
    with pytest.warns(UserWarning):
        sampled = select_human_sample(pool, top_n=5, bottom_n=5)
    assert sampled == pool


def test_assign_human_tasks_even_split():
    items = [f"item{i}" for i in range(10)]
    dealt = assign_human_tasks(items, [f"a{j}" for j in range(4)], copies=2)
    assert all(len(v) == 5 for v in dealt.values())
    # every item lands with exactly two distinct annotators
    holders = {}
    for annotator, keys in dealt.items():
        for key in keys:
            holders.setdefault(key, set()).add(annotator)
    assert all(len(h) == 2 for h in holders.values())


def test_assign_human_tasks_copies_bounded():
    with pytest.raises(ValidationError):
        assign_human_tasks(["x"], ["a", "b"], copies=3)
