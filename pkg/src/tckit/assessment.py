"""Synthetic relevance labeling of pooled items and label derivations.

Pooled passages and tables get 4-level labels (0 irrelevant, 1 related,
2 highly relevant, 3 perfectly relevant) from interchangeable judge
models; on top of those sit majority-vote labels, a binary collapse, and
surrogate labels inherited from document-level judgments.
"""

from __future__ import annotations

import re
import warnings

from .errors import ValidationError
from .gateway import ChatRequest, Gateway, user_message
from .prompts import render_template
from .records import Judgment, Passage, TableArtifact, Topic
from .store import Store

# Parse-retry nudge appended when the judge's reply has no usable rating.
_CLARIFY_SUFFIX = "\nReply with a single integer between 0 and 3."

_STANDALONE_INT = re.compile(r"(?<!\d)(\d+)(?!\d)")


def topic_block(topic: Topic) -> str:
    """Full topic context for judge prompts: title, description, narrative."""
    lines = [topic.title]
    if topic.description:
        lines.append(topic.description)
    if topic.narrative:
        lines.append(topic.narrative)
    return "\n".join(lines)


def item_text(item) -> str:
    """Judgeable content: passage text, or table caption + grid + references."""
    if isinstance(item, Passage):
        return item.text
    if isinstance(item, TableArtifact):
        return item.render()
    raise ValidationError(f"item: cannot judge a {type(item).__name__}")


def item_modality(item) -> str:
    return "passage" if isinstance(item, Passage) else "table"


def item_id_of(item) -> str:
    return item.passage_id if isinstance(item, Passage) else item.table_id


def parse_level(text: str) -> int | None:
    """The last standalone integer 0-3 in the response, else None.

    Judge models often reason before the verdict, so the scan runs from
    the end; integers outside the scale never match.
    """
    for match in reversed(_STANDALONE_INT.findall(text)):
        value = int(match)
        if 0 <= value <= 3:
            return value
    return None


def umbrela_judge(topic: Topic, item, gateway: Gateway, model_tag: str,
                  template_dir=None) -> Judgment:
    """One 4-level judgment for a pooled item.

    On a parse failure the request is retried once with a clarifying
    suffix; a still-unparseable reply is recorded with no level and an
    error flag rather than dropped, keeping the raw response auditable.
    """
    prompt = render_template("assess", template_dir,
                             topic=topic_block(topic), item=item_text(item))
    response = gateway.chat(
        ChatRequest(model_tag=model_tag, messages=user_message(prompt)),
        purpose="assessment")
    level = parse_level(response.text)
    raw = response.text
    if level is None:
        retry = gateway.chat(
            ChatRequest(model_tag=model_tag,
                        messages=user_message(prompt + _CLARIFY_SUFFIX)),
            purpose="assessment")
        level = parse_level(retry.text)
        raw = retry.text
    return Judgment(topic_id=topic.topic_id, item_id=item_id_of(item),
                    modality=item_modality(item), level=level,
                    judge=model_tag, raw_response=raw,
                    error=None if level is not None else "unparseable level")


def majority_vote(levels) -> int:
    """Modal level of exactly three judgments; median when all differ.

    For three values the sorted middle element is the mode whenever one
    exists and the median otherwise, which is exactly the tie-break rule
    (the median respects the ordinal structure of the scale).
    """
    levels = list(levels)
    if len(levels) != 3:
        raise ValidationError(f"levels: majority vote needs 3, got {len(levels)}")
    return sorted(levels)[1]


def to_binary(level: int) -> int:
    """Collapse the 4-level scale: 0,1 -> 0 and 2,3 -> 1."""
    if level not in (0, 1, 2, 3):
        raise ValidationError(f"level: {level} not in 0..3")
    return 1 if level >= 2 else 0


def surrogate_label(topic_id: str, item, doc_level: int | None) -> Judgment | None:
    """Binary judgment inherited from the item's parent document label.

    ``doc_level`` is the imported document-scale (0/1/2) label for this
    topic; any level >= 1 counts as relevant. Items whose document has no
    imported label yield no judgment.
    """
    if doc_level is None:
        return None
    return Judgment(topic_id=topic_id, item_id=item_id_of(item),
                    modality=item_modality(item),
                    level=1 if doc_level >= 1 else 0, judge="surrogate")


def select_human_sample(pool_item_ids, top_n: int = 5, bottom_n: int = 5) -> list[str]:
    """Top-n and bottom-n pool entries, in pool order.

    Mixing both ends balances relevant and non-relevant items. A pool
    shorter than top_n + bottom_n is taken whole, with a warning.
    """
    items = list(pool_item_ids)
    if len(items) < top_n + bottom_n:
        warnings.warn(f"pool of {len(items)} shorter than top_n + bottom_n "
                      f"= {top_n + bottom_n}; taking all", stacklevel=2)
        return items
    return items[:top_n] + items[len(items) - bottom_n:]


def assign_human_tasks(item_keys, annotators, copies: int = 2) -> dict[str, list]:
    """Deal each item to ``copies`` distinct annotators, round-robin.

    Double assignment is what makes human-human agreement computable.
    With items*copies divisible by the annotator count every annotator
    receives the same share.
    """
    annotators = list(annotators)
    if copies > len(annotators):
        raise ValidationError(
            f"copies: {copies} exceeds the {len(annotators)} annotators")
    assignment: dict[str, list] = {a: [] for a in annotators}
    for i, key in enumerate(item_keys):
        for c in range(copies):
            annotator = annotators[(i * copies + c) % len(annotators)]
            assignment[annotator].append(key)
    return assignment


def run_assessment(store: Store, gateway: Gateway, model_tags,
                   modality: str, template_dir=None,
                   force: bool = False) -> int:
    """Judge every pooled item with every model; add majority + surrogate.

    Already-stored judgments are skipped unless ``force``, making the
    operation idempotent. Returns the number of new judgments written.
    """
    pool_tag = f"pool-{modality}"
    entries = store.run_entries(pool_tag)
    if not entries:
        raise ValidationError(f"run_tag: no pool run {pool_tag!r}; build pools first")
    topics = {t.topic_id: t for t in store.topics()}
    existing = {(j.topic_id, j.item_id, j.judge): j for j in store.judgments()}

    def lookup(item_id: str):
        if modality == "passage":
            return store.get_passage(item_id)
        return store.get_table(item_id)

    doc_qrels: dict[tuple[str, str], int] = {}
    for q in store.qrels(source="imported", modality="document"):
        doc_qrels[(q.topic_id, q.item_id)] = q.level

    written: list[Judgment] = []
    by_item_levels: dict[tuple[str, str], dict[str, int]] = {}
    for entry in entries:
        topic = topics.get(entry.topic_id)
        item = lookup(entry.item_id)
        if topic is None or item is None:
            continue
        for model_tag in model_tags:
            key = (entry.topic_id, entry.item_id, model_tag)
            if key in existing and not force:
                judgment = existing[key]
            else:
                judgment = umbrela_judge(topic, item, gateway, model_tag,
                                         template_dir=template_dir)
                written.append(judgment)
            if judgment.level is not None:
                by_item_levels.setdefault(
                    (entry.topic_id, entry.item_id), {})[model_tag] = judgment.level

        if (entry.topic_id, entry.item_id, "surrogate") not in existing or force:
            surrogate = surrogate_label(
                entry.topic_id, item,
                doc_qrels.get((entry.topic_id, item.doc_id)))
            if surrogate is not None:
                written.append(surrogate)

    # Majority labels once at least three model judgments exist per item.
    for (topic_id, item_id), levels in by_item_levels.items():
        if len(levels) < 3:
            continue
        if (topic_id, item_id, "majority") in existing and not force:
            continue
        first_three = [levels[m] for m in list(model_tags)[:3] if m in levels]
        if len(first_three) < 3:
            continue
        written.append(Judgment(topic_id=topic_id, item_id=item_id,
                                modality=modality,
                                level=majority_vote(first_three),
                                judge="majority"))

    if written:
        store.upsert(written)
    return len(written)
