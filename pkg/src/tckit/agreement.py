"""Cohen's kappa between label sets, at 4-level or binary granularity.

kappa = (p_o - p_e) / (1 - p_e), where p_o is the observed agreement
fraction and p_e the chance agreement implied by the two raters'
marginal label distributions.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, product

from .errors import ValidationError

GRANULARITIES = ("four_level", "binary")


@dataclass(frozen=True)
class AgreementReport:
    rater_a: str
    rater_b: str
    n_items: int
    kappa: float
    granularity: str


@dataclass(frozen=True)
class AgreementSummary:
    granularity: str
    mean_kappa: float | None
    pairs: tuple[AgreementReport, ...]
    skipped_pairs: tuple[tuple[str, str], ...] = ()


def cohens_kappa(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two aligned label vectors.

    Degenerate case: when both raters assign a single identical label to
    everything, p_e = 1 and the usual ratio is 0/0; that is perfect
    agreement the statistic cannot distinguish from chance, returned as 1.0.
    """
    labels_a = list(labels_a)
    labels_b = list(labels_b)
    if len(labels_a) != len(labels_b):
        raise ValidationError(
            f"labels_a: length {len(labels_a)} != labels_b length {len(labels_b)}")
    n = len(labels_a)
    if n < 2:
        raise ValidationError(f"labels_a: need >= 2 items, got {n}")

    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    counts_a = Counter(labels_a)
    counts_b = Counter(labels_b)
    p_e = sum(counts_a[c] / n * counts_b[c] / n for c in counts_a)
    if p_e == 1.0:
        # Both marginals are concentrated on one label, so every pair agrees.
        assert p_o == 1.0
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def _co_labeled(by_rater: dict[str, dict[str, int]], a: str, b: str):
    """Aligned label vectors over the items both raters labeled."""
    shared = sorted(set(by_rater.get(a, {})) & set(by_rater.get(b, {})))
    return ([by_rater[a][i] for i in shared], [by_rater[b][i] for i in shared])


def binarize_labels(labels) -> list[int]:
    """Collapse 4-level labels to binary (0,1 -> 0; 2,3 -> 1).

    Vectors already in {0, 1} pass through unchanged: surrogate labels
    are born binary with 1 meaning relevant, and collapsing them again
    would flip every positive.
    """
    labels = list(labels)
    if all(v in (0, 1) for v in labels):
        return labels
    from .assessment import to_binary

    return [to_binary(v) for v in labels]


def mean_pairwise_kappa(by_rater: dict[str, dict[str, int]],
                        group_a, group_b,
                        granularity: str = "four_level") -> AgreementSummary:
    """Mean kappa over rater pairs.

    ``by_rater`` maps rater id -> {item_id: level}. When the two groups
    are identical the pairs are all unordered pairs within the group;
    otherwise all unordered cross-group pairs. Binary granularity maps
    levels through the 0/1 collapse before computing kappa. Pairs with
    fewer than 2 co-labeled items are skipped with a warning.
    """
    if granularity not in GRANULARITIES:
        raise ValidationError(f"granularity: unknown {granularity!r}")
    group_a = sorted(set(group_a))
    group_b = sorted(set(group_b))
    if group_a == group_b:
        pair_ids = list(combinations(group_a, 2))
    else:
        seen = set()
        pair_ids = []
        for a, b in product(group_a, group_b):
            if a == b:
                continue
            key = tuple(sorted((a, b)))
            if key not in seen:
                seen.add(key)
                pair_ids.append((a, b))

    reports = []
    skipped = []
    for a, b in pair_ids:
        va, vb = _co_labeled(by_rater, a, b)
        if len(va) < 2:
            warnings.warn(f"skipping pair ({a}, {b}): "
                          f"{len(va)} co-labeled items", stacklevel=2)
            skipped.append((a, b))
            continue
        if granularity == "binary":
            va = binarize_labels(va)
            vb = binarize_labels(vb)
        reports.append(AgreementReport(
            rater_a=a, rater_b=b, n_items=len(va),
            kappa=cohens_kappa(va, vb), granularity=granularity))

    mean = sum(r.kappa for r in reports) / len(reports) if reports else None
    return AgreementSummary(granularity=granularity, mean_kappa=mean,
                            pairs=tuple(reports), skipped_pairs=tuple(skipped))


def judgments_by_rater(judgments) -> dict[str, dict[str, int]]:
    """Index store judgments as rater -> {(topic,item) key: level}.

    Judgments without a level (parse failures) are ignored.
    """
    by_rater: dict[str, dict[str, int]] = {}
    for j in judgments:
        if j.level is None:
            continue
        by_rater.setdefault(j.judge, {})[f"{j.topic_id}\x1f{j.item_id}"] = j.level
    return by_rater
