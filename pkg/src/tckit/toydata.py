"""Bundled toy collection: 20 documents, 6 tables, 3 topics.

Everything is generated by pure index arithmetic (no RNG), so repeated
builds are byte-identical. Three themes map onto the three topics;
two documents are off-topic filler. Document-level qrels on the 0/1/2
scale feed the surrogate-label path.
"""

from __future__ import annotations

import json
from pathlib import Path

from .extraction import Block, ParsedDocument
from .records import Qrel, Topic, to_dict

_THEMES = [
    {
        "name": "hygiene",
        "title": "Hand hygiene and respiratory infection surveillance",
        "sentences": [
            "Hand hygiene adherence among hospital staff reduced respiratory infection rates across the observation period.",
            "Alcohol based sanitizer stations were installed at every ward entrance before the winter season.",
            "Respiratory infection incidence fell from fourteen to nine cases per thousand patient days.",
            "Compliance audits showed that washing technique improved after the training workshops.",
            "Droplet transmission in crowded clinics remains a major route for seasonal pathogens.",
            "The intervention cohort recorded fewer febrile episodes than the control cohort.",
            "Surface contamination swabs were collected weekly from door handles and bed rails.",
            "Nurses reported skin irritation as the main barrier to frequent hand washing.",
        ],
        "table": {
            "grid": [["Group", "Participants", "Infections per 1000 days"],
                     ["Control", "212", "14.2"],
                     ["Sanitizer", "208", "9.1"],
                     ["Washing training", "195", "8.4"]],
            "caption": "Table 1: Respiratory infection rates by hand hygiene intervention group.",
        },
    },
    {
        "name": "vitamin_d",
        "title": "Vitamin D supplementation and immune markers",
        "sentences": [
            "Vitamin D supplementation raised serum levels in the treatment arm within eight weeks.",
            "Immune response markers including interleukin six shifted toward the reference range.",
            "Participants received two thousand international units daily or a matched placebo.",
            "Deficiency at baseline predicted a stronger immune response to supplementation.",
            "Winter enrollment produced lower baseline serum concentrations than summer enrollment.",
            "Respiratory tract infections were less frequent in the supplemented group.",
            "Adherence was verified through monthly pill counts and serum assays.",
            "The immune panel covered antibody titers and lymphocyte subsets.",
        ],
        "table": {
            "grid": [["Arm", "Daily dose IU", "Serum change nmol"],
                     ["Placebo", "0", "1.8"],
                     ["Standard", "2000", "21.4"],
                     ["High", "4000", "29.6"]],
            "caption": "Table 1: Serum vitamin D change by supplementation arm.",
        },
    },
    {
        "name": "sleep",
        "title": "Sleep duration and cognitive performance testing",
        "sentences": [
            "Sleep duration below six hours was associated with slower reaction times.",
            "Cognitive performance scores declined after two nights of restriction.",
            "Participants wore actigraphy bands to record sleep and wake cycles.",
            "Memory consolidation improved when sleep extended past eight hours.",
            "Daytime alertness correlated with total slow wave sleep minutes.",
            "The working memory battery included digit span and letter recall tasks.",
            "Caffeine intake was held constant across both crossover arms.",
            "Attention lapses doubled in the restricted sleep condition.",
        ],
        "table": {
            "grid": [["Condition", "Sleep hours", "Reaction ms", "Lapses"],
                     ["Extended", "8.6", "242", "3"],
                     ["Habitual", "7.1", "268", "6"],
                     ["Restricted", "5.3", "331", "13"]],
            "caption": "Table 1: Reaction time and attention lapses by sleep condition.",
        },
    },
]

_OFFTOPIC = [
    {
        "title": "Tomato yield under drip irrigation schedules",
        "sentences": [
            "Tomato yields depend on soil composition and irrigation schedules.",
            "Drip lines delivered water directly to the root zone each morning.",
            "Mulched plots retained moisture longer than bare soil plots.",
            "Fruit cracking decreased when watering intervals stayed regular.",
            "Greenhouse rows produced earlier harvests than open field rows.",
            "Pruning side shoots concentrated growth into the main trusses.",
        ],
    },
    {
        "title": "Variable star catalogue from the southern survey",
        "sentences": [
            "The telescope survey catalogued variable stars across the southern sky.",
            "Photometric plates were digitized and aligned against reference frames.",
            "Periodic dimming patterns identified eclipsing binary candidates.",
            "Atmospheric seeing limited resolution on humid summer nights.",
            "The archive now spans four decades of repeated observations.",
            "Brightness curves were fitted with fixed period templates.",
        ],
    },
]

N_DOCS = 20
TABLE_DOCS = (0, 1, 2, 3, 4, 5)  # two per theme
UNCAPTIONED_TABLE_DOC = 4


def toy_doc_id(i: int) -> str:
    return f"doc-{i:02d}"


def _theme_of(i: int) -> dict | None:
    if i >= N_DOCS - len(_OFFTOPIC):
        return None
    return _THEMES[i % len(_THEMES)]


def toy_parsed_document(i: int) -> ParsedDocument:
    theme = _theme_of(i)
    doc_id = toy_doc_id(i)
    if theme is None:
        spec = _OFFTOPIC[i - (N_DOCS - len(_OFFTOPIC))]
        blocks = [Block(kind="heading", text=spec["title"])]
        for j in range(6):
            pool = spec["sentences"]
            para = " ".join([pool[(i + j) % len(pool)],
                             pool[(i + j + 1) % len(pool)],
                             pool[(i + j + 3) % len(pool)],
                             f"Season {j + 1} covered {30 + 5 * j} plots at site {i}."])
            blocks.append(Block(kind="paragraph", text=para))
        return ParsedDocument(doc_id=doc_id, doi=f"10.9999/toy.{i:02d}",
                              title=spec["title"], blocks=tuple(blocks))

    pool = theme["sentences"]
    blocks = [Block(kind="heading", text=f"{theme['title']} cohort {i}")]
    has_table = i in TABLE_DOCS
    captioned = has_table and i != UNCAPTIONED_TABLE_DOC
    for j in range(6):
        sentences = [pool[(i + 2 * j) % len(pool)],
                     pool[(i + 2 * j + 1) % len(pool)],
                     f"Site {i} enrolled {40 + 7 * i + j} participants over "
                     f"{6 + (i + j) % 5} months."]
        if j == 2 and captioned:
            sentences.insert(1, "Table 1 shows the primary outcomes, and as "
                                "reported in Table 1 the effect persisted "
                                "after adjustment.")
        blocks.append(Block(kind="paragraph", text=" ".join(sentences)))
        if j == 3 and has_table:
            grid = tuple(tuple(row) for row in theme["table"]["grid"])
            blocks.append(Block(kind="table", grid=grid, page=2))
            if captioned:
                blocks.append(Block(kind="caption",
                                    text=theme["table"]["caption"]))
    if i == 6:
        blocks.append(Block(kind="figure", text="Enrollment flow diagram."))
    return ParsedDocument(doc_id=doc_id, doi=f"10.9999/toy.{i:02d}",
                          title=f"{theme['title']} cohort {i}",
                          blocks=tuple(blocks))


def toy_parsed_documents() -> list[ParsedDocument]:
    return [toy_parsed_document(i) for i in range(N_DOCS)]


def toy_topics() -> list[Topic]:
    return [
        Topic(topic_id="t1",
              title="hand hygiene and respiratory infection rates",
              description="How does hand hygiene adherence affect "
                          "respiratory infection rates in clinical settings?",
              narrative="Relevant material reports infection incidence under "
                        "hygiene interventions such as sanitizer use or "
                        "washing training. Reports without infection outcomes "
                        "are not relevant."),
        Topic(topic_id="t2",
              title="vitamin D supplementation and immune response",
              description="What effect does vitamin D supplementation have "
                          "on immune response markers and serum levels?",
              narrative="Relevant material measures immune markers or serum "
                        "concentrations under supplementation. Dietary "
                        "surveys without an intervention are not relevant."),
        Topic(topic_id="t3",
              title="sleep duration and cognitive performance",
              description="How does sleep duration influence cognitive "
                          "performance and reaction times?",
              narrative="Relevant material links measured sleep duration to "
                        "cognitive outcomes such as reaction time or memory. "
                        "Opinion pieces are not relevant."),
    ]


def toy_document_qrels() -> list[Qrel]:
    """Document-level labels on the 0/1/2 imported scale."""
    theme_topic = {0: "t1", 1: "t2", 2: "t3"}
    qrels = []
    for i in range(N_DOCS):
        doc_id = toy_doc_id(i)
        theme = _theme_of(i)
        for theme_idx, topic_id in theme_topic.items():
            if theme is None:
                level = 0
            elif i % len(_THEMES) == theme_idx:
                level = 2
            elif (i + 1) % len(_THEMES) == theme_idx:
                level = 1 if i < 6 else 0
            else:
                level = 0
            qrels.append(Qrel(topic_id=topic_id, item_id=doc_id,
                              modality="document", level=level,
                              source="imported"))
    return qrels


def write_toy_inputs(target_dir: str | Path) -> dict:
    """Write parsed docs, topics, and qrels as pipeline input files."""
    target = Path(target_dir)
    parsed_dir = target / "parsed"
    parsed_dir.mkdir(parents=True, exist_ok=True)
    parses = toy_parsed_documents()
    for parse in parses:
        (parsed_dir / f"{parse.doc_id}.json").write_text(
            json.dumps(parse.to_json(), sort_keys=True, ensure_ascii=False),
            encoding="utf-8")
    topics = toy_topics()
    with open(target / "topics.jsonl", "w", encoding="utf-8") as fh:
        for topic in topics:
            fh.write(json.dumps(to_dict(topic), sort_keys=True,
                                ensure_ascii=False) + "\n")
    qrels = toy_document_qrels()
    with open(target / "qrels.txt", "w", encoding="utf-8") as fh:
        for q in qrels:
            fh.write(f"{q.topic_id} 0 {q.item_id} {q.level}\n")
    return {"parsed_dir": str(parsed_dir),
            "topics_path": str(target / "topics.jsonl"),
            "qrels_path": str(target / "qrels.txt"),
            "documents": len(parses), "topics": len(topics),
            "qrels": len(qrels)}
