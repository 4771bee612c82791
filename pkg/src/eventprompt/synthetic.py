"""Deterministic synthetic schema and mini-corpus.

Stand-ins for license-restricted event-annotated data: same file formats,
desk scale. The corpus draws every sentence from a small fixed word bank so
that the full set of prompt instances stays inside the mock backend's
vocabulary limit, which is what makes end-to-end memorization runs possible.
``build_ace_shape_schema`` produces a full-scale ontology skeleton (8 main
types, 33 subtypes, 35 roles) whose templates are placeholders; substitute
annotation-guideline text there for real use.
"""

from __future__ import annotations

import random

from .corpus import Argument, Document, EventMention
from .schema import ACE_MAIN_TYPES, ArgumentRole, EventSubtype, Schema, schema_from_dict

_TRIGGER_TEMPLATE = "the {name} trigger word is [MASK_SLOT] ."
_ROLE_TEMPLATE = "the {name} filler is [MASK_SLOT] ."


def build_synthetic_schema() -> Schema:
    """3 main types, 5 subtypes, 6 roles; templates from the shared word bank."""
    main_types = ["Justice", "Commerce", "Motion"]
    subtypes = [
        ("Convict", "Justice"),
        ("Sentence", "Justice"),
        ("Buy", "Commerce"),
        ("Sell", "Commerce"),
        ("Depart", "Motion"),
    ]
    roles = [
        ("Defendant", "Convict"),
        ("Adjudicator", "Convict"),
        ("Adjudicator", "Sentence"),
        ("Buyer", "Buy"),
        ("Seller", "Sell"),
        ("Agent", "Depart"),
    ]
    return schema_from_dict(
        {
            "main_types": main_types,
            "subtypes": [
                {
                    "name": name,
                    "parent": parent,
                    "trigger_question_template": _TRIGGER_TEMPLATE.format(name=name),
                }
                for name, parent in subtypes
            ],
            "roles": [
                {
                    "name": name,
                    "event_subtype": subtype,
                    "description_template": _ROLE_TEMPLATE.format(name=name),
                }
                for name, subtype in roles
            ],
        }
    )


_ENTITIES = ("Rex", "Mia", "Liu")

# Each sentence builder returns (tokens, events); events reference token
# indices for the trigger and (role, index) pairs for arguments.


def _convict(e1):
    return ["the", "court", "convicted", e1, "."], [
        ("Convict", 2, [("Defendant", 3), ("Adjudicator", 1)])
    ]


def _sentencing(e1):
    return ["the", "court", "sentenced", e1, "."], [("Sentence", 2, [("Adjudicator", 1)])]


def _buy(e1):
    return [e1, "bought", "a", "gem", "."], [("Buy", 1, [("Buyer", 0)])]


def _sell(e1):
    return [e1, "sold", "the", "gem", "."], [("Sell", 1, [("Seller", 0)])]


def _depart(e1):
    return [e1, "left", "Oslo", "."], [("Depart", 1, [("Agent", 0)])]


def _convict_and_sentence(e1, e2):
    tokens = ["the", "court", "convicted", e1, "and", "sentenced", e2, "."]
    return tokens, [
        ("Convict", 2, [("Defendant", 3), ("Adjudicator", 1)]),
        ("Sentence", 5, [("Adjudicator", 1)]),
    ]


def _no_event(e1):
    return [e1, "is", "a", "court", "."], []


_BUILDERS = (
    _convict,
    _sentencing,
    _buy,
    _sell,
    _depart,
    _convict_and_sentence,
    _no_event,
)


def _make_document(doc_id: str, plan: list[tuple]) -> tuple[Document, list[EventMention]]:
    """plan: list of (builder, entity args). Token offsets become char spans."""
    text_parts: list[str] = []
    sentences: list[tuple[int, int]] = []
    mentions: list[EventMention] = []
    cursor = 0
    for sent_index, (builder, args) in enumerate(plan):
        tokens, events = builder(*args)
        sentence = " ".join(tokens)
        if sent_index > 0:
            cursor += 1  # joining space
        start = cursor
        spans = []
        pos = start
        for tok in tokens:
            spans.append((pos, pos + len(tok)))
            pos += len(tok) + 1
        end = start + len(sentence)
        text_parts.append(sentence)
        sentences.append((start, end))
        cursor = end
        for subtype, trig_idx, arg_specs in events:
            mentions.append(
                EventMention(
                    doc_id=doc_id,
                    sentence_index=sent_index,
                    subtype=subtype,
                    trigger_span=spans[trig_idx],
                    arguments=tuple(
                        Argument(
                            role=role,
                            span=spans[tok_idx],
                            surface=tokens[tok_idx],
                        )
                        for role, tok_idx in arg_specs
                    ),
                )
            )
    doc = Document(doc_id=doc_id, text=" ".join(text_parts), sentences=tuple(sentences))
    return doc, mentions


def build_synthetic_corpus(
    n_docs: int = 20, seed: int = 7, unique_docs: bool = True
) -> tuple[list[Document], list[EventMention]]:
    """Generate documents of 2-4 sentences from the fixed sentence builders.

    Deterministic per seed. With ``unique_docs`` every document text is
    distinct, which memorization fixtures rely on (identical passages with
    different gold answers would collide in a table-driven backend).
    """
    rng = random.Random(seed)
    docs: list[Document] = []
    mentions: list[EventMention] = []
    seen_texts: set[str] = set()
    attempts = 0
    while len(docs) < n_docs:
        attempts += 1
        if attempts > 200 * n_docs:
            raise RuntimeError("cannot generate enough distinct synthetic documents")
        n_sentences = rng.randint(2, 3)
        plan = []
        for _ in range(n_sentences):
            builder = rng.choice(_BUILDERS)
            n_args = 2 if builder is _convict_and_sentence else 1
            plan.append((builder, tuple(rng.sample(_ENTITIES, n_args))))
        if not any(builder is not _no_event for builder, _ in plan):
            continue  # every document carries at least one event
        if sum(1 for builder, _ in plan if builder is _convict_and_sentence) > 1:
            # Keeps trigger counts per merged range at <= 4, which bounds the
            # sentinel/digit vocabulary of every instance regardless of seed.
            continue
        doc_id = f"doc{len(docs):03d}"
        doc, doc_mentions = _make_document(doc_id, plan)
        if unique_docs:
            if doc.text in seen_texts:
                continue
            seen_texts.add(doc.text)
        docs.append(doc)
        mentions.extend(doc_mentions)
    return docs, mentions


def build_ace_shape_schema() -> Schema:
    """Full-scale ontology skeleton: 8 main types, 33 subtypes, 35 roles.

    Subtype names follow the public ontology; templates are mechanical
    placeholders to be replaced with real guideline sentences.
    """
    subtype_names = {
        "Business": ["Declare-Bankruptcy", "Start-Org", "Merge-Org", "End-Org"],
        "Conflict": ["Attack", "Demonstrate"],
        "Contact": ["Meet", "Phone-Write"],
        "Justice": [
            "Arrest-Jail",
            "Release-Parole",
            "Trial-Hearing",
            "Charge-Indict",
            "Sue",
            "Convict",
            "Sentence",
            "Fine",
            "Execute",
            "Extradite",
            "Acquit",
            "Pardon",
            "Appeal",
        ],
        "Life": ["Be-Born", "Marry", "Divorce", "Injure", "Die"],
        "Movement": ["Transport"],
        "Personnel": ["Start-Position", "End-Position", "Nominate", "Elect"],
        "Transaction": ["Transfer-Ownership", "Transfer-Money"],
    }
    special_roles = {"Convict": ["Defendant", "Adjudicator"], "Attack": ["Attacker", "Target"]}
    subtypes = []
    roles = []
    for parent in ACE_MAIN_TYPES:
        for name in subtype_names[parent]:
            subtypes.append(
                EventSubtype(
                    name=name,
                    parent=parent,
                    trigger_question_template=_TRIGGER_TEMPLATE.format(name=name),
                )
            )
            for role_name in special_roles.get(name, ["Person"]):
                roles.append(
                    ArgumentRole(
                        name=role_name,
                        event_subtype=name,
                        description_template=_ROLE_TEMPLATE.format(name=role_name),
                    )
                )
    return Schema(
        main_types=tuple(ACE_MAIN_TYPES), subtypes=tuple(subtypes), roles=tuple(roles)
    )
