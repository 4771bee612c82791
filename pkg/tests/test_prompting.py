from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventprompt.corpus import Argument, EventMention, make_passage
from eventprompt.errors import InstanceRejected, PromptError, SchemaError
from eventprompt.prompting import (
    build_external_trigger_prompt,
    build_internal_trigger_prompt,
    build_joint_argument_prompt,
    build_single_argument_prompts,
    build_subtype_prompt,
    instance_from_dict,
    instance_to_dict,
    parse_generation,
    read_instances,
    serialize_target,
    write_instances,
)
from tests.test_corpus import doc_from_words

SENTINEL = re.compile(r"<extra_id_(\d+)>")


def convict_sentence_doc():
    """One sentence, two Justice events: 'the court convicted Rex and sentenced Mia .'"""
    words = ["the", "court", "convicted", "Rex", "and", "sentenced", "Mia", "."]
    doc = doc_from_words(words, [(0, 7)])
    span = lambda i: (sum(len(w) + 1 for w in words[:i]), sum(len(w) + 1 for w in words[:i]) + len(words[i]))
    mentions = [
        EventMention(
            doc_id="d",
            sentence_index=0,
            subtype="Convict",
            trigger_span=span(2),
            arguments=(
                Argument("Defendant", span(3), "Rex"),
                Argument("Adjudicator", span(1), "court"),
            ),
        ),
        EventMention(
            doc_id="d",
            sentence_index=0,
            subtype="Sentence",
            trigger_span=span(5),
            arguments=(Argument("Adjudicator", span(1), "court"),),
        ),
    ]
    return doc, mentions


class TestSerializeTarget:
    def test_single_answer_format(self):
        assert serialize_target(["convicted"]) == "<extra_id_0> convicted <extra_id_1> </s>"

    def test_multi_answer_format(self):
        assert (
            serialize_target(["A | B", "None"])
            == "<extra_id_0> A | B <extra_id_1> None <extra_id_2> </s>"
        )

    def test_empty_list_rejected(self):
        with pytest.raises(PromptError):
            serialize_target([])

    def test_empty_answer_rejected(self):
        with pytest.raises(PromptError):
            serialize_target(["a", "  "])

    def test_sentinel_budget_enforced(self):
        with pytest.raises(InstanceRejected):
            serialize_target([f"a{i}" for i in range(100)])


class TestParseGeneration:
    def test_two_answers(self):
        parsed = parse_generation("<extra_id_0> convicted <extra_id_1> sentenced <extra_id_2> </s>")
        assert parsed.entries == {0: ("convicted",), 1: ("sentenced",)}
        assert not parsed.malformed

    def test_none_maps_to_empty(self):
        parsed = parse_generation("<extra_id_0> None <extra_id_1> </s>")
        assert parsed.entries == {0: ()}
        assert not parsed.malformed

    def test_missing_trailing_sentinel_tolerated(self):
        parsed = parse_generation("<extra_id_0> A | B")
        assert parsed.entries == {0: ("A", "B")}
        assert parsed.malformed

    def test_out_of_order_sentinels_flagged(self):
        parsed = parse_generation("<extra_id_1> x <extra_id_0> y <extra_id_2> </s>")
        assert parsed.malformed
        assert parsed.entries[1] == ("x",)

    def test_no_sentinels_flagged(self):
        parsed = parse_generation("garbage")
        assert parsed.entries == {}
        assert parsed.malformed


_word = st.text(alphabet="abcdefgXYZ019", min_size=1, max_size=6).filter(lambda w: w != "None")
_answer = st.lists(_word, min_size=1, max_size=3).map(" ".join)
_slot_answers = st.lists(_answer, min_size=1, max_size=4)


class TestRoundTrip:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(_slot_answers, min_size=1, max_size=5))
    def test_serialize_parse_recovers_answers(self, slots):
        joined = [" | ".join(answers) for answers in slots]
        parsed = parse_generation(serialize_target(joined))
        assert not parsed.malformed
        assert parsed.entries == {i: tuple(answers) for i, answers in enumerate(slots)}

    def test_none_slot_round_trip(self):
        parsed = parse_generation(serialize_target(["None", "x"]))
        assert parsed.entries == {0: (), 1: ("x",)}


class TestExternalTrigger:
    def test_two_justice_triggers_fill_one_slot(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_external_trigger_prompt(passage, schema, gold=mentions)
        by_type = {s.bind["main_type"]: s.gold for s in inst.slots}
        assert by_type["Justice"] == ("convicted", "sentenced")
        assert by_type["Commerce"] == ("None",)
        assert by_type["Motion"] == ("None",)
        assert "convicted | sentenced" in inst.target_text

    def test_no_event_sentence_answers_none_everywhere(self, schema):
        doc = doc_from_words(["Oslo", "is", "a", "court", "."], [(0, 4)])
        passage = make_passage(doc, (0, 0), 100)
        inst = build_external_trigger_prompt(passage, schema, gold=[])
        assert all(s.gold == ("None",) for s in inst.slots)

    def test_exactly_one_sentinel_per_main_type(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        for gold in (mentions, [], None):
            inst = build_external_trigger_prompt(passage, schema, gold=gold)
            indices = [int(m) for m in SENTINEL.findall(inst.input_text)]
            assert indices == list(range(len(schema.main_types)))

    def test_inference_form_has_empty_target(self, schema):
        doc, _ = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_external_trigger_prompt(passage, schema, gold=None)
        assert inst.target_text == ""
        assert all(s.gold == () for s in inst.slots)

    def test_bridge_precedes_questions(self, schema):
        doc, _ = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_external_trigger_prompt(passage, schema, gold=None)
        assert "In the passage above ," in inst.input_text
        assert inst.input_text.startswith(passage.text)


def mask_fill_inverse(instance, original_focus):
    """Replacing in-passage sentinels with gold answers restores the focus."""
    text = instance.passage.focus_text
    gold_by_sentinel = {}
    for slot in instance.slots:
        gold_by_sentinel[slot.sentinel] = slot.gold[0]
    for k, answer in gold_by_sentinel.items():
        text = text.replace(f"<extra_id_{k}>", answer)
    return text == original_focus


class TestInternalTrigger:
    def test_two_triggers_masked_in_document_order(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 120)
        inst = build_internal_trigger_prompt(passage, mentions, schema)
        assert (
            inst.target_text
            == "<extra_id_0> convicted <extra_id_1> sentenced <extra_id_2> </s>"
        )
        in_passage = SENTINEL.findall(inst.passage.text)
        assert in_passage == ["0", "1"]

    def test_single_trigger(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 120)
        inst = build_internal_trigger_prompt(passage, mentions[:1], schema)
        assert SENTINEL.findall(inst.passage.text) == ["0"]

    def test_zero_mentions_rejected(self, schema):
        doc, _ = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 120)
        with pytest.raises(PromptError):
            build_internal_trigger_prompt(passage, [], schema)

    def test_overlapping_trigger_spans_rejected(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 120)
        twin = EventMention(
            doc_id="d", sentence_index=0, subtype="Sentence",
            trigger_span=mentions[0].trigger_span,
        )
        with pytest.raises(InstanceRejected, match="overlapping"):
            build_internal_trigger_prompt(passage, [mentions[0], twin], schema)

    def test_mask_fill_inverse(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 120)
        inst = build_internal_trigger_prompt(passage, mentions, schema)
        assert mask_fill_inverse(inst, doc.text[0 : doc.sentences[0][1]])

    def test_no_trigger_surface_leaks_into_prompt_section(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 120)
        inst = build_internal_trigger_prompt(passage, mentions, schema)
        prompt_section = inst.input_text[len(inst.passage.text) :]
        for m in mentions:
            surface = doc.text[m.trigger_span[0] : m.trigger_span[1]]
            assert surface not in prompt_section


class TestSubtypePrompt:
    def test_convicted_classifies_as_convict(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_subtype_prompt(passage, "convicted", "Justice", schema, gold_subtype="Convict")
        assert inst.slots[0].gold == ("Convict",)
        assert inst.target_text == "<extra_id_0> Convict <extra_id_1> </s>"
        assert "candidates : Convict , Sentence ." in inst.input_text

    def test_single_candidate_main_type(self, schema):
        doc, _ = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_subtype_prompt(passage, "left", "Motion", schema, gold_subtype="Depart")
        assert inst.meta["candidates"] == ["Depart"]

    def test_unknown_main_type_rejected(self, schema):
        doc, _ = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        with pytest.raises(SchemaError):
            build_subtype_prompt(passage, "x", "Sports", schema)

    def test_gold_must_belong_to_main_type(self, schema):
        doc, _ = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        with pytest.raises(PromptError):
            build_subtype_prompt(passage, "x", "Justice", schema, gold_subtype="Buy")


class TestSingleArgument:
    def test_one_instance_per_role_of_subtype(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        instances = build_single_argument_prompts(passage, mentions[0], schema)
        roles = [i.slots[0].bind["role"] for i in instances]
        assert roles == ["Defendant", "Adjudicator"]

    def test_role_with_two_fillers_joined(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        event = mentions[0]
        extra = Argument("Defendant", mentions[1].arguments[0].span, "court")
        event = EventMention(
            doc_id=event.doc_id, sentence_index=0, subtype=event.subtype,
            trigger_span=event.trigger_span,
            arguments=event.arguments + (extra,),
        )
        instances = build_single_argument_prompts(passage, event, schema)
        defendant = next(i for i in instances if i.slots[0].bind["role"] == "Defendant")
        # Sentence order: court (word 1) precedes Rex (word 3).
        assert defendant.slots[0].gold == ("court", "Rex")
        assert "<extra_id_0> court | Rex <extra_id_1> </s>" == defendant.target_text

    def test_unfilled_role_answers_none(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        instances = build_single_argument_prompts(passage, mentions[1], schema)
        assert instances[0].slots[0].gold == ("court",)
        bare = EventMention(
            doc_id="d", sentence_index=0, subtype="Convict",
            trigger_span=mentions[0].trigger_span,
        )
        instances = build_single_argument_prompts(passage, bare, schema)
        assert all(i.slots[0].gold == ("None",) for i in instances)

    def test_trigger_wrapped_in_passage_and_statement(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_single_argument_prompts(passage, mentions[0], schema)[0]
        assert inst.passage.text.count("<t0> convicted </t0>") == 1
        assert inst.input_text.count("<t0> convicted </t0>") == 2

    def test_inference_form(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_single_argument_prompts(passage, mentions[0], schema, with_gold=False)[0]
        assert inst.target_text == ""
        assert inst.slots[0].gold == ()


class TestJointArgument:
    def test_three_argument_records_two_sentinels_for_shared_span(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_joint_argument_prompt(passage, mentions, schema, seed=42)
        # court (shared by both Adjudicator slots) and Rex: two masked spans.
        assert SENTINEL.findall(inst.passage.text) == ["0", "1"]
        assert len(inst.slots) == 3
        shared = [s for s in inst.slots if s.gold == ("court",)]
        assert len(shared) == 2
        assert len({s.sentinel for s in shared}) == 1

    def test_shuffle_is_seed_deterministic(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        a = build_joint_argument_prompt(passage, mentions, schema, seed=42)
        b = build_joint_argument_prompt(passage, mentions, schema, seed=42)
        assert a.input_text == b.input_text

    def test_shuffle_preserves_description_multiset(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        insts = [
            build_joint_argument_prompt(passage, mentions, schema, seed=s) for s in range(8)
        ]
        sections = [i.input_text[len(i.passage.text) :] for i in insts]
        multisets = {tuple(sorted(s.split())) for s in sections}
        assert len(multisets) == 1
        assert len({tuple(s.split()) for s in sections}) > 1  # order actually varies

    def test_single_event_single_argument_base_case(self, schema):
        doc = doc_from_words(["Liu", "left", "Oslo", "."], [(0, 3)])
        mention = EventMention(
            doc_id="d", sentence_index=0, subtype="Depart", trigger_span=(0, 3),
            arguments=(Argument("Agent", (0, 3), "Liu"),),
        )
        passage = make_passage(doc, (0, 0), 100)
        inst = build_joint_argument_prompt(passage, [mention], schema, seed=0)
        assert inst.target_text == "<extra_id_0> Liu <extra_id_1> </s>"

    def test_partial_overlap_rejected(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        clobbered = EventMention(
            doc_id="d", sentence_index=0, subtype="Sentence",
            trigger_span=mentions[1].trigger_span,
            arguments=(Argument("Adjudicator", (4, 13), "court con"),),
        )
        with pytest.raises(InstanceRejected, match="overlapping"):
            build_joint_argument_prompt(passage, [mentions[0], clobbered], schema, seed=0)

    def test_mask_fill_inverse(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_joint_argument_prompt(passage, mentions, schema, seed=3)
        assert mask_fill_inverse(inst, doc.text[0 : doc.sentences[0][1]])

    def test_argument_surfaces_absent_from_prompt_section(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_joint_argument_prompt(passage, mentions, schema, seed=3)
        prompt_section = inst.input_text[len(inst.passage.text) :]
        triggers = {"convicted", "sentenced"}
        for slot in inst.slots:
            surface = slot.gold[0]
            if surface in triggers:
                continue  # trigger words are deliberately provided
            assert not re.search(rf"(?<!\S){re.escape(surface)}(?!\S)", prompt_section)


class TestInstanceFiles:
    def test_jsonl_round_trip(self, tmp_path, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        instances = [
            build_external_trigger_prompt(passage, schema, gold=mentions),
            build_internal_trigger_prompt(passage, mentions, schema),
            *build_single_argument_prompts(passage, mentions[0], schema),
            build_joint_argument_prompt(passage, mentions, schema, seed=42),
        ]
        path = tmp_path / "instances.jsonl"
        write_instances(instances, path)
        loaded = read_instances(path)
        assert len(loaded) == len(instances)
        for orig, back in zip(instances, loaded):
            assert back.family == orig.family
            assert back.input_text == orig.input_text
            assert back.target_text == orig.target_text
            assert back.slots == orig.slots
            assert back.origin == orig.origin
            assert back.passage.text == orig.passage.text
            assert back.passage.focus_span == orig.passage.focus_span

    def test_dict_round_trip_without_passage(self, schema):
        doc, _ = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        inst = build_external_trigger_prompt(passage, schema, gold=None)
        record = instance_to_dict(inst)
        del record["passage"]
        back = instance_from_dict(record)
        assert back.passage is None
        assert back.origin == inst.origin
