from __future__ import annotations

import collections
import random
import re

import pytest

from eventprompt.augment import (
    DictLexicon,
    augment_backtranslate,
    augment_eda,
    expand_with_eda,
    identity_translator,
)
from eventprompt.corpus import make_passage
from eventprompt.errors import PromptError
from eventprompt.pipeline import build_training_instances
from eventprompt.prompting import build_joint_argument_prompt
from tests.test_pipeline import small_config
from tests.test_prompting import convict_sentence_doc

LEXICON = DictLexicon(
    {
        "the": ["that"],
        "and": ["plus"],
        "is": ["was"],
        "a": ["one"],
        "court": ["tribunal"],  # protected whenever it is a gold answer
    }
)


@pytest.fixture()
def single_instances(schema, docs, mentions):
    families = build_training_instances(docs, mentions, schema, small_config(docs))
    return families["single_argument"]


@pytest.fixture()
def joint_instances(schema, docs, mentions):
    families = build_training_instances(docs, mentions, schema, small_config(docs))
    return families["joint_argument"]


def protected_texts(instance):
    surfaces = [g for s in instance.slots for g in s.gold if g != "None"]
    trigger = instance.meta.get("trigger_surface")
    if trigger:
        surfaces.append(trigger)
    return surfaces


class TestEda:
    def test_swap_preserves_word_multiset(self, single_instances):
        augmented = augment_eda(
            single_instances, seed=3, ops_per_instance=2, operations=("swap",)
        )
        for before, after in zip(single_instances, augmented):
            assert collections.Counter(before.passage.text.split()) == collections.Counter(
                after.passage.text.split()
            )

    def test_protection_of_markers_answers_and_prompt_section(self, single_instances):
        augmented = augment_eda(
            single_instances, seed=11, ops_per_instance=3, lexicon=LEXICON
        )
        for before, after in zip(single_instances, augmented):
            text = after.passage.text
            assert text.count("<e>") == 1 and text.count("</e>") == 1
            assert text.count("<t0>") == 1 and text.count("</t0>") == 1
            for surface in protected_texts(before):
                pattern = r"(?<!\S)" + r"\s+".join(re.escape(t) for t in surface.split()) + r"(?!\S)"
                assert re.search(pattern, text), (surface, text)
            prompt_before = before.input_text[len(before.passage.text) + 1 :]
            prompt_after = after.input_text[len(after.passage.text) + 1 :]
            assert prompt_before == prompt_after
            assert after.target_text == before.target_text

    def test_deterministic_per_seed(self, single_instances):
        a = augment_eda(single_instances, seed=5, ops_per_instance=2, lexicon=LEXICON)
        b = augment_eda(single_instances, seed=5, ops_per_instance=2, lexicon=LEXICON)
        assert [i.input_text for i in a] == [i.input_text for i in b]
        c = augment_eda(single_instances, seed=6, ops_per_instance=2, lexicon=LEXICON)
        assert [i.input_text for i in a] != [i.input_text for i in c]

    def test_deletion_never_empties_the_free_region(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        from eventprompt.prompting import build_single_argument_prompts

        instances = build_single_argument_prompts(passage, mentions[0], schema)
        # Delete aggressively; protected words and the last free word survive.
        out = augment_eda(instances, seed=0, ops_per_instance=50, operations=("delete",))
        for before, after in zip(instances, out):
            remaining = after.passage.text.split()
            for surface in protected_texts(before):
                for token in surface.split():
                    assert token in remaining
            assert len(remaining) >= 5  # markers + trigger + >=1 free word

    def test_expand_to_interaction_data_size(self, single_instances, joint_instances):
        target = len(single_instances) + len(joint_instances)
        expanded = expand_with_eda(single_instances, target, seed=1, lexicon=LEXICON)
        assert len(expanded) == target
        assert expanded[: len(single_instances)] == list(single_instances)

    def test_rejects_other_families(self, schema):
        doc, mentions = convict_sentence_doc()
        passage = make_passage(doc, (0, 0), 100)
        joint = build_joint_argument_prompt(passage, mentions, schema, seed=0)
        with pytest.raises(PromptError, match="single_argument"):
            augment_eda([joint], seed=0)

    def test_unknown_operation_rejected(self, single_instances):
        with pytest.raises(PromptError, match="unknown EDA"):
            augment_eda(single_instances, seed=0, operations=("paraphrase",))


def shuffling_translator(text: str, seed: int = 0) -> str:
    words = text.split()
    random.Random(seed).shuffle(words)
    return " ".join(words)


def deleting_translator(text: str) -> str:
    # Drops the first word of every segment; long enough segments lose answers.
    return " ".join(text.split()[1:])


def failing_translator(text: str) -> str:
    raise RuntimeError("mt service down")


class TestBacktranslate:
    def test_identity_translator_is_identity(self, single_instances):
        out = augment_backtranslate(single_instances, identity_translator, seed=0)
        assert out == list(single_instances)

    def test_answers_regrounded_after_shuffle(self, single_instances):
        out = augment_backtranslate(single_instances, shuffling_translator, seed=4)
        assert out  # shuffling never deletes words, so answers survive
        for inst in out:
            for surface in protected_texts(inst):
                pattern = (
                    r"(?<!\S)" + r"\s+".join(re.escape(t) for t in surface.split()) + r"(?!\S)"
                )
                assert re.search(pattern, inst.passage.text)
            # Offsets into the source document no longer apply.
            if inst.passage.text != "":
                assert inst.input_text.startswith(inst.passage.text)

    def test_instances_with_lost_answers_are_dropped(self, single_instances, caplog):
        out = augment_backtranslate(single_instances, deleting_translator, seed=0)
        assert len(out) < len(single_instances)
        survivors = {id(i) for i in out}
        for inst in out:
            for surface in protected_texts(inst):
                assert re.search(re.escape(surface.split()[0]), inst.passage.text)

    def test_translator_failure_drops_instance(self, single_instances):
        out = augment_backtranslate(single_instances, failing_translator, seed=0)
        assert out == []

    def test_trigger_segment_not_translated(self, single_instances):
        out = augment_backtranslate(single_instances, shuffling_translator, seed=4)
        for before, after in zip(
            [i for i in single_instances if i.meta.get("trigger_surface")], out
        ):
            trigger = before.meta["trigger_surface"]
            assert f"<t0> {trigger} </t0>" in after.passage.text
