import json
import pytest
from hypothesis import given, settings, strategies as st
from unittest.mock import Mock

from factcurve.api.models import ModelResponse
from factcurve.core.records import ClaimLabel, GenerationRecord
from factcurve.pipeline.ingestion import (
    DEFAULT_FILTER_PHRASES,
    DEFAULT_FILTER_RULES,
    EntityList,
    FilteredStats,
    FilterRule,
    adapt_factscore,
    apply_filters,
    bio_prompt,
    generate_bios,
    generation_id_for,
    load_annotated,
    load_entities,
    save_annotated,
)
from factcurve.utils.errors import (
    CorpusFormatError,
    DataError,
    ProviderUnreachableError,
    ReferentialIntegrityError,
)


filter_texts = st.lists(
    st.one_of(st.sampled_from([p.replace("...", "").strip() for p in DEFAULT_FILTER_PHRASES]),
              st.sampled_from(["Ko Itakura", "is a", "Japanese footballer.", "I DON’T", "sorry"]),
              st.text(max_size=8)),
    max_size=12,
).map(" ".join)


def create_record(text, gid="g1"):
    return GenerationRecord(id=gid, entity="Ko Itakura", prompt="Tell me a bio of Ko Itakura.", model_id="m",
                            text=text)


def write_lines(tmp_path, lines, name="corpus.jsonl"):
    """Helper to write a JSON-lines file; dict items are serialized, strings written as-is"""
    path = tmp_path / name
    with open(path, "w", encoding="utf-8") as file:
        for line in lines:
            file.write((json.dumps(line) if isinstance(line, dict) else line) + "\n")
    return str(path)


def valid_line(gid="g1"):
    return {"id": gid, "entity": "Ko Itakura", "model_id": "m", "output": "Ko Itakura is Japanese. He plays.",
            "annotations": [{"claim": "Ko Itakura is Japanese.", "label": "S", "sentence_index": 1}]}


class TestEntities:
    """Tests for entity lists and generation naming"""

    def test_load_fixture_entities(self, fixture_path):
        """Should read one entity per line"""
        entities = load_entities(fixture_path("entities.txt"))

        assert entities.entities == ("Lanny Flaherty", "Jessie Mae Brown Beavers", "Ko Itakura")

    def test_blanks_and_duplicates(self, tmp_path):
        """Should skip blank lines and keep the first of duplicates"""
        path = tmp_path / "entities.txt"
        path.write_text("Ko Itakura\n\n  Vaino Spencer  \nKo Itakura\n", encoding="utf-8")

        assert load_entities(str(path)).entities == ("Ko Itakura", "Vaino Spencer")

    def test_empty_entity_list(self, tmp_path):
        """Should raise DataError for a file without entities"""
        path = tmp_path / "entities.txt"
        path.write_text("\n\n", encoding="utf-8")

        with pytest.raises(DataError):
            load_entities(str(path))

    def test_duplicates_rejected_in_constructor(self):
        """EntityList itself should refuse duplicates"""
        with pytest.raises(DataError):
            EntityList(("A", "A"))

    def test_bio_prompt(self):
        """Should render the biography request verbatim"""
        assert bio_prompt("Ko Itakura") == "Tell me a bio of Ko Itakura."

    def test_generation_id(self):
        """Should slug the model and entity into a stable id"""
        assert generation_id_for("gpt-4-turbo", "Jessie Mae Brown Beavers") == "gpt-4-turbo--jessie-mae-brown-beavers"
        assert generation_id_for("Llama 2 (70B)", "Ko Itakura") == "llama-2-70b--ko-itakura"


class TestGenerateBios:
    """Tests for generate_bios"""

    def test_generate_with_gateway(self, record_gateway, fixture_path, mock_logger):
        """Should produce one segmented record per entity, in entity order"""
        entities = load_entities(fixture_path("entities.txt"))

        batch = generate_bios(entities, "gpt-4-turbo", record_gateway, logger=mock_logger)

        assert batch.failures == {}
        assert [r.entity for r in batch.records] == list(entities.entities)
        first = batch.records[0]
        assert first.id == "gpt-4-turbo--lanny-flaherty"
        assert first.prompt == "Tell me a bio of Lanny Flaherty."
        assert first.sentence_count == 3
        assert first.filtered is False

    def test_failures_reported_per_entity(self, mock_logger):
        """A failing request should be reported, not raised"""
        gateway = Mock()
        gateway.complete_many.return_value = [ModelResponse(text="A is a person."), ProviderUnreachableError("down")]

        batch = generate_bios(["A", "B"], "m", gateway, logger=mock_logger)

        assert [r.entity for r in batch.records] == ["A"]
        assert set(batch.failures) == {"B"}

    def test_empty_output_kept_without_sentences(self, mock_logger):
        """An empty answer should still be recorded, with no sentences"""
        gateway = Mock()
        gateway.complete_many.return_value = [ModelResponse(text="")]

        batch = generate_bios(["A"], "m", gateway, logger=mock_logger)

        assert batch.records[0].sentences == ()


class TestFilters:
    """Tests for the unresponsive-generation filter"""

    def test_default_phrase_count(self):
        """Should ship the eleven default phrases"""
        assert len(DEFAULT_FILTER_PHRASES) == 11

    @pytest.mark.parametrize("phrase", DEFAULT_FILTER_PHRASES)
    def test_each_default_phrase_matches(self, phrase, mock_logger):
        """Every default phrase should flag a generation opening with it"""
        text = phrase.replace("...", "").strip() + " about this person, sorry."

        records, stats = apply_filters([create_record(text)], logger=mock_logger)

        assert records[0].filtered is True
        assert stats.filtered == 1

    def test_case_and_apostrophe_insensitive(self, mock_logger):
        """Should match regardless of case and typographic apostrophes"""
        records, _ = apply_filters([create_record("I DON’T HAVE any details on Ko Itakura.")], logger=mock_logger)

        assert records[0].filtered is True

    def test_regular_bio_kept(self, mock_logger):
        """A plain biography should pass"""
        records, stats = apply_filters([create_record("Ko Itakura is a Japanese footballer.")], logger=mock_logger)

        assert records[0].filtered is False
        assert stats.filtered == 0

    def test_scan_window(self, mock_logger):
        """A phrase crossing the scan window should only count with full-text scanning"""
        text = "x" * 390 + " I apologize for the confusion."

        windowed, _ = apply_filters([create_record(text)], scan_chars=400, logger=mock_logger)
        full, _ = apply_filters([create_record(text)], scan_chars=None, logger=mock_logger)

        assert windowed[0].filtered is False
        assert full[0].filtered is True

    def test_records_never_dropped(self, mock_logger):
        """Filtering should flag records and keep their order"""
        records = [create_record("I apologize.", "g1"), create_record("Fine bio.", "g2")]

        flagged, stats = apply_filters(records, logger=mock_logger)

        assert [r.id for r in flagged] == ["g1", "g2"]
        assert [r.filtered for r in flagged] == [True, False]
        assert (stats.total, stats.filtered) == (2, 1)

    def test_custom_rule(self, mock_logger):
        """Should accept custom rules"""
        rules = [FilterRule("As an AI language model")]
        records, _ = apply_filters([create_record("As an AI language model, I cannot.")], rules=rules,
                                   logger=mock_logger)

        assert records[0].filtered is True

    @settings(max_examples=100)
    @given(st.lists(filter_texts, max_size=6), st.permutations(DEFAULT_FILTER_RULES),
           st.one_of(st.none(), st.integers(min_value=0, max_value=120)))
    def test_idempotent_and_rule_order_free(self, texts, shuffled_rules, scan_chars):
        """Filtering twice, or with the rules in another order, should flag the same records"""
        records = [create_record(text, f"g{i}") for i, text in enumerate(texts)]
        logger = Mock()

        once, stats = apply_filters(records, scan_chars=scan_chars, logger=logger)
        twice, stats_twice = apply_filters(once, scan_chars=scan_chars, logger=logger)
        reordered, stats_reordered = apply_filters(records, rules=shuffled_rules, scan_chars=scan_chars,
                                                   logger=logger)

        assert twice == once
        assert reordered == once
        assert stats == stats_twice == stats_reordered

    def test_blank_rule_rejected(self):
        """Should reject an empty phrase"""
        with pytest.raises(ValueError):
            FilterRule("  ")

    @pytest.mark.parametrize("total,filtered,expected", [(100, 12, "12.0"), (7, 1, "14.3"), (3, 0, "0.0"),
                                                         (0, 0, "0.0"), (8, 8, "100.0")])
    def test_filtered_rate_percent(self, total, filtered, expected):
        """Should format the filtered rate with one decimal"""
        assert FilteredStats(total=total, filtered=filtered).filtered_rate_percent == expected


class TestLoadAnnotated:
    """Tests for loading annotated corpora"""

    def test_load_fixture(self, corpus_path):
        """Should load every generation and claim of the fixture corpus"""
        corpus = load_annotated(corpus_path)

        assert len(corpus.records) == 10
        assert len(corpus.claims) == 44
        assert [r.id for r in corpus.records if r.filtered] == ["g06"]

        record = corpus.record("g01")
        assert record.sentence_count == 5
        assert record.sentence(3).text == "Flaherty is known for his roles in Signs and Natural Born Killers."

        claim = next(c for c in corpus.claims if c.id == "g01-s001-c003")
        assert claim.text == "Lanny Flaherty was born in Pensacola, Florida."
        assert claim.label == ClaimLabel.UNSUPPORTED

    def test_default_prompt(self, corpus_path):
        """A line without a prompt should get the biography prompt"""
        assert load_annotated(corpus_path).record("g05").prompt == "Tell me a bio of Vaino Spencer."

    def test_invalid_json_reports_line(self, tmp_path):
        """Should point at the offending line"""
        path = write_lines(tmp_path, [valid_line(), "{ not json"])

        with pytest.raises(CorpusFormatError) as excinfo:
            load_annotated(path)
        assert excinfo.value.line_number == 2
        assert f"{path}:2:" in str(excinfo.value)

    def test_unknown_label(self, tmp_path):
        """Should reject labels outside S, NS and IR"""
        line = valid_line()
        line["annotations"][0]["label"] = "MAYBE"
        path = write_lines(tmp_path, [line])

        with pytest.raises(CorpusFormatError) as excinfo:
            load_annotated(path)
        assert excinfo.value.line_number == 1

    def test_unlabeled_only_when_allowed(self, tmp_path):
        """Unlabeled claims should need allow_unlabeled"""
        line = valid_line()
        line["annotations"][0]["label"] = "UL"
        path = write_lines(tmp_path, [line])

        with pytest.raises(CorpusFormatError):
            load_annotated(path)
        assert load_annotated(path, allow_unlabeled=True).claims[0].label == ClaimLabel.UNLABELED

    def test_missing_field(self, tmp_path):
        """Should reject a line without an entity"""
        line = valid_line()
        del line["entity"]
        path = write_lines(tmp_path, [line])

        with pytest.raises(CorpusFormatError, match="entity"):
            load_annotated(path)

    def test_duplicate_generation_id(self, tmp_path):
        """Should reject a repeated generation id"""
        path = write_lines(tmp_path, [valid_line("g1"), valid_line("g1")])

        with pytest.raises(CorpusFormatError) as excinfo:
            load_annotated(path)
        assert excinfo.value.line_number == 2

    def test_sentence_out_of_range(self, tmp_path):
        """Should raise ReferentialIntegrityError for a claim past the last sentence"""
        line = valid_line()
        line["annotations"][0]["sentence_index"] = 3
        path = write_lines(tmp_path, [line])

        with pytest.raises(ReferentialIntegrityError):
            load_annotated(path)

    def test_blank_lines_skipped(self, tmp_path):
        """Blank lines should be ignored"""
        path = write_lines(tmp_path, [valid_line("g1"), "", valid_line("g2")])

        assert len(load_annotated(path).records) == 2

    def test_save_and_reload(self, corpus_path, tmp_path):
        """A saved corpus should load back to the same records and claims"""
        corpus = load_annotated(corpus_path)
        out = str(tmp_path / "copy.jsonl")

        save_annotated(out, corpus)
        again = load_annotated(out)

        assert again.records == corpus.records
        assert sorted(again.claims, key=lambda c: c.id) == sorted(corpus.claims, key=lambda c: c.id)


class TestAdaptFactscore:
    """Tests for the FActScore annotation adapter"""

    def test_adapt_sample(self, fixture_path, mock_logger):
        """Should map annotator sentences and atomic facts onto the corpus model"""
        corpus = adapt_factscore(fixture_path("factscore_sample.jsonl"), model_id="InstructGPT", logger=mock_logger)

        assert [r.id for r in corpus.records] == ["instructgpt-0001", "instructgpt-0002", "instructgpt-0003"]
        assert [r.filtered for r in corpus.records] == [False, True, False]
        assert corpus.records[0].sentence_count == 2
        assert len(corpus.claims) == 5

        labels = {c.id: c.label for c in corpus.claims}
        assert labels["instructgpt-0001-s001-c002"] == ClaimLabel.SUPPORTED
        assert labels["instructgpt-0001-s002-c001"] == ClaimLabel.UNSUPPORTED
        assert labels["instructgpt-0003-s002-c001"] == ClaimLabel.IRRELEVANT

    def test_default_prefix(self, fixture_path, mock_logger):
        """Without a model id the records should get the 'fs' prefix"""
        corpus = adapt_factscore(fixture_path("factscore_sample.jsonl"), logger=mock_logger)

        assert corpus.records[0].id == "fs-0001"

    def test_unknown_label(self, tmp_path, mock_logger):
        """Should reject unknown atomic-fact labels"""
        line = {"topic": "A", "output": "A is B.", "annotations": [
            {"text": "A is B.", "human-atomic-facts": [{"text": "A is B.", "label": "??"}]}]}
        path = write_lines(tmp_path, [line])

        with pytest.raises(CorpusFormatError):
            adapt_factscore(path, logger=mock_logger)
