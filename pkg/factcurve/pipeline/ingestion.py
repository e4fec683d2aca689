import json
import re
from dataclasses import dataclass, replace
from typing import Tuple

from factcurve.api.api_manager import make_request
from factcurve.core.records import (
    AnnotatedCorpus,
    AtomicClaim,
    ClaimLabel,
    GenerationRecord,
    Sentence,
    claim_id_for,
)
from factcurve.pipeline.claims import segment_sentences
from factcurve.utils import prompts
from factcurve.utils.errors import (
    CorpusFormatError,
    DataError,
    GatewayError,
    ReferentialIntegrityError,
)
from factcurve.utils.logger import setup_logger

# Phrases that open an unresponsive generation; a trailing "..." means "anything may follow"
DEFAULT_FILTER_PHRASES = (
    "I don't have ...",
    "I do not have ...",
    "I need more information ...",
    "Please provide me ...",
    "Please clarify",
    "I apologize ...",
    "there isn't enough information",
    "Unfortunately, there is no ...",
    "If you can provide more information ...",
    "you could provide more ...",
    "It seems you might ...",
)

DEFAULT_SCAN_CHARS = 400

_APOSTROPHES = str.maketrans({"’": "'", "‘": "'"})


def _normalize(text):
    return text.translate(_APOSTROPHES).lower()


@dataclass(frozen=True)
class FilterRule:
    phrase: str

    def __post_init__(self):
        if not self.phrase or not self.phrase.strip():
            raise ValueError("FilterRule phrase must be nonempty.")

    @property
    def needle(self):
        """The phrase prefix that is searched for: trailing "..." dropped, lowercased."""
        phrase = self.phrase.strip()
        if phrase.endswith("..."):
            phrase = phrase[:-3].rstrip()
        return _normalize(phrase)

    def matches(self, text):
        return self.needle in _normalize(text)


DEFAULT_FILTER_RULES = tuple(FilterRule(p) for p in DEFAULT_FILTER_PHRASES)


@dataclass(frozen=True)
class FilteredStats:
    total: int
    filtered: int

    @property
    def filtered_rate(self):
        return self.filtered / self.total if self.total else 0.0

    @property
    def filtered_rate_percent(self):
        """Filtered rate as a one-decimal percentage string, e.g. "12.0"."""
        return f"{self.filtered_rate * 100:.1f}"


@dataclass(frozen=True)
class EntityList:
    entities: Tuple[str, ...]

    def __post_init__(self):
        if not self.entities:
            raise DataError("Entity list is empty.")
        if len(set(self.entities)) != len(self.entities):
            raise DataError("Entity list contains duplicates.")


@dataclass(frozen=True)
class GenerationBatch:
    records: Tuple[GenerationRecord, ...]
    failures: dict


def load_entities(path):
    """Reads one entity per line (UTF-8), skipping blanks and keeping the first of duplicates."""
    seen = []
    with open(path, "r", encoding="utf-8") as file:
        for line in file:
            name = line.strip()
            if name and name not in seen:
                seen.append(name)
    return EntityList(tuple(seen))


def bio_prompt(entity):
    return prompts.render(prompts.BIO, entity=entity)


def _slug(value):
    return re.sub(r"[^a-z0-9]+", "-", value.lower()).strip("-")


def generation_id_for(model_id, entity):
    return f"{_slug(model_id)}--{_slug(entity)}"


def _sentences_for(text):
    return segment_sentences(text) if text and text.strip() else ()


def generate_bios(entities, model_id, gateway, config=None, temperature=0.0, logger=None):
    """
    Drives one biography generation per entity.

    :param entities: EntityList.
    :param model_id: Model that writes the biographies.
    :param gateway: LLMGateway.
    :return: GenerationBatch with records in entity order and per-entity failures.
    """
    logger = logger if logger else setup_logger()
    if not isinstance(entities, EntityList):
        entities = EntityList(tuple(entities))

    requests = [make_request(model_id, bio_prompt(e), config, temperature=temperature)
                for e in entities.entities]
    responses = gateway.complete_many(requests, stage="generate")

    records = []
    failures = {}
    for entity, request, response in zip(entities.entities, requests, responses):
        if isinstance(response, GatewayError):
            logger.warning(f"Generation failed for {entity}: {response}")
            failures[entity] = response
            continue
        records.append(GenerationRecord(
            id=generation_id_for(model_id, entity),
            entity=entity,
            prompt=request.prompt,
            model_id=model_id,
            text=response.text,
            sentences=_sentences_for(response.text),
            filtered=False,
        ))
    logger.info(f"Generated {len(records)} of {len(entities.entities)} biographies.")
    return GenerationBatch(records=tuple(records), failures=failures)


def apply_filters(records, rules=DEFAULT_FILTER_RULES, scan_chars=DEFAULT_SCAN_CHARS, logger=None):
    """
    Flags unresponsive generations.

    A record is filtered iff a rule phrase occurs, case-insensitively, in the first
    `scan_chars` characters of its text (the whole text when scan_chars is None).
    Records are kept, never dropped.

    :return: (records with filtered flags, FilteredStats)
    """
    logger = logger if logger else setup_logger()
    flagged = []
    for record in records:
        window = record.text if scan_chars is None else record.text[:scan_chars]
        hit = any(rule.matches(window) for rule in rules)
        flagged.append(replace(record, filtered=hit))
    stats = FilteredStats(total=len(flagged), filtered=sum(1 for r in flagged if r.filtered))
    logger.info(f"Filtered {stats.filtered} of {stats.total} generations ({stats.filtered_rate_percent}%).")
    return flagged, stats


def _parse_line(line, path, line_number):
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"invalid JSON: {e}", path, line_number)
    if not isinstance(data, dict):
        raise CorpusFormatError("each line must be a JSON object", path, line_number)
    for key in ("id", "entity", "output"):
        if key not in data:
            raise CorpusFormatError(f"missing field '{key}'", path, line_number)
    return data


def _record_from_line(data, path, line_number):
    if data.get("sentences"):
        texts = [str(s).strip() for s in data["sentences"]]
        if not all(texts):
            raise CorpusFormatError("blank entry in 'sentences'", path, line_number)
        sentences = tuple(Sentence(i, len(texts), t) for i, t in enumerate(texts, start=1))
    else:
        sentences = _sentences_for(data["output"])
    return GenerationRecord(
        id=str(data["id"]),
        entity=data["entity"],
        prompt=data.get("prompt") or bio_prompt(data["entity"]),
        model_id=data.get("model_id", ""),
        text=data["output"],
        sentences=sentences,
        filtered=bool(data.get("filtered", False)),
    )


def load_annotated(path, allow_unlabeled=False):
    """
    Loads an annotated corpus from JSON-lines.

    Each line: {"id", "entity", "model_id", "prompt", "output", "annotations":
    [{"claim", "label": "S"|"NS"|"IR", "sentence_index"}]}, optionally "sentences"
    (explicit segmentation) and "filtered".

    :raises CorpusFormatError: on malformed lines or unknown labels (with line number).
    :raises ReferentialIntegrityError: when a claim points at a missing sentence.
    """
    records = []
    claims = []
    seen_ids = set()
    with open(path, "r", encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            data = _parse_line(line, path, line_number)
            record = _record_from_line(data, path, line_number)
            if record.id in seen_ids:
                raise CorpusFormatError(f"duplicate generation id {record.id}", path, line_number)
            seen_ids.add(record.id)
            records.append(record)

            ordinals = {}
            for annotation in data.get("annotations") or []:
                try:
                    label = ClaimLabel.from_code(annotation["label"])
                    sentence_index = int(annotation["sentence_index"])
                    text = annotation["claim"]
                except KeyError as e:
                    raise CorpusFormatError(f"bad annotation {annotation!r}: {e}", path, line_number)
                except (TypeError, ValueError) as e:
                    raise CorpusFormatError(f"bad sentence_index in {annotation!r}: {e}", path, line_number)
                if label == ClaimLabel.UNLABELED and not allow_unlabeled:
                    raise CorpusFormatError(f"unlabeled claim {text!r}", path, line_number)

                ordinals[sentence_index] = ordinals.get(sentence_index, 0) + 1
                claim = AtomicClaim(
                    id=claim_id_for(record.id, sentence_index, ordinals[sentence_index]),
                    generation_id=record.id,
                    sentence_index=sentence_index,
                    text=text,
                    label=label,
                )
                if record.sentence(sentence_index) is None:
                    raise ReferentialIntegrityError(
                        claim.id, f"sentence_index {sentence_index} outside 1..{record.sentence_count}")
                claims.append(claim)

    return AnnotatedCorpus(records=tuple(records), claims=tuple(claims), source_name=str(path))


def save_annotated(path, corpus):
    """Writes a corpus in the format load_annotated reads (UTF-8, LF newlines)."""
    by_generation = {}
    for claim in sorted(corpus.claims, key=lambda c: c.id):
        by_generation.setdefault(claim.generation_id, []).append(claim)
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        for record in corpus.records:
            line = {
                "id": record.id,
                "entity": record.entity,
                "model_id": record.model_id,
                "prompt": record.prompt,
                "output": record.text,
                "sentences": [s.text for s in record.sentences],
                "filtered": record.filtered,
                "annotations": [
                    {"claim": c.text, "label": c.label.code, "sentence_index": c.sentence_index}
                    for c in by_generation.get(record.id, [])
                ],
            }
            file.write(json.dumps(line, ensure_ascii=False, sort_keys=True) + "\n")


def load_generations(path):
    """Generation records of a corpus file, ignoring annotations."""
    return list(load_annotated(path, allow_unlabeled=True).records)


def save_generations(path, records):
    save_annotated(path, AnnotatedCorpus(records=tuple(records), claims=(), source_name=str(path)))


_FACTSCORE_LABELS = {"S": ClaimLabel.SUPPORTED, "NS": ClaimLabel.UNSUPPORTED, "IR": ClaimLabel.IRRELEVANT}


def adapt_factscore(path, model_id="", logger=None):
    """
    Maps a FActScore-style human-annotation file into an AnnotatedCorpus.

    Expected lines: {"input", "output", "topic", "annotations": [{"text", "is-relevant",
    "human-atomic-facts": [{"text", "label"}]}]}. The annotator's sentences become the
    segmentation; a null "annotations" marks a generation the annotators skipped, kept
    as a filtered record.
    """
    logger = logger if logger else setup_logger()
    records = []
    claims = []
    with open(path, "r", encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                topic = data["topic"]
                output = data["output"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise CorpusFormatError(f"not a FActScore annotation line: {e}", path, line_number)

            generation_id = f"{_slug(model_id) or 'fs'}-{line_number:04d}"
            annotations = data.get("annotations")
            sentence_texts = [a["text"].strip() for a in annotations or [] if a.get("text", "").strip()]
            if sentence_texts:
                sentences = tuple(Sentence(i, len(sentence_texts), t)
                                  for i, t in enumerate(sentence_texts, start=1))
            else:
                sentences = _sentences_for(output)

            records.append(GenerationRecord(
                id=generation_id,
                entity=topic,
                prompt=bio_prompt(topic),
                model_id=model_id,
                text=output,
                sentences=sentences,
                filtered=annotations is None,
            ))

            sentence_index = 0
            for annotation in annotations or []:
                if not annotation.get("text", "").strip():
                    continue
                sentence_index += 1
                for ordinal, fact in enumerate(annotation.get("human-atomic-facts") or [], start=1):
                    label = _FACTSCORE_LABELS.get(fact.get("label"))
                    if label is None:
                        raise CorpusFormatError(f"unknown label {fact.get('label')!r}", path, line_number)
                    claims.append(AtomicClaim(
                        id=claim_id_for(generation_id, sentence_index, ordinal),
                        generation_id=generation_id,
                        sentence_index=sentence_index,
                        text=fact["text"],
                        label=label,
                    ))
    logger.info(f"Adapted {len(records)} generations and {len(claims)} claims from {path}.")
    return AnnotatedCorpus(records=tuple(records), claims=tuple(claims), source_name=str(path))
