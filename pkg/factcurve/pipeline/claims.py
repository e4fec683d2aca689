import re
from dataclasses import dataclass
from typing import Tuple

from factcurve.api.api_manager import make_request
from factcurve.core.records import AtomicClaim, ClaimLabel, QaPair, Sentence, claim_id_for
from factcurve.utils import prompts
from factcurve.utils.errors import (
    EmptyQaError,
    EmptyTextError,
    GatewayError,
    MissingSeparatorError,
    UnparseableResponseError,
)
from factcurve.utils.logger import setup_logger

# Tokens ending in a period that never close a sentence
ABBREVIATIONS = frozenset({
    "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "mt.", "ft.", "gen.", "col.",
    "lt.", "sgt.", "capt.", "rev.", "hon.", "gov.", "sen.", "rep.", "pres.", "inc.", "ltd.",
    "co.", "corp.", "vs.", "no.", "vol.", "e.g.", "i.e.", "approx.", "jan.", "feb.", "mar.",
    "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
})

_TERMINATOR = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s|$)")
_INITIAL = re.compile(r"^[(\"'“]*[A-Z]\.$")
_DOTTED_ACRONYM = re.compile(r"^[(\"'“]*(?:[A-Za-z]\.){2,}$")

_LIST_ITEM = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*\S)\s*$")
_NO_FACTS = {"none", "none.", "no facts", "no facts."}


@dataclass(frozen=True)
class DecompositionResult:
    sentence_index: int
    claims: Tuple[str, ...]


def _closes_sentence(line, match):
    """False when the period belongs to an abbreviation, an initial or a dotted acronym."""
    if not match.group(0).startswith("."):
        return True
    token_start = line.rfind(" ", 0, match.start()) + 1
    token = line[token_start:match.start() + 1]
    if token.lower().lstrip("(\"'“") in ABBREVIATIONS:
        return False
    if _INITIAL.match(token) or _DOTTED_ACRONYM.match(token):
        return False
    return True


def segment_sentences(text):
    """
    Rule-based sentence split.

    Breaks after ".", "?" or "!" (optionally followed by closing quotes or brackets)
    when whitespace follows, and at every newline. Abbreviations, single-letter
    initials and dotted acronyms such as "U.S." do not end a sentence.

    :return: Tuple of Sentence with 1-based indices and the total set on each.
    """
    if text is None or not text.strip():
        raise EmptyTextError("Cannot segment empty text.")

    pieces = []
    for line in text.split("\n"):
        start = 0
        for match in _TERMINATOR.finditer(line):
            if not _closes_sentence(line, match):
                continue
            piece = line[start:match.end()].strip()
            if piece:
                pieces.append(piece)
            start = match.end()
        rest = line[start:].strip()
        if rest:
            pieces.append(rest)

    total = len(pieces)
    return tuple(Sentence(index=i, total=total, text=piece) for i, piece in enumerate(pieces, start=1))


def parse_claim_list(raw):
    """
    Extracts claim texts from a bulleted or numbered list.

    :return: Tuple of claim strings; empty when the model answered "None".
    :raises UnparseableResponseError: when the response is neither a list nor "None".
    """
    stripped = raw.strip()
    if stripped.lower() in _NO_FACTS or not stripped:
        return ()
    items = []
    for line in stripped.splitlines():
        match = _LIST_ITEM.match(line)
        if match:
            items.append(match.group(1))
    if not items:
        raise UnparseableResponseError("No claim list in decomposition response", raw)
    return tuple(items)


def decompose_claims(sentence, context, gateway, model_id=None, config=None):
    """
    Asks a model to break one sentence into atomic claims.

    :param sentence: Sentence to decompose.
    :param context: GenerationRecord the sentence belongs to.
    :param gateway: LLMGateway.
    :param model_id: Decomposition model (defaults to the generation's own model).
    :return: DecompositionResult.
    """
    request = _decompose_request(sentence, context, model_id or context.model_id, config)
    response = gateway.complete(request)
    return DecompositionResult(sentence_index=sentence.index, claims=parse_claim_list(response.text))


def _decompose_request(sentence, context, model_id, config):
    prompt = prompts.render(prompts.DECOMPOSE, person=context.entity, context=context.text,
                            sentence=sentence.text)
    return make_request(model_id, prompt, config)


def claims_from_decomposition(generation, results):
    """AtomicClaims (Unlabeled) with ids generation + sentence index + ordinal."""
    claims = []
    for result in results:
        for ordinal, text in enumerate(result.claims, start=1):
            claims.append(AtomicClaim(
                id=claim_id_for(generation.id, result.sentence_index, ordinal),
                generation_id=generation.id,
                sentence_index=result.sentence_index,
                text=text,
                label=ClaimLabel.UNLABELED,
            ))
    return claims


def decompose_generation(generation, gateway, model_id=None, config=None, logger=None):
    """
    Decomposes every sentence of a generation through the gateway's bounded parallelism.

    :return: (claims, failures) where failures maps sentence index to the error raised.
    """
    logger = logger if logger else setup_logger()
    model_id = model_id or generation.model_id
    requests = [_decompose_request(s, generation, model_id, config) for s in generation.sentences]
    responses = gateway.complete_many(requests, stage=f"decompose {generation.id}")

    results = []
    failures = {}
    for sentence, response in zip(generation.sentences, responses):
        if isinstance(response, GatewayError):
            failures[sentence.index] = response
            continue
        try:
            results.append(DecompositionResult(sentence.index, parse_claim_list(response.text)))
        except UnparseableResponseError as e:
            failures[sentence.index] = e
    for index, error in failures.items():
        logger.warning(f"Decomposition failed for {generation.id} sentence {index}: {error}")
    return claims_from_decomposition(generation, results), failures


def parse_qa_response(claim_id, raw):
    """
    Splits a "question # answer" response at its first "#".

    Question and answer are copied from the response, only trimmed.
    """
    if "#" not in raw:
        raise MissingSeparatorError(f"No '#' separator in QA response for {claim_id}", raw)
    question, answer = raw.split("#", 1)
    question, answer = question.strip(), answer.strip()
    if not question or not answer:
        raise EmptyQaError(f"Empty question or answer for {claim_id}", raw)
    return QaPair(claim_id=claim_id, question=question, answer=answer)


def _qa_request(claim, entity, model_id, config, sample_index=0):
    if not claim.text.strip():
        raise ValueError(f"Claim {claim.id} has no text.")
    prompt = prompts.render(prompts.DERIVE_QA, person=entity, claim=claim.text)
    return make_request(model_id, prompt, config, sample_index=sample_index)


def derive_qa(claim, entity, gateway, model_id, config=None):
    """
    Derives a question-answer pair from one claim.

    :raises MissingSeparatorError, EmptyQaError: when the response cannot be split.
    """
    response = gateway.complete(_qa_request(claim, entity, model_id, config))
    return parse_qa_response(claim.id, response.text)


@dataclass(frozen=True)
class QaDerivation:
    pairs: dict
    underivable: Tuple[str, ...]


def derive_qa_batch(claims, entities, gateway, model_id, config=None, logger=None):
    """
    Derives QA pairs for many claims; each parse failure is retried once with a fresh sample.

    :param claims: AtomicClaims.
    :param entities: Mapping generation id -> entity name.
    :return: QaDerivation with pairs by claim id and the sorted ids of underivable claims.
    """
    logger = logger if logger else setup_logger()
    ordered = sorted(claims, key=lambda c: c.id)
    pairs = {}
    retry_queue = []

    requests = [_qa_request(c, entities[c.generation_id], model_id, config) for c in ordered]
    for claim, response in zip(ordered, gateway.complete_many(requests, stage="qa")):
        if isinstance(response, GatewayError):
            retry_queue.append(claim)
            continue
        try:
            pairs[claim.id] = parse_qa_response(claim.id, response.text)
        except UnparseableResponseError:
            retry_queue.append(claim)

    underivable = []
    if retry_queue:
        logger.info(f"Retrying QA derivation for {len(retry_queue)} claims.")
        requests = [_qa_request(c, entities[c.generation_id], model_id, config, sample_index=1)
                    for c in retry_queue]
        for claim, response in zip(retry_queue, gateway.complete_many(requests, stage="qa retry")):
            try:
                if isinstance(response, GatewayError):
                    raise response
                pairs[claim.id] = parse_qa_response(claim.id, response.text)
            except (UnparseableResponseError, GatewayError) as e:
                logger.warning(f"Claim {claim.id} is QA-underivable: {e}")
                underivable.append(claim.id)

    if underivable:
        logger.warning(f"{len(underivable)} of {len(ordered)} claims excluded as QA-underivable.")
    return QaDerivation(pairs=pairs, underivable=tuple(sorted(underivable)))
