import json
import math
import re
from collections import Counter
from dataclasses import dataclass

from factcurve.api.api_manager import make_request
from factcurve.core.records import GenerationRecord
from factcurve.pipeline.claims import segment_sentences
from factcurve.pipeline.ingestion import (
    EntityList,
    GenerationBatch,
    bio_prompt,
    generation_id_for,
)
from factcurve.utils.errors import CorpusFormatError, DataError, EmptyIndexError, GatewayError
from factcurve.utils.logger import setup_logger

MAX_CHUNK_TOKENS = 256
DEFAULT_TOP_K = 3
INDEX_VERSION = 1

# Added to a chunk's score in proportion to the query terms found in its document title
TITLE_BONUS = 5.0

_NON_WORD = re.compile(r"[^\w]+")


@dataclass(frozen=True)
class CorpusDoc:
    doc_id: str
    title: str
    text: str

    def __post_init__(self):
        if not self.title or not self.title.strip():
            raise DataError(f"Document {self.doc_id} has no title.")


@dataclass(frozen=True)
class RetrievalChunk:
    doc_id: str
    chunk_index: int
    text: str
    token_count: int
    title: str = ""

    def to_dict(self):
        return {
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "title": self.title,
            "text": self.text,
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, data):
        chunk = cls(
            doc_id=data["doc_id"],
            chunk_index=int(data["chunk_index"]),
            text=data["text"],
            token_count=int(data["token_count"]),
            title=data.get("title", ""),
        )
        actual = len(chunk.text.split())
        if chunk.token_count != actual:
            raise DataError(f"Chunk {chunk.doc_id}#{chunk.chunk_index} claims {chunk.token_count} tokens "
                            f"but its text has {actual}.")
        if chunk.token_count > MAX_CHUNK_TOKENS:
            raise DataError(f"Chunk {chunk.doc_id}#{chunk.chunk_index} has {chunk.token_count} tokens, "
                            f"more than {MAX_CHUNK_TOKENS}.")
        return chunk


def terms(text):
    """Lowercased whitespace tokens with punctuation stripped; empty leftovers are dropped."""
    result = []
    for token in text.lower().split():
        term = _NON_WORD.sub("", token)
        if term:
            result.append(term)
    return result


def chunk_corpus(docs, max_tokens=MAX_CHUNK_TOKENS):
    """
    Splits every document into consecutive chunks of at most `max_tokens` whitespace tokens.

    Chunks are maximal, so only a document's last chunk can be shorter. Joining a document's
    chunk texts with single spaces gives back its whitespace-normalized text.
    """
    if not 1 <= max_tokens <= MAX_CHUNK_TOKENS:
        raise ValueError(f"max_tokens must be between 1 and {MAX_CHUNK_TOKENS}, got {max_tokens}.")
    chunks = []
    for doc in docs:
        tokens = doc.text.split()
        for chunk_index, start in enumerate(range(0, len(tokens), max_tokens)):
            piece = tokens[start:start + max_tokens]
            chunks.append(RetrievalChunk(
                doc_id=doc.doc_id,
                chunk_index=chunk_index,
                text=" ".join(piece),
                token_count=len(piece),
                title=doc.title,
            ))
    return chunks


class LexicalIndex:
    def __init__(self, chunks, logger=None):
        """
        Term-frequency x inverse-document-frequency index over retrieval chunks.

        Every chunk counts as one document for the frequencies:
        idf(t) = ln((N + 1) / (df(t) + 1)) + 1.

        :param chunks: RetrievalChunks.
        """
        self.logger = logger if logger else setup_logger()
        self.chunks = tuple(sorted(chunks, key=lambda c: (c.doc_id, c.chunk_index)))
        self._term_counts = [Counter(terms(c.text)) for c in self.chunks]
        self._title_terms = [set(terms(c.title)) for c in self.chunks]
        self.document_frequency = Counter()
        for counts in self._term_counts:
            self.document_frequency.update(counts.keys())
        self.logger.debug(f"LexicalIndex built over {len(self.chunks)} chunks.")

    def __len__(self):
        return len(self.chunks)

    def idf(self, term):
        n = len(self.chunks)
        return math.log((n + 1) / (self.document_frequency.get(term, 0) + 1)) + 1.0

    def score(self, position, query_terms):
        counts = self._term_counts[position]
        unique = sorted(set(query_terms))
        value = sum(counts.get(term, 0) * self.idf(term) for term in unique)
        if unique:
            in_title = sum(1 for term in unique if term in self._title_terms[position])
            value += TITLE_BONUS * in_title / len(unique)
        return value

    def search(self, query, k=DEFAULT_TOP_K):
        """
        Top-k chunks for a query, best first; equal scores are ordered by (doc_id, chunk_index).

        :raises EmptyIndexError: when the index has no chunks.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}.")
        if not self.chunks:
            raise EmptyIndexError("Cannot retrieve from an empty index.")
        query_terms = terms(query)
        ranked = sorted(
            range(len(self.chunks)),
            key=lambda i: (-self.score(i, query_terms), self.chunks[i].doc_id, self.chunks[i].chunk_index),
        )
        return [self.chunks[i] for i in ranked[:k]]

    def to_dict(self):
        return {"version": INDEX_VERSION, "chunks": [c.to_dict() for c in self.chunks]}

    @classmethod
    def from_dict(cls, data, logger=None):
        if data.get("version") != INDEX_VERSION:
            raise DataError(f"Unsupported index version {data.get('version')!r}, expected {INDEX_VERSION}.")
        return cls([RetrievalChunk.from_dict(c) for c in data["chunks"]], logger=logger)


def retrieve(entity, chunks, k=DEFAULT_TOP_K):
    """
    Ranks chunks by lexical relevance to an entity name.

    :param chunks: A LexicalIndex or a sequence of RetrievalChunks.
    :return: The top-k chunks, all of them (ranked) when k exceeds their number.
    """
    index = chunks if isinstance(chunks, LexicalIndex) else LexicalIndex(chunks)
    return index.search(entity, k)


def build_rag_prompt(entity, chunks):
    """
    "Document [i] <text>" lines in rank order followed by the biography question.
    """
    if not chunks:
        raise ValueError("A retrieval prompt needs at least one chunk.")
    lines = [f"Document [{i}] {chunk.text}" for i, chunk in enumerate(chunks)]
    lines.append(f"Question: {bio_prompt(entity)}")
    return "\n".join(lines)


def save_index(path, index):
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        json.dump(index.to_dict(), file, ensure_ascii=False, indent=2, sort_keys=True)
        file.write("\n")


def load_index(path, logger=None):
    try:
        with open(path, "r", encoding="utf-8") as file:
            data = json.load(file)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"invalid index JSON: {e}", path)
    try:
        return LexicalIndex.from_dict(data, logger=logger)
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise CorpusFormatError(f"not an index: {e!r}", path)


def load_corpus_docs(path):
    """Reads JSON-lines {"doc_id", "title", "text"} documents."""
    docs = []
    with open(path, "r", encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                docs.append(CorpusDoc(doc_id=str(data["doc_id"]), title=data["title"], text=data["text"]))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise CorpusFormatError(f"not a corpus document: {e}", path, line_number)
            except DataError as e:
                raise CorpusFormatError(str(e), path, line_number)
    return docs


def rag_generation_id(model_id, entity):
    return f"{generation_id_for(model_id, entity)}--rag"


def generate_rag_bios(entities, model_id, index, gateway, config=None, k=DEFAULT_TOP_K, temperature=0.0,
                      logger=None):
    """
    Biographies generated with retrieved passages in the prompt.

    The records carry the retrieval prompt and flow through the same analysis as plain generations.

    :param index: LexicalIndex to retrieve from.
    :return: GenerationBatch.
    """
    logger = logger if logger else setup_logger()
    if not isinstance(entities, EntityList):
        entities = EntityList(tuple(entities))

    prompts = [build_rag_prompt(e, index.search(e, k)) for e in entities.entities]
    requests = [make_request(model_id, p, config, temperature=temperature) for p in prompts]
    responses = gateway.complete_many(requests, stage="rag generate")

    records = []
    failures = {}
    for entity, prompt, response in zip(entities.entities, prompts, responses):
        if isinstance(response, GatewayError):
            logger.warning(f"Retrieval-augmented generation failed for {entity}: {response}")
            failures[entity] = response
            continue
        records.append(GenerationRecord(
            id=rag_generation_id(model_id, entity),
            entity=entity,
            prompt=prompt,
            model_id=model_id,
            text=response.text,
            sentences=segment_sentences(response.text) if response.text.strip() else (),
        ))
    logger.info(f"Generated {len(records)} of {len(entities.entities)} retrieval-augmented biographies.")
    return GenerationBatch(records=tuple(records), failures=failures)
