from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple


class ClaimLabel(Enum):
    """Support label of an atomic claim."""

    SUPPORTED = "Supported"
    UNSUPPORTED = "Unsupported"
    IRRELEVANT = "Irrelevant"
    UNLABELED = "Unlabeled"

    @property
    def code(self):
        """Short code used by the corpus file format."""
        return _LABEL_CODES[self]

    @classmethod
    def from_code(cls, code):
        """
        Maps a corpus label code ("S", "NS", "IR", "UL") to a ClaimLabel.

        :raises KeyError: if the code is unknown.
        """
        return _CODE_LABELS[code]


_LABEL_CODES = {
    ClaimLabel.SUPPORTED: "S",
    ClaimLabel.UNSUPPORTED: "NS",
    ClaimLabel.IRRELEVANT: "IR",
    ClaimLabel.UNLABELED: "UL",
}
_CODE_LABELS = {code: label for label, code in _LABEL_CODES.items()}


@dataclass(frozen=True)
class Sentence:
    index: int
    total: int
    text: str

    def to_dict(self):
        return {"index": self.index, "total": self.total, "text": self.text}


@dataclass(frozen=True)
class GenerationRecord:
    """One long-form model output with its prompt, subject entity and sentence segmentation."""

    id: str
    entity: str
    prompt: str
    model_id: str
    text: str
    sentences: Tuple[Sentence, ...] = ()
    filtered: bool = False

    @property
    def sentence_count(self):
        return len(self.sentences)

    def sentence(self, index):
        """Returns the 1-based sentence `index`, or None if it does not exist."""
        if 1 <= index <= len(self.sentences):
            return self.sentences[index - 1]
        return None

    def to_dict(self):
        return {
            "id": self.id,
            "entity": self.entity,
            "prompt": self.prompt,
            "model_id": self.model_id,
            "text": self.text,
            "sentences": [s.to_dict() for s in self.sentences],
            "filtered": self.filtered,
        }


@dataclass(frozen=True)
class AtomicClaim:
    id: str
    generation_id: str
    sentence_index: int
    text: str
    label: ClaimLabel = ClaimLabel.UNLABELED

    def to_dict(self):
        return {
            "id": self.id,
            "generation_id": self.generation_id,
            "sentence_index": self.sentence_index,
            "text": self.text,
            "label": self.label.code,
        }


def claim_id_for(generation_id, sentence_index, ordinal):
    """
    Deterministic claim id: generation id, sentence index and 1-based ordinal within the sentence.

    Zero padding keeps lexical order equal to positional order.
    """
    return f"{generation_id}-s{sentence_index:03d}-c{ordinal:03d}"


@dataclass(frozen=True)
class PositionBucket:
    """Relative-position interval (lower, upper]."""

    index: int
    lower: float
    upper: float

    @property
    def midpoint(self):
        return (self.lower + self.upper) / 2

    def contains(self, pos):
        return self.lower < pos <= self.upper

    @property
    def label(self):
        return f"({round(self.lower * 100)},{round(self.upper * 100)}]"


POSITION_BUCKETS = tuple(
    PositionBucket(index=i, lower=i / 5, upper=(i + 1) / 5) for i in range(5)
)


@dataclass(frozen=True)
class BucketStats:
    """Per-bucket aggregates. Optional values are None when their denominator is empty."""

    bucket: PositionBucket
    frac_supported: Optional[float] = None
    frac_unsupported: Optional[float] = None
    frac_irrelevant: Optional[float] = None
    n_sentences: int = 0
    avg_supported_count: float = 0.0
    avg_unsupported_count: float = 0.0
    self_known: Optional[float] = None
    self_unknown: Optional[float] = None
    n_judged_supported: int = 0
    n_judged_unsupported: int = 0
    n_unparseable: int = 0
    factuality: Optional[float] = None

    @property
    def unparseable_rate(self):
        judged = self.n_judged_supported + self.n_judged_unsupported + self.n_unparseable
        if judged == 0:
            return None
        return self.n_unparseable / judged

    def to_dict(self):
        return {
            "bucket_lo": self.bucket.lower,
            "bucket_hi": self.bucket.upper,
            "frac_supported": self.frac_supported,
            "frac_unsupported": self.frac_unsupported,
            "frac_irrelevant": self.frac_irrelevant,
            "n_sentences": self.n_sentences,
            "avg_supported_count": self.avg_supported_count,
            "avg_unsupported_count": self.avg_unsupported_count,
            "self_known": self.self_known,
            "self_unknown": self.self_unknown,
            "n_judged_supported": self.n_judged_supported,
            "n_judged_unsupported": self.n_judged_unsupported,
            "unparseable_rate": self.unparseable_rate,
            "factuality": self.factuality,
        }


@dataclass(frozen=True)
class QaPair:
    claim_id: str
    question: str
    answer: str

    def to_dict(self):
        return {"claim_id": self.claim_id, "question": self.question, "answer": self.answer}


@dataclass(frozen=True)
class AnnotatedCorpus:
    records: Tuple[GenerationRecord, ...]
    claims: Tuple[AtomicClaim, ...]
    source_name: str = ""
    _by_id: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {r.id: r for r in self.records})

    def record(self, generation_id):
        return self._by_id.get(generation_id)

    def claims_of(self, generation_id):
        return [c for c in self.claims if c.generation_id == generation_id]
