import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

from factcurve import __version__
from factcurve.judging.strategies import JudgmentRecord
from factcurve.utils.errors import CorpusFormatError

SCHEMA_VERSION = 1

BUCKET_COLUMNS = ("bucket_lo", "bucket_hi", "frac_supported", "frac_unsupported", "frac_irrelevant",
                  "n_sentences", "avg_supported_count", "avg_unsupported_count")
SELFSCORE_COLUMNS = ("bucket_lo", "bucket_hi", "self_known", "self_unknown", "n_judged_supported",
                     "n_judged_unsupported", "unparseable_rate", "factuality")
FLIPRATE_COLUMNS = ("bucket_lo", "bucket_hi", "label", "n_correct_in_b", "n_flipped", "flip_rate")
ESTIMATE_COLUMNS = ("bucket_lo", "bucket_hi", "self_known", "self_unknown", "estimated_factuality",
                    "annotated_factuality", "status")

STATUS_OK = "ok"
STATUS_ABSENT = "absent"
STATUS_DEGENERATE = "degenerate"

ESTIMATE_LABEL = "model-consistent estimate"


def format_percent(value):
    """Fraction as a one-decimal percentage; empty when absent."""
    return "" if value is None else f"{value * 100:.1f}"


def format_count(value):
    return "" if value is None else f"{value:.2f}"


def format_bound(value):
    return str(round(value * 100))


def parse_percent(text):
    return None if text == "" else float(text) / 100


def sha256_of(path):
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for block in iter(lambda: file.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])
    return path


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        file.write(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n")
    return path


def write_jsonl(path, items):
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        for item in items:
            file.write(json.dumps(item, ensure_ascii=False, sort_keys=True) + "\n")
    return path


def read_jsonl(path):
    items = []
    with open(path, "r", encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                items.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"invalid JSON: {e}", path, line_number)
    return items


def _bounds(bucket):
    return {"bucket_lo": format_bound(bucket.lower), "bucket_hi": format_bound(bucket.upper)}


def bucket_rows(stats):
    return [
        {
            **_bounds(s.bucket),
            "frac_supported": format_percent(s.frac_supported),
            "frac_unsupported": format_percent(s.frac_unsupported),
            "frac_irrelevant": format_percent(s.frac_irrelevant),
            "n_sentences": str(s.n_sentences),
            "avg_supported_count": format_count(s.avg_supported_count),
            "avg_unsupported_count": format_count(s.avg_unsupported_count),
        }
        for s in stats
    ]


def bucket_payload(stats):
    return {
        "schema_version": SCHEMA_VERSION,
        "buckets": [{key: s.to_dict()[key] for key in BUCKET_COLUMNS} for s in stats],
    }


def selfscore_rows(report):
    return [
        {
            **_bounds(s.bucket),
            "self_known": format_percent(s.self_known),
            "self_unknown": format_percent(s.self_unknown),
            "n_judged_supported": str(s.n_judged_supported),
            "n_judged_unsupported": str(s.n_judged_unsupported),
            "unparseable_rate": format_percent(s.unparseable_rate),
            "factuality": format_percent(s.factuality),
        }
        for s in report.buckets
    ]


def _selfscore_dict(stats):
    return {key: stats.to_dict()[key] for key in SELFSCORE_COLUMNS}


def selfscore_payload(report):
    return {
        "schema_version": SCHEMA_VERSION,
        "strategy": report.strategy.value if report.strategy else None,
        "buckets": [_selfscore_dict(s) for s in report.buckets],
        "overall": _selfscore_dict(report.overall),
    }


def fliprate_rows(records):
    return [
        {
            **_bounds(r.bucket),
            "label": r.label_class.code,
            "n_correct_in_b": str(r.n_correct_in_b),
            "n_flipped": str(r.n_flipped),
            "flip_rate": format_percent(r.flip_rate),
        }
        for r in records
    ]


def fliprate_payload(records):
    return {"schema_version": SCHEMA_VERSION, "records": [r.to_dict() for r in records]}


@dataclass(frozen=True)
class SelfScoreRow:
    """One bucket of a self-score table as read back for estimation."""

    bucket_lo: float
    bucket_hi: float
    self_known: Optional[float]
    self_unknown: Optional[float]
    factuality: Optional[float] = None


def read_selfscores(path):
    """
    Reads a self-score table written by the judge command.

    The JSON form keeps full precision; the CSV form is read back from its percentages.
    """
    try:
        if str(path).endswith(".json"):
            with open(path, "r", encoding="utf-8") as file:
                data = json.load(file)
            return [
                SelfScoreRow(b["bucket_lo"], b["bucket_hi"], b["self_known"], b["self_unknown"], b.get("factuality"))
                for b in data["buckets"]
            ]
        with open(path, "r", encoding="utf-8", newline="") as file:
            return [
                SelfScoreRow(
                    bucket_lo=float(row["bucket_lo"]) / 100,
                    bucket_hi=float(row["bucket_hi"]) / 100,
                    self_known=parse_percent(row["self_known"]),
                    self_unknown=parse_percent(row["self_unknown"]),
                    factuality=parse_percent(row.get("factuality") or ""),
                )
                for row in csv.DictReader(file)
            ]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CorpusFormatError(f"not a self-score table: {e}", path)


@dataclass(frozen=True)
class EstimateRow:
    bucket_lo: float
    bucket_hi: float
    self_known: Optional[float]
    self_unknown: Optional[float]
    estimated_factuality: Optional[float]
    annotated_factuality: Optional[float]
    status: str


def estimate_rows(rows):
    return [
        {
            "bucket_lo": format_bound(r.bucket_lo),
            "bucket_hi": format_bound(r.bucket_hi),
            "self_known": format_percent(r.self_known),
            "self_unknown": format_percent(r.self_unknown),
            "estimated_factuality": format_percent(r.estimated_factuality),
            "annotated_factuality": format_percent(r.annotated_factuality),
            "status": r.status,
        }
        for r in rows
    ]


def estimate_payload(rows):
    return {"schema_version": SCHEMA_VERSION, "label": ESTIMATE_LABEL, "buckets": [asdict(r) for r in rows]}


def write_judgments(path, judgments):
    return write_jsonl(path, [j.to_dict() for j in judgments])


def read_judgments(path):
    try:
        return [JudgmentRecord.from_dict(item) for item in read_jsonl(path)]
    except (KeyError, ValueError) as e:
        raise CorpusFormatError(f"not a judgment table: {e}", path)


def write_qa_pairs(path, pairs):
    return write_jsonl(path, [pairs[claim_id].to_dict() for claim_id in sorted(pairs)])


@dataclass
class RunManifest:
    """What a command read, how it was configured and what it wrote."""

    command: str
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION

    @property
    def run_id(self):
        # Same command, configuration and inputs give the same id
        seed = json.dumps({"command": self.command, "config": self.config, "inputs": self.inputs},
                          sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(seed.encode("utf-8")).hexdigest()[:16]

    def add_input(self, path):
        self.inputs[os.path.basename(path)] = sha256_of(path)

    def add_output(self, path):
        self.outputs[os.path.basename(path)] = sha256_of(path)

    def to_dict(self):
        return {
            "run_id": self.run_id,
            "command": self.command,
            "config": self.config,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "tool_version": self.tool_version,
            "schema_version": self.schema_version,
        }

    def write(self, out_dir):
        """Writes manifest_<command>.json, so commands sharing an output directory keep their own."""
        return write_json(os.path.join(out_dir, f"manifest_{self.command.replace('-', '_')}.json"), self.to_dict())
