from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Tuple

from factcurve.core.positions import PositionCalculator
from factcurve.core.records import POSITION_BUCKETS, BucketStats, ClaimLabel, PositionBucket
from factcurve.judging.strategies import JudgmentStrategy, Verdict
from factcurve.utils.errors import DataError, MismatchedClaimSetError, ReferentialIntegrityError

# Whole (0, 1] range, used for the overall row of a self-score report
OVERALL_BUCKET = PositionBucket(index=-1, lower=0.0, upper=1.0)

SCORED_LABELS = (ClaimLabel.SUPPORTED, ClaimLabel.UNSUPPORTED)
INCORRECT_VERDICTS = (Verdict.JUDGED_FALSE, Verdict.JUDGED_NOA)


@dataclass(frozen=True)
class SelfScoreReport:
    strategy: JudgmentStrategy
    buckets: Tuple[BucketStats, ...]
    overall: BucketStats


@dataclass(frozen=True)
class FlipRateRecord:
    bucket: PositionBucket
    label_class: ClaimLabel
    n_correct_in_b: int
    n_flipped: int
    flip_rate: Optional[float]

    def to_dict(self):
        return {
            "bucket_lo": self.bucket.lower,
            "bucket_hi": self.bucket.upper,
            "label": self.label_class.code,
            "n_correct_in_b": self.n_correct_in_b,
            "n_flipped": self.n_flipped,
            "flip_rate": self.flip_rate,
        }


def _strategy_of(judgments):
    strategies = {j.strategy for j in judgments}
    if len(strategies) > 1:
        names = ", ".join(sorted(s.value for s in strategies))
        raise DataError(f"Judgments mix several strategies: {names}.")
    return strategies.pop() if strategies else None


def _scored_claims(generations, claims):
    """Supported and Unsupported claims by id, each with the bucket of its sentence."""
    scored = [c for c in claims if c.label in SCORED_LABELS]
    buckets = PositionCalculator.claim_buckets(generations, scored)
    return {c.id: c for c in scored}, buckets


def _judgments_by_claim(judgments, claims_by_id, all_claim_ids):
    by_claim = {}
    for judgment in judgments:
        if judgment.claim_id not in all_claim_ids:
            raise ReferentialIntegrityError(judgment.claim_id, "judged but not part of the corpus")
        if judgment.claim_id in by_claim:
            raise DataError(f"Claim {judgment.claim_id} is judged twice.")
        if judgment.claim_id in claims_by_id:
            by_claim[judgment.claim_id] = judgment
    return by_claim


def _stats_for(bucket, claims, verdicts):
    """BucketStats of one group of scored claims; `verdicts` maps claim id to Verdict."""
    known = unknown = n_supported = n_unsupported = n_unparseable = 0
    for claim in claims:
        verdict = verdicts.get(claim.id)
        if verdict is None:
            continue
        if verdict == Verdict.UNPARSEABLE:
            n_unparseable += 1
        elif claim.label == ClaimLabel.SUPPORTED:
            n_supported += 1
            known += verdict == Verdict.JUDGED_TRUE
        else:
            n_unsupported += 1
            unknown += verdict in INCORRECT_VERDICTS

    factuality = None
    if claims:
        factuality = PositionCalculator.factuality_of_set(claims)
    return BucketStats(
        bucket=bucket,
        self_known=known / n_supported if n_supported else None,
        self_unknown=unknown / n_unsupported if n_unsupported else None,
        n_judged_supported=n_supported,
        n_judged_unsupported=n_unsupported,
        n_unparseable=n_unparseable,
        factuality=factuality,
    )


def self_scores(generations, claims, judgments):
    """
    Self-Known and Self-Unknown per position bucket and overall.

    Only Supported and Unsupported claims are scored. Self-Known is the share of judged
    Supported claims answered True; Self-Unknown the share of judged Unsupported claims
    answered False or None of the above. Unparseable verdicts are left out of both
    denominators and counted separately. A score with an empty denominator is None.

    :param generations: GenerationRecords the claims belong to.
    :param claims: AtomicClaims with their support labels.
    :param judgments: JudgmentRecords produced under a single strategy.
    :return: SelfScoreReport.
    """
    judgments = list(judgments)
    strategy = _strategy_of(judgments)
    claims_by_id, buckets = _scored_claims(generations, claims)
    by_claim = _judgments_by_claim(judgments, claims_by_id, {c.id for c in claims})
    verdicts = {claim_id: j.verdict for claim_id, j in by_claim.items()}

    grouped = defaultdict(list)
    for claim_id in sorted(claims_by_id):
        grouped[buckets[claim_id].index].append(claims_by_id[claim_id])

    rows = tuple(_stats_for(bucket, grouped.get(bucket.index, []), verdicts) for bucket in POSITION_BUCKETS)
    ordered = [claims_by_id[claim_id] for claim_id in sorted(claims_by_id)]
    return SelfScoreReport(strategy=strategy, buckets=rows, overall=_stats_for(OVERALL_BUCKET, ordered, verdicts))


def flip_rate(judgments_b, judgments_c, generations, claims):
    """
    Share of claims judged True under QuestionAnswering that turn False or NOA once NOA is offered.

    Computed per bucket and per label class (Supported, Unsupported). A claim with an
    Unparseable verdict in either setting is left out.

    :raises MismatchedClaimSetError: when the two judgment sets cover different claims.
    :return: FlipRateRecords ordered by bucket, then Supported before Unsupported.
    """
    verdicts_b = {j.claim_id: j.verdict for j in judgments_b}
    verdicts_c = {j.claim_id: j.verdict for j in judgments_c}
    if set(verdicts_b) != set(verdicts_c):
        only_b = len(set(verdicts_b) - set(verdicts_c))
        only_c = len(set(verdicts_c) - set(verdicts_b))
        raise MismatchedClaimSetError(
            f"Judgment sets differ: {only_b} claims only in the first, {only_c} only in the second.")

    claims_by_id, buckets = _scored_claims(generations, claims)
    all_claim_ids = {c.id for c in claims}
    for claim_id in verdicts_b:
        if claim_id not in all_claim_ids:
            raise ReferentialIntegrityError(claim_id, "judged but not part of the corpus")

    correct = defaultdict(int)
    flipped = defaultdict(int)
    for claim_id in sorted(verdicts_b):
        claim = claims_by_id.get(claim_id)
        if claim is None:
            continue
        b, c = verdicts_b[claim_id], verdicts_c[claim_id]
        if Verdict.UNPARSEABLE in (b, c) or b != Verdict.JUDGED_TRUE:
            continue
        key = (buckets[claim_id].index, claim.label)
        correct[key] += 1
        flipped[key] += c in INCORRECT_VERDICTS

    records = []
    for bucket in POSITION_BUCKETS:
        for label in SCORED_LABELS:
            n_correct = correct[(bucket.index, label)]
            n_flipped = flipped[(bucket.index, label)]
            records.append(FlipRateRecord(
                bucket=bucket,
                label_class=label,
                n_correct_in_b=n_correct,
                n_flipped=n_flipped,
                flip_rate=n_flipped / n_correct if n_correct else None,
            ))
    return records
