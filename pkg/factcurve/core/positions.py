from collections import defaultdict
from dataclasses import replace
from fractions import Fraction

from factcurve.core.records import POSITION_BUCKETS, BucketStats, ClaimLabel
from factcurve.utils.errors import (
    DataError,
    EmptyCorpusError,
    PositionDomainError,
    ReferentialIntegrityError,
)

_EXACT_BOUNDS = tuple((Fraction(i, 5), Fraction(i + 1, 5)) for i in range(5))


class PositionCalculator:
    """Relative-position bucket arithmetic and the per-bucket claim aggregations."""

    @staticmethod
    def relative_position(index, total):
        """
        Relative position of the `index`-th sentence out of `total`.

        :return: index / total as a double, in (0, 1].
        """
        if total < 1 or index < 1 or index > total:
            raise PositionDomainError(f"Sentence index {index} is outside 1..{total}.")
        return index / total

    @staticmethod
    def bucket_of(pos):
        """
        Returns the bucket with lower < pos <= upper.

        Fractions are compared against exact fifths; floats against the double fifths,
        which is what index / total produces on the boundaries.
        """
        if not 0 < pos <= 1:
            raise PositionDomainError(f"Relative position {pos} is outside (0, 1].")
        if isinstance(pos, Fraction):
            for bucket, (lower, upper) in zip(POSITION_BUCKETS, _EXACT_BOUNDS):
                if lower < pos <= upper:
                    return bucket
        for bucket in POSITION_BUCKETS:
            if bucket.contains(pos):
                return bucket
        # pos is in (0, 1] so one of the buckets above matched
        raise PositionDomainError(f"No bucket for relative position {pos}.")

    @staticmethod
    def claim_buckets(generations, claims):
        """
        Maps every claim id to the bucket of its source sentence.

        :raises ReferentialIntegrityError: if a claim points at a missing generation or sentence.
        """
        by_id = {g.id: g for g in generations}
        buckets = {}
        for claim in claims:
            generation = by_id.get(claim.generation_id)
            if generation is None:
                raise ReferentialIntegrityError(claim.id, f"unknown generation {claim.generation_id}")
            if generation.sentence(claim.sentence_index) is None:
                raise ReferentialIntegrityError(
                    claim.id,
                    f"sentence_index {claim.sentence_index} outside 1..{generation.sentence_count}",
                )
            pos = PositionCalculator.relative_position(claim.sentence_index, generation.sentence_count)
            buckets[claim.id] = PositionCalculator.bucket_of(pos)
        return buckets

    @staticmethod
    def _labelled_claims(generations, claims):
        ordered = sorted(claims, key=lambda c: c.id)
        for claim in ordered:
            if claim.label == ClaimLabel.UNLABELED:
                raise DataError(f"Claim {claim.id} has no support label.")
        PositionCalculator.claim_buckets(generations, ordered)
        return ordered

    @staticmethod
    def macro_average_fractions(generations, claims):
        """
        Macro-averaged label fractions per bucket.

        Each sentence with at least one claim contributes one vote: its own
        supported / unsupported / irrelevant fractions. A bucket's fractions are the
        unweighted mean over its contributing sentences.
        """
        ordered = PositionCalculator._labelled_claims(generations, claims)
        totals = {g.id: g.sentence_count for g in generations}

        per_sentence = defaultdict(lambda: defaultdict(int))
        for claim in ordered:
            per_sentence[(claim.generation_id, claim.sentence_index)][claim.label] += 1
        if not per_sentence:
            raise EmptyCorpusError("No sentence in the corpus has any claim.")

        votes = defaultdict(list)
        for (generation_id, sentence_index) in sorted(per_sentence):
            counts = per_sentence[(generation_id, sentence_index)]
            n = sum(counts.values())
            pos = PositionCalculator.relative_position(sentence_index, totals[generation_id])
            bucket = PositionCalculator.bucket_of(pos)
            votes[bucket.index].append((
                counts[ClaimLabel.SUPPORTED] / n,
                counts[ClaimLabel.UNSUPPORTED] / n,
                counts[ClaimLabel.IRRELEVANT] / n,
            ))

        stats = []
        for bucket in POSITION_BUCKETS:
            rows = votes.get(bucket.index, [])
            if not rows:
                stats.append(BucketStats(bucket=bucket))
                continue
            n = len(rows)
            stats.append(BucketStats(
                bucket=bucket,
                frac_supported=sum(r[0] for r in rows) / n,
                frac_unsupported=sum(r[1] for r in rows) / n,
                frac_irrelevant=sum(r[2] for r in rows) / n,
                n_sentences=n,
            ))
        return stats

    @staticmethod
    def bucket_claim_counts(generations, claims):
        """
        Average number of supported and unsupported claims per generation in each bucket.

        Every generation counts in the denominator, also those without a sentence in the bucket.
        """
        if not generations:
            raise EmptyCorpusError("The corpus has no generations.")
        ordered = PositionCalculator._labelled_claims(generations, claims)
        if not ordered:
            raise EmptyCorpusError("No sentence in the corpus has any claim.")
        buckets = PositionCalculator.claim_buckets(generations, ordered)

        supported = defaultdict(int)
        unsupported = defaultdict(int)
        for claim in ordered:
            index = buckets[claim.id].index
            if claim.label == ClaimLabel.SUPPORTED:
                supported[index] += 1
            elif claim.label == ClaimLabel.UNSUPPORTED:
                unsupported[index] += 1

        n_generations = len(generations)
        return [
            BucketStats(
                bucket=bucket,
                avg_supported_count=supported[bucket.index] / n_generations,
                avg_unsupported_count=unsupported[bucket.index] / n_generations,
            )
            for bucket in POSITION_BUCKETS
        ]

    @staticmethod
    def bucket_report(generations, claims):
        """Fractions and counts merged into one BucketStats per bucket."""
        fractions = PositionCalculator.macro_average_fractions(generations, claims)
        counts = PositionCalculator.bucket_claim_counts(generations, claims)
        return [
            replace(f, avg_supported_count=c.avg_supported_count, avg_unsupported_count=c.avg_unsupported_count)
            for f, c in zip(fractions, counts)
        ]

    @staticmethod
    def factuality_of_set(claims):
        """Supported / (Supported + Unsupported); irrelevant claims are left out."""
        n_supported = sum(1 for c in claims if c.label == ClaimLabel.SUPPORTED)
        n_unsupported = sum(1 for c in claims if c.label == ClaimLabel.UNSUPPORTED)
        if n_supported + n_unsupported == 0:
            raise EmptyCorpusError("No supported or unsupported claim to score.")
        return n_supported / (n_supported + n_unsupported)
