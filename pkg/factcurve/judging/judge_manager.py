from collections import Counter

from factcurve.api.api_manager import make_request
from factcurve.judging.strategies import (
    STRATEGY_CLASSES,
    JudgeStrategy,
    JudgmentRecord,
    JudgmentStrategy,
    Verdict,
)
from factcurve.utils.errors import ConfigError, GatewayError
from factcurve.utils.logger import setup_logger

VOTE_SEPARATOR = "\n---\n"


def majority_verdict(verdicts):
    """Plurality among parseable verdicts, ties to the earliest; Unparseable if none parse."""
    parseable = [v for v in verdicts if v != Verdict.UNPARSEABLE]
    if not parseable:
        return Verdict.UNPARSEABLE
    counts = Counter(parseable)
    best = max(counts.values())
    return next(v for v in parseable if counts[v] == best)


class JudgeManager:
    def __init__(self, gateway, model_id, config=None, votes=1, vote_temperature=0.7, logger=None):
        """
        Runs judging prompts for a model's own claims.

        :param gateway: LLMGateway.
        :param model_id: The model that generated the claims and now judges them.
        :param config: ConfigLoader (optional), for request defaults.
        :param votes: Samples per claim; 1 means a single temperature-0 judgment.
        :param vote_temperature: Sampling temperature used when votes > 1.
        """
        self.gateway = gateway
        self.model_id = model_id
        self.config = config
        self.votes = max(1, votes)
        self.vote_temperature = vote_temperature
        self.logger = logger if logger else setup_logger()
        self.strategies = {}
        for kind, strategy_class in STRATEGY_CLASSES.items():
            self.register_strategy(strategy_class())
        self.logger.info(f"JudgeManager initialized for {model_id}.")

    def register_strategy(self, strategy_instance):
        if isinstance(strategy_instance, JudgeStrategy):
            self.strategies[strategy_instance.kind] = strategy_instance
            self.logger.debug(f"Judging strategy '{strategy_instance.kind.value}' registered.")
        else:
            self.logger.error("Attempted to register a strategy that does not inherit from JudgeStrategy.")

    def _requests(self, strategy, claim, qa, entity):
        prompt = strategy.render(claim, qa, entity)
        if self.votes == 1:
            return [make_request(self.model_id, prompt, self.config)]
        return [make_request(self.model_id, prompt, self.config, temperature=self.vote_temperature,
                             sample_index=i) for i in range(self.votes)]

    def _record(self, strategy, claim, responses):
        raws = [r.text for r in responses]
        verdict = majority_verdict([strategy.parse(raw) for raw in raws])
        return JudgmentRecord(
            claim_id=claim.id,
            strategy=strategy.kind,
            raw_response=VOTE_SEPARATOR.join(raws),
            verdict=verdict,
        )

    def _strategy(self, kind, qa):
        strategy = self.strategies[kind]
        if strategy.needs_qa != (qa is not None):
            raise ValueError(f"Strategy {kind.value} {'needs' if strategy.needs_qa else 'takes no'} QA pair.")
        return strategy

    def judge(self, claim, qa, entity, strategy):
        """
        Judges one claim under one strategy.

        :param qa: QaPair, required for the QA strategies and None for DirectAsking.
        :return: JudgmentRecord; an unparseable answer is a verdict, not an error.
        """
        handler = self._strategy(strategy, qa)
        responses = [self.gateway.complete(req) for req in self._requests(handler, claim, qa, entity)]
        return self._record(handler, claim, responses)

    def judge_many(self, claims, qa_pairs, entities, strategy):
        """
        Judges many claims with the gateway's bounded parallelism.

        Claims without a QA pair are skipped under the QA strategies (QA-underivable).

        :param qa_pairs: Mapping claim id -> QaPair.
        :param entities: Mapping generation id -> entity name.
        :return: (judgments sorted by claim id, mapping claim id -> GatewayError)
        """
        handler = self.strategies[strategy]
        ordered = sorted(claims, key=lambda c: c.id)
        if handler.needs_qa:
            skipped = [c.id for c in ordered if c.id not in qa_pairs]
            if skipped:
                self.logger.warning(f"{len(skipped)} claims have no QA pair and are not judged under {strategy.value}.")
            ordered = [c for c in ordered if c.id in qa_pairs]

        batches = []
        flat = []
        for claim in ordered:
            qa = qa_pairs.get(claim.id) if handler.needs_qa else None
            reqs = self._requests(handler, claim, qa, entities[claim.generation_id])
            batches.append((claim, len(flat), len(reqs)))
            flat.extend(reqs)

        responses = self.gateway.complete_many(flat, stage=f"judge {strategy.value}")

        judgments = []
        errors = {}
        for claim, start, count in batches:
            chunk = responses[start:start + count]
            failed = [r for r in chunk if isinstance(r, GatewayError)]
            if failed:
                errors[claim.id] = failed[0]
                continue
            judgments.append(self._record(handler, claim, chunk))

        self.logger.info(f"Judged {len(judgments)} claims under {strategy.value}; {len(errors)} errored.")
        return judgments, errors


def parse_strategy(name):
    """Accepts the enum value ("qa_noa") or member name ("QA_WITH_NOA")."""
    try:
        return JudgmentStrategy(name)
    except ValueError:
        pass
    try:
        return JudgmentStrategy[name.upper()]
    except KeyError:
        choices = ", ".join(s.value for s in JudgmentStrategy)
        raise ConfigError(f"Unknown judging strategy {name!r}; choose one of {choices}.")
