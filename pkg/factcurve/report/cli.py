import argparse
import json
import os
import sys
from collections import Counter

import pandas as pd

from factcurve import __version__
from factcurve.api.api_manager import RECORD, REPLAY, build_gateway
from factcurve.core.positions import PositionCalculator
from factcurve.core.records import AnnotatedCorpus, ClaimLabel, QaPair
from factcurve.estimation.estimator import SelfScorePair, estimate_per_bucket
from factcurve.estimation.simulator import SimulationConfig, simulate_claim_stream
from factcurve.judging.judge_manager import JudgeManager, parse_strategy
from factcurve.judging.scores import SCORED_LABELS, flip_rate, self_scores
from factcurve.judging.strategies import JudgmentStrategy
from factcurve.pipeline import ingestion
from factcurve.pipeline.claims import decompose_generation, derive_qa_batch
from factcurve.rag import retrieval
from factcurve.report import charts, tables
from factcurve.utils.config import ConfigLoader
from factcurve.utils.errors import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    ConfigError,
    CorpusFormatError,
    DegenerateEstimateError,
    EmptyCorpusError,
    FactCurveError,
    PartialFailureError,
)
from factcurve.utils.logger import set_verbosity, setup_logger

# Share of failed items above which a command exits with the partial-failure code
FAILURE_THRESHOLD = 0.10

STATS_COLUMNS = ("model", "generations", "claims_per_gen", "filtered_rate")


class RunContext:
    def __init__(self, config=None, mode=None, cache_dir=None, gateway=None, logger=None):
        """
        Configuration and lazily built collaborators shared by the commands of one run.

        :param config: ConfigLoader (packaged defaults when omitted).
        :param mode: Gateway mode override ("record" or "replay").
        :param cache_dir: Replay cache directory override.
        :param gateway: Ready LLMGateway, skipping build_gateway (optional).
        """
        self.config = config if config else ConfigLoader()
        self.mode = mode
        self.cache_dir = cache_dir
        self.logger = logger if logger else setup_logger()
        self._gateway = gateway

    @property
    def gateway(self):
        if self._gateway is None:
            self._gateway = build_gateway(self.config, mode=self.mode, cache_dir=self.cache_dir, logger=self.logger)
        return self._gateway

    def model(self, key, override=None, fallback_key=None):
        models = self.config.section("models")
        value = override or models.get(key) or (models.get(fallback_key) if fallback_key else None)
        if not value:
            raise ConfigError(f"No model configured: pass --model or set models.{key}.")
        return value

    def snapshot(self):
        snapshot = {key: self.config.section(key) for key in sorted(self.config.config)}
        if self.mode:
            snapshot.setdefault("gateway", {})["mode"] = self.mode
        return snapshot


def _unfiltered(corpus):
    """Records that passed the filters, with their claims."""
    records = [r for r in corpus.records if not r.filtered]
    kept = {r.id for r in records}
    return records, [c for c in corpus.claims if c.generation_id in kept]


def _check_failures(stage, n_failed, n_total, logger):
    if n_failed:
        logger.warning(f"{stage}: {n_failed} of {n_total} items failed.")
    if n_total and n_failed / n_total > FAILURE_THRESHOLD:
        raise PartialFailureError(
            f"{stage}: {n_failed} of {n_total} items failed, more than {FAILURE_THRESHOLD:.0%}.")


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _parent_dir(path):
    return _out_dir(os.path.dirname(os.path.abspath(path)))


def _finish(manifest, out_dir, outputs):
    for path in outputs:
        manifest.add_output(path)
    manifest.write(out_dir)


def cmd_analyze(corpus_path, out_dir, ctx=None):
    """
    Label fractions and claim counts per position bucket of an annotated corpus.

    Writes buckets.csv, buckets.json, fractions.svg and counts.svg.
    """
    ctx = ctx if ctx else RunContext()
    corpus = ingestion.load_annotated(corpus_path)
    records, claims = _unfiltered(corpus)
    ctx.logger.info(f"Analyzing {len(records)} generations and {len(claims)} claims from {corpus_path}.")
    stats = PositionCalculator.bucket_report(records, claims)

    _out_dir(out_dir)
    manifest = tables.RunManifest("analyze", ctx.snapshot())
    manifest.add_input(corpus_path)
    outputs = [
        tables.write_csv(os.path.join(out_dir, "buckets.csv"), tables.BUCKET_COLUMNS, tables.bucket_rows(stats)),
        tables.write_json(os.path.join(out_dir, "buckets.json"), tables.bucket_payload(stats)),
    ]
    for chart, name in ((charts.FractionsChart(), "fractions.svg"), (charts.CountsChart(), "counts.svg")):
        chart.update_chart(stats)
        chart.save(os.path.join(out_dir, name))
        outputs.append(os.path.join(out_dir, name))
    _finish(manifest, out_dir, outputs)
    return stats


def cmd_adapt(factscore_path, out_path, model_id="", ctx=None):
    """Converts a FActScore-style annotation file into the annotated corpus format."""
    ctx = ctx if ctx else RunContext()
    corpus = ingestion.adapt_factscore(factscore_path, model_id or "", logger=ctx.logger)
    out_dir = _parent_dir(out_path)
    ingestion.save_annotated(out_path, corpus)
    manifest = tables.RunManifest("adapt", ctx.snapshot())
    manifest.add_input(factscore_path)
    _finish(manifest, out_dir, [out_path])
    return corpus


def cmd_generate(entities_path, out_path, model_id=None, ctx=None):
    """One biography per entity, written as a generations file."""
    ctx = ctx if ctx else RunContext()
    entities = ingestion.load_entities(entities_path)
    model = ctx.model("generation_model", model_id)
    temperature = ctx.config.section("models").get("generation_temperature", 0.0)
    batch = ingestion.generate_bios(entities, model, ctx.gateway, ctx.config, temperature=temperature,
                                    logger=ctx.logger)

    out_dir = _parent_dir(out_path)
    ingestion.save_generations(out_path, batch.records)
    manifest = tables.RunManifest("generate", ctx.snapshot())
    manifest.add_input(entities_path)
    _finish(manifest, out_dir, [out_path])
    _check_failures("generate", len(batch.failures), len(entities.entities), ctx.logger)
    return batch


def cmd_filter(corpus_path, out_path, scan_chars=None, full_text=None, ctx=None):
    """Flags unresponsive generations; annotations, if any, are kept."""
    ctx = ctx if ctx else RunContext()
    filtering = ctx.config.section("filtering")
    full_text = filtering.get("full_text", False) if full_text is None else full_text
    scan_chars = scan_chars or filtering.get("scan_chars", ingestion.DEFAULT_SCAN_CHARS)

    corpus = ingestion.load_annotated(corpus_path, allow_unlabeled=True)
    records, stats = ingestion.apply_filters(corpus.records, scan_chars=None if full_text else scan_chars,
                                             logger=ctx.logger)
    out_dir = _parent_dir(out_path)
    ingestion.save_annotated(out_path, AnnotatedCorpus(tuple(records), corpus.claims, str(out_path)))
    manifest = tables.RunManifest("filter", ctx.snapshot())
    manifest.add_input(corpus_path)
    _finish(manifest, out_dir, [out_path])
    return stats


def cmd_decompose(corpus_path, out_path, model_id=None, ctx=None):
    """Splits every unfiltered generation into Unlabeled atomic claims."""
    ctx = ctx if ctx else RunContext()
    corpus = ingestion.load_annotated(corpus_path, allow_unlabeled=True)
    model = ctx.model("decomposition_model", model_id, fallback_key="judge_model")

    claims = []
    n_failed = n_sentences = 0
    for record in corpus.records:
        if record.filtered:
            continue
        found, failures = decompose_generation(record, ctx.gateway, model, ctx.config, logger=ctx.logger)
        claims.extend(found)
        n_failed += len(failures)
        n_sentences += record.sentence_count

    out_dir = _parent_dir(out_path)
    ingestion.save_annotated(out_path, AnnotatedCorpus(corpus.records, tuple(claims), str(out_path)))
    manifest = tables.RunManifest("decompose", ctx.snapshot())
    manifest.add_input(corpus_path)
    _finish(manifest, out_dir, [out_path])
    ctx.logger.info(f"Decomposed {n_sentences} sentences into {len(claims)} claims.")
    _check_failures("decompose", n_failed, n_sentences, ctx.logger)
    return claims


def cmd_qa(corpus_path, out_path, model_id=None, ctx=None):
    """Question-answer pairs for every claim that can be scored later (irrelevant claims skipped)."""
    ctx = ctx if ctx else RunContext()
    corpus = ingestion.load_annotated(corpus_path, allow_unlabeled=True)
    records, claims = _unfiltered(corpus)
    claims = [c for c in claims if c.label != ClaimLabel.IRRELEVANT]
    entities = {r.id: r.entity for r in records}
    model = ctx.model("qa_model", model_id, fallback_key="judge_model")
    derivation = derive_qa_batch(claims, entities, ctx.gateway, model, ctx.config, logger=ctx.logger)

    out_dir = _parent_dir(out_path)
    tables.write_qa_pairs(out_path, derivation.pairs)
    manifest = tables.RunManifest("qa", ctx.snapshot())
    manifest.add_input(corpus_path)
    _finish(manifest, out_dir, [out_path])
    return derivation


def read_qa_pairs(path):
    try:
        return {item["claim_id"]: QaPair(item["claim_id"], item["question"], item["answer"])
                for item in tables.read_jsonl(path)}
    except (KeyError, TypeError) as e:
        raise CorpusFormatError(f"not a QA table: {e}", path)


def _write_fliprate(out_dir, records):
    paths = [
        tables.write_csv(os.path.join(out_dir, "fliprate.csv"), tables.FLIPRATE_COLUMNS,
                         tables.fliprate_rows(records)),
        tables.write_json(os.path.join(out_dir, "fliprate.json"), tables.fliprate_payload(records)),
    ]
    chart = charts.FlipRateChart()
    chart.update_chart(records)
    chart.save(os.path.join(out_dir, "fliprate.svg"))
    return paths + [os.path.join(out_dir, "fliprate.svg")]


def cmd_judge(corpus_path, strategies, out_dir, model_id=None, qa_path=None, ctx=None):
    """
    Has the model judge its own Supported and Unsupported claims under each strategy.

    Per strategy, writes judgments_<strategy>.jsonl and selfscores_<strategy>.csv/.json;
    selfscores.svg draws all of them. With both QA strategies, fliprate.csv/.json/.svg too.

    :raises PartialFailureError: after writing, when more than 10% of judgments errored.
    """
    ctx = ctx if ctx else RunContext()
    strategies = [parse_strategy(s) if isinstance(s, str) else s for s in strategies]
    corpus = ingestion.load_annotated(corpus_path)
    records, claims = _unfiltered(corpus)
    scored = [c for c in claims if c.label in SCORED_LABELS]
    entities = {r.id: r.entity for r in records}

    qa_pairs = {}
    if any(s != JudgmentStrategy.DIRECT_ASKING for s in strategies):
        if not qa_path:
            raise ConfigError("The QA strategies need a QA table (--qa).")
        qa_pairs = read_qa_pairs(qa_path)

    judging = ctx.config.section("judging")
    manager = JudgeManager(ctx.gateway, ctx.model("judge_model", model_id), ctx.config,
                           votes=judging.get("votes", 1), vote_temperature=judging.get("vote_temperature", 0.7),
                           logger=ctx.logger)

    _out_dir(out_dir)
    manifest = tables.RunManifest("judge", ctx.snapshot())
    manifest.add_input(corpus_path)
    if qa_path:
        manifest.add_input(qa_path)

    outputs = []
    reports = {}
    judged = {}
    n_failed = n_total = 0
    for strategy in strategies:
        judgments, errors = manager.judge_many(scored, qa_pairs, entities, strategy)
        n_failed += len(errors)
        n_total += len(judgments) + len(errors)
        report = self_scores(records, claims, judgments)
        suffix = strategy.value
        outputs += [
            tables.write_judgments(os.path.join(out_dir, f"judgments_{suffix}.jsonl"), judgments),
            tables.write_csv(os.path.join(out_dir, f"selfscores_{suffix}.csv"), tables.SELFSCORE_COLUMNS,
                             tables.selfscore_rows(report)),
            tables.write_json(os.path.join(out_dir, f"selfscores_{suffix}.json"), tables.selfscore_payload(report)),
        ]
        reports[strategy] = report
        judged[strategy] = judgments

    chart = charts.SelfScoreChart()
    chart.update_chart(reports)
    chart.save(os.path.join(out_dir, "selfscores.svg"))
    outputs.append(os.path.join(out_dir, "selfscores.svg"))

    qa, noa = JudgmentStrategy.QUESTION_ANSWERING, JudgmentStrategy.QA_WITH_NOA
    if qa in judged and noa in judged:
        common = {j.claim_id for j in judged[qa]} & {j.claim_id for j in judged[noa]}
        b = [j for j in judged[qa] if j.claim_id in common]
        c = [j for j in judged[noa] if j.claim_id in common]
        if len(b) != len(judged[qa]) or len(c) != len(judged[noa]):
            ctx.logger.warning(f"Flip rate restricted to the {len(common)} claims judged under both strategies.")
        outputs += _write_fliprate(out_dir, flip_rate(b, c, records, claims))

    _finish(manifest, out_dir, outputs)
    _check_failures("judge", n_failed, n_total, ctx.logger)
    return reports


def cmd_fliprate(corpus_path, judgments_b_path, judgments_c_path, out_dir, ctx=None):
    """Flip rate between two judgment tables (QA, then QA with NOA) of the same claims."""
    ctx = ctx if ctx else RunContext()
    corpus = ingestion.load_annotated(corpus_path)
    records, claims = _unfiltered(corpus)
    records_b = tables.read_judgments(judgments_b_path)
    records_c = tables.read_judgments(judgments_c_path)
    result = flip_rate(records_b, records_c, records, claims)

    _out_dir(out_dir)
    manifest = tables.RunManifest("fliprate", ctx.snapshot())
    for path in (corpus_path, judgments_b_path, judgments_c_path):
        manifest.add_input(path)
    _finish(manifest, out_dir, _write_fliprate(out_dir, result))
    return result


def _estimates_name(selfscores_path):
    stem = os.path.splitext(os.path.basename(selfscores_path))[0]
    return stem.replace("selfscores", "estimates", 1) if stem.startswith("selfscores") else "estimates"


def cmd_estimate(selfscores_path, out_dir=None, ctx=None):
    """
    Estimated factuality per bucket from a self-score table.

    Buckets lacking a score are "absent", buckets with Self-Known + Self-Unknown = 2 are
    "degenerate"; neither is an error.
    """
    ctx = ctx if ctx else RunContext()
    rows = tables.read_selfscores(selfscores_path)
    pairs = [SelfScorePair(r.self_known, r.self_unknown)
             if r.self_known is not None and r.self_unknown is not None else None
             for r in rows]

    estimate_rows = []
    for row, estimate in zip(rows, estimate_per_bucket(pairs)):
        if estimate is None:
            status, sigma = tables.STATUS_ABSENT, None
        elif isinstance(estimate, DegenerateEstimateError):
            ctx.logger.warning(f"Bucket ({row.bucket_lo}, {row.bucket_hi}]: {estimate}")
            status, sigma = tables.STATUS_DEGENERATE, None
        else:
            status, sigma = tables.STATUS_OK, estimate.sigma
        estimate_rows.append(tables.EstimateRow(
            bucket_lo=row.bucket_lo,
            bucket_hi=row.bucket_hi,
            self_known=row.self_known,
            self_unknown=row.self_unknown,
            estimated_factuality=sigma,
            annotated_factuality=row.factuality,
            status=status,
        ))

    out_dir = _out_dir(out_dir or os.path.dirname(os.path.abspath(selfscores_path)))
    name = _estimates_name(selfscores_path)
    outputs = [
        tables.write_csv(os.path.join(out_dir, f"{name}.csv"), tables.ESTIMATE_COLUMNS,
                         tables.estimate_rows(estimate_rows)),
        tables.write_json(os.path.join(out_dir, f"{name}.json"), tables.estimate_payload(estimate_rows)),
    ]
    chart = charts.EstimatesChart()
    chart.update_chart(estimate_rows)
    chart.save(os.path.join(out_dir, f"{name}.svg"))
    outputs.append(os.path.join(out_dir, f"{name}.svg"))

    manifest = tables.RunManifest(f"estimate-{name}", ctx.snapshot())
    manifest.add_input(selfscores_path)
    _finish(manifest, out_dir, outputs)
    return estimate_rows


def cmd_simulate(n_claims=None, true_sigma=None, self_known=None, self_unknown=None, seed=None, out_path=None,
                 ctx=None):
    """
    Runs the claim-stream simulator; unset parameters come from the "simulate" config section.

    The JSON result goes to out_path, or to standard output.
    """
    ctx = ctx if ctx else RunContext()
    defaults = ctx.config.section("simulate")

    def pick(value, key):
        return defaults.get(key) if value is None else value

    cfg = SimulationConfig(
        n_claims=pick(n_claims, "n_claims"),
        true_sigma=pick(true_sigma, "true_sigma"),
        self_known=pick(self_known, "self_known"),
        self_unknown=pick(self_unknown, "self_unknown"),
        seed=pick(seed, "seed"),
    )
    payload = simulate_claim_stream(cfg).to_dict()
    if out_path:
        _parent_dir(out_path)
        tables.write_json(out_path, payload)
    else:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return payload


def cmd_stats(corpus_path, out_path=None, ctx=None):
    """
    Per-model corpus statistics: claims per unfiltered generation and filtered rate, one decimal each.

    :raises EmptyCorpusError: when the corpus has no generations.
    """
    ctx = ctx if ctx else RunContext()
    corpus = ingestion.load_annotated(corpus_path, allow_unlabeled=True)
    if not corpus.records:
        raise EmptyCorpusError(f"{corpus_path} has no generations.")

    claim_counts = Counter(c.generation_id for c in corpus.claims)
    frame = pd.DataFrame([
        {"model": r.model_id or "unknown", "filtered": r.filtered, "claims": claim_counts[r.id]}
        for r in corpus.records
    ])

    rows = []
    for model, group in frame.groupby("model", sort=True):
        kept = group[~group["filtered"]]
        rows.append({
            "model": model,
            "generations": len(group),
            "claims_per_gen": f"{kept['claims'].mean():.1f}" if len(kept) else "",
            "filtered_rate": f"{group['filtered'].mean() * 100:.1f}",
        })
    table = pd.DataFrame(rows, columns=list(STATS_COLUMNS))

    sys.stdout.write(table.to_string(index=False) + "\n")
    if out_path:
        _parent_dir(out_path)
        table.to_csv(out_path, index=False, lineterminator="\n")
    return table


def cmd_rag_index(docs_path, out_path, chunk_tokens=None, ctx=None):
    """Chunks a document corpus and saves its lexical index."""
    ctx = ctx if ctx else RunContext()
    chunk_tokens = chunk_tokens or ctx.config.section("rag").get("chunk_tokens", retrieval.MAX_CHUNK_TOKENS)
    if not 1 <= chunk_tokens <= retrieval.MAX_CHUNK_TOKENS:
        raise ConfigError(f"chunk_tokens must be between 1 and {retrieval.MAX_CHUNK_TOKENS}, got {chunk_tokens}.")
    docs = retrieval.load_corpus_docs(docs_path)
    index = retrieval.LexicalIndex(retrieval.chunk_corpus(docs, max_tokens=chunk_tokens), logger=ctx.logger)
    out_dir = _parent_dir(out_path)
    retrieval.save_index(out_path, index)
    ctx.logger.info(f"Indexed {len(docs)} documents as {len(index)} chunks.")
    manifest = tables.RunManifest("rag-index", ctx.snapshot())
    manifest.add_input(docs_path)
    _finish(manifest, out_dir, [out_path])
    return index


def cmd_rag_generate(entities_path, index_path, out_path, model_id=None, k=None, ctx=None):
    """Biographies written with retrieved passages in the prompt."""
    ctx = ctx if ctx else RunContext()
    k = k or ctx.config.section("rag").get("top_k", retrieval.DEFAULT_TOP_K)
    entities = ingestion.load_entities(entities_path)
    index = retrieval.load_index(index_path, logger=ctx.logger)
    model = ctx.model("generation_model", model_id)
    temperature = ctx.config.section("models").get("generation_temperature", 0.0)
    batch = retrieval.generate_rag_bios(entities, model, index, ctx.gateway, ctx.config, k=k,
                                        temperature=temperature, logger=ctx.logger)

    out_dir = _parent_dir(out_path)
    ingestion.save_generations(out_path, batch.records)
    manifest = tables.RunManifest("rag-generate", ctx.snapshot())
    manifest.add_input(entities_path)
    manifest.add_input(index_path)
    _finish(manifest, out_dir, [out_path])
    _check_failures("rag-generate", len(batch.failures), len(entities.entities), ctx.logger)
    return batch


def cmd_report(corpus_path, out_dir, model_id=None, ctx=None):
    """
    Whole analysis of an annotated corpus: buckets, QA derivation, judging under QA and
    QA with NOA, flip rate and estimated factuality.
    """
    ctx = ctx if ctx else RunContext()
    cmd_analyze(corpus_path, out_dir, ctx)
    qa_path = os.path.join(out_dir, "qa.jsonl")
    cmd_qa(corpus_path, qa_path, model_id, ctx)

    partial = None
    strategies = [JudgmentStrategy.QUESTION_ANSWERING, JudgmentStrategy.QA_WITH_NOA]
    try:
        cmd_judge(corpus_path, strategies, out_dir, model_id, qa_path, ctx)
    except PartialFailureError as e:
        partial = e

    for strategy in strategies:
        cmd_estimate(os.path.join(out_dir, f"selfscores_{strategy.value}.json"), out_dir, ctx)
    if partial:
        raise partial


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _ArgumentParser(prog="factcurve",
                             description="Factuality of long-form generations by relative position.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON config overlaid on the packaged defaults")
    parser.add_argument("--mode", choices=(RECORD, REPLAY), help="Gateway mode (default from config)")
    parser.add_argument("--cache-dir", help="Replay cache directory (overrides FACTCURVE_CACHE_DIR)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="Label fractions and claim counts per position bucket")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=lambda a, ctx: cmd_analyze(a.corpus, a.out, ctx))

    p = sub.add_parser("adapt", help="Convert FActScore-style annotations into the corpus format")
    p.add_argument("annotations")
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="Model id recorded on the generations")
    p.set_defaults(handler=lambda a, ctx: cmd_adapt(a.annotations, a.out, a.model, ctx))

    p = sub.add_parser("generate", help="Generate one biography per entity")
    p.add_argument("entities")
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.set_defaults(handler=lambda a, ctx: cmd_generate(a.entities, a.out, a.model, ctx))

    p = sub.add_parser("filter", help="Flag unresponsive generations")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--scan-chars", type=int)
    p.add_argument("--full-text", action="store_true", default=None)
    p.set_defaults(handler=lambda a, ctx: _print_filtered(cmd_filter(a.corpus, a.out, a.scan_chars, a.full_text, ctx)))

    p = sub.add_parser("decompose", help="Split generations into atomic claims")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.set_defaults(handler=lambda a, ctx: cmd_decompose(a.corpus, a.out, a.model, ctx))

    p = sub.add_parser("qa", help="Derive a question-answer pair per claim")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.set_defaults(handler=lambda a, ctx: cmd_qa(a.corpus, a.out, a.model, ctx))

    p = sub.add_parser("judge", help="Self-judgment of claims and Self-Known / Self-Unknown scores")
    p.add_argument("corpus")
    p.add_argument("--strategy", action="append", required=True,
                   help="direct, qa or qa_noa; repeat for several")
    p.add_argument("--qa", help="QA table written by the qa command")
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.set_defaults(handler=lambda a, ctx: cmd_judge(a.corpus, a.strategy, a.out, a.model, a.qa, ctx))

    p = sub.add_parser("fliprate", help="Flip rate from QA to QA with NOA")
    p.add_argument("corpus")
    p.add_argument("judgments_b")
    p.add_argument("judgments_c")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=lambda a, ctx: cmd_fliprate(a.corpus, a.judgments_b, a.judgments_c, a.out, ctx))

    p = sub.add_parser("estimate", help="Estimated factuality per bucket from self scores")
    p.add_argument("selfscores")
    p.add_argument("--out")
    p.set_defaults(handler=lambda a, ctx: cmd_estimate(a.selfscores, a.out, ctx))

    p = sub.add_parser("simulate", help="Claim-stream simulation of the estimator")
    p.add_argument("--n-claims", type=int)
    p.add_argument("--true-sigma", type=float)
    p.add_argument("--self-known", type=float)
    p.add_argument("--self-unknown", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(handler=lambda a, ctx: cmd_simulate(a.n_claims, a.true_sigma, a.self_known, a.self_unknown,
                                                       a.seed, a.out, ctx))

    p = sub.add_parser("stats", help="Claims per generation and filtered rate per model")
    p.add_argument("corpus")
    p.add_argument("--out")
    p.set_defaults(handler=lambda a, ctx: cmd_stats(a.corpus, a.out, ctx))

    p = sub.add_parser("rag-index", help="Chunk and index a document corpus")
    p.add_argument("docs")
    p.add_argument("--out", required=True)
    p.add_argument("--chunk-tokens", type=int)
    p.set_defaults(handler=lambda a, ctx: cmd_rag_index(a.docs, a.out, a.chunk_tokens, ctx))

    p = sub.add_parser("rag-generate", help="Biographies with retrieved passages in the prompt")
    p.add_argument("entities")
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.add_argument("-k", type=int)
    p.set_defaults(handler=lambda a, ctx: cmd_rag_generate(a.entities, a.index, a.out, a.model, a.k, ctx))

    p = sub.add_parser("report", help="Analyze, derive QA, judge, flip rate and estimate in one run")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.set_defaults(handler=lambda a, ctx: cmd_report(a.corpus, a.out, a.model, ctx))

    return parser


def _print_filtered(stats):
    sys.stdout.write(f"filtered {stats.filtered}/{stats.total} ({stats.filtered_rate_percent}%)\n")
    return stats


def main(argv=None):
    """Runs one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    set_verbosity(0 if args.verbose else 2 if args.quiet else 1)
    logger = setup_logger()

    try:
        config = ConfigLoader()
        if args.config:
            config = config.merged_with(args.config)
        ctx = RunContext(config, mode=args.mode, cache_dir=args.cache_dir, logger=logger)
        args.handler(args, ctx)
    except FactCurveError as e:
        logger.error(str(e))
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_DATA
    return EXIT_OK
