from typing import Sequence

import pandas as pd

from app.core.config import AppConfig
from app.core.exceptions import SceneGptError
from app.core.logger import get_logger
from app.models.evaluation import (
    CategoryCounts,
    EvalCase,
    EvalRecord,
    EvalReport,
    GroundTruthQuery,
    Layout,
    LexiconEntry,
    Outcome,
    SceneRecipe,
)
from app.models.query import DECIDABLE_CATEGORIES, PREDICATE_CATEGORIES, QueryCategory
from app.services.llm_service import CompletionRequest, LlmClient
from app.services.pipeline_service import PipelineResult, QueryPipeline
from app.services.prompt_service import ExampleLibrary, load_template
from app.services.scene_generation_service import generate_queries, generate_scene, load_lexicon
from app.services.spatial_oracle_service import answer_query_deterministic

logger = get_logger(__name__)

OUTCOME_COLUMNS = [outcome.value for outcome in Outcome]


def build_cases(
    seed: int,
    scene_count: int,
    node_count: int = 12,
    layout: Layout = Layout.MIXED,
    lexicon: list[LexiconEntry] | None = None,
    max_per_category: int = 2,
    categories: Sequence[QueryCategory] | None = None,
    caption_length: int = 0,
) -> list[EvalCase]:
    """
    Scene i is generated from seed + i, so a run is reproducible from its
    base seed alone.
    """
    lexicon = lexicon or load_lexicon()
    wanted = set(categories) if categories else None

    cases = []
    for i in range(scene_count):
        recipe = SceneRecipe(
            seed=seed + i, node_count=node_count, layout=layout, caption_length=caption_length,
        )
        generated = generate_scene(recipe, lexicon)
        queries = generate_queries(generated, lexicon, max_per_category)
        if wanted is not None:
            queries = [q for q in queries if q.category in wanted]
        cases.append(EvalCase(generated=generated, queries=tuple(queries)))
    return cases


def score_answer(query: GroundTruthQuery, result: PipelineResult) -> Outcome:
    """
    Retrieval: final id among the expected ids. Predicates: the verdict
    must match as well. Relative position: the relation set must match as
    well. Any grounding issue makes the answer ungrounded.
    """
    if result.issues:
        return Outcome.UNGROUNDED

    parsed = result.parsed
    correct = parsed.final_object_id is not None and parsed.final_object_id in query.expected_object_ids
    if query.category in PREDICATE_CATEGORIES:
        correct = correct and parsed.final_verdict == query.expected_verdict
    elif query.category == QueryCategory.RELATIVE_POSITION:
        correct = correct and set(parsed.final_relations) == set(query.expected_relations or ())
    return Outcome.CORRECT if correct else Outcome.INCORRECT


def _base_record(seed: int, query: GroundTruthQuery, case: EvalCase, config: AppConfig) -> dict:
    record = {
        "scene_seed": seed,
        "query_text": query.query_text,
        "category": query.category,
        "expected_object_ids": query.expected_object_ids,
        "expected_verdict": query.expected_verdict,
        "expected_relations": query.expected_relations,
    }
    if query.category in DECIDABLE_CATEGORIES:
        try:
            answer = answer_query_deterministic(case.generated.scene, query.structured, config.oracle)
            record["oracle_answer"] = answer.summary
            record["oracle_object_id"] = answer.answer_object_id
        except SceneGptError as e:
            record["oracle_answer"] = f"oracle error: {e}"
    return record


def _record_from_result(base: dict, query: GroundTruthQuery, result: PipelineResult) -> EvalRecord:
    parsed = result.parsed
    return EvalRecord(
        **base,
        answer_object_id=parsed.final_object_id,
        answer_verdict=parsed.final_verdict,
        answer_relations=parsed.final_relations,
        grounding_issues=tuple(issue.describe() for issue in result.issues),
        outcome=score_answer(query, result),
        raw_response=result.raw_response,
        prompt_tokens=result.prompt.token_estimate,
    )


def _failed_record(base: dict, error: Exception, raw: str | None = None, tokens: int | None = None) -> EvalRecord:
    return EvalRecord(
        **base,
        outcome=Outcome.UNPARSEABLE,
        raw_response=raw,
        error=f"{type(error).__name__}: {error}",
        prompt_tokens=tokens,
    )


def summarize(records: list[EvalRecord]) -> tuple[dict[str, CategoryCounts], CategoryCounts]:
    if not records:
        return {}, CategoryCounts()

    frame = pd.DataFrame(
        [{"category": r.category.value, "outcome": r.outcome.value} for r in records],
        columns=["category", "outcome"],
    )
    counts = pd.crosstab(frame["category"], frame["outcome"]).reindex(columns=OUTCOME_COLUMNS, fill_value=0)

    per_category = {
        category.value: CategoryCounts(**{col: int(counts.at[category.value, col]) for col in OUTCOME_COLUMNS})
        for category in QueryCategory
        if category.value in counts.index
    }
    overall = CategoryCounts(**{col: int(counts[col].sum()) for col in OUTCOME_COLUMNS})
    return per_category, overall


def run_eval(
    cases: Sequence[EvalCase],
    client: LlmClient,
    config: AppConfig | None = None,
    seed: int = 0,
    library: ExampleLibrary | None = None,
) -> EvalReport:
    """
    Runs every query of every case through the full pipeline and scores it.
    Per-record failures end up in the record; nothing here aborts the run.
    """
    config = config or AppConfig()
    library = library or ExampleLibrary.default(config.examples_path)
    template = load_template(config.template_path)

    records: list[EvalRecord] = []
    for case in cases:
        pipeline = QueryPipeline(case.generated.scene, client, config, library, template)
        scene_seed = case.generated.recipe.seed

        # ---------- Build prompts ----------
        pending: list[tuple[GroundTruthQuery, dict, CompletionRequest]] = []
        slots: list[EvalRecord | None] = []
        for query in case.queries:
            base = _base_record(scene_seed, query, case, config)
            try:
                request = pipeline.prepare(query.query_text, query.structured)
            except SceneGptError as e:
                slots.append(_failed_record(base, e))
                continue
            pending.append((query, base, request))
            slots.append(None)

        # ---------- Complete and score ----------
        responses = client.complete_many([request for _, _, request in pending])
        finished = []
        for (query, base, request), response in zip(pending, responses):
            tokens = request.prompt.token_estimate
            if isinstance(response, Exception):
                finished.append(_failed_record(base, response, tokens=tokens))
                continue
            try:
                result = pipeline.finish(request, response)
            except SceneGptError as e:
                finished.append(_failed_record(base, e, raw=response, tokens=tokens))
                continue
            finished.append(_record_from_result(base, query, result))

        it = iter(finished)
        records.extend(slot if slot is not None else next(it) for slot in slots)

    per_category, overall = summarize(records)
    report = EvalReport(
        backend=client.backend.name,
        seed=seed,
        scene_count=len(cases),
        per_category=per_category,
        overall=overall,
        records=records,
    )
    logger.info(
        "Evaluated %d queries over %d scenes: %d correct (%.1f%%)",
        overall.total, len(cases), overall.correct, 100 * report.accuracy,
    )
    return report
