from pydantic import BaseModel, ConfigDict

from app.core.config import AppConfig
from app.core.logger import get_logger
from app.models.parsed_response import GroundingIssue, ParsedResponse
from app.models.prompt_bundle import PromptBundle
from app.models.query import StructuredQuery
from app.models.scene_graph import SceneGraph
from app.services.llm_service import CompletionRequest, LlmClient
from app.services.prompt_service import ExampleLibrary, build_prompt, load_template
from app.services.query_interpretation_service import detect_category
from app.services.response_parsing_service import parse_response, validate_grounding
from app.services.scene_service import SerializeOptions

logger = get_logger(__name__)


class PipelineResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    query: str
    prompt: PromptBundle
    raw_response: str
    parsed: ParsedResponse
    issues: tuple[GroundingIssue, ...] = ()

    @property
    def grounded(self) -> bool:
        return not self.issues and self.parsed.final_object_id is not None


class QueryPipeline:
    """
    build prompt -> complete -> parse -> validate grounding, one query at a
    time. Nothing is carried over between queries.
    """

    def __init__(
        self,
        scene: SceneGraph,
        client: LlmClient,
        config: AppConfig | None = None,
        library: ExampleLibrary | None = None,
        template: str | None = None,
    ):
        self.scene = scene
        self.client = client
        self.config = config or AppConfig()
        self.library = library or ExampleLibrary.default(self.config.examples_path)
        self.template = template if template is not None else load_template(self.config.template_path)

    def prepare(self, query: str, structured: StructuredQuery | None = None) -> CompletionRequest:
        category = structured.category if structured else detect_category(query)
        prompt = build_prompt(
            self.scene,
            query,
            self.library.select_examples(category),
            budget=self.config.token_budget,
            template=self.template,
            opts=SerializeOptions(precision=self.config.precision),
        )
        return CompletionRequest(prompt=prompt, scene=self.scene, structured_query=structured)

    def finish(self, request: CompletionRequest, response_text: str) -> PipelineResult:
        parsed = parse_response(response_text, strict=self.config.strict_parse)
        issues = validate_grounding(parsed, self.scene)
        if issues:
            logger.info("Answer to %r has %d grounding issue(s)", request.prompt.user_text, len(issues))
        return PipelineResult(
            query=request.prompt.user_text,
            prompt=request.prompt,
            raw_response=response_text,
            parsed=parsed,
            issues=tuple(issues),
        )

    def ask(self, query: str, structured: StructuredQuery | None = None) -> PipelineResult:
        request = self.prepare(query, structured)
        return self.finish(request, self.client.complete(request))
