from pathlib import Path

APP_ROOT = Path(__file__).resolve().parent.parent
RESOURCE_PATH = APP_ROOT / "resources"

SYSTEM_PROMPT_PATH = RESOURCE_PATH / "system_prompt.txt"
IN_CONTEXT_EXAMPLES_PATH = RESOURCE_PATH / "in_context_examples.json"
TAG_LEXICON_PATH = RESOURCE_PATH / "tag_lexicon.json"

REPORT_STORAGE_PATH = "app/storage/reports"
DEFAULT_CONFIG_PATH = Path("~/.config/scenegpt/config.json").expanduser()

# canonical key order for written scenes
NODE_FIELDS = (
    "id",
    "bbox_extent",
    "bbox_center",
    "object_tag",
    "caption",
    "color",
    "material",
)
REQUIRED_NODE_FIELDS = ("id", "bbox_extent", "bbox_center", "object_tag")
ATTRIBUTE_FIELDS = ("color", "material")

DEFAULT_TOKEN_BUDGET = 16000
DEFAULT_MODEL_NAME = "gpt-4-16k"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
CHARS_PER_TOKEN = 4
MAX_RELEVANT_OBJECTS = 2

ENV_API_KEY = "SCENEGPT_API_KEY"
ENV_API_URL = "SCENEGPT_API_URL"

# CLI exit codes
EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_UNPARSEABLE = 3
