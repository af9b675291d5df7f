from pathlib import Path

import pytest

from app.core.config import OracleConfig
from app.models.prompt_bundle import PromptBundle
from app.models.scene_graph import ObjectNode, SceneGraph
from app.services.llm_service import CompletionRequest
from app.services.scene_service import load_scene_file
from app.services.scene_generation_service import load_lexicon

DATA_DIR = Path(__file__).parent / "data"


def make_node(node_id: int, tag: str, center, extent, **fields) -> ObjectNode:
    return ObjectNode(id=node_id, object_tag=tag, bbox_center=list(center), bbox_extent=list(extent), **fields)


def make_request(query: str, scene: SceneGraph | None = None, structured=None) -> CompletionRequest:
    prompt = PromptBundle(system_text=f"system prompt for: {query}", user_text=query, token_estimate=10)
    return CompletionRequest(prompt=prompt, scene=scene, structured_query=structured)


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def listing1_path() -> Path:
    return DATA_DIR / "listing1_scene.json"


@pytest.fixture
def couch_pillow_path() -> Path:
    return DATA_DIR / "couch_pillow_scene.json"


@pytest.fixture
def listing1_scene(listing1_path) -> SceneGraph:
    return load_scene_file(listing1_path)


@pytest.fixture
def couch_pillow_scene(couch_pillow_path) -> SceneGraph:
    return load_scene_file(couch_pillow_path)


@pytest.fixture
def couch(couch_pillow_scene) -> ObjectNode:
    return couch_pillow_scene.node(28)


@pytest.fixture
def pillow(couch_pillow_scene) -> ObjectNode:
    return couch_pillow_scene.node(27)


@pytest.fixture
def oracle_cfg() -> OracleConfig:
    return OracleConfig()


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(autouse=True)
def no_user_config(monkeypatch, tmp_path):
    # keep a real ~/.config/scenegpt/config.json out of the tests
    monkeypatch.setattr("app.core.config.DEFAULT_CONFIG_PATH", tmp_path / "no-config.json")
    monkeypatch.delenv("SCENEGPT_API_KEY", raising=False)
    monkeypatch.delenv("SCENEGPT_API_URL", raising=False)
