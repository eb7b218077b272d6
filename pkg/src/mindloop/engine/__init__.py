"""Session orchestration: game, streaming pipeline, protocols, service."""

from .game import Command, GameConfig, GameState, chase_policy, game_step, new_game
from .pipeline import (
    TRANSIENT_S,
    CommandSmoother,
    FramePredictor,
    PipelineConfig,
    SignalPipeline,
    command_from_prediction,
)
from .sessions import (
    DemoMetrics,
    ExternalDriver,
    PilotDriver,
    SampleIterSource,
    ScriptDriver,
    SessionPlan,
    SessionRunner,
    ValidationRow,
    open_block_source,
)
from .server import EngineService, create_app, serve

__all__ = [name for name in dir() if not name.startswith("_")]
