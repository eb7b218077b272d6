"""The falling-box game the participant plays.

One red bar slides along the bottom; one blue box falls at a time. A
catch increments score and streak and respawns the box at a uniformly
random column; a box reaching the floor resets the streak. Physics are
deterministic given the spawn RNG, which keeps scripted runs replayable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..labels import ClassLabel


@dataclass(frozen=True)
class GameConfig:
    field_width: float = 800.0
    field_height: float = 600.0
    bar_width: float = 150.0
    bar_height: float = 20.0
    bar_speed: float = 300.0   # units/s
    box_size: float = 40.0
    box_fall_speed: float = 150.0  # units/s
    tick_rate: float = 60.0

    def __post_init__(self):
        for name in ("field_width", "field_height", "bar_width", "bar_height",
                     "bar_speed", "box_size", "box_fall_speed", "tick_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.bar_width >= self.field_width:
            raise ValueError("bar must be narrower than the field")

    @property
    def bar_top(self) -> float:
        return self.field_height - self.bar_height

    @property
    def tick_dt(self) -> float:
        return 1.0 / self.tick_rate


@dataclass(frozen=True)
class Command:
    """One movement command plus where it came from (for audit)."""

    label: ClassLabel
    source: str  # "keys" | "model"

    @staticmethod
    def none(source: str = "keys") -> "Command":
        return Command(label=ClassLabel.NONE, source=source)


@dataclass(frozen=True)
class GameState:
    bar_x: float          # bar center
    box_x: float          # box center
    box_y: float          # box TOP edge; bottom is box_y + box_size
    score: int = 0
    misses: int = 0
    streak: int = 0
    max_streak: int = 0
    t: float = 0.0


def new_game(cfg: GameConfig, rng: np.random.Generator) -> GameState:
    return GameState(bar_x=cfg.field_width / 2.0,
                     box_x=_spawn_x(cfg, rng), box_y=0.0)


def _spawn_x(cfg: GameConfig, rng: np.random.Generator) -> float:
    half = cfg.box_size / 2.0
    return float(rng.uniform(half, cfg.field_width - half))


def game_step(cfg: GameConfig, state: GameState, cmd: Command, dt: float,
              rng: np.random.Generator) -> GameState:
    """Advance the world by dt seconds under one held command.

    LEFT/RIGHT slide the bar (clamped to the field); NONE and BOTH leave
    it still. The box falls; catching it means its bottom crossed the
    bar top while the two horizontally overlap.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    half_bar = cfg.bar_width / 2.0
    move = {ClassLabel.LEFT: -1.0, ClassLabel.RIGHT: 1.0}.get(cmd.label, 0.0)
    bar_x = min(max(state.bar_x + move * cfg.bar_speed * dt, half_bar),
                cfg.field_width - half_bar)

    box_y = state.box_y + cfg.box_fall_speed * dt
    box_x = state.box_x
    score, misses = state.score, state.misses
    streak, max_streak = state.streak, state.max_streak

    bottom = box_y + cfg.box_size
    overlap = abs(box_x - bar_x) <= (half_bar + cfg.box_size / 2.0)
    if bottom >= cfg.bar_top and overlap:
        score += 1
        streak += 1
        max_streak = max(max_streak, streak)
        box_x, box_y = _spawn_x(cfg, rng), 0.0
    elif bottom >= cfg.field_height:
        misses += 1
        streak = 0
        box_x, box_y = _spawn_x(cfg, rng), 0.0

    return GameState(bar_x=bar_x, box_x=box_x, box_y=box_y, score=score,
                     misses=misses, streak=streak, max_streak=max_streak,
                     t=state.t + dt)


def chase_policy(state: GameState, deadband: float = 20.0) -> ClassLabel:
    """The intent an attentive player would have: steer under the box."""
    delta = state.box_x - state.bar_x
    if delta < -deadband:
        return ClassLabel.LEFT
    if delta > deadband:
        return ClassLabel.RIGHT
    return ClassLabel.NONE
