"""The four command classes and their fixed integer encoding."""

from __future__ import annotations

import enum


class ClassLabel(enum.IntEnum):
    """Key-state classes. The encoding is part of the file formats: do not reorder."""

    NONE = 0
    LEFT = 1
    RIGHT = 2
    BOTH = 3

    @property
    def includes_left(self) -> bool:
        return self in (ClassLabel.LEFT, ClassLabel.BOTH)

    @property
    def includes_right(self) -> bool:
        return self in (ClassLabel.RIGHT, ClassLabel.BOTH)

    @staticmethod
    def from_keys(left_down: bool, right_down: bool) -> "ClassLabel":
        if left_down and right_down:
            return ClassLabel.BOTH
        if left_down:
            return ClassLabel.LEFT
        if right_down:
            return ClassLabel.RIGHT
        return ClassLabel.NONE


N_CLASSES = len(ClassLabel)
