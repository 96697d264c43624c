"""Trainer exception ladder.

The trainer is a standalone package: it shares file formats with the
inference package but not code, so it carries its own small error set.
"""

from __future__ import annotations


class TrainerError(Exception):
    """Base class for all trainer failures."""


class ConfigError(TrainerError, ValueError):
    """Bad preset, mode, hyperparameter, or descriptor."""


class DataError(TrainerError):
    """Unreadable or inconsistent manifest, WAV, or weight file."""


class DivergenceError(TrainerError):
    """Training produced a non-finite loss; carries diagnostics.

    ``diagnostics`` holds the global step, epoch, learning rate, and the
    most recent finite losses so the abort is actionable.
    """

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = dict(diagnostics)
