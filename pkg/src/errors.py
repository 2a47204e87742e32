"""Root exception types shared by the library modules and the CLI."""

from __future__ import annotations

from typing import Iterable, List


class ConfigError(Exception):
    """Invalid user input. Carries one message per offending field."""

    def __init__(self, errors: Iterable[str] | str):
        if isinstance(errors, str):
            errors = [errors]
        self.errors: List[str] = list(errors)
        super().__init__("; ".join(self.errors))


class NumericalError(Exception):
    pass
