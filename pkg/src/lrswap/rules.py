"""Rule types for the same-species and cross-species interaction."""

import enum

from .errors import InvalidParameterError


class RuleType(str, enum.Enum):
    DROP_PUSH = "drop-push"
    TASEP = "tasep"
    NON_INTEGRABLE = "non-integrable"

    @property
    def integrable(self) -> bool:
        return self is not RuleType.NON_INTEGRABLE

    @classmethod
    def parse(cls, value) -> "RuleType":
        if isinstance(value, RuleType):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "droppush": cls.DROP_PUSH,
            "droppushtype": cls.DROP_PUSH,
            "tasep": cls.TASEP,
            "taseptype": cls.TASEP,
            "nonintegrable": cls.NON_INTEGRABLE,
            "nonintegrablealt": cls.NON_INTEGRABLE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise InvalidParameterError(f"unknown rule type {value!r}") from None

    def __str__(self) -> str:
        return self.value
