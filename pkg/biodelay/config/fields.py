"""
biodelay Config Fields

Typed, range-checked field descriptors for run-configuration sections.
"""

import logging
import math
from typing import Any, Dict, Generic, Optional, Sequence, Tuple, TypeVar, cast

logger = logging.getLogger(__name__)

T = TypeVar("T")

_MISSING = object()


class ValidationError(Exception):
    """Raised when a configuration value fails validation."""

    def __init__(self, field_name: str, message: str, value: Any = None, code: Optional[str] = None):
        self.field_name = field_name
        self.message = message
        self.value = value
        self.code = code or "invalid"
        super().__init__(f"{field_name}: {message}")

    def nested(self, prefix: str) -> "ValidationError":
        """Same error with the field name qualified by its enclosing section."""
        return ValidationError(f"{prefix}.{self.field_name}", self.message, self.value, self.code)


class FieldDescriptor:
    """Descriptor exposing a section's validated value as an attribute."""

    def __init__(self, field: "Field"):
        self.field = field

    def __get__(self, instance: Any, owner: Any) -> Any:
        if instance is None:
            return self.field
        return instance._data.get(self.field.name)

    def __set__(self, instance: Any, value: Any) -> None:
        raise AttributeError(f"configuration field '{self.field.name}' is read-only")


class Field(Generic[T]):
    """
    Base field: default or required, null handling and an optional set of choices.
    """

    error_messages: Dict[str, str] = {
        "required": "missing required value",
        "null": "null is not allowed here",
        "invalid": "unsupported value",
    }

    def __init__(
        self,
        default: Any = _MISSING,
        null: bool = False,
        choices: Optional[Sequence[Any]] = None,
    ):
        self.default = default
        self.null = null
        self.choices = list(choices) if choices is not None else None
        self.name: Optional[str] = None  # Set by metaclass

    @property
    def required(self) -> bool:
        return self.default is _MISSING

    def get_default(self) -> Any:
        if callable(self.default):
            return self.default()
        return self.default

    def _error(self, message: str, value: Any, code: str) -> ValidationError:
        return ValidationError(self.name or "field", message, value, code)

    def validate(self, value: Any) -> T:
        """
        Validate and convert a raw JSON value.

        Raises:
            ValidationError: If validation fails
        """
        if value is None:
            if not self.null:
                raise self._error(self.error_messages["null"], value, "null")
            return cast(T, None)

        try:
            value = self._validate_type(value)
        except (ValueError, TypeError) as e:
            raise self._error(str(e) or self.error_messages["invalid"], value, "invalid")

        if self.choices is not None and value not in self.choices:
            raise self._error(f"expected one of {self.choices}", value, "invalid_choice")

        return cast(T, value)

    def _validate_type(self, value: Any) -> Any:
        """Coerce a JSON value to the field type; ValueError or TypeError on mismatch."""
        return value


class FloatField(Field[float]):
    """Finite number with optional (exclusive) bounds."""

    def __init__(
        self,
        min_value: Optional[float] = None,
        max_value: Optional[float] = None,
        exclusive_min: bool = False,
        exclusive_max: bool = False,
        **kwargs: Any,
    ):
        self.min_value = min_value
        self.max_value = max_value
        self.exclusive_min = exclusive_min
        self.exclusive_max = exclusive_max
        super().__init__(**kwargs)

    def _validate_type(self, value: Any) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected a number, got {type(value).__name__}")
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("must be finite")
        if self.min_value is not None:
            below = value <= self.min_value if self.exclusive_min else value < self.min_value
            if below:
                op = ">" if self.exclusive_min else ">="
                raise ValueError(f"must be {op} {self.min_value}, got {value}")
        if self.max_value is not None:
            above = value >= self.max_value if self.exclusive_max else value > self.max_value
            if above:
                op = "<" if self.exclusive_max else "<="
                raise ValueError(f"must be {op} {self.max_value}, got {value}")
        return value


class IntegerField(Field[int]):
    def __init__(
        self, min_value: Optional[int] = None, max_value: Optional[int] = None, **kwargs: Any
    ):
        self.min_value = min_value
        self.max_value = max_value
        super().__init__(**kwargs)

    def _validate_type(self, value: Any) -> int:
        if isinstance(value, bool):
            raise ValueError("expected an integer, got bool")
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError("expected a whole number")
            value = int(value)
        elif not isinstance(value, int):
            raise ValueError(f"expected an integer, got {type(value).__name__}")
        if self.min_value is not None and value < self.min_value:
            raise ValueError(f"must be >= {self.min_value}, got {value}")
        if self.max_value is not None and value > self.max_value:
            raise ValueError(f"must be <= {self.max_value}, got {value}")
        return value


class BooleanField(Field[bool]):
    def _validate_type(self, value: Any) -> bool:
        if not isinstance(value, bool):
            raise ValueError(f"expected true or false, got {type(value).__name__}")
        return value


class StringField(Field[str]):
    def _validate_type(self, value: Any) -> str:
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {type(value).__name__}")
        return value


class ListField(Field[list]):
    """Homogeneous list validated item by item."""

    def __init__(self, item_field: Field, min_length: int = 0, **kwargs: Any):
        self.item_field = item_field
        self.min_length = min_length
        super().__init__(**kwargs)

    def _validate_type(self, value: Any) -> list:
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"expected a list, got {type(value).__name__}")
        if len(value) < self.min_length:
            raise ValueError(f"expected at least {self.min_length} item(s)")
        self.item_field.name = self.name
        return [self.item_field.validate(item) for item in value]


class IntervalField(Field[Tuple[float, float]]):
    """
    Two-element [lower, upper] with lower < upper.

    A closed interval also admits lower == upper, for inclusive integer
    ranges that may hold a single value.
    """

    def __init__(self, item_field: Optional[Field] = None, closed: bool = False, **kwargs: Any):
        self.item_field = item_field or FloatField()
        self.closed = closed
        super().__init__(**kwargs)

    def _validate_type(self, value: Any) -> Tuple[Any, Any]:
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ValueError("expected a [lower, upper] pair")
        self.item_field.name = self.name
        lower, upper = (self.item_field.validate(v) for v in value)
        if lower > upper or (lower == upper and not self.closed):
            raise ValueError(f"lower bound {lower} must be below upper bound {upper}")
        return lower, upper


class MappingField(Field[dict]):
    """String-keyed mapping with validated values and an optional key whitelist."""

    def __init__(
        self, value_field: Field, keys: Optional[Sequence[str]] = None, **kwargs: Any
    ):
        self.value_field = value_field
        self.keys = list(keys) if keys is not None else None
        super().__init__(**kwargs)

    def _validate_type(self, value: Any) -> dict:
        if not isinstance(value, dict):
            raise ValueError(f"expected an object, got {type(value).__name__}")
        result = {}
        for key, item in value.items():
            if self.keys is not None and key not in self.keys:
                raise ValueError(f"Unknown key '{key}'; expected one of {self.keys}")
            self.value_field.name = f"{self.name}.{key}"
            result[key] = self.value_field.validate(item)
        return result


class SectionField(Field[Any]):
    """
    Nested section; the class may be given lazily for recursive schemas.
    """

    def __init__(self, section: Any, **kwargs: Any):
        self._section = section
        super().__init__(**kwargs)

    @property
    def section_class(self) -> Any:
        from .schema import Section

        if isinstance(self._section, type) and issubclass(self._section, Section):
            return self._section
        return self._section()

    def _validate_type(self, value: Any) -> Any:
        if not isinstance(value, dict):
            raise ValueError(f"expected an object, got {type(value).__name__}")
        try:
            return self.section_class.from_dict(value)
        except ValidationError as e:
            raise e.nested(self.name or "section") from e
