"""
CPMask Base Model
"""
import numbers
import re

from typeguard import check_type
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Tuple,
    Union
)


ModelData = Union[dict, list, "BaseModel"]


class BaseModel:
    """
    Typed record with slot-declared fields
    Every assignment runs the optional `check_<field>` validator, coerces plain
    numbers to the annotated numeric type and is verified with typeguard
    """
    _defaults: Dict[str, Any] = {}
    _hints_cache: Dict[type, Dict[str, Any]] = {}

    def __init__(self, data: ModelData = None, silent: bool = False, **kwargs):
        if isinstance(data, BaseModel):
            data = data.dict()
        values, errs = init_model(self, data or {}, **kwargs)
        if errs and not silent:
            raise errs[0]

        for k, v in self._defaults.items():
            if k not in values:
                values[k] = v() if callable(v) else v

        for k in self.__slots__:
            if k in values:
                setattr(self, k, values[k])

    def __setattr__(self, key: str, val: Any) -> None:
        if key in self.__slots__ or key.startswith("_"):
            if hasattr(self, f"check_{key}"):
                val = getattr(self, f"check_{key}")(val)
            hint = type(self).field_hints().get(key, Any)
            val = _coerce(hint, val)
            if not isinstance(hint, str):
                check_type(key, val, hint)
            object.__setattr__(self, key, val)
        else:
            raise AttributeError(f"{self.__class__.__name__}.{key} is not a valid attribute that can be set by a user")

    def __contains__(self, key: str) -> bool:
        return key in self.__slots__ and hasattr(self, key)

    def __repr__(self) -> str:
        fields = ", ".join(f"{k}={v!r}" for k, v in self.items() if not hasattr(v, "shape"))
        return f"{self.__class__.__name__}({fields})"

    @classmethod
    def field_hints(cls) -> Dict[str, Any]:
        """
        Collect the field annotations of the class and its bases
        :return: field name -> annotation
        """
        if cls not in BaseModel._hints_cache:
            hints = {}
            for klass in reversed(cls.__mro__):
                hints.update(getattr(klass, "__annotations__", {}))
            BaseModel._hints_cache[cls] = hints
        return BaseModel._hints_cache[cls]

    def dict(self) -> dict:
        """
        Create a dictionary of the current object
        :return: dict value of the object
        """
        return {attr: getattr(self, attr) for attr in self.__slots__ if hasattr(self, attr)}

    def get(self, attr: str, default: Any = None) -> Any:
        """
        Emulate a dictionary get method
        :param attr: attribute to get the value
        :param default: default value if attribute does not exist
        :return: value of attribute/default/None
        """
        return getattr(self, attr, default) if attr in self.__slots__ else default

    def items(self) -> tuple:
        """
        Emulate a dictionary items method
        :return: tuple of tuples - (KEY, VALUE)
        """
        return tuple((k, v) for k, v in self.dict().items())

    def keys(self) -> tuple:
        """
        Emulate a dictionary keys method
        :return: tuple of valid attributes of the class
        """
        return tuple(attr for attr in self.__slots__ if hasattr(self, attr))


def _coerce(hint: Any, val: Any) -> Any:
    """
    Coerce numpy/builtin numbers to the annotated numeric type
    :param hint: field annotation
    :param val: value being assigned
    :return: coerced value
    """
    if isinstance(val, bool) or not isinstance(val, numbers.Number):
        return val
    args = getattr(hint, "__args__", None) or ()
    targets = (hint, *args)
    if float in targets and isinstance(val, numbers.Real):
        return float(val)
    if int in targets and isinstance(val, numbers.Integral):
        return int(val)
    return val


def init_model(model: BaseModel, input_data: ModelData, silent: bool = True, **kwargs) -> Tuple[dict, Optional[List[Exception]]]:
    """
    Validate data against a model
    :param model: model class the data is being validated against
    :param input_data: data to validate
    :param silent: bool - raise or return errors
    :return: validated fields, OPTIONAL(ERRORS)
    """
    model_class = model.__class__.__name__
    input_data = dict(zip(model.__slots__, input_data)) if isinstance(input_data, (list, tuple)) else dict(input_data)
    input_data.update({k: v for k, v in kwargs.items() if k in model.__slots__})
    fields = {k: v for k, v in kwargs.items() if re.match(r"^_[^_]", k)}
    errors = []

    for var, val in input_data.items():
        try:
            if var not in model.__slots__:
                raise KeyError(f"{model_class} has extra keys - {var}")
        except KeyError as e:
            if silent:
                errors.append(e)
                continue
            raise e
        fields[var] = val

    return fields, errors
