"""
Shape and texture registries
"""
from functools import partial
from typing import Callable, Optional, Union

from .. import utils

registered = utils.FrozenDict(
    shapes=utils.FrozenDict(),
    textures=utils.FrozenDict(),
)


def register(kind: str, name: Union[str, Callable, None] = None, override: bool = False):
    def wrapper(cls: Callable, name: Optional[str] = name, override: bool = override):
        global registered  # pylint: disable=global-statement
        if not hasattr(cls, "name"):
            raise AttributeError(f"{cls.__name__} requires attribute 'name'")
        name = name or cls.name
        current = registered[kind].get(name, None)

        if current and (type(current) is not cls and not override):
            raise TypeError(f"{kind[:-1].title()} {name} already has an implementation")

        thawed = utils.toThawed(registered)
        thawed[kind][name] = cls()
        registered = utils.toFrozen(thawed)
        return cls

    return wrapper if isinstance(name, str) or name is None else wrapper(name, name=None)


register_shape = partial(register, "shapes")
register_texture = partial(register, "textures")


def shapes() -> utils.FrozenDict:
    return registered.shapes


def textures() -> utils.FrozenDict:
    return registered.textures
