"""
Settings container: dataclass fields bound to HYDRANA_* environment variables
"""
import os
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Optional, Sequence, Union, get_args, get_origin, get_type_hints

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def Attr(
    *,
    default: Any = ...,
    default_factory: Optional[Callable[[], Any]] = None,
    env: str = "",
    choices: Optional[Sequence[str]] = None,
):
    """
    Dataclass field with an environment binding

    :param env: str, variable overriding the default, '' for none
    :param choices: Optional[Sequence[str]], accepted values of a str field
    """
    metadata = {"env": env, "choices": tuple(choices) if choices else None}

    if default is not ... and default_factory is not None:
        raise ValueError("Cannot specify both 'default' and 'default_factory'")

    if default is not ...:
        return field(default=default, metadata=metadata)
    elif default_factory is not None:
        return field(default_factory=default_factory, metadata=metadata)
    else:
        return field(metadata=metadata)


@dataclass
class EnvLoadable:
    @classmethod
    def load_from_env(cls, environ: Optional[dict] = None):
        """
        Build an instance, overriding defaults from environment variables

        :param environ: Optional[dict], mapping to read instead of os.environ
        :returns: instance of cls
        :raises ValueError: if a variable does not parse as its field type or
            is not one of the field's choices
        """
        environ = os.environ if environ is None else environ
        kwargs = {}
        type_hints = get_type_hints(cls)
        for f in fields(cls):
            env_var = f.metadata.get("env")
            if not env_var or env_var not in environ:
                continue
            raw = environ[env_var]
            try:
                value = _convert(raw, type_hints[f.name])
            except ValueError:
                raise ValueError(f"{env_var}={raw!r} is not a valid {_type_name(type_hints[f.name])}") from None
            choices = f.metadata.get("choices")
            if choices and value not in choices:
                raise ValueError(f"{env_var}={raw!r}, expected one of {list(choices)}")
            kwargs[f.name] = value
        return cls(**kwargs)


def _unwrap_optional(target_type):
    if get_origin(target_type) is Union:
        args = [t for t in get_args(target_type) if t is not type(None)]
        if len(args) == 1:
            return args[0]
    return target_type


def _type_name(target_type) -> str:
    target_type = _unwrap_optional(target_type)
    return getattr(target_type, "__name__", str(target_type))


def _convert(value: str, target_type):
    target_type = _unwrap_optional(target_type)
    if target_type is bool:
        lowered = value.strip().lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(value)
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    return value
