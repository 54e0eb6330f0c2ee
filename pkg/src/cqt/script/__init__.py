"""The .cqp protocol language: parser, canonical printer and interpreter."""

from importlib import resources

from .ast import ProtocolScript, format_script, script_params
from .interpreter import RunReport, ScriptRuntimeError, execute_script
from .lexer import LexError, ScriptError
from .parser import DuplicateCavityError, ParseError, UndeclaredLabelError, parse_script

__all__ = [
    "DuplicateCavityError",
    "LexError",
    "ParseError",
    "ProtocolScript",
    "RunReport",
    "ScriptError",
    "ScriptRuntimeError",
    "UndeclaredLabelError",
    "execute_script",
    "format_script",
    "load_bundled",
    "parse_script",
    "script_params",
]


def load_bundled(name: str) -> str:
    """Source text of a script shipped with the package (e.g. ``bell_phi_plus.cqp``)."""
    return resources.files("cqt.data").joinpath(name).read_text(encoding="utf-8")
