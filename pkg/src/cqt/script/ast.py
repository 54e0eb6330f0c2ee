"""Statement and expression nodes for .cqp scripts, plus the canonical printer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union


# --- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Param, Neg, BinOp, Call]

FUNCTIONS = {"sqrt": math.sqrt}


class UnboundParameter(KeyError):
    pass


def evaluate(expr: Expr, params: Mapping[str, float] | None = None) -> float:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Param):
        if params is None or expr.name not in params:
            raise UnboundParameter(expr.name)
        return float(params[expr.name])
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, params)
    if isinstance(expr, Call):
        return FUNCTIONS[expr.func](evaluate(expr.arg, params))
    a, b = evaluate(expr.left, params), evaluate(expr.right, params)
    if expr.op == "+":
        return a + b
    if expr.op == "-":
        return a - b
    if expr.op == "*":
        return a * b
    return a / b


def has_params(expr: Expr) -> bool:
    if isinstance(expr, Param):
        return True
    if isinstance(expr, Num):
        return False
    if isinstance(expr, (Neg, Call)):
        return has_params(expr.operand if isinstance(expr, Neg) else expr.arg)
    return has_params(expr.left) or has_params(expr.right)


def fold(expr: Expr) -> Expr:
    return expr if has_params(expr) else Num(float(evaluate(expr)))


def params_in(expr: Expr) -> set[str]:
    if isinstance(expr, Param):
        return {expr.name}
    if isinstance(expr, Num):
        return set()
    if isinstance(expr, Neg):
        return params_in(expr.operand)
    if isinstance(expr, Call):
        return params_in(expr.arg)
    return params_in(expr.left) | params_in(expr.right)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _PREC[expr.op]
    if isinstance(expr, Neg) or (isinstance(expr, Num) and expr.value < 0):
        return 3
    return 4


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Num):
        if expr.value == math.pi:
            return "pi"
        if expr.value == -math.pi:
            return "-pi"
        return repr(expr.value)
    if isinstance(expr, Param):
        return "${" + expr.name + "}"
    if isinstance(expr, Call):
        return f"{expr.func}({format_expr(expr.arg)})"
    if isinstance(expr, Neg):
        inner = format_expr(expr.operand)
        return "-" + (inner if _prec(expr.operand) >= 3 else f"({inner})")
    p = _PREC[expr.op]
    left = format_expr(expr.left)
    if _prec(expr.left) < p:
        left = f"({left})"
    right = format_expr(expr.right)
    if _prec(expr.right) < p or (_prec(expr.right) == p and expr.op in "-/"):
        right = f"({right})"
    return f"{left} {expr.op} {right}"


# --- statements -------------------------------------------------------------

@dataclass(frozen=True)
class CavityDecl:
    alpha: Expr


@dataclass(frozen=True)
class AtomDecl:
    label: str
    levels: tuple[str, str]
    init: str


@dataclass(frozen=True)
class Rotate:
    label: str
    gate: Union[str, tuple[tuple[Expr, Expr], tuple[Expr, Expr]]]


@dataclass(frozen=True)
class Dispersive:
    label: str
    phi: Expr


@dataclass(frozen=True)
class Inject:
    beta: Expr


@dataclass(frozen=True)
class Jc:
    label: str
    gt: Expr


@dataclass(frozen=True)
class Measure:
    label: str
    var: str


@dataclass(frozen=True)
class Postselect:
    label: str
    level: str


@dataclass(frozen=True)
class BellTarget:
    atoms: tuple[str, str]
    kind: str  # phi_plus, phi_minus, psi_plus, psi_minus


@dataclass(frozen=True)
class QubitTarget:
    atom: str
    zeta: Expr
    xi: Expr


@dataclass(frozen=True)
class ExpectFidelity:
    target: Union[BellTarget, QubitTarget]
    threshold: Expr


@dataclass(frozen=True)
class Report:
    names: tuple[str, ...]


@dataclass(frozen=True)
class Correct:
    label: str
    var1: str
    var2: str
    injected: Expr


@dataclass(frozen=True)
class ResetCavity:
    alpha: Expr


Statement = Union[
    CavityDecl, AtomDecl, Rotate, Dispersive, Inject, Jc, Measure, Postselect,
    ExpectFidelity, Report, Correct, ResetCavity,
]

DECLARATIONS = (CavityDecl, AtomDecl)


@dataclass(frozen=True)
class ProtocolScript:
    statements: tuple[Statement, ...]
    source_map: tuple[tuple[int, int], ...]

    @property
    def operations(self) -> tuple[Statement, ...]:
        """Statements other than the cavity and atom declarations."""
        return tuple(s for s in self.statements if not isinstance(s, DECLARATIONS))

    def location(self, index: int) -> tuple[int, int]:
        return self.source_map[index]

    def __eq__(self, other):
        # source positions are not part of a script's meaning
        if not isinstance(other, ProtocolScript):
            return NotImplemented
        return self.statements == other.statements

    def __hash__(self):
        return hash(self.statements)


def script_params(script: ProtocolScript) -> set[str]:
    """Names of every ``${param}`` referenced anywhere in ``script``."""
    found: set[str] = set()

    def walk(node):
        if isinstance(node, (Num, Param, Neg, BinOp, Call)):
            found.update(params_in(node))
        elif isinstance(node, tuple):
            for x in node:
                walk(x)
        elif hasattr(node, "__dataclass_fields__"):
            for name in node.__dataclass_fields__:
                walk(getattr(node, name))

    walk(script.statements)
    return found


def format_statement(stmt: Statement) -> str:
    e = format_expr
    if isinstance(stmt, CavityDecl):
        return f"cavity coherent {e(stmt.alpha)}"
    if isinstance(stmt, AtomDecl):
        return f"atom {stmt.label} levels ({stmt.levels[0]},{stmt.levels[1]}) init {stmt.init}"
    if isinstance(stmt, Rotate):
        if isinstance(stmt.gate, str):
            return f"rotate {stmt.label} {stmt.gate}"
        rows = ", ".join("[" + ", ".join(e(x) for x in row) + "]" for row in stmt.gate)
        return f"rotate {stmt.label} [{rows}]"
    if isinstance(stmt, Dispersive):
        return f"dispersive {stmt.label} phi={e(stmt.phi)}"
    if isinstance(stmt, Inject):
        return f"inject {e(stmt.beta)}"
    if isinstance(stmt, Jc):
        return f"jc {stmt.label} gt={e(stmt.gt)}"
    if isinstance(stmt, Measure):
        return f"measure {stmt.label} as {stmt.var}"
    if isinstance(stmt, Postselect):
        return f"postselect {stmt.label} {stmt.level}"
    if isinstance(stmt, ExpectFidelity):
        t = stmt.target
        if isinstance(t, BellTarget):
            target = f"bell({t.atoms[0]}, {t.atoms[1]}, {t.kind})"
        else:
            target = f"qubit({t.atom}, {e(t.zeta)}, {e(t.xi)})"
        return f"expect fidelity {target} >= {e(stmt.threshold)}"
    if isinstance(stmt, Report):
        return "report " + ", ".join(stmt.names)
    if isinstance(stmt, Correct):
        return f"correct {stmt.label} from {stmt.var1}, {stmt.var2}, {e(stmt.injected)}"
    if isinstance(stmt, ResetCavity):
        return f"reset cavity coherent {e(stmt.alpha)}"
    raise TypeError(f"not a statement: {stmt!r}")


def format_script(script: ProtocolScript) -> str:
    return "".join(format_statement(s) + "\n" for s in script.statements)
