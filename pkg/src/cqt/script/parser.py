"""Hand-written recursive-descent parser for the line-oriented .cqp language.

One statement per line; ``#`` starts a comment. Names are resolved while
parsing, so the returned script has every atom label and measured variable
declared before use.
"""

from __future__ import annotations

import math

from ..qops import PRESETS
from . import ast
from .lexer import ScriptError, Token, tokenize


class ParseError(ScriptError):
    pass


class UndeclaredLabelError(ParseError):
    pass


class DuplicateCavityError(ParseError):
    pass


LEVEL_PAIRS = {("f", "g"), ("f", "e")}
BELL_KINDS = ("phi_plus", "phi_minus", "psi_plus", "psi_minus")
REPORT_BUILTINS = ("probability", "fidelity", "state")


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.atoms: dict[str, tuple[str, str]] = {}
        self.vars: set[str] = set()
        self.cavity_at: tuple[int, int] | None = None
        self.reported = False

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def error(self, message: str, tok: Token | None = None, cls=ParseError):
        tok = tok or self.tok
        return cls(tok.line, tok.col, message)

    def _describe(self, tok: Token) -> str:
        return {"NEWLINE": "end of line", "EOF": "end of input"}.get(tok.kind, repr(tok.text))

    def expect_op(self, text: str) -> Token:
        if self.tok.kind != "OP" or self.tok.text != text:
            raise self.error(f"expected {text!r}, found {self._describe(self.tok)}")
        return self.advance()

    def expect_word(self, word: str) -> Token:
        if self.tok.kind != "IDENT" or self.tok.text != word:
            raise self.error(f"expected {word!r}, found {self._describe(self.tok)}")
        return self.advance()

    def ident(self, what: str) -> Token:
        if self.tok.kind != "IDENT":
            raise self.error(f"expected {what}, found {self._describe(self.tok)}")
        return self.advance()

    def atom_ref(self, need: tuple[str, str] | None = None, op: str = "") -> str:
        t = self.ident("atom label")
        if t.text not in self.atoms:
            raise self.error(f"undeclared atom label {t.text!r}", t, UndeclaredLabelError)
        if need is not None and self.atoms[t.text] != need:
            raise self.error(
                f"{op} needs an atom with levels ({need[0]},{need[1]}); "
                f"{t.text} has ({self.atoms[t.text][0]},{self.atoms[t.text][1]})",
                t,
            )
        return t.text

    def var_ref(self) -> str:
        t = self.ident("variable name")
        if t.text not in self.vars:
            raise self.error(f"undefined variable {t.text!r}", t, UndeclaredLabelError)
        return t.text

    def need_cavity(self, tok: Token):
        if self.cavity_at is None:
            raise self.error("no cavity declared before this statement", tok, UndeclaredLabelError)

    # -- expressions
    def expr(self) -> ast.Expr:
        node = self.term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.advance().text
            node = ast.fold(ast.BinOp(op, node, self.term()))
        return node

    def term(self) -> ast.Expr:
        node = self.unary()
        while self.tok.kind == "OP" and self.tok.text in "*/":
            op_tok = self.advance()
            right = self.unary()
            node = ast.BinOp(op_tok.text, node, right)
            try:
                node = ast.fold(node)
            except ZeroDivisionError:
                raise self.error("division by zero", op_tok) from None
        return node

    def unary(self) -> ast.Expr:
        if self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.advance().text
            inner = self.unary()
            return inner if op == "+" else ast.fold(ast.Neg(inner))
        return self.primary()

    def primary(self) -> ast.Expr:
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            return ast.Num(float(t.text))
        if t.kind == "PARAM":
            self.advance()
            return ast.Param(t.text[2:-1])
        if t.kind == "IDENT":
            if t.text == "pi":
                self.advance()
                return ast.Num(math.pi)
            if t.text in ast.FUNCTIONS:
                self.advance()
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                try:
                    return ast.fold(ast.Call(t.text, arg))
                except ValueError:
                    raise self.error(f"math domain error in {t.text}()", t) from None
            raise self.error(f"unknown name {t.text!r} in expression", t)
        if t.kind == "OP" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        raise self.error(f"expected an expression, found {self._describe(t)}")

    # -- statements
    def parse(self) -> ast.ProtocolScript:
        statements, locs = [], []
        while self.tok.kind != "EOF":
            if self.tok.kind == "NEWLINE":
                self.advance()
                continue
            head = self.tok
            if self.reported:
                raise self.error("statement after the terminal 'report'", head)
            stmt = self.statement()
            if self.tok.kind not in ("NEWLINE", "EOF"):
                raise self.error(f"unexpected {self._describe(self.tok)} at end of statement")
            statements.append(stmt)
            locs.append((head.line, head.col))
        if self.cavity_at is None:
            raise self.error("script declares no cavity", self.tok, UndeclaredLabelError)
        return ast.ProtocolScript(tuple(statements), tuple(locs))

    def statement(self) -> ast.Statement:
        head = self.ident("a statement keyword")
        kw = head.text
        method = getattr(self, f"st_{kw}", None)
        if method is None:
            raise self.error(f"unknown statement {kw!r}", head)
        return method(head)

    def st_cavity(self, head):
        self.expect_word("coherent")
        if self.cavity_at is not None:
            line, col = self.cavity_at
            raise self.error(f"duplicate cavity declaration (first at {line}:{col})", head, DuplicateCavityError)
        self.cavity_at = (head.line, head.col)
        return ast.CavityDecl(self.expr())

    def st_atom(self, head):
        t = self.ident("atom label")
        if t.text in self.atoms:
            raise self.error(f"atom {t.text!r} declared twice", t)
        self.expect_word("levels")
        self.expect_op("(")
        lo = self.ident("level name")
        self.expect_op(",")
        hi = self.ident("level name")
        self.expect_op(")")
        levels = (lo.text, hi.text)
        if levels not in LEVEL_PAIRS:
            raise self.error(f"level pair must be (f,g) or (f,e), got ({lo.text},{hi.text})", lo)
        self.expect_word("init")
        init = self.ident("initial level")
        if init.text not in levels:
            raise self.error(f"initial level {init.text!r} is not one of ({levels[0]},{levels[1]})", init)
        self.atoms[t.text] = levels
        return ast.AtomDecl(t.text, levels, init.text)

    def st_rotate(self, head):
        label = self.atom_ref()
        if self.tok.kind == "IDENT":
            g = self.advance()
            if g.text not in PRESETS:
                raise self.error(f"unknown gate preset {g.text!r}; known: {', '.join(PRESETS)}", g)
            return ast.Rotate(label, g.text)
        self.expect_op("[")
        rows = []
        for r in range(2):
            if r:
                self.expect_op(",")
            self.expect_op("[")
            a = self.expr()
            self.expect_op(",")
            b = self.expr()
            self.expect_op("]")
            rows.append((a, b))
        self.expect_op("]")
        return ast.Rotate(label, tuple(rows))

    def st_dispersive(self, head):
        self.need_cavity(head)
        label = self.atom_ref(("f", "g"), "dispersive")
        self.expect_word("phi")
        self.expect_op("=")
        return ast.Dispersive(label, self.expr())

    def st_inject(self, head):
        self.need_cavity(head)
        return ast.Inject(self.expr())

    def st_jc(self, head):
        self.need_cavity(head)
        label = self.atom_ref(("f", "e"), "jc")
        self.expect_word("gt")
        self.expect_op("=")
        return ast.Jc(label, self.expr())

    def st_measure(self, head):
        label = self.atom_ref()
        self.expect_word("as")
        v = self.ident("variable name")
        if v.text in self.vars or v.text in REPORT_BUILTINS:
            raise self.error(f"variable {v.text!r} already defined", v)
        self.vars.add(v.text)
        return ast.Measure(label, v.text)

    def st_postselect(self, head):
        label = self.atom_ref()
        lv = self.ident("level name")
        if lv.text not in self.atoms[label]:
            raise self.error(f"atom {label} has no level {lv.text!r}", lv)
        return ast.Postselect(label, lv.text)

    def st_expect(self, head):
        self.expect_word("fidelity")
        kind = self.ident("'bell' or 'qubit'")
        self.expect_op("(")
        if kind.text == "bell":
            a1 = self.atom_ref(("f", "g"), "bell target")
            self.expect_op(",")
            a2 = self.atom_ref(("f", "g"), "bell target")
            if a1 == a2:
                raise self.error("bell target needs two distinct atoms", kind)
            self.expect_op(",")
            k = self.ident("Bell state name")
            if k.text not in BELL_KINDS:
                raise self.error(f"unknown Bell state {k.text!r}; expected one of {', '.join(BELL_KINDS)}", k)
            target = ast.BellTarget((a1, a2), k.text)
        elif kind.text == "qubit":
            a = self.atom_ref()
            self.expect_op(",")
            zeta = self.expr()
            self.expect_op(",")
            xi = self.expr()
            target = ast.QubitTarget(a, zeta, xi)
        else:
            raise self.error(f"unknown fidelity target {kind.text!r}", kind)
        self.expect_op(")")
        self.expect_op(">=")
        return ast.ExpectFidelity(target, self.expr())

    def st_report(self, head):
        names = []
        while True:
            t = self.ident("report name")
            if t.text not in self.vars and t.text not in REPORT_BUILTINS:
                raise self.error(f"undefined variable {t.text!r}", t, UndeclaredLabelError)
            names.append(t.text)
            if self.tok.kind == "OP" and self.tok.text == ",":
                self.advance()
                continue
            break
        self.reported = True
        return ast.Report(tuple(names))

    def st_correct(self, head):
        label = self.atom_ref(("f", "g"), "correct")
        self.expect_word("from")
        v1 = self.var_ref()
        self.expect_op(",")
        v2 = self.var_ref()
        self.expect_op(",")
        return ast.Correct(label, v1, v2, self.expr())

    def st_reset(self, head):
        self.expect_word("cavity")
        self.expect_word("coherent")
        self.need_cavity(head)
        return ast.ResetCavity(self.expr())


def parse_script(text: str) -> ast.ProtocolScript:
    """Parse .cqp source into a :class:`~cqt.script.ast.ProtocolScript`.

    Raises a :class:`ScriptError` subclass carrying ``line`` and ``col``.
    """
    return _Parser(text).parse()
