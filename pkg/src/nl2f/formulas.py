"""Derived-column formula language: AST, parser, renderer, metrics.

Grammar (also published in docs/grammar.ebnf):

    formula    = [ "=" ] expr ;
    expr       = concat { cmp-op concat } ;          cmp-op: = <> < <= > >=
    concat     = additive { "&" additive } ;
    additive   = term { ( "+" | "-" ) term } ;
    term       = unary { ( "*" | "/" ) unary } ;
    unary      = ( "-" | "+" ) unary | primary ;
    primary    = number | string | boolean | colref | call | "(" expr ")" ;
    colref     = "[" header "]" ;                    "]]" escapes a literal "]"
    call       = ident "(" [ expr { "," expr } ] ")" ;

Column references are table-relative (`[Header]`); A1-style cell
addresses are deliberately not part of the language.  Function names are
case-insensitive and canonicalized to uppercase.  A unary minus applied
directly to a numeric literal is folded into the constant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import FormulaSyntaxError
from .tables import Boolean, CellValue, Number, Table, Text, cell_to_text, format_number

ARITH_OPS = frozenset({"+", "-", "*", "/"})
CMP_OPS = frozenset({"=", "<>", "<", "<=", ">", ">="})
BINARY_OPS = ARITH_OPS | CMP_OPS | {"&"}


@dataclass(frozen=True)
class Const:
    value: CellValue


@dataclass(frozen=True)
class ColRef:
    header: str


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Binary:
    op: str
    lhs: "FormulaAst"
    rhs: "FormulaAst"


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "FormulaAst"


FormulaAst = Const | ColRef | Call | Binary | Unary


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"]|"")*")
  | (?P<colref>\[(?:[^\]]|\]\])*\])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op><=|>=|<>|[=<>+\-*/&(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect_op(self, op: str) -> _Token:
        token = self.peek()
        if token.kind != "op" or token.text != op:
            raise FormulaSyntaxError(f"expected {op!r}", token.offset)
        return self.next()

    def at_op(self, *ops) -> bool:
        token = self.peek()
        return token.kind == "op" and token.text in ops

    def parse(self) -> FormulaAst:
        if self.at_op("="):
            self.next()
        if self.peek().kind == "eof":
            raise FormulaSyntaxError("empty formula", self.peek().offset)
        ast = self.expr()
        tail = self.peek()
        if tail.kind != "eof":
            raise FormulaSyntaxError(f"unexpected {tail.text!r}", tail.offset)
        return ast

    def expr(self) -> FormulaAst:
        lhs = self.concat()
        while self.at_op(*CMP_OPS):
            op = self.next().text
            lhs = Binary(op, lhs, self.concat())
        return lhs

    def concat(self) -> FormulaAst:
        lhs = self.additive()
        while self.at_op("&"):
            self.next()
            lhs = Binary("&", lhs, self.additive())
        return lhs

    def additive(self) -> FormulaAst:
        lhs = self.term()
        while self.at_op("+", "-"):
            op = self.next().text
            lhs = Binary(op, lhs, self.term())
        return lhs

    def term(self) -> FormulaAst:
        lhs = self.unary()
        while self.at_op("*", "/"):
            op = self.next().text
            lhs = Binary(op, lhs, self.unary())
        return lhs

    def unary(self) -> FormulaAst:
        if self.at_op("-", "+"):
            op = self.next().text
            operand = self.unary()
            if op == "-" and isinstance(operand, Const) and isinstance(
                operand.value, Number
            ):
                return Const(Number(-operand.value.value))
            if op == "+":
                return operand
            return Unary(op, operand)
        return self.primary()

    def primary(self) -> FormulaAst:
        token = self.peek()
        if token.kind == "number":
            self.next()
            return Const(Number(float(token.text)))
        if token.kind == "string":
            self.next()
            return Const(Text(token.text[1:-1].replace('""', '"')))
        if token.kind == "colref":
            self.next()
            header = token.text[1:-1].replace("]]", "]")
            if not header:
                raise FormulaSyntaxError("empty column reference", token.offset)
            return ColRef(header)
        if token.kind == "ident":
            upper = token.text.upper()
            if upper in ("TRUE", "FALSE") and not self._next_is_open_paren():
                self.next()
                return Const(Boolean(upper == "TRUE"))
            self.next()
            self.expect_op("(")
            args = []
            if not self.at_op(")"):
                args.append(self.expr())
                while self.at_op(","):
                    self.next()
                    args.append(self.expr())
            self.expect_op(")")
            return Call(upper, tuple(args))
        if token.kind == "op" and token.text == "(":
            self.next()
            inner = self.expr()
            self.expect_op(")")
            return inner
        if token.kind == "eof" and self.pos > 0:
            # Point at the token that left the expression dangling.
            offset = self.tokens[self.pos - 1].offset
        else:
            offset = token.offset
        raise FormulaSyntaxError(f"expected a value, got {token.text or 'end'!r}", offset)

    def _next_is_open_paren(self) -> bool:
        token = self.tokens[self.pos + 1]
        return token.kind == "op" and token.text == "("


def parse_formula(text: str) -> FormulaAst:
    """Parse formula text into an AST; raises FormulaSyntaxError with offset."""
    return _Parser(text).parse()


def _render_const(value: CellValue) -> str:
    if isinstance(value, Number):
        return format_number(value.value)
    if isinstance(value, Text):
        return '"' + value.value.replace('"', '""') + '"'
    if isinstance(value, Boolean):
        return "TRUE" if value.value else "FALSE"
    # Blank/Error constants cannot appear in parsed formulas; render their
    # display form quoted so output at least re-parses.
    return '"' + cell_to_text(value) + '"'


def _render(ast: FormulaAst) -> str:
    if isinstance(ast, Const):
        return _render_const(ast.value)
    if isinstance(ast, ColRef):
        return "[" + ast.header.replace("]", "]]") + "]"
    if isinstance(ast, Call):
        return ast.name + "(" + ", ".join(_render(a) for a in ast.args) + ")"
    if isinstance(ast, Binary):
        return "(" + _render(ast.lhs) + ast.op + _render(ast.rhs) + ")"
    return "(" + ast.op + _render(ast.operand) + ")"


def render_formula(ast: FormulaAst) -> str:
    """Canonical, fully parenthesized text form; re-parses to the same AST."""
    return "=" + _render(ast)


@dataclass(frozen=True)
class FormulaMetrics:
    function_call_count: int
    depth: int
    operator_count: int
    unique_functions: frozenset


def formula_metrics(ast: FormulaAst) -> FormulaMetrics:
    """Structural metrics: call count, nesting depth, arithmetic op count.

    Operator count covers binary + - * / only; comparisons, concatenation
    and unary minus are excluded.
    """
    calls = 0
    ops = 0
    names = set()

    def depth_of(node) -> int:
        nonlocal calls, ops
        if isinstance(node, Const) or isinstance(node, ColRef):
            return 0
        if isinstance(node, Call):
            calls += 1
            names.add(node.name)
            inner = max((depth_of(a) for a in node.args), default=0)
            return inner + 1
        if isinstance(node, Binary):
            if node.op in ARITH_OPS:
                ops += 1
            return max(depth_of(node.lhs), depth_of(node.rhs))
        return depth_of(node.operand)

    depth = depth_of(ast)
    return FormulaMetrics(calls, depth, ops, frozenset(names))


def column_refs(ast: FormulaAst) -> set:
    """Headers referenced anywhere in the AST."""
    if isinstance(ast, ColRef):
        return {ast.header}
    if isinstance(ast, Call):
        refs = set()
        for a in ast.args:
            refs |= column_refs(a)
        return refs
    if isinstance(ast, Binary):
        return column_refs(ast.lhs) | column_refs(ast.rhs)
    if isinstance(ast, Unary):
        return column_refs(ast.operand)
    return set()


def is_derived_column(ast: FormulaAst, table: Table) -> bool:
    """True iff every column reference resolves against the table."""
    return all(table.has_column(h) for h in column_refs(ast))


def uses_deprecated_function(ast: FormulaAst, deprecated: set) -> bool:
    deprecated = {name.upper() for name in deprecated}
    return bool(formula_metrics(ast).unique_functions & deprecated)


def load_deprecated_list(path) -> frozenset:
    """Read a deprecated-function list: one name per line, '#' comments."""
    names = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                names.add(line.upper())
    return frozenset(names)
