"""Predicate expression grammar shared by goals, domain conditions, and reports.

Grammar (lowest precedence first):

    expr  := orex
    orex  := andex ("or" andex)*
    andex := notex ("and" notex)*
    notex := "not" notex | cmp
    cmp   := sum (("<" | "<=" | "=" | ">=" | ">") sum)?
    sum   := term (("+" | "-") term)*
    term  := atom ("*" atom)*
    atom  := INT | IDENT | "(" expr ")"

Identifiers name integer-valued state or plan features. Expressions are
statically typed: arithmetic and comparison operands must be integers,
boolean connectives take booleans. Violations are rejected at parse time
with a character position, as is any unknown token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import ExprSyntaxError, UnknownFeature

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|<|>|=|\+|-|\*|\(|\)))"
)

_KEYWORDS = {"and", "or", "not"}
_CMP_OPS = {"<", "<=", "=", ">=", ">"}


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class FeatureRef:
    name: str


@dataclass(frozen=True)
class Arith:
    op: str  # + - *
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Compare:
    op: str  # < <= = >= >
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and / or
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Not:
    operand: "Node"


Node = Union[IntLit, FeatureRef, Arith, Compare, BoolOp, Not]


def _is_bool(node: Node) -> bool:
    return isinstance(node, (Compare, BoolOp, Not))


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "op", "end"
    text: str
    pos: int


def _tokenize(src: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == m.start():
            # skip pure whitespace tail
            if src[pos:].strip() == "":
                break
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad, src)
        if m.group("int") is not None:
            tokens.append(Token("int", m.group("int"), m.start("int")))
        elif m.group("ident") is not None:
            tokens.append(Token("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(Token("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(Token("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.index = 0

    def peek(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def fail(self, message: str, tok: Token | None = None) -> ExprSyntaxError:
        tok = tok or self.peek()
        return ExprSyntaxError(message, tok.pos, self.src)

    def require_int(self, node: Node, tok: Token) -> Node:
        if _is_bool(node):
            raise self.fail("expected an integer expression", tok)
        return node

    def require_bool(self, node: Node, tok: Token) -> Node:
        if not _is_bool(node):
            raise self.fail("expected a boolean expression", tok)
        return node

    def parse(self) -> Node:
        node = self.or_expr()
        tok = self.peek()
        if tok.kind != "end":
            raise self.fail(f"unexpected token {tok.text!r}", tok)
        return node

    def or_expr(self) -> Node:
        tok = self.peek()
        node = self.and_expr()
        while self.peek().kind == "ident" and self.peek().text == "or":
            self.require_bool(node, tok)
            self.advance()
            rtok = self.peek()
            right = self.require_bool(self.and_expr(), rtok)
            node = BoolOp("or", node, right)
        return node

    def and_expr(self) -> Node:
        tok = self.peek()
        node = self.not_expr()
        while self.peek().kind == "ident" and self.peek().text == "and":
            self.require_bool(node, tok)
            self.advance()
            rtok = self.peek()
            right = self.require_bool(self.not_expr(), rtok)
            node = BoolOp("and", node, right)
        return node

    def not_expr(self) -> Node:
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "not":
            self.advance()
            operand = self.require_bool(self.not_expr(), self.peek())
            return Not(operand)
        return self.comparison()

    def comparison(self) -> Node:
        ltok = self.peek()
        node = self.sum_expr()
        tok = self.peek()
        if tok.kind == "op" and tok.text in _CMP_OPS:
            self.require_int(node, ltok)
            self.advance()
            rtok = self.peek()
            right = self.require_int(self.sum_expr(), rtok)
            return Compare(tok.text, node, right)
        return node

    def sum_expr(self) -> Node:
        ltok = self.peek()
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            self.require_int(node, ltok)
            op = self.advance().text
            rtok = self.peek()
            right = self.require_int(self.term(), rtok)
            node = Arith(op, node, right)
        return node

    def term(self) -> Node:
        ltok = self.peek()
        node = self.atom()
        while self.peek().kind == "op" and self.peek().text == "*":
            self.require_int(node, ltok)
            self.advance()
            rtok = self.peek()
            right = self.require_int(self.atom(), rtok)
            node = Arith("*", node, right)
        return node

    def atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "int":
            return IntLit(int(tok.text))
        if tok.kind == "ident":
            if tok.text in _KEYWORDS:
                raise self.fail(f"{tok.text!r} is not valid here", tok)
            return FeatureRef(tok.text)
        if tok.kind == "op" and tok.text == "(":
            node = self.or_expr()
            closing = self.advance()
            if closing.kind != "op" or closing.text != ")":
                raise self.fail("expected ')'", closing)
            return node
        if tok.kind == "end":
            raise self.fail("unexpected end of expression", tok)
        raise self.fail(f"unexpected token {tok.text!r}", tok)


def _evaluate(node: Node, env: Mapping[str, int]):
    if isinstance(node, IntLit):
        return node.value
    if isinstance(node, FeatureRef):
        if node.name not in env:
            raise UnknownFeature(node.name)
        return env[node.name]
    if isinstance(node, Arith):
        left = _evaluate(node.left, env)
        right = _evaluate(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        return left * right
    if isinstance(node, Compare):
        left = _evaluate(node.left, env)
        right = _evaluate(node.right, env)
        if node.op == "<":
            return left < right
        if node.op == "<=":
            return left <= right
        if node.op == "=":
            return left == right
        if node.op == ">=":
            return left >= right
        return left > right
    if isinstance(node, BoolOp):
        if node.op == "and":
            return _evaluate(node.left, env) and _evaluate(node.right, env)
        return _evaluate(node.left, env) or _evaluate(node.right, env)
    if isinstance(node, Not):
        return not _evaluate(node.operand, env)
    raise TypeError(f"not an expression node: {node!r}")


def _collect_features(node: Node, out: set[str]) -> None:
    if isinstance(node, FeatureRef):
        out.add(node.name)
    elif isinstance(node, (Arith, Compare, BoolOp)):
        _collect_features(node.left, out)
        _collect_features(node.right, out)
    elif isinstance(node, Not):
        _collect_features(node.operand, out)


@dataclass(frozen=True)
class Predicate:
    """A parsed boolean expression plus its source text."""

    source: str
    root: Node

    def evaluate(self, env: Mapping[str, int]) -> bool:
        return bool(_evaluate(self.root, env))

    def features(self) -> frozenset[str]:
        out: set[str] = set()
        _collect_features(self.root, out)
        return frozenset(out)

    def __str__(self) -> str:
        return self.source


def parse_predicate(source: str) -> Predicate:
    """Parse a boolean predicate; rejects integer-typed expressions."""
    root = _Parser(source).parse()
    if not _is_bool(root):
        raise ExprSyntaxError("predicate must be boolean, not arithmetic", 0, source)
    return Predicate(source, root)


def parse_expression(source: str) -> Node:
    """Parse either a boolean or an integer expression."""
    return _Parser(source).parse()


def expression_features(node: Node) -> frozenset[str]:
    """Every feature name an expression tree mentions."""
    out: set[str] = set()
    _collect_features(node, out)
    return frozenset(out)
