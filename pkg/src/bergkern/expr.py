"""Chart-expression weights.

Grammar (EBNF)::

    expr    = term , { ( "+" | "-" ) , term } ;
    term    = unary , { ( "*" | "/" ) , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;
    atom    = number | var | func , "(" , expr , ")" | "(" , expr , ")" ;
    var     = "z" , [ "_" ] , digit , { digit } ;           (* 1-based *)
    func    = "conj" | "abs2" | "log" | "exp" ;
    number  = digit , { digit } , [ "." , { digit } ] , [ ( "e" | "E" ) , [ "+" | "-" ] , digit , { digit } ] ;

Numbers are real.  ``abs2(u)`` is ``u * conj(u)``.  The compiled callable
accepts a sequence of coordinates (complex arrays or jets) and evaluates
through the dispatching functions in :mod:`bergkern.jets`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import jets
from .errors import ManifestError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<var>z_?\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)
_FUNCS = {"conj": jets.conj, "abs2": jets.abs2, "log": jets.log, "exp": jets.exp}


@dataclass(frozen=True)
class Expression:
    source: str
    tree: tuple
    n: int

    def __call__(self, z):
        return _eval(self.tree, z)

    @property
    def is_radial(self) -> bool:
        """True when the only dependence on z1 is through abs2(z1) (n = 1)."""
        return self.n == 1 and _radial(self.tree)


def parse(source: str, n: int) -> Expression:
    tokens = _tokenize(source)
    parser = _Parser(tokens, source, n)
    tree = parser.expr()
    if parser.peek() is not None:
        tok = parser.peek()
        raise ManifestError(f"unexpected token {tok[1]!r} in expression", column=tok[2] + 1)
    return Expression(source, tree, n)


def _tokenize(source):
    pos = 0
    out = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            raise ManifestError(f"cannot tokenize expression at {source[pos:]!r}", column=pos + 1)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens, source, n):
        self.tokens = tokens
        self.i = 0
        self.source = source
        self.n = n

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, value=None):
        tok = self.peek()
        if tok is None:
            raise ManifestError(f"unexpected end of expression {self.source!r}", column=len(self.source) + 1)
        if value is not None and tok[1] != value:
            raise ManifestError(f"expected {value!r}, got {tok[1]!r}", column=tok[2] + 1)
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek() is not None and self.peek()[1] in "+-":
            op = self.take()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() is not None and self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok is not None and tok[1] == "-":
            self.take()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok[1] == "^":
            self.take()
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, text, col = tok
        if kind == "num":
            return ("num", float(text))
        if kind == "var":
            j = int(text.lstrip("z_"))
            if not 1 <= j <= self.n:
                raise ManifestError(f"variable {text} out of range for n={self.n}", column=col + 1)
            return ("var", j - 1)
        if kind == "name":
            if text not in _FUNCS:
                raise ManifestError(f"unknown function {text!r}", column=col + 1)
            self.take("(")
            arg = self.expr()
            self.take(")")
            return ("call", text, arg)
        if text == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ManifestError(f"unexpected token {text!r}", column=col + 1)


def _eval(node, z):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return z[node[1]]
    if tag == "neg":
        return -_eval(node[1], z)
    if tag == "call":
        return _FUNCS[node[1]](_eval(node[2], z))
    _, op, left, right = node
    a = _eval(left, z)
    if op == "^" and right[0] == "num":
        return a ** right[1]
    b = _eval(right, z)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    return jets.exp(jets.log(a) * b)


def _radial(node) -> bool:
    tag = node[0]
    if tag == "num":
        return True
    if tag == "var":
        return False
    if tag == "neg":
        return _radial(node[1])
    if tag == "call":
        if node[1] == "abs2" and node[2][0] == "var":
            return True
        return _radial(node[2])
    return _radial(node[2]) and _radial(node[3])
