"""
Branch formulas for piecewise analytic functions.

The grammar is small: complex literals, the variable ``z``,
``+ - * /``, integer powers (``^`` or ``**``), parentheses and ``exp``::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("+" | "-") unary | power
    power := atom (("^" | "**") ["-"] INTEGER)?
    atom  := NUMBER ["i"] | "i" | "z" | "pi" | "exp" "(" expr ")" | "(" expr ")"

Formulas compile to closures evaluated over numpy complex arrays.
"""

import re
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from nearbest.exceptions import ConfigError

Evaluator = Callable[[np.ndarray], np.ndarray]

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)(?P<imag>[ij](?![A-Za-z_]))?"
    r"|(?P<name>[A-Za-z_]+)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


@dataclass(frozen=True)
class Token:
    kind: str      # "number", "name", "op", "end"
    text: str
    position: int
    value: complex = 0j


def tokenize(source: str) -> List[Token]:
    """Split a formula into tokens, raising ConfigError at the first bad character."""
    tokens: List[Token] = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            raise ConfigError(f"Unexpected character {source[pos]!r} at position {pos} in {source!r}")
        start = pos + len(m.group(0)) - len(m.group(0).lstrip())
        if m.group("number") is not None:
            value = float(m.group("number"))
            literal = complex(0.0, value) if m.group("imag") else complex(value, 0.0)
            tokens.append(Token("number", m.group(0).strip(), start, literal))
        elif m.group("name") is not None:
            tokens.append(Token("name", m.group("name"), start))
        else:
            tokens.append(Token("op", m.group("op"), start))
        pos = m.end()
    tokens.append(Token("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def _error(self, message: str) -> ConfigError:
        tok = self.current
        where = "end of input" if tok.kind == "end" else f"{tok.text!r} at position {tok.position}"
        return ConfigError(f"{message} ({where}) in formula {self.source!r}")

    def _expect(self, text: str) -> None:
        if self.current.kind != "op" or self.current.text != text:
            raise self._error(f"Expected {text!r}")
        self._advance()

    def parse(self) -> Evaluator:
        node = self._expr()
        if self.current.kind != "end":
            raise self._error("Unexpected trailing input")
        return node

    def _expr(self) -> Evaluator:
        node = self._term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self._advance().text
            rhs = self._term()
            node = _binary(op, node, rhs)
        return node

    def _term(self) -> Evaluator:
        node = self._unary()
        while self.current.kind == "op" and self.current.text in ("*", "/"):
            op = self._advance().text
            rhs = self._unary()
            node = _binary(op, node, rhs)
        return node

    def _unary(self) -> Evaluator:
        if self.current.kind == "op" and self.current.text in "+-":
            op = self._advance().text
            operand = self._unary()
            if op == "-":
                return lambda z, f=operand: -f(z)
            return operand
        return self._power()

    def _power(self) -> Evaluator:
        base = self._atom()
        if self.current.kind == "op" and self.current.text in ("^", "**"):
            self._advance()
            sign = 1
            if self.current.kind == "op" and self.current.text == "-":
                self._advance()
                sign = -1
            tok = self.current
            if tok.kind != "number" or tok.value.imag != 0 or not float(tok.value.real).is_integer() \
                    or not re.fullmatch(r"\d+", tok.text):
                raise self._error("Only integer powers are supported")
            self._advance()
            exponent = sign * int(tok.text)
            return lambda z, f=base, k=exponent: _int_power(f(z), k)
        return base

    def _atom(self) -> Evaluator:
        tok = self.current
        if tok.kind == "number":
            self._advance()
            return _constant(tok.value)
        if tok.kind == "name":
            self._advance()
            name = tok.text.lower()
            if name == "z":
                return lambda z: np.asarray(z, dtype=complex)
            if name in ("i", "j"):
                return _constant(1j)
            if name == "pi":
                return _constant(complex(np.pi))
            if name == "exp":
                self._expect("(")
                inner = self._expr()
                self._expect(")")
                return lambda z, f=inner: np.exp(f(z))
            self.index -= 1
            raise self._error(f"Unknown name {tok.text!r}")
        if tok.kind == "op" and tok.text == "(":
            self._advance()
            inner = self._expr()
            self._expect(")")
            return inner
        raise self._error("Expected a number, 'z', 'exp(...)' or '('")


def _constant(value: complex) -> Evaluator:
    return lambda z: np.full(np.shape(z), value, dtype=complex)


def _int_power(values: np.ndarray, k: int) -> np.ndarray:
    if k >= 0:
        return values ** k
    return 1.0 / values ** (-k)


def _binary(op: str, lhs: Evaluator, rhs: Evaluator) -> Evaluator:
    if op == "+":
        return lambda z: lhs(z) + rhs(z)
    if op == "-":
        return lambda z: lhs(z) - rhs(z)
    if op == "*":
        return lambda z: lhs(z) * rhs(z)
    return lambda z: lhs(z) / rhs(z)


@dataclass(frozen=True)
class Expression:
    """A compiled branch formula."""
    source: str
    evaluator: Evaluator

    def __call__(self, z) -> np.ndarray:
        values = self.evaluator(np.asarray(z, dtype=complex))
        return np.asarray(values, dtype=complex)


def parse_expression(source: str) -> Expression:
    """
    Compile a formula into an Expression.

    Args:
        source: Formula text, e.g. ``"exp(z) - 1 - z"`` or ``"2.5i*z^3"``

    Returns:
        Compiled expression callable on complex arrays

    Raises:
        ConfigError: On any lexical or syntax error, with its position
    """
    if not source or not source.strip():
        raise ConfigError("Empty formula")
    return Expression(source=source, evaluator=_Parser(source).parse())
