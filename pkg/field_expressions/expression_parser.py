"""
InvarLab - Expression Parser
Recursive-descent parser for the field expression language used in run configs
"""

import logging
import re
from typing import List, Sequence

from .expression import (
    FUNCTION_TABLE,
    BinaryOp,
    Expression,
    ExpressionSyntaxError,
    FunctionCall,
    Negate,
    Number,
    UnknownIdentifierError,
    Variable,
    VariableIndexError,
)
from .fields import MatrixField, VectorField

logger = logging.getLogger(__name__)

TOKEN_PATTERN = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

VARIABLE_PATTERN = re.compile(r"x([1-9]\d*)$")


class _Token:
    __slots__ = ('kind', 'value', 'offset')

    def __init__(self, kind, value, offset):
        self.kind = kind
        self.value = value
        self.offset = offset


class _Cursor:
    """Token stream for one parse; offsets are reported in bytes."""

    def __init__(self, text, dim):
        self.text = text
        self.dim = dim
        self.tokens = self._tokenize(text)
        self.position = 0

    def byte_offset(self, char_offset):
        return len(self.text[:char_offset].encode('utf-8'))

    def _tokenize(self, text):
        tokens = []
        index = 0
        while index < len(text):
            match = TOKEN_PATTERN.match(text, index)
            if match is None:
                raise ExpressionSyntaxError(
                    f"unexpected character {text[index]!r}", self.byte_offset(index)
                )
            kind = match.lastgroup
            if kind != 'space':
                tokens.append(_Token(kind, match.group(), self.byte_offset(index)))
            index = match.end()
        tokens.append(_Token('end', '', self.byte_offset(len(text))))
        return tokens

    def peek(self):
        return self.tokens[self.position]

    def advance(self):
        token = self.tokens[self.position]
        self.position += 1
        return token

    def accept(self, value):
        token = self.peek()
        if token.kind == 'op' and token.value == value:
            self.position += 1
            return token
        return None

    def expect(self, value):
        token = self.accept(value)
        if token is None:
            found = self.peek()
            shown = found.value or 'end of input'
            raise ExpressionSyntaxError(f"expected '{value}' but found '{shown}'", found.offset)
        return token


class ExpressionParser:
    """Parse config strings into Expression trees and compile them into fields."""

    def __init__(self):
        self.load_function_table()

    def load_function_table(self):
        """Known functions and their arity bounds."""
        self.functions = {
            name: (entry[0], entry[1]) for name, entry in FUNCTION_TABLE.items()
        }

    def parse(self, text: str, dim: int) -> Expression:
        """Parse text into an Expression over x1..x_dim."""
        if not isinstance(text, str):
            text = repr(float(text))
        cursor = _Cursor(text, int(dim))
        root = self._parse_sum(cursor)
        trailing = cursor.peek()
        if trailing.kind != 'end':
            raise ExpressionSyntaxError(f"unexpected '{trailing.value}'", trailing.offset)
        logger.debug("Parsed %r as %s", text, root.to_text())
        return Expression(root, dim, text)

    def parse_vector(self, texts: Sequence[str], dim: int) -> VectorField:
        return VectorField([self.parse(text, dim) for text in texts])

    def parse_matrix(self, rows: Sequence[Sequence[str]], dim: int) -> MatrixField:
        return MatrixField([[self.parse(text, dim) for text in row] for row in rows])

    def _parse_sum(self, cursor):
        node = self._parse_product(cursor)
        while True:
            token = cursor.accept('+') or cursor.accept('-')
            if token is None:
                return node
            node = BinaryOp(token.value, node, self._parse_product(cursor), token.offset)

    def _parse_product(self, cursor):
        node = self._parse_unary(cursor)
        while True:
            token = cursor.accept('*') or cursor.accept('/')
            if token is None:
                return node
            node = BinaryOp(token.value, node, self._parse_unary(cursor), token.offset)

    def _parse_unary(self, cursor):
        token = cursor.accept('-')
        if token is not None:
            return Negate(self._parse_unary(cursor), token.offset)
        return self._parse_power(cursor)

    def _parse_power(self, cursor):
        base = self._parse_atom(cursor)
        token = cursor.accept('^')
        if token is None:
            return base
        # right-associative; the exponent may carry its own sign
        return BinaryOp('^', base, self._parse_unary(cursor), token.offset)

    def _parse_atom(self, cursor):
        token = cursor.advance()
        if token.kind == 'number':
            return Number(float(token.value), token.offset)
        if token.kind == 'name':
            if cursor.accept('(') is not None:
                return self._parse_call(cursor, token)
            return self._variable(token, cursor.dim)
        if token.kind == 'op' and token.value == '(':
            node = self._parse_sum(cursor)
            cursor.expect(')')
            return node
        shown = token.value or 'end of input'
        raise ExpressionSyntaxError(f"unexpected '{shown}'", token.offset)

    def _variable(self, token, dim):
        match = VARIABLE_PATTERN.match(token.value)
        if match is None:
            raise UnknownIdentifierError(token.value, token.offset)
        index = int(match.group(1))
        if index > dim:
            raise VariableIndexError(token.value, dim, token.offset)
        return Variable(index, token.offset)

    def _parse_call(self, cursor, name_token):
        name = name_token.value
        if name not in self.functions:
            raise UnknownIdentifierError(name, name_token.offset)
        args: List[object] = []
        if cursor.accept(')') is None:
            args.append(self._parse_sum(cursor))
            while cursor.accept(',') is not None:
                args.append(self._parse_sum(cursor))
            cursor.expect(')')

        low, high = self.functions[name]
        if len(args) < low or (high is not None and len(args) > high):
            expected = str(low) if high == low else f"at least {low}"
            raise ExpressionSyntaxError(
                f"{name}() takes {expected} argument(s), got {len(args)}", name_token.offset
            )
        return FunctionCall(name, tuple(args), name_token.offset)


_default_parser = ExpressionParser()


def parse(text: str, dim: int) -> Expression:
    """Parse with a shared parser instance."""
    return _default_parser.parse(text, dim)
