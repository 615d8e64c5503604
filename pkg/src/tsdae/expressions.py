"""Arithmetic entry expressions in the single variable t.

Grammar (left-associative binary operators):

    expr   := term {("+" | "-") term}
    term   := factor {("*" | "/") factor}
    factor := "-" factor | base ["^" integer]
    base   := number | "t" | "(" expr ")"

"^" takes an unsigned integer literal exponent and binds tighter than
unary minus, so "-t^2" means -(t^2).  Numbers are integer or decimal
literals; they are held as exact Fractions so the same tree evaluates in
float or in rational arithmetic depending on the type of t.
"""

from fractions import Fraction

from .errors import ExpressionError


class Node:
    """Expression tree node; subclasses implement evaluate and rendering."""

    def evaluate(self, t):
        raise NotImplementedError

    def render(self) -> str:
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))

    def __repr__(self):
        return self.render()


class Literal(Node):
    def __init__(self, value):
        self.value = Fraction(value)

    def evaluate(self, t):
        if isinstance(t, Fraction):
            return self.value
        return float(self.value)

    def render(self) -> str:
        v = self.value
        if v.denominator == 1:
            return str(v.numerator)
        digits = 0
        den = v.denominator
        while den % 2 == 0:
            den //= 2
            digits += 1
        fives = 0
        while den % 5 == 0:
            den //= 5
            fives += 1
        if den != 1:
            raise ExpressionError(f"literal {v} has no finite decimal form")
        digits = max(digits, fives)
        scaled = v * Fraction(10) ** digits
        text = str(scaled.numerator).rjust(digits + 1, "0")
        return text[:-digits] + "." + text[-digits:]


class Var(Node):
    def evaluate(self, t):
        return t

    def render(self) -> str:
        return "t"


class Neg(Node):
    def __init__(self, child):
        self.child = child

    def evaluate(self, t):
        return -self.child.evaluate(t)

    def render(self) -> str:
        return f"(-{self.child.render()})"


class BinOp(Node):
    def __init__(self, op, left, right):
        self.op = op
        self.left = left
        self.right = right

    def evaluate(self, t):
        a = self.left.evaluate(t)
        b = self.right.evaluate(t)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if b == 0:
            raise ExpressionError("division by zero while evaluating expression")
        return a / b

    def render(self) -> str:
        return f"({self.left.render()} {self.op} {self.right.render()})"


class Pow(Node):
    def __init__(self, base, exponent: int):
        self.base = base
        self.exponent = exponent

    def evaluate(self, t):
        return self.base.evaluate(t) ** self.exponent

    def render(self) -> str:
        return f"({self.base.render()}^{self.exponent})"


class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0

    def error(self, message):
        raise ExpressionError(message, position=self.pos)

    def skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos] in " \t":
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def take(self, ch) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def parse(self) -> Node:
        node = self.expr()
        self.skip_ws()
        if self.pos != len(self.src):
            self.error(f"unexpected {self.src[self.pos]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            ch = self.peek()
            if ch and ch in "+-":
                self.pos += 1
                node = BinOp(ch, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            ch = self.peek()
            if ch and ch in "*/":
                self.pos += 1
                node = BinOp(ch, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        if self.take("-"):
            return Neg(self.factor())
        node = self.base()
        if self.take("^"):
            node = Pow(node, self.integer())
        return node

    def base(self) -> Node:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if not self.take(")"):
                self.error("expected ')'")
            return node
        if ch == "t":
            self.pos += 1
            return Var()
        if ch.isdigit():
            return Literal(self.number_token())
        self.error("expected a number, 't', '(' or '-'" if ch else "unexpected end of input")

    def number_token(self) -> Fraction:
        start = self.pos
        while self.pos < len(self.src) and self.src[self.pos].isdigit():
            self.pos += 1
        if self.pos < len(self.src) and self.src[self.pos] == ".":
            self.pos += 1
            if self.pos == len(self.src) or not self.src[self.pos].isdigit():
                self.error("expected digits after decimal point")
            while self.pos < len(self.src) and self.src[self.pos].isdigit():
                self.pos += 1
        return Fraction(self.src[start:self.pos])

    def integer(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.src) and self.src[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            self.error("exponent must be an unsigned integer literal")
        return int(self.src[start:self.pos])


def parse_expression(source: str) -> Node:
    """Parse an entry expression; raises ExpressionError with a position."""
    return _Parser(source).parse()


def render(node: Node) -> str:
    """Fully parenthesized text that re-parses to a structurally equal tree."""
    return node.render()
