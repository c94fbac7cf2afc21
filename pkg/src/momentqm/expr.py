"""Arithmetic expressions over ``(t, x, y)`` for configuration files.

Grammar (``^`` and ``**`` are right associative and bind tighter than unary
minus, so ``-x^2`` is ``-(x^2)``)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom (("^" | "**") unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ("," expr)* ")" | "(" expr ")"

Names are ``t``, ``x``, ``y`` and ``pi``; functions are ``sin``, ``cos``,
``exp`` and the variadic ``max`` (used to write compactly supported bumps
such as ``max(0, 1 - (x^2 + y^2) / 0.16)^8``).  Evaluation is vectorised
with numpy.

>>> f = parse("2 * sin(pi * x) + y^2")
>>> float(f(0.0, 0.5, 3.0))
11.0
"""

from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/^(),]))")
_UNARY = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_VARS = ("t", "x", "y")


class ExprError(ValueError):
    """Malformed expression; ``pos`` is the character offset of the problem."""

    def __init__(self, message, pos=None, text=""):
        where = f" at position {pos}: {text[:pos]}>>{text[pos:]}" if pos is not None else ""
        super().__init__(message + where)
        self.pos = pos


def _tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprError("unexpected character", pos + (len(text[pos:]) - len(text[pos:].lstrip())), text)
        num, name, op = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            out.append(("num", float(num), start))
        elif name is not None:
            out.append(("name", name, start))
        else:
            out.append(("op", op, start))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            raise ExprError(f"expected {want!r}", tok[2], self.text)
        self.i += 1
        return tok

    def at(self, *ops):
        tok = self.peek()
        return tok[0] == "op" and tok[1] in ops

    def expr(self):
        node = self.term()
        while self.at("+", "-"):
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.at("*", "/"):
            op = self.take()[1]
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.at("-"):
            self.take()
            return ("neg", self.unary())
        if self.at("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.at("^", "**"):
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return ("num", value)
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        if kind == "name":
            self.take()
            if value in _UNARY or value == "max":
                self.take("op", "(")
                args = [self.expr()]
                while self.at(","):
                    self.take()
                    args.append(self.expr())
                self.take("op", ")")
                if value in _UNARY and len(args) != 1:
                    raise ExprError(f"{value} takes one argument", pos, self.text)
                if value == "max" and len(args) < 2:
                    raise ExprError("max takes at least two arguments", pos, self.text)
                return ("call", value, args)
            if value == "pi":
                return ("num", np.pi)
            if value in _VARS:
                return ("var", value)
            raise ExprError(f"unknown name {value!r}", pos, self.text)
        raise ExprError("expected a number, name or '('", pos, self.text)


def _eval(node, env):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return env[node[1]]
    if tag == "neg":
        return -_eval(node[1], env)
    if tag == "call":
        args = [_eval(a, env) for a in node[2]]
        if node[1] == "max":
            out = args[0]
            for a in args[1:]:
                out = np.maximum(out, a)
            return out
        return _UNARY[node[1]](args[0])
    a, b = _eval(node[1], env), _eval(node[2], env)
    if tag == "+":
        return a + b
    if tag == "-":
        return a - b
    if tag == "*":
        return a * b
    if tag == "/":
        return a / b
    return np.power(a, b)


def _names(node, acc):
    if node[0] == "var":
        acc.add(node[1])
    elif node[0] == "neg":
        _names(node[1], acc)
    elif node[0] == "call":
        for a in node[2]:
            _names(a, acc)
    elif node[0] not in ("num",):
        _names(node[1], acc)
        _names(node[2], acc)
    return acc


class Expression:
    """Compiled expression; call as ``f(t, x, y)`` with broadcastable arrays."""

    def __init__(self, text: str):
        if not isinstance(text, str) or not text.strip():
            raise ExprError("empty expression")
        p = _Parser(text)
        self.tree = p.expr()
        p.take("end")
        self.text = text
        self.variables = frozenset(_names(self.tree, set()))

    def __repr__(self):
        return f"Expression({self.text!r})"

    @property
    def autonomous(self) -> bool:
        return "t" not in self.variables

    def __call__(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        with np.errstate(all="ignore"):
            out = _eval(self.tree, {"t": t, "x": x, "y": y})
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        return np.array(out)

    def of_xy(self, t=0.0):
        """The slice ``(x, y) -> f(t, x, y)``."""
        return lambda x, y: self(t, x, y)


def parse(text: str) -> Expression:
    return Expression(text)
