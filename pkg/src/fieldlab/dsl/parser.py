"""Tokenizer and recursive-descent parser for the Lagrangian language.

Input text holds optional directive lines followed by the density::

    # massless phi^4
    dim 4
    field phi real
    param g4 = 1.0
    def a = 0.1*x0^2
    L = 0.5*d(phi,mu)*d(phi,^mu) - g4/24*phi^4

Grammar of the density (``L =`` is optional)::

    expr   := ['+'|'-'] term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ['^' exponent]
    exponent := ['-'] INT | '(' ['-'] INT ['/' INT] ')'
    atom   := NUMBER | IDENT | 'd(' IDENT (',' index)+ ')' | 'exp(' expr ')' | '(' expr ')'
    index  := ['^'] (IDENT | INT)

A name repeated inside one term, once lowered and once raised, is a dummy
index summed against the metric.  Coordinates are ``x0 .. x{D-1}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from . import ast as A


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)


class IndexDisciplineError(ParseError):
    pass


class UnboundParameterError(ParseError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, IDENT, OP, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)
_COORD_RE = re.compile(r"^x(\d+)$")
_DIRECTIVES = ("dim", "field", "param", "def")


def tokenize(text: str, line: int = 1, col0: int = 1) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind.upper(), m.group(), line, col0 + pos))
        pos = m.end()
    return tokens


# --------------------------------------------------------------------------
# index bookkeeping

def free_occurrences(node) -> list[tuple[str, bool]]:
    """Uncontracted symbolic index occurrences carried by ``node``."""
    if isinstance(node, A.Partial):
        return [(i.name, i.up) for i in node.indices if isinstance(i.name, str)]
    if isinstance(node, A.Sum):
        return free_occurrences(node.terms[0][1])
    if isinstance(node, (A.Product, A.Contraction)):
        factors = node.factors if isinstance(node, A.Product) else node.body.factors
        occ = [o for f in factors for o in free_occurrences(f)]
        bound = set(node.indices) if isinstance(node, A.Contraction) else set()
        return [o for o in occ if o[0] not in bound]
    return []


def _signature(occ) -> frozenset:
    return frozenset(occ)


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, tokens: list[Token], fields: set, defs: set, end: Token):
        self.toks = tokens
        self.i = 0
        self.fields = fields
        self.defs = defs
        self.end = end
        self.params: set = set()

    # helpers
    def peek(self, k: int = 0) -> Token:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else self.end

    def next(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            found = "end of input" if t.kind == "EOF" else repr(t.text)
            raise ParseError(f"expected {text!r}, found {found}", t.line, t.col)
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind != "EOF" and t.text == text

    # grammar
    def parse(self):
        node = self.expr()
        t = self.peek()
        if t.kind != "EOF":
            raise ParseError(f"unexpected {t.text!r}", t.line, t.col)
        return node

    def expr(self):
        start = self.peek()
        terms = []
        sign = 1
        if self.at("-") or self.at("+"):
            sign = -1 if self.next().text == "-" else 1
        terms.append((sign, self.term()))
        while self.at("+") or self.at("-"):
            sign = -1 if self.next().text == "-" else 1
            terms.append((sign, self.term()))
        sig = _signature(free_occurrences(terms[0][1]))
        for _, t in terms[1:]:
            if _signature(free_occurrences(t)) != sig:
                raise IndexDisciplineError("terms of a sum carry different free indices", start.line, start.col)
        if len(terms) == 1 and terms[0][0] == 1:
            return terms[0][1]
        return A.Sum(tuple(terms))

    def term(self):
        start = self.peek()
        factors = [self.factor()]
        while self.at("*") or self.at("/"):
            op = self.next().text
            f = self.factor()
            factors.append(f if op == "*" else A.Power(f, Fraction(-1)))
        counts: dict = {}
        for f in factors:
            for name, up in free_occurrences(f):
                counts.setdefault(name, []).append(up)
        contracted = []
        for name, ups in counts.items():
            if len(ups) > 2:
                raise IndexDisciplineError(f"index {name!r} appears {len(ups)} times in one term", start.line, start.col)
            if len(ups) == 2:
                if ups[0] == ups[1]:
                    variance = "contravariant" if ups[0] else "covariant"
                    raise IndexDisciplineError(
                        f"dummy index {name!r} appears twice {variance}", start.line, start.col
                    )
                contracted.append(name)
        if contracted:
            return A.Contraction(tuple(sorted(contracted)), A.Product(tuple(factors)))
        if len(factors) == 1:
            return factors[0]
        return A.Product(tuple(factors))

    def factor(self):
        base = self.atom()
        if self.at("^"):
            tok = self.next()
            if free_occurrences(base):
                raise IndexDisciplineError("cannot raise an indexed quantity to a power", tok.line, tok.col)
            base = A.Power(base, self.exponent())
        return base

    def exponent(self) -> Fraction:
        if self.at("("):
            self.next()
            neg = self.at("-") and self.next() is not None
            num = self.integer()
            den = 1
            if self.at("/"):
                self.next()
                den = self.integer()
            self.expect(")")
            if den == 0:
                t = self.peek(-1)
                raise ParseError("zero denominator in exponent", t.line, t.col)
            return Fraction(-num if neg else num, den)
        neg = self.at("-") and self.next() is not None
        n = self.integer()
        return Fraction(-n if neg else n)

    def integer(self) -> int:
        t = self.next()
        if t.kind != "NUM" or not t.text.isdigit():
            raise ParseError("expected an integer exponent", t.line, t.col)
        return int(t.text)

    def atom(self):
        t = self.next()
        if t.kind == "NUM":
            return A.Num(float(t.text))
        if t.kind == "IDENT":
            if t.text == "d" and self.at("("):
                return self.partial()
            if t.text == "exp" and self.at("("):
                self.next()
                arg = self.expr()
                self.expect(")")
                if free_occurrences(arg):
                    raise IndexDisciplineError("free index inside exp()", t.line, t.col)
                return A.ExpNode(arg)
            return self.resolve(t)
        if t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        raise ParseError(f"unexpected {found}", t.line, t.col)

    def partial(self):
        self.expect("(")
        t = self.next()
        if t.kind != "IDENT":
            raise ParseError("d(...) needs a field or definition name", t.line, t.col)
        if t.text in self.defs:
            target = A.DefRef(t.text)
        elif t.text in self.fields:
            target = A.FieldRef(t.text)
        else:
            raise ParseError(f"{t.text!r} is not a field", t.line, t.col)
        indices = []
        while self.at(","):
            self.next()
            up = False
            if self.at("^"):
                self.next()
                up = True
            it = self.next()
            if it.kind == "NUM" and it.text.isdigit():
                indices.append(A.Index(int(it.text), up))
            elif it.kind == "IDENT":
                indices.append(A.Index(it.text, up))
            else:
                raise ParseError("bad derivative index", it.line, it.col)
        if not indices:
            raise ParseError("d(...) needs at least one index", t.line, t.col)
        self.expect(")")
        return A.Partial(target, tuple(indices))

    def resolve(self, t: Token):
        name = t.text
        m = _COORD_RE.match(name)
        if m:
            return A.CoordRef(int(m.group(1)))
        if name in ("d", "exp"):
            raise ParseError(f"{name!r} must be called", t.line, t.col)
        if name in self.fields:
            return A.FieldRef(name)
        if name in self.defs:
            return A.DefRef(name)
        self.params.add(name)
        return A.Param(name)


def _prescan_fields(tokens: list[Token]) -> set:
    out = set()
    for a, b, c in zip(tokens, tokens[1:], tokens[2:]):
        if a.text == "d" and b.text == "(" and c.kind == "IDENT":
            out.add(c.text)
    return out


def parse_expression(text: str, fields=(), defs=(), line: int = 1, col: int = 1):
    """Parse a bare expression; returns ``(node, referenced_params)``."""
    tokens = tokenize(text, line, col)
    end = Token("EOF", "", line, col + len(text))
    p = _Parser(tokens, set(fields), set(defs), end)
    node = p.parse()
    return node, p.params


# --------------------------------------------------------------------------
# whole documents

@dataclass
class Document:
    expr: object
    dim: int | None
    fields: dict  # name -> "real" | "complex"
    params: dict  # name -> float | None
    defs: dict  # name -> Node
    referenced: set


def parse_document(text: str) -> Document:
    dim = None
    declared: dict = {}
    params: dict = {}
    def_lines: list = []
    body: list[Token] = []
    last = (1, 1)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        col0 = len(line) - len(line.lstrip()) + 1
        word = stripped.split()[0]
        if word in _DIRECTIVES and not body:
            rest = stripped[len(word):].strip()
            if word == "dim":
                if not rest.isdigit() or int(rest) < 1:
                    raise ParseError("dim needs a positive integer", lineno, col0)
                dim = int(rest)
            elif word == "field":
                parts = rest.split()
                if not parts or len(parts) > 2 or (len(parts) == 2 and parts[1] not in ("real", "complex")):
                    raise ParseError("usage: field <name> [real|complex]", lineno, col0)
                declared[parts[0]] = parts[1] if len(parts) == 2 else "real"
            elif word == "param":
                m = re.match(r"^([A-Za-z_]\w*)\s*(?:=\s*(\S+))?$", rest)
                if not m:
                    raise ParseError("usage: param <name> [= value]", lineno, col0)
                try:
                    params[m.group(1)] = float(m.group(2)) if m.group(2) else None
                except ValueError:
                    raise ParseError(f"bad number {m.group(2)!r}", lineno, col0) from None
            else:
                m = re.match(r"^([A-Za-z_]\w*)\s*=", rest)
                if not m:
                    raise ParseError("usage: def <name> = <expr>", lineno, col0)
                offset = line.index("=", line.index(m.group(1))) + 1
                def_lines.append((m.group(1), line[offset:], lineno, offset + 1))
            continue
        offset = 0
        if not body:
            m = re.match(r"^\s*L\s*=", line)
            if m:
                offset = m.end()
        body.extend(tokenize(line[offset:], lineno, offset + 1))
        last = (lineno, len(line) + 1)
    if not body:
        raise ParseError("no Lagrangian expression found", *last)

    defs: dict = {}
    referenced: set = set()
    for name, src, lineno, col in def_lines:
        node, used = parse_expression(src, fields=(), defs=defs.keys(), line=lineno, col=col)
        defs[name] = node
        referenced |= used

    fields = dict(declared)
    for name in _prescan_fields(body):
        if name not in defs and name not in fields:
            fields[name] = "real"
    # pair phi / phistar into one complex field
    for name in list(fields):
        if name.endswith("star") and name[:-4] in fields:
            fields.pop(name)
            fields[name[:-4]] = "complex"
    names = set()
    for name, kind in fields.items():
        names.add(name)
        if kind == "complex":
            names.add(name + "star")
    end = Token("EOF", "", *last)
    p = _Parser(body, names, set(defs), end)
    expr = p.parse()
    if free_occurrences(expr):
        idx = sorted({n for n, _ in free_occurrences(expr)})
        raise IndexDisciplineError(f"free index left over: {', '.join(idx)}", body[0].line, body[0].col)
    referenced |= p.params
    return Document(expr, dim, fields, params, defs, referenced)
