"""Reading and writing the setplay S-expression syntax.

Atoms are kept as raw strings. Keyword atoms (``:name``) are ordinary atoms;
interpreting them is left to :mod:`setplay_fcm.model`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

OPEN = "open"
CLOSE = "close"
ATOM = "atom"

_DELIMS = "()"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int = 1
    column: int = 1

    @property
    def span(self) -> tuple[int, int]:
        return (self.line, self.column)


class SExprError(Exception):
    """Base class for syntax errors; carries the (line, column) of the fault."""

    def __init__(self, message: str, span: tuple[int, int]):
        self.span = span
        super().__init__(f"{message} at line {span[0]}, column {span[1]}")


class UnbalancedParens(SExprError):
    pass


class UnexpectedEOF(SExprError):
    pass


@dataclass(frozen=True)
class Atom:
    text: str
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def __post_init__(self):
        if not self.text or any(c.isspace() or c in _DELIMS for c in self.text):
            raise ValueError(f"invalid atom text {self.text!r}")

    @property
    def is_keyword(self) -> bool:
        return self.text.startswith(":") and len(self.text) > 1


@dataclass(frozen=True)
class SList:
    children: tuple["SExprNode", ...] = ()
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))

    @property
    def head(self) -> str | None:
        """Text of the first child when it is an atom."""
        if self.children and isinstance(self.children[0], Atom):
            return self.children[0].text
        return None

    def __len__(self) -> int:
        return len(self.children)

    def __iter__(self) -> Iterator["SExprNode"]:
        return iter(self.children)

    def __getitem__(self, i):
        return self.children[i]


SExprNode = Union[Atom, SList]


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch == "(":
            tokens.append(Token(OPEN, ch, line, col))
            col += 1
            i += 1
        elif ch == ")":
            tokens.append(Token(CLOSE, ch, line, col))
            col += 1
            i += 1
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in _DELIMS:
                i += 1
            tokens.append(Token(ATOM, text[start:i], line, col))
            col += i - start
    return tokens


def parse(tokens: Sequence[Token]) -> SExprNode:
    """Build a tree from ``tokens``.

    A single top-level form is returned as is; several forms (or none) are
    wrapped in a synthetic root list.
    """
    stack: list[tuple[tuple[int, int], list[SExprNode]]] = [((1, 1), [])]
    last_span = (1, 1)
    for tok in tokens:
        last_span = tok.span
        if tok.kind == OPEN:
            stack.append((tok.span, []))
        elif tok.kind == CLOSE:
            if len(stack) == 1:
                raise UnbalancedParens("unexpected ')'", tok.span)
            span, children = stack.pop()
            stack[-1][1].append(SList(tuple(children), span))
        elif tok.kind == ATOM:
            stack[-1][1].append(Atom(tok.text, tok.span))
        else:
            raise ValueError(f"unknown token kind {tok.kind!r}")
    if len(stack) > 1:
        raise UnexpectedEOF(
            f"{len(stack) - 1} unclosed '(' (innermost opened at line "
            f"{stack[-1][0][0]}, column {stack[-1][0][1]})",
            last_span,
        )
    forms = stack[0][1]
    if len(forms) == 1:
        return forms[0]
    return SList(tuple(forms), (1, 1))


def loads(text: str) -> SExprNode:
    return parse(tokenize(text))


def serialize(node: SExprNode, indent: int | None = None) -> str:
    """Render ``node`` as text.

    With ``indent=None`` the output is a single line. Otherwise nested lists
    whose one-line form is long are broken onto indented lines.
    """
    if indent is None:
        return _flat(node)
    return "\n".join(_pretty(node, 0, indent))


def _flat(node: SExprNode) -> str:
    if isinstance(node, Atom):
        return node.text
    return "(" + " ".join(_flat(c) for c in node.children) + ")"


_WIDTH = 88


def _pretty(node: SExprNode, depth: int, indent: int) -> list[str]:
    pad = " " * (depth * indent)
    flat = _flat(node)
    if isinstance(node, Atom) or len(pad) + len(flat) <= _WIDTH:
        return [pad + flat]
    # keep the head and any ":key atom" pairs on the opening line
    children = list(node.children)
    first = [_flat(children.pop(0))] if children and isinstance(children[0], Atom) else []
    while len(children) >= 2 and isinstance(children[0], Atom) and isinstance(children[1], Atom):
        first += [children[0].text, children[1].text]
        children = children[2:]
    lines = [pad + "(" + " ".join(first)]
    for child in children:
        if isinstance(child, Atom) and child.is_keyword:
            lines.append(" " * ((depth + 1) * indent) + child.text)
        else:
            lines.extend(_pretty(child, depth + 1, indent))
    lines[-1] += ")"
    return lines
