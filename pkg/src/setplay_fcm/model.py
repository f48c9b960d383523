"""Setplay domain objects and the two-level feature schema.

A parsed S-expression tree is interpreted as a :class:`SetplayRecord`
(:func:`extract_setplay`), checked with :func:`validate`, and flattened into
one :class:`SetplayFeatures` row holding a :class:`StepFeatures` row per step
(:func:`extract_features`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .sexpr import Atom, SExprNode, SList

TERMINAL_STEP = -1
IDLE = "idle()"

OURS = "ours"
OPP = "opp"
_TEAM_ALIASES = {"our": OURS, "ours": OURS, "opp": OPP, "their": OPP, "theirs": OPP}

_OPERATORS = {"and", "or", "not"}
_TERMINAL_TRANSITIONS = {"finish", "abort"}


class SetplayError(Exception):
    pass


class MissingField(SetplayError):
    def __init__(self, name: str, path: str = ""):
        self.name = name
        self.path = path
        super().__init__(f"missing field {name!r}" + (f" in {path}" if path else ""))


class TypeMismatch(SetplayError):
    def __init__(self, path: str, detail: str = ""):
        self.path = path
        super().__init__(f"type mismatch at {path}" + (f": {detail}" if detail else ""))


class DuplicateStepId(SetplayError):
    def __init__(self, step_id: int):
        self.step_id = step_id
        super().__init__(f"duplicate step id {step_id}")


class InvalidSetplay(SetplayError):
    """Raised by strict extraction when :func:`validate` reports violations."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class PlayerRef:
    role_name: str | None = None
    team: str | None = None
    number: int | None = None

    def __post_init__(self):
        by_role = self.role_name is not None
        by_number = self.team is not None or self.number is not None
        if by_role == by_number:
            raise ValueError("a player is identified by role name or by team+number, not both")
        if by_number:
            if self.team not in (OURS, OPP):
                raise ValueError(f"unknown team {self.team!r}")
            if self.number is None or self.number < 1:
                raise ValueError("player number must be >= 1")

    @property
    def is_ours(self) -> bool:
        return self.role_name is not None or self.team == OURS

    def __str__(self) -> str:
        if self.role_name is not None:
            return self.role_name
        return f"{self.team}{self.number}"


@dataclass(frozen=True)
class BoolTree:
    label: str
    children: tuple["BoolTree", ...] = ()

    def __post_init__(self):
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        if not self.label:
            raise ValueError("empty node label")
        if self.label == "not" and len(self.children) != 1:
            raise ValueError("'not' takes exactly one operand")
        if self.label in ("and", "or") and len(self.children) < 2:
            raise ValueError(f"'{self.label}' takes at least two operands")
        if self.label not in _OPERATORS and self.children:
            raise ValueError(f"predicate leaf {self.label!r} cannot have children")

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def to_dict(self) -> dict:
        return {"label": self.label, "children": [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, d: dict) -> "BoolTree":
        return cls(d["label"], tuple(cls.from_dict(c) for c in d.get("children", ())))

    def __str__(self) -> str:
        if not self.children:
            return self.label
        return f"{self.label}(" + ",".join(str(c) for c in self.children) + ")"


TRUE_TREE = BoolTree("true")


@dataclass(frozen=True)
class Behavior:
    actor: PlayerRef
    action_string: str


@dataclass(frozen=True)
class Transition:
    next_step_id: int
    directives: tuple[Behavior, ...] = ()
    condition: BoolTree | None = None


@dataclass(frozen=True)
class StepRecord:
    id: int
    wait_time: float = 0.0
    abort_time: float | None = None
    participants_ours: tuple[tuple[PlayerRef, tuple[float, float]], ...] = ()
    participants_theirs: tuple[tuple[PlayerRef, tuple[float, float]], ...] = ()
    condition: BoolTree = TRUE_TREE
    lead_player: PlayerRef | None = None
    transitions: tuple[Transition, ...] = ()


@dataclass(frozen=True)
class SetplayRecord:
    name: str
    id: int
    invertible: bool = False
    players: tuple[PlayerRef, ...] = ()
    abort_cond: BoolTree = TRUE_TREE
    steps: tuple[StepRecord, ...] = ()
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def step(self, step_id: int) -> StepRecord:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise KeyError(step_id)


@dataclass(frozen=True)
class StepFeatures:
    our_players_in_step: float
    their_players_in_step: float
    wait_time: float
    abort_time: float
    our_players_list: tuple[tuple[float, float], ...]
    their_players_list: tuple[tuple[float, float], ...]
    next_step: float
    condition: BoolTree
    behaviors_list: tuple[str, ...]


@dataclass(frozen=True)
class SetplayFeatures:
    our_players_number: float
    their_players_number: float
    abort_condition: BoolTree
    steps_count: float
    steps_list: tuple[StepFeatures, ...] = ()
    name: str = field(default="", compare=False)


# ---------------------------------------------------------------------------
# S-expression helpers


def _keywords(node: SList, path: str) -> tuple[dict[str, SExprNode], list[SExprNode]]:
    """Split ``(head :k v ... positional ...)`` into keyword map and positionals."""
    kw: dict[str, SExprNode] = {}
    positional: list[SExprNode] = []
    items = list(node.children[1:])
    i = 0
    while i < len(items):
        item = items[i]
        if isinstance(item, Atom) and item.is_keyword:
            if i + 1 >= len(items):
                raise TypeMismatch(f"{path}/{item.text}", "keyword without value")
            kw[item.text[1:]] = items[i + 1]
            i += 2
        else:
            positional.append(item)
            i += 1
    return kw, positional


def _expect_list(node: SExprNode, path: str, head: str | None = None) -> SList:
    if not isinstance(node, SList):
        raise TypeMismatch(path, f"expected a list, got atom {node.text!r}")
    if head is not None and node.head != head:
        raise TypeMismatch(path, f"expected ({head} ...), got ({node.head} ...)")
    return node


def _atom(node: SExprNode, path: str) -> str:
    if not isinstance(node, Atom):
        raise TypeMismatch(path, "expected an atom")
    return node.text


def _int(node: SExprNode, path: str) -> int:
    text = _atom(node, path)
    try:
        value = float(text)
    except ValueError:
        raise TypeMismatch(path, f"expected an integer, got {text!r}") from None
    if not value.is_integer():
        raise TypeMismatch(path, f"expected an integer, got {text!r}")
    return int(value)


def _real(node: SExprNode, path: str) -> float:
    text = _atom(node, path)
    try:
        return float(text)
    except ValueError:
        raise TypeMismatch(path, f"expected a number, got {text!r}") from None


def _require(kw: dict, name: str, path: str) -> SExprNode:
    if name not in kw:
        raise MissingField(name, path)
    return kw[name]


def _items(node: SExprNode, path: str, heads=("list", "seq")) -> tuple[SExprNode, ...]:
    lst = _expect_list(node, path)
    if lst.head not in heads:
        raise TypeMismatch(path, f"expected one of {heads}, got ({lst.head} ...)")
    return lst.children[1:]


def normalize_number(text: str) -> str:
    """Canonical text for numeric atoms; non-numeric text is returned unchanged."""
    try:
        value = float(text)
    except ValueError:
        return text
    if value != value or value in (float("inf"), float("-inf")):
        return text
    if value.is_integer():
        return str(int(value))
    return repr(value)


def parse_player(node: SExprNode, path: str) -> PlayerRef:
    lst = _expect_list(node, path)
    kw, _ = _keywords(lst, path)
    if lst.head == "playerRole":
        return PlayerRef(role_name=_atom(_require(kw, "roleName", path), f"{path}/roleName"))
    if lst.head == "player":
        team_text = _atom(_require(kw, "team", path), f"{path}/team")
        if team_text not in _TEAM_ALIASES:
            raise TypeMismatch(f"{path}/team", f"unknown team {team_text!r}")
        number = _int(_require(kw, "number", path), f"{path}/number")
        if number < 1:
            raise TypeMismatch(f"{path}/number", "player numbers start at 1")
        return PlayerRef(team=_TEAM_ALIASES[team_text], number=number)
    raise TypeMismatch(path, f"expected playerRole or player, got ({lst.head} ...)")


def parse_point(node: SExprNode, path: str) -> tuple[float, float]:
    lst = _expect_list(node, path, "pt")
    kw, _ = _keywords(lst, path)
    return (_real(_require(kw, "x", path), f"{path}/x"), _real(_require(kw, "y", path), f"{path}/y"))


def canonical_value(node: SExprNode) -> str:
    """Deterministic flat text for an argument value inside actions and predicates."""
    if isinstance(node, Atom):
        return normalize_number(node.text)
    head = node.head
    if head in ("list", "seq"):
        return ",".join(canonical_value(c) for c in node.children[1:])
    if head in ("playerRole", "player"):
        try:
            return str(parse_player(node, head))
        except SetplayError:
            pass
    if head == "pt":
        kw, positional = _keywords(node, "pt")
        if "x" in kw and "y" in kw:
            return f"{canonical_value(kw['x'])},{canonical_value(kw['y'])}"
    return canonical_form(node)


def canonical_form(node: SExprNode) -> str:
    """``name(arg,...)`` for a form such as ``(bto :players (list ...) :type normal)``.

    Keyword values and positional arguments are emitted in source order; the
    keyword names themselves are dropped.
    """
    if isinstance(node, Atom):
        return f"{normalize_number(node.text)}()"
    if not node.children:
        return "()"
    name = canonical_value(node.children[0]) if isinstance(node.children[0], Atom) else canonical_form(node.children[0])
    args = []
    items = node.children[1:]
    i = 0
    while i < len(items):
        item = items[i]
        if isinstance(item, Atom) and item.is_keyword and i + 1 < len(items):
            args.append(canonical_value(items[i + 1]))
            i += 2
        else:
            args.append(canonical_value(item))
            i += 1
    return f"{name}(" + ",".join(args) + ")"


def parse_condition(node: SExprNode, path: str = "condition") -> BoolTree:
    """Boolean expression tree; predicates fold their arguments into the label."""
    if isinstance(node, Atom):
        return BoolTree(node.text)
    head = node.head
    if head in _OPERATORS:
        operands = tuple(
            parse_condition(c, f"{path}/{head}[{i}]") for i, c in enumerate(node.children[1:])
        )
        try:
            return BoolTree(head, operands)
        except ValueError as exc:
            raise TypeMismatch(path, str(exc)) from None
    if head is None:
        raise TypeMismatch(path, "condition must start with an operator or predicate name")
    return BoolTree(canonical_form(node))


# ---------------------------------------------------------------------------
# extraction


def _parse_directives(node: SExprNode, path: str) -> tuple[Behavior, ...]:
    out = []
    for i, d in enumerate(_items(node, path)):
        dpath = f"{path}[{i}]"
        dl = _expect_list(d, dpath, "do")
        kw, _ = _keywords(dl, dpath)
        actors = [parse_player(p, f"{dpath}/players[{k}]") for k, p in
                  enumerate(_items(_require(kw, "players", dpath), f"{dpath}/players"))]
        actions = [canonical_form(a) for a in _items(_require(kw, "actions", dpath), f"{dpath}/actions")]
        action_string = "+".join(actions) if actions else IDLE
        out.extend(Behavior(actor, action_string) for actor in actors)
    return tuple(out)


def _parse_transition(node: SExprNode, path: str) -> Transition:
    lst = _expect_list(node, path)
    if lst.head in _TERMINAL_TRANSITIONS:
        return Transition(TERMINAL_STEP)
    if lst.head != "nextStep":
        raise TypeMismatch(path, f"unknown transition ({lst.head} ...)")
    kw, _ = _keywords(lst, path)
    target = _int(_require(kw, "id", path), f"{path}/id")
    directives = _parse_directives(kw["directives"], f"{path}/directives") if "directives" in kw else ()
    condition = parse_condition(kw["condition"], f"{path}/condition") if "condition" in kw else None
    return Transition(target, directives, condition)


def _parse_step(node: SExprNode, path: str) -> StepRecord:
    lst = _expect_list(node, path, "step")
    kw, _ = _keywords(lst, path)
    step_id = _int(_require(kw, "id", path), f"{path}/id")
    path = f"step[{step_id}]"
    ours, theirs = [], []
    if "participants" in kw:
        for i, p in enumerate(_items(kw["participants"], f"{path}/participants")):
            ppath = f"{path}/participants[{i}]"
            at = _expect_list(p, ppath, "at")
            if len(at.children) != 3:
                raise TypeMismatch(ppath, "expected (at PLAYER POINT)")
            player = parse_player(at.children[1], f"{ppath}/player")
            point = parse_point(at.children[2], f"{ppath}/pt")
            (ours if player.is_ours else theirs).append((player, point))
    return StepRecord(
        id=step_id,
        wait_time=_real(kw["waitTime"], f"{path}/waitTime") if "waitTime" in kw else 0.0,
        abort_time=_real(kw["abortTime"], f"{path}/abortTime") if "abortTime" in kw else None,
        participants_ours=tuple(ours),
        participants_theirs=tuple(theirs),
        condition=parse_condition(kw["condition"], f"{path}/condition") if "condition" in kw else TRUE_TREE,
        lead_player=parse_player(kw["leadPlayer"], f"{path}/leadPlayer") if "leadPlayer" in kw else None,
        transitions=tuple(
            _parse_transition(t, f"{path}/transitions[{i}]")
            for i, t in enumerate(_items(kw["transitions"], f"{path}/transitions"))
        ) if "transitions" in kw else (),
    )


_SETPLAY_KEYS = {"name", "id", "invertible", "players", "abortCond", "steps"}


def extract_setplay(root: SExprNode, strict: bool = True) -> SetplayRecord:
    """Interpret a ``(setplay ...)`` tree.

    Structural problems raise :class:`MissingField` / :class:`TypeMismatch`.
    With ``strict`` the record is also validated and the first semantic
    problem is raised (:class:`DuplicateStepId` or :class:`InvalidSetplay`);
    pass ``strict=False`` to get the raw record and call :func:`validate`.
    """
    lst = _expect_list(root, "setplay", "setplay")
    kw, _ = _keywords(lst, "setplay")
    name = _atom(_require(kw, "name", "setplay"), "setplay/name")
    sp_id = _int(_require(kw, "id", "setplay"), "setplay/id")
    players = tuple(
        parse_player(p, f"setplay/players[{i}]")
        for i, p in enumerate(_items(kw["players"], "setplay/players"))
    ) if "players" in kw else ()
    steps = tuple(
        _parse_step(s, f"setplay/steps[{i}]")
        for i, s in enumerate(_items(_require(kw, "steps", "setplay"), "setplay/steps"))
    )
    invertible = _atom(kw["invertible"], "setplay/invertible").lower() == "true" if "invertible" in kw else False
    abort_cond = parse_condition(kw["abortCond"], "setplay/abortCond") if "abortCond" in kw else TRUE_TREE
    extra = {k: v for k, v in kw.items() if k not in _SETPLAY_KEYS}
    record = SetplayRecord(name, sp_id, invertible, players, abort_cond, steps, extra)
    if strict:
        violations = validate(record)
        dup = [v for v in violations if v.kind == "DuplicateStepId"]
        if dup:
            raise DuplicateStepId(dup[0].detail["id"])
        if violations:
            raise InvalidSetplay(violations)
    return record


@dataclass(frozen=True)
class Violation:
    kind: str
    path: str
    detail: dict = field(default_factory=dict, compare=False)

    def __str__(self) -> str:
        return f"{self.kind} at {self.path}"


def validate(sp: SetplayRecord) -> list[Violation]:
    """Semantic checks on a record; returns the violations found (never raises)."""
    out: list[Violation] = []
    ids = [s.id for s in sp.steps]
    seen = set()
    for sid in ids:
        if sid in seen:
            out.append(Violation("DuplicateStepId", f"steps/{sid}", {"id": sid}))
        seen.add(sid)
    if sp.steps and 0 not in seen:
        out.append(Violation("MissingInitialStep", "steps", {}))
    declared = set(sp.players)
    for step in sp.steps:
        base = f"step[{step.id}]"
        for ti, t in enumerate(step.transitions):
            if t.next_step_id != TERMINAL_STEP and t.next_step_id not in seen:
                out.append(Violation("DanglingTransition", f"{base}/transitions[{ti}]",
                                     {"from": step.id, "to": t.next_step_id}))
            for b in t.directives:
                if b.actor not in declared:
                    out.append(Violation("UndeclaredPlayer", f"{base}/transitions[{ti}]/directives",
                                         {"player": str(b.actor)}))
        for player, _ in step.participants_ours + step.participants_theirs:
            if player not in declared:
                out.append(Violation("UndeclaredPlayer", f"{base}/participants", {"player": str(player)}))
        if step.lead_player is not None and step.lead_player not in declared:
            out.append(Violation("UndeclaredPlayer", f"{base}/leadPlayer", {"player": str(step.lead_player)}))
        if step.wait_time < 0:
            out.append(Violation("NegativeTime", f"{base}/waitTime", {"value": step.wait_time}))
        if step.abort_time is not None:
            if step.abort_time < 0:
                out.append(Violation("NegativeTime", f"{base}/abortTime", {"value": step.abort_time}))
            if step.abort_time < step.wait_time:
                out.append(Violation("TimeOrder", base,
                                     {"waitTime": step.wait_time, "abortTime": step.abort_time}))
    return out


def extract_step_features(sp: SetplayRecord, step: StepRecord) -> StepFeatures:
    """Level-2 row for ``step``; the first listed transition supplies the next
    step, the condition and the behaviors."""
    if step.transitions:
        primary = step.transitions[0]
        next_step = primary.next_step_id
        condition = primary.condition if primary.condition is not None else step.condition
        actions: dict[PlayerRef, list[str]] = {}
        for b in primary.directives:
            actions.setdefault(b.actor, []).append(b.action_string)
    else:
        next_step, condition, actions = TERMINAL_STEP, TRUE_TREE, {}
    behaviors = tuple("+".join(actions[p]) if p in actions else IDLE for p, _ in step.participants_ours)
    return StepFeatures(
        our_players_in_step=len(step.participants_ours),
        their_players_in_step=len(step.participants_theirs),
        wait_time=float(step.wait_time),
        abort_time=float(step.abort_time) if step.abort_time is not None else 0.0,
        our_players_list=tuple(pt for _, pt in step.participants_ours),
        their_players_list=tuple(pt for _, pt in step.participants_theirs),
        next_step=next_step,
        condition=condition,
        behaviors_list=behaviors,
    )


def extract_features(sp: SetplayRecord) -> SetplayFeatures:
    steps = sorted(sp.steps, key=lambda s: s.id)
    return SetplayFeatures(
        our_players_number=sum(1 for p in sp.players if p.is_ours),
        their_players_number=sum(1 for p in sp.players if not p.is_ours),
        abort_condition=sp.abort_cond,
        steps_count=len(steps),
        steps_list=tuple(extract_step_features(sp, s) for s in steps),
        name=sp.name,
    )


def features_from_text(text: str) -> SetplayFeatures:
    from .sexpr import loads

    return extract_features(extract_setplay(loads(text)))
