"""Synthetic setplay corpora with a known family structure.

Each family shares one template (players, step count, condition trees,
behaviors); its members differ by Gaussian jitter on player positions and by
occasional swaps of two players' behaviors within a step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sexpr import Atom, SExprNode, SList, serialize

PLAY_MODES = ("play_on", "kick_in", "goal_kick", "ko_our")
MODE_ATOM = {"play_on": "play_on", "kick_in": "ki_our", "goal_kick": "gk_our", "ko_our": "ko_our"}

FIELD_X = (-15.0, 15.0)
FIELD_Y = (-10.0, 10.0)


@dataclass(frozen=True)
class FamilySpec:
    play_mode: str
    count: int
    players_range: tuple[int, int] = (1, 8)
    steps_range: tuple[int, int] = (2, 6)
    jitter: float = 0.1
    seed: int = 0
    swap_prob: float = 0.1
    opponents_range: tuple[int, int] = (0, 1)

    def __post_init__(self):
        problems = []
        if self.play_mode not in PLAY_MODES:
            problems.append(f"play_mode must be one of {PLAY_MODES}")
        if self.count < 1:
            problems.append("count must be >= 1")
        for name in ("players_range", "steps_range", "opponents_range"):
            lo, hi = getattr(self, name)
            floor = 0 if name == "opponents_range" else 1
            if lo < floor or hi < lo:
                problems.append(f"{name} must satisfy {floor} <= lo <= hi")
        if self.players_range[1] > 10:
            problems.append("players_range upper bound must be <= 10")
        if self.opponents_range[1] > 11:
            problems.append("opponents_range upper bound must be <= 11")
        if self.jitter < 0:
            problems.append("jitter must be >= 0")
        if not 0 <= self.swap_prob <= 1:
            problems.append("swap_prob must lie in [0, 1]")
        if self.seed < 0:
            problems.append("seed must be non-negative")
        if problems:
            raise ValueError("; ".join(problems))


def reference_specs(seed: int = 0, jitter: float = 0.1, swap_prob: float = 0.1) -> list[FamilySpec]:
    """18 plans in four play-mode families of 5, 4, 4 and 5."""
    counts = {"play_on": 5, "kick_in": 4, "goal_kick": 4, "ko_our": 5}
    return [FamilySpec(mode, n, jitter=jitter, seed=seed, swap_prob=swap_prob) for mode, n in counts.items()]


# ---------------------------------------------------------------------------
# S-expression builders


def _a(x) -> Atom:
    return Atom(x if isinstance(x, str) else _num(x))


def _num(v) -> str:
    if float(v).is_integer():
        return str(int(v))
    text = f"{float(v):.3f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def L(*items) -> SList:
    return SList(tuple(i if isinstance(i, (Atom, SList)) else _a(i) for i in items))


def role(name: str) -> SList:
    return L("playerRole", ":roleName", name)


def opp(number: int) -> SList:
    return L("player", ":team", "opp", ":number", number)


def pt(x: float, y: float) -> SList:
    return L("pt", ":x", x, ":y", y)


def _playm(mode: str) -> SList:
    return L("playm", mode)


def abort_condition(play_mode: str) -> SExprNode:
    """One tree shape per play mode."""
    bowner = L("bowner", ":players", L("list", *[opp(k) for k in range(1, 12)]))
    mode = MODE_ATOM[play_mode]
    if play_mode == "ko_our":
        return L("or", bowner, L("and", L("not", _playm("play_on")), L("not", _playm(mode))))
    if play_mode == "play_on":
        return L("or", bowner, L("not", _playm("play_on")))
    if play_mode == "kick_in":
        return L("and", L("not", _playm("play_on")), L("not", _playm(mode)))
    return L("or", bowner, L("not", _playm(mode)), L("not", _playm("play_on")))


# ---------------------------------------------------------------------------
# templates


@dataclass
class _Step:
    ours: list[str]
    opps: list[int]
    positions: dict = field(default_factory=dict)  # player key -> (x, y)
    actions: dict = field(default_factory=dict)  # role name -> action SList
    condition: SExprNode | None = None
    wait: float = 0.0
    abort: float = 20.0


@dataclass
class _Template:
    mode: str
    ours: list[str]
    opps: list[int]
    steps: list[_Step]


def _grid_point(rng) -> tuple[float, float]:
    x = rng.integers(int(FIELD_X[0] * 2), int(FIELD_X[1] * 2) + 1) / 2
    y = rng.integers(int(FIELD_Y[0] * 2), int(FIELD_Y[1] * 2) + 1) / 2
    return float(x), float(y)


def _template(spec: FamilySpec, rng: np.random.Generator) -> _Template:
    n_ours = int(rng.integers(spec.players_range[0], spec.players_range[1] + 1))
    n_opps = int(rng.integers(spec.opponents_range[0], spec.opponents_range[1] + 1))
    n_steps = int(rng.integers(spec.steps_range[0], spec.steps_range[1] + 1))
    numbers = sorted(rng.choice(np.arange(2, 12), size=n_ours, replace=False))
    ours = [f"Player{k}" for k in numbers]
    opps = sorted(int(k) for k in rng.choice(np.arange(1, 12), size=n_opps, replace=False))
    steps = []
    holder = ours[0]
    for z in range(n_steps):
        if z == 0 or len(ours) == 1:
            members = list(ours)
        else:
            k = int(rng.integers(1, len(ours) + 1))
            members = [p for p in ours if p in set(rng.choice(ours, size=k, replace=False)) or p == holder]
        step = _Step(members, list(opps))
        for p in members:
            step.positions[p] = _grid_point(rng)
        for o in opps:
            step.positions[o] = _grid_point(rng)
        step.condition = _playm(MODE_ATOM[spec.play_mode]) if z == 0 else L("bowner", ":players", L("list", role(holder)))
        step.wait = float(rng.integers(0, 3))
        step.abort = step.wait + float(rng.integers(10, 31))
        if z < n_steps - 1:
            receiver = holder
            for p in members:
                if p == holder and len(members) > 1:
                    receiver = str(rng.choice([q for q in members if q != holder]))
                    step.actions[p] = L("bto", ":players", L("list", role(receiver)), ":type", "normal")
                else:
                    kind = str(rng.choice(("mov", "pos", "intercept")))
                    if kind == "intercept":
                        step.actions[p] = L("intercept")
                    else:
                        step.actions[p] = L(kind, ":region", pt(*_grid_point(rng)))
            holder = receiver
        steps.append(step)
    return _Template(spec.play_mode, ours, opps, steps)


def _clip(v: float, lo: float, hi: float) -> float:
    return float(min(hi, max(lo, v)))


def _instance(t: _Template, spec: FamilySpec, rng: np.random.Generator, name: str, sp_id: int) -> SList:
    steps = []
    for z, st in enumerate(t.steps):
        actions = dict(st.actions)
        if len(actions) >= 2 and rng.random() < spec.swap_prob:
            a, b = rng.choice(sorted(actions), size=2, replace=False)
            actions[a], actions[b] = actions[b], actions[a]
        participants = []
        for key in st.ours + st.opps:
            x, y = st.positions[key]
            if spec.jitter > 0:
                x = round(_clip(x + rng.normal(0, spec.jitter), *FIELD_X), 3)
                y = round(_clip(y + rng.normal(0, spec.jitter), *FIELD_Y), 3)
            who = role(key) if isinstance(key, str) else opp(key)
            participants.append(L("at", who, pt(x, y)))
        if z < len(t.steps) - 1:
            directives = [L("do", ":players", L("list", role(p)), ":actions", L("list", actions[p]))
                          for p in st.ours if p in actions]
            transition = L("nextStep", ":id", z + 1, ":directives", L("list", *directives))
        else:
            transition = L("finish")
        steps.append(L(
            "step", ":id", z, ":waitTime", st.wait, ":abortTime", st.abort,
            ":participants", L("list", *participants),
            ":condition", st.condition,
            ":leadPlayer", role(st.ours[0]),
            ":transitions", L("list", transition),
        ))
    return L(
        "setplay", ":name", name, ":id", sp_id, ":invertible", "false",
        ":players", L("list", *[role(p) for p in t.ours], *[opp(o) for o in t.opps]),
        ":abortCond", abort_condition(t.mode),
        ":steps", L("seq", *steps),
    )


def generate_trees(specs) -> list[tuple[str, SList]]:
    out = []
    sp_id = 1
    for fi, spec in enumerate(specs):
        mode_index = PLAY_MODES.index(spec.play_mode)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, mode_index, fi]))
        template = _template(spec, rng)
        for k in range(spec.count):
            name = f"{spec.play_mode}_{fi}_{k}"
            out.append((name, _instance(template, spec, rng, name, sp_id)))
            sp_id += 1
    return out


def generate_corpus(specs) -> list[str]:
    """Setplay source texts for every family in ``specs``, in order."""
    return [serialize(tree, indent=2) + "\n" for _, tree in generate_trees(specs)]


def generate_named_corpus(specs) -> list[tuple[str, str]]:
    return [(name, serialize(tree, indent=2) + "\n") for name, tree in generate_trees(specs)]
