"""Symbolic action traces: prose reasoning followed by a fenced pyautogui script.

Coordinates in a script are always symbols (``x1``, ``y1`` ...) resolved through
a separate coordinate map, so a trace can be checked without trusting the
numbers inside the prose. Scripts use a closed set of nine verbs.
"""

from __future__ import annotations

import ast
import io
import re
import tokenize
from collections.abc import Collection, Sequence
from dataclasses import dataclass, field
from itertools import groupby
from typing import Any, Literal, get_args

from actsynth.errors import TraceError, TraceParseError
from actsynth.geometry import Point

ActionClass = Literal["ZeroSet", "OneSet", "TwoSetCombined", "NSet"]
CoordinateSpace = Literal["pixels", "normalized"]
Template = Literal["click", "drag", "draw", "click_type", "scroll", "hotkey", "typewrite"]
ViolationName = Literal[
    "SymbolMismatch",
    "UnknownElement",
    "OutOfRange",
    "CoordinateLeak",
    "ActionTypeMismatch",
    # batch-level rejections of generated entries
    "ParseError",
    "CountExceeded",
    "CenterQuota",
    "ControlPointQuota",
    "Ungrounded",
]

TEMPLATES: tuple[str, ...] = get_args(Template)
COORDINATE_SPACES: tuple[str, ...] = get_args(CoordinateSpace)
MODULE_NAME = "pyautogui"

_FENCE_RE = re.compile(r"```[ \t]*(?:python|py)?[ \t]*\n(.*?)```", re.DOTALL)
_LEAK_RES = (
    re.compile(r"\(\s*-?\d+(?:\.\d+)?\s*,\s*-?\d+(?:\.\d+)?\s*\)"),
    re.compile(r"\b[xy]\w{0,3}\s*[:=]\s*-?\d", re.IGNORECASE),
    re.compile(r"\b\d+(?:\.\d+)?\s*,\s*\d+(?:\.\d+)?\b(?=\s*(?:px|pixels?)\b)", re.IGNORECASE),
)


@dataclass(frozen=True)
class VerbSpec:
    point: Literal["required", "optional", "none"]
    keywords: frozenset[str] = frozenset()
    min_values: int = 0
    max_values: int = 0
    value_types: tuple[type, ...] = ()


VERBS: dict[str, VerbSpec] = {
    "scroll": VerbSpec("none", min_values=1, max_values=1, value_types=(int,)),
    "typewrite": VerbSpec("none", frozenset({"interval"}), 1, 1, (str, list)),
    "hotkey": VerbSpec("none", frozenset({"interval"}), 1, 8, (str,)),
    "type": VerbSpec("none", frozenset({"interval"}), 1, 1, (str,)),
    "moveTo": VerbSpec("required", frozenset({"duration"})),
    "click": VerbSpec("required", frozenset({"clicks", "button", "interval", "duration"})),
    "mouseDown": VerbSpec("optional", frozenset({"button"})),
    "mouseUp": VerbSpec("optional", frozenset({"button"})),
    "dragTo": VerbSpec("required", frozenset({"duration", "button"})),
}


@dataclass(frozen=True)
class ActionStatement:
    verb: str
    point: tuple[str, str] | None = None
    values: tuple[Any, ...] = ()
    args: dict[str, Any] = field(default_factory=dict)

    def render(self) -> str:
        parts = [repr(v) for v in self.values]
        if self.point is not None:
            parts += [f"x={self.point[0]}", f"y={self.point[1]}"]
        parts += [f"{k}={v!r}" for k, v in self.args.items()]
        return f"{MODULE_NAME}.{self.verb}({', '.join(parts)})"


@dataclass
class ActionTrace:
    chain_of_thought: str
    script: list[ActionStatement]
    coordinate_map: dict[str, float] = field(default_factory=dict)
    used_elements: list[str] = field(default_factory=list)
    action_type: str = ""
    coordinate_space: CoordinateSpace = "pixels"


@dataclass(frozen=True)
class Violation:
    name: ViolationName
    message: str

    def __str__(self) -> str:
        return f"{self.name}: {self.message}"


# -- parsing


def _reject_comments(code: str) -> None:
    try:
        for tok in tokenize.generate_tokens(io.StringIO(code).readline):
            if tok.type == tokenize.COMMENT:
                raise TraceParseError("comments are not allowed in the script", tok.start[0])
    except tokenize.TokenError as e:
        raise TraceParseError(f"cannot tokenize script: {e.args[0]}") from e


def _verb_name(func: ast.expr, line: int) -> str:
    if isinstance(func, ast.Attribute) and isinstance(func.value, ast.Name) and func.value.id == MODULE_NAME:
        name = func.attr
    elif isinstance(func, ast.Name):
        name = func.id
    else:
        raise TraceParseError(f"calls must be {MODULE_NAME}.<verb>(...)", line)
    if name not in VERBS:
        raise TraceParseError(f"unknown verb {name!r}", line)
    return name


def _symbol(node: ast.expr, line: int) -> str:
    if not isinstance(node, ast.Name):
        raise TraceParseError("coordinates must be symbols, not literals", line)
    return node.id


def _literal(node: ast.expr, line: int) -> Any:
    if isinstance(node, ast.Name):
        raise TraceParseError(f"symbol {node.id!r} used outside a coordinate argument", line)
    try:
        return ast.literal_eval(node)
    except ValueError as e:
        raise TraceParseError(f"arguments must be literals: {e}", line) from e


def _statement(call: ast.Call, line: int) -> ActionStatement:
    verb = _verb_name(call.func, line)
    signature = VERBS[verb]
    positional = list(call.args)
    keywords: dict[str, ast.expr] = {}
    for kw in call.keywords:
        if kw.arg is None:
            raise TraceParseError("**kwargs are not allowed", line)
        keywords[kw.arg] = kw.value

    x_node, y_node = keywords.pop("x", None), keywords.pop("y", None)
    if signature.point != "none" and x_node is None and y_node is None and len(positional) >= 2:
        if all(isinstance(n, ast.Name) for n in positional[:2]):
            x_node, y_node = positional[:2]
            positional = positional[2:]
    if (x_node is None) != (y_node is None):
        raise TraceParseError(f"{verb} needs both x and y", line)

    point = None
    if x_node is not None and y_node is not None:
        if signature.point == "none":
            raise TraceParseError(f"{verb} takes no coordinates", line)
        point = (_symbol(x_node, line), _symbol(y_node, line))
    elif signature.point == "required":
        raise TraceParseError(f"{verb} needs x and y", line)

    values = tuple(_literal(n, line) for n in positional)
    if not signature.min_values <= len(values) <= signature.max_values:
        raise TraceParseError(f"{verb} takes {signature.min_values}-{signature.max_values} positional values", line)
    if signature.value_types and not all(isinstance(v, signature.value_types) for v in values):
        expected = "/".join(t.__name__ for t in signature.value_types)
        raise TraceParseError(f"{verb} values must be {expected}", line)
    unknown = sorted(set(keywords) - signature.keywords)
    if unknown:
        raise TraceParseError(f"{verb} does not accept {', '.join(unknown)}", line)
    return ActionStatement(verb, point, values, {k: _literal(v, line) for k, v in keywords.items()})


def parse_script(code: str) -> list[ActionStatement]:
    _reject_comments(code)
    script = []
    for line_no, raw in enumerate(code.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(("import ", "from ")):
            raise TraceParseError("imports are not allowed in the script", line_no)
        try:
            node = ast.parse(line, mode="eval").body
        except SyntaxError as e:
            raise TraceParseError(f"invalid statement: {e.msg}", line_no) from e
        if not isinstance(node, ast.Call):
            raise TraceParseError("each line must be a single call", line_no)
        script.append(_statement(node, line_no))
    if not script:
        raise TraceParseError("script is empty")
    return script


def parse_trace(
    text: str,
    coordinate_map: dict[str, float] | None = None,
    used_elements: Sequence[str] = (),
    action_type: str = "",
    coordinate_space: CoordinateSpace = "pixels",
) -> ActionTrace:
    """Split a response into its reasoning and its script.

    The coordinate map, used elements and action type travel beside the
    response text and are attached unchanged.
    """
    fences = _FENCE_RE.findall(text)
    if not fences:
        raise TraceParseError("response has no fenced code block")
    if len(fences) > 1:
        raise TraceParseError(f"response has {len(fences)} fenced code blocks, expected one")
    cot = text[: text.index("```")].strip()
    return ActionTrace(
        chain_of_thought=cot,
        script=parse_script(fences[0]),
        coordinate_map=dict(coordinate_map or {}),
        used_elements=list(used_elements),
        action_type=action_type,
        coordinate_space=coordinate_space,
    )


def render_trace(trace: ActionTrace) -> str:
    body = "\n".join(s.render() for s in trace.script)
    block = f"```python\n{body}\n```"
    return f"{trace.chain_of_thought}\n\n{block}" if trace.chain_of_thought else block


# -- classification


def script_symbols(script: Sequence[ActionStatement]) -> list[str]:
    """Distinct coordinate symbols in order of first use."""
    seen: dict[str, None] = {}
    for s in script:
        if s.point is not None:
            seen.update(dict.fromkeys(s.point))
    return list(seen)


def classify_action(script: Sequence[ActionStatement]) -> ActionClass:
    n = len(script_symbols(script))
    if n % 2:
        raise TraceError(f"odd number of coordinate symbols ({n})")
    if n == 0:
        return "ZeroSet"
    if n == 2:
        return "OneSet"
    if n == 4:
        return "TwoSetCombined"
    return "NSet"


def derive_action_type(script: Sequence[ActionStatement]) -> str:
    """Action-type tag: the verb alone, or ``combined:`` with repeated verbs as ``Nx<verb>``."""
    if len(script) == 1:
        return script[0].verb
    parts = []
    for verb, run in groupby(s.verb for s in script):
        parts.append(f"Nx{verb}" if len(list(run)) >= 2 else verb)
    if len(parts) == 1:
        return f"combined:{parts[0]}"
    return f"combined:{' '.join(parts[:-1])} and {parts[-1]}"


def trace_points(trace: ActionTrace) -> list[Point]:
    points = []
    for s in trace.script:
        if s.point is None:
            continue
        xs, ys = s.point
        if xs not in trace.coordinate_map or ys not in trace.coordinate_map:
            raise TraceError(f"{s.verb}: symbols {xs}, {ys} missing from the coordinate map")
        points.append(Point(trace.coordinate_map[xs], trace.coordinate_map[ys]))
    return points


def leaks_coordinates(text: str) -> bool:
    return any(p.search(text) for p in _LEAK_RES)


# -- validation


def _axes(script: Sequence[ActionStatement]) -> dict[str, str]:
    axes = {}
    for s in script:
        if s.point is not None:
            axes.setdefault(s.point[0], "x")
            axes.setdefault(s.point[1], "y")
    return axes


def validate_trace(
    trace: ActionTrace,
    elements: Collection[str] | None,
    canvas_size: tuple[int, int],
    coordinate_space: CoordinateSpace | None = None,
) -> list[Violation]:
    """Return every contract violation; an empty list means the trace is usable.

    ``elements`` is the set of element ids in the scene, or None to skip the
    used-element check.
    """
    violations = []
    symbols = set(script_symbols(trace.script))
    keys = set(trace.coordinate_map)
    if symbols != keys:
        missing, extra = sorted(symbols - keys), sorted(keys - symbols)
        violations.append(Violation("SymbolMismatch", f"missing {missing}, unused {extra}"))

    if elements is not None:
        unknown = [e for e in trace.used_elements if not isinstance(e, str | int) or e not in elements]
        if unknown:
            violations.append(Violation("UnknownElement", f"not in scene: {unknown}"))

    space = coordinate_space or trace.coordinate_space
    width, height = canvas_size
    for sym, axis in _axes(trace.script).items():
        value = trace.coordinate_map.get(sym)
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, int | float):
            violations.append(Violation("OutOfRange", f"{sym}={value!r} is not a number"))
            continue
        upper = 1.0 if space == "normalized" else (width if axis == "x" else height)
        if not 0 <= value <= upper:
            violations.append(Violation("OutOfRange", f"{sym}={value} outside [0, {upper}] ({space})"))

    if leaks_coordinates(trace.chain_of_thought):
        violations.append(Violation("CoordinateLeak", "chain of thought contains coordinate values"))

    expected = derive_action_type(trace.script)
    if " ".join(trace.action_type.split()) != expected:
        violations.append(Violation("ActionTypeMismatch", f"tagged {trace.action_type!r}, script is {expected!r}"))
    return violations


# -- building traces from key points


def derived_translation(moving_feature: Point, moving_anchor: Point, target_feature: Point) -> Point:
    """Where to put the anchor so the feature lands on the target."""
    return Point(
        target_feature[0] + moving_anchor[0] - moving_feature[0],
        target_feature[1] + moving_anchor[1] - moving_feature[1],
    )


_POINT_COUNTS: dict[str, tuple[int, int | None]] = {
    "click": (1, 1),
    "click_type": (1, 1),
    "drag": (2, 2),
    "draw": (3, None),
    "scroll": (0, 0),
    "hotkey": (0, 0),
    "typewrite": (0, 0),
}


def point_to_trace(
    points: Sequence[Point],
    template: Template,
    *,
    text: str = "",
    keys: Sequence[str] = (),
    amount: int = 0,
    clicks: int | None = None,
    button: str | None = None,
    chain_of_thought: str = "",
    used_elements: Sequence[str] = (),
    coordinate_space: CoordinateSpace = "pixels",
) -> ActionTrace:
    """Build a trace over fresh symbols x1, y1, x2, y2 ... in point order."""
    if template not in _POINT_COUNTS:
        raise TraceError(f"unknown template {template!r}")
    lo, hi = _POINT_COUNTS[template]
    if len(points) < lo or (hi is not None and len(points) > hi):
        raise TraceError(f"template {template!r} takes {lo}-{hi or 'N'} points, got {len(points)}")

    syms = [(f"x{i}", f"y{i}") for i in range(1, len(points) + 1)]
    cmap: dict[str, float] = {}
    for (xs, ys), p in zip(syms, points, strict=True):
        cmap[xs], cmap[ys] = p[0], p[1]

    click_args = {k: v for k, v in (("clicks", clicks), ("button", button)) if v is not None}
    if template == "click":
        script = [ActionStatement("click", syms[0], args=click_args)]
    elif template == "click_type":
        script = [ActionStatement("click", syms[0], args=click_args), ActionStatement("type", values=(text,))]
    elif template == "drag":
        script = [ActionStatement("moveTo", syms[0]), ActionStatement("dragTo", syms[1])]
    elif template == "draw":
        script = [
            ActionStatement("mouseDown", syms[0]),
            *(ActionStatement("moveTo", s) for s in syms[1:-1]),
            ActionStatement("mouseUp", syms[-1]),
        ]
    elif template == "scroll":
        script = [ActionStatement("scroll", values=(amount,))]
    elif template == "hotkey":
        if not keys:
            raise TraceError("hotkey template needs at least one key")
        script = [ActionStatement("hotkey", values=tuple(keys))]
    else:
        script = [ActionStatement("typewrite", values=(text,))]

    return ActionTrace(
        chain_of_thought=chain_of_thought,
        script=script,
        coordinate_map=cmap,
        used_elements=list(used_elements),
        action_type=derive_action_type(script),
        coordinate_space=coordinate_space,
    )
