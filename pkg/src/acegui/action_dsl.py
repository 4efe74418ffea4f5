"""Action language for desktop mouse/keyboard operations.

Scripts are sequences of calls in the PyAutoGUI-style syntax
``name(arg, ...)``, separated by newlines or semicolons::

    moveTo(100, 150)
    click(200, 220)
    write('Hello, world!')
    hotkey('ctrl', 'c')
    scroll(-200)
    dragTo(100, 200, duration=2)
    mouseDown(); mouseUp()
    press('enter')
    keyDown('shift')

Grammar (EBNF)::

    script   = { blank | sep } , [ call , { sep , { sep } , call } ] , { sep | blank } ;
    sep      = ";" | newline ;
    call     = name , "(" , [ arg , { "," , arg } ] , ")" ;
    arg      = [ "duration" , "=" ] , literal ;
    literal  = integer | decimal | string ;
    integer  = [ "-" ] , digit , { digit } ;
    decimal  = integer , [ "." , digit , { digit } ] , [ ( "e" | "E" ) , [ "+" | "-" ] , digit , { digit } ] ;
    string   = "'" , { char | escape } , "'" ;
    escape   = "\\" , ( "\\" | "'" | '"' | "n" | "r" | "t" | "x" hex hex | "u" hex hex hex hex ) ;

Spaces and tabs may appear between any two tokens. A surrounding markdown
code fence (````` ```python ... ``` `````) is removed before parsing.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

__all__ = [
    "KEY_NAMES",
    "MoveTo",
    "Click",
    "DoubleClick",
    "RightClick",
    "Write",
    "Hotkey",
    "Scroll",
    "DragTo",
    "MouseDown",
    "MouseUp",
    "Press",
    "KeyDown",
    "KeyUp",
    "Action",
    "ActionScript",
    "ActionSyntaxError",
    "UnknownAction",
    "ArityMismatch",
    "BadLiteral",
    "UnbalancedQuote",
    "Violation",
    "OutOfBounds",
    "UnknownKey",
    "UnbalancedKey",
    "UnbalancedMouse",
    "parse",
    "render",
    "render_action",
    "validate",
    "quote",
    "read_quoted",
    "strip_code_fence",
]

KEY_NAMES: frozenset[str] = frozenset(
    [chr(c) for c in range(ord("a"), ord("z") + 1)]
    + [str(d) for d in range(10)]
    + [f"f{n}" for n in range(1, 13)]
    + [
        "enter", "shift", "ctrl", "alt", "tab", "esc",
        "up", "down", "left", "right",
        "space", "backspace", "delete", "home", "end", "pageup", "pagedown",
    ]
)


@dataclass(frozen=True)
class MoveTo:
    x: int
    y: int


@dataclass(frozen=True)
class Click:
    x: int
    y: int


@dataclass(frozen=True)
class DoubleClick:
    x: int
    y: int


@dataclass(frozen=True)
class RightClick:
    x: int
    y: int


@dataclass(frozen=True)
class Write:
    text: str


@dataclass(frozen=True)
class Hotkey:
    keys: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "keys", tuple(self.keys))
        if len(self.keys) < 2:
            raise ValueError("hotkey needs at least two keys")


@dataclass(frozen=True)
class Scroll:
    amount: int


@dataclass(frozen=True)
class DragTo:
    x: int
    y: int
    duration: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "duration", float(self.duration))
        if not math.isfinite(self.duration) or self.duration < 0:
            raise ValueError("duration must be a finite non-negative number")


@dataclass(frozen=True)
class MouseDown:
    pass


@dataclass(frozen=True)
class MouseUp:
    pass


@dataclass(frozen=True)
class Press:
    key: str


@dataclass(frozen=True)
class KeyDown:
    key: str


@dataclass(frozen=True)
class KeyUp:
    key: str


Action = Union[
    MoveTo, Click, DoubleClick, RightClick, Write, Hotkey, Scroll,
    DragTo, MouseDown, MouseUp, Press, KeyDown, KeyUp,
]
ActionScript = list[Action]

POINT_ACTIONS = (MoveTo, Click, DoubleClick, RightClick, DragTo)

# call name -> (class, kind of each positional argument)
_SIGNATURES: dict[str, tuple[type, tuple[str, ...]]] = {
    "moveTo": (MoveTo, ("coord", "coord")),
    "click": (Click, ("coord", "coord")),
    "doubleClick": (DoubleClick, ("coord", "coord")),
    "rightClick": (RightClick, ("coord", "coord")),
    "write": (Write, ("str",)),
    "hotkey": (Hotkey, ("key*",)),
    "scroll": (Scroll, ("int",)),
    "dragTo": (DragTo, ("coord", "coord")),
    "mouseDown": (MouseDown, ()),
    "mouseUp": (MouseUp, ()),
    "press": (Press, ("str",)),
    "keyDown": (KeyDown, ("str",)),
    "keyUp": (KeyUp, ("str",)),
}
_NAME_OF = {cls: name for name, (cls, _) in _SIGNATURES.items()}


# ---- errors ----


class ActionSyntaxError(ValueError):
    """Raised when text is not a well-formed action script.

    ``position`` is the character offset into the text that was parsed
    (after code-fence stripping).
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownAction(ActionSyntaxError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown action {name!r}", position)
        self.name = name


class ArityMismatch(ActionSyntaxError):
    def __init__(self, name: str, expected: str, got: int, position: int):
        super().__init__(f"{name}() takes {expected} argument(s), got {got}", position)
        self.name = name
        self.expected = expected
        self.got = got


class BadLiteral(ActionSyntaxError):
    pass


class UnbalancedQuote(ActionSyntaxError):
    pass


# ---- string literals ----

_ESCAPES = {"\\": "\\", "'": "'", '"': '"', "n": "\n", "r": "\r", "t": "\t"}
_REVERSE_ESCAPES = {"\\": "\\\\", "'": "\\'", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def quote(text: str) -> str:
    """Single-quoted literal for ``text`` that :func:`parse` reads back exactly."""
    out = ["'"]
    for ch in text:
        if ch in _REVERSE_ESCAPES:
            out.append(_REVERSE_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\x{ord(ch):02x}")
        elif 0xD800 <= ord(ch) <= 0xDFFF:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append("'")
    return "".join(out)


def read_quoted(text: str, pos: int = 0) -> tuple[str, int]:
    """Read the single-quoted literal starting at ``text[pos]``.

    Returns the decoded string and the offset just past the closing quote.
    """
    if text[pos:pos + 1] != "'":
        raise BadLiteral("expected a quoted string", pos)
    parser = _Parser(text)
    parser.pos = pos
    value = parser.string()
    return value, parser.pos


def strip_code_fence(text: str) -> str:
    """Remove surrounding whitespace and a markdown code fence, if any."""
    body = text.strip()
    if body.startswith("```"):
        newline = body.find("\n")
        body = "" if newline < 0 else body[newline + 1:]
        body = body.rstrip()
        if body.endswith("```"):
            body = body[:-3]
        body = body.strip()
    return body


# ---- parser ----


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_blank(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r":
            self.pos += 1

    def script(self) -> list:
        actions: list = []
        while True:
            self.skip_blank()
            ch = self.peek()
            if ch == "":
                return actions
            if ch in ";\n":
                self.pos += 1
                continue
            actions.append(self.call())
            self.skip_blank()
            ch = self.peek()
            if ch not in ("", ";", "\n"):
                raise ActionSyntaxError("expected ';' or newline between actions", self.pos)

    def call(self):
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        name = self.text[start:self.pos]
        if not name:
            raise ActionSyntaxError(f"expected an action name, found {self.peek()!r}", start)
        if name not in _SIGNATURES:
            raise UnknownAction(name, start)
        self.skip_blank()
        if self.peek() != "(":
            raise ActionSyntaxError("expected '('", self.pos)
        self.pos += 1
        positional: list[tuple[object, int]] = []
        keywords: dict[str, tuple[object, int]] = {}
        self.skip_blank()
        if self.peek() == ")":
            self.pos += 1
        else:
            while True:
                self.skip_blank()
                arg_start = self.pos
                kw = self._keyword()
                value = self.literal()
                if kw is None:
                    if keywords:
                        raise ActionSyntaxError("positional argument after keyword", arg_start)
                    positional.append((value, arg_start))
                else:
                    if kw in keywords:
                        raise ActionSyntaxError(f"repeated keyword {kw!r}", arg_start)
                    keywords[kw] = (value, arg_start)
                self.skip_blank()
                ch = self.peek()
                if ch == ",":
                    self.pos += 1
                    continue
                if ch == ")":
                    self.pos += 1
                    break
                if ch == "":
                    raise ActionSyntaxError("unterminated argument list", self.pos)
                raise ActionSyntaxError(f"unexpected {ch!r} in argument list", self.pos)
        return _build(name, positional, keywords, start)

    def _keyword(self) -> str | None:
        save = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        word = self.text[save:self.pos]
        self.skip_blank()
        if word and self.peek() == "=":
            self.pos += 1
            self.skip_blank()
            return word
        self.pos = save
        return None

    def literal(self):
        ch = self.peek()
        if ch == "'":
            return self.string()
        if ch == '"':
            raise BadLiteral("strings use single quotes", self.pos)
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in ",) \t\r\n;":
            self.pos += 1
        token = self.text[start:self.pos]
        if not token:
            raise BadLiteral("missing argument", start)
        return _number(token, start)

    def string(self) -> str:
        start = self.pos
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise UnbalancedQuote("unterminated string literal", start)
            ch = self.text[self.pos]
            if ch == "'":
                self.pos += 1
                return "".join(out)
            if ch == "\\":
                esc_at = self.pos
                self.pos += 1
                if self.pos >= len(self.text):
                    raise UnbalancedQuote("unterminated string literal", start)
                code = self.text[self.pos]
                if code in _ESCAPES:
                    out.append(_ESCAPES[code])
                    self.pos += 1
                elif code in "xu":
                    width = 2 if code == "x" else 4
                    digits = self.text[self.pos + 1:self.pos + 1 + width]
                    if len(digits) != width or any(c not in "0123456789abcdefABCDEF" for c in digits):
                        raise BadLiteral(f"bad \\{code} escape", esc_at)
                    out.append(chr(int(digits, 16)))
                    self.pos += 1 + width
                else:
                    raise BadLiteral(f"unknown escape \\{code}", esc_at)
            else:
                out.append(ch)
                self.pos += 1


class _Number:
    __slots__ = ("value", "is_int")

    def __init__(self, value, is_int: bool):
        self.value = value
        self.is_int = is_int


_INT_RE = re.compile(r"-?[0-9]+", re.ASCII)
_DECIMAL_RE = re.compile(r"-?[0-9]+(\.[0-9]+)?([eE][+-]?[0-9]+)?", re.ASCII)


def _number(token: str, position: int) -> _Number:
    if _INT_RE.fullmatch(token):
        return _Number(int(token), True)
    if not _DECIMAL_RE.fullmatch(token):
        raise BadLiteral(f"bad literal {token!r}", position)
    value = float(token)
    if not math.isfinite(value):
        raise BadLiteral(f"literal {token!r} is not finite", position)
    return _Number(value, False)


def _expect(kind: str, value, name: str, position: int):
    if kind == "str":
        if not isinstance(value, str):
            raise BadLiteral(f"{name}() expects a string", position)
        return value
    if not isinstance(value, _Number):
        raise BadLiteral(f"{name}() expects a number", position)
    if not value.is_int:
        raise BadLiteral(f"{name}() expects an integer", position)
    if kind == "coord" and value.value < 0:
        raise BadLiteral(f"{name}() coordinates must be non-negative", position)
    return value.value


def _build(name: str, positional, keywords, position: int):
    cls, kinds = _SIGNATURES[name]
    if kinds == ("key*",):
        if keywords:
            raise ActionSyntaxError(f"{name}() takes no keyword arguments", position)
        if len(positional) < 2:
            raise ArityMismatch(name, "at least 2", len(positional), position)
        return Hotkey(tuple(_expect("str", v, name, p) for v, p in positional))
    if len(positional) != len(kinds):
        raise ArityMismatch(name, str(len(kinds)), len(positional), position)
    args = [_expect(kind, v, name, p) for kind, (v, p) in zip(kinds, positional)]
    if cls is DragTo:
        unknown = set(keywords) - {"duration"}
        if unknown:
            raise ActionSyntaxError(f"dragTo() got unexpected keyword {sorted(unknown)[0]!r}", position)
        duration = 0.0
        if "duration" in keywords:
            value, at = keywords["duration"]
            if not isinstance(value, _Number) or value.value < 0:
                raise BadLiteral("duration must be a non-negative number", at)
            duration = float(value.value)
        return DragTo(args[0], args[1], duration)
    if keywords:
        raise ActionSyntaxError(f"{name}() takes no keyword arguments", position)
    return cls(*args)


def parse(text: str) -> list:
    """Parse an action script.

    Raises a subclass of :class:`ActionSyntaxError` for anything outside the
    grammar; positions refer to the fence-stripped text.
    """
    return _Parser(strip_code_fence(text)).script()


# ---- printer ----


def _format_duration(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def render_action(action) -> str:
    name = _NAME_OF[type(action)]
    if isinstance(action, (MoveTo, Click, DoubleClick, RightClick)):
        return f"{name}({action.x}, {action.y})"
    if isinstance(action, DragTo):
        if action.duration:
            return f"{name}({action.x}, {action.y}, duration={_format_duration(action.duration)})"
        return f"{name}({action.x}, {action.y})"
    if isinstance(action, Write):
        return f"{name}({quote(action.text)})"
    if isinstance(action, Hotkey):
        return f"{name}({', '.join(quote(k) for k in action.keys)})"
    if isinstance(action, Scroll):
        return f"{name}({action.amount})"
    if isinstance(action, (Press, KeyDown, KeyUp)):
        return f"{name}({quote(action.key)})"
    return f"{name}()"


def render(script: Sequence) -> str:
    """Canonical text form: one action per line, no trailing newline."""
    return "\n".join(render_action(a) for a in script)


# ---- validation ----


@dataclass(frozen=True)
class Violation:
    index: int


@dataclass(frozen=True)
class OutOfBounds(Violation):
    x: int
    y: int


@dataclass(frozen=True)
class UnknownKey(Violation):
    key: str


@dataclass(frozen=True)
class UnbalancedKey(Violation):
    key: str
    missing: str  # "keyUp" or "keyDown"


@dataclass(frozen=True)
class UnbalancedMouse(Violation):
    missing: str  # "mouseUp" or "mouseDown"


def _keys_of(action) -> tuple[str, ...]:
    if isinstance(action, Hotkey):
        return action.keys
    if isinstance(action, (Press, KeyDown, KeyUp)):
        return (action.key,)
    return ()


def validate(script: Sequence, screen_w: int, screen_h: int) -> list[Violation]:
    """Report out-of-bounds points, unknown keys and unbalanced down/up pairs.

    Coordinates are valid on ``[0, screen_w - 1] x [0, screen_h - 1]``.
    Unbalanced pairs are reported but are not errors: a script may
    intentionally leave a key or button held for the next one.
    """
    if screen_w <= 0 or screen_h <= 0:
        raise ValueError("screen dimensions must be positive")
    out: list[Violation] = []
    held_keys: dict[str, list[int]] = {}
    mouse_downs: list[int] = []
    for i, action in enumerate(script):
        if isinstance(action, POINT_ACTIONS) and not (0 <= action.x < screen_w and 0 <= action.y < screen_h):
            out.append(OutOfBounds(i, action.x, action.y))
        for key in _keys_of(action):
            if key not in KEY_NAMES:
                out.append(UnknownKey(i, key))
        if isinstance(action, KeyDown):
            held_keys.setdefault(action.key, []).append(i)
        elif isinstance(action, KeyUp):
            stack = held_keys.get(action.key)
            if stack:
                stack.pop()
            else:
                out.append(UnbalancedKey(i, action.key, "keyDown"))
        elif isinstance(action, MouseDown):
            mouse_downs.append(i)
        elif isinstance(action, MouseUp):
            if mouse_downs:
                mouse_downs.pop()
            else:
                out.append(UnbalancedMouse(i, "mouseDown"))
    for key, stack in held_keys.items():
        out.extend(UnbalancedKey(i, key, "keyUp") for i in stack)
    out.extend(UnbalancedMouse(i, "mouseUp") for i in mouse_downs)
    return sorted(out, key=lambda v: (v.index, type(v).__name__))
