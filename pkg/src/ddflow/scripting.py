"""Guard and consequence scripts.

A deliberately tiny expression/statement language: total (every parse either
succeeds or fails with a position), side-effect free, and strictly typed
with no coercion, so routing decisions and consequence effects replay
identically forever.

Grammar:
    expr    := or
    or      := and ("or" and)*
    and     := not ("and" not)*
    not     := "not" not | cmp
    cmp     := add (("=="|"!="|"<"|"<="|">"|">=") add)?
    add     := mul (("+"|"-") mul)*
    mul     := unary (("*"|"/") unary)*
    unary   := "-" unary | primary
    primary := literal | path | "(" expr ")"

Literals are decimal numbers, double-quoted strings (escapes: \\" and \\\\),
`true`, `false`, `null`.  Paths are `outcome.<path>` (dotted descent into the
submitted outcome), `item.properties.<name>`, and `activity.name`.

Consequence scripts are ";"-separated statements:
    set <ident> = <expr>
    add <expr> to <ident>
    remove <expr> from <ident>

AST nodes are plain tuples: ("num", f), ("str", s), ("bool", b), ("null",),
("path", (seg, ...)), ("unop", op, x), ("binop", op, l, r); statements are
("set", name, expr), ("add", expr, coll), ("remove", expr, coll).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .errors import (DIV_ZERO, EngineError, MISSING_PATH, NOT_BOOLEAN, SYNTAX,
                     TYPE_ERROR)

KEYWORDS = {"or", "and", "not", "true", "false", "null",
            "set", "add", "to", "remove", "from"}

CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")
Ast = tuple


@dataclass(frozen=True)
class Script:
    source: str
    kind: str            # "guard" | "consequence"
    ast: Any             # expr tuple for guards, list of statement tuples otherwise


@dataclass(frozen=True)
class EvalContext:
    outcome: dict
    item_properties: dict
    activity_name: str


@dataclass(frozen=True)
class SetProperty:
    name: str
    value: Any


@dataclass(frozen=True)
class AddMember:
    collection: str
    member: str


@dataclass(frozen=True)
class RemoveMember:
    collection: str
    member: str


Effect = SetProperty | AddMember | RemoveMember


def _syntax(line: int, col: int, expected: str) -> EngineError:
    return EngineError(SYNTAX, f"line {line}, column {col}: expected {expected}",
                       detail={"line": line, "column": col, "expected": expected})


class _Lexer:
    """Produces (type, value, line, col) tokens; type is one of
    "num", "str", "ident", "op", "eof"."""

    def __init__(self, source: str):
        self.src = source
        self.pos = 0
        self.line = 1
        self.col = 1

    def _peek(self) -> str:
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _advance(self) -> str:
        ch = self.src[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def tokens(self) -> list[tuple]:
        out = []
        while True:
            while self._peek() and self._peek() in " \t\r\n":
                self._advance()
            line, col = self.line, self.col
            ch = self._peek()
            if not ch:
                out.append(("eof", "", line, col))
                return out
            if ch.isdigit():
                out.append(("num", self._number(), line, col))
            elif ch == '"':
                out.append(("str", self._string(line, col), line, col))
            elif ch.isalpha() or ch == "_":
                word = ""
                while self._peek().isalnum() or self._peek() == "_":
                    word += self._advance()
                out.append(("ident", word, line, col))
            elif ch in "=!<>":
                first = self._advance()
                if self._peek() == "=":
                    self._advance()
                    out.append(("op", first + "=", line, col))
                elif first in "<>=":          # bare "=" belongs to `set`
                    out.append(("op", first, line, col))
                else:
                    raise _syntax(line, col, "operator")
            elif ch in "+-*/().;":
                out.append(("op", self._advance(), line, col))
            else:
                raise _syntax(line, col, "token")

    def _number(self) -> float:
        text = ""
        while self._peek().isdigit():
            text += self._advance()
        if self._peek() == ".":
            text += self._advance()
            if not self._peek().isdigit():
                raise _syntax(self.line, self.col, "digit")
            while self._peek().isdigit():
                text += self._advance()
        if self._peek() and self._peek() in "eE":
            text += self._advance()
            if self._peek() and self._peek() in "+-":
                text += self._advance()
            if not self._peek().isdigit():
                raise _syntax(self.line, self.col, "exponent digit")
            while self._peek().isdigit():
                text += self._advance()
        return float(text)

    def _string(self, line: int, col: int) -> str:
        self._advance()  # opening quote
        out = ""
        while True:
            ch = self._peek()
            if not ch:
                raise _syntax(line, col, "closing quote")
            if ch == '"':
                self._advance()
                return out
            if ch == "\\":
                self._advance()
                esc = self._peek()
                if esc not in ('"', "\\"):
                    raise _syntax(self.line, self.col, 'escape (\\" or \\\\)')
                out += self._advance()
            else:
                out += self._advance()


class _Parser:
    def __init__(self, source: str):
        self.toks = _Lexer(source).tokens()
        self.i = 0

    def _cur(self) -> tuple:
        return self.toks[self.i]

    def _at(self, type_: str, value: str | None = None) -> bool:
        t, v, _, _ = self._cur()
        return t == type_ and (value is None or v == value)

    def _at_kw(self, word: str) -> bool:
        return self._at("ident", word)

    def _take(self) -> tuple:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def _expect(self, type_: str, value: str, expected: str) -> None:
        if not self._at(type_, value):
            t, v, line, col = self._cur()
            raise _syntax(line, col, expected)
        self._take()

    def _fail(self, expected: str) -> EngineError:
        _, _, line, col = self._cur()
        return _syntax(line, col, expected)

    # -- expressions ------------------------------------------------------

    def expression(self) -> Ast:
        node = self._and()
        while self._at_kw("or"):
            self._take()
            node = ("binop", "or", node, self._and())
        return node

    def _and(self) -> Ast:
        node = self._not()
        while self._at_kw("and"):
            self._take()
            node = ("binop", "and", node, self._not())
        return node

    def _not(self) -> Ast:
        if self._at_kw("not"):
            self._take()
            return ("unop", "not", self._not())
        return self._cmp()

    def _cmp(self) -> Ast:
        node = self._add()
        t, v, _, _ = self._cur()
        if t == "op" and v in CMP_OPS:
            self._take()
            node = ("binop", v, node, self._add())
        return node

    def _add(self) -> Ast:
        node = self._mul()
        while self._at("op", "+") or self._at("op", "-"):
            op = self._take()[1]
            node = ("binop", op, node, self._mul())
        return node

    def _mul(self) -> Ast:
        node = self._unary()
        while self._at("op", "*") or self._at("op", "/"):
            op = self._take()[1]
            node = ("binop", op, node, self._unary())
        return node

    def _unary(self) -> Ast:
        if self._at("op", "-"):
            self._take()
            return ("unop", "-", self._unary())
        return self._primary()

    def _primary(self) -> Ast:
        t, v, line, col = self._cur()
        if t == "num":
            self._take()
            return ("num", v)
        if t == "str":
            self._take()
            return ("str", v)
        if t == "ident":
            if v == "true":
                self._take()
                return ("bool", True)
            if v == "false":
                self._take()
                return ("bool", False)
            if v == "null":
                self._take()
                return ("null",)
            if v in KEYWORDS:
                raise _syntax(line, col, "expression")
            return self._path()
        if t == "op" and v == "(":
            self._take()
            node = self.expression()
            self._expect("op", ")", ")")
            return node
        raise _syntax(line, col, "expression")

    def _path(self) -> Ast:
        segs = [self._ident("path root")]
        while self._at("op", "."):
            self._take()
            segs.append(self._ident("path segment"))
        root = segs[0]
        if root == "outcome":
            if len(segs) < 2:
                raise self._fail("outcome field")
        elif root == "item":
            if len(segs) != 3 or segs[1] != "properties":
                raise self._fail("item.properties.<name>")
        elif root == "activity":
            if len(segs) != 2 or segs[1] != "name":
                raise self._fail("activity.name")
        else:
            raise self._fail("path root (outcome, item, activity)")
        return ("path", tuple(segs))

    def _ident(self, expected: str) -> str:
        t, v, line, col = self._cur()
        if t != "ident" or v in KEYWORDS:
            raise _syntax(line, col, expected)
        self._take()
        return v

    # -- statements -------------------------------------------------------

    def statements(self) -> list[Ast]:
        stmts: list[Ast] = []
        if self._at("eof"):
            return stmts
        stmts.append(self._statement())
        while self._at("op", ";"):
            self._take()
            if self._at("eof"):            # trailing semicolon
                break
            stmts.append(self._statement())
        return stmts

    def _statement(self) -> Ast:
        if self._at_kw("set"):
            self._take()
            name = self._ident("property name")
            self._expect("op", "=", "=")
            return ("set", name, self.expression())
        if self._at_kw("add"):
            self._take()
            expr = self.expression()
            if not self._at_kw("to"):
                raise self._fail("to")
            self._take()
            return ("add", expr, self._ident("collection name"))
        if self._at_kw("remove"):
            self._take()
            expr = self.expression()
            if not self._at_kw("from"):
                raise self._fail("from")
            self._take()
            return ("remove", expr, self._ident("collection name"))
        raise self._fail("statement (set, add, remove)")

    def finish(self) -> None:
        if not self._at("eof"):
            raise self._fail("end of script")


def parse_script(source: str, kind: str) -> Script:
    """Parse guard (single expression) or consequence (statement list) source."""
    if kind not in ("guard", "consequence"):
        raise ValueError(f"unknown script kind {kind!r}")
    parser = _Parser(source)
    if kind == "guard":
        ast = parser.expression()
    else:
        ast = parser.statements()
    parser.finish()
    return Script(source=source, kind=kind, ast=ast)


# -- canonical printing ---------------------------------------------------

def _print_expr(node: Ast) -> str:
    tag = node[0]
    if tag == "num":
        x = node[1]
        if x.is_integer() and abs(x) <= 2 ** 53:
            return str(int(x))
        return repr(x)
    if tag == "str":
        return '"' + node[1].replace("\\", "\\\\").replace('"', '\\"') + '"'
    if tag == "bool":
        return "true" if node[1] else "false"
    if tag == "null":
        return "null"
    if tag == "path":
        return ".".join(node[1])
    if tag == "unop":
        # Parenthesized so a `not` under a comparison keeps its shape.
        op, operand = node[1], node[2]
        return f"({'not ' if op == 'not' else '-'}{_print_expr(operand)})"
    if tag == "binop":
        op, left, right = node[1], node[2], node[3]
        return f"({_print_expr(left)} {op} {_print_expr(right)})"
    raise ValueError(f"unknown node {tag!r}")


def print_script(script: Script) -> str:
    """Canonical re-serialization; parsing it back yields an equal AST."""
    if script.kind == "guard":
        return _print_expr(script.ast)
    parts = []
    for stmt in script.ast:
        if stmt[0] == "set":
            parts.append(f"set {stmt[1]} = {_print_expr(stmt[2])}")
        elif stmt[0] == "add":
            parts.append(f"add {_print_expr(stmt[1])} to {stmt[2]}")
        else:
            parts.append(f"remove {_print_expr(stmt[1])} from {stmt[2]}")
    return "; ".join(parts)


# -- evaluation -----------------------------------------------------------

def _type_error(msg: str) -> EngineError:
    return EngineError(TYPE_ERROR, msg)


def _scalar(value: Any, path: str) -> Any:
    if isinstance(value, (dict, list)):
        raise _type_error(f"path {path} resolves to a non-scalar value")
    if type(value) is bool or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, float)):
        return float(value)
    raise _type_error(f"path {path} resolves to unsupported type {type(value).__name__}")


def _resolve_path(segs: tuple, ctx: EvalContext) -> Any:
    dotted = ".".join(segs)
    if segs[0] == "outcome":
        node: Any = ctx.outcome
        for seg in segs[1:]:
            if not isinstance(node, dict) or seg not in node:
                raise EngineError(MISSING_PATH, f"path {dotted} absent from context")
            node = node[seg]
        return _scalar(node, dotted)
    if segs[0] == "item":
        name = segs[2]
        if name not in ctx.item_properties:
            raise EngineError(MISSING_PATH, f"path {dotted} absent from context")
        return _scalar(ctx.item_properties[name], dotted)
    return ctx.activity_name    # activity.name


def _want_bool(value: Any, context: str) -> bool:
    if type(value) is not bool:
        raise _type_error(f"{context} requires boolean operands")
    return value


def _want_num(value: Any, context: str) -> float:
    if type(value) is bool or not isinstance(value, float):
        raise _type_error(f"{context} requires numeric operands")
    return value


def _same_type(left: Any, right: Any) -> bool:
    if left is None or right is None:
        return left is None and right is None
    if type(left) is bool or type(right) is bool:
        return type(left) is bool and type(right) is bool
    return type(left) is type(right)


def eval_expr(node: Ast, ctx: EvalContext) -> Any:
    """Evaluate one expression tuple against a read-only context."""
    tag = node[0]
    if tag in ("num", "str", "bool"):
        return node[1]
    if tag == "null":
        return None
    if tag == "path":
        return _resolve_path(node[1], ctx)
    if tag == "unop":
        op = node[1]
        if op == "not":
            return not _want_bool(eval_expr(node[2], ctx), "'not'")
        return -_want_num(eval_expr(node[2], ctx), "unary '-'")
    if tag == "binop":
        op, left_node, right_node = node[1], node[2], node[3]
        if op == "or":
            left = _want_bool(eval_expr(left_node, ctx), "'or'")
            if left:
                return True
            return _want_bool(eval_expr(right_node, ctx), "'or'")
        if op == "and":
            left = _want_bool(eval_expr(left_node, ctx), "'and'")
            if not left:
                return False
            return _want_bool(eval_expr(right_node, ctx), "'and'")
        left = eval_expr(left_node, ctx)
        right = eval_expr(right_node, ctx)
        if op in ("==", "!="):
            if not _same_type(left, right):
                raise _type_error(f"'{op}' requires operands of the same type")
            return (left == right) if op == "==" else (left != right)
        if op in ("<", "<=", ">", ">="):
            lnum = _want_num(left, f"'{op}'")
            rnum = _want_num(right, f"'{op}'")
            return {"<": lnum < rnum, "<=": lnum <= rnum,
                    ">": lnum > rnum, ">=": lnum >= rnum}[op]
        lnum = _want_num(left, f"'{op}'")
        rnum = _want_num(right, f"'{op}'")
        if op == "+":
            return lnum + rnum
        if op == "-":
            return lnum - rnum
        if op == "*":
            return lnum * rnum
        if rnum == 0.0:
            raise EngineError(DIV_ZERO, "division by zero")
        return lnum / rnum
    raise ValueError(f"unknown node {tag!r}")


def eval_guard(script: Script, ctx: EvalContext) -> bool:
    """Evaluate a guard; the result must be boolean."""
    if script.kind != "guard":
        raise ValueError("eval_guard requires a guard script")
    result = eval_expr(script.ast, ctx)
    if type(result) is not bool:
        raise EngineError(NOT_BOOLEAN, "guard did not evaluate to a boolean")
    return result


def exec_consequence(script: Script, ctx: EvalContext) -> list[Effect]:
    """Evaluate a consequence script to its effect list without applying it.

    A failing statement aborts the whole script: no effects are delivered.
    """
    if script.kind != "consequence":
        raise ValueError("exec_consequence requires a consequence script")
    effects: list[Effect] = []
    for stmt in script.ast:
        tag = stmt[0]
        if tag == "set":
            effects.append(SetProperty(name=stmt[1], value=eval_expr(stmt[2], ctx)))
            continue
        member = eval_expr(stmt[1], ctx)
        if not isinstance(member, str):
            raise _type_error(f"'{tag}' requires a string member id")
        if tag == "add":
            effects.append(AddMember(collection=stmt[2], member=member))
        else:
            effects.append(RemoveMember(collection=stmt[2], member=member))
    return effects
