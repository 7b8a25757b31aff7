"""Recursive-descent parser for ABL programs, classes, and functions.

The class constructor form mirrors the runtime's agent model directly:

    function name(p1, p2) {
      this.someVar = expr;
      this.act   = { a1: () => { ... }, ... };
      this.trans = { a1: 'a2', a2: () => { ... } };
      this.on    = { 'SIG': (arg, from) => { ... } };
      this.next  = 'a1';
    }

Transition targets and `next` accept bare identifiers and normalize them
to activity-name strings.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AblSyntaxError
from .lexer import Token, tokenize
from .nodes import (
    AgentClass, ArrayLit, Assign, Binary, Call, Dynamic, Expr, ExprStmt,
    ForOf, Func, FunctionValue, Ident, If, Index, Let, Lit, Member, Pos,
    RecordLit, Return, Static, Ternary, This, Unary, While,
)

ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%="}


@dataclass
class ClassDecl:
    """A named constructor appearing in a program (shell script)."""

    name: str
    params: tuple
    ctor_body: tuple
    pos: Pos


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    # -- token plumbing --

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("punct", "keyword")

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            raise AblSyntaxError(f"expected '{text}', found '{t.text or 'end of input'}'",
                                 t.pos.line, t.pos.col)
        return self.next()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise AblSyntaxError(f"expected identifier, found '{t.text or 'end of input'}'",
                                 t.pos.line, t.pos.col)
        return self.next()

    def skip_semi(self):
        while self.at(";"):
            self.next()

    # -- program / class entry points --

    def program(self) -> list:
        items = []
        self.skip_semi()
        while self.peek().kind != "eof":
            if self.at("function") and self.peek(1).kind == "ident":
                items.append(self.class_decl())
            else:
                items.extend(self._flatten([self.statement()]))
            self.skip_semi()
        return items

    def class_decl(self) -> ClassDecl:
        pos = self.expect("function").pos
        name = self.expect_ident().text
        params = self.param_list()
        self.expect("{")
        body = []
        while not self.at("}"):
            body.append(self.statement())
            self.skip_semi()
        self.expect("}")
        return ClassDecl(name, tuple(params), tuple(self._flatten(body)), pos)

    def param_list(self) -> list:
        self.expect("(")
        params = []
        while not self.at(")"):
            params.append(self.expect_ident().text)
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        return params

    # -- statements --

    def statement(self):
        t = self.peek()
        if t.text in ("let", "var") and t.kind == "keyword":
            return self.let_stmt()
        if self.at("if"):
            return self.if_stmt()
        if self.at("while"):
            return self.while_stmt()
        if self.at("for"):
            return self.for_stmt()
        if self.at("return"):
            return self.return_stmt()
        return self.expr_or_assign()

    def let_stmt(self):
        pos = self.next().pos
        decls = []
        while True:
            name = self.expect_ident().text
            self.expect("=")
            decls.append(Let(pos=pos, name=name, expr=self.expression()))
            if self.at(","):
                self.next()
                continue
            break
        self.skip_semi()
        if len(decls) == 1:
            return decls[0]
        return decls  # caller flattens

    def block(self) -> tuple:
        if self.at("{"):
            self.next()
            stmts = []
            while not self.at("}"):
                stmts.append(self.statement())
                self.skip_semi()
            self.expect("}")
            return tuple(self._flatten(stmts))
        stmt = self.statement()
        self.skip_semi()
        return tuple(self._flatten([stmt]))

    @staticmethod
    def _flatten(stmts):
        out = []
        for s in stmts:
            if isinstance(s, list):
                out.extend(s)
            else:
                out.append(s)
        return out

    def if_stmt(self):
        pos = self.expect("if").pos
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        then = self.block()
        orelse = ()
        if self.at("else"):
            self.next()
            if self.at("if"):
                orelse = (self.if_stmt(),)
            else:
                orelse = self.block()
        return If(pos=pos, cond=cond, then=then, orelse=orelse)

    def while_stmt(self):
        pos = self.expect("while").pos
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        return While(pos=pos, cond=cond, body=self.block())

    def for_stmt(self):
        pos = self.expect("for").pos
        self.expect("(")
        if self.peek().text in ("let", "var"):
            self.next()
        var = self.expect_ident().text
        self.expect("of")
        iterable = self.expression()
        self.expect(")")
        return ForOf(pos=pos, var=var, iterable=iterable, body=self.block())

    def return_stmt(self):
        pos = self.expect("return").pos
        if self.at(";") or self.at("}") or self.peek().kind == "eof":
            self.skip_semi()
            return Return(pos=pos, expr=None)
        expr = self.expression()
        self.skip_semi()
        return Return(pos=pos, expr=expr)

    def expr_or_assign(self):
        expr = self.expression()
        t = self.peek()
        if t.kind == "punct" and t.text in ASSIGN_OPS:
            if not isinstance(expr, (Ident, Member, Index)):
                raise AblSyntaxError("invalid assignment target", t.pos.line, t.pos.col)
            op = self.next().text
            rhs = self.expression()
            if op != "=":
                rhs = Binary(pos=t.pos, op=op[0], left=expr, right=rhs)
            self.skip_semi()
            return Assign(pos=t.pos, target=expr, expr=rhs)
        if t.kind == "punct" and t.text in ("++", "--"):
            if not isinstance(expr, (Ident, Member, Index)):
                raise AblSyntaxError("invalid assignment target", t.pos.line, t.pos.col)
            self.next()
            one = Lit(pos=t.pos, value=1.0)
            rhs = Binary(pos=t.pos, op=t.text[0], left=expr, right=one)
            self.skip_semi()
            return Assign(pos=t.pos, target=expr, expr=rhs)
        self.skip_semi()
        return ExprStmt(pos=expr.pos, expr=expr)

    # -- expressions (precedence climbing) --

    def expression(self) -> Expr:
        return self.ternary()

    def ternary(self) -> Expr:
        cond = self.or_expr()
        if self.at("?"):
            pos = self.next().pos
            then = self.expression()
            self.expect(":")
            orelse = self.expression()
            return Ternary(pos=pos, cond=cond, then=then, orelse=orelse)
        return cond

    def _binary_left(self, ops, sub) -> Expr:
        left = sub()
        while self.peek().kind == "punct" and self.peek().text in ops:
            t = self.next()
            left = Binary(pos=t.pos, op=t.text, left=left, right=sub())
        return left

    def or_expr(self):
        return self._binary_left({"||"}, self.and_expr)

    def and_expr(self):
        return self._binary_left({"&&"}, self.eq_expr)

    def eq_expr(self):
        return self._binary_left({"==", "!="}, self.rel_expr)

    def rel_expr(self):
        return self._binary_left({"<", ">", "<=", ">="}, self.add_expr)

    def add_expr(self):
        return self._binary_left({"+", "-"}, self.mul_expr)

    def mul_expr(self):
        return self._binary_left({"*", "/", "%"}, self.unary_expr)

    def unary_expr(self) -> Expr:
        t = self.peek()
        if t.kind == "punct" and t.text in ("-", "!"):
            self.next()
            return Unary(pos=t.pos, op=t.text, operand=self.unary_expr())
        return self.postfix()

    def postfix(self) -> Expr:
        expr = self.primary()
        while True:
            if self.at("."):
                self.next()
                name = self.expect_ident().text
                expr = Member(pos=expr.pos, obj=expr, field_name=name)
            elif self.at("["):
                self.next()
                idx = self.expression()
                self.expect("]")
                expr = Index(pos=expr.pos, obj=expr, index=idx)
            elif self.at("("):
                args = self.arg_list()
                expr = Call(pos=expr.pos, callee=expr, args=tuple(args))
            else:
                return expr

    def arg_list(self) -> list:
        self.expect("(")
        args = []
        while not self.at(")"):
            args.append(self.expression())
            if self.at(","):
                self.next()
            elif not self.at(")"):
                t = self.peek()
                raise AblSyntaxError("expected ',' or ')'", t.pos.line, t.pos.col)
        self.expect(")")
        return args

    def primary(self) -> Expr:
        t = self.peek()
        if t.kind == "number":
            self.next()
            return Lit(pos=t.pos, value=float(t.value))
        if t.kind == "string":
            self.next()
            return Lit(pos=t.pos, value=t.value)
        if t.kind == "keyword":
            if t.text == "true":
                self.next()
                return Lit(pos=t.pos, value=True)
            if t.text == "false":
                self.next()
                return Lit(pos=t.pos, value=False)
            if t.text == "null":
                self.next()
                return Lit(pos=t.pos, value=None)
            if t.text == "this":
                self.next()
                return This(pos=t.pos)
            if t.text == "function":
                return self.function_literal()
        if t.kind == "ident":
            if self.peek(1).text == "=>":
                self.next()
                return self.arrow_tail((t.text,), t.pos)
            self.next()
            return Ident(pos=t.pos, name=t.text)
        if self.at("("):
            if self._is_arrow_ahead():
                pos = t.pos
                params = self.param_list()
                return self.arrow_tail(tuple(params), pos)
            self.next()
            expr = self.expression()
            self.expect(")")
            return expr
        if self.at("["):
            self.next()
            items = []
            while not self.at("]"):
                items.append(self.expression())
                if self.at(","):
                    self.next()
            self.expect("]")
            return ArrayLit(pos=t.pos, items=tuple(items))
        if self.at("{"):
            return self.record_literal()
        raise AblSyntaxError(f"unexpected '{t.text or 'end of input'}'",
                             t.pos.line, t.pos.col)

    def record_literal(self) -> RecordLit:
        start = self.expect("{")
        pairs = []
        while not self.at("}"):
            t = self.peek()
            if t.kind == "ident" or t.kind == "keyword":
                key = self.next().text
            elif t.kind == "string":
                key = self.next().value
            else:
                raise AblSyntaxError("expected record key", t.pos.line, t.pos.col)
            self.expect(":")
            pairs.append((key, self.expression()))
            if self.at(","):
                self.next()
        self.expect("}")
        return RecordLit(pos=start.pos, pairs=tuple(pairs))

    def _is_arrow_ahead(self) -> bool:
        # '(' ident? (',' ident)* ')' '=>'
        j = self.i + 1
        toks = self.toks
        while j < len(toks):
            t = toks[j]
            if t.text == ")":
                return j + 1 < len(toks) and toks[j + 1].text == "=>"
            if t.kind == "ident" or t.text == ",":
                j += 1
                continue
            return False
        return False

    def arrow_tail(self, params: tuple, pos: Pos) -> Func:
        self.expect("=>")
        if self.at("{"):
            self.next()
            body = []
            while not self.at("}"):
                body.append(self.statement())
                self.skip_semi()
            self.expect("}")
            return Func(pos=pos, params=params, body=tuple(self._flatten(body)))
        expr = self.expression()
        return Func(pos=pos, params=params, body=(Return(pos=expr.pos, expr=expr),))

    def function_literal(self) -> Func:
        pos = self.expect("function").pos
        if self.peek().kind == "ident":  # name ignored for function values
            self.next()
        params = self.param_list()
        self.expect("{")
        body = []
        while not self.at("}"):
            body.append(self.statement())
            self.skip_semi()
        self.expect("}")
        return Func(pos=pos, params=tuple(params), body=tuple(self._flatten(body)))


# --- public entry points ---


def parse_program(source: str) -> list:
    return Parser(source).program()


def parse_function(source: str) -> FunctionValue:
    p = Parser(source)
    expr = p.expression()
    t = p.peek()
    if t.kind != "eof":
        raise AblSyntaxError(f"unexpected '{t.text}' after function", t.pos.line, t.pos.col)
    if not isinstance(expr, Func):
        raise AblSyntaxError("expected a function literal", 1, 1)
    return FunctionValue(params=expr.params, body=expr.body)


def parse_class(source: str, validate: bool = True) -> AgentClass:
    p = Parser(source)
    if not (p.at("function") and p.peek(1).kind == "ident"):
        t = p.peek()
        raise AblSyntaxError("expected a named constructor function",
                             t.pos.line, t.pos.col)
    decl = p.class_decl()
    p.skip_semi()
    t = p.peek()
    if t.kind != "eof":
        raise AblSyntaxError("a class file holds exactly one constructor",
                             t.pos.line, t.pos.col)
    cls = build_agent_class(decl)
    if validate:
        from .validate import validate_class
        validate_class(cls)
    return cls


def build_agent_class(decl: ClassDecl) -> AgentClass:
    """Interpret the constructor body structurally into an AgentClass."""
    body_init: dict = {}
    activities: dict = {}
    transitions: dict = {}
    handlers: dict = {}
    next_act = None

    for s in decl.ctor_body:
        if not (isinstance(s, Assign) and isinstance(s.target, Member)
                and isinstance(s.target.obj, This)):
            pos = getattr(s, "pos", Pos())
            raise AblSyntaxError(
                "constructor body may only assign this-fields",
                pos.line, pos.col)
        field = s.target.field_name
        if field == "act":
            activities.update(_function_map(s.expr, "act"))
        elif field == "trans":
            transitions.update(_transition_map(s.expr))
        elif field == "on":
            handlers.update(_function_map(s.expr, "on"))
        elif field == "next":
            next_act = _activity_name(s.expr)
        else:
            body_init[field] = s.expr

    return AgentClass(
        name=decl.name,
        params=decl.params,
        body_init=body_init,
        activities=activities,
        transitions=transitions,
        handlers=handlers,
        next=next_act,
    )


def _function_map(expr: Expr, section: str) -> dict:
    if not isinstance(expr, RecordLit):
        raise AblSyntaxError(f"this.{section} must be a record of functions",
                             expr.pos.line, expr.pos.col)
    out = {}
    for key, val in expr.pairs:
        if not isinstance(val, Func):
            raise AblSyntaxError(f"this.{section}.{key} must be a function",
                                 val.pos.line, val.pos.col)
        out[key] = FunctionValue(params=val.params, body=val.body)
    return out


def _transition_map(expr: Expr) -> dict:
    if not isinstance(expr, RecordLit):
        raise AblSyntaxError("this.trans must be a record",
                             expr.pos.line, expr.pos.col)
    out = {}
    for key, val in expr.pairs:
        if isinstance(val, Func):
            out[key] = Dynamic(fn=FunctionValue(params=val.params, body=val.body))
        else:
            out[key] = Static(target=_activity_name(val))
    return out


def _activity_name(expr: Expr) -> str:
    if isinstance(expr, Lit) and isinstance(expr.value, str):
        return expr.value
    if isinstance(expr, Ident):
        return expr.name  # bare identifier normalized to a name string
    raise AblSyntaxError("expected an activity name",
                         expr.pos.line, expr.pos.col)
