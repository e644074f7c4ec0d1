"""Recursive-descent parser producing the ast module's node types.

One token of lookahead everywhere.  The first error aborts the parse
and is reported as a SourceError carrying a located Diagnostic, per the
frontend contract (errors prevent analysis).
"""

from __future__ import annotations

from typing import List, Optional

from . import ast as A
from .lexer import LexError, Token, tokenize

_SCALARS = frozenset(A.SCALAR_NAMES) - {"bool"}
_ASSIGN_OPS = ("=", "+=", "-=", "*=")


def parse_unit(source: str, source_name: str = "<input>") -> A.SourceUnit:
    """Parse a whole .mk file.  Raises SourceError on any problem."""
    try:
        tokens = tokenize(source)
    except LexError as err:
        raise A.SourceError(
            [A.Diagnostic("error", err.line, err.col, err.message)]
        ) from None
    parser = _Parser(tokens, source_name)
    unit = parser.unit()
    _validate(unit)
    return unit


def _validate(unit: A.SourceUnit) -> None:
    diags: List[A.Diagnostic] = []
    seen: dict = {}
    for decl in list(unit.wrappers) + list(unit.kernels):
        if decl.name in seen:
            diags.append(A.Diagnostic(
                "error", decl.line, decl.col,
                f"duplicate declaration of {decl.name!r}"))
        seen[decl.name] = decl
    kernel_names = {k.name for k in unit.kernels}
    for w in unit.wrappers:
        if w.launch.kernel_name not in kernel_names:
            diags.append(A.Diagnostic(
                "error", w.launch.line, w.launch.col,
                f"unresolved kernel {w.launch.kernel_name!r}"))
    if diags:
        raise A.SourceError(diags)


class _Parser:
    def __init__(self, tokens: List[Token], source_name: str) -> None:
        self.tokens = tokens
        self.pos = 0
        self.source_name = source_name

    # --- token plumbing ---

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.text == text and tok.kind in ("punct", "keyword")

    def accept(self, text: str) -> Optional[Token]:
        if self.at(text):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.at(text):
            self.fail(f"expected {text!r}, found {tok.text!r}" if tok.text
                      else f"expected {text!r}, found end of input", tok)
        return self.next()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(f"expected identifier, found {tok.text!r}", tok)
        return self.next()

    def fail(self, message: str, tok: Optional[Token] = None) -> None:
        tok = tok or self.peek()
        raise A.SourceError([A.Diagnostic("error", tok.line, tok.col, message)])

    # --- declarations ---

    def unit(self) -> A.SourceUnit:
        wrappers: List[A.WrapperDecl] = []
        kernels: List[A.KernelDecl] = []
        while self.peek().kind != "eof":
            if self.at("wrapper"):
                wrappers.append(self.wrapper())
            elif self.at("kernel"):
                kernels.append(self.kernel())
            else:
                self.fail("expected 'wrapper' or 'kernel' at top level")
        return A.SourceUnit(wrappers, kernels, self.source_name)

    def wrapper(self) -> A.WrapperDecl:
        kw = self.expect("wrapper")
        name = self.expect_ident()
        params = self.param_list(kernel=False)
        self.expect("{")
        body: List[A.Stmt] = []
        launch: Optional[A.LaunchSpec] = None
        while not self.at("}"):
            stmt = self.wrapper_stmt()
            if isinstance(stmt, A.LaunchSpec):
                launch = stmt
                break
            body.append(stmt)
        close = self.expect("}")
        if launch is None:
            self.fail("wrapper body must end with a launch statement", close)
        return A.WrapperDecl(name.text, params, body, launch,
                             line=kw.line, col=kw.col)

    def kernel(self) -> A.KernelDecl:
        kw = self.expect("kernel")
        name = self.expect_ident()
        params = self.param_list(kernel=True)
        body = self.block(top_level=True)
        return A.KernelDecl(name.text, params, body, line=kw.line, col=kw.col)

    def param_list(self, kernel: bool) -> List[A.Param]:
        self.expect("(")
        params: List[A.Param] = []
        names = set()
        while not self.at(")"):
            if params:
                self.expect(",")
            pname = self.expect_ident()
            self.expect(":")
            ptype = self.type_ref(kernel=kernel)
            if pname.text in names:
                self.fail(f"duplicate parameter {pname.text!r}", pname)
            names.add(pname.text)
            params.append(A.Param(pname.text, ptype, pname.line, pname.col))
        self.expect(")")
        return params

    def type_ref(self, kernel: bool) -> A.TypeRef:
        tok = self.peek()
        if tok.text == "tensor":
            if kernel:
                self.fail("kernels take handles, not tensors", tok)
            self.next()
            return A.TensorType()
        if tok.text == "handle":
            if not kernel:
                self.fail("wrappers take tensors, not handles", tok)
            return self.handle_type()
        if tok.text in _SCALARS:
            self.next()
            return A.ScalarType(tok.text)
        self.fail(f"expected a type, found {tok.text!r}", tok)
        raise AssertionError  # unreachable

    def handle_type(self) -> A.HandleType:
        self.expect("handle")
        self.expect("<")
        elem_tok = self.peek()
        if elem_tok.text not in _SCALARS:
            self.fail(f"expected element type, found {elem_tok.text!r}", elem_tok)
        self.next()
        elem = A.ScalarType(elem_tok.text)
        group = 1
        if self.accept(","):
            gtok = self.peek()
            if gtok.kind != "int" or gtok.int_value < 1:
                self.fail("handle group must be a positive integer literal", gtok)
            self.next()
            group = gtok.int_value
            if group != 1 and not elem.is_float:
                self.fail("grouped handles are for float element types", gtok)
        self.expect(">")
        return A.HandleType(elem, group)

    # --- wrapper statements ---

    def wrapper_stmt(self) -> A.Stmt:
        tok = self.peek()
        if self.at("let"):
            self.next()
            name = self.expect_ident()
            decl_type: Optional[A.ScalarType] = None
            if self.accept(":"):
                ttok = self.peek()
                if ttok.text not in _SCALARS:
                    self.fail(f"expected scalar type, found {ttok.text!r}", ttok)
                self.next()
                decl_type = A.ScalarType(ttok.text)
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return A.WLet(name=name.text, decl_type=decl_type, value=value,
                          line=tok.line, col=tok.col)
        if self.at("assert"):
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect(";")
            return A.WAssert(cond=cond, line=tok.line, col=tok.col)
        if self.at("launch"):
            return self.launch_spec()
        value = self.expr()
        self.expect(";")
        return A.WExprStmt(value=value, line=tok.line, col=tok.col)

    def launch_spec(self) -> A.LaunchSpec:
        kw = self.expect("launch")
        name = self.expect_ident()
        self.expect("<<<")
        grid = self.dim_list()
        self.expect(";")
        block = self.dim_list()
        dyn_shared: Optional[A.Expr] = None
        if self.accept(";"):
            dyn_shared = self.expr()
        self.expect(">>>")
        self.expect("(")
        args: List[A.Expr] = []
        while not self.at(")"):
            if args:
                self.expect(",")
            args.append(self.expr())
        self.expect(")")
        self.expect(";")
        return A.LaunchSpec(kernel_name=name.text, grid=grid, block=block,
                            dyn_shared=dyn_shared, args=args,
                            line=kw.line, col=kw.col)

    def dim_list(self) -> List[A.Expr]:
        dims = [self.expr()]
        while self.accept(","):
            dims.append(self.expr())
        if len(dims) > 3:
            self.fail("at most three launch dimensions")
        return dims

    # --- kernel statements ---

    def block(self, top_level: bool = False) -> List[A.Stmt]:
        self.expect("{")
        stmts: List[A.Stmt] = []
        while not self.at("}"):
            stmts.append(self.kernel_stmt(top_level=top_level))
        self.expect("}")
        return stmts

    def kernel_stmt(self, top_level: bool = False) -> A.Stmt:
        tok = self.peek()
        if tok.text in ("shared", "extern"):
            if not top_level:
                self.fail("shared declarations belong at kernel top level", tok)
            return self.shared_decl()
        if tok.text in _SCALARS:
            return self.local_decl()
        if tok.text == "handle":
            return self.handle_decl()
        if self.at("if"):
            return self.if_stmt()
        if self.at("for"):
            return self.for_stmt()
        if self.at("barrier"):
            self.next()
            self.expect(";")
            return A.Barrier(line=tok.line, col=tok.col)
        if self.at("return"):
            self.next()
            self.expect(";")
            return A.Return(line=tok.line, col=tok.col)
        stmt = self.assign_stmt()
        self.expect(";")
        return stmt

    def shared_decl(self) -> A.Stmt:
        tok = self.peek()
        extern = bool(self.accept("extern"))
        self.expect("shared")
        etok = self.peek()
        if etok.text not in _SCALARS:
            self.fail(f"expected element type, found {etok.text!r}", etok)
        self.next()
        name = self.expect_ident()
        self.expect("[")
        extent: Optional[A.Expr] = None
        if not self.at("]"):
            if extern:
                self.fail("extern shared arrays take no extent", self.peek())
            extent = self.expr()
        elif not extern:
            self.fail("static shared arrays need a constant extent", self.peek())
        self.expect("]")
        self.expect(";")
        return A.SharedDecl(elem_type=A.ScalarType(etok.text), name=name.text,
                            extent=extent, extern=extern,
                            line=tok.line, col=tok.col)

    def local_decl(self) -> A.LocalDecl:
        ttok = self.next()
        name = self.expect_ident()
        init: Optional[A.Expr] = None
        if self.accept("="):
            init = self.expr()
        self.expect(";")
        return A.LocalDecl(decl_type=A.ScalarType(ttok.text), name=name.text,
                           init=init, line=ttok.line, col=ttok.col)

    def handle_decl(self) -> A.HandleDecl:
        tok = self.peek()
        htype = self.handle_type()
        name = self.expect_ident()
        self.expect("=")
        init = self.expr()
        self.expect(";")
        return A.HandleDecl(decl_type=htype, name=name.text, init=init,
                            line=tok.line, col=tok.col)

    def if_stmt(self) -> A.If:
        kw = self.expect("if")
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then_body = self.block()
        else_body: List[A.Stmt] = []
        if self.accept("else"):
            if self.at("if"):
                else_body = [self.if_stmt()]
            else:
                else_body = self.block()
        return A.If(cond=cond, then_body=then_body, else_body=else_body,
                    line=kw.line, col=kw.col)

    def for_stmt(self) -> A.For:
        kw = self.expect("for")
        self.expect("(")
        if self.peek().text in _SCALARS:
            ttok = self.next()
            name = self.expect_ident()
            self.expect("=")
            init_val = self.expr()
            init: A.Stmt = A.LocalDecl(decl_type=A.ScalarType(ttok.text),
                                       name=name.text, init=init_val,
                                       line=ttok.line, col=ttok.col)
        else:
            init = self.assign_stmt()
        self.expect(";")
        guard = self.expr()
        self.expect(";")
        step = self.assign_stmt()
        if not isinstance(step, A.Assign):
            self.fail("for-loop step must be an assignment", kw)
        self.expect(")")
        body = self.block()
        return A.For(init=init, guard=guard, step=step, body=body,
                     line=kw.line, col=kw.col)

    def assign_stmt(self) -> A.Assign:
        tok = self.peek()
        target = self.postfix()
        if not isinstance(target, (A.Name, A.Index)):
            self.fail("assignment target must be a variable or element", tok)
        op_tok = self.peek()
        if op_tok.text not in _ASSIGN_OPS:
            self.fail(f"expected assignment operator, found {op_tok.text!r}", op_tok)
        self.next()
        value = self.expr()
        return A.Assign(target=target, op=op_tok.text, value=value,
                        line=tok.line, col=tok.col)

    # --- expressions (precedence climbing) ---

    def expr(self) -> A.Expr:
        return self.lor()

    def _left_assoc(self, sub, ops) -> A.Expr:
        node = sub()
        while self.peek().text in ops and self.peek().kind == "punct":
            op = self.next()
            rhs = sub()
            node = A.Bin(op=op.text, lhs=node, rhs=rhs, line=op.line, col=op.col)
        return node

    def lor(self) -> A.Expr:
        return self._left_assoc(self.land, ("||",))

    def land(self) -> A.Expr:
        return self._left_assoc(self.equality, ("&&",))

    def equality(self) -> A.Expr:
        return self._left_assoc(self.relational, ("==", "!="))

    def relational(self) -> A.Expr:
        return self._left_assoc(self.shift, ("<", "<=", ">", ">="))

    def shift(self) -> A.Expr:
        return self._left_assoc(self.additive, ("<<", ">>"))

    def additive(self) -> A.Expr:
        return self._left_assoc(self.multiplicative, ("+", "-"))

    def multiplicative(self) -> A.Expr:
        return self._left_assoc(self.unary, ("*", "/", "%"))

    def unary(self) -> A.Expr:
        tok = self.peek()
        if self.at("-"):
            self.next()
            operand = self.unary()
            if isinstance(operand, A.IntLit):
                return A.IntLit(value=-operand.value, suffix=operand.suffix,
                                line=tok.line, col=tok.col)
            if isinstance(operand, A.FloatLit):
                return A.FloatLit(value=-operand.value, suffix=operand.suffix,
                                  line=tok.line, col=tok.col)
            return A.Un(op="-", operand=operand, line=tok.line, col=tok.col)
        if self.at("!"):
            self.next()
            operand = self.unary()
            return A.Un(op="!", operand=operand, line=tok.line, col=tok.col)
        return self.postfix()

    def postfix(self) -> A.Expr:
        node = self.primary()
        while True:
            tok = self.peek()
            if self.at("["):
                self.next()
                idx = self.expr()
                self.expect("]")
                node = A.Index(base=node, index=idx, line=tok.line, col=tok.col)
            elif self.at("."):
                self.next()
                member = self.expect_ident()
                if self.at("("):
                    self.next()
                    args: List[A.Expr] = []
                    while not self.at(")"):
                        if args:
                            self.expect(",")
                        args.append(self.expr())
                    self.expect(")")
                    node = A.MethodCall(recv=node, method=member.text, args=args,
                                        line=member.line, col=member.col)
                else:
                    if isinstance(node, A.Name) and node.ident in A.BUILTIN_BASES \
                            and member.text in A.BUILTIN_AXES:
                        node = A.Builtin(name=f"{node.ident}.{member.text}",
                                         line=node.line, col=node.col)
                    else:
                        self.fail("only thread builtins use dotted fields; "
                                  "tensor members are method calls", member)
            else:
                return node

    def primary(self) -> A.Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return A.IntLit(value=tok.int_value, suffix=tok.int_suffix,
                            line=tok.line, col=tok.col)
        if tok.kind == "float":
            self.next()
            return A.FloatLit(value=tok.float_value, suffix=tok.float_suffix,
                              line=tok.line, col=tok.col)
        if tok.text in ("true", "false"):
            self.next()
            return A.BoolLit(value=tok.text == "true", line=tok.line, col=tok.col)
        if tok.text in _SCALARS and self.peek(1).text == "(":
            self.next()
            self.expect("(")
            operand = self.expr()
            self.expect(")")
            return A.CastExpr(target=A.ScalarType(tok.text), operand=operand,
                              line=tok.line, col=tok.col)
        if tok.text == "handle":
            htype = self.handle_type()
            self.expect("(")
            operand = self.expr()
            self.expect(")")
            return A.HandleCast(target=htype, operand=operand,
                                line=tok.line, col=tok.col)
        if tok.kind == "ident":
            self.next()
            return A.Name(ident=tok.text, line=tok.line, col=tok.col)
        if self.at("("):
            self.next()
            inner = self.expr()
            self.expect(")")
            return inner
        self.fail(f"expected an expression, found {tok.text!r}"
                  if tok.text else "expected an expression, found end of input",
                  tok)
        raise AssertionError  # unreachable
