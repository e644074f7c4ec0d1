"""Type checking and coercion insertion.

Integer arithmetic is strict C-at-declared-width: both operands of an
arithmetic or comparison operator must have the same scalar type, with
one exception — an unsuffixed literal adopts the other operand's type
when its value fits.  Assignment (and wrapper lets, and launch argument
binding) widen implicitly, materialized as CastExpr nodes with
implicit=True so later passes see every conversion; narrowing in kernel
code requires a source-level cast.  Shifts type as their left operand
and take any integer shift count.

The checker rewrites the unit in place (filling ``ty``, inserting
casts) and returns it.  All problems are collected into Diagnostics;
any error raises SourceError at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

from . import ast as A

BUILTIN_TYPE = A.ScalarType("i32")

_FIELD_METHODS = {"numel": A.I64_T, "element_size": A.I64_T, "dim": A.I64_T,
                  "size": A.I64_T}
_TENSOR_METHODS = frozenset({"sum", "view", "reshape", "narrow0",
                             "empty_like", "flatten"})
_CHECK_METHODS = frozenset({"check_dim_size", "check_same_shape"})
_VOID_METHODS = frozenset({"toString", "log"})


@dataclass(frozen=True)
class RawHandleType:
    """The type of data_ptr(): a base address whose element type comes
    from the kernel parameter it is bound to."""

    def __str__(self) -> str:
        return "rawhandle"


@dataclass(frozen=True)
class VoidType:
    def __str__(self) -> str:
        return "void"


def typecheck(unit: A.SourceUnit) -> A.SourceUnit:
    checker = _Checker(unit)
    checker.run()
    if checker.diags:
        raise A.SourceError(checker.diags)
    return unit


class _Checker:
    def __init__(self, unit: A.SourceUnit) -> None:
        self.unit = unit
        self.diags: List[A.Diagnostic] = []

    def error(self, node, message: str) -> None:
        self.diags.append(A.Diagnostic("error", node.line, node.col, message))

    def run(self) -> None:
        for k in self.unit.kernels:
            self.check_kernel(k)
        for w in self.unit.wrappers:
            self.check_wrapper(w)

    # ------------------------------------------------------------------
    # literals and coercion

    def _adopt(self, e: A.Expr, want: A.TypeRef) -> bool:
        """Re-type a flexible literal to ``want`` if legal; True on success."""
        if not isinstance(want, A.ScalarType) or want.name == "bool":
            return False
        if isinstance(e, A.IntLit) and e.suffix == "" and not want.is_float:
            lo, hi = _int_range(want)
            if lo <= e.value <= hi:
                e.ty = want
                return True
            return False
        if isinstance(e, A.FloatLit) and e.suffix == "" and want.is_float:
            e.ty = want
            return True
        return False

    def _unify(self, node, lhs: A.Expr, rhs: A.Expr, what: str) -> Optional[A.ScalarType]:
        """Common type of two checked operands, applying literal adoption."""
        lt, rt = lhs.ty, rhs.ty
        if lt is None or rt is None:
            return None  # poisoned by an earlier error
        if lt == rt and isinstance(lt, A.ScalarType):
            return lt
        if self._adopt(lhs, rt):
            return rhs.ty  # type: ignore[return-value]
        if self._adopt(rhs, lt):
            return lhs.ty  # type: ignore[return-value]
        self.error(node, f"{what} needs matching operand types, "
                         f"got {lt} and {rt} (cast explicitly)")
        return None

    def _coerce(self, node, value: A.Expr, want: A.ScalarType,
                allow_narrowing: bool) -> A.Expr:
        """Make ``value`` have type ``want``, inserting an implicit cast
        for legal conversions; returns the (possibly wrapped) expression."""
        have = value.ty
        if have is None:
            return value
        if have == want:
            return value
        if self._adopt(value, want):
            return value
        if not isinstance(have, A.ScalarType):
            self.error(node, f"cannot convert {have} to {want}")
            return value
        widening = (
            have.is_float == want.is_float
            and have.is_signed == want.is_signed
            and have.bits < want.bits
            and have.name != "bool" and want.name != "bool"
        )
        if widening or (allow_narrowing and have.name != "bool" != want.name):
            cast = A.CastExpr(target=want, operand=value, implicit=True,
                              line=value.line, col=value.col)
            cast.ty = want
            return cast
        self.error(node, f"no implicit conversion from {have} to {want}; "
                         f"cast explicitly")
        return value

    # ------------------------------------------------------------------
    # kernels

    def check_kernel(self, kernel: A.KernelDecl) -> None:
        scopes: List[Dict[str, A.TypeRef]] = [{}]
        for p in kernel.params:
            if isinstance(p.type, A.TensorType):
                self.error(p, "kernels take handles and scalars, not tensors")
                continue
            if p.name in scopes[0]:
                self.error(p, f"duplicate parameter {p.name!r}")
            scopes[0][p.name] = p.type
        self._check_body(kernel.body, scopes, top_level=True)

    def _declare(self, scopes, node, name: str, ty: A.TypeRef) -> None:
        for scope in scopes:
            if name in scope:
                self.error(node, f"redeclaration of {name!r}")
                return
        scopes[-1][name] = ty

    def _lookup(self, scopes, name: str) -> Optional[A.TypeRef]:
        for scope in reversed(scopes):
            if name in scope:
                return scope[name]
        return None

    def _check_body(self, body: List[A.Stmt], scopes, top_level: bool = False) -> None:
        for stmt in body:
            self._check_stmt(stmt, scopes, top_level=top_level)

    def _check_stmt(self, stmt: A.Stmt, scopes, top_level: bool = False) -> None:
        if isinstance(stmt, A.LocalDecl):
            if stmt.decl_type.name == "bool":
                self.error(stmt, "bool is not a declarable kernel type")
            if stmt.init is not None:
                self.kexpr(stmt.init, scopes)
                stmt.init = self._coerce(stmt, stmt.init, stmt.decl_type,
                                         allow_narrowing=False)
            self._declare(scopes, stmt, stmt.name, stmt.decl_type)
            return
        if isinstance(stmt, A.HandleDecl):
            self.kexpr(stmt.init, scopes)
            if stmt.init.ty is not None and stmt.init.ty != stmt.decl_type:
                self.error(stmt, f"handle initializer has type {stmt.init.ty}, "
                                 f"expected {stmt.decl_type}")
            self._declare(scopes, stmt, stmt.name, stmt.decl_type)
            return
        if isinstance(stmt, A.SharedDecl):
            if stmt.elem_type.is_float and stmt.elem_type.name == "f16":
                pass  # any scalar element type is fine
            if not stmt.extern:
                value = _const_eval(stmt.extent)
                if value is None:
                    self.error(stmt, "static shared extent must be a "
                                     "compile-time constant")
                elif value < 1:
                    self.error(stmt, "shared extent must be positive")
                else:
                    self.kexpr(stmt.extent, scopes)
            self._declare(scopes, stmt, stmt.name,
                          A.HandleType(stmt.elem_type, 1))
            return
        if isinstance(stmt, A.Assign):
            self._check_assign(stmt, scopes)
            return
        if isinstance(stmt, A.If):
            self.kexpr(stmt.cond, scopes)
            self._require_bool(stmt.cond, "if condition")
            scopes.append({})
            self._check_body(stmt.then_body, scopes)
            scopes.pop()
            scopes.append({})
            self._check_body(stmt.else_body, scopes)
            scopes.pop()
            return
        if isinstance(stmt, A.For):
            scopes.append({})
            self._check_stmt(stmt.init, scopes)
            self.kexpr(stmt.guard, scopes)
            self._require_bool(stmt.guard, "for-loop guard")
            self._check_assign(stmt.step, scopes)
            self._check_body(stmt.body, scopes)
            scopes.pop()
            return
        if isinstance(stmt, (A.Barrier, A.Return)):
            return
        raise TypeError(f"unexpected kernel statement {type(stmt).__name__}")

    def _check_assign(self, stmt: A.Assign, scopes) -> None:
        self.kexpr(stmt.target, scopes)
        self.kexpr(stmt.value, scopes)
        t = stmt.target.ty
        if isinstance(stmt.target, A.Name):
            if isinstance(t, (A.HandleType, RawHandleType)):
                self.error(stmt, "handles are bound once at declaration")
                return
        if t is None:
            return
        if not isinstance(t, A.ScalarType):
            self.error(stmt, f"cannot assign to a value of type {t}")
            return
        if stmt.op != "=":
            # compound ops reuse the binary rule: same type after adoption
            got = self._unify(stmt, stmt.target, stmt.value,
                              f"operator {stmt.op!r}")
            if got is not None and got != t:
                self.error(stmt, f"operator {stmt.op!r} result {got} does not "
                                 f"match target type {t}")
            return
        stmt.value = self._coerce(stmt, stmt.value, t, allow_narrowing=False)

    def _require_bool(self, e: A.Expr, what: str) -> None:
        if e.ty is not None and e.ty != A.BOOL_T:
            self.error(e, f"{what} must be bool, got {e.ty}")

    def _require_int(self, e: A.Expr, what: str) -> None:
        if e.ty is None:
            return
        if not isinstance(e.ty, A.ScalarType) or e.ty.is_float or e.ty.name == "bool":
            self.error(e, f"{what} must be an integer, got {e.ty}")

    # ------------------------------------------------------------------
    # expressions (kernel mode; wrapper mode flips the wrapper flag)

    def kexpr(self, e: A.Expr, scopes, wrapper: bool = False) -> None:
        if isinstance(e, A.IntLit):
            if e.ty is None:
                e.ty = _default_int_type(e)
            return
        if isinstance(e, A.FloatLit):
            if e.ty is None:
                e.ty = A.ScalarType("f32") if e.suffix == "f" else A.F64_T
            return
        if isinstance(e, A.BoolLit):
            e.ty = A.BOOL_T
            return
        if isinstance(e, A.Builtin):
            if wrapper:
                self.error(e, "thread builtins exist only inside kernels")
            e.ty = BUILTIN_TYPE
            return
        if isinstance(e, A.Name):
            ty = self._lookup(scopes, e.ident)
            if ty is None:
                self.error(e, f"unknown name {e.ident!r}")
            e.ty = ty
            return
        if isinstance(e, A.Un):
            self.kexpr(e.operand, scopes, wrapper)
            if e.op == "!":
                self._require_bool(e.operand, "operator '!'")
                e.ty = A.BOOL_T
            else:
                t = e.operand.ty
                if t is not None and (not isinstance(t, A.ScalarType)
                                      or t.name == "bool"):
                    self.error(e, f"cannot negate a value of type {t}")
                e.ty = t
            return
        if isinstance(e, A.Bin):
            self._check_bin(e, scopes, wrapper)
            return
        if isinstance(e, A.CastExpr):
            self.kexpr(e.operand, scopes, wrapper)
            t = e.operand.ty
            if t is not None and not isinstance(t, A.ScalarType):
                self.error(e, f"cannot cast a value of type {t}")
            if e.target.name == "bool":
                self.error(e, "casts to bool are not supported")
            e.ty = e.target
            return
        if isinstance(e, A.HandleCast):
            if wrapper:
                self.error(e, "memory access belongs in kernel code")
            self.kexpr(e.operand, scopes, wrapper)
            self._require_int(e.operand, "handle cast operand")
            e.ty = e.target
            return
        if isinstance(e, A.Index):
            if wrapper:
                self.error(e, "memory access belongs in kernel code")
            self.kexpr(e.base, scopes, wrapper)
            self.kexpr(e.index, scopes, wrapper)
            self._require_int(e.index, "index")
            bt = e.base.ty
            if isinstance(bt, A.HandleType):
                e.ty = bt.elem
            else:
                if bt is not None:
                    self.error(e, f"cannot index a value of type {bt}")
                e.ty = None
            return
        if isinstance(e, A.MethodCall):
            if not wrapper:
                self.error(e, "method calls are wrapper-side only")
                e.ty = None
                return
            self._check_method(e, scopes[0])
            return
        raise TypeError(f"unexpected expression {type(e).__name__}")

    def _host_widen(self, e: A.Bin) -> None:
        """Wrapper code follows host C++ and promotes the narrower integer
        (or float) operand; kernels never reach here."""
        lt, rt = e.lhs.ty, e.rhs.ty
        if not (isinstance(lt, A.ScalarType) and isinstance(rt, A.ScalarType)):
            return
        if lt == rt or "bool" in (lt.name, rt.name):
            return
        if lt.is_float != rt.is_float or lt.is_signed != rt.is_signed:
            return
        if isinstance(e.lhs, (A.IntLit, A.FloatLit)) and e.lhs.ty and \
                getattr(e.lhs, "suffix", None) == "":
            return  # literal adoption handles it
        if isinstance(e.rhs, (A.IntLit, A.FloatLit)) and e.rhs.ty and \
                getattr(e.rhs, "suffix", None) == "":
            return
        if lt.bits < rt.bits:
            e.lhs = self._coerce(e, e.lhs, rt, allow_narrowing=False)
        elif rt.bits < lt.bits:
            e.rhs = self._coerce(e, e.rhs, lt, allow_narrowing=False)

    def _check_bin(self, e: A.Bin, scopes, wrapper: bool = False) -> None:
        self.kexpr(e.lhs, scopes, wrapper)
        self.kexpr(e.rhs, scopes, wrapper)
        if wrapper:
            self._host_widen(e)
        op = e.op
        if op in ("&&", "||"):
            self._require_bool(e.lhs, f"operator {op!r}")
            self._require_bool(e.rhs, f"operator {op!r}")
            e.ty = A.BOOL_T
            return
        if op in ("<<", ">>"):
            self._require_int(e.lhs, "shift value")
            if isinstance(e.rhs, A.IntLit) and e.rhs.suffix == "" \
                    and e.lhs.ty is not None:
                self._adopt(e.rhs, e.lhs.ty)
            if e.rhs.ty is None or isinstance(e.rhs.ty, A.ScalarType):
                self._require_int(e.rhs, "shift count")
            e.ty = e.lhs.ty
            return
        # handle arithmetic: handle +- int advances by elements
        if op in ("+", "-") and isinstance(e.lhs.ty, A.HandleType):
            self._require_int(e.rhs, "handle offset")
            e.ty = e.lhs.ty
            return
        if op in ("/", "%"):
            z = _const_eval(e.rhs)
            if z == 0:
                self.error(e, "division by constant zero")
        if op in ("==", "!=", "<", "<=", ">", ">="):
            self._unify(e, e.lhs, e.rhs, f"comparison {op!r}")
            e.ty = A.BOOL_T
            return
        common = self._unify(e, e.lhs, e.rhs, f"operator {op!r}")
        if common is not None and common.name == "bool":
            self.error(e, f"operator {op!r} does not apply to bool")
            common = None
        if common is not None and common.is_float and op == "%":
            self.error(e, "operator '%' needs integer operands")
        e.ty = common

    # ------------------------------------------------------------------
    # wrappers

    def check_wrapper(self, w: A.WrapperDecl) -> None:
        scope: Dict[str, A.TypeRef] = {}
        for p in w.params:
            if isinstance(p.type, A.HandleType):
                self.error(p, "wrappers take tensors, not handles")
                continue
            if p.name in scope:
                self.error(p, f"duplicate parameter {p.name!r}")
            scope[p.name] = p.type
        for stmt in w.body:
            if isinstance(stmt, A.WLet):
                self.wexpr(stmt.value, scope)
                vt = stmt.value.ty
                if stmt.decl_type is not None:
                    # host-side lets convert freely; the cast is recorded
                    self.wexpr_is_scalar(stmt, stmt.value)
                    stmt.value = self._coerce(stmt, stmt.value, stmt.decl_type,
                                              allow_narrowing=True)
                    ty: A.TypeRef = stmt.decl_type
                else:
                    if not isinstance(vt, A.TensorType):
                        self.error(stmt, "untyped let needs a tensor-producing "
                                         "method on the right")
                    ty = A.TensorType()
                if stmt.name in scope:
                    self.error(stmt, f"redeclaration of {stmt.name!r}")
                scope[stmt.name] = ty
            elif isinstance(stmt, A.WAssert):
                self.wexpr(stmt.cond, scope)
                self._require_bool(stmt.cond, "assertion")
            elif isinstance(stmt, A.WExprStmt):
                self.wexpr(stmt.value, scope)
            else:
                raise TypeError(f"unexpected wrapper statement {type(stmt).__name__}")
        self._check_launch(w.launch, scope)

    def wexpr_is_scalar(self, node, e: A.Expr) -> None:
        if e.ty is not None and not isinstance(e.ty, A.ScalarType):
            self.error(node, f"expected a scalar value, got {e.ty}")

    def wexpr(self, e: A.Expr, scope: Dict[str, A.TypeRef]) -> None:
        self.kexpr(e, [scope], wrapper=True)

    def _check_method(self, e: A.MethodCall, scope: Dict[str, A.TypeRef]) -> None:
        self.wexpr(e.recv, scope)
        rt = e.recv.ty
        if rt is not None and not isinstance(rt, A.TensorType):
            self.error(e, f"method {e.method!r} needs a tensor receiver, "
                          f"got {rt}")
        for a in e.args:
            if not (isinstance(a, A.Name) and e.method == "check_same_shape"):
                self.wexpr(a, scope)
        m = e.method
        if m in _FIELD_METHODS:
            _expect_arity(self, e, 1 if m == "size" else 0)
            if m == "size" and e.args and not isinstance(e.args[0], A.IntLit):
                self.error(e, "size() takes a literal dimension index")
            e.ty = _FIELD_METHODS[m]
        elif m == "data_ptr":
            _expect_arity(self, e, 0)
            e.ty = RawHandleType()
        elif m in _TENSOR_METHODS:
            if m == "sum" and (len(e.args) != 1
                               or not isinstance(e.args[0], A.IntLit)):
                self.error(e, "sum() takes a literal dimension index")
            if m in ("view", "reshape") and not e.args:
                self.error(e, f"{m}() needs target dimensions")
            for a in e.args:
                self._require_int(a, f"{m}() argument")
            e.ty = A.TensorType()
        elif m == "check_dim_size":
            _expect_arity(self, e, 3)
            for i in (0, 1):
                if i < len(e.args) and not isinstance(e.args[i], A.IntLit):
                    self.error(e, "check_dim_size() rank and index are literals")
            if len(e.args) == 3:
                self._require_int(e.args[2], "expected-size argument")
            e.ty = A.BOOL_T
        elif m == "check_same_shape":
            _expect_arity(self, e, 1)
            if e.args:
                other = e.args[0]
                self.wexpr(other, scope)
                if other.ty is not None and not isinstance(other.ty, A.TensorType):
                    self.error(e, "check_same_shape() takes a tensor")
            e.ty = A.BOOL_T
        elif m in _VOID_METHODS:
            e.ty = VoidType()
        else:
            self.error(e, f"unsupported tensor method {m!r}")

    def _check_launch(self, launch: A.LaunchSpec, scope: Dict[str, A.TypeRef]) -> None:
        for dim in launch.grid + launch.block:
            self.wexpr(dim, scope)
            self._require_int(dim, "launch dimension")
        if launch.dyn_shared is not None:
            self.wexpr(launch.dyn_shared, scope)
            self._require_int(launch.dyn_shared, "dynamic shared size")
        try:
            kernel = self.unit.kernel(launch.kernel_name)
        except KeyError:
            return  # parse-time validation already reported it
        if len(launch.args) != len(kernel.params):
            self.error(launch, f"launch passes {len(launch.args)} argument(s); "
                               f"kernel {kernel.name!r} takes {len(kernel.params)}")
            return
        for i, (arg, param) in enumerate(zip(launch.args, kernel.params)):
            self.wexpr(arg, scope)
            pt = param.type
            if isinstance(pt, A.HandleType):
                if not isinstance(arg.ty, RawHandleType):
                    self.error(arg, f"argument {i} must be a data_ptr() "
                                    f"for handle parameter {param.name!r}")
            elif isinstance(pt, A.ScalarType):
                self.wexpr_is_scalar(arg, arg)
                if isinstance(arg.ty, A.ScalarType):
                    launch.args[i] = self._coerce(arg, arg, pt,
                                                  allow_narrowing=False)
            else:
                self.error(arg, "kernel parameters are scalars or handles")


def _expect_arity(checker: _Checker, e: A.MethodCall, n: int) -> None:
    if len(e.args) != n:
        checker.error(e, f"{e.method}() takes {n} argument(s), got {len(e.args)}")


def _default_int_type(e: A.IntLit) -> A.ScalarType:
    if e.suffix == "l":
        return A.I64_T
    if e.suffix == "u":
        return A.U32_T
    if e.suffix == "ul":
        return A.U64_T
    if -(1 << 31) <= e.value < (1 << 31):
        return A.I32_T
    return A.I64_T


def _int_range(t: A.ScalarType) -> tuple:
    if t.is_float:
        return (float("-inf"), float("inf"))
    if t.is_signed:
        half = 1 << (t.bits - 1)
        return (-half, half - 1)
    return (0, (1 << t.bits) - 1)


def _const_eval(e: Optional[A.Expr]) -> Optional[int]:
    """Fold integer-literal arithmetic; None when not a constant."""
    if e is None:
        return None
    if isinstance(e, A.IntLit):
        return e.value
    if isinstance(e, A.Un) and e.op == "-":
        v = _const_eval(e.operand)
        return -v if v is not None else None
    if isinstance(e, A.Bin):
        a = _const_eval(e.lhs)
        b = _const_eval(e.rhs)
        if a is None or b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/" and b != 0:
            q = abs(a) // abs(b)
            return q if (a >= 0) == (b >= 0) else -q
        if e.op == "%" and b != 0:
            return a - b * _const_eval(A.Bin(op="/", lhs=A.IntLit(value=a),
                                             rhs=A.IntLit(value=b)))
        if e.op == "<<" and 0 <= b < 64:
            return a << b
        if e.op == ">>" and 0 <= b < 64:
            return a >> b
    if isinstance(e, A.CastExpr):
        return _const_eval(e.operand)
    return None
