"""Tensor memory model.

Each tensor argument owns a descriptor of symbolic facts (base handle,
element count, rank, per-dimension sizes, element size) and a memory
region.  Regions are discrete: global tensors, shared allocations, and
locals never alias, so an address is a region identity plus a byte
offset and all bounds reasoning is region-relative.  Tensor methods
called from wrapper code are interpreted through a declarative summary
table (see data/method_table.json and docs/method-table.md) sorted into
four categories: property getters, tensor-producing derivations,
shape checks, and ignorable calls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .sym import expr as E

Constraint = E.Expr


class TensorError(Exception):
    """Misuse of the tensor model (duplicate names, bad method calls)."""


@dataclass
class TensorDescriptor:
    """Symbolic facts for one tensor argument.

    The dims map grows on first use of an index and may hold negative
    (from-the-end) keys until the rank is concrete; ndims is None while
    the rank is unknown.  All field expressions are 64-bit.
    """

    name: str
    base: E.Sym
    numel: E.Expr
    itemsize: E.Expr
    ndims: Optional[E.Expr] = None
    dims: Dict[int, E.Expr] = field(default_factory=dict)

    def concrete_ndims(self) -> Optional[int]:
        n = self.ndims
        if isinstance(n, E.Const) and isinstance(n.value, int):
            return n.value
        return None

    def canonical_key(self, index: int) -> int:
        k = self.concrete_ndims()
        if index < 0 and k is not None:
            return k + index
        return index


@dataclass(frozen=True)
class Region:
    """One modeled memory area; no address arithmetic crosses regions."""

    rid: str
    kind: str  # "tensor" | "shared" | "local"
    size_bytes: E.Expr
    writable: bool = True
    descriptor: Optional[TensorDescriptor] = None

    def __repr__(self) -> str:  # keep findings readable
        return f"Region({self.rid})"


@dataclass(frozen=True)
class Address:
    """Known-provenance address: region plus byte offset.

    provenance None means the value was not derived from a declared
    handle (integer casts, reloaded pointers); dereferencing such an
    address is its own finding class.
    """

    provenance: Optional[Region]
    offset_bytes: E.Expr

    @property
    def known(self) -> bool:
        return self.provenance is not None

    def shifted(self, delta_bytes: E.Expr) -> "Address":
        off = E.simplify(E.BinOp("add", self.offset_bytes, delta_bytes, E.I64))
        return Address(self.provenance, off)


def unknown_address() -> Address:
    return Address(None, E.Const(0, E.I64))


@dataclass(frozen=True)
class MethodSummary:
    name: str
    category: str  # "I" | "II" | "III" | "IV"
    effect: str
    arity: Optional[int] = None  # None = variadic


_TABLE: Optional[Dict[str, MethodSummary]] = None


def method_table() -> Dict[str, MethodSummary]:
    """The method-summary table, loaded once from package data."""
    global _TABLE
    if _TABLE is None:
        raw = json.loads(
            resources.files("minikernel").joinpath("data/method_table.json").read_text()
        )
        _TABLE = {
            name: MethodSummary(
                name=name,
                category=entry["category"],
                effect=entry.get("effect", "ignore"),
                arity=entry.get("arity"),
            )
            for name, entry in raw.items()
        }
    return _TABLE


def _i64(v: Union[int, E.Expr]) -> E.Expr:
    if isinstance(v, int):
        return E.Const(v, E.I64)
    if v.width != E.I64:
        return E.Cast(v, E.I64)
    return v


_GE1 = lambda e: E.Cmp("ge", e, E.Const(1, E.I64))  # noqa: E731


def declare_tensor(
    name: str,
    *,
    ndims: Optional[int] = None,
    dims: Optional[Dict[int, Union[int, E.Expr]]] = None,
    itemsize: Optional[int] = None,
    numel: Optional[Union[int, E.Expr]] = None,
    taken: Optional[Dict[str, TensorDescriptor]] = None,
) -> Tuple[TensorDescriptor, Region, List[Constraint]]:
    """Create a descriptor, its region, and the declaration constraints.

    Unsupplied facts stay symbolic; positivity (numel >= 1, itemsize >= 1,
    each dim >= 1) always holds, and the product law numel = prod(dims)
    is emitted when the rank and every dimension are supplied.
    """
    if taken is not None and name in taken:
        raise TensorError(f"duplicate tensor name {name!r}")
    if itemsize is not None and itemsize not in (1, 2, 4, 8):
        raise TensorError(f"itemsize must be one of 1,2,4,8; got {itemsize}")

    base = E.Sym(f"{name}.base", E.I64)
    numel_e = _i64(numel) if numel is not None else E.Sym(f"{name}.numel", E.I64)
    item_e = (
        E.Const(itemsize, E.I64) if itemsize is not None else E.Sym(f"{name}.itemsize", E.I64)
    )
    ndims_e = E.Const(ndims, E.I64) if ndims is not None else None

    desc = TensorDescriptor(name=name, base=base, numel=numel_e, itemsize=item_e, ndims=ndims_e)
    constraints: List[Constraint] = [_GE1(desc.numel), _GE1(desc.itemsize)]

    if dims:
        for key, val in sorted(dims.items()):
            ck = desc.canonical_key(key)
            e = _i64(val)
            if ck in desc.dims:
                constraints.append(E.Cmp("eq", desc.dims[ck], e))
            else:
                desc.dims[ck] = e
                constraints.append(_GE1(e))

    if ndims is not None and all(i in desc.dims for i in range(ndims)) and ndims > 0:
        prod: E.Expr = desc.dims[0]
        for i in range(1, ndims):
            prod = E.BinOp("mul", prod, desc.dims[i], E.I64)
        constraints.append(E.Cmp("eq", desc.numel, E.simplify(prod)))

    size = E.simplify(E.BinOp("mul", desc.numel, desc.itemsize, E.I64))
    region = Region(rid=f"tensor:{name}", kind="tensor", size_bytes=size, descriptor=desc)
    if taken is not None:
        taken[name] = desc
    return desc, region, constraints


def dim_of(desc: TensorDescriptor, index: int) -> Tuple[E.Expr, List[Constraint]]:
    """d_t^index, inserting a fresh symbol (>= 1) on first use."""
    key = desc.canonical_key(index)
    if key in desc.dims:
        return desc.dims[key], []
    tag = str(key) if key >= 0 else f"m{-key}"
    sym = E.Sym(f"{desc.name}.dim{tag}", E.I64)
    desc.dims[key] = sym
    return sym, [_GE1(sym)]


# ---------------------------------------------------------------------------
# method application

MethodResult = Tuple[str, object]  # ("scalar"|"tensor"|"address"|"unit", payload)


def apply_method(
    desc: TensorDescriptor,
    region: Region,
    method: str,
    args: Sequence[object],
    *,
    fresh_name: str,
) -> Tuple[MethodResult, Optional[Region], List[Constraint]]:
    """Interpret one tensor-method call through the summary table.

    args carry ints for required-constant positions (dimension indexes)
    and SymExpr elsewhere.  Category II returns a new descriptor and
    region named fresh_name; shape-check contradictions are constraints
    for the solver, never errors here.
    """
    table = method_table()
    if method not in table:
        raise TensorError(f"unsupported tensor method {method!r}")
    summary = table[method]
    if summary.arity is not None and len(args) != summary.arity:
        raise TensorError(
            f"{method}() takes {summary.arity} argument(s), got {len(args)}"
        )

    effect = summary.effect
    if effect == "ignore":
        return ("unit", None), None, []

    if effect == "field":
        return ("scalar", {
            "numel": desc.numel,
            "itemsize": desc.itemsize,
            "ndims": desc.ndims if desc.ndims is not None else _fresh_rank(desc),
        }[method_field(method)]), None, []

    if effect == "base_address":
        return ("address", Address(region, E.Const(0, E.I64))), None, []

    if effect == "dim":
        index = _const_arg(method, args, 0)
        e, cs = dim_of(desc, index)
        return ("scalar", e), None, cs

    if effect == "reduce_dim":
        index = _const_arg(method, args, 0)
        d, cs = dim_of(desc, index)
        out, out_region = _derived(desc, fresh_name)
        cs = list(cs)
        cs.append(E.Cmp("eq", desc.numel, E.BinOp("mul", out.numel, d, E.I64)))
        cs.append(E.Cmp("eq", out.itemsize, desc.itemsize))
        if desc.ndims is not None:
            out.ndims = E.simplify(E.BinOp("sub", desc.ndims, E.Const(1, E.I64), E.I64))
        k = desc.canonical_key(index)
        for key, val in desc.dims.items():
            if key > k:
                out.dims[key - 1] = val
            elif 0 <= key < k:
                out.dims[key] = val
        cs.append(_GE1(out.numel))
        return ("tensor", out), out_region, cs

    if effect == "reshape":
        if not args:
            raise TensorError(f"{method}() needs at least one target dimension")
        out, out_region = _derived(desc, fresh_name)
        out.ndims = E.Const(len(args), E.I64)
        prod: Optional[E.Expr] = None
        for i, a in enumerate(args):
            e = _i64(a if isinstance(a, (int, E.Expr)) else 0)
            out.dims[i] = e
            prod = e if prod is None else E.BinOp("mul", prod, e, E.I64)
        cs = [
            E.Cmp("eq", out.numel, E.simplify(prod)),
            E.Cmp("eq", out.numel, desc.numel),
            E.Cmp("eq", out.itemsize, desc.itemsize),
            _GE1(out.numel),
        ]
        return ("tensor", out), out_region, cs

    if effect == "slice_dim0":
        count = _i64(args[0])
        d0, cs = dim_of(desc, 0)
        out, out_region = _derived(desc, fresh_name)
        cs = list(cs)
        out.ndims = desc.ndims
        out.dims[0] = count
        for key, val in desc.dims.items():
            if key != 0:
                out.dims[key] = val
        # numel scales with the leading dimension: out.numel * d0 = numel * count
        cs.append(E.Cmp(
            "eq",
            E.BinOp("mul", out.numel, d0, E.I64),
            E.BinOp("mul", desc.numel, count, E.I64),
        ))
        cs.append(E.Cmp("eq", out.itemsize, desc.itemsize))
        cs.append(_GE1(count))
        cs.append(E.Cmp("le", count, d0))
        return ("tensor", out), out_region, cs

    if effect == "clone_shape":
        out, out_region = _derived(desc, fresh_name)
        out.numel = desc.numel
        out.itemsize = desc.itemsize
        out.ndims = desc.ndims
        out.dims = dict(desc.dims)
        size = E.simplify(E.BinOp("mul", out.numel, out.itemsize, E.I64))
        out_region = Region(
            rid=f"tensor:{fresh_name}", kind="tensor", size_bytes=size, descriptor=out
        )
        return ("tensor", out), out_region, []

    if effect == "flatten":
        out, out_region = _derived(desc, fresh_name)
        out.ndims = E.Const(1, E.I64)
        out.numel = desc.numel
        out.itemsize = desc.itemsize
        out.dims = {0: desc.numel}
        size = E.simplify(E.BinOp("mul", out.numel, out.itemsize, E.I64))
        out_region = Region(
            rid=f"tensor:{fresh_name}", kind="tensor", size_bytes=size, descriptor=out
        )
        return ("tensor", out), out_region, []

    if effect == "dim_size":
        # check_dim_size(n, i, exp): rank is n and dims[i] = exp
        n = _const_arg(method, args, 0)
        index = _const_arg(method, args, 1)
        exp = _i64(args[2])
        cs: List[Constraint] = []
        if desc.ndims is None:
            desc.ndims = E.Const(n, E.I64)
        else:
            cs.append(E.Cmp("eq", desc.ndims, E.Const(n, E.I64)))
        d, more = dim_of(desc, index)
        cs.extend(more)
        cs.append(E.Cmp("eq", d, exp))
        return ("unit", None), None, cs

    if effect == "same_shape":
        other = args[0]
        if not isinstance(other, TensorDescriptor):
            raise TensorError(f"{method}() expects a tensor argument")
        cs = [E.Cmp("eq", desc.numel, other.numel)]
        if desc.ndims is not None and other.ndims is not None:
            cs.append(E.Cmp("eq", desc.ndims, other.ndims))
        elif desc.ndims is not None:
            other.ndims = desc.ndims
        elif other.ndims is not None:
            desc.ndims = other.ndims
        for key in sorted(set(desc.dims) | set(other.dims)):
            a, ca = dim_of(desc, key)
            b, cb = dim_of(other, key)
            cs.extend(ca)
            cs.extend(cb)
            cs.append(E.Cmp("eq", a, b))
        return ("unit", None), None, cs

    raise TensorError(f"method table names unknown effect {effect!r}")


def method_field(method: str) -> str:
    return {"numel": "numel", "element_size": "itemsize", "dim": "ndims"}[method]


def _fresh_rank(desc: TensorDescriptor) -> E.Expr:
    if desc.ndims is None:
        desc.ndims = E.Sym(f"{desc.name}.ndims", E.I64)
    return desc.ndims


def _derived(src: TensorDescriptor, fresh_name: str) -> Tuple[TensorDescriptor, Region]:
    desc = TensorDescriptor(
        name=fresh_name,
        base=E.Sym(f"{fresh_name}.base", E.I64),
        numel=E.Sym(f"{fresh_name}.numel", E.I64),
        itemsize=E.Sym(f"{fresh_name}.itemsize", E.I64),
    )
    size = E.BinOp("mul", desc.numel, desc.itemsize, E.I64)
    region = Region(rid=f"tensor:{fresh_name}", kind="tensor", size_bytes=size, descriptor=desc)
    return desc, region


def _const_arg(method: str, args: Sequence[object], pos: int) -> int:
    a = args[pos]
    if isinstance(a, int):
        return a
    if isinstance(a, E.Const) and isinstance(a.value, int):
        return a.value
    raise TensorError(f"{method}() argument {pos} must be a constant integer")


# ---------------------------------------------------------------------------
# bounds predicates


def in_bounds(addr: Address, access_bytes: int) -> E.Expr:
    """0 <= offset and offset + access_bytes <= region size, as one predicate."""
    if not addr.known:
        raise TensorError("in_bounds needs a known-provenance address")
    off = addr.offset_bytes
    end = E.BinOp("add", off, E.Const(access_bytes, E.I64), E.I64)
    return E.and_(
        E.Cmp("ge", off, E.Const(0, E.I64)),
        E.Cmp("le", end, addr.provenance.size_bytes),
    )


def out_of_bounds(addr: Address, access_bytes: int) -> E.Expr:
    """The buggy-constraint form: offset below base or end past the region."""
    if not addr.known:
        raise TensorError("out_of_bounds needs a known-provenance address")
    off = addr.offset_bytes
    end = E.BinOp("add", off, E.Const(access_bytes, E.I64), E.I64)
    return E.BoolOp("or", (
        E.Cmp("lt", off, E.Const(0, E.I64)),
        E.Cmp("gt", end, addr.provenance.size_bytes),
    ))


def resolve(value: object) -> Address:
    """Route any kernel value used as an address to an Address.

    Declared handles flow through the engine as Address values already;
    anything else (an integer cast to a handle, a value reloaded from
    memory) has no usable provenance.
    """
    if isinstance(value, Address):
        return value
    return unknown_address()
