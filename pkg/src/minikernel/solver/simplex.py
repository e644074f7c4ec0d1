"""Exact phase-1 simplex over rationals.

Feasibility only: given rows ``coeffs . x REL rhs`` (REL is <= or =)
with integer data, decide whether a rational solution exists and return
one.  Free variables are split into differences of nonnegatives;
artificial variables are driven out with Bland's rule, so the procedure
terminates and is fully deterministic.  Everything is a Fraction; no
floating point is involved anywhere.
"""

from __future__ import annotations

import time
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

Row = Tuple[Dict[str, int], str, int]  # (coeffs, "le" | "eq", rhs)


class Timeout(Exception):
    """Raised when a deadline expires mid-pivot."""


def feasible(
    rows: Sequence[Row],
    var_names: Sequence[str],
    deadline: Optional[float] = None,
) -> Optional[Dict[str, Fraction]]:
    """Return a rational model of the rows, or None if infeasible."""
    names = sorted(set(var_names))
    col_of = {v: i for i, v in enumerate(names)}
    n2 = 2 * len(names)  # x = x+ - x-

    tableau: List[List[Fraction]] = []
    rhs: List[Fraction] = []
    kinds: List[str] = []  # per-row: "le", "ge" or "eq" after sign normalization
    for coeffs, rel, b in rows:
        if rel not in ("le", "eq"):
            raise ValueError(f"bad relation: {rel}")
        row = [Fraction(0)] * n2
        for v, c in coeffs.items():
            j = col_of[v]
            row[2 * j] += c
            row[2 * j + 1] -= c
        bb = Fraction(b)
        kind = rel
        if bb < 0:
            row = [-c for c in row]
            bb = -bb
            kind = "ge" if rel == "le" else "eq"
        tableau.append(row)
        rhs.append(bb)
        kinds.append(kind)

    m = len(tableau)
    # append slack / surplus / artificial columns
    total = n2
    slack_col: List[Optional[int]] = [None] * m
    art_col: List[Optional[int]] = [None] * m
    for i, kind in enumerate(kinds):
        if kind == "le":
            slack_col[i] = total
            total += 1
        elif kind == "ge":
            slack_col[i] = total  # surplus, coefficient -1
            art_col[i] = total + 1
            total += 2
        else:
            art_col[i] = total
            total += 1

    basis: List[int] = [0] * m
    for i in range(m):
        pad = [Fraction(0)] * (total - len(tableau[i]))
        tableau[i].extend(pad)
        if kinds[i] == "le":
            tableau[i][slack_col[i]] = Fraction(1)
            basis[i] = slack_col[i]  # type: ignore[assignment]
        elif kinds[i] == "ge":
            tableau[i][slack_col[i]] = Fraction(-1)
            tableau[i][art_col[i]] = Fraction(1)
            basis[i] = art_col[i]  # type: ignore[assignment]
        else:
            tableau[i][art_col[i]] = Fraction(1)
            basis[i] = art_col[i]  # type: ignore[assignment]

    artificials = {c for c in art_col if c is not None}
    if not artificials:
        # identity slack basis is already feasible
        return _extract(names, tableau, rhs, basis, n2)

    # phase-1 objective: minimize sum of artificials.  Reduced-cost row:
    # c_j - sum over artificial-basic rows of A_ij (those have cost 1).
    cost = [Fraction(0)] * total
    for c in artificials:
        cost[c] = Fraction(1)
    obj = Fraction(0)
    for i in range(m):
        if basis[i] in artificials:
            for j in range(total):
                cost[j] -= tableau[i][j]
            obj -= rhs[i]

    while True:
        if deadline is not None and time.monotonic() > deadline:
            raise Timeout
        enter = -1
        for j in range(total):
            if cost[j] < 0:
                enter = j
                break  # Bland: smallest index
        if enter < 0:
            break
        leave = -1
        best: Optional[Fraction] = None
        for i in range(m):
            a = tableau[i][enter]
            if a > 0:
                ratio = rhs[i] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave < 0:
            raise AssertionError("phase-1 objective unbounded")  # cannot happen
        _pivot(tableau, rhs, cost, basis, leave, enter)

    # optimum reached; value = -obj after updates were folded into obj
    total_art = sum(rhs[i] for i in range(m) if basis[i] in artificials)
    if total_art != 0:
        return None
    return _extract(names, tableau, rhs, basis, n2)


def _pivot(
    tableau: List[List[Fraction]],
    rhs: List[Fraction],
    cost: List[Fraction],
    basis: List[int],
    row: int,
    col: int,
) -> None:
    piv = tableau[row][col]
    inv = Fraction(1) / piv
    tableau[row] = [c * inv for c in tableau[row]]
    rhs[row] *= inv
    prow = tableau[row]
    pr = rhs[row]
    for i in range(len(tableau)):
        if i == row:
            continue
        f = tableau[i][col]
        if f:
            tableau[i] = [a - f * b for a, b in zip(tableau[i], prow)]
            rhs[i] -= f * pr
    f = cost[col]
    if f:
        for j in range(len(cost)):
            cost[j] -= f * prow[j]
    basis[row] = col


def _extract(
    names: List[str],
    tableau: List[List[Fraction]],
    rhs: List[Fraction],
    basis: List[int],
    n2: int,
) -> Dict[str, Fraction]:
    col_val = {}
    for i, b in enumerate(basis):
        col_val[b] = rhs[i]
    out = {}
    for j, v in enumerate(names):
        plus = col_val.get(2 * j, Fraction(0))
        minus = col_val.get(2 * j + 1, Fraction(0))
        out[v] = plus - minus
    return out
