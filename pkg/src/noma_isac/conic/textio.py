"""Human-readable debug format for :class:`ConicProgram`.

One declaration or constraint per line; ``#`` starts a comment line::

    var W1 herm 4
    var g1 scalar
    maximize 10.0*g1 1.0*W1.d0 0.5
    eq  perantenna_0 : 1.0*W1.d0 -25.0
    ge  rmin_1       : 1.0*g1 -1.0
    soc crosscorr    : 3.1622776601683795 | 0.7*W1.re0_1 ; 0.7*W1.im0_1
    log rate_1_1     : 1.0*g1 <= log[2.0] 1.0 2.5*W1.d0

An affine expression is a whitespace-separated list of ``coef*coord`` terms
and bare numeric constants (summed). Coordinates are named ``<var>.d<a>``,
``<var>.re<a>_<b>`` and ``<var>.im<a>_<b>`` for Hermitian blocks and
``<var>`` for scalars. Coefficients are written with ``repr`` so a dump and
re-parse reproduces the program bit for bit. An empty expression is ``0``.
"""

from __future__ import annotations

from .program import Affine, ConicProgram, Constraint, ConstraintKind, VarKind

HEADER = "# conic program v1"


def _fmt_affine(expr: Affine, names: list[str]) -> str:
    parts = [f"{c!r}*{names[i]}" for i, c in sorted(expr.coeffs.items()) if c != 0.0]
    if expr.const != 0.0 or not parts:
        parts.append(repr(expr.const))
    return " ".join(parts)


def dumps(program: ConicProgram) -> str:
    names = [nm for v in program.variables for nm in v.coord_names()]
    lines = [HEADER]
    for v in program.variables:
        if v.kind is VarKind.HERM:
            lines.append(f"var {v.name} herm {v.size}")
        else:
            lines.append(f"var {v.name} scalar")
    lines.append(f"maximize {_fmt_affine(program.objective, names)}")
    for c in program.constraints:
        ex = [_fmt_affine(e, names) for e in c.exprs]
        if c.kind in (ConstraintKind.EQ, ConstraintKind.GE):
            body = ex[0]
        elif c.kind is ConstraintKind.SOC:
            body = ex[0] + " | " + " ; ".join(ex[1:])
        else:
            body = f"{ex[0]} <= log[{c.base!r}] {ex[1]}"
        lines.append(f"{c.kind.value} {c.label} : {body}")
    return "\n".join(lines) + "\n"


class ParseError(ValueError):
    pass


def _parse_affine(tokens: list[str], index: dict[str, int], lineno: int) -> Affine:
    expr = Affine()
    for tok in tokens:
        if "*" in tok:
            coef, name = tok.split("*", 1)
            if name not in index:
                raise ParseError(f"line {lineno}: unknown coordinate {name!r}")
            i = index[name]
            expr.coeffs[i] = expr.coeffs.get(i, 0.0) + float(coef)
        else:
            try:
                expr.const += float(tok)
            except ValueError:
                raise ParseError(f"line {lineno}: bad term {tok!r}") from None
    return expr


def loads(text: str) -> ConicProgram:
    program = ConicProgram()
    index: dict[str, int] = {}

    def refresh_index() -> None:
        index.clear()
        for v in program.variables:
            for k, nm in enumerate(v.coord_names()):
                index[nm] = v.offset + k

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = line.split()
        if head == "var":
            if len(rest) == 3 and rest[1] == "herm":
                program.add_hermitian(rest[0], int(rest[2]))
            elif len(rest) == 2 and rest[1] == "scalar":
                program.add_scalar(rest[0])
            else:
                raise ParseError(f"line {lineno}: malformed declaration")
            refresh_index()
        elif head == "maximize":
            program.objective = _parse_affine(rest, index, lineno)
        elif head in {k.value for k in ConstraintKind}:
            if len(rest) < 2 or rest[1] != ":":
                raise ParseError(f"line {lineno}: expected '<kind> <label> : ...'")
            label, body = rest[0], rest[2:]
            kind = ConstraintKind(head)
            if kind in (ConstraintKind.EQ, ConstraintKind.GE):
                exprs = [_parse_affine(body, index, lineno)]
                program.constraints.append(Constraint(kind, label, exprs))
            elif kind is ConstraintKind.SOC:
                if "|" not in body:
                    raise ParseError(f"line {lineno}: soc needs '|'")
                cut = body.index("|")
                groups, cur = [], []
                for tok in body[cut + 1:]:
                    if tok == ";":
                        groups.append(cur)
                        cur = []
                    else:
                        cur.append(tok)
                groups.append(cur)
                exprs = [_parse_affine(body[:cut], index, lineno)]
                exprs += [_parse_affine(g, index, lineno) for g in groups]
                program.constraints.append(Constraint(kind, label, exprs))
            else:
                pos = [i for i, t in enumerate(body) if t == "<="]
                if len(pos) != 1 or pos[0] + 1 >= len(body) or not body[pos[0] + 1].startswith("log["):
                    raise ParseError(f"line {lineno}: log needs '<= log[base]'")
                k = pos[0]
                base = float(body[k + 1][4:].rstrip("]"))
                lhs = _parse_affine(body[:k], index, lineno)
                arg = _parse_affine(body[k + 2:], index, lineno)
                program.constraints.append(Constraint(kind, label, [lhs, arg], base))
        else:
            raise ParseError(f"line {lineno}: unknown directive {head!r}")
    program.validate()
    return program
