"""Generators and independent oracles shared by the test suite.

The toy clone corpus covers ten structurally distinct micro-problems; within
a problem, fragments vary by consistent renaming, reordered independent
declarations, loop form (for vs while) and increment style, i.e. the kinds of
edits a semantic detector should see through while a token baseline should
not. The straight-line generator plus ``defuse_oracle`` give a brute-force
data-flow reference that never touches the package's own analysis.
"""

import re

from eventclone.numkernel import Rng

NAME_POOL = [
    "a", "b", "c", "d", "e", "g", "h", "i", "j", "k", "m", "n", "p", "q",
    "r", "s", "t", "u", "v", "w", "x", "y", "z", "cnt", "sum", "tmp", "val",
    "num", "res", "len", "pos", "idx", "acc", "cur", "lim",
]


def _pick_names(rng, count):
    pool = list(NAME_POOL)
    rng.shuffle(pool)
    return pool[:count]


def _loop(rng, var, start, bound_expr, body_lines, cmp_op="<="):
    """Render one counted loop as either a for or a while, with a varied
    increment form."""
    inc = rng.choice([f"{var}++", f"{var} = {var} + 1", f"{var} += 1"])
    body = "\n".join("        " + line for line in body_lines)
    if rng.randint(2) == 0:
        return (f"    for (int {var} = {start}; {var} {cmp_op} {bound_expr}; "
                f"{inc}) {{\n{body}\n    }}")
    head = f"    int {var} = {start};\n    while ({var} {cmp_op} {bound_expr}) {{"
    return f"{head}\n{body}\n        {inc};\n    }}"


def _shuffled(rng, lines):
    lines = list(lines)
    rng.shuffle(lines)
    return lines


def _template_sum(rng):
    n, s = _pick_names(rng, 2)
    head = _shuffled(rng, [f"    int {n};", f"    int {s} = 0;"])
    loop = _loop(rng, "q0", "1", n, [f"{s} = {s} + q0;"])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{n});', loop,
        f'    printf("%d", {s});', "    return 0;", "}"])


def _template_factorial(rng):
    n, f = _pick_names(rng, 2)
    head = _shuffled(rng, [f"    int {n};", f"    int {f} = 1;"])
    loop = _loop(rng, "q1", "2", n, [f"{f} = {f} * q1;"])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{n});', loop,
        f'    printf("%d", {f});', "    return 0;", "}"])


def _template_max(rng):
    k, x, best = _pick_names(rng, 3)
    head = _shuffled(rng, [f"    int {k};", f"    int {x};",
                           f"    int {best} = -100000;"])
    loop = _loop(rng, "q2", "1", k, [
        f'scanf("%d", &{x});',
        f"if ({x} > {best}) {best} = {x};",
    ])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{k});', loop,
        f'    printf("%d", {best});', "    return 0;", "}"])


def _template_count_even(rng):
    k, x, cnt = _pick_names(rng, 3)
    head = _shuffled(rng, [f"    int {k};", f"    int {x};",
                           f"    int {cnt} = 0;"])
    loop = _loop(rng, "q3", "1", k, [
        f'scanf("%d", &{x});',
        f"if ({x} % 2 == 0) {cnt} = {cnt} + 1;",
    ])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{k});', loop,
        f'    printf("%d", {cnt});', "    return 0;", "}"])


def _template_gcd(rng):
    a, b, t = _pick_names(rng, 3)
    head = _shuffled(rng, [f"    int {a};", f"    int {b};", f"    int {t};"])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d %d", &{a}, &{b});',
        f"    while ({b} != 0) {{",
        f"        {t} = {b};",
        f"        {b} = {a} % {b};",
        f"        {a} = {t};",
        "    }",
        f'    printf("%d", {a});', "    return 0;", "}"])


def _template_power(rng):
    base, e, r = _pick_names(rng, 3)
    head = _shuffled(rng, [f"    int {base};", f"    int {e};",
                           f"    int {r} = 1;"])
    loop = _loop(rng, "q4", "1", e, [f"{r} = {r} * {base};"])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d %d", &{base}, &{e});', loop,
        f'    printf("%d", {r});', "    return 0;", "}"])


def _template_sum_squares(rng):
    n, s = _pick_names(rng, 2)
    head = _shuffled(rng, [f"    int {n};", f"    int {s} = 0;"])
    loop = _loop(rng, "q5", "1", n, [f"{s} = {s} + q5 * q5;"])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{n});', loop,
        f'    printf("%d", {s});', "    return 0;", "}"])


def _template_fibonacci(rng):
    n, x, y, t = _pick_names(rng, 4)
    head = _shuffled(rng, [f"    int {n};", f"    int {x} = 0;",
                           f"    int {y} = 1;", f"    int {t};"])
    loop = _loop(rng, "q6", "1", n, [
        f"{t} = {x} + {y};",
        f"{x} = {y};",
        f"{y} = {t};",
    ])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{n});', loop,
        f'    printf("%d", {x});', "    return 0;", "}"])


def _template_average(rng):
    k, x, s = _pick_names(rng, 3)
    head = _shuffled(rng, [f"    int {k};", f"    int {x};",
                           f"    int {s} = 0;"])
    loop = _loop(rng, "q7", "1", k, [
        f'scanf("%d", &{x});',
        f"{s} = {s} + {x};",
    ])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{k});', loop,
        f"    float q8 = (float){s} / {k};",
        '    printf("%f", q8);', "    return 0;", "}"])


def _template_digit_sum(rng):
    n, d = _pick_names(rng, 2)
    head = _shuffled(rng, [f"    int {n};", f"    int {d} = 0;"])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{n});',
        f"    while ({n} > 0) {{",
        f"        {d} = {d} + {n} % 10;",
        f"        {n} = {n} / 10;",
        "    }",
        f'    printf("%d", {d});', "    return 0;", "}"])


def _template_triangle(rng):
    n, s, row = _pick_names(rng, 3)
    head = _shuffled(rng, [f"    int {n};", f"    int {s} = 0;",
                           f"    int {row} = 0;"])
    loop = _loop(rng, "q9", "1", n, [
        f"{row} = {row} + q9;",
        f"{s} = {s} + {row};",
    ])
    return "\n".join(["int main() {"] + head + [
        f'    scanf("%d", &{n});', loop,
        f'    printf("%d %d", {row}, {s});', "    return 0;", "}"])


TEMPLATES = [
    _template_sum, _template_factorial, _template_max, _template_count_even,
    _template_gcd, _template_power, _template_sum_squares,
    _template_fibonacci, _template_average, _template_digit_sum,
    _template_triangle,
]


def toy_corpus(root, problems=10, fragments_per_problem=20, seed=11):
    """Write a problem-labeled clone corpus under root; returns file count."""
    rng = Rng(seed)
    count = 0
    for p in range(problems):
        pdir = root / f"p{p:02d}"
        pdir.mkdir(parents=True, exist_ok=True)
        template = TEMPLATES[p % len(TEMPLATES)]
        for f in range(fragments_per_problem):
            source = template(rng)
            (pdir / f"f{f:03d}.c").write_text(source, encoding="utf-8")
            count += 1
    return count


# ---------------------------------------------------------------------------
# Straight-line fragments and the brute-force def-use oracle


def straight_line_fragment(rng, n_statements):
    """One statement per line: declarations, assignments and printf calls
    over previously declared variables."""
    lines = []
    declared = []
    for i in range(n_statements):
        roll = rng.uniform01()
        if not declared or roll < 0.35:
            name = f"v{len(declared)}"
            lines.append(f"int {name} = {_expr(rng, declared)};")
            declared.append(name)
        elif roll < 0.8:
            target = declared[rng.randint(len(declared))]
            lines.append(f"{target} = {_expr(rng, declared)};")
        else:
            lines.append(f'printf("%d", {_expr(rng, declared)});')
    return "int main() {\n" + "\n".join(lines) + "\n}"


def _expr(rng, declared):
    terms = []
    for _ in range(1 + rng.randint(3)):
        if declared and rng.uniform01() < 0.7:
            terms.append(declared[rng.randint(len(declared))])
        else:
            terms.append(str(rng.randint(100)))
    ops = ["+", "-", "*"]
    out = terms[0]
    for term in terms[1:]:
        out = f"{out} {ops[rng.randint(3)]} {term}"
    return out


def nested_program(rng, top_statements=None):
    """Random program with nested control flow, calls, casts, arrays and
    compound targets; may occasionally be syntactically invalid, so callers
    should treat parse errors as a skip."""
    names = ["a", "b", "c"]

    def expr(depth=0):
        if depth > 2 or rng.uniform01() < 0.35:
            kind = rng.randint(4)
            if kind == 0:
                return names[rng.randint(len(names))]
            if kind == 1:
                return str(rng.randint(100))
            if kind == 2:
                return f"{names[rng.randint(len(names))]}[{rng.randint(5)}]"
            return str(rng.randint(50))
        roll = rng.uniform01()
        if roll < 0.6:
            ops = ["+", "-", "*", "/", "%", "<", ">", "==", "!=", "&&", "||",
                   "&", "|", "^", "<<", ">>"]
            return f"({expr(depth + 1)} {ops[rng.randint(len(ops))]} " \
                   f"{expr(depth + 1)})"
        if roll < 0.7:
            return ["-", "!", "~"][rng.randint(3)] + expr(depth + 1)
        if roll < 0.8:
            return f"(int){expr(depth + 1)}"
        if roll < 0.9:
            return f"f{rng.randint(3)}({expr(depth + 1)})"
        return f"sizeof({expr(depth + 1)})"

    def stmt(depth=0):
        roll = rng.uniform01()
        if depth < 2 and roll < 0.15:
            out = f"if ({expr()}) {block(depth + 1, 1 + rng.randint(3))}"
            if rng.uniform01() < 0.5:
                out += f" else {block(depth + 1, 1 + rng.randint(2))}"
            return out
        if depth < 2 and roll < 0.25:
            return f"while ({expr()}) {block(depth + 1, 1 + rng.randint(2))}"
        if depth < 2 and roll < 0.33:
            v = names[rng.randint(len(names))]
            return (f"for ({v} = 0; {v} < {2 + rng.randint(8)}; {v}++) "
                    f"{block(depth + 1, 1 + rng.randint(2))}")
        if depth < 2 and roll < 0.38:
            return f"do {block(depth + 1, 1)} while ({expr()});"
        if roll < 0.55:
            name = f"v{rng.randint(1000)}"
            names.append(name)
            return f"int {name} = {expr()};"
        if roll < 0.8:
            target = names[rng.randint(len(names))]
            if rng.uniform01() < 0.2:
                target += f"[{rng.randint(4)}]"
            aop = ["=", "+=", "-=", "*="][rng.randint(4)]
            return f"{target} {aop} {expr()};"
        if roll < 0.9:
            return f'printf("%d", {expr()});'
        return f"{names[rng.randint(len(names))]}++;"

    def block(depth, count):
        return "{ " + " ".join(stmt(depth) for _ in range(count)) + " }"

    count = top_statements if top_statements is not None else 2 + rng.randint(6)
    return f"int main() {block(0, count)}"


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def defuse_oracle(source):
    """Statement-level def-use pairs computed directly from the text of a
    straight-line fragment (one statement per line, as produced by
    ``straight_line_fragment``); completely independent of the parser and
    graph builder.

    Returns (statement_count, set of (writer_stmt, reader_stmt)).
    """
    body = source.splitlines()[1:-1]
    writes = []
    reads = []
    for line in body:
        line = line.strip().rstrip(";")
        if line.startswith("int "):
            rest = line[4:]
            name, _, rhs = rest.partition("=")
            writes.append(name.strip())
            reads.append(set(_IDENT_RE.findall(rhs)))
        elif line.startswith("printf"):
            args = line.split(",", 1)[1] if "," in line else ""
            writes.append(None)
            reads.append(set(_IDENT_RE.findall(args)))
        else:
            name, _, rhs = line.partition("=")
            writes.append(name.strip())
            reads.append(set(_IDENT_RE.findall(rhs)))
    edges = set()
    for u, read_set in enumerate(reads):
        for var in read_set:
            for w in range(u - 1, -1, -1):
                if writes[w] == var:
                    edges.add((w, u))
                    break
    return len(body), edges


# ---------------------------------------------------------------------------
# Surface edits that must not change program vectors


def add_comments_and_whitespace(source, seed=0):
    """A variant differing only in layout and comments."""
    rng = Rng(seed)
    fillers = ["/* note */", "// trailing", "/* x y z */", "//"]
    out_lines = []
    for line in source.splitlines():
        if rng.uniform01() < 0.4:
            out_lines.append("")
        indent = " " * rng.randint(7)
        filler = fillers[rng.randint(len(fillers))]
        if filler.startswith("//"):
            out_lines.append(indent + line + "   " + filler)
        else:
            out_lines.append(indent + filler + " " + line)
    out_lines.append("/* end of fragment */")
    return "\n".join(out_lines)


def alpha_rename(source, names):
    """Consistently rename the given identifiers, preserving their relative
    lexicographic order (so frequency ties keep their ranking order)."""
    mapping = {old: f"ren{idx:02d}" for idx, old in enumerate(sorted(names))}
    def swap(match):
        word = match.group(0)
        return mapping.get(word, word)
    return _IDENT_RE.sub(swap, source)
