"""Lexer and recursive-descent parser for the supported C subset.

The grammar covers the statement and expression forms found in online-judge
style C submissions: declarations with initializers, assignments (compound
forms desugared), the usual binary/unary operators, calls, control flow
(if/else, while, do-while, for), array indexing, member access and sizeof.
Preprocessor lines are skipped without expansion. Recognized-but-unsupported
constructs (switch, goto, typedef, function pointers, ternary) raise
``UnsupportedConstruct`` so callers can skip the fragment loudly instead of
producing a wrong event graph.

Everything here is pure: tokenize/parse build fresh structures from their
inputs and share no mutable state, so concurrent use is safe.
"""

from dataclasses import dataclass, field


class LexError(Exception):
    def __init__(self, line, column, message):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class ParseError(Exception):
    def __init__(self, line, column, expected, found):
        super().__init__(
            f"line {line}, col {column}: expected {expected}, found {found!r}")
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found


class UnsupportedConstruct(Exception):
    def __init__(self, line, construct):
        super().__init__(f"line {line}: unsupported construct: {construct}")
        self.line = line
        self.construct = construct


@dataclass(frozen=True)
class Token:
    kind: str   # identifier | keyword | integer-literal | float-literal |
                # string-literal | char-literal | operator-symbol | punctuation
    text: str
    line: int
    column: int


KEYWORDS = frozenset("""
    int long short char float double void unsigned signed const static
    struct union enum return if else while for do sizeof break continue
    switch case default goto typedef extern register volatile auto
""".split())

TYPE_KEYWORDS = frozenset("""
    int long short char float double void unsigned signed const static struct
""".split())

# Longest match first.
OPERATORS = (
    "<<=", ">>=",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "=", "+", "-", "*", "/", "%", "<", ">", "!", "~", "&", "|", "^",
    ".", "?", ":",
)

PUNCTUATION = frozenset(";,(){}[]")

_IDENT_START = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_DIGITS = frozenset("0123456789")
_HEX = frozenset("0123456789abcdefABCDEF")


def tokenize(source):
    """Lex UTF-8 source into tokens, discarding comments, whitespace and
    preprocessor lines."""
    tokens = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def err(msg, l=None, c=None):
        raise LexError(l if l is not None else line,
                       c if c is not None else col, msg)

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r\f\v":
            i += 1
            col += 1
            continue
        if ch == "#" and col == _line_indent(source, i) + 1:
            # Preprocessor directive: skip the line, honoring backslash
            # continuations. Never expanded.
            while i < n and source[i] != "\n":
                if source[i] == "\\" and i + 1 < n and source[i + 1] == "\n":
                    i += 2
                    line += 1
                else:
                    i += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "*":
            start_line, start_col = line, col
            i += 2
            col += 2
            while True:
                if i >= n:
                    err("unterminated block comment", start_line, start_col)
                if source[i] == "*" and i + 1 < n and source[i + 1] == "/":
                    i += 2
                    col += 2
                    break
                if source[i] == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
                i += 1
            continue
        if ch == '"' or ch == "'":
            quote = ch
            start_line, start_col = line, col
            j = i + 1
            while True:
                if j >= n or source[j] == "\n":
                    kind = "string" if quote == '"' else "char literal"
                    err(f"unterminated {kind}", start_line, start_col)
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == quote:
                    break
                j += 1
            text = source[i:j + 1]
            kind = "string-literal" if quote == '"' else "char-literal"
            tokens.append(Token(kind, text, start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch in _DIGITS or (ch == "." and i + 1 < n and source[i + 1] in _DIGITS):
            tok, length = _lex_number(source, i, line, col)
            tokens.append(tok)
            i += length
            col += length
            continue
        if ch in _IDENT_START:
            j = i + 1
            while j < n and (source[j] in _IDENT_START or source[j] in _DIGITS):
                j += 1
            text = source[i:j]
            kind = "keyword" if text in KEYWORDS else "identifier"
            tokens.append(Token(kind, text, line, col))
            col += j - i
            i = j
            continue
        if ch in PUNCTUATION:
            tokens.append(Token("punctuation", ch, line, col))
            i += 1
            col += 1
            continue
        matched = None
        for op in OPERATORS:
            if source.startswith(op, i):
                matched = op
                break
        if matched:
            tokens.append(Token("operator-symbol", matched, line, col))
            i += len(matched)
            col += len(matched)
            continue
        err(f"illegal character {ch!r}")
    return tokens


def _line_indent(source, i):
    """Count of whitespace characters between the last newline and i."""
    j = i - 1
    count = 0
    while j >= 0 and source[j] != "\n":
        if source[j] not in " \t\r\f\v":
            return -1  # non-whitespace before '#': not a directive start
        count += 1
        j -= 1
    return count


def _lex_number(source, i, line, col):
    n = len(source)
    j = i
    is_float = False
    if source[j] == "0" and j + 1 < n and source[j + 1] in "xX":
        j += 2
        if j >= n or source[j] not in _HEX:
            raise LexError(line, col, "malformed hex literal")
        while j < n and source[j] in _HEX:
            j += 1
        while j < n and source[j] in "uUlL":
            j += 1
        return Token("integer-literal", source[i:j], line, col), j - i
    while j < n and source[j] in _DIGITS:
        j += 1
    if j < n and source[j] == ".":
        is_float = True
        j += 1
        while j < n and source[j] in _DIGITS:
            j += 1
    if j < n and source[j] in "eE":
        k = j + 1
        if k < n and source[k] in "+-":
            k += 1
        if k < n and source[k] in _DIGITS:
            is_float = True
            j = k
            while j < n and source[j] in _DIGITS:
                j += 1
    if is_float:
        if j < n and source[j] in "fFlL":
            j += 1
        return Token("float-literal", source[i:j], line, col), j - i
    while j < n and source[j] in "uUlL":
        j += 1
    return Token("integer-literal", source[i:j], line, col), j - i


@dataclass
class AstNode:
    kind: str
    value: str = ""
    detail: str = ""
    children: list = field(default_factory=list)
    line: int = 0
    col: int = 0
    end_line: int = 0
    end_col: int = 0
    statement_index: int | None = None


@dataclass
class Ast:
    root: AstNode


_ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="}

_BINARY_PRECEDENCE = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6,
    "<": 7, ">": 7, "<=": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}

_UNSUPPORTED_STATEMENT_KEYWORDS = {
    "switch", "goto", "typedef", "union", "enum", "case", "default",
    "extern", "register", "volatile", "auto",
}


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers -------------------------------------------------

    def peek(self, offset=0):
        p = self.pos + offset
        return self.tokens[p] if p < len(self.tokens) else None

    def at(self, kind=None, text=None, offset=0):
        tok = self.peek(offset)
        if tok is None:
            return False
        if kind is not None and tok.kind != kind:
            return False
        if text is not None and tok.text != text:
            return False
        return True

    def advance(self):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            line = last.line if last else 1
            col = last.column + len(last.text) if last else 1
            raise ParseError(line, col, "more input", "end of input")
        self.pos += 1
        return tok

    def expect(self, kind=None, text=None, what=None):
        tok = self.peek()
        if tok is None or (kind and tok.kind != kind) or (text and tok.text != text):
            expected = what or text or kind
            found = tok.text if tok else "end of input"
            line = tok.line if tok else (self.tokens[-1].line if self.tokens else 1)
            col = tok.column if tok else 1
            raise ParseError(line, col, expected, found)
        return self.advance()

    def error(self, expected):
        tok = self.peek()
        found = tok.text if tok else "end of input"
        line = tok.line if tok else (self.tokens[-1].line if self.tokens else 1)
        col = tok.column if tok else 1
        raise ParseError(line, col, expected, found)

    def unsupported(self, construct, tok=None):
        tok = tok or self.peek()
        line = tok.line if tok else 1
        raise UnsupportedConstruct(line, construct)

    def _node(self, kind, start_tok, **kw):
        node = AstNode(kind=kind, line=start_tok.line, col=start_tok.column, **kw)
        return node

    def _close(self, node):
        prev = self.tokens[self.pos - 1] if self.pos > 0 else None
        if prev is not None:
            node.end_line = prev.line
            node.end_col = prev.column + len(prev.text)
        else:
            node.end_line, node.end_col = node.line, node.col
        return node

    # -- grammar -------------------------------------------------------

    def parse_translation_unit(self):
        start = self.peek() or Token("punctuation", "", 1, 1)
        root = self._node("translation-unit", start)
        while self.peek() is not None:
            if self.at("punctuation", ";"):
                self.advance()
                continue
            root.children.append(self.parse_external())
        return self._close(root)

    def parse_external(self):
        tok = self.peek()
        if tok.kind == "keyword" and tok.text in _UNSUPPORTED_STATEMENT_KEYWORDS:
            self.unsupported(tok.text)
        if not (tok.kind == "keyword" and tok.text in TYPE_KEYWORDS):
            self.error("type specifier")
        mark = self.pos
        type_text = self.parse_type_specifier()
        stars = 0
        while self.at("operator-symbol", "*"):
            self.advance()
            stars += 1
        if self.at("punctuation", "("):
            self.unsupported("function pointer declaration")
        name_tok = self.expect("identifier", what="identifier")
        if self.at("punctuation", "("):
            if stars:
                self.unsupported("function pointer declaration", name_tok)
            return self.parse_function_tail(type_text, name_tok)
        self.pos = mark
        return self.parse_declaration()

    def parse_type_specifier(self):
        parts = []
        tok = self.peek()
        start = tok
        while self.at("keyword") and self.peek().text in TYPE_KEYWORDS:
            kw = self.advance().text
            if kw == "struct":
                name = self.expect("identifier", what="struct name")
                if self.at("punctuation", "{"):
                    self.unsupported("struct definition with body", name)
                parts.append(f"struct {name.text}")
            else:
                parts.append(kw)
        core = [p for p in parts if p not in ("const", "static")]
        if not core:
            self.error("type specifier")
        return " ".join(parts), start

    def parse_function_tail(self, type_info, name_tok):
        type_text, start = type_info
        fn = self._node("function-def", start, value=name_tok.text,
                        detail=type_text)
        self.expect("punctuation", "(")
        if not self.at("punctuation", ")"):
            if self.at("keyword", "void") and self.at("punctuation", ")", 1):
                self.advance()
            else:
                while True:
                    self.parse_type_specifier()
                    while self.at("operator-symbol", "*"):
                        self.advance()
                    if self.at("identifier"):
                        self.advance()
                        while self.at("punctuation", "["):
                            self.advance()
                            if not self.at("punctuation", "]"):
                                self.parse_expression()
                            self.expect("punctuation", "]")
                    if self.at("punctuation", ","):
                        self.advance()
                        continue
                    break
        self.expect("punctuation", ")")
        if self.at("punctuation", ";"):
            # Prototype: a declaration with no body and no events.
            self.advance()
            proto = self._node("declaration", start, value=type_text,
                               detail="prototype")
            return self._close(proto)
        body = self.parse_block()
        fn.children.append(body)
        self._close(fn)
        _number_statements(fn)
        return fn

    def parse_block(self):
        start = self.expect("punctuation", "{")
        block = self._node("block", start)
        while not self.at("punctuation", "}"):
            if self.peek() is None:
                self.error("'}'")
            block.children.append(self.parse_statement())
        self.expect("punctuation", "}")
        return self._close(block)

    def parse_statement(self):
        tok = self.peek()
        if tok is None:
            self.error("statement")
        if tok.kind == "punctuation" and tok.text == "{":
            return self.parse_block()
        if tok.kind == "punctuation" and tok.text == ";":
            self.advance()
            return self._close(self._node("empty", tok))
        if tok.kind == "keyword":
            kw = tok.text
            if kw in _UNSUPPORTED_STATEMENT_KEYWORDS:
                self.unsupported(kw)
            if kw == "return":
                self.advance()
                node = self._node("return", tok)
                if not self.at("punctuation", ";"):
                    node.children.append(self.parse_expression())
                self.expect("punctuation", ";")
                return self._close(node)
            if kw == "if":
                return self.parse_if(tok)
            if kw == "while":
                self.advance()
                self.expect("punctuation", "(")
                cond = self.parse_expression()
                self.expect("punctuation", ")")
                body = self.parse_statement()
                node = self._node("while", tok)
                node.children = [cond, body]
                return self._close(node)
            if kw == "do":
                self.advance()
                body = self.parse_statement()
                self.expect("keyword", "while", what="'while'")
                self.expect("punctuation", "(")
                cond = self.parse_expression()
                self.expect("punctuation", ")")
                self.expect("punctuation", ";")
                node = self._node("do-while", tok)
                node.children = [body, cond]
                return self._close(node)
            if kw == "for":
                return self.parse_for(tok)
            if kw in ("break", "continue"):
                self.advance()
                self.expect("punctuation", ";")
                return self._close(self._node(kw, tok))
            if kw in TYPE_KEYWORDS:
                return self.parse_declaration()
            if kw != "sizeof":
                self.error("statement")
        expr = self.parse_expression()
        self.expect("punctuation", ";")
        return expr

    def parse_if(self, tok):
        self.advance()
        self.expect("punctuation", "(")
        cond = self.parse_expression()
        self.expect("punctuation", ")")
        then = self.parse_statement()
        node = self._node("if", tok)
        node.children = [cond, then]
        if self.at("keyword", "else"):
            self.advance()
            node.children.append(self.parse_statement())
        return self._close(node)

    def parse_for(self, tok):
        self.advance()
        self.expect("punctuation", "(")
        if self.at("punctuation", ";"):
            semi = self.advance()
            init = self._close(self._node("empty", semi))
        elif self.at("keyword") and self.peek().text in TYPE_KEYWORDS:
            init = self.parse_declaration()
        else:
            init = self.parse_expression()
            self.expect("punctuation", ";")
        if self.at("punctuation", ";"):
            cond = self._close(self._node("empty", self.peek()))
        else:
            cond = self.parse_expression()
        self.expect("punctuation", ";")
        if self.at("punctuation", ")"):
            step = self._close(self._node("empty", self.peek()))
        else:
            step = self.parse_expression()
        self.expect("punctuation", ")")
        body = self.parse_statement()
        node = self._node("for", tok)
        node.children = [init, cond, step, body]
        return self._close(node)

    def parse_declaration(self):
        type_text, start = self.parse_type_specifier()
        node = self._node("declaration", start, value=type_text)
        while True:
            while self.at("operator-symbol", "*"):
                self.advance()
            if self.at("punctuation", "("):
                self.unsupported("function pointer declaration")
            name_tok = self.expect("identifier", what="identifier")
            decl = self._node("declarator", name_tok, value=name_tok.text)
            while self.at("punctuation", "["):
                self.advance()
                if not self.at("punctuation", "]"):
                    self.parse_expression()  # array extent: no events
                self.expect("punctuation", "]")
            if self.at("punctuation", "("):
                self.unsupported("function declarator in declaration", name_tok)
            if self.at("operator-symbol", "="):
                self.advance()
                decl.children.append(self.parse_initializer())
            node.children.append(self._close(decl))
            if self.at("punctuation", ","):
                self.advance()
                continue
            break
        self.expect("punctuation", ";")
        return self._close(node)

    def parse_initializer(self):
        if self.at("punctuation", "{"):
            start = self.advance()
            node = self._node("init-list", start)
            if not self.at("punctuation", "}"):
                while True:
                    node.children.append(self.parse_initializer())
                    if self.at("punctuation", ","):
                        self.advance()
                        if self.at("punctuation", "}"):
                            break
                        continue
                    break
            self.expect("punctuation", "}")
            return self._close(node)
        return self.parse_assignment_expr()

    # -- expressions ---------------------------------------------------

    def parse_expression(self):
        expr = self.parse_assignment_expr()
        while self.at("punctuation", ","):
            comma = self.advance()
            rhs = self.parse_assignment_expr()
            node = self._node("binary-op", comma, value=",")
            node.line, node.col = expr.line, expr.col
            node.children = [expr, rhs]
            expr = self._close(node)
        return expr

    def parse_assignment_expr(self):
        lhs = self.parse_binary(1)
        tok = self.peek()
        if tok and tok.kind == "operator-symbol" and tok.text in _ASSIGN_OPS:
            if lhs.kind not in ("identifier", "index", "member-access") and \
               not (lhs.kind == "unary-op" and lhs.value == "*"):
                raise ParseError(tok.line, tok.column, "assignable target",
                                 lhs.kind)
            self.advance()
            rhs = self.parse_assignment_expr()
            if tok.text != "=":
                op = tok.text[:-1]
                inner = self._node("binary-op", tok, value=op)
                inner.children = [_clone(lhs), rhs]
                rhs = self._close(inner)
            node = self._node("assignment", tok, value="=")
            node.line, node.col = lhs.line, lhs.col
            node.children = [lhs, rhs]
            return self._close(node)
        if tok and tok.kind == "operator-symbol" and tok.text == "?":
            self.unsupported("ternary operator", tok)
        return lhs

    def parse_binary(self, min_prec):
        lhs = self.parse_unary()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "operator-symbol":
                return lhs
            prec = _BINARY_PRECEDENCE.get(tok.text)
            if prec is None or prec < min_prec:
                return lhs
            self.advance()
            rhs = self.parse_binary(prec + 1)
            node = self._node("binary-op", tok, value=tok.text)
            node.line, node.col = lhs.line, lhs.col
            node.children = [lhs, rhs]
            lhs = self._close(node)

    def parse_unary(self):
        tok = self.peek()
        if tok is None:
            self.error("expression")
        if tok.kind == "operator-symbol" and tok.text in ("-", "!", "~", "*", "&"):
            self.advance()
            operand = self.parse_unary()
            op = {"-": "-", "!": "!", "~": "~", "*": "*", "&": "&"}[tok.text]
            node = self._node("unary-op", tok, value=op)
            node.children = [operand]
            return self._close(node)
        if tok.kind == "operator-symbol" and tok.text in ("++", "--"):
            self.advance()
            operand = self.parse_unary()
            return self._desugar_incdec(tok, operand)
        if tok.kind == "keyword" and tok.text == "sizeof":
            self.advance()
            node = self._node("sizeof", tok)
            if self.at("punctuation", "(") and self._type_follows(1):
                self.advance()
                type_text, _ = self.parse_type_specifier()
                while self.at("operator-symbol", "*"):
                    self.advance()
                    type_text += " *"
                self.expect("punctuation", ")")
                node.value = type_text
            else:
                node.children.append(self.parse_unary())
            return self._close(node)
        if tok.kind == "punctuation" and tok.text == "(" and self._type_follows(1):
            self.advance()
            type_text, _ = self.parse_type_specifier()
            while self.at("operator-symbol", "*"):
                self.advance()
                type_text += " *"
            self.expect("punctuation", ")")
            operand = self.parse_unary()
            node = self._node("cast", tok, value=type_text)
            node.children = [operand]
            return self._close(node)
        return self.parse_postfix()

    def _type_follows(self, offset):
        tok = self.peek(offset)
        return tok is not None and tok.kind == "keyword" and \
            tok.text in TYPE_KEYWORDS

    def _desugar_incdec(self, tok, operand):
        # ++x / x++ / --x / x-- become x = x <op> 1.
        if operand.kind not in ("identifier", "index", "member-access") and \
           not (operand.kind == "unary-op" and operand.value == "*"):
            raise ParseError(tok.line, tok.column, "assignable target",
                             operand.kind)
        one = AstNode("literal", value="1", detail="int", line=tok.line,
                      col=tok.column, end_line=tok.line,
                      end_col=tok.column + len(tok.text))
        op = "+" if tok.text == "++" else "-"
        inner = AstNode("binary-op", value=op, line=operand.line,
                        col=operand.col, end_line=one.end_line,
                        end_col=one.end_col, children=[_clone(operand), one])
        node = AstNode("assignment", value="=", line=operand.line,
                       col=operand.col, end_line=inner.end_line,
                       end_col=inner.end_col, children=[operand, inner])
        return node

    def parse_postfix(self):
        node = self.parse_primary()
        while True:
            tok = self.peek()
            if tok is None:
                return node
            if tok.kind == "punctuation" and tok.text == "(":
                if node.kind not in ("identifier", "member-access"):
                    self.unsupported("call through expression", tok)
                self.advance()
                call = self._node("call", tok)
                call.line, call.col = node.line, node.col
                call.children = [node]
                if not self.at("punctuation", ")"):
                    while True:
                        call.children.append(self.parse_assignment_expr())
                        if self.at("punctuation", ","):
                            self.advance()
                            continue
                        break
                self.expect("punctuation", ")")
                node = self._close(call)
                continue
            if tok.kind == "punctuation" and tok.text == "[":
                self.advance()
                idx = self.parse_expression()
                self.expect("punctuation", "]")
                ix = self._node("index", tok)
                ix.line, ix.col = node.line, node.col
                ix.children = [node, idx]
                node = self._close(ix)
                continue
            if tok.kind == "operator-symbol" and tok.text in (".", "->"):
                self.advance()
                name = self.expect("identifier", what="member name")
                mem = self._node("member-access", tok, value=name.text,
                                 detail=tok.text)
                mem.line, mem.col = node.line, node.col
                mem.children = [node]
                node = self._close(mem)
                continue
            if tok.kind == "operator-symbol" and tok.text in ("++", "--"):
                self.advance()
                node = self._desugar_incdec(tok, node)
                continue
            return node

    def parse_primary(self):
        tok = self.peek()
        if tok is None:
            self.error("expression")
        if tok.kind == "identifier":
            self.advance()
            return self._close(self._node("identifier", tok, value=tok.text))
        if tok.kind == "integer-literal":
            self.advance()
            return self._close(self._node("literal", tok, value=tok.text,
                                          detail="int"))
        if tok.kind == "float-literal":
            self.advance()
            return self._close(self._node("literal", tok, value=tok.text,
                                          detail="float"))
        if tok.kind == "string-literal":
            self.advance()
            return self._close(self._node("literal", tok,
                                          value=tok.text[1:-1], detail="str"))
        if tok.kind == "char-literal":
            self.advance()
            return self._close(self._node("literal", tok,
                                          value=tok.text[1:-1], detail="char"))
        if tok.kind == "punctuation" and tok.text == "(":
            self.advance()
            expr = self.parse_expression()
            self.expect("punctuation", ")")
            return expr
        if tok.kind == "keyword" and tok.text in _UNSUPPORTED_STATEMENT_KEYWORDS:
            self.unsupported(tok.text)
        self.error("expression")


def _clone(node):
    return AstNode(kind=node.kind, value=node.value, detail=node.detail,
                   children=[_clone(c) for c in node.children],
                   line=node.line, col=node.col, end_line=node.end_line,
                   end_col=node.end_col)


def _number_statements(fn):
    """Assign consecutive statement indices, in source order, to every node
    in a statement position of the function body."""
    counter = 0

    def visit_stmt(node):
        nonlocal counter
        if node.kind == "block":
            for child in node.children:
                visit_stmt(child)
            return
        node.statement_index = counter
        counter += 1
        if node.kind == "if":
            visit_stmt(node.children[1])
            if len(node.children) > 2:
                visit_stmt(node.children[2])
        elif node.kind in ("while",):
            visit_stmt(node.children[1])
        elif node.kind == "do-while":
            visit_stmt(node.children[0])
        elif node.kind == "for":
            init, _cond, step, body = node.children
            if init.kind != "empty":
                visit_stmt(init)
            visit_stmt(body)
            if step.kind != "empty":
                visit_stmt(step)

    visit_stmt(fn.children[-1])


def parse(tokens):
    """Parse a token sequence into an AST."""
    parser = _Parser(tokens)
    root = parser.parse_translation_unit()
    # Top-level declarations get their own index scope.
    counter = 0
    for child in root.children:
        if child.kind == "declaration":
            child.statement_index = counter
            counter += 1
    return Ast(root)


def parse_source(source):
    return parse(tokenize(source))


def ast_dump(ast):
    """Indented s-expression dump, one node per line."""
    lines = []

    def emit(node, depth):
        head = node.kind
        if node.value:
            head += f" {node.value}"
        if node.detail and node.kind in ("literal", "member-access"):
            head = f"{node.kind} {node.detail} {node.value}"
        if node.statement_index is not None:
            head += f" stmt={node.statement_index}"
        if node.children:
            lines.append("  " * depth + f"({head}")
            for child in node.children:
                emit(child, depth + 1)
            lines[-1] += ")"
        else:
            lines.append("  " * depth + f"({head})")

    emit(ast.root, 0)
    return "\n".join(lines)
