"""Lexer, recursive-descent parser and canonical renderer for a C subset.

The grammar covers the loop kernels found in scientific C code: basic types,
one-level array/pointer declarators, function definitions, if/else, for,
while, compound and expression statements, and the usual expression operators.
`#pragma omp` lines survive preprocessing as single pragma-line tokens; every
other preprocessor line and all comments are stripped before lexing.
"""

from dataclasses import dataclass, field

KEYWORDS = frozenset({
    "void", "int", "long", "float", "double", "char",
    "if", "else", "for", "while", "return",
})

TYPE_KEYWORDS = frozenset({"void", "int", "long", "float", "double", "char"})

ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%="})

# Longest first so the scanner never splits a two-char operator.
_OPERATORS = (
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "++", "--",
    "+", "-", "*", "/", "%", "<", ">", "=", "!", "&", "|", "^", "~",
)

_PUNCTUATION = "()[]{};,"

STATEMENT_KINDS = frozenset({
    "CompoundStmt", "ForStmt", "WhileStmt", "IfStmt",
    "ExprStmt", "ReturnStmt", "Empty",
})


class ParseError(Exception):
    """Grammar violation, reported with position and the expected construct."""

    def __init__(self, line, col, expected, got=""):
        self.line = line
        self.col = col
        self.expected = expected
        self.got = got
        detail = f"expected {expected}"
        if got:
            detail += f", got {got!r}"
        super().__init__(f"{line}:{col}: {detail}")


@dataclass
class Token:
    kind: str  # identifier | keyword | number | string-literal | char-literal | operator | punctuation | pragma-line
    lexeme: str
    line: int
    col: int


@dataclass
class AstNode:
    kind: str
    children: list = field(default_factory=list)
    token_span: tuple = (0, -1)  # [first, last] token indices, inclusive
    attrs: dict = field(default_factory=dict)


def ast_equal(a: AstNode, b: AstNode) -> bool:
    """Structural equality: kind, attrs and children, ignoring token spans."""
    if a.kind != b.kind or a.attrs != b.attrs or len(a.children) != len(b.children):
        return False
    return all(ast_equal(x, y) for x, y in zip(a.children, b.children))


# ---------------------------------------------------------------------------
# preprocessing


def _strip_comments(text):
    out = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "/" and i + 1 < n and text[i + 1] == "*":
            j = text.find("*/", i + 2)
            if j < 0:
                j = n - 2
            for k in range(i, j + 2):
                if k < n:
                    out.append("\n" if text[k] == "\n" else " ")
            i = j + 2
        elif c == "/" and i + 1 < n and text[i + 1] == "/":
            j = text.find("\n", i)
            if j < 0:
                j = n
            out.append(" " * (j - i))
            i = j
        elif c in "\"'":
            j = i + 1
            while j < n and text[j] != c:
                j += 2 if text[j] == "\\" else 1
            j = min(j, n - 1)
            out.append(text[i : j + 1])
            i = j + 1
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _preprocess(text):
    """Strip comments; keep `#pragma omp` logical lines, blank other `#` lines."""
    lines = _strip_comments(text).split("\n")
    out = []
    i = 0
    while i < len(lines):
        line = lines[i]
        stripped = line.lstrip()
        if stripped.startswith("#"):
            parts = [line]
            while parts[-1].rstrip().endswith("\\") and i + 1 < len(lines):
                i += 1
                parts.append(lines[i])
            logical = " ".join(p.rstrip().rstrip("\\").strip() for p in parts)
            words = logical.split()
            if len(words) >= 2 and words[0] == "#pragma" and words[1] == "omp":
                out.append(" ".join(words))
            else:
                out.append("")
            out.extend([""] * (len(parts) - 1))
        else:
            out.append(line)
        i += 1
    return "\n".join(out)


# ---------------------------------------------------------------------------
# lexer


def tokenize(source_text):
    """Lex preprocessed source into Tokens. Raises ParseError on bad chars."""
    text = _preprocess(source_text)
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            j = text.find("\n", i)
            if j < 0:
                j = n
            lexeme = text[i:j].rstrip()
            tokens.append(Token("pragma-line", lexeme, line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            lexeme = text[i:j]
            kind = "keyword" if lexeme in KEYWORDS else "identifier"
            tokens.append(Token(kind, lexeme, line, col))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            if text[j] == "0" and j + 1 < n and text[j + 1] in "xX":
                j += 2
                while j < n and (text[j].isdigit() or text[j].lower() in "abcdef"):
                    j += 1
            else:
                while j < n and text[j].isdigit():
                    j += 1
                if j < n and text[j] == ".":
                    j += 1
                    while j < n and text[j].isdigit():
                        j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        j = k
                        while j < n and text[j].isdigit():
                            j += 1
            while j < n and text[j] in "fFlLuU":
                j += 1
            tokens.append(Token("number", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c in "\"'":
            j = i + 1
            while j < n and text[j] != c:
                if text[j] == "\n":
                    raise ParseError(line, col, "closing quote", "newline")
                j += 2 if text[j] == "\\" else 1
            if j >= n:
                raise ParseError(line, col, "closing quote", "end of input")
            kind = "string-literal" if c == '"' else "char-literal"
            tokens.append(Token(kind, text[i : j + 1], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token("operator", op, line, col))
                col += len(op)
                i += len(op)
                break
        else:
            if c in _PUNCTUATION:
                tokens.append(Token("punctuation", c, line, col))
                col += 1
                i += 1
            else:
                raise ParseError(line, col, "a token", c)
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0
        # Extra Declarations split off a multi-declarator line, drained by
        # whichever caller requested the declaration.
        self._splice_pending = []

    # -- token helpers

    def peek(self, offset=0):
        p = self.pos + offset
        return self.tokens[p] if p < len(self.tokens) else None

    def at(self, kind, lexeme=None):
        t = self.peek()
        if t is None or t.kind != kind:
            return False
        return lexeme is None or t.lexeme == lexeme

    def advance(self):
        t = self.peek()
        self.pos += 1
        return t

    def expect(self, kind, lexeme=None):
        t = self.peek()
        if t is None:
            last = self.tokens[-1] if self.tokens else None
            line = last.line if last else 1
            col = last.col + len(last.lexeme) if last else 1
            raise ParseError(line, col, lexeme or kind, "end of input")
        if t.kind != kind or (lexeme is not None and t.lexeme != lexeme):
            raise ParseError(t.line, t.col, lexeme or kind, t.lexeme)
        return self.advance()

    def fail(self, expected):
        t = self.peek()
        if t is None:
            last = self.tokens[-1] if self.tokens else None
            raise ParseError(last.line if last else 1, 1, expected, "end of input")
        raise ParseError(t.line, t.col, expected, t.lexeme)

    def node(self, kind, children, start, attrs=None):
        return AstNode(kind, children, (start, self.pos - 1), attrs or {})

    # -- entry points

    def parse_unit(self):
        start = self.pos
        children = []
        while self.peek() is not None:
            if self.at("pragma-line"):
                t = self.peek()
                raise ParseError(t.line, t.col, "a declaration or function definition", "#pragma")
            children.append(self.parse_external())
            children.extend(self._splice_pending)
            self._splice_pending = []
        return AstNode("TranslationUnit", children, (start, self.pos - 1), {})

    def parse_snippet(self):
        start = self.pos
        children = self.parse_block_items(until_rbrace=False)
        return AstNode("TranslationUnit", children, (start, self.pos - 1), {})

    # -- declarations and functions

    def parse_external(self):
        start = self.pos
        if not (self.at("keyword") and self.peek().lexeme in TYPE_KEYWORDS):
            self.fail("a type keyword")
        type_name = self.advance().lexeme
        pointer = False
        if self.at("operator", "*"):
            self.advance()
            pointer = True
        name_tok = self.expect("identifier")
        if self.at("punctuation", "("):
            return self.parse_function_rest(start, type_name, pointer, name_tok)
        decls = [self.parse_declarator_rest(start, type_name, pointer, name_tok)]
        while self.at("punctuation", ","):
            self.advance()
            dstart = self.pos
            ptr = False
            if self.at("operator", "*"):
                self.advance()
                ptr = True
            tok = self.expect("identifier")
            decls.append(self.parse_declarator_rest(dstart, type_name, ptr, tok))
        self.expect("punctuation", ";")
        if len(decls) == 1:
            decls[0].token_span = (start, self.pos - 1)
            return decls[0]
        # Multi-declarator lines split into one Declaration per name; the
        # canonical renderer emits them on separate lines.
        self._splice_pending = decls[1:]
        return decls[0]

    def parse_declarator_rest(self, start, type_name, pointer, name_tok):
        name_idx = self.pos - 1
        ident = AstNode("Identifier", [], (name_idx, name_idx), {"name": name_tok.lexeme})
        declarator = ident
        if self.at("punctuation", "["):
            self.advance()
            if self.at("punctuation", "]"):
                size = AstNode("Empty", [], (self.pos, self.pos - 1), {})
            else:
                size = self.parse_expression()
            self.expect("punctuation", "]")
            declarator = self.node("ArrayIndex", [ident, size], name_idx)
        if self.at("operator", "="):
            self.advance()
            value = self.parse_assign()
            declarator = self.node("Assign", [declarator, value], name_idx, {"op": "="})
        return self.node("Declaration", [declarator], start,
                         {"type": type_name, "pointer": pointer})

    def parse_declaration(self):
        decl = self.parse_external()
        if decl.kind != "Declaration":
            self.fail("a declaration")
        return decl

    def parse_function_rest(self, start, type_name, pointer, name_tok):
        self.expect("punctuation", "(")
        params = []
        if self.at("keyword", "void") and self.peek(1) and self.peek(1).lexeme == ")":
            self.advance()
        elif not self.at("punctuation", ")"):
            params.append(self.parse_param())
            while self.at("punctuation", ","):
                self.advance()
                params.append(self.parse_param())
        self.expect("punctuation", ")")
        body = self.parse_compound()
        return self.node("FunctionDef", params + [body], start,
                         {"type": type_name, "pointer": pointer, "name": name_tok.lexeme})

    def parse_param(self):
        start = self.pos
        if not (self.at("keyword") and self.peek().lexeme in TYPE_KEYWORDS):
            self.fail("a parameter type")
        type_name = self.advance().lexeme
        pointer = False
        if self.at("operator", "*"):
            self.advance()
            pointer = True
        name_tok = self.expect("identifier")
        name_idx = self.pos - 1
        ident = AstNode("Identifier", [], (name_idx, name_idx), {"name": name_tok.lexeme})
        declarator = ident
        if self.at("punctuation", "["):
            self.advance()
            if self.at("punctuation", "]"):
                size = AstNode("Empty", [], (self.pos, self.pos - 1), {})
            else:
                size = self.parse_expression()
            self.expect("punctuation", "]")
            declarator = self.node("ArrayIndex", [ident, size], name_idx)
        return self.node("Declaration", [declarator], start,
                         {"type": type_name, "pointer": pointer})

    # -- statements

    def parse_block_items(self, until_rbrace):
        items = []
        while True:
            if until_rbrace and self.at("punctuation", "}"):
                break
            if not until_rbrace and self.peek() is None:
                break
            if until_rbrace and self.peek() is None:
                self.fail("}")
            if self.at("pragma-line"):
                t = self.advance()
                pragma = AstNode("PragmaDirective", [], (self.pos - 1, self.pos - 1),
                                 {"raw": t.lexeme})
                nxt = self.peek()
                if nxt is None or nxt.lexeme == "}" or nxt.kind == "pragma-line" or (
                    nxt.kind == "keyword" and nxt.lexeme in TYPE_KEYWORDS
                ):
                    raise ParseError(t.line, t.col, "a statement after the pragma",
                                     nxt.lexeme if nxt else "end of input")
                items.append(pragma)
                continue
            if self.at("keyword") and self.peek().lexeme in TYPE_KEYWORDS:
                items.append(self.parse_declaration())
                items.extend(self._splice_pending)
                self._splice_pending = []
            else:
                items.append(self.parse_statement())
        return items

    def parse_compound(self):
        start = self.pos
        self.expect("punctuation", "{")
        items = self.parse_block_items(until_rbrace=True)
        self.expect("punctuation", "}")
        return self.node("CompoundStmt", items, start)

    def parse_body(self):
        """Parse a loop/branch body, wrapping single statements in a block."""
        if self.at("punctuation", "{"):
            return self.parse_compound()
        start = self.pos
        stmt = self.parse_statement()
        return AstNode("CompoundStmt", [stmt], (start, self.pos - 1), {})

    def parse_statement(self):
        t = self.peek()
        if t is None:
            self.fail("a statement")
        if t.kind == "punctuation" and t.lexeme == "{":
            return self.parse_compound()
        if t.kind == "punctuation" and t.lexeme == ";":
            self.advance()
            return AstNode("Empty", [], (self.pos - 1, self.pos - 1), {})
        if t.kind == "keyword":
            if t.lexeme == "for":
                return self.parse_for()
            if t.lexeme == "while":
                return self.parse_while()
            if t.lexeme == "if":
                return self.parse_if()
            if t.lexeme == "return":
                return self.parse_return()
            if t.lexeme in TYPE_KEYWORDS:
                raise ParseError(t.line, t.col, "a statement", t.lexeme)
        start = self.pos
        expr = self.parse_expression()
        self.expect("punctuation", ";")
        return self.node("ExprStmt", [expr], start)

    def parse_for(self):
        start = self.pos
        self.expect("keyword", "for")
        self.expect("punctuation", "(")
        if self.at("punctuation", ";"):
            init = AstNode("Empty", [], (self.pos, self.pos - 1), {})
            self.advance()
        elif self.at("keyword") and self.peek().lexeme in TYPE_KEYWORDS:
            init = self.parse_declaration()
            if self._splice_pending:
                t = self.peek()
                raise ParseError(t.line, t.col, "a single declarator in for-init", ",")
        else:
            istart = self.pos
            expr = self.parse_expression()
            self.expect("punctuation", ";")
            init = AstNode("ExprStmt", [expr], (istart, self.pos - 2), {})
        if self.at("punctuation", ";"):
            cond = AstNode("Empty", [], (self.pos, self.pos - 1), {})
        else:
            cond = self.parse_expression()
        self.expect("punctuation", ";")
        if self.at("punctuation", ")"):
            inc = AstNode("Empty", [], (self.pos, self.pos - 1), {})
        else:
            inc = self.parse_expression()
        self.expect("punctuation", ")")
        body = self.parse_body()
        return self.node("ForStmt", [init, cond, inc, body], start)

    def parse_while(self):
        start = self.pos
        self.expect("keyword", "while")
        self.expect("punctuation", "(")
        cond = self.parse_expression()
        self.expect("punctuation", ")")
        body = self.parse_body()
        return self.node("WhileStmt", [cond, body], start)

    def parse_if(self):
        start = self.pos
        self.expect("keyword", "if")
        self.expect("punctuation", "(")
        cond = self.parse_expression()
        self.expect("punctuation", ")")
        then = self.parse_body()
        children = [cond, then]
        if self.at("keyword", "else"):
            self.advance()
            children.append(self.parse_body())
        return self.node("IfStmt", children, start)

    def parse_return(self):
        start = self.pos
        self.expect("keyword", "return")
        children = []
        if not self.at("punctuation", ";"):
            children.append(self.parse_expression())
        self.expect("punctuation", ";")
        return self.node("ReturnStmt", children, start)

    # -- expressions, lowest to highest precedence

    def parse_expression(self):
        return self.parse_assign()

    def parse_assign(self):
        start = self.pos
        left = self.parse_binary(0)
        t = self.peek()
        if t is not None and t.kind == "operator" and t.lexeme in ASSIGN_OPS:
            if left.kind not in ("Identifier", "ArrayIndex") and not (
                left.kind == "UnaryOp" and left.attrs.get("op") == "*"
            ):
                raise ParseError(t.line, t.col, "an assignable target", t.lexeme)
            op = self.advance().lexeme
            value = self.parse_assign()
            return self.node("Assign", [left, value], start, {"op": op})
        return left

    _BINARY_LEVELS = (
        ("||",),
        ("&&",),
        ("|",),
        ("^",),
        ("&",),
        ("==", "!="),
        ("<", ">", "<=", ">="),
        ("<<", ">>"),
        ("+", "-"),
        ("*", "/", "%"),
    )

    def parse_binary(self, level):
        if level >= len(self._BINARY_LEVELS):
            return self.parse_unary()
        ops = self._BINARY_LEVELS[level]
        start = self.pos
        left = self.parse_binary(level + 1)
        while True:
            t = self.peek()
            if t is None or t.kind != "operator" or t.lexeme not in ops:
                return left
            op = self.advance().lexeme
            right = self.parse_binary(level + 1)
            left = self.node("BinaryOp", [left, right], start, {"op": op})

    def parse_unary(self):
        t = self.peek()
        if t is not None and t.kind == "operator" and t.lexeme in (
            "!", "-", "+", "*", "&", "~", "++", "--"
        ):
            start = self.pos
            op = self.advance().lexeme
            operand = self.parse_unary()
            if op in ("++", "--") and operand.kind != "Identifier":
                raise ParseError(t.line, t.col, "an identifier after " + op, operand.kind)
            return self.node("UnaryOp", [operand], start, {"op": op, "postfix": False})
        return self.parse_postfix()

    def parse_postfix(self):
        start = self.pos
        expr = self.parse_primary()
        while True:
            if self.at("punctuation", "(") and expr.kind == "Identifier":
                self.advance()
                args = []
                if not self.at("punctuation", ")"):
                    args.append(self.parse_assign())
                    while self.at("punctuation", ","):
                        self.advance()
                        args.append(self.parse_assign())
                self.expect("punctuation", ")")
                expr = self.node("Call", args, start, {"name": expr.attrs["name"]})
            elif self.at("punctuation", "["):
                self.advance()
                index = self.parse_expression()
                self.expect("punctuation", "]")
                expr = self.node("ArrayIndex", [expr, index], start)
            elif self.at("operator", "++") or self.at("operator", "--"):
                op = self.advance().lexeme
                expr = self.node("UnaryOp", [expr], start, {"op": op, "postfix": True})
            else:
                return expr

    def parse_primary(self):
        t = self.peek()
        if t is None:
            self.fail("an expression")
        if t.kind == "identifier":
            self.advance()
            return AstNode("Identifier", [], (self.pos - 1, self.pos - 1), {"name": t.lexeme})
        if t.kind == "number":
            self.advance()
            return AstNode("Constant", [], (self.pos - 1, self.pos - 1),
                           {"value": t.lexeme, "ctype": "number"})
        if t.kind == "string-literal":
            self.advance()
            return AstNode("Constant", [], (self.pos - 1, self.pos - 1),
                           {"value": t.lexeme, "ctype": "string"})
        if t.kind == "char-literal":
            self.advance()
            return AstNode("Constant", [], (self.pos - 1, self.pos - 1),
                           {"value": t.lexeme, "ctype": "char"})
        if t.kind == "punctuation" and t.lexeme == "(":
            self.advance()
            expr = self.parse_expression()
            self.expect("punctuation", ")")
            return expr
        raise ParseError(t.line, t.col, "an expression", t.lexeme)


def parse_source(source_text):
    """Parse a translation unit. Returns (TranslationUnit node, token list)."""
    tokens = tokenize(source_text)
    unit = _Parser(tokens).parse_unit()
    return unit, tokens


def parse_snippet(source_text):
    """Parse a bare statement/declaration sequence (loop samples, contexts)."""
    tokens = tokenize(source_text)
    unit = _Parser(tokens).parse_snippet()
    return unit, tokens


# ---------------------------------------------------------------------------
# canonical renderer

_PRECEDENCE = {
    "||": 2, "&&": 3, "|": 4, "^": 5, "&": 6,
    "==": 7, "!=": 7, "<": 8, ">": 8, "<=": 8, ">=": 8,
    "<<": 9, ">>": 9, "+": 10, "-": 10, "*": 11, "/": 11, "%": 11,
}


def _prec(node):
    if node.kind == "Assign":
        return 1
    if node.kind == "BinaryOp":
        return _PRECEDENCE[node.attrs["op"]]
    if node.kind == "UnaryOp":
        return 12
    return 13


def _render_expr(node):
    kind = node.kind
    if kind == "Identifier":
        return node.attrs["name"]
    if kind == "Constant":
        return node.attrs["value"]
    if kind == "Assign":
        target = _render_expr(node.children[0])
        value = _render_expr(node.children[1])
        if _prec(node.children[1]) < 1:
            value = "(" + value + ")"
        return f"{target} {node.attrs['op']} {value}"
    if kind == "BinaryOp":
        me = _prec(node)
        left = _render_expr(node.children[0])
        if _prec(node.children[0]) < me:
            left = "(" + left + ")"
        right = _render_expr(node.children[1])
        if _prec(node.children[1]) <= me:
            right = "(" + right + ")"
        return f"{left} {node.attrs['op']} {right}"
    if kind == "UnaryOp":
        child = node.children[0]
        inner = _render_expr(child)
        # Parenthesize nested prefix chains so "- -x" cannot re-lex as "--x".
        needs_parens = _prec(child) < 12 or (
            not node.attrs.get("postfix")
            and child.kind == "UnaryOp"
            and not child.attrs.get("postfix")
        )
        if needs_parens:
            inner = "(" + inner + ")"
        if node.attrs.get("postfix"):
            return inner + node.attrs["op"]
        return node.attrs["op"] + inner
    if kind == "Call":
        args = ", ".join(_render_expr(a) for a in node.children)
        return f"{node.attrs['name']}({args})"
    if kind == "ArrayIndex":
        base = _render_expr(node.children[0])
        if _prec(node.children[0]) < 13:
            base = "(" + base + ")"
        index = "" if node.children[1].kind == "Empty" else _render_expr(node.children[1])
        return f"{base}[{index}]"
    if kind == "Empty":
        return ""
    raise ValueError(f"not an expression node: {kind}")


def _render_declaration(node, with_semicolon=True):
    star = "*" if node.attrs.get("pointer") else ""
    body = f"{node.attrs['type']} {star}{_render_expr(node.children[0])}"
    return body + ";" if with_semicolon else body


def render(node):
    """Render an AST to canonical text: single spaces, one statement per
    line, loop/branch bodies always braced. parse∘render is the identity on
    parser output."""
    kind = node.kind
    if kind == "TranslationUnit":
        return "\n".join(render(c) for c in node.children)
    if kind == "FunctionDef":
        params = ", ".join(
            _render_declaration(p, with_semicolon=False) for p in node.children[:-1]
        )
        star = "*" if node.attrs.get("pointer") else ""
        head = f"{node.attrs['type']} {star}{node.attrs['name']}({params})"
        return head + " " + render(node.children[-1])
    if kind == "Declaration":
        return _render_declaration(node)
    if kind == "CompoundStmt":
        if not node.children:
            return "{\n}"
        return "{\n" + "\n".join(render(c) for c in node.children) + "\n}"
    if kind == "ForStmt":
        init, cond, inc, body = node.children
        if init.kind == "Declaration":
            init_text = _render_declaration(init, with_semicolon=False)
        elif init.kind == "ExprStmt":
            init_text = _render_expr(init.children[0])
        else:
            init_text = ""
        cond_text = "" if cond.kind == "Empty" else _render_expr(cond)
        inc_text = "" if inc.kind == "Empty" else _render_expr(inc)
        return f"for ({init_text}; {cond_text}; {inc_text}) " + render(body)
    if kind == "WhileStmt":
        return f"while ({_render_expr(node.children[0])}) " + render(node.children[1])
    if kind == "IfStmt":
        text = f"if ({_render_expr(node.children[0])}) " + render(node.children[1])
        if len(node.children) == 3:
            text += " else " + render(node.children[2])
        return text
    if kind == "ExprStmt":
        return _render_expr(node.children[0]) + ";"
    if kind == "ReturnStmt":
        if node.children:
            return f"return {_render_expr(node.children[0])};"
        return "return;"
    if kind == "Empty":
        return ";"
    if kind == "PragmaDirective":
        return node.attrs["raw"]
    return _render_expr(node)


def iter_nodes(node):
    """Yield node and all descendants in depth-first program order."""
    yield node
    for child in node.children:
        yield from iter_nodes(child)


def find_loops(node):
    """All ForStmt nodes in the subtree, outermost first, in program order."""
    return [n for n in iter_nodes(node) if n.kind == "ForStmt"]
