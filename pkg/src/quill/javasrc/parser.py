"""Recursive-descent parser for a structural subset of Java.

Produces a lightweight syntax tree of SynNode records with byte spans.
Node type strings follow the JavaParser-style taxonomy used throughout the
pipeline (MethodDeclaration, BlockStmt, ...); constructs outside that
taxonomy get descriptive types and map to the catch-all kind downstream.

Supported: packages, imports, classes/interfaces/enums/annotation types,
records (parsed, mapped to the catch-all), generics, lambdas, method
references, anonymous classes, switch statements and arrow switches, text
blocks, try-with-resources. Not supported: module declarations (raises
UnsupportedConstruct).

The lexer emits `>` one byte at a time; this parser merges adjacent `>`
tokens into >>, >>>, >=, >>= and >>>= during expression parsing, which is
what makes nested generic closers like `List<List<String>>` parse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import JavaParseError, UnsupportedConstruct
from .lexer import (
    CHAR_LIT, EOF, FLOAT_LIT, IDENT, INT_LIT, KEYWORD, OP, STRING_LIT,
    TEXT_BLOCK, Token, lex,
)

MODIFIER_KEYWORDS = frozenset(
    "public protected private static final abstract synchronized "
    "volatile transient native strictfp default".split()
)

PRIMITIVES = frozenset("boolean byte short int long char float double".split())

_PREC = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6,
    "instanceof": 7, "<": 7, ">": 7, "<=": 7, ">=": 7,
    "<<": 8, ">>": 8, ">>>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}

_ASSIGN_OPS = frozenset(
    ["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<="]
)


@dataclass
class SynNode:
    type: str
    start: int
    end: int
    children: list["SynNode"] = field(default_factory=list)
    name: str | None = None
    info: dict = field(default_factory=dict)

    def child_of_type(self, t: str) -> "SynNode | None":
        for c in self.children:
            if c.type == t:
                return c
        return None

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def parse_compilation_unit(buf: bytes, path: str | None = None) -> tuple[SynNode, list[tuple[int, int]]]:
    """Parse a .java buffer. Returns (CompilationUnit node, line comment spans)."""
    tokens, comments = lex(buf, path)
    p = _Parser(buf, tokens, path)
    unit = p.compilation_unit()
    return unit, comments


class _Parser:
    def __init__(self, buf: bytes, toks: list[Token], path: str | None):
        self.buf = buf
        self.toks = toks
        self.i = 0
        self.path = path

    # --- token plumbing -------------------------------------------------

    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 0) -> Token:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else self.toks[-1]

    def at(self, val: str) -> bool:
        t = self.toks[self.i]
        return t.value == val and t.type in (OP, KEYWORD)

    def at_ident(self, val: str | None = None) -> bool:
        t = self.toks[self.i]
        return t.type == IDENT and (val is None or t.value == val)

    def accept(self, val: str) -> bool:
        if self.at(val):
            self.i += 1
            return True
        return False

    def expect(self, val: str) -> Token:
        if not self.at(val):
            self.error(f"expected '{val}', found '{self.cur().value or 'eof'}'")
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_ident(self) -> Token:
        t = self.toks[self.i]
        if t.type != IDENT:
            self.error(f"expected identifier, found '{t.value or 'eof'}'")
        self.i += 1
        return t

    def error(self, msg: str):
        t = self.cur()
        line = self.buf.count(b"\n", 0, t.start) + 1
        col = t.start - self.buf.rfind(b"\n", 0, t.start)
        raise JavaParseError(msg, line, col, self.path)

    def node(self, type_: str, start: int, end: int, children=None,
             name: str | None = None, **info) -> SynNode:
        return SynNode(type_, start, end, list(children or []), name, info)

    def prev_end(self) -> int:
        return self.toks[self.i - 1].end if self.i > 0 else 0

    # --- compilation unit -----------------------------------------------

    def compilation_unit(self) -> SynNode:
        start = 0
        children: list[SynNode] = []
        save = self.i
        annos = self.annotations_only()
        if self.at("package"):
            pstart = annos[0].start if annos else self.cur().start
            self.expect("package")
            qname = self.qualified_name()
            self.expect(";")
            children.append(self.node(
                "PackageDeclaration", pstart, self.prev_end(),
                annos, qualified=qname))
        else:
            self.i = save
        while self.at("import"):
            istart = self.cur().start
            self.expect("import")
            is_static = self.accept("static")
            qname = self.qualified_name()
            star = False
            if self.accept("."):
                self.expect("*")
                star = True
            self.expect(";")
            children.append(self.node(
                "ImportDeclaration", istart, self.prev_end(),
                qualified=qname, static=is_static, star=star))
        if self.at_ident("module") or (
                self.at_ident("open") and self.peek(1).type == IDENT
                and self.peek(1).value == "module"):
            raise UnsupportedConstruct("module declarations are not supported")
        while self.cur().type != EOF:
            if self.accept(";"):
                continue
            children.append(self.type_declaration())
        end = len(self.buf)
        return self.node("CompilationUnit", start, end, children)

    def qualified_name(self) -> str:
        parts = [self.expect_ident().value]
        while self.at(".") and self.peek(1).type == IDENT:
            self.i += 1
            parts.append(self.expect_ident().value)
        return ".".join(parts)

    # --- modifiers and annotations ---------------------------------------

    def modifiers(self) -> tuple[list[str], list[SynNode], int | None]:
        """Parse interleaved modifier keywords and annotations.

        Returns (modifier names, annotation nodes, start offset or None).
        """
        mods: list[str] = []
        annos: list[SynNode] = []
        start: int | None = None
        while True:
            t = self.cur()
            if t.type == KEYWORD and t.value in MODIFIER_KEYWORDS:
                if start is None:
                    start = t.start
                mods.append(t.value)
                self.i += 1
                continue
            if self.at("@") and not (self.peek(1).type == KEYWORD
                                     and self.peek(1).value == "interface"):
                if start is None:
                    start = t.start
                annos.append(self.annotation())
                continue
            break
        return mods, annos, start

    def annotations_only(self) -> list[SynNode]:
        annos = []
        while self.at("@") and not (self.peek(1).type == KEYWORD
                                    and self.peek(1).value == "interface"):
            annos.append(self.annotation())
        return annos

    def annotation(self) -> SynNode:
        start = self.expect("@").start
        qname = self.qualified_name()
        simple = qname.rsplit(".", 1)[-1]
        if not self.at("("):
            return self.node("MarkerAnnotationExpr", start, self.prev_end(),
                             name=simple, anno_name=qname)
        self.expect("(")
        if self.accept(")"):
            return self.node("MarkerAnnotationExpr", start, self.prev_end(),
                             name=simple, anno_name=qname)
        if self.at_ident() and self.peek(1).value == "=" and self.peek(1).type == OP:
            pairs = []
            while True:
                pstart = self.cur().start
                pname = self.expect_ident().value
                self.expect("=")
                val = self.element_value()
                pairs.append(self.node("MemberValuePair", pstart,
                                       self.prev_end(), [val], name=pname))
                if not self.accept(","):
                    break
            self.expect(")")
            return self.node("NormalAnnotationExpr", start, self.prev_end(),
                             pairs, name=simple, anno_name=qname)
        val = self.element_value()
        self.expect(")")
        return self.node("SingleMemAnnoExpr", start, self.prev_end(),
                         [val], name=simple, anno_name=qname)

    def element_value(self) -> SynNode:
        if self.at("@"):
            return self.annotation()
        if self.at("{"):
            return self.array_initializer()
        return self.conditional()

    # --- type declarations ------------------------------------------------

    def type_declaration(self) -> SynNode:
        mods, annos, mstart = self.modifiers()
        return self.type_declaration_rest(mods, annos, mstart)

    def type_declaration_rest(self, mods, annos, mstart) -> SynNode:
        start = mstart if mstart is not None else self.cur().start
        if self.at("class"):
            return self.class_decl(mods, annos, start, interface=False)
        if self.at("interface"):
            return self.class_decl(mods, annos, start, interface=True)
        if self.at("enum"):
            return self.enum_decl(mods, annos, start)
        if self.at("@") and self.peek(1).value == "interface":
            return self.annotation_type_decl(mods, annos, start)
        if self.at_ident("record") and self.peek(1).type == IDENT:
            return self.record_decl(mods, annos, start)
        self.error("expected type declaration")
        raise AssertionError  # unreachable

    def class_decl(self, mods, annos, start, interface: bool) -> SynNode:
        self.i += 1  # class / interface
        name = self.expect_ident().value
        children = list(annos)
        children.extend(self.type_params())
        ext: list[SynNode] = []
        impl: list[SynNode] = []
        if self.accept("extends"):
            ext.append(self.parse_type())
            while self.accept(","):
                ext.append(self.parse_type())
        if self.accept("implements"):
            impl.append(self.parse_type())
            while self.accept(","):
                impl.append(self.parse_type())
        for t in ext:
            t.info["heritage"] = "extends"
        for t in impl:
            t.info["heritage"] = "implements"
        children.extend(ext)
        children.extend(impl)
        children.extend(self.class_body(name))
        return self.node(
            "ClassOrInterfaceDecl", start, self.prev_end(), children,
            name=name, modifiers=mods, interface=interface,
            supertypes=[t.info.get("text", "") for t in ext + impl])

    def record_decl(self, mods, annos, start) -> SynNode:
        self.i += 1  # 'record'
        name = self.expect_ident().value
        children = list(annos)
        children.extend(self.type_params())
        self.expect("(")
        if not self.at(")"):
            children.append(self.parameter())
            while self.accept(","):
                children.append(self.parameter())
        self.expect(")")
        supertypes = []
        if self.accept("implements"):
            t = self.parse_type()
            supertypes.append(t.info.get("text", ""))
            children.append(t)
            while self.accept(","):
                t = self.parse_type()
                supertypes.append(t.info.get("text", ""))
                children.append(t)
        children.extend(self.class_body(name))
        return self.node("RecordDecl", start, self.prev_end(), children,
                         name=name, modifiers=mods, supertypes=supertypes)

    def enum_decl(self, mods, annos, start) -> SynNode:
        self.expect("enum")
        name = self.expect_ident().value
        children = list(annos)
        supertypes = []
        if self.accept("implements"):
            t = self.parse_type()
            supertypes.append(t.info.get("text", ""))
            children.append(t)
            while self.accept(","):
                t = self.parse_type()
                supertypes.append(t.info.get("text", ""))
                children.append(t)
        self.expect("{")
        while not self.at(";") and not self.at("}"):
            cstart = self.cur().start
            cannos = self.annotations_only()
            cname = self.expect_ident().value
            cchildren = list(cannos)
            if self.at("("):
                cchildren.extend(self.arguments())
            if self.at("{"):
                cchildren.extend(self.class_body(name))
            children.append(self.node("EnumConstant", cstart, self.prev_end(),
                                      cchildren, name=cname))
            if not self.accept(","):
                break
        if self.accept(";"):
            while not self.at("}"):
                if self.accept(";"):
                    continue
                children.append(self.member(name))
        self.expect("}")
        return self.node("EnumDeclaration", start, self.prev_end(), children,
                         name=name, modifiers=mods, supertypes=supertypes)

    def annotation_type_decl(self, mods, annos, start) -> SynNode:
        self.expect("@")
        self.expect("interface")
        name = self.expect_ident().value
        children = list(annos)
        self.expect("{")
        while not self.at("}"):
            if self.accept(";"):
                continue
            children.append(self.member(name))
        self.expect("}")
        return self.node("AnnotationDecl", start, self.prev_end(), children,
                         name=name, modifiers=mods, supertypes=[])

    def type_params(self) -> list[SynNode]:
        out: list[SynNode] = []
        if not self.at("<"):
            return out
        self.expect("<")
        while True:
            tstart = self.cur().start
            annos = self.annotations_only()
            tname = self.expect_ident().value
            bounds = []
            if self.accept("extends"):
                bounds.append(self.parse_type())
                while self.accept("&"):
                    bounds.append(self.parse_type())
            out.append(self.node("TypeParameter", tstart, self.prev_end(),
                                 annos + bounds, name=tname))
            if not self.accept(","):
                break
        self.expect(">")
        return out

    # --- class members ------------------------------------------------------

    def class_body(self, enclosing_name: str) -> list[SynNode]:
        self.expect("{")
        members = []
        while not self.at("}"):
            if self.accept(";"):
                continue
            members.append(self.member(enclosing_name))
        self.expect("}")
        return members

    def member(self, enclosing_name: str) -> SynNode:
        start_tok = self.cur().start
        mods, annos, mstart = self.modifiers()
        start = mstart if mstart is not None else start_tok
        if self.at("{"):
            body = self.block()
            return self.node("InitializerBlock", start, self.prev_end(),
                             [body], modifiers=mods)
        if (self.at("class") or self.at("interface") or self.at("enum")
                or (self.at("@") and self.peek(1).value == "interface")
                or (self.at_ident("record") and self.peek(1).type == IDENT
                    and self.peek(2).value == "(")):
            return self.type_declaration_rest(mods, annos, start)
        tparams = self.type_params()
        if (self.at_ident(enclosing_name) and self.peek(1).value == "("
                and self.peek(1).type == OP):
            return self.constructor(mods, annos, tparams, start)
        rtype = self.parse_type(allow_void=True)
        name_tok = self.expect_ident()
        if self.at("("):
            return self.method(mods, annos, tparams, rtype, name_tok, start)
        return self.field_decl(mods, annos, rtype, name_tok, start)

    def constructor(self, mods, annos, tparams, start) -> SynNode:
        name = self.expect_ident().value
        children = list(annos) + tparams
        params = self.parameters()
        children.extend(params)
        children.extend(self.throws_clause())
        body = self.block()
        children.append(body)
        return self.node(
            "ConstructorDeclaration", start, self.prev_end(), children,
            name=name, modifiers=mods,
            param_types=[p.info.get("type_sig", "") for p in params])

    def method(self, mods, annos, tparams, rtype, name_tok, start) -> SynNode:
        children = list(annos) + tparams + [rtype]
        params = self.parameters()
        children.extend(params)
        ret_dims = self.extra_dims()  # archaic `int m()[]` form
        children.extend(self.throws_clause())
        if self.accept("default"):  # annotation type member default value
            children.append(self.element_value())
        if self.at("{"):
            children.append(self.block())
        else:
            self.expect(";")
        return self.node(
            "MethodDeclaration", start, self.prev_end(), children,
            name=name_tok.value, modifiers=mods,
            return_sig=rtype.info.get("type_sig", "") + "[]" * ret_dims,
            return_primitive=bool(rtype.info.get("primitive")) and ret_dims == 0,
            param_types=[p.info.get("type_sig", "") for p in params])

    def field_decl(self, mods, annos, vtype, first_name_tok, start) -> SynNode:
        declarators = [self.declarator_rest(first_name_tok, vtype)]
        while self.accept(","):
            ntok = self.expect_ident()
            declarators.append(self.declarator_rest(ntok, vtype))
        self.expect(";")
        return self.node(
            "FieldDeclaration", start, self.prev_end(),
            list(annos) + [vtype] + declarators,
            modifiers=mods, primitive=bool(vtype.info.get("primitive")),
            type_sig=vtype.info.get("type_sig", ""))

    def declarator_rest(self, name_tok: Token, vtype: SynNode) -> SynNode:
        dims = self.extra_dims()
        children = []
        if self.accept("="):
            children.append(self.variable_initializer())
        sig = vtype.info.get("type_sig", "") + "[]" * dims
        return self.node("VariableDeclarator", name_tok.start, self.prev_end(),
                         children, name=name_tok.value, type_sig=sig,
                         primitive=bool(vtype.info.get("primitive")) and dims == 0)

    def extra_dims(self) -> int:
        dims = 0
        while self.at("[") and self.peek(1).value == "]":
            self.i += 2
            dims += 1
        return dims

    def variable_initializer(self) -> SynNode:
        if self.at("{"):
            return self.array_initializer()
        return self.expression()

    def array_initializer(self) -> SynNode:
        start = self.expect("{").start
        children = []
        while not self.at("}"):
            children.append(self.variable_initializer())
            if not self.accept(","):
                break
        self.expect("}")
        return self.node("ArrayInitializerExpr", start, self.prev_end(), children)

    def parameters(self) -> list[SynNode]:
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.parameter())
            while self.accept(","):
                params.append(self.parameter())
        self.expect(")")
        return params

    def parameter(self) -> SynNode:
        start_tok = self.cur().start
        mods, annos, mstart = self.modifiers()
        start = mstart if mstart is not None else start_tok
        ptype = self.parse_type()
        varargs = self.accept("...")
        if self.at("this"):  # receiver parameter
            self.i += 1
            name = "this"
        else:
            name = self.expect_ident().value
        dims = self.extra_dims()
        sig = ptype.info.get("type_sig", "") + "[]" * dims + ("[]" if varargs else "")
        return self.node(
            "Parameter", start, self.prev_end(), list(annos) + [ptype],
            name=name, modifiers=mods, varargs=varargs, type_sig=sig,
            primitive=bool(ptype.info.get("primitive")) and dims == 0 and not varargs)

    def throws_clause(self) -> list[SynNode]:
        out = []
        if self.accept("throws"):
            t = self.parse_type()
            t.info["heritage"] = "throws"
            out.append(t)
            while self.accept(","):
                t = self.parse_type()
                t.info["heritage"] = "throws"
                out.append(t)
        return out

    # --- types ---------------------------------------------------------------

    def parse_type(self, allow_void: bool = False, allow_var: bool = False) -> SynNode:
        start = self.cur().start
        annos = self.annotations_only()
        t = self.cur()
        if t.type == KEYWORD and t.value in PRIMITIVES:
            self.i += 1
            base = self.node("PrimitiveType", t.start, t.end, annos,
                             text=t.value, type_sig=t.value, primitive=True)
        elif t.type == KEYWORD and t.value == "void":
            if not allow_void:
                self.error("'void' not allowed here")
            self.i += 1
            base = self.node("VoidType", t.start, t.end, annos,
                             text="void", type_sig="void", primitive=True)
        elif t.type == IDENT:
            if allow_var and t.value == "var":
                self.i += 1
                return self.node("VarType", t.start, t.end, annos,
                                 text="var", type_sig="var", primitive=False)
            base = self.class_type(annos, start)
        else:
            self.error("expected type")
            raise AssertionError
        while self.at("[") and self.peek(1).value == "]":
            self.i += 2
            base = self.node("ArrayType", start, self.prev_end(), [base],
                             text=base.info.get("text", "") + "[]",
                             type_sig=base.info.get("type_sig", "") + "[]",
                             primitive=False)
        return base

    def class_type(self, annos: list[SynNode], start: int) -> SynNode:
        parts = [self.expect_ident().value]
        children = list(annos)
        children.extend(self.maybe_type_args())
        while (self.at(".") and self.peek(1).type == IDENT
               and not self.is_method_ref_ahead()):
            self.i += 1
            parts.append(self.expect_ident().value)
            children.extend(self.maybe_type_args())
        text = ".".join(parts)
        return self.node("ClassType", start, self.prev_end(), children,
                         text=text, type_sig=parts[-1], primitive=False)

    def is_method_ref_ahead(self) -> bool:
        return False  # types never contain '::'; hook kept for clarity

    def maybe_type_args(self) -> list[SynNode]:
        if not self.at("<"):
            return []
        save = self.i
        try:
            return self.type_args()
        except JavaParseError:
            self.i = save
            return []

    def type_args(self) -> list[SynNode]:
        self.expect("<")
        args: list[SynNode] = []
        if self.accept(">"):  # diamond
            return args
        while True:
            if self.at("?"):
                wstart = self.cur().start
                self.i += 1
                wchildren = []
                if self.accept("extends") or self.accept("super"):
                    wchildren.append(self.parse_type())
                args.append(self.node("WildcardType", wstart, self.prev_end(),
                                      wchildren))
            else:
                args.append(self.parse_type())
            if not self.accept(","):
                break
        self.expect(">")
        return args

    # --- statements ------------------------------------------------------------

    def block(self) -> SynNode:
        start = self.expect("{").start
        stmts = []
        while not self.at("}"):
            stmts.append(self.statement())
        self.expect("}")
        return self.node("BlockStmt", start, self.prev_end(), stmts)

    def statement(self) -> SynNode:
        t = self.cur()
        if self.at("{"):
            return self.block()
        if self.at(";"):
            self.i += 1
            return self.node("EmptyStmt", t.start, t.end)
        if t.type == KEYWORD:
            handler = {
                "if": self.if_stmt, "for": self.for_stmt, "while": self.while_stmt,
                "do": self.do_stmt, "try": self.try_stmt, "switch": self.switch_stmt,
                "return": self.return_stmt, "throw": self.throw_stmt,
                "break": self.break_stmt, "continue": self.continue_stmt,
                "assert": self.assert_stmt, "synchronized": self.synchronized_stmt,
            }.get(t.value)
            if handler:
                return handler()
            if t.value in ("this", "super") and self.peek(1).value == "(":
                return self.explicit_ctor_invocation()
            if t.value == "class" or t.value in MODIFIER_KEYWORDS or t.value in PRIMITIVES or t.value == "void":
                pass  # falls through to declaration handling below
        if t.type == IDENT and self.peek(1).value == ":" and self.peek(1).type == OP \
                and not (self.peek(1).end == self.peek(2).start and self.peek(2).value == ":"):
            self.i += 2
            inner = self.statement()
            return self.node("LabeledStmt", t.start, self.prev_end(), [inner],
                             name=t.value)
        if t.type == IDENT and t.value == "yield" and self.peek(1).type != OP:
            self.i += 1
            expr = self.expression()
            self.expect(";")
            return self.node("YieldStmt", t.start, self.prev_end(), [expr])
        # local class, local variable declaration, or expression statement
        save = self.i
        mods, annos, _ = self.modifiers()
        if self.at("class") or self.at("interface") or self.at("enum"):
            decl = self.type_declaration_rest(mods, annos, t.start)
            return self.node("LocalClassDeclStmt", t.start, self.prev_end(), [decl])
        self.i = save
        decl = self.try_local_var_decl()
        if decl is not None:
            self.expect(";")
            decl.end = self.prev_end()
            wrapper = self.node("ExpressionStmt", t.start, self.prev_end(), [decl])
            wrapper.info["local_decl"] = True
            return wrapper
        expr = self.expression()
        self.expect(";")
        return self.node("ExpressionStmt", t.start, self.prev_end(), [expr])

    def try_local_var_decl(self) -> SynNode | None:
        """Speculatively parse `mods type name (= init)? (, name (= init)?)*`.

        Returns the LocalVarDecl node without consuming the trailing ';',
        or None (with position restored) if this is not a declaration.
        """
        save = self.i
        start = self.cur().start
        try:
            mods, annos, _ = self.modifiers()
            vtype = self.parse_type(allow_var=True)
            if not self.at_ident():
                self.i = save
                return None
            name_tok = self.expect_ident()
            declarators = [self.declarator_rest(name_tok, vtype)]
            while self.accept(","):
                ntok = self.expect_ident()
                declarators.append(self.declarator_rest(ntok, vtype))
            return self.node(
                "LocalVarDecl", start, self.prev_end(),
                list(annos) + [vtype] + declarators,
                modifiers=mods, primitive=bool(vtype.info.get("primitive")),
                type_sig=vtype.info.get("type_sig", ""))
        except JavaParseError:
            self.i = save
            return None

    def if_stmt(self) -> SynNode:
        start = self.expect("if").start
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        then = self.statement()
        children = [cond, then]
        if self.accept("else"):
            children.append(self.statement())
        return self.node("IfStmt", start, self.prev_end(), children)

    def for_stmt(self) -> SynNode:
        start = self.expect("for").start
        self.expect("(")
        save = self.i
        decl = self.try_local_var_decl()
        if decl is not None and self.at(":"):
            self.expect(":")
            iterable = self.expression()
            self.expect(")")
            body = self.statement()
            return self.node("ForEachStmt", start, self.prev_end(),
                             [decl, iterable, body])
        self.i = save
        children: list[SynNode] = []
        init = self.try_local_var_decl()
        if init is not None:
            children.append(init)
        elif not self.at(";"):
            children.append(self.expression())
            while self.accept(","):
                children.append(self.expression())
        self.expect(";")
        if not self.at(";"):
            children.append(self.expression())
        self.expect(";")
        if not self.at(")"):
            children.append(self.expression())
            while self.accept(","):
                children.append(self.expression())
        self.expect(")")
        children.append(self.statement())
        return self.node("ForStmt", start, self.prev_end(), children)

    def while_stmt(self) -> SynNode:
        start = self.expect("while").start
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        body = self.statement()
        return self.node("WhileStmt", start, self.prev_end(), [cond, body])

    def do_stmt(self) -> SynNode:
        start = self.expect("do").start
        body = self.statement()
        self.expect("while")
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        self.expect(";")
        return self.node("DoStmt", start, self.prev_end(), [body, cond])

    def try_stmt(self) -> SynNode:
        start = self.expect("try").start
        children: list[SynNode] = []
        if self.at("("):
            self.expect("(")
            while not self.at(")"):
                res = self.try_local_var_decl()
                if res is None:
                    res = self.expression()
                res.info["resource"] = True
                children.append(res)
                if not self.accept(";"):
                    break
            self.expect(")")
        children.append(self.block())
        while self.at("catch"):
            cstart = self.expect("catch").start
            self.expect("(")
            mods, annos, _ = self.modifiers()
            ptstart = self.cur().start
            types = [self.parse_type()]
            while self.accept("|"):
                types.append(self.parse_type())
            if len(types) == 1:
                ptype = types[0]
            else:
                ptype = self.node("UnionType", ptstart, self.prev_end(), types,
                                  type_sig=types[0].info.get("type_sig", ""))
            name_tok = self.expect_ident()
            self.expect(")")
            param = self.node("Parameter", ptstart, self.prev_end(),
                              list(annos) + [ptype], name=name_tok.value,
                              modifiers=mods,
                              type_sig=ptype.info.get("type_sig", ""),
                              primitive=False, catch_param=True)
            cbody = self.block()
            children.append(self.node("CatchClause", cstart, self.prev_end(),
                                      [param, cbody]))
        if self.accept("finally"):
            fin = self.block()
            fin.info["finally"] = True
            children.append(fin)
        return self.node("TryStmt", start, self.prev_end(), children)

    def switch_stmt(self) -> SynNode:
        start = self.expect("switch").start
        self.expect("(")
        selector = self.expression()
        self.expect(")")
        self.expect("{")
        entries = []
        while not self.at("}"):
            entries.append(self.switch_entry())
        self.expect("}")
        return self.node("SwitchStmt", start, self.prev_end(),
                         [selector] + entries)

    def switch_entry(self) -> SynNode:
        start = self.cur().start
        labels: list[SynNode] = []
        if self.accept("default"):
            pass
        else:
            self.expect("case")
            labels.append(self.expression())
            while self.accept(","):
                labels.append(self.expression())
        body: list[SynNode] = []
        if self.accept("->"):
            if self.at("{"):
                body.append(self.block())
            elif self.at("throw"):
                body.append(self.throw_stmt())
            else:
                body.append(self.expression())
                self.expect(";")
        else:
            self.expect(":")
            while not (self.at("case") or self.at("default") or self.at("}")):
                body.append(self.statement())
        return self.node("SwitchEntry", start, self.prev_end(), labels + body)

    def return_stmt(self) -> SynNode:
        start = self.expect("return").start
        children = []
        if not self.at(";"):
            children.append(self.expression())
        self.expect(";")
        return self.node("ReturnStmt", start, self.prev_end(), children)

    def throw_stmt(self) -> SynNode:
        start = self.expect("throw").start
        expr = self.expression()
        self.expect(";")
        return self.node("ThrowStmt", start, self.prev_end(), [expr])

    def break_stmt(self) -> SynNode:
        start = self.expect("break").start
        name = None
        if self.at_ident():
            name = self.expect_ident().value
        self.expect(";")
        return self.node("BreakStmt", start, self.prev_end(), name=name)

    def continue_stmt(self) -> SynNode:
        start = self.expect("continue").start
        name = None
        if self.at_ident():
            name = self.expect_ident().value
        self.expect(";")
        return self.node("ContinueStmt", start, self.prev_end(), name=name)

    def assert_stmt(self) -> SynNode:
        start = self.expect("assert").start
        children = [self.expression()]
        if self.accept(":"):
            children.append(self.expression())
        self.expect(";")
        return self.node("AssertStmt", start, self.prev_end(), children)

    def synchronized_stmt(self) -> SynNode:
        start = self.expect("synchronized").start
        self.expect("(")
        lock = self.expression()
        self.expect(")")
        body = self.block()
        return self.node("SynchronizedStmt", start, self.prev_end(), [lock, body])

    def explicit_ctor_invocation(self) -> SynNode:
        start = self.cur().start
        kw = self.cur().value
        self.i += 1
        args = self.arguments()
        self.expect(";")
        return self.node("ExplCtorInvocStmt", start, self.prev_end(), args,
                         name=kw)

    # --- expressions ------------------------------------------------------------

    def expression(self) -> SynNode:
        lam = self.try_lambda()
        if lam is not None:
            return lam
        lhs = self.conditional()
        op = self.peek_assign_op()
        if op is not None:
            opstr, ntok = op
            self.i += ntok
            rhs = self.expression()
            return self.node("AssignExpr", lhs.start, self.prev_end(),
                             [lhs, rhs], op=opstr)
        return lhs

    def peek_assign_op(self) -> tuple[str, int] | None:
        t = self.cur()
        if t.type != OP:
            return None
        if t.value in _ASSIGN_OPS:
            return t.value, 1
        if t.value == ">":
            t1, t2, t3 = self.peek(1), self.peek(2), self.peek(3)
            if t1.value == ">" and t1.start == t.end:
                if t2.value == ">" and t2.start == t1.end:
                    if t3.value == "=" and t3.start == t2.end:
                        return ">>>=", 4
                elif t2.value == "=" and t2.start == t1.end:
                    return ">>=", 3
        return None

    def try_lambda(self) -> SynNode | None:
        t = self.cur()
        if t.type == IDENT and self.peek(1).value == "->":
            self.i += 2
            param = self.node("Parameter", t.start, t.end, [], name=t.value,
                              modifiers=[], type_sig="", primitive=False,
                              untyped_lambda=True)
            body = self.lambda_body()
            return self.node("LambdaExpr", t.start, self.prev_end(),
                             [param, body])
        if t.value == "(" and t.type == OP:
            j = self.i + 1
            depth = 1
            while depth > 0 and self.toks[j].type != EOF:
                v = self.toks[j].value
                if v == "(":
                    depth += 1
                elif v == ")":
                    depth -= 1
                j += 1
            if self.toks[j].value == "->" and self.toks[j].type == OP:
                self.expect("(")
                params = []
                if not self.at(")"):
                    params.append(self.lambda_parameter())
                    while self.accept(","):
                        params.append(self.lambda_parameter())
                self.expect(")")
                self.expect("->")
                body = self.lambda_body()
                return self.node("LambdaExpr", t.start, self.prev_end(),
                                 params + [body])
        return None

    def lambda_parameter(self) -> SynNode:
        start = self.cur().start
        if (self.at_ident() and self.peek(1).value in (",", ")")
                and self.peek(1).type == OP):
            name_tok = self.expect_ident()
            return self.node("Parameter", start, name_tok.end, [],
                             name=name_tok.value, modifiers=[], type_sig="",
                             primitive=False, untyped_lambda=True)
        mods, annos, _ = self.modifiers()
        ptype = self.parse_type(allow_var=True)
        if ptype.type == "VarType":
            name_tok = self.expect_ident()
            return self.node("Parameter", start, self.prev_end(),
                             list(annos) + [ptype], name=name_tok.value,
                             modifiers=mods, type_sig="", primitive=False,
                             untyped_lambda=True)
        varargs = self.accept("...")
        name_tok = self.expect_ident()
        dims = self.extra_dims()
        sig = ptype.info.get("type_sig", "") + "[]" * dims + ("[]" if varargs else "")
        return self.node("Parameter", start, self.prev_end(),
                         list(annos) + [ptype], name=name_tok.value,
                         modifiers=mods, varargs=varargs, type_sig=sig,
                         primitive=bool(ptype.info.get("primitive")) and dims == 0)

    def lambda_body(self) -> SynNode:
        if self.at("{"):
            return self.block()
        return self.expression()

    def conditional(self) -> SynNode:
        cond = self.binary(1)
        if self.at("?"):
            self.expect("?")
            then = self.expression()
            self.expect(":")
            other = self.expression()
            return self.node("ConditionalExpr", cond.start, self.prev_end(),
                             [cond, then, other])
        return cond

    def peek_binop(self) -> tuple[str, int] | None:
        t = self.cur()
        if t.type == KEYWORD and t.value == "instanceof":
            return "instanceof", 1
        if t.type != OP:
            return None
        if t.value == ">":
            t1 = self.peek(1)
            if t1.value == ">" and t1.type == OP and t1.start == t.end:
                t2 = self.peek(2)
                if t2.value == ">" and t2.type == OP and t2.start == t1.end:
                    t3 = self.peek(3)
                    if t3.value == "=" and t3.start == t2.end:
                        return None  # >>>= assignment
                    return ">>>", 3
                if t2.value == "=" and t2.type == OP and t2.start == t1.end:
                    return None  # >>= assignment
                return ">>", 2
            if t1.value == "=" and t1.type == OP and t1.start == t.end:
                return ">=", 2
            return ">", 1
        if t.value in _PREC:
            return t.value, 1
        return None

    def binary(self, min_prec: int) -> SynNode:
        lhs = self.unary()
        while True:
            got = self.peek_binop()
            if got is None:
                break
            op, ntok = got
            prec = _PREC[op]
            if prec < min_prec:
                break
            self.i += ntok
            if op == "instanceof":
                rtype = self.parse_type()
                children = [lhs, rtype]
                pattern = None
                if self.at_ident():
                    pattern = self.expect_ident().value
                lhs = self.node("InstanceOfExpr", lhs.start, self.prev_end(),
                                children, pattern=pattern)
                continue
            rhs = self.binary(prec + 1)
            lhs = self.node("BinaryExpr", lhs.start, self.prev_end(),
                            [lhs, rhs], op=op)
        return lhs

    def unary(self) -> SynNode:
        t = self.cur()
        if t.type == OP and t.value in ("+", "-", "!", "~", "++", "--"):
            self.i += 1
            operand = self.unary()
            return self.node("UnaryExpr", t.start, self.prev_end(), [operand],
                             op=t.value, prefix=True)
        if t.type == OP and t.value == "(":
            cast = self.try_cast()
            if cast is not None:
                return cast
        return self.postfix()

    _CAST_FOLLOW_OPS = frozenset(["(", "!", "~"])

    def try_cast(self) -> SynNode | None:
        save = self.i
        start = self.cur().start
        try:
            self.expect("(")
            ctype = self.parse_type()
            types = [ctype]
            while self.accept("&"):
                types.append(self.parse_type())
            self.expect(")")
        except JavaParseError:
            self.i = save
            return None
        nxt = self.cur()
        primitive = bool(ctype.info.get("primitive")) and len(types) == 1
        ok = (
            nxt.type in (IDENT, INT_LIT, FLOAT_LIT, CHAR_LIT, STRING_LIT, TEXT_BLOCK)
            or (nxt.type == KEYWORD and nxt.value in
                ("this", "super", "new", "null", "true", "false"))
            or (nxt.type == OP and nxt.value in self._CAST_FOLLOW_OPS)
            or (primitive and nxt.type == OP and nxt.value in ("+", "-"))
        )
        if not ok:
            self.i = save
            return None
        if len(types) > 1:
            tnode = self.node("IntersectionType", types[0].start,
                              types[-1].end, types)
        else:
            tnode = ctype
        operand = self.unary()
        return self.node("CastExpr", start, self.prev_end(), [tnode, operand])

    def postfix(self) -> SynNode:
        e = self.primary()
        while True:
            t = self.cur()
            if t.type == OP and t.value == ".":
                nxt = self.peek(1)
                if nxt.type == IDENT:
                    if self.peek(2).value == "(" and self.peek(2).type == OP:
                        self.i += 2
                        args = self.arguments()
                        e = self.node("MethodCallExpr", e.start, self.prev_end(),
                                      [e] + args, name=nxt.value,
                                      scope_expr=True)
                    else:
                        self.i += 2
                        e = self.node("FieldAccessExpr", e.start, self.prev_end(),
                                      [e], name=nxt.value)
                    continue
                if nxt.type == KEYWORD and nxt.value == "this":
                    self.i += 2
                    e = self.node("ThisExpr", e.start, self.prev_end(), [e],
                                  qualified=True)
                    continue
                if nxt.type == KEYWORD and nxt.value == "super":
                    self.i += 2
                    e = self.node("SuperExpr", e.start, self.prev_end(), [e])
                    continue
                if nxt.type == KEYWORD and nxt.value == "new":
                    self.i += 2
                    e = self.object_creation(e.start, scope=e)
                    continue
                if nxt.type == KEYWORD and nxt.value == "class":
                    self.i += 2
                    e = self.node("ClassExpr", e.start, self.prev_end(), [e])
                    continue
                if nxt.type == OP and nxt.value == "<":
                    # explicit generic method call: obj.<T>m(...)
                    save = self.i
                    self.i += 1
                    try:
                        self.type_args()
                        mname = self.expect_ident()
                        args = self.arguments()
                        e = self.node("MethodCallExpr", e.start, self.prev_end(),
                                      [e] + args, name=mname.value,
                                      scope_expr=True)
                        continue
                    except JavaParseError:
                        self.i = save
                self.error("expected member after '.'")
            if t.type == OP and t.value == "::":
                self.i += 1
                if self.at("<"):
                    self.type_args()
                if self.at("new"):
                    self.i += 1
                    mname = "new"
                else:
                    mname = self.expect_ident().value
                scope = e
                if e.type == "NameExpr" and e.name and e.name[0].isupper():
                    scope = self.node("TypeExpr", e.start, e.end, [e])
                e = self.node("MethodRefExpr", e.start, self.prev_end(),
                              [scope], name=mname)
                continue
            if t.type == OP and t.value == "[" and not (
                    self.peek(1).value == "]" and self.peek(1).type == OP):
                self.i += 1
                idx = self.expression()
                self.expect("]")
                e = self.node("ArrayAccessExpr", e.start, self.prev_end(),
                              [e, idx])
                continue
            if t.type == OP and t.value == "(" and e.type == "NameExpr":
                args = self.arguments()
                e = self.node("MethodCallExpr", e.start, self.prev_end(),
                              args, name=e.name, scope_expr=False)
                continue
            if t.type == OP and t.value in ("++", "--"):
                self.i += 1
                e = self.node("UnaryExpr", e.start, self.prev_end(), [e],
                              op=t.value, prefix=False)
                continue
            break
        return e

    def arguments(self) -> list[SynNode]:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.expression())
            while self.accept(","):
                args.append(self.expression())
        self.expect(")")
        return args

    def primary(self) -> SynNode:
        t = self.cur()
        if t.type == INT_LIT:
            self.i += 1
            kind = "LongLiteralExpr" if t.value[-1:] in ("l", "L") else "IntegerLiteralExpr"
            return self.node(kind, t.start, t.end, value=t.value)
        if t.type == FLOAT_LIT:
            self.i += 1
            return self.node("DoubleLiteralExpr", t.start, t.end, value=t.value)
        if t.type == CHAR_LIT:
            self.i += 1
            return self.node("CharLiteralExpr", t.start, t.end, value=t.value)
        if t.type == STRING_LIT:
            self.i += 1
            return self.node("StringLiteralExpr", t.start, t.end, value=t.value)
        if t.type == TEXT_BLOCK:
            self.i += 1
            return self.node("TextBlockExpr", t.start, t.end, value=t.value)
        if t.type == KEYWORD:
            if t.value == "null":
                self.i += 1
                return self.node("NullLiteralExpr", t.start, t.end)
            if t.value in ("true", "false"):
                self.i += 1
                return self.node("BooleanLiteralExpr", t.start, t.end,
                                 value=t.value)
            if t.value == "this":
                self.i += 1
                return self.node("ThisExpr", t.start, t.end)
            if t.value == "super":
                self.i += 1
                return self.node("SuperExpr", t.start, t.end)
            if t.value == "new":
                return self.object_creation(t.start, scope=None)
            if t.value == "switch":
                stmt = self.switch_stmt()
                stmt.type = "SwitchExpr"
                return stmt
            if t.value in PRIMITIVES or t.value == "void":
                # primitive class literal: int.class, void.class
                ptype = self.parse_type(allow_void=True)
                if self.at(".") and self.peek(1).value == "class":
                    self.i += 2
                    return self.node("ClassExpr", t.start, self.prev_end(),
                                     [ptype])
                self.error("unexpected primitive type in expression")
        if t.type == OP and t.value == "(":
            self.i += 1
            inner = self.expression()
            self.expect(")")
            return self.node("EnclosedExpr", t.start, self.prev_end(), [inner])
        if t.type == IDENT:
            self.i += 1
            return self.node("NameExpr", t.start, t.end, name=t.value)
        self.error(f"unexpected token '{t.value or 'eof'}' in expression")
        raise AssertionError

    def object_creation(self, start: int, scope: SynNode | None) -> SynNode:
        self.expect("new")
        ntype = self.parse_type()
        children: list[SynNode] = ([scope] if scope is not None else [])
        if self.at("(") :
            children.append(ntype)
            children.extend(self.arguments())
            anon = None
            if self.at("{"):
                anon = self.class_body(ntype.info.get("type_sig", ""))
                children.extend(anon)
            return self.node(
                "ObjectCreationExpr", start, self.prev_end(), children,
                name=ntype.info.get("type_sig", ""),
                anonymous=anon is not None)
        # array creation: `new T[expr]...[]... { ... }?`
        levels = []
        base_type = ntype
        # parse_type greedily consumed `[]` pairs; unwrap them into empty levels
        trailing_empty = []
        while base_type.type == "ArrayType":
            trailing_empty.append(base_type)
            base_type = base_type.children[0]
        children.append(base_type)
        while self.at("[") :
            lstart = self.cur().start
            self.expect("[")
            lchildren = []
            if not self.at("]"):
                lchildren.append(self.expression())
            self.expect("]")
            levels.append(self.node("ArrayCreationLevel", lstart,
                                    self.prev_end(), lchildren))
        for at_node in trailing_empty:
            levels.append(self.node("ArrayCreationLevel", at_node.start,
                                    at_node.end, []))
        children.extend(levels)
        if self.at("{"):
            children.append(self.array_initializer())
        if not levels:
            self.error("expected '[' or '(' after 'new T'")
        return self.node("ArrayCreationExpr", start, self.prev_end(), children,
                         name=base_type.info.get("type_sig", ""))
