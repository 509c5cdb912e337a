"""Java source front end: byte-level lexer and recursive-descent parser.

The parser covers a structural subset of Java (classes, interfaces, enums,
generics, lambdas, method references, switch arrows, text blocks). Files
outside the subset raise JavaParseError or UnsupportedConstruct; callers
record those per file instead of aborting a corpus scan.
"""

from .lexer import Token, lex
from .parser import SynNode, parse_compilation_unit

__all__ = ["Token", "lex", "SynNode", "parse_compilation_unit"]
