"""Tokenizer for ABL source text (UTF-8)."""

from __future__ import annotations

from .errors import AblSyntaxError, ValidationError
from .nodes import Pos

KEYWORDS = {
    "function", "let", "var", "if", "else", "while", "for", "of",
    "return", "true", "false", "null", "this",
}

# Masked out of the grammar entirely; seeing them is a dedicated error so
# ports from event-loop languages fail loudly instead of silently.
FORBIDDEN = {"async", "await"}

TWO_CHAR = {"=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
            "+=", "-=", "*=", "/=", "%="}
ONE_CHAR = set("+-*/%<>=!?:;,.(){}[]")


class Token:
    __slots__ = ("kind", "text", "value", "pos")

    def __init__(self, kind: str, text: str, pos: Pos, value=None):
        self.kind = kind  # ident | keyword | number | string | punct | eof
        self.text = text
        self.value = value
        self.pos = pos

    def __repr__(self):
        return f"Token({self.kind},{self.text!r})"


def tokenize(source: str) -> list:
    toks = []
    i, line, col = 0, 1, 1
    n = len(source)

    def pos() -> Pos:
        return Pos(line, col)

    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c == "/" and i + 1 < n and source[i + 1] == "*":
            start = pos()
            i += 2
            col += 2
            while i < n and not (source[i] == "*" and i + 1 < n and source[i + 1] == "/"):
                if source[i] == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
                i += 1
            if i >= n:
                raise AblSyntaxError("unterminated comment", start.line, start.col)
            i += 2
            col += 2
            continue
        if c.isalpha() or c == "_" or c == "$":
            p = pos()
            j = i
            while j < n and (source[j].isalnum() or source[j] in "_$"):
                j += 1
            word = source[i:j]
            col += j - i
            i = j
            if word in FORBIDDEN:
                raise ValidationError("asyncForbidden",
                                      f"'{word}' is not part of the language",
                                      p.line, p.col)
            kind = "keyword" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, p))
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            p = pos()
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == ".":
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            col += j - i
            i = j
            toks.append(Token("number", text, p, float(text)))
            continue
        if c in "'\"":
            p = pos()
            quote = c
            j = i + 1
            buf = []
            while j < n and source[j] != quote:
                ch = source[j]
                if ch == "\n":
                    raise AblSyntaxError("unterminated string", p.line, p.col)
                if ch == "\\":
                    j += 1
                    if j >= n:
                        break
                    esc = source[j]
                    buf.append({"n": "\n", "t": "\t", "r": "\r",
                                "\\": "\\", "'": "'", '"': '"'}.get(esc, esc))
                else:
                    buf.append(ch)
                j += 1
            if j >= n:
                raise AblSyntaxError("unterminated string", p.line, p.col)
            text = source[i:j + 1]
            col += j + 1 - i
            i = j + 1
            toks.append(Token("string", text, p, "".join(buf)))
            continue
        if source[i:i + 2] in TWO_CHAR:
            toks.append(Token("punct", source[i:i + 2], pos()))
            i += 2
            col += 2
            continue
        if c in ONE_CHAR:
            toks.append(Token("punct", c, pos()))
            i += 1
            col += 1
            continue
        raise AblSyntaxError(f"unexpected character {c!r}", line, col)

    toks.append(Token("eof", "", pos()))
    return toks
