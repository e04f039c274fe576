//! Comment- and literal-aware tokenizer for Go source, plus extraction of
//! top-level function and method declarations.
//!
//! This is not a grammar. It recognizes just enough of the lexical structure
//! (comments, interpreted/raw strings, rune literals, automatic semicolons)
//! to track delimiter nesting reliably, then pattern-matches declarations at
//! the top level. Files that do not compile are still handled as long as
//! their braces balance.

use super::id::CodeArtifactId;
use super::{FunctionSig, RepoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident,
    Literal,
    Op,
    /// Explicit `;` or one inserted at a line end.
    Semi,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
    pub line: usize,
}

impl Token<'_> {
    fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text == op
    }

    fn is_ident(&self, name: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == name
    }
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    tokens: Vec<Token<'a>>,
    semi_pending: bool,
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            tokens: Vec::new(),
            semi_pending: false,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn newline(&mut self) {
        if self.semi_pending {
            self.tokens.push(Token {
                kind: TokenKind::Semi,
                text: "\n",
                start: self.pos,
                end: self.pos,
                line: self.line,
            });
            self.semi_pending = false;
        }
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: usize) {
        let text = &self.src[start..self.pos];
        self.semi_pending = match kind {
            TokenKind::Ident if is_keyword(text) => {
                matches!(text, "break" | "continue" | "fallthrough" | "return")
            }
            TokenKind::Ident | TokenKind::Literal => true,
            TokenKind::Op => matches!(text, ")" | "]" | "}" | "++" | "--"),
            TokenKind::Semi => false,
        };
        self.tokens.push(Token {
            kind,
            text,
            start,
            end: self.pos,
            line,
        });
    }

    /// Consumes a quoted literal body up to the closing `quote`. Interpreted
    /// strings and runes stop at a newline when unterminated.
    fn quoted(&mut self, quote: u8) {
        self.pos += 1;
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'\\' => self.pos = (self.pos + 2).min(self.bytes.len()),
                b'\n' => return,
                b if b == quote => {
                    self.pos += 1;
                    return;
                }
                _ => self.pos += 1,
            }
        }
    }

    fn run(mut self) -> Vec<Token<'a>> {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            let start = self.pos;
            let line = self.line;
            match b {
                b'\n' => {
                    self.newline();
                    self.pos += 1;
                    self.line += 1;
                }
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'/' if self.bytes.get(self.pos + 1) == Some(&b'/') => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'/' if self.bytes.get(self.pos + 1) == Some(&b'*') => {
                    let rest = &self.src[self.pos + 2..];
                    let len = rest.find("*/").map(|i| i + 4).unwrap_or(rest.len() + 2);
                    let body = &self.src[self.pos..self.pos + len];
                    let newlines = body.bytes().filter(|&c| c == b'\n').count();
                    if newlines > 0 {
                        self.newline();
                        self.line += newlines;
                    }
                    self.pos += len;
                }
                b'"' => {
                    self.quoted(b'"');
                    self.push(TokenKind::Literal, start, line);
                }
                b'\'' => {
                    self.quoted(b'\'');
                    self.push(TokenKind::Literal, start, line);
                }
                b'`' => {
                    let rest = &self.src[self.pos + 1..];
                    let len = rest.find('`').map(|i| i + 2).unwrap_or(rest.len() + 1);
                    self.line += self.src[self.pos..self.pos + len].bytes().filter(|&c| c == b'\n').count();
                    self.pos += len;
                    self.push(TokenKind::Literal, start, line);
                }
                b'0'..=b'9' => {
                    self.number();
                    self.push(TokenKind::Literal, start, line);
                }
                b'.' if self.bytes.get(self.pos + 1).is_some_and(u8::is_ascii_digit) => {
                    self.number();
                    self.push(TokenKind::Literal, start, line);
                }
                b'+' | b'-' if self.bytes.get(self.pos + 1) == Some(&b) => {
                    self.pos += 2;
                    self.push(TokenKind::Op, start, line);
                }
                b';' => {
                    self.pos += 1;
                    self.semi_pending = false;
                    self.tokens.push(Token {
                        kind: TokenKind::Semi,
                        text: ";",
                        start,
                        end: self.pos,
                        line,
                    });
                }
                _ if b.is_ascii() => {
                    if is_ident_start(b as char) {
                        self.ident();
                        self.push(TokenKind::Ident, start, line);
                    } else {
                        self.pos += 1;
                        self.push(TokenKind::Op, start, line);
                    }
                }
                _ => {
                    let c = self.peek_char().unwrap_or('\u{fffd}');
                    if is_ident_start(c) {
                        self.ident();
                        self.push(TokenKind::Ident, start, line);
                    } else {
                        self.pos += c.len_utf8();
                    }
                }
            }
        }
        self.newline();
        self.tokens
    }

    fn ident(&mut self) {
        while let Some(c) = self.peek_char() {
            if is_ident_continue(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn number(&mut self) {
        let hex = self.bytes[self.pos] == b'0' && matches!(self.bytes.get(self.pos + 1), Some(b'x' | b'X'));
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            let exponent = if hex { matches!(b, b'p' | b'P') } else { matches!(b, b'e' | b'E') };
            if exponent && matches!(self.bytes.get(self.pos + 1), Some(b'+' | b'-')) {
                self.pos += 2;
            } else if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' {
                self.pos += 1;
            } else {
                break;
            }
        }
    }
}

fn is_keyword(text: &str) -> bool {
    matches!(
        text,
        "break"
            | "case"
            | "chan"
            | "const"
            | "continue"
            | "default"
            | "defer"
            | "else"
            | "fallthrough"
            | "for"
            | "func"
            | "go"
            | "goto"
            | "if"
            | "import"
            | "interface"
            | "map"
            | "package"
            | "range"
            | "return"
            | "select"
            | "struct"
            | "switch"
            | "type"
            | "var"
    )
}

pub(crate) fn tokenize(src: &str) -> Vec<Token<'_>> {
    Lexer::new(src).run()
}

fn closer_for(open: &str) -> Option<&'static str> {
    match open {
        "(" => Some(")"),
        "[" => Some("]"),
        "{" => Some("}"),
        _ => None,
    }
}

/// Index of the token that closes the group opened at `open_idx`, or `None`
/// if the input ends first.
fn matching_close(tokens: &[Token<'_>], open_idx: usize) -> Option<usize> {
    let mut stack: Vec<&str> = Vec::new();
    for (i, tok) in tokens.iter().enumerate().skip(open_idx) {
        if tok.kind != TokenKind::Op {
            continue;
        }
        if let Some(close) = closer_for(tok.text) {
            stack.push(close);
        } else if matches!(tok.text, ")" | "]" | "}") {
            if let Some(pos) = stack.iter().rposition(|c| *c == tok.text) {
                stack.truncate(pos);
            }
            if stack.is_empty() {
                return Some(i);
            }
        }
    }
    None
}

/// Result of matching one declaration starting at a `func` keyword.
enum Decl {
    WithBody { sig: FunctionSig, next: usize },
    Bodyless { next: usize },
    /// A body or type literal brace never closes.
    Unterminated,
    NotADecl,
}

fn collapse_whitespace(text: &str) -> String {
    if !text.contains('\n') {
        return text.to_string();
    }
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical receiver type: the receiver variable is dropped and the
/// remaining tokens are joined without whitespace.
pub(crate) fn canonical_receiver(tokens: &[Token<'_>]) -> String {
    let mut toks: Vec<&Token<'_>> = tokens.iter().filter(|t| t.kind != TokenKind::Semi).collect();
    while toks.last().is_some_and(|t| t.is_op(",")) {
        toks.pop();
    }
    if toks.len() >= 2 && toks[0].kind == TokenKind::Ident && !toks[1].is_op("[") && !toks[1].is_op(".") {
        toks.remove(0);
    }
    toks.iter().map(|t| t.text).collect()
}

/// Canonicalizes a free-form receiver string such as `s *Server` or
/// `*Map[K, V]` the same way declarations are canonicalized.
pub fn canonicalize_receiver_text(text: &str) -> String {
    canonical_receiver(&tokenize(text))
}

fn match_decl(src: &str, tokens: &[Token<'_>], func_idx: usize, file: &CodeArtifactId) -> Decl {
    let mut i = func_idx + 1;
    let mut receiver = None;
    if tokens.get(i).is_some_and(|t| t.is_op("(")) {
        let Some(close) = matching_close(tokens, i) else {
            return Decl::NotADecl;
        };
        let inner_text = src[tokens[i].end..tokens[close].start].trim();
        let canonical = canonical_receiver(&tokens[i + 1..close]);
        if !canonical.is_empty() {
            receiver = Some((collapse_whitespace(inner_text), canonical));
        }
        i = close + 1;
    }
    let Some(name_tok) = tokens.get(i).filter(|t| t.kind == TokenKind::Ident && !is_keyword(t.text)) else {
        return Decl::NotADecl;
    };
    i += 1;
    if tokens.get(i).is_some_and(|t| t.is_op("[")) {
        match matching_close(tokens, i) {
            Some(close) => i = close + 1,
            None => return Decl::NotADecl,
        }
    }
    if !tokens.get(i).is_some_and(|t| t.is_op("(")) {
        return Decl::NotADecl;
    }
    match matching_close(tokens, i) {
        Some(close) => i = close + 1,
        None => return Decl::NotADecl,
    }
    // Result type, then either a body or the end of the declaration.
    while let Some(tok) = tokens.get(i) {
        match tok.kind {
            TokenKind::Semi => return Decl::Bodyless { next: i + 1 },
            TokenKind::Op if tok.text == "(" || tok.text == "[" => match matching_close(tokens, i) {
                Some(close) => i = close + 1,
                None => return Decl::NotADecl,
            },
            TokenKind::Op if tok.text == "{" => {
                let type_literal = i > 0 && (tokens[i - 1].is_ident("struct") || tokens[i - 1].is_ident("interface"));
                let Some(close) = matching_close(tokens, i) else {
                    return Decl::Unterminated;
                };
                if type_literal {
                    i = close + 1;
                    continue;
                }
                let name = name_tok.text.to_string();
                let skeleton_line = match &receiver {
                    Some((verbatim, _)) => format!("func ({verbatim}) {name}(...) {{ ... }}"),
                    None => format!("func {name}(...) {{ ... }}"),
                };
                return Decl::WithBody {
                    sig: FunctionSig {
                        file: file.clone(),
                        name,
                        receiver_type: receiver.map(|(_, canonical)| canonical),
                        line_start: tokens[func_idx].line,
                        line_end: tokens[close].line,
                        skeleton_line,
                    },
                    next: close + 1,
                };
            }
            TokenKind::Op if tok.text == ")" || tok.text == "]" || tok.text == "}" => return Decl::NotADecl,
            _ => i += 1,
        }
    }
    Decl::Bodyless { next: i }
}

/// Every top-level `func` declaration that has a body, in source order.
pub fn extract_function_signatures(file_content: &str, file_id: &CodeArtifactId) -> Result<Vec<FunctionSig>, RepoError> {
    let tokens = tokenize(file_content);
    let mut sigs = Vec::new();
    let mut stack: Vec<&str> = Vec::new();
    let mut last_good_line = 0;
    let mut at_decl_start = true;
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        if stack.is_empty() && at_decl_start && tok.is_ident("func") {
            match match_decl(file_content, &tokens, i, file_id) {
                Decl::WithBody { sig, next } => {
                    last_good_line = sig.line_end;
                    sigs.push(sig);
                    i = next;
                    at_decl_start = false;
                    continue;
                }
                Decl::Bodyless { next } => {
                    last_good_line = tokens[next - 1].line;
                    i = next;
                    at_decl_start = true;
                    continue;
                }
                Decl::Unterminated => {
                    return Err(RepoError::Parse {
                        file: file_id.to_string(),
                        last_good_line,
                    })
                }
                Decl::NotADecl => {}
            }
        }
        match tok.kind {
            TokenKind::Semi => {
                if stack.is_empty() {
                    last_good_line = tok.line;
                }
                at_decl_start = true;
            }
            TokenKind::Op => {
                if let Some(close) = closer_for(tok.text) {
                    stack.push(close);
                } else if matches!(tok.text, ")" | "]" | "}") {
                    if let Some(pos) = stack.iter().rposition(|c| *c == tok.text) {
                        stack.truncate(pos);
                    }
                    if stack.is_empty() {
                        last_good_line = tok.line;
                    }
                }
                at_decl_start = false;
            }
            _ => at_decl_start = false,
        }
        i += 1;
    }
    if stack.contains(&"}") {
        return Err(RepoError::Parse {
            file: file_id.to_string(),
            last_good_line,
        });
    }
    Ok(sigs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file() -> CodeArtifactId {
        CodeArtifactId::file("pkg/f.go").unwrap()
    }

    fn extract(src: &str) -> Vec<FunctionSig> {
        extract_function_signatures(src, &file()).unwrap()
    }

    #[test]
    fn plain_function() {
        let sigs = extract("package p\n\nfunc Add(a, b int) int { return a + b }\n");
        assert_eq!(sigs.len(), 1);
        assert_eq!(sigs[0].name, "Add");
        assert_eq!(sigs[0].receiver_type, None);
        assert_eq!(sigs[0].skeleton_line, "func Add(...) { ... }");
        assert_eq!((sigs[0].line_start, sigs[0].line_end), (3, 3));
    }

    #[test]
    fn method_keeps_receiver_text() {
        let sigs = extract("package p\nfunc (s *Server) Serve() error {\n\treturn nil\n}\n");
        assert_eq!(sigs[0].skeleton_line, "func (s *Server) Serve(...) { ... }");
        assert_eq!(sigs[0].receiver_type.as_deref(), Some("*Server"));
        assert_eq!(sigs[0].id().as_str(), "pkg/f.go::(*Server).Serve");
        assert_eq!((sigs[0].line_start, sigs[0].line_end), (2, 4));
    }

    #[test]
    fn interfaces_and_bodyless_are_skipped() {
        let src = "package p\ntype R interface { Close() error }\nfunc abs(x int64) int64\n";
        assert!(extract(src).is_empty());
    }

    #[test]
    fn generic_receivers_are_canonicalized() {
        let sigs = extract("package p\nfunc (m *Map[K, V]) Get(k K) V { var v V; return v }\n");
        assert_eq!(sigs[0].callable_name(), "(*Map[K,V]).Get");
        let sigs = extract("package p\nfunc (Map[K, V]) Len() int { return 0 }\n");
        assert_eq!(sigs[0].callable_name(), "(Map[K,V]).Len");
    }

    #[test]
    fn type_parameters_with_braces() {
        let sigs = extract("package p\nfunc Max[T interface{ ~int }](a, b T) T {\n\treturn a\n}\n");
        assert_eq!(sigs.len(), 1);
        assert_eq!(sigs[0].name, "Max");
        assert_eq!(sigs[0].skeleton_line, "func Max(...) { ... }");
    }

    #[test]
    fn func_literal_assignments_are_not_declarations() {
        let src = "package p\nvar f = func() int {\n\treturn 1\n}\nvar (\n\tg = func() {}\n)\nfunc H() {}\n";
        let names: Vec<_> = extract(src).into_iter().map(|s| s.name).collect();
        assert_eq!(names, ["H"]);
    }

    #[test]
    fn braces_in_literals_and_comments() {
        let src = "package p\nfunc A() string {\n\ts := \"}\" + `{` + string('}')\n\t// }\n\t/* { */\n\treturn s\n}\nfunc B() {}\n";
        let sigs = extract(src);
        assert_eq!(sigs.len(), 2);
        assert_eq!((sigs[0].line_start, sigs[0].line_end), (2, 7));
    }

    #[test]
    fn unbalanced_braces_report_last_good_line() {
        let src = "package p\n\nfunc A() {}\n\nfunc B() {\n\tif x {\n}\n";
        match extract_function_signatures(src, &file()) {
            Err(RepoError::Parse { file, last_good_line }) => {
                assert_eq!(file, "pkg/f.go");
                assert_eq!(last_good_line, 3);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn receiver_canonicalization() {
        assert_eq!(canonicalize_receiver_text("s *Server"), "*Server");
        assert_eq!(canonicalize_receiver_text("Buffer"), "Buffer");
        assert_eq!(canonicalize_receiver_text("*Map[K, V]"), "*Map[K,V]");
        assert_eq!(canonicalize_receiver_text("m  Map[K, V]"), "Map[K,V]");
        assert_eq!(canonicalize_receiver_text("_ T"), "T");
    }

    #[test]
    fn empty_receiver_list_is_a_plain_function() {
        let sigs = extract("package p
func () f0() {}
");
        assert_eq!(sigs[0].receiver_type, None);
        assert_eq!(sigs[0].skeleton_line, "func f0(...) { ... }");
    }
}
