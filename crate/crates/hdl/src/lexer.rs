use crate::HdlError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// System task name without the leading `$`.
    SysIdent(String),
    /// Raw literal text, underscores and base markers included.
    Number(String),
    /// String contents with standard escapes resolved; `%` sequences kept.
    Str(String),
    Sym(&'static str),
    Kw(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(n) => format!("identifier `{n}`"),
            Tok::SysIdent(n) => format!("`${n}`"),
            Tok::Number(n) => format!("literal `{n}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Kw(k) => format!("`{k}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

/// Reserved words. Everything here is refused as an identifier; the parser
/// decides which of them are part of the supported subset.
const KEYWORDS: &[&str] = &[
    "module", "endmodule", "input", "output", "inout", "wire", "reg", "integer", "real", "time",
    "assign", "always", "initial", "begin", "end", "if", "else", "case", "casez", "casex",
    "endcase", "default", "posedge", "negedge", "edge", "or", "and", "not", "nand", "nor", "xor",
    "xnor", "buf", "for", "while", "repeat", "forever", "fork", "join", "localparam", "parameter",
    "generate", "endgenerate", "genvar", "function", "endfunction", "task", "endtask", "specify",
    "endspecify", "defparam", "signed", "wait", "disable", "deassign", "force", "release",
];

const SYMS3: &[&str] = &["===", "!==", "<<<", ">>>"];
const SYMS2: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "~^", "^~", "~&", "~|", "**", "+:", "-:",
];
const SYMS1: &[&str] = &[
    "(", ")", "[", "]", "{", "}", ";", ",", ".", ":", "#", "?", "=", "@", "+", "-", "*", "/", "%",
    "&", "|", "^", "~", "!", "<", ">",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn err(&self, msg: impl Into<String>) -> HdlError {
        HdlError::Lex {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), HdlError> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(b'/') if self.peek2() == Some(b'*') => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match self.peek() {
                            Some(b'*') if self.peek2() == Some(b'/') => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            Some(_) => {
                                self.bump();
                            }
                            None => {
                                return Err(HdlError::Lex {
                                    line,
                                    col,
                                    msg: "unterminated block comment".to_string(),
                                })
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn lex_ident(&mut self) -> Token {
        let (line, col) = (self.line, self.col);
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_alphanumeric() || b == b'_' || b == b'$' {
                self.bump();
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let tok = match KEYWORDS.iter().find(|&&k| k == text) {
            Some(&k) => Tok::Kw(k),
            None => Tok::Ident(text.to_string()),
        };
        Token { tok, line, col }
    }

    fn lex_number(&mut self) -> Result<Token, HdlError> {
        let (line, col) = (self.line, self.col);
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() || b == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        if self.peek() == Some(b'\'') {
            self.bump();
            match self.peek() {
                Some(b) if b.is_ascii_alphabetic() => {
                    self.bump();
                }
                _ => return Err(self.err("expected base character after `'`")),
            }
            let digits_start = self.pos;
            while let Some(b) = self.peek() {
                if b.is_ascii_alphanumeric() || b == b'_' || b == b'?' {
                    self.bump();
                } else {
                    break;
                }
            }
            if self.pos == digits_start {
                return Err(self.err("expected digits after literal base"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        Ok(Token {
            tok: Tok::Number(text.to_string()),
            line,
            col,
        })
    }

    fn lex_string(&mut self) -> Result<Token, HdlError> {
        let (line, col) = (self.line, self.col);
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                Some(b'"') => break,
                Some(b'\\') => match self.bump() {
                    Some(b'n') => out.push('\n'),
                    Some(b't') => out.push('\t'),
                    Some(b'\\') => out.push('\\'),
                    Some(b'"') => out.push('"'),
                    Some(b) => {
                        return Err(self.err(format!("unknown string escape `\\{}`", b as char)))
                    }
                    None => return Err(self.err("unterminated string literal")),
                },
                Some(b'\n') | None => {
                    return Err(HdlError::Lex {
                        line,
                        col,
                        msg: "unterminated string literal".to_string(),
                    })
                }
                Some(b) => out.push(b as char),
            }
        }
        Ok(Token {
            tok: Tok::Str(out),
            line,
            col,
        })
    }

    fn lex_sym(&mut self) -> Result<Token, HdlError> {
        let (line, col) = (self.line, self.col);
        let rest = &self.src[self.pos..];
        for &s in SYMS3 {
            if rest.starts_with(s.as_bytes()) {
                for _ in 0..3 {
                    self.bump();
                }
                return Ok(Token {
                    tok: Tok::Sym(s),
                    line,
                    col,
                });
            }
        }
        for &s in SYMS2 {
            if rest.starts_with(s.as_bytes()) {
                for _ in 0..2 {
                    self.bump();
                }
                return Ok(Token {
                    tok: Tok::Sym(s),
                    line,
                    col,
                });
            }
        }
        for &s in SYMS1 {
            if rest.starts_with(s.as_bytes()) {
                self.bump();
                return Ok(Token {
                    tok: Tok::Sym(s),
                    line,
                    col,
                });
            }
        }
        Err(self.err(format!(
            "unexpected character `{}`",
            self.peek().unwrap() as char
        )))
    }

    fn next_token(&mut self) -> Result<Token, HdlError> {
        self.skip_trivia()?;
        let b = match self.peek() {
            None => {
                return Ok(Token {
                    tok: Tok::Eof,
                    line: self.line,
                    col: self.col,
                })
            }
            Some(b) => b,
        };
        if b.is_ascii_alphabetic() || b == b'_' {
            return Ok(self.lex_ident());
        }
        if b == b'$' {
            let (line, col) = (self.line, self.col);
            self.bump();
            let start = self.pos;
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == b'_' {
                    self.bump();
                } else {
                    break;
                }
            }
            if self.pos == start {
                return Err(self.err("expected system task name after `$`"));
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok(Token {
                tok: Tok::SysIdent(name.to_string()),
                line,
                col,
            });
        }
        if b.is_ascii_digit() || (b == b'\'' && self.peek2().is_some_and(|c| c.is_ascii_alphabetic()))
        {
            return self.lex_number();
        }
        if b == b'"' {
            return self.lex_string();
        }
        if !b.is_ascii() {
            return Err(self.err("non-ASCII character"));
        }
        self.lex_sym()
    }
}

pub fn lex(src: &str) -> Result<Vec<Token>, HdlError> {
    let mut lx = Lexer::new(src);
    let mut out = Vec::new();
    loop {
        let t = lx.next_token()?;
        let done = t.tok == Tok::Eof;
        out.push(t);
        if done {
            return Ok(out);
        }
    }
}
