//! Tokenizer for the `.dag` format. Every token carries its 1-based
//! line/column so later stages can point at the input.

use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Real(f64),
    Str(String),
    Arrow,
    ModArrow,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Eq,
    Comma,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Real(v) => format!("number `{v:?}`"),
            Tok::Str(_) => "string literal".to_owned(),
            Tok::Arrow => "`->`".to_owned(),
            Tok::ModArrow => "`~>`".to_owned(),
            Tok::LBrace => "`{`".to_owned(),
            Tok::RBrace => "`}`".to_owned(),
            Tok::LParen => "`(`".to_owned(),
            Tok::RParen => "`)`".to_owned(),
            Tok::LBracket => "`[`".to_owned(),
            Tok::RBracket => "`]`".to_owned(),
            Tok::Eq => "`=`".to_owned(),
            Tok::Comma => "`,`".to_owned(),
            Tok::Eof => "end of input".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

struct Scanner<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn err(&self, line: usize, col: usize, message: impl Into<String>) -> DslError {
        DslError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }
}

pub(crate) fn lex(text: &str) -> Result<Vec<Token>, DslError> {
    let mut s = Scanner::new(text);
    let mut out = Vec::new();

    loop {
        // Skip whitespace and comments.
        loop {
            match s.peek() {
                Some(c) if c.is_whitespace() => {
                    s.bump();
                }
                Some('#') => {
                    while let Some(c) = s.peek() {
                        if c == '\n' {
                            break;
                        }
                        s.bump();
                    }
                }
                _ => break,
            }
        }

        let (line, col) = (s.line, s.col);
        let Some(c) = s.peek() else {
            out.push(Token {
                tok: Tok::Eof,
                line,
                col,
            });
            return Ok(out);
        };

        let tok = match c {
            '{' => {
                s.bump();
                Tok::LBrace
            }
            '}' => {
                s.bump();
                Tok::RBrace
            }
            '(' => {
                s.bump();
                Tok::LParen
            }
            ')' => {
                s.bump();
                Tok::RParen
            }
            '[' => {
                s.bump();
                Tok::LBracket
            }
            ']' => {
                s.bump();
                Tok::RBracket
            }
            '=' => {
                s.bump();
                Tok::Eq
            }
            ',' => {
                s.bump();
                Tok::Comma
            }
            '~' => {
                s.bump();
                if s.peek() == Some('>') {
                    s.bump();
                    Tok::ModArrow
                } else {
                    return Err(s.err(line, col, "expected `~>`"));
                }
            }
            '-' => {
                s.bump();
                match s.peek() {
                    Some('>') => {
                        s.bump();
                        Tok::Arrow
                    }
                    Some(c2) if c2.is_ascii_digit() || c2 == '.' => {
                        lex_number(&mut s, line, col, "-")?
                    }
                    _ => return Err(s.err(line, col, "expected `->` or a number after `-`")),
                }
            }
            '+' => {
                s.bump();
                match s.peek() {
                    Some(c2) if c2.is_ascii_digit() || c2 == '.' => {
                        lex_number(&mut s, line, col, "+")?
                    }
                    _ => return Err(s.err(line, col, "expected a number after `+`")),
                }
            }
            '"' => lex_string(&mut s, line, col)?,
            c if c.is_ascii_digit() || c == '.' => lex_number(&mut s, line, col, "")?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(c) = s.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        s.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(ident)
            }
            other => return Err(s.err(line, col, format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, line, col });
    }
}

fn lex_number(s: &mut Scanner, line: usize, col: usize, sign: &str) -> Result<Tok, DslError> {
    let mut raw = sign.to_owned();
    let mut digits = 0usize;
    while let Some(c) = s.peek() {
        if c.is_ascii_digit() {
            raw.push(c);
            digits += 1;
            s.bump();
        } else {
            break;
        }
    }
    if s.peek() == Some('.') {
        raw.push('.');
        s.bump();
        while let Some(c) = s.peek() {
            if c.is_ascii_digit() {
                raw.push(c);
                digits += 1;
                s.bump();
            } else {
                break;
            }
        }
    }
    if digits == 0 {
        return Err(s.err(line, col, "malformed number"));
    }
    if matches!(s.peek(), Some('e') | Some('E')) {
        raw.push('e');
        s.bump();
        if matches!(s.peek(), Some('+') | Some('-')) {
            raw.push(s.bump().unwrap());
        }
        let mut exp_digits = 0usize;
        while let Some(c) = s.peek() {
            if c.is_ascii_digit() {
                raw.push(c);
                exp_digits += 1;
                s.bump();
            } else {
                break;
            }
        }
        if exp_digits == 0 {
            return Err(s.err(line, col, "malformed exponent"));
        }
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Tok::Real(v)),
        _ => Err(s.err(line, col, format!("number `{raw}` is out of range"))),
    }
}

fn lex_string(s: &mut Scanner, line: usize, col: usize) -> Result<Tok, DslError> {
    s.bump(); // opening quote
    let mut value = String::new();
    loop {
        match s.bump() {
            None => return Err(s.err(line, col, "unterminated string literal")),
            Some('\n') => return Err(s.err(line, col, "string literal contains a raw newline")),
            Some('"') => return Ok(Tok::Str(value)),
            Some('\\') => match s.bump() {
                Some('"') => value.push('"'),
                Some('\\') => value.push('\\'),
                Some(other) => {
                    return Err(s.err(
                        line,
                        col,
                        format!("unsupported escape `\\{other}` in string literal"),
                    ))
                }
                None => return Err(s.err(line, col, "unterminated string literal")),
            },
            Some(c) => value.push(c),
        }
    }
}
