use super::{LangError, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(u64),
    KwFn,
    KwIf,
    KwElse,
    KwWhile,
    KwReturn,
    KwAssert,
    KwAbort,
    KwInput,
    KwChooseConcrete,
    KwAs,
    Type(&'static str),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Arrow,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Amp,
    Pipe,
    Caret,
    Tilde,
    Shl,
    Shr,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Eof => write!(f, "end of input"),
            t => write!(f, "{t:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(text: &str) -> Result<Vec<Token>, LangError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Token { tok: $tok, span: Span { line, col } });
            i += $len;
            col += $len as u32;
        }};
    }

    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '(' => push!(Tok::LParen, 1),
            ')' => push!(Tok::RParen, 1),
            '{' => push!(Tok::LBrace, 1),
            '}' => push!(Tok::RBrace, 1),
            ',' => push!(Tok::Comma, 1),
            ';' => push!(Tok::Semi, 1),
            ':' => push!(Tok::Colon, 1),
            '+' => push!(Tok::Plus, 1),
            '*' => push!(Tok::Star, 1),
            '/' => push!(Tok::Slash, 1),
            '%' => push!(Tok::Percent, 1),
            '^' => push!(Tok::Caret, 1),
            '~' => push!(Tok::Tilde, 1),
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    push!(Tok::Arrow, 2)
                } else {
                    push!(Tok::Minus, 1)
                }
            }
            '=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push!(Tok::EqEq, 2)
                } else {
                    push!(Tok::Assign, 1)
                }
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    push!(Tok::NotEq, 2)
                } else {
                    push!(Tok::Bang, 1)
                }
            }
            '<' => match bytes.get(i + 1) {
                Some(&b'=') => push!(Tok::Le, 2),
                Some(&b'<') => push!(Tok::Shl, 2),
                _ => push!(Tok::Lt, 1),
            },
            '>' => match bytes.get(i + 1) {
                Some(&b'=') => push!(Tok::Ge, 2),
                Some(&b'>') => push!(Tok::Shr, 2),
                _ => push!(Tok::Gt, 1),
            },
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    push!(Tok::AndAnd, 2)
                } else {
                    push!(Tok::Amp, 1)
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    push!(Tok::OrOr, 2)
                } else {
                    push!(Tok::Pipe, 1)
                }
            }
            '0'..='9' => {
                let start = i;
                let span = Span { line, col };
                let mut value: u64;
                if c == '0' && matches!(bytes.get(i + 1), Some(&b'x') | Some(&b'X')) {
                    i += 2;
                    let hstart = i;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_hexdigit() {
                        i += 1;
                    }
                    if i == hstart {
                        return Err(LangError::SyntaxError {
                            span,
                            expected: "hex digits".into(),
                            found: "0x".into(),
                        });
                    }
                    value = u64::from_str_radix(&text[hstart..i], 16).map_err(|_| {
                        LangError::SyntaxError {
                            span,
                            expected: "hex literal within 64 bits".into(),
                            found: text[start..i].into(),
                        }
                    })?;
                } else {
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    value = text[start..i].parse().map_err(|_| LangError::SyntaxError {
                        span,
                        expected: "decimal literal within 64 bits".into(),
                        found: text[start..i].into(),
                    })?;
                }
                let _ = &mut value;
                col += (i - start) as u32;
                out.push(Token { tok: Tok::Number(value), span });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let span = Span { line, col };
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                col += (i - start) as u32;
                let word = &text[start..i];
                let tok = match word {
                    "fn" => Tok::KwFn,
                    "if" => Tok::KwIf,
                    "else" => Tok::KwElse,
                    "while" => Tok::KwWhile,
                    "return" => Tok::KwReturn,
                    "assert" => Tok::KwAssert,
                    "abort" => Tok::KwAbort,
                    "input" => Tok::KwInput,
                    "choose_concrete" => Tok::KwChooseConcrete,
                    "as" => Tok::KwAs,
                    "u8" => Tok::Type("u8"),
                    "u16" => Tok::Type("u16"),
                    "u32" => Tok::Type("u32"),
                    "i8" => Tok::Type("i8"),
                    "i16" => Tok::Type("i16"),
                    "i32" => Tok::Type("i32"),
                    _ => Tok::Ident(word.to_string()),
                };
                out.push(Token { tok, span });
            }
            other => {
                return Err(LangError::SyntaxError {
                    span: Span { line, col },
                    expected: "a token".into(),
                    found: other.to_string(),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col } });
    Ok(out)
}
