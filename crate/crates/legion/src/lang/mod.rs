//! Front end for the `.mini` language: lexing, parsing and lowering to
//! the basic-block IR. The grammar is documented in `docs/grammar.md`.

mod ast;
mod lex;
mod lower;
mod parse;

pub use ast::*;
pub use lower::lower;

use thiserror::Error;

/// A program source together with its origin (for error reporting).
#[derive(Debug, Clone)]
pub struct SourceProgram {
    pub text: String,
    pub origin: String,
}

impl SourceProgram {
    pub fn from_text(text: impl Into<String>) -> Self {
        SourceProgram { text: text.into(), origin: "<memory>".into() }
    }

    pub fn from_file(path: &std::path::Path) -> std::io::Result<Self> {
        Ok(SourceProgram {
            text: std::fs::read_to_string(path)?,
            origin: path.display().to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("syntax error at {span}: expected {expected}, found {found}")]
    SyntaxError { span: Span, expected: String, found: String },
    #[error("unknown identifier `{name}` at {span}")]
    UnknownIdentifier { name: String, span: Span },
    #[error("type mismatch at {span}: {msg}")]
    TypeMismatch { span: Span, msg: String },
    #[error("invalid program: {0}")]
    Program(String),
}

/// Parse a source program into a checked AST.
///
/// Semantic checks (identifier resolution, width checking) run as part of
/// parsing; a returned AST always lowers cleanly.
pub fn parse(source: &SourceProgram) -> Result<Ast, LangError> {
    if source.text.trim().is_empty() {
        return Err(LangError::Program("empty source".into()));
    }
    let tokens = lex::lex(&source.text)?;
    let ast = parse::parse_tokens(&tokens)?;
    // Lower once to surface name/type errors at parse time.
    lower::lower(&ast)?;
    Ok(ast)
}
