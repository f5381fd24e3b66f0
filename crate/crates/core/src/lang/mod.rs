//! Protocol language front end: tokens, syntax tree, parser and static checks.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod validate;

pub use ast::{Action, GateKind, ProcessTerm, Program, Sort, SourceFile, Span};
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse, parse_term, ParseError};
pub use validate::{validate, CheckedProgram, InputDecl, OutputDecl, Rule, ValidationError};

use thiserror::Error;

/// Anything that can go wrong turning source text into a checked program.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("lex error at {0}")]
    Lex(#[from] LexError),
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("invalid program: {0}")]
    Validation(#[from] ValidationError),
    #[error("no definition named `{0}`")]
    MissingDefinition(String),
}

/// Tokenize and parse a protocol file.
pub fn parse_source(source: &str) -> Result<SourceFile, FrontendError> {
    Ok(parse(&tokenize(source)?)?)
}

/// Parse source and return the definition named `name`, falling back to the
/// sole definition when the file holds exactly one.
pub fn load_definition(source: &str, name: &str) -> Result<Program, FrontendError> {
    let file = parse_source(source)?;
    if let Some(p) = file.get(name) {
        return Ok(p.clone());
    }
    match file.definitions.as_slice() {
        [only] => Ok(only.clone()),
        _ => Err(FrontendError::MissingDefinition(name.to_string())),
    }
}
