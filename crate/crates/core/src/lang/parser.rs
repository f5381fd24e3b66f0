//! Recursive-descent parser.
//!
//! ```text
//! file       := definition* | term
//! definition := IDENT '=' term
//! term       := seq ('|' seq)*
//! seq        := 'nil' | '(' term ')' | action '.' seq
//! action     := 'newqubit' IDENT
//!             | 'input' IDENT (':' ('qubit' | 'bit'))?
//!             | 'output' IDENT
//!             | GATE '(' IDENT (',' IDENT)* ')'
//!             | IDENT '!' IDENT
//!             | IDENT '?' IDENT
//!             | IDENT ':=' 'measure' IDENT
//!             | 'if' IDENT 'then' action
//! ```
//!
//! `|` is left-associative and binds looser than `.`. A guard `if c then a`
//! covers exactly the action `a`, not the rest of the sequence.

use std::sync::Arc;

use thiserror::Error;

use super::ast::{Action, ProcessTerm, Program, SourceFile, Sort, Span};
use super::lexer::{Keyword, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}: expected {expected}, found {found}", match .span { Some(s) => s.to_string(), None => "end of input".to_string() })]
pub struct ParseError {
    /// `None` at end of input.
    pub span: Option<Span>,
    pub found: String,
    pub expected: String,
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    inputs: usize,
    outputs: usize,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Token]) -> Self {
        Parser {
            tokens,
            pos: 0,
            inputs: 0,
            outputs: 0,
        }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self, ahead: usize) -> Option<&'a TokenKind> {
        self.tokens.get(self.pos + ahead).map(|t| &t.kind)
    }

    fn error(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(tok) => ParseError {
                span: Some(tok.span),
                found: tok.kind.to_string(),
                expected: expected.to_string(),
            },
            None => ParseError {
                span: None,
                found: "end of input".to_string(),
                expected: expected.to_string(),
            },
        }
    }

    fn expect(&mut self, kind: &TokenKind, expected: &str) -> Result<Span, ParseError> {
        match self.peek() {
            Some(tok) if &tok.kind == kind => {
                self.pos += 1;
                Ok(tok.span)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(name),
                ..
            }) => {
                self.pos += 1;
                Ok(name.clone())
            }
            _ => Err(self.error(expected)),
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.tokens.len()
    }

    fn file(&mut self) -> Result<SourceFile, ParseError> {
        let mut definitions = Vec::new();
        let named = matches!(
            (self.peek_kind(0), self.peek_kind(1)),
            (Some(TokenKind::Ident(_)), Some(TokenKind::Equals))
        );
        if !named && !self.at_end() {
            let body = self.term()?;
            if !self.at_end() {
                return Err(self.error("`|` or end of input"));
            }
            definitions.push(Program::new("Main", body));
            return Ok(SourceFile { definitions });
        }
        while !self.at_end() {
            let name = self.ident("definition name")?;
            self.expect(&TokenKind::Equals, "`=`")?;
            self.inputs = 0;
            self.outputs = 0;
            let body = self.term()?;
            definitions.push(Program::new(name, body));
            if !self.at_end()
                && !matches!(
                    (self.peek_kind(0), self.peek_kind(1)),
                    (Some(TokenKind::Ident(_)), Some(TokenKind::Equals))
                )
            {
                return Err(self.error("`|` or a new definition"));
            }
        }
        Ok(SourceFile { definitions })
    }

    fn term(&mut self) -> Result<ProcessTerm, ParseError> {
        let mut left = self.seq()?;
        while let Some(TokenKind::Bar) = self.peek_kind(0) {
            self.pos += 1;
            let right = self.seq()?;
            left = ProcessTerm::Parallel(Arc::new(left), Arc::new(right));
        }
        Ok(left)
    }

    fn seq(&mut self) -> Result<ProcessTerm, ParseError> {
        match self.peek_kind(0) {
            Some(TokenKind::Keyword(Keyword::Nil)) => {
                self.pos += 1;
                Ok(ProcessTerm::Nil)
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let inner = self.term()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            _ => {
                let span = self.peek().map(|t| t.span).unwrap_or_default();
                let action = self.action()?;
                self.expect(&TokenKind::Dot, "`.`")?;
                let rest = self.seq()?;
                Ok(ProcessTerm::Prefix {
                    action,
                    span,
                    rest: Arc::new(rest),
                })
            }
        }
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        const EXPECTED: &str = "an action or `nil`";
        let Some(tok) = self.peek() else {
            return Err(self.error(EXPECTED));
        };
        match &tok.kind {
            TokenKind::Keyword(Keyword::NewQubit) => {
                self.pos += 1;
                let var = self.ident("qubit variable")?;
                Ok(Action::NewQubit { var })
            }
            TokenKind::Keyword(Keyword::Input) => {
                self.pos += 1;
                let var = self.ident("input variable")?;
                let sort = if let Some(TokenKind::Colon) = self.peek_kind(0) {
                    self.pos += 1;
                    let sort = match self.peek_kind(0) {
                        Some(TokenKind::Ident(s)) if s == "bit" => Sort::Bit,
                        Some(TokenKind::Ident(s)) if s == "qubit" => Sort::Qubit,
                        _ => return Err(self.error("`bit` or `qubit`")),
                    };
                    self.pos += 1;
                    sort
                } else {
                    Sort::Qubit
                };
                let slot = self.inputs;
                self.inputs += 1;
                Ok(Action::Input { var, sort, slot })
            }
            TokenKind::Keyword(Keyword::Output) => {
                self.pos += 1;
                let var = self.ident("output variable")?;
                let slot = self.outputs;
                self.outputs += 1;
                Ok(Action::Output { var, slot })
            }
            TokenKind::Keyword(Keyword::If) => {
                self.pos += 1;
                let cond = self.ident("condition variable")?;
                self.expect(&TokenKind::Keyword(Keyword::Then), "`then`")?;
                let then = self.action()?;
                Ok(Action::If {
                    cond,
                    then: Box::new(then),
                })
            }
            TokenKind::Gate(kind) => {
                let kind = *kind;
                self.pos += 1;
                self.expect(&TokenKind::LParen, "`(`")?;
                let mut operands = vec![self.ident("gate operand")?];
                while let Some(TokenKind::Comma) = self.peek_kind(0) {
                    self.pos += 1;
                    operands.push(self.ident("gate operand")?);
                }
                self.expect(&TokenKind::RParen, "`)` or `,`")?;
                Ok(Action::Gate { kind, operands })
            }
            TokenKind::Ident(name) => {
                let name = name.clone();
                match self.peek_kind(1) {
                    Some(TokenKind::Bang) => {
                        self.pos += 2;
                        let var = self.ident("variable to send")?;
                        Ok(Action::Send { channel: name, var })
                    }
                    Some(TokenKind::Question) => {
                        self.pos += 2;
                        let var = self.ident("variable to receive into")?;
                        Ok(Action::Receive { channel: name, var })
                    }
                    Some(TokenKind::Assign) => {
                        self.pos += 2;
                        self.expect(&TokenKind::Keyword(Keyword::Measure), "`measure`")?;
                        let qubit = self.ident("qubit to measure")?;
                        Ok(Action::Measure {
                            target: name,
                            qubit,
                        })
                    }
                    _ => {
                        self.pos += 1;
                        Err(self.error("`!`, `?` or `:=`"))
                    }
                }
            }
            _ => Err(self.error(EXPECTED)),
        }
    }
}

/// Parse a whole file: either `Name = term` definitions or one bare term
/// (which is returned as a definition named `Main`).
pub fn parse(tokens: &[Token]) -> Result<SourceFile, ParseError> {
    Parser::new(tokens).file()
}

/// Parse a single bare term.
pub fn parse_term(tokens: &[Token]) -> Result<ProcessTerm, ParseError> {
    let mut p = Parser::new(tokens);
    let term = p.term()?;
    if !p.at_end() {
        return Err(p.error("`|` or end of input"));
    }
    Ok(term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::ast::GateKind;
    use crate::lang::lexer::tokenize;

    fn term(src: &str) -> ProcessTerm {
        parse_term(&tokenize(src).unwrap()).unwrap().without_spans()
    }

    #[test]
    fn nil_is_empty_process() {
        assert_eq!(term("nil"), ProcessTerm::Nil);
    }

    #[test]
    fn prefix_chain() {
        let expected = ProcessTerm::prefix(
            Action::Input {
                var: "x".into(),
                sort: Sort::Qubit,
                slot: 0,
            },
            ProcessTerm::prefix(
                Action::Output {
                    var: "x".into(),
                    slot: 0,
                },
                ProcessTerm::Nil,
            ),
        );
        assert_eq!(term("input x.output x.nil"), expected);
    }

    #[test]
    fn parallel_binds_looser_than_prefix() {
        let gate = |k, v: &str| Action::Gate {
            kind: k,
            operands: vec![v.to_string()],
        };
        let expected = ProcessTerm::parallel(
            ProcessTerm::prefix(gate(GateKind::X, "a"), ProcessTerm::Nil),
            ProcessTerm::prefix(gate(GateKind::Z, "b"), ProcessTerm::Nil),
        );
        assert_eq!(term("X(a).nil | Z(b).nil"), expected);
    }

    #[test]
    fn parallel_is_left_associative() {
        match term("nil | nil | H(a).nil") {
            ProcessTerm::Parallel(l, r) => {
                assert!(matches!(l.as_ref(), ProcessTerm::Parallel(..)));
                assert!(matches!(r.as_ref(), ProcessTerm::Prefix { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn guard_covers_one_action() {
        let t = term("if n then X(w) . if m then Z(w) . output w . nil");
        let actions: Vec<String> = t.actions().iter().map(|(a, _)| a.to_string()).collect();
        assert_eq!(
            actions,
            vec!["if n then X(w)", "if m then Z(w)", "output w"]
        );
    }

    #[test]
    fn nested_guards() {
        let t = term("if a then if b then X(q) . nil");
        let (first, _) = t.actions()[0];
        match first {
            Action::If { cond, then } => {
                assert_eq!(cond, "a");
                assert!(matches!(then.as_ref(), Action::If { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slots_follow_source_order() {
        let t = term("input a:bit . output a . nil | input b . output b . nil");
        let slots: Vec<(String, usize)> = t
            .actions()
            .iter()
            .filter_map(|(a, _)| match a {
                Action::Input { var, slot, .. } => Some((format!("in {var}"), *slot)),
                Action::Output { var, slot } => Some((format!("out {var}"), *slot)),
                _ => None,
            })
            .collect();
        assert_eq!(
            slots,
            vec![
                ("in a".to_string(), 0),
                ("out a".to_string(), 0),
                ("in b".to_string(), 1),
                ("out b".to_string(), 1)
            ]
        );
    }

    #[test]
    fn named_definitions() {
        let src = "Implementation = newqubit y . H(y) . nil\nSpecification = input x.output x.nil";
        let file = parse(&tokenize(src).unwrap()).unwrap();
        assert_eq!(file.definitions.len(), 2);
        assert_eq!(file.definitions[0].name, "Implementation");
        assert_eq!(file.definitions[1].name, "Specification");
        assert_eq!(
            file.get("Specification").unwrap().body.without_spans(),
            term("input x.output x.nil")
        );
    }

    #[test]
    fn bare_term_becomes_main() {
        let file = parse(&tokenize("H(a).nil").unwrap()).unwrap();
        assert_eq!(file.definitions[0].name, "Main");
    }

    #[test]
    fn errors_point_at_earliest_bad_token() {
        let err = parse_term(&tokenize("H(a) nil").unwrap()).unwrap_err();
        assert_eq!(err.span, Some(Span::new(1, 6)));
        assert_eq!(err.expected, "`.`");

        let err = parse_term(&tokenize("newqubit y . H(y)").unwrap()).unwrap_err();
        assert_eq!(err.span, None);

        let err = parse_term(&tokenize("c y . nil").unwrap()).unwrap_err();
        assert_eq!(err.expected, "`!`, `?` or `:=`");

        let err = parse_term(&tokenize("input x:int . nil").unwrap()).unwrap_err();
        assert_eq!(err.expected, "`bit` or `qubit`");

        let err = parse(&tokenize("A = nil nil").unwrap()).unwrap_err();
        assert_eq!(err.span, Some(Span::new(1, 9)));
    }

    #[test]
    fn parenthesised_parallel_after_prefix() {
        let t = term("newqubit a . (H(a).nil | nil)");
        match t {
            ProcessTerm::Prefix { rest, .. } => {
                assert!(matches!(rest.as_ref(), ProcessTerm::Parallel(..)))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
