use std::fmt;

use thiserror::Error;

use super::ast::{GateKind, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    NewQubit,
    Input,
    Output,
    Measure,
    If,
    Then,
    Nil,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Keyword> {
        Some(match word {
            "newqubit" => Keyword::NewQubit,
            "input" => Keyword::Input,
            "output" => Keyword::Output,
            "measure" => Keyword::Measure,
            "if" => Keyword::If,
            "then" => Keyword::Then,
            "nil" => Keyword::Nil,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::NewQubit => "newqubit",
            Keyword::Input => "input",
            Keyword::Output => "output",
            Keyword::Measure => "measure",
            Keyword::If => "if",
            Keyword::Then => "then",
            Keyword::Nil => "nil",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Keyword(Keyword),
    Gate(GateKind),
    Bang,
    Question,
    Dot,
    Bar,
    Assign,
    Colon,
    LParen,
    RParen,
    Comma,
    Equals,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Keyword(k) => write!(f, "`{}`", k.as_str()),
            TokenKind::Gate(g) => write!(f, "gate `{g}`"),
            TokenKind::Bang => f.write_str("`!`"),
            TokenKind::Question => f.write_str("`?`"),
            TokenKind::Dot => f.write_str("`.`"),
            TokenKind::Bar => f.write_str("`|`"),
            TokenKind::Assign => f.write_str("`:=`"),
            TokenKind::Colon => f.write_str("`:`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Equals => f.write_str("`=`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: unexpected character {ch:?}")]
pub struct LexError {
    pub ch: char,
    pub span: Span,
}

/// Split protocol source text into tokens. `//` comments run to end of line.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let (mut line, mut col) = (1u32, 1u32);

    while let Some(&c) = chars.peek() {
        let span = Span::new(line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };

        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut word = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                    word.push(c);
                    bump(&mut chars);
                } else {
                    break;
                }
            }
            let kind = if let Some(k) = Keyword::from_word(&word) {
                TokenKind::Keyword(k)
            } else if let Some(g) = GateKind::from_name(&word) {
                TokenKind::Gate(g)
            } else {
                TokenKind::Ident(word)
            };
            tokens.push(Token { kind, span });
            continue;
        }

        bump(&mut chars);
        let kind = match c {
            '!' => TokenKind::Bang,
            '?' => TokenKind::Question,
            '.' => TokenKind::Dot,
            '|' => TokenKind::Bar,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ',' => TokenKind::Comma,
            '=' => TokenKind::Equals,
            ':' => {
                if chars.peek() == Some(&'=') {
                    bump(&mut chars);
                    TokenKind::Assign
                } else {
                    TokenKind::Colon
                }
            }
            '/' if chars.peek() == Some(&'/') => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
                continue;
            }
            other => return Err(LexError { ch: other, span }),
        };
        tokens.push(Token { kind, span });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    fn ident(s: &str) -> TokenKind {
        TokenKind::Ident(s.to_string())
    }

    #[test]
    fn single_keyword() {
        assert_eq!(kinds("nil"), vec![TokenKind::Keyword(Keyword::Nil)]);
    }

    #[test]
    fn sends_and_dots() {
        assert_eq!(
            kinds("c!y . d!z . nil"),
            vec![
                ident("c"),
                TokenKind::Bang,
                ident("y"),
                TokenKind::Dot,
                ident("d"),
                TokenKind::Bang,
                ident("z"),
                TokenKind::Dot,
                TokenKind::Keyword(Keyword::Nil),
            ]
        );
    }

    #[test]
    fn measurement_assignment() {
        assert_eq!(
            kinds("m := measure x"),
            vec![
                ident("m"),
                TokenKind::Assign,
                TokenKind::Keyword(Keyword::Measure),
                ident("x"),
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        let toks = tokenize("// Alice's process:\nH(x) // trailing\n. nil").unwrap();
        assert_eq!(toks.len(), 6);
        assert_eq!(toks[0].kind, TokenKind::Gate(GateKind::H));
        assert_eq!(toks[0].span, Span::new(2, 1));
        assert_eq!(toks[5].span, Span::new(3, 3));
    }

    #[test]
    fn sort_annotation_and_colon() {
        assert_eq!(
            kinds("input a:bit"),
            vec![
                TokenKind::Keyword(Keyword::Input),
                ident("a"),
                TokenKind::Colon,
                ident("bit"),
            ]
        );
    }

    #[test]
    fn bad_character_reports_position() {
        let err = tokenize("nil\n  # x").unwrap_err();
        assert_eq!(err.ch, '#');
        assert_eq!(err.span, Span::new(2, 3));
        let err = tokenize("a / b").unwrap_err();
        assert_eq!(err.ch, '/');
    }
}
