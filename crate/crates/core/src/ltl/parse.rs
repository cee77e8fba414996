//! Concrete syntax for finite-LTL formulas.
//!
//! Grammar, tightest binding first:
//!
//! | level | operators                          | associativity |
//! |-------|------------------------------------|---------------|
//! | unary | `!` `X` `<>` `[]`                  | prefix        |
//! | 1     | `U` `R`                            | right         |
//! | 2     | `&&`                               | n-ary         |
//! | 3     | `\|\|`                             | n-ary         |
//! | 4     | `->`                               | right         |
//! | 5     | `<->`                              | left          |
//!
//! Atoms match `[a-zA-Z_][a-zA-Z0-9_]*`; `X`, `U`, `R`, `true` and `false`
//! are reserved.

use super::formula::Formula;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Next,
    Until,
    Release,
    Eventually,
    Always,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Not => "`!`".into(),
            Tok::And => "`&&`".into(),
            Tok::Or => "`||`".into(),
            Tok::Implies => "`->`".into(),
            Tok::Iff => "`<->`".into(),
            Tok::Next => "`X`".into(),
            Tok::Until => "`U`".into(),
            Tok::Release => "`R`".into(),
            Tok::Eventually => "`<>`".into(),
            Tok::Always => "`[]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let rest = &text[i..];
        let (tok, len) = if rest.starts_with("<->") {
            (Tok::Iff, 3)
        } else if rest.starts_with("->") {
            (Tok::Implies, 2)
        } else if rest.starts_with("&&") {
            (Tok::And, 2)
        } else if rest.starts_with("||") {
            (Tok::Or, 2)
        } else if rest.starts_with("<>") {
            (Tok::Eventually, 2)
        } else if rest.starts_with("[]") {
            (Tok::Always, 2)
        } else if c == b'!' {
            (Tok::Not, 1)
        } else if c == b'(' {
            (Tok::LParen, 1)
        } else if c == b')' {
            (Tok::RParen, 1)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let word = &text[i..j];
            let tok = match word {
                "X" => Tok::Next,
                "U" => Tok::Until,
                "R" => Tok::Release,
                "true" => Tok::True,
                "false" => Tok::False,
                _ => Tok::Ident(word.to_string()),
            };
            (tok, j - i)
        } else {
            let ch = rest.chars().next().unwrap_or('?');
            return Err(SyntaxError {
                offset: start,
                expected: vec!["a formula token".into()],
                found: format!("character `{ch}`"),
            });
        };
        toks.push((tok, start));
        i += len;
    }
    toks.push((Tok::End, text.len()));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let (tok, offset) = &self.toks[self.pos];
        SyntaxError {
            offset: *offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.describe(),
        }
    }

    fn iff(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.implies()?;
        while *self.peek() == Tok::Iff {
            self.bump();
            let rhs = self.implies()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, SyntaxError> {
        let first = self.and()?;
        if *self.peek() != Tok::Or {
            return Ok(first);
        }
        let mut items = vec![first];
        while *self.peek() == Tok::Or {
            self.bump();
            items.push(self.and()?);
        }
        Ok(Formula::Or(items))
    }

    fn and(&mut self) -> Result<Formula, SyntaxError> {
        let first = self.binary_temporal()?;
        if *self.peek() != Tok::And {
            return Ok(first);
        }
        let mut items = vec![first];
        while *self.peek() == Tok::And {
            self.bump();
            items.push(self.binary_temporal()?);
        }
        Ok(Formula::And(items))
    }

    fn binary_temporal(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.unary()?;
        match self.peek() {
            Tok::Until => {
                self.bump();
                let rhs = self.binary_temporal()?;
                Ok(Formula::until(lhs, rhs))
            }
            Tok::Release => {
                self.bump();
                let rhs = self.binary_temporal()?;
                Ok(Formula::release(lhs, rhs))
            }
            _ => Ok(lhs),
        }
    }

    fn unary(&mut self) -> Result<Formula, SyntaxError> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Next => {
                self.bump();
                Ok(Formula::next(self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            Tok::Always => {
                self.bump();
                Ok(Formula::always(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.iff()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&["`)`", "binary operator"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Prop(name))
            }
            _ => Err(self.error(&["atom", "`(`", "unary operator", "`true`", "`false`"])),
        }
    }
}

/// Parses a formula from its concrete syntax.
pub fn parse(text: &str) -> Result<Formula, SyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    if *p.peek() == Tok::End {
        return Err(p.error(&["a formula"]));
    }
    let f = p.iff()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["binary operator", "end of input"]));
    }
    Ok(f)
}
