//! Text syntax for terms, expectation formulas and effect-rule files.
//!
//! ```text
//! term    ::= INT | VAR | ident [ "(" term {"," term} ")" ] | "[" [term {"," term}] "]" | "@" ident
//! formula ::= "next(" F ")" | "eventually(" F ")" | "always(" F ")" | "never(" F ")"
//!           | "not(" F ")" | "and([" F {"," F} "])" | "or([" F {"," F} "])"
//!           | "happ(" term ")" | "happ(" term "," term ")" | "viol(" F "," F ")"
//!           | "@" ident | "true" | "false" | term
//! rule    ::= ("initiates" | "terminates") "(" term "," term ")" [":-" body {"," body}] "."
//! body    ::= "holds_at(" term ")" | "not_holds(" term ")" | "is(" VAR "," term ")"
//!           | "const(" ident "," VAR ")"
//! ```
//!
//! `%` starts a comment that runs to the end of the line.

use std::fmt;

use thiserror::Error;

use crate::engine::{BodyAtom, EffectKind, EffectRule};
use crate::formula::Formula;
use crate::term::{Term, LABEL_FUNCTOR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    At,
    Neck,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Var(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::At => f.write_str("`@`"),
            Tok::Neck => f.write_str("`:-`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn error_at(src: &str, offset: usize, message: impl Into<String>) -> ParseError {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ParseError {
        offset,
        line,
        column,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'%' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' | b')' | b'[' | b']' | b',' | b'.' | b'@' => {
                out.push((
                    match c {
                        b'(' => Tok::LParen,
                        b')' => Tok::RParen,
                        b'[' => Tok::LBracket,
                        b']' => Tok::RBracket,
                        b',' => Tok::Comma,
                        b'.' => Tok::Dot,
                        _ => Tok::At,
                    },
                    start,
                ));
                i += 1;
            }
            b':' if bytes.get(i + 1) == Some(&b'-') => {
                out.push((Tok::Neck, start));
                i += 2;
            }
            b'-' | b'0'..=b'9' => {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                if text == "-" {
                    return Err(error_at(src, start, "expected digits after `-`"));
                }
                let n = text
                    .parse()
                    .map_err(|_| error_at(src, start, format!("integer out of range: {text}")))?;
                out.push((Tok::Int(n), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = src[start..i].to_string();
                if c.is_ascii_lowercase() {
                    out.push((Tok::Ident(word), start));
                } else {
                    out.push((Tok::Var(word), start));
                }
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(error_at(src, start, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        Ok(Parser {
            src,
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        error_at(self.src, self.offset(), message)
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {want}, found {}", self.peek())))
        }
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            other => Err(self.error(format!("unexpected {other} after end of input"))),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected an identifier, found {other}"))),
        }
    }

    fn term_list(&mut self, close: Tok) -> Result<Vec<Term>, ParseError> {
        let mut items = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            items.push(self.term()?);
        }
        self.expect(close)?;
        Ok(items)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Term::Number(n))
            }
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::At => {
                self.bump();
                let label = self.ident()?;
                Ok(Term::compound(LABEL_FUNCTOR, vec![Term::atom(label)]))
            }
            Tok::LBracket => {
                self.bump();
                if *self.peek() == Tok::RBracket {
                    self.bump();
                    return Ok(Term::list(Vec::new()));
                }
                Ok(Term::list(self.term_list(Tok::RBracket)?))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    Ok(Term::compound(name, self.term_list(Tok::RParen)?))
                } else {
                    Ok(Term::Atom(name))
                }
            }
            other => Err(self.error(format!("expected a term, found {other}"))),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        if *self.peek() == Tok::At {
            self.bump();
            return Ok(Formula::Label(self.ident()?));
        }
        if let Tok::Ident(name) = self.peek().clone() {
            if *self.peek_at(1) == Tok::LParen {
                if let Some(f) = self.operator(&name)? {
                    return Ok(f);
                }
            } else if name == "true" {
                self.bump();
                return Ok(Formula::True);
            } else if name == "false" {
                self.bump();
                return Ok(Formula::False);
            }
        }
        let start = self.offset();
        match self.term()? {
            Term::Number(_) => Err(error_at(self.src, start, "a number is not a formula")),
            t => Ok(Formula::Fluent(t)),
        }
    }

    /// Parses `name(...)` when `name` is a formula operator.
    fn operator(&mut self, name: &str) -> Result<Option<Formula>, ParseError> {
        let unary: fn(Formula) -> Formula = match name {
            "next" => Formula::next,
            "eventually" => Formula::eventually,
            "always" => Formula::always,
            "never" => |f| Formula::always(Formula::not(f)),
            "not" => Formula::not,
            "and" | "or" | "happ" | "viol" => |f| f,
            _ => return Ok(None),
        };
        self.bump();
        self.expect(Tok::LParen)?;
        let f = match name {
            "and" | "or" => {
                self.expect(Tok::LBracket)?;
                if *self.peek() == Tok::RBracket {
                    return Err(self.error(format!("{name}([]) needs at least one operand")));
                }
                let mut parts = vec![self.formula()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    parts.push(self.formula()?);
                }
                self.expect(Tok::RBracket)?;
                if name == "and" {
                    Formula::And(parts)
                } else {
                    Formula::Or(parts)
                }
            }
            "happ" => {
                let first = self.term()?;
                if *self.peek() == Tok::Comma {
                    self.bump();
                    Formula::HappBy(first, self.term()?)
                } else {
                    Formula::Happ(first)
                }
            }
            "viol" => {
                let cond = self.formula()?;
                self.expect(Tok::Comma)?;
                Formula::viol(cond, self.formula()?)
            }
            _ => unary(self.formula()?),
        };
        self.expect(Tok::RParen)?;
        Ok(Some(f))
    }

    fn rule(&mut self, index: usize) -> Result<EffectRule, ParseError> {
        let start = self.offset();
        let head = self.term()?;
        let kind = match (head.functor(), head.arity()) {
            (Some("initiates"), 2) => EffectKind::Initiates,
            (Some("terminates"), 2) => EffectKind::Terminates,
            _ => {
                return Err(error_at(
                    self.src,
                    start,
                    format!("rule head must be initiates/2 or terminates/2, found {head}"),
                ))
            }
        };
        let mut body = Vec::new();
        if *self.peek() == Tok::Neck {
            self.bump();
            loop {
                let at = self.offset();
                let atom = self.term()?;
                body.push(body_atom(&atom).ok_or_else(|| {
                    error_at(self.src, at, format!("unsupported body atom {atom}"))
                })?);
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
        }
        self.expect(Tok::Dot)?;
        let args = head.args();
        EffectRule::new(kind, args[0].clone(), args[1].clone(), body)
            .map(|r| r.named(format!("rule {} ({})", index + 1, head)))
            .map_err(|e| error_at(self.src, start, e.to_string()))
    }
}

fn body_atom(t: &Term) -> Option<BodyAtom> {
    let args = t.args();
    match (t.functor()?, args.len()) {
        ("holds_at", 1) => Some(BodyAtom::HoldsAt(args[0].clone())),
        ("not_holds", 1) => Some(BodyAtom::NotHolds(args[0].clone())),
        ("is", 2) => match &args[0] {
            Term::Var(v) => Some(BodyAtom::Is(v.clone(), args[1].clone())),
            _ => None,
        },
        ("const", 2) => match (&args[0], &args[1]) {
            (Term::Atom(name), Term::Var(v)) => Some(BodyAtom::Const(name.clone(), v.clone())),
            _ => None,
        },
        _ => None,
    }
}

pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.term()?;
    p.expect_end()?;
    Ok(t)
}

/// Parses an expectation formula. `never(F)` is read as `always(not(F))`.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula()?;
    p.expect_end()?;
    Ok(f)
}

/// Parses a whole effect-rule file.
pub fn parse_rules(text: &str) -> Result<Vec<EffectRule>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut rules = Vec::new();
    while *p.peek() != Tok::Eof {
        rules.push(p.rule(rules.len())?);
    }
    Ok(rules)
}

/// Parses a `.`-terminated list of ground terms, as used for fact lists.
pub fn parse_facts(text: &str) -> Result<Vec<Term>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        out.push(p.term()?);
        p.expect(Tok::Dot)?;
    }
    Ok(out)
}
