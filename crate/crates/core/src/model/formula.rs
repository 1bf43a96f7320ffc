//! Predictor formulas.
//!
//! ```text
//! formula := term ('+' term)*
//! term    := '1' | NAME | 'pow(' NAME ')'
//! ```
//!
//! `1` is the intercept, `NAME` a linear covariate with its own coefficient
//! and `pow(NAME)` the term `x^b` whose exponent `b` is the parameter.
//! Parameters are ordered as the terms appear.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Intercept,
    Linear(String),
    Power(String),
}

impl Term {
    pub fn covariate(&self) -> Option<&str> {
        match self {
            Term::Intercept => None,
            Term::Linear(name) | Term::Power(name) => Some(name),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Intercept => f.write_str("1"),
            Term::Linear(name) => f.write_str(name),
            Term::Power(name) => write!(f, "pow({name})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PredictorSpec {
    terms: Vec<Term>,
}

impl PredictorSpec {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let mut seen_intercept = false;
        for (i, term) in terms.iter().enumerate() {
            match term {
                Term::Intercept if seen_intercept => {
                    return Err(Error::Formula("duplicate intercept".into()));
                }
                Term::Intercept => seen_intercept = true,
                _ => {
                    if terms[..i].contains(term) {
                        return Err(Error::Formula(format!("duplicate term '{term}'")));
                    }
                }
            }
        }
        if terms.is_empty() {
            return Err(Error::Formula("formula has no terms".into()));
        }
        Ok(Self { terms })
    }

    pub fn intercept() -> Self {
        Self { terms: vec![Term::Intercept] }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_intercept(&self) -> bool {
        self.terms.contains(&Term::Intercept)
    }

    pub fn is_intercept_only(&self) -> bool {
        self.terms == [Term::Intercept]
    }

    /// True when every term is linear in its parameter.
    pub fn is_linear(&self) -> bool {
        !self.terms.iter().any(|t| matches!(t, Term::Power(_)))
    }

    pub fn covariates(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(Term::covariate)
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PredictorSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_formula(s)
    }
}

impl TryFrom<String> for PredictorSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        parse_formula(&s)
    }
}

impl From<PredictorSpec> for String {
    fn from(p: PredictorSpec) -> String {
        p.to_string()
    }
}

pub fn parse_formula(text: &str) -> Result<PredictorSpec> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let mut terms = vec![p.term()?];
    loop {
        p.skip_ws();
        match p.peek() {
            None => break,
            Some(b'+') => {
                p.pos += 1;
                terms.push(p.term()?);
            }
            Some(c) => return Err(p.error(format!("expected '+' or end of formula, found '{}'", c as char))),
        }
    }
    PredictorSpec::new(terms)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: String) -> Error {
        Error::Syntax { offset: self.pos, message }
    }

    fn expect(&mut self, want: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", want as char)))
        }
    }

    fn name(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {}
            _ => return Err(self.error("expected a covariate name".into())),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_' || c == b'.') {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn term(&mut self) -> Result<Term> {
        self.skip_ws();
        match self.peek() {
            Some(b'1') => {
                self.pos += 1;
                if matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'.') {
                    return Err(self.error("only the constant 1 is allowed".into()));
                }
                Ok(Term::Intercept)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let name = self.name()?;
                let save = self.pos;
                self.skip_ws();
                if name == "pow" && self.peek() == Some(b'(') {
                    self.pos += 1;
                    let inner = self.name()?;
                    self.expect(b')')?;
                    Ok(Term::Power(inner))
                } else {
                    self.pos = save;
                    Ok(Term::Linear(name))
                }
            }
            None => Err(self.error("unexpected end of formula".into())),
            Some(c) => Err(self.error(format!("unexpected '{}'", c as char))),
        }
    }
}
